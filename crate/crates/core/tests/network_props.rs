//! Propagation, rate and complementarity properties on the three-crystal
//! layout and on random tables.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use biphoton_core::algebra::OperatorExpression;
use biphoton_core::analysis::{
    apply_pump_coherence, contrast, fringe_stats, path_contrast, scan, scan_with_coherence,
    two_path_visibility, CoherenceMatrix, ScanConfig,
};
use biphoton_core::fock_oracle::{random_network, RandomNetworkSpec};
use biphoton_core::network::{
    three_crystal, vacuum_weights, Coupling, Element, Network, Normalization, ScanPoint,
};
use biphoton_core::rates::{evaluate, evaluate_with_split, Observable};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn coupling() -> impl Strategy<Value = Coupling> {
    (0.0..1.0f64, 0.0..TAU).prop_map(|(m, p)| Coupling::new(m, p))
}

fn phase() -> impl Strategy<Value = f64> {
    0.0..TAU
}

fn unnormalized(c1: Coupling, c2: Coupling, c3: Coupling) -> Network {
    three_crystal(c1, c2, c3).with_normalization(Normalization::Paper)
}

fn rate(net: &Network, obs: &Observable, s: f64, i: f64) -> f64 {
    evaluate(net, obs, ScanPoint::new(s, i)).unwrap().value
}

/// Every canonical mode is tapped at the end, so a lossless table must
/// conserve each input's vacuum weight.
fn fully_tapped(mut net_elements: Vec<Element>, net: &Network) -> Network {
    net_elements.retain(|e| !matches!(e, Element::DetectorTap { .. }));
    let mut b = Network::builder();
    for (label, alias, _) in net.registry().registrations() {
        b = match alias {
            Some(t) => b.alias(label, t).unwrap(),
            None => b.mode(label).unwrap(),
        };
    }
    for e in net_elements {
        b = b.element(e);
    }
    for m in 0..net.registry().canonical_count() {
        let label = net
            .registry()
            .canonical_label(biphoton_core::ModeId(m as u32))
            .unwrap()
            .to_owned();
        b = b.detector(&format!("T{m}"), &label).unwrap();
    }
    b.build().unwrap()
}

#[test]
fn zero_coupling_propagation_is_unitary_on_random_tables() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let net = random_network(&mut rng, RandomNetworkSpec::default()).with_scaled_couplings(0.0);
        let tapped = fully_tapped(net.elements().to_vec(), &net);
        let fields = tapped.propagate_at(ScanPoint::new(0.7, 1.9)).unwrap();
        for (_, w) in vacuum_weights(&fields) {
            assert!((w - 1.0).abs() < 1e-12, "{w}");
        }
    }
}

#[test]
fn order_grading_respects_truncation() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for k in 0..3 {
        for _ in 0..50 {
            let net =
                random_network(&mut rng, RandomNetworkSpec::default()).with_truncation_order(k);
            for (_, e) in net.propagate().unwrap().iter() {
                assert!(e.max_order().is_none_or(|o| o <= k));
            }
        }
    }
}

#[test]
fn idler_coefficient_carries_both_crystals() {
    let (c1, c2, c3) = (
        Complex64::from_polar(0.3, 0.4),
        Complex64::from_polar(0.6, -2.0),
        Complex64::from_polar(0.2, 1.0),
    );
    let net = unnormalized(
        Coupling::from_complex(c1),
        Coupling::from_complex(c2),
        Coupling::from_complex(c3),
    );
    let i1 = net.registry().resolve("i2").unwrap();
    for k in 0..8 {
        let phi_s = k as f64 * 0.8;
        let a = net.propagate_at(ScanPoint::new(phi_s, 0.0)).unwrap();
        let want = Complex64::i() * c1 * Complex64::from_polar(1.0, phi_s) + c2;
        assert!((a.get("A").unwrap().coefficient(i1, true) - want).norm() < 1e-12);
    }
}

fn reordered(net: &Network, j: usize) -> Network {
    let mut elements = net.elements().to_vec();
    elements.swap(j, j + 1);
    let mut b = Network::builder();
    for (label, alias, _) in net.registry().registrations() {
        b = match alias {
            Some(t) => b.alias(label, t).unwrap(),
            None => b.mode(label).unwrap(),
        };
    }
    for e in elements {
        b = b.element(e);
    }
    b.truncation_order(net.truncation_order()).build().unwrap()
}

// tap order only changes the listing order of the detector fields
fn by_label(net: &Network, p: ScanPoint) -> BTreeMap<String, OperatorExpression> {
    let fields = net.propagate_at(p).unwrap();
    fields
        .iter()
        .map(|(l, e)| (l.to_owned(), e.clone()))
        .collect()
}

#[test]
fn disjoint_elements_commute() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut swapped = 0;
    for _ in 0..500 {
        let net = random_network(&mut rng, RandomNetworkSpec::default());
        let els = net.elements();
        for j in 0..els.len().saturating_sub(1) {
            let a: Vec<_> = els[j].modes().iter().map(|m| m.id).collect();
            let b: Vec<_> = els[j + 1].modes().iter().map(|m| m.id).collect();
            if a.iter().any(|m| b.contains(m)) {
                continue;
            }
            let p = ScanPoint::new(0.3, 1.1);
            assert_eq!(by_label(&net, p), by_label(&reordered(&net, j), p));
            swapped += 1;
        }
    }
    assert!(swapped > 100);
}

#[test]
fn crystal_order_on_shared_path_is_immaterial_at_first_order() {
    let net = three_crystal(
        Coupling::new(0.2, 0.1),
        Coupling::new(0.3, 1.0),
        Coupling::new(0.25, -0.7),
    );
    // BBO1 and BBO3 share the s1 path and are adjacent in the layout
    assert!(matches!(&net.elements()[0], Element::Crystal { name, .. } if name == "BBO1"));
    assert!(matches!(&net.elements()[1], Element::Crystal { name, .. } if name == "BBO3"));
    let swapped = reordered(&net, 0);
    for k in 0..10 {
        let p = ScanPoint::new(0.4 * k as f64, -0.9 * k as f64);
        assert_eq!(
            net.propagate_at(p).unwrap(),
            swapped.propagate_at(p).unwrap()
        );
    }
    // at second order the cross terms do depend on the order
    let (n2, s2) = (
        net.clone().with_truncation_order(2),
        swapped.with_truncation_order(2),
    );
    assert_ne!(n2.propagate().unwrap(), s2.propagate().unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn rates_are_nonnegative(c1 in coupling(), c2 in coupling(), c3 in coupling(), s in phase(), i in phase()) {
        let net = three_crystal(c1, c2, c3);
        for obs in [Observable::singles("A"), Observable::singles("D"), Observable::coincidence("A", "D")] {
            prop_assert!(rate(&net, &obs, s, i) >= -1e-12);
        }
    }

    #[test]
    fn scale_covariance(c1 in coupling(), c2 in coupling(), c3 in coupling(), s in phase(), i in phase(), lambda in 0.1..3.0f64) {
        let net = three_crystal(c1, c2, c3);
        let scaled = net.with_scaled_couplings(lambda);
        for obs in [Observable::singles("A"), Observable::singles("D"), Observable::coincidence("A", "D")] {
            let (r, rl) = (rate(&net, &obs, s, i), rate(&scaled, &obs, s, i));
            prop_assert!((rl - lambda * lambda * r).abs() <= 1e-10 * (1.0 + rl.abs()));
        }
    }

    #[test]
    fn background_additivity(c1 in coupling(), c2 in coupling(), c3 in coupling(), s in phase()) {
        let three = unnormalized(c1, c2, c3);
        let two = unnormalized(c1, c2, Coupling::ZERO);
        let a = Observable::singles("A");
        let diff = rate(&three, &a, s, 0.0) - rate(&two, &a, s, 0.0);
        prop_assert!((diff - c3.magnitude().powi(2)).abs() < 1e-12);
    }

    #[test]
    fn two_crystal_coincidence_ignores_idler_phase(c1 in coupling(), c2 in coupling(), s in phase()) {
        let net = unnormalized(c1, c2, Coupling::ZERO);
        let co = Observable::coincidence("A", "D");
        let base = rate(&net, &co, s, 0.0);
        let singles = rate(&net, &Observable::singles("A"), s, 0.0);
        prop_assert!((base - singles).abs() < 1e-12);
        for k in 1..16 {
            prop_assert!((rate(&net, &co, s, k as f64 * TAU / 16.0) - base).abs() < 1e-12);
        }
    }

    #[test]
    fn complementarity_two_crystals(m1 in 0.01..1.0f64, m2 in 0.01..1.0f64, p1 in phase(), p2 in phase()) {
        let (c1, c2) = (Complex64::from_polar(m1, p1), Complex64::from_polar(m2, p2));
        let v = two_path_visibility(c1, c2).unwrap();
        let k = contrast(c1, c2).unwrap();
        prop_assert!((v * v + k * k - 1.0).abs() < 1e-10);
    }

    #[test]
    fn complementarity_bound_with_partial_coherence(m1 in 0.05..1.0f64, m2 in 0.05..1.0f64, g in 0.0..=1.0f64) {
        let net = three_crystal(Coupling::real(m1), Coupling::real(m2), Coupling::ZERO);
        let gamma = CoherenceMatrix::uniform(&["BBO1", "BBO2", "BBO3"], g).unwrap();
        let a = Observable::singles("A");
        let table = scan_with_coherence(&net, &a, &gamma, &ScanConfig::signal_sweep(0.0, TAU, 129, 0.0)).unwrap();
        let stats = fringe_stats(&table).unwrap();
        let k = path_contrast(&net, &a, "BBO1", "BBO2").unwrap();
        let v_closed = g * two_path_visibility(Complex64::new(m1, 0.0), Complex64::new(m2, 0.0)).unwrap();
        prop_assert!((stats.visibility - v_closed).abs() < 1e-3);
        prop_assert!(stats.visibility.powi(2) + k * k <= 1.0 + 1e-10);
    }
}

#[test]
fn coherence_weighting_matches_closed_form_two_crystal() {
    let net = three_crystal(Coupling::real(1.0), Coupling::real(1.0), Coupling::ZERO)
        .with_normalization(Normalization::Paper);
    let gamma = CoherenceMatrix::uniform(&["BBO1", "BBO2", "BBO3"], 0.5).unwrap();
    for k in 0..16 {
        let phi = k as f64 * TAU / 16.0;
        let r = apply_pump_coherence(
            &net,
            &Observable::singles("A"),
            &gamma,
            ScanPoint::new(phi, 0.0),
        )
        .unwrap();
        // |C2|² + |C1|² + γ·2Re(C2* i C1 e^{iφ})
        assert!((r.value - (2.0 - phi.sin())).abs() < 1e-12);
    }
}

#[test]
fn split_background_difference_is_third_crystal_rate() {
    let three = unnormalized(
        Coupling::real(0.6),
        Coupling::real(0.8),
        Coupling::real(0.5),
    );
    let two = unnormalized(Coupling::real(0.6), Coupling::real(0.8), Coupling::ZERO);
    let a = Observable::singles("A");
    for k in 0..8 {
        let p = ScanPoint::new(k as f64 * PI / 4.0, 0.0);
        let b3 = evaluate_with_split(&three, &a, p).unwrap().split.unwrap();
        let b2 = evaluate_with_split(&two, &a, p).unwrap().split.unwrap();
        assert!((b3.background - b2.background - 0.25).abs() < 1e-12);
        assert!((b3.interference - b2.interference).abs() < 1e-12);
    }
}

#[test]
fn fringe_period_is_one_signal_wavelength() {
    let net = three_crystal(Coupling::real(1.0), Coupling::real(1.0), Coupling::ZERO);
    let table = scan(
        &net,
        &Observable::singles("A"),
        &ScanConfig::signal_sweep(0.0, 2.0 * TAU, 513, 0.0),
    )
    .unwrap();
    let maxima: Vec<f64> = table
        .rows
        .windows(3)
        .filter(|w| w[1].rate > w[0].rate && w[1].rate >= w[2].rate)
        .map(|w| w[1].point.phi_s)
        .collect();
    assert_eq!(maxima.len(), 2);
    assert!((maxima[1] - maxima[0] - TAU).abs() < 1e-9);
}

#[test]
fn sampled_visibility_matches_closed_form_on_reference_layout() {
    let grid = ScanConfig::Grid(
        (0..256)
            .map(|k| ScanPoint::new(TAU * k as f64 / 256.0, 0.0))
            .collect(),
    );
    for (c1, c2, c3) in [
        (0.1, 0.1, 0.0),
        (0.3, 0.1, 0.0),
        (0.1, 0.1, 0.1),
        (0.05, 0.2, 0.07),
    ] {
        let net = three_crystal(Coupling::real(c1), Coupling::real(c2), Coupling::real(c3));
        let stats = fringe_stats(&scan(&net, &Observable::singles("A"), &grid).unwrap()).unwrap();
        let closed = 2.0 * c1 * c2 / (c1 * c1 + c2 * c2 + c3 * c3);
        assert!(
            (stats.visibility - closed).abs() < 1e-6,
            "{} vs {closed}",
            stats.visibility
        );
    }
}
