//! Randomized checks of the Wick evaluator against a direct occupation-number
//! calculation and against its algebraic identities.

use std::collections::HashMap;

use biphoton_core::algebra::{vacuum_expectation, ModeId, OperatorExpression, OperatorTerm};
use num_complex::Complex64;
use proptest::prelude::*;

const MODES: u32 = 4;

fn term() -> impl Strategy<Value = OperatorTerm> {
    (0..MODES, any::<bool>(), -2.0..2.0f64, -2.0..2.0f64, 0..3u32).prop_map(
        |(m, dagger, re, im, order)| OperatorTerm {
            mode: ModeId(m),
            dagger,
            coeff: Complex64::new(re, im),
            order,
        },
    )
}

fn expression(max_terms: usize) -> impl Strategy<Value = OperatorExpression> {
    prop::collection::vec(term(), 1..=max_terms).prop_map(OperatorExpression::from_terms)
}

fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
    (a - b).norm() <= tol * (1.0 + a.norm().max(b.norm()))
}

/// Applies an operator product right to left on a sparse occupation vector,
/// starting from the vacuum, and projects back onto the vacuum.
fn fock_expectation(product: &[&OperatorExpression]) -> Complex64 {
    let mut state: HashMap<[u8; MODES as usize], Complex64> = HashMap::new();
    state.insert([0; MODES as usize], Complex64::new(1.0, 0.0));
    for expr in product.iter().rev() {
        let mut next: HashMap<[u8; MODES as usize], Complex64> = HashMap::new();
        for (occ, amp) in &state {
            for t in expr.terms() {
                let m = t.mode.index();
                let mut target = *occ;
                let factor = if t.dagger {
                    target[m] += 1;
                    (target[m] as f64).sqrt()
                } else {
                    if occ[m] == 0 {
                        continue;
                    }
                    target[m] -= 1;
                    (occ[m] as f64).sqrt()
                };
                *next.entry(target).or_default() += amp * t.coeff * factor;
            }
        }
        state = next;
    }
    state.get(&[0; MODES as usize]).copied().unwrap_or_default()
}

#[test]
fn mode_orthogonality() {
    for m in 0..MODES {
        for n in 0..MODES {
            for (dl, dr) in [(false, false), (false, true), (true, false), (true, true)] {
                let mk = |mode, dagger| {
                    if dagger {
                        OperatorExpression::creator(ModeId(mode))
                    } else {
                        OperatorExpression::annihilator(ModeId(mode))
                    }
                };
                let v = vacuum_expectation(&[&mk(m, dl), &mk(n, dr)]).value();
                let want = if m == n && !dl && dr { 1.0 } else { 0.0 };
                assert_eq!(v, Complex64::new(want, 0.0), "m={m} n={n} {dl} {dr}");
            }
        }
    }
}

#[test]
fn four_operator_vacuum_values() {
    let a = |m| OperatorExpression::annihilator(ModeId(m));
    let ad = |m| OperatorExpression::creator(ModeId(m));
    // single mode a a† a a† -> 1; two distinct modes -> 1
    assert_eq!(
        vacuum_expectation(&[&a(0), &ad(0), &a(0), &ad(0)]).value(),
        Complex64::new(1.0, 0.0)
    );
    assert_eq!(
        vacuum_expectation(&[&a(3), &ad(3), &a(1), &ad(1)]).value(),
        Complex64::new(1.0, 0.0)
    );
    assert_eq!(
        fock_expectation(&[&a(0), &ad(0), &a(0), &ad(0)]),
        Complex64::new(1.0, 0.0)
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn wick_matches_fock_space(
        factors in prop::collection::vec(expression(2), 1..=3),
        extra in prop::collection::vec(expression(1), 0..=3),
    ) {
        // ≤ 6 factors of ≤ 4 modes
        let all: Vec<OperatorExpression> = factors.into_iter().chain(extra).take(6).collect();
        let refs: Vec<&OperatorExpression> = all.iter().collect();
        let wick = vacuum_expectation(&refs).value();
        let fock = fock_expectation(&refs);
        prop_assert!(close(wick, fock, 1e-10), "wick {wick} fock {fock}");
    }

    #[test]
    fn multilinear_in_each_factor(
        e1 in expression(4), e2 in expression(4), f in expression(4), g in expression(4),
        alpha_re in -2.0..2.0f64, alpha_im in -2.0..2.0f64, slot in 0usize..3,
    ) {
        let alpha = Complex64::new(alpha_re, alpha_im);
        let combo = e1.scaled(alpha).add(&e2);
        let with = |x: &OperatorExpression| -> Complex64 {
            let mut prod: Vec<&OperatorExpression> = vec![&f, &g];
            prod.insert(slot, x);
            vacuum_expectation(&prod).value()
        };
        let lhs = with(&combo);
        let rhs = alpha * with(&e1) + with(&e2);
        prop_assert!(close(lhs, rhs, 1e-10), "{lhs} vs {rhs}");
    }

    #[test]
    fn induced_norm_is_nonnegative(e in expression(6)) {
        let adj = e.adjoint();
        let v = vacuum_expectation(&[&adj, &e]).value();
        prop_assert!(v.im.abs() <= 1e-12);
        prop_assert!(v.re >= -1e-12);
        let ff = vacuum_expectation(&[&adj, &adj, &e, &e]).value();
        prop_assert!(ff.im.abs() <= 1e-10 * (1.0 + ff.re.abs()));
        prop_assert!(ff.re >= -1e-10);
    }

    #[test]
    fn adjoint_is_an_involution(e in expression(6)) {
        prop_assert_eq!(e.adjoint().adjoint(), e);
    }

    #[test]
    fn conjugate_of_product_is_reversed_adjoint_product(
        factors in prop::collection::vec(expression(3), 1..=4),
    ) {
        let refs: Vec<&OperatorExpression> = factors.iter().collect();
        let adj: Vec<OperatorExpression> = factors.iter().rev().map(|e| e.adjoint()).collect();
        let adj_refs: Vec<&OperatorExpression> = adj.iter().collect();
        let lhs = vacuum_expectation(&refs).value().conj();
        let rhs = vacuum_expectation(&adj_refs).value();
        prop_assert!(close(lhs, rhs, 1e-12));
    }

    #[test]
    fn order_filter_is_idempotent_and_bounded(e in expression(6), k in 0u32..3) {
        let f = e.filter_by_order(k);
        prop_assert!(f.max_order().is_none_or(|o| o <= k));
        prop_assert_eq!(f.filter_by_order(k), f.clone());
        let exp = vacuum_expectation(&[&e.adjoint(), &e]);
        let fe = exp.filter_by_order(2 * k);
        prop_assert!(fe.by_order.keys().all(|o| *o <= 2 * k));
        prop_assert_eq!(fe.filter_by_order(2 * k), fe.clone());
    }
}
