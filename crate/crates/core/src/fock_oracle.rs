//! Brute-force cross-check in a truncated occupation-number basis.
//!
//! The perturbative biphoton state is built explicitly: each crystal applies
//! `exp(C a†_s a†_i − C* a_s a_i)` expanded to the requested order, each linear
//! element is applied by substituting its mode map into the creation
//! operators of every basis state. Click and pair probabilities are then read
//! off the state directly. Nothing here goes through the operator algebra or
//! its contraction routine.

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::OracleError;
use crate::network::{Coupling, Element, Network, Normalization, PhaseVar, ScanPoint};
use crate::rates::{evaluate, Observable};

pub const DEFAULT_N_MAX: u8 = 2;

/// Occupation number per canonical mode.
pub type Occupation = Vec<u8>;

type Ket = BTreeMap<Occupation, Complex64>;

const OVERFLOW_TOLERANCE: f64 = 1e-12;

/// State `Σ_p ψ_p` graded by perturbative order `p` in the pump couplings.
#[derive(Clone, Debug, PartialEq)]
pub struct FockState {
    n_max: u8,
    modes: usize,
    components: Vec<Ket>,
    taps: BTreeMap<String, usize>,
}

impl FockState {
    /// Single basis state `|occupation⟩` at order 0.
    pub fn basis(
        n_max: u8,
        occupation: Occupation,
        taps: &[(&str, usize)],
    ) -> Result<Self, OracleError> {
        if let Some((mode, _)) = occupation.iter().enumerate().find(|(_, n)| **n > n_max) {
            return Err(OracleError::OccupationOverflow { mode, n_max });
        }
        let modes = occupation.len();
        Ok(Self {
            n_max,
            modes,
            components: vec![BTreeMap::from([(occupation, Complex64::new(1.0, 0.0))])],
            taps: taps.iter().map(|(l, m)| ((*l).to_owned(), *m)).collect(),
        })
    }

    pub fn n_max(&self) -> u8 {
        self.n_max
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    /// Component of perturbative order `p`.
    pub fn component(&self, p: usize) -> Option<&BTreeMap<Occupation, Complex64>> {
        self.components.get(p)
    }

    /// Amplitudes of `Σ_p ψ_p`.
    pub fn amplitudes(&self) -> Ket {
        let mut out = Ket::new();
        for comp in &self.components {
            for (occ, amp) in comp {
                *out.entry(occ.clone()).or_default() += *amp;
            }
        }
        out
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes().values().map(|a| a.norm_sqr()).sum()
    }

    fn tap(&self, label: &str) -> Result<usize, OracleError> {
        self.taps
            .get(label)
            .copied()
            .ok_or_else(|| OracleError::UnknownDetector(label.to_owned()))
    }

    fn diagonal_by_order(
        &self,
        weight: impl Fn(&Occupation) -> f64,
    ) -> (BTreeMap<u32, f64>, BTreeSet<u32>) {
        let mut by_order = BTreeMap::new();
        let mut present = BTreeSet::new();
        for (p, bra) in self.components.iter().enumerate() {
            for (q, ket) in self.components.iter().enumerate() {
                let mut sum = Complex64::default();
                let mut any = false;
                for (occ, b) in bra {
                    let w = weight(occ);
                    if w == 0.0 {
                        continue;
                    }
                    if let Some(k) = ket.get(occ) {
                        sum += b.conj() * k * w;
                        any = true;
                    }
                }
                if any {
                    *by_order.entry((p + q) as u32).or_insert(0.0) += sum.re;
                    present.insert((p + q) as u32);
                }
            }
        }
        (by_order, present)
    }

    fn pair_weight(&self, a: &str, d: &str) -> Result<(usize, usize), OracleError> {
        let (ma, md) = (self.tap(a)?, self.tap(d)?);
        if ma == md {
            return Err(OracleError::SharedDetectorMode(a.to_owned(), d.to_owned()));
        }
        Ok((ma, md))
    }

    /// `⟨ψ|n̂_A|ψ⟩ / ⟨ψ|ψ⟩`.
    pub fn click_probability(&self, label: &str) -> Result<f64, OracleError> {
        let m = self.tap(label)?;
        Ok(self.normalized(|occ| occ[m] as f64))
    }

    /// `⟨ψ|n̂_A n̂_D|ψ⟩ / ⟨ψ|ψ⟩`.
    pub fn pair_probability(&self, a: &str, d: &str) -> Result<f64, OracleError> {
        let (ma, md) = self.pair_weight(a, d)?;
        Ok(self.normalized(|occ| (occ[ma] as f64) * (occ[md] as f64)))
    }

    fn normalized(&self, weight: impl Fn(&Occupation) -> f64) -> f64 {
        let amps = self.amplitudes();
        let norm: f64 = amps.values().map(|a| a.norm_sqr()).sum();
        if norm == 0.0 {
            return 0.0;
        }
        amps.iter()
            .map(|(occ, a)| a.norm_sqr() * weight(occ))
            .sum::<f64>()
            / norm
    }

    /// Lowest nonvanishing order of `⟨ψ|n̂_A|ψ⟩` (unnormalized).
    pub fn leading_click(&self, label: &str) -> Result<f64, OracleError> {
        let m = self.tap(label)?;
        Ok(leading(self.diagonal_by_order(|occ| occ[m] as f64)))
    }

    /// Lowest nonvanishing order of `⟨ψ|n̂_A n̂_D|ψ⟩` (unnormalized).
    pub fn leading_pair(&self, a: &str, d: &str) -> Result<f64, OracleError> {
        let (ma, md) = self.pair_weight(a, d)?;
        Ok(leading(self.diagonal_by_order(|occ| {
            (occ[ma] as f64) * (occ[md] as f64)
        })))
    }

    fn apply_crystal(&mut self, s: usize, i: usize, c: Complex64) -> Result<(), OracleError> {
        // exp(G) ψ graded: new_q = Σ_{p ≤ q} G^{q−p}/(q−p)! ψ_p
        let order = self.components.len() - 1;
        let mut next: Vec<Ket> = vec![Ket::new(); order + 1];
        for p in 0..=order {
            let mut term = self.components[p].clone();
            let mut factorial = 1.0;
            for (k, slot) in next.iter_mut().enumerate().skip(p) {
                if k > p {
                    term = self.apply_generator(&term, s, i, c)?;
                    factorial *= (k - p) as f64;
                }
                for (occ, amp) in &term {
                    *slot.entry(occ.clone()).or_default() += *amp / factorial;
                }
            }
        }
        self.components = next;
        Ok(())
    }

    /// `(C a†_s a†_i − C* a_s a_i) ψ`
    fn apply_generator(
        &self,
        ket: &Ket,
        s: usize,
        i: usize,
        c: Complex64,
    ) -> Result<Ket, OracleError> {
        let mut out = Ket::new();
        for (occ, amp) in ket {
            let (ns, ni) = (occ[s], occ[i]);
            if ns + 1 > self.n_max {
                return Err(OracleError::OccupationOverflow {
                    mode: s,
                    n_max: self.n_max,
                });
            }
            if ni + 1 > self.n_max {
                return Err(OracleError::OccupationOverflow {
                    mode: i,
                    n_max: self.n_max,
                });
            }
            let mut up = occ.clone();
            up[s] += 1;
            up[i] += 1;
            let f = (((ns + 1) as f64) * ((ni + 1) as f64)).sqrt();
            *out.entry(up).or_default() += c * amp * f;
            if ns > 0 && ni > 0 {
                let mut down = occ.clone();
                down[s] -= 1;
                down[i] -= 1;
                let f = ((ns as f64) * (ni as f64)).sqrt();
                *out.entry(down).or_default() -= c.conj() * amp * f;
            }
        }
        Ok(out)
    }

    fn apply_phase(&mut self, m: usize, phi: f64) {
        for comp in &mut self.components {
            for (occ, amp) in comp.iter_mut() {
                *amp *= Complex64::from_polar(1.0, phi * occ[m] as f64);
            }
        }
    }

    /// Two-mode linear map given by its Heisenberg matrix `out_j = Σ_k M_jk in_k`.
    ///
    /// In the Schrödinger picture each creation operator is replaced by
    /// `a†_j → Σ_k M_kj a†_k`.
    fn apply_two_mode(
        &mut self,
        x: usize,
        y: usize,
        m: [[Complex64; 2]; 2],
    ) -> Result<(), OracleError> {
        let idx = [x, y];
        let mut next = Vec::with_capacity(self.components.len());
        for comp in &self.components {
            let mut out = Ket::new();
            for (occ, amp) in comp {
                // polynomial in (a†_x, a†_y) keyed by powers
                let mut poly: BTreeMap<(usize, usize), Complex64> =
                    BTreeMap::from([((0, 0), Complex64::new(1.0, 0.0))]);
                let mut norm = 1.0;
                for (j, &mode) in idx.iter().enumerate() {
                    let n = occ[mode] as usize;
                    norm *= factorial(n);
                    for _ in 0..n {
                        let mut grown = BTreeMap::new();
                        for (&(px, py), &coef) in &poly {
                            *grown.entry((px + 1, py)).or_insert(Complex64::default()) +=
                                coef * m[0][j];
                            *grown.entry((px, py + 1)).or_insert(Complex64::default()) +=
                                coef * m[1][j];
                        }
                        poly = grown;
                    }
                }
                let scale = amp / norm.sqrt();
                for ((px, py), coef) in poly {
                    if coef.norm() <= OVERFLOW_TOLERANCE {
                        continue;
                    }
                    for (mode, p) in [(x, px), (y, py)] {
                        if p > self.n_max as usize {
                            return Err(OracleError::OccupationOverflow {
                                mode,
                                n_max: self.n_max,
                            });
                        }
                    }
                    let mut target = occ.clone();
                    target[x] = px as u8;
                    target[y] = py as u8;
                    let f = (factorial(px) * factorial(py)).sqrt();
                    *out.entry(target).or_default() += scale * coef * f;
                }
            }
            out.retain(|_, a| a.norm() > 0.0);
            next.push(out);
        }
        self.components = next;
        Ok(())
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn leading((by_order, present): (BTreeMap<u32, f64>, BTreeSet<u32>)) -> f64 {
    present
        .iter()
        .next()
        .and_then(|o| by_order.get(o))
        .copied()
        .unwrap_or(0.0)
}

/// Builds the graded state for `network` at scan point `point`.
pub fn build_state(
    network: &Network,
    point: ScanPoint,
    perturbation_order: u32,
) -> Result<FockState, OracleError> {
    build_state_with(network, point, perturbation_order, DEFAULT_N_MAX)
}

pub fn build_state_with(
    network: &Network,
    point: ScanPoint,
    perturbation_order: u32,
    n_max: u8,
) -> Result<FockState, OracleError> {
    if !(1..=2).contains(&perturbation_order) || (n_max as u32) < perturbation_order {
        return Err(OracleError::UnsupportedOrder {
            order: perturbation_order,
        });
    }
    // structural errors are shared with the propagator's contract
    network.propagate_at(point)?;

    let modes = network.registry().canonical_count();
    let mut components = vec![Ket::new(); perturbation_order as usize + 1];
    components[0].insert(vec![0; modes], Complex64::new(1.0, 0.0));
    let mut state = FockState {
        n_max,
        modes,
        components,
        taps: BTreeMap::new(),
    };

    for element in network.elements() {
        match element {
            Element::Crystal {
                signal,
                idler,
                coupling,
                ..
            } => {
                let c = Complex64::from_polar(coupling.magnitude(), coupling.phase());
                if c.norm() > 0.0 {
                    state.apply_crystal(signal.id.index(), idler.id.index(), c)?;
                }
            }
            Element::PhaseShift { mode, phase, sweep } => {
                let total = phase
                    + match sweep {
                        Some(PhaseVar::Signal) => point.phi_s,
                        Some(PhaseVar::Idler) => point.phi_i,
                        None => 0.0,
                    };
                state.apply_phase(mode.id.index(), total);
            }
            Element::BeamSplitter {
                in_a,
                in_b,
                transmission,
            } => {
                let (t, r) = match network.normalization() {
                    Normalization::Unitary => {
                        (*transmission, (1.0 - transmission * transmission).sqrt())
                    }
                    Normalization::Paper => (1.0, 1.0),
                };
                let t = Complex64::new(t, 0.0);
                let ir = Complex64::new(0.0, r);
                state.apply_two_mode(in_a.id.index(), in_b.id.index(), [[t, ir], [ir, t]])?;
            }
            Element::DetectorTap { mode, label } => {
                state.taps.insert(label.clone(), mode.id.index());
            }
        }
    }
    Ok(state)
}

/// Leading-order oracle value of an observable.
pub fn oracle_rate(
    network: &Network,
    observable: &Observable,
    point: ScanPoint,
) -> Result<f64, OracleError> {
    let state = build_state(network, point, 1)?;
    match observable {
        Observable::Singles(l) => state.leading_click(l),
        Observable::Coincidence(a, d) => state.leading_pair(a, d),
    }
}

/// What the oracle side of an equivalence check reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OracleMode {
    /// Lowest nonvanishing order of the unnormalized expectation. Exactly
    /// comparable with the engine's leading-order rates.
    LeadingOrder,
    /// Normalized probability of the state expanded to this order. Exposes
    /// multi-pair leakage at strong coupling.
    Perturbative(u32),
}

/// Every singles observable plus every coincidence between detectors on
/// distinct modes.
pub fn standard_observables(network: &Network) -> Vec<Observable> {
    let labels: Vec<&str> = network.detector_labels().collect();
    let mut out: Vec<Observable> = labels.iter().map(|l| Observable::singles(l)).collect();
    for (j, a) in labels.iter().enumerate() {
        for d in &labels[j + 1..] {
            if network.detector_mode(a) != network.detector_mode(d) {
                out.push(Observable::coincidence(a, d));
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct CaseResult {
    pub engine: Vec<f64>,
    pub oracle: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EquivalenceReport {
    /// Least-squares factor `s` with `s·engine ≈ oracle` over all cases.
    pub scale: f64,
    /// Max over cases of `max_j |s·e_j − o_j| / max_j |o_j|`.
    pub max_rel_deviation: f64,
    pub cases: Vec<CaseResult>,
}

/// Engine-vs-oracle comparison over a set of networks and scan points.
pub fn check_equivalence(
    cases: &[(Network, ScanPoint)],
    mode: OracleMode,
) -> Result<EquivalenceReport, OracleError> {
    let mut results = Vec::with_capacity(cases.len());
    for (network, point) in cases {
        let observables = standard_observables(network);
        let state = match mode {
            OracleMode::LeadingOrder => build_state(network, *point, 1)?,
            OracleMode::Perturbative(order) => build_state(network, *point, order)?,
        };
        let mut engine = Vec::with_capacity(observables.len());
        let mut oracle = Vec::with_capacity(observables.len());
        for o in &observables {
            engine.push(evaluate(network, o, *point)?.value);
            oracle.push(match (mode, o) {
                (OracleMode::LeadingOrder, Observable::Singles(l)) => state.leading_click(l)?,
                (OracleMode::LeadingOrder, Observable::Coincidence(a, d)) => {
                    state.leading_pair(a, d)?
                }
                (OracleMode::Perturbative(_), Observable::Singles(l)) => {
                    state.click_probability(l)?
                }
                (OracleMode::Perturbative(_), Observable::Coincidence(a, d)) => {
                    state.pair_probability(a, d)?
                }
            });
        }
        results.push(CaseResult { engine, oracle });
    }

    let (num, den) = results
        .iter()
        .flat_map(|c| c.engine.iter().zip(&c.oracle))
        .fold((0.0, 0.0), |(n, d), (e, o)| (n + e * o, d + e * e));
    let scale = if den > 0.0 { num / den } else { 1.0 };
    let max_rel_deviation = results
        .iter()
        .map(|c| {
            let reference = c
                .oracle
                .iter()
                .chain(c.engine.iter())
                .fold(0.0f64, |m, v| m.max(v.abs()));
            if reference == 0.0 {
                return 0.0;
            }
            c.engine
                .iter()
                .zip(&c.oracle)
                .map(|(e, o)| (scale * e - o).abs())
                .fold(0.0, f64::max)
                / reference
        })
        .fold(0.0, f64::max);
    Ok(EquivalenceReport {
        scale,
        max_rel_deviation,
        cases: results,
    })
}

/// Limits for [`random_network`].
#[derive(Clone, Copy, Debug)]
pub struct RandomNetworkSpec {
    pub max_modes: usize,
    pub max_crystals: usize,
    pub max_linear: usize,
    pub max_coupling: f64,
}

impl Default for RandomNetworkSpec {
    fn default() -> Self {
        Self {
            max_modes: 6,
            max_crystals: 3,
            max_linear: 6,
            max_coupling: 0.1,
        }
    }
}

/// A random small table: crystals and linear elements in random order, every
/// mode aliased under a second label half the time, detectors on two to four
/// distinct modes at the end.
pub fn random_network<R: Rng + ?Sized>(rng: &mut R, spec: RandomNetworkSpec) -> Network {
    let n_modes = rng.gen_range(2..=spec.max_modes.max(2));
    let mut builder = Network::builder();
    let mut labels: Vec<Vec<String>> = Vec::new();
    for m in 0..n_modes {
        let base = format!("m{m}");
        builder = builder.mode(&base).expect("fresh label");
        let mut names = vec![base.clone()];
        if rng.gen_bool(0.5) {
            let alias = format!("m{m}x");
            builder = builder.alias(&alias, &base).expect("fresh alias");
            names.push(alias);
        }
        labels.push(names);
    }
    let pick = |rng: &mut R, m: usize| -> String {
        let names = &labels[m];
        names[rng.gen_range(0..names.len())].clone()
    };
    let distinct_pair = |rng: &mut R| -> (usize, usize) {
        let a = rng.gen_range(0..n_modes);
        let mut b = rng.gen_range(0..n_modes - 1);
        if b >= a {
            b += 1;
        }
        (a, b)
    };

    let n_crystals = rng.gen_range(1..=spec.max_crystals.max(1));
    let n_linear = rng.gen_range(0..=spec.max_linear);
    let mut kinds: Vec<bool> = std::iter::repeat_n(true, n_crystals)
        .chain(std::iter::repeat_n(false, n_linear))
        .collect();
    kinds.shuffle(rng);
    let mut crystal_count = 0;
    for is_crystal in kinds {
        if is_crystal {
            let (s, i) = distinct_pair(rng);
            crystal_count += 1;
            let coupling = Coupling::new(
                rng.gen_range(0.0..=spec.max_coupling),
                rng.gen_range(0.0..std::f64::consts::TAU),
            );
            let (s, i) = (pick(rng, s), pick(rng, i));
            builder = builder
                .crystal(&format!("X{crystal_count}"), &s, &i, coupling)
                .expect("registered modes");
        } else if rng.gen_bool(0.5) {
            let m = rng.gen_range(0..n_modes);
            let m = pick(rng, m);
            let sweep = match rng.gen_range(0..3) {
                0 => Some(PhaseVar::Signal),
                1 => Some(PhaseVar::Idler),
                _ => None,
            };
            builder = builder
                .phase_shift(&m, rng.gen_range(0.0..std::f64::consts::TAU), sweep)
                .expect("registered mode");
        } else {
            let (a, b) = distinct_pair(rng);
            let (a, b) = (pick(rng, a), pick(rng, b));
            builder = builder
                .beam_splitter(&a, &b, rng.gen_range(0.0..=1.0))
                .expect("registered modes");
        }
    }
    let n_detectors = rng.gen_range(2..=n_modes.min(4));
    let mut order: Vec<usize> = (0..n_modes).collect();
    for k in (1..order.len()).rev() {
        order.swap(k, rng.gen_range(0..=k));
    }
    for (d, m) in order.into_iter().take(n_detectors).enumerate() {
        let label = pick(rng, m);
        builder = builder
            .detector(&format!("D{d}"), &label)
            .expect("registered mode");
    }
    builder.build().expect("random network is well formed")
}
