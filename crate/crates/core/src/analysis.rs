//! Fringe scans, visibility and which-path contrast, pump-coherence
//! degradation and the dual-speed delay-line time scan.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::algebra::{vacuum_expectation, OperatorExpression};
use crate::error::{AnalysisError, NetworkError};
use crate::network::{Network, ScanPoint};
use crate::rates::{coincidence_rate, singles_rate, Observable, RateResult};

/// Delay lines moving at constant speed; phases follow `φ = 2π·g·d/λ`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeScan {
    /// Signal delay-line speed, nm/s.
    pub v_s: f64,
    /// Idler delay-line speed, nm/s.
    pub v_i: f64,
    /// Signal wavelength, nm.
    pub lambda_s: f64,
    /// Idler wavelength, nm.
    pub lambda_i: f64,
    /// s
    pub duration: f64,
    /// s
    pub step: f64,
    /// Signal delay-line displacement at t = 0, nm.
    pub offset_s: f64,
    /// Idler delay-line displacement at t = 0, nm.
    pub offset_i: f64,
    /// Phase per wavelength of displacement, in units of 2π.
    pub geometry: f64,
}

impl TimeScan {
    pub fn new(v_s: f64, v_i: f64, lambda_s: f64, lambda_i: f64, duration: f64, step: f64) -> Self {
        Self {
            v_s,
            v_i,
            lambda_s,
            lambda_i,
            duration,
            step,
            offset_s: 0.0,
            offset_i: 0.0,
            geometry: 1.0,
        }
    }

    pub fn with_offsets(mut self, offset_s: f64, offset_i: f64) -> Self {
        self.offset_s = offset_s;
        self.offset_i = offset_i;
        self
    }

    /// Number of samples `t_k = k·step`, `0 ≤ k < n`.
    pub fn len(&self) -> usize {
        (self.duration / self.step).round() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn phases_at(&self, t: f64) -> ScanPoint {
        ScanPoint::new(
            displacement_phase(self.offset_s + self.v_s * t, self.lambda_s, self.geometry),
            displacement_phase(self.offset_i + self.v_i * t, self.lambda_i, self.geometry),
        )
    }
}

/// Phase accumulated by a displacement `d` at wavelength `lambda`.
pub fn displacement_phase(d: f64, lambda: f64, geometry: f64) -> f64 {
    TAU * geometry * d / lambda
}

#[derive(Clone, Debug, PartialEq)]
pub enum ScanConfig {
    Grid(Vec<ScanPoint>),
    Time(TimeScan),
}

impl ScanConfig {
    /// `points` values of `φ_S` evenly spaced over `[start, stop]`, `φ_I` fixed.
    pub fn signal_sweep(start: f64, stop: f64, points: usize, phi_i: f64) -> Self {
        ScanConfig::Grid(
            linspace(start, stop, points)
                .map(|s| ScanPoint::new(s, phi_i))
                .collect(),
        )
    }

    pub fn idler_sweep(start: f64, stop: f64, points: usize, phi_s: f64) -> Self {
        ScanConfig::Grid(
            linspace(start, stop, points)
                .map(|i| ScanPoint::new(phi_s, i))
                .collect(),
        )
    }

    /// Cartesian grid, `φ_S` outer.
    pub fn grid_2d(s: (f64, f64, usize), i: (f64, f64, usize)) -> Self {
        let is: Vec<f64> = linspace(i.0, i.1, i.2).collect();
        ScanConfig::Grid(
            linspace(s.0, s.1, s.2)
                .flat_map(|ps| is.iter().map(move |&pi| ScanPoint::new(ps, pi)))
                .collect(),
        )
    }

    pub fn validate(&self) -> Result<(), AnalysisError> {
        let bad = |m: &str| Err(AnalysisError::InvalidScan(m.to_owned()));
        match self {
            ScanConfig::Grid(points) => {
                if points.is_empty() {
                    return bad("phase grid is empty");
                }
                if points
                    .iter()
                    .any(|p| !p.phi_s.is_finite() || !p.phi_i.is_finite())
                {
                    return bad("phase grid contains non-finite values");
                }
            }
            ScanConfig::Time(ts) => {
                if ts.lambda_s.is_nan()
                    || ts.lambda_i.is_nan()
                    || ts.lambda_s <= 0.0
                    || ts.lambda_i <= 0.0
                {
                    return bad("wavelengths must be positive");
                }
                if ts.step.is_nan() || ts.step <= 0.0 {
                    return bad("time step must be positive");
                }
                if ts.duration.is_nan() || ts.duration <= 0.0 || ts.is_empty() {
                    return bad("time scan has no samples");
                }
                if ![ts.v_s, ts.v_i, ts.offset_s, ts.offset_i, ts.geometry]
                    .iter()
                    .all(|v| v.is_finite())
                {
                    return bad("time scan parameters must be finite");
                }
            }
        }
        Ok(())
    }

    /// Sample times (time scans only) and phases, in output order.
    pub fn samples(&self) -> Vec<(Option<f64>, ScanPoint)> {
        match self {
            ScanConfig::Grid(points) => points.iter().map(|p| (None, *p)).collect(),
            ScanConfig::Time(ts) => (0..ts.len())
                .map(|k| {
                    let t = k as f64 * ts.step;
                    (Some(t), ts.phases_at(t))
                })
                .collect(),
        }
    }
}

/// `n` evenly spaced values including both ends (`n = 1` yields `start`).
pub fn linspace(start: f64, stop: f64, n: usize) -> impl Iterator<Item = f64> {
    let step = if n > 1 {
        (stop - start) / (n - 1) as f64
    } else {
        0.0
    };
    (0..n).map(move |k| start + step * k as f64)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanRow {
    pub t: Option<f64>,
    pub point: ScanPoint,
    pub rate: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScanTable {
    pub rows: Vec<ScanRow>,
}

impl ScanTable {
    pub fn rates(&self) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(|r| r.rate)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Several observables sampled on the same scan; `rates[k][j]` is observable
/// `j` at sample `k`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MultiScan {
    pub samples: Vec<(Option<f64>, ScanPoint)>,
    pub rates: Vec<Vec<f64>>,
}

impl MultiScan {
    pub fn column(&self, j: usize) -> ScanTable {
        ScanTable {
            rows: self
                .samples
                .iter()
                .zip(&self.rates)
                .map(|((t, p), r)| ScanRow {
                    t: *t,
                    point: *p,
                    rate: r[j],
                })
                .collect(),
        }
    }
}

fn check_labels(network: &Network, observables: &[Observable]) -> Result<(), AnalysisError> {
    let labels: Vec<&str> = network.detector_labels().collect();
    for o in observables {
        if let Some(missing) = o.labels().into_iter().find(|l| !labels.contains(l)) {
            return Err(NetworkError::UnknownDetector(missing.to_owned()).into());
        }
    }
    Ok(())
}

/// Evaluates every observable at every sample. One propagation per sample;
/// samples are evaluated in parallel and returned in scan order.
pub fn scan_multi(
    network: &Network,
    observables: &[Observable],
    config: &ScanConfig,
) -> Result<MultiScan, AnalysisError> {
    config.validate()?;
    check_labels(network, observables)?;
    let samples = config.samples();
    let rates = samples
        .par_iter()
        .map(|(_, point)| -> Result<Vec<f64>, NetworkError> {
            let fields = network.propagate_at(*point)?;
            observables
                .iter()
                .map(|o| {
                    Ok(match o {
                        Observable::Singles(l) => singles_rate(fields.require(l)?).value,
                        Observable::Coincidence(a, d) => {
                            coincidence_rate(fields.require(a)?, fields.require(d)?).value
                        }
                    })
                })
                .collect()
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(MultiScan { samples, rates })
}

pub fn scan(
    network: &Network,
    observable: &Observable,
    config: &ScanConfig,
) -> Result<ScanTable, AnalysisError> {
    Ok(scan_multi(network, std::slice::from_ref(observable), config)?.column(0))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FringeStats {
    pub visibility: f64,
    /// Which-path contrast, when the caller can attribute path intensities.
    pub contrast: Option<f64>,
    pub r_max: f64,
    pub r_min: f64,
    /// Scan point of the maximum.
    pub argmax_phase: ScanPoint,
}

impl FringeStats {
    pub fn with_contrast(mut self, k: f64) -> Self {
        self.contrast = Some(k);
        self
    }

    /// `V² + K²`, if the contrast is known.
    pub fn complementarity(&self) -> Option<f64> {
        self.contrast.map(|k| self.visibility.powi(2) + k * k)
    }
}

/// Extremal visibility `(max − min)/(max + min)`.
///
/// The model's fringes are exact sinusoids, so the extrema are only as good as
/// the grid: sample at least 16 points per expected fringe period.
pub fn fringe_stats(table: &ScanTable) -> Result<FringeStats, AnalysisError> {
    let first = table.rows.first().ok_or(AnalysisError::EmptyTable)?;
    let (mut max_row, mut r_min) = (first, f64::INFINITY);
    for row in &table.rows {
        if row.rate > max_row.rate {
            max_row = row;
        }
        r_min = r_min.min(row.rate);
    }
    let r_max = max_row.rate.max(0.0);
    let r_min = r_min.max(0.0);
    if r_max + r_min <= f64::MIN_POSITIVE {
        return Err(AnalysisError::NoSignal);
    }
    Ok(FringeStats {
        visibility: ((r_max - r_min) / (r_max + r_min)).clamp(0.0, 1.0),
        contrast: None,
        r_max,
        r_min,
        argmax_phase: max_row.point,
    })
}

/// Two-path fringe visibility `2|C₁C₂| / (|C₁|² + |C₂|²)`.
pub fn two_path_visibility(c1: Complex64, c2: Complex64) -> Result<f64, AnalysisError> {
    let denom = c1.norm_sqr() + c2.norm_sqr();
    if denom == 0.0 {
        return Err(AnalysisError::ContrastUndefined);
    }
    Ok(2.0 * (c1 * c2).norm() / denom)
}

/// Which-path contrast `K = ||C₁|² − |C₂|²| / (|C₁|² + |C₂|²)`.
pub fn contrast(c1: Complex64, c2: Complex64) -> Result<f64, AnalysisError> {
    let denom = c1.norm_sqr() + c2.norm_sqr();
    if denom == 0.0 {
        return Err(AnalysisError::ContrastUndefined);
    }
    Ok((c1.norm_sqr() - c2.norm_sqr()).abs() / denom)
}

/// Which-path contrast from path intensities: the observable evaluated with
/// only crystal `a`, then only crystal `b`, pumped.
pub fn path_contrast(
    network: &Network,
    observable: &Observable,
    a: &str,
    b: &str,
) -> Result<f64, AnalysisError> {
    let ia = path_intensity(network, observable, a)?;
    let ib = path_intensity(network, observable, b)?;
    if ia + ib <= 0.0 {
        return Err(AnalysisError::ContrastUndefined);
    }
    Ok((ia - ib).abs() / (ia + ib))
}

/// Observable with only `crystal` pumped. Phase independent for one source.
pub fn path_intensity(
    network: &Network,
    observable: &Observable,
    crystal: &str,
) -> Result<f64, AnalysisError> {
    let single = network.with_only_pumped(&[crystal])?;
    Ok(crate::rates::rate_value(
        &single,
        observable,
        ScanPoint::default(),
    )?)
}

/// Pairwise pump mutual-coherence factors between crystals.
#[derive(Clone, Debug, PartialEq)]
pub struct CoherenceMatrix {
    names: Vec<String>,
    gamma: Vec<Vec<f64>>,
}

impl CoherenceMatrix {
    pub fn new(names: Vec<String>, gamma: Vec<Vec<f64>>) -> Result<Self, AnalysisError> {
        let n = names.len();
        let bad = |m: String| Err(AnalysisError::InvalidCoherence(m));
        if gamma.len() != n || gamma.iter().any(|row| row.len() != n) {
            return bad(format!("expected a {n}x{n} matrix"));
        }
        for j in 0..n {
            if names[..j].contains(&names[j]) {
                return bad(format!("duplicate crystal `{}`", names[j]));
            }
            if gamma[j][j] != 1.0 {
                return bad(format!("diagonal entry for `{}` must be 1", names[j]));
            }
            for (k, &g) in gamma[j].iter().enumerate() {
                if !(0.0..=1.0).contains(&g) {
                    return bad(format!("entry ({j},{k}) = {g} outside [0, 1]"));
                }
                if g != gamma[k][j] {
                    return bad(format!("matrix not symmetric at ({j},{k})"));
                }
            }
        }
        Ok(Self { names, gamma })
    }

    /// Full coherence among `names`.
    pub fn identity(names: &[&str]) -> Self {
        let n = names.len();
        Self {
            names: names.iter().map(|s| (*s).to_owned()).collect(),
            gamma: vec![vec![1.0; n]; n],
        }
    }

    /// Every distinct pair set to `g`.
    pub fn uniform(names: &[&str], g: f64) -> Result<Self, AnalysisError> {
        let n = names.len();
        let gamma = (0..n)
            .map(|j| (0..n).map(|k| if j == k { 1.0 } else { g }).collect())
            .collect();
        Self::new(names.iter().map(|s| (*s).to_owned()).collect(), gamma)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.gamma
    }

    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let j = self.names.iter().position(|n| n == a)?;
        let k = self.names.iter().position(|n| n == b)?;
        Some(self.gamma[j][k])
    }
}

/// Leading-order rate in which each interference term between amplitudes
/// from crystals `j` and `k` is weighted by `γ_jk`.
///
/// Each detector field is split into its vacuum part and one first-order part
/// per pumped crystal. Every leading-order contribution carries exactly one
/// crystal on the bra side and one on the ket side, so the rate is a Hermitian
/// form `Σ_jk γ_jk R_jk` over crystal pairs.
pub fn apply_pump_coherence(
    network: &Network,
    observable: &Observable,
    gamma: &CoherenceMatrix,
    point: ScanPoint,
) -> Result<RateResult, AnalysisError> {
    let base = network.clone().with_truncation_order(1);
    let labels = observable.labels();
    let full = base.propagate_at(point)?;
    let vacuum: Vec<OperatorExpression> = labels
        .iter()
        .map(|l| full.require(l).map(|e| e.order_part(0)))
        .collect::<Result<_, _>>()?;

    let mut sources: Vec<(String, Vec<OperatorExpression>)> = Vec::new();
    for (name, coupling) in base.couplings() {
        if coupling.magnitude() == 0.0 {
            continue;
        }
        if gamma.get(&name, &name).is_none() {
            return Err(AnalysisError::InvalidCoherence(format!(
                "pumped crystal `{name}` missing from coherence matrix"
            )));
        }
        let fields = base.with_only_pumped(&[&name])?.propagate_at(point)?;
        let parts = labels
            .iter()
            .map(|l| fields.require(l).map(|e| e.order_part(1)))
            .collect::<Result<_, _>>()?;
        sources.push((name, parts));
    }

    // ket half is the fields in reverse label order: (.., D, A)
    let n = labels.len();
    let mut value = 0.0;
    for (bra_name, bra_parts) in &sources {
        for (ket_name, ket_parts) in &sources {
            let g = gamma.get(bra_name, ket_name).expect("checked above");
            if g == 0.0 {
                continue;
            }
            let mut pair = Complex64::default();
            for p in 0..n {
                for q in 0..n {
                    let bra: Vec<OperatorExpression> = (0..n)
                        .map(|k| {
                            if k == p {
                                bra_parts[k].adjoint()
                            } else {
                                vacuum[k].adjoint()
                            }
                        })
                        .collect();
                    let ket: Vec<&OperatorExpression> = (0..n)
                        .rev()
                        .map(|k| if k == q { &ket_parts[k] } else { &vacuum[k] })
                        .collect();
                    let product: Vec<&OperatorExpression> = bra.iter().chain(ket).collect();
                    pair += vacuum_expectation(&product)
                        .by_order
                        .get(&2)
                        .copied()
                        .unwrap_or_default();
                }
            }
            value += g * pair.re;
        }
    }
    let mut by_order = BTreeMap::new();
    if !sources.is_empty() {
        by_order.insert(2, value);
    }
    Ok(RateResult {
        value,
        leading_order: (!sources.is_empty()).then_some(2),
        by_order,
        split: None,
    })
}

/// [`scan`] with pump-coherence weighting.
pub fn scan_with_coherence(
    network: &Network,
    observable: &Observable,
    gamma: &CoherenceMatrix,
    config: &ScanConfig,
) -> Result<ScanTable, AnalysisError> {
    config.validate()?;
    check_labels(network, std::slice::from_ref(observable))?;
    let rows = config
        .samples()
        .par_iter()
        .map(|(t, point)| {
            apply_pump_coherence(network, observable, gamma, *point).map(|r| ScanRow {
                t: *t,
                point: *point,
                rate: r.value,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ScanTable { rows })
}
