//! Normally ordered counting rates from detector field operators.
//!
//! Rates are reported at the lowest coupling order that structurally
//! contributes (order 2 for spontaneous down-conversion); the full graded
//! decomposition is kept for diagnostics.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use crate::algebra::{vacuum_expectation, Expectation, OperatorExpression};
use crate::error::NetworkError;
use crate::network::{Network, PhaseVar, ScanPoint};

/// Lowest coupling order at which a normally ordered vacuum rate can be
/// nonzero: free fields are pure annihilators, so both the bra and the ket side
/// need at least one crystal.
pub const LOWEST_RATE_ORDER: u32 = 2;

/// Points per swept phase used for the background/interference split.
pub const SPLIT_GRID_POINTS: usize = 64;

/// Phase-averaged background and the phase-dependent remainder of a rate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseSplit {
    /// Mean rate over a uniform grid of every swept phase.
    pub background: f64,
    /// `value − background` at the evaluated point.
    pub interference: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateResult {
    /// Leading-order rate (arbitrary units).
    pub value: f64,
    pub leading_order: Option<u32>,
    /// Every order retained by the evaluator.
    pub by_order: BTreeMap<u32, f64>,
    /// Only available when evaluated against a network with swept phases.
    pub split: Option<PhaseSplit>,
}

impl RateResult {
    fn from_expectation(exp: &Expectation) -> Self {
        let by_order: BTreeMap<u32, f64> = exp.by_order.iter().map(|(o, v)| (*o, v.re)).collect();
        // An exact cancellation can prune every second-order term from the
        // field; the rate is then zero at second order, not its quartic tail.
        let leading_order = exp.leading_order().map(|o| o.min(LOWEST_RATE_ORDER));
        Self {
            value: leading_order
                .and_then(|o| by_order.get(&o))
                .copied()
                .unwrap_or(0.0),
            leading_order,
            by_order,
            split: None,
        }
    }

    /// Sum over all retained orders.
    pub fn total(&self) -> f64 {
        self.by_order.values().sum()
    }

    pub fn background_part(&self) -> Option<f64> {
        self.split.map(|s| s.background)
    }

    pub fn interference_part(&self) -> Option<f64> {
        self.split.map(|s| s.interference)
    }
}

/// `⟨E⁻ E⁺⟩` for a detector field `E⁺`.
pub fn singles_rate(expr: &OperatorExpression) -> RateResult {
    let adj = expr.adjoint();
    RateResult::from_expectation(&vacuum_expectation(&[&adj, expr]))
}

/// Same computation as [`singles_rate`], named for the idler detector.
pub fn idler_singles_rate(expr: &OperatorExpression) -> RateResult {
    singles_rate(expr)
}

/// `⟨E_A⁻ E_D⁻ E_D⁺ E_A⁺⟩`.
pub fn coincidence_rate(expr_a: &OperatorExpression, expr_d: &OperatorExpression) -> RateResult {
    let (adj_a, adj_d) = (expr_a.adjoint(), expr_d.adjoint());
    RateResult::from_expectation(&vacuum_expectation(&[&adj_a, &adj_d, expr_d, expr_a]))
}

/// A counting observable on a network.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Observable {
    Singles(String),
    Coincidence(String, String),
}

impl Observable {
    pub fn singles(label: &str) -> Self {
        Observable::Singles(label.to_owned())
    }

    pub fn coincidence(a: &str, d: &str) -> Self {
        Observable::Coincidence(a.to_owned(), d.to_owned())
    }

    /// Detector fields in product order: bra half is the adjoint of these,
    /// reversed.
    pub fn labels(&self) -> Vec<&str> {
        match self {
            Observable::Singles(l) => vec![l.as_str()],
            Observable::Coincidence(a, d) => vec![a.as_str(), d.as_str()],
        }
    }
}

/// Evaluates `observable` on `network` with the scanned phases at `point`.
pub fn evaluate(
    network: &Network,
    observable: &Observable,
    point: ScanPoint,
) -> Result<RateResult, NetworkError> {
    let fields = network.propagate_at(point)?;
    Ok(match observable {
        Observable::Singles(l) => singles_rate(fields.require(l)?),
        Observable::Coincidence(a, d) => coincidence_rate(fields.require(a)?, fields.require(d)?),
    })
}

/// Leading-order value only.
pub fn rate_value(
    network: &Network,
    observable: &Observable,
    point: ScanPoint,
) -> Result<f64, NetworkError> {
    evaluate(network, observable, point).map(|r| r.value)
}

/// Uniform grid over every swept phase of `network`, other phase held at `point`.
pub fn split_grid(network: &Network, point: ScanPoint) -> Vec<ScanPoint> {
    let vars = network.swept_vars();
    let axis = |var: PhaseVar| -> Vec<f64> {
        if vars.contains(&var) {
            (0..SPLIT_GRID_POINTS)
                .map(|k| TAU * k as f64 / SPLIT_GRID_POINTS as f64)
                .collect()
        } else {
            vec![point.get(var)]
        }
    };
    let (ss, ii) = (axis(PhaseVar::Signal), axis(PhaseVar::Idler));
    ss.iter()
        .flat_map(|&s| ii.iter().map(move |&i| ScanPoint::new(s, i)))
        .collect()
}

/// [`evaluate`] plus the background/interference split.
pub fn evaluate_with_split(
    network: &Network,
    observable: &Observable,
    point: ScanPoint,
) -> Result<RateResult, NetworkError> {
    let mut result = evaluate(network, observable, point)?;
    let grid = split_grid(network, point);
    let mut sum = 0.0;
    for p in &grid {
        sum += rate_value(network, observable, *p)?;
    }
    let background = sum / grid.len() as f64;
    result.split = Some(PhaseSplit {
        background,
        interference: result.value - background,
    });
    Ok(result)
}
