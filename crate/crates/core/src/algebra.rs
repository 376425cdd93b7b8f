//! Canonical mode registry, linear bosonic operator expressions and an exact
//! vacuum-expectation evaluator based on Wick contraction.
//!
//! Every field operator that appears at a detector is a linear form
//! `Σ α_m a_m + Σ β_m a†_m` over the canonical vacuum input modes. Each term
//! is graded by the number of pump couplings absorbed into its coefficient,
//! which is what allows rates to be truncated at the lowest nonvanishing
//! order without a symbolic algebra system.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use num_complex::Complex64;

use crate::error::RegistryError;

/// Terms with a coefficient smaller than this are dropped on canonicalization.
pub const PRUNE_TOLERANCE: f64 = 1e-15;

/// Canonical identity of a vacuum input mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModeId(pub u32);

impl ModeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ModeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// A labelled handle on a canonical mode.
///
/// Two refs are the same mode iff their ids match; the label is only the name
/// under which the mode was looked up (`"i2"` and `"i1"` may share an id).
#[derive(Clone, Debug)]
pub struct ModeRef {
    pub id: ModeId,
    pub label: String,
    /// Angular frequency in rad/s. Metadata only, never enters a rate.
    pub frequency: Option<f64>,
}

impl PartialEq for ModeRef {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}

impl Eq for ModeRef {}

#[derive(Clone, Debug, PartialEq)]
struct Entry {
    id: ModeId,
    alias_of: Option<String>,
    frequency: Option<f64>,
}

/// Maps channel labels onto canonical modes, resolving aliases at registration.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ModeRegistry {
    // label -> entry, kept in registration order for serialization
    entries: Vec<(String, Entry)>,
    canonical: Vec<String>,
}

impl ModeRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers `label`, optionally as an alias of an already registered label.
    ///
    /// Re-registering a label with the same alias target is a no-op that
    /// returns the existing ref.
    pub fn register(
        &mut self,
        label: &str,
        alias_of: Option<&str>,
    ) -> Result<ModeRef, RegistryError> {
        self.register_with_frequency(label, alias_of, None)
    }

    pub fn register_with_frequency(
        &mut self,
        label: &str,
        alias_of: Option<&str>,
        frequency: Option<f64>,
    ) -> Result<ModeRef, RegistryError> {
        if label.is_empty() {
            return Err(RegistryError::EmptyLabel);
        }
        if let Some(existing) = self.entry(label) {
            return if existing.alias_of.as_deref() == alias_of {
                Ok(self.make_ref(label, existing))
            } else {
                Err(RegistryError::ConflictingAlias {
                    label: label.to_owned(),
                    existing: existing.alias_of.clone(),
                    requested: alias_of.map(str::to_owned),
                })
            };
        }
        let (id, frequency) = match alias_of {
            Some(target) => {
                let target_entry =
                    self.entry(target)
                        .ok_or_else(|| RegistryError::UnknownAliasTarget {
                            label: label.to_owned(),
                            target: target.to_owned(),
                        })?;
                (target_entry.id, frequency.or(target_entry.frequency))
            }
            None => {
                let id = ModeId(self.canonical.len() as u32);
                self.canonical.push(label.to_owned());
                (id, frequency)
            }
        };
        let entry = Entry {
            id,
            alias_of: alias_of.map(str::to_owned),
            frequency,
        };
        let mode = self.make_ref(label, &entry);
        self.entries.push((label.to_owned(), entry));
        Ok(mode)
    }

    fn entry(&self, label: &str) -> Option<&Entry> {
        self.entries
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, e)| e)
    }

    fn make_ref(&self, label: &str, entry: &Entry) -> ModeRef {
        ModeRef {
            id: entry.id,
            label: label.to_owned(),
            frequency: entry.frequency,
        }
    }

    pub fn get(&self, label: &str) -> Option<ModeRef> {
        self.entry(label).map(|e| self.make_ref(label, e))
    }

    pub fn resolve(&self, label: &str) -> Result<ModeId, RegistryError> {
        self.entry(label)
            .map(|e| e.id)
            .ok_or_else(|| RegistryError::UnknownLabel(label.to_owned()))
    }

    /// Number of distinct canonical modes.
    pub fn canonical_count(&self) -> usize {
        self.canonical.len()
    }

    pub fn contains(&self, id: ModeId) -> bool {
        id.index() < self.canonical.len()
    }

    /// Label under which the canonical mode was first registered.
    pub fn canonical_label(&self, id: ModeId) -> Option<&str> {
        self.canonical.get(id.index()).map(String::as_str)
    }

    /// All registrations as `(label, alias_of, frequency)` in registration order.
    pub fn registrations(&self) -> impl Iterator<Item = (&str, Option<&str>, Option<f64>)> {
        self.entries
            .iter()
            .map(|(l, e)| (l.as_str(), e.alias_of.as_deref(), e.frequency))
    }
}

/// One elementary operator `coeff · a_mode` or `coeff · a†_mode`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OperatorTerm {
    pub mode: ModeId,
    pub dagger: bool,
    pub coeff: Complex64,
    /// Total power of pump couplings carried by `coeff`.
    pub order: u32,
}

type TermKey = (ModeId, bool, u32);

/// Linear combination of annihilation and creation operators over canonical
/// modes. Terms are kept sorted by (mode, dagger, order) with at most one term
/// per key.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct OperatorExpression {
    terms: BTreeMap<TermKey, Complex64>,
}

impl OperatorExpression {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn annihilator(mode: ModeId) -> Self {
        Self::from_terms([OperatorTerm {
            mode,
            dagger: false,
            coeff: Complex64::new(1.0, 0.0),
            order: 0,
        }])
    }

    pub fn creator(mode: ModeId) -> Self {
        Self::from_terms([OperatorTerm {
            mode,
            dagger: true,
            coeff: Complex64::new(1.0, 0.0),
            order: 0,
        }])
    }

    pub fn from_terms<I: IntoIterator<Item = OperatorTerm>>(terms: I) -> Self {
        let mut expr = Self::zero();
        for t in terms {
            expr.add_term(t);
        }
        expr
    }

    pub fn add_term(&mut self, term: OperatorTerm) {
        let key = (term.mode, term.dagger, term.order);
        let merged = self.terms.get(&key).copied().unwrap_or_default() + term.coeff;
        if merged.norm() < PRUNE_TOLERANCE {
            self.terms.remove(&key);
        } else {
            self.terms.insert(key, merged);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = OperatorTerm> + '_ {
        self.terms
            .iter()
            .map(|(&(mode, dagger, order), &coeff)| OperatorTerm {
                mode,
                dagger,
                coeff,
                order,
            })
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_empty(&self) -> bool {
        self.is_zero()
    }

    /// Coefficient of `a_mode` (or `a†_mode`) summed over all orders.
    pub fn coefficient(&self, mode: ModeId, dagger: bool) -> Complex64 {
        self.terms
            .range((mode, dagger, 0)..=(mode, dagger, u32::MAX))
            .map(|(_, c)| *c)
            .sum()
    }

    pub fn coefficient_at_order(&self, mode: ModeId, dagger: bool, order: u32) -> Complex64 {
        self.terms
            .get(&(mode, dagger, order))
            .copied()
            .unwrap_or_default()
    }

    pub fn max_order(&self) -> Option<u32> {
        self.terms.keys().map(|k| k.2).max()
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self::from_terms(self.terms().map(|t| OperatorTerm {
            coeff: t.coeff * factor,
            ..t
        }))
    }

    /// Same terms with every order shifted up by `delta`.
    pub fn raised(&self, delta: u32) -> Self {
        Self::from_terms(self.terms().map(|t| OperatorTerm {
            order: t.order + delta,
            ..t
        }))
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for t in other.terms() {
            out.add_term(t);
        }
        out
    }

    /// Hermitian adjoint: `a ↔ a†`, coefficients conjugated, orders kept.
    pub fn adjoint(&self) -> Self {
        Self::from_terms(self.terms().map(|t| OperatorTerm {
            dagger: !t.dagger,
            coeff: t.coeff.conj(),
            ..t
        }))
    }

    pub fn filter_by_order(&self, max_total_order: u32) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .filter(|(k, _)| k.2 <= max_total_order)
                .map(|(k, v)| (*k, *v))
                .collect(),
        }
    }

    /// Only the terms of exactly `order`.
    pub fn order_part(&self, order: u32) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .filter(|(k, _)| k.2 == order)
                .map(|(k, v)| (*k, *v))
                .collect(),
        }
    }
}

impl fmt::Display for OperatorExpression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        for (i, t) in self.terms().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            let dag = if t.dagger { "†" } else { "" };
            write!(
                f,
                "({:.6}{:+.6}i)·a{}{}[o{}]",
                t.coeff.re, t.coeff.im, dag, t.mode, t.order
            )?;
        }
        Ok(())
    }
}

/// Vacuum expectation value split by total coupling order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Expectation {
    pub by_order: BTreeMap<u32, Complex64>,
    /// Orders at which at least one fully contracted monomial contributed,
    /// independent of any numerical cancellation in the sum.
    pub present_orders: BTreeSet<u32>,
}

impl Expectation {
    pub fn value(&self) -> Complex64 {
        self.by_order.values().sum()
    }

    /// Lowest order with a structurally nonzero contribution.
    pub fn leading_order(&self) -> Option<u32> {
        self.present_orders.iter().next().copied()
    }

    pub fn leading_value(&self) -> Complex64 {
        self.leading_order()
            .and_then(|o| self.by_order.get(&o).copied())
            .unwrap_or_default()
    }

    pub fn filter_by_order(&self, max_total_order: u32) -> Self {
        Self {
            by_order: self
                .by_order
                .iter()
                .filter(|(o, _)| **o <= max_total_order)
                .map(|(o, v)| (*o, *v))
                .collect(),
            present_orders: self
                .present_orders
                .iter()
                .copied()
                .filter(|o| *o <= max_total_order)
                .collect(),
        }
    }
}

type Elementary = (ModeId, bool);

/// `⟨0| Π_k product[k] |0⟩`, evaluated exactly by Wick contraction.
///
/// The product is expanded multilinearly. A monomial of elementary operators
/// survives only if every annihilator can be contracted with a creator of the
/// same canonical mode standing to its right; its value is the number of
/// complete contraction patterns.
pub fn vacuum_expectation(product: &[&OperatorExpression]) -> Expectation {
    let mut out = Expectation::default();
    if product.is_empty() || product.iter().any(|e| e.is_zero()) {
        return out;
    }
    let factors: Vec<Vec<OperatorTerm>> = product.iter().map(|e| e.terms().collect()).collect();
    let mut memo: HashMap<Vec<Elementary>, u64> = HashMap::new();
    let mut ops: Vec<Elementary> = Vec::with_capacity(factors.len());
    expand(
        &factors,
        0,
        Complex64::new(1.0, 0.0),
        0,
        &mut ops,
        &mut memo,
        &mut out,
    );
    out
}

fn expand(
    factors: &[Vec<OperatorTerm>],
    depth: usize,
    coeff: Complex64,
    order: u32,
    ops: &mut Vec<Elementary>,
    memo: &mut HashMap<Vec<Elementary>, u64>,
    out: &mut Expectation,
) {
    if depth == factors.len() {
        let patterns = contractions(ops, memo);
        if patterns > 0 {
            *out.by_order.entry(order).or_default() += coeff * patterns as f64;
            out.present_orders.insert(order);
        }
        return;
    }
    for t in &factors[depth] {
        // ⟨0| a† = 0: a leading creator kills the whole branch.
        if depth == 0 && t.dagger {
            continue;
        }
        // a |0⟩ = 0 for the rightmost factor.
        if depth + 1 == factors.len() && !t.dagger {
            continue;
        }
        ops.push((t.mode, t.dagger));
        expand(
            factors,
            depth + 1,
            coeff * t.coeff,
            order + t.order,
            ops,
            memo,
            out,
        );
        ops.pop();
    }
}

/// Number of complete contraction patterns of a monomial on the vacuum.
fn contractions(ops: &[Elementary], memo: &mut HashMap<Vec<Elementary>, u64>) -> u64 {
    let Some(&(mode, dagger)) = ops.first() else {
        return 1;
    };
    if dagger || ops.len() % 2 == 1 {
        return 0;
    }
    if let Some(&v) = memo.get(ops) {
        return v;
    }
    let mut total = 0;
    let mut rest: Vec<Elementary> = Vec::with_capacity(ops.len() - 2);
    for j in 1..ops.len() {
        if ops[j] == (mode, true) {
            rest.clear();
            rest.extend(ops[1..j].iter().chain(&ops[j + 1..]).copied());
            total += contractions(&rest, memo);
        }
    }
    memo.insert(ops.to_vec(), total);
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn ev(product: &[&OperatorExpression]) -> Complex64 {
        vacuum_expectation(product).value()
    }

    #[test]
    fn aliasing_resolves_to_same_id() {
        let mut reg = ModeRegistry::new();
        let i1 = reg.register("i1", None).unwrap();
        let i2 = reg.register("i2", Some("i1")).unwrap();
        assert_eq!(i1.id, i2.id);
        assert_eq!(i2.label, "i2");
        assert_eq!(reg.canonical_count(), 1);
    }

    #[test]
    fn unaliased_modes_are_distinct() {
        let mut reg = ModeRegistry::new();
        let s1 = reg.register("s1", None).unwrap();
        let s2 = reg.register("s2", None).unwrap();
        assert_ne!(s1, s2);
    }

    #[test]
    fn unknown_alias_target_is_rejected() {
        let mut reg = ModeRegistry::new();
        let err = reg.register("i3", Some("i9")).unwrap_err();
        assert!(matches!(err, RegistryError::UnknownAliasTarget { .. }));
    }

    #[test]
    fn conflicting_reregistration_is_rejected() {
        let mut reg = ModeRegistry::new();
        reg.register("i1", None).unwrap();
        reg.register("i3", None).unwrap();
        reg.register("i2", Some("i1")).unwrap();
        assert!(reg.register("i2", Some("i1")).is_ok());
        assert!(matches!(
            reg.register("i2", Some("i3")),
            Err(RegistryError::ConflictingAlias { .. })
        ));
        assert!(matches!(
            reg.register("i2", None),
            Err(RegistryError::ConflictingAlias { .. })
        ));
    }

    #[test]
    fn alias_inherits_frequency() {
        let mut reg = ModeRegistry::new();
        reg.register_with_frequency("s1", None, Some(2.33e15))
            .unwrap();
        let s3 = reg.register("s3", Some("s1")).unwrap();
        assert_eq!(s3.frequency, Some(2.33e15));
    }

    #[test]
    fn adjoint_of_single_annihilator() {
        let m = ModeId(0);
        let e = OperatorExpression::annihilator(m).scaled(c(0.3, -0.7));
        let a = e.adjoint();
        let t: Vec<_> = a.terms().collect();
        assert_eq!(t.len(), 1);
        assert!(t[0].dagger);
        assert_eq!(t[0].coeff, c(0.3, 0.7));
        assert_eq!(
            OperatorExpression::zero().adjoint(),
            OperatorExpression::zero()
        );
        assert_eq!(a.adjoint(), e);
    }

    #[test]
    fn addition_merges_and_prunes() {
        let m = ModeId(2);
        let e = OperatorExpression::creator(m);
        let sum = e.add(&e.scaled(c(-1.0, 0.0)));
        assert!(sum.is_zero());
        let tiny = e.scaled(c(1e-16, 0.0));
        assert!(tiny.is_zero());
    }

    #[test]
    fn basic_contractions() {
        let a = OperatorExpression::annihilator(ModeId(0));
        let ad = OperatorExpression::creator(ModeId(0));
        let b = OperatorExpression::annihilator(ModeId(1));
        let bd = OperatorExpression::creator(ModeId(1));
        assert_eq!(ev(&[&a, &ad]), c(1.0, 0.0));
        assert_eq!(ev(&[&ad, &a]), c(0.0, 0.0));
        assert_eq!(ev(&[&a, &bd]), c(0.0, 0.0));
        assert_eq!(ev(&[&b, &bd, &a, &ad]), c(1.0, 0.0));
        assert_eq!(ev(&[&a, &ad, &a, &ad]), c(1.0, 0.0));
        // a a a† a† |0> = 2|0>
        assert_eq!(ev(&[&a, &a, &ad, &ad]), c(2.0, 0.0));
        assert_eq!(ev(&[&a]), c(0.0, 0.0));
    }

    #[test]
    fn order_grading_is_tracked() {
        let m = ModeId(0);
        let e = OperatorExpression::from_terms([
            OperatorTerm {
                mode: m,
                dagger: false,
                coeff: c(1.0, 0.0),
                order: 0,
            },
            OperatorTerm {
                mode: m,
                dagger: true,
                coeff: c(0.5, 0.0),
                order: 1,
            },
        ]);
        let exp = vacuum_expectation(&[&e.adjoint(), &e]);
        assert_eq!(exp.leading_order(), Some(2));
        assert!((exp.leading_value() - c(0.25, 0.0)).norm() < 1e-15);
        assert!(exp.filter_by_order(1).by_order.is_empty());
    }

    #[test]
    fn leading_order_survives_cancellation() {
        let m = ModeId(0);
        let e = OperatorExpression::from_terms([OperatorTerm {
            mode: m,
            dagger: true,
            coeff: c(1.0, 0.0),
            order: 1,
        }]);
        let minus = e.scaled(c(-1.0, 0.0));
        // cancellation happens inside the sum, not in the structure
        let exp = vacuum_expectation(&[&e.adjoint(), &e.add(&minus)]);
        assert!(exp.present_orders.is_empty());
        let f = OperatorExpression::annihilator(m);
        let g = OperatorExpression::annihilator(m).scaled(c(-1.0, 0.0));
        let sum =
            vacuum_expectation(&[&f, &e]).by_order[&1] + vacuum_expectation(&[&g, &e]).by_order[&1];
        assert_eq!(sum, c(0.0, 0.0));
    }

    #[test]
    fn filter_is_idempotent() {
        let m = ModeId(0);
        let e = OperatorExpression::from_terms([
            OperatorTerm {
                mode: m,
                dagger: false,
                coeff: c(1.0, 0.0),
                order: 0,
            },
            OperatorTerm {
                mode: m,
                dagger: true,
                coeff: c(0.1, 0.0),
                order: 1,
            },
            OperatorTerm {
                mode: m,
                dagger: false,
                coeff: c(0.01, 0.0),
                order: 2,
            },
        ]);
        let f1 = e.filter_by_order(1);
        assert_eq!(f1.len(), 2);
        assert_eq!(f1.filter_by_order(1), f1);
        assert_eq!(e.filter_by_order(0).len(), 1);
    }

    #[test]
    fn coefficient_sums_over_orders() {
        let m = ModeId(1);
        let e = OperatorExpression::from_terms([
            OperatorTerm {
                mode: m,
                dagger: true,
                coeff: c(1.0, 0.0),
                order: 1,
            },
            OperatorTerm {
                mode: m,
                dagger: true,
                coeff: c(0.0, 2.0),
                order: 2,
            },
        ]);
        assert_eq!(e.coefficient(m, true), c(1.0, 2.0));
        assert_eq!(e.coefficient(m, false), c(0.0, 0.0));
        assert_eq!(e.coefficient_at_order(m, true, 2), c(0.0, 2.0));
    }
}
