//! Optical table model and Heisenberg-picture propagation.
//!
//! Every canonical mode starts as its free vacuum operator `a_m0`. Elements are
//! applied in traversal order, each one rewriting the current expressions of
//! the modes it touches. A detector tap records the expression of its mode at
//! that point; the mode is absorbed and may not be used afterwards.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use num_complex::Complex64;

use crate::algebra::{ModeId, ModeRef, ModeRegistry, OperatorExpression};
use crate::error::NetworkError;

/// Coupling magnitudes above this trigger a low-gain validity warning.
pub const LOW_GAIN_LIMIT: f64 = 0.3;

pub const DEFAULT_TRUNCATION_ORDER: u32 = 1;

/// Complex pump coupling `C = magnitude · e^{i·phase}` of one crystal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Coupling {
    magnitude: f64,
    phase: f64,
}

impl Coupling {
    pub const ZERO: Coupling = Coupling {
        magnitude: 0.0,
        phase: 0.0,
    };

    /// Panics if `magnitude` is negative or not finite.
    pub fn new(magnitude: f64, phase: f64) -> Self {
        Self::try_new(magnitude, phase).expect("coupling magnitude must be finite and >= 0")
    }

    pub fn try_new(magnitude: f64, phase: f64) -> Option<Self> {
        (magnitude.is_finite() && magnitude >= 0.0 && phase.is_finite())
            .then_some(Self { magnitude, phase })
    }

    pub fn real(magnitude: f64) -> Self {
        Self::new(magnitude, 0.0)
    }

    pub fn from_complex(c: Complex64) -> Self {
        let (magnitude, phase) = c.to_polar();
        Self { magnitude, phase }
    }

    pub fn magnitude(&self) -> f64 {
        self.magnitude
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }

    pub fn complex(&self) -> Complex64 {
        Complex64::from_polar(self.magnitude, self.phase)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::new(self.magnitude * factor, self.phase)
    }
}

/// Which scanned phase a phase shifter follows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PhaseVar {
    Signal,
    Idler,
}

/// Values of the scanned phases `(φ_S, φ_I)` in radians.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ScanPoint {
    pub phi_s: f64,
    pub phi_i: f64,
}

impl ScanPoint {
    pub fn new(phi_s: f64, phi_i: f64) -> Self {
        Self { phi_s, phi_i }
    }

    pub fn get(&self, var: PhaseVar) -> f64 {
        match var {
            PhaseVar::Signal => self.phi_s,
            PhaseVar::Idler => self.phi_i,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Element {
    Crystal {
        name: String,
        signal: ModeRef,
        idler: ModeRef,
        coupling: Coupling,
    },
    /// Mirror or delay line. The applied phase is `phase` plus the scanned
    /// variable, if any.
    PhaseShift {
        mode: ModeRef,
        phase: f64,
        sweep: Option<PhaseVar>,
    },
    /// Outputs `(t·a + i·r·b, i·r·a + t·b)` with `r = √(1 − t²)`, written back
    /// onto `in_a` and `in_b` respectively.
    BeamSplitter {
        in_a: ModeRef,
        in_b: ModeRef,
        transmission: f64,
    },
    DetectorTap {
        mode: ModeRef,
        label: String,
    },
}

impl Element {
    pub fn modes(&self) -> Vec<&ModeRef> {
        match self {
            Element::Crystal { signal, idler, .. } => vec![signal, idler],
            Element::PhaseShift { mode, .. } | Element::DetectorTap { mode, .. } => vec![mode],
            Element::BeamSplitter { in_a, in_b, .. } => vec![in_a, in_b],
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Element::Crystal { .. } => "crystal",
            Element::PhaseShift { .. } => "phase_shift",
            Element::BeamSplitter { .. } => "beam_splitter",
            Element::DetectorTap { .. } => "detector",
        }
    }
}

/// Beam-splitter amplitude convention.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Normalization {
    /// Physical unitary splitter with the element's transmission.
    #[default]
    Unitary,
    /// `t = r = 1`: drops the splitter constants so detector fields match the
    /// textbook three-crystal expressions term for term.
    Paper,
}

impl Normalization {
    /// Transmission and reflection amplitudes for a splitter.
    pub fn amplitudes(self, transmission: f64) -> (f64, f64) {
        match self {
            Normalization::Unitary => (
                transmission,
                (1.0 - transmission * transmission).max(0.0).sqrt(),
            ),
            Normalization::Paper => (1.0, 1.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub element: Option<usize>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        match self.element {
            Some(i) => write!(f, "{sev}: element {i}: {}", self.message),
            None => write!(f, "{sev}: {}", self.message),
        }
    }
}

/// Detector field operators produced by [`Network::propagate`], in tap order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DetectorFields {
    fields: Vec<(String, ModeId, OperatorExpression)>,
}

impl DetectorFields {
    pub fn get(&self, label: &str) -> Option<&OperatorExpression> {
        self.fields
            .iter()
            .find(|(l, _, _)| l == label)
            .map(|(_, _, e)| e)
    }

    pub fn require(&self, label: &str) -> Result<&OperatorExpression, NetworkError> {
        self.get(label)
            .ok_or_else(|| NetworkError::UnknownDetector(label.to_owned()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &OperatorExpression)> {
        self.fields.iter().map(|(l, _, e)| (l.as_str(), e))
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    registry: ModeRegistry,
    elements: Vec<Element>,
    truncation_order: u32,
    normalization: Normalization,
}

impl Network {
    pub fn builder() -> NetworkBuilder {
        NetworkBuilder::default()
    }

    pub fn registry(&self) -> &ModeRegistry {
        &self.registry
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn truncation_order(&self) -> u32 {
        self.truncation_order
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn with_truncation_order(mut self, order: u32) -> Self {
        self.truncation_order = order;
        self
    }

    pub fn with_normalization(mut self, normalization: Normalization) -> Self {
        self.normalization = normalization;
        self
    }

    pub fn detector_labels(&self) -> impl Iterator<Item = &str> {
        self.elements.iter().filter_map(|e| match e {
            Element::DetectorTap { label, .. } => Some(label.as_str()),
            _ => None,
        })
    }

    /// Canonical mode tapped by detector `label`.
    pub fn detector_mode(&self, label: &str) -> Option<ModeId> {
        self.elements.iter().find_map(|e| match e {
            Element::DetectorTap { label: l, mode } if l == label => Some(mode.id),
            _ => None,
        })
    }

    pub fn crystal_names(&self) -> impl Iterator<Item = &str> {
        self.elements.iter().filter_map(|e| match e {
            Element::Crystal { name, .. } => Some(name.as_str()),
            _ => None,
        })
    }

    pub fn coupling(&self, crystal: &str) -> Option<Coupling> {
        self.elements.iter().find_map(|e| match e {
            Element::Crystal { name, coupling, .. } if name == crystal => Some(*coupling),
            _ => None,
        })
    }

    pub fn couplings(&self) -> Vec<(String, Coupling)> {
        self.elements
            .iter()
            .filter_map(|e| match e {
                Element::Crystal { name, coupling, .. } => Some((name.clone(), *coupling)),
                _ => None,
            })
            .collect()
    }

    /// Copy with crystal `name` set to `coupling`.
    pub fn with_coupling(&self, name: &str, coupling: Coupling) -> Result<Self, NetworkError> {
        let mut out = self.clone();
        let slot = out
            .elements
            .iter_mut()
            .find_map(|e| match e {
                Element::Crystal {
                    name: n, coupling, ..
                } if n == name => Some(coupling),
                _ => None,
            })
            .ok_or_else(|| NetworkError::UnknownCrystal(name.to_owned()))?;
        *slot = coupling;
        Ok(out)
    }

    /// Copy where every crystal not listed has its coupling set to zero.
    pub fn with_only_pumped(&self, pumped: &[&str]) -> Result<Self, NetworkError> {
        let known: BTreeSet<&str> = self.crystal_names().collect();
        if let Some(missing) = pumped.iter().find(|p| !known.contains(**p)) {
            return Err(NetworkError::UnknownCrystal((*missing).to_owned()));
        }
        let mut out = self.clone();
        for e in &mut out.elements {
            if let Element::Crystal { name, coupling, .. } = e {
                if !pumped.contains(&name.as_str()) {
                    *coupling = Coupling::ZERO;
                }
            }
        }
        Ok(out)
    }

    /// Copy with every coupling magnitude multiplied by `factor`.
    pub fn with_scaled_couplings(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for e in &mut out.elements {
            if let Element::Crystal { coupling, .. } = e {
                *coupling = coupling.scaled(factor);
            }
        }
        out
    }

    /// Which scanned phases the network responds to.
    pub fn swept_vars(&self) -> BTreeSet<PhaseVar> {
        self.elements
            .iter()
            .filter_map(|e| match e {
                Element::PhaseShift { sweep, .. } => *sweep,
                _ => None,
            })
            .collect()
    }

    pub fn propagate(&self) -> Result<DetectorFields, NetworkError> {
        self.propagate_at(ScanPoint::default())
    }

    /// Propagates every mode through the table with the scanned phases set to `point`.
    pub fn propagate_at(&self, point: ScanPoint) -> Result<DetectorFields, NetworkError> {
        self.check_structure()?;
        let n = self.registry.canonical_count();
        let mut fields: Vec<OperatorExpression> = (0..n as u32)
            .map(|i| OperatorExpression::annihilator(ModeId(i)))
            .collect();
        let mut out = DetectorFields::default();
        let k = self.truncation_order;

        for element in &self.elements {
            match element {
                Element::Crystal {
                    signal,
                    idler,
                    coupling,
                    ..
                } => {
                    let c = coupling.complex();
                    if c.norm() == 0.0 {
                        continue;
                    }
                    let (s, i) = (signal.id.index(), idler.id.index());
                    let new_s = fields[s].add(&fields[i].adjoint().raised(1).scaled(c));
                    let new_i = fields[i].add(&fields[s].adjoint().raised(1).scaled(c));
                    fields[s] = new_s.filter_by_order(k);
                    fields[i] = new_i.filter_by_order(k);
                }
                Element::PhaseShift { mode, phase, sweep } => {
                    let total = phase + sweep.map_or(0.0, |v| point.get(v));
                    let m = mode.id.index();
                    fields[m] = fields[m].scaled(Complex64::from_polar(1.0, total));
                }
                Element::BeamSplitter {
                    in_a,
                    in_b,
                    transmission,
                } => {
                    let (t, r) = self.normalization.amplitudes(*transmission);
                    let t = Complex64::new(t, 0.0);
                    let ir = Complex64::new(0.0, r);
                    let (a, b) = (in_a.id.index(), in_b.id.index());
                    let new_a = fields[a].scaled(t).add(&fields[b].scaled(ir));
                    let new_b = fields[a].scaled(ir).add(&fields[b].scaled(t));
                    fields[a] = new_a;
                    fields[b] = new_b;
                }
                Element::DetectorTap { mode, label } => {
                    out.fields
                        .push((label.clone(), mode.id, fields[mode.id.index()].clone()));
                }
            }
        }
        Ok(out)
    }

    /// Hard structural errors that make propagation meaningless.
    fn check_structure(&self) -> Result<(), NetworkError> {
        let mut labels = BTreeSet::new();
        let mut consumed: BTreeSet<ModeId> = BTreeSet::new();
        for (index, e) in self.elements.iter().enumerate() {
            for m in e.modes() {
                if !self.registry.contains(m.id) {
                    return Err(NetworkError::UnregisteredMode {
                        index,
                        mode: m.label.clone(),
                    });
                }
                if consumed.contains(&m.id) {
                    return Err(NetworkError::InvalidElement {
                        index,
                        reason: format!("mode `{}` was already absorbed by a detector", m.label),
                    });
                }
            }
            match e {
                Element::Crystal { signal, idler, .. } if signal.id == idler.id => {
                    return Err(NetworkError::InvalidElement {
                        index,
                        reason: "crystal signal and idler resolve to the same mode".into(),
                    });
                }
                Element::BeamSplitter { in_a, in_b, .. } if in_a.id == in_b.id => {
                    return Err(NetworkError::InvalidElement {
                        index,
                        reason: format!(
                            "beam splitter ports `{}` and `{}` resolve to the same mode",
                            in_a.label, in_b.label
                        ),
                    });
                }
                Element::BeamSplitter { transmission, .. }
                    if !(0.0..=1.0).contains(transmission) =>
                {
                    return Err(NetworkError::InvalidElement {
                        index,
                        reason: format!("transmission {transmission} outside [0, 1]"),
                    });
                }
                Element::DetectorTap { mode, label } => {
                    if !labels.insert(label.as_str()) {
                        return Err(NetworkError::DuplicateDetector(label.clone()));
                    }
                    consumed.insert(mode.id);
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Structural diagnostics. Never fails; problems are reported as data.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut diags = Vec::new();
        let mut labels = BTreeSet::new();
        let mut consumed: BTreeSet<ModeId> = BTreeSet::new();
        // modes whose expression can carry a creation operator
        let mut pumped: BTreeSet<ModeId> = BTreeSet::new();
        let error = |element: Option<usize>, message: String| Diagnostic {
            severity: Severity::Error,
            element,
            message,
        };
        let warning = |element: Option<usize>, message: String| Diagnostic {
            severity: Severity::Warning,
            element,
            message,
        };

        for (index, e) in self.elements.iter().enumerate() {
            let i = Some(index);
            for m in e.modes() {
                if !self.registry.contains(m.id) {
                    diags.push(error(
                        i,
                        format!("{} on undeclared mode `{}`", e.kind(), m.label),
                    ));
                } else if consumed.contains(&m.id) {
                    diags.push(error(
                        i,
                        format!("mode `{}` used after its detector", m.label),
                    ));
                }
            }
            match e {
                Element::Crystal {
                    name,
                    signal,
                    idler,
                    coupling,
                } => {
                    if signal.id == idler.id {
                        diags.push(error(
                            i,
                            format!("crystal `{name}` has signal and idler on one mode"),
                        ));
                    }
                    if coupling.magnitude() > LOW_GAIN_LIMIT {
                        diags.push(warning(
                            i,
                            format!(
                                "crystal `{name}` coupling {} exceeds low-gain limit {LOW_GAIN_LIMIT}; \
                                 first-order rates are unreliable",
                                coupling.magnitude()
                            ),
                        ));
                    }
                    pumped.insert(signal.id);
                    pumped.insert(idler.id);
                }
                Element::BeamSplitter {
                    in_a,
                    in_b,
                    transmission,
                } => {
                    if in_a.id == in_b.id {
                        diags.push(error(
                            i,
                            format!(
                                "beam splitter ports `{}` and `{}` are aliases of one mode",
                                in_a.label, in_b.label
                            ),
                        ));
                    }
                    if !(0.0..=1.0).contains(transmission) {
                        diags.push(error(
                            i,
                            format!("transmission {transmission} outside [0, 1]"),
                        ));
                    }
                    if pumped.contains(&in_a.id) || pumped.contains(&in_b.id) {
                        pumped.insert(in_a.id);
                        pumped.insert(in_b.id);
                    }
                }
                Element::PhaseShift { .. } => {}
                Element::DetectorTap { mode, label } => {
                    if !labels.insert(label.as_str()) {
                        diags.push(error(i, format!("duplicate detector label `{label}`")));
                    }
                    if !pumped.contains(&mode.id) {
                        diags.push(warning(
                            i,
                            format!("detector `{label}` is unreachable from every crystal"),
                        ));
                    }
                    consumed.insert(mode.id);
                }
            }
        }
        diags
    }
}

/// Incremental construction of a [`Network`]; modes are referred to by label.
#[derive(Debug, Default)]
pub struct NetworkBuilder {
    registry: ModeRegistry,
    elements: Vec<Element>,
    truncation_order: Option<u32>,
    normalization: Normalization,
}

impl NetworkBuilder {
    pub fn mode(mut self, label: &str) -> Result<Self, NetworkError> {
        self.registry.register(label, None)?;
        Ok(self)
    }

    pub fn alias(mut self, label: &str, alias_of: &str) -> Result<Self, NetworkError> {
        self.registry.register(label, Some(alias_of))?;
        Ok(self)
    }

    pub fn registry_mut(&mut self) -> &mut ModeRegistry {
        &mut self.registry
    }

    fn lookup(&self, label: &str) -> Result<ModeRef, NetworkError> {
        self.registry
            .get(label)
            .ok_or_else(|| NetworkError::UnregisteredMode {
                index: self.elements.len(),
                mode: label.to_owned(),
            })
    }

    pub fn crystal(
        mut self,
        name: &str,
        signal: &str,
        idler: &str,
        coupling: Coupling,
    ) -> Result<Self, NetworkError> {
        let element = Element::Crystal {
            name: name.to_owned(),
            signal: self.lookup(signal)?,
            idler: self.lookup(idler)?,
            coupling,
        };
        self.elements.push(element);
        Ok(self)
    }

    pub fn phase_shift(
        mut self,
        mode: &str,
        phase: f64,
        sweep: Option<PhaseVar>,
    ) -> Result<Self, NetworkError> {
        let element = Element::PhaseShift {
            mode: self.lookup(mode)?,
            phase,
            sweep,
        };
        self.elements.push(element);
        Ok(self)
    }

    pub fn beam_splitter(
        mut self,
        in_a: &str,
        in_b: &str,
        transmission: f64,
    ) -> Result<Self, NetworkError> {
        let element = Element::BeamSplitter {
            in_a: self.lookup(in_a)?,
            in_b: self.lookup(in_b)?,
            transmission,
        };
        self.elements.push(element);
        Ok(self)
    }

    pub fn detector(mut self, label: &str, mode: &str) -> Result<Self, NetworkError> {
        let element = Element::DetectorTap {
            mode: self.lookup(mode)?,
            label: label.to_owned(),
        };
        self.elements.push(element);
        Ok(self)
    }

    pub fn element(mut self, element: Element) -> Self {
        self.elements.push(element);
        self
    }

    pub fn truncation_order(mut self, order: u32) -> Self {
        self.truncation_order = Some(order);
        self
    }

    pub fn normalization(mut self, normalization: Normalization) -> Self {
        self.normalization = normalization;
        self
    }

    /// Rejects duplicate detector labels and duplicate crystal names.
    pub fn build(self) -> Result<Network, NetworkError> {
        let mut detectors = BTreeSet::new();
        let mut crystals = BTreeSet::new();
        for e in &self.elements {
            match e {
                Element::DetectorTap { label, .. } if !detectors.insert(label.clone()) => {
                    return Err(NetworkError::DuplicateDetector(label.clone()));
                }
                Element::Crystal { name, .. } if !crystals.insert(name.clone()) => {
                    return Err(NetworkError::DuplicateCrystal(name.clone()));
                }
                _ => {}
            }
        }
        Ok(Network {
            registry: self.registry,
            elements: self.elements,
            truncation_order: self.truncation_order.unwrap_or(DEFAULT_TRUNCATION_ORDER),
            normalization: self.normalization,
        })
    }
}

/// The three-crystal induced-coherence table.
///
/// Idler modes i1/i2 and signal modes s1/s3 are aligned, so `i2` aliases `i1`
/// and `s3` aliases `s1`. Signal paths meet at BS1 (detector `A`), idler paths
/// at BS2 (detector `D`); `φ_S` sits on the s1/s3 path and `φ_I` on the i1/i2
/// path.
pub fn three_crystal(c1: Coupling, c2: Coupling, c3: Coupling) -> Network {
    let build = || -> Result<Network, NetworkError> {
        Network::builder()
            .mode("s1")?
            .mode("s2")?
            .alias("s3", "s1")?
            .mode("i1")?
            .alias("i2", "i1")?
            .mode("i3")?
            .crystal("BBO1", "s1", "i1", c1)?
            .crystal("BBO3", "s3", "i3", c3)?
            .crystal("BBO2", "s2", "i2", c2)?
            .phase_shift("s1", 0.0, Some(PhaseVar::Signal))?
            .phase_shift("i1", 0.0, Some(PhaseVar::Idler))?
            .beam_splitter("s2", "s1", FRAC_1_SQRT_2)?
            .beam_splitter("i3", "i1", FRAC_1_SQRT_2)?
            .detector("A", "s2")?
            .detector("D", "i3")?
            .build()
    };
    build().expect("reference layout is well formed")
}

/// Same as [`three_crystal`] with real couplings.
pub fn three_crystal_real(c1: f64, c2: f64, c3: f64) -> Network {
    three_crystal(Coupling::real(c1), Coupling::real(c2), Coupling::real(c3))
}

/// Map from canonical mode to `Σ |α|²` of its order-0 (vacuum) coefficients
/// across all detectors.
pub fn vacuum_weights(fields: &DetectorFields) -> BTreeMap<ModeId, f64> {
    let mut out = BTreeMap::new();
    for (_, expr) in fields.iter() {
        for t in expr.terms().filter(|t| t.order == 0) {
            *out.entry(t.mode).or_insert(0.0) += t.coeff.norm_sqr();
        }
    }
    out
}
