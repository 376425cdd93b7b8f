//! The `.exp` experiment file: a TOML document describing one table layout,
//! its detectors, and the scan to run over it.
//!
//! ```toml
//! schema = "biphoton-exp/1"
//!
//! [[modes]]
//! label = "s1"
//!
//! [[modes]]
//! label = "s3"
//! alias_of = "s1"
//!
//! [[elements]]
//! type = "crystal"
//! name = "BBO1"
//! signal = "s1"
//! idler = "i1"
//! coupling = { magnitude = 0.1, phase = 0.0 }
//!
//! [scan]
//! kind = "grid"
//! phi_s = { start = 0.0, stop = 6.283185307179586, points = 256 }
//! phi_i = 0.0
//! ```
//!
//! Angles are radians. A phase shift may be given as a mirror displacement
//! instead (`displacement_nm` + `wavelength_nm`), converted with `φ = 2πd/λ`.

use biphoton_core::analysis::displacement_phase;
use biphoton_core::network::{Element, Normalization, PhaseVar, DEFAULT_TRUNCATION_ORDER};
use biphoton_core::{CoherenceMatrix, Coupling, Network, ScanConfig, ScanPoint, TimeScan};
use serde::{Deserialize, Serialize};

use crate::error::FormatError;

pub const SCHEMA: &str = "biphoton-exp/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub schema: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default = "default_truncation_order")]
    pub truncation_order: u32,
    #[serde(default)]
    pub paper_normalization: bool,
    #[serde(default)]
    pub detectors: DetectorRoles,
    pub modes: Vec<ModeSpec>,
    pub elements: Vec<ElementSpec>,
    pub scan: ScanSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coherence: Option<CoherenceSpec>,
}

fn default_truncation_order() -> u32 {
    DEFAULT_TRUNCATION_ORDER
}

/// Which detector labels fill the `rate_A` and `rate_D` CSV columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorRoles {
    pub signal: String,
    pub idler: String,
}

impl Default for DetectorRoles {
    fn default() -> Self {
        Self {
            signal: "A".into(),
            idler: "D".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSpec {
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alias_of: Option<String>,
    /// Carrier frequency, informational.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequency: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSpec {
    pub magnitude: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sweep {
    Signal,
    Idler,
}

impl From<Sweep> for PhaseVar {
    fn from(s: Sweep) -> Self {
        match s {
            Sweep::Signal => PhaseVar::Signal,
            Sweep::Idler => PhaseVar::Idler,
        }
    }
}

impl From<PhaseVar> for Sweep {
    fn from(v: PhaseVar) -> Self {
        match v {
            PhaseVar::Signal => Sweep::Signal,
            PhaseVar::Idler => Sweep::Idler,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ElementSpec {
    Crystal {
        name: String,
        signal: String,
        idler: String,
        coupling: CouplingSpec,
    },
    PhaseShift {
        mode: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        phase: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        displacement_nm: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        wavelength_nm: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sweep: Option<Sweep>,
    },
    BeamSplitter {
        in_a: String,
        in_b: String,
        #[serde(default = "default_transmission")]
        transmission: f64,
    },
    Detector {
        label: String,
        mode: String,
    },
}

fn default_transmission() -> f64 {
    std::f64::consts::FRAC_1_SQRT_2
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeSpec {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

/// A fixed phase or an inclusive evenly spaced range.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Axis {
    Fixed(f64),
    Range(RangeSpec),
}

impl Axis {
    fn as_tuple(self) -> (f64, f64, usize) {
        match self {
            Axis::Fixed(v) => (v, v, 1),
            Axis::Range(r) => (r.start, r.stop, r.points),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScanSpec {
    /// Cartesian grid, `phi_s` outer.
    Grid { phi_s: Axis, phi_i: Axis },
    /// Delay lines moving at constant speed from an initial displacement.
    Time {
        v_s_nm_per_s: f64,
        v_i_nm_per_s: f64,
        lambda_s_nm: f64,
        lambda_i_nm: f64,
        duration_s: f64,
        step_s: f64,
        #[serde(default)]
        offset_s_nm: f64,
        #[serde(default)]
        offset_i_nm: f64,
        #[serde(default = "default_geometry")]
        geometry: f64,
    },
}

fn default_geometry() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoherenceSpec {
    pub crystals: Vec<String>,
    pub gamma: Vec<Vec<f64>>,
}

/// A parsed and checked experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct Experiment {
    pub description: Option<String>,
    pub network: Network,
    pub scan: ScanConfig,
    /// The grid axes as written; `None` for time scans.
    pub grid_axes: Option<(Axis, Axis)>,
    pub coherence: Option<CoherenceMatrix>,
    pub signal_detector: String,
    pub idler_detector: String,
}

fn field_err(field: impl Into<String>, message: impl Into<String>) -> FormatError {
    FormatError::Field {
        field: field.into(),
        message: message.into(),
    }
}

pub fn parse_str(text: &str) -> Result<Experiment, FormatError> {
    let file: ExperimentFile =
        toml::from_str(text).map_err(|e| FormatError::Syntax(e.to_string()))?;
    Experiment::from_file(file)
}

impl Experiment {
    pub fn from_file(file: ExperimentFile) -> Result<Self, FormatError> {
        if file.schema != SCHEMA {
            return Err(FormatError::Schema {
                found: file.schema,
                expected: SCHEMA,
            });
        }
        let mut builder = Network::builder();
        for (k, m) in file.modes.iter().enumerate() {
            builder
                .registry_mut()
                .register_with_frequency(&m.label, m.alias_of.as_deref(), m.frequency)
                .map_err(|e| FormatError::Network {
                    field: format!("modes[{k}]"),
                    source: e.into(),
                })?;
        }
        for (k, e) in file.elements.iter().enumerate() {
            let field = format!("elements[{k}]");
            let net_err = |source| FormatError::Network {
                field: field.clone(),
                source,
            };
            builder = match e {
                ElementSpec::Crystal {
                    name,
                    signal,
                    idler,
                    coupling,
                } => {
                    let c =
                        Coupling::try_new(coupling.magnitude, coupling.phase).ok_or_else(|| {
                            field_err(
                                format!("{field}.coupling"),
                                "magnitude must be finite and >= 0",
                            )
                        })?;
                    builder.crystal(name, signal, idler, c).map_err(net_err)?
                }
                ElementSpec::PhaseShift {
                    mode,
                    phase,
                    displacement_nm,
                    wavelength_nm,
                    sweep,
                } => {
                    let phase =
                        match (phase, displacement_nm, wavelength_nm) {
                            (Some(p), None, None) => *p,
                            (None, Some(d), Some(l)) if *l > 0.0 => displacement_phase(*d, *l, 1.0),
                            (None, Some(_), Some(_)) => {
                                return Err(field_err(
                                    format!("{field}.wavelength_nm"),
                                    "must be positive",
                                ))
                            }
                            (None, None, None) => 0.0,
                            _ => return Err(field_err(
                                field,
                                "give either `phase` or both `displacement_nm` and `wavelength_nm`",
                            )),
                        };
                    if !phase.is_finite() {
                        return Err(field_err(field, "phase must be finite"));
                    }
                    builder
                        .phase_shift(mode, phase, sweep.map(PhaseVar::from))
                        .map_err(net_err)?
                }
                ElementSpec::BeamSplitter {
                    in_a,
                    in_b,
                    transmission,
                } => builder
                    .beam_splitter(in_a, in_b, *transmission)
                    .map_err(net_err)?,
                ElementSpec::Detector { label, mode } => {
                    builder.detector(label, mode).map_err(net_err)?
                }
            };
        }
        let normalization = if file.paper_normalization {
            Normalization::Paper
        } else {
            Normalization::Unitary
        };
        let network = builder
            .truncation_order(file.truncation_order)
            .normalization(normalization)
            .build()
            .map_err(|source| FormatError::Network {
                field: "elements".into(),
                source,
            })?;

        for (role, label) in [
            ("detectors.signal", &file.detectors.signal),
            ("detectors.idler", &file.detectors.idler),
        ] {
            if network.detector_mode(label).is_none() {
                return Err(field_err(role, format!("no detector labelled `{label}`")));
            }
        }
        if file.detectors.signal == file.detectors.idler {
            return Err(field_err(
                "detectors",
                "signal and idler detectors must differ",
            ));
        }

        let (scan, grid_axes) = match file.scan {
            ScanSpec::Grid { phi_s, phi_i } => (
                ScanConfig::grid_2d(phi_s.as_tuple(), phi_i.as_tuple()),
                Some((phi_s, phi_i)),
            ),
            ScanSpec::Time {
                v_s_nm_per_s,
                v_i_nm_per_s,
                lambda_s_nm,
                lambda_i_nm,
                duration_s,
                step_s,
                offset_s_nm,
                offset_i_nm,
                geometry,
            } => {
                let mut ts = TimeScan::new(
                    v_s_nm_per_s,
                    v_i_nm_per_s,
                    lambda_s_nm,
                    lambda_i_nm,
                    duration_s,
                    step_s,
                )
                .with_offsets(offset_s_nm, offset_i_nm);
                ts.geometry = geometry;
                (ScanConfig::Time(ts), None)
            }
        };
        scan.validate().map_err(|source| FormatError::Analysis {
            field: "scan".into(),
            source,
        })?;

        let coherence = file
            .coherence
            .map(|c| CoherenceMatrix::new(c.crystals, c.gamma))
            .transpose()
            .map_err(|source| FormatError::Analysis {
                field: "coherence".into(),
                source,
            })?;
        if let Some(g) = &coherence {
            for name in network.crystal_names() {
                if !g.names().iter().any(|n| n == name) {
                    return Err(field_err(
                        "coherence.crystals",
                        format!("crystal `{name}` is missing"),
                    ));
                }
            }
        }

        Ok(Self {
            description: file.description,
            network,
            scan,
            grid_axes,
            coherence,
            signal_detector: file.detectors.signal,
            idler_detector: file.detectors.idler,
        })
    }

    /// Back to the file form. Displacement-given phases come back as radians.
    pub fn to_file(&self) -> ExperimentFile {
        let net = &self.network;
        let modes = net
            .registry()
            .registrations()
            .map(|(label, alias_of, frequency)| ModeSpec {
                label: label.to_owned(),
                alias_of: alias_of.map(str::to_owned),
                frequency,
            })
            .collect();
        let elements = net
            .elements()
            .iter()
            .map(|e| match e {
                Element::Crystal {
                    name,
                    signal,
                    idler,
                    coupling,
                } => ElementSpec::Crystal {
                    name: name.clone(),
                    signal: signal.label.clone(),
                    idler: idler.label.clone(),
                    coupling: CouplingSpec {
                        magnitude: coupling.magnitude(),
                        phase: coupling.phase(),
                    },
                },
                Element::PhaseShift { mode, phase, sweep } => ElementSpec::PhaseShift {
                    mode: mode.label.clone(),
                    phase: Some(*phase),
                    displacement_nm: None,
                    wavelength_nm: None,
                    sweep: sweep.map(Sweep::from),
                },
                Element::BeamSplitter {
                    in_a,
                    in_b,
                    transmission,
                } => ElementSpec::BeamSplitter {
                    in_a: in_a.label.clone(),
                    in_b: in_b.label.clone(),
                    transmission: *transmission,
                },
                Element::DetectorTap { mode, label } => ElementSpec::Detector {
                    label: label.clone(),
                    mode: mode.label.clone(),
                },
            })
            .collect();
        let scan = match (&self.scan, self.grid_axes) {
            (ScanConfig::Time(ts), _) => ScanSpec::Time {
                v_s_nm_per_s: ts.v_s,
                v_i_nm_per_s: ts.v_i,
                lambda_s_nm: ts.lambda_s,
                lambda_i_nm: ts.lambda_i,
                duration_s: ts.duration,
                step_s: ts.step,
                offset_s_nm: ts.offset_s,
                offset_i_nm: ts.offset_i,
                geometry: ts.geometry,
            },
            (ScanConfig::Grid(_), Some((phi_s, phi_i))) => ScanSpec::Grid { phi_s, phi_i },
            (ScanConfig::Grid(points), None) => {
                // programmatic grids without axes: only a single point survives
                let p = points.first().copied().unwrap_or(ScanPoint::default());
                ScanSpec::Grid {
                    phi_s: Axis::Fixed(p.phi_s),
                    phi_i: Axis::Fixed(p.phi_i),
                }
            }
        };
        ExperimentFile {
            schema: SCHEMA.to_owned(),
            description: self.description.clone(),
            truncation_order: net.truncation_order(),
            paper_normalization: net.normalization() == Normalization::Paper,
            detectors: DetectorRoles {
                signal: self.signal_detector.clone(),
                idler: self.idler_detector.clone(),
            },
            modes,
            elements,
            scan,
            coherence: self.coherence.as_ref().map(|g| CoherenceSpec {
                crystals: g.names().to_vec(),
                gamma: g.rows().to_vec(),
            }),
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&self.to_file()).expect("experiment file always serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
schema = "biphoton-exp/1"

[[modes]]
label = "s1"

[[modes]]
label = "i1"

[[elements]]
type = "crystal"
name = "X"
signal = "s1"
idler = "i1"
coupling = { magnitude = 0.1 }

[[elements]]
type = "phase_shift"
mode = "s1"
displacement_nm = 202.0
wavelength_nm = 808.0
sweep = "signal"

[[elements]]
type = "detector"
label = "A"
mode = "s1"

[[elements]]
type = "detector"
label = "D"
mode = "i1"

[scan]
kind = "grid"
phi_s = { start = 0.0, stop = 1.0, points = 3 }
phi_i = 0.5
"#;

    #[test]
    fn minimal_file_parses() {
        let exp = parse_str(MINIMAL).unwrap();
        assert_eq!(exp.network.elements().len(), 4);
        match &exp.network.elements()[1] {
            Element::PhaseShift { phase, .. } => {
                assert!((phase - std::f64::consts::FRAC_PI_2).abs() < 1e-15)
            }
            e => panic!("{e:?}"),
        }
        assert_eq!(exp.scan.samples().len(), 3);
        assert_eq!(exp.signal_detector, "A");
    }

    #[test]
    fn round_trip_preserves_network() {
        let exp = parse_str(MINIMAL).unwrap();
        let again = parse_str(&exp.to_toml_string()).unwrap();
        assert_eq!(again, exp);
    }

    #[test]
    fn unknown_key_names_the_line() {
        let text = MINIMAL.replace("sweep = \"signal\"", "sweep = \"signal\"\ncolour = 3");
        let err = parse_str(&text).unwrap_err().to_string();
        assert!(err.contains("colour"), "{err}");
        assert!(err.contains("line"), "{err}");
    }

    #[test]
    fn wrong_schema_is_rejected() {
        let err = parse_str(&MINIMAL.replace("biphoton-exp/1", "biphoton-exp/9")).unwrap_err();
        assert!(matches!(err, FormatError::Schema { .. }));
    }

    #[test]
    fn undeclared_mode_names_the_element() {
        let err = parse_str(&MINIMAL.replace("mode = \"i1\"", "mode = \"i9\""))
            .unwrap_err()
            .to_string();
        assert!(err.starts_with("elements[3]"), "{err}");
    }

    #[test]
    fn mixed_phase_inputs_are_rejected() {
        let text = MINIMAL.replace(
            "wavelength_nm = 808.0",
            "wavelength_nm = 808.0\nphase = 1.0",
        );
        assert!(parse_str(&text)
            .unwrap_err()
            .to_string()
            .contains("elements[1]"));
    }

    #[test]
    fn missing_detector_role() {
        let text = MINIMAL.replace("label = \"D\"", "label = \"B\"");
        assert!(parse_str(&text)
            .unwrap_err()
            .to_string()
            .contains("detectors.idler"));
    }
}
