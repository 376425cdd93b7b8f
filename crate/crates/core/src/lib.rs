//! Induced-coherence biphoton interferometer networks.
//!
//! Crystals pumped in the low-gain regime mix the vacuum fields of their
//! signal and idler modes. When two crystals share an idler mode, their signal
//! fields become mutually coherent without any stimulated emission. This crate
//! derives the detector field operators of an arbitrary table of crystals and
//! linear optics ([`network`]), evaluates normally ordered counting and
//! coincidence rates from them ([`rates`]), extracts fringe visibility and
//! which-path contrast ([`analysis`]) and cross-checks everything against an
//! independent truncated Fock-space calculation ([`fock_oracle`]).

pub mod algebra;
pub mod analysis;
pub mod error;
pub mod fock_oracle;
pub mod network;
pub mod rates;

pub use algebra::{
    vacuum_expectation, Expectation, ModeId, ModeRef, ModeRegistry, OperatorExpression,
    OperatorTerm,
};
pub use analysis::{
    fringe_stats, scan, scan_multi, CoherenceMatrix, FringeStats, ScanConfig, ScanTable, TimeScan,
};
pub use error::{AnalysisError, NetworkError, OracleError, RegistryError};
pub use network::{
    three_crystal, three_crystal_real, Coupling, Element, Network, Normalization, PhaseVar,
    ScanPoint,
};
pub use rates::{coincidence_rate, evaluate, singles_rate, Observable, RateResult};
