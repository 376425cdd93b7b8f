//! Fixtures shared by the benchmarks.

use biphoton_core::network::three_crystal_real;
use biphoton_core::{Network, ScanConfig, TimeScan};

/// Three equal crystals in the low-gain regime.
pub fn reference_network() -> Network {
    three_crystal_real(0.1, 0.1, 0.1)
}

/// 10⁴-sample dual-speed delay-line scan (20 and 10 nm/s at 808 and 632 nm).
pub fn reference_time_scan() -> ScanConfig {
    ScanConfig::Time(
        TimeScan::new(20.0, 10.0, 808.0, 632.0, 2000.0, 0.2)
            .with_offsets(267.3333333333333, 375.3333333333333),
    )
}
