//! Subcommand bodies. Each returns its text output; the binary decides where
//! it goes.

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

use biphoton_core::analysis::{path_intensity, scan_multi, scan_with_coherence};
use biphoton_core::fock_oracle::{check_equivalence, EquivalenceReport, OracleMode};
use biphoton_core::network::{ScanPoint, Severity};
use biphoton_core::rates::evaluate;
use biphoton_core::{fringe_stats, Coupling, Network, Observable, ScanConfig, ScanTable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::CliError;
use crate::experiment::Experiment;

pub const CSV_HEADER: &str = "phi_S,phi_I,rate_A,rate_D,rate_coinc";

/// Oracle agreement threshold, relative.
pub const ORACLE_TOLERANCE: f64 = 1e-8;

/// Points per period in the report's visibility sweeps.
const REPORT_SWEEP_POINTS: usize = 256;

fn observables(exp: &Experiment) -> [Observable; 3] {
    [
        Observable::singles(&exp.signal_detector),
        Observable::singles(&exp.idler_detector),
        Observable::coincidence(&exp.signal_detector, &exp.idler_detector),
    ]
}

/// Rows of `(phi_S, phi_I, rate_A, rate_D, rate_coinc)` in scan order.
pub fn scan_rows(exp: &Experiment) -> Result<Vec<[f64; 5]>, CliError> {
    let obs = observables(exp);
    let columns: Vec<ScanTable> = match &exp.coherence {
        None => {
            let multi = scan_multi(&exp.network, &obs, &exp.scan)?;
            (0..obs.len()).map(|j| multi.column(j)).collect()
        }
        Some(g) => obs
            .iter()
            .map(|o| scan_with_coherence(&exp.network, o, g, &exp.scan))
            .collect::<Result<_, _>>()?,
    };
    Ok((0..columns[0].len())
        .map(|k| {
            let p = columns[0].rows[k].point;
            [
                p.phi_s,
                p.phi_i,
                columns[0].rows[k].rate,
                columns[1].rows[k].rate,
                columns[2].rows[k].rate,
            ]
        })
        .collect())
}

/// CSV text with LF line endings and shortest round-trip float formatting.
pub fn scan_csv(exp: &Experiment) -> Result<String, CliError> {
    let rows = scan_rows(exp)?;
    let mut out = String::with_capacity(32 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{}", r[0], r[1], r[2], r[3], r[4]);
    }
    Ok(out)
}

/// gnuplot script plotting the three rate columns of `csv_path`.
pub fn plot_script(exp: &Experiment, csv_path: &str) -> String {
    let (x, xlabel) = match exp.scan {
        ScanConfig::Time(_) => ("($0)", "sample"),
        ScanConfig::Grid(_) => ("1", "phi_S (rad)"),
    };
    format!(
        "set datafile separator ','\n\
         set key autotitle columnhead\n\
         set xlabel '{xlabel}'\n\
         set ylabel 'rate (arb. units)'\n\
         plot '{csv_path}' using {x}:3 with lines, \\\n\
         \x20    '' using {x}:4 with lines, \\\n\
         \x20    '' using {x}:5 with lines\n"
    )
}

fn sweep(exp: &Experiment, obs: &Observable, config: &ScanConfig) -> Result<ScanTable, CliError> {
    Ok(match &exp.coherence {
        None => scan_multi(&exp.network, std::slice::from_ref(obs), config)?.column(0),
        Some(g) => scan_with_coherence(&exp.network, obs, g, config)?,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_owned(), |v| format!("{v:.3}"))
}

/// Which-path contrast from the two strongest single-crystal path intensities
/// at `obs`. One contributing crystal gives `K = 1`; none gives `None`.
pub fn which_path_contrast(network: &Network, obs: &Observable) -> Result<Option<f64>, CliError> {
    let mut intensities = Vec::new();
    for (name, c) in network.couplings() {
        if c.magnitude() > 0.0 {
            intensities.push(path_intensity(network, obs, &name)?);
        }
    }
    intensities.retain(|i| *i > 0.0);
    intensities.sort_by(|a, b| b.total_cmp(a));
    Ok(match intensities.as_slice() {
        [] => None,
        [_] => Some(1.0),
        [a, b, ..] => Some((a - b).abs() / (a + b)),
    })
}

/// Visibility summary plus the per-detector order decomposition.
pub fn report(exp: &Experiment) -> Result<String, CliError> {
    let [sig, idl, coinc] = observables(exp);
    let signal_sweep = ScanConfig::signal_sweep(0.0, TAU, REPORT_SWEEP_POINTS, 0.0);
    let idler_sweep = ScanConfig::idler_sweep(0.0, TAU, REPORT_SWEEP_POINTS, 0.0);
    let grid = ScanConfig::grid_2d((0.0, TAU, 64), (0.0, TAU, 64));

    let a = sweep(exp, &sig, &signal_sweep)?;
    let stats = fringe_stats(&a).ok();
    let v = stats.map(|s| s.visibility);
    let k = which_path_contrast(&exp.network, &sig)?;
    let v2k2 = v.zip(k).map(|(v, k)| v * v + k * k);
    let v_idler = fringe_stats(&sweep(exp, &idl, &idler_sweep)?)
        .ok()
        .map(|s| s.visibility);
    let v_coinc = fringe_stats(&sweep(exp, &coinc, &grid)?)
        .ok()
        .map(|s| s.visibility);
    let background = stats.map(|s| {
        let mean = a.rates().sum::<f64>() / a.len() as f64;
        s.r_min / mean
    });

    let mut out = String::new();
    let _ = writeln!(
        out,
        "V={} K={} V2K2={}",
        fmt_opt(v),
        fmt_opt(k),
        fmt_opt(v2k2)
    );
    let _ = writeln!(
        out,
        "V_idler={} V_coinc={}",
        fmt_opt(v_idler),
        fmt_opt(v_coinc)
    );
    let _ = writeln!(out, "background_fraction={}", fmt_opt(background));
    for obs in [&sig, &idl, &coinc] {
        let r = evaluate(&exp.network, obs, ScanPoint::default())?;
        let orders: Vec<String> = r
            .by_order
            .iter()
            .map(|(o, v)| format!("{o}:{v:e}"))
            .collect();
        let _ = writeln!(
            out,
            "observable={} leading_order={} rate={:e} by_order={}",
            obs.labels().join(","),
            r.leading_order
                .map_or_else(|| "none".to_owned(), |o| o.to_string()),
            r.value,
            if orders.is_empty() {
                "none".to_owned()
            } else {
                orders.join(";")
            },
        );
    }
    Ok(out)
}

/// `trials` copies of the network with every pumped coupling rescaled by a
/// factor in `[0.5, 1.5)` and rephased, each at a random scan point.
pub fn perturbed_cases(network: &Network, trials: usize, seed: u64) -> Vec<(Network, ScanPoint)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..trials)
        .map(|_| {
            let mut net = network.clone();
            for (name, c) in network.couplings() {
                let scaled = Coupling::new(
                    c.magnitude() * rng.gen_range(0.5..1.5),
                    c.phase() + rng.gen_range(-PI..PI),
                );
                net = net.with_coupling(&name, scaled).expect("crystal exists");
            }
            let p = ScanPoint::new(rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU));
            (net, p)
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct OracleCheck {
    pub report: EquivalenceReport,
    pub text: String,
}

impl OracleCheck {
    pub fn passed(&self) -> bool {
        self.report.max_rel_deviation < ORACLE_TOLERANCE
    }
}

/// Engine against the Fock oracle on the file's network and `trials` random
/// perturbations of it.
pub fn oracle_check(exp: &Experiment, trials: usize, seed: u64) -> Result<OracleCheck, CliError> {
    if trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    let first = exp
        .scan
        .samples()
        .first()
        .map(|(_, p)| *p)
        .unwrap_or_default();
    let mut cases = vec![(exp.network.clone(), first)];
    cases.extend(perturbed_cases(&exp.network, trials, seed));
    let report = check_equivalence(&cases, OracleMode::LeadingOrder)?;

    let mut text = String::new();
    let _ = writeln!(
        text,
        "cases={} max_rel_deviation={:e} tolerance={:e} result={}",
        cases.len(),
        report.max_rel_deviation,
        ORACLE_TOLERANCE,
        if report.max_rel_deviation < ORACLE_TOLERANCE {
            "pass"
        } else {
            "fail"
        }
    );
    // informational: normalized probabilities with the pair expansion carried
    // to second order, against the leading-order rates
    match check_equivalence(&cases[..1], OracleMode::Perturbative(2)) {
        Ok(r) => {
            let _ = writeln!(text, "leakage_order2={:e}", r.max_rel_deviation);
        }
        Err(e) => {
            let _ = writeln!(text, "leakage_order2=n/a ({e})");
        }
    }
    for d in exp.network.validate() {
        let _ = writeln!(text, "{d}");
    }
    Ok(OracleCheck { report, text })
}

/// Diagnostics text and whether any of them is an error.
pub fn validate(exp: &Experiment) -> (String, bool) {
    let diags = exp.network.validate();
    let mut text = String::new();
    for d in &diags {
        let _ = writeln!(text, "{d}");
    }
    let ok = diags.iter().all(|d| d.severity != Severity::Error);
    let _ = writeln!(
        text,
        "{}: {} element(s), {} detector(s), {} scan sample(s)",
        if ok { "ok" } else { "invalid" },
        exp.network.elements().len(),
        exp.network.detector_labels().count(),
        exp.scan.samples().len()
    );
    (text, ok)
}
