use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use biphoton_cli::commands;
use biphoton_cli::{load, CliError, Experiment};
use biphoton_core::network::Normalization;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "biphoton",
    version,
    about = "Three-crystal induced-coherence interferometer simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment file (.exp).
    file: PathBuf,
    /// Override the file's truncation order.
    #[arg(long)]
    truncation_order: Option<u32>,
    /// Use t = r = 1 beam splitters.
    #[arg(long)]
    paper_normalization: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the file's scan and write CSV.
    Scan {
        #[command(flatten)]
        common: Common,
        /// Output path. Defaults to `<stem>.csv` under BIPHOTON_OUTPUT_DIR, else stdout.
        #[arg(long, short)]
        output: Option<PathBuf>,
        /// Also write a gnuplot script for the CSV.
        #[arg(long)]
        plot_script: Option<PathBuf>,
        #[arg(long, env = "BIPHOTON_OUTPUT_DIR", hide_env_values = true)]
        output_dir: Option<PathBuf>,
    },
    /// Print visibility, contrast and the order decomposition.
    Report {
        #[command(flatten)]
        common: Common,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Compare the engine with the Fock-space oracle.
    OracleCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Check the file and print diagnostics.
    Validate {
        #[command(flatten)]
        common: Common,
    },
}

fn open(common: &Common) -> Result<Experiment, CliError> {
    let mut exp = load(&common.file)?;
    if let Some(order) = common.truncation_order {
        exp.network = exp.network.with_truncation_order(order);
    }
    if common.paper_normalization {
        exp.network = exp.network.with_normalization(Normalization::Paper);
    }
    Ok(exp)
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

fn emit(output: Option<&Path>, text: &str) -> Result<(), CliError> {
    match output {
        Some(path) => write_file(path, text),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|source| CliError::Io {
                path: "<stdout>".into(),
                source,
            }),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Scan {
            common,
            output,
            plot_script,
            output_dir,
        } => {
            let exp = open(&common)?;
            let csv = commands::scan_csv(&exp)?;
            let output = output.or_else(|| {
                let stem = common.file.file_stem()?.to_owned();
                output_dir.map(|d| d.join(stem).with_extension("csv"))
            });
            emit(output.as_deref(), &csv)?;
            if let Some(script) = plot_script {
                let data = output
                    .as_deref()
                    .map_or("-".into(), |p| p.display().to_string());
                write_file(&script, &commands::plot_script(&exp, &data))?;
            }
            Ok(())
        }
        Command::Report { common, output } => {
            let exp = open(&common)?;
            emit(output.as_deref(), &commands::report(&exp)?)
        }
        Command::OracleCheck {
            common,
            trials,
            seed,
            output,
        } => {
            let exp = open(&common)?;
            let check = commands::oracle_check(&exp, trials, seed)?;
            emit(output.as_deref(), &check.text)?;
            if check.passed() {
                Ok(())
            } else {
                Err(CliError::OracleMismatch {
                    deviation: check.report.max_rel_deviation,
                    tolerance: commands::ORACLE_TOLERANCE,
                })
            }
        }
        Command::Validate { common } => {
            let exp = open(&common)?;
            let (text, ok) = commands::validate(&exp);
            emit(None, &text)?;
            if ok {
                Ok(())
            } else {
                Err(CliError::Invalid)
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() {
                biphoton_cli::EXIT_INVALID
            } else {
                biphoton_cli::EXIT_OK
            };
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
