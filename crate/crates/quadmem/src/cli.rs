//! Command-line surface.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use serde::de::DeserializeOwned;

use quadmem_core::crossbar::{ReadMode, TopologyKind};
use quadmem_core::write::{PolicyKind, UnselectedLines};

use crate::config::{self, Experiment, Overrides, PolicyConfig, Protocol, RunConfig, TopologyConfig, EXPERIMENTS};
use crate::error::{CliError, ErrorBody, ErrorReport, EXIT_USAGE};
use crate::run;

#[derive(Debug, Parser)]
#[command(
    name = "quadmem",
    version,
    about = "Deterministic simulator for ion-intercalation memristors and crossbar arrays"
)]
pub struct Cli {
    /// JSON run configuration; command-line values take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Device parameter preset [paper-calibrated, paper-calibrated-retention].
    #[arg(long, global = true)]
    pub preset: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Artifact directory [default: $QUADMEM_OUTPUT_DIR, then ./out].
    #[arg(long, global = true, value_name = "DIR")]
    pub output_dir: Option<PathBuf>,
    /// Write pulse amplitude, volt.
    #[arg(long, global = true)]
    pub pulse_voltage: Option<f64>,
    /// Longest write pulse per phase, second.
    #[arg(long, global = true)]
    pub pulse_dt: Option<f64>,
    /// Read voltage, volt.
    #[arg(long, global = true)]
    pub read_voltage: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Single-device protocols and array sneak-path demonstration.
    Simulate {
        #[command(subcommand)]
        target: SimulateTarget,
    },
    /// Program an array to target conductances.
    Write(WriteArgs),
    /// Analog multiply-accumulate read of an array.
    Read(ReadArgs),
    /// Repeat an array experiment over several sizes.
    Sweep {
        #[command(subcommand)]
        target: SweepTarget,
    },
    /// Fit R = a/q + b to a trace CSV.
    Fit {
        #[arg(long, value_name = "CSV")]
        trace: PathBuf,
        /// Sidecar JSON with g0_S and q_max_C [default: next to the trace].
        #[arg(long, value_name = "JSON")]
        sidecar: Option<PathBuf>,
    },
    /// Run the experiment named in --config.
    Run,
}

#[derive(Debug, Subcommand)]
pub enum SimulateTarget {
    Device {
        #[arg(long, value_enum)]
        protocol: Protocol,
        /// I-V sweep amplitude, volt [default: read voltage].
        #[arg(long)]
        amplitude: Option<f64>,
        /// I-V sweep cycles per level [default: 1].
        #[arg(long)]
        cycles: Option<usize>,
    },
    /// Sneak-path comparison of three write schemes on one M x M array.
    Array {
        /// Array size M, 2..=16 [default: topology rows].
        #[arg(long)]
        size: Option<usize>,
    },
}

#[derive(Debug, Subcommand)]
pub enum SweepTarget {
    /// Write phase counts of every policy.
    Complexity {
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        sizes: Option<Vec<usize>>,
    },
    /// Disturbance totals of the three write schemes.
    Sneak {
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        sizes: Option<Vec<usize>>,
    },
}

#[derive(Debug, Args)]
pub struct ArrayArgs {
    /// conventional-shared-rail | proposed-isolated-loop
    #[arg(long, value_parser = kebab::<TopologyKind>)]
    pub topology: Option<TopologyKind>,
    #[arg(long)]
    pub rows: Option<usize>,
    #[arg(long)]
    pub cols: Option<usize>,
    /// Ohm per rail segment.
    #[arg(long)]
    pub wire_resistance: Option<f64>,
    /// Array state JSON to start from.
    #[arg(long, value_name = "JSON")]
    pub state: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct WriteArgs {
    #[command(flatten)]
    pub array: ArrayArgs,
    /// sequential-cellwise | row-parallel | full-parallel | half-select-v2
    #[arg(long, value_parser = kebab::<PolicyKind>)]
    pub policy: Option<PolicyKind>,
    /// floating | grounded
    #[arg(long, value_parser = kebab::<UnselectedLines>)]
    pub unselected: Option<UnselectedLines>,
    /// Target conductance JSON [default: seeded random targets].
    #[arg(long, value_name = "JSON")]
    pub targets: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReadArgs {
    #[command(flatten)]
    pub array: ArrayArgs,
    /// Row voltages, comma separated [default: read voltage on every row].
    #[arg(long, value_delimiter = ',', num_args = 1.., allow_negative_numbers = true)]
    pub inputs: Option<Vec<f64>>,
    /// ideal | full-nodal
    #[arg(long, value_parser = kebab::<ReadMode>)]
    pub mode: Option<ReadMode>,
}

/// Parses a kebab-case name through the type's serde representation.
fn kebab<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn experiments_help() -> String {
    let mut s = String::from("Experiments:\n");
    for e in &EXPERIMENTS {
        s.push_str(&format!("  {:<12} {:<38} {}\n", e.name, e.invocation, e.summary));
    }
    s
}

/// The clap command with the experiment list attached to `--help`.
pub fn command() -> clap::Command {
    Cli::command().after_help(experiments_help())
}

impl Cli {
    fn overrides(&self) -> Overrides {
        let mut o = Overrides {
            preset: self.preset.clone(),
            seed: self.seed,
            output_dir: self.output_dir.clone(),
            read_voltage: self.read_voltage,
            policy: PolicyConfig {
                pulse_voltage: self.pulse_voltage,
                pulse_dt: self.pulse_dt,
                ..Default::default()
            },
            ..Default::default()
        };
        let array = |o: &mut Overrides, a: &ArrayArgs| {
            o.topology = TopologyConfig {
                kind: a.topology,
                rows: a.rows,
                cols: a.cols,
                wire_resistance: a.wire_resistance,
            };
        };
        o.experiment = match &self.command {
            Command::Simulate {
                target:
                    SimulateTarget::Device {
                        protocol,
                        amplitude,
                        cycles,
                    },
            } => Some(Experiment::Device {
                protocol: *protocol,
                amplitude: *amplitude,
                cycles: *cycles,
            }),
            Command::Simulate {
                target: SimulateTarget::Array { size },
            } => Some(Experiment::Array { size: *size }),
            Command::Write(w) => {
                array(&mut o, &w.array);
                o.policy.kind = w.policy;
                o.policy.unselected = w.unselected;
                Some(Experiment::Write {
                    state: w.array.state.clone(),
                    targets: w.targets.clone(),
                })
            }
            Command::Read(r) => {
                array(&mut o, &r.array);
                Some(Experiment::Read {
                    state: r.array.state.clone(),
                    inputs: r.inputs.clone(),
                    mode: r.mode,
                })
            }
            Command::Sweep {
                target: SweepTarget::Complexity { sizes },
            } => Some(Experiment::SweepComplexity { sizes: sizes.clone() }),
            Command::Sweep {
                target: SweepTarget::Sneak { sizes },
            } => Some(Experiment::SweepSneak { sizes: sizes.clone() }),
            Command::Fit { trace, sidecar } => Some(Experiment::Fit {
                trace: trace.clone(),
                sidecar: sidecar.clone(),
            }),
            Command::Run => None,
        };
        o
    }

    pub fn execute(&self) -> Result<run::RunSummary, CliError> {
        let mut cfg = match &self.config {
            Some(path) => config::parse_config(path)?,
            None => RunConfig::default(),
        };
        cfg.apply(&self.overrides());
        run::dispatch(&cfg.resolve()?)
    }
}

/// Parses `args`, runs, and reports to `out`/`err`. Returns the exit code.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{}", e.render());
                return 0;
            }
            let report = ErrorReport {
                error: ErrorBody {
                    code: "USAGE",
                    message: e.render().to_string().trim_end().to_string(),
                    exit_code: EXIT_USAGE,
                    pointer: None,
                },
            };
            let _ = writeln!(err, "{}", serde_json::to_string(&report).unwrap_or_default());
            return EXIT_USAGE;
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(err, "{e}");
            return EXIT_USAGE;
        }
    };
    match cli.execute() {
        Ok(summary) => {
            let _ = writeln!(out, "{}", serde_json::to_string_pretty(&summary).unwrap_or_default());
            0
        }
        Err(e) => {
            let _ = writeln!(err, "{}", serde_json::to_string(&e.report()).unwrap_or_default());
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn help_lists_every_experiment() {
        let help = command().render_long_help().to_string();
        for e in &EXPERIMENTS {
            assert!(help.contains(e.name), "{}", e.name);
            assert!(help.contains(e.invocation), "{}", e.invocation);
        }
    }

    #[test]
    fn command_is_well_formed() {
        command().debug_assert();
    }

    #[test]
    fn kebab_names() {
        assert_eq!(kebab::<PolicyKind>("half-select-v2"), Ok(PolicyKind::HalfSelectV2));
        assert!(kebab::<PolicyKind>("nope").is_err());
    }
}
