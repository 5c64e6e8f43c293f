//! Run configuration: JSON ingestion, presets, overrides and validation.
//!
//! A [`RunConfig`] is what the user writes; every field is optional except
//! where an experiment needs one. [`RunConfig::resolve`] applies the preset
//! and defaults and checks every physical value, producing a [`Resolved`]
//! that experiments consume. [`Resolved::to_config`] turns the result back
//! into a fully populated `RunConfig`, which is what gets recorded next to
//! the artifacts and can be fed back in to reproduce a run.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use quadmem_core::crossbar::{ReadMode, TopologyKind};
use quadmem_core::device::{calibration, DeviceParams};
use quadmem_core::write::{PolicyKind, UnselectedLines, WritePolicy};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "QUADMEM_OUTPUT_DIR";
pub const DEFAULT_OUTPUT_DIR: &str = "out";
pub const DEFAULT_PRESET: &str = "paper-calibrated";
pub const PRESETS: [&str; 2] = ["paper-calibrated", "paper-calibrated-retention"];

pub fn preset(name: &str) -> Result<DeviceParams, CliError> {
    match name {
        "paper-calibrated" => Ok(DeviceParams::paper_calibrated()),
        "paper-calibrated-retention" => Ok(DeviceParams::paper_calibrated_retention()),
        other => Err(CliError::UnknownPreset(other.to_string())),
    }
}

/// Per-field overrides of the preset's device parameters, SI units.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l_x: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l_y: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l_z: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_ion: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_e: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_retention: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub write_threshold: Option<f64>,
}

enum Bound {
    Positive,
    NonNegative,
}

impl ParamOverrides {
    /// Every field of `p`, set.
    pub fn from_params(p: &DeviceParams) -> Self {
        Self {
            e: Some(p.constants.e),
            d: Some(p.geometry.d),
            l_x: Some(p.geometry.l_x),
            l_y: Some(p.geometry.l_y),
            l_z: Some(p.geometry.l_z),
            c0: Some(p.material.c0),
            mu_ion: Some(p.material.mu_ion),
            mu_e: Some(p.material.mu_e),
            g0: Some(p.material.g0),
            q_max: Some(p.material.q_max),
            tau_retention: Some(p.material.tau_retention),
            write_threshold: Some(p.write_threshold),
        }
    }

    pub fn apply(&self, base: DeviceParams) -> Result<DeviceParams, CliError> {
        let mut p = base;
        let fields: [(&str, Option<f64>, &mut f64, Bound); 12] = [
            ("e", self.e, &mut p.constants.e, Bound::Positive),
            ("d", self.d, &mut p.geometry.d, Bound::Positive),
            ("l_x", self.l_x, &mut p.geometry.l_x, Bound::Positive),
            ("l_y", self.l_y, &mut p.geometry.l_y, Bound::Positive),
            ("l_z", self.l_z, &mut p.geometry.l_z, Bound::Positive),
            ("c0", self.c0, &mut p.material.c0, Bound::Positive),
            ("mu_ion", self.mu_ion, &mut p.material.mu_ion, Bound::Positive),
            ("mu_e", self.mu_e, &mut p.material.mu_e, Bound::Positive),
            ("g0", self.g0, &mut p.material.g0, Bound::NonNegative),
            ("q_max", self.q_max, &mut p.material.q_max, Bound::Positive),
            ("tau_retention", self.tau_retention, &mut p.material.tau_retention, Bound::NonNegative),
            ("write_threshold", self.write_threshold, &mut p.write_threshold, Bound::NonNegative),
        ];
        for (name, value, slot, bound) in fields {
            let Some(v) = value else { continue };
            let ok = v.is_finite()
                && match bound {
                    Bound::Positive => v > 0.0,
                    Bound::NonNegative => v >= 0.0,
                };
            if !ok {
                let reason = match bound {
                    Bound::Positive => format!("must be finite and > 0, got {v}"),
                    Bound::NonNegative => format!("must be finite and >= 0, got {v}"),
                };
                return Err(CliError::invalid(format!("params.{name}"), reason));
            }
            *slot = v;
        }
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<TopologyKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rows: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cols: Option<usize>,
    /// Ohm per rail segment.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wire_resistance: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<PolicyKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pulse_voltage: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pulse_dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unselected: Option<UnselectedLines>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    /// Repeated 30 s programming cycles until the resistance saturates.
    S1,
    /// Program, hold, saturate and reverse on a fixed timeline.
    S2,
    /// Saturate, then relax at zero bias for 48 h.
    Retention,
    /// Triangular read sweeps at several programmed levels.
    Iv,
}

/// The experiment a run performs, with its options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Experiment {
    Device {
        protocol: Protocol,
        /// I-V sweep amplitude, volt.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        amplitude: Option<f64>,
        /// I-V sweep cycles per level.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cycles: Option<usize>,
    },
    /// Sneak-path comparison on one square array.
    Array {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        size: Option<usize>,
    },
    Write {
        /// Array state to start from; pristine when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        state: Option<PathBuf>,
        /// Target conductance file; seeded random targets when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        targets: Option<PathBuf>,
    },
    Read {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        state: Option<PathBuf>,
        /// Row voltages; every row at the read voltage when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        inputs: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mode: Option<ReadMode>,
    },
    SweepComplexity {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sizes: Option<Vec<usize>>,
    },
    SweepSneak {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sizes: Option<Vec<usize>>,
    },
    Fit {
        /// CSV trace with `q_C` and `R_ohm` columns.
        trace: PathBuf,
        /// JSON sidecar supplying `g0_S` and `q_max_C`; looked up next to
        /// the trace when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sidecar: Option<PathBuf>,
    },
}

/// One experiment name as it appears in output file names, with the
/// invocation that produces it.
pub struct ExperimentInfo {
    pub name: &'static str,
    pub invocation: &'static str,
    pub summary: &'static str,
}

pub const EXPERIMENTS: [ExperimentInfo; 10] = [
    ExperimentInfo {
        name: "s1",
        invocation: "simulate device --protocol s1",
        summary: "programming curve until saturation",
    },
    ExperimentInfo {
        name: "s2",
        invocation: "simulate device --protocol s2",
        summary: "program, hold, saturate, reverse",
    },
    ExperimentInfo {
        name: "retention",
        invocation: "simulate device --protocol retention",
        summary: "zero-bias relaxation over 48 h",
    },
    ExperimentInfo {
        name: "iv",
        invocation: "simulate device --protocol iv",
        summary: "read I-V sweeps at fixed programmed levels",
    },
    ExperimentInfo {
        name: "sneak",
        invocation: "simulate array",
        summary: "per-phase disturbance and sneak current, three write schemes",
    },
    ExperimentInfo {
        name: "write",
        invocation: "write",
        summary: "program an array to target conductances",
    },
    ExperimentInfo {
        name: "read",
        invocation: "read",
        summary: "analog multiply-accumulate read",
    },
    ExperimentInfo {
        name: "complexity",
        invocation: "sweep complexity",
        summary: "write phase counts per policy over array sizes",
    },
    ExperimentInfo {
        name: "sneak-sweep",
        invocation: "sweep sneak",
        summary: "disturbance totals per scheme over array sizes",
    },
    ExperimentInfo {
        name: "fit",
        invocation: "fit",
        summary: "least-squares fit of R = a/q + b to a trace",
    },
];

impl Experiment {
    /// Name used for output files.
    pub fn file_stem(&self) -> &'static str {
        match self {
            Experiment::Device { protocol, .. } => match protocol {
                Protocol::S1 => "s1",
                Protocol::S2 => "s2",
                Protocol::Retention => "retention",
                Protocol::Iv => "iv",
            },
            Experiment::Array { .. } => "sneak",
            Experiment::Write { .. } => "write",
            Experiment::Read { .. } => "read",
            Experiment::SweepComplexity { .. } => "complexity",
            Experiment::SweepSneak { .. } => "sneak-sweep",
            Experiment::Fit { .. } => "fit",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default)]
    pub params: ParamOverrides,
    #[serde(default)]
    pub topology: TopologyConfig,
    #[serde(default)]
    pub policy: PolicyConfig,
    /// Volt.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub read_voltage: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<Experiment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn default_schema_version() -> u32 {
    SCHEMA_VERSION
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            preset: None,
            params: ParamOverrides::default(),
            topology: TopologyConfig::default(),
            policy: PolicyConfig::default(),
            read_voltage: None,
            experiment: None,
            output_dir: None,
            seed: None,
        }
    }
}

/// Values given on the command line; each one that is set replaces the
/// config file's.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub preset: Option<String>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub read_voltage: Option<f64>,
    pub topology: TopologyConfig,
    pub policy: PolicyConfig,
    pub experiment: Option<Experiment>,
}

impl RunConfig {
    pub fn apply(&mut self, o: &Overrides) {
        fn set<T: Clone>(slot: &mut Option<T>, v: &Option<T>) {
            if v.is_some() {
                slot.clone_from(v);
            }
        }
        set(&mut self.preset, &o.preset);
        set(&mut self.seed, &o.seed);
        set(&mut self.output_dir, &o.output_dir);
        set(&mut self.read_voltage, &o.read_voltage);
        set(&mut self.topology.kind, &o.topology.kind);
        set(&mut self.topology.rows, &o.topology.rows);
        set(&mut self.topology.cols, &o.topology.cols);
        set(&mut self.topology.wire_resistance, &o.topology.wire_resistance);
        set(&mut self.policy.kind, &o.policy.kind);
        set(&mut self.policy.pulse_voltage, &o.policy.pulse_voltage);
        set(&mut self.policy.pulse_dt, &o.policy.pulse_dt);
        set(&mut self.policy.unselected, &o.policy.unselected);
        set(&mut self.experiment, &o.experiment);
    }

    /// Applies the preset and defaults and validates every value.
    pub fn resolve(&self) -> Result<Resolved, CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::invalid(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        let preset_name = self.preset.clone().unwrap_or_else(|| DEFAULT_PRESET.to_string());
        let params = self.params.apply(preset(&preset_name)?)?;
        params
            .validate()
            .map_err(|e| CliError::invalid("params", e.to_string()))?;

        let kind = self.topology.kind.unwrap_or(TopologyKind::ProposedIsolatedLoop);
        let rows = self.topology.rows.unwrap_or(4);
        let cols = self.topology.cols.unwrap_or(rows);
        if rows == 0 {
            return Err(CliError::invalid("topology.rows", "must be >= 1"));
        }
        if cols == 0 {
            return Err(CliError::invalid("topology.cols", "must be >= 1"));
        }
        let wire_resistance = self.topology.wire_resistance.unwrap_or(0.0);
        if !(wire_resistance.is_finite() && wire_resistance >= 0.0) {
            return Err(CliError::invalid("topology.wire_resistance", "must be finite and >= 0"));
        }

        let default_kind = match kind {
            TopologyKind::ProposedIsolatedLoop => PolicyKind::FullParallel,
            TopologyKind::ConventionalSharedRail => PolicyKind::SequentialCellwise,
        };
        let mut policy = WritePolicy::new(self.policy.kind.unwrap_or(default_kind));
        if let Some(v) = self.policy.pulse_voltage {
            policy.pulse_voltage = v;
        }
        if let Some(dt) = self.policy.pulse_dt {
            policy.pulse_dt = dt;
        }
        if let Some(u) = self.policy.unselected {
            policy.unselected = u;
        }
        if !(policy.pulse_voltage.is_finite() && policy.pulse_voltage > 0.0) {
            return Err(CliError::invalid("policy.pulse_voltage", "must be finite and > 0"));
        }
        if !(policy.pulse_dt.is_finite() && policy.pulse_dt > 0.0) {
            return Err(CliError::invalid("policy.pulse_dt", "must be finite and > 0"));
        }

        let read_voltage = self.read_voltage.unwrap_or(calibration::READ_VOLTAGE);
        if !read_voltage.is_finite() {
            return Err(CliError::invalid("read_voltage", "must be finite"));
        }

        let output_dir = self
            .output_dir
            .clone()
            .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR));

        Ok(Resolved {
            preset: preset_name,
            params,
            topology_kind: kind,
            rows,
            cols,
            wire_resistance,
            policy,
            read_voltage,
            experiment: self.experiment.clone(),
            output_dir,
            seed: self.seed.unwrap_or(0),
        })
    }
}

/// A configuration with every default applied and every value checked.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub preset: String,
    pub params: DeviceParams,
    pub topology_kind: TopologyKind,
    pub rows: usize,
    pub cols: usize,
    pub wire_resistance: f64,
    pub policy: WritePolicy,
    pub read_voltage: f64,
    pub experiment: Option<Experiment>,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl Resolved {
    /// Fully populated config that resolves back to `self`.
    pub fn to_config(&self) -> RunConfig {
        RunConfig {
            schema_version: SCHEMA_VERSION,
            preset: Some(self.preset.clone()),
            params: ParamOverrides::from_params(&self.params),
            topology: TopologyConfig {
                kind: Some(self.topology_kind),
                rows: Some(self.rows),
                cols: Some(self.cols),
                wire_resistance: Some(self.wire_resistance),
            },
            policy: PolicyConfig {
                kind: Some(self.policy.kind),
                pulse_voltage: Some(self.policy.pulse_voltage),
                pulse_dt: Some(self.policy.pulse_dt),
                unselected: Some(self.policy.unselected),
            },
            read_voltage: Some(self.read_voltage),
            experiment: self.experiment.clone(),
            output_dir: Some(self.output_dir.clone()),
            seed: Some(self.seed),
        }
    }
}

/// Parses a config document. Schema errors carry a JSON pointer to the
/// offending key.
pub fn parse_config_str(text: &str) -> Result<RunConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|err| {
        let mut pointer = String::new();
        for seg in err.path().iter() {
            use serde_path_to_error::Segment;
            match seg {
                Segment::Seq { index } => pointer.push_str(&format!("/{index}")),
                Segment::Map { key } => pointer.push_str(&format!("/{}", escape(key))),
                Segment::Enum { variant } => pointer.push_str(&format!("/{}", escape(variant))),
                Segment::Unknown => {}
            }
        }
        let message = err.inner().to_string();
        if let Some(field) = unknown_field(&message) {
            let last = format!("/{}", escape(field));
            if !pointer.ends_with(&last) {
                pointer.push_str(&last);
            }
        }
        if pointer.is_empty() {
            pointer.push('/');
        }
        CliError::ConfigSchema { pointer, message }
    })
}

pub fn parse_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(CliError::ConfigNotFound {
                path: path.to_path_buf(),
            })
        }
        Err(e) => return Err(CliError::io(format!("reading {}", path.display()), e)),
    };
    parse_config_str(&text)
}

fn escape(key: &str) -> String {
    key.replace('~', "~0").replace('/', "~1")
}

/// The key named in serde's "unknown field `x`" message.
fn unknown_field(message: &str) -> Option<&str> {
    let rest = message.strip_prefix("unknown field `")?;
    rest.split('`').next()
}
