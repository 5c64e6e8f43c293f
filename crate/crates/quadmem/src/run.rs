//! Experiment dispatch: runs one resolved configuration and writes its
//! artifacts.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use quadmem_core::crossbar::{self, CrossbarArray, ReadMode, Topology};
use quadmem_core::device::DeviceState;
use quadmem_core::experiments::{
    self, complexity_points, fit_k_model, ExperimentTrace, Unit, TARGET_FILL_RANGE,
};
use quadmem_core::write::{execute_plan, plan_writes, PolicyKind, Targets, WriteReport};

use crate::config::{Experiment, Protocol, Resolved};
use crate::error::{CliError, Context};
use crate::output::{self, ArrayStateFile, ArtifactSet, Sidecar};

/// Default sizes of the array sweeps.
pub const DEFAULT_SWEEP_SIZES: [usize; 4] = [2, 4, 8, 16];

/// What a run produced; printed as JSON on success.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub experiment: String,
    pub seed: u64,
    pub files: Vec<PathBuf>,
    pub result: Value,
}

/// Runs the configured experiment and writes its artifacts under
/// `config.output_dir`.
pub fn dispatch(config: &Resolved) -> Result<RunSummary, CliError> {
    let experiment = config
        .experiment
        .as_ref()
        .ok_or_else(|| CliError::invalid("experiment", "no experiment selected"))?;
    let stem = experiment.file_stem();
    let mut out = ArtifactSet::new(&config.output_dir, stem, config.seed)?;

    let (trace, result) = match experiment {
        Experiment::Device {
            protocol,
            amplitude,
            cycles,
        } => device(config, *protocol, *amplitude, *cycles)?,
        Experiment::Array { size } => {
            let m = size.unwrap_or(config.rows);
            let trace = experiments::run_sneak_demo(&config.params, m, &config.policy, config.seed)
                .context("sneak demo")?;
            (trace, Value::Null)
        }
        Experiment::Write { state, targets } => write(config, state.as_deref(), targets.as_deref(), &mut out)?,
        Experiment::Read { state, inputs, mode } => {
            read(config, state.as_deref(), inputs.as_deref(), mode.unwrap_or(ReadMode::FullNodal), &mut out)?
        }
        Experiment::SweepComplexity { sizes } => complexity(config, sizes.as_deref())?,
        Experiment::SweepSneak { sizes } => {
            let sizes = sizes.clone().unwrap_or_else(|| DEFAULT_SWEEP_SIZES.to_vec());
            let trace = experiments::run_sneak_sweep(&config.params, &sizes, &config.policy, config.seed)
                .context("sneak sweep")?;
            (trace, Value::Null)
        }
        Experiment::Fit { trace, sidecar } => fit(trace, sidecar.as_deref())?,
    };

    out.write(None, "csv", &output::trace_csv(&trace)?)?;
    let sidecar = Sidecar {
        schema_version: crate::config::SCHEMA_VERSION,
        experiment: stem.to_string(),
        seed: config.seed,
        created: out.created.clone(),
        config: config.to_config(),
        columns: trace.headers(),
        metadata: output::meta_json(&trace.metadata),
        result: result.clone(),
    };
    out.write_json(None, &sidecar)?;

    Ok(RunSummary {
        experiment: stem.to_string(),
        seed: config.seed,
        files: out.written().to_vec(),
        result,
    })
}

fn device(
    config: &Resolved,
    protocol: Protocol,
    amplitude: Option<f64>,
    cycles: Option<usize>,
) -> Result<(ExperimentTrace, Value), CliError> {
    let p = &config.params;
    let trace = match protocol {
        Protocol::S1 => experiments::run_s1_protocol(p),
        Protocol::S2 => experiments::run_s2_protocol(p),
        Protocol::Retention => experiments::run_retention(p),
        Protocol::Iv => {
            let a = amplitude.unwrap_or(config.read_voltage);
            if !(a.is_finite() && a > 0.0) {
                return Err(CliError::invalid("experiment.amplitude", "must be finite and > 0"));
            }
            let n = cycles.unwrap_or(1);
            if n == 0 {
                return Err(CliError::invalid("experiment.cycles", "must be >= 1"));
            }
            experiments::run_iv_sweep(p, a, n)
        }
    }
    .context("device protocol")?;
    let result = match trace.column("R_ohm") {
        Some(r) if !r.is_empty() => json!({
            "R_initial_ohm": r[0],
            "R_final_ohm": r[r.len() - 1],
            "samples": r.len(),
        }),
        _ => Value::Null,
    };
    Ok((trace, result))
}

fn load_array(config: &Resolved, state: Option<&Path>) -> Result<CrossbarArray, CliError> {
    match state {
        Some(path) => output::read_array_state(path),
        None => {
            let topo = Topology::new(config.topology_kind, config.rows, config.cols).context("topology")?;
            CrossbarArray::new(topo, config.params)
                .and_then(|a| a.with_wire_resistance(config.wire_resistance))
                .context("array")
        }
    }
}

/// `(phase, row, col, dq, g)` of one non-target cell.
type CellRow = (usize, usize, usize, f64, f64);

fn cell_trace(name: &str, rows: &[CellRow]) -> Result<ExperimentTrace, CliError> {
    let mut t = ExperimentTrace::new(name);
    let col = |f: &dyn Fn(&CellRow) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
    t.push_column("phase", Unit::Index, col(&|r| r.0 as f64)).context("trace")?;
    t.push_column("cell_row", Unit::Index, col(&|r| r.1 as f64)).context("trace")?;
    t.push_column("cell_col", Unit::Index, col(&|r| r.2 as f64)).context("trace")?;
    t.push_column("dq", Unit::Coulomb, col(&|r| r.3)).context("trace")?;
    t.push_column("G", Unit::Siemens, col(&|r| r.4)).context("trace")?;
    Ok(t)
}

fn report_summary(r: &WriteReport) -> Value {
    json!({
        "policy": r.policy,
        "topology": r.topology,
        "phase_count": r.phase_count,
        "total_pulse_time_s": r.total_pulse_time,
        "target_error": r.target_error,
        "disturbance_l1_C": r.disturbance_l1,
        "disturbance_max_C": r.disturbance_max,
        "max_sneak_current_A": r.max_sneak_current,
    })
}

fn write(
    config: &Resolved,
    state: Option<&Path>,
    targets: Option<&Path>,
    out: &mut ArtifactSet,
) -> Result<(ExperimentTrace, Value), CliError> {
    let mut array = load_array(config, state)?;
    // fail on a bad pairing before doing any work
    config.policy.check_topology(array.topology.kind).context("write policy")?;
    let (m, n) = (array.rows(), array.cols());
    let targets = match targets {
        Some(path) => {
            let file = output::read_targets(path)?;
            if file.conductance.len() != m || file.conductance.iter().any(|r| r.len() != n) {
                return Err(CliError::format(
                    path.display().to_string(),
                    format!("targets must be {m}x{n} to match the array"),
                ));
            }
            Targets::partial(m, n, file.conductance.into_iter().flatten().collect()).context("targets")?
        }
        None => experiments::random_targets(&array.params, m, n, config.seed).context("targets")?,
    };
    let plan = plan_writes(&targets, &array.params, &config.policy).context("write plan")?;
    let report = execute_plan(&mut array, &plan, &config.policy).context("write")?;

    let rows: Vec<_> = report
        .phases
        .iter()
        .flat_map(|ph| ph.cells.iter().map(move |c| (ph.index, c.row, c.col, c.dq, c.g)))
        .collect();
    let mut trace = cell_trace("write", &rows)?;
    trace.meta_integer("seed", config.seed);
    trace.record_params(&array.params);

    out.write_json(Some("report"), &json!({ "schema_version": crate::config::SCHEMA_VERSION, "report": report }))?;
    out.write_json(Some("state"), &ArrayStateFile::new(array.clone()))?;
    let g = array.conductances();
    out.write(
        Some("conductance"),
        "mtx",
        output::matrix_market(m, n, &g, "cell conductance after write, siemens").as_bytes(),
    )?;
    Ok((trace, report_summary(&report)))
}

fn read(
    config: &Resolved,
    state: Option<&Path>,
    inputs: Option<&[f64]>,
    mode: ReadMode,
    out: &mut ArtifactSet,
) -> Result<(ExperimentTrace, Value), CliError> {
    let array = match state {
        Some(_) => load_array(config, state)?,
        None => {
            // seeded random programmed state
            let mut a = load_array(config, None)?;
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let q_max = a.params.q_max();
            for c in &mut a.cells {
                *c = DeviceState::with_charge(rng.gen_range(TARGET_FILL_RANGE.0..TARGET_FILL_RANGE.1) * q_max);
            }
            a
        }
    };
    let v: Vec<f64> = match inputs {
        Some(v) => v.to_vec(),
        None => vec![config.read_voltage; array.rows()],
    };
    let currents = crossbar::read_mac(&array, &v, mode).context("read")?;
    let ideal = crossbar::read_mac(&array, &v, ReadMode::Ideal).context("read")?;

    let mut trace = ExperimentTrace::new("read");
    trace
        .push_column("col", Unit::Index, (0..currents.len()).map(|j| j as f64).collect())
        .context("trace")?;
    trace.push_column("I", Unit::Ampere, currents.clone()).context("trace")?;
    trace.push_column("I_ideal", Unit::Ampere, ideal).context("trace")?;
    trace.meta_text("mode", mode_name(mode));
    trace.meta_integer("seed", config.seed);
    trace.record_params(&array.params);

    let g = array.conductances();
    out.write(
        Some("conductance"),
        "mtx",
        output::matrix_market(array.rows(), array.cols(), &g, "cell conductance, siemens").as_bytes(),
    )?;
    Ok((trace, json!({ "inputs_V": v, "currents_A": currents })))
}

fn mode_name(mode: ReadMode) -> &'static str {
    match mode {
        ReadMode::Ideal => "ideal",
        ReadMode::FullNodal => "full-nodal",
    }
}

fn complexity(config: &Resolved, sizes: Option<&[usize]>) -> Result<(ExperimentTrace, Value), CliError> {
    let sizes = sizes.map(<[usize]>::to_vec).unwrap_or_else(|| DEFAULT_SWEEP_SIZES.to_vec());
    let trace =
        experiments::run_complexity_sweep(&config.params, &sizes, &config.policy, config.seed).context("sweep")?;
    let points = complexity_points(&config.params, &sizes, &config.policy, config.seed).context("sweep")?;
    let mut counts: BTreeMap<&str, BTreeMap<String, usize>> = BTreeMap::new();
    let mut laws: BTreeMap<&str, BTreeMap<String, usize>> = BTreeMap::new();
    for p in &points {
        counts.entry(p.policy.name()).or_default().insert(p.size.to_string(), p.phase_count);
        laws.entry(p.policy.name()).or_default().insert(p.size.to_string(), p.law);
    }
    let policies: Vec<&str> = PolicyKind::ALL.iter().map(|p| p.name()).collect();
    Ok((
        trace,
        json!({ "policies": policies, "phase_counts": counts, "laws": laws }),
    ))
}

/// The sidecar written next to a trace CSV, if it exists.
fn sibling_sidecar(trace: &Path) -> Option<PathBuf> {
    let p = trace.with_extension("json");
    p.exists().then_some(p)
}

fn fit(trace_path: &Path, sidecar: Option<&Path>) -> Result<(ExperimentTrace, Value), CliError> {
    let mut trace = output::read_trace_csv(trace_path, "fit-input")?;
    let sidecar_path = sidecar.map(Path::to_path_buf).or_else(|| sibling_sidecar(trace_path));
    let mut generating_a = None;
    if let Some(path) = &sidecar_path {
        let text =
            std::fs::read_to_string(path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
        let side: Value = serde_json::from_str(&text).map_err(|e| CliError::format(path.display().to_string(), e))?;
        let meta = side.get("metadata").cloned().unwrap_or(Value::Null);
        for key in ["g0_S", "q_max_C"] {
            if let Some(v) = meta.get(key).and_then(Value::as_f64) {
                trace.meta_number(key, v);
            }
        }
        let get = |k: &str| meta.get(k).and_then(Value::as_f64);
        if let (Some(lx), Some(ly), Some(mu)) = (get("l_x_m"), get("l_y_m"), get("mu_e_m2_per_Vs")) {
            generating_a = Some(lx * ly / mu);
        }
    }
    let fit = fit_k_model(&trace).context("fit")?;

    let mut out = ExperimentTrace::new("fit");
    out.push_column("sample", Unit::Index, (0..fit.residuals.len()).map(|k| k as f64).collect())
        .context("trace")?;
    out.push_column("residual", Unit::Ohm, fit.residuals.clone()).context("trace")?;
    out.meta_text("input", &trace_path.display().to_string());

    let mut result = serde_json::to_value(&fit).map_err(|e| CliError::format("fit", e))?;
    if let Some(a) = generating_a {
        result["generating_a"] = json!(a);
        result["relative_error"] = json!((fit.a - a).abs() / a);
    }
    Ok((out, result))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunConfig;

    fn resolved(dir: &Path, experiment: Experiment) -> Resolved {
        let cfg = RunConfig {
            experiment: Some(experiment),
            output_dir: Some(dir.to_path_buf()),
            ..Default::default()
        };
        cfg.resolve().unwrap()
    }

    #[test]
    fn complexity_result_lists_counts() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = resolved(dir.path(), Experiment::SweepComplexity { sizes: Some(vec![2, 4]) });
        let s = dispatch(&cfg).unwrap();
        assert_eq!(s.result["phase_counts"]["sequential-cellwise"]["4"], 16);
        assert_eq!(s.result["phase_counts"]["row-parallel"]["4"], 4);
        assert_eq!(s.result["phase_counts"]["full-parallel"]["4"], 1);
        assert_eq!(s.result["phase_counts"]["half-select-v2"]["2"], 4);
        assert_eq!(s.files.len(), 2);
    }

    #[test]
    fn write_then_read_state() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = resolved(dir.path(), Experiment::Write { state: None, targets: None });
        let s = dispatch(&cfg).unwrap();
        assert_eq!(s.result["phase_count"], 1);
        let state = s.files.iter().find(|p| p.to_string_lossy().ends_with("-state.json")).unwrap();
        let array = output::read_array_state(state).unwrap();
        assert_eq!(array.rows(), 4);

        let cfg = resolved(
            dir.path(),
            Experiment::Read {
                state: Some(state.clone()),
                inputs: None,
                mode: None,
            },
        );
        let r = dispatch(&cfg).unwrap();
        let expected = crossbar::read_mac(&array, &[0.2; 4], ReadMode::Ideal).unwrap();
        for (j, e) in expected.iter().enumerate() {
            let got = r.result["currents_A"][j].as_f64().unwrap();
            assert!((got - e).abs() < 1e-9 * e.abs());
        }
    }

    #[test]
    fn mismatched_policy_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = resolved(dir.path(), Experiment::Write { state: None, targets: None });
        cfg.policy.kind = PolicyKind::HalfSelectV2;
        let err = dispatch(&cfg).unwrap_err();
        assert_eq!(err.code(), "POLICY_TOPOLOGY_MISMATCH");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn fit_reads_generated_trace() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = resolved(
            dir.path(),
            Experiment::Device {
                protocol: Protocol::S2,
                amplitude: None,
                cycles: None,
            },
        );
        let s = dispatch(&cfg).unwrap();
        let csv = s.files.iter().find(|p| p.extension().unwrap() == "csv").unwrap().clone();
        let f = dispatch(&resolved(dir.path(), Experiment::Fit { trace: csv, sidecar: None })).unwrap();
        assert!(f.result["relative_error"].as_f64().unwrap() < 0.01);
        assert!(f.result["r_squared"].as_f64().unwrap() >= 0.99);
    }
}
