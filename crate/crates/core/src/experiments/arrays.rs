//! Array-level experiments: sneak-path disturbance and write complexity.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::trace::{ExperimentTrace, Unit};
use crate::crossbar::{CrossbarArray, Topology, TopologyKind};
use crate::device::DeviceParams;
use crate::error::{Error, Result};
use crate::write::{execute_plan, plan_writes, PolicyKind, Targets, WritePolicy, WriteReport};

/// Target fill fractions are drawn uniformly from this range.
pub const TARGET_FILL_RANGE: (f64, f64) = (0.05, 0.95);

pub const SNEAK_MIN_SIZE: usize = 2;
pub const SNEAK_MAX_SIZE: usize = 16;

/// Topology and policy pairs compared by the sneak experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    ProposedFullParallel,
    ConventionalSequentialFloating,
    ConventionalHalfSelect,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [
        Scenario::ProposedFullParallel,
        Scenario::ConventionalSequentialFloating,
        Scenario::ConventionalHalfSelect,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Scenario::ProposedFullParallel => "proposed/full-parallel",
            Scenario::ConventionalSequentialFloating => "conventional/sequential-cellwise",
            Scenario::ConventionalHalfSelect => "conventional/half-select-v2",
        }
    }

    pub fn topology(self) -> TopologyKind {
        match self {
            Scenario::ProposedFullParallel => TopologyKind::ProposedIsolatedLoop,
            _ => TopologyKind::ConventionalSharedRail,
        }
    }

    pub fn policy(self) -> PolicyKind {
        match self {
            Scenario::ProposedFullParallel => PolicyKind::FullParallel,
            Scenario::ConventionalSequentialFloating => PolicyKind::SequentialCellwise,
            Scenario::ConventionalHalfSelect => PolicyKind::HalfSelectV2,
        }
    }
}

/// Seeded full-array targets inside the reachable conductance range.
pub fn random_targets(params: &DeviceParams, rows: usize, cols: usize, seed: u64) -> Result<Targets> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (g_min, g_max) = (params.min_conductance(), params.max_conductance());
    let q_max = params.q_max();
    let per_q = params.conductance_per_charge();
    let g: Vec<f64> = (0..rows * cols)
        .map(|_| {
            let fill: f64 = rng.gen_range(TARGET_FILL_RANGE.0..TARGET_FILL_RANGE.1);
            (g_min + per_q * fill * q_max).min(g_max)
        })
        .collect();
    Targets::full(rows, cols, g)
}

/// Writes `targets` onto a pristine array of the given topology.
pub fn write_pristine(
    params: &DeviceParams,
    kind: TopologyKind,
    policy: &WritePolicy,
    targets: &Targets,
) -> Result<(CrossbarArray, WriteReport)> {
    let mut array = CrossbarArray::new(Topology::new(kind, targets.rows, targets.cols)?, *params)?;
    let plan = plan_writes(targets, params, policy)?;
    let report = execute_plan(&mut array, &plan, policy)?;
    Ok((array, report))
}

fn check_size(m: usize) -> Result<()> {
    if (SNEAK_MIN_SIZE..=SNEAK_MAX_SIZE).contains(&m) {
        Ok(())
    } else {
        Err(Error::SizeOutOfRange {
            size: m,
            min: SNEAK_MIN_SIZE,
            max: SNEAK_MAX_SIZE,
        })
    }
}

/// Runs every [`Scenario`] on an `m x m` array with one shared random
/// target. Returns the reports in [`Scenario::ALL`] order.
pub fn sneak_reports(
    params: &DeviceParams,
    m: usize,
    pulse: &WritePolicy,
    seed: u64,
) -> Result<Vec<(Scenario, WriteReport)>> {
    check_size(m)?;
    let targets = random_targets(params, m, m, seed)?;
    Scenario::ALL
        .iter()
        .map(|&s| {
            let policy = WritePolicy {
                kind: s.policy(),
                ..*pulse
            };
            write_pristine(params, s.topology(), &policy, &targets).map(|(_, r)| (s, r))
        })
        .collect()
}

/// Per-phase disturbance and sneak-current record of each scenario on one
/// `m x m` array.
pub fn run_sneak_demo(params: &DeviceParams, m: usize, pulse: &WritePolicy, seed: u64) -> Result<ExperimentTrace> {
    let reports = sneak_reports(params, m, pulse, seed)?;
    let mut cols: [Vec<f64>; 6] = Default::default();
    let mut trace = ExperimentTrace::new("sneak");
    for (scenario, report) in &reports {
        let mut cumulative = 0.0;
        for ph in &report.phases {
            cumulative += ph.disturbance_l1;
            cols[0].push(scenario.index() as f64);
            cols[1].push(ph.index as f64);
            cols[2].push(ph.disturbance_l1);
            cols[3].push(ph.disturbance_max);
            cols[4].push(ph.max_sneak_current);
            cols[5].push(cumulative);
        }
        let key = scenario.name();
        trace.meta_text(&alloc::format!("scenario_{}", scenario.index()), key);
        trace.meta_number(&alloc::format!("total_disturbance_C[{key}]"), report.disturbance_l1);
        trace.meta_number(&alloc::format!("target_error[{key}]"), report.target_error);
    }
    let [s, p, l1, mx, sneak, cum] = cols;
    trace.push_column("scenario", Unit::Index, s)?;
    trace.push_column("phase", Unit::Index, p)?;
    trace.push_column("dq_l1", Unit::Coulomb, l1)?;
    trace.push_column("dq_max", Unit::Coulomb, mx)?;
    trace.push_column("sneak_max", Unit::Ampere, sneak)?;
    trace.push_column("dq_cumulative", Unit::Coulomb, cum)?;
    trace.meta_integer("size", m as u64);
    trace.meta_integer("seed", seed);
    trace.meta_number("pulse_voltage_V", pulse.pulse_voltage);
    trace.meta_number("pulse_dt_s", pulse.pulse_dt);
    trace.record_params(params);
    Ok(trace)
}

/// Summary of [`sneak_reports`] over several sizes, one row per size and
/// scenario. Each size draws its targets from `seed + size`.
pub fn run_sneak_sweep(
    params: &DeviceParams,
    sizes: &[usize],
    pulse: &WritePolicy,
    seed: u64,
) -> Result<ExperimentTrace> {
    if sizes.is_empty() {
        return Err(Error::EmptySweep);
    }
    let mut cols: [Vec<f64>; 7] = Default::default();
    for &m in sizes {
        for (scenario, r) in sneak_reports(params, m, pulse, seed.wrapping_add(m as u64))? {
            cols[0].push(m as f64);
            cols[1].push(scenario.index() as f64);
            cols[2].push(r.phase_count as f64);
            cols[3].push(r.disturbance_l1);
            cols[4].push(r.disturbance_max);
            cols[5].push(r.max_sneak_current);
            cols[6].push(r.target_error);
        }
    }
    let [size, s, phases, l1, mx, sneak, err] = cols;
    let mut trace = ExperimentTrace::new("sneak-sweep");
    trace.push_column("M", Unit::Count, size)?;
    trace.push_column("scenario", Unit::Index, s)?;
    trace.push_column("phases", Unit::Count, phases)?;
    trace.push_column("dq_total", Unit::Coulomb, l1)?;
    trace.push_column("dq_max", Unit::Coulomb, mx)?;
    trace.push_column("sneak_max", Unit::Ampere, sneak)?;
    trace.push_column("target_error", Unit::Ratio, err)?;
    for s in Scenario::ALL {
        trace.meta_text(&alloc::format!("scenario_{}", s.index()), s.name());
    }
    trace.meta_integer("seed", seed);
    trace.meta_number("pulse_voltage_V", pulse.pulse_voltage);
    trace.meta_number("pulse_dt_s", pulse.pulse_dt);
    trace.record_params(params);
    Ok(trace)
}

/// Topology each policy runs on in the complexity sweep.
pub fn complexity_topology(policy: PolicyKind) -> TopologyKind {
    match policy {
        PolicyKind::HalfSelectV2 => TopologyKind::ConventionalSharedRail,
        _ => TopologyKind::ProposedIsolatedLoop,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexityPoint {
    pub size: usize,
    pub policy: PolicyKind,
    pub phase_count: usize,
    pub law: usize,
    pub total_pulse_time: f64,
}

/// Executes a random full-array write for every policy and size and records
/// phase counts and simulated write time.
pub fn complexity_points(
    params: &DeviceParams,
    sizes: &[usize],
    pulse: &WritePolicy,
    seed: u64,
) -> Result<Vec<ComplexityPoint>> {
    if sizes.is_empty() {
        return Err(Error::EmptySweep);
    }
    let mut out = Vec::new();
    for &m in sizes {
        let targets = random_targets(params, m, m, seed.wrapping_add(m as u64))?;
        for policy in PolicyKind::ALL {
            let wp = WritePolicy { kind: policy, ..*pulse };
            let (_, report) = write_pristine(params, complexity_topology(policy), &wp, &targets)?;
            out.push(ComplexityPoint {
                size: m,
                policy,
                phase_count: report.phase_count,
                law: policy.phase_law(m, m),
                total_pulse_time: report.total_pulse_time,
            });
        }
    }
    Ok(out)
}

pub fn run_complexity_sweep(
    params: &DeviceParams,
    sizes: &[usize],
    pulse: &WritePolicy,
    seed: u64,
) -> Result<ExperimentTrace> {
    let points = complexity_points(params, sizes, pulse, seed)?;
    let mut trace = ExperimentTrace::new("complexity");
    let col = |f: &dyn Fn(&ComplexityPoint) -> f64| points.iter().map(f).collect::<Vec<f64>>();
    trace.push_column("M", Unit::Count, col(&|p| p.size as f64))?;
    trace.push_column("policy", Unit::Index, col(&|p| policy_index(p.policy) as f64))?;
    trace.push_column("phases", Unit::Count, col(&|p| p.phase_count as f64))?;
    trace.push_column("law", Unit::Count, col(&|p| p.law as f64))?;
    trace.push_column("write_time", Unit::Second, col(&|p| p.total_pulse_time))?;
    for p in PolicyKind::ALL {
        trace.meta_text(&alloc::format!("policy_{}", policy_index(p)), p.name());
    }
    trace.meta_integer("seed", seed);
    trace.meta_number("pulse_voltage_V", pulse.pulse_voltage);
    trace.meta_number("pulse_dt_s", pulse.pulse_dt);
    trace.record_params(params);
    Ok(trace)
}

pub fn policy_index(p: PolicyKind) -> usize {
    PolicyKind::ALL.iter().position(|&k| k == p).unwrap()
}

/// Sizes used when none are given.
pub fn default_sizes() -> Vec<usize> {
    vec![2, 4, 8, 16]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_targets_are_seeded_and_in_range() {
        let p = DeviceParams::paper_calibrated();
        let a = random_targets(&p, 3, 3, 11).unwrap();
        let b = random_targets(&p, 3, 3, 11).unwrap();
        let c = random_targets(&p, 3, 3, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        for (_, _, g) in a.cells() {
            assert!(g > p.min_conductance() && g < p.max_conductance());
        }
    }

    #[test]
    fn sneak_demo_size_bounds() {
        let p = DeviceParams::paper_calibrated();
        let pol = WritePolicy::new(PolicyKind::FullParallel);
        assert!(matches!(run_sneak_demo(&p, 1, &pol, 0), Err(Error::SizeOutOfRange { .. })));
        assert!(matches!(run_sneak_demo(&p, 17, &pol, 0), Err(Error::SizeOutOfRange { .. })));
    }

    #[test]
    fn sneak_demo_separates_topologies() {
        let p = DeviceParams::paper_calibrated();
        let pol = WritePolicy::new(PolicyKind::FullParallel);
        let reports = sneak_reports(&p, 3, &pol, 5).unwrap();
        assert_eq!(reports[0].1.disturbance_l1, 0.0);
        assert!(reports[1].1.disturbance_l1 > 0.0);
        assert!(reports[2].1.disturbance_l1 > 0.0);
        let trace = run_sneak_demo(&p, 3, &pol, 5).unwrap();
        trace.validate().unwrap();
        assert_eq!(trace.len(), 1 + 9 + 9);
    }

    #[test]
    fn complexity_counts() {
        let p = DeviceParams::paper_calibrated();
        let pol = WritePolicy::new(PolicyKind::FullParallel);
        for pt in complexity_points(&p, &[1, 3], &pol, 9).unwrap() {
            assert_eq!(pt.phase_count, pt.law, "{pt:?}");
        }
        assert_eq!(complexity_points(&p, &[], &pol, 9), Err(Error::EmptySweep));
    }
}
