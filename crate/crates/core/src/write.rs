//! Write scheduling over a target conductance matrix.
//!
//! Targets are given in conductance and converted to charge; each pulse's
//! width is obtained by inverting the saturating charge law
//! ([`pulse_width_for_target`]) from the cell's charge at the start of its
//! phase. A phase is the unit of write complexity: one simultaneous set of
//! pulses.
//!
//! Inside a phase the pulses end at different times. The phase is cut into
//! slices at those instants; each slice's bias is solved on the conductances
//! frozen at phase start, and every cell then integrates its piecewise
//! constant programming-path voltage through the device law.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use libm::{fabs, log};
use serde::{Deserialize, Serialize};

use crate::crossbar::{self, BiasConfig, CrossbarArray, LineId, TopologyKind};
use crate::device::{self, DeviceParams, DeviceState};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    /// One cell per phase.
    SequentialCellwise,
    /// One full row per phase.
    RowParallel,
    /// Every cell in a single phase; needs isolated control loops.
    FullParallel,
    /// One cell per phase with unselected rails at half the write voltage;
    /// shared-rail arrays only.
    HalfSelectV2,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] = [
        PolicyKind::SequentialCellwise,
        PolicyKind::RowParallel,
        PolicyKind::FullParallel,
        PolicyKind::HalfSelectV2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::SequentialCellwise => "sequential-cellwise",
            PolicyKind::RowParallel => "row-parallel",
            PolicyKind::FullParallel => "full-parallel",
            PolicyKind::HalfSelectV2 => "half-select-v2",
        }
    }

    pub fn supports(self, topology: TopologyKind) -> bool {
        match self {
            PolicyKind::HalfSelectV2 => topology == TopologyKind::ConventionalSharedRail,
            PolicyKind::FullParallel => topology == TopologyKind::ProposedIsolatedLoop,
            PolicyKind::SequentialCellwise | PolicyKind::RowParallel => true,
        }
    }

    /// Phases needed to program every cell of an `rows x cols` array.
    pub fn phase_law(self, rows: usize, cols: usize) -> usize {
        match self {
            PolicyKind::SequentialCellwise | PolicyKind::HalfSelectV2 => rows * cols,
            PolicyKind::RowParallel => rows,
            PolicyKind::FullParallel => 1,
        }
    }
}

/// Treatment of non-selected rails on shared-rail arrays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnselectedLines {
    #[default]
    Floating,
    /// Held at the selected row's potential.
    Grounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WritePolicy {
    pub kind: PolicyKind,
    /// Pulse amplitude, volt; the sign is chosen per cell.
    pub pulse_voltage: f64,
    /// Longest pulse a phase may apply, second.
    pub pulse_dt: f64,
    #[serde(default)]
    pub unselected: UnselectedLines,
}

impl WritePolicy {
    pub fn new(kind: PolicyKind) -> Self {
        Self {
            kind,
            pulse_voltage: device::calibration::PROGRAM_VOLTAGE,
            pulse_dt: 600.0,
            unselected: UnselectedLines::Floating,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pulse_voltage.is_finite() && self.pulse_voltage > 0.0) {
            return Err(Error::InvalidParameter {
                name: "policy.pulse_voltage",
                reason: "must be finite and > 0",
            });
        }
        if !(self.pulse_dt.is_finite() && self.pulse_dt > 0.0) {
            return Err(Error::InvalidParameter {
                name: "policy.pulse_dt",
                reason: "must be finite and > 0",
            });
        }
        Ok(())
    }

    pub fn check_topology(&self, topology: TopologyKind) -> Result<()> {
        if self.kind.supports(topology) {
            Ok(())
        } else {
            Err(Error::PolicyTopologyMismatch {
                policy: self.kind,
                topology,
            })
        }
    }
}

/// Target conductances; `None` leaves a cell alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Targets {
    pub rows: usize,
    pub cols: usize,
    /// Row-major, siemens.
    pub conductance: Vec<Option<f64>>,
}

impl Targets {
    pub fn full(rows: usize, cols: usize, conductance: Vec<f64>) -> Result<Self> {
        Self::partial(rows, cols, conductance.into_iter().map(Some).collect())
    }

    pub fn partial(rows: usize, cols: usize, conductance: Vec<Option<f64>>) -> Result<Self> {
        if conductance.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: conductance.len(),
            });
        }
        Ok(Self { rows, cols, conductance })
    }

    pub fn cells(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.conductance
            .iter()
            .enumerate()
            .filter_map(move |(k, g)| g.map(|g| (k / self.cols, k % self.cols, g)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    pub row: usize,
    pub col: usize,
    pub target_g: f64,
    pub target_q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub pulses: Vec<PulseSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WritePlan {
    pub policy: PolicyKind,
    pub rows: usize,
    pub cols: usize,
    pub phases: Vec<Phase>,
}

impl WritePlan {
    pub fn phase_count(&self) -> usize {
        self.phases.len()
    }
}

/// Groups targets into phases according to the policy.
///
/// Fails with [`Error::UnreachableTarget`] listing every cell whose target
/// lies outside `[G(0), G(q_max)]`.
pub fn plan_writes(targets: &Targets, params: &DeviceParams, policy: &WritePolicy) -> Result<WritePlan> {
    policy.validate()?;
    let (g_min, g_max) = (params.min_conductance(), params.max_conductance());
    let q_max = params.q_max();

    let mut bad = Vec::new();
    let mut pulses = Vec::new();
    for (row, col, g) in targets.cells() {
        if !(g.is_finite() && g >= g_min && g <= g_max) {
            bad.push((row, col));
            continue;
        }
        let target_q = params.charge_for_conductance(g).clamp(0.0, q_max);
        pulses.push(PulseSpec {
            row,
            col,
            target_g: g,
            target_q,
        });
    }
    if !bad.is_empty() {
        return Err(Error::UnreachableTarget { cells: bad });
    }

    let phases = match policy.kind {
        PolicyKind::SequentialCellwise | PolicyKind::HalfSelectV2 => {
            pulses.into_iter().map(|p| Phase { pulses: vec![p] }).collect()
        }
        PolicyKind::RowParallel => {
            let mut phases: Vec<Phase> = Vec::new();
            for p in pulses {
                match phases.last_mut() {
                    Some(ph) if ph.pulses[0].row == p.row => ph.pulses.push(p),
                    _ => phases.push(Phase { pulses: vec![p] }),
                }
            }
            phases
        }
        PolicyKind::FullParallel => {
            if pulses.is_empty() {
                Vec::new()
            } else {
                vec![Phase { pulses }]
            }
        }
    };

    Ok(WritePlan {
        policy: policy.kind,
        rows: targets.rows,
        cols: targets.cols,
        phases,
    })
}

/// Duration of a pulse at `v_p` that moves the charge from `current_q` to
/// `target_q` under the saturating law.
pub fn pulse_width_for_target(current_q: f64, target_q: f64, params: &DeviceParams, v_p: f64) -> Result<f64> {
    let q_max = params.q_max();
    for q in [current_q, target_q] {
        if !(q >= 0.0 && q <= q_max) {
            return Err(Error::TargetOutOfRange { q, q_max });
        }
    }
    if target_q == current_q {
        return Ok(0.0);
    }
    if fabs(v_p) <= params.write_threshold || v_p == 0.0 {
        return Err(Error::PulseBelowThreshold {
            amplitude: fabs(v_p),
            threshold: params.write_threshold,
        });
    }
    let rising = target_q > current_q;
    if rising != (v_p > 0.0) {
        return Err(Error::WrongPolarity {
            from: current_q,
            to: target_q,
        });
    }
    let i_p = device::programming_current(params, v_p);
    if rising {
        if target_q >= q_max {
            return Err(Error::UnreachableTarget { cells: Vec::new() });
        }
        Ok(-(q_max / i_p) * log((q_max - target_q) / (q_max - current_q)))
    } else {
        if target_q <= 0.0 {
            return Err(Error::UnreachableTarget { cells: Vec::new() });
        }
        Ok((q_max / i_p) * log(target_q / current_q))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellDisturbance {
    pub row: usize,
    pub col: usize,
    /// Charge change during the phase, coulomb.
    pub dq: f64,
    /// Conductance after the phase, siemens.
    pub g: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub index: usize,
    /// Longest pulse of the phase, second.
    pub duration: f64,
    /// Cells pulsed in this phase.
    pub targets: Vec<(usize, usize)>,
    pub disturbance_l1: f64,
    pub disturbance_max: f64,
    /// Largest programming-path current through a non-pulsed cell, ampere.
    pub max_sneak_current: f64,
    /// Every non-pulsed cell.
    pub cells: Vec<CellDisturbance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WriteReport {
    pub policy: PolicyKind,
    pub topology: TopologyKind,
    /// Phases that applied at least one pulse.
    pub phase_count: usize,
    /// Sum of phase durations, second.
    pub total_pulse_time: f64,
    /// Row-major conductances after the write, siemens.
    pub achieved_g: Vec<f64>,
    /// Largest relative conductance error over planned targets.
    pub target_error: f64,
    pub disturbance_l1: f64,
    pub disturbance_max: f64,
    pub max_sneak_current: f64,
    pub phases: Vec<PhaseRecord>,
}

struct ActivePulse {
    index: usize,
    voltage: f64,
    width: f64,
}

/// Applies `plan` to `array`.
pub fn execute_plan(array: &mut CrossbarArray, plan: &WritePlan, policy: &WritePolicy) -> Result<WriteReport> {
    policy.validate()?;
    policy.check_topology(array.topology.kind)?;
    array.validate()?;
    if plan.policy != policy.kind {
        return Err(Error::PlanMismatch(format!(
            "plan built for {:?}, executed with {:?}",
            plan.policy, policy.kind
        )));
    }
    if plan.rows != array.rows() || plan.cols != array.cols() {
        return Err(Error::PlanMismatch(format!(
            "plan is {}x{}, array is {}x{}",
            plan.rows,
            plan.cols,
            array.rows(),
            array.cols()
        )));
    }
    if policy.pulse_voltage <= array.params.write_threshold {
        return Err(Error::PulseBelowThreshold {
            amplitude: policy.pulse_voltage,
            threshold: array.params.write_threshold,
        });
    }
    for phase in &plan.phases {
        for p in &phase.pulses {
            if p.row >= plan.rows || p.col >= plan.cols {
                return Err(Error::PlanMismatch(format!("pulse at ({}, {}) outside array", p.row, p.col)));
            }
            if policy.kind == PolicyKind::RowParallel && p.row != phase.pulses[0].row {
                return Err(Error::PlanMismatch("row-parallel phase spans rows".into()));
            }
        }
        let single = matches!(policy.kind, PolicyKind::SequentialCellwise | PolicyKind::HalfSelectV2);
        if single && phase.pulses.len() != 1 {
            return Err(Error::PlanMismatch("single-cell policy with multi-cell phase".into()));
        }
    }

    let mut records = Vec::new();
    let mut total_pulse_time = 0.0;
    for phase in &plan.phases {
        if let Some(record) = execute_phase(array, phase, policy, records.len())? {
            total_pulse_time += record.duration;
            records.push(record);
        }
    }

    let achieved_g = array.conductances();
    let target_error = plan
        .phases
        .iter()
        .flat_map(|ph| ph.pulses.iter())
        .map(|p| fabs(achieved_g[array.index(p.row, p.col)] - p.target_g) / p.target_g)
        .fold(0.0, f64::max);

    Ok(WriteReport {
        policy: policy.kind,
        topology: array.topology.kind,
        phase_count: records.len(),
        total_pulse_time,
        achieved_g,
        target_error,
        disturbance_l1: records.iter().map(|r| r.disturbance_l1).sum(),
        disturbance_max: records.iter().map(|r| r.disturbance_max).fold(0.0, f64::max),
        max_sneak_current: records.iter().map(|r| r.max_sneak_current).fold(0.0, f64::max),
        phases: records,
    })
}

fn execute_phase(
    array: &mut CrossbarArray,
    phase: &Phase,
    policy: &WritePolicy,
    index: usize,
) -> Result<Option<PhaseRecord>> {
    let params = array.params;
    let mut active = Vec::new();
    for p in &phase.pulses {
        let k = array.index(p.row, p.col);
        let q = array.cells[k].q;
        if q == p.target_q {
            continue;
        }
        let voltage = if p.target_q > q {
            policy.pulse_voltage
        } else {
            -policy.pulse_voltage
        };
        let width = match pulse_width_for_target(q, p.target_q, &params, voltage) {
            Ok(w) => w.min(policy.pulse_dt),
            // boundary targets saturate for the full window
            Err(Error::UnreachableTarget { .. }) => policy.pulse_dt,
            Err(e) => return Err(e),
        };
        if width > 0.0 {
            active.push(ActivePulse { index: k, voltage, width });
        }
    }
    if active.is_empty() {
        return Ok(None);
    }

    let mut cuts: Vec<f64> = active.iter().map(|a| a.width).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let duration = *cuts.last().unwrap();

    let n_cells = array.cells.len();
    let mut is_target = vec![false; n_cells];
    for a in &active {
        is_target[a.index] = true;
    }

    // piecewise-constant programming voltage per cell, adjacent equal
    // voltages merged so an isolated pulse integrates in one call
    // (voltage, start, end); durations are taken as end - start so a pulse
    // that stays on from 0 to its cut integrates over exactly its width
    let mut segments: Vec<Vec<(f64, f64, f64)>> = vec![Vec::new(); n_cells];
    let mut max_sneak: f64 = 0.0;
    let mut start = 0.0;
    for &end in &cuts {
        let live: Vec<&ActivePulse> = active.iter().filter(|a| a.width >= end).collect();
        let bias = phase_bias(array, &live, policy)?;
        let sol = crossbar::solve(array, &bias)?;
        for (k, segs) in segments.iter_mut().enumerate() {
            let v = sol.cell_voltages[k];
            match segs.last_mut() {
                Some(last) if last.0 == v => last.2 = end,
                _ => segs.push((v, start, end)),
            }
            if !is_target[k] {
                max_sneak = max_sneak.max(fabs(sol.cell_currents[k]));
            }
        }
        start = end;
    }

    let before: Vec<DeviceState> = array.cells.clone();
    for (k, segs) in segments.iter().enumerate() {
        let mut state = before[k];
        for &(v, from, to) in segs {
            state = device::program_step(state, &params, v, to - from)?;
        }
        state.t = before[k].t + duration;
        array.cells[k] = state;
    }

    let cols = array.cols();
    let mut cells = Vec::new();
    let (mut l1, mut max_abs) = (0.0, 0.0f64);
    for k in 0..n_cells {
        if is_target[k] {
            continue;
        }
        let dq = array.cells[k].q - before[k].q;
        l1 += fabs(dq);
        max_abs = max_abs.max(fabs(dq));
        cells.push(CellDisturbance {
            row: k / cols,
            col: k % cols,
            dq,
            g: device::conductance(&array.cells[k], &params),
        });
    }

    Ok(Some(PhaseRecord {
        index,
        duration,
        targets: active.iter().map(|a| (a.index / cols, a.index % cols)).collect(),
        disturbance_l1: l1,
        disturbance_max: max_abs,
        max_sneak_current: max_sneak,
        cells,
    }))
}

/// Line potentials for the pulses live in one slice of a phase.
fn phase_bias(array: &CrossbarArray, live: &[&ActivePulse], policy: &WritePolicy) -> Result<BiasConfig> {
    let cols = array.cols();
    let mut bias = BiasConfig::new();
    match array.topology.kind {
        TopologyKind::ProposedIsolatedLoop => {
            for a in live {
                let (i, j) = (a.index / cols, a.index % cols);
                bias.drive(LineId::ControlPlus(i, j), a.voltage)?;
                bias.drive(LineId::ControlMinus(i, j), 0.0)?;
            }
        }
        TopologyKind::ConventionalSharedRail if policy.kind == PolicyKind::HalfSelectV2 => {
            let a = live[0];
            let (si, sj) = (a.index / cols, a.index % cols);
            for i in 0..array.rows() {
                bias.drive(LineId::Row(i), if i == si { a.voltage } else { a.voltage / 2.0 })?;
            }
            for j in 0..cols {
                bias.drive(LineId::Col(j), if j == sj { 0.0 } else { a.voltage / 2.0 })?;
            }
        }
        TopologyKind::ConventionalSharedRail => {
            // selected row at 0 V, each live column at -V so mixed polarities
            // can share a row
            let row = live[0].index / cols;
            bias.drive(LineId::Row(row), 0.0)?;
            let mut driven_cols = vec![false; cols];
            for a in live {
                let j = a.index % cols;
                bias.drive(LineId::Col(j), -a.voltage)?;
                driven_cols[j] = true;
            }
            if policy.unselected == UnselectedLines::Grounded {
                for i in (0..array.rows()).filter(|&i| i != row) {
                    bias.drive(LineId::Row(i), 0.0)?;
                }
                for j in (0..cols).filter(|&j| !driven_cols[j]) {
                    bias.drive(LineId::Col(j), 0.0)?;
                }
            }
        }
    }
    Ok(bias)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crossbar::Topology;

    fn params() -> DeviceParams {
        DeviceParams::paper_calibrated()
    }

    fn array(kind: TopologyKind, m: usize, n: usize) -> CrossbarArray {
        CrossbarArray::new(Topology::new(kind, m, n).unwrap(), params()).unwrap()
    }

    fn mid_targets(m: usize, n: usize) -> Targets {
        let p = params();
        let g: Vec<f64> = (0..m * n)
            .map(|k| {
                let f = 0.1 + 0.8 * (k as f64 + 0.5) / (m * n) as f64;
                p.min_conductance() + f * (p.max_conductance() - p.min_conductance())
            })
            .collect();
        Targets::full(m, n, g).unwrap()
    }

    #[test]
    fn phase_counts_four_by_four() {
        let t = mid_targets(4, 4);
        let counts: Vec<usize> = PolicyKind::ALL
            .iter()
            .map(|&k| plan_writes(&t, &params(), &WritePolicy::new(k)).unwrap().phase_count())
            .collect();
        assert_eq!(counts, vec![16, 4, 1, 16]);
    }

    #[test]
    fn degenerate_array_single_phase() {
        let t = mid_targets(1, 1);
        for k in PolicyKind::ALL {
            assert_eq!(plan_writes(&t, &params(), &WritePolicy::new(k)).unwrap().phase_count(), 1);
        }
    }

    #[test]
    fn plan_rejects_out_of_range_targets() {
        let p = params();
        let mut g = vec![p.min_conductance(); 4];
        g[1] = p.max_conductance() * 1.01;
        g[2] = p.min_conductance() * 0.5;
        let t = Targets::full(2, 2, g).unwrap();
        assert_eq!(
            plan_writes(&t, &p, &WritePolicy::new(PolicyKind::FullParallel)),
            Err(Error::UnreachableTarget {
                cells: vec![(0, 1), (1, 0)]
            })
        );
    }

    #[test]
    fn pulse_width_zero_and_e_folding() {
        let p = params();
        assert_eq!(pulse_width_for_target(3e-5, 3e-5, &p, 3.6).unwrap(), 0.0);
        let q_max = p.q_max();
        let target = q_max * (1.0 - libm::exp(-1.0));
        let w = pulse_width_for_target(0.0, target, &p, 3.6).unwrap();
        let tau = q_max / device::programming_current(&p, 3.6);
        assert!(fabs(w - tau) / tau < 1e-12);
    }

    #[test]
    fn pulse_width_errors() {
        let p = params();
        let q_max = p.q_max();
        assert!(matches!(
            pulse_width_for_target(0.5 * q_max, 0.2 * q_max, &p, 3.6),
            Err(Error::WrongPolarity { .. })
        ));
        assert!(matches!(
            pulse_width_for_target(0.2 * q_max, 0.5 * q_max, &p, -3.6),
            Err(Error::WrongPolarity { .. })
        ));
        assert!(matches!(
            pulse_width_for_target(0.0, 1.5 * q_max, &p, 3.6),
            Err(Error::TargetOutOfRange { .. })
        ));
        assert!(matches!(
            pulse_width_for_target(0.0, -1e-9, &p, -3.6),
            Err(Error::TargetOutOfRange { .. })
        ));
        assert!(matches!(
            pulse_width_for_target(0.0, q_max, &p, 3.6),
            Err(Error::UnreachableTarget { .. })
        ));
    }

    #[test]
    fn reverse_pulse_width_round_trip() {
        let p = params();
        let q_max = p.q_max();
        let w = pulse_width_for_target(0.8 * q_max, 0.3 * q_max, &p, -3.6).unwrap();
        assert!(w > 0.0);
        let s = device::program_step(DeviceState::with_charge(0.8 * q_max), &p, -3.6, w).unwrap();
        assert!(fabs(s.q - 0.3 * q_max) < 1e-6 * q_max);
    }

    #[test]
    fn full_parallel_on_conventional_is_rejected() {
        let mut a = array(TopologyKind::ConventionalSharedRail, 2, 2);
        let pol = WritePolicy::new(PolicyKind::FullParallel);
        let plan = plan_writes(&mid_targets(2, 2), &params(), &pol).unwrap();
        assert_eq!(
            execute_plan(&mut a, &plan, &pol).err(),
            Some(Error::PolicyTopologyMismatch {
                policy: PolicyKind::FullParallel,
                topology: TopologyKind::ConventionalSharedRail
            })
        );
        let mut b = array(TopologyKind::ProposedIsolatedLoop, 2, 2);
        let hs = WritePolicy::new(PolicyKind::HalfSelectV2);
        let plan = plan_writes(&mid_targets(2, 2), &params(), &hs).unwrap();
        assert!(matches!(
            execute_plan(&mut b, &plan, &hs),
            Err(Error::PolicyTopologyMismatch { .. })
        ));
    }

    #[test]
    fn plan_must_match_array() {
        let mut a = array(TopologyKind::ProposedIsolatedLoop, 3, 3);
        let pol = WritePolicy::new(PolicyKind::FullParallel);
        let plan = plan_writes(&mid_targets(2, 2), &params(), &pol).unwrap();
        assert!(matches!(execute_plan(&mut a, &plan, &pol), Err(Error::PlanMismatch(_))));
        let other = WritePolicy::new(PolicyKind::RowParallel);
        let plan = plan_writes(&mid_targets(3, 3), &params(), &other).unwrap();
        assert!(matches!(execute_plan(&mut a, &plan, &pol), Err(Error::PlanMismatch(_))));
    }

    #[test]
    fn full_parallel_proposed_hits_targets_without_disturbance() {
        let mut a = array(TopologyKind::ProposedIsolatedLoop, 4, 4);
        let pol = WritePolicy::new(PolicyKind::FullParallel);
        let t = mid_targets(4, 4);
        let plan = plan_writes(&t, &params(), &pol).unwrap();
        let report = execute_plan(&mut a, &plan, &pol).unwrap();
        assert_eq!(report.phase_count, 1);
        assert!(report.target_error <= 0.01, "{}", report.target_error);
        assert_eq!(report.disturbance_l1, 0.0);
    }

    #[test]
    fn empty_delta_runs_no_phases() {
        let mut a = array(TopologyKind::ProposedIsolatedLoop, 2, 2);
        let g = a.conductances();
        let pol = WritePolicy::new(PolicyKind::SequentialCellwise);
        let plan = plan_writes(&Targets::full(2, 2, g).unwrap(), &params(), &pol).unwrap();
        let before = a.clone();
        let report = execute_plan(&mut a, &plan, &pol).unwrap();
        assert_eq!(report.phase_count, 0);
        assert_eq!(report.total_pulse_time, 0.0);
        assert_eq!(a, before);
    }

    #[test]
    fn sequential_and_parallel_agree_on_proposed() {
        let t = mid_targets(3, 3);
        let mut seq = array(TopologyKind::ProposedIsolatedLoop, 3, 3);
        let mut par = seq.clone();
        let ps = WritePolicy::new(PolicyKind::SequentialCellwise);
        let pp = WritePolicy::new(PolicyKind::FullParallel);
        execute_plan(&mut seq, &plan_writes(&t, &params(), &ps).unwrap(), &ps).unwrap();
        execute_plan(&mut par, &plan_writes(&t, &params(), &pp).unwrap(), &pp).unwrap();
        assert_eq!(seq.charges(), par.charges());
    }

    #[test]
    fn conventional_sequential_disturbs() {
        let mut a = array(TopologyKind::ConventionalSharedRail, 2, 2);
        let pol = WritePolicy::new(PolicyKind::SequentialCellwise);
        let report = execute_plan(&mut a, &plan_writes(&mid_targets(2, 2), &params(), &pol).unwrap(), &pol).unwrap();
        assert_eq!(report.phase_count, 4);
        assert!(report.disturbance_l1 > 0.0);
        assert!(report.max_sneak_current > 0.0);
    }

    #[test]
    fn half_select_threshold_regimes() {
        let t = mid_targets(2, 2);
        let pol = WritePolicy::new(PolicyKind::HalfSelectV2);

        let mut a = array(TopologyKind::ConventionalSharedRail, 2, 2);
        let r0 = execute_plan(&mut a, &plan_writes(&t, &params(), &pol).unwrap(), &pol).unwrap();
        assert!(r0.disturbance_l1 > 0.0);

        let mut p = params();
        p.write_threshold = 0.6 * pol.pulse_voltage;
        let mut b = CrossbarArray::new(a.topology, p).unwrap();
        let r1 = execute_plan(&mut b, &plan_writes(&t, &p, &pol).unwrap(), &pol).unwrap();
        assert_eq!(r1.disturbance_l1, 0.0);
        assert!(r1.target_error < 1e-6);
    }

    #[test]
    fn grounded_unselected_lines_disturb_selected_column() {
        let mut a = array(TopologyKind::ConventionalSharedRail, 2, 2);
        let mut pol = WritePolicy::new(PolicyKind::SequentialCellwise);
        pol.unselected = UnselectedLines::Grounded;
        let g = params().min_conductance() + 0.5 * (params().max_conductance() - params().min_conductance());
        let t = Targets::partial(2, 2, vec![Some(g), None, None, None]).unwrap();
        let report = execute_plan(&mut a, &plan_writes(&t, &params(), &pol).unwrap(), &pol).unwrap();
        // cell (1,0) shares the driven column and sees the full pulse
        assert!(fabs(a.cell(1, 0).q - a.cell(0, 0).q) < 1e-12);
        assert_eq!(a.cell(0, 1).q, 0.0);
        assert!(report.disturbance_max > 0.0);
    }

    #[test]
    fn pulse_window_caps_width() {
        let mut a = array(TopologyKind::ProposedIsolatedLoop, 1, 1);
        let mut pol = WritePolicy::new(PolicyKind::FullParallel);
        pol.pulse_dt = 5.0;
        let t = Targets::full(1, 1, vec![params().max_conductance()]).unwrap();
        let report = execute_plan(&mut a, &plan_writes(&t, &params(), &pol).unwrap(), &pol).unwrap();
        assert_eq!(report.total_pulse_time, 5.0);
        assert!(report.target_error > 0.0);
    }

    #[test]
    fn threshold_above_pulse_is_rejected() {
        let mut p = params();
        p.write_threshold = 4.0;
        let mut a = CrossbarArray::new(Topology::new(TopologyKind::ProposedIsolatedLoop, 1, 1).unwrap(), p).unwrap();
        let pol = WritePolicy::new(PolicyKind::FullParallel);
        let plan = plan_writes(&mid_targets(1, 1), &p, &pol).unwrap();
        assert!(matches!(
            execute_plan(&mut a, &plan, &pol),
            Err(Error::PulseBelowThreshold { .. })
        ));
    }
}
