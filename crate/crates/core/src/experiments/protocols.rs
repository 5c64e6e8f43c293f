//! Single-device measurement protocols.

use alloc::vec;
use alloc::vec::Vec;

use libm::{fabs, log10, pow};

use super::trace::{ExperimentTrace, Unit};
use crate::crossbar::{read_mac, CrossbarArray, ReadMode, Topology, TopologyKind};
use crate::device::{self, calibration, DeviceParams, DeviceState};
use crate::error::Result;
use crate::write::pulse_width_for_target;

/// Programming window per S1 cycle, second.
pub const S1_CYCLE: f64 = 30.0;
/// S1 stops once the resistance moves less than this fraction in one cycle.
pub const S1_SATURATION_TOL: f64 = 1e-3;
/// Hard stop for S1.
pub const S1_MAX_CYCLES: usize = 10_000;

/// S2 segment boundaries, second: program, hold, saturate, reverse.
pub const S2_PROGRAM_END: f64 = 60.0;
pub const S2_HOLD_END: f64 = 360.0;
pub const S2_SATURATE_END: f64 = 600.0;
pub const S2_REVERSE_END: f64 = 660.0;
/// S2 sampling interval, second.
pub const S2_SAMPLE: f64 = 1.0;

/// Log-spaced samples per decade in the retention run.
pub const RETENTION_SAMPLES_PER_DECADE: usize = 20;

/// Repeated 30 s programming pulses at 3.6 V with a resistance sample after
/// each, until the per-cycle change drops below 0.1 %.
pub fn run_s1_protocol(params: &DeviceParams) -> Result<ExperimentTrace> {
    params.validate()?;
    let v_p = calibration::PROGRAM_VOLTAGE;
    let mut state = DeviceState::pristine();

    let mut cycle = vec![0.0];
    let mut time = vec![0.0];
    let mut charge = vec![state.q];
    let mut res = vec![device::resistance(&state, params)];

    for n in 1..=S1_MAX_CYCLES {
        state = device::program_step(state, params, v_p, S1_CYCLE)?;
        let r = device::resistance(&state, params);
        let prev = *res.last().unwrap();
        cycle.push(n as f64);
        time.push(state.t);
        charge.push(state.q);
        res.push(r);
        if fabs(r - prev) / prev < S1_SATURATION_TOL {
            break;
        }
    }

    let mut trace = ExperimentTrace::new("s1");
    trace.push_column("cycle", Unit::Index, cycle)?;
    trace.push_column("t", Unit::Second, time)?;
    trace.push_column("q", Unit::Coulomb, charge)?;
    trace.push_column("R", Unit::Ohm, res)?;
    trace.meta_number("program_voltage_V", v_p);
    trace.meta_number("cycle_time_s", S1_CYCLE);
    trace.meta_number("saturation_tolerance", S1_SATURATION_TOL);
    trace.record_params(params);
    Ok(trace)
}

/// Program 60 s, hold at 0 V for 300 s, program to saturation in 60 s
/// steps up to t = 600 s, reverse-program 60 s. Sampled every second.
///
/// The hold segment relaxes with the parameter set's own time constant;
/// pass `tau_retention = 0` for a drift-free hold.
pub fn run_s2_protocol(params: &DeviceParams) -> Result<ExperimentTrace> {
    params.validate()?;
    let v = calibration::PROGRAM_VOLTAGE;
    let segments = [
        (1.0, S2_PROGRAM_END, v),
        (2.0, S2_HOLD_END, 0.0),
        (3.0, S2_SATURATE_END, v),
        (4.0, S2_REVERSE_END, -v),
    ];

    let mut state = DeviceState::pristine();
    let mut time = vec![0.0];
    let mut segment = vec![0.0];
    let mut volts = vec![0.0];
    let mut charge = vec![state.q];
    let mut res = vec![device::resistance(&state, params)];

    let mut k = 0u32;
    for &(id, end, v_p) in &segments {
        while (k as f64 + 1.0) * S2_SAMPLE <= end {
            k += 1;
            state = if v_p == 0.0 {
                device::relax_step(state, params, S2_SAMPLE)?
            } else {
                device::program_step(state, params, v_p, S2_SAMPLE)?
            };
            time.push(k as f64 * S2_SAMPLE);
            segment.push(id);
            volts.push(v_p);
            charge.push(state.q);
            res.push(device::resistance(&state, params));
        }
    }

    let mut trace = ExperimentTrace::new("s2");
    trace.push_column("t", Unit::Second, time)?;
    trace.push_column("segment", Unit::Index, segment)?;
    trace.push_column("Vp", Unit::Volt, volts)?;
    trace.push_column("q", Unit::Coulomb, charge)?;
    trace.push_column("R", Unit::Ohm, res)?;
    trace.meta_number("program_voltage_V", v);
    trace.meta_number("sample_interval_s", S2_SAMPLE);
    trace.record_params(params);
    Ok(trace)
}

/// Saturating program (ten time constants at 3.6 V), then 48 h at zero
/// bias sampled on a logarithmic grid. `t_s` counts from the end of
/// programming.
pub fn run_retention(params: &DeviceParams) -> Result<ExperimentTrace> {
    params.validate()?;
    let v = calibration::PROGRAM_VOLTAGE;
    let program_time = 10.0 * params.q_max() / device::programming_current(params, v);
    let mut state = device::program_step(DeviceState::pristine(), params, v, program_time)?;

    let window = calibration::RETENTION_WINDOW;
    let decades = log10(window);
    let n = (decades * RETENTION_SAMPLES_PER_DECADE as f64) as usize;
    let mut grid: Vec<f64> = vec![0.0];
    for i in 0..=n {
        grid.push(pow(10.0, i as f64 / RETENTION_SAMPLES_PER_DECADE as f64));
    }
    if *grid.last().unwrap() < window {
        grid.push(window);
    }

    let mut charge = vec![state.q];
    let mut res = vec![device::resistance(&state, params)];
    for w in grid.windows(2) {
        state = device::relax_step(state, params, w[1] - w[0])?;
        charge.push(state.q);
        res.push(device::resistance(&state, params));
    }

    let mut trace = ExperimentTrace::new("retention");
    trace.push_column("t", Unit::Second, grid)?;
    trace.push_column("q", Unit::Coulomb, charge)?;
    trace.push_column("R", Unit::Ohm, res)?;
    trace.meta_number("program_voltage_V", v);
    trace.meta_number("program_time_s", program_time);
    trace.meta_number("retention_window_s", window);
    trace.record_params(params);
    Ok(trace)
}

/// Fill fractions of the programmed levels in the I-V sweep.
pub const IV_LEVELS: [f64; 5] = [0.0, 0.2, 0.4, 0.6, 0.8];
/// Samples per quarter of each triangular sweep.
pub const IV_STEPS_PER_QUARTER: usize = 25;
/// Time between sweep samples, second.
pub const IV_SAMPLE: f64 = 0.01;

/// Triangular read-path sweeps `0 -> +A -> 0 -> -A -> 0` at several
/// programmed charge levels. Each level is read through a 1x1 array held by
/// shared reference, so the sweep cannot move charge.
pub fn run_iv_sweep(params: &DeviceParams, v_amplitude: f64, cycles: usize) -> Result<ExperimentTrace> {
    params.validate()?;
    let topo = Topology::new(TopologyKind::ProposedIsolatedLoop, 1, 1)?;
    let v_p = calibration::PROGRAM_VOLTAGE;
    let q_max = params.q_max();

    let mut cols: [Vec<f64>; 7] = Default::default();
    let mut k = 0usize;
    for (level, &fill) in IV_LEVELS.iter().enumerate() {
        let mut array = CrossbarArray::new(topo, *params)?;
        if fill > 0.0 {
            let width = pulse_width_for_target(0.0, fill * q_max, params, v_p)?;
            array.cells[0] = device::program_step(DeviceState::pristine(), params, v_p, width)?;
        }
        let view: &CrossbarArray = &array;
        let q = view.cells[0].q;
        for cycle in 0..cycles {
            for (v, branch) in triangle(v_amplitude) {
                let i = read_mac(view, &[v], ReadMode::FullNodal)?[0];
                cols[0].push(k as f64 * IV_SAMPLE);
                cols[1].push(level as f64);
                cols[2].push(q);
                cols[3].push(cycle as f64);
                cols[4].push(branch);
                cols[5].push(v);
                cols[6].push(i);
                k += 1;
            }
        }
    }

    let [t, level, q, cycle, branch, v, i] = cols;
    let mut trace = ExperimentTrace::new("iv");
    trace.push_column("t", Unit::Second, t)?;
    trace.push_column("level", Unit::Index, level)?;
    trace.push_column("q", Unit::Coulomb, q)?;
    trace.push_column("cycle", Unit::Index, cycle)?;
    trace.push_column("branch", Unit::Index, branch)?;
    trace.push_column("V", Unit::Volt, v)?;
    trace.push_column("I", Unit::Ampere, i)?;
    trace.meta_number("amplitude_V", v_amplitude);
    trace.meta_integer("cycles", cycles as u64);
    trace.record_params(params);
    Ok(trace)
}

/// One triangular period as `(voltage, branch)`; branch 0 while |V| rises,
/// 1 while it falls.
fn triangle(amplitude: f64) -> Vec<(f64, f64)> {
    let n = IV_STEPS_PER_QUARTER;
    let step = |k: usize| amplitude * k as f64 / n as f64;
    let mut out = Vec::with_capacity(4 * n);
    for k in 1..=n {
        out.push((step(k), 0.0));
    }
    for k in (0..n).rev() {
        out.push((step(k), 1.0));
    }
    for k in 1..=n {
        out.push((-step(k), 0.0));
    }
    for k in (0..n).rev() {
        out.push((-step(k), 1.0));
    }
    out
}
