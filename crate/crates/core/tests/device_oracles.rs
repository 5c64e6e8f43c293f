//! Device laws checked against oracles built only from the raw parameters.

use quadmem_core::device::{self, DerivedModel, DeviceParams, DeviceState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Programming current recomputed from the raw parameters.
fn oracle_current(p: &DeviceParams, v: f64) -> f64 {
    let a = p.geometry.l_x * p.geometry.l_z;
    p.constants.e * p.material.c0 * p.material.mu_ion * v / p.geometry.d * a
}

fn oracle_k(p: &DeviceParams, v: f64, i_r: f64) -> f64 {
    p.geometry.l_x * p.geometry.l_y * i_r / (p.material.mu_e * oracle_current(p, v))
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let m = 0.5 * (a + b);
    (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b))
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let left = simpson(f, a, m);
    let right = simpson(f, m, b);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    adaptive_simpson(f, a, m, left, 0.5 * tol, depth - 1) + adaptive_simpson(f, m, b, right, 0.5 * tol, depth - 1)
}

fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    adaptive_simpson(f, a, b, simpson(f, a, b), tol, 60)
}

#[test]
fn derived_constants_match_raw_parameters() {
    let p = DeviceParams::paper_calibrated();
    let v = 3.6;
    let i_r = 0.2 / 550e3;
    let m = DerivedModel::new(&p, v, i_r).unwrap();
    assert!(rel(m.programming_current, oracle_current(&p, v)) < 1e-14);
    assert!(rel(m.k, oracle_k(&p, v, i_r)) < 1e-14);
    assert!(rel(p.q_max() / oracle_current(&p, v), 60.0) < 1e-12);
}

#[test]
fn flux_matches_quadrature_of_voltage() {
    let p = DeviceParams::paper_calibrated();
    let v = 3.6;
    let i_r = 1e-7;
    let model = DerivedModel::new(&p, v, i_r).unwrap();
    let i_p = oracle_current(&p, v);
    let k = oracle_k(&p, v, i_r);
    // along q = I_p t the memristor voltage is M(q) dq/dt = K / (I_p t) * I_p
    let voltage = |t: f64| k / (i_p * t) * i_p;

    let mut rng = ChaCha8Rng::seed_from_u64(0xF1);
    for _ in 0..100 {
        let q1 = 10f64.powf(rng.gen_range(-8.0..-5.0));
        let q2 = 10f64.powf(rng.gen_range(-8.0..-5.0));
        let (t1, t2) = (q1 / i_p, q2 / i_p);
        let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
        let mut phi = integrate(&voltage, lo, hi, 1e-14 * k);
        if t1 > t2 {
            phi = -phi;
        }
        let got = device::flux(q1, q2, &model).unwrap();
        if phi.abs() > 1e-12 * k {
            assert!(rel(got, phi) < 1e-6, "q1={q1} q2={q2} got={got} oracle={phi}");
        }
    }
}

#[test]
fn memristance_rate_matches_central_differences() {
    let p = DeviceParams::paper_calibrated();
    let model = DerivedModel::new(&p, 3.6, 1e-7).unwrap();
    for i in 0..=60 {
        let t = 10f64.powf(-3.0 + i as f64 * 0.1);
        let h = 1e-4 * t;
        let fd = (model.memristance_at_time(t + h) - model.memristance_at_time(t - h)) / (2.0 * h);
        let exact = model.memristance_rate(t);
        assert!(rel(fd, exact) < 1e-6, "t={t}");
        // M(t) is K/q along q = I_p t
        let q = model.programming_current * t;
        let m_q = device::memristance(q, &model).unwrap();
        assert!(rel(model.memristance_at_time(t), m_q) < 1e-13);
    }
}

#[test]
fn integrator_matches_closed_form_solution() {
    let p = DeviceParams::paper_calibrated();
    let q_max = p.q_max();
    let tau = q_max / oracle_current(&p, 3.6);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let q0 = rng.gen_range(0.0..q_max);
        let t = rng.gen_range(0.1..300.0);
        let fwd = device::program_step(DeviceState::with_charge(q0), &p, 3.6, t).unwrap();
        let fwd_exact = q_max - (q_max - q0) * (-t / tau).exp();
        assert!((fwd.q - fwd_exact).abs() < 1e-6 * q_max);
        let rev = device::program_step(DeviceState::with_charge(q0), &p, -3.6, t).unwrap();
        let rev_exact = q0 * (-t / tau).exp();
        assert!((rev.q - rev_exact).abs() < 1e-6 * q_max);
        assert!((device::programmed_charge(q0, &p, 3.6, t) - fwd_exact).abs() < 1e-15);
    }
}

#[test]
fn closed_form_matches_integral_of_rate() {
    // t(q) = integral dq / (I_p (1 - q/q_max)); compare against the closed
    // form's inverse at a few charges
    let p = DeviceParams::paper_calibrated();
    let q_max = p.q_max();
    let i_p = oracle_current(&p, 3.6);
    for frac in [0.01, 0.1, 0.5, 0.9, 0.99] {
        let q = frac * q_max;
        let rate_inv = |x: f64| 1.0 / (i_p * (1.0 - x / q_max));
        let t = integrate(&rate_inv, 0.0, q, 1e-12);
        let q_back = device::programmed_charge(0.0, &p, 3.6, t);
        assert!(rel(q_back, q) < 1e-9, "frac={frac}");
    }
}

#[test]
fn calibrated_anchors() {
    let p = DeviceParams::paper_calibrated();
    let hrs = device::resistance(&DeviceState::pristine(), &p);
    let lrs = device::resistance(&DeviceState::with_charge(p.q_max()), &p);
    assert!(rel(hrs, 1e6) < 1e-12);
    assert!(rel(lrs, 550e3) < 1e-12);
    let r = DeviceParams::paper_calibrated_retention();
    let left = (-48.0 * 3600.0 / r.material.tau_retention).exp();
    assert!(rel(left, 0.05) < 1e-12);
}
