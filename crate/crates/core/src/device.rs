//! Single-device physics of the ion-intercalation memristor.
//!
//! A programming voltage across the cathode/anode pair drifts ions into the
//! polymer buffer at a rate set by the electrolyte concentration and ionic
//! mobility. The intercalated charge `q` raises the buffer's electronic
//! conductivity linearly; the readout electrodes see that conductance on an
//! axis orthogonal to the programming field.
//!
//! Three extensions make the ideal law usable as a compact model:
//!
//! * site filling: injection slows as `1 - q/q_max`, extraction scales as `q/q_max`;
//! * a baseline conductance `g0` keeps the resistance finite at `q = 0`;
//! * an optional exponential relaxation of `q` with time constant `tau_retention`.

use libm::{ceil, exp, fabs, log};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Elementary charge, coulomb.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;

/// Sub-step bound for explicit integration: `|dq| <= MAX_FILL_STEP * q_max`.
pub const MAX_FILL_STEP: f64 = 1e-3;

/// Resistance anchors and programming conditions of the calibrated preset.
pub mod calibration {
    /// As-fabricated high-resistance state, ohm.
    pub const HRS_OHM: f64 = 1.0e6;
    /// Saturated low-resistance state, ohm.
    pub const LRS_OHM: f64 = 550.0e3;
    /// Programming voltage, volt.
    pub const PROGRAM_VOLTAGE: f64 = 3.6;
    /// Saturation time constant `q_max / I_p` at [`PROGRAM_VOLTAGE`], second.
    pub const SATURATION_TIME: f64 = 60.0;
    /// Window within which the relaxed device returns to HRS, second.
    pub const RETENTION_WINDOW: f64 = 48.0 * 3600.0;
    /// Remaining charge fraction at the end of [`RETENTION_WINDOW`].
    pub const RETENTION_RESIDUAL: f64 = 0.05;
    /// Default read voltage, volt.
    pub const READ_VOLTAGE: f64 = 0.2;

    /// Relaxation time constant leaving [`RETENTION_RESIDUAL`] of the charge
    /// after [`RETENTION_WINDOW`].
    pub fn retention_tau() -> f64 {
        RETENTION_WINDOW / libm::log(1.0 / RETENTION_RESIDUAL)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalConstants {
    /// Elementary charge, coulomb.
    pub e: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self { e: ELEMENTARY_CHARGE }
    }
}

/// Electrode geometry, all lengths in meter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceGeometry {
    /// Cathode-to-anode distance.
    pub d: f64,
    /// Spacing between the readout electrodes.
    pub l_x: f64,
    /// Polymer-layer thickness.
    pub l_y: f64,
    /// Readout-electrode height.
    pub l_z: f64,
}

impl DeviceGeometry {
    /// Cross-section `l_x * l_z` crossed by the programming current.
    pub fn area(&self) -> f64 {
        self.l_x * self.l_z
    }

    /// `l_x * l_y`, the geometric factor of the readout resistance.
    pub fn readout_factor(&self) -> f64 {
        self.l_x * self.l_y
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialParams {
    /// Ion concentration in the electrolyte, 1/m^3.
    pub c0: f64,
    /// Ionic mobility, m^2/(V s).
    pub mu_ion: f64,
    /// Effective electronic mobility in the doped polymer, m^2/(V s).
    pub mu_e: f64,
    /// Baseline polymer conductance, siemens.
    pub g0: f64,
    /// Intercalation-site capacity, coulomb.
    pub q_max: f64,
    /// Retention relaxation time constant, second. Zero disables relaxation.
    pub tau_retention: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceParams {
    pub constants: PhysicalConstants,
    pub geometry: DeviceGeometry,
    pub material: MaterialParams,
    /// Magnitude at or below which a write-path voltage moves no ions.
    /// Zero models the threshold-less worst case.
    #[serde(default)]
    pub write_threshold: f64,
}

impl DeviceParams {
    /// Preset anchored at HRS = 1 MOhm, LRS = 550 kOhm and a 60 s saturation
    /// time constant under 3.6 V. Geometry and concentration are fixed
    /// desk-scale values; `mu_e` and `mu_ion` are solved from the anchors.
    /// Relaxation is disabled.
    pub fn paper_calibrated() -> Self {
        use calibration::*;

        let constants = PhysicalConstants::default();
        let geometry = DeviceGeometry {
            d: 1.0e-3,
            l_x: 5.0e-3,
            l_y: 1.0e-4,
            l_z: 2.0e-3,
        };
        let c0 = 1.0e22;
        let q_max = 1.0e-4;
        let g0 = 1.0 / HRS_OHM;
        let mu_e = (1.0 / LRS_OHM - g0) * geometry.readout_factor() / q_max;
        let mu_ion = q_max * geometry.d
            / (SATURATION_TIME * constants.e * c0 * PROGRAM_VOLTAGE * geometry.area());

        Self {
            constants,
            geometry,
            material: MaterialParams {
                c0,
                mu_ion,
                mu_e,
                g0,
                q_max,
                tau_retention: 0.0,
            },
            write_threshold: 0.0,
        }
    }

    /// [`Self::paper_calibrated`] with the relaxation constant that returns the
    /// device to within 5 % of its initial charge after 48 h.
    pub fn paper_calibrated_retention() -> Self {
        let mut params = Self::paper_calibrated();
        params.material.tau_retention = calibration::retention_tau();
        params
    }

    pub fn q_max(&self) -> f64 {
        self.material.q_max
    }

    /// Checks every physical invariant.
    pub fn validate(&self) -> Result<()> {
        fn positive(name: &'static str, v: f64) -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name,
                    reason: "must be finite and > 0",
                })
            }
        }
        fn non_negative(name: &'static str, v: f64) -> Result<()> {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name,
                    reason: "must be finite and >= 0",
                })
            }
        }

        positive("constants.e", self.constants.e)?;
        positive("geometry.d", self.geometry.d)?;
        positive("geometry.l_x", self.geometry.l_x)?;
        positive("geometry.l_y", self.geometry.l_y)?;
        positive("geometry.l_z", self.geometry.l_z)?;
        positive("material.c0", self.material.c0)?;
        positive("material.mu_ion", self.material.mu_ion)?;
        positive("material.mu_e", self.material.mu_e)?;
        positive("material.q_max", self.material.q_max)?;
        non_negative("material.g0", self.material.g0)?;
        non_negative("material.tau_retention", self.material.tau_retention)?;
        non_negative("write_threshold", self.write_threshold)?;
        Ok(())
    }

    /// Linear ionic conductance of the programming path, `I_p / V_p`.
    pub fn ionic_conductance(&self) -> f64 {
        let m = &self.material;
        self.constants.e * m.c0 * m.mu_ion * self.geometry.area() / self.geometry.d
    }

    /// Electronic conductance contributed per coulomb of intercalated charge.
    pub fn conductance_per_charge(&self) -> f64 {
        self.material.mu_e / self.geometry.readout_factor()
    }

    /// Conductance at zero charge.
    pub fn min_conductance(&self) -> f64 {
        self.material.g0
    }

    /// Conductance at full site occupancy.
    pub fn max_conductance(&self) -> f64 {
        self.material.g0 + self.conductance_per_charge() * self.material.q_max
    }

    /// Inverse of [`conductance`]: the charge that yields `g`.
    pub fn charge_for_conductance(&self, g: f64) -> f64 {
        (g - self.material.g0) / self.conductance_per_charge()
    }
}

/// Intercalated charge and elapsed time of one cell.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceState {
    /// Intercalated charge, coulomb.
    pub q: f64,
    /// Elapsed simulation time, second.
    pub t: f64,
}

impl DeviceState {
    /// Pristine device at HRS.
    pub fn pristine() -> Self {
        Self { q: 0.0, t: 0.0 }
    }

    pub fn with_charge(q: f64) -> Self {
        Self { q, t: 0.0 }
    }

    /// Advances the clock without moving charge.
    pub fn hold(self, dt: f64) -> Self {
        Self {
            q: self.q,
            t: self.t + dt,
        }
    }
}

/// Ionic programming current `e c0 mu V_p / d * A`; sign follows `v_p`.
pub fn programming_current(params: &DeviceParams, v_p: f64) -> f64 {
    let m = &params.material;
    params.constants.e * m.c0 * m.mu_ion * (v_p / params.geometry.d) * params.geometry.area()
}

/// Charge rate under programming current `i_p`: site filling for injection,
/// occupancy-limited extraction.
fn charge_rate(q: f64, i_p: f64, q_max: f64) -> f64 {
    if i_p >= 0.0 {
        i_p * (1.0 - q / q_max)
    } else {
        i_p * (q / q_max)
    }
}

fn rk4<F: Fn(f64) -> f64>(q: f64, h: f64, f: &F) -> f64 {
    let k1 = f(q);
    let k2 = f(q + 0.5 * h * k1);
    let k3 = f(q + 0.5 * h * k2);
    let k4 = f(q + h * k3);
    q + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

fn substeps(dt: f64, max_rate: f64, q_max: f64) -> u64 {
    let n = ceil(dt * max_rate / (MAX_FILL_STEP * q_max));
    if n.is_finite() && n >= 1.0 {
        n as u64
    } else {
        1
    }
}

fn check_step(dt: f64) -> Result<()> {
    if dt > 0.0 && dt.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveStep { dt })
    }
}

/// Applies `v_p` across the programming terminals for `dt` seconds.
///
/// Integrates the saturating charge law with classic RK4, sub-stepping so no
/// sub-step moves more than [`MAX_FILL_STEP`] of `q_max`. Voltages whose
/// magnitude does not exceed `params.write_threshold` only advance the clock.
pub fn program_step(state: DeviceState, params: &DeviceParams, v_p: f64, dt: f64) -> Result<DeviceState> {
    check_step(dt)?;
    if v_p == 0.0 || fabs(v_p) <= params.write_threshold {
        return Ok(state.hold(dt));
    }
    let q_max = params.material.q_max;
    let i_p = programming_current(params, v_p);
    let n = substeps(dt, fabs(i_p), q_max);
    let h = dt / n as f64;
    let f = |q: f64| charge_rate(q, i_p, q_max);

    let mut q = state.q;
    for _ in 0..n {
        q = rk4(q, h, &f).clamp(0.0, q_max);
    }
    Ok(DeviceState { q, t: state.t + dt })
}

/// Zero-bias relaxation: `dq/dt = -q / tau_retention`, identity when the
/// time constant is zero.
pub fn relax_step(state: DeviceState, params: &DeviceParams, dt: f64) -> Result<DeviceState> {
    check_step(dt)?;
    let tau = params.material.tau_retention;
    if tau == 0.0 || state.q == 0.0 {
        return Ok(state.hold(dt));
    }
    let q_max = params.material.q_max;
    // |dq/dt| <= q/tau <= q_max/tau
    let n = substeps(dt, q_max / tau, q_max);
    let h = dt / n as f64;
    let f = |q: f64| -q / tau;

    let mut q = state.q;
    for _ in 0..n {
        q = rk4(q, h, &f).clamp(0.0, q_max);
    }
    Ok(DeviceState { q, t: state.t + dt })
}

/// `G(q) = g0 + mu_e q / (l_x l_y)`, siemens.
pub fn conductance(state: &DeviceState, params: &DeviceParams) -> f64 {
    params.material.g0 + params.conductance_per_charge() * state.q
}

/// `1 / G(q)`, ohm. Infinite when `g0 = 0` and the device is empty.
pub fn resistance(state: &DeviceState, params: &DeviceParams) -> f64 {
    1.0 / conductance(state, params)
}

/// Closed-form charge after programming from `q0` for `t` seconds; the exact
/// solution of the law integrated by [`program_step`].
pub fn programmed_charge(q0: f64, params: &DeviceParams, v_p: f64, t: f64) -> f64 {
    if v_p == 0.0 || fabs(v_p) <= params.write_threshold {
        return q0;
    }
    let q_max = params.material.q_max;
    let i_p = programming_current(params, v_p);
    if i_p > 0.0 {
        q_max - (q_max - q0) * exp(-i_p * t / q_max)
    } else {
        q0 * exp(i_p * t / q_max)
    }
}

/// Constants of the ideal flux/charge law for one programming and read current.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedModel {
    /// `l_x l_y I_r / (mu_e I_p)`, weber coulomb.
    pub k: f64,
    /// Integration offset of the flux, weber.
    pub c_prime: f64,
    /// Programming current, ampere.
    pub programming_current: f64,
    /// Constant read current, ampere.
    pub read_current: f64,
}

impl DerivedModel {
    /// Model for a constant read current `i_r` and programming voltage `v_p`;
    /// both currents must be positive. The flux offset is chosen so the time
    /// form `phi(t) = K ln t` has zero offset.
    pub fn new(params: &DeviceParams, v_p: f64, i_r: f64) -> Result<Self> {
        let i_p = programming_current(params, v_p);
        if !(i_p > 0.0 && i_p.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "programming_current",
                reason: "must be > 0",
            });
        }
        if !(i_r > 0.0 && i_r.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "read_current",
                reason: "must be > 0",
            });
        }
        let k = params.geometry.readout_factor() * i_r / (params.material.mu_e * i_p);
        Ok(Self {
            k,
            c_prime: -k * log(i_p),
            programming_current: i_p,
            read_current: i_r,
        })
    }

    /// `phi(q) = K ln q + C'`.
    pub fn flux_at(&self, q: f64) -> Result<f64> {
        positive_charge(q)?;
        Ok(self.k * log(q) + self.c_prime)
    }

    /// `M(t) = K / (I_p t)` along the linear charging trajectory.
    pub fn memristance_at_time(&self, t: f64) -> f64 {
        self.k / (self.programming_current * t)
    }

    /// `dM/dt = -K / (I_p t^2)`.
    pub fn memristance_rate(&self, t: f64) -> f64 {
        -self.k / (self.programming_current * t * t)
    }
}

fn positive_charge(q: f64) -> Result<()> {
    if q > 0.0 && q.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveCharge { q })
    }
}

/// Ideal memristance `M(q) = K / q`.
pub fn memristance(q: f64, model: &DerivedModel) -> Result<f64> {
    if q == 0.0 {
        return Err(Error::ZeroCharge);
    }
    positive_charge(q)?;
    Ok(model.k / q)
}

/// Flux displacement `phi(q2) - phi(q1) = K ln(q2 / q1)`.
pub fn flux(q1: f64, q2: f64, model: &DerivedModel) -> Result<f64> {
    positive_charge(q1)?;
    positive_charge(q2)?;
    Ok(model.k * log(q2 / q1))
}
