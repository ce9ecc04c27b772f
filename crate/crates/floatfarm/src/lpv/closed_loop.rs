use super::ClosedLoopDynamics;
use crate::control::{control_law, feedback_vector, sigmoid_weight, ControllerConfig, Integrators};
use crate::error::{FarmError, Result};
use crate::plant::{dof, generator_power, Drivetrain, Turbine, TurbineState, WindVector};

/// Closed-loop state retained by the LPV models. Sway, heave, roll, yaw and
/// the torsional modes are dropped: at zero crosswind they enter the power
/// and rotor-speed outputs only at second order.
pub const CL_STATE_NAMES: [&str; 8] = [
    "surge",
    "pitch",
    "surge_rate",
    "pitch_rate",
    "omega_r",
    "int_torque",
    "int_pitch",
    "wind_filtered",
];

const MAP: [usize; 5] = [dof::SURGE, dof::PITCH, dof::SURGE_RATE, dof::PITCH_RATE, dof::OMEGA_R];
pub const IDX_OMEGA: usize = 4;
pub const IDX_INT_TORQUE: usize = 5;
pub const IDX_INT_PITCH: usize = 6;
pub const IDX_WIND: usize = 7;
pub const N_CL: usize = 8;
const N: usize = N_CL;

/// Stiff-drivetrain turbine under the continuous blended controller.
/// Inputs `psi = [omega_c, u_x, u_y, u_z]`, outputs `[P_gen (W), omega_r]`.
///
/// Both integrators follow `e` without the anti-windup switches; at a trim
/// `e = 0`, so the switches only matter away from the linearization point.
#[derive(Debug, Clone)]
pub struct TurbineClosedLoop {
    pub turbine: Turbine,
    pub ctrl: ControllerConfig,
}

impl TurbineClosedLoop {
    pub fn new(turbine: Turbine, ctrl: ControllerConfig) -> Self {
        Self {
            turbine: turbine.with_drivetrain(Drivetrain::Stiff),
            ctrl,
        }
    }

    pub fn to_plant_state(&self, x: &[f64]) -> TurbineState {
        let mut s = TurbineState::default();
        for (k, &i) in MAP.iter().enumerate() {
            s.0[i] = x[k];
        }
        s.0[dof::OMEGA_G] = self.turbine.params.gear_ratio * x[IDX_OMEGA];
        s
    }

    /// Closed-loop state from a plant state and controller memory.
    pub fn from_plant_state(x: &TurbineState, int_e: Integrators, wind_filtered: f64) -> [f64; N] {
        let mut out = [0.0; N];
        for (k, &i) in MAP.iter().enumerate() {
            out[k] = x.0[i];
        }
        out[IDX_INT_TORQUE] = int_e.torque;
        out[IDX_INT_PITCH] = int_e.pitch;
        out[IDX_WIND] = wind_filtered;
        out
    }

    fn integrators(x: &[f64]) -> Integrators {
        Integrators::new(x[IDX_INT_TORQUE], x[IDX_INT_PITCH])
    }

    fn eval(&self, x: &[f64], psi: &[f64]) -> Result<(Vec<f64>, f64)> {
        if x.len() != N {
            return Err(FarmError::Dimension { expected: N, got: x.len() });
        }
        if psi.len() != 4 {
            return Err(FarmError::Dimension { expected: 4, got: psi.len() });
        }
        let s = self.to_plant_state(x);
        let wind = WindVector::new(psi[1], psi[2], psi[3]);
        let law = control_law(psi[0], &s, Self::integrators(x), x[IDX_WIND], &self.ctrl)?;
        let d = self.turbine.rhs(&s, &law.input, &wind);
        let rel = self.turbine.hub_relative_wind(&s, &wind).magnitude();
        let mut out: Vec<f64> = MAP.iter().map(|&i| d[i]).collect();
        out.push(law.error);
        out.push(law.error);
        out.push((rel - x[IDX_WIND]) / self.ctrl.wind_filter_tau);
        Ok((out, law.input.torque))
    }

    /// Pitch integrator that puts the commanded pitch at `beta` for the
    /// platform offset in `x` and zero speed error.
    fn pitch_integral_for(&self, x: &[f64], beta: f64) -> f64 {
        let (k_i, k_x) = self.ctrl.schedule.gains_at(x[IDX_WIND]);
        let chi = feedback_vector(&self.ctrl.schedule, &self.to_plant_state(x), 0.0);
        let fb: f64 = k_x.iter().zip(&chi).map(|(k, c)| k * c).sum();
        -(beta + fb) / k_i
    }

    /// Starting point for the trim search.
    ///
    /// The platform sits at its static offset. One integrator is parked where
    /// the truth controller would hold it (pitch just below its lower stop in
    /// Region 2, torque above its upper clamp in Region 3) and the other is solved
    /// by bisection on the rotor torque balance. If that channel cannot
    /// balance, the roles swap.
    pub fn trim_guess(&self, omega_c: f64, wind: f64) -> Vec<f64> {
        let p = &self.turbine.params;
        let pp = &p.platform;
        let w = WindVector::streamwise(wind);
        let settle = |x: &mut Vec<f64>| {
            for _ in 0..3 {
                let s = self.to_plant_state(x);
                let Ok(law) = control_law(omega_c, &s, Self::integrators(x), wind, &self.ctrl) else {
                    break;
                };
                let thrust = self.turbine.aero_loads(&s, law.input.pitch, &w).thrust;
                x[0] = thrust / pp.stiffness[dof::SURGE];
                x[1] = thrust * p.hub_height / pp.stiffness[dof::PITCH];
            }
        };
        let parked_torque = self.ctrl.torque_integral_for(1.05 * self.ctrl.region2.max_torque);
        let base = |int_t: f64, int_p: f64| {
            let mut x = vec![0.0, 0.0, 0.0, 0.0, omega_c, int_t, int_p, wind];
            settle(&mut x);
            x
        };
        let park_pitch = |x: &mut Vec<f64>| {
            x[IDX_INT_PITCH] = self.pitch_integral_for(x, -0.01);
        };
        let by_torque = |v: f64| {
            let mut x = base(v, 0.0);
            park_pitch(&mut x);
            settle(&mut x);
            park_pitch(&mut x);
            x
        };
        let by_pitch = |v: f64| base(parked_torque, v);
        let balance = |x: &[f64]| self.eval(x, &[omega_c, wind, 0.0, 0.0]).map(|(d, _)| d[IDX_OMEGA]).unwrap_or(f64::NAN);
        // scans down from `hi` so the pitch channel lands on the feathering
        // branch rather than the stall side
        let solve = |make: &dyn Fn(f64) -> Vec<f64>, lo_end: f64, hi_end: f64| -> Option<Vec<f64>> {
            let n = 64;
            let step = (hi_end - lo_end) / n as f64;
            let mut hi = hi_end;
            let fhi = balance(&make(hi));
            let mut lo = hi;
            let mut flo = fhi;
            for _ in 0..n {
                lo = hi - step;
                flo = balance(&make(lo));
                if flo * fhi < 0.0 {
                    break;
                }
                hi = lo;
            }
            if !(flo * fhi < 0.0) {
                return None;
            }
            let rising = fhi > flo;
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if (balance(&make(mid)) > 0.0) == rising {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            Some(make(0.5 * (lo + hi)))
        };
        let t_hi = self.ctrl.torque_integral_for(1.2 * self.ctrl.region2.max_torque);
        let torque_first = sigmoid_weight(wind, &self.ctrl.blend) < 0.5;
        let attempts: [(&dyn Fn(f64) -> Vec<f64>, f64, f64); 2] = if torque_first {
            [(&by_torque, -0.1 * t_hi, t_hi), (&by_pitch, -50.0, 200.0)]
        } else {
            [(&by_pitch, -50.0, 200.0), (&by_torque, -0.1 * t_hi, t_hi)]
        };
        attempts
            .iter()
            .find_map(|(make, lo, hi)| solve(*make, *lo, *hi))
            .unwrap_or_else(|| by_torque(self.ctrl.torque_integral_for(self.ctrl.rated_torque)))
    }
}

impl ClosedLoopDynamics for TurbineClosedLoop {
    fn n_states(&self) -> usize {
        N
    }

    fn n_inputs(&self) -> usize {
        4
    }

    fn n_outputs(&self) -> usize {
        2
    }

    fn rhs(&self, x: &[f64], psi: &[f64]) -> Result<Vec<f64>> {
        Ok(self.eval(x, psi)?.0)
    }

    fn output(&self, x: &[f64], psi: &[f64]) -> Result<Vec<f64>> {
        let (_, torque) = self.eval(x, psi)?;
        Ok(vec![generator_power(x[IDX_OMEGA], torque, &self.turbine.params), x[IDX_OMEGA]])
    }

    fn state_scale(&self) -> Vec<f64> {
        vec![1.0, 0.01, 0.1, 0.01, 0.1, 0.1, 1.0, 1.0]
    }
}
