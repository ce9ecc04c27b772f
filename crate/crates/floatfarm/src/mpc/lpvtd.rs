use std::sync::Arc;

use super::Predictor;
use crate::error::{FarmError, Result};
use crate::farm::ColumnSim;
use crate::lpv::closed_loop::{IDX_OMEGA, N_CL};
use crate::lpv::{DiscreteLpvGrid, TurbineClosedLoop};
use crate::plant::{Turbine, WindVector};
use crate::wake::{DelayNetwork, WakeParams};

#[derive(Debug, Clone)]
struct DelayColumn {
    net: DelayNetwork,
    front: WindVector,
    first: usize,
    ct: Vec<f64>,
}

/// Scheduled LPV turbines coupled through delay-line wakes.
///
/// At construction each line is put at steady state for the measured
/// thrust, and a per-turbine offset absorbs the difference between the
/// delay-line inflow and the measured inflow. The offset and each turbine's
/// blade pitch (which sets its thrust coefficient) are then held over the
/// prediction.
#[derive(Debug, Clone)]
pub struct LpvtdPredictor {
    grid: Arc<DiscreteLpvGrid>,
    turbine: Arc<Turbine>,
    columns: Vec<DelayColumn>,
    chi: Vec<f64>,
    pitch: Vec<f64>,
    scratch: Vec<f64>,
}

impl LpvtdPredictor {
    pub fn from_measurement(truth: &[ColumnSim], fronts: &[WindVector], grid: Arc<DiscreteLpvGrid>, wake: &WakeParams) -> Result<Self> {
        if truth.len() != fronts.len() {
            return Err(FarmError::Dimension {
                expected: truth.len(),
                got: fronts.len(),
            });
        }
        if grid.n_states != N_CL || grid.n_inputs != 4 || grid.n_outputs != 2 {
            return Err(FarmError::Dimension {
                expected: N_CL,
                got: grid.n_states,
            });
        }
        let Some(first) = truth.first() else {
            return Err(FarmError::Config("farm has no columns".into()));
        };
        let turbine = first.turbine.clone();
        let mut columns = Vec::with_capacity(truth.len());
        let mut chi = Vec::new();
        let mut pitch = Vec::new();
        let mut at = 0;
        for (col, front) in truth.iter().zip(fronts) {
            let measured = col.inflow(front);
            let mut col_pitch = Vec::with_capacity(col.n_turbines());
            for (x, cs) in col.states.iter().zip(&col.ctrl_states) {
                chi.extend(TurbineClosedLoop::from_plant_state(x, cs.int_e, cs.wind_filtered));
                col_pitch.push(cs.last.pitch);
            }
            let ct: Vec<f64> = col
                .states
                .iter()
                .zip(&measured)
                .zip(&col_pitch)
                .map(|((x, &u), &b)| thrust_coefficient(&turbine, x.omega_r(), u, b))
                .collect();
            let mut net = DelayNetwork::new(&col.wake.stations, turbine.params.rotor_radius, wake)?;
            // second pass lets upstream offsets shape the downstream lines
            for _ in 0..2 {
                let steady = net.set_steady(front.u_x, &ct)?;
                for k in 0..net.n_turbines() {
                    net.offset[k] += measured[k] - steady[k];
                }
            }
            pitch.extend(col_pitch);
            columns.push(DelayColumn {
                net,
                front: *front,
                first: at,
                ct,
            });
            at += col.n_turbines();
        }
        Ok(Self {
            grid,
            turbine,
            columns,
            chi,
            pitch,
            scratch: Vec::new(),
        })
    }

    /// Per-turbine inflow from the delay lines (m/s).
    pub fn inflow(&self) -> Vec<f64> {
        self.columns.iter().flat_map(|c| c.net.inflow(c.front.u_x)).collect()
    }
}

fn thrust_coefficient(t: &Turbine, omega_r: f64, u: f64, pitch: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    t.aero.eval(t.params.rotor_radius * omega_r / u, pitch).ct
}

impl Predictor for LpvtdPredictor {
    fn n_turbines(&self) -> usize {
        self.pitch.len()
    }

    fn dt(&self) -> f64 {
        self.grid.dt
    }

    fn rotor_speeds(&self) -> Vec<f64> {
        self.chi.chunks(N_CL).map(|c| c[IDX_OMEGA]).collect()
    }

    fn step(&mut self, omega_c: &[f64]) -> Result<f64> {
        let n = self.n_turbines();
        if omega_c.len() != n {
            return Err(FarmError::Dimension { expected: n, got: omega_c.len() });
        }
        let dt = self.grid.dt;
        let mut total = 0.0;
        let mut y = [0.0; 2];
        for col in &mut self.columns {
            let u = col.net.inflow(col.front.u_x);
            for (k, &uk) in u.iter().enumerate() {
                let i = col.first + k;
                let chi = &mut self.chi[i * N_CL..(i + 1) * N_CL];
                let omega = chi[IDX_OMEGA];
                col.ct[k] = thrust_coefficient(&self.turbine, omega, uk, self.pitch[i]);
                let psi = [omega_c[i], uk, col.front.u_y, col.front.u_z];
                self.grid.step(chi, &psi, omega, uk, &mut y, &mut self.scratch);
                total += y[0];
            }
            col.net.step(col.front.u_x, &col.ct, dt)?;
        }
        if !total.is_finite() {
            return Err(FarmError::Diverged { dof: "LPV power" });
        }
        Ok(total)
    }
}
