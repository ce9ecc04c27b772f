//! Turbine columns stepped as a unit: plant, inner-loop controller and the
//! PDE wake of the column. The truth simulation and the nonlinear predictor
//! both run on this, differing only in drivetrain model and step size.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::control::{blended_command, ControllerConfig, ControllerState, Integrators};
use crate::error::{FarmError, Result};
use crate::lpv::closed_loop::{IDX_INT_PITCH, IDX_INT_TORQUE, IDX_WIND};
use crate::lpv::TurbineClosedLoop;
use crate::plant::{dof, generator_power, Turbine, TurbineState, WindVector};
use crate::wake::{superpose_velocity, WakeColumn, WakeParams};

/// Rectangular farm aligned with the mean wind: `rows` turbines per column,
/// columns independent of each other.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FarmLayout {
    pub rows: usize,
    pub columns: usize,
    /// Streamwise spacing between rows (m).
    pub spacing: f64,
}

impl Default for FarmLayout {
    fn default() -> Self {
        Self {
            rows: 4,
            columns: 2,
            spacing: 882.0,
        }
    }
}

impl FarmLayout {
    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.columns == 0 {
            return Err(FarmError::Config("farm layout needs at least one row and one column".into()));
        }
        if !(self.spacing > 0.0) {
            return Err(FarmError::Config(format!("row spacing must be positive, got {}", self.spacing)));
        }
        Ok(())
    }

    pub fn n_turbines(&self) -> usize {
        self.rows * self.columns
    }

    /// Streamwise stations of one column (m), front row at zero.
    pub fn stations(&self) -> Vec<f64> {
        (0..self.rows).map(|r| r as f64 * self.spacing).collect()
    }

    /// Farm-wide index of a turbine; columns are contiguous.
    pub fn index(&self, column: usize, row: usize) -> usize {
        column * self.rows + row
    }
}

/// What one turbine did over the last step, evaluated at the step start.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TurbineSample {
    pub omega_r: f64,
    pub omega_c: f64,
    pub pitch: f64,
    pub torque: f64,
    /// Generator power (W).
    pub power: f64,
    /// Streamwise inflow at the rotor after wake superposition (m/s).
    pub wind: f64,
    pub weight: f64,
    pub ct: f64,
}

/// Plant state and controller memory near the closed-loop equilibrium for a
/// command and a steady streamwise wind.
pub fn equilibrium_guess(turbine: &Turbine, ctrl: &ControllerConfig, omega_c: f64, wind: f64) -> (TurbineState, ControllerState) {
    let cl = TurbineClosedLoop::new(turbine.clone(), ctrl.clone());
    let chi = cl.trim_guess(omega_c, wind);
    let mut x = cl.to_plant_state(&chi);
    x.0[dof::OMEGA_G] = turbine.params.gear_ratio * x.omega_r();
    let cs = ControllerState::primed(Integrators::new(chi[IDX_INT_TORQUE], chi[IDX_INT_PITCH]), chi[IDX_WIND]);
    (x, cs)
}

/// One column of the farm.
#[derive(Debug, Clone)]
pub struct ColumnSim {
    pub turbine: Arc<Turbine>,
    pub ctrl: Arc<ControllerConfig>,
    pub wake: WakeColumn,
    pub states: Vec<TurbineState>,
    pub ctrl_states: Vec<ControllerState>,
    /// Samples of the most recent step.
    pub last: Vec<TurbineSample>,
    u_buf: Vec<f64>,
    ct_buf: Vec<f64>,
}

impl ColumnSim {
    pub fn new(
        turbine: Arc<Turbine>,
        ctrl: Arc<ControllerConfig>,
        stations: &[f64],
        wake: &WakeParams,
        init: Vec<(TurbineState, ControllerState)>,
    ) -> Result<Self> {
        if init.len() != stations.len() {
            return Err(FarmError::Dimension {
                expected: stations.len(),
                got: init.len(),
            });
        }
        let n = stations.len();
        let wake = WakeColumn::new(stations, turbine.params.rotor_radius, wake)?;
        let (states, ctrl_states) = init.into_iter().unzip();
        Ok(Self {
            turbine,
            ctrl,
            wake,
            states,
            ctrl_states,
            last: vec![TurbineSample::default(); n],
            u_buf: vec![0.0; n],
            ct_buf: vec![0.0; n],
        })
    }

    pub fn n_turbines(&self) -> usize {
        self.states.len()
    }

    /// Streamwise inflow at each rotor for the current wake fields.
    pub fn inflow(&self, front: &WindVector) -> Vec<f64> {
        let n_x = streamwise_fraction(front);
        self.wake
            .stations
            .iter()
            .map(|&s| superpose_velocity(&self.wake, front.u_x, s, n_x).0)
            .collect()
    }

    /// Advances the column by `dt` under rotor-speed commands `omega_c`
    /// (rad/s) and front inflow `front`. Returns the column's generator power
    /// at the step start (W).
    pub fn step(&mut self, front: &WindVector, omega_c: &[f64], dt: f64) -> Result<f64> {
        let n = self.n_turbines();
        if omega_c.len() != n {
            return Err(FarmError::Dimension { expected: n, got: omega_c.len() });
        }
        let n_x = streamwise_fraction(front);
        let mut total = 0.0;
        for k in 0..n {
            let (u, _) = superpose_velocity(&self.wake, front.u_x, self.wake.stations[k], n_x);
            let wind = WindVector::new(u, front.u_y, front.u_z);
            let x = self.states[k];
            let hub = self.turbine.hub_relative_wind(&x, &wind);
            let (eta, cs) = blended_command(omega_c[k], &x, &hub, &self.ctrl_states[k], &self.ctrl, dt)
                .map_err(|e| e.context(format!("controller of turbine {k}")))?;
            let loads = self.turbine.aero_loads(&x, eta.pitch, &wind);
            let power = generator_power(x.omega_r(), eta.torque, &self.turbine.params);
            self.last[k] = TurbineSample {
                omega_r: x.omega_r(),
                omega_c: omega_c[k],
                pitch: eta.pitch,
                torque: eta.torque,
                power,
                wind: u,
                weight: cs.weight,
                ct: loads.ct,
            };
            total += power;
            self.states[k] = self
                .turbine
                .step(&x, &eta, &wind, dt)
                .map_err(|e| e.context(format!("plant of turbine {k}")))?;
            self.ctrl_states[k] = cs;
            self.u_buf[k] = u;
            self.ct_buf[k] = loads.ct;
        }
        self.wake
            .step(&self.u_buf, &self.ct_buf, dt)
            .map_err(|e| e.context("wake column"))?;
        Ok(total)
    }
}

fn streamwise_fraction(front: &WindVector) -> f64 {
    let m = front.magnitude();
    if m > 0.0 {
        front.u_x / m
    } else {
        1.0
    }
}
