use std::sync::Arc;

use super::Predictor;
use crate::error::{FarmError, Result};
use crate::farm::ColumnSim;
use crate::plant::{dof, Drivetrain, WindVector};

/// Plant, inner loop and PDE wake rolled forward with the front inflow of
/// each column frozen at its measured value.
#[derive(Debug, Clone)]
pub struct NlPredictor {
    pub columns: Vec<ColumnSim>,
    pub fronts: Vec<WindVector>,
    dt: f64,
    n: usize,
}

impl NlPredictor {
    pub fn new(columns: Vec<ColumnSim>, fronts: Vec<WindVector>, dt: f64) -> Result<Self> {
        if columns.len() != fronts.len() {
            return Err(FarmError::Dimension {
                expected: columns.len(),
                got: fronts.len(),
            });
        }
        if !(dt > 0.0) {
            return Err(FarmError::Domain(format!("predictor step must be positive, got {dt}")));
        }
        let n = columns.iter().map(ColumnSim::n_turbines).sum();
        Ok(Self { columns, fronts, dt, n })
    }

    /// Copies the measured farm, replacing the drivetrain by the stiff model.
    pub fn from_measurement(truth: &[ColumnSim], fronts: &[WindVector], dt: f64) -> Result<Self> {
        let Some(first) = truth.first() else {
            return Err(FarmError::Config("farm has no columns".into()));
        };
        let stiff = Arc::new((*first.turbine).clone().with_drivetrain(Drivetrain::Stiff));
        let columns = truth
            .iter()
            .map(|c| {
                let mut c = c.clone();
                c.turbine = stiff.clone();
                for x in &mut c.states {
                    x.0[dof::TWIST] = 0.0;
                    x.0[dof::OMEGA_G] = stiff.params.gear_ratio * x.omega_r();
                }
                c
            })
            .collect();
        Self::new(columns, fronts.to_vec(), dt)
    }
}

impl Predictor for NlPredictor {
    fn n_turbines(&self) -> usize {
        self.n
    }

    fn dt(&self) -> f64 {
        self.dt
    }

    fn rotor_speeds(&self) -> Vec<f64> {
        self.columns.iter().flat_map(|c| c.states.iter().map(|x| x.omega_r())).collect()
    }

    fn step(&mut self, omega_c: &[f64]) -> Result<f64> {
        if omega_c.len() != self.n {
            return Err(FarmError::Dimension {
                expected: self.n,
                got: omega_c.len(),
            });
        }
        let mut total = 0.0;
        let mut at = 0;
        for (col, front) in self.columns.iter_mut().zip(&self.fronts) {
            let m = col.n_turbines();
            total += col.step(front, &omega_c[at..at + m], self.dt)?;
            at += m;
        }
        Ok(total)
    }
}
