//! Region-3 PI-LQR schedule synthesis.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::lqr::{augment, crossover_frequency, design_pi_lqr, PiLqrGain};
use crate::control::{FeedbackSignal, Region3Schedule};
use crate::error::{FarmError, Result};
use crate::plant::{aero_torque, dof, AeroSurfaces, ControlInput, Drivetrain, Turbine, TurbineParams, TurbineState, WindVector};

const DESIGN_STATES: [usize; 5] = [dof::SURGE, dof::PITCH, dof::SURGE_RATE, dof::PITCH_RATE, dof::OMEGA_R];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Region3DesignConfig {
    /// Wind-speed breakpoints (m/s).
    pub breakpoints: Vec<f64>,
    /// Rotor speed the design models are trimmed at (rpm).
    pub design_speed_rpm: f64,
    /// Diagonal weights on the integrated error, platform pitch rate and rotor speed.
    pub q_int: f64,
    pub q_pitch_rate: f64,
    pub q_speed: f64,
    /// First value of the pitch weight in the line search, and its growth factor.
    pub r_start: f64,
    pub r_growth: f64,
    pub max_search_steps: usize,
    /// Crossover must stay below this fraction of the platform pitch frequency.
    pub bandwidth_fraction: f64,
}

impl Default for Region3DesignConfig {
    fn default() -> Self {
        Self {
            breakpoints: (0..7).map(|k| 12.0 + 2.0 * k as f64).collect(),
            design_speed_rpm: 11.0,
            q_int: 1.0,
            q_pitch_rate: 1.0,
            q_speed: 10.0,
            r_start: 1e-3,
            r_growth: 1.5,
            max_search_steps: 80,
            bandwidth_fraction: 1.0,
        }
    }
}

impl Region3DesignConfig {
    pub fn q_matrix(&self) -> DMatrix<f64> {
        // z = [int_e, surge, pitch, surge_rate, pitch_rate, omega_r]
        DMatrix::from_diagonal(&DVector::from_vec(vec![self.q_int, 0.0, 0.0, 0.0, self.q_pitch_rate, self.q_speed]))
    }
}

/// Open-loop design model about the rated-torque trim: state
/// `[surge, pitch, surge_rate, pitch_rate, omega_r]`, input collective pitch.
/// Returns `(A, B, beta_trim)`.
pub fn region3_design_model(
    params: &TurbineParams,
    aero: &std::sync::Arc<AeroSurfaces>,
    wind: f64,
    omega_r: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>, f64)> {
    let turbine = Turbine::new(params.clone(), aero.clone()).with_drivetrain(Drivetrain::Stiff);
    let w = WindVector::streamwise(wind);
    let torque = params.rated_generator_torque;
    let residual = |beta: f64| -> Result<f64> { Ok(aero_torque(omega_r, beta, &w, params, aero)? - params.gear_ratio * torque) };
    // the feathering branch: first sign change scanning down from max pitch
    let step = 0.25f64.to_radians();
    let mut hi = params.max_pitch;
    if residual(hi)? >= 0.0 {
        return Err(FarmError::Synthesis(format!("rotor still overpowered at maximum pitch at {wind} m/s")));
    }
    let mut lo = hi;
    loop {
        lo = (lo - step).max(0.0);
        if residual(lo)? > 0.0 {
            break;
        }
        if lo == 0.0 {
            return Err(FarmError::Synthesis(format!(
                "no rated-torque pitch trim at {wind} m/s and {omega_r:.3} rad/s"
            )));
        }
        hi = lo;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if residual(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let beta = 0.5 * (lo + hi);

    let mut x = TurbineState::at_rotor_speed(omega_r, params.gear_ratio);
    let thrust = turbine.aero_loads(&x, beta, &w).thrust;
    x.0[dof::SURGE] = thrust / params.platform.stiffness[dof::SURGE];
    x.0[dof::PITCH] = thrust * params.hub_height / params.platform.stiffness[dof::PITCH];

    let rhs = |x: &TurbineState, beta: f64| {
        let u = ControlInput { pitch: beta, torque, yaw: 0.0 };
        let d = turbine.rhs(x, &u, &w);
        DESIGN_STATES.map(|i| d[i])
    };
    let mut a = DMatrix::zeros(5, 5);
    for (j, &sj) in DESIGN_STATES.iter().enumerate() {
        let h = 1e-6 * x.0[sj].abs().max(1e-2);
        let (mut xp, mut xm) = (x, x);
        xp.0[sj] += h;
        xm.0[sj] -= h;
        if sj == dof::OMEGA_R {
            xp.0[dof::OMEGA_G] = params.gear_ratio * xp.0[sj];
            xm.0[dof::OMEGA_G] = params.gear_ratio * xm.0[sj];
        }
        let (fp, fm) = (rhs(&xp, beta), rhs(&xm, beta));
        for i in 0..5 {
            a[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    let hb = 1e-6;
    let (fp, fm) = (rhs(&x, beta + hb), rhs(&x, beta - hb));
    let b = DMatrix::from_fn(5, 1, |i, _| (fp[i] - fm[i]) / (2.0 * hb));
    Ok((a, b, beta))
}

/// Synthesis outcome for every breakpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region3Design {
    pub schedule: Region3Schedule,
    pub r: f64,
    pub q_diag: Vec<f64>,
    pub gains: Vec<PiLqrGain>,
    /// Pitch-loop crossover per breakpoint (rad/s).
    pub crossovers: Vec<f64>,
    pub pitch_frequency: f64,
    pub trim_pitch: Vec<f64>,
}

fn speed_error_row() -> DMatrix<f64> {
    DMatrix::from_row_slice(1, 5, &[0.0, 0.0, 0.0, 0.0, 1.0])
}

fn design_all(models: &[(DMatrix<f64>, DMatrix<f64>, f64)], q: &DMatrix<f64>, r: f64) -> Result<(Vec<PiLqrGain>, Vec<f64>)> {
    let mut gains = Vec::with_capacity(models.len());
    let mut cross = Vec::with_capacity(models.len());
    for (a, b, _) in models {
        let g = design_pi_lqr(a, b, &speed_error_row(), q, r)?;
        let (aa, ba) = augment(a, b, &speed_error_row());
        let mut k = DMatrix::zeros(1, 6);
        k[(0, 0)] = g.k_i;
        for (i, v) in g.k_x.iter().enumerate() {
            k[(0, i + 1)] = *v;
        }
        cross.push(crossover_frequency(&aa, &ba, &k, 1e-4, 1e2).unwrap_or(0.0));
        gains.push(g);
    }
    Ok((gains, cross))
}

/// Designs the Region-3 gain schedule. One `Q, R` pair serves every
/// breakpoint; `R` grows geometrically until every pitch-loop crossover sits
/// below the platform-pitch natural frequency.
pub fn design_region3_schedule(params: &TurbineParams, aero: &std::sync::Arc<AeroSurfaces>, cfg: &Region3DesignConfig) -> Result<Region3Design> {
    if cfg.breakpoints.is_empty() || !(cfg.r_start > 0.0) || !(cfg.r_growth > 1.0) {
        return Err(FarmError::Config("Region-3 design needs breakpoints, r_start > 0 and r_growth > 1".into()));
    }
    let omega = cfg.design_speed_rpm * std::f64::consts::PI / 30.0;
    let models = cfg
        .breakpoints
        .iter()
        .map(|&u| region3_design_model(params, aero, u, omega))
        .collect::<Result<Vec<_>>>()?;
    let pitch_frequency = params.platform.natural_frequency(dof::PITCH);
    let limit = cfg.bandwidth_fraction * pitch_frequency;
    let q = cfg.q_matrix();

    let mut r = cfg.r_start;
    for _ in 0..cfg.max_search_steps {
        let (gains, crossovers) = design_all(&models, &q, r)?;
        if crossovers.iter().all(|&c| c < limit) {
            let schedule = Region3Schedule::new(
                cfg.breakpoints.clone(),
                gains.iter().map(|g| g.k_i).collect(),
                gains.iter().map(|g| g.k_x.clone()).collect(),
                FeedbackSignal::standard(),
            )?;
            return Ok(Region3Design {
                schedule,
                r,
                q_diag: q.diagonal().iter().copied().collect(),
                gains,
                crossovers,
                pitch_frequency,
                trim_pitch: models.iter().map(|m| m.2).collect(),
            });
        }
        r *= cfg.r_growth;
    }
    Err(FarmError::Synthesis(format!(
        "pitch-loop crossover stays above {limit:.3} rad/s up to R = {r:.3e}"
    )))
}
