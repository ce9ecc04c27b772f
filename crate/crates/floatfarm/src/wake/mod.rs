//! Wake models.
//!
//! Two paradigms share the same deficit and wake-growth laws: a dynamic
//! advection-decay transport of each turbine's deficit along its column
//! ([`pde::WakeColumn`], the truth model and NL predictor) and a network of
//! first-order Padé delay lines between turbine pairs ([`delay::DelayLine`],
//! the reduced predictor). Columns never interact.

pub mod delay;
pub mod pde;

use serde::{Deserialize, Serialize};

pub use delay::{DelayLine, DelayNetwork};
pub use pde::{superpose_velocity, upwind_step, WakeColumn};

use crate::error::{FarmError, Result};

/// Thrust coefficients at or above 1 are pulled back by this much.
pub const CT_EPS: f64 = 1e-6;

/// Wake model parameters, shared by both paradigms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WakeParams {
    /// Wake growth coefficient `k_w`.
    pub k_w: f64,
    /// PDE grid spacing (m); `None` uses `R/2`.
    pub dx: Option<f64>,
    /// Width of the Gaussian forcing shape (m); `None` uses `R/2`.
    pub forcing_width: Option<f64>,
    /// Source strength `c_src` in `S_n = c_src u_inf,n delta_u0,n` (1/s).
    pub source_coeff: f64,
    /// Domain margin upstream of the first and downstream of the last station (m).
    pub margin: f64,
}

impl Default for WakeParams {
    fn default() -> Self {
        Self {
            k_w: 0.1,
            dx: None,
            forcing_width: None,
            source_coeff: 0.0,
            margin: 126.0,
        }
    }
}

impl WakeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.k_w >= 0.0) {
            return Err(FarmError::Config(format!("k_w must be non-negative, got {}", self.k_w)));
        }
        for (name, v) in [("dx", self.dx), ("forcing_width", self.forcing_width)] {
            if let Some(v) = v {
                if !(v > 0.0) {
                    return Err(FarmError::Config(format!("wake {name} must be positive, got {v}")));
                }
            }
        }
        if !(self.source_coeff >= 0.0) || !(self.margin >= 0.0) {
            return Err(FarmError::Config("wake source coefficient and margin must be non-negative".into()));
        }
        Ok(())
    }
}

/// Clamps `C_T` into `[0, 1 - eps]`, reporting whether it was changed.
pub fn clamp_ct(ct: f64) -> (f64, bool) {
    if ct >= 1.0 {
        (1.0 - CT_EPS, true)
    } else if ct < 0.0 {
        (0.0, true)
    } else {
        (ct, false)
    }
}

/// Deficit just behind a rotor, `u_inf (1 - sqrt(1 - C_T))`.
pub fn initial_deficit(u_inf: f64, ct: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&ct) {
        return Err(FarmError::Domain(format!("thrust coefficient {ct} outside [0, 1)")));
    }
    Ok(u_inf * (1.0 - (1.0 - ct).sqrt()))
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 30.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Normalized wake diameter `1 + k_w ln(1 + exp(kappa / (R sqrt 2)))`.
pub fn wake_diameter(kappa: f64, k_w: f64, radius: f64) -> f64 {
    1.0 + k_w * softplus(kappa / (radius * std::f64::consts::SQRT_2))
}

/// `d(d_w)/d kappa` (1/m).
pub fn wake_diameter_slope(kappa: f64, k_w: f64, radius: f64) -> f64 {
    let s = radius * std::f64::consts::SQRT_2;
    k_w * logistic(kappa / s) / s
}

/// Streamwise spreading factor `(1 + erf(kappa / (R sqrt 2))) / d_w^2` applied
/// to a turbine's deficit at separation `kappa`.
pub fn pair_weight(kappa: f64, k_w: f64, radius: f64) -> f64 {
    let d = wake_diameter(kappa, k_w, radius);
    (1.0 + libm::erf(kappa / (radius * std::f64::consts::SQRT_2))) / (d * d)
}

/// Aggregated deficit at a turbine from its upstream set,
/// `sum_i delta_u0_i / d_w,i^2 (1 + erf(kappa_i / (R sqrt 2)))`.
pub fn aggregate_deficit(deficits: &[f64], diameters: &[f64], kappas: &[f64], radius: f64) -> Result<f64> {
    if deficits.len() != diameters.len() || deficits.len() != kappas.len() {
        return Err(FarmError::Dimension {
            expected: deficits.len(),
            got: if diameters.len() != deficits.len() { diameters.len() } else { kappas.len() },
        });
    }
    let s = radius * std::f64::consts::SQRT_2;
    Ok(deficits
        .iter()
        .zip(diameters)
        .zip(kappas)
        .map(|((du, d), k)| du / (d * d) * (1.0 + libm::erf(k / s)))
        .sum())
}
