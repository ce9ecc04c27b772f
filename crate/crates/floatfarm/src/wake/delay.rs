use super::{clamp_ct, initial_deficit, pair_weight, WakeParams};
use crate::error::{FarmError, Result};

/// First-order Padé approximation of a transport delay `tau`,
/// `x' = -(2/tau) x + nu`, `zeta = (4/tau) x - nu`, with unit DC gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayLine {
    /// Separation between the pair (m).
    pub kappa: f64,
    /// Advection speed of the upstream wake (m/s).
    pub u_a: f64,
    pub tau: f64,
    pub x: f64,
    pub zeta: f64,
    /// Set when the last advection update moved `tau` by more than 50%.
    pub tau_jump: bool,
}

impl DelayLine {
    pub fn new(kappa: f64, u_a: f64) -> Result<Self> {
        if !(kappa > 0.0) {
            return Err(FarmError::Domain(format!("delay-line separation must be positive, got {kappa}")));
        }
        if !(u_a > 0.0) {
            return Err(FarmError::Domain(format!("advection speed must be positive, got {u_a}")));
        }
        Ok(Self {
            kappa,
            u_a,
            tau: kappa / u_a,
            x: 0.0,
            zeta: 0.0,
            tau_jump: false,
        })
    }

    /// Updates the advection speed and the delay `kappa / u_a`.
    pub fn set_advection(&mut self, u_a: f64) -> Result<()> {
        if !(u_a > 0.0) {
            return Err(FarmError::Domain(format!("advection speed must be positive, got {u_a}")));
        }
        let tau = self.kappa / u_a;
        self.tau_jump = (tau - self.tau).abs() > 0.5 * self.tau;
        if self.tau_jump {
            log::warn!("delay changed from {:.3} s to {tau:.3} s in one step", self.tau);
        }
        self.u_a = u_a;
        self.tau = tau;
        Ok(())
    }

    /// Places the line at its steady state for constant input `nu`.
    pub fn set_steady(&mut self, nu: f64) {
        self.x = 0.5 * self.tau * nu;
        self.zeta = nu;
    }

    /// Exact zero-order-hold step with `nu` held over `dt`; returns the output
    /// at the end of the step.
    pub fn step(&mut self, nu: f64, dt: f64) -> Result<f64> {
        if !(self.tau > 0.0) {
            return Err(FarmError::Domain(format!("delay must be positive, got {}", self.tau)));
        }
        if !(dt > 0.0) {
            return Err(FarmError::Domain(format!("time step must be positive, got {dt}")));
        }
        let a = (-2.0 * dt / self.tau).exp();
        self.x = a * self.x + (1.0 - a) * 0.5 * self.tau * nu;
        self.zeta = 4.0 / self.tau * self.x - nu;
        Ok(self.zeta)
    }
}

/// Free-function form of [`DelayLine::step`].
pub fn step_delay_line(d: &DelayLine, nu: f64, dt: f64) -> Result<(DelayLine, f64)> {
    let mut next = *d;
    let z = next.step(nu, dt)?;
    Ok((next, z))
}

/// Delay lines between every ordered upstream/downstream pair of one column.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayNetwork {
    pub stations: Vec<f64>,
    pub radius: f64,
    /// `(i, j, line)` with `i` upstream of `j`.
    pub lines: Vec<(usize, usize, DelayLine)>,
    weights: Vec<f64>,
    /// Additive per-turbine inflow correction (m/s).
    pub offset: Vec<f64>,
}

impl DelayNetwork {
    pub fn new(stations: &[f64], radius: f64, params: &WakeParams) -> Result<Self> {
        params.validate()?;
        if stations.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(FarmError::Config("turbine stations must be strictly increasing".into()));
        }
        let mut lines = Vec::new();
        let mut weights = Vec::new();
        for j in 0..stations.len() {
            for i in 0..j {
                let kappa = stations[j] - stations[i];
                lines.push((i, j, DelayLine::new(kappa, 1.0)?));
                weights.push(pair_weight(kappa, params.k_w, radius));
            }
        }
        Ok(Self {
            stations: stations.to_vec(),
            radius,
            lines,
            weights,
            offset: vec![0.0; stations.len()],
        })
    }

    pub fn n_turbines(&self) -> usize {
        self.stations.len()
    }

    /// Effective inflow speed of each turbine, `U_inf - sum_i zeta_ij` plus offset.
    pub fn inflow(&self, u_front: f64) -> Vec<f64> {
        let mut u = vec![u_front; self.n_turbines()];
        for (_, j, line) in &self.lines {
            u[*j] -= line.zeta;
        }
        for (v, o) in u.iter_mut().zip(&self.offset) {
            *v = (*v + o).max(0.0);
        }
        u
    }

    fn check(&self, ct: &[f64]) -> Result<()> {
        if ct.len() != self.n_turbines() {
            return Err(FarmError::Dimension {
                expected: self.n_turbines(),
                got: ct.len(),
            });
        }
        Ok(())
    }

    /// Puts every line at steady state for freestream `u_front` and fixed
    /// thrust coefficients, resolving turbines upstream first.
    pub fn set_steady(&mut self, u_front: f64, ct: &[f64]) -> Result<Vec<f64>> {
        self.check(ct)?;
        let n = self.n_turbines();
        let mut u = vec![u_front; n];
        // lines are ordered by downstream index, so upstream inflows are final
        for (k, (i, j, line)) in self.lines.iter_mut().enumerate() {
            let ui = (u[*i] + self.offset[*i]).max(0.0);
            let c = clamp_ct(ct[*i]).0;
            let ua = (ui * (1.0 - c).sqrt()).max(1e-3);
            line.set_advection(ua)?;
            line.tau_jump = false;
            let nu = initial_deficit(ui, c)? * self.weights[k];
            line.set_steady(nu);
            u[*j] -= nu;
        }
        Ok(self.inflow(u_front))
    }

    /// Advances all lines by `dt` using the current inflows and thrust
    /// coefficients; returns the inflows at the end of the step.
    pub fn step(&mut self, u_front: f64, ct: &[f64], dt: f64) -> Result<Vec<f64>> {
        self.check(ct)?;
        let u = self.inflow(u_front);
        for (k, (i, _, line)) in self.lines.iter_mut().enumerate() {
            let c = clamp_ct(ct[*i]).0;
            let ua = (u[*i] * (1.0 - c).sqrt()).max(1e-3);
            line.set_advection(ua)?;
            let nu = initial_deficit(u[*i], c)? * self.weights[k];
            line.step(nu, dt)?;
        }
        Ok(self.inflow(u_front))
    }
}
