use std::f64::consts::{PI, SQRT_2};

use super::{clamp_ct, initial_deficit, wake_diameter, wake_diameter_slope, WakeParams};
use crate::error::{FarmError, Result};

/// One explicit step of `d/dt delta + u d/dx delta = -w delta + S G` on a
/// uniform grid: first-order upwind advection, then exact exponential decay,
/// then the source, floored at zero. The inflow cell sees zero upstream.
pub fn upwind_step(
    delta: &mut [f64],
    speed: f64,
    decay: &[f64],
    source: Option<(f64, &[f64])>,
    dt: f64,
    dx: f64,
) -> Result<()> {
    let courant = speed * dt / dx;
    if !(courant <= 1.0) || speed < 0.0 {
        return Err(FarmError::Cfl { courant, dt, dx });
    }
    if decay.len() != delta.len() {
        return Err(FarmError::Dimension {
            expected: delta.len(),
            got: decay.len(),
        });
    }
    for i in (1..delta.len()).rev() {
        delta[i] -= courant * (delta[i] - delta[i - 1]);
    }
    if let Some(first) = delta.first_mut() {
        *first *= 1.0 - courant;
    }
    for (d, w) in delta.iter_mut().zip(decay) {
        if *w != 0.0 {
            *d *= (-w * dt).exp();
        }
    }
    if let Some((s, g)) = source {
        for (d, gi) in delta.iter_mut().zip(g) {
            *d += dt * s * gi;
        }
    }
    for d in delta.iter_mut() {
        if *d < 0.0 {
            *d = 0.0;
        }
    }
    Ok(())
}

/// Deficit transport along one column of turbines.
#[derive(Debug, Clone, PartialEq)]
pub struct WakeColumn {
    pub x0: f64,
    pub dx: f64,
    pub radius: f64,
    /// Turbine stations (m), strictly increasing downstream.
    pub stations: Vec<f64>,
    station_idx: Vec<usize>,
    /// Per-turbine deficit fields on the grid (m/s).
    pub deficits: Vec<Vec<f64>>,
    forcing: Vec<Vec<f64>>,
    /// `2 d_w' / d_w` per turbine (1/m); the decay rate is `u` times this.
    spread: Vec<Vec<f64>>,
    source_coeff: f64,
    decay_buf: Vec<f64>,
}

/// Flags raised by a column step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WakeStepFlags {
    pub ct_clamped: bool,
}

impl WakeColumn {
    pub fn new(stations: &[f64], radius: f64, params: &WakeParams) -> Result<Self> {
        params.validate()?;
        if stations.is_empty() {
            return Err(FarmError::Config("wake column needs at least one turbine".into()));
        }
        if stations.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(FarmError::Config("turbine stations must be strictly increasing".into()));
        }
        let dx = params.dx.unwrap_or(0.5 * radius);
        let width = params.forcing_width.unwrap_or(0.5 * radius);
        let x0 = stations[0] - params.margin;
        let span = stations[stations.len() - 1] + params.margin - x0;
        let n_cells = (span / dx).ceil() as usize + 1;
        let xs: Vec<f64> = (0..n_cells).map(|i| x0 + i as f64 * dx).collect();
        let station_idx = stations.iter().map(|s| ((s - x0) / dx).round() as usize).collect();

        let forcing = stations
            .iter()
            .map(|s| {
                let mut g: Vec<f64> = xs
                    .iter()
                    .map(|x| (-(x - s).powi(2) / (2.0 * width * width)).exp() / (width * (2.0 * PI).sqrt()))
                    .collect();
                let total: f64 = g.iter().sum::<f64>() * dx;
                if total > 0.0 {
                    g.iter_mut().for_each(|v| *v /= total);
                }
                g
            })
            .collect();
        let spread = stations
            .iter()
            .map(|s| {
                xs.iter()
                    .map(|x| {
                        let k = x - s;
                        2.0 * wake_diameter_slope(k, params.k_w, radius) / wake_diameter(k, params.k_w, radius)
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            x0,
            dx,
            radius,
            stations: stations.to_vec(),
            station_idx,
            deficits: vec![vec![0.0; n_cells]; stations.len()],
            forcing,
            spread,
            source_coeff: params.source_coeff,
            decay_buf: vec![0.0; n_cells],
        })
    }

    pub fn n_cells(&self) -> usize {
        self.decay_buf.len()
    }

    pub fn n_turbines(&self) -> usize {
        self.stations.len()
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.dx
    }

    /// Discrete integral of the forcing shape of turbine `n`.
    pub fn forcing_integral(&self, n: usize) -> f64 {
        self.forcing[n].iter().sum::<f64>() * self.dx
    }

    /// Advances every deficit field by `dt` given each turbine's inflow speed
    /// and thrust coefficient.
    pub fn step(&mut self, u_inf: &[f64], ct: &[f64], dt: f64) -> Result<WakeStepFlags> {
        let n = self.n_turbines();
        if u_inf.len() != n || ct.len() != n {
            return Err(FarmError::Dimension {
                expected: n,
                got: if u_inf.len() != n { u_inf.len() } else { ct.len() },
            });
        }
        let mut flags = WakeStepFlags::default();
        for k in 0..n {
            let u = u_inf[k].max(0.0);
            let (c, clamped) = clamp_ct(ct[k]);
            if clamped && ct[k] >= 1.0 {
                log::warn!("thrust coefficient {} clamped below 1 for wake turbine {k}", ct[k]);
            }
            flags.ct_clamped |= clamped;
            let d0 = initial_deficit(u, c)?;
            for (w, g) in self.decay_buf.iter_mut().zip(&self.spread[k]) {
                *w = u * g;
            }
            let src = self.source_coeff * u * d0;
            let source = (src != 0.0).then_some((src, self.forcing[k].as_slice()));
            upwind_step(&mut self.deficits[k], u, &self.decay_buf, source, dt, self.dx)?;
            self.deficits[k][self.station_idx[k]] = d0;
        }
        Ok(flags)
    }

    /// Deficit of turbine `n` at `x`, linearly interpolated, zero off-grid.
    pub fn deficit_at(&self, n: usize, x: f64) -> f64 {
        let f = (x - self.x0) / self.dx;
        if !(f >= 0.0) || f > (self.n_cells() - 1) as f64 {
            return 0.0;
        }
        let i = (f.floor() as usize).min(self.n_cells() - 2);
        let t = f - i as f64;
        let d = &self.deficits[n];
        d[i] + t * (d[i + 1] - d[i])
    }

    /// Centerline wake shape of turbine `n` at `x`: a smooth streamwise onset
    /// `(1 + erf((x - s_n) / (R sqrt 2))) / 2`.
    pub fn shape(&self, n: usize, x: f64) -> f64 {
        0.5 * (1.0 + libm::erf((x - self.stations[n]) / (self.radius * SQRT_2)))
    }

    /// Writes the current fields as `x,delta_u_0,...`.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["x".to_string()];
        header.extend((0..self.n_turbines()).map(|k| format!("delta_u_{k}")));
        wr.write_record(&header)?;
        for i in 0..self.n_cells() {
            let mut row = vec![self.x(i).to_string()];
            row.extend(self.deficits.iter().map(|d| d[i].to_string()));
            wr.write_record(&row)?;
        }
        wr.flush().map_err(|e| FarmError::io("<csv>", e))?;
        Ok(())
    }
}

/// Streamwise velocity at `x` on the column centerline,
/// `U_inf - n_x sum_n delta_u_n(x) W_n(x)` over turbines upstream of `x`.
/// Returns the velocity floored at zero and whether the floor was hit.
pub fn superpose_velocity(col: &WakeColumn, u_front: f64, x: f64, n_hat_x: f64) -> (f64, bool) {
    let mut deficit = 0.0;
    for n in 0..col.n_turbines() {
        if col.stations[n] < x {
            deficit += col.deficit_at(n, x) * col.shape(n, x);
        }
    }
    let u = u_front - n_hat_x * deficit;
    if u < 0.0 {
        (0.0, true)
    } else {
        (u, false)
    }
}
