//! Linear parameter-varying models of the closed-loop turbine and the
//! Region-3 PI-LQR gain synthesis.
//!
//! Models are affine about their trim: `x = x* + dx`, `psi = psi* + dpsi`,
//! `d/dt dx = A dx + B dpsi`, `y = y* + C dx + D dpsi`. A grid of such models
//! over rotor speed and wind speed is blended bilinearly at query time.

pub mod closed_loop;
pub mod design;
pub mod io;
pub mod lqr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

pub use closed_loop::{TurbineClosedLoop, CL_STATE_NAMES};
pub use design::{design_region3_schedule, region3_design_model, Region3Design, Region3DesignConfig};
pub use lqr::{design_pi_lqr, solve_care, CareSolution, PiLqrGain};

use crate::error::{FarmError, Result};

/// Continuous-time dynamics `dx/dt = f(x, psi)`, `y = h(x, psi)`.
pub trait ClosedLoopDynamics {
    fn n_states(&self) -> usize;
    fn n_inputs(&self) -> usize;
    fn n_outputs(&self) -> usize;
    fn rhs(&self, x: &[f64], psi: &[f64]) -> Result<Vec<f64>>;
    fn output(&self, x: &[f64], psi: &[f64]) -> Result<Vec<f64>>;

    /// Typical magnitude of each state, used to size difference steps.
    fn state_scale(&self) -> Vec<f64> {
        vec![1.0; self.n_states()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrimOptions {
    /// Convergence threshold on `max |f(x*, psi*)|`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for TrimOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 200 }
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn fd_step(x: f64, scale: f64, rel: f64) -> f64 {
    rel * x.abs().max(scale)
}

/// Levenberg–Marquardt search for `f(x, psi) = 0` with a forward-difference
/// Jacobian. Returns the trim state and its residual norm.
pub fn trim<F: ClosedLoopDynamics + ?Sized>(f: &F, x0: &[f64], psi: &[f64], opts: &TrimOptions) -> Result<(Vec<f64>, f64)> {
    let n = f.n_states();
    if x0.len() != n || psi.len() != f.n_inputs() {
        return Err(FarmError::Dimension {
            expected: n,
            got: x0.len(),
        });
    }
    let scale = f.state_scale();
    let mut x = x0.to_vec();
    let mut r = f.rhs(&x, psi)?;
    let mut norm = inf_norm(&r);
    let mut mu = 1e-3;
    for it in 0..opts.max_iter {
        if norm <= opts.tol {
            return Ok((x, norm));
        }
        let mut jac = DMatrix::zeros(n, n);
        for j in 0..n {
            let h = fd_step(x[j], scale[j], 1e-7);
            let mut xp = x.clone();
            xp[j] += h;
            let rp = f.rhs(&xp, psi)?;
            for i in 0..n {
                jac[(i, j)] = (rp[i] - r[i]) / h;
            }
        }
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let g = &jt * DVector::from_column_slice(&r);
        // floored Marquardt scaling keeps near-flat directions from taking
        // full-size steps
        let floor = 1e-8 * jtj.diagonal().max().max(1e-300);
        let mut accepted = false;
        while mu < 1e14 {
            let mut lhs = jtj.clone();
            for i in 0..n {
                lhs[(i, i)] += mu * jtj[(i, i)].max(floor);
            }
            let Some(step) = lhs.lu().solve(&(-&g)) else {
                mu *= 10.0;
                continue;
            };
            let xn: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            match f.rhs(&xn, psi) {
                Ok(rn) if inf_norm(&rn) < norm => {
                    x = xn;
                    norm = inf_norm(&rn);
                    r = rn;
                    mu = (mu / 5.0).max(1e-12);
                    accepted = true;
                    break;
                }
                _ => mu *= 4.0,
            }
        }
        if !accepted {
            let singular = jac.clone().lu().determinant().abs() < 1e-300;
            log::warn!("trim stalled at iteration {it} (singular Jacobian: {singular})");
            return Err(FarmError::TrimNotConverged {
                residual: norm,
                iterations: it,
            });
        }
    }
    if norm <= opts.tol {
        Ok((x, norm))
    } else {
        Err(FarmError::TrimNotConverged {
            residual: norm,
            iterations: opts.max_iter,
        })
    }
}

/// Affine model about one trim point.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    /// Scheduling point: rotor speed (rad/s) and wind speed (m/s).
    pub omega_r: f64,
    pub wind: f64,
    pub x_trim: DVector<f64>,
    pub psi_trim: DVector<f64>,
    pub y_trim: DVector<f64>,
    pub trim_residual: f64,
}

impl LinearModel {
    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn n_outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let (n, m, p) = (self.n_states(), self.n_inputs(), self.n_outputs());
        let ok = self.a.ncols() == n
            && self.b.nrows() == n
            && self.c.ncols() == n
            && self.d.nrows() == p
            && self.d.ncols() == m
            && self.x_trim.len() == n
            && self.psi_trim.len() == m
            && self.y_trim.len() == p;
        if !ok {
            return Err(FarmError::Data("linear model blocks have inconsistent dimensions".into()));
        }
        Ok(())
    }

    /// Entrywise weighted sum of models with equal dimensions.
    fn blend(parts: &[(&LinearModel, f64)]) -> LinearModel {
        let (first, w0) = parts[0];
        let mut out = LinearModel {
            a: &first.a * w0,
            b: &first.b * w0,
            c: &first.c * w0,
            d: &first.d * w0,
            omega_r: first.omega_r * w0,
            wind: first.wind * w0,
            x_trim: &first.x_trim * w0,
            psi_trim: &first.psi_trim * w0,
            y_trim: &first.y_trim * w0,
            trim_residual: first.trim_residual,
        };
        for &(m, w) in &parts[1..] {
            out.a += &m.a * w;
            out.b += &m.b * w;
            out.c += &m.c * w;
            out.d += &m.d * w;
            out.omega_r += m.omega_r * w;
            out.wind += m.wind * w;
            out.x_trim += &m.x_trim * w;
            out.psi_trim += &m.psi_trim * w;
            out.y_trim += &m.y_trim * w;
            out.trim_residual = out.trim_residual.max(m.trim_residual);
        }
        out
    }
}

/// Trims `f` at `psi` starting from `x_guess`, then builds `A, B, C, D` by
/// central differences.
pub fn linearize<F: ClosedLoopDynamics + ?Sized>(
    f: &F,
    x_guess: &[f64],
    psi: &[f64],
    schedule_point: (f64, f64),
    opts: &TrimOptions,
) -> Result<LinearModel> {
    let (x, residual) = trim(f, x_guess, psi, opts)?;
    let (n, m, p) = (f.n_states(), f.n_inputs(), f.n_outputs());
    let scale = f.state_scale();
    let mut a = DMatrix::zeros(n, n);
    let mut c = DMatrix::zeros(p, n);
    for j in 0..n {
        let h = fd_step(x[j], scale[j], 1e-5);
        let (mut xp, mut xm) = (x.clone(), x.clone());
        xp[j] += h;
        xm[j] -= h;
        let (fp, fm) = (f.rhs(&xp, psi)?, f.rhs(&xm, psi)?);
        let (yp, ym) = (f.output(&xp, psi)?, f.output(&xm, psi)?);
        for i in 0..n {
            a[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
        for i in 0..p {
            c[(i, j)] = (yp[i] - ym[i]) / (2.0 * h);
        }
    }
    let mut b = DMatrix::zeros(n, m);
    let mut d = DMatrix::zeros(p, m);
    for j in 0..m {
        let h = fd_step(psi[j], 1.0, 1e-5);
        let (mut pp, mut pm) = (psi.to_vec(), psi.to_vec());
        pp[j] += h;
        pm[j] -= h;
        let (fp, fm) = (f.rhs(&x, &pp)?, f.rhs(&x, &pm)?);
        let (yp, ym) = (f.output(&x, &pp)?, f.output(&x, &pm)?);
        for i in 0..n {
            b[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
        for i in 0..p {
            d[(i, j)] = (yp[i] - ym[i]) / (2.0 * h);
        }
    }
    let y = f.output(&x, psi)?;
    Ok(LinearModel {
        a,
        b,
        c,
        d,
        omega_r: schedule_point.0,
        wind: schedule_point.1,
        x_trim: DVector::from_vec(x),
        psi_trim: DVector::from_column_slice(psi),
        y_trim: DVector::from_vec(y),
        trim_residual: residual,
    })
}

/// Position of `v` in a sorted axis: lower index, fraction and clamp flag.
fn locate(axis: &[f64], v: f64) -> (usize, f64, bool) {
    let n = axis.len();
    if n == 1 {
        return (0, 0.0, v != axis[0]);
    }
    if !(v > axis[0]) {
        return (0, 0.0, v < axis[0] || v.is_nan());
    }
    if v >= axis[n - 1] {
        return (n - 2, 1.0, v > axis[n - 1]);
    }
    let i = axis.partition_point(|&a| a <= v) - 1;
    (i, (v - axis[i]) / (axis[i + 1] - axis[i]), false)
}

/// Bilinear corner weights `(node index, weight)` on an `no x nw` lattice
/// stored row-major by rotor speed.
fn corners(omega: &[f64], wind: &[f64], w: f64, u: f64) -> ([(usize, f64); 4], bool) {
    let (i, s, c1) = locate(omega, w);
    let (j, t, c2) = locate(wind, u);
    let nw = wind.len();
    let i1 = (i + 1).min(omega.len() - 1);
    let j1 = (j + 1).min(nw - 1);
    (
        [
            (i * nw + j, (1.0 - s) * (1.0 - t)),
            (i * nw + j1, (1.0 - s) * t),
            (i1 * nw + j, s * (1.0 - t)),
            (i1 * nw + j1, s * t),
        ],
        c1 || c2,
    )
}

/// Rectangular lattice of models over rotor speed (rad/s) and wind (m/s).
#[derive(Debug, Clone, PartialEq)]
pub struct LpvGrid {
    pub omega: Vec<f64>,
    pub wind: Vec<f64>,
    /// Row-major by rotor speed: node `(i, j)` at `i * wind.len() + j`.
    pub models: Vec<LinearModel>,
}

impl LpvGrid {
    pub fn new(omega: Vec<f64>, wind: Vec<f64>, models: Vec<LinearModel>) -> Result<Self> {
        if omega.is_empty() || wind.is_empty() || models.len() != omega.len() * wind.len() {
            return Err(FarmError::Data(format!(
                "LPV lattice {}x{} needs {} models, got {}",
                omega.len(),
                wind.len(),
                omega.len() * wind.len(),
                models.len()
            )));
        }
        for axis in [&omega, &wind] {
            if axis.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(FarmError::Data("LPV axes must be strictly increasing".into()));
            }
        }
        let dims = |m: &LinearModel| (m.n_states(), m.n_inputs(), m.n_outputs());
        let d0 = dims(&models[0]);
        for m in &models {
            m.validate()?;
            if dims(m) != d0 {
                return Err(FarmError::Data("LPV node models differ in dimension".into()));
            }
        }
        Ok(Self { omega, wind, models })
    }

    pub fn node(&self, i: usize, j: usize) -> &LinearModel {
        &self.models[i * self.wind.len() + j]
    }

    /// Bilinearly interpolated model at `(omega_r, wind)`, clamped to the
    /// lattice; the flag reports clamping.
    pub fn schedule(&self, omega_r: f64, wind: f64) -> (LinearModel, bool) {
        let (cs, clamped) = corners(&self.omega, &self.wind, omega_r, wind);
        let parts: Vec<(&LinearModel, f64)> = cs.iter().map(|&(k, w)| (&self.models[k], w)).collect();
        (LinearModel::blend(&parts), clamped)
    }

    /// Discretizes every node for a fixed step.
    pub fn discretize(&self, dt: f64) -> Result<DiscreteLpvGrid> {
        let nodes = self
            .models
            .iter()
            .map(|m| DiscreteNode::new(m, dt))
            .collect::<Result<Vec<_>>>()?;
        let m0 = &self.models[0];
        Ok(DiscreteLpvGrid {
            dt,
            omega: self.omega.clone(),
            wind: self.wind.clone(),
            n_states: m0.n_states(),
            n_inputs: m0.n_inputs(),
            n_outputs: m0.n_outputs(),
            nodes,
        })
    }
}

/// Builds a grid, trimming each wind column in parallel. Each node starts
/// from `initial_guess`; the previous node's trim along rotor speed is the
/// fallback.
pub fn build_grid<F, G>(
    make: G,
    omega: &[f64],
    wind: &[f64],
    initial_guess: impl Fn(f64, f64) -> Vec<f64> + Sync,
    psi_of: impl Fn(f64, f64) -> Vec<f64> + Sync,
    opts: &TrimOptions,
) -> Result<LpvGrid>
where
    F: ClosedLoopDynamics,
    G: Fn() -> F + Sync,
{
    let columns: Vec<Vec<LinearModel>> = wind
        .par_iter()
        .map(|&u| {
            let f = make();
            let mut prev: Option<Vec<f64>> = None;
            let mut col = Vec::with_capacity(omega.len());
            for &w in omega {
                let psi = psi_of(w, u);
                let fresh = initial_guess(w, u);
                let m = linearize(&f, &fresh, &psi, (w, u), opts)
                    .or_else(|e| match &prev {
                        Some(g) => linearize(&f, g, &psi, (w, u), opts),
                        None => Err(e),
                    })
                    .map_err(|e| e.context(format!("trim at omega_r = {w:.4} rad/s, wind = {u} m/s")))?;
                prev = Some(m.x_trim.iter().copied().collect());
                col.push(m);
            }
            Ok(col)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut models = Vec::with_capacity(omega.len() * wind.len());
    for i in 0..omega.len() {
        for col in &columns {
            models.push(col[i].clone());
        }
    }
    LpvGrid::new(omega.to_vec(), wind.to_vec(), models)
}

/// Zero-order-hold discretization `(e^{A dt}, int_0^dt e^{A s} ds B)`.
pub fn zoh(a: &DMatrix<f64>, b: &DMatrix<f64>, dt: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let (n, m) = (a.nrows(), b.ncols());
    let mut aug = DMatrix::zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n)).copy_from(&(a * dt));
    aug.view_mut((0, n), (n, m)).copy_from(&(b * dt));
    let e = aug.exp();
    (e.view((0, 0), (n, n)).into_owned(), e.view((0, n), (n, m)).into_owned())
}

/// One ZOH step of an affine model; returns the next state and the output
/// at the start of the step.
pub fn step_lpv(model: &LinearModel, chi: &DVector<f64>, psi: &DVector<f64>, dt: f64) -> Result<(DVector<f64>, DVector<f64>)> {
    if !(dt > 0.0) {
        return Err(FarmError::Domain(format!("time step must be positive, got {dt}")));
    }
    let dx = chi - &model.x_trim;
    let dp = psi - &model.psi_trim;
    let y = &model.y_trim + &model.c * &dx + &model.d * &dp;
    let (ad, bd) = zoh(&model.a, &model.b, dt);
    let next = &model.x_trim + ad * dx + bd * dp;
    Ok((next, y))
}

/// Node data packed as `[Ad | Bd | C | D | x* | psi* | y*]`, row-major blocks.
#[derive(Debug, Clone, PartialEq)]
struct DiscreteNode(Vec<f64>);

impl DiscreteNode {
    fn new(m: &LinearModel, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(FarmError::Domain(format!("time step must be positive, got {dt}")));
        }
        let (ad, bd) = zoh(&m.a, &m.b, dt);
        let mut v = Vec::new();
        for mat in [&ad, &bd, &m.c, &m.d] {
            for i in 0..mat.nrows() {
                v.extend(mat.row(i).iter());
            }
        }
        v.extend(m.x_trim.iter());
        v.extend(m.psi_trim.iter());
        v.extend(m.y_trim.iter());
        Ok(Self(v))
    }
}

/// Grid of ZOH-discretized node models at a fixed step, blended bilinearly
/// per step. Cheap enough for the MPC inner loop.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteLpvGrid {
    pub dt: f64,
    pub omega: Vec<f64>,
    pub wind: Vec<f64>,
    pub n_states: usize,
    pub n_inputs: usize,
    pub n_outputs: usize,
    nodes: Vec<DiscreteNode>,
}

impl DiscreteLpvGrid {
    /// Advances `chi` in place and writes the start-of-step output into `y`.
    /// `scratch` is resized as needed. Returns the clamp flag.
    pub fn step(&self, chi: &mut [f64], psi: &[f64], omega_r: f64, wind: f64, y: &mut [f64], scratch: &mut Vec<f64>) -> bool {
        let (n, m, p) = (self.n_states, self.n_inputs, self.n_outputs);
        let (cs, clamped) = corners(&self.omega, &self.wind, omega_r, wind);
        let len = self.nodes[0].0.len();
        scratch.clear();
        scratch.resize(len + n + m, 0.0);
        let (blk, rest) = scratch.split_at_mut(len);
        for &(k, w) in &cs {
            if w != 0.0 {
                for (s, v) in blk.iter_mut().zip(&self.nodes[k].0) {
                    *s += w * v;
                }
            }
        }
        let (ad, r) = blk.split_at(n * n);
        let (bd, r) = r.split_at(n * m);
        let (c, r) = r.split_at(p * n);
        let (d, r) = r.split_at(p * m);
        let (xs, r) = r.split_at(n);
        let (ps, ys) = r.split_at(m);
        let (dx, dp) = rest.split_at_mut(n);
        for i in 0..n {
            dx[i] = chi[i] - xs[i];
        }
        for i in 0..m {
            dp[i] = psi[i] - ps[i];
        }
        for i in 0..p {
            let mut acc = ys[i];
            for j in 0..n {
                acc += c[i * n + j] * dx[j];
            }
            for j in 0..m {
                acc += d[i * m + j] * dp[j];
            }
            y[i] = acc;
        }
        for i in 0..n {
            let mut acc = xs[i];
            for j in 0..n {
                acc += ad[i * n + j] * dx[j];
            }
            for j in 0..m {
                acc += bd[i * m + j] * dp[j];
            }
            chi[i] = acc;
        }
        clamped
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Linear {
        m: DMatrix<f64>,
        n: DMatrix<f64>,
    }

    impl ClosedLoopDynamics for Linear {
        fn n_states(&self) -> usize {
            self.m.nrows()
        }
        fn n_inputs(&self) -> usize {
            self.n.ncols()
        }
        fn n_outputs(&self) -> usize {
            1
        }
        fn rhs(&self, x: &[f64], psi: &[f64]) -> Result<Vec<f64>> {
            let v = &self.m * DVector::from_column_slice(x) + &self.n * DVector::from_column_slice(psi);
            Ok(v.iter().copied().collect())
        }
        fn output(&self, x: &[f64], _psi: &[f64]) -> Result<Vec<f64>> {
            Ok(vec![x[0]])
        }
    }

    fn linear() -> Linear {
        Linear {
            m: DMatrix::from_row_slice(2, 2, &[-1.0, 0.5, -2.0, -3.0]),
            n: DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.3, 2.0]),
        }
    }

    #[test]
    fn linear_plant_is_recovered() {
        let f = linear();
        let m = linearize(&f, &[0.0, 0.0], &[1.0, -0.5], (0.0, 0.0), &TrimOptions::default()).unwrap();
        assert!((&m.a - &f.m).amax() < 1e-6);
        assert!((&m.b - &f.n).amax() < 1e-6);
        assert!(m.trim_residual <= 1e-10);
    }

    #[test]
    fn trim_reports_non_convergence() {
        struct NoRoot;
        impl ClosedLoopDynamics for NoRoot {
            fn n_states(&self) -> usize {
                1
            }
            fn n_inputs(&self) -> usize {
                0
            }
            fn n_outputs(&self) -> usize {
                0
            }
            fn rhs(&self, x: &[f64], _: &[f64]) -> Result<Vec<f64>> {
                Ok(vec![x[0] * x[0] + 1.0])
            }
            fn output(&self, _: &[f64], _: &[f64]) -> Result<Vec<f64>> {
                Ok(vec![])
            }
        }
        let err = trim(&NoRoot, &[0.3], &[], &TrimOptions::default()).unwrap_err();
        assert!(matches!(err, FarmError::TrimNotConverged { .. }));
    }

    fn scalar_model(a: f64, x0: f64) -> LinearModel {
        LinearModel {
            a: DMatrix::from_element(1, 1, a),
            b: DMatrix::from_element(1, 1, 1.0),
            c: DMatrix::from_element(1, 1, 1.0),
            d: DMatrix::from_element(1, 1, 0.0),
            omega_r: 0.0,
            wind: 0.0,
            x_trim: DVector::from_element(1, x0),
            psi_trim: DVector::from_element(1, 0.0),
            y_trim: DVector::from_element(1, x0),
            trim_residual: 0.0,
        }
    }

    fn toy_grid() -> LpvGrid {
        let models = vec![scalar_model(-1.0, 0.0), scalar_model(-2.0, 1.0), scalar_model(-3.0, 2.0), scalar_model(-6.0, 5.0)];
        LpvGrid::new(vec![1.0, 2.0], vec![10.0, 12.0], models).unwrap()
    }

    #[test]
    fn schedule_is_exact_at_nodes_and_averages_at_midpoint() {
        let g = toy_grid();
        let (m, c) = g.schedule(2.0, 10.0);
        assert!(!c);
        assert_eq!(m.a[(0, 0)], -3.0);
        let (mid, _) = g.schedule(1.5, 11.0);
        assert_eq!(mid.a[(0, 0)], -3.0);
        assert_eq!(mid.x_trim[0], 2.0);
        let (out, c) = g.schedule(0.5, 30.0);
        assert!(c);
        assert_eq!(out.a[(0, 0)], -2.0);
    }

    #[test]
    fn scalar_zoh_step() {
        let m = scalar_model(-1.0, 0.0);
        let dt = 0.3;
        let (x, y) = step_lpv(&m, &DVector::from_element(1, 0.5), &DVector::from_element(1, 1.0), dt).unwrap();
        let exact = (-dt).exp() * 0.5 + (1.0 - (-dt).exp());
        assert!((x[0] - exact).abs() < 1e-14);
        assert_eq!(y[0], 0.5);
    }

    #[test]
    fn trim_is_a_fixed_point() {
        let m = scalar_model(-1.0, 3.0);
        let (x, _) = step_lpv(&m, &m.x_trim, &m.psi_trim, 0.7).unwrap();
        assert_eq!(x[0], 3.0);
    }

    #[test]
    fn discrete_grid_matches_exact_step_at_nodes() {
        let g = toy_grid();
        let dg = g.discretize(0.5).unwrap();
        let node = g.node(1, 1);
        let (x_exact, y_exact) = step_lpv(node, &DVector::from_element(1, 4.0), &DVector::from_element(1, 0.2), 0.5).unwrap();
        let mut chi = [4.0];
        let mut y = [0.0];
        let mut scratch = Vec::new();
        dg.step(&mut chi, &[0.2], 2.0, 12.0, &mut y, &mut scratch);
        assert!((chi[0] - x_exact[0]).abs() < 1e-13);
        assert!((y[0] - y_exact[0]).abs() < 1e-13);
    }
}
