//! Continuous-time LQR synthesis.

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{FarmError, Result};

/// Stabilizing solution of a continuous algebraic Riccati equation.
#[derive(Debug, Clone)]
pub struct CareSolution {
    pub p: DMatrix<f64>,
    /// Optimal gain `R^-1 B^T P`, control `u = -K x`.
    pub k: DMatrix<f64>,
    /// `||A^T P + P A - P B R^-1 B^T P + Q||_F / ||Q||_F`
    pub residual: f64,
    pub iterations: usize,
    /// True when the sign-function fallback produced the Newton start.
    pub used_fallback: bool,
}

fn check_square(m: &DMatrix<f64>, n: usize, what: &str) -> Result<()> {
    if m.nrows() != n || m.ncols() != n {
        return Err(FarmError::Synthesis(format!(
            "{what} is {}x{}, expected {n}x{n}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

pub fn eigenvalues(a: &DMatrix<f64>) -> Vec<Complex<f64>> {
    a.clone().complex_eigenvalues().iter().copied().collect()
}

pub fn is_hurwitz(a: &DMatrix<f64>) -> bool {
    eigenvalues(a).iter().all(|l| l.re < 0.0)
}

/// Solves `A^T X + X A + C = 0` through the Kronecker form.
pub fn lyapunov(a: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    check_square(a, n, "A")?;
    check_square(c, n, "C")?;
    let at = a.transpose();
    let eye = DMatrix::<f64>::identity(n, n);
    // column-major vec: vec(A^T X) = (I kron A^T) vec X, vec(X A) = (A^T kron I) vec X
    let op = eye.kronecker(&at) + at.kronecker(&eye);
    let rhs = -DVector::from_column_slice(c.as_slice());
    let sol = op
        .lu()
        .solve(&rhs)
        .ok_or_else(|| FarmError::Synthesis("Lyapunov operator is singular".into()))?;
    let x = DMatrix::from_column_slice(n, n, sol.as_slice());
    Ok((&x + x.transpose()) * 0.5)
}

pub fn care_residual(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>, p: &DMatrix<f64>) -> f64 {
    let g = b * r.clone().try_inverse().unwrap_or_else(|| DMatrix::zeros(r.nrows(), r.ncols())) * b.transpose();
    let res = a.transpose() * p + p * a - p * g * p + q;
    res.norm() / q.norm().max(f64::MIN_POSITIVE)
}

/// Coefficients `[c_0, ..., c_{n-1}]` of the monic polynomial with the given
/// roots (conjugate pairs assumed closed).
fn char_poly(roots: &[Complex<f64>]) -> Vec<f64> {
    let mut c = vec![Complex::new(1.0, 0.0)];
    for r in roots {
        let mut next = vec![Complex::new(0.0, 0.0); c.len() + 1];
        for (k, ck) in c.iter().enumerate() {
            next[k + 1] += ck;
            next[k] -= ck * r;
        }
        c = next;
    }
    c.iter().take(roots.len()).map(|z| z.re).collect()
}

/// Single-input pole placement by Ackermann's formula.
pub fn ackermann(a: &DMatrix<f64>, b: &DMatrix<f64>, poles: &[Complex<f64>]) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if b.ncols() != 1 || poles.len() != n {
        return Err(FarmError::Synthesis("Ackermann placement needs one input and n poles".into()));
    }
    let mut ctrb = DMatrix::zeros(n, n);
    let mut col = b.column(0).into_owned();
    for k in 0..n {
        ctrb.set_column(k, &col);
        col = a * col;
    }
    let coeffs = char_poly(poles);
    let mut phi = DMatrix::<f64>::zeros(n, n);
    let mut pow = DMatrix::<f64>::identity(n, n);
    for ck in &coeffs {
        phi += &pow * *ck;
        pow = &pow * a;
    }
    phi += pow;
    let mut en = DMatrix::zeros(1, n);
    en[(0, n - 1)] = 1.0;
    let inv = ctrb
        .try_inverse()
        .ok_or_else(|| FarmError::Synthesis("pair is not controllable".into()))?;
    Ok(en * inv * phi)
}

/// Stabilizing initial gain: zero for a Hurwitz `A`, else Ackermann with the
/// open-loop spectrum reflected into the left half plane.
fn initial_gain(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let (n, m) = (a.nrows(), b.ncols());
    if is_hurwitz(a) {
        return Some(DMatrix::zeros(m, n));
    }
    if m != 1 {
        return None;
    }
    let eig = eigenvalues(a);
    let scale = eig.iter().map(|l| l.norm()).fold(0.0, f64::max).max(1e-3);
    let poles: Vec<Complex<f64>> = eig
        .iter()
        .map(|l| Complex::new(-l.re.abs().max(0.1 * scale), l.im))
        .collect();
    let k = ackermann(a, b, &poles).ok()?;
    is_hurwitz(&(a - b * &k)).then_some(k)
}

/// Matrix sign-function solution of the CARE with determinant scaling.
fn care_sign(a: &DMatrix<f64>, g: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let mut z = DMatrix::zeros(2 * n, 2 * n);
    z.view_mut((0, 0), (n, n)).copy_from(a);
    z.view_mut((0, n), (n, n)).copy_from(&(-g));
    z.view_mut((n, 0), (n, n)).copy_from(&(-q));
    z.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));
    for _ in 0..200 {
        let det = z.clone().lu().determinant().abs();
        let inv = z
            .clone()
            .try_inverse()
            .ok_or_else(|| FarmError::Synthesis("Hamiltonian has imaginary-axis eigenvalues".into()))?;
        let c = if det > 0.0 && det.is_finite() {
            det.powf(-1.0 / (2.0 * n as f64))
        } else {
            1.0
        };
        let next = (&z * c + inv / c) * 0.5;
        let delta = (&next - &z).norm();
        z = next;
        if delta <= 1e-13 * z.norm() {
            break;
        }
    }
    let eye = DMatrix::<f64>::identity(n, n);
    let w11 = z.view((0, 0), (n, n)).into_owned();
    let w12 = z.view((0, n), (n, n)).into_owned();
    let w21 = z.view((n, 0), (n, n)).into_owned();
    let w22 = z.view((n, n), (n, n)).into_owned();
    let mut lhs = DMatrix::zeros(2 * n, n);
    lhs.view_mut((0, 0), (n, n)).copy_from(&w12);
    lhs.view_mut((n, 0), (n, n)).copy_from(&(w22 + &eye));
    let mut rhs = DMatrix::zeros(2 * n, n);
    rhs.view_mut((0, 0), (n, n)).copy_from(&(-(w11 + &eye)));
    rhs.view_mut((n, 0), (n, n)).copy_from(&(-w21));
    let p = lhs
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .map_err(|e| FarmError::Synthesis(format!("sign-function back-solve failed: {e}")))?;
    Ok((&p + p.transpose()) * 0.5)
}

/// Stabilizing CARE solution by Newton–Kleinman iteration.
pub fn solve_care(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<CareSolution> {
    let n = a.nrows();
    check_square(a, n, "A")?;
    check_square(q, n, "Q")?;
    check_square(r, b.ncols(), "R")?;
    if b.nrows() != n {
        return Err(FarmError::Synthesis(format!("B has {} rows, expected {n}", b.nrows())));
    }
    let r_inv = r
        .clone()
        .try_inverse()
        .ok_or_else(|| FarmError::Synthesis("R is singular".into()))?;
    let g = b * &r_inv * b.transpose();

    let (mut k, used_fallback) = match initial_gain(a, b) {
        Some(k) => (k, false),
        None => {
            let p = care_sign(a, &g, q)?;
            (&r_inv * b.transpose() * p, true)
        }
    };
    if !is_hurwitz(&(a - b * &k)) {
        return Err(FarmError::Synthesis("no stabilizing initial gain; pair not stabilizable".into()));
    }

    let mut p = DMatrix::zeros(n, n);
    let mut iterations = 0;
    for it in 1..=100 {
        iterations = it;
        let acl = a - b * &k;
        let c = q + k.transpose() * r * &k;
        let p_next = lyapunov(&acl, &c)?;
        let change = (&p_next - &p).norm() / p_next.norm().max(f64::MIN_POSITIVE);
        p = p_next;
        k = &r_inv * b.transpose() * &p;
        if change < 1e-13 {
            break;
        }
    }
    let residual = care_residual(a, b, q, r, &p);
    if !residual.is_finite() || residual > 1e-8 || !is_hurwitz(&(a - b * &k)) {
        return Err(FarmError::Synthesis(format!(
            "Newton-Kleinman stopped after {iterations} iterations with residual {residual:.3e}"
        )));
    }
    Ok(CareSolution {
        p,
        k,
        residual,
        iterations,
        used_fallback,
    })
}

/// PI-LQR gain partitioned as `u = -k_i int_e - k_x x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiLqrGain {
    pub k_i: f64,
    pub k_x: Vec<f64>,
    pub residual: f64,
    /// Largest real part of the augmented closed loop.
    pub max_real_eig: f64,
}

/// Integrator-augmented pair: `z = [int_e, x]`, `d/dt int_e = c_e x`.
pub fn augment(a: &DMatrix<f64>, b: &DMatrix<f64>, c_e: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut aa = DMatrix::zeros(n + 1, n + 1);
    aa.view_mut((0, 1), (1, n)).copy_from(c_e);
    aa.view_mut((1, 1), (n, n)).copy_from(a);
    let mut ba = DMatrix::zeros(n + 1, b.ncols());
    ba.view_mut((1, 0), (n, b.ncols())).copy_from(b);
    (aa, ba)
}

/// LQR design on the integrator-augmented single-input pair.
pub fn design_pi_lqr(a: &DMatrix<f64>, b: &DMatrix<f64>, c_e: &DMatrix<f64>, q: &DMatrix<f64>, r: f64) -> Result<PiLqrGain> {
    if b.ncols() != 1 || c_e.nrows() != 1 || c_e.ncols() != a.nrows() {
        return Err(FarmError::Synthesis("PI-LQR design expects one input and one error row".into()));
    }
    let (aa, ba) = augment(a, b, c_e);
    let sol = solve_care(&aa, &ba, q, &DMatrix::from_element(1, 1, r))?;
    let max_real_eig = eigenvalues(&(&aa - &ba * &sol.k))
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(PiLqrGain {
        k_i: sol.k[(0, 0)],
        k_x: sol.k.iter().skip(1).copied().collect(),
        residual: sol.residual,
        max_real_eig,
    })
}

/// `|K (j w I - A)^-1 B|` for a single-input, single-gain loop.
pub fn loop_gain(a: &DMatrix<f64>, b: &DMatrix<f64>, k: &DMatrix<f64>, w: f64) -> f64 {
    let n = a.nrows();
    let m = DMatrix::<Complex<f64>>::from_fn(n, n, |i, j| {
        Complex::new(-a[(i, j)], if i == j { w } else { 0.0 })
    });
    let bc = DMatrix::<Complex<f64>>::from_fn(n, 1, |i, _| Complex::new(b[(i, 0)], 0.0));
    match m.lu().solve(&bc) {
        Some(x) => (0..n).map(|i| x[(i, 0)] * k[(0, i)]).sum::<Complex<f64>>().norm(),
        None => f64::INFINITY,
    }
}

/// Highest frequency (rad/s) in `[w_lo, w_hi]` where the loop gain is at
/// least one, refined by bisection; `None` if the gain stays below one.
pub fn crossover_frequency(a: &DMatrix<f64>, b: &DMatrix<f64>, k: &DMatrix<f64>, w_lo: f64, w_hi: f64) -> Option<f64> {
    let n = 600;
    let ratio = (w_hi / w_lo).ln();
    let grid: Vec<f64> = (0..=n).map(|i| w_lo * (ratio * i as f64 / n as f64).exp()).collect();
    let idx = grid.iter().rposition(|&w| loop_gain(a, b, k, w) >= 1.0)?;
    if idx == n {
        return Some(w_hi);
    }
    let (mut lo, mut hi) = (grid[idx], grid[idx + 1]);
    for _ in 0..60 {
        let mid = (lo * hi).sqrt();
        if loop_gain(a, b, k, mid) >= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(lo)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_textbook_case() {
        let a = DMatrix::from_element(1, 1, 0.0);
        let b = DMatrix::from_element(1, 1, 1.0);
        let q = DMatrix::from_element(1, 1, 1.0);
        let s = solve_care(&a, &b, &q, &q).unwrap();
        assert!((s.k[(0, 0)] - 1.0).abs() < 1e-9);
        assert!((s.p[(0, 0)] - 1.0).abs() < 1e-9);
        assert!(s.residual < 1e-12);
    }

    #[test]
    fn double_integrator_closed_form() {
        // P = [[sqrt3, 1], [1, sqrt3]] for Q = I, R = 1
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let s = solve_care(&a, &b, &DMatrix::identity(2, 2), &DMatrix::identity(1, 1)).unwrap();
        let r3 = 3f64.sqrt();
        assert!((s.p[(0, 0)] - r3).abs() < 1e-9 && (s.p[(0, 1)] - 1.0).abs() < 1e-9);
        assert!((s.k[(0, 1)] - r3).abs() < 1e-9);
    }

    #[test]
    fn sign_function_agrees_with_newton() {
        let a = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, -2.0, 0.5]);
        let b = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
        let q = DMatrix::identity(3, 3);
        let r = DMatrix::identity(2, 2);
        // two inputs and an unstable A force the fallback start
        let s = solve_care(&a, &b, &q, &r).unwrap();
        assert!(s.used_fallback);
        let g = &b * &b.transpose();
        let p = care_sign(&a, &g, &q).unwrap();
        assert!((&p - &s.p).norm() < 1e-8 * s.p.norm());
    }

    #[test]
    fn gain_is_invariant_to_common_weight_scaling() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 2.0, -1.0]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let q = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 0.5]));
        let r = DMatrix::from_element(1, 1, 0.2);
        let k1 = solve_care(&a, &b, &q, &r).unwrap().k;
        let k2 = solve_care(&a, &b, &(&q * 7.5), &(&r * 7.5)).unwrap().k;
        assert!((k1 - k2).norm() < 1e-9);
    }

    #[test]
    fn ackermann_places_poles() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 2.0, -1.0]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let poles = [Complex::new(-1.0, 0.0), Complex::new(-3.0, 0.0)];
        let k = ackermann(&a, &b, &poles).unwrap();
        let mut eig: Vec<f64> = eigenvalues(&(&a - &b * k)).iter().map(|l| l.re).collect();
        eig.sort_by(f64::total_cmp);
        assert!((eig[0] + 3.0).abs() < 1e-9 && (eig[1] + 1.0).abs() < 1e-9);
    }

    #[test]
    fn pi_lqr_on_first_order_plant() {
        let a = DMatrix::from_element(1, 1, -1.0);
        let b = DMatrix::from_element(1, 1, 1.0);
        let ce = DMatrix::from_element(1, 1, 1.0);
        let q = DMatrix::identity(2, 2);
        let g = design_pi_lqr(&a, &b, &ce, &q, 1.0).unwrap();
        assert!(g.max_real_eig < 0.0 && g.residual < 1e-8);
        assert!(g.k_i > 0.0);
    }

    #[test]
    fn lyapunov_solution_satisfies_equation() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 2.0, 0.0, -3.0]);
        let c = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let x = lyapunov(&a, &c).unwrap();
        assert!((a.transpose() * &x + &x * &a + &c).norm() < 1e-12);
    }

    #[test]
    fn crossover_of_integrator_loop() {
        // L(s) = 2/s crosses unity at 2 rad/s
        let a = DMatrix::from_element(1, 1, 0.0);
        let b = DMatrix::from_element(1, 1, 1.0);
        let k = DMatrix::from_element(1, 1, 2.0);
        let wc = crossover_frequency(&a, &b, &k, 1e-3, 1e2).unwrap();
        assert!((wc - 2.0).abs() < 1e-9);
    }
}
