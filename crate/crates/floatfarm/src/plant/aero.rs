//! Power and thrust coefficient surfaces.
//!
//! Tables are stored on a rectangular `(lambda, beta)` lattice and evaluated
//! with bilinear interpolation. Queries outside the lattice are clamped to the
//! boundary and reported through [`Coefficients::clamped`].

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{FarmError, Result};

/// Betz limit on the power coefficient.
pub const BETZ_LIMIT: f64 = 16.0 / 27.0;

/// Largest thrust coefficient kept in a table; `C_T` is clamped below one.
pub const CT_MAX: f64 = 0.99;

/// Interpolated coefficients at one query point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub cp: f64,
    pub ct: f64,
    /// True when the query fell outside the table and was clamped.
    pub clamped: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AeroSurfaces {
    /// Tip-speed ratio axis, strictly increasing.
    lambda: Vec<f64>,
    /// Blade pitch axis (rad), strictly increasing.
    beta: Vec<f64>,
    /// Row-major `[i_lambda * n_beta + i_beta]`.
    cp: Vec<f64>,
    ct: Vec<f64>,
}

#[derive(Debug, Deserialize, Serialize)]
struct Row {
    lambda: f64,
    beta: f64,
    cp: f64,
    ct: f64,
}

fn locate(axis: &[f64], x: f64) -> (usize, f64, bool) {
    let n = axis.len();
    if x.is_nan() {
        return (0, 0.0, true);
    }
    if n == 1 {
        return (0, 0.0, x != axis[0]);
    }
    if x <= axis[0] {
        return (0, 0.0, x < axis[0]);
    }
    if x >= axis[n - 1] {
        return (n - 2, 1.0, x > axis[n - 1]);
    }
    // partition_point gives the first node strictly greater than x
    let hi = axis.partition_point(|&a| a <= x);
    let lo = hi - 1;
    let t = (x - axis[lo]) / (axis[hi] - axis[lo]);
    (lo, t, false)
}

fn strictly_increasing(axis: &[f64]) -> bool {
    axis.windows(2).all(|w| w[1] > w[0])
}

impl AeroSurfaces {
    /// Builds a table, clamping `C_p` into `[0, 16/27]` and `C_T` into `[0, CT_MAX]`.
    pub fn new(lambda: Vec<f64>, beta: Vec<f64>, cp: Vec<f64>, ct: Vec<f64>) -> Result<Self> {
        if lambda.is_empty() || beta.is_empty() {
            return Err(FarmError::Config("aero table axes must be non-empty".into()));
        }
        if !strictly_increasing(&lambda) || !strictly_increasing(&beta) {
            return Err(FarmError::Config(
                "aero table axes must be strictly increasing".into(),
            ));
        }
        let n = lambda.len() * beta.len();
        if cp.len() != n || ct.len() != n {
            return Err(FarmError::Dimension {
                expected: n,
                got: cp.len().min(ct.len()),
            });
        }
        if cp.iter().chain(ct.iter()).any(|v| !v.is_finite()) {
            return Err(FarmError::Config("aero table contains non-finite values".into()));
        }
        let cp = cp.into_iter().map(|v| v.clamp(0.0, BETZ_LIMIT)).collect();
        let ct = ct.into_iter().map(|v| v.clamp(0.0, CT_MAX)).collect();
        Ok(Self { lambda, beta, cp, ct })
    }

    /// Table with constant coefficients, handy for tests and toy problems.
    pub fn constant(cp: f64, ct: f64) -> Self {
        Self::new(
            vec![0.0, 20.0],
            vec![0.0, 1.0],
            vec![cp; 4],
            vec![ct; 4],
        )
        .expect("constant table is well formed")
    }

    pub fn lambda_axis(&self) -> &[f64] {
        &self.lambda
    }

    pub fn beta_axis(&self) -> &[f64] {
        &self.beta
    }

    pub fn eval(&self, lambda: f64, beta: f64) -> Coefficients {
        let (i, tl, cl) = locate(&self.lambda, lambda);
        let (j, tb, cb) = locate(&self.beta, beta);
        let nb = self.beta.len();
        let i1 = (i + 1).min(self.lambda.len() - 1);
        let j1 = (j + 1).min(nb - 1);
        let bil = |v: &[f64]| {
            let v00 = v[i * nb + j];
            let v01 = v[i * nb + j1];
            let v10 = v[i1 * nb + j];
            let v11 = v[i1 * nb + j1];
            (1.0 - tl) * ((1.0 - tb) * v00 + tb * v01) + tl * ((1.0 - tb) * v10 + tb * v11)
        };
        Coefficients {
            cp: bil(&self.cp),
            ct: bil(&self.ct),
            clamped: cl || cb,
        }
    }

    /// Generates a table from the empirical exponential `C_p(lambda, beta)`
    /// surrogate, with `C_T` recovered from actuator-disc momentum theory on
    /// the lightly loaded branch (`a <= 1/3`).
    pub fn empirical(lambda: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        let mut cp = Vec::with_capacity(lambda.len() * beta.len());
        let mut ct = Vec::with_capacity(lambda.len() * beta.len());
        for &l in &lambda {
            for &b in &beta {
                let c = empirical_cp(l, b);
                cp.push(c);
                ct.push(thrust_from_power(c));
            }
        }
        Self::new(lambda, beta, cp, ct)
    }

    /// Default lattice: `lambda` in `[0, 16]` step 0.25, `beta` in `[0, 45]` deg step 0.5 deg.
    pub fn default_table() -> Self {
        let lambda: Vec<f64> = (0..=64).map(|i| i as f64 * 0.25).collect();
        let beta: Vec<f64> = (0..=90).map(|i| (i as f64 * 0.5).to_radians()).collect();
        Self::empirical(lambda, beta).expect("default lattice is well formed")
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        let expected = ["lambda", "beta", "cp", "ct"];
        if headers.len() != 4 || headers.iter().zip(expected).any(|(h, e)| h.trim() != e) {
            return Err(FarmError::Data(format!(
                "aero table header must be `lambda,beta,cp,ct`, got `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut rows = Vec::new();
        for rec in rdr.deserialize() {
            let row: Row = rec?;
            rows.push(row);
        }
        let mut lambda: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        for r in &rows {
            if !lambda.contains(&r.lambda) {
                lambda.push(r.lambda);
            }
            if !beta.contains(&r.beta) {
                beta.push(r.beta);
            }
        }
        lambda.sort_by(f64::total_cmp);
        beta.sort_by(f64::total_cmp);
        let nb = beta.len();
        let n = lambda.len() * nb;
        if rows.len() != n {
            return Err(FarmError::Data(format!(
                "aero table is not rectangular: {} rows for a {}x{} lattice",
                rows.len(),
                lambda.len(),
                nb
            )));
        }
        let mut cp = vec![f64::NAN; n];
        let mut ct = vec![f64::NAN; n];
        for r in rows {
            let i = lambda.partition_point(|&v| v < r.lambda);
            let j = beta.partition_point(|&v| v < r.beta);
            cp[i * nb + j] = r.cp;
            ct[i * nb + j] = r.ct;
        }
        Self::new(lambda, beta, cp, ct)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| FarmError::io(path, e))?;
        Self::read_csv(file)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let nb = self.beta.len();
        for (i, &l) in self.lambda.iter().enumerate() {
            for (j, &b) in self.beta.iter().enumerate() {
                wtr.serialize(Row {
                    lambda: l,
                    beta: b,
                    cp: self.cp[i * nb + j],
                    ct: self.ct[i * nb + j],
                })?;
            }
        }
        wtr.flush().map_err(|e| FarmError::io("<aero csv>", e))?;
        Ok(())
    }
}

/// Empirical power coefficient surrogate, `beta` in radians.
///
/// `C_p = 0.5176 (116/l_i - 0.4 b - 5) exp(-21/l_i) + 0.0068 lambda` with
/// `1/l_i = 1/(lambda + 0.08 b) - 0.035` and `b` in degrees.
///
/// The usual form carries `0.035/(b^3 + 1)` in `1/l_i`. That term collapses
/// within the first two degrees of pitch and makes the rated-power pitch trim
/// jump by over ten degrees between neighbouring wind speeds. Holding it at
/// its zero-pitch value leaves the `beta = 0` curve unchanged and keeps
/// `C_p` decreasing in pitch.
pub fn empirical_cp(lambda: f64, beta: f64) -> f64 {
    let b = beta.to_degrees();
    if lambda <= 0.0 {
        return 0.0;
    }
    let inv_li = 1.0 / (lambda + 0.08 * b) - 0.035;
    let cp = 0.5176 * (116.0 * inv_li - 0.4 * b - 5.0) * (-21.0 * inv_li).exp() + 0.0068 * lambda;
    cp.clamp(0.0, BETZ_LIMIT)
}

/// Thrust coefficient consistent with a power coefficient under actuator-disc
/// theory: solve `C_p = 4a(1-a)^2` for `a` in `[0, 1/3]`, return `4a(1-a)`.
pub fn thrust_from_power(cp: f64) -> f64 {
    let cp = cp.clamp(0.0, BETZ_LIMIT);
    if cp == 0.0 {
        return 0.0;
    }
    let f = |a: f64| 4.0 * a * (1.0 - a) * (1.0 - a) - cp;
    let (mut lo, mut hi) = (0.0_f64, 1.0 / 3.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let a = 0.5 * (lo + hi);
    (4.0 * a * (1.0 - a)).min(CT_MAX)
}
