use std::io::Read;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{FarmError, Result};
use crate::plant::WindVector;

/// Longest tolerated spacing between inflow samples (s).
pub const MAX_GAP: f64 = 5.0;

/// Front-row inflow of one column, `(u, v, w)` sampled in time and linearly
/// interpolated in between. Held at the end values outside the record.
#[derive(Debug, Clone, PartialEq)]
pub struct InflowBoundary {
    pub time: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
}

impl InflowBoundary {
    pub fn new(time: Vec<f64>, u: Vec<f64>, v: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        let n = time.len();
        if n == 0 || u.len() != n || v.len() != n || w.len() != n {
            return Err(FarmError::Data("inflow needs non-empty columns of equal length".into()));
        }
        for (k, p) in time.windows(2).enumerate() {
            let gap = p[1] - p[0];
            if !(gap > 0.0) {
                return Err(FarmError::Data(format!("inflow time is not increasing at row {}", k + 1)));
            }
            if gap > MAX_GAP {
                return Err(FarmError::Data(format!(
                    "inflow has a {gap} s gap after t = {} s (limit {MAX_GAP} s)",
                    p[0]
                )));
            }
        }
        if time.iter().chain(&u).chain(&v).chain(&w).any(|x| !x.is_finite()) {
            return Err(FarmError::Data("inflow contains non-finite values".into()));
        }
        Ok(Self { time, u, v, w })
    }

    /// Constant inflow.
    pub fn constant(wind: WindVector) -> Self {
        Self {
            time: vec![0.0],
            u: vec![wind.u_x],
            v: vec![wind.u_y],
            w: vec![wind.u_z],
        }
    }

    /// Every component multiplied by `k`.
    pub fn scaled(mut self, k: f64) -> Self {
        for s in [&mut self.u, &mut self.v, &mut self.w] {
            s.iter_mut().for_each(|x| *x *= k);
        }
        self
    }

    pub fn at(&self, t: f64) -> WindVector {
        let k = self.time.partition_point(|&x| x <= t);
        if k == 0 {
            return WindVector::new(self.u[0], self.v[0], self.w[0]);
        }
        let n = self.time.len();
        if k == n {
            return WindVector::new(self.u[n - 1], self.v[n - 1], self.w[n - 1]);
        }
        let a = (t - self.time[k - 1]) / (self.time[k] - self.time[k - 1]);
        let lerp = |s: &[f64]| s[k - 1] + a * (s[k] - s[k - 1]);
        WindVector::new(lerp(&self.u), lerp(&self.v), lerp(&self.w))
    }

    /// Reads `time_s,u,v,w`.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let headers = rdr.headers()?.clone();
        if headers.iter().map(str::trim).ne(["time_s", "u", "v", "w"]) {
            return Err(FarmError::Data(format!(
                "inflow CSV header must be `time_s,u,v,w`, got `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let (mut t, mut u, mut v, mut w) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for rec in rdr.deserialize() {
            let (a, b, c, d): (f64, f64, f64, f64) = rec?;
            t.push(a);
            u.push(b);
            v.push(c);
            w.push(d);
        }
        Self::new(t, u, v, w)
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["time_s", "u", "v", "w"])?;
        for k in 0..self.time.len() {
            wr.serialize((self.time[k], self.u[k], self.v[k], self.w[k]))?;
        }
        wr.flush().map_err(|e| FarmError::io("<inflow>", e))?;
        Ok(())
    }
}

/// Loads an inflow file and applies the column scale factor.
pub fn ingest_inflow(path: impl AsRef<Path>, scale: f64) -> Result<InflowBoundary> {
    let path = path.as_ref();
    if !(scale > 0.0) {
        return Err(FarmError::Config(format!("inflow scale factor must be positive, got {scale}")));
    }
    let f = std::fs::File::open(path).map_err(|e| FarmError::io(path, e))?;
    let b = InflowBoundary::read_csv(f).map_err(|e| e.context(format!("reading inflow {}", path.display())))?;
    Ok(b.scaled(scale))
}

/// Colored-noise inflow parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthInflow {
    /// Mean streamwise speed (m/s).
    pub mean: f64,
    /// Turbulence intensity, std(u) / mean.
    pub ti: f64,
    /// Corner frequency of the first-order shaping filter (Hz).
    pub cutoff: f64,
    /// Lateral and vertical std as a fraction of the streamwise one.
    pub cross_ratio: f64,
    /// Sample spacing (s).
    pub sample: f64,
}

impl Default for SynthInflow {
    fn default() -> Self {
        Self {
            mean: 13.0,
            ti: 0.05,
            cutoff: 0.03,
            cross_ratio: 0.2,
            sample: 0.5,
        }
    }
}

/// Stationary first-order autoregressive noise with unit variance, started
/// from its stationary distribution.
fn ar1(rng: &mut ChaCha8Rng, n: usize, a: f64) -> Vec<f64> {
    let b = (1.0 - a * a).sqrt();
    let mut x: f64 = StandardNormal.sample(rng);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(x);
        let z: f64 = StandardNormal.sample(rng);
        x = a * x + b * z;
    }
    out
}

/// Mean wind plus low-pass filtered Gaussian noise of standard deviation
/// `ti * mean` on `u`, smaller fluctuations on `v` and `w`.
pub fn synth_inflow(spec: &SynthInflow, duration: f64, seed: u64) -> Result<InflowBoundary> {
    if !(spec.ti >= 0.0) || !(spec.mean >= 0.0) || !(spec.cutoff > 0.0) || !(spec.sample > 0.0) || !(spec.sample <= MAX_GAP) {
        return Err(FarmError::Config(format!("invalid synthetic inflow {spec:?}")));
    }
    let n = (duration / spec.sample).ceil() as usize + 1;
    let time: Vec<f64> = (0..n).map(|k| k as f64 * spec.sample).collect();
    let a = (-2.0 * std::f64::consts::PI * spec.cutoff * spec.sample).exp();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma = spec.ti * spec.mean;
    let mut comp = |s: f64, m: f64| -> Vec<f64> { ar1(&mut rng, n, a).into_iter().map(|z| m + s * z).collect() };
    let u = comp(sigma, spec.mean);
    let v = comp(spec.cross_ratio * sigma, 0.0);
    let w = comp(spec.cross_ratio * sigma, 0.0);
    InflowBoundary::new(time, u, v, w)
}

/// Synthetic regulation-signal parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthRegd {
    /// Correlation time of the underlying noise (s).
    pub time_constant: f64,
    /// Standard deviation of the raw signal before clipping to `[-1, 1]`.
    pub spread: f64,
    /// Sample spacing (s).
    pub sample: f64,
}

impl Default for SynthRegd {
    fn default() -> Self {
        Self {
            time_constant: 120.0,
            spread: 0.5,
            sample: 2.0,
        }
    }
}

/// RegD-like raw signal in `[-1, 1]`: smoothed Gaussian noise, clipped.
/// Returns `(time, value)`.
pub fn synth_regd(spec: &SynthRegd, duration: f64, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(spec.time_constant > 0.0) || !(spec.spread >= 0.0) || !(spec.sample > 0.0) {
        return Err(FarmError::Config(format!("invalid synthetic regulation signal {spec:?}")));
    }
    let n = (duration / spec.sample).ceil() as usize + 1;
    let time: Vec<f64> = (0..n).map(|k| k as f64 * spec.sample).collect();
    let a = (-spec.sample / spec.time_constant).exp();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // a second pass of the same filter rounds off the corners
    let raw = ar1(&mut rng, n, a);
    let mut smooth = Vec::with_capacity(n);
    let mut s = raw[0];
    for r in raw {
        s = a * s + (1.0 - a) * r;
        smooth.push(s);
    }
    let sd = (smooth.iter().map(|x| x * x).sum::<f64>() / n as f64).sqrt().max(1e-12);
    let value = smooth.iter().map(|x| (spec.spread * x / sd).clamp(-1.0, 1.0)).collect();
    Ok((time, value))
}
