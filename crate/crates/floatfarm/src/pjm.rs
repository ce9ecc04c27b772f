//! RegD-style performance scoring of a power response against its setpoint.
//!
//! Scores follow the usual three-part recipe: a precision score over the whole
//! test, and per five-minute interval a delay score and a correlation score
//! evaluated at the response shift that maximizes their sum.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{FarmError, Result};

/// Scoring sample period (s).
pub const SAMPLE_PERIOD: f64 = 10.0;
/// Interval length and maximum response delay `T_W` (s).
pub const WINDOW: f64 = 300.0;
/// Samples per interval.
pub const WINDOW_SAMPLES: usize = 30;
/// Composite score needed to qualify.
pub const PASS_THRESHOLD: f64 = 0.75;
/// Shortest certification test (s).
pub const CERTIFICATION_DURATION: f64 = 2400.0;

/// Generated power and setpoint sampled every [`SAMPLE_PERIOD`] seconds (MW).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerPair {
    /// Time of the first sample (s).
    pub start: f64,
    pub p_gen: Vec<f64>,
    pub p_sp: Vec<f64>,
}

impl PowerPair {
    pub fn new(start: f64, p_gen: Vec<f64>, p_sp: Vec<f64>) -> Result<Self> {
        if p_gen.len() != p_sp.len() {
            return Err(FarmError::Dimension {
                expected: p_sp.len(),
                got: p_gen.len(),
            });
        }
        if p_gen.is_empty() {
            return Err(FarmError::Data("power pair has no samples".into()));
        }
        if p_gen.iter().chain(&p_sp).any(|v| !v.is_finite()) {
            return Err(FarmError::Data("power pair contains non-finite samples".into()));
        }
        Ok(Self { start, p_gen, p_sp })
    }

    pub fn len(&self) -> usize {
        self.p_gen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p_gen.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.len() as f64 * SAMPLE_PERIOD
    }

    pub fn meets_certification_length(&self) -> bool {
        self.duration() >= CERTIFICATION_DURATION
    }

    /// Bins raw series onto the scoring grid by averaging every sample in
    /// `[start + 10k, start + 10(k+1))`, for as many whole bins as fit
    /// before `end`.
    pub fn from_raw(times: &[f64], p_gen: &[f64], p_sp: &[f64], start: f64, end: f64) -> Result<Self> {
        let gen = resample_mean(times, p_gen, start, end, SAMPLE_PERIOD)?;
        let sp = resample_mean(times, p_sp, start, end, SAMPLE_PERIOD)?;
        Self::new(start, gen, sp)
    }

    /// Reads `time_s,p_gen_mw,p_sp_mw`; rows must be spaced by exactly 10 s.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let headers = rdr.headers()?.clone();
        if headers.iter().map(str::trim).ne(["time_s", "p_gen_mw", "p_sp_mw"]) {
            return Err(FarmError::Data(format!(
                "power CSV header must be `time_s,p_gen_mw,p_sp_mw`, got `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let (mut t, mut gen, mut sp) = (Vec::new(), Vec::new(), Vec::new());
        for rec in rdr.records() {
            let rec = rec?;
            let field = |i: usize| -> Result<f64> {
                rec.get(i)
                    .unwrap_or("")
                    .trim()
                    .parse()
                    .map_err(|e| FarmError::Data(format!("bad value on line {}: {e}", rec.position().map_or(0, |p| p.line()))))
            };
            t.push(field(0)?);
            gen.push(field(1)?);
            sp.push(field(2)?);
        }
        for (k, w) in t.windows(2).enumerate() {
            if ((w[1] - w[0]) - SAMPLE_PERIOD).abs() > 1e-6 {
                return Err(FarmError::Data(format!(
                    "samples {k} and {} are {} s apart; scoring needs a {SAMPLE_PERIOD} s grid",
                    k + 1,
                    w[1] - w[0]
                )));
            }
        }
        Self::new(t.first().copied().unwrap_or(0.0), gen, sp)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| FarmError::io(path, e))?;
        Self::read_csv(f).map_err(|e| e.context(format!("reading {}", path.display())))
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["time_s", "p_gen_mw", "p_sp_mw"])?;
        for (k, (g, s)) in self.p_gen.iter().zip(&self.p_sp).enumerate() {
            let t = self.start + k as f64 * SAMPLE_PERIOD;
            wtr.write_record([t.to_string(), g.to_string(), s.to_string()])?;
        }
        wtr.flush().map_err(|e| FarmError::io("<power csv>", e))?;
        Ok(())
    }
}

/// Mean of `values` over consecutive bins of width `period` starting at `start`.
/// Only whole bins ending at or before `end` are produced; an empty bin is an
/// error.
pub fn resample_mean(times: &[f64], values: &[f64], start: f64, end: f64, period: f64) -> Result<Vec<f64>> {
    if times.len() != values.len() {
        return Err(FarmError::Dimension {
            expected: times.len(),
            got: values.len(),
        });
    }
    if !(period > 0.0) || !(end > start) {
        return Err(FarmError::Domain(format!("cannot bin [{start}, {end}) at {period} s")));
    }
    let n = ((end - start) / period + 1e-9).floor() as usize;
    let mut sum = vec![0.0; n];
    let mut count = vec![0usize; n];
    for (&t, &v) in times.iter().zip(values) {
        if t < start {
            continue;
        }
        let k = ((t - start) / period + 1e-9).floor() as usize;
        if k >= n {
            continue;
        }
        sum[k] += v;
        count[k] += 1;
    }
    sum.iter()
        .zip(&count)
        .enumerate()
        .map(|(k, (&s, &c))| {
            if c == 0 {
                Err(FarmError::Data(format!("no samples in scoring bin starting at {} s", start + k as f64 * period)))
            } else {
                Ok(s / c as f64)
            }
        })
        .collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// `1 - mean(|P_gen - P_sp|) / mean(P_sp)` over the whole test.
pub fn precision_score(pair: &PowerPair) -> Result<f64> {
    let m = mean(&pair.p_sp);
    if m == 0.0 {
        return Err(FarmError::Domain("precision score needs a setpoint with nonzero mean".into()));
    }
    let err = pair.p_gen.iter().zip(&pair.p_sp).map(|(g, s)| (g - s).abs()).sum::<f64>() / pair.len() as f64;
    Ok(1.0 - err / m)
}

/// `|delta - T_W| / T_W` for `delta` in `[0, T_W]` seconds.
pub fn delay_score(delta: f64) -> Result<f64> {
    if !(0.0..=WINDOW).contains(&delta) {
        return Err(FarmError::Domain(format!("delay {delta} s outside [0, {WINDOW}] s")));
    }
    Ok(((delta - WINDOW) / WINDOW).abs())
}

/// Pearson correlation with population normalization.
pub fn correlation_score(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(FarmError::Dimension {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.is_empty() {
        return Err(FarmError::Data("correlation of empty series".into()));
    }
    let (mx, my) = (mean(x), mean(y));
    let n = x.len() as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    // bin averages of a constant carry last-bit noise; treat that as flat
    let flat = |ss: f64, m: f64| ss <= n * (1e-12 * m).powi(2);
    if flat(sxx, mx) {
        return Err(FarmError::ZeroVariance { series: "x" });
    }
    if flat(syy, my) {
        return Err(FarmError::ZeroVariance { series: "y" });
    }
    let r = (sxy / n) / ((sxx / n).sqrt() * (syy / n).sqrt());
    Ok(r.clamp(-1.0, 1.0))
}

/// Best response shift for one interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelaySearch {
    /// Shift `delta*` (s).
    pub delta: f64,
    pub s_d: f64,
    pub s_c: f64,
    /// Some shifts ran past the end of the data and were skipped.
    pub tail: bool,
    /// A window had zero variance; its correlation was scored as 0.
    pub zero_variance: bool,
}

/// Scans `delta = 0, 10, ..., 300` s for the interval starting at sample
/// `first`. The setpoint window is fixed and the response window is shifted
/// later by `delta`. Ties go to the smaller shift.
pub fn find_delta_star(pair: &PowerPair, first: usize) -> Result<DelaySearch> {
    let last = first + WINDOW_SAMPLES;
    if last > pair.len() {
        return Err(FarmError::Domain(format!(
            "interval at sample {first} needs {WINDOW_SAMPLES} samples, only {} remain",
            pair.len().saturating_sub(first)
        )));
    }
    let sp = &pair.p_sp[first..last];
    let mut best: Option<DelaySearch> = None;
    let (mut tail, mut zero_variance) = (false, false);
    for m in 0..=WINDOW_SAMPLES {
        if last + m > pair.len() {
            tail = true;
            break;
        }
        let delta = m as f64 * SAMPLE_PERIOD;
        let s_d = delay_score(delta)?;
        let s_c = match correlation_score(&pair.p_gen[first + m..last + m], sp) {
            Ok(c) => c,
            Err(FarmError::ZeroVariance { .. }) => {
                zero_variance = true;
                0.0
            }
            Err(e) => return Err(e),
        };
        if best.is_none_or(|b| s_d + s_c > b.s_d + b.s_c) {
            best = Some(DelaySearch {
                delta,
                s_d,
                s_c,
                tail: false,
                zero_variance: false,
            });
        }
    }
    let mut out = best.expect("the zero shift always fits");
    out.tail = tail;
    out.zero_variance = zero_variance;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalScore {
    pub index: usize,
    /// Interval start time (s).
    pub start: f64,
    pub delta: f64,
    pub s_d: f64,
    pub s_c: f64,
    pub s_p: f64,
    /// `(S_D + S_C + S_P) / 3`, unclamped.
    pub score: f64,
    pub tail: bool,
    pub zero_variance: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scorecard {
    pub precision: f64,
    pub intervals: Vec<IntervalScore>,
    /// Mean of the unclamped interval scores.
    pub composite_raw: f64,
    /// Mean of interval scores clamped to `[0, 1]`.
    pub composite: f64,
    pub pass: bool,
    /// Samples after the last whole interval, not scored.
    pub unscored_samples: usize,
}

/// Scores every whole five-minute interval and averages them.
pub fn composite_score(pair: &PowerPair) -> Result<Scorecard> {
    let s_p = precision_score(pair)?;
    let n = pair.len() / WINDOW_SAMPLES;
    if n == 0 {
        return Err(FarmError::Data(format!(
            "{} s of data is shorter than one {WINDOW} s interval",
            pair.duration()
        )));
    }
    let intervals = (0..n)
        .map(|k| {
            let first = k * WINDOW_SAMPLES;
            let d = find_delta_star(pair, first)?;
            Ok(IntervalScore {
                index: k,
                start: pair.start + first as f64 * SAMPLE_PERIOD,
                delta: d.delta,
                s_d: d.s_d,
                s_c: d.s_c,
                s_p,
                score: (d.s_d + d.s_c + s_p) / 3.0,
                tail: d.tail,
                zero_variance: d.zero_variance,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let composite_raw = intervals.iter().map(|i| i.score).sum::<f64>() / n as f64;
    let composite = intervals.iter().map(|i| i.score.clamp(0.0, 1.0)).sum::<f64>() / n as f64;
    Ok(Scorecard {
        precision: s_p,
        intervals,
        composite_raw,
        composite,
        pass: composite >= PASS_THRESHOLD,
        unscored_samples: pair.len() - n * WINDOW_SAMPLES,
    })
}

impl Scorecard {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_intervals_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        for i in &self.intervals {
            wtr.serialize(i)?;
        }
        wtr.flush().map_err(|e| FarmError::io("<scorecard csv>", e))?;
        Ok(())
    }
}

/// Maps a raw signal in `[-1, 1]` to `mean + amplitude * raw` (MW). Values
/// outside the range are clipped with a warning.
pub fn normalize_regd_signal(raw: &[f64], amplitude: f64, mean: f64) -> Vec<f64> {
    let clipped = raw.iter().filter(|r| r.abs() > 1.0).count();
    if clipped > 0 {
        log::warn!("{clipped} regulation samples outside [-1, 1] were clipped");
    }
    raw.iter().map(|r| mean + amplitude * r.clamp(-1.0, 1.0)).collect()
}

/// Raw regulation signal as read from `time_s,value`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegdSignal {
    pub time: Vec<f64>,
    pub value: Vec<f64>,
}

impl RegdSignal {
    pub fn new(time: Vec<f64>, value: Vec<f64>) -> Result<Self> {
        if time.len() != value.len() || time.is_empty() {
            return Err(FarmError::Data("regulation signal needs matching, non-empty time and value columns".into()));
        }
        if time.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(FarmError::Data("regulation signal time must be strictly increasing".into()));
        }
        Ok(Self { time, value })
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let (mut t, mut v) = (Vec::new(), Vec::new());
        for rec in rdr.deserialize() {
            let (time_s, value): (f64, f64) = rec?;
            t.push(time_s);
            v.push(value);
        }
        Self::new(t, v)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| FarmError::io(path, e))?;
        Self::read_csv(f).map_err(|e| e.context(format!("reading {}", path.display())))
    }

    /// Linear interpolation, held constant beyond either end.
    pub fn at(&self, t: f64) -> f64 {
        let k = self.time.partition_point(|&x| x <= t);
        if k == 0 {
            return self.value[0];
        }
        if k == self.time.len() {
            return self.value[k - 1];
        }
        let (t0, t1) = (self.time[k - 1], self.time[k]);
        let a = (t - t0) / (t1 - t0);
        self.value[k - 1] + a * (self.value[k] - self.value[k - 1])
    }
}
