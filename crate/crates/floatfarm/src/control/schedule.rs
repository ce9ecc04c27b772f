use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{FarmError, Result};

/// Signals available to the Region-3 state feedback.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackSignal {
    Surge,
    Pitch,
    SurgeRate,
    PitchRate,
    /// `omega_r - omega_c`
    SpeedError,
}

impl FeedbackSignal {
    pub fn name(self) -> &'static str {
        match self {
            Self::Surge => "surge",
            Self::Pitch => "pitch",
            Self::SurgeRate => "surge_rate",
            Self::PitchRate => "pitch_rate",
            Self::SpeedError => "speed_error",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "surge" => Self::Surge,
            "pitch" => Self::Pitch,
            "surge_rate" => Self::SurgeRate,
            "pitch_rate" => Self::PitchRate,
            "speed_error" => Self::SpeedError,
            other => return Err(FarmError::Data(format!("unknown feedback signal `{other}`"))),
        })
    }

    /// `[surge, pitch, surge_rate, pitch_rate, speed_error]`
    pub fn standard() -> Vec<Self> {
        vec![Self::Surge, Self::Pitch, Self::SurgeRate, Self::PitchRate, Self::SpeedError]
    }
}

/// Wind-scheduled Region-3 gains, linearly interpolated between breakpoints
/// and held constant beyond the ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region3Schedule {
    pub wind: Vec<f64>,
    pub k_i: Vec<f64>,
    pub k_x: Vec<Vec<f64>>,
    pub feedback: Vec<FeedbackSignal>,
}

impl Region3Schedule {
    pub fn new(wind: Vec<f64>, k_i: Vec<f64>, k_x: Vec<Vec<f64>>, feedback: Vec<FeedbackSignal>) -> Result<Self> {
        if wind.is_empty() {
            return Err(FarmError::Config("gain schedule needs at least one breakpoint".into()));
        }
        if k_i.len() != wind.len() || k_x.len() != wind.len() {
            return Err(FarmError::Dimension {
                expected: wind.len(),
                got: if k_i.len() != wind.len() { k_i.len() } else { k_x.len() },
            });
        }
        if let Some(bad) = k_x.iter().find(|r| r.len() != feedback.len()) {
            return Err(FarmError::Dimension {
                expected: feedback.len(),
                got: bad.len(),
            });
        }
        if wind.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(FarmError::Config("schedule breakpoints must be strictly increasing".into()));
        }
        if wind.iter().chain(&k_i).chain(k_x.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(FarmError::Config("schedule contains non-finite values".into()));
        }
        Ok(Self { wind, k_i, k_x, feedback })
    }

    /// `(K_Ib, K_x)` at wind speed `u`.
    pub fn gains_at(&self, u: f64) -> (f64, Vec<f64>) {
        let n = self.wind.len();
        let (i, t) = if n == 1 || !(u > self.wind[0]) {
            (0, 0.0)
        } else if u >= self.wind[n - 1] {
            (n - 2, 1.0)
        } else {
            let j = self.wind.partition_point(|&w| w <= u) - 1;
            (j, (u - self.wind[j]) / (self.wind[j + 1] - self.wind[j]))
        };
        if t == 0.0 {
            return (self.k_i[i], self.k_x[i].clone());
        }
        let lerp = |a: f64, b: f64| a + t * (b - a);
        let k_x = self.k_x[i].iter().zip(&self.k_x[i + 1]).map(|(&a, &b)| lerp(a, b)).collect();
        (lerp(self.k_i[i], self.k_i[i + 1]), k_x)
    }

    /// Reads the `wind,k_i,<signal>...` CSV layout.
    pub fn read_csv<R: std::io::Read>(rdr: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(rdr);
        let headers = r.headers()?.clone();
        if headers.len() < 2 || &headers[0] != "wind" || &headers[1] != "k_i" {
            return Err(FarmError::Data("gain schedule header must start with `wind,k_i`".into()));
        }
        let feedback = headers.iter().skip(2).map(FeedbackSignal::parse).collect::<Result<Vec<_>>>()?;
        let (mut wind, mut k_i, mut k_x) = (vec![], vec![], vec![]);
        for rec in r.records() {
            let rec = rec?;
            let vals = rec
                .iter()
                .map(|s| s.trim().parse::<f64>().map_err(|e| FarmError::Data(format!("bad number `{s}`: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            wind.push(vals[0]);
            k_i.push(vals[1]);
            k_x.push(vals[2..].to_vec());
        }
        Self::new(wind, k_i, k_x, feedback)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| FarmError::io(path, e))?;
        Self::read_csv(f)
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["wind".to_string(), "k_i".to_string()];
        header.extend(self.feedback.iter().map(|f| f.name().to_string()));
        wr.write_record(&header)?;
        for i in 0..self.wind.len() {
            let mut row = vec![format!("{:e}", self.wind[i]), format!("{:e}", self.k_i[i])];
            row.extend(self.k_x[i].iter().map(|v| format!("{v:e}")));
            wr.write_record(&row)?;
        }
        wr.flush().map_err(|e| FarmError::io("<csv>", e))?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| FarmError::io(path, e))?;
        self.write_csv(f)
    }
}
