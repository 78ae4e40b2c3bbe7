//! Uniformly sampled scalar signals and their two-column CSV form.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{NarxError, Result};

/// A uniformly sampled, finite, non-empty scalar signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    dt: f64,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(dt: f64, values: Vec<f64>) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(NarxError::config("dt", format!("must be > 0, got {dt}")));
        }
        if values.is_empty() {
            return Err(NarxError::Data("time series must be non-empty".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(NarxError::Data(format!(
                "time series value at index {i} is not finite"
            )));
        }
        Ok(Self { dt, values })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sample_rate(&self) -> f64 {
        1.0 / self.dt
    }

    /// Same sample interval, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.dt, values)
    }

    /// Render as `time_s,value` CSV with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.values.len() * 48 + 16);
        out.push_str("time_s,value\n");
        for (i, v) in self.values.iter().enumerate() {
            let _ = writeln!(out, "{},{}", fmt_f64(i as f64 * self.dt), fmt_f64(*v));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == "time_s,value" => {}
            other => {
                return Err(NarxError::Data(format!(
                    "expected header `time_s,value`, found {other:?}"
                )))
            }
        }
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut cols = line.split(',');
            let (t, v) = match (cols.next(), cols.next(), cols.next()) {
                (Some(t), Some(v), None) => (t, v),
                _ => {
                    return Err(NarxError::Data(format!(
                        "line {}: expected two columns",
                        lineno + 2
                    )))
                }
            };
            let parse = |s: &str| {
                s.trim().parse::<f64>().map_err(|e| {
                    NarxError::Data(format!("line {}: cannot parse `{s}`: {e}", lineno + 2))
                })
            };
            times.push(parse(t)?);
            values.push(parse(v)?);
        }
        if values.len() < 2 {
            return Err(NarxError::Data(
                "series CSV needs at least two rows to recover dt".into(),
            ));
        }
        let dt = times[1] - times[0];
        Self::new(dt, values)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| NarxError::io(path, e))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| NarxError::io(path, e))?;
        Self::from_csv(&text)
    }
}

/// Fixed 17-significant-digit scientific formatting used by every CSV artifact.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "diverged".to_string()
    }
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population variance (divides by N).
pub(crate) fn variance(values: &[f64]) -> f64 {
    let mu = mean(values);
    values.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / values.len() as f64
}

pub(crate) fn rms(values: &[f64]) -> f64 {
    (values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64).sqrt()
}
