//! Lag/lead embedding of (forcing, displacement) series into supervised rows,
//! contiguous 2:1:1 partitioning and z-score scaling.
//!
//! Row `t` has inputs `[y(t-1) … y(t-m), x(t) … x(t-m+1)]` and targets
//! `[y(t), y(t+1) … y(t+L)]` for `m` lags and `L` leads.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::ops::Range;
use std::path::Path;

use crate::error::{NarxError, Result};
use crate::matrix::Matrix;
use crate::series::{fmt_f64, mean, variance, TimeSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EmbeddingSpec {
    pub n_lags: usize,
    /// Zero for a single-task network.
    pub n_leads: usize,
}

impl Default for EmbeddingSpec {
    fn default() -> Self {
        Self {
            n_lags: 5,
            n_leads: 0,
        }
    }
}

impl EmbeddingSpec {
    pub fn new(n_lags: usize, n_leads: usize) -> Result<Self> {
        let spec = Self { n_lags, n_leads };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_lags == 0 {
            return Err(NarxError::config("embedding.n_lags", "must be >= 1"));
        }
        Ok(())
    }

    pub fn input_width(&self) -> usize {
        2 * self.n_lags
    }

    pub fn target_width(&self) -> usize {
        1 + self.n_leads
    }

    pub fn is_single_task(&self) -> bool {
        self.n_leads == 0
    }

    pub fn min_series_len(&self) -> usize {
        self.n_lags + self.n_leads + 1
    }

    /// Fill `out` with the input row for time `t`.
    #[inline]
    pub fn fill_inputs(&self, x: &[f64], y: &[f64], t: usize, out: &mut [f64]) {
        let m = self.n_lags;
        for k in 0..m {
            out[k] = y[t - 1 - k];
            out[m + k] = x[t - k];
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub train: Range<usize>,
    pub validation: Range<usize>,
    pub test: Range<usize>,
}

impl Partition {
    /// Contiguous split of `n_rows` in ratio 2:1:1. Training takes
    /// `ceil(n/2)`, validation `floor` of the remainder's half, test the rest.
    pub fn two_one_one(n_rows: usize) -> Result<Self> {
        if n_rows < 8 {
            return Err(NarxError::config(
                "dataset",
                format!("need at least 8 rows for a 2:1:1 split, got {n_rows}"),
            ));
        }
        let n_train = n_rows.div_ceil(2);
        let n_val = (n_rows - n_train) / 2;
        Ok(Self {
            train: 0..n_train,
            validation: n_train..n_train + n_val,
            test: n_train + n_val..n_rows,
        })
    }

    pub fn get(&self, split: Split) -> Range<usize> {
        match split {
            Split::Train => self.train.clone(),
            Split::Validation => self.validation.clone(),
            Split::Test => self.test.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Force,
    Response,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub mean: f64,
    pub std: f64,
}

impl ChannelStats {
    pub fn fit(values: &[f64], name: &str) -> Result<Self> {
        let std = variance(values).sqrt();
        if !(std > 0.0 && std.is_finite()) {
            return Err(NarxError::config(
                format!("scaler.{name}"),
                "channel is constant on the training rows",
            ));
        }
        Ok(Self {
            mean: mean(values),
            std,
        })
    }

    #[inline]
    pub fn scale(&self, v: f64) -> f64 {
        (v - self.mean) / self.std
    }

    #[inline]
    pub fn unscale(&self, v: f64) -> f64 {
        v * self.std + self.mean
    }
}

/// Z-score statistics for the two physical channels, fitted on training rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalerStats {
    pub force: ChannelStats,
    pub response: ChannelStats,
}

impl ScalerStats {
    pub fn identity() -> Self {
        let unit = ChannelStats {
            mean: 0.0,
            std: 1.0,
        };
        Self {
            force: unit,
            response: unit,
        }
    }

    pub fn channel(&self, channel: Channel) -> &ChannelStats {
        match channel {
            Channel::Force => &self.force,
            Channel::Response => &self.response,
        }
    }

    /// Scale an input row in place (first half displacement lags, second half forcing).
    #[inline]
    pub fn scale_inputs(&self, row: &mut [f64]) {
        let m = row.len() / 2;
        for v in &mut row[..m] {
            *v = self.response.scale(*v);
        }
        for v in &mut row[m..] {
            *v = self.force.scale(*v);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NarxDataset {
    pub embedding: EmbeddingSpec,
    /// `n_rows × 2·n_lags`
    pub inputs: Matrix,
    /// `n_rows × (1 + n_leads)`
    pub targets: Matrix,
    /// Source sample index `t` of each row.
    pub row_times: Vec<usize>,
    pub partition: Option<Partition>,
    /// Set once the rows have been standardised.
    pub scaler: Option<ScalerStats>,
}

pub fn build_windows(x: &TimeSeries, y: &TimeSeries, spec: &EmbeddingSpec) -> Result<NarxDataset> {
    spec.validate()?;
    if x.len() != y.len() {
        return Err(NarxError::config(
            "series",
            format!("length mismatch: x has {}, y has {}", x.len(), y.len()),
        ));
    }
    let n = x.len();
    if n < spec.min_series_len() {
        return Err(NarxError::config(
            "series",
            format!(
                "series of length {n} too short; need at least {} samples",
                spec.min_series_len()
            ),
        ));
    }
    let (xv, yv) = (x.values(), y.values());
    let row_times: Vec<usize> = (spec.n_lags..n - spec.n_leads).collect();
    let mut inputs = Matrix::zeros(row_times.len(), spec.input_width());
    let mut targets = Matrix::zeros(row_times.len(), spec.target_width());
    for (r, &t) in row_times.iter().enumerate() {
        spec.fill_inputs(xv, yv, t, inputs.row_mut(r));
        targets.row_mut(r).copy_from_slice(&yv[t..=t + spec.n_leads]);
    }
    Ok(NarxDataset {
        embedding: *spec,
        inputs,
        targets,
        row_times,
        partition: None,
        scaler: None,
    })
}

pub fn split_2_1_1(mut ds: NarxDataset) -> Result<NarxDataset> {
    ds.partition = Some(Partition::two_one_one(ds.n_rows())?);
    Ok(ds)
}

/// Statistics of `y(t)` and `x(t)` over the training rows.
pub fn fit_scaler(ds: &NarxDataset) -> Result<ScalerStats> {
    let part = ds.partition.as_ref().ok_or_else(|| {
        NarxError::Data("dataset must be partitioned before fitting the scaler".into())
    })?;
    let m = ds.embedding.n_lags;
    let train = part.train.clone();
    let ys: Vec<f64> = train.clone().map(|r| ds.targets.get(r, 0)).collect();
    let xs: Vec<f64> = train.map(|r| ds.inputs.get(r, m)).collect();
    Ok(ScalerStats {
        force: ChannelStats::fit(&xs, "force")?,
        response: ChannelStats::fit(&ys, "response")?,
    })
}

pub fn apply_scaler(ds: &NarxDataset, stats: &ScalerStats) -> Result<NarxDataset> {
    if ds.scaler.is_some() {
        return Err(NarxError::Data("dataset is already scaled".into()));
    }
    let mut out = ds.clone();
    for r in 0..out.n_rows() {
        stats.scale_inputs(out.inputs.row_mut(r));
    }
    for v in out.targets.data_mut() {
        *v = stats.response.scale(*v);
    }
    out.scaler = Some(*stats);
    Ok(out)
}

pub fn invert_scaler(values: &[f64], stats: &ScalerStats, channel: Channel) -> Vec<f64> {
    let c = stats.channel(channel);
    values.iter().map(|&v| c.unscale(v)).collect()
}

/// Embed, split 2:1:1 and standardise in one go.
pub fn prepare(x: &TimeSeries, y: &TimeSeries, spec: &EmbeddingSpec) -> Result<NarxDataset> {
    let ds = split_2_1_1(build_windows(x, y, spec)?)?;
    let stats = fit_scaler(&ds)?;
    apply_scaler(&ds, &stats)
}

/// JSON sidecar written next to a dataset CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetSidecar {
    pub embedding: EmbeddingSpec,
    pub n_rows: usize,
    pub partition: Option<Partition>,
    pub scaler: Option<ScalerStats>,
    /// Whether the CSV values are standardised.
    pub scaled: bool,
}

impl NarxDataset {
    pub fn n_rows(&self) -> usize {
        self.row_times.len()
    }

    pub fn split_rows(&self, split: Split) -> Result<(Matrix, Matrix)> {
        let part = self
            .partition
            .as_ref()
            .ok_or_else(|| NarxError::Data("dataset is not partitioned".into()))?;
        let r = part.get(split);
        Ok((
            self.inputs.slice_rows(r.start, r.end),
            self.targets.slice_rows(r.start, r.end),
        ))
    }

    /// Source sample indices covered by a split's rows.
    pub fn split_times(&self, split: Split) -> Result<Range<usize>> {
        let part = self
            .partition
            .as_ref()
            .ok_or_else(|| NarxError::Data("dataset is not partitioned".into()))?;
        let r = part.get(split);
        if r.is_empty() {
            return Ok(0..0);
        }
        Ok(self.row_times[r.start]..self.row_times[r.end - 1] + 1)
    }

    pub fn to_csv(&self) -> String {
        let m = self.embedding.n_lags;
        let mut out = String::new();
        out.push_str("row_time,split");
        for k in 1..=m {
            let _ = write!(out, ",y_t-{k}");
        }
        for k in 0..m {
            if k == 0 {
                out.push_str(",x_t");
            } else {
                let _ = write!(out, ",x_t-{k}");
            }
        }
        out.push_str(",y_t");
        for k in 1..=self.embedding.n_leads {
            let _ = write!(out, ",y_t+{k}");
        }
        out.push('\n');
        for r in 0..self.n_rows() {
            let split = self
                .partition
                .as_ref()
                .map(|p| {
                    if p.train.contains(&r) {
                        "train"
                    } else if p.validation.contains(&r) {
                        "validation"
                    } else {
                        "test"
                    }
                })
                .unwrap_or("none");
            let _ = write!(out, "{},{split}", self.row_times[r]);
            for v in self.inputs.row(r).iter().chain(self.targets.row(r)) {
                let _ = write!(out, ",{}", fmt_f64(*v));
            }
            out.push('\n');
        }
        out
    }

    pub fn sidecar(&self) -> DatasetSidecar {
        DatasetSidecar {
            embedding: self.embedding,
            n_rows: self.n_rows(),
            partition: self.partition.clone(),
            scaler: self.scaler,
            scaled: self.scaler.is_some(),
        }
    }

    /// Write `<stem>.csv` and `<stem>.json`.
    pub fn write(&self, dir: impl AsRef<Path>, stem: &str) -> Result<()> {
        let dir = dir.as_ref();
        let csv = dir.join(format!("{stem}.csv"));
        std::fs::write(&csv, self.to_csv()).map_err(|e| NarxError::io(&csv, e))?;
        let json = dir.join(format!("{stem}.json"));
        let text = serde_json::to_string_pretty(&self.sidecar())?;
        std::fs::write(&json, text).map_err(|e| NarxError::io(&json, e))
    }
}
