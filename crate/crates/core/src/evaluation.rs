//! One-step-ahead and free-run (model-predicted output) prediction, NMSE and
//! fit classification.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::ops::Range;

use crate::dataset::{EmbeddingSpec, Partition, Split};
use crate::error::{NarxError, Result};
use crate::network::MlpModel;
use crate::series::{fmt_f64, variance, TimeSeries};

/// Normalised mean-square error in percent: `100/(N·σ²)·Σ(y−ŷ)²`, σ² the
/// population variance of `truth`.
pub fn nmse(truth: &[f64], pred: &[f64]) -> Result<f64> {
    if truth.len() != pred.len() || truth.is_empty() {
        return Err(NarxError::shape(
            format!("{} predictions (non-empty)", truth.len()),
            pred.len(),
        ));
    }
    let var = variance(truth);
    if !(var > 0.0) {
        return Err(NarxError::UndefinedMetric(
            "NMSE is undefined for a constant reference".into(),
        ));
    }
    let sse: f64 = truth.iter().zip(pred).map(|(y, p)| (y - p) * (y - p)).sum();
    Ok(100.0 * sse / (truth.len() as f64 * var))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitClass {
    Excellent,
    Good,
    Poor,
}

impl FitClass {
    /// `< 1` excellent, `[1, 5)` good, otherwise poor.
    pub fn from_nmse(nmse: f64) -> Self {
        if nmse < 1.0 {
            FitClass::Excellent
        } else if nmse < 5.0 {
            FitClass::Good
        } else {
            FitClass::Poor
        }
    }
}

fn narx_embedding(model: &MlpModel) -> Result<EmbeddingSpec> {
    model
        .embedding
        .ok_or_else(|| NarxError::config("model.embedding", "model has no NARX embedding"))
}

fn check_range(emb: &EmbeddingSpec, x: &TimeSeries, y: &TimeSeries, range: &Range<usize>) -> Result<()> {
    if x.len() != y.len() {
        return Err(NarxError::config("series", "forcing and response lengths differ"));
    }
    if range.is_empty() {
        return Ok(());
    }
    if range.start < emb.n_lags || range.end > x.len() {
        return Err(NarxError::config(
            "range",
            format!(
                "{range:?} must lie within [{}, {}) to leave room for {} lags",
                emb.n_lags,
                x.len(),
                emb.n_lags
            ),
        ));
    }
    Ok(())
}

/// Predict `y(t)` for each `t` in `range` from measured lags and forcing.
pub fn predict_osa(model: &MlpModel, x: &TimeSeries, y: &TimeSeries, range: Range<usize>) -> Result<Vec<f64>> {
    let emb = narx_embedding(model)?;
    check_range(&emb, x, y, &range)?;
    let (xv, yv) = (x.values(), y.values());
    let mut row = vec![0.0; emb.input_width()];
    let mut hidden = vec![0.0; model.layout.n_hidden];
    let mut out = vec![0.0; model.layout.n_outputs];
    let mut preds = Vec::with_capacity(range.len());
    for t in range {
        emb.fill_inputs(xv, yv, t, &mut row);
        model.scaler.scale_inputs(&mut row);
        model.forward_row(&row, &mut hidden, &mut out);
        preds.push(model.scaler.response.unscale(out[0]));
    }
    Ok(preds)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpoPrediction {
    /// Predictions over the range; `NaN` from the blow-up step onward.
    pub values: Vec<f64>,
    /// Offset into the range of the first non-finite prediction.
    pub diverged_at: Option<usize>,
}

/// Free-run prediction: lags start from the measured `y` just before
/// `range`, then only the model's own first-output predictions are fed back.
/// Forcing is always taken from `x`.
pub fn predict_mpo(model: &MlpModel, x: &TimeSeries, y: &TimeSeries, range: Range<usize>) -> Result<MpoPrediction> {
    let emb = narx_embedding(model)?;
    check_range(&emb, x, y, &range)?;
    let xv = x.values();
    let start = range.start;
    // Buffer holds measured values before `start` and predictions from `start` on.
    let mut buf = y.values()[..range.end.max(start)].to_vec();
    let mut row = vec![0.0; emb.input_width()];
    let mut hidden = vec![0.0; model.layout.n_hidden];
    let mut out = vec![0.0; model.layout.n_outputs];
    let mut values = Vec::with_capacity(range.len());
    let mut diverged_at = None;
    for t in range {
        emb.fill_inputs(xv, &buf, t, &mut row);
        model.scaler.scale_inputs(&mut row);
        model.forward_row(&row, &mut hidden, &mut out);
        let p = model.scaler.response.unscale(out[0]);
        if !p.is_finite() {
            diverged_at = Some(t - start);
            values.resize(buf.len() - start, f64::NAN);
            break;
        }
        buf[t] = p;
        values.push(p);
    }
    Ok(MpoPrediction { values, diverged_at })
}

/// Source-sample range of a split for a given embedding over `n_samples`.
pub fn split_time_range(emb: &EmbeddingSpec, n_samples: usize, split: Split) -> Result<Range<usize>> {
    if n_samples < emb.min_series_len() {
        return Err(NarxError::config("series", "too short for the embedding"));
    }
    let n_rows = n_samples - emb.n_lags - emb.n_leads;
    let rows = Partition::two_one_one(n_rows)?.get(split);
    Ok(emb.n_lags + rows.start..emb.n_lags + rows.end)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reference {
    NoisyTargets,
    CleanTargets,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub osa_nmse: f64,
    /// `None` when the free run diverged.
    pub mpo_nmse: Option<f64>,
    pub reference: Reference,
    pub partition: Split,
    pub fit_class: FitClass,
    /// First source-sample index of the predicted series.
    pub start_index: usize,
    /// Free-run predictions over the partition.
    pub predicted_series: Vec<f64>,
}

impl EvalReport {
    pub fn diverged(&self) -> bool {
        self.mpo_nmse.is_none()
    }
}

/// Measured and reference series for one experiment.
#[derive(Debug, Clone, Copy)]
pub struct SeriesPair<'a> {
    pub x: &'a TimeSeries,
    pub y: &'a TimeSeries,
}

/// Reports against noisy (operational) and clean truth. Both OSA and MPO are
/// driven by the noisy measurements.
pub fn evaluate(
    model: &MlpModel,
    clean: SeriesPair<'_>,
    noisy: SeriesPair<'_>,
    split: Split,
) -> Result<(EvalReport, EvalReport)> {
    let emb = narx_embedding(model)?;
    if clean.y.len() != noisy.y.len() {
        return Err(NarxError::config("series", "clean and noisy lengths differ"));
    }
    let range = split_time_range(&emb, noisy.y.len(), split)?;
    let osa = predict_osa(model, noisy.x, noisy.y, range.clone())?;
    let mpo = predict_mpo(model, noisy.x, noisy.y, range.clone())?;
    let report = |truth: &TimeSeries, reference| -> Result<EvalReport> {
        let t = &truth.values()[range.clone()];
        let osa_nmse = nmse(t, &osa)?;
        let mpo_nmse = match mpo.diverged_at {
            Some(_) => None,
            None => Some(nmse(t, &mpo.values)?),
        };
        Ok(EvalReport {
            osa_nmse,
            mpo_nmse,
            reference,
            partition: split,
            fit_class: mpo_nmse.map_or(FitClass::Poor, FitClass::from_nmse),
            start_index: range.start,
            predicted_series: mpo.values.clone(),
        })
    };
    Ok((
        report(noisy.y, Reference::NoisyTargets)?,
        report(clean.y, Reference::CleanTargets)?,
    ))
}

/// `time_s,truth_clean,truth_noisy,prediction` rows for a report's range.
pub fn predictions_csv(report: &EvalReport, clean_y: &TimeSeries, noisy_y: &TimeSeries) -> String {
    let dt = clean_y.dt();
    let mut out = String::from("time_s,truth_clean,truth_noisy,prediction\n");
    for (i, p) in report.predicted_series.iter().enumerate() {
        let t = report.start_index + i;
        let _ = writeln!(
            out,
            "{},{},{},{}",
            fmt_f64(t as f64 * dt),
            fmt_f64(clean_y.values()[t]),
            fmt_f64(noisy_y.values()[t]),
            fmt_f64(*p)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{ChannelStats, ScalerStats};
    use crate::matrix::Matrix;

    /// `y_t = φ·y_{t-1} + β·x_t` realised with one tanh unit in its linear
    /// regime: the unit computes tanh(s·u) and the output divides by s.
    fn ar1_model(phi: f64, beta: f64) -> MlpModel {
        let s = 1e-9;
        let w1 = Matrix::from_rows(&[vec![s * phi, s * beta]]);
        let w2 = Matrix::from_rows(&[vec![1.0 / s]]);
        MlpModel::from_parts(&w1, &[0.0], &w2, &[0.0])
            .unwrap()
            .with_narx(EmbeddingSpec::new(1, 0).unwrap(), ScalerStats::identity())
            .unwrap()
    }

    fn ts(v: Vec<f64>) -> TimeSeries {
        TimeSeries::new(0.002, v).unwrap()
    }

    #[test]
    fn nmse_identities() {
        let y = [0.3, -1.2, 2.0, 0.7, -0.1];
        assert_eq!(nmse(&y, &y).unwrap(), 0.0);
        let mu = y.iter().sum::<f64>() / y.len() as f64;
        assert!((nmse(&y, &[mu; 5]).unwrap() - 100.0).abs() < 1e-10);
        assert!((nmse(&[0.0, 2.0], &[1.0, 1.0]).unwrap() - 100.0).abs() < 1e-12);
        assert!(matches!(nmse(&[1.0, 1.0], &[1.0, 2.0]), Err(NarxError::UndefinedMetric(_))));
        assert!(nmse(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn fit_class_boundaries() {
        assert_eq!(FitClass::from_nmse(0.999), FitClass::Excellent);
        assert_eq!(FitClass::from_nmse(1.0), FitClass::Good);
        assert_eq!(FitClass::from_nmse(4.999), FitClass::Good);
        assert_eq!(FitClass::from_nmse(5.0), FitClass::Poor);
    }

    #[test]
    fn exact_ar1_free_run() {
        let model = ar1_model(0.5, 0.0);
        let n = 120;
        let y: Vec<f64> = (0..n).map(|t| 0.5f64.powi(t as i32)).collect();
        let x = ts(vec![0.0; n]);
        let yv = ts(y.clone());
        let mpo = predict_mpo(&model, &x, &yv, 1..n).unwrap();
        assert!(mpo.diverged_at.is_none());
        for (i, p) in mpo.values.iter().enumerate() {
            assert!((p - y[i + 1]).abs() < 1e-10);
        }
    }

    #[test]
    fn exact_arx_osa() {
        let model = ar1_model(0.8, 0.3);
        let n = 200;
        let x: Vec<f64> = (0..n).map(|t| (t as f64 * 0.37).sin()).collect();
        let mut y = vec![0.0; n];
        for t in 1..n {
            y[t] = 0.8 * y[t - 1] + 0.3 * x[t];
        }
        let osa = predict_osa(&model, &ts(x), &ts(y.clone()), 1..n).unwrap();
        for (p, t) in osa.iter().zip(&y[1..]) {
            assert!((p - t).abs() < 1e-8);
        }
    }

    #[test]
    fn first_free_run_step_matches_osa() {
        let model = crate::network::init_model(6, 5, 3, 3)
            .unwrap()
            .with_narx(
                EmbeddingSpec::new(3, 2).unwrap(),
                ScalerStats {
                    force: ChannelStats { mean: 0.1, std: 2.0 },
                    response: ChannelStats { mean: -0.2, std: 0.5 },
                },
            )
            .unwrap();
        let x = ts((0..50).map(|t| (t as f64).sin()).collect());
        let y = ts((0..50).map(|t| (t as f64 * 0.3).cos()).collect());
        let osa = predict_osa(&model, &x, &y, 10..30).unwrap();
        let mpo = predict_mpo(&model, &x, &y, 10..30).unwrap();
        assert_eq!(osa[0].to_bits(), mpo.values[0].to_bits());
    }

    #[test]
    fn empty_ranges() {
        let model = ar1_model(0.5, 0.0);
        let x = ts(vec![0.0; 10]);
        assert!(predict_osa(&model, &x, &x, 5..5).unwrap().is_empty());
        assert!(predict_mpo(&model, &x, &x, 5..5).unwrap().values.is_empty());
    }

    #[test]
    fn out_of_range_rejected() {
        let model = ar1_model(0.5, 0.0);
        let x = ts(vec![0.0; 10]);
        assert!(predict_osa(&model, &x, &x, 0..5).is_err());
        assert!(predict_mpo(&model, &x, &x, 5..11).is_err());
    }

    #[test]
    fn zero_network_predicts_response_mean() {
        let mut model = crate::network::init_model(2, 3, 1, 0).unwrap();
        model.params.iter_mut().for_each(|p| *p = 0.0);
        let model = model
            .with_narx(
                EmbeddingSpec::new(1, 0).unwrap(),
                ScalerStats {
                    force: ChannelStats { mean: 0.0, std: 1.0 },
                    response: ChannelStats { mean: 3.5, std: 2.0 },
                },
            )
            .unwrap();
        let x = ts(vec![1.0; 8]);
        let osa = predict_osa(&model, &x, &x, 1..8).unwrap();
        assert!(osa.iter().all(|&v| v == 3.5));
    }

    #[test]
    fn nan_weights_flag_divergence() {
        let mut model = ar1_model(0.5, 0.0);
        model.params[3] = f64::NAN;
        let x = ts(vec![0.0; 10]);
        let y = ts((0..10).map(f64::from).collect());
        let mpo = predict_mpo(&model, &x, &y, 2..10).unwrap();
        assert_eq!(mpo.diverged_at, Some(0));
        assert_eq!(mpo.values.len(), 8);
        assert!(mpo.values.iter().all(|v| v.is_nan()));
    }

    #[test]
    fn split_ranges_follow_row_partition() {
        let emb = EmbeddingSpec::new(10, 0).unwrap();
        let r = split_time_range(&emb, 4000, Split::Test).unwrap();
        assert_eq!(r, 10 + 1995 + 997..4000);
        let emb = EmbeddingSpec::new(5, 3).unwrap();
        let r = split_time_range(&emb, 4000, Split::Train).unwrap();
        assert_eq!(r.start, 5);
        assert_eq!(r.len(), 1996);
    }

    #[test]
    fn evaluate_with_zero_noise_gives_equal_reports() {
        let model = ar1_model(0.8, 0.3);
        let n = 200;
        let x: Vec<f64> = (0..n).map(|t| (t as f64 * 0.37).sin()).collect();
        let mut y = vec![0.0; n];
        for t in 1..n {
            y[t] = 0.8 * y[t - 1] + 0.3 * x[t];
        }
        let (x, y) = (ts(x), ts(y));
        let pair = SeriesPair { x: &x, y: &y };
        let (noisy, clean) = evaluate(&model, pair, pair, Split::Test).unwrap();
        assert_eq!(noisy.osa_nmse, clean.osa_nmse);
        assert_eq!(noisy.mpo_nmse, clean.mpo_nmse);
        assert!(clean.mpo_nmse.unwrap() < 1e-12);
        assert_eq!(clean.fit_class, FitClass::Excellent);
        let csv = predictions_csv(&clean, &y, &y);
        assert_eq!(csv.lines().count(), 1 + clean.predicted_series.len());
    }
}
