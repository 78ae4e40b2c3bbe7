//! Python bindings: simulation, noise, training, evaluation and the
//! pipeline stages of `narx-core`.

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use std::path::PathBuf;

use narx_core::dataset::{prepare, EmbeddingSpec, Split};
use narx_core::evaluation::{self, SeriesPair};
use narx_core::network::{self, Architecture, MlpModel};
use narx_core::noise::{NoiseSpec, NoiseTrial};
use narx_core::oscillator;
use narx_core::pipeline::{self, RunDir};
use narx_core::{NarxError, TimeSeries};

create_exception!(narx_lab, NarxLabError, PyException);

fn to_py(e: NarxError) -> PyErr {
    NarxLabError::new_err(format!("{e} (exit code {})", e.exit_code()))
}

fn series(values: Vec<f64>, dt: f64) -> PyResult<TimeSeries> {
    TimeSeries::new(dt, values).map_err(to_py)
}

fn parse_split(name: &str) -> PyResult<Split> {
    match name {
        "train" => Ok(Split::Train),
        "validation" => Ok(Split::Validation),
        "test" => Ok(Split::Test),
        other => Err(NarxLabError::new_err(format!(
            "unknown split '{other}' (train, validation or test)"
        ))),
    }
}

/// Experiment configuration; see `narx-lab config` for the JSON layout.
#[pyclass(name = "ExperimentConfig", from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: pipeline::ExperimentConfig,
}

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (preset=None, json=None))]
    fn new(preset: Option<&str>, json: Option<&str>) -> PyResult<Self> {
        let inner = match (preset, json) {
            (Some(_), Some(_)) => return Err(NarxLabError::new_err("give preset or json, not both")),
            (Some(p), None) => pipeline::ExperimentConfig::preset(p),
            (None, Some(j)) => pipeline::ExperimentConfig::from_json(j),
            (None, None) => Ok(pipeline::ExperimentConfig::default()),
        }
        .map_err(to_py)?;
        Ok(Self { inner })
    }

    /// New config with `path=value` overrides applied.
    fn with_overrides(&self, overrides: Vec<String>) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.with_overrides(&overrides).map_err(to_py)?,
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn master_seed(&self) -> u64 {
        self.inner.master_seed
    }

    #[getter]
    fn trial(&self) -> u8 {
        self.inner.noise.trial.number()
    }

    #[getter]
    fn noise_fraction(&self) -> f64 {
        self.inner.noise.fraction
    }

    fn __repr__(&self) -> String {
        format!(
            "ExperimentConfig(trial={}, noise_fraction={}, master_seed={})",
            self.trial(),
            self.noise_fraction(),
            self.master_seed()
        )
    }
}

/// Trained NARX network.
#[pyclass(name = "Model", from_py_object)]
#[derive(Clone)]
struct PyModel {
    inner: MlpModel,
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let doc = serde_json::from_str(text).map_err(|e| to_py(e.into()))?;
        Ok(Self {
            inner: MlpModel::from_document(&doc).map_err(to_py)?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.inner.to_document(None, None)).map_err(|e| to_py(e.into()))
    }

    #[getter]
    fn n_params(&self) -> usize {
        self.inner.layout.n_params()
    }

    #[getter]
    fn n_hidden(&self) -> usize {
        self.inner.layout.n_hidden
    }

    #[getter]
    fn n_lags(&self) -> Option<usize> {
        self.inner.embedding.map(|e| e.n_lags)
    }

    #[getter]
    fn n_leads(&self) -> Option<usize> {
        self.inner.embedding.map(|e| e.n_leads)
    }

    /// One-step-ahead predictions of y[start..end] from measured lags.
    #[pyo3(signature = (x, y, start, end, dt=0.002))]
    fn predict_osa(&self, x: Vec<f64>, y: Vec<f64>, start: usize, end: usize, dt: f64) -> PyResult<Vec<f64>> {
        evaluation::predict_osa(&self.inner, &series(x, dt)?, &series(y, dt)?, start..end).map_err(to_py)
    }

    /// Free-run predictions of y[start..end]; NaN from a blow-up onward.
    #[pyo3(signature = (x, y, start, end, dt=0.002))]
    fn predict_mpo(&self, x: Vec<f64>, y: Vec<f64>, start: usize, end: usize, dt: f64) -> PyResult<Vec<f64>> {
        evaluation::predict_mpo(&self.inner, &series(x, dt)?, &series(y, dt)?, start..end)
            .map(|p| p.values)
            .map_err(to_py)
    }

    fn __repr__(&self) -> String {
        let l = self.inner.layout;
        format!("Model(inputs={}, hidden={}, outputs={})", l.n_inputs, l.n_hidden, l.n_outputs)
    }
}

/// Simulate the oscillator; returns (force, displacement) after the transient.
#[pyfunction]
#[pyo3(signature = (config=None))]
fn simulate(config: Option<PyConfig>) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let cfg = config.map(|c| c.inner).unwrap_or_default();
    let excitation = oscillator::generate_excitation(&cfg.excitation).map_err(to_py)?;
    let (x, y) = oscillator::simulate(&cfg.oscillator, &excitation, &cfg.simulation).map_err(to_py)?;
    Ok((x.into_values(), y.into_values()))
}

/// Add measurement noise. Trial 1 corrupts y, 2 corrupts x, 3 both.
#[pyfunction]
#[pyo3(signature = (x, y, trial, fraction, seed=0, dt=0.002))]
fn apply_noise(x: Vec<f64>, y: Vec<f64>, trial: u8, fraction: f64, seed: u64, dt: f64) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let spec = NoiseSpec {
        trial: NoiseTrial::from_number(trial).map_err(to_py)?,
        fraction,
        rng_seed: seed,
    };
    let (xn, yn) = narx_core::noise::apply_noise(&series(x, dt)?, &series(y, dt)?, &spec).map_err(to_py)?;
    Ok((xn.into_values(), yn.into_values()))
}

/// Normalised mean square error in percent.
#[pyfunction]
fn nmse(truth: Vec<f64>, pred: Vec<f64>) -> PyResult<f64> {
    evaluation::nmse(&truth, &pred).map_err(to_py)
}

/// Train one network on measured series with the config's optimiser settings.
/// Returns the model and a trace summary dict.
#[pyfunction]
#[pyo3(signature = (x, y, n_lags, n_leads, n_hidden, config=None, seed=None, dt=0.002))]
#[allow(clippy::too_many_arguments)]
fn train<'py>(
    py: Python<'py>,
    x: Vec<f64>,
    y: Vec<f64>,
    n_lags: usize,
    n_leads: usize,
    n_hidden: usize,
    config: Option<PyConfig>,
    seed: Option<u64>,
    dt: f64,
) -> PyResult<(PyModel, Bound<'py, PyDict>)> {
    let mut tc = config.map(|c| c.inner).unwrap_or_default().train;
    if let Some(s) = seed {
        tc.rng_seed = s;
    }
    let emb = EmbeddingSpec::new(n_lags, n_leads).map_err(to_py)?;
    let ds = prepare(&series(x, dt)?, &series(y, dt)?, &emb).map_err(to_py)?;
    let arch = Architecture {
        n_hidden,
        embedding: emb,
    };
    let (model, trace) = py
        .detach(|| network::train(&ds, &arch, &tc))
        .map_err(to_py)?;
    let s = trace.summary();
    let d = PyDict::new(py);
    d.set_item("epochs", s.epochs)?;
    d.set_item("best_epoch", s.best_epoch)?;
    d.set_item("stopped_epoch", s.stopped_epoch)?;
    d.set_item("best_val_loss", s.best_val_loss)?;
    d.set_item("val_loss", trace.val_loss)?;
    Ok((PyModel { inner: model }, d))
}

/// OSA and MPO NMSE on one split against noisy and clean references.
#[pyfunction]
#[pyo3(signature = (model, clean_x, clean_y, noisy_x, noisy_y, split="test", dt=0.002))]
#[allow(clippy::too_many_arguments)]
fn evaluate<'py>(
    py: Python<'py>,
    model: &PyModel,
    clean_x: Vec<f64>,
    clean_y: Vec<f64>,
    noisy_x: Vec<f64>,
    noisy_y: Vec<f64>,
    split: &str,
    dt: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let (cx, cy, nx, ny) = (series(clean_x, dt)?, series(clean_y, dt)?, series(noisy_x, dt)?, series(noisy_y, dt)?);
    let (noisy, clean) = evaluation::evaluate(
        &model.inner,
        SeriesPair { x: &cx, y: &cy },
        SeriesPair { x: &nx, y: &ny },
        parse_split(split)?,
    )
    .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("start_index", noisy.start_index)?;
    d.set_item("osa_nmse", noisy.osa_nmse)?;
    d.set_item("mpo_nmse", noisy.mpo_nmse)?;
    d.set_item("osa_nmse_clean", clean.osa_nmse)?;
    d.set_item("mpo_nmse_clean", clean.mpo_nmse)?;
    d.set_item("mpo_prediction", clean.predicted_series)?;
    Ok(d)
}

/// Run a pipeline stage against an output directory, as the CLI does.
/// `stage` is one of simulate, corrupt, embed, train, sweep, evaluate, report.
#[pyfunction]
#[pyo3(signature = (stage, out_dir, config=None, model="model.json", runs=None))]
fn run_stage(
    py: Python<'_>,
    stage: &str,
    out_dir: PathBuf,
    config: Option<PyConfig>,
    model: &str,
    runs: Option<Vec<PathBuf>>,
) -> PyResult<()> {
    let cfg = config.map(|c| c.inner).unwrap_or_default();
    py.detach(|| {
        let mut dir = RunDir::open(&out_dir)?;
        match stage {
            "simulate" => pipeline::run_simulate(&cfg, &mut dir),
            "corrupt" => pipeline::run_corrupt(&cfg, &mut dir),
            "embed" => pipeline::run_embed(&cfg, &mut dir),
            "train" => pipeline::run_train(&cfg, &mut dir).map(|_| ()),
            "sweep" => pipeline::run_sweep(&cfg, &mut dir).map(|_| ()),
            "evaluate" => pipeline::run_evaluate(&mut dir, model).map(|_| ()),
            "report" => {
                let runs = runs.unwrap_or_else(|| vec![out_dir.clone()]);
                pipeline::run_report(&runs, &mut dir)
            }
            other => Err(NarxError::config("stage", format!("unknown stage '{other}'"))),
        }
    })
    .map_err(to_py)
}

#[pymodule]
fn narx_lab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("NarxLabError", m.py().get_type::<NarxLabError>())?;
    m.add_class::<PyConfig>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(apply_noise, m)?)?;
    m.add_function(wrap_pyfunction!(nmse, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(run_stage, m)?)?;
    Ok(())
}
