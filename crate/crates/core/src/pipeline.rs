//! Experiment configuration and the on-disk stages behind the `narx-lab`
//! binary. Every artifact written to a run directory is hashed into
//! `manifest.json` together with the hashes of the artifacts it was derived
//! from, so stale or hand-edited inputs are refused downstream.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::dataset::{prepare, EmbeddingSpec, Split};
use crate::error::{NarxError, Result};
use crate::evaluation::{evaluate, predictions_csv, EvalReport};
use crate::network::{train, Architecture, MlpModel, TrainConfig};
use crate::noise::{apply_noise, NoiseSpec};
use crate::oscillator::{generate_excitation, simulate, ExcitationSpec, OscillatorParams, SimulationSpec};
use crate::series::{fmt_f64, TimeSeries};
use crate::sweep::{
    cell_seed, emit_heatmap, hex, mt_fine_restarts, mt_node_range, run_cell, run_grid, GridSpec,
    Stage, SweepData, SweepResult, SweepRow,
};

pub const FORCE: &str = "force.csv";
pub const RESPONSE: &str = "response.csv";
pub const FORCE_NOISY: &str = "force.noisy.csv";
pub const RESPONSE_NOISY: &str = "response.noisy.csv";
pub const MODEL: &str = "model.json";
pub const BEST_ST: &str = "best_st.json";
pub const BEST_MT: &str = "best_mt.json";
pub const SWEEP_SUMMARY: &str = "sweep_summary.json";
pub const MANIFEST: &str = "manifest.json";

/// Second-stage narrowing around the coarse winner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefinePlan {
    pub node_radius: usize,
    pub lag_radius: usize,
    pub st_restarts: usize,
    /// `None` uses the per-trial fine restart counts.
    pub mt_restarts: Option<usize>,
}

/// Which grids a sweep visits. `None` axes fall back to the tabulated ranges
/// for the configured trial and noise level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepPlan {
    pub st_lags: Option<Vec<usize>>,
    pub st_nodes: Option<Vec<usize>>,
    pub st_restarts: usize,
    pub mt_nodes: Option<Vec<usize>>,
    /// MT leads are `lags + offset` for each offset.
    pub mt_lead_offsets: Vec<usize>,
    pub mt_restarts: usize,
    pub refine: Option<RefinePlan>,
}

impl Default for SweepPlan {
    fn default() -> Self {
        Self::smoke()
    }
}

impl SweepPlan {
    pub fn smoke() -> Self {
        let g = GridSpec::smoke();
        Self {
            st_lags: Some(g.lags),
            st_nodes: Some(g.nodes.clone()),
            st_restarts: g.restarts,
            mt_nodes: Some(g.nodes),
            mt_lead_offsets: vec![0, 1, 2, 3],
            mt_restarts: g.restarts,
            refine: None,
        }
    }

    /// Full tabulated coarse and fine grids.
    pub fn table() -> Self {
        Self {
            st_lags: None,
            st_nodes: None,
            st_restarts: 10,
            mt_nodes: None,
            mt_lead_offsets: vec![0, 1, 2, 3],
            mt_restarts: 10,
            refine: Some(RefinePlan {
                node_radius: 2,
                lag_radius: 1,
                st_restarts: 10,
                mt_restarts: None,
            }),
        }
    }

    pub fn st_grid(&self, noise: &NoiseSpec) -> Result<GridSpec> {
        let mut g = match (&self.st_lags, &self.st_nodes) {
            (Some(l), Some(n)) => GridSpec {
                lags: l.clone(),
                nodes: n.clone(),
                leads: Vec::new(),
                restarts: self.st_restarts,
                stage: Stage::Coarse,
            },
            _ => {
                let t = GridSpec::st_table(noise.trial, noise.fraction)?;
                GridSpec {
                    lags: self.st_lags.clone().unwrap_or(t.lags),
                    nodes: self.st_nodes.clone().unwrap_or(t.nodes),
                    ..t
                }
            }
        };
        g.restarts = self.st_restarts;
        g.validate()?;
        Ok(g)
    }

    pub fn mt_grid(&self, best_st: &SweepRow, noise: &NoiseSpec) -> Result<GridSpec> {
        if self.mt_lead_offsets.is_empty() {
            return Err(NarxError::config("sweep.mt_lead_offsets", "must be non-empty"));
        }
        let nodes = match &self.mt_nodes {
            Some(n) => n.clone(),
            None => mt_node_range(noise.trial, noise.fraction)?,
        };
        let m = best_st.lags;
        let g = GridSpec {
            lags: vec![m],
            nodes,
            leads: self.mt_lead_offsets.iter().map(|o| m + o).collect(),
            restarts: self.mt_restarts,
            stage: Stage::Coarse,
        };
        g.validate()?;
        Ok(g)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Seeds every sweep cell.
    pub master_seed: u64,
    pub oscillator: OscillatorParams,
    pub excitation: ExcitationSpec,
    pub simulation: SimulationSpec,
    pub noise: NoiseSpec,
    /// Embedding and width for the single `train` stage.
    pub embedding: EmbeddingSpec,
    pub n_hidden: usize,
    pub train: TrainConfig,
    pub sweep: SweepPlan,
    /// Worker threads for sweeps; `None` uses all cores.
    pub jobs: Option<usize>,
}

/// Optimiser settings used by experiment presets.
pub fn preset_train_config() -> TrainConfig {
    TrainConfig {
        learning_rate: 1e-2,
        ..TrainConfig::default()
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            master_seed: 0,
            oscillator: OscillatorParams::default(),
            excitation: ExcitationSpec::default(),
            simulation: SimulationSpec::default(),
            noise: NoiseSpec::default(),
            embedding: EmbeddingSpec::default(),
            n_hidden: 8,
            train: preset_train_config(),
            sweep: SweepPlan::default(),
            jobs: None,
        }
    }
}

impl ExperimentConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let sweep = match name {
            "smoke" => SweepPlan::smoke(),
            "table" => SweepPlan::table(),
            other => {
                return Err(NarxError::config(
                    "preset",
                    format!("unknown preset '{other}' (expected smoke or table)"),
                ))
            }
        };
        Ok(Self {
            sweep,
            ..Self::default()
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.oscillator.validate()?;
        self.excitation.validate()?;
        self.noise.validate()?;
        self.embedding.validate()?;
        self.train.validate()?;
        if self.n_hidden == 0 {
            return Err(NarxError::config("n_hidden", "must be >= 1"));
        }
        if self.jobs == Some(0) {
            return Err(NarxError::config("jobs", "must be >= 1"));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    /// Apply `path=value` overrides, e.g. `noise.fraction=0.5`. Values parse
    /// as JSON where possible, otherwise as strings.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        let mut doc = serde_json::to_value(self)?;
        for o in overrides {
            let o = o.as_ref();
            let (path, raw) = o
                .split_once('=')
                .ok_or_else(|| NarxError::config(o, "override must look like path=value"))?;
            let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            let mut slot = &mut doc;
            for key in path.split('.') {
                let obj = slot
                    .as_object_mut()
                    .ok_or_else(|| NarxError::config(path, format!("'{key}' is not inside an object")))?;
                // Null sections (e.g. `sweep.refine`) gain children on demand.
                slot = obj.entry(key.to_string()).or_insert(Value::Object(Default::default()));
                if slot.is_null() {
                    *slot = Value::Object(Default::default());
                }
            }
            *slot = value;
        }
        let cfg: Self = serde_json::from_value(doc)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub sha256: String,
    /// Hashes of the artifacts this one was derived from, at derivation time.
    pub inputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub artifacts: BTreeMap<String, ArtifactRecord>,
}

/// A run directory plus its manifest.
#[derive(Debug)]
pub struct RunDir {
    dir: PathBuf,
    manifest: Manifest,
}

impl RunDir {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| NarxError::io(&dir, e))?;
        let path = dir.join(MANIFEST);
        let manifest = if path.exists() {
            let text = std::fs::read_to_string(&path).map_err(|e| NarxError::io(&path, e))?;
            serde_json::from_str(&text)?
        } else {
            Manifest::default()
        };
        Ok(Self { dir, manifest })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    /// Write an artifact and record its hash and provenance.
    pub fn put(&mut self, name: &str, contents: &[u8], inputs: &[&str]) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).map_err(|e| NarxError::io(&path, e))?;
        let inputs = inputs
            .iter()
            .map(|i| {
                let h = self
                    .manifest
                    .artifacts
                    .get(*i)
                    .map(|r| r.sha256.clone())
                    .ok_or_else(|| NarxError::Data(format!("{i} is not in the manifest")))?;
                Ok((i.to_string(), h))
            })
            .collect::<Result<_>>()?;
        self.manifest.artifacts.insert(
            name.to_string(),
            ArtifactRecord {
                sha256: sha256_hex(contents),
                inputs,
            },
        );
        self.save_manifest()
    }

    fn save_manifest(&self) -> Result<()> {
        let path = self.dir.join(MANIFEST);
        let mut text = serde_json::to_string_pretty(&self.manifest)?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| NarxError::io(&path, e))
    }

    /// Read an artifact, refusing it if its bytes or any upstream artifact
    /// changed since it was written.
    pub fn get(&self, name: &str) -> Result<String> {
        let record = self.manifest.artifacts.get(name).ok_or_else(|| {
            NarxError::Data(format!(
                "{name} is missing from {}; run the stage that produces it first",
                self.dir.join(MANIFEST).display()
            ))
        })?;
        let path = self.dir.join(name);
        let text = std::fs::read_to_string(&path).map_err(|e| NarxError::io(&path, e))?;
        let actual = sha256_hex(text.as_bytes());
        if actual != record.sha256 {
            return Err(NarxError::StaleArtifact {
                name: name.to_string(),
                expected: record.sha256.clone(),
                actual,
            });
        }
        for (input, expected) in &record.inputs {
            let current = self.manifest.artifacts.get(input).map(|r| r.sha256.clone()).unwrap_or_default();
            if &current != expected {
                return Err(NarxError::StaleArtifact {
                    name: format!("{name} (derived from {input})"),
                    expected: expected.clone(),
                    actual: current,
                });
            }
        }
        Ok(text)
    }

    pub fn series(&self, name: &str) -> Result<TimeSeries> {
        TimeSeries::from_csv(&self.get(name)?)
    }

    pub fn model(&self, name: &str) -> Result<MlpModel> {
        MlpModel::from_document(&serde_json::from_str(&self.get(name)?)?)
    }

    pub fn sweep_data(&self) -> Result<SweepData> {
        Ok(SweepData {
            clean_x: self.series(FORCE)?,
            clean_y: self.series(RESPONSE)?,
            noisy_x: self.series(FORCE_NOISY)?,
            noisy_y: self.series(RESPONSE_NOISY)?,
        })
    }

    fn put_json<T: Serialize>(&mut self, name: &str, value: &T, inputs: &[&str]) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.put(name, text.as_bytes(), inputs)
    }
}

/// Simulate the oscillator and write the clean forcing and displacement.
pub fn run_simulate(cfg: &ExperimentConfig, run: &mut RunDir) -> Result<()> {
    cfg.validate()?;
    let excitation = generate_excitation(&cfg.excitation)?;
    let (x, y) = simulate(&cfg.oscillator, &excitation, &cfg.simulation)?;
    run.put(FORCE, x.to_csv().as_bytes(), &[])?;
    run.put(RESPONSE, y.to_csv().as_bytes(), &[])
}

/// Corrupt the clean series according to `cfg.noise`.
pub fn run_corrupt(cfg: &ExperimentConfig, run: &mut RunDir) -> Result<()> {
    cfg.validate()?;
    let x = run.series(FORCE)?;
    let y = run.series(RESPONSE)?;
    let (xn, yn) = apply_noise(&x, &y, &cfg.noise)?;
    run.put(FORCE_NOISY, xn.to_csv().as_bytes(), &[FORCE, RESPONSE])?;
    run.put(RESPONSE_NOISY, yn.to_csv().as_bytes(), &[FORCE, RESPONSE])
}

/// Write the embedded, partitioned and scaled rows as `dataset.csv` plus a
/// JSON sidecar.
pub fn run_embed(cfg: &ExperimentConfig, run: &mut RunDir) -> Result<()> {
    cfg.validate()?;
    let ds = prepare(
        &run.series(FORCE_NOISY)?,
        &run.series(RESPONSE_NOISY)?,
        &cfg.embedding,
    )?;
    run.put("dataset.csv", ds.to_csv().as_bytes(), &[FORCE_NOISY, RESPONSE_NOISY])?;
    run.put_json("dataset.json", &ds.sidecar(), &[FORCE_NOISY, RESPONSE_NOISY])
}

/// Train one network with `cfg.embedding`, `cfg.n_hidden` and `cfg.train`.
pub fn run_train(cfg: &ExperimentConfig, run: &mut RunDir) -> Result<MlpModel> {
    cfg.validate()?;
    let ds = prepare(
        &run.series(FORCE_NOISY)?,
        &run.series(RESPONSE_NOISY)?,
        &cfg.embedding,
    )?;
    let arch = Architecture {
        n_hidden: cfg.n_hidden,
        embedding: cfg.embedding,
    };
    let (model, trace) = train(&ds, &arch, &cfg.train)?;
    run.put_json(MODEL, &model.to_document(Some(&cfg.train), Some(&trace)), &[FORCE_NOISY, RESPONSE_NOISY])?;
    run.put_json("trace.json", &trace, &[FORCE_NOISY, RESPONSE_NOISY])?;
    Ok(model)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationDocument {
    pub model: String,
    pub validation: [EvalReport; 2],
    pub test: [EvalReport; 2],
}

/// Score a stored model on the validation and test blocks against both
/// references. Writes `<stem>_evaluation.json` and `<stem>_predictions.csv`
/// (test block, free run).
pub fn run_evaluate(run: &mut RunDir, model_name: &str) -> Result<EvaluationDocument> {
    let model = run.model(model_name)?;
    let data = run.sweep_data()?;
    let (vn, vc) = evaluate(&model, data.clean(), data.noisy(), Split::Validation)?;
    let (tn, tc) = evaluate(&model, data.clean(), data.noisy(), Split::Test)?;
    let stem = model_name.trim_end_matches(".json");
    let inputs = [model_name, FORCE, RESPONSE, FORCE_NOISY, RESPONSE_NOISY];
    run.put(
        &format!("{stem}_predictions.csv"),
        predictions_csv(&tc, &data.clean_y, &data.noisy_y).as_bytes(),
        &inputs,
    )?;
    let doc = EvaluationDocument {
        model: model_name.to_string(),
        validation: [vn, vc],
        test: [tn, tc],
    };
    run.put_json(&format!("{stem}_evaluation.json"), &doc, &inputs)?;
    Ok(doc)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub trial: u8,
    pub noise_fraction: f64,
    pub master_seed: u64,
    pub st: SweepRow,
    pub mt: SweepRow,
    /// Result files per stage, in the order they ran.
    pub stages: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub summary: SweepSummary,
    pub st_final: SweepResult,
    pub mt_final: SweepResult,
    pub best_st: MlpModel,
    pub best_mt: MlpModel,
}

/// Run single-task then multi-task grids (each optionally refined), retrain
/// the two winners and write results, heatmaps and models.
pub fn run_sweep(cfg: &ExperimentConfig, run: &mut RunDir) -> Result<SweepOutcome> {
    cfg.validate()?;
    let data = run.sweep_data()?;
    let plan = &cfg.sweep;
    let data_inputs = [FORCE, RESPONSE, FORCE_NOISY, RESPONSE_NOISY];
    let mut stages = Vec::new();

    let mut stage = |run: &mut RunDir, name: &str, grid: &GridSpec| -> Result<SweepResult> {
        let res = run_grid(&data, grid, &cfg.train, cfg.master_seed, cfg.jobs)?;
        run.put(&format!("{name}.csv"), res.to_csv().as_bytes(), &data_inputs)?;
        run.put_json(&format!("{name}.json"), &res, &data_inputs)?;
        stages.push(name.to_string());
        Ok(res)
    };

    let st_coarse_grid = plan.st_grid(&cfg.noise)?;
    let mut st = stage(run, "sweep_st_coarse", &st_coarse_grid)?;
    if let Some(r) = &plan.refine {
        let fine = st.grid.refine(&st.selected, r.node_radius, r.lag_radius, r.st_restarts);
        st = stage(run, "sweep_st_fine", &fine)?;
    }
    let mt_coarse_grid = plan.mt_grid(&st.selected, &cfg.noise)?;
    let mut mt = stage(run, "sweep_mt_coarse", &mt_coarse_grid)?;
    if let Some(r) = &plan.refine {
        let restarts = r.mt_restarts.unwrap_or_else(|| mt_fine_restarts(cfg.noise.trial));
        let fine = mt.grid.refine(&mt.selected, r.node_radius, r.lag_radius, restarts);
        mt = stage(run, "sweep_mt_fine", &fine)?;
    }

    let st_heat = emit_heatmap(&st, st.selected.lags, st.selected.leads)?;
    run.put("heatmap_st.csv", st_heat.to_csv().as_bytes(), &data_inputs)?;
    let mt_heat = emit_heatmap(&mt, mt.selected.lags, mt.selected.leads)?;
    run.put("heatmap_mt.csv", mt_heat.to_csv().as_bytes(), &data_inputs)?;

    let retrain = |row: &SweepRow| -> Result<MlpModel> {
        let ds = data.dataset(&row.embedding())?;
        debug_assert_eq!(row.seed, cell_seed(cfg.master_seed, row.lags, row.nodes, row.leads, row.restart));
        let (again, model) = run_cell(&ds, &data, row.nodes, row.restart, row.seed, &cfg.train)?;
        if &again != row {
            return Err(NarxError::Data(format!(
                "retraining the selected cell (lags={}, nodes={}, leads={}, restart={}) was not reproducible",
                row.lags, row.nodes, row.leads, row.restart
            )));
        }
        model.ok_or_else(|| NarxError::Data("selected cell diverged on retraining".into()))
    };
    let best_st = retrain(&st.selected)?;
    let best_mt = retrain(&mt.selected)?;
    run.put_json(BEST_ST, &best_st.to_document(Some(&cfg.train), None), &data_inputs)?;
    run.put_json(BEST_MT, &best_mt.to_document(Some(&cfg.train), None), &data_inputs)?;

    let summary = SweepSummary {
        trial: cfg.noise.trial.number(),
        noise_fraction: cfg.noise.fraction,
        master_seed: cfg.master_seed,
        st: st.selected.clone(),
        mt: mt.selected.clone(),
        stages,
    };
    run.put_json(SWEEP_SUMMARY, &summary, &[BEST_ST, BEST_MT])?;
    Ok(SweepOutcome {
        summary,
        st_final: st,
        mt_final: mt,
        best_st,
        best_mt,
    })
}

/// Number of trailing test samples shown in the free-run overlay.
pub const OVERLAY_POINTS: usize = 250;

/// Aggregate sweep runs into figure data under `out`:
/// `nmse_vs_noise.csv`, `mpo_overlay.csv` and per-run heatmaps.
pub fn run_report(runs: &[PathBuf], out: &mut RunDir) -> Result<()> {
    if runs.is_empty() {
        return Err(NarxError::config("runs", "at least one run directory is required"));
    }
    let mut entries = Vec::new();
    for dir in runs {
        let run = RunDir::open(dir)?;
        let summary: SweepSummary = serde_json::from_str(&run.get(SWEEP_SUMMARY)?)?;
        entries.push((summary, run));
    }
    entries.sort_by(|a, b| {
        (a.0.trial, a.0.noise_fraction)
            .partial_cmp(&(b.0.trial, b.0.noise_fraction))
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let opt = |v: Option<f64>| v.map_or_else(|| "diverged".to_string(), fmt_f64);
    let mut nmse = String::from("trial,noise_fraction,st_nmse,mt_nmse\n");
    let mut overlay =
        String::from("trial,noise_fraction,time_s,truth_clean,truth_noisy,st_prediction,mt_prediction\n");
    for (s, run) in &entries {
        let _ = writeln!(
            nmse,
            "{},{},{},{}",
            s.trial,
            fmt_f64(s.noise_fraction),
            opt(s.st.test_mpo_nmse_clean),
            opt(s.mt.test_mpo_nmse_clean)
        );
        let data = run.sweep_data()?;
        let st = run.model(BEST_ST)?;
        let mt = run.model(BEST_MT)?;
        let (_, st_rep) = evaluate(&st, data.clean(), data.noisy(), Split::Test)?;
        let (_, mt_rep) = evaluate(&mt, data.clean(), data.noisy(), Split::Test)?;
        // Both test blocks end where the MT one ends; take the shared tail.
        let end = (st_rep.start_index + st_rep.predicted_series.len())
            .min(mt_rep.start_index + mt_rep.predicted_series.len());
        let start = end
            .saturating_sub(OVERLAY_POINTS)
            .max(st_rep.start_index)
            .max(mt_rep.start_index);
        let dt = data.clean_y.dt();
        for t in start..end {
            let _ = writeln!(
                overlay,
                "{},{},{},{},{},{},{}",
                s.trial,
                fmt_f64(s.noise_fraction),
                fmt_f64(t as f64 * dt),
                fmt_f64(data.clean_y.values()[t]),
                fmt_f64(data.noisy_y.values()[t]),
                fmt_f64(st_rep.predicted_series[t - st_rep.start_index]),
                fmt_f64(mt_rep.predicted_series[t - mt_rep.start_index])
            );
        }
        for kind in ["st", "mt"] {
            let text = run.get(&format!("heatmap_{kind}.csv"))?;
            let name = format!("heatmap_{kind}_trial{}_noise{}.csv", s.trial, s.noise_fraction);
            out.put(&name, text.as_bytes(), &[])?;
        }
    }
    out.put("nmse_vs_noise.csv", nmse.as_bytes(), &[])?;
    out.put("mpo_overlay.csv", overlay.as_bytes(), &[])
}
