//! Hyperparameter grids over (lags, nodes, leads, restart), best-model
//! selection by validation free-run NMSE, and heatmap extraction.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::ops::RangeInclusive;

use crate::dataset::{prepare, EmbeddingSpec, NarxDataset, Split};
use crate::error::{NarxError, Result};
use crate::evaluation::{evaluate, EvalReport, SeriesPair};
use crate::network::{train, Architecture, MlpModel, TrainConfig};
use crate::noise::NoiseTrial;
use crate::series::{fmt_f64, TimeSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Coarse,
    Fine,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lags: Vec<usize>,
    pub nodes: Vec<usize>,
    /// Lead counts; empty for a single-task grid.
    pub leads: Vec<usize>,
    pub restarts: usize,
    pub stage: Stage,
}

fn span(r: RangeInclusive<usize>) -> Vec<usize> {
    r.collect()
}

/// Index into the canonical noise levels, matching to 1e-9.
fn noise_level(fraction: f64) -> Result<usize> {
    crate::noise::CANONICAL_FRACTIONS
        .iter()
        .position(|f| (f - fraction).abs() < 1e-9)
        .ok_or_else(|| {
            NarxError::config(
                "noise.fraction",
                format!("{fraction} is not one of the tabulated noise levels"),
            )
        })
}

/// Node counts for multi-task training per noise level and trial.
pub fn mt_node_range(trial: NoiseTrial, fraction: f64) -> Result<Vec<usize>> {
    let level = noise_level(fraction)?;
    let range = match (trial, level) {
        (NoiseTrial::InputOnly, 0 | 1) => 2..=15,
        (NoiseTrial::InputOnly, 2 | 3) => 2..=20,
        (NoiseTrial::InputOnly, 4) => 10..=30,
        (_, 0) => 10..=50,
        (_, 1) => 25..=50,
        (_, 2 | 3) => 25..=60,
        (_, 4) => 25..=70,
        (NoiseTrial::OutputOnly, 5) => 40..=80,
        _ => {
            return Err(NarxError::config(
                "noise",
                format!("trial {} was not assessed at {fraction}", trial.number()),
            ))
        }
    };
    Ok(span(range))
}

/// Restarts per cell in the fine multi-task stage.
pub fn mt_fine_restarts(trial: NoiseTrial) -> usize {
    match trial {
        NoiseTrial::OutputOnly => 100,
        NoiseTrial::InputOnly => 200,
        NoiseTrial::Both => 10,
    }
}

impl GridSpec {
    /// Single-task coarse grid for a trial; the 150% level extends nodes to 50.
    pub fn st_table(trial: NoiseTrial, fraction: f64) -> Result<Self> {
        let level = noise_level(fraction)?;
        let high = level == 5;
        let (lags, nodes) = match trial {
            NoiseTrial::OutputOnly => (3..=15, if high { 2..=50 } else { 2..=30 }),
            NoiseTrial::InputOnly | NoiseTrial::Both if high => {
                return Err(NarxError::config(
                    "noise",
                    format!("trial {} was not assessed at {fraction}", trial.number()),
                ))
            }
            NoiseTrial::InputOnly => (3..=10, 2..=20),
            NoiseTrial::Both => (3..=20, 2..=30),
        };
        Ok(Self {
            lags: span(lags),
            nodes: span(nodes),
            leads: Vec::new(),
            restarts: 10,
            stage: Stage::Coarse,
        })
    }

    /// Desk-scale single-task grid.
    pub fn smoke() -> Self {
        Self {
            lags: vec![5, 10],
            nodes: vec![8, 16],
            leads: Vec::new(),
            restarts: 3,
            stage: Stage::Coarse,
        }
    }

    pub fn is_single_task(&self) -> bool {
        self.leads.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.lags.is_empty() || self.lags.contains(&0) {
            return Err(NarxError::config("grid.lags", "must be non-empty and >= 1"));
        }
        if self.nodes.is_empty() || self.nodes.contains(&0) {
            return Err(NarxError::config("grid.nodes", "must be non-empty and >= 1"));
        }
        if self.restarts == 0 {
            return Err(NarxError::config("grid.restarts", "must be >= 1"));
        }
        Ok(())
    }

    /// Narrow around a winner: nodes ±`node_radius`, lags ±`lag_radius`,
    /// leads ±`lag_radius`, each clamped to this grid's extent.
    pub fn refine(&self, winner: &SweepRow, node_radius: usize, lag_radius: usize, restarts: usize) -> Self {
        let around = |axis: &[usize], centre: usize, r: usize| -> Vec<usize> {
            let lo = *axis.iter().min().unwrap();
            let hi = *axis.iter().max().unwrap();
            span(centre.saturating_sub(r).max(lo)..=(centre + r).min(hi))
        };
        Self {
            lags: around(&self.lags, winner.lags, lag_radius),
            nodes: around(&self.nodes, winner.nodes, node_radius),
            leads: if self.leads.is_empty() {
                Vec::new()
            } else {
                around(&self.leads, winner.leads, lag_radius)
            },
            restarts,
            stage: Stage::Fine,
        }
    }

    fn cells(&self) -> Vec<(usize, usize, usize, usize)> {
        let leads: &[usize] = if self.leads.is_empty() { &[0] } else { &self.leads };
        let mut out = Vec::new();
        for &l in &self.lags {
            for &n in &self.nodes {
                for &d in leads {
                    for r in 0..self.restarts {
                        out.push((l, n, d, r));
                    }
                }
            }
        }
        out
    }
}

/// Multi-task grid seeded from the best single-task row: same lags, leads
/// `{m, m+1, m+2, m+3}`, tabulated nodes.
pub fn mt_grid_from_st(best_st: &SweepRow, fraction: f64, trial: NoiseTrial, stage: Stage) -> Result<GridSpec> {
    let m = best_st.lags;
    Ok(GridSpec {
        lags: vec![m],
        nodes: mt_node_range(trial, fraction)?,
        leads: span(m..=m + 3),
        restarts: match stage {
            Stage::Coarse => 10,
            Stage::Fine => mt_fine_restarts(trial),
        },
        stage,
    })
}

/// Per-cell seed from the master seed and cell coordinates (SplitMix64 chain),
/// so adding cells never perturbs existing ones.
pub fn cell_seed(master: u64, lags: usize, nodes: usize, leads: usize, restart: usize) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    [lags, nodes, leads, restart]
        .iter()
        .fold(mix(master), |h, &v| mix(h ^ v as u64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lags: usize,
    pub nodes: usize,
    pub leads: usize,
    pub restart: usize,
    pub seed: u64,
    pub best_epoch: usize,
    pub diverged: bool,
    /// Against noisy targets.
    pub val_osa_nmse: f64,
    pub val_mpo_nmse: Option<f64>,
    pub test_osa_nmse: f64,
    pub test_mpo_nmse: Option<f64>,
    /// Against clean targets.
    pub val_osa_nmse_clean: f64,
    pub val_mpo_nmse_clean: Option<f64>,
    pub test_osa_nmse_clean: f64,
    pub test_mpo_nmse_clean: Option<f64>,
}

impl SweepRow {
    fn diverged_row(lags: usize, nodes: usize, leads: usize, restart: usize, seed: u64, best_epoch: usize) -> Self {
        Self {
            lags,
            nodes,
            leads,
            restart,
            seed,
            best_epoch,
            diverged: true,
            val_osa_nmse: f64::NAN,
            val_mpo_nmse: None,
            test_osa_nmse: f64::NAN,
            test_mpo_nmse: None,
            val_osa_nmse_clean: f64::NAN,
            val_mpo_nmse_clean: None,
            test_osa_nmse_clean: f64::NAN,
            test_mpo_nmse_clean: None,
        }
    }

    pub fn embedding(&self) -> EmbeddingSpec {
        EmbeddingSpec {
            n_lags: self.lags,
            n_leads: self.leads,
        }
    }

    /// Ordering key for selection: validation MPO NMSE, then fewer nodes,
    /// fewer lags, smaller restart index, fewer leads.
    fn rank_key(&self) -> (f64, usize, usize, usize, usize) {
        (
            self.val_mpo_nmse.unwrap_or(f64::INFINITY),
            self.nodes,
            self.lags,
            self.restart,
            self.leads,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub dataset_hash: String,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub grid: GridSpec,
    pub rows: Vec<SweepRow>,
    pub selected: SweepRow,
    pub provenance: Provenance,
}

/// Clean and measured series a sweep trains and scores against.
#[derive(Debug, Clone)]
pub struct SweepData {
    pub clean_x: TimeSeries,
    pub clean_y: TimeSeries,
    pub noisy_x: TimeSeries,
    pub noisy_y: TimeSeries,
}

impl SweepData {
    pub fn clean(&self) -> SeriesPair<'_> {
        SeriesPair {
            x: &self.clean_x,
            y: &self.clean_y,
        }
    }

    pub fn noisy(&self) -> SeriesPair<'_> {
        SeriesPair {
            x: &self.noisy_x,
            y: &self.noisy_y,
        }
    }

    /// Standardised, partitioned rows built from the measured series.
    pub fn dataset(&self, embedding: &EmbeddingSpec) -> Result<NarxDataset> {
        prepare(&self.noisy_x, &self.noisy_y, embedding)
    }

    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for s in [&self.clean_x, &self.clean_y, &self.noisy_x, &self.noisy_y] {
            h.update(s.to_csv().as_bytes());
        }
        hex(&h.finalize())
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(bytes.len() * 2), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Noisy- and clean-reference reports on validation and test blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct CellReports {
    pub val_noisy: EvalReport,
    pub val_clean: EvalReport,
    pub test_noisy: EvalReport,
    pub test_clean: EvalReport,
}

pub fn score(model: &MlpModel, data: &SweepData) -> Result<CellReports> {
    let (val_noisy, val_clean) = evaluate(model, data.clean(), data.noisy(), Split::Validation)?;
    let (test_noisy, test_clean) = evaluate(model, data.clean(), data.noisy(), Split::Test)?;
    Ok(CellReports {
        val_noisy,
        val_clean,
        test_noisy,
        test_clean,
    })
}

/// Train and score one cell. Divergence of training or free run yields a
/// row flagged `diverged`; other errors propagate.
pub fn run_cell(
    dataset: &NarxDataset,
    data: &SweepData,
    nodes: usize,
    restart: usize,
    seed: u64,
    config: &TrainConfig,
) -> Result<(SweepRow, Option<MlpModel>)> {
    let emb = dataset.embedding;
    let cfg = TrainConfig {
        rng_seed: seed,
        ..config.clone()
    };
    let arch = Architecture {
        n_hidden: nodes,
        embedding: emb,
    };
    let (model, trace) = match train(dataset, &arch, &cfg) {
        Ok(v) => v,
        Err(NarxError::Divergence { step, .. }) => {
            return Ok((
                SweepRow::diverged_row(emb.n_lags, nodes, emb.n_leads, restart, seed, step),
                None,
            ))
        }
        Err(e) => return Err(e),
    };
    let r = score(&model, data)?;
    let diverged = r.val_noisy.diverged() || r.test_noisy.diverged();
    let row = SweepRow {
        lags: emb.n_lags,
        nodes,
        leads: emb.n_leads,
        restart,
        seed,
        best_epoch: trace.best_epoch,
        diverged,
        val_osa_nmse: r.val_noisy.osa_nmse,
        val_mpo_nmse: r.val_noisy.mpo_nmse,
        test_osa_nmse: r.test_noisy.osa_nmse,
        test_mpo_nmse: r.test_noisy.mpo_nmse,
        val_osa_nmse_clean: r.val_clean.osa_nmse,
        val_mpo_nmse_clean: r.val_clean.mpo_nmse,
        test_osa_nmse_clean: r.test_clean.osa_nmse,
        test_mpo_nmse_clean: r.test_clean.mpo_nmse,
    };
    Ok((row, Some(model)))
}

/// Train every (lags, nodes, leads, restart) cell on a pool of `jobs`
/// workers (`None` = available parallelism). Rows come back in grid order
/// regardless of scheduling.
pub fn run_grid(
    data: &SweepData,
    grid: &GridSpec,
    config: &TrainConfig,
    master_seed: u64,
    jobs: Option<usize>,
) -> Result<SweepResult> {
    grid.validate()?;
    config.validate()?;
    let cells = grid.cells();
    let mut datasets = BTreeMap::new();
    for &(l, _, d, _) in &cells {
        if let std::collections::btree_map::Entry::Vacant(e) = datasets.entry((l, d)) {
            e.insert(data.dataset(&EmbeddingSpec::new(l, d)?)?);
        }
    }
    let job = |&(l, n, d, r): &(usize, usize, usize, usize)| -> Result<SweepRow> {
        let seed = cell_seed(master_seed, l, n, d, r);
        run_cell(&datasets[&(l, d)], data, n, r, seed, config).map(|(row, _)| row)
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        builder = builder.num_threads(j.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| NarxError::config("jobs", e.to_string()))?;
    let rows: Vec<SweepRow> = pool.install(|| cells.par_iter().map(job).collect::<Result<Vec<_>>>())?;

    let selected = select_best(&rows)?.clone();
    let config_hash = {
        let doc = serde_json::json!({ "grid": grid, "train": config, "master_seed": master_seed });
        hex(&Sha256::digest(doc.to_string().as_bytes()))
    };
    Ok(SweepResult {
        grid: grid.clone(),
        rows,
        selected,
        provenance: Provenance {
            dataset_hash: data.hash(),
            config_hash,
        },
    })
}

/// Lowest validation MPO NMSE among non-diverged rows, ties broken by fewer
/// nodes, fewer lags, then smaller restart index.
pub fn select_best(rows: &[SweepRow]) -> Result<&SweepRow> {
    rows.iter()
        .filter(|r| !r.diverged && r.val_mpo_nmse.is_some())
        .min_by(|a, b| a.rank_key().partial_cmp(&b.rank_key()).unwrap_or(std::cmp::Ordering::Equal))
        .ok_or_else(|| NarxError::Divergence {
            stage: "sweep: every cell diverged".into(),
            step: rows.len(),
        })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "diverged".to_string(), fmt_f64)
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "lags,nodes,leads,restart,seed,best_epoch,diverged,\
             val_osa_nmse,val_mpo_nmse,test_osa_nmse,test_mpo_nmse,\
             val_osa_nmse_clean,val_mpo_nmse_clean,test_osa_nmse_clean,test_mpo_nmse_clean,selected\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.lags,
                r.nodes,
                r.leads,
                r.restart,
                r.seed,
                r.best_epoch,
                r.diverged,
                fmt_f64(r.val_osa_nmse),
                opt(r.val_mpo_nmse),
                fmt_f64(r.test_osa_nmse),
                opt(r.test_mpo_nmse),
                fmt_f64(r.val_osa_nmse_clean),
                opt(r.val_mpo_nmse_clean),
                fmt_f64(r.test_osa_nmse_clean),
                opt(r.test_mpo_nmse_clean),
                r == &self.selected
            );
        }
        out
    }
}

/// Test MPO NMSE (clean reference) over nodes × restarts for fixed lags and leads.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub lags: usize,
    pub leads: usize,
    pub nodes: Vec<usize>,
    pub restarts: Vec<usize>,
    /// `cells[i][j]` for `nodes[i]`, `restarts[j]`; `None` when diverged.
    pub cells: Vec<Vec<Option<f64>>>,
}

pub fn emit_heatmap(result: &SweepResult, lags: usize, leads: usize) -> Result<Heatmap> {
    let matching: Vec<&SweepRow> = result
        .rows
        .iter()
        .filter(|r| r.lags == lags && r.leads == leads)
        .collect();
    if matching.is_empty() {
        return Err(NarxError::Data(format!(
            "no sweep rows with lags={lags}, leads={leads}; heatmap would be empty"
        )));
    }
    let nodes: Vec<usize> = matching.iter().map(|r| r.nodes).collect::<BTreeSet<_>>().into_iter().collect();
    let restarts: Vec<usize> = matching.iter().map(|r| r.restart).collect::<BTreeSet<_>>().into_iter().collect();
    let mut cells = vec![vec![None; restarts.len()]; nodes.len()];
    for r in matching {
        let i = nodes.binary_search(&r.nodes).unwrap();
        let j = restarts.binary_search(&r.restart).unwrap();
        cells[i][j] = if r.diverged { None } else { r.test_mpo_nmse_clean };
    }
    Ok(Heatmap {
        lags,
        leads,
        nodes,
        restarts,
        cells,
    })
}

impl Heatmap {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("nodes");
        for r in &self.restarts {
            let _ = write!(out, ",seed_{r}");
        }
        out.push('\n');
        for (n, row) in self.nodes.iter().zip(&self.cells) {
            let _ = write!(out, "{n}");
            for c in row {
                let _ = write!(out, ",{}", opt(*c));
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(nodes: usize, lags: usize, restart: usize, val: Option<f64>) -> SweepRow {
        SweepRow {
            lags,
            nodes,
            leads: 0,
            restart,
            seed: restart as u64,
            best_epoch: 1,
            diverged: val.is_none(),
            val_osa_nmse: 1.0,
            val_mpo_nmse: val,
            test_osa_nmse: 1.0,
            test_mpo_nmse: val,
            val_osa_nmse_clean: 1.0,
            val_mpo_nmse_clean: val,
            test_osa_nmse_clean: 1.0,
            test_mpo_nmse_clean: val.map(|v| v * 2.0),
        }
    }

    #[test]
    fn selects_argmin() {
        let rows = vec![row(4, 3, 0, Some(5.0)), row(4, 3, 1, Some(3.0)), row(4, 3, 2, Some(4.0))];
        assert_eq!(select_best(&rows).unwrap().restart, 1);
    }

    #[test]
    fn tie_prefers_fewer_nodes_then_lags_then_restart() {
        let rows = vec![row(10, 3, 0, Some(2.0)), row(5, 3, 0, Some(2.0))];
        assert_eq!(select_best(&rows).unwrap().nodes, 5);
        let rows = vec![row(5, 6, 0, Some(2.0)), row(5, 4, 3, Some(2.0)), row(5, 4, 1, Some(2.0))];
        let best = select_best(&rows).unwrap();
        assert_eq!((best.lags, best.restart), (4, 1));
    }

    #[test]
    fn diverged_rows_rank_last() {
        let rows = vec![row(2, 3, 0, None), row(9, 3, 0, Some(80.0))];
        assert_eq!(select_best(&rows).unwrap().nodes, 9);
        let rows = vec![row(2, 3, 0, None), row(9, 3, 0, None)];
        assert!(select_best(&rows).is_err());
    }

    #[test]
    fn single_task_ranges() {
        let g = GridSpec::st_table(NoiseTrial::OutputOnly, 0.1).unwrap();
        assert_eq!(g.lags, span(3..=15));
        assert_eq!(g.nodes, span(2..=30));
        assert_eq!(g.restarts, 10);
        let g = GridSpec::st_table(NoiseTrial::InputOnly, 0.3).unwrap();
        assert_eq!((g.lags, g.nodes), (span(3..=10), span(2..=20)));
        let g = GridSpec::st_table(NoiseTrial::Both, 1.0).unwrap();
        assert_eq!((g.lags, g.nodes), (span(3..=20), span(2..=30)));
        let g = GridSpec::st_table(NoiseTrial::OutputOnly, 1.5).unwrap();
        assert_eq!(g.nodes, span(2..=50));
        assert!(GridSpec::st_table(NoiseTrial::Both, 1.5).is_err());
        assert!(GridSpec::st_table(NoiseTrial::OutputOnly, 0.2).is_err());
    }

    #[test]
    fn mt_grid_examples() {
        let best = row(20, 15, 0, Some(1.0));
        let g = mt_grid_from_st(&best, 0.1, NoiseTrial::OutputOnly, Stage::Coarse).unwrap();
        assert_eq!(g.lags, vec![15]);
        assert_eq!(g.leads, vec![15, 16, 17, 18]);
        assert_eq!(g.nodes, span(25..=50));
        let g = mt_grid_from_st(&best, 1.5, NoiseTrial::OutputOnly, Stage::Fine).unwrap();
        assert_eq!(g.nodes, span(40..=80));
        assert_eq!(g.restarts, 100);
        let g = mt_grid_from_st(&best, 0.1, NoiseTrial::InputOnly, Stage::Fine).unwrap();
        assert_eq!(g.restarts, 200);
        assert_eq!(g.nodes, span(2..=15));
        assert_eq!(mt_fine_restarts(NoiseTrial::Both), 10);
        assert!(mt_grid_from_st(&best, 1.5, NoiseTrial::InputOnly, Stage::Fine).is_err());
        assert!(mt_grid_from_st(&best, 1.5, NoiseTrial::Both, Stage::Fine).is_err());
    }

    #[test]
    fn refine_clamps_to_coarse_extent() {
        let g = GridSpec::st_table(NoiseTrial::OutputOnly, 0.1).unwrap();
        let fine = g.refine(&row(2, 15, 0, Some(1.0)), 2, 1, 10);
        assert_eq!(fine.nodes, vec![2, 3, 4]);
        assert_eq!(fine.lags, vec![14, 15]);
        assert_eq!(fine.stage, Stage::Fine);
        assert!(fine.leads.is_empty());
    }

    #[test]
    fn cell_seeds_are_stable_and_distinct() {
        let a = cell_seed(7, 5, 8, 0, 0);
        assert_eq!(a, cell_seed(7, 5, 8, 0, 0));
        let others = [
            cell_seed(8, 5, 8, 0, 0),
            cell_seed(7, 6, 8, 0, 0),
            cell_seed(7, 5, 9, 0, 0),
            cell_seed(7, 5, 8, 1, 0),
            cell_seed(7, 5, 8, 0, 1),
        ];
        assert!(others.iter().all(|&s| s != a));
    }

    fn result_of(rows: Vec<SweepRow>) -> SweepResult {
        let selected = select_best(&rows).unwrap().clone();
        SweepResult {
            grid: GridSpec::smoke(),
            rows,
            selected,
            provenance: Provenance {
                dataset_hash: String::new(),
                config_hash: String::new(),
            },
        }
    }

    #[test]
    fn heatmap_projection() {
        let mut rows = Vec::new();
        for n in [4, 8] {
            for r in 0..3 {
                rows.push(row(n, 5, r, Some((n * 10 + r) as f64)));
            }
        }
        rows[4] = row(8, 5, 1, None);
        rows.push(row(4, 7, 0, Some(1.0)));
        let res = result_of(rows);
        let hm = emit_heatmap(&res, 5, 0).unwrap();
        assert_eq!(hm.nodes, vec![4, 8]);
        assert_eq!(hm.restarts, vec![0, 1, 2]);
        assert_eq!(hm.cells[0], vec![Some(80.0), Some(82.0), Some(84.0)]);
        assert_eq!(hm.cells[1][1], None);
        let csv = hm.to_csv();
        assert!(csv.starts_with("nodes,seed_0,seed_1,seed_2\n"));
        assert!(csv.lines().nth(2).unwrap().contains(",diverged,"));
        assert!(emit_heatmap(&res, 9, 0).is_err());
    }
}
