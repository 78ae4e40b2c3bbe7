use narx_core::network::TrainConfig;
use narx_core::noise::{apply_noise, NoiseSpec, NoiseTrial};
use narx_core::oscillator::{generate_excitation, simulate, ExcitationSpec, OscillatorParams, SimulationSpec};
use narx_core::sweep::{run_grid, select_best, GridSpec, Stage, SweepData};

fn tiny_data() -> SweepData {
    let excitation = ExcitationSpec {
        total_samples: 1600,
        rng_seed: 5,
        ..ExcitationSpec::default()
    };
    let sim = SimulationSpec {
        discard_samples: 1000,
        keep_samples: 600,
        ..SimulationSpec::default()
    };
    let (x, y) = simulate(&OscillatorParams::default(), &generate_excitation(&excitation).unwrap(), &sim).unwrap();
    let spec = NoiseSpec {
        trial: NoiseTrial::Both,
        fraction: 0.1,
        rng_seed: 9,
    };
    let (xn, yn) = apply_noise(&x, &y, &spec).unwrap();
    SweepData {
        clean_x: x,
        clean_y: y,
        noisy_x: xn,
        noisy_y: yn,
    }
}

fn tiny_grid(leads: Vec<usize>) -> GridSpec {
    GridSpec {
        lags: vec![2, 3],
        nodes: vec![2, 4],
        leads,
        restarts: 2,
        stage: Stage::Coarse,
    }
}

fn config() -> TrainConfig {
    TrainConfig {
        learning_rate: 1e-2,
        max_epochs: 60,
        patience: 10,
        ..TrainConfig::default()
    }
}

#[test]
fn serial_parallel_and_repeat_runs_agree() {
    let data = tiny_data();
    let grid = tiny_grid(vec![]);
    let serial = run_grid(&data, &grid, &config(), 3, Some(1)).unwrap();
    let parallel = run_grid(&data, &grid, &config(), 3, Some(3)).unwrap();
    let again = run_grid(&data, &grid, &config(), 3, Some(1)).unwrap();
    assert_eq!(serial, parallel);
    assert_eq!(serial, again);
    assert_eq!(serial.to_csv(), parallel.to_csv());
    assert_eq!(serial.rows.len(), 2 * 2 * 2);

    let other_seed = run_grid(&data, &grid, &config(), 4, Some(1)).unwrap();
    assert_ne!(serial.rows, other_seed.rows);
}

#[test]
fn selection_is_optimal_and_rows_are_complete() {
    let data = tiny_data();
    let res = run_grid(&data, &tiny_grid(vec![3, 4]), &config(), 1, None).unwrap();
    assert_eq!(res.rows.len(), 2 * 2 * 2 * 2);
    let best = res.selected.val_mpo_nmse.unwrap();
    for r in res.rows.iter().filter(|r| !r.diverged) {
        assert!(r.val_mpo_nmse.unwrap() >= best);
        assert!(r.test_mpo_nmse_clean.is_some());
        assert!(r.best_epoch >= 1);
    }
    assert_eq!(select_best(&res.rows).unwrap(), &res.selected);
    assert!(res.rows.iter().all(|r| r.leads == 3 || r.leads == 4));
    assert_eq!(res.provenance.dataset_hash.len(), 64);
}

#[test]
fn adding_cells_keeps_existing_results() {
    let data = tiny_data();
    let small = run_grid(&data, &tiny_grid(vec![]), &config(), 8, Some(1)).unwrap();
    let mut wider = tiny_grid(vec![]);
    wider.nodes.push(5);
    let big = run_grid(&data, &wider, &config(), 8, Some(1)).unwrap();
    for r in &small.rows {
        assert!(big.rows.contains(r), "{r:?} missing after widening the grid");
    }
}
