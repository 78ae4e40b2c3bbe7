"""Smoke test for the narx_lab extension module.

Build and import with either
    maturin develop -m crates/python/Cargo.toml
or
    cargo build -p narx-python --release
    cp target/release/libnarx_lab.so python/narx_lab.so
then run `python python/smoke_test.py`.
"""

import math
import os
import sys
import tempfile

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import narx_lab  # noqa: E402


def main():
    cfg = narx_lab.ExperimentConfig(preset="smoke").with_overrides(
        ["simulation.discard_samples=2000", "simulation.keep_samples=1200", "excitation.total_samples=3200"]
    )
    x, y = narx_lab.simulate(cfg)
    assert len(x) == len(y) == 1200
    assert all(math.isfinite(v) for v in y)

    xn, yn = narx_lab.apply_noise(x, y, trial=1, fraction=0.01, seed=3)
    assert xn == x and yn != y

    assert narx_lab.nmse(y, y) == 0.0
    mean = sum(y) / len(y)
    assert abs(narx_lab.nmse(y, [mean] * len(y)) - 100.0) < 1e-10

    short = cfg.with_overrides(["train.max_epochs=300"])
    model, trace = narx_lab.train(xn, yn, n_lags=4, n_leads=2, n_hidden=6, config=short, seed=1)
    assert trace["stopped_epoch"] - trace["best_epoch"] <= 100 or trace["stopped_epoch"] == 300
    assert model.n_lags == 4 and model.n_leads == 2

    report = narx_lab.evaluate(model, x, y, xn, yn, split="test")
    assert report["mpo_nmse_clean"] is not None and report["mpo_nmse_clean"] < 100.0
    again = narx_lab.Model.from_json(model.to_json())
    start = report["start_index"]
    assert again.predict_mpo(xn, yn, start, start + 20) == report["mpo_prediction"][:20]

    try:
        narx_lab.ExperimentConfig().with_overrides(["noise.fraction=-1"])
    except narx_lab.NarxLabError as e:
        assert "exit code 2" in str(e)
    else:
        raise AssertionError("invalid override accepted")

    with tempfile.TemporaryDirectory() as out:
        narx_lab.run_stage("simulate", out, short)
        narx_lab.run_stage("corrupt", out, short)
        narx_lab.run_stage("train", out, short)
        narx_lab.run_stage("evaluate", out)
        assert os.path.getsize(os.path.join(out, "model_evaluation.json")) > 0

    print("narx_lab smoke test passed:", model, "test MPO NMSE %.3f%%" % report["mpo_nmse_clean"])


if __name__ == "__main__":
    main()
