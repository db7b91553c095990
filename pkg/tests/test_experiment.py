import json
from dataclasses import replace

import numpy as np
import pytest

from metademod.channel import ScenarioConfig, toy_scenario
from metademod.demodnet import NetArch, NetParams
from metademod.evaluate import GridSpec
from metademod.experiment import (MEAN_HEADER, RAW_HEADER, ExperimentConfig,
                                  JointConfig, NetConfig, aggregate_rows,
                                  config_from_dict, config_to_dict, dump_grid,
                                  load_checkpoint, load_config, load_pilots,
                                  run_experiment, save_checkpoint, save_pilots,
                                  train_scheme)
from metademod.metalearn import MetaConfig
from metademod.numerics import rng_stream
from oracles import random_dataset, random_net


def tiny_config(**overrides):
    """Small but complete toy-style experiment for fast end-to-end tests."""
    base = dict(
        scenario=toy_scenario(),
        net=NetConfig(hidden=(6,), activation="tanh", init="gaussian"),
        meta=MetaConfig(eta=0.1, kappa=0.025, inner_batch=4, outer_batch=4,
                        meta_iterations=30, adapt_batch=1, adapt_epochs=10),
        joint=JointConfig(lr=0.01, batch=4, iterations=40),
        schemes=("maml", "joint", "fixed", "ideal"),
        p_sweep=(1, 2),
        trials=2,
        test_symbols=400,
        seed=77,
        out_dir="unused",
    )
    base.update(overrides)
    return ExperimentConfig(**base)


# ---------------- config files ----------------

def test_presets_load():
    toy = load_config("toy")
    assert toy.scenario.scheme == "pam4"
    assert toy.scenario.noise == "real"
    assert toy.meta.kappa == 0.025
    real = load_config("realistic")
    assert real.scenario.scheme == "qam16"
    assert real.scenario.fading == "rayleigh"
    assert real.meta.adapt_small_batch_one
    assert real.net.init == "gaussian"


def test_config_roundtrip(tmp_path):
    cfg = tiny_config()
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(config_to_dict(cfg)))
    assert load_config(path) == cfg


def test_config_unknown_field_message(tmp_path):
    with pytest.raises(ValueError, match="meta.ka_ppa"):
        config_from_dict({"meta": {"ka_ppa": 1.0}})
    with pytest.raises(ValueError, match="trialz"):
        config_from_dict({"trialz": 3})


def test_config_syntax_error_has_line(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "trials": 3,\n  oops\n}')
    with pytest.raises(ValueError, match=r"broken\.json:3:"):
        load_config(path)


def test_config_invalid_values():
    with pytest.raises(ValueError, match="p_sweep"):
        tiny_config(p_sweep=(0, 2))
    with pytest.raises(ValueError, match="schemes"):
        tiny_config(schemes=("maml", "magic"))
    with pytest.raises(ValueError, match="trials"):
        tiny_config(trials=0)
    with pytest.raises(FileNotFoundError):
        load_config("no_such_file.json")


# ---------------- checkpoints and pilot files ----------------

def test_checkpoint_roundtrip(tmp_path):
    params = random_net((2, 5, 4), "tanh", seed=1)
    path = tmp_path / "ckpt.json"
    save_checkpoint(path, params)
    back = load_checkpoint(path)
    assert back.arch == params.arch
    assert np.array_equal(back.theta, params.theta)


def test_checkpoint_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_checkpoint(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ValueError, match="corrupt checkpoint"):
        load_checkpoint(bad)


def test_pilots_roundtrip(tmp_path):
    ds = random_dataset(4, 6, seed=2)
    path = tmp_path / "pilots.csv"
    save_pilots(path, ds)
    back = load_pilots(path)
    assert np.array_equal(back.labels, ds.labels)
    assert np.array_equal(back.received, ds.received)


def test_pilots_header_check(tmp_path):
    path = tmp_path / "pilots.csv"
    path.write_text("a,b,c\n0,1.0,2.0\n")
    with pytest.raises(ValueError, match="header"):
        load_pilots(path)


# ---------------- experiment runner ----------------

def test_fixed_only_runs_without_meta_training(tmp_path):
    cfg = tiny_config(schemes=("fixed",), trials=1, p_sweep=(1,))
    rows = run_experiment(cfg, out_dir=tmp_path)
    assert len(rows) == 1
    assert rows[0].scheme == "fixed"
    assert (tmp_path / "results_raw.csv").exists()


def test_experiment_outputs_and_schema(tmp_path):
    cfg = tiny_config()
    rows = run_experiment(cfg, out_dir=tmp_path)
    assert len(rows) == 4 * 2 * 2  # schemes x P values x trials
    raw = (tmp_path / "results_raw.csv").read_text().splitlines()
    assert raw[0] == RAW_HEADER == "scheme,P,trial,ser,std_error"
    assert len(raw) == 1 + len(rows)
    mean = (tmp_path / "results_mean.csv").read_text().splitlines()
    assert mean[0] == MEAN_HEADER == "scheme,P,mean_ser,trials"
    assert len(mean) == 1 + 4 * 2
    meta = json.loads((tmp_path / "metadata.json").read_text())
    assert meta["config"]["seed"] == 77
    assert "formula_ser" in meta["ideal_reference"]
    assert (tmp_path / "ser_vs_p.png").exists()
    for row in rows:
        assert 0.0 <= row.ser <= 1.0


def test_experiment_determinism_and_thread_invariance(tmp_path):
    cfg = tiny_config()
    run_experiment(cfg, out_dir=tmp_path / "a")
    run_experiment(cfg, out_dir=tmp_path / "b")
    run_experiment(cfg, out_dir=tmp_path / "c", threads=2)
    raw = [(tmp_path / d / "results_raw.csv").read_bytes() for d in "abc"]
    mean = [(tmp_path / d / "results_mean.csv").read_bytes() for d in "abc"]
    assert raw[0] == raw[1] == raw[2]
    assert mean[0] == mean[1] == mean[2]


def test_offline_reuse_rows_stable_across_sweeps(tmp_path):
    # meta-training happens once per trial: adding P values to the sweep must
    # not change the rows of existing (scheme, P, trial) cells
    short = run_experiment(tiny_config(p_sweep=(1, 2)), out_dir=tmp_path / "short")
    longer = run_experiment(tiny_config(p_sweep=(1, 2, 4)), out_dir=tmp_path / "long")
    short_cells = {(r.scheme, r.P, r.trial): r for r in short}
    longer_cells = {(r.scheme, r.P, r.trial): r for r in longer}
    for key, row in short_cells.items():
        assert longer_cells[key] == row


def test_realistic_metadata_reports_formula_variants(tmp_path):
    from metademod.channel import realistic_scenario

    cfg = tiny_config(
        scenario=realistic_scenario(),
        net=NetConfig(hidden=(4,), activation="relu", init="gaussian"),
        meta=MetaConfig(eta=0.01, kappa=0.001, inner_batch=8, outer_batch=8,
                        meta_iterations=5, adapt_batch=8, adapt_epochs=2,
                        adapt_small_batch_one=True),
        schemes=("fixed", "ideal"),
        p_sweep=(2,),
        trials=1,
        test_symbols=200,
    )
    run_experiment(cfg, out_dir=tmp_path)
    ref = json.loads((tmp_path / "metadata.json").read_text())["ideal_reference"]
    assert ref["formula_ser_verbatim_mean"] > 1.0  # negative d_min branch
    assert 0.0 < ref["formula_ser_abs_branches_mean"] < ref["formula_ser_verbatim_mean"]


def test_aggregate_rows_means():
    from metademod.experiment import ResultRow

    rows = [ResultRow("maml", 1, 0, 0.2, 0.0), ResultRow("maml", 1, 1, 0.4, 0.0)]
    assert aggregate_rows(rows) == [("maml", 1, pytest.approx(0.3), 2)]


def test_train_scheme_matches_trial_zero(tmp_path):
    cfg = tiny_config(trials=1, p_sweep=(1,), schemes=("maml",))
    direct = train_scheme(cfg, "maml", trial=0)
    again = train_scheme(cfg, "maml", trial=0)
    assert np.array_equal(direct.theta, again.theta)


# ---------------- grid dump ----------------

def test_dump_grid_tiny(tmp_path):
    params = NetParams(NetArch((2, 30, 4), "tanh"), np.zeros(214))
    ckpt = tmp_path / "ckpt.json"
    save_checkpoint(ckpt, params)
    grid = GridSpec(re_range=(-1, 1), im_range=(-1, 1), re_points=2, im_points=2)
    csv_path = dump_grid(ckpt, grid, tmp_path, stem="g")
    lines = csv_path.read_text().splitlines()
    assert lines[0] == "re,im,p0,p1,p2,p3"
    assert len(lines) == 5
    probs = np.array([[float(v) for v in ln.split(",")[2:]] for ln in lines[1:]])
    assert np.max(np.abs(probs.sum(axis=1) - 1.0)) <= 1e-9
    meta = json.loads((tmp_path / "g_meta.json").read_text())
    assert "origin_symmetry" in meta
    assert (tmp_path / "g.png").exists()


def test_dump_grid_missing_checkpoint(tmp_path):
    with pytest.raises(FileNotFoundError):
        dump_grid(tmp_path / "none.json", GridSpec(), tmp_path)
