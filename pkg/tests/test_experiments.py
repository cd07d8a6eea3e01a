import json

import numpy as np
import pytest
import yaml

from thzisac.experiments.cli import EXIT_CONFIG, EXIT_OK, main
from thzisac.experiments.config import (EXPERIMENT_IDS, ConfigError, default_config, dump_config, load_config,
                                        loads_config)
from thzisac.experiments.runner import run_experiment

SMALL = """
seed: 3
profiles:
  names: [high_performance, low_cost]
experiments:
  capacity_vs_snr:
    snr0_db: {start: 0, stop: 40, points: 5}
  rmse_vs_snr:
    snr0_db: {start: 0, stop: 40, points: 3}
  gamma_sweep:
    gamma_eff: {start: 0.001, stop: 0.1, points: 4, scale: log}
"""


# -- configuration -----------------------------------------------------------

def test_defaults_cover_all_experiments():
    cfg = default_config()
    assert tuple(cfg.experiments) == EXPERIMENT_IDS
    assert cfg.seed == 0
    assert len(cfg.config_hash()) == 16


def test_empty_file_gives_defaults(tmp_path):
    p = tmp_path / "empty.yaml"
    p.write_text("")
    assert load_config(p).config_hash() == default_config().config_hash()


def test_dump_round_trip():
    cfg = loads_config(SMALL)
    again = loads_config(dump_config(cfg))
    assert again.config_hash() == cfg.config_hash()


def test_hash_ignores_output_but_not_seed():
    a = loads_config("output: {directory: a}")
    b = loads_config("output: {directory: b}")
    assert a.config_hash() == b.config_hash()
    assert a.with_seed(1).config_hash() != a.config_hash()


def test_unknown_key_reports_line():
    text = "seed: 1\nscenario:\n  carrier_hz: 3.0e11\n  colour: blue\n"
    with pytest.raises(ConfigError, match=r"<string>:4.*colour"):
        loads_config(text)


@pytest.mark.parametrize("text", [
    "seed: -1",
    "scenario: {tx_power_dbm: 500}",
    "experiments: [nonsense]",
    "profiles: {names: [imaginary]}",
    "monte_carlo: {mi_samples: 10}",
    "experiments: {cd_frontier: {target_fractions: [0.5, 2.0]}}",
    "experiments: {cd_frontier: {constellation: qam15}}",
    "seed: [1, 2",
])
def test_invalid_configs_rejected(text):
    with pytest.raises(ConfigError):
        loads_config(text)


def test_numeric_strings_converted():
    cfg = loads_config("scenario: {carrier_hz: '3e11'}")
    assert cfg.scenario["carrier_hz"] == 3e11


def test_extrapolation_needs_opt_in():
    with pytest.raises(ConfigError, match="allow_extrapolation"):
        loads_config("experiments: {freq_sweep: {carrier_hz: {start: 5.0e10, stop: 1.0e12, points: 3}}}")
    cfg = loads_config("experiments: {freq_sweep: {carrier_hz: {start: 5.0e10, stop: 1.0e12, points: 3, "
                       "allow_extrapolation: true}}}")
    assert cfg.extrapolations


def test_profile_overrides_apply():
    cfg = loads_config("profiles: {names: [low_cost], overrides: {low_cost: {gamma_eff: 0.02}}}")
    (prof,) = cfg.hardware_profiles()
    assert prof.gamma_eff == 0.02


# -- runner ------------------------------------------------------------------

def _read(path):
    with open(path) as fh:
        return fh.read()


def test_run_experiment_outputs(tmp_path):
    cfg = loads_config(SMALL)
    res = run_experiment(cfg, "capacity_vs_snr", tmp_path)
    assert res.n_rows == 5
    csv_text = _read(tmp_path / "capacity_vs_snr.csv")
    header = csv_text.splitlines()[0]
    assert header.startswith("snr0(dB),high_performance_capacity(bits/symbol)")
    svg = _read(tmp_path / "capacity_vs_snr.svg")
    assert cfg.config_hash() in svg and svg.startswith("<svg")
    meta = json.loads(_read(tmp_path / "capacity_vs_snr.meta.json"))
    assert meta["config_hash"] == cfg.config_hash()
    cap = res.column("high_performance_capacity")
    assert np.all(np.diff(cap) > 0)


def test_gamma_sweep_columns_below_ceiling(tmp_path):
    res = run_experiment(loads_config(SMALL), "gamma_sweep", tmp_path)
    ceil = res.column("ceiling")
    for snr in (20, 30, 40, 50):
        assert np.all(res.column(f"capacity_snr{snr}dB") <= ceil + 1e-12)


def test_parallel_run_matches_serial(tmp_path):
    cfg = loads_config(SMALL)
    run_experiment(cfg, "rmse_vs_snr", tmp_path / "a", jobs=1)
    run_experiment(cfg, "rmse_vs_snr", tmp_path / "b", jobs=2)
    assert _read(tmp_path / "a" / "rmse_vs_snr.csv") == _read(tmp_path / "b" / "rmse_vs_snr.csv")


def test_seed_changes_monte_carlo_columns(tmp_path):
    base = loads_config(SMALL + "  distance_sweep:\n    range_m: {start: 5.0e5, stop: 5.0e6, points: 3}\n")
    run_experiment(base, "distance_sweep", tmp_path / "a")
    run_experiment(base.with_seed(99), "distance_sweep", tmp_path / "b")
    # pointing losses are sampled, so the seed shows up in the numbers
    assert _read(tmp_path / "a" / "distance_sweep.csv") != _read(tmp_path / "b" / "distance_sweep.csv")


# -- command line ------------------------------------------------------------

def test_cli_run_and_exit_codes(tmp_path, capsys):
    cfg_path = tmp_path / "c.yaml"
    cfg_path.write_text(SMALL)
    out = tmp_path / "out"
    assert main(["run", str(cfg_path), "-o", str(out), "--only", "capacity_vs_snr,gamma_sweep"]) == EXIT_OK
    assert (out / "capacity_vs_snr.csv").exists() and (out / "gamma_sweep.csv").exists()
    assert not (out / "rmse_vs_snr.csv").exists()
    run = json.loads(_read(out / "run.json"))
    assert run["seed"] == 3

    bad = tmp_path / "bad.yaml"
    bad.write_text("scenario: {frequency: 1}\n")
    assert main(["run", str(bad)]) == EXIT_CONFIG
    assert "bad.yaml:1" in capsys.readouterr().err
    assert main(["run", str(cfg_path), "--only", "freq_sweep"]) == EXIT_CONFIG
    assert main(["run", str(tmp_path / "missing.yaml")]) == EXIT_CONFIG


def test_cli_validate_and_list(tmp_path, capsys):
    cfg_path = tmp_path / "c.yaml"
    cfg_path.write_text(SMALL)
    assert main(["validate", str(cfg_path)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "OK" in out
    body = yaml.safe_load("\n".join(line for line in out.splitlines() if not line.startswith("#")))
    assert body["seed"] == 3
    assert main(["list-profiles", "--json"]) == EXIT_OK
    profs = json.loads(capsys.readouterr().out)
    assert [p["name"] for p in profs][0] == "state_of_the_art"
    assert main(["list-profiles"]) == EXIT_OK


def test_cli_numerical_failure_exit_code(tmp_path, monkeypatch):
    from thzisac.experiments import cli
    from thzisac.experiments.runner import NumericalFailure

    def boom(*a, **k):
        raise NumericalFailure("capacity_vs_snr: NaN in column x")

    monkeypatch.setattr(cli, "run_all", boom)
    cfg_path = tmp_path / "c.yaml"
    cfg_path.write_text(SMALL)
    assert cli.main(["run", str(cfg_path), "-o", str(tmp_path / "o")]) == cli.EXIT_NUMERICAL
