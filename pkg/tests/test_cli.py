import json

import pytest

from wigner2e.cli import (EXIT_COST, EXIT_SCHEMA, SchemaError,
                          bundled_scenarios, load_config, main)

TINY = """
[run]
model = "all"
horizon = 0.2
dt = 2e-3
record_every = 20
seed = 3

[interaction]
coupling_lambda = 1.0
softening = 0.5

[grid]
d = 1
x_min = -8.0
x_max = 8.0
coherence_length = 8.0
n_x = 32
n_p = 32
n_x_pair = 16
n_p_pair = 16

[packet1]
center_r = [-3.0]
center_p = [0.9]
sigma = [0.7]

[packet2]
center_r = [3.0]
center_p = [-0.9]
sigma = [0.7]

[force_model]
n_particles = 4000
n_batches = 4
h = 2e-3
"""


@pytest.fixture()
def tiny_config(tmp_path):
    path = tmp_path / "tiny.toml"
    path.write_text(TINY)
    return path


def test_bundled_scenarios_all_validate():
    names = bundled_scenarios()
    assert len(names) >= 5
    for name in names:
        assert main(["validate", name]) == 0


def test_list_command(capsys):
    assert main(["list"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert len(out) >= 5


def test_missing_section_is_schema_error(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text("[run]\nmodel = 'full2e'\n")
    assert main(["validate", str(path)]) == EXIT_SCHEMA
    with pytest.raises(SchemaError):
        load_config(path)


def test_unknown_model_is_schema_error(tmp_path, tiny_config):
    text = tiny_config.read_text().replace('model = "all"',
                                           'model = "magic"')
    bad = tmp_path / "bad_model.toml"
    bad.write_text(text)
    assert main(["validate", str(bad)]) == EXIT_SCHEMA


def test_run_writes_artifacts(tmp_path, tiny_config):
    out = tmp_path / "out"
    assert main(["run", str(tiny_config), "--output-dir", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"] == "ok"
    assert manifest["seed"] == 3
    assert "numpy_version" in manifest
    assert (out / "comparison.csv").exists()
    series = [p.name for p in out.glob("*_series.csv")]
    assert len(series) == 3


def test_runs_are_reproducible(tmp_path, tiny_config):
    outs = []
    for tag in ("a", "b"):
        out = tmp_path / tag
        assert main(["run", str(tiny_config), "--output-dir",
                     str(out)]) == 0
        outs.append(out)
    for name in ("comparison.csv", "force_series.csv", "full2e_series.csv"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_cost_guard_exit_code(tmp_path, tiny_config, monkeypatch):
    monkeypatch.setenv("WIGNER2E_MAX_CELLS", "1000")
    text = tiny_config.read_text().replace('model = "all"',
                                           'model = "full2e"')
    cfg = tmp_path / "big.toml"
    cfg.write_text(text)
    assert main(["run", str(cfg), "--output-dir",
                 str(tmp_path / "o")]) == EXIT_COST


def test_sweep_runs_subdirectories(tmp_path, tiny_config):
    text = tiny_config.read_text().replace('model = "all"',
                                           'model = "bbgky"')
    cfg = tmp_path / "sweep.toml"
    cfg.write_text(text)
    out = tmp_path / "sweep_out"
    assert main(["run", str(cfg), "--output-dir", str(out), "--sweep",
                 "interaction.coupling_lambda=0.5,1.0"]) == 0
    assert (out / "interaction.coupling_lambda=0.5" / "manifest.json").exists()
    assert (out / "interaction.coupling_lambda=1.0" / "manifest.json").exists()


def test_seed_override(tmp_path, tiny_config):
    out = tmp_path / "seeded"
    assert main(["run", str(tiny_config), "--output-dir", str(out),
                 "--seed", "42"]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 42
