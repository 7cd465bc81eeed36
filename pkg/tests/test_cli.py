import json

import numpy as np
import pytest

from degspde.cli import main, run
from degspde.config import ConfigError, build_field, parse_config, parse_field_spec
from degspde.io import read_csv
from degspde.spectral import build_basis

MINIMAL = """\
# minimal run
alpha = 4
beta = 1
delta = 0.45
sigma = 0.15
epsilon = 0.2
N = 8
dt = 0.002
T = 0.1
"""


@pytest.fixture
def minimal(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(MINIMAL)
    return path


def test_minimal_file_fills_defaults(minimal):
    cfg = parse_config(minimal, warn=False)
    assert cfg["N"] == 8 and cfg["epsilon"] == 0.2
    assert cfg["seed"] == 0 and cfg["bc"] == "dirichlet"
    assert cfg.sources["alpha"].endswith("run.cfg:2") and cfg.sources["seed"] == "default"
    assert "alpha = 4  # " in cfg.resolved_text()


def test_override_supersedes_file(minimal):
    cfg = parse_config(minimal, ["dt=0.001"], warn=False)
    assert cfg["dt"] == 0.001 and cfg.sources["dt"] == "override 1"
    assert cfg.solver_config().dt == 0.001


def test_alpha_below_two_rejected(minimal):
    with pytest.raises(ConfigError, match="alpha"):
        parse_config(minimal, ["alpha=1.5"], warn=False)


def test_unknown_key_names_line(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text(MINIMAL + "colour = red\n")
    with pytest.raises(ConfigError, match=r"'colour'.*bad.cfg:10"):
        parse_config(path, warn=False)


def test_type_mismatch_names_key_and_line(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text(MINIMAL.replace("N = 8", "N = eight"))
    with pytest.raises(ConfigError, match=r"'N'.*bad.cfg:7"):
        parse_config(path, warn=False)


def test_missing_required_key(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text(MINIMAL.replace("sigma = 0.15\n", ""))
    with pytest.raises(ConfigError, match="sigma"):
        parse_config(path, warn=False)


def test_duplicate_key(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text(MINIMAL + "dt = 0.01\n")
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config(path, warn=False)


def test_regime_warning_emitted(minimal):
    with pytest.warns(UserWarning, match="regime"):
        parse_config(minimal, ["delta=0.3"])


def test_field_specs():
    basis = build_basis("dirichlet", np.pi, 8)
    x = build_field("sine:0.9", basis)
    assert float(basis.eigenfunctions(np.pi / 2) @ x) == pytest.approx(0.9, rel=1e-12)
    assert np.count_nonzero(build_field("mode:3:0.5", basis)) == 1
    assert not np.any(build_field("zero", basis))
    with pytest.raises(ValueError):
        parse_field_spec("blob:1")


def test_main_exit_codes(tmp_path, capsys):
    assert main(["lemma-suite", "--set", "lemma_eps=0.2", "--set", "lemma_exponents=1,2", "--out", str(tmp_path / "l")]) == 0
    assert (tmp_path / "l" / "verdict.txt").read_text().rstrip().endswith("OVERALL PASS")
    assert main(["simulate", "--set", "alpha=1.5", "--out", str(tmp_path / "x")]) == 2
    assert "alpha" in capsys.readouterr().err


def test_simulate_outputs_and_reproducibility(minimal, tmp_path):
    cfg = parse_config(minimal, ["trajectories=12", "chunk_size=5", "x0=sine:0.5", "monitor_stride=10"], warn=False)
    assert run("simulate", cfg, tmp_path / "a", threads=1) == 0
    assert run("simulate", cfg, tmp_path / "b", threads=3) == 0
    for name in ("monitors.csv", "separation.csv", "exceedance.csv"):
        a = (tmp_path / "a" / name).read_bytes()
        assert a == (tmp_path / "b" / name).read_bytes()
        assert a.startswith(b"# ") and b"\r" not in a
    for name in ("config.resolved", "lineage.json", "version.txt", "verdict.txt", "final.ckpt"):
        assert (tmp_path / "a" / name).exists()
    lineage = json.loads((tmp_path / "a" / "lineage.json").read_text())
    assert lineage["seed"] == 0 and lineage["command"] == "simulate"
    assert (tmp_path / "a" / "version.txt").read_text().splitlines()[1].startswith("code ")
    header, rows = read_csv(tmp_path / "a" / "separation.csv")
    assert header == ["trajectory", "sup_abs", "layer"] and len(rows) == 12


def test_bel_linear_mode_passes(minimal, tmp_path):
    cfg = parse_config(
        minimal,
        ["drift_mode=linear", "noise_mode=additive", "bel_observable=mode_projection(1)", "bel_samples=4000",
         "bel_chunk=2000", "bel_t=0.1", "bel_dt=0.005"],
        warn=False,
    )
    assert run("bel", cfg, tmp_path, threads=1) == 0
    text = (tmp_path / "report.csv").read_text()
    assert "analytic," in text and "analytic,nan" not in text


def test_failing_verdict_writes_failure_list(minimal, tmp_path):
    # a zero ks bound cannot be met
    cfg = parse_config(
        minimal,
        ["erg_horizons=0.2,0.4", "erg_burn_in=0.1", "erg_per_chain=10", "erg_ks_max=0", "monitor_stride=10"],
        warn=False,
    )
    assert run("ergodicity", cfg, tmp_path, threads=1) == 1
    failures = json.loads((tmp_path / "failures.json").read_text())
    assert failures and all("assertion" in f and "measured" in f for f in failures)
