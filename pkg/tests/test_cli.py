import numpy as np
import pytest

from crackhom import cli
from crackhom.cli import (EXIT_CONFIG, EXIT_IDENTITY, EXIT_OK, EXIT_SOLVER,
                          ConfigError, RunConfig)

FAST_TOML = """
[discretization]
h = 0.25

[solver]
epsilon_list = [0.5]
n_random = 2
alpha_list = [0.5]
"""


@pytest.fixture()
def fast_config(tmp_path):
    p = tmp_path / "run.toml"
    p.write_text(FAST_TOML)
    return p


def test_defaults_roundtrip():
    cfg = RunConfig.from_dict({})
    assert cfg.physics["kappa"] == 0.1
    assert len(cfg.hash) == 12


def test_unknown_section_rejected():
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"physic": {}})


def test_unknown_key_rejected():
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"physics": {"kapa": 0.1}})


def test_validation_errors():
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"solver": {"epsilon": -1.0}})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"solver": {"epsilon": 9.0}})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"physics": {"mu": -0.5}})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"geometry": {"crack_theta": 0.0}})


def test_hash_depends_on_values():
    a = RunConfig.from_dict({})
    b = RunConfig.from_dict({"physics": {"kappa": 0.2}})
    assert a.hash != b.hash
    c = RunConfig.from_dict({})
    assert a.hash == c.hash


def test_main_config_error_exit(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("[geometry]\nwat = 1\n")
    assert cli.main(["solve-contact", "--config", str(bad),
                     "--out", str(tmp_path)]) == EXIT_CONFIG


def test_main_missing_config_file(tmp_path):
    assert cli.main(["solve-contact", "--config", str(tmp_path / "nope.toml"),
                     "--out", str(tmp_path)]) == EXIT_CONFIG


def test_verify_unfolding_ok_and_csv(tmp_path, fast_config):
    rc = cli.main(["verify-unfolding", "--config", str(fast_config),
                   "--out", str(tmp_path / "o")])
    assert rc == EXIT_OK
    body = (tmp_path / "o" / "unfolding_checks.csv").read_text()
    header = body.splitlines()[0]
    assert header.startswith("config_hash,")
    assert ",pass" in header
    assert " 0\n" not in body  # all checks pass


def test_verify_unfolding_identity_failure(tmp_path, fast_config,
                                           monkeypatch):
    import crackhom.unfolding as uf
    orig = uf.unfolded_l2_norm
    monkeypatch.setattr(uf, "unfolded_l2_norm",
                        lambda *a, **k: orig(*a, **k) * (1 + 1e-6))
    rc = cli.main(["verify-unfolding", "--config", str(fast_config),
                   "--out", str(tmp_path / "bad")])
    assert rc == EXIT_IDENTITY


def test_solver_failure_exit(tmp_path):
    p = tmp_path / "hard.toml"
    p.write_text("[solver]\ntol_fixed_point = 1e-30\n")
    rc = cli.main(["coulomb", "--config", str(p),
                   "--out", str(tmp_path / "o")])
    assert rc == EXIT_SOLVER


def test_byte_identical_reruns(tmp_path, fast_config):
    for d in ("a", "b"):
        assert cli.main(["korn-report", "--config", str(fast_config),
                         "--out", str(tmp_path / d)]) == EXIT_OK
    a = (tmp_path / "a" / "korn_report.csv").read_bytes()
    b = (tmp_path / "b" / "korn_report.csv").read_bytes()
    assert a == b


def test_out_root_env(tmp_path, fast_config, monkeypatch):
    monkeypatch.setenv(cli.OUT_ROOT_ENV, str(tmp_path / "root"))
    assert cli.main(["korn-report", "--config", str(fast_config)]) == EXIT_OK
    assert (tmp_path / "root" / "korn-report" / "korn_report.csv").exists()


def test_solve_contact_artifacts(tmp_path, fast_config):
    p = tmp_path / "run.toml"
    p.write_text(FAST_TOML + "\n[outputs]\nwrite_matrix = true\n")
    rc = cli.main(["solve-contact", "--config", str(p),
                   "--out", str(tmp_path / "o"), "--threads", "2"])
    assert rc == EXIT_OK
    out = tmp_path / "o"
    assert (out / "kkt_report.csv").exists()
    assert (out / "contact_solution.vtk").exists()
    assert (out / "contact_K.mtx").exists()
    kkt = (out / "kkt_report.csv").read_text()
    maxline = [ln for ln in kkt.splitlines() if ",max," in ln][0]
    assert float(maxline.split(",")[-1]) < 1e-8


def test_coulomb_mu_zero_single_iteration(tmp_path):
    p = tmp_path / "mu0.toml"
    p.write_text(FAST_TOML + "\n[physics]\nmu = 0.0\n")
    rc = cli.main(["coulomb", "--config", str(p),
                   "--out", str(tmp_path / "o")])
    assert rc == EXIT_OK
    hist = (tmp_path / "o" / "coulomb_history.csv").read_text()
    assert len(hist.strip().splitlines()) == 2   # header + one iteration
