import json

import numpy as np
import pytest

from hidimcov import cli, io
from hidimcov.covest import sample_cov
from hidimcov.model import CoefficientScheme, InnovationSpec, simulate

SCHEME = {"kind": "ar1_geometric", "d": 5, "J": 64, "rho": [0.1, 0.2, 0.3, 0.4, 0.5],
          "innovations": {"family": "gaussian", "sigma_sq": 1.0}}


@pytest.fixture
def scheme_file(tmp_path):
    path = tmp_path / "scheme.json"
    path.write_text(json.dumps(SCHEME))
    return path


@pytest.fixture
def panel_file(tmp_path, scheme_file):
    out = tmp_path / "panel.bin"
    assert cli.main(["simulate", "--scheme", str(scheme_file), "--n", "300", "--seed", "4",
                     "--out", str(out)]) == 0
    return out


def _last_json(capsys):
    return json.loads(capsys.readouterr().out.strip().splitlines()[-1])


def test_simulate_round_trip_is_bitwise(tmp_path, scheme_file, panel_file, capsys):
    scheme = CoefficientScheme.from_dict(SCHEME)
    direct = simulate(scheme, InnovationSpec(), 300, 4)
    loaded = io.load_panel(panel_file)
    assert np.array_equal(loaded.data, direct.data)
    assert np.array_equal(sample_cov(loaded).matrix, sample_cov(direct).matrix)
    csv_out = tmp_path / "panel.csv"
    cli.main(["simulate", "--scheme", str(scheme_file), "--n", "300", "--seed", "4",
              "--out", str(csv_out)])
    assert np.array_equal(io.load_panel(csv_out).data, direct.data)
    summary = _last_json(capsys)
    assert summary["n"] == 300 and summary["config"]["d"] == 5


def test_simulate_seed_determinism(tmp_path, scheme_file):
    outs = []
    for name, seed in (("a", 7), ("b", 7), ("c", 8)):
        out = tmp_path / f"{name}.bin"
        cli.main(["simulate", "--scheme", str(scheme_file), "--n", "50", "--seed", str(seed),
                  "--out", str(out)])
        outs.append(out.read_bytes())
    assert outs[0] == outs[1] and outs[0] != outs[2]


def test_simulate_overrides(tmp_path, scheme_file, capsys):
    out = tmp_path / "p.bin"
    code = cli.main(["simulate", "--scheme", str(scheme_file), "--n", "40", "--seed", "1",
                     "--family", "two_point", "--J", "32", "--out", str(out)])
    assert code == 0
    cfg = _last_json(capsys)["config"]
    assert cfg["J"] == 32 and cfg["innovations"]["family"] == "two_point"


def test_usage_errors_exit_2(tmp_path, scheme_file, panel_file):
    assert cli.main([]) == 2
    assert cli.main(["simulate", "--scheme", str(scheme_file), "--n", "10"]) == 2
    assert cli.main(["simulate", "--scheme", str(tmp_path / "missing.json"), "--n", "10",
                     "--seed", "1", "--out", str(tmp_path / "x.bin")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({**SCHEME, "rho": [0.1, 0.2, 0.3]}))
    assert cli.main(["simulate", "--scheme", str(bad), "--n", "10", "--seed", "1",
                     "--out", str(tmp_path / "x.bin")]) == 2
    assert cli.main(["shrink", "--panel", str(panel_file), "--weight", "fixed:2"]) == 2
    assert cli.main(["trace-ci", "--panel", str(panel_file), "--bandwidth", "wide"]) == 2


def test_cov_and_paths(tmp_path, panel_file, capsys):
    cov_out = tmp_path / "cov.csv"
    assert cli.main(["cov", "--panel", str(panel_file), "--out", str(cov_out)]) == 0
    est = sample_cov(io.load_panel(panel_file)).matrix
    assert np.array_equal(io.load_matrix(cov_out), est)
    assert cli.main(["cov", "--panel", str(panel_file), "--path-out", str(tmp_path / "p.csv")]) == 2
    assert cli.main(["cov", "--panel", str(panel_file), "--sigma", str(cov_out),
                     "--path-out", str(tmp_path / "p.csv")]) == 0
    header = (tmp_path / "p.csv").read_text().splitlines()[0]
    assert header == "t," + ",".join(f"value_{j}" for j in range(1, 6))


def test_asymvar_writes_beta_and_sidecar(tmp_path, scheme_file, capsys):
    out = tmp_path / "beta.csv"
    assert cli.main(["asymvar", "--scheme", str(scheme_file), "--out", str(out)]) == 0
    beta = io.load_matrix(out)
    assert beta.shape == (5, 5) and np.allclose(beta, beta.T)
    side = json.loads((tmp_path / "beta.csv.json").read_text())
    assert side["pairs"] == 5 and len(side["pair_digests"]) == 5
    assert _last_json(capsys)["sigma_tr_sq"] == pytest.approx(beta.sum() / 25)


def test_trace_ci_and_shrink(tmp_path, scheme_file, panel_file, capsys):
    assert cli.main(["trace-ci", "--panel", str(panel_file), "--out", str(tmp_path / "ci.json")]) == 0
    ci = json.loads((tmp_path / "ci.json").read_text())
    assert ci["lo"] <= ci["center"] <= ci["hi"]
    for weight in ("estimate", "fixed:0.5", f"oracle:{scheme_file}"):
        assert cli.main(["shrink", "--panel", str(panel_file), "--weight", weight,
                         "--out", str(tmp_path / "s.csv"),
                         "--diagnostics", str(tmp_path / "d.json")]) == 0
        S = io.load_matrix(tmp_path / "s.csv")
        assert S.shape == (5, 5) and np.allclose(S, S.T)
    assert json.loads((tmp_path / "d.json").read_text())


def test_limit_build_and_sample(tmp_path, scheme_file, capsys):
    wfile = tmp_path / "w.json"
    assert cli.main(["weights", "unit", "--d", "5", "--j", "1", "2", "--out", str(wfile)]) == 0
    model_out = tmp_path / "model.json"
    assert cli.main(["limit", "build", "--scheme", str(scheme_file), "--weights", str(wfile),
                     "--out", str(model_out)]) == 0
    assert (tmp_path / "model.cov.csv").exists()
    model = cli.load_limit_model(model_out)
    assert model.dim == 6
    assert cli.main(["limit", "build", "--scheme", str(scheme_file), "--out", str(model_out)]) == 2
    samples = tmp_path / "x.csv"
    assert cli.main(["limit", "sample", "--model", str(model_out), "--reps", "20", "--seed", "3",
                     "--out", str(samples)]) == 0
    first = io.load_matrix(samples)
    cli.main(["limit", "sample", "--model", str(model_out), "--reps", "20", "--seed", "3",
              "--out", str(samples)])
    assert first.shape == (20, 6) and np.array_equal(first, io.load_matrix(samples))


def test_weights_near_orth(tmp_path, capsys):
    out = tmp_path / "f.json"
    assert cli.main(["weights", "near-orth", "--d", "64", "--m", "4", "--A", "2",
                     "--seed", "1", "--out", str(out)]) == 0
    summary = _last_json(capsys)
    assert summary["count"] == 4 and summary["coherence"] <= 2 / 8 + 1e-12
    assert cli.main(["weights", "sparse", "--d", "4", "--out", str(out)]) == 2


def test_mc_run(tmp_path, capsys):
    cfg = {"experiment": "clt_check", "n_grid": [200], "reps": 100, "master_seed": 1,
           "scheme": {"kind": "ar1_geometric", "d": 1, "J": 64, "rho": 0.5,
                      "innovations": {"family": "gaussian", "sigma_sq": 1.0}}}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    code = cli.main(["mc", "run", "--config", str(path), "--out", str(tmp_path / "r"),
                     "--record-reps", "--workers", "1"])
    report = json.loads((tmp_path / "r" / "report.json").read_text())
    assert code == (0 if report["passed"] else 1)
    assert (tmp_path / "r" / "reps.csv").exists()
    assert report["config"]["master_seed"] == 1
    path.write_text(json.dumps({**cfg, "reps": 10}))
    assert cli.main(["mc", "run", "--config", str(path), "--out", str(tmp_path / "r")]) == 2
