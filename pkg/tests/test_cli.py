import json

import numpy as np
import pytest

from sl2anomaly.cli import main

CENTERED = {"family": {"catalog": "anderson",
                       "params": {"values": [[1.0, 0.5], [-1.0, 0.5]], "eps": 0.0}}}
DIMER0 = {"family": {"catalog": "dimer", "params": {"e": 0.0}}}
HYPERB = {"family": {"catalog": "synthetic", "params": {"kind": "hyperbolic"}}}


def write_cfg(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def run(capsys, *argv):
    code = main(list(argv))
    cap = capsys.readouterr()
    return code, cap.out, cap.err


class TestClassifyCommand:
    def test_centered_band_center(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, CENTERED)
        code, out, err = run(capsys, "classify", "--config", cfg)
        assert code == 0
        doc = json.loads(out)
        assert doc["order"] == 2
        assert doc["degree"] == "second"
        assert doc["type"] == "diffusive"
        assert doc["is_critical_point"] is True
        assert len(doc["per_atom"]) == 4

    def test_output_file(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, DIMER0)
        out_path = tmp_path / "report.json"
        code, out, _ = run(capsys, "classify", "--config", cfg, "--out", str(out_path))
        assert code == 0
        doc = json.loads(out_path.read_text())
        assert doc["type"] == "elliptic"
        assert doc["order"] == 2

    def test_byte_identical_reruns(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, CENTERED)
        a = tmp_path / "a.json"
        b = tmp_path / "b.json"
        assert run(capsys, "classify", "--config", cfg, "--out", str(a))[0] == 0
        assert run(capsys, "classify", "--config", cfg, "--out", str(b))[0] == 0
        assert a.read_bytes() == b.read_bytes()


class TestDensityCommand:
    def test_csv_and_summary(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, CENTERED)
        out_path = tmp_path / "rho.csv"
        code, out, _ = run(capsys, "density", "--config", cfg, "--grid", "2048",
                           "--out", str(out_path))
        assert code == 0
        summary = json.loads(out)
        assert summary["type"] == "diffusive"
        text = out_path.read_text()
        lines = text.split("\n")
        assert lines[0] == "theta,rho0,kappa,K"
        assert len(lines) == 2048 + 2  # header + rows + trailing newline
        assert text.endswith("\n") and "\r" not in text
        row = lines[1].split(",")
        assert len(row) == 4
        # 17 significant digits round-trip
        rho = float(lines[5].split(",")[1])
        assert rho > 0

    def test_density_values_roundtrip(self, tmp_path, capsys):
        from sl2anomaly.catalog import anderson
        from sl2anomaly.classify import classify_anomaly
        from sl2anomaly.measure import rho0_diffusive

        cfg = write_cfg(tmp_path, CENTERED)
        out_path = tmp_path / "rho.csv"
        run(capsys, "density", "--config", cfg, "--out", str(out_path))
        rows = [line.split(",") for line in out_path.read_text().strip().split("\n")[1:]]
        got = np.array([float(r[1]) for r in rows])
        prof = rho0_diffusive(classify_anomaly(anderson([(1.0, 0.5), (-1.0, 0.5)])))
        assert np.array_equal(got, prof.rho0)  # 17g is lossless for float64

    def test_dirac_types_report_support(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, HYPERB)
        code, out, _ = run(capsys, "density", "--config", cfg)
        assert code == 0
        doc = json.loads(out)
        assert doc["type"] == "hyperbolic"
        zeros = [p["theta"] for p in doc["support_points"]]
        assert len(zeros) == 4
        stable = [p["theta"] for p in doc["support_points"] if p["stable"]]
        assert np.allclose(sorted(stable), [0.0, np.pi], atol=1e-9)

    def test_csv_needs_out(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, CENTERED)
        code, _, err = run(capsys, "density", "--config", cfg)
        assert code == 2
        assert json.loads(err)["error"]["kind"] == "validation"

    def test_json_format(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, CENTERED)
        code, out, _ = run(capsys, "density", "--config", cfg, "--format", "json",
                           "--grid", "256")
        assert code == 0
        doc = json.loads(out)
        assert len(doc["rho0"]) == 256


class TestGammaCommand:
    def test_perturbative_dimer(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, DIMER0)
        code, out, _ = run(capsys, "gamma", "--config", cfg, "--mode", "perturbative")
        assert code == 0
        doc = json.loads(out)
        assert doc["perturbative"]["order"] == "quadratic"
        assert doc["perturbative"]["value"] == pytest.approx(2 / 7, abs=1e-10)
        assert doc["perturbative"]["per_original_factor"] is True

    def test_mc_mode(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, CENTERED)
        code, out, _ = run(capsys, "gamma", "--config", cfg, "--mode", "mc",
                           "--lambda", "0.1", "--chains", "2", "--steps", "100000",
                           "--seed", "9")
        assert code == 0
        doc = json.loads(out)
        assert doc["mc"]["lambda"] == 0.1
        assert doc["mc"]["gamma"] > 0
        assert doc["mc"]["chains"] == 2

    def test_mc_needs_lambda(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, CENTERED)
        code, _, err = run(capsys, "gamma", "--config", cfg, "--mode", "mc")
        assert code == 2

    def test_both_modes(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, dict(CENTERED, **{"lambda": 0.1, "steps": 50_000,
                                                    "chains": 2}))
        code, out, _ = run(capsys, "gamma", "--config", cfg)
        assert code == 0
        doc = json.loads(out)
        assert "mc" in doc and "perturbative" in doc

    def test_parabolic_reports_bound(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, {"family": {"catalog": "synthetic",
                                              "params": {"kind": "parabolic"}}})
        code, out, _ = run(capsys, "gamma", "--config", cfg, "--mode", "perturbative")
        assert code == 0
        doc = json.loads(out)
        assert doc["perturbative"]["order"] == "three-halves-bound"
        assert doc["perturbative"]["value"] is None


class TestSweepCommand:
    def test_boost_sweep_csv(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, HYPERB)
        out_path = tmp_path / "sweep.csv"
        code, out, _ = run(capsys, "sweep", "--config", cfg,
                           "--ladder", "0.04,0.02,0.01", "--chains", "2",
                           "--steps", "200000", "--out", str(out_path))
        assert code == 0
        fit = json.loads(out)
        assert fit["fitted_exponent"] == pytest.approx(1.0, abs=0.1)
        lines = out_path.read_text().strip().split("\n")
        assert lines[0] == "lambda,gamma,stderr,chains,steps,seed"
        assert len(lines) == 4

    def test_byte_identical(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, HYPERB)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for path in (a, b):
            code, *_ = run(capsys, "sweep", "--config", cfg, "--ladder", "0.04,0.02",
                           "--chains", "2", "--steps", "50000", "--out", str(path))
            assert code == 0
        assert a.read_bytes() == b.read_bytes()


class TestCatalogCommand:
    def test_list(self, capsys):
        code, out, _ = run(capsys, "catalog")
        assert code == 0
        doc = json.loads(out)
        assert set(doc["entries"]) == {"anderson", "dimer", "synthetic"}

    def test_materialize(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, DIMER0)
        code, out, _ = run(capsys, "catalog", "--config", cfg)
        assert code == 0
        doc = json.loads(out)
        assert doc["factors_per_atom"] == 2
        assert len(doc["atoms"]) == 2
        assert doc["atoms"][0]["T0"] == [[1.0, 0.0], [0.0, 1.0]]


class TestConfigHandling:
    def test_unknown_key_rejected(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, dict(CENTERED, typo_key=3))
        code, _, err = run(capsys, "classify", "--config", cfg)
        assert code == 2
        assert json.loads(err)["error"]["kind"] == "validation"

    def test_unknown_family_param_rejected(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, {"family": {"catalog": "dimer", "params": {"ee": 0.0}}})
        code, _, err = run(capsys, "classify", "--config", cfg)
        assert code == 2

    def test_malformed_json(self, tmp_path, capsys):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        code, _, err = run(capsys, "classify", "--config", str(p))
        assert code == 2

    def test_missing_family(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, {"seed": 3})
        code, _, err = run(capsys, "classify", "--config", cfg)
        assert code == 2

    def test_degenerate_family_exit_code(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, {"family": {"catalog": "anderson",
                                              "params": {"values": [[0.0, 1.0]]}}})
        code, _, err = run(capsys, "classify", "--config", cfg)
        assert code == 3
        assert json.loads(err)["error"]["kind"] == "degenerate"

    def test_non_anomalous_inline_family(self, tmp_path, capsys):
        phi = 0.37
        T0 = [[np.cos(phi), -np.sin(phi)], [np.sin(phi), np.cos(phi)]]
        cfg = write_cfg(tmp_path, {"family": {"atoms": [
            {"weight": 1.0, "T0": T0, "T1": [[0, 0], [0, 0]], "T2": [[0, 0], [0, 0]]}]}})
        code, _, err = run(capsys, "classify", "--config", cfg)
        assert code == 3
        assert json.loads(err)["error"]["kind"] == "not-an-anomaly"

    def test_inline_jet_family(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, {"family": {"name": "boost", "atoms": [
            {"weight": 0.5, "sign": 1, "P": [[0.5, 1.0], [1.0, -0.5]]},
            {"weight": 0.5, "sign": 1, "P": [[0.5, -1.0], [-1.0, -0.5]]},
        ]}})
        code, out, _ = run(capsys, "classify", "--config", cfg)
        assert code == 0
        doc = json.loads(out)
        assert doc["type"] == "hyperbolic"
        assert doc["param"] == pytest.approx(1.0, rel=1e-10)

    def test_inline_polynomial_family(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, {"family": {"atoms": [
            {"weight": 0.5, "T0": [[0, -1], [1, 0]], "T1": [[1, 0], [0, 0]],
             "T2": [[0, 0], [0, 0]], "label": "v+"},
            {"weight": 0.5, "T0": [[0, -1], [1, 0]], "T1": [[-1, 0], [0, 0]],
             "T2": [[0, 0], [0, 0]], "label": "v-"},
        ]}})
        code, out, _ = run(capsys, "classify", "--config", cfg)
        assert code == 0
        assert json.loads(out)["type"] == "diffusive"

    def test_env_thread_fallback(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("ANOMALY_THREADS", "2")
        cfg = write_cfg(tmp_path, dict(CENTERED, **{"lambda": 0.1}))
        code, out, _ = run(capsys, "gamma", "--config", cfg, "--mode", "mc",
                           "--chains", "2", "--steps", "20000")
        assert code == 0
