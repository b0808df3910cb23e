import csv
import json

import pytest

from asgdlab.errors import ConfigError
from asgdlab.harness.cli import main
from asgdlab.harness.config import KINDS, load_config, parse_config, with_overrides


def _write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


def _report(out_dir):
    return json.loads((out_dir / "report.json").read_text())


class TestConfig:
    def test_defaults(self):
        cfg = parse_config({"kind": "analyze"})
        assert cfg.params.eta == 0.01 and cfg.staleness.variant == "geometric"
        assert not cfg.needs_seed and parse_config({"kind": "sim-sme"}).needs_seed

    def test_alias(self):
        assert parse_config({"kind": "sweep"}).kind == "sweep-threshold"

    @pytest.mark.parametrize("data", [
        {"kind": "analyze", "bogus": 1},
        {"kind": "analyze", "params": {"eta": -0.1}},
        {"kind": "analyze", "params": {"kappa": 1.0}},
        {"kind": "analyze", "params": {"etta": 0.1}},
        {"kind": "nope"},
        {"kind": "analyze", "schema_version": 2},
        {"kind": "compare", "compare": {"etas": [0.01, -0.02]}},
        {"kind": "analyze", "seed": -1},
    ])
    def test_schema_violations(self, data):
        with pytest.raises(ConfigError, match="schema violation"):
            parse_config(data)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="config not found"):
            load_config(tmp_path / "absent.json")

    def test_bad_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{kind: analyze")
        with pytest.raises(ConfigError, match="not valid JSON"):
            load_config(path)

    def test_overrides(self):
        cfg = with_overrides(parse_config({"kind": "sim-asgd"}), seed=5, out=None)
        assert cfg.seed == 5 and cfg.out == "out"


class TestCli:
    def test_missing_config_names_path(self, tmp_path, capsys):
        path = tmp_path / "nowhere.json"
        assert main(["run", "--config", str(path)]) == 2
        assert str(path) in capsys.readouterr().err

    def test_missing_seed(self, tmp_path, capsys):
        path = _write(tmp_path, {"kind": "sim-asgd"})
        assert main(["run", "--config", str(path), "--out", str(tmp_path / "o")]) == 2
        assert "--seed is required" in capsys.readouterr().err

    def test_seed_range(self, capsys):
        assert main(["analyze", "--seed", str(2**64)]) == 2

    def test_kind_mismatch(self, tmp_path, capsys):
        path = _write(tmp_path, {"kind": "analyze"})
        assert main(["solve-pde", "--config", str(path)]) == 2
        assert "does not match" in capsys.readouterr().err

    def test_analyze_fields(self, tmp_path, capsys):
        out = tmp_path / "a"
        assert main(["analyze", "--out", str(out)]) == 0
        res = _report(out)["results"]
        for key in ("mu_thm", "mu_matrix", "psd_margin", "C2", "eps_shift", "lr_threshold"):
            assert key in res
        assert res["psd_margin"] >= -1e-10
        assert "mu_matrix" in capsys.readouterr().out

    def test_report_has_no_paths(self, tmp_path):
        out = tmp_path / "a"
        main(["analyze", "--out", str(out), "--quiet"])
        assert str(tmp_path) not in (out / "report.json").read_text()

    def test_domain_error_exit(self, tmp_path, capsys):
        path = _write(tmp_path, {"kind": "solve-pde", "params": {"d": 2}})
        assert main(["run", "--config", str(path), "--out", str(tmp_path / "o")]) == 2
        assert "invalid input" in capsys.readouterr().err

    def test_fit_rate_on_pde_output(self, tmp_path):
        pde_out = tmp_path / "pde"
        path = _write(tmp_path, {"kind": "solve-pde", "params": {"eta": 0.04, "kappa": 0.75},
                                 "pde": {"basis_degree": 8, "T": 20, "n_out": 101}})
        assert main(["run", "--config", str(path), "--out", str(pde_out), "--quiet"]) == 0
        pde = _report(pde_out)["results"]

        fit_cfg = _write(tmp_path, {"kind": "fit-rate",
                                    "fit": {"input": str(pde_out / "series_kfp.csv"), "t_lo": 10.0}},
                         "fit.json")
        fit_out = tmp_path / "fit"
        assert main(["run", "--config", str(fit_cfg), "--out", str(fit_out), "--quiet"]) == 0
        fit = _report(fit_out)["results"]["fit"]
        assert fit["rate"] == pytest.approx(pde["norm_fit"]["rate"], rel=0.02)
        with open(pde_out / "series_kfp.csv", newline="") as fh:
            assert next(csv.reader(fh)) == ["t", "norm_h_sq", "H"]

    def test_fit_rate_missing_column(self, tmp_path):
        data = tmp_path / "d.csv"
        data.write_text("t,y\n0,1\n1,0.5\n2,0.25\n")
        cfg = _write(tmp_path, {"kind": "fit-rate", "fit": {"input": str(data), "column": "z"}})
        assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
        cfg = _write(tmp_path, {"kind": "fit-rate", "fit": {"input": str(data), "column": "y"}})
        assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o"), "--quiet"]) == 0
        assert _report(tmp_path / "o")["results"]["fit"]["rate"] == pytest.approx(0.6931, abs=1e-4)

    @pytest.mark.parametrize("kind, extra", [
        ("sample-staleness", {"numerics": {"samples": 100}}),
        ("sim-asgd", {"numerics": {"steps": 20, "ensemble": 8, "n_records": 3}}),
        ("sim-sme", {"numerics": {"T": 0.2, "ensemble": 8, "n_records": 3}}),
        ("compare", {"numerics": {"ensemble": 20}, "compare": {"etas": [0.04], "refine_etas": []}}),
        ("speedup", {"speedup": {"workers": [4], "kappas": [0.5], "ensemble": 20,
                                 "include_discrete": False}}),
        ("sweep-threshold", {"sweep": {"eta_factors": [0.5, 2.0], "kappas": [0.5]}}),
    ])
    def test_every_kind_runs(self, tmp_path, kind, extra):
        path = _write(tmp_path, {"kind": kind, **extra})
        out = tmp_path / "o"
        assert main(["run", "--config", str(path), "--seed", "1", "--out", str(out), "--quiet"]) == 0
        rep = _report(out)
        assert rep["kind"] == kind and rep["seed"] == 1
        for name in rep["series"]:
            assert (out / name).is_file()

    def test_kinds_have_subcommands(self):
        for kind in KINDS:
            with pytest.raises(SystemExit) as exc:
                main([kind, "--help"])
            assert exc.value.code == 0
