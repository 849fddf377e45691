import json
import os

import pytest

from hypercut.cli import main


def csv_body(path):
    with open(path) as fh:
        return [line for line in fh if not line.startswith("#")]


def run(args, tmp_path, name=None):
    code = main(args + ["--out", str(tmp_path)])
    return code


class TestSubcommands:
    def test_constants(self, tmp_path):
        assert run(["constants", "--r1", "1.0"], tmp_path) == 0
        payload = json.loads((tmp_path / "constants.json").read_text())
        assert payload["alpha"] == pytest.approx(0.2402290139, abs=1e-9)
        assert "config_hash" in payload["meta"]

    def test_spherical_no_violations(self, tmp_path):
        assert run(["spherical", "--r", "2.0", "--s-max", "10"],
                   tmp_path) == 0
        body = csv_body(tmp_path / "spherical.csv")
        assert body[0].strip() == "s,phi,bound"
        assert len(body) == 202

    def test_mixture_and_heat(self, tmp_path):
        assert run(["mixture", "--k", "2", "--r1", "0.5"], tmp_path) == 0
        assert run(["heat", "--t", "1.0"], tmp_path) == 0
        assert (tmp_path / "mixture.csv").exists()
        assert (tmp_path / "heat.csv").exists()

    def test_walk_reports(self, tmp_path):
        assert run(["walk", "--r1", "1.0", "--k", "8", "--n", "2000",
                    "--seed", "3", "--workers", "1"], tmp_path) == 0
        payload = json.loads((tmp_path / "walk.json").read_text())
        assert payload["config"]["k"] == 8
        assert len(csv_body(tmp_path / "walk_steps.csv")) == 9

    def test_tv_csv(self, tmp_path):
        assert run(["tv", "--q", "2", "--r1", "1.0", "--n", "20000",
                    "--k-max", "6", "--seed", "1", "--workers", "2"],
                   tmp_path) == 0
        body = csv_body(tmp_path / "tv.csv")
        assert body[0].strip() == "k,tv,ci_lo,ci_hi"
        assert len(body) == 8

    def test_distances_and_concentration(self, tmp_path):
        assert run(["distances", "--q", "2", "--n", "4000", "--r-max",
                    "8.0", "--seed", "2"], tmp_path) == 0
        report = json.loads(
            (tmp_path / "distances_report.json").read_text())
        assert report["R_X"] == pytest.approx(1.316957, abs=1e-5)
        assert run(["concentration", "--q", "2", "--n", "12000", "--r-max",
                    "8.0", "--seed", "2"], tmp_path) == 0
        rep = json.loads((tmp_path / "concentration.json").read_text())
        assert rep["r_med"] > 0

    def test_isoperimetry(self, tmp_path):
        assert run(["isoperimetry", "--q", "2", "--r", "0.5", "--p", "4.0",
                    "--r0", "0.6", "--n", "4000", "--seed", "4"],
                   tmp_path) == 0
        rep = json.loads((tmp_path / "isoperimetry.json").read_text())
        assert rep["passes"] or rep["inconclusive"]

    def test_density_families(self, tmp_path):
        assert run(["density"], tmp_path) == 0
        body = csv_body(tmp_path / "density.csv")
        assert body[0].strip() == "N_q,req0,req_integral,req_limit"
        assert len(body) == 5

    def test_torus_row_and_profile(self, tmp_path):
        assert run(["torus", "--lam", "1.0", "--t", "5.0", "--no-cutoff",
                    "--T-grid", "1,2"], tmp_path) == 0
        row = csv_body(tmp_path / "torus.csv")[1].split(",")
        l1, lo, hi = float(row[2]), float(row[3]), float(row[4])
        assert lo < l1 < hi
        assert (tmp_path / "torus_profile.csv").exists()

    def test_cover_file(self, tmp_path):
        assert run(["cover", "--n", "6", "--seed", "9"], tmp_path) == 0
        payload = json.loads((tmp_path / "cover.json").read_text())
        assert sorted(payload["sigma_A"]) == list(range(6))
        assert sorted(payload["sigma_B"]) == list(range(6))


class TestExitCodes:
    def test_usage_error(self, tmp_path, capsys):
        assert main(["not-a-command"]) == 1

    def test_config_error_unknown_key(self, tmp_path):
        cfg = tmp_path / "bad.json"
        cfg.write_text(json.dumps({"bogus": 1}))
        assert main(["constants", "--config", str(cfg),
                     "--out", str(tmp_path)]) == 2

    def test_config_error_bad_value(self, tmp_path):
        assert main(["constants", "--r1", "-3.0",
                     "--out", str(tmp_path)]) == 2

    def test_capacity_error(self, tmp_path):
        assert main(["distances", "--q", "2", "--n", "50", "--r-max",
                     "13.5", "--seed", "0", "--out", str(tmp_path)]) == 3

    def test_numeric_error(self, tmp_path):
        assert main(["heat", "--t", "0.0001", "--out", str(tmp_path)]) == 4


class TestDeterminism:
    def test_rerun_and_worker_count_byte_identical(self, tmp_path):
        a = tmp_path / "a"
        b = tmp_path / "b"
        for out, workers in ((a, "1"), (b, "3")):
            out.mkdir()
            assert main(["tv", "--q", "2", "--r1", "1.0", "--n", "20000",
                         "--k-max", "5", "--seed", "7", "--workers", workers,
                         "--out", str(out)]) == 0
        assert csv_body(a / "tv.csv") == csv_body(b / "tv.csv")

    def test_emitted_config_round_trip(self, tmp_path):
        a = tmp_path / "a"
        b = tmp_path / "b"
        a.mkdir(), b.mkdir()
        assert main(["walk", "--r1", "0.8", "--k", "6", "--n", "3000",
                     "--seed", "11", "--workers", "1",
                     "--out", str(a)]) == 0
        cfg = a / "walk_config.json"
        assert main(["walk", "--config", str(cfg), "--workers", "2",
                     "--out", str(b)]) == 0
        assert csv_body(a / "walk_steps.csv") == csv_body(b / "walk_steps.csv")

    def test_env_worker_fallback(self, tmp_path, monkeypatch):
        monkeypatch.setenv("HYPERCUT_WORKERS", "2")
        assert run(["walk", "--r1", "1.0", "--k", "3", "--n", "1000",
                    "--seed", "0"], tmp_path) == 0
