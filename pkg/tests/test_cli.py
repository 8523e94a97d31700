import os

import numpy as np
import pytest

from photocount.cli import DEFAULTS, config_from_sources, main


def run(tmp_path, *args):
    cwd = os.getcwd()
    os.chdir(tmp_path)
    try:
        return main(list(args))
    finally:
        os.chdir(cwd)


def read_csv(path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    return header, rows


def read_meta(path):
    out = {}
    for line in open(path):
        key, _, val = line.strip().partition("=")
        out[key] = val
    return out


class TestConfig:
    def test_defaults_complete(self):
        cfg = config_from_sources(None, {})
        for key, val in DEFAULTS.items():
            assert getattr(cfg, key) == val

    def test_unknown_key_rejected(self, tmp_path):
        bad = tmp_path / "cfg"
        bad.write_text("not_a_key=3\n")
        with pytest.raises(ValueError):
            config_from_sources(str(bad), {})

    def test_file_and_override_precedence(self, tmp_path):
        f = tmp_path / "cfg"
        f.write_text("# comment\nnbar=30\neta=0.5\n")
        cfg = config_from_sources(str(f), {"eta": "0.7"})
        assert cfg.nbar == 30.0
        assert cfg.eta == 0.7

    def test_invalid_state_rejected(self):
        with pytest.raises(ValueError):
            config_from_sources(None, {"state": "squeezed"})


class TestCommands:
    def test_defaults_exit_zero(self, tmp_path, capsys):
        assert run(tmp_path, "defaults") == 0
        out = capsys.readouterr().out
        assert "eta=0.6" in out and "lambda0_nm=500.0" in out

    def test_qjs_table(self, tmp_path):
        assert run(tmp_path, "qjs-table", "--n_table_max", "6",
                   "--out", "q.csv") == 0
        header, rows = read_csv(tmp_path / "q.csv")
        assert header == ["n", "jb", "jb_norm", "jd", "jd_norm", "je"]
        assert len(rows) == 7
        meta = read_meta(tmp_path / "q.meta")
        assert abs(float(meta["beta_fit"]) - 0.5) < 0.1
        assert float(meta["xi_fit"]) < 1.0

    def test_qjs_table_empty_range_is_usage_error(self, tmp_path):
        assert run(tmp_path, "qjs-table", "--n_table_max", "1",
                   "--out", "q.csv") == 1

    def test_snr_scan_records_breakdown(self, tmp_path):
        assert run(tmp_path, "snr-scan", "--b_steps", "16",
                   "--out", "s.csv") == 0
        meta = read_meta(tmp_path / "s.meta")
        assert float(meta["plateau"]) > 0
        assert meta["b_breakdown"] != "none"

    def test_snr_scan_short_grid_numerical_exit(self, tmp_path):
        assert run(tmp_path, "snr-scan", "--b_steps", "2",
                   "--out", "s.csv") == 2

    def test_brightness(self, tmp_path):
        assert run(tmp_path, "brightness", "--lambda_steps", "11",
                   "--out", "b.csv") == 0
        meta = read_meta(tmp_path / "b.meta")
        assert abs(float(meta["peak_lambda_nm"]) - 500.0) <= 170.0

    def test_counts_coherent_k_columns(self, tmp_path):
        assert run(tmp_path, "counts", "--nbar", "25", "--d", "0",
                   "--rt_max", "6", "--rt_steps", "7", "--out", "c.csv") == 0
        header, rows = read_csv(tmp_path / "c.csv")
        assert header == ["rt", "mbar_sd", "mbar_e", "k_sd", "k_e"]
        for row in rows[1:]:
            assert abs(float(row[3]) - 1.0) < 1e-6      # SD coherent K = 1
            assert abs(float(row[4]) - 1.0) < 2e-2      # E coherent K near 1

    def test_counts_sd_mbar_state_independent(self, tmp_path):
        cols = {}
        for state in ("coherent", "thermal"):
            run(tmp_path, "counts", "--state", state, "--nbar", "20",
                "--rt_steps", "5", "--rt_max", "2", "--out", f"{state}.csv")
            _, rows = read_csv(tmp_path / f"{state}.csv")
            cols[state] = [float(r[1]) for r in rows]
        assert np.allclose(cols["coherent"], cols["thermal"], atol=1e-9)

    def test_wt_records_default_theta(self, tmp_path):
        assert run(tmp_path, "wt", "--nbar", "15", "--rt_max", "2",
                   "--rt_steps", "3", "--out", "w.csv") == 0
        meta = read_meta(tmp_path / "w.meta")
        assert float(meta["theta"]) == pytest.approx(10.0 / 0.6)
        header, _ = read_csv(tmp_path / "w.csv")
        assert header == ["rt", "ncav_sd", "mean_wt_sd", "ncav_e", "mean_wt_e"]

    def test_round_trip_reproduces_csv(self, tmp_path):
        assert run(tmp_path, "counts", "--nbar", "12", "--rt_steps", "4",
                   "--rt_max", "3", "--out", "a.csv") == 0
        meta = read_meta(tmp_path / "a.meta")
        overrides = {k: v for k, v in meta.items() if k in DEFAULTS}
        overrides["out"] = "b.csv"
        args = ["counts"]
        for k, v in overrides.items():
            args += [f"--{k}", v]
        assert run(tmp_path, *args) == 0
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_out_dir_env_override(self, tmp_path, monkeypatch):
        target = tmp_path / "elsewhere"
        monkeypatch.setenv("PHOTOCOUNT_OUT_DIR", str(target))
        assert run(tmp_path, "counts", "--nbar", "5", "--rt_steps", "2",
                   "--rt_max", "1", "--out", "c.csv") == 0
        assert (target / "c.csv").exists()

    def test_validation_exit_code(self, tmp_path):
        assert run(tmp_path, "counts", "--eta", "1.5", "--out", "x.csv") == 1

    def test_verify_passes(self, tmp_path):
        assert run(tmp_path, "verify", "--nbar", "12") == 0

    def test_verify_seed_changes_mc_only(self, tmp_path, capsys):
        assert run(tmp_path, "verify", "--nbar", "12", "--seed", "777") == 0
        out = capsys.readouterr().out
        assert "PASS sd closed-form vs markov" in out
