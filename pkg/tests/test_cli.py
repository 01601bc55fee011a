import math

import numpy as np
import pytest

from ionphoton.cli import main
from ionphoton.config import load_config
from ionphoton.errors import ValidationError


def read_rows(path):
    rows = []
    with open(path) as fh:
        header = None
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if header is None:
                header = line.split(",")
                continue
            rows.append(dict(zip(header, line.split(","))))
    return rows


def write_config(path, text):
    path.write_text(text)
    return str(path)


FAST_G2 = """
[g2]
n_trials = 30000
p_emit = 0.9
p_double = 0.0
eta = 1.0
dark_rate_hz = 0
leakage_rate_hz = 0
window_grid_ns = 10,30,100,200
"""


class TestConfig:
    def test_defaults_load_without_file(self):
        cfg = load_config(None)
        assert cfg.seed == 12345
        assert cfg.atom.tau_e == 10.0
        assert cfg.g2_timing.rep_period == 26_000_000

    def test_unknown_key_is_fatal(self, tmp_path):
        path = write_config(tmp_path / "bad.ini", "[g2]\nn_trails = 100\n")
        with pytest.raises(ValidationError, match="unknown config key"):
            load_config(path)

    def test_unknown_section_is_fatal(self, tmp_path):
        path = write_config(tmp_path / "bad.ini", "[gg2]\nn_trials = 100\n")
        with pytest.raises(ValidationError, match="unknown config section"):
            load_config(path)

    def test_invalid_physics_rejected_before_run(self, tmp_path):
        path = write_config(tmp_path / "bad.ini", "[atom]\nbranch_s = 1.5\n")
        with pytest.raises(ValidationError):
            load_config(path)

    def test_missing_file_rejected(self):
        with pytest.raises(ValidationError, match="not found"):
            load_config("/nonexistent/config.ini")

    def test_hash_tracks_seed(self, tmp_path):
        a = load_config(None, seed_override=1)
        b = load_config(None, seed_override=2)
        assert a.config_hash != b.config_hash


class TestBlochCommand:
    def test_default_config_meets_error_budget(self, tmp_path, capsys):
        assert main(["bloch", "--out", str(tmp_path)]) == 0
        rows = read_rows(tmp_path / "bloch_error_curve.csv")
        by_tp = {float(r["t_p_ns"]): float(r["epsilon_d"]) for r in rows}
        assert 10.0 in by_tp
        assert by_tp[10.0] <= 0.004
        assert all(0.0 <= eps <= 1.0 for eps in by_tp.values())

    def test_empty_grid_is_validation_error(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "c.ini", "[bloch]\nt_p_grid_ns =\n")
        code = main(["bloch", "--config", cfg, "--out", str(tmp_path)])
        assert code == 2
        assert capsys.readouterr().err.startswith("error: validation:")

    def test_reruns_are_byte_identical(self, tmp_path):
        cfg = write_config(tmp_path / "c.ini", "[bloch]\nt_p_grid_ns = 5,10\n")
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(["bloch", "--config", cfg, "--out", str(out1)]) == 0
        assert main(["bloch", "--config", cfg, "--out", str(out2)]) == 0
        assert (out1 / "bloch_error_curve.csv").read_bytes() == (
            out2 / "bloch_error_curve.csv"
        ).read_bytes()


class TestApertureCommand:
    def test_curves_and_anchors(self, tmp_path):
        cfg = write_config(tmp_path / "c.ini", "[aperture]\nn_points = 12\n")
        assert main(["aperture", "--config", cfg, "--out", str(tmp_path)]) == 0
        circ = read_rows(tmp_path / "tradeoff_circular.csv")
        slit = read_rows(tmp_path / "tradeoff_slit_na0.6.csv")

        na06_omega = 0.4 * math.pi
        anchor = min(circ, key=lambda r: abs(float(r["solid_angle_sr"]) - na06_omega))
        assert abs(float(anchor["solid_angle_sr"]) - na06_omega) < 1e-6
        assert 0.045 <= float(anchor["epsilon"]) <= 0.049

        # slit endpoint reproduces the full circular aperture
        assert float(slit[-1]["solid_angle_sr"]) == pytest.approx(na06_omega, rel=1e-9)
        assert float(slit[-1]["epsilon"]) == pytest.approx(float(anchor["epsilon"]), abs=1e-9)

        # at half the solid angle the slit beats the circle
        half = na06_omega / 2
        slit_half = min(slit, key=lambda r: abs(float(r["solid_angle_sr"]) - half))
        circ_half = min(circ, key=lambda r: abs(float(r["solid_angle_sr"]) - half))
        assert abs(float(slit_half["solid_angle_sr"]) - half) < 1e-6
        assert abs(float(circ_half["solid_angle_sr"]) - half) < 1e-6
        assert float(slit_half["epsilon"]) < float(circ_half["epsilon"])

    def test_invalid_na_rejected(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "c.ini", "[aperture]\nna_list = 1.2\n")
        assert main(["aperture", "--config", cfg, "--out", str(tmp_path)]) == 2
        assert "error: validation" in capsys.readouterr().err


class TestG2Command:
    def test_simulate_then_analyze_round_trip(self, tmp_path):
        cfg = write_config(tmp_path / "c.ini", FAST_G2)
        sim_dir, ana_dir = tmp_path / "sim", tmp_path / "ana"
        assert main(["g2", "simulate", "--config", cfg, "--out", str(sim_dir)]) == 0
        assert main(
            ["g2", "analyze", "--config", cfg, "--input", str(sim_dir / "clicks.ipw"),
             "--out", str(ana_dir)]
        ) == 0
        for name in ("g2_histogram.csv", "g2_window_scan.csv", "g2_summary.csv"):
            assert (sim_dir / name).read_bytes() == (ana_dir / name).read_bytes()

    def test_noiseless_single_photon_summary(self, tmp_path):
        cfg = write_config(tmp_path / "c.ini", FAST_G2)
        assert main(["g2", "simulate", "--config", cfg, "--out", str(tmp_path)]) == 0
        row = read_rows(tmp_path / "g2_summary.csv")[0]
        assert int(row["n_zero"]) == 0
        assert float(row["g2"]) == 0.0

    def test_csv_stream_format_round_trip(self, tmp_path):
        cfg = write_config(tmp_path / "c.ini", FAST_G2 + "stream_format = csv\n")
        sim_dir, ana_dir = tmp_path / "sim", tmp_path / "ana"
        assert main(["g2", "simulate", "--config", cfg, "--out", str(sim_dir)]) == 0
        assert main(
            ["g2", "analyze", "--config", cfg, "--input", str(sim_dir / "clicks.csv"),
             "--out", str(ana_dir)]
        ) == 0
        assert (sim_dir / "g2_summary.csv").read_bytes() == (ana_dir / "g2_summary.csv").read_bytes()

    def test_malformed_stream_rejected_with_position(self, tmp_path, capsys):
        bad = tmp_path / "clicks.ipw"
        bad.write_bytes(b"IPWTAG01" + b"\x02" + b"\x00" * 7 + b"\x01" * 8)
        code = main(["g2", "analyze", "--input", str(bad), "--out", str(tmp_path)])
        assert code == 2
        err = capsys.readouterr().err
        assert err.startswith("error: validation:")
        assert "records" in err or "record" in err

    def test_gnuplot_scripts_emitted(self, tmp_path):
        cfg = write_config(tmp_path / "c.ini", FAST_G2)
        assert main(["g2", "simulate", "--config", cfg, "--out", str(tmp_path), "--gnuplot"]) == 0
        assert (tmp_path / "g2_histogram.csv.gp").exists()


ENT_FAST = """
[entangle]
shots = 20000
n_psi = 5
n_phi = 8
"""


class TestEntangleCommand:
    def test_tiny_aperture_ideal_budget_estimates_unity(self, tmp_path):
        cfg = write_config(
            tmp_path / "c.ini",
            ENT_FAST + "na = 0.01\ndepol = 0\n",
        )
        assert main(["entangle", "--config", cfg, "--out", str(tmp_path)]) == 0
        rows = read_rows(tmp_path / "fidelity_summary.csv")
        full = next(r for r in rows if r["aperture"] == "full")
        assert float(full["f_estimated"]) == pytest.approx(1.0, abs=5e-3)

    def test_fidelity_ordering_and_files(self, tmp_path):
        cfg = write_config(tmp_path / "c.ini", ENT_FAST)
        assert main(["entangle", "--config", cfg, "--out", str(tmp_path)]) == 0
        rows = {r["aperture"]: r for r in read_rows(tmp_path / "fidelity_summary.csv")}
        assert set(rows) == {"full", "circular_stop", "slit_stop"}
        f = {k: float(v["f_predicted"]) for k, v in rows.items()}
        assert f["slit_stop"] > f["circular_stop"] > f["full"]
        assert f["full"] == pytest.approx(0.884, abs=1e-9)
        for name in ("fringe_z_full.csv", "fringe_x_slit_stop.csv", "counts_z_circular_stop.csv"):
            assert (tmp_path / name).exists()

    def test_unreachable_target_fidelity_fails_validation(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "c.ini", ENT_FAST + "f_target_full = 0.99\n")
        assert main(["entangle", "--config", cfg, "--out", str(tmp_path)]) == 2
        assert "error: validation" in capsys.readouterr().err
