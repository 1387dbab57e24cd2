import os

import numpy as np
import pytest

from wsfbm.cli import main, read_fit_file


def run(args):
    return main(args)


def read_csv(path):
    return np.genfromtxt(path, delimiter=",", names=True, comments="#")


def test_simulate_wsfbm_rows_and_determinism(tmp_path):
    out1 = tmp_path / "r1"
    out2 = tmp_path / "r2"
    base = ["simulate", "--process", "wsfbm", "--family", "const",
            "--b", "0", "--horizon", "3", "--n", "3", "--paths", "1",
            "--seed", "7"]
    assert run(base + ["--out", str(out1)]) == 0
    assert run(base + ["--out", str(out2)]) == 0
    body1 = (out1 / "paths.csv").read_bytes()
    body2 = (out2 / "paths.csv").read_bytes()
    assert body1 == body2
    rows = read_csv(out1 / "paths.csv")
    assert rows.shape[0] == 4  # includes the t0 = 0 row
    assert rows["value"][0] == 0.0
    assert (out1 / "paths.csv.meta").exists()


def test_simulate_requires_seed(tmp_path):
    code = run(["simulate", "--process", "wsfbm", "--family", "const",
                "--b", "0", "--horizon", "1", "--n", "2", "--paths", "1",
                "--out", str(tmp_path)])
    assert code == 2


def test_simulate_geometric_positive(tmp_path):
    code = run(["simulate", "--process", "geometric", "--family", "c2",
                "--a", "-0.8", "--b", "1.14", "--mu", "-0.12", "--sigma",
                "1.71", "--s0", "1.0", "--horizon", "5", "--n", "40",
                "--paths", "3", "--seed", "11", "--out", str(tmp_path)])
    assert code == 0
    rows = read_csv(tmp_path / "paths.csv")
    assert np.all(rows["value"] > 0)


def test_simulate_ou_runs(tmp_path):
    code = run(["simulate", "--process", "ou", "--family", "c1", "--a",
                "0.42", "--b", "0.4", "--beta", "1.2", "--sigma", "0.9",
                "--v0", "2.0", "--horizon", "2", "--n", "8", "--paths", "2",
                "--seed", "3", "--out", str(tmp_path)])
    assert code == 0


def test_gram_command_brownian(tmp_path):
    code = run(["gram", "--family", "const", "--b", "0", "--horizon", "2",
                "--n", "2", "--method", "1", "--out", str(tmp_path)])
    assert code == 0
    rows = read_csv(tmp_path / "gram.csv")
    assert rows.shape[0] == 3  # lower triangle of a 2x2 grid
    by_ij = {(int(r["i"]), int(r["j"])): float(r["value"]) for r in rows}
    assert by_ij[(1, 1)] == pytest.approx(1.0, abs=1e-8)
    assert by_ij[(2, 1)] == pytest.approx(1.0, abs=1e-8)
    assert by_ij[(2, 2)] == pytest.approx(2.0, abs=1e-8)


def test_gram_rejects_bad_method(tmp_path):
    code = run(["gram", "--family", "const", "--b", "0", "--horizon", "2",
                "--n", "2", "--method", "9", "--out", str(tmp_path)])
    assert code == 2


def test_fit_roundtrip_and_predict(tmp_path):
    sim = tmp_path / "sim"
    assert run(["simulate", "--process", "wsfbm", "--family", "c1", "--a",
                "0.42", "--b", "1.59", "--horizon", "4", "--n", "44",
                "--paths", "1", "--seed", "19", "--out", str(sim)]) == 0
    fit_dir = tmp_path / "fit"
    code = run(["fit", "--input", str(sim / "paths.csv"), "--family", "c1",
                "--out", str(fit_dir)])
    assert code in (0, 4)  # non-convergence still writes the result
    vals = read_fit_file(fit_dir / "fit.txt")
    assert vals["family"] == "C1"
    assert "a_hat" in vals and "aic" in vals
    pred_dir = tmp_path / "pred"
    code = run(["predict", "--input", str(sim / "paths.csv"), "--fit",
                str(fit_dir / "fit.txt"), "--horizon-n", "5", "--sims", "50",
                "--seed", "23", "--out", str(pred_dir)])
    assert code == 0
    rows = read_csv(pred_dir / "prediction.csv")
    assert rows.shape[0] == 5


def test_fit_missing_input(tmp_path):
    assert run(["fit", "--input", str(tmp_path / "nope.csv"), "--family",
                "c1", "--out", str(tmp_path)]) == 2


def test_predict_empty_horizon(tmp_path):
    sim = tmp_path / "sim"
    assert run(["simulate", "--process", "wsfbm", "--family", "const",
                "--b", "0.5", "--horizon", "2", "--n", "25", "--paths", "1",
                "--seed", "2", "--out", str(sim)]) == 0
    code = run(["predict", "--input", str(sim / "paths.csv"), "--family",
                "c1", "--a", "0.0", "--b", "0.5", "--horizon-n", "0",
                "--sims", "10", "--seed", "5", "--out", str(tmp_path)])
    assert code == 0
    header = (tmp_path / "prediction.csv").read_text().splitlines()
    assert header[0] == "t,mean,cond_sd,band_lo,band_hi"
    assert len(header) == 1


def test_predict_reports_mse_against_truth(tmp_path):
    sim = tmp_path / "sim"
    assert run(["simulate", "--process", "wsfbm", "--family", "c2", "--a",
                "-0.34", "--b", "1.23", "--horizon", "3.6", "--n", "40",
                "--paths", "1", "--seed", "29", "--out", str(sim)]) == 0
    # hold out the last 4 points: feed the first 36 as observations
    rows = np.genfromtxt(sim / "paths.csv", delimiter=",", names=True)
    obs_path = tmp_path / "obs.csv"
    with open(obs_path, "w") as fh:
        fh.write("t,value\n")
        for r in rows[:37]:
            fh.write(f"{float(r['t'])!r},{float(r['value'])!r}\n")
    pred_dir = tmp_path / "pred"
    code = run(["predict", "--input", str(obs_path), "--family", "c2",
                "--a", "-0.34", "--b", "1.23", "--horizon-n", "4", "--sims",
                "0", "--seed", "31", "--truth", str(sim / "paths.csv"),
                "--out", str(pred_dir)])
    assert code == 0
    meta = (pred_dir / "prediction.csv.meta").read_text()
    mse_line = [l for l in meta.splitlines() if l.startswith("mse")]
    assert mse_line
    assert float(mse_line[0].split("=")[1]) <= 0.1


def test_bench_command(tmp_path):
    code = run(["bench", "--family", "c1", "--a", "0.21", "--b", "1.28",
                "--sizes", "6", "--methods", "1,4", "--repeats", "1",
                "--out", str(tmp_path)])
    assert code == 0
    lines = (tmp_path / "bench_times.csv").read_text().splitlines()
    assert lines[0] == "method,n,seconds"
    acc = (tmp_path / "bench_accuracy.csv").read_text().splitlines()
    assert acc[1].startswith("1,4,")
    assert float(acc[1].split(",")[2]) <= 1e-4


def test_bench_bad_method(tmp_path):
    assert run(["bench", "--family", "c1", "--a", "0.21", "--b", "1.28",
                "--sizes", "6", "--methods", "9", "--out", str(tmp_path)]) == 2


def test_kernel2d_zero_inside_ball(tmp_path):
    code = run(["kernel2d", "--kind", "mixed", "--stationary", "doubleexp",
                "--weight", "power", "--a", "0.0", "--p", "2,2", "--nx", "7",
                "--ny", "7", "--xmin", "-2.5", "--xmax", "2.5", "--ymin",
                "-2.5", "--ymax", "2.5", "--out", str(tmp_path)])
    assert code == 0
    rows = read_csv(tmp_path / "kernel2d.csv")
    assert rows.shape[0] == 49
    inside = np.hypot(rows["x"], rows["y"]) <= 1.0
    assert np.all(rows["value"][inside] == 0.0)
    assert np.all(rows["value"][~inside] > 0.0)


def test_kernel2d_k_plus_at_reference(tmp_path):
    code = run(["kernel2d", "--kind", "kplus", "--weight", "power", "--a",
                "0.3", "--h", "0.35", "--p", "2,2", "--nx", "3", "--ny", "3",
                "--xmin", "0.5", "--xmax", "2.5", "--ymin", "0.5", "--ymax",
                "2.5", "--out", str(tmp_path)])
    assert code == 0
    rows = read_csv(tmp_path / "kernel2d.csv")
    assert rows.shape[0] == 9


def test_config_precedence_three_way(tmp_path):
    cfg = tmp_path / "opts.cfg"
    cfg.write_text("n = 4\nhorizon = 2.0\nseed = 5\n")
    out_a = tmp_path / "a"
    # flag (n=3) beats config (n=4): 4 rows per path including t0
    assert run(["simulate", "--process", "wsfbm", "--family", "const",
                "--b", "0", "--n", "3", "--paths", "1", "--config", str(cfg),
                "--out", str(out_a)]) == 0
    assert read_csv(out_a / "paths.csv").shape[0] == 4
    # config (n=4) beats the (absent) default
    out_b = tmp_path / "b"
    assert run(["simulate", "--process", "wsfbm", "--family", "const",
                "--b", "0", "--paths", "1", "--config", str(cfg),
                "--out", str(out_b)]) == 0
    assert read_csv(out_b / "paths.csv").shape[0] == 5
    # default applies when neither flag nor config specify (paths -> 1)
    rows = read_csv(out_b / "paths.csv")
    assert np.unique(rows["path_id"]).size == 1


def test_meta_sidecar_contains_version(tmp_path):
    assert run(["gram", "--family", "const", "--b", "0", "--horizon", "1",
                "--n", "2", "--out", str(tmp_path)]) == 0
    meta = (tmp_path / "gram.csv.meta").read_text()
    assert "tool_version = 0.1.0" in meta
