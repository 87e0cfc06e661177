import json

import pytest

from kernelpde.cli import (
    config_hash,
    main,
    parse_sigma,
    run_convergence_study,
    run_darcy_ip,
    run_solve,
    summarize,
)


def test_parse_sigma_forms():
    assert parse_sigma("0.2", 100) == 0.2
    assert parse_sigma(0.2, 100) == 0.2
    assert parse_sigma("0.05,0.33", 100) == (0.05, 0.33)
    assert parse_sigma("M^-1/4", 256) == pytest.approx(256 ** -0.25)
    with pytest.raises(ValueError):
        parse_sigma("bogus", 100)


def test_config_hash_is_stable_and_sensitive():
    a = {"problem": "elliptic", "M": 100}
    assert config_hash(a) == config_hash(dict(a))
    assert config_hash(a) != config_hash({"problem": "elliptic", "M": 101})


def test_run_solve_small_elliptic():
    rec = run_solve(
        {"problem": "elliptic", "M": 600, "seed": 0, "test_grid": 20}
    )
    assert rec["status"] == "ok"
    assert float(rec["l2_error"]) < 1e-3
    assert rec["mode"] == "eliminate"


def test_run_solve_grid_points():
    rec = run_solve(
        {"problem": "elliptic", "M": 144, "points": "grid",
         "max_iters": 8, "test_grid": 20}
    )
    assert rec["status"] == "ok"
    assert rec["points"] == "grid"
    assert rec["M_omega"] == 100  # 10x10 interior of a 12x12 lattice


def test_run_solve_bad_config_is_reported_not_raised():
    rec = run_solve({"problem": "elliptic", "M": 50, "M_omega": 50})
    assert rec["status"].startswith("config-error")
    rec = run_solve({"problem": "nope", "M": 50})
    assert rec["status"].startswith("config-error")


def test_convergence_study_and_summary():
    records = run_convergence_study(
        {"problem": "elliptic", "M_list": [80, 120], "reps": 2,
         "max_iters": 6, "test_grid": 15}
    )
    assert len(records) == 4
    assert all(r["status"] == "ok" for r in records)
    rows = summarize(records)
    assert [r["M"] for r in rows] == [80, 120]
    assert all(r["runs"] == 2 and r["failures"] == 0 for r in rows)


def test_cli_solve_writes_deterministic_csv(tmp_path):
    argv = [
        "solve", "--problem", "elliptic", "--M", "100", "--M-omega", "80",
        "--seed", "3", "--max-iters", "6", "--test-grid", "15",
    ]
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert main(argv + ["--out", str(out_a)]) == 0
    assert main(argv + ["--out", str(out_b)]) == 0
    csv_a = (out_a / "solve.csv").read_bytes()
    csv_b = (out_b / "solve.csv").read_bytes()
    assert csv_a == csv_b
    manifest = json.loads((out_a / "solve.manifest.json").read_text())
    assert manifest["n_records"] == 1
    assert len(manifest["wall_seconds"]) == 1


def test_cli_convergence_subcommand(tmp_path):
    out = tmp_path / "conv"
    code = main([
        "study-convergence", "--problem", "elliptic", "--M-list", "80",
        "--reps", "1", "--max-iters", "5", "--test-grid", "12",
        "--out", str(out),
    ])
    assert code == 0
    assert (out / "convergence.csv").exists()
    assert (out / "convergence.summary.csv").exists()


def test_darcy_ip_smoke():
    rec = run_darcy_ip(
        {"M": 120, "M_omega": 95, "I": 15, "seed": 0, "max_iters": 8,
         "forward_grid": 64, "test_grid": 15}
    )
    assert rec["status"] == "ok"
    assert float(rec["rel_l2_a"]) < 1.0
    assert rec["beats_zero_baseline"]


def test_validate_fast_exit_code(capsys):
    assert main(["validate", "--fast"]) == 0
    out = capsys.readouterr().out
    assert "[PASS]" in out
    assert "[FAIL]" not in out
