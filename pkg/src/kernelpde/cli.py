"""Batch experiment runner.

Subcommands: solve, study-convergence, study-nugget, darcy-ip, validate.
Each run emits CSV records plus a JSON manifest carrying the full config, a
config hash, and wall-clock timings.  Failures inside a batch are recorded
as data (status field) and never abort the batch.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import problems, reference, solver, validation
from .functionals import grid_collocation, sample_collocation
from .gram import ADAPTIVE, GramSystem, STANDARD
from .kernels import KernelSpec

RECORD_FIELDS = [
    "problem",
    "M",
    "M_omega",
    "seed",
    "sigma",
    "eta",
    "beta",
    "mode",
    "points",
    "iters",
    "converged",
    "final_loss",
    "l2_error",
    "linf_error",
    "status",
    "config_hash",
]

DEFAULTS = {
    "elliptic": dict(sigma="0.2", eta=1e-12, max_iters=10, m_ratio=0.9),
    "burgers": dict(sigma="1/20,1/3", eta=1e-10, max_iters=30, m_ratio=5.0 / 6.0),
    "eikonal": dict(sigma="M^-1/4", eta=1e-10, max_iters=20, m_ratio=0.9),
}


def config_hash(config: dict) -> str:
    return hashlib.sha256(
        json.dumps(config, sort_keys=True, default=str).encode()
    ).hexdigest()[:16]


def parse_sigma(sigma, M: int):
    """Lengthscale spec: a float, 'a,b' per-axis list, or the rule M^-1/4."""
    if isinstance(sigma, (int, float)):
        return float(sigma)
    text = str(sigma).strip()
    if text.lower() in ("m^-1/4", "m**-1/4", "m^-0.25"):
        return float(M) ** -0.25
    try:
        if "," in text:
            return tuple(_parse_ratio(part) for part in text.split(","))
        return _parse_ratio(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"cannot parse lengthscale {sigma!r}") from exc


def _parse_ratio(text: str) -> float:
    """Parse a float literal or a simple fraction like '1/20'."""
    num, slash, den = text.partition("/")
    if slash:
        return float(num) / float(den)
    return float(text)


def build_kernel(problem: str, sigma, M: int) -> tuple[KernelSpec, object]:
    value = parse_sigma(sigma, M)
    if isinstance(value, tuple):
        return KernelSpec.gaussian_anisotropic(value), value
    return KernelSpec.gaussian_isotropic(value, 2), value


def make_problem(name: str, **kw) -> problems.ProblemSpec:
    if name == "elliptic":
        return problems.elliptic_spec(tau=kw.get("tau", "cubic"))
    if name == "burgers":
        return problems.burgers_spec(
            nu=kw.get("nu", 0.02), quadratic_v4=kw.get("quadratic_v4", False)
        )
    if name == "eikonal":
        return problems.eikonal_spec(eps=kw.get("eps", 0.1))
    raise ValueError(f"unknown problem {name!r}")


@lru_cache(maxsize=4)
def _eikonal_truth(eps: float, n: int):
    return reference.eikonal_reference(eps=eps, n=n)


def truth_evaluator(spec: problems.ProblemSpec, config: dict):
    if spec.truth is not None:
        return spec.truth
    if spec.name == "burgers":
        return reference.burgers_evaluator(
            nu=spec.params["nu"], order=int(config.get("quad_order", 100))
        )
    if spec.name == "eikonal":
        return _eikonal_truth(spec.params["eps"], int(config.get("ref_grid", 1000)))
    raise ValueError(f"no truth evaluator for {spec.name}")


def run_solve(config: dict) -> dict:
    """Single solve; returns the result record (status field on failure)."""
    record = {k: "" for k in RECORD_FIELDS}
    record["config_hash"] = config_hash(config)
    record["status"] = "ok"
    t0 = time.perf_counter()
    try:
        name = config["problem"]
        M = int(config["M"])
        defaults = DEFAULTS[name]
        M_omega = config.get("M_omega")
        if M_omega is None:
            M_omega = int(round(defaults["m_ratio"] * M))
        M_omega = int(M_omega)
        seed = int(config.get("seed", 0))
        mode = config.get("mode", "eliminate")
        points = config.get("points", "random")
        sigma = config.get("sigma", defaults["sigma"])
        eta = float(config.get("eta", defaults["eta"]))
        nugget = config.get("nugget", ADAPTIVE)
        max_iters = int(config.get("max_iters", defaults["max_iters"]))
        beta = float(config.get("beta", 1e-5))
        test_grid = int(config.get("test_grid", 60))

        spec = make_problem(name, **config.get("problem_params", {}))
        if points == "grid":
            pts = grid_collocation(spec.box, M)
            M_omega = pts.n_interior
        else:
            pts = sample_collocation(spec.box, M, M_omega, seed)
        kernel, sigma_val = build_kernel(name, sigma, M)
        disc = spec.discretize(pts)
        gs = GramSystem.build(kernel, disc.fv, eta, nugget)

        cfg = solver.GNConfig(max_iters=max_iters, seed=seed, init="gaussian")
        if mode == "eliminate":
            sol = solver.gauss_newton_eliminated(gs, disc, disc.y, cfg)
        elif mode in ("relax", "mixed"):
            rsys = solver.RelaxedSystem(disc, beta=beta, pin_boundary=(mode == "mixed"))
            sol = solver.gauss_newton_relaxed(gs, rsys, cfg)
        else:
            raise ValueError(f"unknown mode {mode!r}")

        truth = truth_evaluator(spec, config)
        l2, linf = reference.error_metrics(sol.evaluate, truth, spec.box, test_grid)

        record.update(
            problem=name,
            M=M,
            M_omega=M_omega,
            seed=seed,
            sigma=str(sigma_val),
            eta=eta,
            beta=beta if mode in ("relax", "mixed") else "",
            mode=mode,
            points=points,
            iters=sol.iterations,
            converged=sol.converged,
            final_loss=f"{sol.loss_history[-1]:.12e}",
            l2_error=f"{l2:.12e}",
            linf_error=f"{linf:.12e}",
        )
        if not np.isfinite(l2):
            record["status"] = "non-finite-error"
    except (ValueError, KeyError) as exc:
        record["status"] = f"config-error: {exc}"
    except solver.DivergenceError as exc:
        record["status"] = f"diverged: iteration {exc.iteration}"
    except np.linalg.LinAlgError as exc:
        record["status"] = f"linalg-error: {exc}"
    record["wall_seconds"] = time.perf_counter() - t0
    return record


def run_convergence_study(config: dict) -> list[dict]:
    """Seeded repetitions over a list of M values; means per M appended."""
    records = []
    reps = int(config.get("reps", 10))
    for M in config["M_list"]:
        for rep in range(reps):
            cell = dict(config)
            cell.pop("M_list", None)
            cell["M"] = M
            cell["seed"] = int(config.get("seed", 0)) + rep
            if config.get("eta_rule"):
                cell["eta"] = config["eta_rule"](M)
            records.append(run_solve(cell))
    return records


def summarize(records: list[dict]) -> list[dict]:
    """Per-(M, mode) means of the error columns, failures counted."""
    keys = sorted({(r["problem"], r["M"], r["mode"]) for r in records if r["M"] != ""})
    out = []
    for problem, M, mode in keys:
        group = [r for r in records if (r["problem"], r["M"], r["mode"]) == (problem, M, mode)]
        ok = [r for r in group if r["status"] == "ok"]
        l2s = [float(r["l2_error"]) for r in ok]
        linfs = [float(r["linf_error"]) for r in ok]
        out.append(
            dict(
                problem=problem,
                M=M,
                mode=mode,
                runs=len(group),
                failures=len(group) - len(ok),
                mean_l2=f"{np.mean(l2s):.12e}" if l2s else "",
                min_l2=f"{np.min(l2s):.12e}" if l2s else "",
                max_l2=f"{np.max(l2s):.12e}" if l2s else "",
                mean_linf=f"{np.mean(linfs):.12e}" if linfs else "",
            )
        )
    return out


def run_nugget_study(config: dict) -> list[dict]:
    """Adaptive vs standard nugget over a grid of eta values (elliptic)."""
    records = []
    etas = config.get("eta_list", [10.0**-k for k in range(1, 13)])
    for nugget in (ADAPTIVE, STANDARD):
        for eta in etas:
            cell = dict(config)
            cell.pop("eta_list", None)
            cell.update(problem="elliptic", nugget=nugget, eta=eta)
            cell.setdefault("M", 1024)
            cell.setdefault("sigma", "0.2")
            cell.setdefault("max_iters", 5)
            rec = run_solve(cell)
            rec["mode"] = f"{rec['mode']}/{nugget}"
            records.append(rec)
    return records


def run_darcy_ip(config: dict) -> dict:
    """Darcy inverse problem: synthesize observations, solve, report errors."""
    record = {k: "" for k in RECORD_FIELDS}
    record["config_hash"] = config_hash(config)
    record["status"] = "ok"
    t0 = time.perf_counter()
    try:
        seed = int(config.get("seed", 0))
        gamma = float(config.get("gamma", 1e-3))
        n_obs = int(config.get("I", 40))
        M = int(config.get("M", 500))
        M_omega = int(config.get("M_omega", 400))
        sigma = float(config.get("sigma", 0.2))
        sigma_a = float(config.get("sigma_a", 0.2))
        eta = float(config.get("eta", 1e-5))
        eta_a = float(config.get("eta_a", 1e-5))
        max_iters = int(config.get("max_iters", 10))
        test_grid = int(config.get("test_grid", 60))
        forward_n = int(config.get("forward_grid", 256))

        ip = problems.darcy_ip_spec(gamma=gamma, n_obs=n_obs, M=M, M_omega=M_omega)
        pts = sample_collocation(ip.box, M, M_omega, seed)
        rng = np.random.default_rng(seed + 1)
        obs_idx = rng.choice(M_omega, size=n_obs, replace=False)
        disc = ip.discretize(pts, obs_idx)

        truth_u = reference.darcy_forward_fd(problems.darcy_truth_a, n=forward_n)
        o = truth_u(pts.points[obs_idx]) + gamma * rng.standard_normal(n_obs)

        kernel_u = KernelSpec.gaussian_isotropic(sigma, 2)
        kernel_a = KernelSpec.gaussian_isotropic(sigma_a, 2)
        gs_u = GramSystem.build(kernel_u, disc.fv_u, eta)
        gs_a = GramSystem.build(kernel_a, disc.fv_a, eta_a)
        # the gamma^-2 data term caps the attainable loss resolution, so the
        # stopping tolerance is tied to the noise level rather than machine
        # precision
        cfg = solver.GNConfig(
            max_iters=max_iters,
            seed=seed,
            init="gaussian",
            tol_loss=float(config.get("tol_loss", 1e-7)),
        )
        sol_u, sol_a = solver.gauss_newton_ip(gs_u, gs_a, disc, (o, gamma), cfg)

        misfit = float(np.linalg.norm(sol_u.z[: disc.I] - o))
        l2_u, linf_u = reference.error_metrics(
            sol_u.evaluate, truth_u, ip.box, test_grid
        )
        X = reference.interior_grid(ip.box, test_grid)
        a_true = problems.darcy_truth_a(X)
        a_rec = sol_a.evaluate(X)
        rel_a = float(
            np.linalg.norm(a_rec - a_true) / np.linalg.norm(a_true)
        )
        baseline = 1.0  # relative error of the zero field
        record.update(
            problem="darcy_ip",
            M=M,
            M_omega=M_omega,
            seed=seed,
            sigma=str(sigma),
            eta=eta,
            mode="ip",
            points="random",
            iters=sol_u.iterations,
            converged=sol_u.converged,
            final_loss=f"{sol_u.loss_history[-1]:.12e}",
            l2_error=f"{l2_u:.12e}",
            linf_error=f"{linf_u:.12e}",
        )
        record["misfit"] = f"{misfit:.12e}"
        record["rel_l2_a"] = f"{rel_a:.12e}"
        record["beats_zero_baseline"] = rel_a < baseline
        if config.get("out"):
            out = Path(config["out"])
            out.mkdir(parents=True, exist_ok=True)
            np.savetxt(
                out / "recovered_fields.csv",
                np.column_stack([X, sol_u.evaluate(X), a_rec, a_true]),
                delimiter=",",
                header="x0,x1,u_rec,a_rec,a_true",
                comments="",
            )
    except (ValueError, KeyError) as exc:
        record["status"] = f"config-error: {exc}"
    except solver.DivergenceError as exc:
        record["status"] = f"diverged: iteration {exc.iteration}"
    except np.linalg.LinAlgError as exc:
        record["status"] = f"linalg-error: {exc}"
    record["wall_seconds"] = time.perf_counter() - t0
    return record


# ---------------------------------------------------------------------------
# Output plumbing
# ---------------------------------------------------------------------------

def write_records(records: list[dict], out_dir: Path, name: str, config: dict) -> None:
    """CSV (deterministic byte content) + JSON manifest with timings."""
    out_dir.mkdir(parents=True, exist_ok=True)
    fields = list(RECORD_FIELDS)
    extra = sorted(
        {k for r in records for k in r} - set(fields) - {"wall_seconds"}
    )
    fields += extra
    csv_path = out_dir / f"{name}.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore")
        writer.writeheader()
        writer.writerows(records)
    manifest = {
        "name": name,
        "config": {k: str(v) for k, v in config.items() if not callable(v)},
        "config_hash": config_hash({k: str(v) for k, v in config.items() if not callable(v)}),
        "records_csv": csv_path.name,
        "wall_seconds": [r.get("wall_seconds", "") for r in records],
        "n_records": len(records),
    }
    with open(out_dir / f"{name}.manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)


def write_summary(rows: list[dict], out_dir: Path, name: str) -> None:
    if not rows:
        return
    with open(out_dir / f"{name}.summary.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--problem", choices=["elliptic", "burgers", "eikonal"])
    p.add_argument("--M", type=int)
    p.add_argument("--M-omega", dest="M_omega", type=int)
    p.add_argument("--points", choices=["random", "grid"], default=None)
    p.add_argument("--seed", type=int)
    p.add_argument("--sigma")
    p.add_argument("--nugget", choices=[ADAPTIVE, STANDARD])
    p.add_argument("--eta", type=float)
    p.add_argument("--mode", choices=["eliminate", "relax", "mixed"])
    p.add_argument("--beta", type=float)
    p.add_argument("--max-iters", dest="max_iters", type=int)
    p.add_argument("--reps", type=int)
    p.add_argument("--test-grid", dest="test_grid", type=int)
    p.add_argument("--out", default="results")


def load_config_file(path: str) -> dict:
    config = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        config[key.strip()] = value.strip()
    return config


def gather_config(args: argparse.Namespace) -> dict:
    config = {}
    if getattr(args, "config", None):
        config.update(load_config_file(args.config))
    for key, value in vars(args).items():
        if key in ("command", "config") or value is None:
            continue
        config[key] = value
    return config


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="kernelpde",
        description="Kernel-collocation PDE solver and experiment runner",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd in ("solve", "study-convergence", "study-nugget", "darcy-ip"):
        p = sub.add_parser(cmd)
        _add_common(p)
        if cmd == "study-convergence":
            p.add_argument("--M-list", dest="M_list",
                           help="comma-separated M values")
        if cmd == "darcy-ip":
            p.add_argument("--gamma", type=float)
            p.add_argument("--I", dest="I", type=int)
            p.add_argument("--eta-a", dest="eta_a", type=float)
    pv = sub.add_parser("validate")
    pv.add_argument("--fast", action="store_true")
    pv.add_argument("--out", default="results")

    args = parser.parse_args(argv)
    if args.command == "validate":
        results = validation.run_all(fast=args.fast)
        for r in results:
            print(r.line())
        n_fail = sum(not r.passed for r in results)
        print(f"{len(results) - n_fail}/{len(results)} checks passed")
        return 1 if n_fail else 0

    config = gather_config(args)
    out_dir = Path(config.pop("out", "results"))
    if args.command == "solve":
        record = run_solve(config)
        write_records([record], out_dir, "solve", config)
        print(f"status={record['status']} l2_error={record['l2_error']}")
        return 0
    if args.command == "study-convergence":
        config["M_list"] = [int(v) for v in str(config["M_list"]).split(",")]
        records = run_convergence_study(config)
        write_records(records, out_dir, "convergence", config)
        write_summary(summarize(records), out_dir, "convergence")
        print(f"{len(records)} runs written to {out_dir}")
        return 0
    if args.command == "study-nugget":
        records = run_nugget_study(config)
        write_records(records, out_dir, "nugget", config)
        print(f"{len(records)} runs written to {out_dir}")
        return 0
    if args.command == "darcy-ip":
        record = run_darcy_ip(config)
        write_records([record], out_dir, "darcy_ip", config)
        print(f"status={record['status']} rel_l2_a={record.get('rel_l2_a', '')}")
        return 0
    return 2  # pragma: no cover


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
