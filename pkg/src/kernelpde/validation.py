"""Self-checks: derivative oracles, Jacobian checks, elimination identities,
one-step exactness, and reference-oracle self-convergence.

These back both the test suite and the `validate` CLI subcommand.  The
finite-difference machinery here is deliberately independent of the
closed-form derivative formulas in `kernels`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import gram, problems, solver
from .functionals import sample_collocation
from .kernels import DerivativeOp, KernelSpec, eval_bilinear, eval_kernel
from . import reference


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: {self.detail}"


# ---------------------------------------------------------------------------
# Finite-difference oracle for kernel derivative functionals
# ---------------------------------------------------------------------------

def _fd_apply(fun, x: np.ndarray, op: DerivativeOp, h, order: int = 5):
    """Apply a DerivativeOp to a scalar function numerically at x.

    order=3 uses classic central stencils, order=5 the 4th-order ones; h may
    be per-axis.
    """
    h = np.broadcast_to(np.asarray(h, dtype=float), x.shape)

    def shift(k, steps):
        xs = x.copy()
        xs[k] += steps * h[k]
        return fun(xs)

    def d1(k):
        if order == 3:
            return (shift(k, 1) - shift(k, -1)) / (2 * h[k])
        return (-shift(k, 2) + 8 * shift(k, 1) - 8 * shift(k, -1) + shift(k, -2)) / (
            12 * h[k]
        )

    def d2(k):
        if order == 3:
            return (shift(k, 1) - 2 * fun(x) + shift(k, -1)) / h[k] ** 2
        return (
            -shift(k, 2) + 16 * shift(k, 1) - 30 * fun(x) + 16 * shift(k, -1) - shift(k, -2)
        ) / (12 * h[k] ** 2)

    if op.tag == "identity":
        return fun(x)
    if op.tag == "partial":
        return d1(op.axis)
    if op.tag == "partial2":
        return d2(op.axis)
    if op.tag == "laplacian":
        return sum(d2(k) for k in range(len(x)))
    raise ValueError(op.tag)


def fd_bilinear(
    spec: KernelSpec,
    opL: DerivativeOp,
    x: np.ndarray,
    opR: DerivativeOp,
    x2: np.ndarray,
    h=None,
    order: int = 5,
) -> float:
    """Nested finite-difference estimate of L^x L^{x'} K(x, x')."""
    x = np.asarray(x, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if h is None:
        scales = np.asarray(spec.lengthscales)
        if len(scales) == 1:
            scales = np.full(spec.dim, scales[0])
        # narrow kernels have large derivative magnitudes, so truncation
        # dominates and a smaller relative step pays off; wide kernels are
        # roundoff-limited in the nested fourth-order differences
        h = np.where(scales < 0.1, 5e-3 * scales, 2e-2 * scales)

    def inner(xv):
        return _fd_apply(lambda yv: eval_kernel(spec, xv, yv), x2, opR, h, order)

    return _fd_apply(inner, x, opL, h, order)


def _op_pool(dim: int) -> list[DerivativeOp]:
    ops = [DerivativeOp.identity(), DerivativeOp.laplacian()]
    for k in range(dim):
        ops.append(DerivativeOp.partial(k))
        ops.append(DerivativeOp.partial2(k))
    return ops


def check_kernel_derivatives(n_probes: int = 100, seed: int = 0) -> CheckResult:
    """Closed-form mixed derivatives vs nested finite differences."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    families = [
        KernelSpec.gaussian_isotropic(0.2, 2),
        KernelSpec.gaussian_anisotropic((1.0 / 20.0, 1.0 / 3.0)),
    ]
    for spec in families:
        scales = np.asarray(spec.lengthscales)
        if len(scales) == 1:
            scales = np.full(spec.dim, scales[0])
        ops = _op_pool(spec.dim)
        for _ in range(n_probes):
            x = rng.random(spec.dim)
            x2 = x + scales * rng.standard_normal(spec.dim)
            opL, opR = rng.choice(len(ops), size=2)
            opL, opR = ops[opL], ops[opR]
            exact = eval_bilinear(spec, opL, x, opR, x2)
            approx = fd_bilinear(spec, opL, x, opR, x2)
            # normalize by the Cauchy-Schwarz bound sqrt(<L,L><L',L'>) so a
            # near-zero crossing of the derivative does not inflate the ratio
            bound = np.sqrt(
                eval_bilinear(spec, opL, x, opL, x)
                * eval_bilinear(spec, opR, x2, opR, x2)
            )
            scale = max(abs(exact), abs(approx), bound)
            worst = max(worst, abs(exact - approx) / scale)
    passed = worst <= 1e-5
    return CheckResult(
        "kernel mixed derivatives vs finite differences",
        passed,
        f"max relative deviation {worst:.3e} (tol 1e-5)",
    )


# ---------------------------------------------------------------------------
# Problem map checks
# ---------------------------------------------------------------------------

def _scalar_systems(seed: int = 0):
    rng = np.random.default_rng(seed)
    out = []
    for spec in (
        problems.elliptic_spec(),
        problems.burgers_spec(),
        problems.eikonal_spec(),
    ):
        pts = sample_collocation(spec.box, M=30, M_omega=22, seed=seed)
        out.append((spec.name, spec.discretize(pts)))
    return out, rng


def check_elimination_identity(n_draws: int = 100, seed: int = 0) -> CheckResult:
    """F(F_bar(w, y)) = y for random reduced variables, all problems."""
    systems, rng = _scalar_systems(seed)
    worst = 0.0
    darcy = problems.darcy_ip_spec()
    pts = sample_collocation(darcy.box, M=30, M_omega=22, seed=seed)
    dd = darcy.discretize(pts, np.arange(5))
    for _ in range(n_draws):
        for name, disc in systems:
            w = rng.standard_normal(disc.n_reduced)
            err = np.max(np.abs(disc.residual(disc.fbar(w)) - disc.y))
            worst = max(worst, err)
        v = rng.standard_normal(dd.I)
        w = rng.standard_normal(dd.n_reduced)
        err = np.max(np.abs(dd.residual(dd.fbar(v, w)) - dd.y))
        worst = max(worst, err)
    passed = worst <= 1e-12
    return CheckResult(
        "elimination identity F(F_bar(w,y)) = y",
        passed,
        f"max constraint violation {worst:.3e} (tol 1e-12)",
    )


def _fd_jacobian(fun, x0: np.ndarray, h: float = 1e-6) -> np.ndarray:
    f0 = np.asarray(fun(x0))
    J = np.empty((len(f0), len(x0)))
    for j in range(len(x0)):
        xp, xm = x0.copy(), x0.copy()
        xp[j] += h
        xm[j] -= h
        J[:, j] = (np.asarray(fun(xp)) - np.asarray(fun(xm))) / (2 * h)
    return J


def _rel_err(A: np.ndarray, B: np.ndarray) -> float:
    scale = max(np.max(np.abs(A)), np.max(np.abs(B)), 1e-8)
    return float(np.max(np.abs(A - B)) / scale)


def check_jacobians(seed: int = 0) -> CheckResult:
    """Analytic Jacobians of F and F_bar vs central differences."""
    systems, rng = _scalar_systems(seed)
    worst = 0.0
    for name, disc in systems:
        z0 = rng.standard_normal(disc.n_total)
        worst = max(
            worst,
            _rel_err(disc.residual_jac(z0).toarray(), _fd_jacobian(disc.residual, z0)),
        )
        w0 = rng.standard_normal(disc.n_reduced)
        worst = max(
            worst,
            _rel_err(disc.fbar_jac(w0).toarray(), _fd_jacobian(disc.fbar, w0)),
        )
    darcy = problems.darcy_ip_spec()
    pts = sample_collocation(darcy.box, M=30, M_omega=22, seed=seed)
    dd = darcy.discretize(pts, np.arange(5))
    zeta0 = rng.standard_normal(dd.n_total)
    worst = max(
        worst,
        _rel_err(dd.residual_jac(zeta0).toarray(), _fd_jacobian(dd.residual, zeta0)),
    )
    x0 = rng.standard_normal(dd.I + dd.n_reduced)
    fbar_joint = lambda x: dd.fbar(x[: dd.I], x[dd.I :])
    worst = max(
        worst,
        _rel_err(dd.fbar_jac(x0[: dd.I], x0[dd.I :]).toarray(), _fd_jacobian(fbar_joint, x0)),
    )
    passed = worst <= 1e-6
    return CheckResult(
        "analytic Jacobians vs finite differences",
        passed,
        f"max relative deviation {worst:.3e} (tol 1e-6)",
    )


def check_one_step_exactness(seed: int = 0) -> CheckResult:
    """Affine constraints: one Gauss-Newton step equals the direct solve."""
    spec = problems.elliptic_spec(tau="zero")
    pts = sample_collocation(spec.box, M=24, M_omega=16, seed=seed)
    disc = spec.discretize(pts)
    kernel = KernelSpec.gaussian_isotropic(0.2, 2)
    gs = gram.GramSystem.build(kernel, disc.fv, eta=1e-10)
    cfg = solver.GNConfig(max_iters=1, init="gaussian", seed=seed)
    sol = solver.gauss_newton_eliminated(gs, disc, disc.y, cfg)

    # independent dense path: z(w) = z0 + J w, minimize |L^{-1} z(w)|^2
    z0 = disc.fbar(np.zeros(disc.n_reduced))
    J = disc.fbar_jac(np.zeros(disc.n_reduced)).toarray()
    A = gs.half_solve(J)
    b = -gs.half_solve(z0)
    w_star, *_ = np.linalg.lstsq(A, b, rcond=None)
    z_star = z0 + J @ w_star
    err = np.linalg.norm(sol.z - z_star) / max(np.linalg.norm(z_star), 1e-300)
    passed = err <= 1e-8
    return CheckResult(
        "affine one-step exactness vs direct linear solve",
        passed,
        f"relative deviation {err:.3e} (tol 1e-8)",
    )


def check_norm_optimality(seed: int = 0) -> CheckResult:
    """Converged elliptic solve has RKHS norm no larger than the truth's.

    The functional values of the manufactured solution are feasible for the
    constrained problem, so the minimizer's quadratic form cannot exceed
    theirs (up to roundoff slack)."""
    spec = problems.elliptic_spec()
    pts = sample_collocation(spec.box, M=200, M_omega=160, seed=seed)
    disc = spec.discretize(pts)
    kernel = KernelSpec.gaussian_isotropic(0.2, 2)
    gs = gram.GramSystem.build(kernel, disc.fv, eta=1e-10)
    cfg = solver.GNConfig(max_iters=20, seed=seed)
    sol = solver.gauss_newton_eliminated(gs, disc, disc.y, cfg)
    u_star = spec.truth(pts.points)
    lap_star = -problems._elliptic_neg_laplacian_truth(pts.interior)
    z_star = np.concatenate([u_star, lap_star])
    q_sol = gs.quad_form(sol.z)
    q_star = gs.quad_form(z_star)
    passed = bool(sol.converged and q_sol <= (1 + 1e-6) * q_star)
    return CheckResult(
        "norm-optimality witness on converged elliptic run",
        passed,
        f"solution form {q_sol:.6e} vs truth form {q_star:.6e}",
    )


# ---------------------------------------------------------------------------
# Reference-oracle self-convergence
# ---------------------------------------------------------------------------

def check_oracles(fast: bool = False) -> list[CheckResult]:
    out = []

    # Cole-Hopf: quadrature-order stability and PDE residual
    u_a = reference.burgers_cole_hopf(0.35, 0.6, order=100)
    u_b = reference.burgers_cole_hopf(0.35, 0.6, order=101)
    out.append(
        CheckResult(
            "Cole-Hopf quadrature-order stability",
            abs(u_a - u_b) <= 1e-8,
            f"|order100 - order101| = {abs(u_a - u_b):.3e} (tol 1e-8)",
        )
    )
    h = 1e-4
    s0, t0, nu = 0.3, 0.5, 0.02
    u = lambda s, t: reference.burgers_cole_hopf(s, t, nu=nu)
    ut = (u(s0, t0 + h) - u(s0, t0 - h)) / (2 * h)
    us = (u(s0 + h, t0) - u(s0 - h, t0)) / (2 * h)
    uss = (u(s0 + h, t0) - 2 * u(s0, t0) + u(s0 - h, t0)) / h**2
    resid = abs(ut + u(s0, t0) * us - nu * uss)
    out.append(
        CheckResult(
            "Cole-Hopf PDE residual at (0.3, 0.5)",
            resid <= 1e-4,
            f"|residual| = {resid:.3e} (tol 1e-4)",
        )
    )

    # Eikonal: grid self-convergence at the center
    n_lo, n_hi = (250, 500) if fast else (500, 1000)
    e_lo = reference.eikonal_reference(n=n_lo)
    e_hi = reference.eikonal_reference(n=n_hi)
    d = abs(float(e_lo([[0.5, 0.5]])[0]) - float(e_hi([[0.5, 0.5]])[0]))
    out.append(
        CheckResult(
            f"Eikonal FD self-convergence (n={n_lo} vs {n_hi})",
            d <= 1e-4,
            f"|difference| = {d:.3e} (tol 1e-4)",
        )
    )

    # Poisson FD: second-order decay on the manufactured solution
    spec = problems.elliptic_spec(tau="zero")
    errs = []
    for n in (17, 33, 65):
        grid = reference.fd_poisson(spec.f, spec.g, n)
        l2, _ = reference.error_metrics(grid, spec.truth, spec.box, n=40)
        errs.append(l2)
    order1 = np.log2(errs[0] / errs[1])
    order2 = np.log2(errs[1] / errs[2])
    ok = order1 > 1.5 and order2 > 1.5
    out.append(
        CheckResult(
            "Poisson FD second-order convergence",
            ok,
            f"observed orders {order1:.2f}, {order2:.2f} (expect ~2)",
        )
    )

    # Darcy forward: self-convergence at the center
    n_lo, n_hi = (128, 256) if fast else (256, 512)
    d_lo = reference.darcy_forward_fd(problems.darcy_truth_a, n=n_lo)
    d_hi = reference.darcy_forward_fd(problems.darcy_truth_a, n=n_hi)
    d = abs(float(d_lo([[0.5, 0.5]])[0]) - float(d_hi([[0.5, 0.5]])[0]))
    out.append(
        CheckResult(
            f"Darcy forward FD self-convergence (n={n_lo} vs {n_hi})",
            d <= 1e-4,
            f"|difference| = {d:.3e} (tol 1e-4)",
        )
    )
    return out


def run_all(fast: bool = False) -> list[CheckResult]:
    results = [
        check_kernel_derivatives(),
        check_elimination_identity(),
        check_jacobians(),
        check_one_step_exactness(),
        check_norm_optimality(),
    ]
    results.extend(check_oracles(fast=fast))
    return results
