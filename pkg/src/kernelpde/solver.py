"""Theta^{-1}-weighted Gauss-Newton solvers and solution evaluation.

Each outer iteration linearizes the constraints F(z) = y around the current
iterate and solves the resulting quadratic exactly.  Because the eliminated
map F_bar parameterizes the linearized constraint set affinely (its reduced
variables are a subset of the entries of z), the inner least-squares problem
  min_dw | L^{-1} (F_bar(w,y) + J dw) |^2
is solved through its dual/representer form
  z = Theta_reg A^T (A Theta_reg A^T + D)^{-1} b,
with A the sparse constraint Jacobian, D a per-row noise diagonal (0 for hard
rows, beta^2 or gamma^2 for penalized rows), and b the linearized data.  This
gives the exact minimizer while only ever factorizing an M x M system per
step; the N x N Cholesky factor of Theta_reg is computed once and reused for
all loss evaluations and for the final coefficient solve.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .functionals import FunctionalVector
from .gram import GramSystem
from .kernels import DerivativeOp, KernelSpec, eval_bilinear_matrix


class SingularStepError(np.linalg.LinAlgError):
    """Inner linearized system is rank deficient."""


class DivergenceError(RuntimeError):
    """Loss became non-finite; carries the iteration index."""

    def __init__(self, iteration: int):
        self.iteration = iteration
        super().__init__(f"non-finite loss at iteration {iteration}")


@dataclass(frozen=True)
class GNConfig:
    max_iters: int = 10
    alpha: float = 1.0
    init: str = "gaussian"  # gaussian | zero | given
    init_scale: float = 1.0
    seed: int = 0
    w0: Optional[np.ndarray] = None
    tol_loss: float = 1e-12
    tol_step: float = 1e-8

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")

    def initial(self, n: int) -> np.ndarray:
        if self.init == "zero":
            return np.zeros(n)
        if self.init == "given":
            if self.w0 is None or len(self.w0) != n:
                raise ValueError("init='given' requires w0 of the right length")
            return np.asarray(self.w0, dtype=float).copy()
        if self.init == "gaussian":
            rng = np.random.default_rng(self.seed)
            return self.init_scale * rng.standard_normal(n)
        raise ValueError(f"unknown init {self.init!r}")


@dataclass
class EliminatedSystem:
    """Constraint system in eliminated form (see problems.ScalarDiscrete)."""

    disc: object  # ScalarDiscrete-compatible

    @property
    def n_reduced(self) -> int:
        return self.disc.n_reduced

    @property
    def y(self) -> np.ndarray:
        return self.disc.y

    def fbar(self, w):
        return self.disc.fbar(w)

    def fbar_jac(self, w):
        return self.disc.fbar_jac(w)

    def residual(self, z):
        return self.disc.residual(z)

    def residual_jac(self, z):
        return self.disc.residual_jac(z)

    @property
    def w_indices(self):
        return self.disc.w_indices


@dataclass
class RelaxedSystem:
    """Constraint system with penalized (and optionally pinned) rows.

    pin_boundary=True gives the mixed mode: boundary rows are enforced
    exactly while interior rows carry the beta^2 penalty.
    """

    disc: object
    beta: float
    pin_boundary: bool = True

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError("beta must be strictly positive")

    @property
    def y(self):
        return self.disc.y

    def row_noise(self) -> np.ndarray:
        """Per-constraint-row noise variance: beta^2 relaxed, 0 pinned."""
        M, MO = self.disc.M, self.disc.M_omega
        noise = np.full(M, self.beta**2)
        if self.pin_boundary:
            noise[MO:] = 0.0
        return noise


@dataclass
class SolutionRepresentation:
    """Kernel representer u(x) = sum_n c_n (L_n K)(x, x_n)."""

    coefficients: np.ndarray
    fv: FunctionalVector
    kernel: KernelSpec
    loss_history: list[float]
    iterations: int
    converged: bool
    z: np.ndarray = None

    def evaluate(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        ident = DerivativeOp.identity()
        out = np.zeros(len(X))
        for b, s in zip(self.fv.blocks, self.fv.slices()):
            Kx = eval_bilinear_matrix(
                self.kernel, ident, X, b.op, self.fv.points[b.idx]
            )
            out += Kx @ self.coefficients[s]
        return out


def evaluate(sol: SolutionRepresentation, x) -> np.ndarray:
    """Functional form of SolutionRepresentation.evaluate."""
    return sol.evaluate(x)


def _spd_solve(G: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve the small dual system, falling back from Cholesky to LU."""
    try:
        cf = scipy.linalg.cho_factor(G, lower=True, check_finite=False)
        return scipy.linalg.cho_solve(cf, rhs, check_finite=False)
    except np.linalg.LinAlgError:
        pass
    try:
        return scipy.linalg.solve(G, rhs, assume_a="sym", check_finite=False)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - rare
        raise SingularStepError(str(exc)) from exc


def _dual_step(
    grams: list[tuple[GramSystem, slice]],
    C: sp.csr_matrix,
    noise: np.ndarray,
    rhs: np.ndarray,
) -> np.ndarray:
    """Exact minimizer of sum_k z_k^T Theta_k^{-1} z_k subject to the rows of
    C z = rhs, rows with noise[i] > 0 entering as (1/noise) penalties instead.

    Returns z = Theta C^T (C Theta C^T + diag(noise))^{-1} rhs with Theta the
    block-diagonal of the regularized Gram matrices.
    """
    # CT = C Theta (dense, n_rows x n_cols), assembled per diagonal block
    CT = np.empty((C.shape[0], C.shape[1]))
    Ccsc = C.tocsc()
    for gram, cols in grams:
        CT[:, cols] = Ccsc[:, cols] @ gram.reg
    G = (C @ CT.T).T  # C Theta C^T
    G = 0.5 * (G + G.T)
    G[np.diag_indices_from(G)] += noise
    lam = _spd_solve(G, rhs)
    if not np.all(np.isfinite(lam)):
        raise SingularStepError("non-finite dual solution")
    return CT.T @ lam


def _converged(cfg, loss_prev, loss_new, step, ref) -> bool:
    if abs(loss_new - loss_prev) <= cfg.tol_loss * max(abs(loss_prev), 1e-300):
        return True
    return np.linalg.norm(step) <= cfg.tol_step * max(np.linalg.norm(ref), 1e-300)


def gauss_newton_eliminated(
    gram: GramSystem, sys: EliminatedSystem, y: np.ndarray, cfg: GNConfig
) -> SolutionRepresentation:
    """Minimize F_bar(w,y)^T Theta^{-1} F_bar(w,y) by Gauss-Newton."""
    if not isinstance(sys, EliminatedSystem):
        sys = EliminatedSystem(sys)
    w = cfg.initial(sys.n_reduced)
    z = sys.fbar(w)
    loss = gram.quad_form(z)
    history = [loss]
    converged = False
    iters = 0
    for it in range(1, cfg.max_iters + 1):
        iters = it
        A = sys.residual_jac(z)
        b = y - sys.residual(z) + A @ z
        z_lin = _dual_step([(gram, slice(0, gram.size))], A, np.zeros(len(b)), b)
        step = z_lin[sys.w_indices] - w
        w = w + cfg.alpha * step
        z = sys.fbar(w)
        new_loss = gram.quad_form(z)
        history.append(new_loss)
        if not np.isfinite(new_loss):
            raise DivergenceError(it)
        if _converged(cfg, loss, new_loss, cfg.alpha * step, w):
            converged = True
            loss = new_loss
            break
        loss = new_loss
    c = gram.solve(z)
    return SolutionRepresentation(c, gram.fv, gram.kernel, history, iters, converged, z)


def gauss_newton_relaxed(
    gram: GramSystem, sys: RelaxedSystem, cfg: GNConfig
) -> SolutionRepresentation:
    """Minimize z^T Theta^{-1} z + beta^{-2} |F(z) - y|^2 by Gauss-Newton.

    With pin_boundary=True the boundary rows are held exactly (mixed mode)
    and only interior rows are penalized.
    """
    disc = sys.disc
    y = sys.y
    noise = sys.row_noise()
    relaxed = noise > 0
    z = cfg.initial(disc.n_total)
    if sys.pin_boundary:
        # start feasible on the pinned rows (they are plain selections)
        z[disc.M_omega : disc.M] = y[disc.M_omega :]

    def loss_of(z):
        r = disc.residual(z) - y
        return gram.quad_form(z) + float(r[relaxed] @ (r[relaxed] / sys.beta**2))

    loss = loss_of(z)
    history = [loss]
    converged = False
    iters = 0
    for it in range(1, cfg.max_iters + 1):
        iters = it
        A = disc.residual_jac(z)
        b = y - disc.residual(z) + A @ z
        z_lin = _dual_step([(gram, slice(0, gram.size))], A, noise, b)
        step = z_lin - z
        z = z + cfg.alpha * step
        new_loss = loss_of(z)
        history.append(new_loss)
        if not np.isfinite(new_loss):
            raise DivergenceError(it)
        if _converged(cfg, loss, new_loss, cfg.alpha * step, z):
            converged = True
            loss = new_loss
            break
        loss = new_loss
    c = gram.solve(z)
    return SolutionRepresentation(c, gram.fv, gram.kernel, history, iters, converged, z)


def gauss_newton_ip(
    gram_u: GramSystem,
    gram_a: GramSystem,
    sys,
    obs: tuple[np.ndarray, float],
    cfg: GNConfig,
) -> tuple[SolutionRepresentation, SolutionRepresentation]:
    """Joint inverse-problem solve (see problems.DarcyDiscrete).

    Minimizes z^T Theta^{-1} z + z_tilde^T Theta_tilde^{-1} z_tilde
    + gamma^{-2} |Pi^I z - o|^2 over the reduced variables, with the PDE
    constraint eliminated and boundary values pinned.
    """
    o, gamma = np.asarray(obs[0], dtype=float), float(obs[1])
    I = sys.I
    x0 = cfg.initial(I + sys.n_reduced)
    v, w = x0[:I], x0[I:]
    zeta = sys.fbar(v, w)
    grams = [
        (gram_u, slice(0, sys.n_u)),
        (gram_a, slice(sys.n_u, sys.n_total)),
    ]
    Pi = sys.obs_rows()
    y = sys.y

    def loss_of(zeta, v):
        return (
            gram_u.quad_form(zeta[: sys.n_u])
            + gram_a.quad_form(zeta[sys.n_u :])
            + float(np.sum((v - o) ** 2)) / gamma**2
        )

    loss = loss_of(zeta, v)
    history = [loss]
    converged = False
    iters = 0
    for it in range(1, cfg.max_iters + 1):
        iters = it
        A = sys.residual_jac(zeta)
        C = sp.vstack([A, Pi]).tocsr()
        noise = np.concatenate([np.zeros(sys.M), np.full(I, gamma**2)])
        rhs = np.concatenate([y - sys.residual(zeta) + A @ zeta, o])
        zeta_lin = _dual_step(grams, C, noise, rhs)
        step = np.concatenate(
            [zeta_lin[:I] - v, zeta_lin[sys.w_indices] - w]
        )
        v = v + cfg.alpha * step[:I]
        w = w + cfg.alpha * step[I:]
        zeta = sys.fbar(v, w)
        new_loss = loss_of(zeta, v)
        history.append(new_loss)
        if not np.isfinite(new_loss):
            raise DivergenceError(it)
        if _converged(cfg, loss, new_loss, cfg.alpha * step, np.concatenate([v, w])):
            converged = True
            loss = new_loss
            break
        loss = new_loss
    z_u = zeta[: sys.n_u]
    z_a = zeta[sys.n_u :]
    sol_u = SolutionRepresentation(
        gram_u.solve(z_u), gram_u.fv, gram_u.kernel, history, iters, converged, z_u
    )
    sol_a = SolutionRepresentation(
        gram_a.solve(z_a), gram_a.fv, gram_a.kernel, history, iters, converged, z_a
    )
    return sol_u, sol_a
