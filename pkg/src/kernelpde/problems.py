"""Benchmark problem definitions.

Each problem provides the operator list defining the functional vector, the
pointwise constraint map F(z) = y with analytic Jacobian, and the elimination
map F_bar(w, y) that parameterizes the constraint set by the non-eliminated
functional values.  The scalar PDEs (elliptic, Burgers, Eikonal) share one
discrete layout: block 1 holds point evaluations at all M points (interior
first, then boundary) and blocks 2..Q hold derivative values at the M_Omega
interior points.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from .functionals import (
    Box,
    CollocationSet,
    FunctionalBlock,
    FunctionalVector,
    UNIT_SQUARE,
    build_functionals,
)
from .kernels import DerivativeOp


@dataclass(frozen=True)
class ProblemSpec:
    """A benchmark: operators, data functions, nonlinearity, elimination."""

    name: str
    box: Box
    ops: tuple[DerivativeOp, ...]
    q_boundary: int
    params: dict
    f: Callable[[np.ndarray], np.ndarray]
    g: Callable[[np.ndarray], np.ndarray]
    truth: Optional[Callable[[np.ndarray], np.ndarray]]
    # interior map P(V) over rows of V (one column per operator) and its
    # Jacobian; elimination solves block `elim_q` from the others.
    p_map: Callable[[np.ndarray], np.ndarray] = None  # type: ignore[assignment]
    p_jac: Callable[[np.ndarray], np.ndarray] = None  # type: ignore[assignment]
    elim_q: int = 1
    elim_map: Callable[[np.ndarray, np.ndarray], np.ndarray] = None  # type: ignore[assignment]
    elim_jac: Callable[[np.ndarray, np.ndarray], np.ndarray] = None  # type: ignore[assignment]

    @property
    def q_total(self) -> int:
        return len(self.ops)

    def data(self, pts: CollocationSet) -> np.ndarray:
        """Measurement vector y: interior data first, then boundary data."""
        return np.concatenate([self.f(pts.interior), self.g(pts.boundary)])

    def discretize(self, pts: CollocationSet) -> "ScalarDiscrete":
        return ScalarDiscrete(self, pts)


class ScalarDiscrete:
    """Discrete constraint system F(z)=y for a scalar PDE problem.

    z layout: [u at all M points (interior first, boundary after)] followed by
    [block q values at the M_Omega interior points] for q = 2..Q.
    """

    def __init__(self, spec: ProblemSpec, pts: CollocationSet):
        self.spec = spec
        self.pts = pts
        self.fv = build_functionals(spec, pts)
        self.M = pts.m_total
        self.M_omega = pts.n_interior
        self.Q = spec.q_total
        self.n_total = self.fv.size
        self.n_constraints = self.M
        self.y = spec.data(pts)
        self.y_int = self.y[: self.M_omega]
        self.g_bdry = self.y[self.M_omega :]
        # offsets of each operator block within z
        self.offsets = [0] + [
            self.M + (q - 1) * self.M_omega for q in range(1, self.Q)
        ]
        self.kept_q = [q for q in range(self.Q) if q != spec.elim_q]
        self.n_reduced = self.n_total - self.M
        self.w_indices = np.concatenate(
            [self.offsets[q] + np.arange(self.M_omega) for q in self.kept_q]
        )

    # -- z <-> V bookkeeping ------------------------------------------------
    def _interior_values(self, z: np.ndarray) -> np.ndarray:
        """V (M_Omega, Q): per-operator values at interior points."""
        V = np.empty((self.M_omega, self.Q))
        V[:, 0] = z[: self.M_omega]
        for q in range(1, self.Q):
            V[:, q] = z[self.offsets[q] : self.offsets[q] + self.M_omega]
        return V

    # -- constraint map F ---------------------------------------------------
    def residual(self, z: np.ndarray) -> np.ndarray:
        """F(z): interior rows P(V), boundary rows u restricted to the faces."""
        V = self._interior_values(z)
        return np.concatenate([self.spec.p_map(V), z[self.M_omega : self.M]])

    def residual_jac(self, z: np.ndarray) -> sp.csr_matrix:
        V = self._interior_values(z)
        dP = self.spec.p_jac(V)  # (M_omega, Q)
        rows, cols, vals = [], [], []
        idx_int = np.arange(self.M_omega)
        for q in range(self.Q):
            rows.append(idx_int)
            cols.append(self.offsets[q] + idx_int)
            vals.append(dP[:, q])
        idx_b = np.arange(self.M - self.M_omega)
        rows.append(self.M_omega + idx_b)
        cols.append(self.M_omega + idx_b)
        vals.append(np.ones(self.M - self.M_omega))
        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.M, self.n_total),
        )

    # -- elimination map F_bar ---------------------------------------------
    def _unpack_w(self, w: np.ndarray) -> np.ndarray:
        V = np.zeros((self.M_omega, self.Q))
        for i, q in enumerate(self.kept_q):
            V[:, q] = w[i * self.M_omega : (i + 1) * self.M_omega]
        return V

    def fbar(self, w: np.ndarray) -> np.ndarray:
        """z = F_bar(w, y): boundary values set to g, the eliminated block
        solved from the interior constraints; satisfies F(z)=y exactly."""
        V = self._unpack_w(w)
        V[:, self.spec.elim_q] = self.spec.elim_map(V, self.y_int)
        z = np.empty(self.n_total)
        z[: self.M_omega] = V[:, 0]
        z[self.M_omega : self.M] = self.g_bdry
        for q in range(1, self.Q):
            z[self.offsets[q] : self.offsets[q] + self.M_omega] = V[:, q]
        return z

    def fbar_jac(self, w: np.ndarray) -> sp.csr_matrix:
        """dF_bar/dw, shape (N, N-M)."""
        V = self._unpack_w(w)
        V[:, self.spec.elim_q] = self.spec.elim_map(V, self.y_int)
        dE = self.spec.elim_jac(V, self.y_int)  # (M_omega, Q), column elim_q unused
        rows, cols, vals = [], [], []
        idx = np.arange(self.M_omega)
        for i, q in enumerate(self.kept_q):
            rows.append(self.offsets[q] + idx)
            cols.append(i * self.M_omega + idx)
            vals.append(np.ones(self.M_omega))
            rows.append(self.offsets[self.spec.elim_q] + idx)
            cols.append(i * self.M_omega + idx)
            vals.append(dE[:, q])
        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.n_total, self.n_reduced),
        )


# ---------------------------------------------------------------------------
# Nonlinear elliptic: -Delta u + tau(u) = f on (0,1)^2, u = 0 on the boundary.
# ---------------------------------------------------------------------------

def _elliptic_truth(X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(X)
    return np.sin(np.pi * X[:, 0]) * np.sin(np.pi * X[:, 1]) + 4.0 * np.sin(
        4.0 * np.pi * X[:, 0]
    ) * np.sin(4.0 * np.pi * X[:, 1])


def _elliptic_neg_laplacian_truth(X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(X)
    return 2.0 * np.pi**2 * np.sin(np.pi * X[:, 0]) * np.sin(
        np.pi * X[:, 1]
    ) + 128.0 * np.pi**2 * np.sin(4.0 * np.pi * X[:, 0]) * np.sin(
        4.0 * np.pi * X[:, 1]
    )


def elliptic_spec(tau: str = "cubic") -> ProblemSpec:
    """-Delta u + tau(u) = f with manufactured truth; tau in {"cubic", "zero"}."""
    if tau == "cubic":
        tau_f = lambda u: u**3
        dtau_f = lambda u: 3.0 * u**2
    elif tau == "zero":
        tau_f = lambda u: np.zeros_like(u)
        dtau_f = lambda u: np.zeros_like(u)
    else:
        raise ValueError(f"unknown tau {tau!r}")

    def f(X):
        return _elliptic_neg_laplacian_truth(X) + tau_f(_elliptic_truth(X))

    def g(X):
        return np.zeros(len(np.atleast_2d(X)))

    def p_map(V):
        return -V[:, 1] + tau_f(V[:, 0])

    def p_jac(V):
        out = np.empty_like(V)
        out[:, 0] = dtau_f(V[:, 0])
        out[:, 1] = -1.0
        return out

    def elim_map(V, y):
        # -v2 + tau(v1) = y  =>  v2 = tau(v1) - y
        return tau_f(V[:, 0]) - y

    def elim_jac(V, y):
        out = np.zeros_like(V)
        out[:, 0] = dtau_f(V[:, 0])
        return out

    return ProblemSpec(
        name="elliptic",
        box=UNIT_SQUARE,
        ops=(DerivativeOp.identity(), DerivativeOp.laplacian()),
        q_boundary=1,
        params={"tau": tau},
        f=f,
        g=g,
        truth=_elliptic_truth,
        p_map=p_map,
        p_jac=p_jac,
        elim_q=1,
        elim_map=elim_map,
        elim_jac=elim_jac,
    )


# ---------------------------------------------------------------------------
# Viscous Burgers on (s,t) in (-1,1) x (0,1]:
#   d_t u + u d_s u - nu d_s^2 u = 0,  u(s,0) = -sin(pi s),  u(+-1, t) = 0.
# Constraint faces: t=0 and s=+-1 only.
# ---------------------------------------------------------------------------

BURGERS_BOX = Box(
    (-1.0, 0.0), (1.0, 1.0), constraint_faces=((1, 0), (0, 0), (0, 1))
)


def burgers_spec(nu: float = 0.02, quadratic_v4: bool = False) -> ProblemSpec:
    """Burgers residual v2 + v1 v3 - nu v4 (v4 = d_s^2 u).

    quadratic_v4=True switches to the variant residual v2 + v1 v3 - nu v4**2,
    kept only for fidelity experiments; the default matches the PDE.
    """
    if nu <= 0:
        raise ValueError("nu must be positive")

    def f(X):
        return np.zeros(len(np.atleast_2d(X)))

    def g(X):
        X = np.atleast_2d(X)
        on_t0 = np.abs(X[:, 1]) <= 1e-12
        return np.where(on_t0, -np.sin(np.pi * X[:, 0]), 0.0)

    if quadratic_v4:

        def p_map(V):
            return V[:, 1] + V[:, 0] * V[:, 2] - nu * V[:, 3] ** 2

        def p_jac(V):
            out = np.empty_like(V)
            out[:, 0] = V[:, 2]
            out[:, 1] = 1.0
            out[:, 2] = V[:, 0]
            out[:, 3] = -2.0 * nu * V[:, 3]
            return out

        def elim_map(V, y):
            return y + nu * V[:, 3] ** 2 - V[:, 0] * V[:, 2]

        def elim_jac(V, y):
            out = np.zeros_like(V)
            out[:, 0] = -V[:, 2]
            out[:, 2] = -V[:, 0]
            out[:, 3] = 2.0 * nu * V[:, 3]
            return out

    else:

        def p_map(V):
            return V[:, 1] + V[:, 0] * V[:, 2] - nu * V[:, 3]

        def p_jac(V):
            out = np.empty_like(V)
            out[:, 0] = V[:, 2]
            out[:, 1] = 1.0
            out[:, 2] = V[:, 0]
            out[:, 3] = -nu
            return out

        def elim_map(V, y):
            # v2 = y + nu v4 - v1 v3
            return y + nu * V[:, 3] - V[:, 0] * V[:, 2]

        def elim_jac(V, y):
            out = np.zeros_like(V)
            out[:, 0] = -V[:, 2]
            out[:, 2] = -V[:, 0]
            out[:, 3] = nu
            return out

    return ProblemSpec(
        name="burgers",
        box=BURGERS_BOX,
        ops=(
            DerivativeOp.identity(),
            DerivativeOp.partial(1),   # d_t
            DerivativeOp.partial(0),   # d_s
            DerivativeOp.partial2(0),  # d_s^2
        ),
        q_boundary=1,
        params={"nu": nu, "quadratic_v4": quadratic_v4},
        f=f,
        g=g,
        truth=None,
        p_map=p_map,
        p_jac=p_jac,
        elim_q=1,
        elim_map=elim_map,
        elim_jac=elim_jac,
    )


# ---------------------------------------------------------------------------
# Regularized Eikonal: |grad u|^2 = f^2 + eps Delta u on (0,1)^2, u = 0 on
# the boundary; interior data y = f^2.
# ---------------------------------------------------------------------------

def eikonal_spec(eps: float = 0.1, f_value: float = 1.0) -> ProblemSpec:
    if eps <= 0:
        raise ValueError("eps must be positive (elimination divides by eps)")

    def f(X):
        # interior measurement is f^2
        return np.full(len(np.atleast_2d(X)), f_value**2)

    def g(X):
        return np.zeros(len(np.atleast_2d(X)))

    def p_map(V):
        return V[:, 1] ** 2 + V[:, 2] ** 2 - eps * V[:, 3]

    def p_jac(V):
        out = np.empty_like(V)
        out[:, 0] = 0.0
        out[:, 1] = 2.0 * V[:, 1]
        out[:, 2] = 2.0 * V[:, 2]
        out[:, 3] = -eps
        return out

    def elim_map(V, y):
        # v4 = (v2^2 + v3^2 - y) / eps
        return (V[:, 1] ** 2 + V[:, 2] ** 2 - y) / eps

    def elim_jac(V, y):
        out = np.zeros_like(V)
        out[:, 1] = 2.0 * V[:, 1] / eps
        out[:, 2] = 2.0 * V[:, 2] / eps
        return out

    return ProblemSpec(
        name="eikonal",
        box=UNIT_SQUARE,
        ops=(
            DerivativeOp.identity(),
            DerivativeOp.partial(0),
            DerivativeOp.partial(1),
            DerivativeOp.laplacian(),
        ),
        q_boundary=1,
        params={"eps": eps, "f_value": f_value},
        f=f,
        g=g,
        truth=None,
        p_map=p_map,
        p_jac=p_jac,
        elim_q=3,
        elim_map=elim_map,
        elim_jac=elim_jac,
    )


# ---------------------------------------------------------------------------
# Darcy flow inverse problem: -div(exp(a) grad u) = 1 on (0,1)^2, u = 0 on
# the boundary; recover a from I noisy point observations of u.
# ---------------------------------------------------------------------------

def darcy_truth_a(X: np.ndarray) -> np.ndarray:
    """log( exp(sin 2pi x1 + sin 2pi x2) + exp(-sin 2pi x1 - sin 2pi x2) )."""
    X = np.atleast_2d(X)
    s = np.sin(2.0 * np.pi * X[:, 0]) + np.sin(2.0 * np.pi * X[:, 1])
    return np.logaddexp(s, -s)


def darcy_ip_spec(
    gamma: float = 1e-3,
    n_obs: int = 40,
    M: int = 500,
    M_omega: int = 400,
    sigma: float = 0.2,
    sigma_a: float = 0.2,
) -> "DarcyIPSpec":
    """Darcy inverse-problem benchmark with its default experiment sizes."""
    return DarcyIPSpec(
        gamma=gamma,
        n_obs=n_obs,
        default_M=M,
        default_M_omega=M_omega,
        sigma=sigma,
        sigma_a=sigma_a,
    )


@dataclass(frozen=True)
class DarcyIPSpec:
    """Darcy inverse problem definition (forward PDE plus observation model)."""

    gamma: float = 1e-3
    n_obs: int = 40
    f_value: float = 1.0
    box: Box = UNIT_SQUARE
    default_M: int = 500
    default_M_omega: int = 400
    sigma: float = 0.2
    sigma_a: float = 0.2
    # u-side operators: Id at all M points, gradient components and Laplacian
    # at interior points only.
    u_ops: tuple[DerivativeOp, ...] = (
        DerivativeOp.identity(),
        DerivativeOp.partial(0),
        DerivativeOp.partial(1),
        DerivativeOp.laplacian(),
    )
    # a-side operators: Id and gradient components at all M points.
    a_ops: tuple[DerivativeOp, ...] = (
        DerivativeOp.identity(),
        DerivativeOp.partial(0),
        DerivativeOp.partial(1),
    )
    truth_a = staticmethod(darcy_truth_a)

    def discretize(self, pts: CollocationSet, obs_idx: np.ndarray) -> "DarcyDiscrete":
        return DarcyDiscrete(self, pts, np.asarray(obs_idx, dtype=int))


class DarcyDiscrete:
    """Joint discrete system for the Darcy inverse problem.

    zeta stacks the u-side vector z (observation functionals first, then the
    u functional blocks) and the a-side vector z_tilde.  The PDE constraint is
    enforced at interior points, u is pinned to 0 at boundary points, and the
    Laplacian block is eliminated:
        Delta u = -f exp(-a) - (grad a . grad u).
    """

    def __init__(self, spec: DarcyIPSpec, pts: CollocationSet, obs_idx: np.ndarray):
        if np.any(obs_idx < 0) or np.any(obs_idx >= pts.n_interior):
            raise ValueError("observation indices must reference interior points")
        self.spec = spec
        self.pts = pts
        self.obs_idx = obs_idx
        self.I = len(obs_idx)
        self.M = pts.m_total
        self.M_omega = pts.n_interior

        M, MO, I = self.M, self.M_omega, self.I
        all_pts = np.arange(M)
        int_pts = np.arange(MO)
        u_blocks = [FunctionalBlock(DerivativeOp.identity(), obs_idx)]
        for q, op in enumerate(spec.u_ops):
            u_blocks.append(FunctionalBlock(op, all_pts if q == 0 else int_pts))
        self.fv_u = FunctionalVector(
            pts.points, tuple(u_blocks), M, MO, len(spec.u_ops), 1
        )
        a_blocks = [FunctionalBlock(op, all_pts) for op in spec.a_ops]
        self.fv_a = FunctionalVector(
            pts.points, tuple(a_blocks), M, MO, len(spec.a_ops), len(spec.a_ops)
        )

        self.n_u = I + M + 3 * MO          # len of z (u side incl. observations)
        self.n_a = 3 * M                   # len of z_tilde
        self.n_total = self.n_u + self.n_a
        # offsets within zeta
        self.o_obs = 0
        self.o_u = I
        self.o_ux1 = I + M
        self.o_ux2 = I + M + MO
        self.o_lap = I + M + 2 * MO
        self.o_a = self.n_u
        self.o_ax1 = self.n_u + M
        self.o_ax2 = self.n_u + 2 * M

        self.y = np.concatenate(
            [np.full(MO, spec.f_value), np.zeros(M - MO)]
        )
        # reduced variables (everything except observations, pinned boundary u
        # values, and the eliminated Laplacian block)
        self.w_indices = np.concatenate(
            [
                self.o_u + int_pts,
                self.o_ux1 + int_pts,
                self.o_ux2 + int_pts,
                self.o_a + all_pts,
                self.o_ax1 + all_pts,
                self.o_ax2 + all_pts,
            ]
        )
        self.n_reduced = len(self.w_indices)

    # -- pieces -------------------------------------------------------------
    def _fields(self, zeta):
        MO, M = self.M_omega, self.M
        return dict(
            u_int=zeta[self.o_u : self.o_u + MO],
            u_bdry=zeta[self.o_u + MO : self.o_u + M],
            ux1=zeta[self.o_ux1 : self.o_ux1 + MO],
            ux2=zeta[self.o_ux2 : self.o_ux2 + MO],
            lap=zeta[self.o_lap : self.o_lap + MO],
            a_int=zeta[self.o_a : self.o_a + MO],
            ax1_int=zeta[self.o_ax1 : self.o_ax1 + MO],
            ax2_int=zeta[self.o_ax2 : self.o_ax2 + MO],
        )

    def residual(self, zeta: np.ndarray) -> np.ndarray:
        v = self._fields(zeta)
        r_int = -np.exp(v["a_int"]) * (
            v["ax1_int"] * v["ux1"] + v["ax2_int"] * v["ux2"] + v["lap"]
        )
        return np.concatenate([r_int, v["u_bdry"]])

    def residual_jac(self, zeta: np.ndarray) -> sp.csr_matrix:
        v = self._fields(zeta)
        ea = np.exp(v["a_int"])
        r_int = -ea * (v["ax1_int"] * v["ux1"] + v["ax2_int"] * v["ux2"] + v["lap"])
        MO, M = self.M_omega, self.M
        idx = np.arange(MO)
        rows, cols, vals = [], [], []

        def add(offset, values):
            rows.append(idx)
            cols.append(offset + idx)
            vals.append(values)

        add(self.o_ux1, -ea * v["ax1_int"])
        add(self.o_ux2, -ea * v["ax2_int"])
        add(self.o_lap, -ea)
        add(self.o_a, r_int)
        add(self.o_ax1, -ea * v["ux1"])
        add(self.o_ax2, -ea * v["ux2"])
        idx_b = np.arange(M - MO)
        rows.append(MO + idx_b)
        cols.append(self.o_u + MO + idx_b)
        vals.append(np.ones(M - MO))
        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(M, self.n_total),
        )

    def obs_rows(self) -> sp.csr_matrix:
        """Projection onto the observation entries of zeta."""
        I = self.I
        return sp.csr_matrix(
            (np.ones(I), (np.arange(I), np.arange(I))), shape=(I, self.n_total)
        )

    def fbar(self, v_obs: np.ndarray, w: np.ndarray) -> np.ndarray:
        """zeta from observation values and reduced variables; satisfies the
        PDE constraints and boundary pinning exactly."""
        MO, M = self.M_omega, self.M
        zeta = np.zeros(self.n_total)
        zeta[: self.I] = v_obs
        zeta[self.w_indices] = w
        f = self._fields(zeta)
        lap = -self.spec.f_value * np.exp(-f["a_int"]) - (
            f["ax1_int"] * f["ux1"] + f["ax2_int"] * f["ux2"]
        )
        zeta[self.o_lap : self.o_lap + MO] = lap
        # boundary u values already pinned to 0 by construction
        return zeta

    def fbar_jac(self, v_obs: np.ndarray, w: np.ndarray) -> sp.csr_matrix:
        """d zeta / d (v_obs, w), shape (n_total, I + n_reduced)."""
        zeta = self.fbar(v_obs, w)
        f = self._fields(zeta)
        MO = self.M_omega
        idx = np.arange(MO)
        rows, cols, vals = [], [], []
        # identity part: observations then reduced variables
        var_rows = np.concatenate([np.arange(self.I), self.w_indices])
        rows.append(var_rows)
        cols.append(np.arange(self.I + self.n_reduced))
        vals.append(np.ones(self.I + self.n_reduced))
        # eliminated Laplacian block depends on (u_x1, u_x2, a, a_x1, a_x2)
        # at interior points; locate those columns inside (v_obs, w).
        col_of = {int(g): self.I + k for k, g in enumerate(self.w_indices)}

        def add(global_offset, values):
            rows.append(self.o_lap + idx)
            cols.append(np.array([col_of[global_offset + i] for i in idx]))
            vals.append(values)

        add(self.o_ux1, -f["ax1_int"])
        add(self.o_ux2, -f["ax2_int"])
        add(self.o_a, self.spec.f_value * np.exp(-f["a_int"]))
        add(self.o_ax1, -f["ux1"])
        add(self.o_ax2, -f["ux2"])
        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.n_total, self.I + self.n_reduced),
        )
