"""Independent reference solutions and baselines.

Contains the Cole-Hopf quadrature oracle for Burgers, the log-transform +
finite-difference oracle for the regularized Eikonal equation, 5-point FD
solvers for Poisson and Darcy flow, and discrete error metrics.  These are
deliberately independent of the kernel solver so they can serve as ground
truth in tests and experiment tables.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.interpolate import RegularGridInterpolator

from .functionals import Box


@dataclass
class ReferenceGrid:
    """Nodal values on a uniform tensor grid with a bilinear accessor."""

    axes: tuple[np.ndarray, ...]
    values: np.ndarray

    def __post_init__(self):
        if any(len(ax) < 3 for ax in self.axes):
            raise ValueError("grid resolution must be >= 3 per axis")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("reference grid holds non-finite values")
        self._interp = RegularGridInterpolator(
            self.axes, self.values, method="linear", bounds_error=False,
            fill_value=None,
        )

    def __call__(self, X: np.ndarray) -> np.ndarray:
        return self._interp(np.atleast_2d(X))

    def export_csv(self, path: str) -> None:
        mesh = np.meshgrid(*self.axes, indexing="ij")
        cols = [m.ravel() for m in mesh] + [self.values.ravel()]
        header = ",".join([f"x{k}" for k in range(len(self.axes))] + ["value"])
        np.savetxt(path, np.stack(cols, axis=-1), delimiter=",", header=header,
                   comments="")


# ---------------------------------------------------------------------------
# Burgers via Cole-Hopf
# ---------------------------------------------------------------------------

def burgers_cole_hopf(s, t, nu: float = 0.02, order: int = 100):
    """Viscous Burgers solution with initial datum -sin(pi s) via the Hopf
    formula, evaluated by Gauss-Hermite quadrature.

    The heat-kernel substitution y = s - sqrt(4 nu t) h turns both integrals
    of the Hopf ratio into Hermite-weighted integrals of
    phi0(y) = exp(-cos(pi y) / (2 pi nu)), giving
        u(s,t) = -sum_i w_i sin(pi y_i) phi0(y_i) / sum_i w_i phi0(y_i).
    Vectorized over arrays s, t; returns -sin(pi s) on the t=0 slice.
    """
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be nonnegative")
    s, t = np.broadcast_arrays(s, t)
    out = np.empty(s.shape)
    initial = t == 0
    out[initial] = -np.sin(np.pi * s[initial])
    if np.any(~initial):
        h, wq = np.polynomial.hermite.hermgauss(order)
        sv = s[~initial][:, None]
        tv = t[~initial][:, None]
        y = sv - np.sqrt(4.0 * nu * tv) * h[None, :]
        # subtract the row max in the exponent for overflow safety; the
        # common factor cancels in the ratio
        expo = -np.cos(np.pi * y) / (2.0 * np.pi * nu)
        expo -= expo.max(axis=1, keepdims=True)
        phi0 = np.exp(expo)
        num = np.sum(wq * np.sin(np.pi * y) * phi0, axis=1)
        den = np.sum(wq * phi0, axis=1)
        out[~initial] = -num / den
    return out if out.shape else float(out)


def burgers_evaluator(nu: float = 0.02, order: int = 100):
    """Truth evaluator X=(s,t) -> u(s,t) for error metrics."""

    def ev(X):
        X = np.atleast_2d(X)
        return burgers_cole_hopf(X[:, 0], X[:, 1], nu=nu, order=order)

    return ev


# ---------------------------------------------------------------------------
# FD helpers on the unit square
# ---------------------------------------------------------------------------

def _interior_laplacian(n: int) -> sp.csr_matrix:
    """5-point Laplacian (scaled by 1/h^2) on the (n-2)^2 interior nodes of an
    n x n grid over [0,1]^2 with Dirichlet exterior."""
    m = n - 2
    h = 1.0 / (n - 1)
    D = sp.diags([1.0, -2.0, 1.0], [-1, 0, 1], shape=(m, m))
    Im = sp.identity(m)
    return (sp.kron(D, Im) + sp.kron(Im, D)).tocsr() / h**2


def fd_poisson(f, g, n: int) -> ReferenceGrid:
    """Second-order FD solve of -Delta u = f on (0,1)^2 with u = g on the
    boundary; f and g are callables on (k,2) point arrays."""
    ax = np.linspace(0.0, 1.0, n)
    Xg, Yg = np.meshgrid(ax, ax, indexing="ij")
    pts = np.stack([Xg.ravel(), Yg.ravel()], axis=-1)
    u = np.zeros((n, n))
    bmask = (Xg == 0) | (Xg == 1) | (Yg == 0) | (Yg == 1)
    u[bmask] = np.asarray(g(pts)).reshape(n, n)[bmask]

    m = n - 2
    h = 1.0 / (n - 1)
    A = -_interior_laplacian(n)
    rhs = np.asarray(f(pts)).reshape(n, n)[1:-1, 1:-1].copy()
    # fold Dirichlet values into the right-hand side
    rhs[0, :] += u[0, 1:-1] / h**2
    rhs[-1, :] += u[-1, 1:-1] / h**2
    rhs[:, 0] += u[1:-1, 0] / h**2
    rhs[:, -1] += u[1:-1, -1] / h**2
    u[1:-1, 1:-1] = spla.spsolve(A.tocsc(), rhs.ravel()).reshape(m, m)
    return ReferenceGrid((ax, ax), u)


def eikonal_reference(eps: float = 0.1, f_value: float = 1.0, n: int = 1000) -> ReferenceGrid:
    """Solve f v - eps^2 Delta v = 0 on (0,1)^2 with v = 1 on the boundary by
    the 5-point scheme, then return u = -eps log v."""
    if n < 3:
        raise ValueError("n must be >= 3")
    ax = np.linspace(0.0, 1.0, n)
    m = n - 2
    h = 1.0 / (n - 1)
    A = (f_value * sp.identity(m * m) - eps**2 * _interior_laplacian(n)).tocsc()
    # boundary v=1 contributes eps^2/h^2 for each exterior neighbor
    rhs = np.zeros((m, m))
    rhs[0, :] += eps**2 / h**2
    rhs[-1, :] += eps**2 / h**2
    rhs[:, 0] += eps**2 / h**2
    rhs[:, -1] += eps**2 / h**2
    v = np.ones((n, n))
    v[1:-1, 1:-1] = spla.spsolve(A, rhs.ravel()).reshape(m, m)
    if np.any(v <= 0):
        raise ArithmeticError("discrete Eikonal transform produced v <= 0")
    return ReferenceGrid((ax, ax), -eps * np.log(v))


def darcy_forward_fd(a_fun, f_value: float = 1.0, n: int = 256) -> ReferenceGrid:
    """Conservative 5-point solve of -div(exp(a) grad u) = f on (0,1)^2 with
    u = 0 on the boundary; face conductivities are harmonic means of exp(a)
    at the adjacent nodes."""
    ax = np.linspace(0.0, 1.0, n)
    Xg, Yg = np.meshgrid(ax, ax, indexing="ij")
    pts = np.stack([Xg.ravel(), Yg.ravel()], axis=-1)
    kappa = np.exp(np.asarray(a_fun(pts)).reshape(n, n))
    h = 1.0 / (n - 1)

    def harmonic(k1, k2):
        return 2.0 * k1 * k2 / (k1 + k2)

    # face conductivities between node (i,j) and its +x / +y neighbors
    kxp = harmonic(kappa[:-1, :], kappa[1:, :])  # (n-1, n)
    kyp = harmonic(kappa[:, :-1], kappa[:, 1:])  # (n, n-1)

    m = n - 2
    idx = np.arange(m * m).reshape(m, m)
    rows, cols, vals = [], [], []

    def add(r, c, v):
        rows.append(r.ravel())
        cols.append(c.ravel())
        vals.append(v.ravel())

    # interior node (i,j) of the full grid maps to idx[i-1, j-1]
    kw = kxp[:-1, 1:-1]  # west face of interior nodes
    ke = kxp[1:, 1:-1]   # east face
    ks = kyp[1:-1, :-1]  # south face
    kn = kyp[1:-1, 1:]   # north face
    diag = kw + ke + ks + kn
    add(idx, idx, diag)
    add(idx[1:, :], idx[:-1, :], -kw[1:, :])
    add(idx[:-1, :], idx[1:, :], -ke[:-1, :])
    add(idx[:, 1:], idx[:, :-1], -ks[:, 1:])
    add(idx[:, :-1], idx[:, 1:], -kn[:, :-1])
    A = sp.csc_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(m * m, m * m),
    ) / h**2
    rhs = np.full(m * m, f_value)
    u = np.zeros((n, n))
    u[1:-1, 1:-1] = spla.spsolve(A, rhs).reshape(m, m)
    return ReferenceGrid((ax, ax), u)


# ---------------------------------------------------------------------------
# Error metrics
# ---------------------------------------------------------------------------

def interior_grid(box: Box, n: int) -> np.ndarray:
    """Uniform n^d lattice strictly inside the box, flattened to (n^d, d)."""
    axes = [
        np.linspace(box.lo[k], box.hi[k], n + 2)[1:-1] for k in range(box.dim)
    ]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def error_metrics(predicted, truth, box: Box, n: int = 60) -> tuple[float, float]:
    """(L2, Linf) of predicted - truth over a uniform n x n interior grid.

    L2 is the discrete root-mean-square difference (uniform weights)."""
    X = interior_grid(box, n)
    diff = np.asarray(predicted(X)) - np.asarray(truth(X))
    l2 = float(np.sqrt(np.mean(diff**2)))
    linf = float(np.max(np.abs(diff)))
    return l2, linf
