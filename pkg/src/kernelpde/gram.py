"""Dense Gram matrix assembly, nugget regularization, and Cholesky solves.

Theta is assembled blockwise from the kernel's mixed derivative functionals,
regularized with a scaled-diagonal nugget, and factorized once; all later
Theta^{-1} applications reuse the factor.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack, solve_triangular

from .functionals import FunctionalVector
from .kernels import KernelSpec, eval_bilinear_matrix

ADAPTIVE = "adaptive"
STANDARD = "standard"


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """Cholesky failure; carries the failing pivot index (0-based)."""

    def __init__(self, pivot: int):
        self.pivot = pivot
        super().__init__(
            f"matrix is not positive definite (pivot {pivot} failed); "
            "consider raising the nugget eta"
        )


class DegenerateBlockError(ValueError):
    """The pointwise-evaluation block has zero trace."""


def assemble_theta(
    kernel: KernelSpec, fv: FunctionalVector
) -> tuple[np.ndarray, list[slice]]:
    """Dense symmetric Theta with entries L_q^x L_j^{x'} K at collocation pairs.

    Returns (Theta, block slices).  Symmetrized by averaging to remove
    floating-point skew between the (q,j) and (j,q) blocks.
    """
    slices = fv.slices()
    N = fv.size
    theta = np.empty((N, N))
    for i, (bi, si) in enumerate(zip(fv.blocks, slices)):
        Xi = fv.points[bi.idx]
        for j, (bj, sj) in enumerate(zip(fv.blocks, slices)):
            if j < i:
                continue
            block = eval_bilinear_matrix(kernel, bi.op, Xi, bj.op, fv.points[bj.idx])
            theta[si, sj] = block
            if j > i:
                theta[sj, si] = block.T
    theta = 0.5 * (theta + theta.T)
    return theta, slices


def nugget_scales(theta: np.ndarray, blocks: list[slice]) -> np.ndarray:
    """Per-block diagonal scales of R: trace ratio to the first block."""
    traces = [np.trace(theta[s, s]) for s in blocks]
    if traces[0] <= 0:
        raise DegenerateBlockError("pointwise-evaluation block has nonpositive trace")
    return np.asarray([t / traces[0] for t in traces])


def adaptive_nugget(
    theta: np.ndarray, blocks: list[slice], eta: float
) -> tuple[np.ndarray, np.ndarray]:
    """Theta + eta*R with R block-diagonal, block q scaled by its trace ratio
    to the pointwise-evaluation block.  Returns (regularized matrix, diag R)."""
    scales = nugget_scales(theta, blocks)
    r_diag = np.empty(len(theta))
    for s, scale in zip(blocks, scales):
        r_diag[s] = scale
    if eta == 0:
        return theta, r_diag
    reg = theta.copy()
    reg[np.diag_indices_from(reg)] += eta * r_diag
    return reg, r_diag


def standard_nugget(theta: np.ndarray, eta: float) -> tuple[np.ndarray, np.ndarray]:
    """Theta + eta*I."""
    r_diag = np.ones(len(theta))
    if eta == 0:
        return theta, r_diag
    reg = theta.copy()
    reg[np.diag_indices_from(reg)] += eta
    return reg, r_diag


def factorize(reg: np.ndarray) -> np.ndarray:
    """Lower-triangular L with L L^T = reg (dense Cholesky)."""
    L, info = lapack.dpotrf(reg, lower=1, clean=1, overwrite_a=0)
    if info > 0:
        raise NotPositiveDefiniteError(pivot=info - 1)
    if info < 0:  # pragma: no cover - argument plumbing error
        raise ValueError(f"dpotrf: illegal argument {-info}")
    return L


def half_solve(factor: np.ndarray, V: np.ndarray) -> np.ndarray:
    """L^{-1} V, the half solve defining the |L^{-1} r|^2 metric."""
    return solve_triangular(factor, V, lower=True, check_finite=False)


def weighted_norm_solve(factor: np.ndarray, V: np.ndarray) -> np.ndarray:
    """(Theta + eta R)^{-1} V via two triangular solves."""
    half = half_solve(factor, V)
    return solve_triangular(factor, half, lower=True, trans="T", check_finite=False)


@dataclass
class GramSystem:
    """Regularized Gram matrix with its factorization and block metadata."""

    reg: np.ndarray  # Theta + eta R
    blocks: list[slice]
    eta: float
    r_diag: np.ndarray
    factor: np.ndarray
    nugget_mode: str = ADAPTIVE
    kernel: KernelSpec = None
    fv: FunctionalVector = None

    @staticmethod
    def build(
        kernel: KernelSpec,
        fv: FunctionalVector,
        eta: float,
        nugget: str = ADAPTIVE,
    ) -> "GramSystem":
        theta, blocks = assemble_theta(kernel, fv)
        if nugget == ADAPTIVE:
            reg, r_diag = adaptive_nugget(theta, blocks, eta)
        elif nugget == STANDARD:
            reg, r_diag = standard_nugget(theta, eta)
        else:
            raise ValueError(f"unknown nugget mode {nugget!r}")
        if reg is theta and eta != 0:  # pragma: no cover - defensive
            reg = theta.copy()
        del theta
        factor = factorize(reg)
        return GramSystem(reg, blocks, eta, r_diag, factor, nugget, kernel, fv)

    @property
    def size(self) -> int:
        return len(self.reg)

    def solve(self, V: np.ndarray) -> np.ndarray:
        return weighted_norm_solve(self.factor, V)

    def half_solve(self, V: np.ndarray) -> np.ndarray:
        return half_solve(self.factor, V)

    def quad_form(self, z: np.ndarray) -> float:
        """z^T (Theta + eta R)^{-1} z."""
        h = self.half_solve(z)
        return float(h @ h)

    def save(self, path: str) -> None:
        np.savez_compressed(
            path, reg=self.reg, eta=self.eta, r_diag=self.r_diag,
            factor=self.factor, nugget_mode=self.nugget_mode,
            block_bounds=np.array([(s.start, s.stop) for s in self.blocks]),
        )

    @staticmethod
    def load(path: str) -> "GramSystem":
        data = np.load(path)
        blocks = [slice(int(a), int(b)) for a, b in data["block_bounds"]]
        return GramSystem(
            data["reg"], blocks, float(data["eta"]), data["r_diag"],
            data["factor"], str(data["nugget_mode"]),
        )


def content_hash(kernel: KernelSpec, fv: FunctionalVector, eta: float, mode: str) -> str:
    """Stable hash of the inputs defining a GramSystem, for cache keys."""
    h = hashlib.sha256()
    h.update(repr((kernel.family, kernel.lengthscales, kernel.dim)).encode())
    h.update(repr((eta, mode)).encode())
    h.update(fv.points.tobytes())
    for b in fv.blocks:
        h.update(repr((b.op.tag, b.op.axis)).encode())
        h.update(np.asarray(b.idx).tobytes())
    return h.hexdigest()
