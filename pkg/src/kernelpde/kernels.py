"""Gaussian covariance kernels and their exact mixed derivative functionals.

Both kernel families are tensor products of one-dimensional Gaussians
exp(-a_k (x_k - y_k)^2), so any mixed derivative L^x L^{x'} K factors across
axes into closed-form Hermite-type polynomials times the kernel value.  All
derivatives here are analytic; no finite differences are involved.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

GAUSSIAN_ISOTROPIC = "gaussian_isotropic"
GAUSSIAN_ANISOTROPIC = "gaussian_anisotropic"

_IDENTITY = "identity"
_PARTIAL = "partial"
_PARTIAL2 = "partial2"
_LAPLACIAN = "laplacian"


class UnsupportedOperatorError(ValueError):
    """Raised for operator/kernel combinations without a derivative formula."""


@dataclass(frozen=True)
class DerivativeOp:
    """A linear differential operator applied at a point: one of the identity,
    a first partial, a second partial along one axis, or the Laplacian."""

    tag: str
    axis: int = 0

    @staticmethod
    def identity() -> "DerivativeOp":
        return DerivativeOp(_IDENTITY)

    @staticmethod
    def partial(axis: int) -> "DerivativeOp":
        return DerivativeOp(_PARTIAL, axis)

    @staticmethod
    def partial2(axis: int) -> "DerivativeOp":
        """Second partial derivative along a single axis."""
        return DerivativeOp(_PARTIAL2, axis)

    @staticmethod
    def laplacian() -> "DerivativeOp":
        return DerivativeOp(_LAPLACIAN)

    def validate(self, dim: int) -> None:
        if self.tag in (_PARTIAL, _PARTIAL2) and not 0 <= self.axis < dim:
            raise UnsupportedOperatorError(
                f"axis {self.axis} invalid for dimension {dim}"
            )
        if self.tag not in (_IDENTITY, _PARTIAL, _PARTIAL2, _LAPLACIAN):
            raise UnsupportedOperatorError(f"unknown operator tag {self.tag!r}")

    def terms(self, dim: int) -> list[tuple[float, tuple[int, ...]]]:
        """Expand into a sum of pure mixed-partial monomials.

        Returns [(coefficient, per-axis derivative orders), ...].
        """
        self.validate(dim)
        zero = (0,) * dim
        if self.tag == _IDENTITY:
            return [(1.0, zero)]
        if self.tag == _PARTIAL:
            orders = list(zero)
            orders[self.axis] = 1
            return [(1.0, tuple(orders))]
        if self.tag == _PARTIAL2:
            orders = list(zero)
            orders[self.axis] = 2
            return [(1.0, tuple(orders))]
        # Laplacian: sum of second partials over all axes.
        out = []
        for k in range(dim):
            orders = list(zero)
            orders[k] = 2
            out.append((1.0, tuple(orders)))
        return out

    def __repr__(self) -> str:  # pragma: no cover - cosmetic
        if self.tag in (_PARTIAL, _PARTIAL2):
            return f"DerivativeOp({self.tag}, axis={self.axis})"
        return f"DerivativeOp({self.tag})"


@dataclass(frozen=True)
class KernelSpec:
    """Covariance kernel: family, per-axis lengthscales, input dimension.

    Isotropic: K(x,y) = exp(-|x-y|^2 / (2 sigma^2)).
    Anisotropic: K(x,y) = exp(-sum_k (x_k-y_k)^2 / sigma_k^2)  (no 1/2 factor).
    """

    family: str
    lengthscales: tuple[float, ...]
    dim: int

    def __post_init__(self) -> None:
        if self.family not in (GAUSSIAN_ISOTROPIC, GAUSSIAN_ANISOTROPIC):
            raise UnsupportedOperatorError(f"unknown kernel family {self.family!r}")
        if self.dim < 1:
            raise ValueError("dimension must be positive")
        if any(s <= 0 for s in self.lengthscales):
            raise ValueError("lengthscales must be strictly positive")
        n_expected = 1 if self.family == GAUSSIAN_ISOTROPIC else self.dim
        if len(self.lengthscales) != n_expected:
            raise ValueError(
                f"expected {n_expected} lengthscale(s), got {len(self.lengthscales)}"
            )

    @staticmethod
    def gaussian_isotropic(sigma: float, dim: int) -> "KernelSpec":
        return KernelSpec(GAUSSIAN_ISOTROPIC, (float(sigma),), dim)

    @staticmethod
    def gaussian_anisotropic(lengthscales) -> "KernelSpec":
        ls = tuple(float(s) for s in lengthscales)
        return KernelSpec(GAUSSIAN_ANISOTROPIC, ls, len(ls))

    def axis_coefficients(self) -> np.ndarray:
        """Per-axis a_k in K = prod_k exp(-a_k (x_k-y_k)^2)."""
        if self.family == GAUSSIAN_ISOTROPIC:
            a = 1.0 / (2.0 * self.lengthscales[0] ** 2)
            return np.full(self.dim, a)
        return 1.0 / np.asarray(self.lengthscales) ** 2


def _check_points(spec: KernelSpec, *points) -> list[np.ndarray]:
    out = []
    for p in points:
        arr = np.atleast_1d(np.asarray(p, dtype=float))
        if arr.shape[-1] != spec.dim:
            raise ValueError(
                f"point dimension {arr.shape[-1]} != kernel dimension {spec.dim}"
            )
        out.append(arr)
    return out


def eval_kernel(spec: KernelSpec, x, x2) -> float:
    """K(x, x2) for the given kernel family."""
    x, x2 = _check_points(spec, x, x2)
    a = spec.axis_coefficients()
    return float(np.exp(-np.sum(a * (x - x2) ** 2)))


# d^n/du^n exp(-a u^2) = P_n(a, u) exp(-a u^2), from the recurrence
# P_{n+1} = P_n' - 2 a u P_n.  Orders up to 4 cover Laplacian-Laplacian blocks.
def _deriv_factor(n: int, a, u):
    if n == 0:
        return np.ones_like(u)
    if n == 1:
        return -2.0 * a * u
    if n == 2:
        return 4.0 * a**2 * u**2 - 2.0 * a
    if n == 3:
        return -8.0 * a**3 * u**3 + 12.0 * a**2 * u
    if n == 4:
        return 16.0 * a**4 * u**4 - 48.0 * a**3 * u**2 + 12.0 * a**2
    raise UnsupportedOperatorError(f"derivative order {n} not implemented")


def eval_bilinear_matrix(
    spec: KernelSpec,
    opL: DerivativeOp,
    X: np.ndarray,
    opR: DerivativeOp,
    Y: np.ndarray,
) -> np.ndarray:
    """Matrix of L^x L^{x'} K(x, x') over point arrays X (m,d) and Y (n,d).

    opL differentiates the first kernel argument, opR the second.
    """
    X = np.asarray(X, dtype=float).reshape(-1, spec.dim)
    Y = np.asarray(Y, dtype=float).reshape(-1, spec.dim)
    a = spec.axis_coefficients()
    U = X[:, None, :] - Y[None, :, :]  # (m, n, d)
    base = np.exp(-np.sum(a * U**2, axis=-1))
    total = np.zeros_like(base)
    for cL, pL in opL.terms(spec.dim):
        for cR, pR in opR.terms(spec.dim):
            # d/dy_k = -d/du_k, hence the sign from the opR orders.
            sign = -1.0 if (sum(pR) % 2) else 1.0
            coef = cL * cR * sign
            factor = None
            for k in range(spec.dim):
                n = pL[k] + pR[k]
                if n == 0:
                    continue
                fk = _deriv_factor(n, a[k], U[..., k])
                factor = fk if factor is None else factor * fk
            term = coef * base if factor is None else coef * factor * base
            total = total + term
    return total


def eval_bilinear(
    spec: KernelSpec, opL: DerivativeOp, x, opR: DerivativeOp, x2
) -> float:
    """Scalar L^x L^{x'} K(x, x') at a single pair of points."""
    x, x2 = _check_points(spec, x, x2)
    return float(eval_bilinear_matrix(spec, opL, x[None, :], opR, x2[None, :])[0, 0])
