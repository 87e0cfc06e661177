import numpy as np
import pytest

from kernelpde.kernels import (
    DerivativeOp,
    KernelSpec,
    UnsupportedOperatorError,
    eval_bilinear,
    eval_bilinear_matrix,
    eval_kernel,
)
from kernelpde.validation import check_kernel_derivatives, fd_bilinear

ISO = KernelSpec.gaussian_isotropic(0.2, 2)
ANISO = KernelSpec.gaussian_anisotropic((1.0 / 20.0, 1.0 / 3.0))


def test_zero_distance_is_one():
    assert eval_kernel(ISO, (0.3, 0.7), (0.3, 0.7)) == 1.0
    assert eval_kernel(ANISO, (0.3, 0.7), (0.3, 0.7)) == 1.0


def test_isotropic_one_lengthscale_apart():
    assert eval_kernel(ISO, (0.0, 0.0), (0.2, 0.0)) == pytest.approx(np.exp(-0.5), rel=1e-14)


def test_anisotropic_unit_squared_ratios():
    val = eval_kernel(ANISO, (0.0, 0.0), (1.0 / 20.0, 1.0 / 3.0))
    assert val == pytest.approx(np.exp(-2.0), rel=1e-14)


def test_dimension_mismatch_rejected():
    with pytest.raises(ValueError):
        eval_kernel(ISO, (0.0, 0.0, 0.0), (0.0, 0.0, 0.0))


def test_invalid_axis_rejected():
    with pytest.raises(UnsupportedOperatorError):
        eval_bilinear(ISO, DerivativeOp.partial(2), (0, 0), DerivativeOp.identity(), (0, 0))


def test_invalid_lengthscale_rejected():
    with pytest.raises(ValueError):
        KernelSpec.gaussian_isotropic(-0.1, 2)


def test_identity_pair_equals_kernel():
    rng = np.random.default_rng(0)
    ident = DerivativeOp.identity()
    for _ in range(10):
        x, y = rng.random(2), rng.random(2)
        assert eval_bilinear(ISO, ident, x, ident, y) == pytest.approx(
            eval_kernel(ISO, x, y), rel=1e-14
        )


def test_laplacian_identity_at_coincident_point_vs_fd():
    x = np.array([0.4, 0.6])
    exact = eval_bilinear(ISO, DerivativeOp.laplacian(), x, DerivativeOp.identity(), x)
    approx = fd_bilinear(
        ISO, DerivativeOp.laplacian(), x, DerivativeOp.identity(), x,
        h=1e-4, order=3,
    )
    assert exact == pytest.approx(approx, rel=1e-5)
    # closed-form value: Delta_x K at x=x' is -d/sigma^2
    assert exact == pytest.approx(-2.0 / 0.2**2, rel=1e-12)


def test_laplacian_laplacian_at_coincident_point_vs_fd():
    x = np.array([0.4, 0.6])
    exact = eval_bilinear(ISO, DerivativeOp.laplacian(), x, DerivativeOp.laplacian(), x)
    approx = fd_bilinear(
        ISO, DerivativeOp.laplacian(), x, DerivativeOp.laplacian(), x,
        h=1e-3, order=3,
    )
    assert exact == pytest.approx(approx, rel=1e-4)
    # closed-form value: d(d+2)/sigma^4 in d=2
    assert exact == pytest.approx(8.0 / 0.2**4, rel=1e-12)


def test_symmetry_under_argument_swap():
    rng = np.random.default_rng(1)
    ops = [
        DerivativeOp.identity(),
        DerivativeOp.partial(0),
        DerivativeOp.partial(1),
        DerivativeOp.partial2(0),
        DerivativeOp.laplacian(),
    ]
    for spec in (ISO, ANISO):
        for _ in range(30):
            x, y = rng.random(2), rng.random(2)
            a, b = rng.choice(len(ops), size=2)
            v1 = eval_bilinear(spec, ops[a], x, ops[b], y)
            v2 = eval_bilinear(spec, ops[b], y, ops[a], x)
            assert abs(v1 - v2) <= 1e-12 * max(1.0, abs(v1))


def test_derivatives_match_finite_differences_100_probes():
    result = check_kernel_derivatives(n_probes=100, seed=0)
    assert result.passed, result.detail


def test_positive_type_identity_gram():
    rng = np.random.default_rng(2)
    X = rng.random((40, 2))
    ident = DerivativeOp.identity()
    for spec in (ISO, ANISO):
        G = eval_bilinear_matrix(spec, ident, X, ident, X)
        eigs = np.linalg.eigvalsh(G)
        assert eigs.min() >= -1e-10 * np.trace(G)


def test_matrix_matches_scalar_entries():
    rng = np.random.default_rng(3)
    X, Y = rng.random((4, 2)), rng.random((3, 2))
    opL, opR = DerivativeOp.partial(0), DerivativeOp.laplacian()
    mat = eval_bilinear_matrix(ISO, opL, X, opR, Y)
    for i in range(4):
        for j in range(3):
            assert mat[i, j] == pytest.approx(
                eval_bilinear(ISO, opL, X[i], opR, Y[j]), rel=1e-13, abs=1e-13
            )
