import numpy as np
import pytest

from kernelpde.functionals import (
    FunctionalBlock,
    FunctionalVector,
    UNIT_SQUARE,
    build_functionals,
    sample_collocation,
)
from kernelpde.gram import (
    DegenerateBlockError,
    GramSystem,
    NotPositiveDefiniteError,
    adaptive_nugget,
    assemble_theta,
    content_hash,
    factorize,
    half_solve,
    nugget_scales,
    standard_nugget,
    weighted_norm_solve,
)
from kernelpde.kernels import DerivativeOp, KernelSpec
from kernelpde.problems import elliptic_spec

ISO = KernelSpec.gaussian_isotropic(0.2, 2)


def _delta_vector(points):
    points = np.atleast_2d(points)
    block = FunctionalBlock(DerivativeOp.identity(), np.arange(len(points)))
    return FunctionalVector(points, (block,), len(points), len(points), 1, 1)


def test_single_delta_gives_unit_matrix():
    theta, blocks = assemble_theta(ISO, _delta_vector([[0.3, 0.4]]))
    assert theta.shape == (1, 1)
    assert theta[0, 0] == 1.0


def test_duplicate_deltas_singular_then_pd_with_nugget():
    points = np.array([[0.3, 0.4]])
    block = FunctionalBlock(DerivativeOp.identity(), np.array([0, 0]))
    fv = FunctionalVector(points, (block,), 1, 1, 1, 1)
    theta, blocks = assemble_theta(ISO, fv)
    assert np.allclose(theta, 1.0)
    with pytest.raises(NotPositiveDefiniteError):
        factorize(theta)
    reg, _ = adaptive_nugget(theta, blocks, 1e-8)
    factorize(reg)  # succeeds


def test_elliptic_trace_ratio_is_order_4000():
    spec = elliptic_spec()
    pts = sample_collocation(spec.box, M=1024, M_omega=900, seed=0)
    fv = build_functionals(spec, pts)
    theta, blocks = assemble_theta(ISO, fv)
    ratio = nugget_scales(theta, blocks)[1]
    assert 3.5e3 < ratio < 5e3


def test_adaptive_eta_zero_is_noop_and_q1_matches_standard():
    theta, blocks = assemble_theta(ISO, _delta_vector([[0.1, 0.2], [0.5, 0.6]]))
    reg, r = adaptive_nugget(theta, blocks, 0.0)
    assert reg is theta
    rega, _ = adaptive_nugget(theta, blocks, 1e-3)
    regs, _ = standard_nugget(theta, 1e-3)
    assert np.array_equal(rega, regs)  # single pointwise block: R = I


def test_standard_nugget_scalar():
    reg, _ = standard_nugget(np.array([[1.0]]), 1e-2)
    assert reg[0, 0] == pytest.approx(1.01, rel=1e-15)


def test_degenerate_block_error():
    with pytest.raises(DegenerateBlockError):
        nugget_scales(np.zeros((2, 2)), [slice(0, 1), slice(1, 2)])


def test_factorize_hand_checked_2x2():
    L = factorize(np.array([[4.0, 2.0], [2.0, 3.0]]))
    assert np.allclose(L, [[2.0, 0.0], [1.0, np.sqrt(2.0)]])


def test_factorize_reports_pivot():
    mat = np.diag([1.0, 1.0, -1.0])
    with pytest.raises(NotPositiveDefiniteError) as err:
        factorize(mat)
    assert err.value.pivot == 2


def test_factor_reproduces_matrix():
    spec = elliptic_spec()
    pts = sample_collocation(spec.box, M=60, M_omega=45, seed=2)
    gs = GramSystem.build(ISO, build_functionals(spec, pts), eta=1e-10)
    rel = np.linalg.norm(gs.factor @ gs.factor.T - gs.reg) / np.linalg.norm(gs.reg)
    assert rel <= 1e-10


def test_weighted_norm_solve_and_quad_form_consistency():
    rng = np.random.default_rng(0)
    spec = elliptic_spec()
    pts = sample_collocation(spec.box, M=40, M_omega=30, seed=1)
    gs = GramSystem.build(ISO, build_functionals(spec, pts), eta=1e-8)

    ident_factor = factorize(np.eye(5))
    v0 = rng.random(5)
    assert np.allclose(weighted_norm_solve(ident_factor, v0), v0)

    v = rng.random(gs.size)
    back = gs.reg @ gs.solve(v)
    assert np.linalg.norm(back - v) / np.linalg.norm(v) <= 1e-8

    z = rng.random(gs.size)
    q_half = gs.quad_form(z)
    q_full = float(z @ gs.solve(z))
    assert q_half == pytest.approx(q_full, rel=1e-12)
    assert q_half > 0


def test_symmetry_and_reproducibility():
    spec = elliptic_spec()
    pts = sample_collocation(spec.box, M=50, M_omega=40, seed=3)
    fv = build_functionals(spec, pts)
    t1, _ = assemble_theta(ISO, fv)
    t2, _ = assemble_theta(ISO, fv)
    assert np.array_equal(t1, t2)  # bitwise reproducible serially
    assert np.array_equal(t1, t1.T)


def test_dump_load_roundtrip(tmp_path):
    spec = elliptic_spec()
    pts = sample_collocation(spec.box, M=30, M_omega=20, seed=4)
    fv = build_functionals(spec, pts)
    gs = GramSystem.build(ISO, fv, eta=1e-9)
    path = tmp_path / "gram.npz"
    gs.save(str(path))
    back = GramSystem.load(str(path))
    assert np.array_equal(back.reg, gs.reg)
    assert back.eta == gs.eta
    key1 = content_hash(ISO, fv, 1e-9, "adaptive")
    key2 = content_hash(ISO, fv, 1e-9, "adaptive")
    assert key1 == key2
    assert key1 != content_hash(ISO, fv, 1e-8, "adaptive")
