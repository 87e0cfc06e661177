"""Collocation point sets and ordered functional vectors.

The functional vector phi stacks blocks of point-evaluation functionals
composed with differential operators: block q lists delta_{x_m} o L_q over
its point range, blocks ordered q = 1..Q.  Operators with q <= Q_b span all
M points (interior first, then boundary); operators with q > Q_b span only
the M_Omega interior points, giving N = M*Q_b + M_Omega*(Q - Q_b).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .kernels import DerivativeOp


@dataclass(frozen=True)
class Box:
    """Axis-aligned box with the subset of faces carrying boundary data.

    Faces are (axis, side) pairs with side 0 for the low face and 1 for the
    high face.  By default every face carries data.
    """

    lo: tuple[float, ...]
    hi: tuple[float, ...]
    constraint_faces: tuple[tuple[int, int], ...] = None  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if len(self.lo) != len(self.hi):
            raise ValueError("lo/hi dimension mismatch")
        if any(h <= l for l, h in zip(self.lo, self.hi)):
            raise ValueError("box must have positive extent on every axis")
        if self.constraint_faces is None:
            faces = tuple((k, s) for k in range(len(self.lo)) for s in (0, 1))
            object.__setattr__(self, "constraint_faces", faces)

    @property
    def dim(self) -> int:
        return len(self.lo)

    def face_measure(self, axis: int, side: int) -> float:
        return float(
            np.prod([self.hi[k] - self.lo[k] for k in range(self.dim) if k != axis])
        )

    def face_value(self, axis: int, side: int) -> float:
        return self.lo[axis] if side == 0 else self.hi[axis]

    def on_constraint_face(self, x: np.ndarray, tol: float = 1e-12) -> bool:
        return any(
            abs(x[axis] - self.face_value(axis, side)) <= tol
            for axis, side in self.constraint_faces
        )


UNIT_SQUARE = Box((0.0, 0.0), (1.0, 1.0))


@dataclass(frozen=True)
class CollocationSet:
    """M collocation points, interior first (M_Omega) then boundary."""

    points: np.ndarray  # (M, d), interior rows first
    n_interior: int
    domain: Box
    seed: int = 0

    @property
    def m_total(self) -> int:
        return len(self.points)

    @property
    def interior(self) -> np.ndarray:
        return self.points[: self.n_interior]

    @property
    def boundary(self) -> np.ndarray:
        return self.points[self.n_interior :]


def _allocate_proportional(total: int, weights: list[float]) -> list[int]:
    """Largest-remainder allocation of `total` items proportional to weights."""
    w = np.asarray(weights, dtype=float)
    ideal = total * w / w.sum()
    counts = np.floor(ideal).astype(int)
    remainder = ideal - counts
    for idx in np.argsort(-remainder)[: total - counts.sum()]:
        counts[idx] += 1
    return counts.tolist()


def sample_collocation(domain: Box, M: int, M_omega: int, seed: int) -> CollocationSet:
    """Uniform random interior points plus boundary points spread over the
    constraint faces proportionally to face measure.  Deterministic in seed."""
    if not 1 <= M_omega < M:
        raise ValueError(f"require 1 <= M_omega < M, got M_omega={M_omega}, M={M}")
    rng = np.random.default_rng(seed)
    lo = np.asarray(domain.lo)
    hi = np.asarray(domain.hi)
    d = domain.dim

    interior = lo + (hi - lo) * rng.random((M_omega, d))

    faces = list(domain.constraint_faces)
    counts = _allocate_proportional(
        M - M_omega, [domain.face_measure(*f) for f in faces]
    )
    rows = []
    for (axis, side), cnt in zip(faces, counts):
        pts = lo + (hi - lo) * rng.random((cnt, d))
        pts[:, axis] = domain.face_value(axis, side)
        rows.append(pts)
    boundary = np.vstack(rows) if rows else np.empty((0, d))

    points = np.vstack([interior, boundary])
    # Collisions have probability ~0 but would make Theta exactly singular.
    while len(np.unique(points, axis=0)) != len(points):  # pragma: no cover
        _, first = np.unique(points, axis=0, return_index=True)
        dup = np.setdiff1d(np.arange(len(points)), first)
        points[dup] = lo + (hi - lo) * rng.random((len(dup), d))
    return CollocationSet(points, M_omega, domain, seed)


def grid_collocation(domain: Box, M: int) -> CollocationSet:
    """Uniform tensor grid with M = n^d nodes including the box faces."""
    d = domain.dim
    n = round(M ** (1.0 / d))
    if n**d != M:
        raise ValueError(f"M={M} is not a perfect {d}-th power")
    axes = [np.linspace(domain.lo[k], domain.hi[k], n) for k in range(d)]
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=-1)
    is_bdry = np.array([domain.on_constraint_face(p) for p in points])
    n_int = int((~is_bdry).sum())
    if n_int < 1:
        raise ValueError("grid has no interior points")
    ordered = np.vstack([points[~is_bdry], points[is_bdry]])
    return CollocationSet(ordered, n_int, domain)


@dataclass(frozen=True)
class FunctionalBlock:
    op: DerivativeOp
    idx: np.ndarray  # indices into the point set

    def __len__(self) -> int:
        return len(self.idx)


@dataclass(frozen=True)
class FunctionalVector:
    """Ordered functional vector phi over a collocation set."""

    points: np.ndarray  # (M, d)
    blocks: tuple[FunctionalBlock, ...]
    m_total: int
    m_interior: int
    q_total: int
    q_boundary: int

    @property
    def size(self) -> int:
        return sum(len(b) for b in self.blocks)

    def slices(self) -> list[slice]:
        out, start = [], 0
        for b in self.blocks:
            out.append(slice(start, start + len(b)))
            start += len(b)
        return out

    def entry(self, n: int) -> tuple[int, int]:
        """Map flat index n to (block index q, point index m)."""
        for q, (b, s) in enumerate(zip(self.blocks, self.slices())):
            if s.start <= n < s.stop:
                return q, int(b.idx[n - s.start])
        raise IndexError(n)


def build_functionals(problem, pts: CollocationSet) -> FunctionalVector:
    """Standard functional vector for a problem's (Q, Q_b, operator list)."""
    M, M_omega = pts.m_total, pts.n_interior
    blocks = []
    for q, op in enumerate(problem.ops):
        idx = np.arange(M) if q < problem.q_boundary else np.arange(M_omega)
        blocks.append(FunctionalBlock(op, idx))
    fv = FunctionalVector(
        pts.points, tuple(blocks), M, M_omega, problem.q_total, problem.q_boundary
    )
    expected = M * problem.q_boundary + M_omega * (problem.q_total - problem.q_boundary)
    assert fv.size == expected
    return fv


def export_points_csv(pts: CollocationSet, path: str) -> None:
    d = pts.points.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{k}" for k in range(d)] + ["is_boundary"])
        for m, p in enumerate(pts.points):
            writer.writerow([repr(float(v)) for v in p] + [int(m >= pts.n_interior)])


def import_points_csv(path: str, domain: Box) -> CollocationSet:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    d = len(header) - 1
    points = np.array([[float(v) for v in r[:d]] for r in body])
    flags = np.array([int(r[d]) for r in body], dtype=bool)
    if flags.any() and not flags[np.argmax(flags) :].all():
        raise ValueError("points must be ordered interior first")
    return CollocationSet(points, int((~flags).sum()), domain)
