"""Discrete Poisson solve with Dirichlet boundary over an interior pixel region.

Images are 2D ``float64`` arrays with intensities in [0, 1]; region masks are
2D boolean arrays of the same shape. The region ``omega`` may be any set of
pixels (connected or not) that stays off the image border, so every member has
four in-bounds neighbours and the boundary ring is always defined.

The system solved for the unknowns ``f`` on ``omega`` is, per pixel ``p``::

    4 f(p) - sum_{q in N(p), q in omega} f(q)
        = sum_{q in N(p), q not in omega} target(q) + div(p)

with ``div(p) = 4 g(p) - sum_{q in N(p)} g(q)`` for a guidance image ``g``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import (
    BorderViolation,
    DimensionMismatch,
    EmptyRegion,
    MissingNeighborValue,
    NotConverged,
    PlacementOutOfBounds,
)

# (drow, dcol) for up, down, left, right
NEIGHBORS = ((-1, 0), (1, 0), (0, -1), (0, 1))

DEFAULT_TOL = 1e-6
MAX_ITER_CAP = 100_000


@dataclass(frozen=True)
class RegionIndex:
    """Row-major bijection between region pixels and unknown indices."""

    shape: tuple[int, int]
    rows: np.ndarray
    cols: np.ndarray
    index_map: np.ndarray  # -1 outside the region

    @property
    def size(self) -> int:
        return int(self.rows.size)

    def mask(self) -> np.ndarray:
        return self.index_map >= 0


@dataclass(frozen=True)
class PoissonSystem:
    region: RegionIndex
    matrix: sp.csr_matrix
    rhs: np.ndarray

    @property
    def size(self) -> int:
        return self.region.size


@dataclass(frozen=True)
class SolveReport:
    iterations: int
    relative_residual: float
    converged: bool
    tol: float

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "relative_residual": self.relative_residual,
            "converged": self.converged,
            "tol": self.tol,
        }


def default_max_iter(n_unknowns: int) -> int:
    return max(1, min(10 * n_unknowns, MAX_ITER_CAP))


def index_region(mask: np.ndarray) -> RegionIndex:
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 2:
        raise DimensionMismatch(f"region mask must be 2D, got shape {mask.shape}")
    rows, cols = np.nonzero(mask)
    if rows.size == 0:
        raise EmptyRegion("region has no member pixels")
    h, w = mask.shape
    touching = (rows == 0) | (rows == h - 1) | (cols == 0) | (cols == w - 1)
    if touching.any():
        r, c = int(rows[touching][0]), int(cols[touching][0])
        raise BorderViolation(f"region pixel (row={r}, col={c}) touches the image border")
    index_map = np.full(mask.shape, -1, dtype=np.int64)
    index_map[rows, cols] = np.arange(rows.size)
    return RegionIndex((h, w), rows, cols, index_map)


def compute_divergence(values: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Per-member 5-point Laplacian of ``values`` (the guidance divergence).

    ``values`` must share the mask's shape; NaN marks an undefined sample.
    Returns one value per member pixel, in row-major member order.
    """
    values = np.asarray(values, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if values.shape != mask.shape:
        raise DimensionMismatch(f"values {values.shape} and mask {mask.shape} differ in shape")
    rows, cols = np.nonzero(mask)
    if rows.size == 0:
        raise EmptyRegion("region has no member pixels")
    h, w = mask.shape
    if np.isnan(values[rows, cols]).any():
        raise MissingNeighborValue("guidance undefined at a region pixel")

    div = 4.0 * values[rows, cols]
    for dr, dc in NEIGHBORS:
        nr, nc = rows + dr, cols + dc
        outside = (nr < 0) | (nr >= h) | (nc < 0) | (nc >= w)
        if outside.any():
            k = int(np.argmax(outside))
            raise MissingNeighborValue(
                f"neighbour ({int(nr[k])}, {int(nc[k])}) of region pixel "
                f"({int(rows[k])}, {int(cols[k])}) lies outside the guidance values"
            )
        nv = values[nr, nc]
        if np.isnan(nv).any():
            k = int(np.argmax(np.isnan(nv)))
            raise MissingNeighborValue(f"guidance undefined at ({int(nr[k])}, {int(nc[k])})")
        div -= nv
    return div


def assemble_system(target: np.ndarray, mask: np.ndarray, guidance: np.ndarray | None = None) -> PoissonSystem:
    target = np.asarray(target, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if target.shape != mask.shape:
        raise DimensionMismatch(f"target {target.shape} and mask {mask.shape} differ in shape")
    region = index_region(mask)
    n = region.size
    if guidance is None:
        guidance = np.zeros(n)
    guidance = np.asarray(guidance, dtype=np.float64).ravel()
    if guidance.size != n:
        raise DimensionMismatch(f"guidance has {guidance.size} values for {n} region pixels")

    rows, cols, imap = region.rows, region.cols, region.index_map
    rhs = guidance.copy()
    i_parts = [np.arange(n)]
    j_parts = [np.arange(n)]
    v_parts = [np.full(n, 4.0)]
    for dr, dc in NEIGHBORS:
        nr, nc = rows + dr, cols + dc
        j = imap[nr, nc]
        inside = j >= 0
        i_parts.append(np.nonzero(inside)[0])
        j_parts.append(j[inside])
        v_parts.append(np.full(int(inside.sum()), -1.0))
        rhs[~inside] += target[nr[~inside], nc[~inside]]

    matrix = sp.csr_matrix(
        (np.concatenate(v_parts), (np.concatenate(i_parts), np.concatenate(j_parts))),
        shape=(n, n),
    )
    matrix.sort_indices()
    return PoissonSystem(region, matrix, rhs)


def solve(system: PoissonSystem, tol: float = DEFAULT_TOL, max_iter: int | None = None):
    """Jacobi-preconditioned conjugate gradient.

    Returns ``(x, report)``. When the tolerance is not met within ``max_iter``
    iterations the iterate with the smallest residual is returned and the
    report is flagged ``converged=False``; nothing is raised.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    A, b = system.matrix, system.rhs
    n = b.size
    if max_iter is None:
        max_iter = default_max_iter(n)
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")

    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        return np.zeros(n), SolveReport(0, 0.0, True, tol)

    inv_diag = 1.0 / A.diagonal()
    threshold = tol * b_norm

    x = np.zeros(n)
    r = b.copy()
    z = inv_diag * r
    p = z.copy()
    rz = float(r @ z)
    best_x, best_res = x.copy(), b_norm

    it = 0
    while it < max_iter:
        Ap = A @ p
        alpha = rz / float(p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        it += 1
        res = float(np.linalg.norm(r))
        if res <= threshold:
            # the recursive residual drifts; confirm against b - Ax
            r = b - A @ x
            res = float(np.linalg.norm(r))
            if res <= threshold:
                best_x, best_res = x.copy(), res
                break
            z = inv_diag * r
            p = z.copy()
            rz = float(r @ z)
            continue
        if res < best_res:
            best_x, best_res = x.copy(), res
        z = inv_diag * r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new

    true_res = float(np.linalg.norm(b - A @ best_x)) / b_norm
    return best_x, SolveReport(it, true_res, true_res <= tol, tol)


def _scatter(target: np.ndarray, region: RegionIndex, values: np.ndarray) -> np.ndarray:
    out = np.array(target, dtype=np.float64, copy=True)
    out[region.rows, region.cols] = np.clip(values, 0.0, 1.0)
    return out


def harmonic_fill(target: np.ndarray, mask: np.ndarray, tol: float = DEFAULT_TOL, max_iter: int | None = None) -> np.ndarray:
    """Membrane interpolation of ``target`` over ``mask`` (zero guidance).

    Pixels outside the mask are returned untouched. Raises
    :class:`NotConverged` carrying the best-effort image when the solver
    stops early.
    """
    system = assemble_system(target, mask)
    x, report = solve(system, tol, max_iter)
    out = _scatter(target, system.region, x)
    if not report.converged:
        raise NotConverged(
            f"solver stopped after {report.iterations} iterations at relative residual "
            f"{report.relative_residual:.3e} (tol {tol:g})",
            result=out,
            report=report,
        )
    return out


def shifted_region(target_shape: tuple[int, int], patch_mask: np.ndarray, offset: tuple[int, int]) -> np.ndarray:
    """Place a crop-coordinate mask at ``offset = (dx, dy)`` inside the target.

    Member pixels must land strictly inside the target (one pixel margin).
    """
    dx, dy = int(offset[0]), int(offset[1])
    h, w = target_shape
    rows, cols = np.nonzero(np.asarray(patch_mask, dtype=bool))
    if rows.size == 0:
        raise EmptyRegion("patch mask has no member pixels")
    rows = rows + dy
    cols = cols + dx
    if rows.min() < 1 or rows.max() > h - 2 or cols.min() < 1 or cols.max() > w - 2:
        raise PlacementOutOfBounds(
            f"offset ({dx}, {dy}) puts the patch region outside the interior of the "
            f"{w}x{h} target"
        )
    omega = np.zeros((h, w), dtype=bool)
    omega[rows, cols] = True
    return omega


def seamless_clone(target: np.ndarray, patch, offset: tuple[int, int], tol: float = DEFAULT_TOL, max_iter: int | None = None):
    """Paste ``patch`` at ``offset`` by matching its gradients inside the region.

    ``patch`` needs ``values`` and ``mask`` arrays in crop coordinates; the
    crop's top-left lands at target pixel ``(x=dx, y=dy)``. Returns
    ``(image, report)``; a non-converged report means the image holds the best
    iterate.
    """
    target = np.asarray(target, dtype=np.float64)
    omega = shifted_region(target.shape, patch.mask, offset)
    guidance = compute_divergence(patch.values, patch.mask)
    system = assemble_system(target, omega, guidance)
    x, report = solve(system, tol, max_iter)
    return _scatter(target, system.region, x), report
