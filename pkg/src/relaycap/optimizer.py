"""Deterministic box-constrained maximizer: coarse grid, then pattern search."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .core import RelayCapError


class OptimizerError(RelayCapError, RuntimeError):
    pass


@dataclass(frozen=True)
class OptimizerConfig:
    grid_points_per_dim: int = 201
    refine_iters: int = 200
    refine_shrink: float = 0.5
    tol: float = 1e-9
    seed: int = 0
    # caps the coarse grid in 3-D/4-D so a default run stays tractable
    max_grid_points: int = 1_000_000

    def __post_init__(self):
        if int(self.grid_points_per_dim) < 2:
            raise ValueError("grid_points_per_dim must be >= 2")
        if int(self.refine_iters) < 0:
            raise ValueError("refine_iters must be >= 0")
        if not 0 < self.refine_shrink < 1:
            raise ValueError("refine_shrink must lie in (0, 1)")
        if not self.tol > 0:
            raise ValueError("tol must be > 0")
        if int(self.seed) < 0:
            raise ValueError("seed must be non-negative")
        if int(self.max_grid_points) < 2:
            raise ValueError("max_grid_points must be >= 2")

    def points_per_dim(self, d: int) -> int:
        cap = int(math.floor(self.max_grid_points ** (1.0 / d) + 1e-9))
        return max(2, min(int(self.grid_points_per_dim), cap))


@dataclass(frozen=True)
class MaximizeResult:
    x: np.ndarray
    value: float
    grid_value: float
    n_evals: int
    n_iters: int


def _evaluate(f, pts: np.ndarray) -> np.ndarray:
    vals = np.asarray(f(pts), dtype=float).reshape(len(pts))
    bad = ~np.isfinite(vals)
    if bad.any():
        where = pts[np.argmax(bad)]
        raise OptimizerError(f"objective is not finite at {where.tolist()}")
    return vals


def maximize_box(f, bounds, cfg: OptimizerConfig | None = None) -> MaximizeResult:
    """Maximize a vectorized objective over a box.

    ``f`` receives an ``(n, d)`` array of points and returns ``n`` values.
    The coarse grid is scanned in lexicographic order, so among tied grid
    points the lexicographically smallest wins. The incumbent is then
    refined by a shrinking local stencil; it never decreases.
    """
    cfg = cfg or OptimizerConfig()
    b = np.asarray(bounds, dtype=float).reshape(-1, 2)
    d = len(b)
    if not 1 <= d <= 4:
        raise OptimizerError(f"maximize_box supports 1 to 4 dimensions, got {d}")
    if not np.all(np.isfinite(b)) or np.any(b[:, 1] < b[:, 0]):
        raise OptimizerError(f"invalid bounds {b.tolist()}")
    lo, hi = b[:, 0], b[:, 1]
    width = hi - lo

    n = cfg.points_per_dim(d)
    axes = [np.linspace(lo[i], hi[i], n) for i in range(d)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    vals = _evaluate(f, grid)
    k = int(np.argmax(vals))
    x, best = grid[k].copy(), float(vals[k])
    grid_value = best
    n_evals = len(grid)

    # local stencil: 5 points per axis in 1-D/2-D, 3 per axis above that
    ticks = (-1.0, -0.5, 0.0, 0.5, 1.0) if d <= 2 else (-1.0, 0.0, 1.0)
    offsets = np.array([o for o in itertools.product(ticks, repeat=d) if any(o)])
    step = width / (n - 1)
    min_step = np.maximum(width, 1.0) * 1e-13
    it = 0
    for it in range(1, cfg.refine_iters + 1):
        if np.all(step <= min_step):
            break
        cand = np.clip(x + offsets * step, lo, hi)
        cv = _evaluate(f, cand)
        n_evals += len(cand)
        j = int(np.argmax(cv))
        if cv[j] > best:
            x, best = cand[j].copy(), float(cv[j])
        else:
            step = step * cfg.refine_shrink
    return MaximizeResult(x=x, value=best, grid_value=grid_value, n_evals=n_evals, n_iters=it)
