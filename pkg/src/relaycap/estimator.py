"""scikit-learn style wrapper: channel rows in, bound values out.

Each input row is ``[p1, p2, q, n2, n3]`` (linear power, or dB with
``input_db=True``); each output column is one bound in bits.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .core import ChannelParams, InvalidInputError
from .gaussian_bounds import ASYMPTOTIC_CASES
from .optimizer import OptimizerConfig
from .sweep import BOUND_NAMES, FIELDS, evaluate_bounds


def check_channel_array(X, input_db: bool = False) -> np.ndarray:
    """Validate an (n, 5) array of channel rows and return it in linear units.

    Raises:
        InvalidInputError: on a wrong shape, non-finite entries, or values
            outside the channel's domain (p1, n2, n3 > 0; p2, q >= 0).
    """
    try:
        X = check_array(X, dtype=float, ensure_2d=True, ensure_all_finite=True)
    except ValueError as e:
        raise InvalidInputError(str(e)) from None
    if X.shape[1] != len(FIELDS):
        raise InvalidInputError(f"expected {len(FIELDS)} columns {FIELDS}, got {X.shape[1]}")
    if input_db:
        X = 10.0 ** (X / 10.0)
    for j, name in enumerate(FIELDS):
        col = X[:, j]
        bad = col < 0 if name in ("p2", "q") else col <= 0
        if bad.any():
            raise InvalidInputError(f"column {name} has invalid value {col[bad][0]!r}")
    return X


def _output_names(bounds) -> list:
    out = []
    for b in bounds:
        if b == "asymptotes":
            out += [f"asym_{c.replace('-', '_')}" for c in ASYMPTOTIC_CASES]
        else:
            out.append(b)
    return out


class CapacityBounds(TransformerMixin, BaseEstimator):
    """Maps channel rows to achievable-rate and upper-bound values.

    Args:
        bounds: names from ``upper``, ``cutset``, ``thm4``, ``thm5``,
            ``df_noise`` and ``asymptotes`` (which yields three columns).
        grid_points_per_dim: coarse grid size of the optimizer.
        refine_iters: pattern-search iterations after the grid.
        tol: optimizer tolerance.
        input_db: read input columns as dB instead of linear power.
    """

    def __init__(self, bounds=("upper", "cutset", "thm4", "thm5", "df_noise"),
                 grid_points_per_dim=201, refine_iters=200, tol=1e-9, input_db=False):
        self.bounds = bounds
        self.grid_points_per_dim = grid_points_per_dim
        self.refine_iters = refine_iters
        self.tol = tol
        self.input_db = input_db

    def _config(self) -> OptimizerConfig:
        return OptimizerConfig(grid_points_per_dim=self.grid_points_per_dim,
                               refine_iters=self.refine_iters, tol=self.tol)

    def fit(self, X, y=None):
        """Check inputs and settings; no state is learned from the data."""
        bounds = tuple(self.bounds)
        if not bounds:
            raise InvalidInputError("no bounds requested")
        unknown = [b for b in bounds if b not in BOUND_NAMES]
        if unknown:
            raise InvalidInputError(f"unknown bounds {unknown}")
        self._config()
        X = check_channel_array(X, self.input_db)
        self.n_features_in_ = X.shape[1]
        self.bounds_ = bounds
        self.output_names_ = _output_names(bounds)
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "bounds_")
        X = check_channel_array(X, self.input_db)
        cfg = self._config()
        out = np.empty((X.shape[0], len(self.output_names_)))
        for i, row in enumerate(X):
            ch = ChannelParams(*row)
            out[i] = [r.value for r in evaluate_bounds(ch, self.bounds_, cfg)]
        return out

    def get_feature_names_out(self, input_features=None) -> np.ndarray:
        check_is_fitted(self, "bounds_")
        return np.asarray(self.output_names_, dtype=object)
