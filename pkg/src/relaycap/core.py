"""Channel parameters, finite-alphabet and Gaussian information measures.

All rates are in bits per channel use. ``bits_to_nats`` converts when a
natural-log reference is needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

ZERO_PROB = 1e-15
CLAMP_TOL = 1e-12
MAX_ATOMS = 10_000_000
PMF_SUM_TOL = 1e-12


class RelayCapError(Exception):
    """Base class for errors raised by this package."""


class InvalidInputError(RelayCapError, ValueError):
    pass


class ConsistencyError(RelayCapError, ArithmeticError):
    """Raised when a quantity that must be non-negative is clearly negative."""


class SingularCovarianceError(RelayCapError, np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class ChannelParams:
    """Gaussian relay channel constants, all in linear power units.

    Y2 = X1 + S + Z2,  Y3 = X1 + X2 + S + Z3, with E[X1^2] <= p1,
    E[X2^2] <= p2, Var S = q, Var Z2 = n2, Var Z3 = n3.
    """

    p1: float
    p2: float
    q: float
    n2: float
    n3: float

    def __post_init__(self):
        for name in ("p1", "p2", "q", "n2", "n3"):
            v = getattr(self, name)
            if not isinstance(v, (int, float, np.floating, np.integer)) or not math.isfinite(v):
                raise InvalidInputError(f"{name} must be a finite real, got {v!r}")
            object.__setattr__(self, name, float(v))
        for name in ("p1", "n2", "n3"):
            if getattr(self, name) <= 0:
                raise InvalidInputError(f"{name} must be > 0, got {getattr(self, name)}")
        for name in ("p2", "q"):
            if getattr(self, name) < 0:
                raise InvalidInputError(f"{name} must be >= 0, got {getattr(self, name)}")

    def replace(self, **changes) -> "ChannelParams":
        d = self.as_dict()
        d.update(changes)
        return ChannelParams(**d)

    def as_dict(self) -> dict:
        return {"p1": self.p1, "p2": self.p2, "q": self.q, "n2": self.n2, "n3": self.n3}

    @classmethod
    def from_mapping(cls, m: Mapping) -> "ChannelParams":
        """Build from a mapping; ``<field>_db`` keys are converted to linear."""
        vals = {}
        for name in ("p1", "p2", "q", "n2", "n3"):
            lin, db = m.get(name), m.get(name + "_db")
            if lin is not None and db is not None:
                raise InvalidInputError(f"both {name} and {name}_db given")
            if db is not None:
                vals[name] = db_to_linear(float(db))
            elif lin is not None:
                vals[name] = float(lin)
            else:
                raise InvalidInputError(f"missing channel field {name} (or {name}_db)")
        return cls(**vals)


def db_to_linear(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def linear_to_db(x: float) -> float:
    return 10.0 * math.log10(x)


def bits_to_nats(r: float) -> float:
    return r * math.log(2.0)


def nats_to_bits(r: float) -> float:
    return r / math.log(2.0)


def half_log2_1p(x: float) -> float:
    """0.5 * log2(1 + x) for finite x >= 0."""
    if not math.isfinite(x) or x < 0:
        raise InvalidInputError(f"half_log2_1p needs a finite x >= 0, got {x!r}")
    if x == 0:
        return 0.0
    return 0.5 * math.log1p(x) / math.log(2.0)


def check_rate(value: float, what: str = "rate") -> float:
    """Clamp round-off negatives to zero; reject anything else invalid."""
    value = float(value)
    if not math.isfinite(value):
        raise ConsistencyError(f"{what} is not finite: {value}")
    if value < 0:
        if value >= -CLAMP_TOL:
            return 0.0
        raise ConsistencyError(f"{what} is negative beyond round-off: {value:.3e}")
    return value


# ---------------------------------------------------------------------------
# finite alphabets


@dataclass(frozen=True)
class JointPmf:
    """Dense pmf over named finite alphabets, axes in declaration order."""

    alphabet_sizes: dict
    probs: np.ndarray
    factorization: tuple = field(default=(), compare=False)

    def __post_init__(self):
        sizes = dict(self.alphabet_sizes)
        if not sizes:
            raise InvalidInputError("a JointPmf needs at least one variable")
        shape = tuple(int(k) for k in sizes.values())
        if any(k < 1 for k in shape):
            raise InvalidInputError(f"alphabet sizes must be >= 1, got {sizes}")
        n_atoms = math.prod(shape)
        if n_atoms > MAX_ATOMS:
            raise InvalidInputError(
                f"product alphabet has {n_atoms} atoms, above the cap of {MAX_ATOMS}")
        probs = np.asarray(self.probs, dtype=float)
        if probs.size != n_atoms:
            raise InvalidInputError(f"probs has {probs.size} entries, expected {n_atoms}")
        probs = probs.reshape(shape)
        if not np.all(np.isfinite(probs)) or probs.min() < 0:
            raise InvalidInputError("probabilities must be finite and non-negative")
        total = probs.sum()
        if abs(total - 1.0) > PMF_SUM_TOL:
            raise InvalidInputError(f"probabilities sum to {total!r}, not 1")
        probs.setflags(write=False)
        object.__setattr__(self, "alphabet_sizes", sizes)
        object.__setattr__(self, "probs", probs)

    @property
    def names(self) -> tuple:
        return tuple(self.alphabet_sizes)

    def _axes(self, names: Iterable[str]) -> tuple:
        idx = []
        for n in names:
            if n not in self.alphabet_sizes:
                raise InvalidInputError(f"unknown variable {n!r}; have {self.names}")
            idx.append(self.names.index(n))
        return tuple(idx)

    def marginal(self, names: Iterable[str]) -> np.ndarray:
        keep = set(self._axes(names))
        drop = tuple(i for i in range(self.probs.ndim) if i not in keep)
        return self.probs.sum(axis=drop)

    def entropy(self, names: Iterable[str]) -> float:
        names = _as_names(names)
        if not names:
            return 0.0
        return entropy(self.marginal(names))


def _as_names(v) -> tuple:
    if isinstance(v, str):
        return (v,)
    return tuple(v)


def entropy(p: np.ndarray) -> float:
    """Shannon entropy in bits, with 0 log 0 = 0."""
    p = np.asarray(p, dtype=float).ravel()
    p = p[p > ZERO_PROB]
    return float(-(p * np.log2(p)).sum())


def _check_disjoint(pmf: JointPmf, *groups) -> None:
    seen = set()
    for g in groups:
        pmf._axes(g)
        overlap = seen.intersection(g)
        if overlap:
            raise InvalidInputError(f"variable sets overlap on {sorted(overlap)}")
        seen.update(g)


def mutual_information(pmf: JointPmf, x_vars, y_vars) -> float:
    """I(X;Y) in bits."""
    x, y = _as_names(x_vars), _as_names(y_vars)
    if not x or not y:
        raise InvalidInputError("x_vars and y_vars must be non-empty")
    _check_disjoint(pmf, x, y)
    value = pmf.entropy(x) + pmf.entropy(y) - pmf.entropy(x + y)
    return check_rate(value, f"I({','.join(x)};{','.join(y)})")


def conditional_mutual_information(pmf: JointPmf, x_vars, y_vars, z_vars=()) -> float:
    """I(X;Y|Z) in bits; an empty Z gives I(X;Y)."""
    x, y, z = _as_names(x_vars), _as_names(y_vars), _as_names(z_vars)
    if not x or not y:
        raise InvalidInputError("x_vars and y_vars must be non-empty")
    _check_disjoint(pmf, x, y, z)
    value = (pmf.entropy(x + z) + pmf.entropy(y + z)
             - pmf.entropy(x + y + z) - pmf.entropy(z))
    return check_rate(value, f"I({','.join(x)};{','.join(y)}|{','.join(z)})")


# ---------------------------------------------------------------------------
# jointly Gaussian variables


@dataclass(frozen=True)
class GaussianJoint:
    """Zero-mean jointly Gaussian variables given by their covariance."""

    names: tuple
    cov: np.ndarray

    def __post_init__(self):
        names = tuple(self.names)
        cov = np.array(self.cov, dtype=float)
        if len(set(names)) != len(names):
            raise InvalidInputError("duplicate variable names")
        if cov.shape != (len(names), len(names)):
            raise InvalidInputError(f"cov shape {cov.shape} does not match {len(names)} names")
        if not np.all(np.isfinite(cov)):
            raise InvalidInputError("cov has non-finite entries")
        if np.max(np.abs(cov - cov.T), initial=0.0) > 1e-12:
            raise InvalidInputError("cov is not symmetric")
        cov = 0.5 * (cov + cov.T)
        if cov.size and np.linalg.eigvalsh(cov).min() < -1e-10:
            raise InvalidInputError("cov is not positive semidefinite")
        cov.setflags(write=False)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "cov", cov)

    @classmethod
    def from_linear(cls, sources: Mapping[str, float],
                    combos: Mapping[str, Mapping[str, float]]) -> "GaussianJoint":
        """Covariance of linear combinations of independent zero-mean sources.

        Args:
            sources: independent source name -> variance.
            combos: derived variable name -> {source name: coefficient}.

        Returns:
            A GaussianJoint over the sources followed by the derived variables.
        """
        src = list(sources)
        var = np.array([sources[s] for s in src], dtype=float)
        if np.any(var < 0):
            raise InvalidInputError("source variances must be non-negative")
        rows = [np.eye(len(src))[i] for i in range(len(src))]
        names = list(src)
        for name, coeffs in combos.items():
            row = np.zeros(len(src))
            for s, c in coeffs.items():
                if s not in sources:
                    raise InvalidInputError(f"{name} refers to unknown source {s!r}")
                row[src.index(s)] += c
            rows.append(row)
            names.append(name)
        a = np.array(rows)
        return cls(tuple(names), (a * var) @ a.T)

    def index(self, names: Sequence[str]) -> list:
        out = []
        for n in names:
            if n not in self.names:
                raise InvalidInputError(f"unknown variable {n!r}")
            out.append(self.names.index(n))
        return out

    def subset(self, names: Sequence[str]) -> "GaussianJoint":
        return GaussianJoint(tuple(names), self.block(names))

    def variance(self, name: str) -> float:
        i = self.index([name])[0]
        return float(self.cov[i, i])

    def covariance(self, a: str, b: str) -> float:
        i, j = self.index([a, b])
        return float(self.cov[i, j])

    def block(self, names: Sequence[str]) -> np.ndarray:
        idx = self.index(names)
        return self.cov[np.ix_(idx, idx)]

    def logdet(self, names: Sequence[str]) -> float:
        """log2 det of the covariance block; 0 for the empty set."""
        names = _as_names(names)
        if not names:
            return 0.0
        b = self.block(names)
        sign, ld = np.linalg.slogdet(b)
        # relative check catches rank deficiency hidden by round-off
        diag = np.diag(b)
        rel = ld - np.log(diag).sum() if np.all(diag > 0) else -np.inf
        if sign <= 0 or ld < math.log(1e-300) or rel < math.log(1e-14):
            raise SingularCovarianceError(f"covariance of {list(names)} is singular")
        return ld / math.log(2.0)


def gaussian_mi(g: GaussianJoint, x_vars, y_vars, z_vars=()) -> float:
    """I(X;Y|Z) in bits for jointly Gaussian variables, via log-determinants."""
    x, y, z = _as_names(x_vars), _as_names(y_vars), _as_names(z_vars)
    if not x or not y:
        raise InvalidInputError("x_vars and y_vars must be non-empty")
    if set(x) & set(y) or set(x) & set(z) or set(y) & set(z):
        raise InvalidInputError("variable sets must be disjoint")
    value = 0.5 * (g.logdet(x + z) + g.logdet(y + z) - g.logdet(x + y + z) - g.logdet(z))
    return check_rate(value, "gaussian MI")
