"""Single-point bound evaluation and SNR sweeps emitted as CSV."""

from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import ChannelParams, InvalidInputError, RelayCapError, db_to_linear
from .gaussian_bounds import (
    ASYMPTOTIC_CASES,
    BoundResult,
    asymptotic_reference,
    cutset_bound,
    df_state_as_noise_bound,
    maximize_thm4,
    maximize_thm5,
    maximize_upper_bound,
)
from .optimizer import OptimizerConfig

BOUNDS = {
    "upper": maximize_upper_bound,
    "cutset": cutset_bound,
    "thm4": maximize_thm4,
    "thm5": maximize_thm5,
    "df_noise": df_state_as_noise_bound,
}
BOUND_NAMES = tuple(BOUNDS) + ("asymptotes",)
FIELDS = ("p1", "p2", "q", "n2", "n3")
ORDER_TOL = 1e-6
# (lower, higher) pairs that must hold at every channel
ORDERINGS = (("thm4", "upper"), ("thm5", "upper"), ("upper", "cutset"),
             ("df_noise", "cutset"), ("thm4", "cutset"), ("thm5", "cutset"))

CSV_HEADER = ("axis_value", "bound_name", "value_bits", "term1", "term2", "argmax",
              "flag", "error")


class BoundEvaluationError(RelayCapError):
    def __init__(self, bound: str, cause: Exception):
        super().__init__(f"{bound}: {cause}")
        self.bound = bound
        self.cause = cause


def _check_bounds(bounds) -> tuple:
    bounds = tuple(bounds)
    if not bounds:
        raise InvalidInputError("no bounds requested")
    unknown = [b for b in bounds if b not in BOUND_NAMES]
    if unknown:
        raise InvalidInputError(f"unknown bounds {unknown}; choose from {BOUND_NAMES}")
    return bounds


def evaluate_bounds(ch: ChannelParams, bounds, cfg: OptimizerConfig) -> list:
    """BoundResults for the requested bounds; asymptotes expand to three rows."""
    out = []
    for name in _check_bounds(bounds):
        try:
            if name == "asymptotes":
                for case in ASYMPTOTIC_CASES:
                    v = asymptotic_reference(case, ch)
                    out.append(BoundResult(f"asym_{case.replace('-', '_')}", v))
            else:
                out.append(BOUNDS[name](ch, cfg))
        except RelayCapError as e:
            raise BoundEvaluationError(name, e) from e
    return out


def ordering_violations(values: dict, tol: float = ORDER_TOL) -> list:
    return [f"{lo}<={hi}" for lo, hi in ORDERINGS
            if lo in values and hi in values and values[lo] > values[hi] + tol]


def run_point(ch: ChannelParams, bounds, cfg: OptimizerConfig | None = None) -> dict:
    """JSON-ready record with one entry per requested bound."""
    cfg = cfg or OptimizerConfig()
    records = []
    for name in _check_bounds(bounds):
        t0 = time.perf_counter()
        results = evaluate_bounds(ch, [name], cfg)
        dt = time.perf_counter() - t0
        for r in results:
            rec = r.to_dict()
            rec["wall_time_s"] = dt
            records.append(rec)
    values = {r["name"]: r["value"] for r in records}
    return {"channel": ch.as_dict(), "bounds": records,
            "ordering_violations": ordering_violations(values)}


@dataclass(frozen=True)
class SweepSpec:
    """One varying axis over a range, everything else fixed.

    ``axis`` is ``snr_db`` (P1/N2 in dB, varied through N2), a channel field
    such as ``q``, or a field with a ``_db`` suffix.
    """

    axis: str
    lo: float
    hi: float
    points: int
    fixed: dict = field(default_factory=dict)
    bounds: tuple = ("upper", "cutset", "thm4", "thm5", "df_noise")
    scale: str = "linear"

    def __post_init__(self):
        if self.axis != "snr_db" and self.axis.removesuffix("_db") not in FIELDS:
            raise InvalidInputError(f"unknown sweep axis {self.axis!r}")
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)) or not self.lo < self.hi:
            raise InvalidInputError("sweep range needs finite lo < hi")
        if int(self.points) < 2:
            raise InvalidInputError("a sweep needs at least 2 points")
        if self.scale not in ("linear", "log"):
            raise InvalidInputError("scale must be 'linear' or 'log'")
        if self.scale == "log" and self.lo <= 0:
            raise InvalidInputError("a log-scaled axis needs lo > 0")
        _check_bounds(self.bounds)
        object.__setattr__(self, "bounds", tuple(self.bounds))
        object.__setattr__(self, "fixed", dict(self.fixed))

    def axis_values(self) -> np.ndarray:
        if self.scale == "log":
            return np.geomspace(self.lo, self.hi, int(self.points))
        return np.linspace(self.lo, self.hi, int(self.points))

    def channel_at(self, x: float) -> ChannelParams:
        m = {k: v for k, v in self.fixed.items()}
        if self.axis == "snr_db":
            ch = {k: _pick(m, k) for k in ("p1", "p2", "q", "n3")}
            return ChannelParams(n2=ch["p1"] / db_to_linear(x), **ch)
        name = self.axis.removesuffix("_db")
        val = db_to_linear(x) if self.axis.endswith("_db") else x
        ch = {k: _pick(m, k) for k in FIELDS if k != name}
        return ChannelParams(**{name: val}, **ch)


def _pick(m: dict, name: str) -> float:
    if name in m:
        return float(m[name])
    if name + "_db" in m:
        return db_to_linear(float(m[name + "_db"]))
    raise InvalidInputError(f"sweep is missing fixed channel field {name}")


def _point_rows(args):
    spec, cfg, x = args
    try:
        ch = spec.channel_at(x)
    except RelayCapError as e:
        return [_row(x, b, error=str(e)) for b in spec.bounds]
    rows = []
    for name in spec.bounds:
        try:
            for r in evaluate_bounds(ch, [name], cfg):
                rows.append(_row(x, r.name, result=r))
        except BoundEvaluationError as e:
            rows.append(_row(x, name, error=str(e)))
    values = {r["bound_name"]: r["value_bits"] for r in rows if not math.isnan(r["value_bits"])}
    for v in ordering_violations(values):
        for r in rows:
            if r["bound_name"] in v.split("<="):
                r["flag"] = ";".join(filter(None, [r["flag"], "violates:" + v]))
    return rows


def _row(x, name, result: BoundResult | None = None, error: str = "") -> dict:
    terms = list(result.terms.values()) if result else []
    return {
        "axis_value": float(x),
        "bound_name": name,
        "value_bits": float(result.value) if result else math.nan,
        "term1": terms[0] if len(terms) > 0 else None,
        "term2": terms[1] if len(terms) > 1 else None,
        "argmax": ";".join(f"{k}={float(v)!r}" for k, v in result.argmax.items()) if result else "",
        "flag": "",
        "error": error,
    }


def sweep_rows(spec: SweepSpec, cfg: OptimizerConfig | None = None, workers: int = 1) -> list:
    """Rows for every (axis value, bound), sorted; failed points become NaN rows."""
    cfg = cfg or OptimizerConfig()
    jobs = [(spec, cfg, float(x)) for x in spec.axis_values()]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            chunks = list(ex.map(_point_rows, jobs))
    else:
        chunks = [_point_rows(j) for j in jobs]
    rows = [r for c in chunks for r in c]
    rows.sort(key=lambda r: (r["axis_value"], r["bound_name"]))
    return rows


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(float(v))
    return str(v)


def rows_to_csv(rows: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow([_fmt(r[k]) for k in CSV_HEADER])
    return buf.getvalue()


def run_sweep(spec: SweepSpec, cfg: OptimizerConfig | None = None, workers: int = 1) -> str:
    return rows_to_csv(sweep_rows(spec, cfg, workers))


def read_sweep_csv(text: str) -> list:
    """Parse CSV produced by :func:`run_sweep` back into typed rows."""
    rows = []
    for r in csv.DictReader(io.StringIO(text)):
        r = dict(r)
        for k in ("axis_value", "value_bits", "term1", "term2"):
            r[k] = float(r[k]) if r[k] != "" else None
        rows.append(r)
    return rows
