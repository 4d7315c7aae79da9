"""Achievable rates of the discrete memoryless schemes for given distributions.

Two factorized input laws are supported: the state-description scheme
(evaluation only) and the relay-input-description scheme (evaluation plus
a heuristic local search). Factors are dense conditional tables stored
row-major: parent axes first, child axes last, each row summing to one.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .core import MAX_ATOMS, InvalidInputError, JointPmf

ROW_TOL = 1e-12
STRICT_MARGIN = 1e-10

# factor key -> (children, parents), in the order the joint law is written
THM1_FACTORS = {
    "Q_S": (("S",), ()),
    "P_SR,SD|S": (("SR", "SD"), ("S",)),
    "P_V|SR": (("V",), ("SR",)),
    "P_U|V,S,SR,SD": (("U",), ("V", "S", "SR", "SD")),
    "P_UR,UD|V,U,S,SR,SD": (("UR", "UD"), ("V", "U", "S", "SR", "SD")),
    "P_X1|UR,UD,U,V,S,SR,SD": (("X1",), ("UR", "UD", "U", "V", "S", "SR", "SD")),
    "P_X2|V,SR": (("X2",), ("V", "SR")),
    "W_Y2,Y3|X1,X2,S": (("Y2", "Y3"), ("X1", "X2", "S")),
}
THM1_VARS = ("S", "SR", "SD", "UR", "UD", "U", "V", "X1", "X2", "Y2", "Y3")

THM2_FACTORS = {
    "Q_S": (("S",), ()),
    "P_U|S": (("U",), ("S",)),
    "P_UR|U,S": (("UR",), ("U", "S")),
    "P_X1|UR,U,S": (("X1",), ("UR", "U", "S")),
    "P_X|U,S": (("X",), ("U", "S")),
    "P_Xhat|X": (("Xhat",), ("X",)),
    "W_Y2,Y3|X1,X2,S": (("Y2", "Y3"), ("X1", "X2", "S")),
}
THM2_VARS = ("S", "U", "UR", "X1", "X2", "X", "Xhat", "Y2", "Y3")


def _check_factors(alphabets: dict, factors: dict, layout: dict, theorem: int) -> dict:
    missing = set(layout) - set(factors)
    extra = set(factors) - set(layout)
    if missing or extra:
        raise InvalidInputError(
            f"theorem {theorem} factors: missing {sorted(missing)}, unexpected {sorted(extra)}")
    out = {}
    for key, (children, parents) in layout.items():
        shape = tuple(alphabets[v] for v in parents + children)
        table = np.asarray(factors[key], dtype=float)
        if table.size != math.prod(shape):
            raise InvalidInputError(
                f"factor {key}: {table.size} entries, expected shape {shape}")
        table = table.reshape(shape)
        if not np.all(np.isfinite(table)) or table.min() < 0:
            raise InvalidInputError(f"factor {key}: entries must be finite and >= 0")
        rows = table.reshape(math.prod(shape[:len(parents)]), -1).sum(axis=1)
        bad = np.abs(rows - 1.0) > ROW_TOL
        if bad.any():
            raise InvalidInputError(
                f"factor {key}: row {int(np.argmax(bad))} sums to {rows[bad][0]!r}")
        out[key] = table
    return out


def _check_alphabets(alphabets: Mapping, names: tuple) -> dict:
    missing = [v for v in names if v not in alphabets]
    if missing:
        raise InvalidInputError(f"alphabet sizes missing for {missing}")
    sizes = {v: int(alphabets[v]) for v in names}
    if any(k < 1 for k in sizes.values()):
        raise InvalidInputError(f"alphabet sizes must be >= 1: {sizes}")
    n = math.prod(sizes.values())
    if n > MAX_ATOMS:
        raise InvalidInputError(f"product alphabet has {n} atoms, above the cap of {MAX_ATOMS}")
    return sizes


@dataclass
class Thm1Input:
    alphabets: dict
    factors: dict

    def __post_init__(self):
        self.alphabets = _check_alphabets(self.alphabets, THM1_VARS)
        self.factors = _check_factors(self.alphabets, self.factors, THM1_FACTORS, 1)

    theorem = 1
    layout = THM1_FACTORS
    variables = THM1_VARS


@dataclass
class Thm2Input:
    """Factors of the relay-input-description law; X2 is tied to Xhat."""

    alphabets: dict
    factors: dict

    def __post_init__(self):
        al = dict(self.alphabets)
        if "X2" in al and "Xhat" in al and int(al["X2"]) != int(al["Xhat"]):
            raise InvalidInputError("X2 and Xhat must share an alphabet (X2 = Xhat)")
        al.setdefault("X2", al.get("Xhat"))
        al.setdefault("Xhat", al.get("X2"))
        self.alphabets = _check_alphabets(al, THM2_VARS)
        self.factors = _check_factors(self.alphabets, self.factors, THM2_FACTORS, 2)

    theorem = 2
    layout = THM2_FACTORS
    variables = THM2_VARS


def compose_joint(inp: Thm1Input | Thm2Input) -> JointPmf:
    """Multiply the factors into a dense joint pmf over all declared variables."""
    names = inp.variables
    letters = {v: chr(ord("a") + i) for i, v in enumerate(names)}
    operands, subs = [], []
    for key, (children, parents) in inp.layout.items():
        operands.append(inp.factors[key])
        subs.append("".join(letters[v] for v in parents + children))
    if isinstance(inp, Thm2Input):
        k = inp.alphabets["X2"]
        operands.append(np.eye(k))
        subs.append(letters["Xhat"] + letters["X2"])
    out = "".join(letters[v] for v in names)
    probs = np.einsum(",".join(subs) + "->" + out, *operands, optimize=True)
    # renormalize away accumulated round-off so the sum check stays tight
    probs = probs / probs.sum()
    return JointPmf({v: inp.alphabets[v] for v in names}, probs,
                    factorization=tuple(inp.layout))


class _Info:
    """Entropy cache over one joint pmf."""

    def __init__(self, pmf: JointPmf):
        self.pmf = pmf
        self._h = {}

    def h(self, names) -> float:
        key = frozenset(names)
        if key not in self._h:
            self._h[key] = self.pmf.entropy(tuple(v for v in self.pmf.names if v in key))
        return self._h[key]

    def i(self, x, y, z=()) -> float:
        """I(X;Y|Z); tiny negative round-off is clamped to 0."""
        x, y, z = set(x), set(y), set(z)
        v = self.h(x | z) + self.h(y | z) - self.h(x | y | z) - self.h(z)
        return max(v, 0.0) if v > -1e-12 else v


def neg_part(x: float) -> float:
    return min(x, 0.0)


@dataclass
class DmRateReport:
    theorem: int
    rate: float | None
    objective: float
    objective_terms: dict
    constraint_slacks: dict
    feasibility_condition: float | None = None
    violated: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)
    alphabet_sizes: dict = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return self.rate is not None

    def to_dict(self) -> dict:
        return {
            "theorem": self.theorem,
            "feasible": self.feasible,
            "rate": self.rate,
            "objective": self.objective,
            "objective_terms": self.objective_terms,
            "constraint_slacks": self.constraint_slacks,
            "feasibility_condition": self.feasibility_condition,
            "violated": self.violated,
            "diagnostics": self.diagnostics,
            "alphabet_sizes": self.alphabet_sizes,
        }


def eval_thm1(inp: Thm1Input) -> DmRateReport:
    """Evaluate the state-description scheme's rate and constraints.

    Constraint slacks are right-hand side minus left-hand side; (a)-(c)
    must be >= 0 and the decodability condition on V must be > 0.
    """
    info = _Info(compose_joint(inp))
    i = info.i
    ctx = ("SR", "SD")
    relay = i(["U"], ["Y2"], ["V", "SR"]) - i(["U"], ["S", "SD"], ["V", "SR"])
    dest = i(["U", "V"], ["Y3"], ["SD"]) - i(["U", "V"], ["S", "SR"], ["SD"])

    a_relay = i(["UR"], ["Y2", "SR"], ["U", "V"]) - i(["UR"], ["S", *ctx], ["U", "V"])
    a_dest = i(["UD"], ["Y3", "SD"], ["U", "V"]) - i(["UD"], ["S", *ctx], ["U", "V"])
    donor = i(["U"], ["Y3", "SD"], ["V"]) - i(["U"], ["S", *ctx], ["V"])
    coupling = i(["UR"], ["UD"], ["U", "V", "S", *ctx])
    slacks = {
        "a": a_relay - i(["S"], ["SR"]),
        "b": a_dest + neg_part(donor) - i(["S"], ["SD"]),
        "c": (a_relay + a_dest + neg_part(donor) - coupling
              - i(["S"], ["SR", "SD"]) - i(["SR"], ["SD"])),
    }
    cond = i(["V"], ["Y3", "SD"]) - i(["V"], ["SR"])

    violated = [k for k, v in slacks.items() if v < -STRICT_MARGIN]
    if not cond > STRICT_MARGIN:
        violated.append("V-decodability")
    diags = []
    if donor < 0:
        diags.append(f"negative-part term active in (b),(c): {donor:.6g}")
    objective = min(relay, dest)
    return DmRateReport(
        theorem=1,
        rate=None if violated else max(objective, 0.0),
        objective=objective,
        objective_terms={"relay": relay, "dest": dest},
        constraint_slacks=slacks,
        feasibility_condition=cond,
        violated=violated,
        diagnostics=diags,
        alphabet_sizes=dict(inp.alphabets),
    )


def _thm2_terms(info: _Info):
    i = info.i
    leak = i(["U", "UR"], ["S"])
    desc = i(["X"], ["Xhat"])
    dest = i(["U", "UR"], ["Y3"]) - leak
    relay = i(["U", "UR"], ["Y2", "Xhat"]) - leak - desc
    slack = (i(["UR"], ["Y2", "Xhat"], ["U"]) - i(["UR"], ["S"], ["U"])
             + neg_part(i(["U"], ["Y2", "Xhat"]) - i(["U"], ["S"])) - desc)
    return dest, relay, slack


def eval_thm2(inp: Thm2Input) -> DmRateReport:
    """Evaluate the relay-input-description scheme; feasible iff the slack is > 0."""
    dest, relay, slack = _thm2_terms(_Info(compose_joint(inp)))
    feasible = slack > STRICT_MARGIN
    objective = min(dest, relay)
    return DmRateReport(
        theorem=2,
        rate=max(objective, 0.0) if feasible else None,
        objective=objective,
        objective_terms={"dest": dest, "relay": relay},
        constraint_slacks={"description": slack},
        violated=[] if feasible else ["description"],
        alphabet_sizes=dict(inp.alphabets),
    )


# ---------------------------------------------------------------------------
# heuristic search


SEARCHED = ("P_U|S", "P_UR|U,S", "P_X1|UR,U,S", "P_X|U,S", "P_Xhat|X")


@dataclass
class SearchResult:
    report: DmRateReport
    factors: Thm2Input
    restart_best: list
    best_restart: int
    seed: int

    def to_dict(self) -> dict:
        return {
            "label": "heuristic lower estimate of the maximum",
            "seed": self.seed,
            "best_restart": self.best_restart,
            "restart_best": self.restart_best,
            "report": self.report.to_dict(),
            "factors": input_to_dict(self.factors),
        }


def _score(inp_alph, factors) -> tuple:
    inp = Thm2Input.__new__(Thm2Input)
    inp.alphabets, inp.factors = inp_alph, factors
    dest, relay, slack = _thm2_terms(_Info(compose_joint(inp)))
    if slack > STRICT_MARGIN:
        return max(min(dest, relay), 0.0), True
    return -1.0 + min(slack, 0.0), False


def search_thm2(channel, q_s, sizes: Mapping[str, int], restarts: int = 4, seed: int = 0,
                max_sweeps: int = 60, min_step: float = 1e-7) -> SearchResult:
    """Heuristic local search over the relay-input-description law.

    Each restart draws every searched factor row from a flat Dirichlet,
    then runs cyclic coordinate ascent: probability mass is moved between
    pairs of entries of one row at a time, with shrinking step sizes. The
    result is a lower estimate of the true maximum, nothing more.

    Args:
        channel: table W(Y2,Y3|X1,X2,S) of shape (|X1|, |X2|, |S|, |Y2|, |Y3|).
        q_s: state pmf.
        sizes: cardinalities of U, UR and X (Xhat follows X2).
        restarts: number of random initializations.
        seed: root seed; restart r uses child stream r.
    """
    w = np.asarray(channel, dtype=float)
    if w.ndim != 5:
        raise InvalidInputError("channel must have axes (X1, X2, S, Y2, Y3)")
    q_s = np.asarray(q_s, dtype=float).ravel()
    if restarts < 1:
        raise InvalidInputError("restarts must be >= 1")
    al = {"S": w.shape[2], "X1": w.shape[0], "X2": w.shape[1], "Xhat": w.shape[1],
          "Y2": w.shape[3], "Y3": w.shape[4]}
    for v in ("U", "UR", "X"):
        if v not in sizes:
            raise InvalidInputError(f"sizes must give the cardinality of {v}")
        al[v] = int(sizes[v])
    if "Xhat" in sizes and int(sizes["Xhat"]) != al["Xhat"]:
        raise InvalidInputError("Xhat must have the relay input alphabet size")
    if len(q_s) != al["S"]:
        raise InvalidInputError("q_s length does not match the channel's state axis")
    base = Thm2Input(al, {
        "Q_S": q_s, "W_Y2,Y3|X1,X2,S": w,
        **{k: _uniform(al, k) for k in SEARCHED},
    })

    streams = np.random.SeedSequence(seed).spawn(restarts)
    best, best_r, best_f = -math.inf, -1, None
    trace = []
    for r, ss in enumerate(streams):
        rng = np.random.default_rng(ss)
        f = dict(base.factors)
        for k in SEARCHED:
            t = f[k]
            f[k] = rng.dirichlet(np.ones(t.shape[-1]), size=t.shape[:-1])
        f, score = _ascend(base.alphabets, f, max_sweeps, min_step)
        if score > best:
            best, best_r, best_f = score, r, f
        trace.append(max(best, 0.0) if best > -math.inf else 0.0)

    final = Thm2Input(base.alphabets, {k: np.asarray(v) for k, v in best_f.items()})
    report = eval_thm2(final)
    if not report.feasible:
        report.rate = 0.0
        report.diagnostics.append("no feasible distribution found; rate reported as 0")
    return SearchResult(report, final, trace, best_r, int(seed))


def _uniform(al, key):
    children, parents = THM2_FACTORS[key]
    shape = tuple(al[v] for v in parents + children)
    return np.full(shape, 1.0 / shape[-1])


def _ascend(al, f, max_sweeps, min_step):
    score, _ = _score(al, f)
    step = 1.0
    for _ in range(max_sweeps):
        improved = False
        for k in SEARCHED:
            t = f[k]
            rows = t.reshape(-1, t.shape[-1])
            for ri in range(rows.shape[0]):
                for src in range(rows.shape[1]):
                    for dst in range(rows.shape[1]):
                        if src == dst:
                            continue
                        for frac in (1.0, 0.5, 0.1):
                            move = min(step * frac, rows[ri, src])
                            if move <= 0:
                                continue
                            trial = rows.copy()
                            trial[ri, src] -= move
                            trial[ri, dst] += move
                            trial[ri] = np.clip(trial[ri], 0.0, None)
                            trial[ri] /= trial[ri].sum()
                            cand = dict(f)
                            cand[k] = trial.reshape(t.shape)
                            s, _ = _score(al, cand)
                            if s > score + 1e-13:
                                f, score, rows, t = cand, s, trial, cand[k]
                                improved = True
        if not improved:
            step *= 0.5
            if step < min_step:
                break
    return f, score


# ---------------------------------------------------------------------------
# JSON


def input_from_dict(d: Mapping) -> Thm1Input | Thm2Input:
    """Parse ``{"theorem": 1|2, "alphabets": {...}, "factors": {...}}``."""
    theorem = int(d.get("theorem", 0))
    cls = {1: Thm1Input, 2: Thm2Input}.get(theorem)
    if cls is None:
        raise InvalidInputError("input must declare theorem 1 or 2")
    try:
        return cls(dict(d["alphabets"]), {k: np.asarray(v, dtype=float)
                                          for k, v in d["factors"].items()})
    except KeyError as e:
        raise InvalidInputError(f"input is missing {e}") from None


def input_to_dict(inp: Thm1Input | Thm2Input) -> dict:
    return {"theorem": inp.theorem, "alphabets": dict(inp.alphabets),
            "factors": {k: np.asarray(v).tolist() for k, v in inp.factors.items()}}


def load_input(path) -> Thm1Input | Thm2Input:
    try:
        with open(path) as fh:
            d = json.load(fh)
    except OSError as e:
        raise InvalidInputError(f"cannot read {path}: {e.strerror}") from None
    except json.JSONDecodeError as e:
        raise InvalidInputError(f"{path} is not valid JSON: {e}") from None
    return input_from_dict(d)


def evaluate(inp: Thm1Input | Thm2Input) -> DmRateReport:
    return eval_thm1(inp) if isinstance(inp, Thm1Input) else eval_thm2(inp)
