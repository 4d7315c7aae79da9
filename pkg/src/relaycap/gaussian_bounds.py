"""Closed-form bounds for the Gaussian relay channel with a state known at the source.

Every maximization goes through :func:`relaycap.optimizer.maximize_box` on a
box; constrained parameter sets are mapped onto boxes first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import ChannelParams, InvalidInputError, RelayCapError, check_rate
from .optimizer import OptimizerConfig, maximize_box

LN2 = math.log(2.0)
ALPHA_CAP = 8.0
NOISE_FLOOR = 1e-12
FEAS_TOL = 1e-12


class InfeasibleParameterError(RelayCapError, ValueError):
    pass


@dataclass(frozen=True)
class UpperBoundParams:
    rho12: float
    rho1s: float

    def __post_init__(self):
        if not 0.0 <= self.rho12 <= 1.0:
            raise InfeasibleParameterError(f"rho12 must lie in [0, 1], got {self.rho12}")
        if not -1.0 <= self.rho1s <= 0.0:
            raise InfeasibleParameterError(f"rho1s must lie in [-1, 0], got {self.rho1s}")
        if self.rho12 ** 2 + self.rho1s ** 2 > 1.0 + 1e-12:
            raise InfeasibleParameterError(
                f"rho12^2 + rho1s^2 = {self.rho12 ** 2 + self.rho1s ** 2} exceeds 1")


@dataclass(frozen=True)
class Thm4Params:
    gamma: float

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise InfeasibleParameterError(f"gamma must lie in [0, 1], got {self.gamma}")


@dataclass(frozen=True)
class Thm5Params:
    beta: float
    gamma: float
    alpha: float

    def __post_init__(self):
        for name in ("beta", "gamma"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise InfeasibleParameterError(f"{name} must lie in [0, 1], got {v}")
        if not math.isfinite(self.alpha):
            raise InfeasibleParameterError("alpha must be finite")


@dataclass
class BoundResult:
    """A bound value with its maximizer and the quantities behind it."""

    name: str
    value: float
    argmax: dict = field(default_factory=dict)
    terms: dict = field(default_factory=dict)
    derived: dict = field(default_factory=dict)
    diagnostics: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "value": self.value,
            "argmax": dict(self.argmax),
            "terms": dict(self.terms),
            "derived": dict(self.derived),
            "diagnostics": list(self.diagnostics),
        }


def _hl(x):
    """Vectorized 0.5*log2(1+x) with negative round-off floored at zero."""
    return 0.5 * np.log1p(np.maximum(x, 0.0)) / LN2


def _guard(ch: ChannelParams):
    diags = []
    changes = {}
    for name in ("n2", "n3"):
        if getattr(ch, name) < NOISE_FLOOR:
            changes[name] = NOISE_FLOOR
            diags.append(f"{name}={getattr(ch, name):.3e} clamped to {NOISE_FLOOR:.0e}")
    return (ch.replace(**changes) if changes else ch), diags


def _result(name, value, **kw) -> BoundResult:
    return BoundResult(name=name, value=check_rate(value, name), **kw)


# ---------------------------------------------------------------------------
# upper bounds


def delta_q(ch: ChannelParams) -> float:
    """Power of the state part the relay cannot learn from its output."""
    return ch.q * ch.n2 / ((math.sqrt(ch.q) + math.sqrt(ch.p1)) ** 2 + ch.n2)


def _cut1(ch, rho12):
    return _hl(ch.p1 * (1.0 - rho12 ** 2) * (1.0 / ch.n2 + 1.0 / ch.n3))


def _cut2(ch, rho12, rho1s, dq):
    free = np.maximum(ch.p1 * (1.0 - rho12 ** 2 - rho1s ** 2), 0.0)
    coop = (math.sqrt(ch.p2) + rho12 * math.sqrt(ch.p1)) ** 2
    interf = (math.sqrt(dq) + rho1s * math.sqrt(ch.p1)) ** 2
    return _hl(coop / (free + interf + ch.n3)) + _hl(free / ch.n3)


def upper_bound_objective(ch: ChannelParams, p: UpperBoundParams,
                          delta: float | None = None) -> BoundResult:
    """Min of the broadcast and multiaccess cuts at fixed correlations.

    ``delta`` overrides the residual state power; by default it is
    :func:`delta_q`.
    """
    ch, diags = _guard(ch)
    dq = delta_q(ch) if delta is None else float(delta)
    c1 = float(_cut1(ch, p.rho12))
    c2 = float(_cut2(ch, p.rho12, p.rho1s, dq))
    return _result("upper", min(c1, c2), argmax={"rho12": p.rho12, "rho1s": p.rho1s},
                   terms={"cut1": c1, "cut2": c2}, derived={"delta_q": dq},
                   diagnostics=diags)


def _best_cut2(ch, rho12: float, dq: float, cfg: OptimizerConfig):
    """max over rho1s in [-sqrt(1-rho12^2), 0] of the multiaccess cut."""
    span = math.sqrt(max(1.0 - rho12 ** 2, 0.0))
    if span == 0.0 or dq == 0.0:
        # with no residual state, rho1s only removes useful power
        return float(_cut2(ch, rho12, 0.0, dq)), 0.0
    res = maximize_box(lambda s: _cut2(ch, rho12, -s[:, 0] * span, dq), [(0.0, 1.0)], cfg)
    return res.value, -float(res.x[0]) * span


def maximize_upper_bound(ch: ChannelParams, cfg: OptimizerConfig | None = None,
                         delta: float | None = None) -> BoundResult:
    """Upper bound accounting for the state part unknown to the relay.

    The disc rho12^2 + rho1s^2 <= 1 is mapped onto the unit square through
    rho1s = -s * sqrt(1 - rho12^2). Because the broadcast cut does not
    depend on rho1s, the inner maximization over s is done separately for
    each rho12.
    """
    cfg = cfg or OptimizerConfig()
    ch, diags = _guard(ch)
    dq = delta_q(ch) if delta is None else float(delta)

    def outer(x):
        rho = x[:, 0]
        c1 = _cut1(ch, rho)
        out = np.empty_like(rho)
        for i, r in enumerate(rho):
            c2_at0 = float(_cut2(ch, r, 0.0, dq))
            out[i] = c1[i] if c1[i] <= c2_at0 else min(c1[i], _best_cut2(ch, r, dq, cfg)[0])
        return out

    res = maximize_box(outer, [(0.0, 1.0)], cfg)
    rho12 = float(res.x[0])
    c2, rho1s = _best_cut2(ch, rho12, dq, cfg)
    c1 = float(_cut1(ch, rho12))
    return _result("upper", min(c1, c2), argmax={"rho12": rho12, "rho1s": rho1s},
                   terms={"cut1": c1, "cut2": c2}, derived={"delta_q": dq},
                   diagnostics=diags)


def _cutset_mac(ch, rho):
    return _hl((ch.p1 + ch.p2 + 2.0 * rho * math.sqrt(ch.p1 * ch.p2)) / ch.n3)


def cutset_bound(ch: ChannelParams, cfg: OptimizerConfig | None = None) -> BoundResult:
    cfg = cfg or OptimizerConfig()
    ch, diags = _guard(ch)
    res = maximize_box(lambda x: np.minimum(_cut1(ch, x[:, 0]), _cutset_mac(ch, x[:, 0])),
                       [(0.0, 1.0)], cfg)
    rho = float(res.x[0])
    c1, c2 = float(_cut1(ch, rho)), float(_cutset_mac(ch, rho))
    return _result("cutset", min(c1, c2), argmax={"rho12": rho},
                   terms={"cut1": c1, "cut2": c2}, diagnostics=diags)


# ---------------------------------------------------------------------------
# lower bounds


def _df_terms(ch, rho):
    relay = _hl(ch.p1 * (1.0 - rho ** 2) / (ch.n2 + ch.q))
    dest = _hl((ch.p1 + ch.p2 + 2.0 * rho * np.sqrt(ch.p1 * ch.p2)) / (ch.n3 + ch.q))
    return relay, dest


def df_state_as_noise_bound(ch: ChannelParams, cfg: OptimizerConfig | None = None) -> BoundResult:
    """Classic decode-and-forward rate treating the state as extra noise."""
    cfg = cfg or OptimizerConfig()
    ch, diags = _guard(ch)
    res = maximize_box(lambda x: np.minimum(*_df_terms(ch, x[:, 0])), [(0.0, 1.0)], cfg)
    rho = float(res.x[0])
    relay, dest = (float(t) for t in _df_terms(ch, rho))
    return _result("df_noise", min(relay, dest), argmax={"rho": rho},
                   terms={"relay": relay, "dest": dest}, diagnostics=diags)


def _thm4(ch, gamma):
    gamma = np.asarray(gamma, dtype=float)
    d = ch.p2 * ch.n2 / (ch.n2 + gamma * ch.p1)
    num = (np.sqrt((1.0 - gamma) * ch.p1) + np.sqrt(np.maximum(ch.p2 - d, 0.0))) ** 2
    return _hl(num / (ch.n3 + d + gamma * ch.p1)), d


def thm4_rate_at(ch: ChannelParams, p: Thm4Params) -> BoundResult:
    """Rate of the scheme that describes the ideal relay input to the relay.

    ``derived['D']`` is the distortion of that description.
    """
    ch, diags = _guard(ch)
    value, d = _thm4(ch, p.gamma)
    return _result("thm4", float(value), argmax={"gamma": p.gamma},
                   terms={"rate": float(value)}, derived={"D": float(d)}, diagnostics=diags)


def maximize_thm4(ch: ChannelParams, cfg: OptimizerConfig | None = None) -> BoundResult:
    cfg = cfg or OptimizerConfig()
    g, diags = _guard(ch)
    res = maximize_box(lambda x: _thm4(g, x[:, 0])[0], [(0.0, 1.0)], cfg)
    out = thm4_rate_at(ch, Thm4Params(float(res.x[0])))
    out.diagnostics = diags
    return out


def r_dpc(alpha, p, q, n):
    """Dirty-paper rate R(alpha, P, Q, N) in bits; zero when P = 0.

    May be negative; alpha is admissible exactly where it is not.
    """
    alpha, p, q, n = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (alpha, p, q, n)))
    den = p * q * (1.0 - alpha) ** 2 + n * (p + alpha ** 2 * q)
    pos = p > 0
    if np.any(pos & (den <= 0)):
        raise InvalidInputError("R(alpha, P, Q, N) has a zero denominator")
    with np.errstate(divide="ignore", invalid="ignore"):
        val = 0.5 * np.log2(p * (p + q + n) / den)
    out = np.where(pos, val, 0.0)
    return float(out) if out.ndim == 0 else out


def _alpha_interval(p, q, n, cap=ALPHA_CAP):
    """Vectorized roots of alpha^2 Q(P+N) - 2PQ alpha - P^2 = 0, clipped to the cap."""
    p, q, n = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (p, q, n)))
    lo = np.full(p.shape, -cap)
    hi = np.full(p.shape, cap)
    m = (p > 0) & (q > 0)
    if np.any(m):
        pm, qm, nm = p[m], q[m], n[m]
        eps = (pm + nm) / qm
        root = np.sqrt(1.0 + eps)
        scale = pm / (pm + nm)
        lo[m] = np.maximum(-scale * eps / (1.0 + root), -cap)
        hi[m] = np.minimum(scale * (1.0 + root), cap)
    return lo, hi


def alpha_feasible_interval(p: float, q: float, n: float, cap: float = ALPHA_CAP) -> tuple:
    """Closed interval of inflation factors with R(alpha, P, Q, N) >= 0.

    When Q = 0 or P = 0 every real alpha qualifies and ``(-cap, cap)`` is
    returned. The interval always contains 0.
    """
    for name, v in (("p", p), ("q", q), ("n", n)):
        if not math.isfinite(v) or v < 0:
            raise InvalidInputError(f"{name} must be finite and >= 0, got {v}")
    if n <= 0:
        raise InvalidInputError(f"n must be > 0, got {n}")
    lo, hi = _alpha_interval(p, q, n, cap)
    return float(lo), float(hi)


def q_tilde(t, q, d):
    """Variance of S - t * S_hat when S_hat describes S with distortion d."""
    return (1.0 - t) ** 2 * q - t * (t - 2.0) * d


def _thm5_derived(ch, beta, gamma):
    beta = np.asarray(beta, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    gb = 1.0 - gamma
    p_layer = beta * gb * ch.p1
    d = ch.q * ch.n2 / (ch.n2 + gamma * ch.p1)
    coh = (np.sqrt((1.0 - beta) * gb * ch.p1) + math.sqrt(ch.p2)) ** 2
    noise = ch.n3 + d + gamma * ch.p1
    alpha2 = coh / (coh + p_layer + noise)
    qt = np.maximum(q_tilde(alpha2, ch.q, d), 0.0)
    return {
        "P": p_layer,
        "D": d,
        "alpha2": alpha2,
        "alpha_R": gamma * ch.p1 / (gamma * ch.p1 + ch.n2),
        "Q_tilde": qt,
        "N_relay": ch.n2 + gamma * ch.p1,
        "N_dest": ch.n3 + gamma * ch.p1,
        "coop": _hl(coh / (noise + p_layer)),
    }


def thm5_rate_at(ch: ChannelParams, p: Thm5Params) -> BoundResult:
    """Rate of the state-description scheme at fixed (beta, gamma, alpha)."""
    ch, diags = _guard(ch)
    dv = {k: float(v) for k, v in _thm5_derived(ch, p.beta, p.gamma).items()}
    for label, n in (("relay", dv["N_relay"]), ("destination", dv["N_dest"])):
        if dv["P"] > 0 and r_dpc(p.alpha, dv["P"], dv["Q_tilde"], n) < -FEAS_TOL:
            lo, hi = alpha_feasible_interval(dv["P"], dv["Q_tilde"], n)
            raise InfeasibleParameterError(
                f"alpha={p.alpha} is outside the {label} set A(P, Q~, N)=[{lo:.6g}, {hi:.6g}]")
    relay = r_dpc(p.alpha, dv["P"], dv["Q_tilde"], dv["N_relay"])
    dest = r_dpc(p.alpha, dv["P"], dv["Q_tilde"], dv["N_dest"]) + dv["coop"]
    relay, dest = max(relay, 0.0), max(dest, 0.0)
    return _result("thm5", min(relay, dest),
                   argmax={"beta": p.beta, "gamma": p.gamma, "alpha": p.alpha},
                   terms={"relay": relay, "dest": dest},
                   derived={k: dv[k] for k in ("D", "Q_tilde", "alpha2", "alpha_R", "coop")},
                   diagnostics=diags)


def _thm5_best_alpha(ch, beta, gamma):
    """Exact max over admissible alpha for arrays of (beta, gamma).

    Both rate terms are quasi-concave in alpha, so their minimum peaks at an
    interval end, at either term's own peak P/(P+N), or where they cross.
    """
    dv = _thm5_derived(ch, beta, gamma)
    p, qt, nr, nd, c = dv["P"], dv["Q_tilde"], dv["N_relay"], dv["N_dest"], dv["coop"]
    lo_r, hi_r = _alpha_interval(p, qt, nr)
    lo_d, hi_d = _alpha_interval(p, qt, nd)
    lo, hi = np.maximum(lo_r, lo_d), np.minimum(hi_r, hi_d)

    # crossing: (P+Q+Nr) d_D(a) = K (P+Q+Nd) d_R(a) with K = 2^(2c)
    a_r = p + qt + nr
    b_d = np.exp2(2.0 * c) * (p + qt + nd)
    a2 = qt * (a_r * (p + nd) - b_d * (p + nr))
    a1 = -2.0 * p * qt * (a_r - b_d)
    a0 = p * (a_r * (qt + nd) - b_d * (qt + nr))
    with np.errstate(divide="ignore", invalid="ignore"):
        disc = np.sqrt(np.maximum(a1 * a1 - 4.0 * a2 * a0, 0.0))
        sq = -0.5 * (a1 + np.copysign(disc, a1))
        root1 = np.where(np.abs(a2) > 1e-300, sq / a2, -a0 / a1)
        root2 = np.where(np.abs(sq) > 1e-300, a0 / sq, np.nan)
    cands = [lo, hi]
    with np.errstate(divide="ignore", invalid="ignore"):
        cands += [p / (p + nr), p / (p + nd)]
    cands += [root1, root2]
    best_v = np.full(p.shape, -np.inf)
    best_a = np.zeros(p.shape)
    pos = p > 0
    for a in cands:
        a = np.clip(np.nan_to_num(a, nan=0.0, posinf=0.0, neginf=0.0), lo, hi)
        rr = r_dpc(a, np.where(pos, p, 0.0), qt, nr)
        rd = r_dpc(a, np.where(pos, p, 0.0), qt, nd) + c
        v = np.minimum(rr, rd)
        better = v > best_v
        best_v = np.where(better, v, best_v)
        best_a = np.where(better, a, best_a)
    best_v = np.where(pos, np.maximum(best_v, 0.0), 0.0)
    return best_v, best_a


def maximize_thm5(ch: ChannelParams, cfg: OptimizerConfig | None = None) -> BoundResult:
    """Maximize the state-description rate over (beta, gamma, alpha).

    (beta, gamma) are searched on the unit square; alpha is solved exactly
    inside the intersection of the two admissible intervals.
    """
    cfg = cfg or OptimizerConfig()
    g, diags = _guard(ch)
    res = maximize_box(lambda x: _thm5_best_alpha(g, x[:, 0], x[:, 1])[0],
                       [(0.0, 1.0), (0.0, 1.0)], cfg)
    beta, gamma = (float(v) for v in res.x)
    _, alpha = _thm5_best_alpha(g, np.array([beta]), np.array([gamma]))
    out = thm5_rate_at(ch, Thm5Params(beta, gamma, float(alpha[0])))
    out.diagnostics = diags
    return out


# ---------------------------------------------------------------------------
# special cases


def degenerate_parallel_capacity(p1: float, p2: float, n2: float, n3: float,
                                 cfg: OptimizerConfig | None = None) -> BoundResult:
    """Capacity when all links are orthogonal and the relay link is state-free."""
    cfg = cfg or OptimizerConfig()
    for name, v in (("p1", p1), ("n2", n2), ("n3", n3)):
        if not v > 0:
            raise InvalidInputError(f"{name} must be > 0")
    if not p2 >= 0:
        raise InvalidInputError("p2 must be >= 0")
    n2c, n3c = max(n2, NOISE_FLOOR), max(n3, NOISE_FLOOR)
    diags = [f"{k}={v:.3e} clamped to {NOISE_FLOOR:.0e}"
             for k, v in (("n2", n2), ("n3", n3)) if v < NOISE_FLOOR]

    def terms(gamma):
        relay = np.minimum(_hl(gamma * p1 / n2c), _hl(p2 / n3c))
        direct = _hl((1.0 - gamma) * p1 / n3c)
        return relay, direct

    res = maximize_box(lambda x: np.add(*terms(x[:, 0])), [(0.0, 1.0)], cfg)
    gamma = float(res.x[0])
    relay, direct = (float(t) for t in terms(gamma))
    return _result("parallel", relay + direct, argmax={"gamma": gamma},
                   terms={"relay_link": relay, "direct_link": direct}, diagnostics=diags)


ASYMPTOTIC_CASES = ("relay-noise-zero", "relay-noise-infinite", "state-infinite")


def asymptotic_reference(case: str, ch: ChannelParams) -> float:
    """Limiting rates for a noiseless relay, a useless relay, and a huge state."""
    if case == "relay-noise-zero":
        return float(_hl((math.sqrt(ch.p1) + math.sqrt(ch.p2)) ** 2 / ch.n3))
    if case == "relay-noise-infinite":
        return float(_hl(ch.p1 / ch.n3))
    if case == "state-infinite":
        return float(_hl(ch.p1 / max(ch.n2, ch.n3)))
    raise InvalidInputError(f"unknown asymptotic case {case!r}; expected one of {ASYMPTOTIC_CASES}")
