"""End-to-end acceptance checks, one test per criterion.

Each test records a single PASS/FAIL line (shown in the terminal summary
under "acceptance criteria") and then asserts the same condition.
"""

import math
import time

import numpy as np
import pytest

from conftest import FIXTURES, GOLDEN, hl, random_channels
from relaycap.cli import main
from relaycap.core import ChannelParams
from relaycap.dm_eval import evaluate, load_input
from relaycap.gaussian_bounds import (
    Thm4Params,
    Thm5Params,
    _thm5_derived,
    alpha_feasible_interval,
    cutset_bound,
    degenerate_parallel_capacity,
    delta_q,
    df_state_as_noise_bound,
    maximize_thm4,
    maximize_thm5,
    maximize_upper_bound,
)
from relaycap.mc_validation import (
    sample_covariance_check,
    validate_thm4_effective_channel,
    validate_thm5_terms,
)
from relaycap.sweep import SweepSpec, read_sweep_csv, run_sweep
from test_dm_eval import ref_thm1, ref_thm2

# Figure parameter sets (linear): 10 dB = 10, 5 dB = 10**0.5, 30 dB = 1000, 40 dB = 10**4
FIG_A = {"p1_db": 10, "n3_db": 10, "p2_db": 5, "q_db": 30}
FIG_B = {"p1_db": 10, "q_db": 10, "n3_db": 10, "p2_db": 40}
SNR_LO, SNR_HI, SNR_POINTS = -10.0, 30.0, 41
# the sampling threshold frozen after the first n=10**6 run (observed 2.2e-3)
SAMPLING_THRESHOLD = 5e-3


def test_criterion_01_noiseless_relay_limit(criterion):
    ch = ChannelParams(p1=1, p2=1, q=1, n2=1e-9, n3=1)
    t0 = time.perf_counter()
    t4 = maximize_thm4(ch).value
    up = maximize_upper_bound(ch).value
    dt = time.perf_counter() - t0
    ref = 0.5 * math.log2(1 + (math.sqrt(1) + math.sqrt(1)) ** 2 / 1)
    ok = abs(t4 - up) <= 0.01 and abs(t4 - ref) <= 0.01 and abs(up - ref) <= 0.01 and dt < 5
    criterion(1, "thm4 and upper meet at N2 -> 0", ok,
              f"thm4={t4:.6f} upper={up:.6f} limit={ref:.6f} |diff|={abs(t4 - up):.2e} "
              f"(tol 0.01) time={dt:.2f}s (<5s)")
    assert ok


def test_criterion_02_upper_tighter_than_cutset(criterion):
    t0 = time.perf_counter()
    ch0 = SweepSpec("snr_db", SNR_LO, SNR_HI, SNR_POINTS, FIG_A).channel_at(0.0)
    up0, cs0 = maximize_upper_bound(ch0).value, cutset_bound(ch0).value
    spec = SweepSpec("snr_db", SNR_LO, SNR_HI, SNR_POINTS, FIG_A, bounds=("upper", "cutset"))
    rows = read_sweep_csv(run_sweep(spec))
    dt = time.perf_counter() - t0
    by = {}
    for r in rows:
        by.setdefault(r["axis_value"], {})[r["bound_name"]] = r["value_bits"]
    worst = max(v["upper"] - v["cutset"] for v in by.values())
    ok = up0 <= cs0 - 1e-3 and worst <= 1e-9 and len(by) == SNR_POINTS and dt < 60
    criterion(2, "upper bound below cut-set", ok,
              f"at 0 dB upper={up0:.6f} cutset={cs0:.6f} gap={cs0 - up0:.4f} (>=1e-3); "
              f"max(upper-cutset) over {len(by)} pts={worst:.2e} (<=1e-9) time={dt:.1f}s (<60s)")
    assert ok


def test_criterion_03_thm4_ignores_state_power(criterion):
    vals = [maximize_thm4(ChannelParams(1, 1, q, 1, 1)).value for q in (0.1, 1.0, 1e3)]
    spread = max(vals) - min(vals)
    ok = spread <= 1e-9
    criterion(3, "thm4 constant in Q", ok,
              f"values={[round(v, 9) for v in vals]} spread={spread:.1e} (<=1e-9)")
    assert ok


def test_criterion_04_strong_state_limit(criterion):
    ch = ChannelParams(p1=1, p2=1, q=1e6, n2=2, n3=1)
    v = maximize_thm5(ch).value
    ok = abs(v - 0.292481) <= 0.05
    criterion(4, "thm5 at Q=1e6", ok, f"thm5={v:.6f} target=0.292481 |diff|={abs(v - 0.292481):.2e} (<=0.05)")
    assert ok


def test_criterion_05_parallel_capacity(criterion):
    r = degenerate_parallel_capacity(1, 1, 1, 1)
    ok = abs(r.value - 0.584963) <= 1e-6
    criterion(5, "orthogonal-link capacity", ok,
              f"value={r.value:.9f} gamma*={r.argmax['gamma']:.6f} target=0.584963 (tol 1e-6)")
    assert ok


def test_criterion_06_oracle_equivalence(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    worst = 0.0
    n = 0
    for ch in random_channels(20, seed=1000, lo=-1, hi=1):
        for _ in range(10):
            b, g = (float(x) for x in rng.uniform(0.01, 0.99, 2))
            dv = {k: float(x) for k, x in _thm5_derived(ch, b, g).items()}
            r = alpha_feasible_interval(dv["P"], dv["Q_tilde"], dv["N_relay"])
            d = alpha_feasible_interval(dv["P"], dv["Q_tilde"], dv["N_dest"])
            a = float(rng.uniform(max(r[0], d[0]), min(r[1], d[1])))
            worst = max(worst, validate_thm5_terms(ch, Thm5Params(b, g, a)).max_abs_diff,
                        validate_thm4_effective_channel(ch, Thm4Params(g)).max_abs_diff)
            n += 1
    dev = sample_covariance_check(np.eye(3), 10**6, seed=0).max_abs_deviation
    dt = time.perf_counter() - t0
    ok = worst < 1e-9 and dev < SAMPLING_THRESHOLD and dt < 120
    criterion(6, "closed forms vs log-det oracle", ok,
              f"{n} draws max|diff|={worst:.2e} (<1e-9); sampling n=1e6 dev={dev:.2e} "
              f"(<{SAMPLING_THRESHOLD:g}) time={dt:.1f}s (<120s)")
    assert ok


def test_criterion_07_orderings(criterion):
    violations = []
    for k, ch in enumerate(random_channels(100, seed=7, lo=-1, hi=2)):
        up = maximize_upper_bound(ch).value
        cs = cutset_bound(ch).value
        t4 = maximize_thm4(ch).value
        t5 = maximize_thm5(ch).value
        df = df_state_as_noise_bound(ch).value
        for name, lo, hi in (("thm4<=upper", t4, up), ("upper<=cutset", up, cs),
                             ("thm5<=upper", t5, up), ("df_noise<=cutset", df, cs)):
            if lo > hi + 1e-6:
                violations.append((k, name, lo - hi))
    ok = not violations
    criterion(7, "bound orderings on 100 random channels", ok,
              f"violations beyond 1e-6: {len(violations)} {violations[:3]}")
    assert ok


def _polar_upper_oracle(ch, n=1001):
    dq = delta_q(ch)
    r = np.linspace(0, 1, n)[:, None]
    th = np.linspace(0, np.pi / 2, n)[None, :]
    a, b = r * np.cos(th), -r * np.sin(th)
    c1 = hl(ch.p1 * (1 - a ** 2) * (1 / ch.n2 + 1 / ch.n3))
    free = np.maximum(ch.p1 * (1 - a ** 2 - b ** 2), 0)
    c2 = (hl((np.sqrt(ch.p2) + a * np.sqrt(ch.p1)) ** 2
             / (free + (np.sqrt(dq) + b * np.sqrt(ch.p1)) ** 2 + ch.n3)) + hl(free / ch.n3))
    return np.minimum(c1, c2).max()


def _thm4_oracle(ch, n=10**7):
    g = np.linspace(0, 1, n)
    d = ch.p2 * ch.n2 / (ch.n2 + g * ch.p1)
    num = (np.sqrt((1 - g) * ch.p1) + np.sqrt(np.maximum(ch.p2 - d, 0))) ** 2
    return hl(num / (ch.n3 + d + g * ch.p1)).max()


def test_criterion_08_optimizer_vs_brute_force(criterion):
    w4 = wu = 0.0
    for ch in random_channels(10, seed=8):
        w4 = max(w4, abs(maximize_thm4(ch).value - _thm4_oracle(ch)))
        wu = max(wu, abs(maximize_upper_bound(ch).value - _polar_upper_oracle(ch)))
    ok = w4 <= 1e-8 and wu <= 1e-4
    criterion(8, "optimizer vs dense grids", ok,
              f"thm4 vs 1e7-pt grid max|diff|={w4:.2e} (<=1e-8); "
              f"upper vs 1001x1001 grid max|diff|={wu:.2e} (<=1e-4)")
    assert ok


def test_criterion_09_dm_suite(criterion, tmp_path, capsys):
    noiseless = evaluate(load_input(FIXTURES / "thm2_noiseless_binary.json"))
    one_bit = noiseless.feasible and abs(noiseless.rate - 1.0) < 1e-12
    mismatched = []
    names = sorted(p.stem for p in FIXTURES.glob("thm*.json"))
    for name in names:
        inp = load_input(FIXTURES / f"{name}.json")
        rep = evaluate(inp)
        if inp.theorem == 1:
            _, slacks, cond = ref_thm1(inp)
            expect = all(v >= -1e-10 for v in slacks.values()) and cond > 1e-10
        else:
            _, slack = ref_thm2(inp)
            expect = slack > 1e-10
        if rep.feasible != expect:
            mismatched.append(name)
    out = tmp_path / "search.json"
    code = main(["dm", "search", "--theorem", "2", "--channel", str(FIXTURES / "channel_bsc_pair.json"),
                 "--sizes", "U=2,UR=2,X=1", "--restarts", "3", "--seed", "0", "--out", str(out)])
    capsys.readouterr()
    golden_ok = code == 0 and out.read_bytes() == (GOLDEN / "search_thm2_seed0.json").read_bytes()
    ok = one_bit and not mismatched and golden_ok
    criterion(9, "finite-alphabet evaluators", ok,
              f"noiseless rate={noiseless.rate} ; feasibility flags match enumeration on "
              f"{len(names) - len(mismatched)}/{len(names)} fixtures ; golden search byte-identical={golden_ok}")
    assert ok


def _figure_checks(fixed):
    spec = SweepSpec("snr_db", SNR_LO, SNR_HI, SNR_POINTS, fixed, bounds=("upper", "thm4", "thm5"))
    text = run_sweep(spec)
    assert text == run_sweep(spec), "sweep CSV is not deterministic"
    by = {}
    for r in read_sweep_csv(text):
        by.setdefault(r["axis_value"], {})[r["bound_name"]] = r["value_bits"]
    snr = sorted(by)
    t4 = np.array([by[s]["thm4"] for s in snr])
    t5 = np.array([by[s]["thm5"] for s in snr])
    up = np.array([by[s]["upper"] for s in snr])
    drop = float(np.max(t4[:-1] - t4[1:]))
    frac = float(np.mean(t4 >= t5))
    gap = float(up[-1] - t4[-1])
    return {"monotone": drop <= 1e-9, "drop": drop, "dominates": frac >= 0.9, "frac": frac,
            "tight": gap < 0.05, "gap": gap}


def test_criterion_10_figure_sweeps(criterion):
    parts, ok = [], True
    for label, fixed in (("a", FIG_A), ("b", FIG_B)):
        c = _figure_checks(fixed)
        ok &= c["monotone"] and c["dominates"] and c["tight"]
        parts.append(
            f"fig {label}: (a) max drop={c['drop']:.1e} {'ok' if c['monotone'] else 'FAIL'}, "
            f"(b) thm4>=thm5 at {100 * c['frac']:.1f}% {'ok' if c['dominates'] else 'FAIL'}, "
            f"(c) top-SNR gap={c['gap']:.4f} {'ok' if c['tight'] else 'FAIL'}")
    criterion(10, "figure sweeps", ok, " ; ".join(parts))
    assert ok
