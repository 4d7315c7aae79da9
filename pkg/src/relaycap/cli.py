"""Command-line entry point: ``relaycap {point,sweep,dm,validate}``.

Exit codes: 0 on success, 2 for invalid input, 3 when an evaluator fails.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .core import ChannelParams, GaussianJoint, InvalidInputError, RelayCapError
from .dm_eval import evaluate, load_input, search_thm2
from .gaussian_bounds import InfeasibleParameterError, Thm4Params, Thm5Params, _thm5_derived
from .mc_validation import (
    build_thm5_covariance,
    sample_covariance_check,
    validate_thm4_effective_channel,
    validate_thm5_terms,
)
from .optimizer import OptimizerConfig
from .sweep import BOUND_NAMES, FIELDS, SweepSpec, rows_to_csv, run_point, sweep_rows

EXIT_OK, EXIT_INPUT, EXIT_EVAL = 0, 2, 3
DEFAULT_BOUNDS = ("upper", "cutset", "thm4", "thm5", "df_noise")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("common options")
    g.add_argument("--config", type=Path, help="JSON file with channel, bounds, optimizer and sweep keys")
    g.add_argument("--out", type=Path, help="write output here instead of stdout")
    g.add_argument("--format", choices=("csv", "json"), help="output format")
    g.add_argument("--grid", type=int, help="coarse grid points per dimension")
    g.add_argument("--refine-iters", type=int, help="pattern-search iterations")
    g.add_argument("--tol", type=float, help="optimizer tolerance")
    g.add_argument("--seed", type=int, help="root random seed")
    return p


def _channel_args(p: argparse.ArgumentParser, skip=()):
    for name in FIELDS:
        if name in skip:
            continue
        p.add_argument(f"--{name}", type=float, help=f"{name} (linear)")
        p.add_argument(f"--{name}-db", dest=f"{name}_db", type=float, help=f"{name} in dB")


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    ap = argparse.ArgumentParser(prog="relaycap", description=(
        "Capacity bounds for a Gaussian relay channel with a state known at the source."))
    sub = ap.add_subparsers(dest="cmd", required=True)

    pt = sub.add_parser("point", parents=[common], help="evaluate bounds at one channel")
    _channel_args(pt)
    pt.add_argument("--bounds", help=f"comma list from {','.join(BOUND_NAMES)}")

    sw = sub.add_parser("sweep", parents=[common], help="evaluate bounds along one axis")
    _channel_args(sw)
    sw.add_argument("--axis", help="snr_db (P1/N2 via N2), a channel field, or <field>_db")
    sw.add_argument("--lo", type=float)
    sw.add_argument("--hi", type=float)
    sw.add_argument("--points", type=int)
    sw.add_argument("--scale", choices=("linear", "log"))
    sw.add_argument("--bounds", help=f"comma list from {','.join(BOUND_NAMES)}")
    sw.add_argument("--workers", type=int, default=1, help="worker processes")

    dm = sub.add_parser("dm", help="finite-alphabet evaluators")
    dsub = dm.add_subparsers(dest="dm_cmd", required=True)
    ev = dsub.add_parser("eval", parents=[common], help="evaluate a rate for a given law")
    ev.add_argument("--theorem", type=int, choices=(1, 2), required=True)
    ev.add_argument("--input", type=Path, required=True)
    se = dsub.add_parser("search", parents=[common], help="heuristic search of the description scheme")
    se.add_argument("--theorem", type=int, choices=(2,), required=True)
    se.add_argument("--channel", type=Path, required=True,
                    help='JSON {"W": W[x1][x2][s][y2][y3], "q_s": [...]}')
    se.add_argument("--sizes", default="U=2,UR=2,X=1", help="e.g. U=2,UR=2,X=1")
    se.add_argument("--restarts", type=int, default=4)

    va = sub.add_parser("validate", parents=[common], help="cross-check closed forms")
    va.add_argument("--target", choices=("thm4", "thm5", "sampling"), required=True)
    va.add_argument("--params", type=Path, required=True,
                    help="JSON with channel fields plus gamma (and beta, alpha)")
    va.add_argument("--samples", type=int, default=1_000_000)
    return ap


def _load_json(path: Path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as e:
        raise InvalidInputError(f"cannot read {path}: {e.strerror}") from None
    except json.JSONDecodeError as e:
        raise InvalidInputError(f"{path} is not valid JSON: {e}") from None


def _optimizer_cfg(args, conf: dict) -> OptimizerConfig:
    o = dict(conf.get("optimizer", {}))
    for flag, key in (("grid", "grid_points_per_dim"), ("refine_iters", "refine_iters"),
                      ("tol", "tol"), ("seed", "seed")):
        v = getattr(args, flag, None)
        if v is not None:
            o[key] = v
    try:
        return OptimizerConfig(**o)
    except (TypeError, ValueError) as e:
        raise InvalidInputError(f"bad optimizer settings: {e}") from None


def _channel_map(args, conf: dict) -> dict:
    m = dict(conf.get("channel", {}))
    for name in FIELDS:
        for key in (name, name + "_db"):
            v = getattr(args, key, None)
            if v is not None:
                m.pop(name, None)
                m.pop(name + "_db", None)
                m[key] = v
    return m


def _bounds(args, conf: dict) -> tuple:
    if getattr(args, "bounds", None) is not None:
        return tuple(b.strip() for b in args.bounds.split(",") if b.strip())
    return tuple(conf.get("bounds", DEFAULT_BOUNDS))


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, np.ndarray):
        return _jsonable(o.tolist())
    if isinstance(o, (np.floating, float)):
        o = float(o)
        return o if math.isfinite(o) else None
    if isinstance(o, np.integer):
        return int(o)
    return o


def _emit(args, text: str):
    if args.out is not None:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)


def _dump(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=False) + "\n"


def cmd_point(args, conf):
    ch = ChannelParams.from_mapping(_channel_map(args, conf))
    res = run_point(ch, _bounds(args, conf), _optimizer_cfg(args, conf))
    if args.format == "csv":
        lines = ["bound_name,value_bits,wall_time_s"]
        lines += [f"{r['name']},{float(r['value'])!r},{r['wall_time_s']!r}" for r in res["bounds"]]
        _emit(args, "\n".join(lines) + "\n")
    else:
        _emit(args, _dump(res))


def cmd_sweep(args, conf):
    s = dict(conf.get("sweep", {}))
    for k in ("axis", "lo", "hi", "points", "scale"):
        v = getattr(args, k)
        if v is not None:
            s[k] = v
    s.setdefault("axis", "snr_db")
    for k in ("lo", "hi", "points"):
        if k not in s:
            raise InvalidInputError(f"sweep needs --{k}")
    fixed = _channel_map(args, conf)
    spec = SweepSpec(axis=s["axis"], lo=float(s["lo"]), hi=float(s["hi"]),
                     points=int(s["points"]), fixed=fixed, bounds=_bounds(args, conf),
                     scale=s.get("scale", "linear"))
    if spec.axis == "snr_db":
        missing = [n for n in ("p1", "p2", "q", "n3") if n not in fixed and n + "_db" not in fixed]
    else:
        name = spec.axis.removesuffix("_db")
        missing = [n for n in FIELDS if n != name and n not in fixed and n + "_db" not in fixed]
    if missing:
        raise InvalidInputError(f"sweep is missing fixed channel fields {missing}")
    if args.workers < 1:
        raise InvalidInputError("--workers must be >= 1")
    rows = sweep_rows(spec, _optimizer_cfg(args, conf), workers=args.workers)
    _emit(args, _dump(rows) if args.format == "json" else rows_to_csv(rows))


def cmd_dm(args, conf):
    if args.dm_cmd == "eval":
        inp = load_input(args.input)
        if inp.theorem != args.theorem:
            raise InvalidInputError(f"{args.input} holds a theorem {inp.theorem} input")
        _emit(args, _dump(evaluate(inp).to_dict()))
        return
    ch = _load_json(args.channel)
    try:
        w, q = ch["W"], ch["q_s"]
    except KeyError as e:
        raise InvalidInputError(f"channel file is missing {e}") from None
    sizes = {}
    for part in args.sizes.split(","):
        k, _, v = part.partition("=")
        if not v.strip().isdigit():
            raise InvalidInputError(f"bad --sizes entry {part!r}")
        sizes[k.strip()] = int(v)
    seed = args.seed if args.seed is not None else 0
    res = search_thm2(np.asarray(w, dtype=float), q, sizes, restarts=args.restarts, seed=seed)
    _emit(args, _dump(res.to_dict()))


def cmd_validate(args, conf):
    prm = _load_json(args.params)
    seed = args.seed if args.seed is not None else 0
    if args.target == "sampling" and "cov" in prm:
        cov = np.asarray(prm["cov"], dtype=float)
        g = GaussianJoint(tuple(prm.get("names", [f"x{i}" for i in range(len(cov))])), cov)
        _emit(args, _dump(sample_covariance_check(g, args.samples, seed).to_dict()))
        return
    ch = ChannelParams.from_mapping(prm)
    if args.target == "thm4":
        rep = validate_thm4_effective_channel(ch, Thm4Params(float(prm["gamma"])))
        _emit(args, _dump(rep.to_dict()))
        return
    beta, gamma = float(prm.get("beta", 1.0)), float(prm.get("gamma", 0.0))
    alpha = prm.get("alpha", "alpha2")
    if alpha == "alpha2":
        alpha = _thm5_derived(ch, beta, gamma)["alpha2"]
    p = Thm5Params(beta, gamma, float(alpha))
    if args.target == "thm5":
        _emit(args, _dump(validate_thm5_terms(ch, p).to_dict()))
    else:
        _emit(args, _dump(sample_covariance_check(build_thm5_covariance(ch, p),
                                                  args.samples, seed).to_dict()))


def _fail(code: int, what: str, e: Exception) -> int:
    print(f"relaycap: {what}: {e}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        conf = _load_json(args.config) if getattr(args, "config", None) else {}
        handler = {"point": cmd_point, "sweep": cmd_sweep, "dm": cmd_dm,
                   "validate": cmd_validate}[args.cmd]
        handler(args, conf)
    except (InvalidInputError, InfeasibleParameterError) as e:
        return _fail(EXIT_INPUT, "invalid input", e)
    # numerical failures first: LinAlgError is itself a ValueError
    except (RelayCapError, ArithmeticError, np.linalg.LinAlgError, RuntimeError) as e:
        return _fail(EXIT_EVAL, "evaluation failed", e)
    except (KeyError, TypeError, ValueError) as e:
        return _fail(EXIT_INPUT, "invalid input", e)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
