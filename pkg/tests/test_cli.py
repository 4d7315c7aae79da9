import json
import math

import numpy as np
import pytest

from conftest import FIXTURES, GOLDEN
from relaycap.cli import main
from relaycap.core import ChannelParams, InvalidInputError
from relaycap.optimizer import OptimizerConfig
from relaycap.sweep import CSV_HEADER, SweepSpec, read_sweep_csv, run_point, run_sweep, sweep_rows

FAST = OptimizerConfig(grid_points_per_dim=41, refine_iters=80)
FIG_A = {"p1_db": 10, "p2_db": 5, "q_db": 30, "n3_db": 10}


# -- run_point -----------------------------------------------------------------

def test_point_cutset_p2_zero():
    rec = run_point(ChannelParams(1, 0, 1, 1, 1), {"cutset"})
    (b,) = rec["bounds"]
    assert b["name"] == "cutset" and b["value"] == pytest.approx(0.5, abs=1e-12)
    assert b["wall_time_s"] >= 0 and "argmax" in b and "terms" in b and "derived" in b


def test_point_empty_bounds():
    with pytest.raises(InvalidInputError, match="no bounds requested"):
        run_point(ChannelParams(1, 1, 1, 1, 1), set())


def test_point_ordering_in_one_record():
    ch = ChannelParams.from_mapping(dict(FIG_A, n2_db=10))
    rec = run_point(ch, ["thm4", "upper"])
    v = {b["name"]: b["value"] for b in rec["bounds"]}
    assert v["thm4"] <= v["upper"]
    assert rec["ordering_violations"] == []


def test_point_asymptotes_expand():
    rec = run_point(ChannelParams(1, 1, 1, 1, 1), ["asymptotes"])
    assert [b["name"] for b in rec["bounds"]] == [
        "asym_relay_noise_zero", "asym_relay_noise_infinite", "asym_state_infinite"]


# -- sweeps --------------------------------------------------------------------

def test_sweep_spec_validation():
    with pytest.raises(InvalidInputError):
        SweepSpec("snr_db", 1, 1, 5, FIG_A)
    with pytest.raises(InvalidInputError):
        SweepSpec("snr_db", 0, 1, 1, FIG_A)
    with pytest.raises(InvalidInputError):
        SweepSpec("bogus", 0, 1, 3, FIG_A)
    with pytest.raises(InvalidInputError):
        SweepSpec("snr_db", 0, 1, 3, FIG_A, bounds=())
    with pytest.raises(InvalidInputError):
        SweepSpec("q", -1, 1, 3, FIG_A, scale="log")


def test_snr_axis_varies_n2_through_p1():
    spec = SweepSpec("snr_db", -10, 30, 5, FIG_A)
    ch = spec.channel_at(20.0)
    assert ch.n2 == pytest.approx(0.1, rel=1e-12)
    assert ch.p1 == pytest.approx(10.0) and ch.q == pytest.approx(1000.0)


def test_sweep_csv_shape_and_determinism():
    spec = SweepSpec("snr_db", -10, 30, 3, FIG_A, bounds=("upper", "cutset", "thm4", "thm5", "df_noise"))
    a = run_sweep(spec, FAST)
    b = run_sweep(spec, FAST)
    assert a == b
    lines = a.splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    assert lines[0].startswith("axis_value,bound_name,value_bits,term1,term2,argmax")
    rows = read_sweep_csv(a)
    assert len(rows) == 15
    keys = [(r["axis_value"], r["bound_name"]) for r in rows]
    assert keys == sorted(keys)
    assert all(r["flag"] == "" and r["error"] == "" for r in rows)


def test_sweep_parallel_matches_serial():
    spec = SweepSpec("snr_db", -10, 30, 4, FIG_A, bounds=("thm4", "cutset"))
    assert run_sweep(spec, FAST, workers=2) == run_sweep(spec, FAST)


def test_sweep_identical_points_give_identical_rows():
    # thm4 and the cut-set bound do not depend on Q
    spec = SweepSpec("q", 1.0, 50.0, 2, {"p1": 1, "p2": 1, "n2": 1, "n3": 1}, bounds=("thm4", "cutset"))
    rows = sweep_rows(spec, FAST)
    a = [{k: v for k, v in r.items() if k != "axis_value"} for r in rows if r["axis_value"] == 1.0]
    b = [{k: v for k, v in r.items() if k != "axis_value"} for r in rows if r["axis_value"] == 50.0]
    assert a == b


def test_sweep_bad_point_becomes_nan_row():
    # n2 in dB at -4000 underflows to zero and is rejected at that point only
    spec = SweepSpec("n2_db", -4000, 0, 2, {"p1": 1, "p2": 1, "q": 1, "n3": 1}, bounds=("cutset",))
    rows = sweep_rows(spec, FAST)
    bad = [r for r in rows if r["axis_value"] == -4000]
    good = [r for r in rows if r["axis_value"] == 0]
    assert math.isnan(bad[0]["value_bits"]) and "n2" in bad[0]["error"]
    assert good[0]["value_bits"] == pytest.approx(0.792481, abs=1e-6)
    text = run_sweep(spec, FAST)
    assert ",nan," in text


def test_ordering_violation_is_flagged(monkeypatch):
    import relaycap.sweep as sw
    from relaycap.gaussian_bounds import BoundResult
    monkeypatch.setitem(sw.BOUNDS, "thm4", lambda ch, cfg: BoundResult("thm4", 99.0))
    spec = SweepSpec("snr_db", 0, 10, 2, FIG_A, bounds=("thm4", "upper"))
    rows = sweep_rows(spec, FAST)
    assert all("violates:thm4<=upper" in r["flag"] for r in rows)


# -- command line ----------------------------------------------------------------

def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_cli_point_json(capsys):
    code, out, _ = run(capsys, "point", "--p1", "1", "--p2", "0", "--q", "1", "--n2", "1",
                       "--n3", "1", "--bounds", "cutset")
    assert code == 0
    assert json.loads(out)["bounds"][0]["value"] == pytest.approx(0.5)


def test_cli_config_and_db_inputs(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"channel": {"p1_db": 0, "p2": 0, "q": 1, "n2": 1, "n3_db": 0},
                               "bounds": ["cutset"], "optimizer": {"grid_points_per_dim": 11}}))
    code, out, _ = run(capsys, "point", "--config", str(cfg))
    assert code == 0 and json.loads(out)["bounds"][0]["value"] == pytest.approx(0.5)


def test_cli_sweep_to_file(capsys, tmp_path):
    out = tmp_path / "s.csv"
    argv = ["sweep", "--p1-db", "10", "--p2-db", "5", "--q-db", "30", "--n3-db", "10",
            "--lo", "-10", "--hi", "30", "--points", "3", "--bounds", "thm4,cutset",
            "--grid", "41", "--out", str(out)]
    assert run(capsys, *argv)[0] == 0
    first = out.read_bytes()
    assert run(capsys, *argv)[0] == 0
    assert out.read_bytes() == first
    assert len(read_sweep_csv(first.decode())) == 6


def test_cli_exit_codes(capsys, tmp_path):
    assert run(capsys, "point", "--p1", "-1", "--p2", "1", "--q", "1", "--n2", "1", "--n3", "1")[0] == 2
    assert run(capsys, "point", "--p1", "1", "--p2", "1", "--q", "1", "--n2", "1", "--n3", "1",
               "--bounds", "")[0] == 2
    assert run(capsys, "sweep", "--p1", "1", "--lo", "0", "--hi", "1", "--points", "3")[0] == 2
    assert run(capsys, "dm", "eval", "--theorem", "1", "--input", str(tmp_path / "missing.json"))[0] == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(capsys, "validate", "--target", "thm4", "--params", str(bad))[0] == 2
    with pytest.raises(SystemExit) as e:
        main(["point", "--grid", "x"])
    assert e.value.code == 2


def test_cli_evaluator_failure_exit_code(capsys, monkeypatch):
    import relaycap.sweep as sw
    from relaycap.core import ConsistencyError

    def boom(ch, cfg):
        raise ConsistencyError("negative rate")
    monkeypatch.setitem(sw.BOUNDS, "thm4", boom)
    code, _, err = run(capsys, "point", "--p1", "1", "--p2", "1", "--q", "1", "--n2", "1",
                       "--n3", "1", "--bounds", "thm4")
    assert code == 3 and "thm4" in err


def test_cli_dm_eval(capsys):
    code, out, _ = run(capsys, "dm", "eval", "--theorem", "2",
                       "--input", str(FIXTURES / "thm2_noiseless_binary.json"))
    assert code == 0 and json.loads(out)["rate"] == pytest.approx(1.0)
    assert run(capsys, "dm", "eval", "--theorem", "1",
               "--input", str(FIXTURES / "thm2_noiseless_binary.json"))[0] == 2


def test_cli_dm_search_matches_golden(tmp_path, capsys):
    out = tmp_path / "g.json"
    code, _, _ = run(capsys, "dm", "search", "--theorem", "2",
                     "--channel", str(FIXTURES / "channel_bsc_pair.json"),
                     "--sizes", "U=2,UR=2,X=1", "--restarts", "3", "--seed", "0", "--out", str(out))
    assert code == 0
    assert out.read_bytes() == (GOLDEN / "search_thm2_seed0.json").read_bytes()


def test_cli_validate_targets(capsys, tmp_path):
    prm = tmp_path / "p.json"
    prm.write_text(json.dumps({"p1": 1, "p2": 1, "q": 1, "n2": 1, "n3": 1, "beta": 1, "gamma": 0.5}))
    for target in ("thm4", "thm5"):
        code, out, _ = run(capsys, "validate", "--target", target, "--params", str(prm))
        assert code == 0 and json.loads(out)["max_abs_diff"] < 1e-9
    code, out, _ = run(capsys, "validate", "--target", "sampling", "--params", str(prm),
                       "--samples", "20000", "--seed", "3")
    assert code == 0 and json.loads(out)["seed"] == 3
    prm.write_text(json.dumps({"cov": np.eye(3).tolist()}))
    code, out, _ = run(capsys, "validate", "--target", "sampling", "--params", str(prm),
                       "--samples", "1000000")
    assert code == 0 and json.loads(out)["max_abs_deviation"] < 5e-3
