import hashlib
import json

import numpy as np
import pytest

from stackselect import io
from stackselect.cli import main, parse_ranks
from stackselect.errors import InvalidParameter
from stackselect.motion import acquire_stack
from stackselect.volume import make_phantom


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(scope="module")
def files(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["phantom", "--size", "32", "--seed", "0", "-o", str(d / "p.svl"), "--mask-out", str(d / "pm.svl")]) == 0
    common = ["-i", d / "p.svl", "--mask", d / "pm.svl"]
    for name, extra in {
        "clean": ["--mode", "linear"],
        "moved": ["--mode", "linear", "--rot-step", 5, "--trans-step", 1],
        "rand": ["--mode", "random", "--seed", 42],
    }.items():
        argv = ["simulate", *common, *extra, "-o", d / f"{name}.svl", "--mask-out", d / f"{name}m.svl",
                "--traj-out", d / f"{name}.json"]
        assert main([str(a) for a in argv]) == 0
    return d


def _sha(p):
    return hashlib.sha256(p.read_bytes()).hexdigest()


def test_phantom_files_valid_and_repeatable(files, tmp_path):
    assert main(["phantom", "--size", "32", "--seed", "0", "-o", str(tmp_path / "q.svl"),
                 "--mask-out", str(tmp_path / "qm.svl")]) == 0
    assert _sha(tmp_path / "q.svl") == _sha(files / "p.svl")
    assert _sha(tmp_path / "qm.svl") == _sha(files / "pm.svl")
    assert io.read_native(files / "p.svl").dims == (32, 32, 32)


def test_phantom_size_limit(capsys, tmp_path):
    code, _, err = run(capsys, "phantom", "--size", 8, "-o", tmp_path / "x.svl")
    assert code == 2 and "size must be ≥ 32" in err


def test_simulate_zero_step_equals_plain_acquisition(files):
    v, m = io.read_native(files / "p.svl"), io.read_native(files / "pm.svl")
    s, _ = acquire_stack(v, m, "axial", 2.0)
    clean = io.read_native(files / "clean.svl")
    np.testing.assert_array_equal(clean.data, s.data.astype(np.float32))


def test_simulate_linear_trajectory_file(files):
    doc = json.loads((files / "moved.json").read_text())
    assert doc["slices"][3]["rot_deg"] == [15.0, 15.0, 15.0]
    assert doc["slices"][3]["trans_mm"] == [3.0, 3.0, 3.0]


def test_simulate_random_repeatable(files, tmp_path):
    argv = ["simulate", "-i", files / "p.svl", "--mask", files / "pm.svl", "--mode", "random", "--seed", 42,
            "-o", tmp_path / "r.svl", "--traj-out", tmp_path / "r.json"]
    assert main([str(a) for a in argv]) == 0
    assert (tmp_path / "r.json").read_bytes() == (files / "rand.json").read_bytes()


def test_simulate_shape_mismatch(files, capsys, tmp_path):
    io.write_native(tmp_path / "small.svl", make_phantom(32, 0)[1].__class__(np.ones((4, 4, 4), bool)))
    code, _, _ = run(capsys, "simulate", "-i", files / "p.svl", "--mask", tmp_path / "small.svl",
                     "-o", tmp_path / "o.svl", "--traj-out", tmp_path / "o.json")
    assert code == 3


def test_assess_reports(files, capsys):
    code, out, _ = run(capsys, "assess", "-i", files / "clean.svl", "--mask", files / "cleanm.svl",
                       "--method", "svd-rss", "--rank", 5, "--json")
    assert code == 0
    rep = json.loads(out)
    assert rep["rank_used"] == 5 and rep["method"] == "SvdRss" and rep["stack_id"] == "clean"


def test_assess_motion_raises_cp(files, capsys):
    mis = []
    for name in ("clean", "moved"):
        code, out, _ = run(capsys, "assess", "-i", files / f"{name}.svl", "--mask", files / f"{name}m.svl",
                           "--method", "cp", "--rank", 10)
        assert code == 0
        mis.append(json.loads(out)["mi"])
    assert mis[1] > mis[0]


def test_assess_deterministic_bytes(files, capsys):
    argv = ["assess", "-i", files / "rand.svl", "--mask", files / "randm.svl", "--method", "cp",
            "--rank", 5, "--no-timing"]
    first = run(capsys, *argv)[1]
    assert run(capsys, *argv)[1] == first


def test_assess_empty_mask(files, capsys, tmp_path):
    from stackselect.volume import Mask

    io.write_native(tmp_path / "e.svl", Mask(np.zeros((32, 32, 16), bool)))
    code, _, err = run(capsys, "assess", "-i", files / "clean.svl", "--mask", tmp_path / "e.svl")
    assert code == 3 and "EmptyMask" in err


def test_assess_degenerate_tensor(capsys, tmp_path):
    from stackselect.volume import Mask, Volume

    io.write_native(tmp_path / "z.svl", Volume(np.zeros((4, 4, 4))))
    io.write_native(tmp_path / "zm.svl", Mask.full((4, 4, 4)))
    code, _, err = run(capsys, "assess", "-i", tmp_path / "z.svl", "--mask", tmp_path / "zm.svl", "--rank", 2)
    assert code == 4 and "DegenerateTensor" in err


def test_select_picks_clean_stack(files, capsys):
    code, out, _ = run(capsys, "select", files / "moved.svl", files / "movedm.svl", files / "clean.svl",
                       files / "cleanm.svl", files / "rand.svl", files / "randm.svl", "--method", "cp",
                       "--rank", 10, "--json")
    assert code == 0
    doc = json.loads(out)
    assert doc["winner"] == "clean" and len(doc["items"]) == 3


def test_select_tie_break(files, capsys):
    code, out, _ = run(capsys, "select", files / "clean.svl", files / "cleanm.svl", files / "clean.svl",
                       files / "cleanm.svl", "--method", "svd-rss")
    assert code == 0 and out.splitlines()[0] == "clean"


def test_select_errors(files, capsys):
    code, _, _ = run(capsys, "select", files / "clean.svl", files / "cleanm.svl")
    assert code == 2
    code, _, err = run(capsys, "select", files / "clean.svl", files / "nope.svl", files / "moved.svl",
                       files / "movedm.svl")
    assert code == 3 and "nope.svl" in err


def test_rank_sweep_csv(files, capsys):
    code, out, _ = run(capsys, "rank-sweep", "-i", files / "p.svl", "--mask", files / "pm.svl",
                       "--ranks", "5..5", "--csv")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "rank,rmi,elapsed_ms" and len(lines) == 2 and lines[1].startswith("5,")


def test_rank_sweep_rss_rank_limit(files, capsys):
    code, _, _ = run(capsys, "rank-sweep", "-i", files / "p.svl", "--mask", files / "pm.svl",
                     "--method", "svd-rss", "--ranks", "40..41", "--csv")
    assert code == 2


def test_parse_ranks():
    assert parse_ranks("1..4") == [1, 2, 3, 4]
    assert parse_ranks("2,5") == [2, 5]
    with pytest.raises(InvalidParameter):
        parse_ranks("0..2")


def test_trial_suite_schema_and_repeatability(capsys, tmp_path):
    argv = ["trial-suite", "--trials", 2, "--seed", 7, "--size", 32, "--method", "all", "--no-timing"]
    code, first, _ = run(capsys, *argv, "-o", tmp_path / "a.json")
    assert code == 0
    assert set(json.loads(first)["success_rate"]) == {"CP", "SvdRss", "SvdFs"}
    run(capsys, *argv, "-o", tmp_path / "b.json")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    doc = json.loads((tmp_path / "a.json").read_text())
    assert doc["schema"] == "report_v1" and len(doc["items"]) == 3


def test_evaluate(files, capsys, tmp_path):
    p = files / "p.svl"
    code, out, _ = run(capsys, "evaluate", "--metric", "ssim", p, p, "--json")
    assert code == 0 and json.loads(out)["value"] == pytest.approx(1.0)
    code, out, _ = run(capsys, "evaluate", "--metric", "nrmse", p, p)
    assert float(out) == 0.0
    v = io.read_native(p)
    noise = np.float32(np.random.default_rng(0).normal(size=v.dims))
    noisy = v.with_data(np.float32(v.data + noise).astype(np.float64))
    io.write_native(tmp_path / "n.svl", noisy)
    code, out, _ = run(capsys, "evaluate", "--metric", "nrmse", tmp_path / "n.svl", p, "--json")
    expect = np.linalg.norm(noisy.data - v.data) / np.linalg.norm(v.data)
    assert json.loads(out)["value"] == pytest.approx(expect, rel=1e-8)
    code, _, _ = run(capsys, "evaluate", "--metric", "dssim", p, p, "-o", tmp_path / "d.svl")
    assert code == 0 and np.all(io.read_native(tmp_path / "d.svl").data == 0)


def test_evaluate_dim_mismatch(files, capsys):
    code, _, _ = run(capsys, "evaluate", "--metric", "ssim", files / "p.svl", files / "clean.svl")
    assert code == 3


@pytest.mark.parametrize("sub", ["phantom", "simulate", "assess", "select", "rank-sweep", "trial-suite", "evaluate"])
def test_help(capsys, sub):
    code, out, _ = run(capsys, sub, "--help")
    assert code == 0 and "usage" in out


def test_usage_errors(capsys):
    assert run(capsys)[0] == 2
    assert run(capsys, "assess", "--method", "tucker")[0] == 2


def test_module_entry_point(files):
    import subprocess
    import sys

    r = subprocess.run([sys.executable, "-m", "stackselect", "phantom", "--size", "8", "-o", str(files / "x.svl")],
                       capture_output=True, text=True)
    assert r.returncode == 2
