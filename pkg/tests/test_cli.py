import csv
import json
import statistics

import pytest

from oto import cli
from oto.clouds import crafted_suite, format_cloud
from oto.planner import ExplorationMetrics


def _run(tmp_path, *extra, name="out"):
    out = tmp_path / name
    code = cli.main(["run", "--scene", "trivial_room", "--out", str(out), *extra])
    return code, out


def test_run_trivial_room(tmp_path):
    code, out = _run(tmp_path)
    assert code == 0
    m = json.loads((out / "metrics.json").read_text())
    assert m["final_coverage"] == 1.0
    assert ExplorationMetrics.from_dict(m).to_dict(timing=False) == m
    assert (out / "trajectory.csv").read_text().splitlines()[0] == "t,x,y"
    pgm = (out / "map.pgm").read_text().splitlines()
    assert pgm[:3] == ["P2", "7 7", "2"]
    assert "frontier" in json.loads((out / "timing.json").read_text())


def test_run_accepts_a_scene_path(tmp_path):
    path = tmp_path / "room.txt"
    path.write_text("resolution 1\n#####\n#.S.#\n#####\n")
    assert cli.main(["run", "--scene", str(path), "--out", str(tmp_path / "o"), "--planner", "greedy"]) == 0


def test_bad_flags_exit_1(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["run", "--scene", "trivial_room", "--planner", "nope", "--out", str(tmp_path)])
    assert exc.value.code == 1
    assert cli.main(["run", "--scene", str(tmp_path / "missing.txt"), "--out", str(tmp_path / "o")]) == 1
    assert "scene not found" in capsys.readouterr().err
    assert cli.main(["run", "--scene", "trivial_room", "--out", str(tmp_path / "o"), "--max-speed", "-1"]) == 1
    bad = tmp_path / "bad.txt"
    bad.write_text("resolution 1\n###\n#S\n###\n")
    assert cli.main(["run", "--scene", str(bad), "--out", str(tmp_path / "o")]) == 1
    assert "row 2" in capsys.readouterr().err


def test_cap_exits_2(tmp_path):
    assert cli.main(["run", "--scene", "maze_64", "--out", str(tmp_path / "o"), "--max-steps", "3"]) == 2


def test_seed_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("OTO_SEED", "17")
    _, out = _run(tmp_path)
    assert json.loads((out / "metrics.json").read_text())["seed"] == 17
    _, out = _run(tmp_path, "--seed", "4", name="b")
    assert json.loads((out / "metrics.json").read_text())["seed"] == 4


def test_overrides_reach_the_config(tmp_path):
    code, out = _run(tmp_path, "--cube", "10", "10", "3", "--shadow-full-scan", "true", "--w-r", "0.5")
    assert code == 0
    assert json.loads((out / "metrics.json").read_text())["frontier_shadow_workload"] == [49]


def test_same_flags_same_bytes(tmp_path):
    args = ["run", "--scene", "enclosed_maze_1", "--seed", "2"]
    assert cli.main([*args, "--out", str(tmp_path / "a")]) == 0
    assert cli.main([*args, "--out", str(tmp_path / "b")]) == 0
    for name in ("metrics.json", "trajectory.csv", "map.pgm"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_bench_rows_aggregate_per_run_files(tmp_path):
    out = tmp_path / "bench.csv"
    runs = tmp_path / "runs"
    code = cli.main(["bench", "--scenes", "maze_64", "--planners", "oto", "greedy", "--seeds", "0", "1", "2",
                     "--out", str(out), "--runs-dir", str(runs)])
    assert code == 0
    rows = list(csv.DictReader(out.open()))
    assert [(r["scene"], r["planner"], r["runs"]) for r in rows] == [("maze_64", "oto", "3"), ("maze_64", "greedy", "3")]
    for r in rows:
        dist = [json.loads((runs / f"maze_64__{r['planner']}__{s}.json").read_text())["distance"] for s in range(3)]
        assert float(r["distance_mean"]) == pytest.approx(statistics.fmean(dist), abs=1e-6)
        assert float(r["distance_max"]) == pytest.approx(max(dist), abs=1e-6)
        assert float(r["full_scan_workload_mean"]) == 64 * 64
        assert float(r["workload_mean"]) < 64 * 64
        assert float(r["frontier_wall_ms"]) > 0


def test_bench_is_deterministic_and_parallel_safe(tmp_path):
    base = ["bench", "--scenes", "trivial_room", "maze_64", "--planners", "greedy", "oto",
            "--seeds", "0", "1", "--no-timing", "--max-steps", "40"]
    assert cli.main([*base, "--out", str(tmp_path / "a.csv")]) in (0, 2)
    cli.main([*base, "--out", str(tmp_path / "b.csv"), "--jobs", "2"])
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_bench_marks_failures(tmp_path):
    out = tmp_path / "bench.csv"
    code = cli.main(["bench", "--scenes", "maze_64", "--planners", "greedy", "--seeds", "0",
                     "--max-steps", "2", "--out", str(out)])
    assert code == 2
    assert next(csv.DictReader(out.open()))["status"] == "failed"


def test_bench_spec_validation():
    with pytest.raises(ValueError):
        cli.BenchSpec(("a",), ("oto",), (1, 1))
    with pytest.raises(ValueError):
        cli.BenchSpec((), ("oto",), (1,))


def test_detect_room_and_corridor(tmp_path, capsys):
    suite = {c.name: c for c in crafted_suite()}
    room = tmp_path / "room.xyz"
    room.write_text(format_cloud(suite["room_1"].cloud))
    assert cli.main(["detect", "--cloud", str(room), "--origin", "0", "0", "1"]) == 0
    out = capsys.readouterr().out
    box = next(line for line in out.splitlines() if line.startswith("box"))
    vals = [float(tok.split("=")[1]) for tok in box.split()[1:]]
    assert vals == pytest.approx([-5, 5, -4, 4], abs=0.3)
    assert out.count("occupied") == 4

    corr = tmp_path / "corridor.xyz"
    corr.write_text(format_cloud(suite["corridor_1"].cloud))
    assert cli.main(["detect", "--cloud", str(corr)]) == 0
    out = capsys.readouterr().out
    assert out.rstrip().endswith("no enclosure")
    assert out.count(" occupied") == 2


def test_detect_empty_and_bad_files(tmp_path, capsys):
    empty = tmp_path / "empty.xyz"
    empty.write_text("")
    assert cli.main(["detect", "--cloud", str(empty)]) == 0
    assert "no enclosure" in capsys.readouterr().out
    bad = tmp_path / "bad.xyz"
    bad.write_text("0 0 0\n# comment\n1 2\n")
    assert cli.main(["detect", "--cloud", str(bad)]) == 1
    assert "line 3" in capsys.readouterr().err


def test_craft_writes_the_suite(tmp_path):
    assert cli.main(["craft", "--out", str(tmp_path)]) == 0
    assert len(list(tmp_path.glob("*.xyz"))) == 12
