import io
import json
from pathlib import Path

import pytest

from uasw.bench import STAGES
from uasw.cli import main

DATA = Path(__file__).parent / "data"


def run(*argv):
    out = io.StringIO()
    code = main([str(a) for a in argv], out)
    return code, [json.loads(l) for l in out.getvalue().splitlines() if l.startswith("{")], out.getvalue()


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert run("sim", "--scenario", DATA / "walk.scn", "--out", d / "walk.uaswcir", "--seed", 1)[0] == 0
    assert run("sim", "--scenario", DATA / "empty.scn", "--out", d / "empty.uaswcir", "--seed", 1)[0] == 0
    assert run("corpus", "--out", d / "corpus", "--per-combination", 8, "--seed", 0)[0] == 0
    code, recs, _ = run("train", "--corpus", d / "corpus", "--out", d / "model.bin", "--epochs", 30)
    assert code == 0 and set(recs[0]) >= {"material", "surface", "movement"}
    (d / "events.csv").write_text("0,walking_started\n0,screen_on\n2500,screen_off\n3000,assist_requested\n")
    return d


def test_sim_writes_every_cir(workdir):
    text = (workdir / "walk.uaswcir").read_text().splitlines()
    assert text[0].startswith("#UASWCIR v1") and len(text) == 1 + 4000 // 5


def test_calibrate(workdir):
    code, recs, _ = run("calibrate", "--log", workdir / "empty.uaswcir")
    assert code == 0 and recs[0]["b0_index"] == 3


def test_empty_scene_has_no_detections(workdir):
    code, recs, _ = run("detect", "--log", workdir / "empty.uaswcir")
    assert code == 0 and len(recs) > 0
    assert not any(r["detected"] for r in recs)


def test_walk_scene_detects(workdir):
    _, recs, _ = run("detect", "--log", workdir / "walk.uaswcir", "--only-detections")
    assert recs and all(r["detected"] for r in recs)
    assert all(1500 <= r["timestamp_ms"] for r in recs)


def test_classify_outputs_labels(workdir):
    code, recs, _ = run("classify", "--log", workdir / "walk.uaswcir", "--model", workdir / "model.bin", "--ensemble")
    assert code == 0 and recs
    assert all(r["material"] in ("glass", "concrete", "wood", "human") for r in recs)


def test_replay_is_deterministic(workdir, capsys):
    argv = ("replay", "--log", workdir / "walk.uaswcir", "--events", workdir / "events.csv", "--model", workdir / "model.bin")
    a = run(*argv)[2]
    b = run(*argv)[2]
    assert a == b and a
    assert "average current" in capsys.readouterr().err


def test_bench_table(workdir):
    code, _, text = run("bench", "--log", workdir / "walk.uaswcir", "--model", workdir / "model.bin", "--iters", 30)
    assert code == 0
    for name in STAGES + ("Total",):
        assert name in text


def test_usage_error_exit_1():
    assert main(["detect"], io.StringIO()) == 1
    assert main(["frobnicate"], io.StringIO()) == 1


def test_runtime_error_exit_2(tmp_path):
    bad = tmp_path / "bad.uaswcir"
    bad.write_text("garbage\n")
    assert main(["detect", "--log", str(bad)], io.StringIO()) == 2
    assert main(["detect", "--log", str(tmp_path / "missing")], io.StringIO()) == 2
