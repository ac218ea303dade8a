import json
import subprocess
import sys

import numpy as np
import pytest

from groundsight import __version__
from groundsight.cli import main
from groundsight.config import PipelineConfig
from groundsight.errors import ConfigError
from groundsight.io import read_pgm, read_ply, write_pgm, write_ply, write_ppm
from groundsight.scenes import SceneSpec, run_benchmark

SMALL = ["--set", "scene.density=800", "--set", "scene.max_points=40000"]


def test_config_roundtrip(tmp_path):
    cfg = PipelineConfig().with_overrides(["voxel.cell_x=0.05", "scene.box_heights=[0.1, 0.2]", "mosts.dtype=float32"])
    p = tmp_path / "c.json"
    p.write_text(cfg.to_json())
    back = PipelineConfig.load(p)
    assert back == cfg
    assert back.to_json() == cfg.to_json()
    assert back.voxel.cell_x == 0.05 and back.scene.box_heights == (0.1, 0.2)


@pytest.mark.parametrize("data", [
    {"nope": {}},
    {"voxel": {"cell_w": 1}},
    {"voxel": {"cell_x": -1}},
    {"voxel": 3},
    [],
])
def test_config_rejects_bad_input(data):
    with pytest.raises(ConfigError):
        PipelineConfig.from_dict(data)


@pytest.mark.parametrize("item", ["voxel", "voxel.cell_x", "nope.x=1", "voxel.nope=1"])
def test_bad_overrides(item):
    with pytest.raises(ConfigError):
        PipelineConfig().with_overrides([item])


def test_partial_config_uses_defaults():
    cfg = PipelineConfig.from_dict({"ransac": {"max_iterations": 3}})
    assert cfg.ransac.max_iterations == 3
    assert cfg.voxel == PipelineConfig().voxel
    assert cfg.segmentation_config().ransac.max_iterations == 3


def test_version(capsys):
    assert main(["--version"]) == 0
    assert __version__ in capsys.readouterr().out


def test_exit_codes(tmp_path, capsys):
    assert main([]) == 2
    assert main(["segment"]) == 2
    assert main(["segment", "--in", "x.ply", "--set", "bogus"]) == 2
    assert main(["--threads", "0", "grad-check", "--instances", "1"]) == 2
    assert main(["segment", "--in", str(tmp_path / "missing.ply")]) == 3
    (tmp_path / "bad.ply").write_text("not a ply")
    assert main(["segment", "--in", str(tmp_path / "bad.ply")]) == 3
    write_ply(tmp_path / "line.ply", np.column_stack([np.arange(10.0), np.zeros(10), np.full(10, 2.0)]))
    assert main(["segment", "--in", str(tmp_path / "line.ply"), "--out-dir", str(tmp_path)]) == 4
    err = capsys.readouterr().err
    assert err.count("groundsight: error:") >= 7
    assert "groundsight: groundsight" not in err


def test_segment_floor(tmp_path, capsys):
    g = np.linspace(-1, 1, 60)
    x, z = np.meshgrid(g, g + 2)
    pts = np.column_stack([x.ravel(), np.full(x.size, -0.7), z.ravel()])
    write_ply(tmp_path / "f.ply", pts)
    assert main(["segment", "--in", str(tmp_path / "f.ply"), "--out-dir", str(tmp_path / "o")]) == 0
    out = tmp_path / "o"
    cloud, labels = read_ply(out / "f_labeled.ply", with_labels=True)
    assert len(cloud) == len(pts) and np.all(labels == 0)
    plane = json.loads((out / "f_plane.json").read_text())
    np.testing.assert_allclose(plane["normal"], [0, 1, 0], atol=1e-6)
    assert plane["d"] == pytest.approx(0.7, abs=1e-6)  # PLY stores float32
    assert read_pgm(out / "f_occupancy.pgm").shape == (200, 200)
    assert json.loads(capsys.readouterr().out)["ground"] == len(pts)


def test_synth_then_segment(tmp_path):
    ply = tmp_path / "s.ply"
    assert main(["synth", "--seed", "3", "--out", str(ply), *SMALL]) == 0
    meta = json.loads(ply.with_suffix(".json").read_text())
    args = ["segment", "--in", str(ply), "--out-dir", str(tmp_path), "--pitch", str(meta["pitch"]),
            "--roll", str(meta["roll"])]
    assert main(args) == 0
    plane = json.loads((tmp_path / "s_plane.json").read_text())
    assert plane["d"] == pytest.approx(0.7, abs=0.01)


def test_mask_and_traverse(tmp_path):
    plane = tmp_path / "p.json"
    plane.write_text(json.dumps({"normal": [0, 1, 0], "d": 0.7}))
    depth = np.zeros((480, 640), np.uint16)
    depth[300:] = 1500
    write_pgm(tmp_path / "d.pgm", depth)
    write_ppm(tmp_path / "c.ppm", np.full((480, 640, 3), 200, np.uint8))
    assert main(["mask", "--rgb", str(tmp_path / "c.ppm"), "--depth", str(tmp_path / "d.pgm"),
                 "--plane", str(plane), "--out", str(tmp_path / "m.ppm")]) == 0
    m = np.zeros((480, 640), np.uint8)
    m[300:] = 255
    write_pgm(tmp_path / "mask.pgm", m)
    assert main(["traverse", "--mask", str(tmp_path / "mask.pgm"), "--plane", str(plane),
                 "--out", str(tmp_path / "t.pgm")]) == 0
    t = read_pgm(tmp_path / "t.pgm")
    assert (t == 255).any()
    (tmp_path / "bad.json").write_text("{}")
    assert main(["traverse", "--mask", str(tmp_path / "mask.pgm"), "--plane", str(tmp_path / "bad.json"),
                 "--out", str(tmp_path / "t.pgm")]) == 3


def _bank(path):
    rng = np.random.default_rng(0)
    for c in "abcd":
        (path / c).mkdir(parents=True)
        write_ppm(path / c / "0.ppm", rng.integers(0, 256, (64, 64, 3), dtype=np.uint8))


def test_collage_byte_identical(tmp_path):
    _bank(tmp_path / "bank")
    for run in ("a", "b"):
        assert main(["collage", "--bank", str(tmp_path / "bank"), "--seed", "5", "--count", "3",
                     "--out", str(tmp_path / run)]) == 0
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert len(names) == 10
    for n in names:
        assert (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes()
    assert main(["collage", "--bank", str(tmp_path / "bank"), "--k", "9", "--out", str(tmp_path / "c")]) == 4


def strip_timings(obj):
    if isinstance(obj, dict):
        return {k: strip_timings(v) for k, v in obj.items() if k not in ("timings_ms", "total_ms")}
    if isinstance(obj, list):
        return [strip_timings(v) for v in obj]
    return obj


def test_bench_deterministic_and_matches_library(tmp_path):
    outs = []
    for run in ("a", "b"):
        p = tmp_path / f"{run}.json"
        assert main(["bench", "--count", "2", "--first-seed", "4", "--out", str(p), *SMALL]) == 0
        outs.append(strip_timings(json.loads(p.read_text())))
    assert outs[0] == outs[1]
    lib = run_benchmark([SceneSpec(seed=s, density=800, max_points=40000) for s in (4, 5)])
    assert strip_timings(json.loads(json.dumps(lib))) == outs[0]


def test_mosts_demo_and_grad_check(tmp_path, capsys):
    rng = np.random.default_rng(1)
    for n in ("q", "r"):
        write_ppm(tmp_path / f"{n}.ppm", rng.integers(0, 256, (64, 64, 3), dtype=np.uint8))
    assert main(["mosts-demo", "--query", str(tmp_path / "q.ppm"), "--reference", str(tmp_path / "r.ppm"),
                 "--out", str(tmp_path / "p.pgm")]) == 0
    assert read_pgm(tmp_path / "p.pgm").shape == (64, 64)
    assert main(["grad-check", "--instances", "5"]) == 0
    assert "ok" in capsys.readouterr().out
    assert main(["grad-check", "--instances", "2", "--tolerance", "1e-30"]) == 4


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "groundsight", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and __version__ in r.stdout
