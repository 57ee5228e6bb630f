"""Smoke tests for the Python module and the command-line front end."""

import json
import math
import os
import subprocess

import pytest

sr = pytest.importorskip("_surfrec")


def small_config(depth=5):
    cfg = sr.PipelineConfig()
    cfg.depth = depth
    cfg.workers = 2
    return cfg


def test_gen_analytic_shapes():
    for shape in ("sphere", "torus", "plane"):
        positions, normals = sr.gen_analytic(shape, count=500, seed=3)
        assert len(positions) == 500
        assert len(normals) == 500
        for n in normals[:20]:
            assert math.isclose(sum(c * c for c in n), 1.0, rel_tol=1e-9)
    with pytest.raises(ValueError):
        sr.gen_analytic("cube", count=10)


def test_baseline_reconstruction_recovers_the_sphere():
    positions, normals = sr.gen_analytic("sphere", count=8000, seed=1)
    result = sr.reconstruct(positions, normals, small_config())
    assert len(result["triangles"]) > 0
    assert len(result["labels"]) == result["grid_vertices"]
    center = (0.5, 0.5, 0.5)
    radii = [
        math.dist(v, center) for v in result["vertices"][:: max(1, len(result["vertices"]) // 200)]
    ]
    assert all(abs(r - 0.3) < 0.06 for r in radii)


def test_partitioning_does_not_change_labels():
    positions, normals = sr.gen_analytic("sphere", count=8000, seed=2)
    whole = sr.reconstruct(positions, normals, small_config())
    cfg = small_config()
    cfg.force_parts = 4
    split = sr.reconstruct(positions, normals, cfg)
    assert split["parts"] >= 4
    assert split["labels"] == whole["labels"]
    assert split["vertices"] == whole["vertices"]


def test_config_hash_ignores_execution_knobs(tmp_path):
    cfg = sr.PipelineConfig()
    h = sr.config_hash(cfg)
    cfg.workers = 7
    cfg.force_parts = 8
    assert sr.config_hash(cfg) == h
    cfg.depth = 9
    assert sr.config_hash(cfg) != h

    path = tmp_path / "a.cfg"
    path.write_text("[octree]\ndepth = 7\n")
    loaded = sr.load_config(str(path))
    assert loaded.depth == 7
    bad = tmp_path / "b.cfg"
    bad.write_text("[octree]\nwibble = 1\n")
    with pytest.raises(RuntimeError):
        sr.load_config(str(bad))


def test_cloud_and_mesh_roundtrip(tmp_path):
    positions, normals = sr.gen_analytic("sphere", count=200, seed=9)
    cloud_path = tmp_path / "cloud.ply"
    sr.save_point_cloud(positions, normals, str(cloud_path))
    p2, n2 = sr.load_point_cloud(str(cloud_path))
    assert p2 == positions
    # the loader re-unitizes normals, which can perturb the last ulp
    assert all(
        math.isclose(a, b, rel_tol=0, abs_tol=1e-14)
        for got, want in zip(n2, normals)
        for a, b in zip(got, want)
    )

    verts = [(0.0, 0.0, 0.0), (1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)]
    tris = [(0, 2, 1), (0, 1, 3), (0, 3, 2), (1, 2, 3)]
    mesh_path = tmp_path / "tet.ply"
    sr.save_mesh(verts, tris, str(mesh_path))
    v2, t2 = sr.load_mesh(str(mesh_path))
    assert [tuple(v) for v in v2] == verts
    assert [tuple(t) for t in t2] == tris
    assert sr.chamfer_l1(verts, tris, verts, tris, samples=2000, seed=4) < 0.05


def cli():
    path = os.environ.get("SURFREC_CLI")
    if not path or not os.path.exists(path):
        pytest.skip("SURFREC_CLI not set")
    return path


def test_cli_end_to_end(tmp_path):
    exe = cli()
    cloud = tmp_path / "cloud.ply"
    gt = tmp_path / "gt.ply"
    subprocess.run(
        [exe, "gen-analytic", "--shape", "sphere", "--out-cloud", str(cloud),
         "--out-mesh", str(gt), "--count", "8000", "--seed", "1"],
        check=True,
    )
    mesh = tmp_path / "mesh.ply"
    labels = tmp_path / "labels.srlb"
    subprocess.run(
        [exe, "reconstruct", "--cloud", str(cloud), "--baseline", "--depth",
         "5", "--out", str(mesh), "--labels-out", str(labels)],
        check=True,
    )
    assert mesh.stat().st_size > 0
    assert labels.stat().st_size > 0

    report_path = tmp_path / "report.json"
    out = subprocess.run(
        [exe, "evaluate", "--pred-mesh", str(mesh), "--gt-mesh", str(gt),
         "--out", str(report_path)],
        check=True, capture_output=True, text=True,
    )
    report = json.loads(report_path.read_text())
    assert report["chamfer_l1"] < 0.05
    assert "chamfer_l1" in out.stdout


def test_cli_rejects_bad_usage(tmp_path):
    exe = cli()
    proc = subprocess.run(
        [exe, "reconstruct", "--cloud", "missing.ply", "--out", "x.ply"],
        capture_output=True,
    )
    assert proc.returncode == 2  # neither --baseline nor --checkpoint
