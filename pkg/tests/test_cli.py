import json
import subprocess
import sys

import numpy as np
import pytest

from sdfgen.cli import main
from sdfgen.grid import read_sdf, read_sidecar, write_sdf
from sdfgen.mesh import load_mesh, save_mesh
from sdfgen.sdf import build_tree, unsigned_distance
from sdfgen.surface import IsoSurfaceConfig, extract_surface


def run(capsys, *args):
    code = main([str(a) for a in args])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(scope="module")
def chair_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("chairs")
    assert main(["synth", str(d), "--count", "4", "--res", "16", "--seed", "1"]) == 0
    return d


def test_convert_writes_grid_and_sidecar(capsys, tmp_path, chair_dir):
    code, out, _ = run(capsys, "convert", chair_dir / "chairs_0000.obj", tmp_path / "c.sdf", "--res", 16)
    assert code == 0 and json.loads(out)["dims"] == [16, 16, 16]
    side = read_sidecar(tmp_path / "c.sdf")
    assert side["resolution"] == 16 and "normalization" in side and side["dropped_triangles"] == 0
    # the OBJ text carries 9 significant digits, so values agree to float32 rounding only
    np.testing.assert_allclose(read_sdf(tmp_path / "c.sdf").values, read_sdf(chair_dir / "chairs_0000.sdf").values,
                               rtol=0, atol=1e-6)


def test_convert_is_byte_deterministic(capsys, tmp_path, chair_dir):
    for name in ("a", "b"):
        assert run(capsys, "convert", chair_dir / "chairs_0001.obj", tmp_path / f"{name}.sdf", "--res", 24)[0] == 0
    assert (tmp_path / "a.sdf").read_bytes() == (tmp_path / "b.sdf").read_bytes()


def test_split_bands_sum_back(capsys, tmp_path, icosphere_grid):
    write_sdf(icosphere_grid, tmp_path / "s.sdf")
    code, _, _ = run(capsys, "split", tmp_path / "s.sdf", "--cutoff", 8, tmp_path / "lf.sdf", tmp_path / "hf.sdf")
    assert code == 0
    orig = read_sdf(tmp_path / "s.sdf").values
    lo, hi = read_sdf(tmp_path / "lf.sdf"), read_sdf(tmp_path / "hf.sdf")
    err = np.abs(lo.values + hi.values - orig)
    # float32 storage: exact wherever the f32 difference is representable, half an ulp of the high band elsewhere
    assert np.mean(err == 0) > 0.9
    assert np.all(err <= 2.0 ** -24 * np.abs(hi.values))
    assert read_sidecar(tmp_path / "hf.sdf")["band"] == "high" and read_sidecar(tmp_path / "lf.sdf")["cutoff"] == 8


def test_verify_icosphere(capsys, tmp_path, icosphere_grid):
    write_sdf(icosphere_grid, tmp_path / "s.sdf")
    code, out, _ = run(capsys, "verify", tmp_path / "s.sdf")
    rep = json.loads(out)
    assert code == 0
    assert rep["eikonal"]["median"] < 0.05
    assert rep["lipschitz"]["violations"] == 0
    assert rep["format"] == {"canonical_origin": True, "canonical_spacing": True, "positive_inside": True}


def test_convert_extract_hausdorff(capsys, tmp_path, icosphere_mesh, icosphere_grid):
    write_sdf(icosphere_grid, tmp_path / "s.sdf")
    assert run(capsys, "extract", tmp_path / "s.sdf", tmp_path / "s.obj", "--smooth", 0)[0] == 0
    out = load_mesh(tmp_path / "s.obj")
    h = icosphere_grid.spacing
    d1 = unsigned_distance(build_tree(icosphere_mesh), icosphere_mesh, out.vertices).max()
    d2 = unsigned_distance(build_tree(out), out, icosphere_mesh.vertices).max()
    assert max(d1, d2) < 2 * h


def test_extract_matches_library(capsys, tmp_path, chair_dir):
    assert run(capsys, "extract", chair_dir / "chairs_0000.sdf", tmp_path / "x.obj")[0] == 0
    lib = extract_surface(read_sdf(chair_dir / "chairs_0000.sdf"), IsoSurfaceConfig())
    save_mesh(lib, tmp_path / "y.obj")
    assert (tmp_path / "x.obj").read_bytes() == (tmp_path / "y.obj").read_bytes()


def test_train_generate_interpolate(capsys, tmp_path, chair_dir):
    for kind in ("lfg", "hfg"):
        for rep in ("a", "b"):
            code, _, err = run(capsys, f"train-{kind}", chair_dir, "--out", tmp_path / f"{kind}_{rep}.ckpt",
                               "--log", tmp_path / f"{kind}_{rep}.jsonl", "--steps", 3, "--batch", 2, "--seed", 5)
            assert code == 0, err
        assert (tmp_path / f"{kind}_a.ckpt").read_bytes() == (tmp_path / f"{kind}_b.ckpt").read_bytes()
        assert len((tmp_path / f"{kind}_a.jsonl").read_text().splitlines()) == 3
    ck = ["--lfg", tmp_path / "lfg_a.ckpt", "--hfg", tmp_path / "hfg_a.ckpt"]
    for rep in ("a", "b"):
        code, out, err = run(capsys, "generate", *ck, "--seed", 3, "--out-sdf", tmp_path / f"g_{rep}.sdf",
                             "--out-obj", tmp_path / f"g_{rep}.obj")
        assert code == 0, err
    assert (tmp_path / "g_a.sdf").read_bytes() == (tmp_path / "g_b.sdf").read_bytes()
    assert (tmp_path / "g_a.obj").read_bytes() == (tmp_path / "g_b.obj").read_bytes()
    v = read_sdf(tmp_path / "g_a.sdf").values
    assert np.array_equal(v, np.flip(v, axis=0))  # symmetry defaults to x
    code, out, _ = run(capsys, "interpolate", *ck, "--seed-a", 1, "--seed-b", 2, "--out-dir", tmp_path / "i")
    assert code == 0 and json.loads(out)["frames"] == 9
    assert len(list((tmp_path / "i").glob("frame_*.sdf"))) == 9
    code, _, err = run(capsys, "generate", *ck, "--cutoff", 3, "--out-sdf", tmp_path / "bad.sdf")
    assert code != 0 and json.loads(err)["error"] == "CompatibilityError"


def test_errors_are_json_on_stderr(capsys, tmp_path):
    code, out, err = run(capsys, "convert", tmp_path / "missing.obj", tmp_path / "x.sdf")
    assert code != 0 and out == "" and "missing.obj" in json.loads(err)["message"]
    code, _, err = run(capsys, "split", "--bogus")
    assert code == 2 and json.loads(err)["error"] == "usage"
    (tmp_path / "bad.sdf").write_bytes(b"nope")
    code, _, err = run(capsys, "verify", tmp_path / "bad.sdf")
    assert code == 1 and json.loads(err)["error"] == "GridFormatError"


def test_module_entry_point(tmp_path):
    p = subprocess.run([sys.executable, "-m", "sdfgen", "verify", str(tmp_path / "none.sdf")],
                       capture_output=True, text=True)
    assert p.returncode != 0 and "error" in json.loads(p.stderr)
