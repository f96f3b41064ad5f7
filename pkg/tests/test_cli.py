import json

import numpy as np
import pytest

from latticemaps.cli import run
from latticemaps.pointcloud import load_point_cloud


def gen(tmp_path, kind, count, *extra, name=None):
    out = tmp_path / (name or f"{kind}.xyz")
    assert run(["gen-test-surface", "--kind", kind, "--count", str(count), "--out", str(out),
                *extra]) == 0
    return out


def test_gen_sphere_unit_norm(tmp_path):
    cloud = load_point_cloud(gen(tmp_path, "sphere", 1000))
    assert len(cloud) == 1000
    np.testing.assert_allclose(np.linalg.norm(cloud.points, axis=1), 1, atol=1e-9)


def test_gen_torus_on_surface(tmp_path):
    cloud = load_point_cloud(gen(tmp_path, "torus", 500, "--R", "2", "--r", "0.5"))
    x, y, z = cloud.points.T
    resid = (np.hypot(x, y) - 2) ** 2 + z ** 2 - 0.25
    assert np.abs(resid).max() <= 1e-9


def test_gen_is_deterministic(tmp_path):
    a = gen(tmp_path, "genus2", 300, "--seed", "4", name="a.xyz").read_text()
    b = gen(tmp_path, "genus2", 300, "--seed", "4", name="b.xyz").read_text()
    c = gen(tmp_path, "genus2", 300, "--seed", "5", name="c.xyz").read_text()
    assert a == b and a != c


def test_gen_slab_is_labeled(tmp_path):
    cloud = load_point_cloud(gen(tmp_path, "slab", 2000), "labeled-xyz")
    assert set(np.unique(cloud.labels)) == {0, 1, 2, 3, 4}


def test_rect_conformal_report(tmp_path):
    src = gen(tmp_path, "slab", 3000, "--width", "1", "--height", "1")
    rep, out = tmp_path / "r.json", tmp_path / "r.xyz"
    code = run(["rect-conformal", "--input", str(src), "--n", "16", "--out", str(out),
                "--report", str(rep)])
    assert code == 0
    data = json.loads(rep.read_text())
    assert data["command"] == "rect-conformal"
    assert data["result"]["a"] == pytest.approx(1.0, abs=0.01)
    assert np.loadtxt(out).shape == (3000, 2)
    # keys are written sorted
    text = rep.read_text()
    assert text.index('"command"') < text.index('"parameters"') < text.index('"result"')


def test_rect_harmonic_fixed_a(tmp_path):
    src = gen(tmp_path, "slab", 3000)
    rep = tmp_path / "h.json"
    assert run(["rect-harmonic", "--input", str(src), "--n", "16", "--a", "2",
                "--report", str(rep)]) == 0
    assert json.loads(rep.read_text())["result"]["a"] == 2.0


def test_torus_harmonic_requires_tau(tmp_path, capsys):
    with pytest.raises(SystemExit) as info:
        run(["torus-harmonic", "--input", "x.xyz", "--R", "2"])
    assert info.value.code == 2


def test_torus_conformal_preset(tmp_path):
    src = gen(tmp_path, "torus", 6000, "--R", "2", "--r", "1")
    rep = tmp_path / "t.json"
    assert run(["torus-conformal", "--input", str(src), "--n", "16", "--R", "2",
                "--report", str(rep)]) == 0
    res = json.loads(rep.read_text())["result"]
    assert res["tau_reduced"][1] == pytest.approx(np.sqrt(3), rel=0.05)
    assert "sign_convention" in res


def test_torus_without_cuts(tmp_path, capsys):
    src = gen(tmp_path, "torus", 500)
    assert run(["torus-conformal", "--input", str(src), "--n", "16"]) == 5
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and err[0].startswith("latticemaps: cuts error:")


def test_lattice_info(tmp_path):
    src = gen(tmp_path, "sphere", 2000)
    rep, dump = tmp_path / "l.json", tmp_path / "l.txt"
    assert run(["lattice-info", "--input", str(src), "--n", "8", "--out", str(dump),
                "--report", str(rep)]) == 0
    stats = json.loads(rep.read_text())["result"]["lattice"]
    lines = dump.read_text().splitlines()
    assert sum(l.startswith("v ") for l in lines) == stats["vertices"]
    assert sum(l.startswith("e ") for l in lines) == stats["edges"]


@pytest.mark.parametrize("content,args,code,stage", [
    (None, [], 3, "input"),
    ("0 0\n", [], 3, "input"),
    ("0 0 0\n0.9 0 0\n0 0.9 0\n", ["--n", "32", "--epsilon", "0.03"], 4, "lattice"),
])
def test_error_exit_codes(tmp_path, capsys, content, args, code, stage):
    src = tmp_path / "in.xyz"
    if content is not None:
        src.write_text(content)
    assert run(["lattice-info", "--input", str(src), *args]) == code
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and err[0].startswith(f"latticemaps: {stage} error:")


def test_bad_group_file(tmp_path, capsys):
    src = gen(tmp_path, "genus2", 500)
    grp = tmp_path / "g.json"
    grp.write_text("{not json")
    assert run(["hyp-harmonic", "--input", str(src), "--group", str(grp)]) == 3
    assert "not valid JSON" in capsys.readouterr().err
