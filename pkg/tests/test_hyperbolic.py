from dataclasses import replace

import numpy as np
import pytest

import latticemaps.hyperbolic as H
from latticemaps import (CutError, GeometryError, InputError, LatticeParams, PointCloud,
                         build_lattice)
from latticemaps.pointcloud import normalize_cloud
from latticemaps.surfaces import sample_genus2


def hpoint(r, theta=0.0):
    """Point at distance ``r`` from the apex in direction ``theta``."""
    return np.array([np.sinh(r) * np.cos(theta), np.sinh(r) * np.sin(theta), np.cosh(r)])


# -- model basics ----------------------------------------------------------------------

def test_projection_examples():
    np.testing.assert_allclose(H.hyperboloid_project([0, 0, 2.0]), H.APEX)
    p = hpoint(0.7, 1.1)
    np.testing.assert_allclose(H.hyperboloid_project(3 * p), p)
    for bad in ([1.0, 0, 1.0], [0, 0, -1.0], [2.0, 0, 1.0]):
        with pytest.raises(GeometryError):
            H.hyperboloid_project(bad)


def test_distance_examples():
    assert H.hyp_distance(H.APEX, H.APEX) == 0.0
    assert H.hyp_distance(H.APEX, hpoint(1.3, 0.4)) == pytest.approx(1.3, rel=1e-14)
    # short distances keep full relative accuracy
    assert H.hyp_distance(hpoint(3.0), hpoint(3.0 + 1e-9)) == pytest.approx(1e-9, rel=1e-4)
    p, q = hpoint(0.5, 2.0), hpoint(1.1, -0.3)
    assert H.hyp_distance(p, q) == pytest.approx(np.arccosh(H.lorentz(p, q)), rel=1e-12)


def test_disk_roundtrip():
    p = hpoint(2.0, 0.9)
    np.testing.assert_allclose(H.from_disk(H.to_disk(p)), p, rtol=1e-12)
    with pytest.raises(GeometryError):
        H.from_disk([1.0, 0.0])


def test_cosh_center_midpoint():
    rng = np.random.default_rng(0)
    for _ in range(20):
        p = hpoint(rng.uniform(0, 3), rng.uniform(0, 2 * np.pi))
        q = hpoint(rng.uniform(0, 3), rng.uniform(0, 2 * np.pi))
        m = H.cosh_center(np.array([p, q]))
        d = H.hyp_distance(p, q)
        assert H.hyp_distance(m, p) == pytest.approx(d / 2, abs=1e-12)
        assert H.hyp_distance(m, q) == pytest.approx(d / 2, abs=1e-12)


def test_cosh_center_symmetric_triangle_and_errors():
    tri = np.array([hpoint(1.0, k * 2 * np.pi / 3) for k in range(3)])
    np.testing.assert_allclose(H.cosh_center(tri), H.APEX, atol=1e-12)
    with pytest.raises(InputError):
        H.cosh_center(np.zeros((0, 3)))


def test_isometries():
    a = H.rotation(0.4) @ H.boost(1.2)
    assert H.isometry_error(a) < 1e-12
    np.testing.assert_allclose(H.iso_inverse(a) @ a, np.eye(3), atol=1e-12)
    p, q = hpoint(0.3, 1.0), hpoint(1.4, -2.0)
    assert H.hyp_distance(a @ p, a @ q) == pytest.approx(H.hyp_distance(p, q), rel=1e-12)
    with pytest.raises(GeometryError):
        H.check_isometry(np.diag([1.0, 1.0, 2.0]))
    with pytest.raises(GeometryError):
        H.check_isometry(np.diag([-1.0, 1.0, 1.0]))


# -- groups -------------------------------------------------------------------------------

def test_octagon_group():
    g = H.octagon_group()
    assert g.genus == 2
    assert g.relation_residual <= 1e-12
    for name in H.generator_names(2):
        assert H.isometry_error(g.generator(name)) < 1e-10
    np.testing.assert_allclose(g.word("a1 b1^-1"),
                               g.generator("a1") @ H.iso_inverse(g.generator("b1")))
    np.testing.assert_allclose(g.word([]), np.eye(3))
    with pytest.raises(CutError, match="unknown generator"):
        g.word("a3")
    with pytest.raises(CutError, match="malformed"):
        g.word(["a1^2"])


def test_group_validation_and_roundtrip():
    g = H.octagon_group()
    back = H.FuchsianGroupSpec.from_dict(g.to_dict())
    for name in H.generator_names(2):
        np.testing.assert_allclose(back.generator(name), g.generator(name))
    broken = g.to_dict()
    broken["matrices"][0] = H.boost(1.0).tolist()
    with pytest.raises(GeometryError, match="relation"):
        H.FuchsianGroupSpec.from_dict(broken)


def test_families_produce_valid_groups():
    base = H.octagon_group()
    tw = H.twist_family(base)
    for t in (-1.0, 0.0, 0.7):
        assert tw([t]).relation_residual <= 1e-9
    np.testing.assert_allclose(tw([0.0]).generator("a1"), base.generator("a1"), atol=1e-12)
    cj = H.conjugation_family(base)
    assert cj([0.4]).relation_residual <= 1e-9


# -- lattice-level iteration ------------------------------------------------------------------

def two_vertex():
    pts = np.array([[0.0, 0, 0], [0.1, 0, 0]])
    lat = build_lattice(PointCloud(pts), LatticeParams(10, 0.09))
    return lat, H.EdgeTransforms(lat.num_edges, np.zeros(0, np.int64), np.zeros((0, 3, 3)))


def test_two_vertex_swap_and_energy():
    lat, tr = two_vertex()
    f = np.array([hpoint(0.5, 0.0), hpoint(1.5, 2.0)])
    np.testing.assert_allclose(H.cosh_cm_step(lat, tr, f), f[::-1], atol=1e-12)
    t = H.hyp_distance(f[0], f[1])
    e0, e = H.cosh_energy(lat, tr, f)
    assert e0 == pytest.approx(np.cosh(t) - 1, rel=1e-12)
    assert e == pytest.approx(t * t / 2, rel=1e-12)


def test_cosh_step_output_is_stationary_per_vertex():
    # with the neighbors held fixed, the new position zeroes that vertex's gradient
    lat, tr = two_vertex()
    f = np.array([hpoint(0.5), hpoint(1.5, 2.0)])
    g = f.copy()
    g[0] = H.cosh_cm_step(lat, tr, f)[0]
    assert H.stationarity_residual(lat, tr, g)[0] <= 1e-10


@pytest.fixture(scope="module")
def genus2():
    normed, T = normalize_cloud(sample_genus2(8000, seed=2))
    lat = build_lattice(normed, LatticeParams(16, 1.75 / 16))
    cuts = H.genus2_cuts().transformed(T)
    group = H.octagon_group()
    tr = H.edge_transformations(lat, cuts, group)
    f, st = H.harmonic_hyperbolic(lat, tr)
    return lat, cuts, group, tr, f, st


def test_closure_and_inverse_pairs(genus2):
    lat, cuts, group, tr, _, _ = genus2
    assert len(tr.index) > 0
    assert H.square_closure_residual(lat, tr).max() <= 1e-9
    prod = tr.matrices @ H.iso_inverse(tr.matrices)
    np.testing.assert_allclose(prod, np.broadcast_to(np.eye(3), prod.shape), atol=1e-9)


def test_swapped_tags_break_closure(genus2):
    lat, cuts, _, _, _, _ = genus2
    m = list(cuts.membranes)
    # swapping two tags breaks square closure along the junctions
    m[0], m[1] = replace(m[0], tag=m[1].tag), replace(m[1], tag=m[0].tag)
    with pytest.raises(CutError, match="non-transversally"):
        H.edge_transformations(lat, H.HypCutSystem(tuple(m)), H.octagon_group())


def test_flow_result(genus2):
    lat, _, _, tr, f, st = genus2
    assert st.converged
    assert st.max_stationarity <= 1e-6
    trace = np.array(st.energy_trace)
    assert np.all(np.diff(trace) <= 1e-10 * trace[0])
    np.testing.assert_allclose(H.lorentz(f, f), 1, atol=1e-9)


def test_converged_map_is_near_fixed_point(genus2):
    lat, _, _, tr, f, _ = genus2
    step = H.cosh_cm_step(lat, tr, f)
    assert H.hyp_distance(step, f).max() <= 1e-5


def test_trivial_transforms_collapse(genus2):
    lat = genus2[0]
    triv = H.EdgeTransforms(lat.num_edges, np.zeros(0, np.int64), np.zeros((0, 3, 3)))
    rng = np.random.default_rng(1)
    init = H.from_disk(rng.uniform(-0.3, 0.3, size=(lat.num_vertices, 2)))
    f, st = H.harmonic_hyperbolic(lat, triv, init=init, tol=1e-10)
    # with no deck transformations the energy minimum is a constant map
    assert st.converged
    assert H.cosh_energy(lat, triv, f)[1] <= 1e-12


def test_equivariance_under_conjugation(genus2):
    lat, cuts, group, tr, f, st = genus2
    a = H.rotation(0.8) @ H.boost(0.6)
    trc = H.edge_transformations(lat, cuts, group.conjugated(a))
    g, stc = H.harmonic_hyperbolic(lat, trc, init=np.tile(a @ H.APEX, (lat.num_vertices, 1)))
    assert abs(stc.iterations - st.iterations) <= 1
    assert H.hyp_distance(g, f @ a.T).max() <= 1e-6
    assert H.cosh_energy(lat, trc, g)[1] == pytest.approx(H.cosh_energy(lat, tr, f)[1], abs=1e-6)


def test_conjugation_family_energy_constant(genus2):
    lat, cuts, group, _, _, _ = genus2
    fam = H.conjugation_family(group)
    energies = []
    for x in (-0.5, 0.0, 0.8):
        tr = H.edge_transformations(lat, cuts, fam([x]))
        g, _ = H.harmonic_hyperbolic(lat, tr, tol=1e-9)
        energies.append(H.cosh_energy(lat, tr, g)[1])
    assert np.ptp(energies) <= 1e-6


def test_extension_lands_on_hyperboloid(genus2):
    lat, cuts, _, tr, f, _ = genus2
    normed = normalize_cloud(sample_genus2(8000, seed=2))[0]
    pts = H.lifted_extension(lat, tr, f, normed.points[:500])
    np.testing.assert_allclose(H.lorentz(pts, pts), 1, atol=1e-9)
    assert np.all(np.linalg.norm(H.to_disk(pts), axis=1) < 1)


def test_omega_validation(genus2):
    lat, _, _, tr, _, _ = genus2
    with pytest.raises(InputError):
        H.harmonic_hyperbolic(lat, tr, omega=2.0)


def test_euler_and_normalization():
    assert H.euler_characteristic(2) == -2
    assert H.normalized_energy(4 * np.pi, 2) == pytest.approx(1.0)


@pytest.mark.slow
def test_nelder_mead_matches_sampling():
    cloud = sample_genus2(8000, seed=2)
    params = LatticeParams(16, 1.75 / 16)
    normed, T = normalize_cloud(cloud)
    lat = build_lattice(normed, params)
    cuts = H.genus2_cuts()
    local = cuts.transformed(T)
    fam = H.twist_family(H.octagon_group())
    grid = np.linspace(-1.5, 1.5, 50)
    warm, energies = None, []
    for t in grid:
        tr = H.edge_transformations(lat, local, fam([t]))
        warm, _ = H.harmonic_hyperbolic(lat, tr, init=warm)
        energies.append(H.cosh_energy(lat, tr, warm)[1])
    k = int(np.argmin(energies))
    res = H.conformal_hyperbolic(cloud, params, cuts, fam, [0.9], lattice=lat)
    assert abs(res.params[0] - grid[k]) <= grid[1] - grid[0]
    assert res.energy <= min(energies) + 1e-6
