import itertools

import numpy as np
import pytest
from scipy.sparse.csgraph import shortest_path

from latticemaps import CutError, GeometryError, LatticeParams, PointCloud, build_lattice
from latticemaps.cuts import CutMembrane, edge_crossings, find_edges, square_edges
from latticemaps.pointcloud import normalize_cloud
from latticemaps.surfaces import sample_torus
from latticemaps.torus import (QuadraticCoefficients, balanced_residual, build_shift_cocycle,
                               energy_coefficients, harmonic_torus, harmonic_torus_pipeline,
                               lifted_energy, normalized_energy, optimal_tau, reduce_modulus,
                               revolution_cuts)
from oracles import grid_oracle


@pytest.fixture(scope="module")
def torus():
    normed, tr = normalize_cloud(sample_torus(6000, R=2.0, r=1.0, seed=5))
    lat = build_lattice(normed, LatticeParams(16))
    cuts = [c.transformed(tr) for c in revolution_cuts(2.0)]
    cocycle = build_shift_cocycle(lat, cuts)
    harm = harmonic_torus(lat, cocycle, 1j, tol=1e-12)
    return lat, cuts, cocycle, harm


# -- closed-form modulus ----------------------------------------------------------

def test_optimal_tau_matches_grid_search():
    rng = np.random.default_rng(11)
    for _ in range(100):
        d1 = rng.normal(size=20)
        d2 = rng.normal(size=20)
        d2 *= np.linalg.norm(d1) / np.linalg.norm(d2) * rng.uniform(0.6, 1.6)
        P, Q, R = d1 @ d1 / 2, d2 @ d2 / 2, d1 @ d2 / 2
        assert abs(optimal_tau(P, Q, R) - grid_oracle(P, Q, R)) <= 1e-5


def test_optimal_tau_examples():
    assert optimal_tau(1.0, 1.0, 0.0) == pytest.approx(1j)
    assert optimal_tau(3.0, 1.0, -1.0) == pytest.approx(1 + np.sqrt(2) * 1j)
    with pytest.raises(GeometryError):
        optimal_tau(1.0, 0.0, 0.0)
    with pytest.raises(GeometryError):
        optimal_tau(1.0, 1.0, 1.0)


def test_normalized_energy_at_optimum_is_twice_sqrt_det():
    # at the optimum E/y = 2 sqrt(PQ - R^2)
    c = QuadraticCoefficients(3.0, 2.0, 0.5, 0.0)
    tau = optimal_tau(c.P, c.Q, c.R_re)
    assert normalized_energy(c, tau) == pytest.approx(2 * np.sqrt(c.P * c.Q - c.R_re ** 2))


@pytest.mark.parametrize("tau,expect", [(2j, 2j), (0.5j, 2j), (1 + 2j, 2j), (0.3 + 0.4j, None)])
def test_reduce_modulus(tau, expect):
    red, m = reduce_modulus(tau)
    (a, b), (c, d) = m.tolist()
    assert a * d - b * c == 1
    assert red == pytest.approx((a * tau + b) / (c * tau + d))
    assert abs(red.real) <= 0.5 + 1e-12 and abs(red) >= 1 - 1e-12
    if expect is not None:
        assert red == pytest.approx(expect)
    with pytest.raises(GeometryError):
        reduce_modulus(1.0)


# -- cocycle ------------------------------------------------------------------------

def test_rhs_sums_vanish(torus):
    lat, _, cocycle, _ = torus
    assert not cocycle.vertex_rhs(lat).sum(axis=0).any()
    assert np.abs(cocycle.shifts).sum(axis=0).min() > 0


def test_closure_on_every_square(torus):
    lat, _, cocycle, _ = torus
    de = square_edges(lat)
    total = np.einsum("sk,skc->sc", de.sign, cocycle.shifts[de.index])
    assert len(de.index) > 1000 and not total.any()


def loop_through(lat, targets):
    """Closed lattice path visiting the vertices nearest to ``targets`` in order."""
    anchors = [int(np.argmin(np.linalg.norm(lat.coords - t, axis=1))) for t in targets]
    _, pred = shortest_path(lat.adjacency, unweighted=True, return_predecessors=True,
                            indices=anchors)
    path = [anchors[0]]
    for k in range(len(anchors)):
        src, dst = k, anchors[(k + 1) % len(anchors)]
        seg = []
        v = dst
        while v != anchors[src]:
            seg.append(v)
            v = pred[src, v]
        path.extend(reversed(seg))
    return np.array(path)


def winding(lat, cocycle, path):
    idx, sign = find_edges(lat, path[:-1], path[1:])
    return cocycle.directed(idx, sign).sum(axis=0)


def test_brute_force_loop_windings(torus):
    lat, _, cocycle, _ = torus
    s = 1 / 3  # normalized scale of R=2, r=1
    th = np.linspace(0, 2 * np.pi, 24, endpoint=False)
    around_axis = np.column_stack([3 * s * np.cos(th), 3 * s * np.sin(th), 0 * th])
    around_tube = np.column_stack([0 * th, (2 + np.cos(th)) * s, np.sin(th) * s])
    w1 = winding(lat, cocycle, loop_through(lat, around_axis))
    w2 = winding(lat, cocycle, loop_through(lat, around_tube))
    assert abs(w1[0]) == 1 and w1[1] == 0
    assert w2[0] == 0 and abs(w2[1]) == 1


def square_loop():
    ring = [(i, j, 0) for i, j in itertools.product(range(-2, 3), repeat=2) if max(abs(i), abs(j)) == 2]
    pts = np.array(ring, dtype=float) / 10
    return build_lattice(PointCloud(pts), LatticeParams(10, 0.09))


def test_cycle_graph_uniform_winding():
    lat = square_loop()
    assert (lat.num_vertices, lat.num_edges) == (16, 16)
    cuts = [CutMembrane(normal=(0, 1, 0), offset=0.0, bounds=(((1, 0, 0), 0.0),)),
            CutMembrane(normal=(0, 0, 1), offset=0.05)]
    cocycle = build_shift_cocycle(lat, cuts)
    harm = harmonic_torus(lat, cocycle, 1j, tol=1e-12)
    d = harm.f1[lat.edges[:, 1]] + cocycle.shifts[:, 0] - harm.f1[lat.edges[:, 0]]
    np.testing.assert_allclose(np.abs(d), 1 / 16, atol=1e-10)


def test_membrane_antisymmetry(torus):
    lat = torus[0]
    m = CutMembrane(normal=(0, 1, 0), offset=0.03, bounds=(((1, 0, 0), 0.0),))
    flipped = CutMembrane(normal=(0, -1, 0), offset=-0.03, bounds=(((1, 0, 0), 0.0),))
    s = edge_crossings(lat, [m, flipped]).sign
    assert np.abs(s[:, 0]).sum() > 0
    np.testing.assert_array_equal(s[:, 0], -s[:, 1])


def test_non_transversal_membrane_rejected(torus):
    lat, cuts, _, _ = torus
    short = CutMembrane(normal=(0, 1, 0), offset=0.0, bounds=(((1, 0, 0), 0.0), ((-1, 0, 0), -0.5)))
    with pytest.raises(CutError, match="non-transversally"):
        build_shift_cocycle(lat, [short, cuts[1]])
    with pytest.raises(CutError, match="exactly two"):
        build_shift_cocycle(lat, cuts[:1])


# -- harmonic solve and energy --------------------------------------------------------

def test_balanced_residual(torus):
    lat, _, cocycle, harm = torus
    assert np.abs(balanced_residual(lat, cocycle, harm.f1, harm.f2)).max() <= 1e-8


def test_quadratic_form_matches_direct(torus):
    lat, _, cocycle, harm = torus
    rng = np.random.default_rng(2)
    for tau in rng.normal(size=5) + 1j * rng.uniform(0.2, 3, size=5):
        direct, coeffs = lifted_energy(lat, cocycle, harm.f1, harm.f2, tau)
        assert coeffs.energy(tau) == pytest.approx(direct, rel=1e-12)


def test_linear_in_tau(torus):
    _, _, _, harm = torus
    a, b = harm.at(0.3 + 1j).field, harm.at(-0.7 + 2j).field
    mid = harm.at((0.3 + 1j + -0.7 + 2j) / 2).field
    np.testing.assert_allclose(mid, (a + b) / 2, atol=1e-14)


def test_gauge_independence(torus):
    lat, cuts, cocycle, harm = torus
    c0 = energy_coefficients(lat, cocycle, harm.f1, harm.f2)
    # adding constants to the lifts changes nothing
    c1 = energy_coefficients(lat, cocycle, harm.f1 + 5.0, harm.f2 - 2.0)
    assert c1.P == pytest.approx(c0.P) and c1.R_re == pytest.approx(c0.R_re)
    # a different membrane in the same homology class gives the same lifts up to gauge
    other = CutMembrane(normal=(1, 0, 0), offset=0.0, bounds=(((0, -1, 0), 0.0),))
    coc2 = build_shift_cocycle(lat, [other, cuts[1]])
    h2 = harmonic_torus(lat, coc2, 1j, tol=1e-12)
    c2 = energy_coefficients(lat, coc2, h2.f1, h2.f2)
    for k in ("P", "Q", "R_re"):
        assert getattr(c2, k) == pytest.approx(getattr(c0, k), rel=1e-8, abs=1e-8)


def test_pipeline_rejects_bad_tau():
    cloud = sample_torus(500, seed=1)
    with pytest.raises(GeometryError, match="Im"):
        harmonic_torus_pipeline(cloud, LatticeParams(16), revolution_cuts(2.0), 1 - 1j)
