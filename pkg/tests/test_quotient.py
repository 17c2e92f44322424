import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from symplan.collision import CollisionChecker, ConvexShape, MovingObject, World, rectangle
from symplan.geometry import Config, ConfigSpace, MetricWeights, dist_config
from symplan.quotient import (
    ClassPoint, QuotientSpace, Roadmap, canonicalize, lift_path, local_plan, project, q_dist,
    quotient_distances, sample_global_q, sample_local_q,
)
from symplan.symmetry import (
    act, make_cyclic_2d, make_icosahedral, make_octahedral, orbit, product, trivial_group,
)

import oracles

C4 = make_cyclic_2d(4)
deg = math.radians


def so2(theta):
    return Config.se2(0, 0, theta)


def test_q_dist_examples():
    d, g = q_dist(ClassPoint(so2(0), C4), ClassPoint(so2(deg(85)), C4))
    assert d == pytest.approx(deg(5), abs=1e-12)
    # g maps 85 deg to -5 deg, i.e. subtracts 90 deg
    assert act(g, so2(deg(85))).allclose(so2(deg(-5)))
    d3, _ = q_dist(ClassPoint(so2(0), make_cyclic_2d(3)), ClassPoint(so2(deg(100)), make_cyclic_2d(3)))
    assert d3 == pytest.approx(deg(20), abs=1e-12)


def test_q_dist_trivial_group_is_base_metric(rng):
    s = ConfigSpace(3, 1, [0] * 3, [1] * 3)
    T = trivial_group(3)
    w = MetricWeights((0.3,))
    for x, y in zip(s.sample(rng, 20), s.sample(rng, 20)):
        a, b = s.unpack(x), s.unpack(y)
        assert q_dist(ClassPoint(a, T), ClassPoint(b, T), w)[0] == dist_config(a, b, w)


def test_q_dist_tie_lowest_index():
    # 45 deg is equidistant from 0 and 90 deg under C4; g = element 0
    _, g = q_dist(ClassPoint(so2(0), C4), ClassPoint(so2(deg(45)), C4))
    assert g.index == 0


def test_q_dist_errors():
    with pytest.raises(ValueError):
        q_dist(ClassPoint(so2(0), C4), ClassPoint(so2(0), make_cyclic_2d(3)))
    two = product([(C4, 0)])
    with pytest.raises(ValueError):
        q_dist(ClassPoint(so2(0), two), ClassPoint(Config([[0, 0], [1, 1]], [0, 0]), two))


@pytest.mark.parametrize("G,dim,m", [
    (make_cyclic_2d(4), 2, 1),
    (make_octahedral(), 3, 1),
    (make_icosahedral(), 3, 1),
    (product([(make_cyclic_2d(2), 0), (make_cyclic_2d(3), 1)]), 2, 2),
])
def test_quotient_distance_matches_orbit_oracle(G, dim, m, rng):
    s = ConfigSpace(dim, m, [0] * dim, [1] * dim, MetricWeights.uniform(0.35, m))
    X, Y = s.sample(rng, 3000), s.sample(rng, 3000)
    got, _ = quotient_distances(s, G, X, Y)
    if dim == 2:
        RX, RY = oracles.angle_matrices(s.rots(X)), oracles.angle_matrices(s.rots(Y))
        groups = {f.obj: oracles.angle_matrices(f.rotations) for f in G.factors}
    else:
        RX, RY = oracles.quat_matrices(s.rots(X)), oracles.quat_matrices(s.rots(Y))
        groups = {f.obj: oracles.quat_matrices(f.rotations) for f in G.factors}
    want = oracles.orbit_distance(s.trans(X), RX, s.trans(Y), RY, s.w, groups)
    np.testing.assert_allclose(got, want, atol=1e-12, rtol=0)


def test_quotient_metric_properties(rng):
    G = make_octahedral()
    s = ConfigSpace(3, 1, [0] * 3, [1] * 3, MetricWeights((0.5,)))
    A, B, C = (s.sample(rng, 5000) for _ in range(3))
    dab, _ = quotient_distances(s, G, A, B)
    dba, _ = quotient_distances(s, G, B, A)
    assert np.all(np.abs(dab - dba) < 1e-9)
    dac, _ = quotient_distances(s, G, A, C)
    dcb, _ = quotient_distances(s, G, C, B)
    assert np.all(dab <= dac + dcb + 1e-9)
    assert np.all(dab <= s.distance(A, B) + 1e-15)
    # representative invariance and zero on the orbit
    for k in range(G.order):
        parts = np.array([k])
        Bg = G.act_flat(s, np.broadcast_to(parts, (len(B), 1)), B.copy())
        assert np.all(np.abs(quotient_distances(s, G, A, Bg)[0] - dab) < 1e-9)
        assert np.all(quotient_distances(s, G, B, Bg)[0] < 1e-7)


@given(st.floats(0, 2 * math.pi), st.floats(0, 2 * math.pi), st.integers(1, 9))
def test_cyclic_q_dist_closed_form(a, b, n):
    d, _ = q_dist(ClassPoint(so2(a), make_cyclic_2d(n)), ClassPoint(so2(b), make_cyclic_2d(n)))
    r = (b - a) % (2 * math.pi / n)
    assert abs(d - min(r, 2 * math.pi / n - r)) < 1e-9


def test_project_and_class_equality():
    q = Config.se2(0.2, 0.3, 0.4)
    for g in C4.elements:
        assert project(act(g, q), C4) == project(q, C4)
    assert project(q, C4) != project(Config.se2(0.2, 0.3, 0.5), C4)
    assert project(project(q, C4).representative, C4) == project(q, C4)
    assert project(q, C4) != project(q, make_cyclic_2d(2))


def test_sample_global_sector_uniformity():
    rng = np.random.default_rng(7)
    s = ConfigSpace(2, 1, [0, 0], [0, 0])
    th = s.rots(s.sample(rng, 1_000_000))[:, 0]
    counts = np.bincount((th // (math.pi / 2)).astype(int), minlength=4)
    assert stats.chisquare(counts).pvalue > 1e-3
    c = sample_global_q(ConfigSpace(2, 1, [0, 0], [1, 1]), C4, np.random.default_rng(0))
    assert c.group is C4 and np.all((c.representative.translations >= 0) & (c.representative.translations <= 1))


def test_sample_local_contract(rng):
    s = ConfigSpace(2, 1, [0, 0], [1, 1], MetricWeights((0.2,)))
    x = s.sample(rng, 1)[0]
    Y = s.sample_ball(x, 0.15, rng, 10_000)
    assert np.all(quotient_distances(s, C4, x, Y)[0] <= 0.15 + 1e-12)
    center = ClassPoint(s.unpack(x), C4)
    w = MetricWeights((0.2,))
    for _ in range(200):
        c = sample_local_q(center, 0.15, w, rng)
        assert q_dist(center, c, w)[0] <= 0.15 + 1e-12
    tiny = sample_local_q(center, 1e-13, w, rng)
    assert tiny == center


def test_quotient_ball_is_best_representative_ball(rng):
    s = ConfigSpace(2, 1, [0, 0], [1, 1], MetricWeights((0.2,)))
    x = s.sample(rng, 1)[0]
    Y = s.sample(rng, 5000)
    d, parts = quotient_distances(s, C4, x, Y)
    best = s.distance(x, C4.act_flat(s, parts, Y.copy()))
    r = 0.3
    assert np.array_equal(d < r, best < r)
    orbit_min = np.min([s.distance(x, C4.act_flat(s, np.full((len(Y), 1), k), Y.copy())) for k in range(4)], axis=0)
    assert np.array_equal(d < r, orbit_min < r)


def test_canonicalize():
    q = so2(deg(85))
    c = canonicalize(q, C4)
    # members of the orbit in [0, 360): 85, 175, 265, 355; the least is 85
    assert c.allclose(so2(deg(85)), 1e-12)
    for g in C4.elements:
        assert canonicalize(act(g, q), C4).allclose(c, 1e-12)
    assert canonicalize(c, C4).allclose(c)
    O = make_octahedral()
    q3 = Config.se3([1, 2, 3], [0.3, -0.5, 0.7, 0.1])
    c3 = canonicalize(q3, O)
    for g in O.elements:
        assert canonicalize(act(g, q3), O).allclose(c3, 1e-9)


# -- local planner -------------------------------------------------------------

def _corridor():
    # horizontal corridor of height 0.22 around y = 1; a square of side 0.2 fits only nearly axis-aligned
    lo = ConvexShape([[0, 0], [2, 0], [2, 0.89], [0, 0.89]])
    hi = ConvexShape([[0, 1.11], [2, 1.11], [2, 2], [0, 2]])
    return World([lo, hi], [0, 0], [2, 2])


SQUARE = MovingObject(rectangle(0.2, 0.2), C4)


def test_local_plan_rotated_endpoint():
    world = _corridor()
    a = ClassPoint(Config.se2(0.5, 1.0, 0.0), C4)
    b = ClassPoint(Config.se2(1.5, 1.0, deg(88)), C4)
    chk = CollisionChecker(world, [SQUARE])
    assert chk.is_free(a.representative) and chk.is_free(b.representative)
    assert local_plan(ClassPoint(a.representative, trivial_group(2)),
                      ClassPoint(b.representative, trivial_group(2)), world, [SQUARE]) is None
    out = local_plan(a, b, world, [SQUARE])
    assert out is not None
    q_e, length = out
    assert ClassPoint(q_e, C4) == b
    assert q_e.allclose(Config.se2(1.5, 1.0, deg(-2)), 1e-9)
    # dense re-check of the returned segment
    s = chk.space
    pts = s.interpolate(s.pack(a.representative), s.pack(q_e), np.linspace(0, 1, 2001))
    assert chk.free_mask(pts).all()
    assert length == pytest.approx(q_dist(a, b, MetricWeights((SQUARE.weight,)))[0], abs=1e-12)


def test_local_plan_empty_and_blocked(rng):
    empty = World([], [0, 0], [2, 2])
    s = ConfigSpace(2, 1, [0, 0], [2, 2], MetricWeights((SQUARE.weight,)))
    for x, y in zip(s.sample(rng, 20), s.sample(rng, 20)):
        a, b = ClassPoint(s.unpack(x), C4), ClassPoint(s.unpack(y), C4)
        q_e, length = local_plan(a, b, empty, [SQUARE])
        assert length == pytest.approx(q_dist(a, b, s.weights)[0], abs=1e-12)
    wall = World([ConvexShape([[0.95, 0], [1.05, 0], [1.05, 2], [0.95, 2]])], [0, 0], [2, 2])
    assert local_plan(ClassPoint(Config.se2(0.5, 1, 0), C4), ClassPoint(Config.se2(1.5, 1, 0.3), C4),
                      wall, [SQUARE]) is None


def test_quotient_space_local_plan_matches_free_check(rng):
    world = _corridor()
    qs = QuotientSpace.from_world(world, [SQUARE], resolution=0.005)
    X = qs.sample_global(rng, 200)
    X = X[qs.free(X)]
    for x, y in zip(X[:-1], X[1:]):
        out = qs.local_plan(x, y)
        if out is None:
            continue
        y_e, length, parts = out
        pts = qs.space.interpolate(x, y_e, np.linspace(0, 1, 500))
        assert qs.free(pts).all()
        assert length == pytest.approx(float(qs.distances(x, y)[0]), abs=1e-12)


def test_quotient_space_rejects_asymmetric_shape():
    bad = MovingObject(rectangle(0.2, 0.1), C4)
    with pytest.raises(ValueError):
        QuotientSpace.from_world(World([], [0, 0], [1, 1]), [bad])


# -- roadmap and lifting ---------------------------------------------------------

def _roadmap_with_edges(rng, G, n=6):
    s = ConfigSpace(2, 1, [0, 0], [2, 2], MetricWeights((0.14,)))
    rm = Roadmap(s, G)
    rm.add_vertices(s.sample(rng, n))
    X = rm.X
    for u in range(n):
        for v in range(n):
            if u != v:
                d, parts = quotient_distances(s, G, X[u], X[v])
                rm.add_edge(u, v, G.act_flat(s, parts, X[v].copy()), float(d), G.index(parts))
    return rm


def test_roadmap_invariants_and_json(rng):
    rm = _roadmap_with_edges(rng, C4)
    assert rm.validate() == []
    assert rm.n_edges == 30
    back = Roadmap.from_json(json.loads(rm.dumps()))
    assert back.n == rm.n and back.n_edges == rm.n_edges
    assert back.validate() == []
    with pytest.raises(KeyError):
        rm.edge(0, 0)
    rm.truncate(3)
    assert rm.n == 3 and all(d < 3 for _, d, _ in rm.edges())


def test_validate_flags_bad_edge(rng):
    rm = _roadmap_with_edges(rng, C4, 3)
    e = rm.edge(0, 1)
    rm.add_edge(0, 1, e.q_e, e.length + 0.1, e.element)
    assert rm.validate()


def test_lift_single_edge(rng):
    rm = _roadmap_with_edges(rng, C4, 2)
    lp = lift_path(rm, [0, 1])
    assert lp.waypoints[0].allclose(rm.vertex(0))
    np.testing.assert_allclose(rm.space.pack(lp.waypoints[1]), rm.edge(0, 1).q_e)


def test_lift_two_edges_hand_built():
    s = ConfigSpace(2, 1, [0, 0], [2, 2], MetricWeights((1.0,)))
    rm = Roadmap(s, C4)
    v = [Config.se2(0, 0, 0), Config.se2(1, 0, deg(80)), Config.se2(2, 0, deg(100))]
    rm.add_vertices([s.pack(q) for q in v])
    # edge 0->1 reaches 80 - 90 = -10 deg via element 1
    rm.add_edge(0, 1, s.pack(Config.se2(1, 0, deg(-10))), math.hypot(1, deg(10)), 1)
    # edge 1->2 stays inside the stored copy: 80 -> 100
    rm.add_edge(1, 2, s.pack(v[2]), math.hypot(1, deg(20)), 0)
    lp = lift_path(rm, [0, 1, 2])
    # second waypoint is g.q_e of the second edge: 100 - 90 = 10 deg
    assert lp.waypoints[2].allclose(Config.se2(2, 0, deg(10)), 1e-12)
    pair = [dist_config(a, b) for a, b in zip(lp.waypoints[:-1], lp.waypoints[1:])]
    np.testing.assert_allclose(pair, [rm.edge(0, 1).length, rm.edge(1, 2).length], atol=1e-12)
    assert abs(lp.total_length - lp.graph_length) < 1e-12


def test_lift_trivial_group_keeps_vertices(rng):
    rm = _roadmap_with_edges(rng, trivial_group(2), 4)
    lp = lift_path(rm, [0, 2, 1, 3])
    for q, i in zip(lp.waypoints, [0, 2, 1, 3]):
        assert q.allclose(rm.vertex(i), 0)


def test_lift_missing_edge(rng):
    rm = _roadmap_with_edges(rng, C4, 3)
    del rm.out[0][1]
    with pytest.raises(ValueError):
        lift_path(rm, [0, 1])
    with pytest.raises(ValueError):
        lift_path(rm, [])


@given(st.lists(st.integers(0, 5), min_size=2, max_size=12))
def test_lift_length_conservation(path):
    rng = np.random.default_rng(len(path))
    G = product([(C4, 0)])
    rm = _roadmap_with_edges(rng, G)
    path = [p for i, p in enumerate(path) if i == 0 or p != path[i - 1]]
    if len(path) < 2:
        return
    lp = lift_path(rm, path)
    assert abs(lp.total_length - lp.graph_length) < 1e-9
    assert lp.waypoints[0].allclose(rm.vertex(path[0]), 0)
    for q, v in zip(lp.waypoints, path):
        assert ClassPoint(q, G) == ClassPoint(rm.vertex(v), G)


def test_orbit_members_all_project_together():
    q = Config.se2(0.1, 0.2, 0.3)
    cls = [project(p, C4) for p in orbit(C4, q)]
    assert all(c == cls[0] for c in cls)
