import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.sparse.csgraph import shortest_path as cs_shortest

from symplan.collision import ConvexShape, MovingObject, World, rectangle
from symplan.geometry import Config, ConfigSpace, angle_dist
from symplan.planners import (
    EXHAUSTED, INFEASIBLE, PlannerParams, Problem, birrt, build_prm_star, knn_count, plan,
    prm_star, rrt, rrt_star, shortest_path, validate_result,
)
from symplan.quotient import QuotientSpace, Roadmap
from symplan.symmetry import make_cyclic_2d, trivial_group
from symplan.worldgen import WorldGenParams, gen_problem, gen_world

import oracles

C4 = make_cyclic_2d(4)
SQUARE = MovingObject(rectangle(0.2, 0.2), C4)
EMPTY = World([], [0, 0], [2, 2])
ROT85 = Problem(Config.se2(0.5, 1, 0), Config.se2(1.5, 1, math.radians(85)))


def _door(half_gap=0.13):
    return World([ConvexShape([[0.95, 0], [1.05, 0], [1.05, 1 - half_gap], [0.95, 1 - half_gap]]),
                  ConvexShape([[0.95, 1 + half_gap], [1.05, 1 + half_gap], [1.05, 2], [0.95, 2]])],
                 [0, 0], [2, 2])


def _rotation_traversed(res):
    th = [float(q.rotations[0]) for q in res.path.waypoints]
    return sum(angle_dist(a, b) for a, b in zip(th[:-1], th[1:]))


def test_params_validation():
    with pytest.raises(ValueError):
        PlannerParams(max_samples=0)
    with pytest.raises(ValueError):
        PlannerParams(eta=-1)
    assert knn_count(1000, 3, None) == math.ceil(math.e * (4 / 3) * math.log(1000))


@pytest.mark.parametrize("planner", [rrt, birrt, rrt_star])
def test_goal_within_eta_one_extension(planner):
    qs = QuotientSpace.from_world(EMPTY, [SQUARE])
    pr = Problem(Config.se2(1, 1, 0), Config.se2(1.05, 1.02, 0.1))
    res = planner(pr, qs, PlannerParams(max_samples=1 if planner is not rrt_star else 5, eta=0.2))
    assert res.success
    assert validate_result(res, pr, qs) == []
    if planner is rrt:
        assert res.samples == 1


@pytest.mark.parametrize("planner", [rrt, birrt, rrt_star])
def test_tiny_budget_exhausts(planner):
    qs = QuotientSpace.from_world(_door(0.02), [SQUARE])
    pr = Problem(Config.se2(0.3, 1, 0), Config.se2(1.7, 1, 0))
    res = planner(pr, qs, PlannerParams(max_samples=1))
    assert res.status == EXHAUSTED and not res.success and res.path is None


def test_infeasible_endpoints():
    qs = QuotientSpace.from_world(_door(), [SQUARE])
    pr = Problem(Config.se2(1.0, 0.3, 0), Config.se2(1.7, 1, 0))
    for name in ("rrt", "birrt", "rrt_star", "prm_star_knn"):
        assert plan(name, pr, qs, PlannerParams(max_samples=10)).status == INFEASIBLE
    with pytest.raises(ValueError):
        plan("astar", pr, qs, PlannerParams())


def test_rrt_aware_rotates_less():
    qs = QuotientSpace.from_world(EMPTY, [SQUARE])
    for seed in range(10):
        p = PlannerParams(max_samples=300, seed=seed)
        a, u = rrt(ROT85, qs, p), rrt(ROT85, qs.unaware(), p)
        assert a.success and u.success
        assert _rotation_traversed(a) <= _rotation_traversed(u)


def test_birrt_beats_rrt_through_door():
    qs = QuotientSpace.from_world(_door(), [SQUARE])
    pr = Problem(Config.se2(0.3, 1, 0), Config.se2(1.7, 1, 0))
    rrt_ok = bi_ok = 0
    for seed in range(20):
        p = PlannerParams(max_samples=200, seed=seed)
        rrt_ok += rrt(pr, qs, p).success
        res = birrt(pr, qs, p)
        bi_ok += res.success
        assert validate_result(res, pr, qs) == []
    assert rrt_ok <= 10
    assert bi_ok > rrt_ok


def test_rrt_star_monotone_cost():
    qs = QuotientSpace.from_world(EMPTY, [SQUARE])
    res = {n: rrt_star(ROT85, qs, PlannerParams(max_samples=n, seed=3)) for n in (300, 600, 1200)}
    assert res[300].length >= res[600].length >= res[1200].length
    costs = [c for _, c in res[1200].cost_history]
    assert all(b < a for a, b in zip(costs[:-1], costs[1:]))
    assert costs[-1] == pytest.approx(res[1200].length, abs=1e-9)


def test_rrt_star_empty_world_near_optimal():
    qs = QuotientSpace.from_world(EMPTY, [SQUARE])
    s = qs.space
    opt = float(qs.distances(s.pack(ROT85.start), s.pack(ROT85.goal))[0])
    res = rrt_star(ROT85, qs, PlannerParams(max_samples=2000, seed=0))
    assert res.length <= 1.05 * opt
    assert validate_result(res, ROT85, qs) == []


def test_rrt_star_aware_cost_not_worse():
    qs = QuotientSpace.from_world(EMPTY, [SQUARE])
    for seed in range(3):
        p = PlannerParams(max_samples=800, seed=seed)
        assert rrt_star(ROT85, qs, p).length <= rrt_star(ROT85, qs.unaware(), p).length


@pytest.mark.parametrize("variant", ["knn", "radius"])
def test_prm_star_roadmap_contract(variant):
    world = gen_world(WorldGenParams(seed=0))  # a connected world: BiRRT solves these problems too
    qs = QuotientSpace.from_world(world, [SQUARE])
    planner = build_prm_star(qs, PlannerParams(max_samples=800, seed=1), variant)
    assert planner.roadmap.validate() == []
    n_before = len(planner.roadmap)
    rng = np.random.default_rng(0)
    solved = 0
    for _ in range(5):
        pr = Problem(*gen_problem(world, [SQUARE], C4, qs.space.weights, rng))
        res = planner.query(pr)
        assert validate_result(res, pr, qs) == []
        solved += res.success
        assert len(planner.roadmap) == n_before
    assert solved >= 3


def test_prm_star_empty_world_near_optimal():
    qs = QuotientSpace.from_world(EMPTY, [SQUARE])
    s = qs.space
    opt = float(qs.distances(s.pack(ROT85.start), s.pack(ROT85.goal))[0])
    _, (res,) = prm_star([ROT85], qs, PlannerParams(max_samples=4000, seed=0), "knn")
    assert res.success and res.length <= 1.05 * opt


def test_prm_star_trivial_vs_aware_share_samples():
    qs = QuotientSpace.from_world(EMPTY, [SQUARE])
    p = PlannerParams(max_samples=300, seed=2)
    a = build_prm_star(qs, p)
    u = build_prm_star(qs.unaware(), p)
    np.testing.assert_array_equal(a.roadmap.X, u.roadmap.X)


# -- graph search ----------------------------------------------------------------

def _graph(n, edges):
    s = ConfigSpace(2, 1, [0, 0], [1, 1])
    rm = Roadmap(s, trivial_group(2))
    rm.add_vertices(np.zeros((n, 3)))
    for (u, v), w in edges.items():
        rm.add_edge(u, v, np.zeros(3), w, 0)
    return rm


def test_shortest_path_small_cases():
    assert shortest_path(_graph(2, {(0, 1): 1.0}), 0, 1) == [0, 1]
    tri = _graph(3, {(0, 1): 1.0, (1, 2): 1.0, (0, 2): 3.0})
    assert shortest_path(tri, 0, 2) == [0, 1, 2]
    tri2 = _graph(3, {(0, 1): 1.0, (1, 2): 1.0, (0, 2): 1.5})
    assert shortest_path(tri2, 0, 2) == [0, 2]
    with pytest.raises(ValueError):
        shortest_path(_graph(3, {(0, 1): 1.0}), 0, 2)


@settings(max_examples=80)
@given(st.integers(2, 8), st.data())
def test_shortest_path_matches_enumeration(n, data):
    pairs = [(u, v) for u in range(n) for v in range(n) if u != v]
    chosen = data.draw(st.lists(st.sampled_from(pairs), unique=True, max_size=len(pairs)))
    edges = {e: data.draw(st.floats(0.01, 10)) for e in chosen}
    rm = _graph(n, edges)
    best = oracles.brute_shortest(n, edges, 0, n - 1)
    if math.isinf(best):
        with pytest.raises(ValueError):
            shortest_path(rm, 0, n - 1)
        return
    path = shortest_path(rm, 0, n - 1)
    assert path[0] == 0 and path[-1] == n - 1
    assert sum(edges[(a, b)] for a, b in zip(path[:-1], path[1:])) == pytest.approx(best, rel=1e-12)


def test_shortest_path_matches_csgraph(rng):
    n = 60
    W = np.where(rng.random((n, n)) < 0.1, rng.random((n, n)), 0.0)
    np.fill_diagonal(W, 0)
    edges = {(int(u), int(v)): float(W[u, v]) for u, v in zip(*np.nonzero(W))}
    rm = _graph(n, edges)
    D = cs_shortest(W, directed=True, indices=0)
    for t in range(1, n):
        if np.isinf(D[t]):
            continue
        p = shortest_path(rm, 0, t)
        assert sum(edges[(a, b)] for a, b in zip(p[:-1], p[1:])) == pytest.approx(D[t], rel=1e-12)


def test_result_json():
    qs = QuotientSpace.from_world(EMPTY, [SQUARE])
    res = rrt(ROT85, qs, PlannerParams(max_samples=300))
    js = res.to_json()
    assert js["status"] == "success" and len(js["waypoints"]) == len(res.path.waypoints)
