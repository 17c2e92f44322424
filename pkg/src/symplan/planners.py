"""RRT, BiRRT, RRT*, and PRM* written once against the quotient primitives.

Each planner receives a `QuotientSpace`.  Passing one built on the trivial
group gives the symmetry-unaware baseline through exactly the same code,
with the same random stream.
"""
from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .bounds import BoundInputs, estimate_free_volume, prm_star_rho, rrt_star_rho
from .geometry import Config
from .quotient import LiftedPath, QuotientSpace, Roadmap, lift_flat, quotient_distances

SUCCESS = "success"
EXHAUSTED = "exhausted"
INFEASIBLE = "infeasible-endpoints"


@dataclass(frozen=True)
class PlannerParams:
    max_samples: int = 1000
    eta: float = 0.2
    rho_rrt: Optional[float] = None     # None: derived from the free volume
    rho_prm: Optional[float] = None
    knn_k_const: Optional[float] = None  # None: e * (1 + 1/d)
    c_star: Optional[float] = None      # cost over-estimate for the RRT* radius; None: space diameter
    resolution: float = 0.01
    seed: int = 0
    volume_samples: int = 4000

    def __post_init__(self):
        if self.max_samples < 1:
            raise ValueError("max_samples must be >= 1")
        for name in ("eta", "rho_rrt", "rho_prm", "knn_k_const", "c_star", "resolution"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class Problem:
    start: Config
    goal: Config


@dataclass
class PlanResult:
    status: str
    path: Optional[LiftedPath] = None
    length: float = math.inf
    samples: int = 0
    wall_time: float = 0.0
    timings: dict = field(default_factory=dict)
    collision_checks: int = 0
    vertices: int = 0
    cost_history: list = field(default_factory=list)

    @property
    def success(self) -> bool:
        return self.status == SUCCESS

    def to_json(self) -> dict:
        return {
            "status": self.status,
            "length": self.length if self.success else None,
            "samples": self.samples,
            "wall_time": self.wall_time,
            "timings": self.timings,
            "collision_checks": self.collision_checks,
            "vertices": self.vertices,
            "waypoints": self.path.to_json()["waypoints"] if self.path else [],
        }


# ---------------------------------------------------------------------------
# parameter defaults
# ---------------------------------------------------------------------------

def space_diameter(qs: QuotientSpace) -> float:
    s = qs.space
    width = s.upper - s.lower
    return math.sqrt(s.n_objects * float(width @ width) + float(np.sum((math.pi * s.w) ** 2)))


def free_volume(qs: QuotientSpace, params: PlannerParams) -> float:
    if qs.checker is None or qs.checker.trivial:
        return qs.space.volume()
    rng = np.random.default_rng([params.seed, 7])
    c = qs.checker
    before = c.checks
    try:
        v = estimate_free_volume(c.world, c.objects, qs.group, qs.space.weights,
                                 params.volume_samples, rng).volume
    except ValueError:
        v = qs.space.volume() / params.volume_samples
    c.checks = before
    return v


def bound_inputs(qs: QuotientSpace, params: PlannerParams, c_star: Optional[float] = None) -> BoundInputs:
    return BoundInputs(d=qs.space.effective_dim(), order=qs.order, vol_free=free_volume(qs, params),
                       c_star=c_star or params.c_star or space_diameter(qs))


def knn_count(n: int, d: int, k_const: Optional[float]) -> int:
    kc = k_const if k_const is not None else math.e * (1 + 1 / d)
    return max(1, math.ceil(kc * math.log(max(n, 2))))


# ---------------------------------------------------------------------------
# trees
# ---------------------------------------------------------------------------

class _Tree:
    """Growing tree over Q/G; edge parent -> v ends at act(parts[v], X[v])."""

    def __init__(self, qs: QuotientSpace, root: np.ndarray, cap: int):
        nf = len(qs.group.factors)
        self.qs = qs
        self.X = np.empty((cap, qs.space.flat_size))
        self.parent = np.full(cap, -1, dtype=np.int64)
        self.parts = np.zeros((cap, nf), dtype=np.int64)
        self.edge_len = np.zeros(cap)
        self.cost = np.zeros(cap)
        self.children: list = [[]]
        self.X[0] = root
        self.n = 1

    def add(self, x, parent: int, parts, length: float) -> int:
        if self.n == len(self.X):
            self._grow()
        i = self.n
        self.X[i] = x
        self.parent[i] = parent
        self.parts[i] = parts
        self.edge_len[i] = length
        self.cost[i] = self.cost[parent] + length
        self.children.append([])
        self.children[parent].append(i)
        self.n += 1
        return i

    def _grow(self):
        k = len(self.X)
        self.X = np.concatenate([self.X, np.empty_like(self.X)])
        self.parent = np.concatenate([self.parent, np.full(k, -1, dtype=np.int64)])
        self.parts = np.concatenate([self.parts, np.zeros_like(self.parts)])
        self.edge_len = np.concatenate([self.edge_len, np.zeros(k)])
        self.cost = np.concatenate([self.cost, np.zeros(k)])

    def nearest(self, y):
        d, parts = self.qs.distances(self.X[: self.n], y)
        i = int(np.argmin(d))
        return i, float(d[i]), parts[i]

    def reparent(self, v: int, new_parent: int, parts, length: float) -> None:
        self.children[self.parent[v]].remove(v)
        self.children[new_parent].append(v)
        self.parent[v] = new_parent
        self.parts[v] = parts
        self.edge_len[v] = length
        delta = self.cost[new_parent] + length - self.cost[v]
        stack = [v]
        while stack:
            u = stack.pop()
            self.cost[u] += delta
            stack.extend(self.children[u])

    def chain(self, v: int) -> list:
        out = []
        while v >= 0:
            out.append(v)
            v = int(self.parent[v])
        return out[::-1]


def _steer(qs: QuotientSpace, x, y_e, d: float, eta: float):
    if d <= eta:
        return y_e.copy(), d
    x_new = qs.space.interpolate(x, y_e, eta / d)
    return x_new, float(qs.space.distance(x, x_new))


def _extend(qs: QuotientSpace, T: _Tree, y, eta: float):
    """One RRT extension of T toward the class of y; returns the new vertex id or None."""
    i, d, parts = T.nearest(y)
    if d <= 1e-12:
        return None
    y_e = qs.act(parts, y)
    x_new, step = _steer(qs, T.X[i], y_e, d, eta)
    if not qs.edges_free(T.X[i][None], x_new[None])[0]:
        return None
    return T.add(x_new, i, qs.identity_parts, step)


def _assemble(qs: QuotientSpace, reps: Sequence, parts: Sequence) -> tuple:
    """Lift a chain of vertex representatives joined by edges with known elements."""
    rm = Roadmap(qs.space, qs.group)
    ids = rm.add_vertices(np.asarray(reps))
    G, s = qs.group, qs.space
    for k, p in enumerate(parts):
        q_e = G.act_flat(s, p, reps[k + 1])
        rm.add_edge(int(ids[k]), int(ids[k + 1]), q_e, float(s.distance(reps[k], q_e)), G.index(p))
    P, _ = lift_flat(rm, list(ids))
    return P


def _finish(qs: QuotientSpace, P: np.ndarray) -> LiftedPath:
    s = qs.space
    seg = s.distance(P[:-1], P[1:]) if len(P) > 1 else np.zeros(0)
    total = float(np.sum(seg))
    return LiftedPath([s.unpack(p) for p in P], total, total)


def _tree_path(T: _Tree, v: int):
    ids = T.chain(v)
    return [T.X[i] for i in ids], [T.parts[i] for i in ids[1:]]


def _prepare(problem: Problem, qs: QuotientSpace):
    s = qs.space
    xs, xg = s.pack(problem.start), s.pack(problem.goal)
    ok = qs.free(np.stack([xs, xg]))
    return xs, xg, bool(ok.all())


def _result(status, qs, t0, samples, vertices, checks0, path=None, timings=None, history=None) -> PlanResult:
    wall = time.perf_counter() - t0
    t = {"total": wall}
    t.update(timings or {})
    return PlanResult(status, path, path.total_length if path else math.inf, samples, wall, t,
                      qs.checks - checks0, vertices, history or [])


def _goal_edge(qs: QuotientSpace, x, xg, eta: float):
    d, parts = qs.distances(x, xg)
    d = float(d)
    if d > eta:
        return None
    y_e = qs.act(parts, xg)
    if not qs.edges_free(x[None], y_e[None])[0]:
        return None
    return parts, float(qs.space.distance(x, y_e))


def rrt(problem: Problem, qs: QuotientSpace, params: PlannerParams) -> PlanResult:
    """Single-tree RRT without goal bias; tries the goal class after every extension."""
    t0 = time.perf_counter()
    c0 = qs.checks
    xs, xg, ok = _prepare(problem, qs)
    if not ok:
        return _result(INFEASIBLE, qs, t0, 0, 0, c0)
    rng = np.random.default_rng(params.seed)
    T = _Tree(qs, xs, min(params.max_samples, 4096) + 1)
    for k in range(1, params.max_samples + 1):
        y = qs.sample_global(rng)[0]
        v = _extend(qs, T, y, params.eta)
        if v is None:
            continue
        g = _goal_edge(qs, T.X[v], xg, params.eta)
        if g is not None:
            reps, parts = _tree_path(T, v)
            P = _assemble(qs, reps + [xg], parts + [g[0]])
            return _result(SUCCESS, qs, t0, k, T.n, c0, _finish(qs, P))
    return _result(EXHAUSTED, qs, t0, params.max_samples, T.n, c0)


def _connect(qs: QuotientSpace, T: _Tree, target, eta: float):
    """Greedy connect: step T toward the class of target until it is reached or blocked.

    Returns ``(vertex, parts)`` for a free edge vertex -> act(parts, target), or None.
    """
    while True:
        i, d, parts = T.nearest(target)
        y_e = qs.act(parts, target)
        if d <= eta:
            if qs.edges_free(T.X[i][None], y_e[None])[0]:
                return i, parts
            return None
        x_new, step = _steer(qs, T.X[i], y_e, d, eta)
        if not qs.edges_free(T.X[i][None], x_new[None])[0]:
            return None
        T.add(x_new, i, qs.identity_parts, step)


def birrt(problem: Problem, qs: QuotientSpace, params: PlannerParams) -> PlanResult:
    """Bidirectional RRT: extend one tree, greedily connect the other, swap every iteration."""
    t0 = time.perf_counter()
    c0 = qs.checks
    xs, xg, ok = _prepare(problem, qs)
    if not ok:
        return _result(INFEASIBLE, qs, t0, 0, 0, c0)
    rng = np.random.default_rng(params.seed)
    cap = min(params.max_samples, 4096) + 1
    Ta, Tb = _Tree(qs, xs, cap), _Tree(qs, xg, cap)
    a_is_start = True
    G = qs.group
    for k in range(1, params.max_samples + 1):
        y = qs.sample_global(rng)[0]
        v = _extend(qs, Ta, y, params.eta)
        if v is not None:
            hit = _connect(qs, Tb, Ta.X[v], params.eta)
            if hit is not None:
                j, p = hit
                ra, pa = _tree_path(Ta, v)
                rb, pb = _tree_path(Tb, j)
                # reversed edges use inverse elements: G-invariance keeps them free
                if a_is_start:
                    reps = ra + rb[::-1]
                    parts = pa + [G.inverse_parts(p)] + [G.inverse_parts(q) for q in pb[::-1]]
                else:
                    reps = rb + ra[::-1]
                    parts = pb + [p] + [G.inverse_parts(q) for q in pa[::-1]]
                P = _assemble(qs, reps, parts)
                return _result(SUCCESS, qs, t0, k, Ta.n + Tb.n, c0, _finish(qs, P))
        Ta, Tb = Tb, Ta
        a_is_start = not a_is_start
    return _result(EXHAUSTED, qs, t0, params.max_samples, Ta.n + Tb.n, c0)


def rrt_star(problem: Problem, qs: QuotientSpace, params: PlannerParams) -> PlanResult:
    """RRT* with radius min(eta, rho (log n / n)^(1/(d+1))); runs the whole sample budget."""
    t0 = time.perf_counter()
    c0 = qs.checks
    xs, xg, ok = _prepare(problem, qs)
    if not ok:
        return _result(INFEASIBLE, qs, t0, 0, 0, c0)
    d = qs.space.effective_dim()
    rho = params.rho_rrt if params.rho_rrt is not None else rrt_star_rho(bound_inputs(qs, params))
    t_setup = time.perf_counter() - t0
    rng = np.random.default_rng(params.seed)
    T = _Tree(qs, xs, params.max_samples + 1)
    G, s = qs.group, qs.space
    goal_parts: dict = {}
    history = []
    best = math.inf
    for k in range(1, params.max_samples + 1):
        y = qs.sample_global(rng)[0]
        i, dn, parts = T.nearest(y)
        if dn <= 1e-12:
            continue
        x_new, _ = _steer(qs, T.X[i], qs.act(parts, y), dn, params.eta)
        if not qs.edges_free(T.X[i][None], x_new[None])[0]:
            continue
        n = T.n
        r = min(params.eta, rho * (math.log(n + 1) / (n + 1)) ** (1 / (d + 1)))
        D, P_in = qs.distances(T.X[:n], x_new)
        near = np.nonzero(D <= r)[0]
        if i not in near:
            near = np.append(near, i)
        Y_e = qs.act(P_in[near], np.broadcast_to(x_new, (len(near), s.flat_size)))
        free = qs.edges_free(T.X[near], Y_e)
        free[near == i] = True
        cand = np.where(free, T.cost[near] + D[near], np.inf)
        b = int(np.argmin(cand))
        v = T.add(x_new, int(near[b]), P_in[near[b]], float(s.distance(T.X[near[b]], Y_e[b])))
        # rewire: the reversed segment x_new -> act(inv, X[u]) is free iff the checked one is
        for u, ok_u in zip(near, free):
            u = int(u)
            if not ok_u or u == T.parent[v]:
                continue
            inv = G.inverse_parts(P_in[u])
            q_e = G.act_flat(s, inv, T.X[u])
            length = float(s.distance(x_new, q_e))
            if T.cost[v] + length < T.cost[u] - 1e-12:
                T.reparent(u, v, inv, length)
        g = _goal_edge(qs, x_new, xg, params.eta)
        if g is not None:
            goal_parts[v] = g
        if goal_parts:
            ids = np.fromiter(goal_parts, dtype=np.int64)
            tot = T.cost[ids] + np.array([goal_parts[j][1] for j in ids])
            c = float(tot.min())
            if c < best:
                best = c
                history.append((k, c))
    timings = {"setup": t_setup}
    if not goal_parts:
        return _result(EXHAUSTED, qs, t0, params.max_samples, T.n, c0, timings=timings, history=history)
    ids = list(goal_parts)
    costs = [T.cost[j] + goal_parts[j][1] for j in ids]
    vb = ids[int(np.argmin(costs))]
    reps, parts = _tree_path(T, vb)
    P = _assemble(qs, reps + [xg], parts + [goal_parts[vb][0]])
    return _result(SUCCESS, qs, t0, params.max_samples, T.n, c0, _finish(qs, P), timings, history)


# ---------------------------------------------------------------------------
# PRM*
# ---------------------------------------------------------------------------

def shortest_path(roadmap: Roadmap, start: int, goal: int) -> list:
    """Dijkstra over directed edge lengths; ties settle the lower vertex id first."""
    n = len(roadmap)
    if not (0 <= start < n and 0 <= goal < n):
        raise ValueError("vertex id out of range")
    dist = {start: 0.0}
    prev = {start: -1}
    done = set()
    heap = [(0.0, start)]
    while heap:
        du, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        if u == goal:
            path = [u]
            while prev[path[-1]] >= 0:
                path.append(prev[path[-1]])
            return path[::-1]
        for v, e in roadmap.out[u].items():
            nd = du + e.length
            if v not in dist or nd < dist[v] or (nd == dist[v] and u < prev[v] and v not in done):
                dist[v] = nd
                prev[v] = u
                heapq.heappush(heap, (nd, v))
    raise ValueError(f"goal {goal} unreachable from {start}")


@dataclass
class PRMStar:
    """A built PRM* roadmap; `query` links start/goal, searches, then removes them again."""

    qs: QuotientSpace
    params: PlannerParams
    variant: str
    roadmap: Roadmap
    k: int
    radius: float
    samples: int
    build_time: float
    build_checks: int

    def _neighbors(self, D: np.ndarray) -> np.ndarray:
        if self.variant == "knn":
            k = min(self.k, len(D))
            return np.argsort(D, kind="stable")[:k]
        return np.nonzero(D <= self.radius)[0]

    def query(self, problem: Problem) -> PlanResult:
        qs, rm = self.qs, self.roadmap
        t0 = time.perf_counter()
        c0 = qs.checks
        xs, xg, ok = _prepare(problem, qs)
        if not ok:
            return _result(INFEASIBLE, qs, t0, self.samples, len(rm), c0)
        base = len(rm)
        s_id, g_id = (int(i) for i in rm.add_vertices(np.stack([xs, xg])))
        G = qs.group
        try:
            for vid, x, outgoing in ((s_id, xs, True), (g_id, xg, False)):
                D, P = qs.distances(rm.X[:base], x) if base else (np.zeros(0), None)
                nb = self._neighbors(D)
                if not len(nb):
                    continue
                Y = qs.act(P[nb], np.broadcast_to(x, (len(nb), x.size)))
                free = qs.edges_free(rm.X[nb], Y)
                for j, f, p in zip(nb, free, P[nb]):
                    if not f:
                        continue
                    j = int(j)
                    inv = G.inverse_parts(p)
                    if outgoing:
                        q_e = G.act_flat(qs.space, inv, rm.X[j])
                        rm.add_edge(vid, j, q_e, float(qs.space.distance(x, q_e)), G.index(inv))
                    else:
                        q_e = G.act_flat(qs.space, p, x)
                        rm.add_edge(j, vid, q_e, float(qs.space.distance(rm.X[j], q_e)), G.index(p))
            try:
                ids = shortest_path(rm, s_id, g_id)
            except ValueError:
                return _result(EXHAUSTED, qs, t0, self.samples, base, c0, timings={"query": time.perf_counter() - t0})
            P, _ = lift_flat(rm, ids)
            path = _finish(qs, P)
        finally:
            rm.truncate(base)
        return _result(SUCCESS, qs, t0, self.samples, base, c0, path, {"query": time.perf_counter() - t0})


def build_prm_star(qs: QuotientSpace, params: PlannerParams, variant: str = "knn",
                   chunk: int = 256) -> PRMStar:
    """Sample ``max_samples`` configurations, keep the free ones, connect neighbors under q_dist."""
    if variant not in ("knn", "radius"):
        raise ValueError("variant must be 'knn' or 'radius'")
    t0 = time.perf_counter()
    c0 = qs.checks
    rng = np.random.default_rng(params.seed)
    s, G = qs.space, qs.group
    d = s.effective_dim()
    X = qs.sample_global(rng, params.max_samples)
    X = X[qs.free(X)]
    n = max(len(X), 2)
    k = knn_count(n, d, params.knn_k_const)
    radius = math.inf
    if variant == "radius":
        rho = params.rho_prm if params.rho_prm is not None else prm_star_rho(bound_inputs(qs, params))
        radius = rho * (math.log(n) / n) ** (1 / d)
    rm = Roadmap(s, G)
    rm.add_vertices(X)
    pairs = set()
    for lo in range(0, len(X), chunk):
        D, _ = qs.distances(X[lo: lo + chunk, None, :], X[None, :, :])
        for r in range(len(D)):
            i = lo + r
            D[r, i] = np.inf
            if variant == "knn":
                kk = min(k, len(X) - 1)
                nb = np.argpartition(D[r], kk - 1)[:kk] if kk < len(X) else np.arange(len(X))
            else:
                nb = np.nonzero(D[r] <= radius)[0]
            pairs.update((min(i, int(j)), max(i, int(j))) for j in nb)
    if pairs:
        A, B = np.array(sorted(pairs), dtype=np.int64).T
        lengths, Pp = qs.distances(X[A], X[B])
        Y = G.act_flat(s, Pp, X[B])
        free = np.concatenate([qs.edges_free(X[A[lo: lo + 4096]], Y[lo: lo + 4096])
                               for lo in range(0, len(A), 4096)])
        # reversed edges use the inverse element: G-invariance keeps them free
        inv = G.inverse_parts(Pp)
        Yr = G.act_flat(s, inv, X[A])
        rlengths = s.distance(X[B], Yr)
        fwd = np.ravel_multi_index(tuple(Pp.T), G.shape)
        bwd = np.ravel_multi_index(tuple(inv.T), G.shape)
        for t in np.nonzero(free)[0].tolist():
            a, b = int(A[t]), int(B[t])
            rm.add_edge(a, b, Y[t], float(lengths[t]), int(fwd[t]))
            rm.add_edge(b, a, Yr[t], float(rlengths[t]), int(bwd[t]))
    return PRMStar(qs, params, variant, rm, k, radius, params.max_samples,
                   time.perf_counter() - t0, qs.checks - c0)


def prm_star(problems: Sequence[Problem], qs: QuotientSpace, params: PlannerParams,
             variant: str = "knn"):
    """Build once, answer every query; returns (roadmap, results)."""
    planner = build_prm_star(qs, params, variant)
    results = []
    for pr in problems:
        res = planner.query(pr)
        res.timings["construction"] = planner.build_time
        res.collision_checks += planner.build_checks
        results.append(res)
    return planner.roadmap, results


PLANNERS = {
    "rrt": rrt,
    "birrt": birrt,
    "rrt_star": rrt_star,
}


def plan(name: str, problem: Problem, qs: QuotientSpace, params: PlannerParams) -> PlanResult:
    if name in PLANNERS:
        return PLANNERS[name](problem, qs, params)
    if name in ("prm_star_knn", "prm_star_radius"):
        _, (res,) = prm_star([problem], qs, params, name.rsplit("_", 1)[1])
        return res
    raise ValueError(f"unknown planner {name!r}")


def validate_result(result: PlanResult, problem: Problem, qs: QuotientSpace, tol: float = 1e-9) -> list:
    """Re-check a success: endpoint classes, every segment free, reported length."""
    if not result.success:
        return []
    issues = []
    s = qs.space
    P = np.array([s.pack(q) for q in result.path.waypoints])
    if float(quotient_distances(s, qs.group, P[0], s.pack(problem.start))[0]) > tol:
        issues.append("path does not start in the start class")
    if float(quotient_distances(s, qs.group, P[-1], s.pack(problem.goal))[0]) > tol:
        issues.append("path does not end in the goal class")
    if len(P) > 1:
        if not qs.edges_free(P[:-1], P[1:]).all():
            issues.append("a segment collides")
        total = float(np.sum(s.distance(P[:-1], P[1:])))
    else:
        total = 0.0
    if abs(total - result.length) > tol:
        issues.append(f"length mismatch: reported {result.length}, recomputed {total}")
    return issues
