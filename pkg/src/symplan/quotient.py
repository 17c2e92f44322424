"""Planning primitives on the quotient Q/G and the directed roadmap that stores their output.

Distance on Q/G is the minimum over the orbit of one argument.  Because a
factor only rotates its own body and the metric is a sum of per-body terms,
the minimum splits into independent per-factor minima: the cost is linear in
the number of bodies even though |G| is a product.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .collision import CollisionChecker, MovingObject, World, check_object_symmetry, space_for
from .geometry import (
    Config,
    ConfigSpace,
    MetricWeights,
    angle_dist,
    qconj,
    qfold,
    qmul,
    quat_angle,
    sample_ball,
    sample_uniform,
    wrap_angle,
)
from .symmetry import GroupElement, SymmetryGroup, act, group_from_json, group_to_json, trivial_group

CLASS_TOL = 1e-9


# ---------------------------------------------------------------------------
# vectorized quotient distance
# ---------------------------------------------------------------------------

def quotient_sq_distances(space: ConfigSpace, G: SymmetryGroup, X, Y):
    """Squared Q/G distances between rows of X and Y (broadcast) and minimizing parts.

    Returns ``(sq, parts)`` where ``parts[..., f]`` is the index within factor
    ``f`` of the element g minimizing d(X, g.Y); ties go to the lowest index.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    lead = np.broadcast_shapes(X.shape[:-1], Y.shape[:-1])
    dt = X[..., : space.n_t] - Y[..., : space.n_t]
    sq = np.broadcast_to(np.sum(dt * dt, axis=-1), lead).copy()
    ang = np.broadcast_to(space.rotation_dists(X, Y), lead + (space.n_objects,)).copy()
    parts = np.zeros(lead + (len(G.factors),), dtype=np.int64)
    RX, RY = space.rots(X), space.rots(Y)
    for f, fac in enumerate(G.factors):
        if fac.order == 1:
            continue
        i = fac.obj
        if space.dim == 2:
            cand = angle_dist(RX[..., i, None], RY[..., i, None] - fac.rotations)
        else:
            moved = qmul(RY[..., i, None, :], qconj(fac.rotations))
            cand = quat_angle(RX[..., i, None, :], moved)
        k = np.argmin(cand, axis=-1)
        parts[..., f] = k
        ang[..., i] = np.take_along_axis(cand, k[..., None], axis=-1)[..., 0]
    rot = space.w * ang
    return sq + np.sum(rot * rot, axis=-1), parts


def quotient_distances(space: ConfigSpace, G: SymmetryGroup, X, Y):
    sq, parts = quotient_sq_distances(space, G, X, Y)
    return np.sqrt(sq), parts


# ---------------------------------------------------------------------------
# class points
# ---------------------------------------------------------------------------

def _same_group(a: SymmetryGroup, b: SymmetryGroup) -> bool:
    return a is b or a.descriptor == b.descriptor


class ClassPoint:
    """An orbit [q] = G.q carried by one representative."""

    __slots__ = ("representative", "group")

    def __init__(self, representative: Config, group: SymmetryGroup):
        if representative.dim != group.dim or group.max_object >= representative.n_objects:
            raise ValueError("group does not act on this configuration")
        self.representative = representative
        self.group = group

    def __eq__(self, other):
        if not isinstance(other, ClassPoint):
            return NotImplemented
        if not _same_group(self.group, other.group):
            return False
        if self.representative.translations.shape != other.representative.translations.shape:
            return False
        s = ConfigSpace.for_config(self.representative)
        sq, _ = quotient_sq_distances(s, self.group, s.pack(self.representative), s.pack(other.representative))
        return bool(math.sqrt(float(sq)) <= CLASS_TOL)

    __hash__ = None

    def __repr__(self):
        return f"ClassPoint({self.representative!r}, {self.group.name})"


def q_dist(a: ClassPoint, b: ClassPoint, w: Optional[MetricWeights] = None):
    """Quotient distance and the element g (lowest index on ties) with d(a, g.b) minimal."""
    if not _same_group(a.group, b.group):
        raise ValueError("class points belong to different groups")
    if a.representative.translations.shape != b.representative.translations.shape:
        raise ValueError("class points live in different spaces")
    G = a.group
    s = ConfigSpace.for_config(a.representative, w)
    xa, xb = s.pack(a.representative), s.pack(b.representative)
    _, parts = quotient_sq_distances(s, G, xa, xb)
    g = G.element(G.index(parts))
    length = float(s.distance(xa, G.act_flat(s, parts, xb)))
    return length, g


def project(q: Config, G: SymmetryGroup) -> ClassPoint:
    return ClassPoint(q, G)


def sample_global_q(space: ConfigSpace, G: SymmetryGroup, rng: np.random.Generator) -> ClassPoint:
    return ClassPoint(sample_uniform(space, rng), G)


def sample_local_q(center: ClassPoint, r: float, w: Optional[MetricWeights],
                   rng: np.random.Generator, G: Optional[SymmetryGroup] = None) -> ClassPoint:
    return ClassPoint(sample_ball(center.representative, r, w, rng), G or center.group)


def canonicalize(q: Config, G: SymmetryGroup, tol: float = 1e-9) -> Config:
    """Deterministic orbit member: per acted-on body, the lexicographically least orientation.

    Angles are compared in [0, 2*pi) with values within ``tol`` of 2*pi read
    as 0; quaternions are sign-folded and compared component by component
    with tolerance ``tol``.
    """
    if q.dim != G.dim or G.max_object >= q.n_objects:
        raise ValueError("group does not act on this configuration")
    r = np.array(q.rotations)
    for fac in G.factors:
        i = fac.obj
        if q.dim == 2:
            cand = wrap_angle(r[i] - fac.rotations)
            key = np.where(cand >= 2 * math.pi - tol, 0.0, cand)
            r[i] = key[int(np.argmin(key))]
        else:
            cand = qfold(qmul(r[i][None, :], qconj(fac.rotations)), tol)
            best = cand[0]
            for c in cand[1:]:
                for cj, bj in zip(c, best):
                    if cj < bj - tol:
                        best = c
                        break
                    if cj > bj + tol:
                        break
            r[i] = best
    return Config(q.translations, r)


# ---------------------------------------------------------------------------
# planning adapter
# ---------------------------------------------------------------------------

class QuotientSpace:
    """The four sampling-planner primitives on Q/G, over flat configuration rows.

    With the trivial group this *is* the symmetry-unaware baseline: every
    planner runs the same code either way.
    """

    def __init__(self, space: ConfigSpace, group: SymmetryGroup,
                 checker: Optional[CollisionChecker] = None, resolution: float = 0.01):
        if group.dim != space.dim or group.max_object >= space.n_objects:
            raise ValueError("group does not act on this space")
        if not resolution > 0:
            raise ValueError("resolution must be positive")
        self.space = space
        self.group = group
        self.checker = checker
        self.resolution = resolution
        self.identity_parts = np.zeros(len(group.factors), dtype=np.int64)

    @classmethod
    def from_world(cls, world: World, objects, group: Optional[SymmetryGroup] = None,
                   resolution: float = 0.01, check_symmetry: bool = True) -> "QuotientSpace":
        """Adapter for bodies in a world; ``group`` defaults to the bodies' joint symmetry."""
        from .collision import joint_group

        objects = [objects] if isinstance(objects, MovingObject) else list(objects)
        if check_symmetry:
            for o in objects:
                ok, dev = check_object_symmetry(o)
                if not ok:
                    raise ValueError(f"shape is not invariant under its group (deviation {dev:.3g})")
        space = space_for(world, objects)
        G = group if group is not None else joint_group(objects)
        return cls(space, G, CollisionChecker(world, objects, space), resolution)

    def with_group(self, group: SymmetryGroup) -> "QuotientSpace":
        checker = None
        if self.checker is not None:
            checker = CollisionChecker(self.checker.world, self.checker.objects, self.space)
        return QuotientSpace(self.space, group, checker, self.resolution)

    def unaware(self) -> "QuotientSpace":
        return self.with_group(trivial_group(self.space.dim))

    @property
    def order(self) -> int:
        return self.group.order

    @property
    def checks(self) -> int:
        return 0 if self.checker is None else self.checker.checks

    # primitive 1: distance
    def distances(self, x, Y):
        return quotient_distances(self.space, self.group, x, Y)

    def act(self, parts, X):
        return self.group.act_flat(self.space, parts, X)

    def edge_length(self, x, y_e) -> float:
        return float(self.space.distance(x, y_e))

    # primitives 2 and 3: samplers
    def sample_global(self, rng, n: int = 1):
        return self.space.sample(rng, n)

    def sample_local(self, x, r: float, rng, n: int = 1):
        return self.space.sample_ball(x, r, rng, n)

    # primitive 4: local planner
    def free(self, X) -> np.ndarray:
        X = np.atleast_2d(X)
        if self.checker is None:
            return self.space.contains(X)
        return self.checker.free_mask(X)

    def edges_free(self, A, B) -> np.ndarray:
        if self.checker is None:
            A = np.atleast_2d(A)
            B = np.atleast_2d(B)
            return self.space.contains(A) & self.space.contains(B)
        return self.checker.edges_free(A, B, self.resolution)

    def local_plan(self, x, y):
        """Minimizing lift ``y_e`` of [y] seen from x, if that geodesic is free.

        Returns ``(y_e, length, parts)`` or ``None``.
        """
        _, parts = self.distances(x, y)
        y_e = self.act(parts, y)
        if not self.edges_free(x[None], y_e[None])[0]:
            return None
        return y_e, self.edge_length(x, y_e), parts


def local_plan(a: ClassPoint, b: ClassPoint, world: Optional[World], objects,
               w: Optional[MetricWeights] = None, resolution: float = 0.01):
    """Collision-checked minimizing geodesic from [a] to [b]: ``(q_e, length)`` or ``None``.

    ``w`` defaults to the bodies' own rotation weights.
    """
    if world is None:
        length, g = q_dist(a, b, w)
        return act(g, b.representative), length
    checker = CollisionChecker(world, objects)
    s = checker.space
    if w is not None:
        s = ConfigSpace(s.dim, s.n_objects, s.lower, s.upper, w)
        checker = CollisionChecker(world, objects, s)
    length, g = q_dist(a, b, s.weights)
    q_e = act(g, b.representative)
    if not checker.edges_free(s.pack(a.representative)[None], s.pack(q_e)[None], resolution)[0]:
        return None
    return q_e, length


# ---------------------------------------------------------------------------
# roadmap and path lifting
# ---------------------------------------------------------------------------

class Edge(NamedTuple):
    q_e: np.ndarray   # flat end point, a member of the target's orbit
    length: float
    element: int      # index of g with q_e = g . q_target


class Roadmap:
    """Directed graph over Q/G; each edge stores its own end point in the target orbit."""

    def __init__(self, space: ConfigSpace, group: SymmetryGroup):
        self.space = space
        self.group = group
        self._X = np.empty((64, space.flat_size))
        self.n = 0
        self.out: list = []

    @property
    def X(self) -> np.ndarray:
        return self._X[: self.n]

    def __len__(self):
        return self.n

    def add_vertex(self, x) -> int:
        if self.n == len(self._X):
            self._X = np.concatenate([self._X, np.empty_like(self._X)])
        self._X[self.n] = x
        self.out.append({})
        self.n += 1
        return self.n - 1

    def add_vertices(self, X) -> np.ndarray:
        X = np.atleast_2d(X)
        need = self.n + len(X)
        if need > len(self._X):
            grown = np.empty((max(need, 2 * len(self._X)), self.space.flat_size))
            grown[: self.n] = self._X[: self.n]
            self._X = grown
        self._X[self.n: need] = X
        self.out.extend({} for _ in range(len(X)))
        ids = np.arange(self.n, need)
        self.n = need
        return ids

    def add_edge(self, src: int, dst: int, q_e, length: float, element: int) -> None:
        self.out[src][dst] = Edge(np.asarray(q_e, dtype=float), float(length), int(element))

    def edge(self, src: int, dst: int) -> Edge:
        try:
            return self.out[src][dst]
        except (KeyError, IndexError):
            raise KeyError(f"no edge {src} -> {dst}") from None

    def has_edge(self, src: int, dst: int) -> bool:
        return 0 <= src < self.n and dst in self.out[src]

    def edges(self):
        for src, nbrs in enumerate(self.out):
            for dst, e in nbrs.items():
                yield src, dst, e

    @property
    def n_edges(self) -> int:
        return sum(len(o) for o in self.out)

    def vertex(self, i: int) -> Config:
        return self.space.unpack(self._X[i])

    def truncate(self, n: int) -> None:
        """Drop vertices with id >= n and every edge touching them."""
        self.out = self.out[:n]
        self.n = n
        for nbrs in self.out:
            for dst in [d for d in nbrs if d >= n]:
                del nbrs[dst]

    def validate(self, tol: float = 1e-9) -> list:
        """Edge invariants: end point in the target orbit, length equal to both distances."""
        problems = []
        G, s = self.group, self.space
        for src, dst, e in self.edges():
            parts = np.array(G.parts(e.element))
            if not np.all(np.abs(s.distance(e.q_e, G.act_flat(s, parts, self._X[dst]))) <= tol):
                problems.append((src, dst, "end point not in target orbit"))
            d_base = float(s.distance(self._X[src], e.q_e))
            d_quot = float(quotient_distances(s, G, self._X[src], self._X[dst])[0])
            if abs(d_base - e.length) > tol or abs(d_quot - e.length) > tol:
                problems.append((src, dst, "length mismatch"))
        return problems

    def to_json(self) -> dict:
        s = self.space
        return {
            "space": {
                "dim": s.dim,
                "n_objects": s.n_objects,
                "lower": None if s.lower is None else s.lower.tolist(),
                "upper": None if s.upper is None else s.upper.tolist(),
                "weights": list(s.weights.rotation_weight),
            },
            "group": group_to_json(self.group),
            "vertices": [{"id": i, "config": _config_json(s.unpack(x))} for i, x in enumerate(self.X)],
            "edges": [
                {"src": a, "dst": b, "q_e": _config_json(s.unpack(e.q_e)), "length": e.length,
                 "element": e.element}
                for a, b, e in self.edges()
            ],
        }

    @classmethod
    def from_json(cls, data: dict) -> "Roadmap":
        sp = data["space"]
        space = ConfigSpace(sp["dim"], sp["n_objects"], sp["lower"], sp["upper"],
                            MetricWeights(tuple(sp["weights"])))
        rm = cls(space, group_from_json(data["group"]))
        for v in sorted(data["vertices"], key=lambda v: v["id"]):
            rm.add_vertex(space.pack(_config_from_json(v["config"])))
        for e in data["edges"]:
            rm.add_edge(e["src"], e["dst"], space.pack(_config_from_json(e["q_e"])), e["length"], e["element"])
        return rm

    def dumps(self) -> str:
        return json.dumps(self.to_json())


def _config_json(q: Config) -> dict:
    return {"translations": q.translations.tolist(), "rotations": q.rotations.tolist()}


def _config_from_json(d: dict) -> Config:
    return Config(d["translations"], d["rotations"])


@dataclass
class LiftedPath:
    """Waypoints in Q joined by minimizing geodesics."""

    waypoints: list
    total_length: float
    graph_length: float

    def to_json(self) -> dict:
        return {"waypoints": [_config_json(q) for q in self.waypoints],
                "total_length": self.total_length}


def lift_flat(roadmap: Roadmap, path: Sequence[int]) -> tuple:
    """Lift a vertex path to flat waypoints; returns (waypoints array, graph length)."""
    if len(path) == 0:
        raise ValueError("empty vertex path")
    G, s = roadmap.group, roadmap.space
    h = np.zeros(len(G.factors), dtype=np.int64)
    pts = [roadmap.X[path[0]].copy()]
    graph_len = 0.0
    for u, v in zip(path[:-1], path[1:]):
        try:
            e = roadmap.edge(u, v)
        except KeyError as exc:
            raise ValueError(str(exc)) from None
        pts.append(G.act_flat(s, h, e.q_e))
        h = G.compose_parts(h, np.array(G.parts(e.element)))
        graph_len += e.length
    return np.array(pts), graph_len


def lift_path(roadmap: Roadmap, path: Sequence[int]) -> LiftedPath:
    """Turn a directed vertex path into a continuous path in Q of the same length."""
    P, graph_len = lift_flat(roadmap, path)
    s = roadmap.space
    total = float(np.sum(s.distance(P[:-1], P[1:]))) if len(P) > 1 else 0.0
    return LiftedPath([s.unpack(p) for p in P], total, graph_len)
