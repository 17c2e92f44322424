"""Convex collision checking for symmetric rigid bodies among convex obstacles.

Touching counts as collision.  2D pairs use a vectorized separating-axis
test; 3D pairs use a boolean GJK on vertex sets.  Edges are checked by
discretizing the geodesic, so an edge is only as safe as its resolution.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import ConvexHull
from scipy.spatial import QhullError

from .geometry import ConfigSpace, Config, MetricWeights, quat_to_matrix
from .symmetry import SymmetryGroup, product

GJK_MARGIN = 1e-9


class ConvexShape:
    """Convex polygon/polytope given by its hull vertices (2D vertices in CCW order)."""

    def __init__(self, vertices):
        pts = np.asarray(vertices, dtype=float)
        if pts.ndim != 2 or pts.shape[1] not in (2, 3):
            raise ValueError(f"vertices must be (k, 2) or (k, 3), got {pts.shape}")
        need = 3 if pts.shape[1] == 2 else 4
        if len(pts) < need:
            raise ValueError(f"a {pts.shape[1]}D convex shape needs at least {need} vertices")
        try:
            hull = ConvexHull(pts)
        except QhullError as exc:
            raise ValueError("degenerate vertex set (collinear/coplanar)") from exc
        v = pts[hull.vertices].copy()
        v.flags.writeable = False
        self.vertices = v
        self.volume = float(hull.volume)

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def centroid(self) -> np.ndarray:
        return self.vertices.mean(axis=0)

    @property
    def circumradius(self) -> float:
        """Largest vertex distance from the body-frame origin."""
        return float(np.max(np.linalg.norm(self.vertices, axis=1)))

    @property
    def aabb(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def centered(self) -> "ConvexShape":
        return ConvexShape(self.vertices - self.centroid)

    def to_json(self) -> dict:
        return {"vertices": self.vertices.tolist()}

    def __repr__(self):
        return f"ConvexShape({len(self.vertices)} vertices, dim={self.dim})"


# -- body-frame shape factories (all centered on the vertex mean) -------------

def regular_polygon(n: int, circumradius: float = 0.1, phase: float = 0.0) -> ConvexShape:
    a = phase + 2.0 * math.pi * np.arange(n) / n
    return ConvexShape(circumradius * np.stack([np.cos(a), np.sin(a)], axis=1))


def rectangle(width: float, height: float) -> ConvexShape:
    w, h = width / 2.0, height / 2.0
    return ConvexShape([[-w, -h], [w, -h], [w, h], [-w, h]])


def pyramid(n: int, radius: float = 0.1, height: float = 0.15) -> ConvexShape:
    a = 2.0 * math.pi * np.arange(n) / n
    base_z = -height / (n + 1)
    base = np.stack([radius * np.cos(a), radius * np.sin(a), np.full(n, base_z)], axis=1)
    apex = np.array([[0.0, 0.0, height * n / (n + 1)]])
    return ConvexShape(np.vstack([base, apex]))


def prism(n: int, radius: float = 0.1, height: float = 0.1) -> ConvexShape:
    a = 2.0 * math.pi * np.arange(n) / n
    ring = np.stack([radius * np.cos(a), radius * np.sin(a)], axis=1)
    top = np.hstack([ring, np.full((n, 1), height / 2)])
    bottom = np.hstack([ring, np.full((n, 1), -height / 2)])
    return ConvexShape(np.vstack([top, bottom]))


def tetrahedron(circumradius: float = 0.1) -> ConvexShape:
    v = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float)
    return ConvexShape(v * circumradius / math.sqrt(3.0))


def cube(circumradius: float = 0.1) -> ConvexShape:
    s = np.array([-1.0, 1.0])
    v = np.array(np.meshgrid(s, s, s, indexing="ij")).reshape(3, -1).T
    return ConvexShape(v * circumradius / math.sqrt(3.0))


def icosahedron(circumradius: float = 0.1) -> ConvexShape:
    phi = (1.0 + math.sqrt(5.0)) / 2.0
    base = []
    for a in (-1.0, 1.0):
        for b in (-phi, phi):
            base += [[0.0, a, b], [a, b, 0.0], [b, 0.0, a]]
    v = np.array(base)
    return ConvexShape(v * circumradius / np.linalg.norm(v[0]))


@dataclass(frozen=True, eq=False)
class MovingObject:
    """A body-frame convex shape with its symmetry group and rotation weight."""

    shape: ConvexShape
    symmetry: SymmetryGroup
    weight: Optional[float] = None

    def __post_init__(self):
        if self.shape.dim != self.symmetry.dim:
            raise ValueError("shape and symmetry group dimensions differ")
        if self.weight is None:
            object.__setattr__(self, "weight", self.shape.circumradius)
        if not self.weight > 0:
            raise ValueError("rotation weight must be positive")


def check_object_symmetry(obj: MovingObject, tol: float = 1e-9):
    """Whether every group element maps the vertex set onto itself; returns (ok, worst deviation)."""
    V = obj.shape.vertices
    worst = 0.0
    for fac in obj.symmetry.factors:
        for k in range(fac.order):
            rot = fac.rotation(k)
            Rv = V @ rot.as_matrix().T
            d = np.linalg.norm(Rv[:, None, :] - V[None, :, :], axis=-1)
            worst = max(worst, float(d.min(axis=1).max()), float(d.min(axis=0).max()))
    return worst <= tol, worst


class World:
    """Static convex obstacles in the world frame plus an axis-aligned translation box."""

    def __init__(self, obstacles: Sequence[ConvexShape], lower, upper):
        self.obstacles = tuple(obstacles)
        self.lower = np.asarray(lower, dtype=float).copy()
        self.upper = np.asarray(upper, dtype=float).copy()
        if self.lower.shape != self.upper.shape or self.lower.ndim != 1 or len(self.lower) not in (2, 3):
            raise ValueError("bounds must be two 2- or 3-vectors")
        if np.any(self.upper < self.lower):
            raise ValueError("bounds are empty")
        if any(o.dim != self.dim for o in self.obstacles):
            raise ValueError("obstacle dimension does not match the world")
        k = len(self.obstacles)
        self._lo = np.array([o.aabb[0] for o in self.obstacles]).reshape(k, self.dim)
        self._hi = np.array([o.aabb[1] for o in self.obstacles]).reshape(k, self.dim)
        if self.dim == 2 and k:
            pmax = max(len(o.vertices) for o in self.obstacles)
            packed = np.empty((k, pmax, 2))
            for i, o in enumerate(self.obstacles):
                v = o.vertices
                packed[i, : len(v)] = v
                packed[i, len(v):] = v[-1]  # zero-length padding edges never separate
            self._packed = packed

    @property
    def dim(self) -> int:
        return len(self.lower)

    def without(self, index: int) -> "World":
        obs = list(self.obstacles)
        del obs[index]
        return World(obs, self.lower, self.upper)

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "bounds": [[float(a), float(b)] for a, b in zip(self.lower, self.upper)],
            "obstacles": [o.to_json() for o in self.obstacles],
        }

    @classmethod
    def from_json(cls, data: dict) -> "World":
        b = np.asarray(data["bounds"], dtype=float)
        if b.shape != (int(data["dim"]), 2):
            raise ValueError("bounds must list [min, max] for every axis")
        return cls([ConvexShape(o["vertices"]) for o in data.get("obstacles", [])], b[:, 0], b[:, 1])


def save_scene(world: World, path) -> None:
    Path(path).write_text(json.dumps(world.to_json()))


def load_scene(path) -> World:
    return World.from_json(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------------
# narrow phase
# ---------------------------------------------------------------------------

def _edge_normals(S: np.ndarray) -> np.ndarray:
    e = np.roll(S, -1, axis=-2) - S
    return np.stack([e[..., 1], -e[..., 0]], axis=-1)


def sat_overlap_2d(P: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Pairwise overlap of convex polygons ``P[k]`` and ``Q[k]`` (touching overlaps)."""
    axes = np.concatenate([_edge_normals(P), _edge_normals(Q)], axis=-2)
    pp = np.einsum("...vd,...ad->...av", P, axes)
    qq = np.einsum("...wd,...ad->...aw", Q, axes)
    sep = (pp.max(-1) < qq.min(-1)) | (qq.max(-1) < pp.min(-1))
    return ~sep.any(-1)


def _closest_segment(a, b):
    ab = b - a
    denom = ab @ ab
    if denom <= 0.0:
        return a, [a]
    t = -(a @ ab) / denom
    if t <= 0.0:
        return a, [a]
    if t >= 1.0:
        return b, [b]
    return a + t * ab, [a, b]


def _closest_triangle(a, b, c):
    # Voronoi-region walk for the point closest to the origin
    ab, ac = b - a, c - a
    d1, d2 = -(ab @ a), -(ac @ a)
    if d1 <= 0.0 and d2 <= 0.0:
        return a, [a]
    d3, d4 = -(ab @ b), -(ac @ b)
    if d3 >= 0.0 and d4 <= d3:
        return b, [b]
    vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0 and d1 != d3:
        return a + (d1 / (d1 - d3)) * ab, [a, b]
    d5, d6 = -(ab @ c), -(ac @ c)
    if d6 >= 0.0 and d5 <= d6:
        return c, [c]
    vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0 and d2 != d6:
        return a + (d2 / (d2 - d6)) * ac, [a, c]
    va = d3 * d6 - d5 * d4
    if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0 and (d4 - d3) + (d5 - d6) > 0.0:
        return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b), [b, c]
    denom = va + vb + vc
    if denom <= 1e-300:
        cands = [_closest_segment(a, b), _closest_segment(a, c), _closest_segment(b, c)]
        return min(cands, key=lambda r: r[0] @ r[0])
    return a + ab * (vb / denom) + ac * (vc / denom), [a, b, c]


_TET_FACES = ((0, 1, 2, 3), (0, 2, 3, 1), (0, 3, 1, 2), (1, 3, 2, 0))


def _closest_tetra(s):
    best = None
    inside = True
    for i, j, k, l in _TET_FACES:
        p, q, r, o = s[i], s[j], s[k], s[l]
        n = np.cross(q - p, r - p)
        sp = -(p @ n)
        so = (o - p) @ n
        flat = abs(so) <= 1e-12 * np.linalg.norm(n) * (np.linalg.norm(o - p) + 1e-300)
        if flat or sp * so < 0.0:
            inside = False
            cand = _closest_triangle(p, q, r)
            if best is None or cand[0] @ cand[0] < best[0] @ best[0]:
                best = cand
    if inside:
        return np.zeros(3), list(s)
    return best


def _closest_on_simplex(s):
    if len(s) == 1:
        return s[0], s
    if len(s) == 2:
        return _closest_segment(s[0], s[1])
    if len(s) == 3:
        return _closest_triangle(s[0], s[1], s[2])
    return _closest_tetra(s)


def gjk_intersect(A: np.ndarray, B: np.ndarray, margin: float = GJK_MARGIN, max_iter: int = 64) -> bool:
    """Whether convex hulls of vertex sets ``A`` and ``B`` intersect (distance <= margin)."""
    v = A.mean(axis=0) - B.mean(axis=0)
    if not np.any(v):
        return True
    simplex = [A[np.argmax(A @ v)] - B[np.argmin(B @ v)]]
    v = simplex[0]
    for _ in range(max_iter):
        vv = v @ v
        if vv <= margin * margin:
            return True
        w = A[np.argmin(A @ v)] - B[np.argmax(B @ v)]
        vw = v @ w
        nv = math.sqrt(vv)
        if vw > margin * nv:
            return False
        if vv - vw <= 1e-12 * vv or any(np.array_equal(w, p) for p in simplex):
            return nv <= margin
        simplex.append(w)
        v, simplex = _closest_on_simplex(simplex)
        if len(simplex) == 4:
            return True
    return True  # no convergence: report collision, the conservative answer


# ---------------------------------------------------------------------------
# batched checker
# ---------------------------------------------------------------------------

def space_for(world: World, objects: Sequence[MovingObject]) -> ConfigSpace:
    objects = list(objects)
    return ConfigSpace(world.dim, len(objects), world.lower, world.upper,
                       MetricWeights(tuple(o.weight for o in objects)))


def joint_group(objects: Sequence[MovingObject]) -> SymmetryGroup:
    objects = list(objects)
    if len(objects) == 1:
        return objects[0].symmetry
    return product([(o.symmetry, i) for i, o in enumerate(objects)])


def _as_list(objects):
    return [objects] if isinstance(objects, MovingObject) else list(objects)


class CollisionChecker:
    """Batched freeness queries for one world and one tuple of moving bodies.

    ``checks`` counts single-configuration queries, a hardware-independent
    effort proxy.
    """

    def __init__(self, world: World, objects, space: Optional[ConfigSpace] = None):
        self.world = world
        self.objects = _as_list(objects)
        self.space = space if space is not None else space_for(world, self.objects)
        if self.space.dim != world.dim or self.space.n_objects != len(self.objects):
            raise ValueError("space does not match the world/bodies")
        self.checks = 0
        self._body = [o.shape.vertices for o in self.objects]
        self._radius = np.array([o.shape.circumradius for o in self.objects])
        self.trivial = not world.obstacles and len(self.objects) == 1

    def _placed(self, i: int, T: np.ndarray, R: np.ndarray) -> np.ndarray:
        body = self._body[i]
        if self.world.dim == 2:
            c, s = np.cos(R[:, i]), np.sin(R[:, i])
            x, y = body[:, 0], body[:, 1]
            return np.stack([c[:, None] * x - s[:, None] * y, s[:, None] * x + c[:, None] * y], -1) + T[:, i, None, :]
        M = quat_to_matrix(R[:, i])
        return np.einsum("nij,vj->nvi", M, body) + T[:, i, None, :]

    def free_mask(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        n = len(X)
        self.checks += n
        free = self.space.contains(X)
        if self.trivial or not free.any():
            return free
        idx = np.nonzero(free)[0]
        T = self.space.trans(X[idx])
        R = self.space.rots(X[idx])
        placed = [self._placed(i, T, R) for i in range(len(self.objects))]
        hit = np.zeros(len(idx), dtype=bool)
        w = self.world
        for i in range(len(self.objects)):
            if not w.obstacles:
                break
            c = T[:, i, :]
            gap = np.maximum(np.maximum(w._lo[None] - c[:, None], c[:, None] - w._hi[None]), 0.0)
            cand = np.sum(gap * gap, axis=-1) <= self._radius[i] ** 2
            pn, pk = np.nonzero(cand & ~hit[:, None])
            if not len(pn):
                continue
            if w.dim == 2:
                overlap = sat_overlap_2d(placed[i][pn], w._packed[pk])
                hit[pn[overlap]] = True
            else:
                for a, b in zip(pn, pk):
                    if not hit[a] and gjk_intersect(placed[i][a], w.obstacles[b].vertices):
                        hit[a] = True
        for i in range(len(self.objects)):
            for j in range(i + 1, len(self.objects)):
                d = np.linalg.norm(T[:, i] - T[:, j], axis=-1)
                cand = np.nonzero((d <= self._radius[i] + self._radius[j]) & ~hit)[0]
                if not len(cand):
                    continue
                if w.dim == 2:
                    hit[cand[sat_overlap_2d(placed[i][cand], placed[j][cand])]] = True
                else:
                    for a in cand:
                        if gjk_intersect(placed[i][a], placed[j][a]):
                            hit[a] = True
        free[idx[hit]] = False
        return free

    def is_free(self, q: Config) -> bool:
        return bool(self.free_mask(self.space.pack(q)[None])[0])

    def edges_free(self, A: np.ndarray, B: np.ndarray, resolution: float) -> np.ndarray:
        """Check many geodesic segments ``A[e] -> B[e]`` at spacing <= resolution."""
        A = np.atleast_2d(np.asarray(A, dtype=float))
        B = np.atleast_2d(np.asarray(B, dtype=float))
        A, B = np.broadcast_arrays(A, B)
        if not len(A):
            return np.zeros(0, dtype=bool)
        lengths = self.space.distance(A, B)
        nseg = np.maximum(np.ceil(lengths / resolution), 1).astype(np.int64)
        counts = nseg + 1
        if self.trivial:
            # empty box world: a segment between in-box endpoints stays in the box
            self.checks += int(counts.sum())
            return self.space.contains(A) & self.space.contains(B)
        offsets = np.cumsum(counts) - counts
        e = np.repeat(np.arange(len(A)), counts)
        t = (np.arange(int(counts.sum())) - offsets[e]) / nseg[e]
        pts = self.space.interpolate(A[e], B[e], t)
        return np.logical_and.reduceat(self.free_mask(pts), offsets)


def is_free(world: World, objects, q: Config) -> bool:
    return CollisionChecker(world, objects).is_free(q)


def edge_free(world: World, objects, a: Config, b: Config, resolution: float = 0.01) -> bool:
    chk = CollisionChecker(world, objects)
    xa, xb = chk.space.pack(a), chk.space.pack(b)
    chk.space.check_geodesic(xa, xb)
    return bool(chk.edges_free(xa[None], xb[None], resolution)[0])
