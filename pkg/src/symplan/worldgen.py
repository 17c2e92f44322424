"""Seeded random worlds and start/goal problems."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial import ConvexHull, Delaunay, QhullError

from .collision import CollisionChecker, ConvexShape, World
from .geometry import ConfigSpace, MetricWeights
from .quotient import quotient_distances
from .symmetry import SymmetryGroup

MAX_RETRIES = 8


@dataclass(frozen=True)
class WorldGenParams:
    dimension: int = 2
    lower: tuple = (0.0, 0.0)
    upper: tuple = (2.0, 2.0)
    n_points: int = 20
    alpha: float = 0.45
    n_clusters: int = 36
    cluster_spread: float = 0.45
    points_per_cluster: int = 12
    seed: int = 0

    def __post_init__(self):
        if self.dimension not in (2, 3):
            raise ValueError("dimension must be 2 or 3")
        if len(self.lower) != self.dimension or len(self.upper) != self.dimension:
            raise ValueError("bounds must match the dimension")
        if any(u <= l for l, u in zip(self.lower, self.upper)):
            raise ValueError("bounds must have positive extent")
        if min(self.n_points, self.n_clusters, self.points_per_cluster) < 1:
            raise ValueError("counts must be positive")
        if not self.alpha > 0 or not self.cluster_spread > 0:
            raise ValueError("alpha and cluster spread must be positive")

    @classmethod
    def default_3d(cls, seed: int = 0, **kw) -> "WorldGenParams":
        base = dict(dimension=3, lower=(0.0, 0.0, 0.0), upper=(2.0, 2.0, 2.0), seed=seed)
        base.update(kw)
        return cls(**base)


def alpha_triangles(points: np.ndarray, alpha: float) -> list:
    """Delaunay triangles with circumradius below ``alpha`` (the alpha complex's 2-cells)."""
    tri = Delaunay(points)
    P = points[tri.simplices]
    a = np.linalg.norm(P[:, 1] - P[:, 2], axis=1)
    b = np.linalg.norm(P[:, 0] - P[:, 2], axis=1)
    c = np.linalg.norm(P[:, 0] - P[:, 1], axis=1)
    cross = (P[:, 1, 0] - P[:, 0, 0]) * (P[:, 2, 1] - P[:, 0, 1]) - \
            (P[:, 1, 1] - P[:, 0, 1]) * (P[:, 2, 0] - P[:, 0, 0])
    area2 = np.abs(cross)
    with np.errstate(divide="ignore", invalid="ignore"):
        R = a * b * c / (2.0 * area2)
    keep = (area2 > 1e-12) & (R < alpha)
    return [P[i] for i in np.nonzero(keep)[0]]


def _substream(seed: int, attempt: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, attempt]))


def gen_world_2d(params: WorldGenParams) -> World:
    if params.dimension != 2:
        raise ValueError("gen_world_2d needs dimension 2")
    lo, hi = np.asarray(params.lower, float), np.asarray(params.upper, float)
    for attempt in range(MAX_RETRIES):
        rng = _substream(params.seed, attempt)
        pts = lo + (hi - lo) * rng.random((params.n_points, 2))
        try:
            tris = alpha_triangles(pts, params.alpha)
        except QhullError:
            continue
        return World([ConvexShape(t) for t in tris], lo, hi)
    raise RuntimeError("could not generate a non-degenerate point set")


def gen_world_3d(params: WorldGenParams) -> World:
    if params.dimension != 3:
        raise ValueError("gen_world_3d needs dimension 3")
    lo, hi = np.asarray(params.lower, float), np.asarray(params.upper, float)
    s = params.cluster_spread
    if np.any(hi - lo <= 2 * s):
        raise ValueError("cluster spread too large for the bounds")
    for attempt in range(MAX_RETRIES):
        rng = _substream(params.seed, attempt)
        centers = (lo + s) + (hi - lo - 2 * s) * rng.random((params.n_clusters, 3))
        obstacles = []
        try:
            for c in centers:
                pts = c + s * (2 * rng.random((params.points_per_cluster, 3)) - 1)
                hull = ConvexHull(pts)
                obstacles.append(ConvexShape(pts[hull.vertices]))
        except (QhullError, ValueError):
            continue
        return World(obstacles, lo, hi)
    raise RuntimeError("could not generate non-degenerate clusters")


def gen_world(params: WorldGenParams) -> World:
    return gen_world_2d(params) if params.dimension == 2 else gen_world_3d(params)


def gen_problem(world: World, objects, G: SymmetryGroup, w: Optional[MetricWeights],
                rng: np.random.Generator, max_tries: int = 10_000, batch: int = 64):
    """Free start and goal configurations in distinct classes.

    Raises RuntimeError when the rejection budget runs out.
    """
    checker = CollisionChecker(world, objects)
    space = checker.space
    if w is not None:
        space = ConfigSpace(space.dim, space.n_objects, space.lower, space.upper, w)
        checker = CollisionChecker(world, objects, space)
    found = []
    tried = 0
    while tried < max_tries:
        n = min(batch, max_tries - tried)
        X = space.sample(rng, n)
        tried += n
        for x in X[checker.free_mask(X)]:
            if found and float(quotient_distances(space, G, found[0], x)[0]) <= 1e-9:
                continue
            found.append(x)
            if len(found) == 2:
                return space.unpack(found[0]), space.unpack(found[1])
    raise RuntimeError("rejection budget exhausted: no free start/goal pair found")


def free_fraction(world: World, objects, samples: int, rng: np.random.Generator) -> float:
    checker = CollisionChecker(world, objects)
    X = checker.space.sample(rng, samples)
    return float(checker.free_mask(X).mean())
