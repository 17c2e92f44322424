"""Closed-form planner bounds with the symmetry factor |G|, and Monte-Carlo checks of the geometry behind them.

Ball volumes are Euclidean (zeta_d r^d), which is accurate only for radii well
below the injectivity radius and the curvature scale.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from .collision import CollisionChecker, World
from .geometry import Config, ConfigSpace, MetricWeights
from .quotient import quotient_distances
from .symmetry import SymmetryGroup


def unit_ball_volume(d: int) -> float:
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


def harmonic(n: int) -> float:
    return math.fsum(1.0 / i for i in range(1, n + 1))


@dataclass(frozen=True)
class BoundInputs:
    ell: float = 1.0          # path length
    delta: float = 0.1        # clearance
    eta: float = 0.1          # RRT step
    d: int = 3
    order: int = 1            # |G|
    p: float = 0.01           # ball-hit probability for radius nu/5
    vol_free: float = 1.0
    c_star: float = 1.0
    theta: float = 0.1
    mu: float = 0.1
    eps: float = 0.1

    def __post_init__(self):
        for name in ("ell", "delta", "eta", "p", "vol_free", "c_star"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.d < 1 or self.order < 1:
            raise ValueError("d and |G| must be >= 1")
        if not 0 < self.theta < 0.25:
            raise ValueError("theta must lie in (0, 1/4)")
        if not 0 < self.mu < 1 or not 0 < self.eps < 1:
            raise ValueError("mu and eps must lie in (0, 1)")

    @property
    def nu(self) -> float:
        return min(self.delta, self.eta)

    @property
    def m(self) -> int:
        # tolerance guards 5*ell/nu landing a hair above an integer
        return max(1, math.ceil(5 * self.ell / self.nu - 1e-9))

    def with_order(self, order: int) -> "BoundInputs":
        d = asdict(self)
        d["order"] = order
        return BoundInputs(**d)


def rrt_failure_log_bound(k: int, inp: BoundInputs) -> float:
    """Natural log of k^m m exp(-|G| p k) / (m-1)!."""
    if k < 1:
        raise ValueError("k must be >= 1")
    m = inp.m
    return m * math.log(k) + math.log(m) - inp.order * inp.p * k - math.lgamma(m)


def rrt_failure_bound(k: int, inp: BoundInputs, clamp: bool = True) -> float:
    """Upper bound on the probability RRT has not reached the goal after k iterations."""
    lb = rrt_failure_log_bound(k, inp)
    if clamp:
        return 1.0 if lb >= 0 else math.exp(lb)
    return math.exp(lb)


def prm_expected_samples(inp: BoundInputs) -> float:
    n = max(1, math.ceil(2 * inp.ell / inp.delta - 1e-9))
    ball = unit_ball_volume(inp.d) * (inp.delta / 2) ** inp.d
    return harmonic(n) * inp.vol_free / (inp.order * ball)


def prm_star_rho(inp: BoundInputs) -> float:
    d = inp.d
    return (2 * (1 + 1 / d) ** (1 / d) * (inp.vol_free / unit_ball_volume(d)) ** (1 / d)
            * inp.order ** (-1 / d))


def rrt_star_rho(inp: BoundInputs) -> float:
    d = inp.d
    inner = ((1 + inp.eps / 4) * inp.c_star * inp.vol_free
             / ((d + 1) * inp.theta * (1 - inp.mu) * unit_ball_volume(d)))
    return (2 + inp.theta) * inner ** (1 / (d + 1)) * inp.order ** (-1 / (d + 1))


def ball_hit_probability(vol: float, d: int, nu: float) -> float:
    """Flat-ball estimate of P[uniform sample lands in a given ball of radius nu/5]."""
    return min(1.0, unit_ball_volume(d) * (nu / 5) ** d / vol)


# ---------------------------------------------------------------------------
# Monte-Carlo checks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FreeVolume:
    volume: float
    stderr: float
    quotient_volume: float
    fraction: float
    samples: int


def estimate_free_volume(world: World, objects, G: SymmetryGroup, w: Optional[MetricWeights],
                         samples: int, rng: np.random.Generator, batch: int = 20_000) -> FreeVolume:
    checker = CollisionChecker(world, objects)
    space = checker.space
    if w is not None:
        space = ConfigSpace(space.dim, space.n_objects, space.lower, space.upper, w)
        checker = CollisionChecker(world, objects, space)
    hits = 0
    done = 0
    while done < samples:
        n = min(batch, samples - done)
        hits += int(checker.free_mask(space.sample(rng, n)).sum())
        done += n
    if hits == 0:
        raise ValueError("no free samples: free volume estimate is zero")
    f = hits / samples
    total = space.volume()
    vol = f * total
    se = math.sqrt(f * (1 - f) / samples) * total
    return FreeVolume(vol, se, vol / G.order, f, samples)


@dataclass(frozen=True)
class BallProbability:
    p_base: float
    p_quotient: float
    n_base: int
    n_quotient: int
    samples: int

    @property
    def ratio(self) -> float:
        return self.n_base / self.n_quotient if self.n_quotient else math.nan

    @property
    def ratio_stderr(self) -> float:
        # base ball sits inside the quotient ball, so the ratio is a conditional frequency
        r = self.ratio
        return math.sqrt(r * (1 - r) / self.n_quotient) if self.n_quotient else math.nan

    def z_score(self, expected: float) -> float:
        """Deviation of the ratio from ``expected`` in standard errors under that hypothesis.

        The null standard error stays meaningful when the base count is tiny,
        where the plug-in one collapses toward zero.
        """
        se = math.sqrt(expected * (1 - expected) / self.n_quotient)
        return (self.ratio - expected) / se if se > 0 else (0.0 if self.ratio == expected else math.inf)


def mc_ball_probability(space: ConfigSpace, G: SymmetryGroup, q: Config, eps: float,
                        samples: int, rng: np.random.Generator, batch: int = 100_000) -> BallProbability:
    """Empirical probabilities that a uniform sample is eps-close to q in Q and in Q/G."""
    r_inj = injectivity_radius_bound(space, G)
    if not eps < r_inj:
        raise ValueError(f"eps={eps} is not below the injectivity radius bound {r_inj}")
    x = space.pack(q)
    nb = nq = 0
    done = 0
    while done < samples:
        n = min(batch, samples - done)
        X = space.sample(rng, n)
        nb += int(np.sum(space.distance(x, X) < eps))
        nq += int(np.sum(quotient_distances(space, G, x, X)[0] < eps))
        done += n
    return BallProbability(nb / samples, nq / samples, nb, nq, samples)


def injectivity_radius_bound(space: ConfigSpace, G: SymmetryGroup) -> float:
    """Lower bound r_inj(Q)/|G|; only rotation factors bind (pi times their weight)."""
    return float(np.min(space.w) * math.pi) / G.order


def min_orbit_separation(G: SymmetryGroup, space: ConfigSpace, trials: int,
                         rng: np.random.Generator) -> float:
    """Smallest distance between two distinct orbit members over random configurations."""
    if G.is_trivial:
        return math.inf
    X = space.sample(rng, trials) if space.has_bounds else _unbounded_sample(space, rng, trials)
    parts = np.array([G.parts(i) for i in range(G.order)], dtype=np.int64)
    best = math.inf
    for x in X:
        O = G.act_flat(space, parts, np.broadcast_to(x, (G.order, space.flat_size)))
        D = space.distance(O[:, None, :], O[None, :, :])
        D[np.diag_indices(G.order)] = np.inf
        best = min(best, float(D.min()))
    return best


def _unbounded_sample(space: ConfigSpace, rng, n):
    z = ConfigSpace(space.dim, space.n_objects, np.zeros(space.dim), np.zeros(space.dim), space.weights)
    return z.sample(rng, n)


@dataclass(frozen=True)
class ClearanceReport:
    base_clear: bool
    quotient_clear: bool
    probes: int

    @property
    def ok(self) -> bool:
        """Base clearance implies quotient clearance."""
        return self.quotient_clear or not self.base_clear

    def __bool__(self):
        return self.ok


def clearance_check(path: Sequence[Config], delta: float, world: World, objects, G: SymmetryGroup,
                    w: Optional[MetricWeights], probes: int, rng: np.random.Generator,
                    spacing: Optional[float] = None) -> ClearanceReport:
    """Probe delta-balls along a path in Q and around random orbit members of each point."""
    checker = CollisionChecker(world, objects)
    space = checker.space
    if w is not None:
        space = ConfigSpace(space.dim, space.n_objects, space.lower, space.upper, w)
        checker = CollisionChecker(world, objects, space)
    r_inj = injectivity_radius_bound(space, G)
    if not delta < r_inj:
        raise ValueError(f"delta={delta} is not below the injectivity radius bound {r_inj}")
    P = np.array([space.pack(q) for q in path])
    spacing = spacing or delta / 2
    pts = [P[:1]]
    for a, b in zip(P[:-1], P[1:]):
        k = max(1, math.ceil(float(space.distance(a, b)) / spacing))
        pts.append(space.interpolate(a, b, np.arange(1, k + 1) / k))
    pts = np.concatenate(pts)
    centers = np.repeat(pts, probes, axis=0)
    # strict interior of the closed ball
    base = np.concatenate([space.sample_ball(c, delta * (1 - 1e-9), rng, 1) for c in centers])
    g = rng.integers(0, G.order, len(centers))
    moved = G.act_flat(space, np.array([G.parts(int(i)) for i in g]), centers)
    quot = np.concatenate([space.sample_ball(c, delta * (1 - 1e-9), rng, 1) for c in moved])
    return ClearanceReport(bool(checker.free_mask(base).all()), bool(checker.free_mask(quot).all()),
                           len(centers))
