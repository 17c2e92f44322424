"""Riemannian primitives on SO(2), SO(3), SE(2), SE(3) and finite products of them.

A configuration holds one rigid body per row: a translation plus an
orientation (an angle in 2D, a unit quaternion ``(w, x, y, z)`` in 3D).
The metric is the weighted product metric

    d(a, b)^2 = sum_i |t_a,i - t_b,i|^2 + (w_i * angle(R_a,i, R_b,i))^2

where ``w_i`` (meters per radian) is the rotation weight of body ``i``.

Hot loops work on *flat* arrays: one row per configuration, laid out as
``[t_1 .. t_m, r_1 .. r_m]``.  :class:`ConfigSpace` packs and unpacks them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

TWO_PI = 2.0 * math.pi
_ANTIPODAL_TOL = 1e-12


# ---------------------------------------------------------------------------
# scalar / vectorized angle and quaternion helpers
# ---------------------------------------------------------------------------

def wrap_angle(theta):
    """Reduce angle(s) into [0, 2*pi)."""
    out = np.mod(theta, TWO_PI)
    # np.mod(-1e-17, 2pi) rounds to exactly 2pi
    return np.where(out >= TWO_PI, 0.0, out)


def signed_angle_diff(a, b):
    """Shortest signed rotation taking angle ``a`` to angle ``b``, in [-pi, pi)."""
    return np.mod(np.asarray(b) - np.asarray(a) + math.pi, TWO_PI) - math.pi


def angle_dist(a, b):
    """Vectorized geodesic distance on the circle."""
    d = np.mod(np.abs(np.asarray(a) - np.asarray(b)), TWO_PI)
    return np.minimum(d, TWO_PI - d)


def qmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product of quaternion arrays (broadcasting over leading axes)."""
    aw, ax, ay, az = np.moveaxis(np.asarray(a, dtype=float), -1, 0)
    bw, bx, by, bz = np.moveaxis(np.asarray(b, dtype=float), -1, 0)
    return np.stack(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ],
        axis=-1,
    )


def qconj(q: np.ndarray) -> np.ndarray:
    return np.asarray(q, dtype=float) * np.array([1.0, -1.0, -1.0, -1.0])


def qnormalize(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def qfold(q: np.ndarray, tol: float = 0.0) -> np.ndarray:
    """Pick the sign of each quaternion so its first non-negligible entry is positive."""
    q = np.array(q, dtype=float)
    flat = q.reshape(-1, 4)
    for row in flat:
        for c in row:
            if abs(c) > tol:
                if c < 0:
                    row *= -1.0
                break
    return flat.reshape(q.shape)


def quat_from_axis_angle(axis, angle) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    norm = np.linalg.norm(axis, axis=-1, keepdims=True)
    if np.any(norm == 0):
        raise ValueError("rotation axis must be non-zero")
    axis = axis / norm
    half = 0.5 * np.asarray(angle, dtype=float)[..., None]
    return np.concatenate([np.cos(half), np.sin(half) * axis], axis=-1)


def quat_from_rotvec(v: np.ndarray) -> np.ndarray:
    """Exponential map: rotation vector (axis * angle) to unit quaternion."""
    v = np.asarray(v, dtype=float)
    angle = np.linalg.norm(v, axis=-1, keepdims=True)
    half = 0.5 * angle
    # sin(x/2)/x, continuous at 0
    scale = np.where(angle > 1e-8, np.sin(half) / np.where(angle > 0, angle, 1.0), 0.5 - angle**2 / 48.0)
    return np.concatenate([np.cos(half), scale * v], axis=-1)


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    w, x, y, z = np.moveaxis(q, -1, 0)
    return np.stack(
        [
            np.stack([1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)], -1),
            np.stack([2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)], -1),
            np.stack([2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)], -1),
        ],
        axis=-2,
    )


def quat_angle(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Rotation angle between orientations, in [0, pi], antipodes folded.

    Equal to ``2*arccos(|<p, q>|)`` but evaluated through chord lengths so it
    stays accurate for nearly identical and nearly opposite orientations.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    dot = np.sum(p * q, axis=-1, keepdims=True)
    q = np.where(dot < 0, -q, q)
    return 4.0 * np.arctan2(np.linalg.norm(p - q, axis=-1), np.linalg.norm(p + q, axis=-1))


def slerp(p: np.ndarray, q: np.ndarray, t) -> np.ndarray:
    """Shortest-arc spherical interpolation, vectorized over leading axes."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    t = np.asarray(t, dtype=float)[..., None]
    dot = np.sum(p * q, axis=-1, keepdims=True)
    q = np.where(dot < 0, -q, q)
    omega = 2.0 * np.arctan2(np.linalg.norm(p - q, axis=-1, keepdims=True),
                             np.linalg.norm(p + q, axis=-1, keepdims=True))
    s = np.sin(omega)
    small = s < 1e-9
    safe = np.where(small, 1.0, s)
    a = np.where(small, 1.0 - t, np.sin((1.0 - t) * omega) / safe)
    b = np.where(small, t, np.sin(t * omega) / safe)
    return qnormalize(a * p + b * q)


# ---------------------------------------------------------------------------
# value types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Rotation2:
    """Planar rotation, angle stored in [0, 2*pi)."""

    angle: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "angle", float(wrap_angle(float(self.angle))))

    def compose(self, other: "Rotation2") -> "Rotation2":
        return Rotation2(self.angle + other.angle)

    def inverse(self) -> "Rotation2":
        return Rotation2(-self.angle)

    def isclose(self, other: "Rotation2", tol: float = 1e-9) -> bool:
        return dist_so2(self, other) <= tol

    def as_matrix(self) -> np.ndarray:
        c, s = math.cos(self.angle), math.sin(self.angle)
        return np.array([[c, -s], [s, c]])


class Rotation3:
    """Spatial rotation as a unit quaternion ``(w, x, y, z)``; ``q`` and ``-q`` are equal."""

    __slots__ = ("_q",)

    def __init__(self, quaternion=(1.0, 0.0, 0.0, 0.0)):
        q = np.array(quaternion, dtype=float).reshape(4)
        n = np.linalg.norm(q)
        if not np.isfinite(n) or n == 0.0:
            raise ValueError("quaternion must be finite and non-zero")
        q = q / n
        q.flags.writeable = False
        self._q = q

    @property
    def quaternion(self) -> np.ndarray:
        return self._q

    @classmethod
    def identity(cls) -> "Rotation3":
        return cls()

    @classmethod
    def from_axis_angle(cls, axis, angle: float) -> "Rotation3":
        return cls(quat_from_axis_angle(axis, angle))

    def compose(self, other: "Rotation3") -> "Rotation3":
        return Rotation3(qmul(self._q, other._q))

    def inverse(self) -> "Rotation3":
        return Rotation3(qconj(self._q))

    def as_matrix(self) -> np.ndarray:
        return quat_to_matrix(self._q)

    def rotate(self, v) -> np.ndarray:
        return np.asarray(v, dtype=float) @ self.as_matrix().T

    def isclose(self, other: "Rotation3", tol: float = 1e-9) -> bool:
        return dist_so3(self, other) <= tol

    def __eq__(self, other):
        if not isinstance(other, Rotation3):
            return NotImplemented
        return bool(np.array_equal(self._q, other._q) or np.array_equal(self._q, -other._q))

    __hash__ = None

    def __repr__(self):
        return f"Rotation3({self._q.tolist()})"


Rotation = Union[Rotation2, Rotation3]


@dataclass(frozen=True)
class MetricWeights:
    """Meters per radian of rotation, one entry per body."""

    rotation_weight: tuple

    def __post_init__(self):
        w = tuple(float(x) for x in np.atleast_1d(self.rotation_weight))
        if not w or any(not (x > 0.0) or not math.isfinite(x) for x in w):
            raise ValueError(f"rotation weights must be positive, got {w}")
        object.__setattr__(self, "rotation_weight", w)

    @classmethod
    def uniform(cls, weight: float, n_objects: int = 1) -> "MetricWeights":
        return cls((weight,) * n_objects)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.rotation_weight, dtype=float)

    def __len__(self):
        return len(self.rotation_weight)


class Config:
    """A point of the configuration space: per-body translation and orientation.

    ``translations`` has shape ``(m, d)``; ``rotations`` is ``(m,)`` angles for
    ``d == 2`` or ``(m, 4)`` unit quaternions for ``d == 3``.  Instances are
    immutable.
    """

    __slots__ = ("translations", "rotations")

    def __init__(self, translations, rotations):
        t = np.array(translations, dtype=float)
        if t.ndim == 1:
            t = t[None, :]
        if t.ndim != 2 or t.shape[0] < 1 or t.shape[1] not in (2, 3):
            raise ValueError(f"translations must be (m, 2) or (m, 3), got {t.shape}")
        m, d = t.shape
        r = np.array(rotations, dtype=float)
        if d == 2:
            r = wrap_angle(r.reshape(m))
        else:
            if r.size != 4 * m:
                raise ValueError(f"expected {m} quaternions, got shape {r.shape}")
            r = qnormalize(r.reshape(m, 4))
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(r))):
            raise ValueError("configuration must be finite")
        t.flags.writeable = False
        r.flags.writeable = False
        object.__setattr__(self, "translations", t)
        object.__setattr__(self, "rotations", r)

    def __setattr__(self, name, value):
        raise AttributeError("Config is immutable")

    @classmethod
    def from_objects(cls, objects: Sequence[tuple]) -> "Config":
        if not objects:
            raise ValueError("a configuration needs at least one body")
        ts, rs = [], []
        for t, rot in objects:
            ts.append(np.asarray(t, dtype=float))
            rs.append(rot.angle if isinstance(rot, Rotation2) else rot.quaternion)
        return cls(np.stack(ts), np.stack(rs) if isinstance(objects[0][1], Rotation3) else rs)

    @classmethod
    def se2(cls, x: float, y: float, theta: float) -> "Config":
        return cls([[x, y]], [theta])

    @classmethod
    def se3(cls, t, quaternion=(1.0, 0.0, 0.0, 0.0)) -> "Config":
        return cls([t], [quaternion])

    @property
    def dim(self) -> int:
        return self.translations.shape[1]

    @property
    def n_objects(self) -> int:
        return self.translations.shape[0]

    @property
    def objects(self) -> list:
        if self.dim == 2:
            return [(t.copy(), Rotation2(a)) for t, a in zip(self.translations, self.rotations)]
        return [(t.copy(), Rotation3(q)) for t, q in zip(self.translations, self.rotations)]

    def rotation_distances(self, other: "Config") -> np.ndarray:
        if self.dim == 2:
            return angle_dist(self.rotations, other.rotations)
        return quat_angle(self.rotations, other.rotations)

    def allclose(self, other: "Config", tol: float = 1e-9) -> bool:
        if self.translations.shape != other.translations.shape:
            return False
        return bool(
            np.all(np.abs(self.translations - other.translations) <= tol)
            and np.all(self.rotation_distances(other) <= tol)
        )

    def __repr__(self):
        return f"Config(translations={self.translations.tolist()}, rotations={self.rotations.tolist()})"


# ---------------------------------------------------------------------------
# flat-array configuration space
# ---------------------------------------------------------------------------

class ConfigSpace:
    """Product space SE(d)^m with a translation box and per-body rotation weights.

    Axes with zero width in the box are pinned: they are sampled at that
    value and excluded from volume computations, so a zero-width box gives a
    pure rotation space.
    """

    def __init__(self, dim: int, n_objects: int = 1, lower=None, upper=None,
                 weights: Optional[MetricWeights] = None):
        if dim not in (2, 3):
            raise ValueError("dim must be 2 or 3")
        if n_objects < 1:
            raise ValueError("n_objects must be >= 1")
        self.dim = dim
        self.n_objects = n_objects
        self.lower = None if lower is None else np.broadcast_to(np.asarray(lower, float), (dim,)).copy()
        self.upper = None if upper is None else np.broadcast_to(np.asarray(upper, float), (dim,)).copy()
        if self.lower is not None and np.any(self.upper < self.lower):
            raise ValueError("translation bounds are empty")
        weights = weights if weights is not None else MetricWeights.uniform(1.0, n_objects)
        if len(weights) != n_objects:
            raise ValueError("need one rotation weight per body")
        self.weights = weights
        self.w = weights.as_array()
        self.rot_size = 1 if dim == 2 else 4
        self.n_t = n_objects * dim
        self.flat_size = self.n_t + n_objects * self.rot_size

    @classmethod
    def for_config(cls, q: Config, weights: Optional[MetricWeights] = None) -> "ConfigSpace":
        return cls(q.dim, q.n_objects, weights=weights)

    @property
    def manifold_dim(self) -> int:
        per = 3 if self.dim == 2 else 6
        return per * self.n_objects

    @property
    def has_bounds(self) -> bool:
        return self.lower is not None

    def compatible(self, q: Config) -> bool:
        return q.dim == self.dim and q.n_objects == self.n_objects

    # -- packing -----------------------------------------------------------
    def pack(self, q: Config) -> np.ndarray:
        if not self.compatible(q):
            raise ValueError("configuration does not match the space")
        return np.concatenate([q.translations.ravel(), q.rotations.ravel()])

    def unpack(self, x: np.ndarray) -> Config:
        x = np.asarray(x, dtype=float)
        t = x[: self.n_t].reshape(self.n_objects, self.dim)
        r = x[self.n_t:]
        return Config(t, r if self.dim == 2 else r.reshape(self.n_objects, 4))

    def trans(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X)
        return X[..., : self.n_t].reshape(X.shape[:-1] + (self.n_objects, self.dim))

    def rots(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X)
        r = X[..., self.n_t:]
        if self.dim == 2:
            return r
        return r.reshape(X.shape[:-1] + (self.n_objects, 4))

    def join(self, T: np.ndarray, R: np.ndarray) -> np.ndarray:
        lead = T.shape[:-2]
        return np.concatenate([T.reshape(lead + (-1,)), R.reshape(lead + (-1,))], axis=-1)

    # -- metric ------------------------------------------------------------
    def rotation_dists(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        """Per-body rotation angles, shape ``(..., m)``."""
        if self.dim == 2:
            return angle_dist(self.rots(X), self.rots(Y))
        return quat_angle(self.rots(X), self.rots(Y))

    def sq_distance(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        dt = X[..., : self.n_t] - Y[..., : self.n_t]
        rot = self.w * self.rotation_dists(X, Y)
        return np.sum(dt * dt, axis=-1) + np.sum(rot * rot, axis=-1)

    def distance(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        return np.sqrt(self.sq_distance(X, Y))

    def check_geodesic(self, X: np.ndarray, Y: np.ndarray) -> None:
        """Raise if any rotation pair is antipodal (no unique minimizing geodesic)."""
        ang = self.rotation_dists(X, Y)
        if np.any(ang >= math.pi - _ANTIPODAL_TOL):
            raise ValueError("antipodal rotation pair: minimizing geodesic is not unique")

    def interpolate(self, X: np.ndarray, Y: np.ndarray, t) -> np.ndarray:
        """Point at fraction ``t`` along the minimizing geodesic from X to Y."""
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        t = np.asarray(t, dtype=float)
        X, Y = np.broadcast_arrays(X, Y)
        if t.ndim:
            X = np.broadcast_to(X, t.shape + X.shape[-1:]) if X.ndim == 1 else X
            Y = np.broadcast_to(Y, t.shape + Y.shape[-1:]) if Y.ndim == 1 else Y
        tt = t[..., None]
        Ta, Tb = X[..., : self.n_t], Y[..., : self.n_t]
        T = Ta + tt * (Tb - Ta)
        if self.dim == 2:
            Ra, Rb = X[..., self.n_t:], Y[..., self.n_t:]
            R = wrap_angle(Ra + tt * signed_angle_diff(Ra, Rb))
        else:
            Ra, Rb = self.rots(X), self.rots(Y)
            R = slerp(Ra, Rb, t[..., None] if t.ndim else t).reshape(Ra.shape[:-2] + (-1,))
        return np.concatenate([T, R], axis=-1)

    # -- sampling ------------------------------------------------------------
    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """``n`` uniform samples (rows) of the bounded space."""
        if not self.has_bounds:
            raise ValueError("uniform sampling needs finite translation bounds")
        m = self.n_objects
        T = self.lower + (self.upper - self.lower) * rng.random((n, m, self.dim))
        if self.dim == 2:
            R = TWO_PI * rng.random((n, m))
            R = np.where(R >= TWO_PI, 0.0, R)
        else:
            R = qnormalize(rng.standard_normal((n, m, 4)))
        return self.join(T, R)

    def sample_ball(self, x: np.ndarray, r: float, rng: np.random.Generator, n: int) -> np.ndarray:
        """``n`` samples within distance ``r`` of ``x``.

        A tangent vector is drawn uniformly from the radius-``r`` ball of the
        weighted tangent space and pushed through the exponential map, so
        every result lies within ``r`` and the density is positive on the whole
        ball.  The result is exactly uniform where the space is flat.
        """
        if not r > 0:
            raise ValueError("ball radius must be positive")
        m, d = self.n_objects, self.dim
        rdof = 1 if d == 2 else 3
        k = m * (d + rdof)
        v = rng.standard_normal((n, k))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        v *= (r * rng.random((n, 1)) ** (1.0 / k))
        vt = v[:, : m * d].reshape(n, m, d)
        vr = v[:, m * d:].reshape(n, m, rdof) / self.w[None, :, None]
        x = np.asarray(x, dtype=float)
        T = self.trans(x)[None] + vt
        if d == 2:
            R = wrap_angle(self.rots(x)[None] + vr[..., 0])
        else:
            R = qnormalize(qmul(self.rots(x)[None], quat_from_rotvec(vr)))
        return self.join(T, R)

    def contains(self, X: np.ndarray) -> np.ndarray:
        """Whether every body's translation lies in the closed box."""
        if not self.has_bounds:
            return np.ones(np.asarray(X).shape[:-1], dtype=bool)
        T = self.trans(X)
        return np.all((T >= self.lower) & (T <= self.upper), axis=(-1, -2))

    # -- volumes -------------------------------------------------------------
    def translation_volume(self) -> float:
        width = self.upper - self.lower
        return float(np.prod(width[width > 0])) ** self.n_objects

    def rotation_volume(self) -> float:
        """Volume of the rotation factors in the weighted metric (2*pi*w or 8*pi^2*w^3)."""
        if self.dim == 2:
            return float(np.prod(TWO_PI * self.w))
        return float(np.prod(8.0 * math.pi**2 * self.w**3))

    def volume(self) -> float:
        return self.translation_volume() * self.rotation_volume()

    def effective_dim(self) -> int:
        """Manifold dimension with pinned translation axes removed."""
        rdof = 1 if self.dim == 2 else 3
        free_axes = int(np.sum(self.upper > self.lower)) if self.has_bounds else self.dim
        return self.n_objects * (free_axes + rdof)


# ---------------------------------------------------------------------------
# Config-level API
# ---------------------------------------------------------------------------

def dist_so2(a: Rotation2, b: Rotation2) -> float:
    aa = a.angle if isinstance(a, Rotation2) else float(a)
    bb = b.angle if isinstance(b, Rotation2) else float(b)
    d = abs(aa - bb) % TWO_PI
    return min(d, TWO_PI - d)


def dist_so3(p: Rotation3, q: Rotation3) -> float:
    pq = p.quaternion if isinstance(p, Rotation3) else np.asarray(p, float)
    qq = q.quaternion if isinstance(q, Rotation3) else np.asarray(q, float)
    return float(quat_angle(pq, qq))


def _space_for(a: Config, b: Config, w: Optional[MetricWeights]) -> ConfigSpace:
    if a.translations.shape != b.translations.shape:
        raise ValueError("configurations differ in dimension or body count")
    return ConfigSpace(a.dim, a.n_objects, weights=w)


def dist_config(a: Config, b: Config, w: Optional[MetricWeights] = None) -> float:
    """Weighted product-metric distance between two configurations."""
    s = _space_for(a, b, w)
    return float(s.distance(s.pack(a), s.pack(b)))


def geodesic(a: Config, b: Config, t: float) -> Config:
    """Point at fraction ``t`` of the unique minimizing geodesic from ``a`` to ``b``."""
    s = _space_for(a, b, None)
    xa, xb = s.pack(a), s.pack(b)
    s.check_geodesic(xa, xb)
    if t == 0.0:
        return a
    if t == 1.0:
        return b
    return s.unpack(s.interpolate(xa, xb, float(t)))


def sample_uniform(space: ConfigSpace, rng: np.random.Generator) -> Config:
    return space.unpack(space.sample(rng, 1)[0])


def sample_ball(center: Config, r: float, w: Optional[MetricWeights], rng: np.random.Generator) -> Config:
    s = ConfigSpace.for_config(center, w)
    return s.unpack(s.sample_ball(s.pack(center), r, rng, 1)[0])
