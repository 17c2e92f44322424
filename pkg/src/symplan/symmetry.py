"""Finite rotation groups (cyclic, dihedral, polyhedral, products) and their action.

A :class:`SymmetryGroup` is a product of one or more *factors*; each factor
is a finite subgroup of SO(2) or SO(3) acting on the orientation of one body.
Single-body groups have exactly one factor.  Product elements are indexed in
C order over the factor orders, so index 0 is always the identity.

Group elements act on a configuration through the body frame,
``R -> R * g^-1``.  Using the inverse keeps the action a left action
(``act(g, act(h, q)) == act(g*h, q)``) while a G-invariant shape still maps
onto itself.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .geometry import (
    TWO_PI,
    Config,
    Rotation2,
    Rotation3,
    angle_dist,
    qconj,
    qfold,
    qmul,
    quat_angle,
    quat_from_axis_angle,
    wrap_angle,
)

ELEMENT_TOL = 1e-9
_MAX_SATURATED = 500
_MAX_TABLE = 4096


def _compose_rot(dim, a, b):
    return wrap_angle(a + b) if dim == 2 else qmul(a, b)


def _rot_dist(dim, a, b):
    return angle_dist(a, b) if dim == 2 else quat_angle(a, b)


def _identity_rot(dim):
    return np.float64(0.0) if dim == 2 else np.array([1.0, 0.0, 0.0, 0.0])


def _lookup(dim, rotations, r, tol):
    d = _rot_dist(dim, rotations, r)
    k = int(np.argmin(d))
    return k if d[k] <= tol else -1


@dataclass(frozen=True, eq=False)
class Factor:
    """One finite rotation group acting on body ``obj``."""

    dim: int
    rotations: np.ndarray  # (n,) angles or (n, 4) quaternions, identity first
    obj: int
    cayley: np.ndarray     # (n, n) index table, -1 where a product is missing
    inverse: np.ndarray    # (n,) index table, -1 where missing

    @property
    def order(self) -> int:
        return len(self.rotations)

    def rotation(self, k: int):
        return Rotation2(float(self.rotations[k])) if self.dim == 2 else Rotation3(self.rotations[k])

    def moved_to(self, obj: int) -> "Factor":
        return Factor(self.dim, self.rotations, obj, self.cayley, self.inverse)


def build_factor(dim: int, rotations, obj: int = 0, tol: float = ELEMENT_TOL) -> Factor:
    """Freeze the Cayley and inverse tables of a list of rotations.

    Products that do not land on a listed rotation are recorded as -1, so
    a corrupted list can still be built and then rejected by
    :func:`verify_group_axioms`.
    """
    rot = np.array(rotations, dtype=float)
    if dim == 2:
        rot = wrap_angle(rot.reshape(-1))
    else:
        rot = qfold(rot.reshape(-1, 4) / np.linalg.norm(rot.reshape(-1, 4), axis=1, keepdims=True), 1e-12)
    n = len(rot)
    if n == 0:
        raise ValueError("a group needs at least one element")
    if dim == 2:
        prods = _compose_rot(dim, rot[:, None], rot[None, :])
        d = _rot_dist(dim, prods[:, :, None], rot[None, None, :])
        to_ident = _rot_dist(dim, prods, 0.0)
    else:
        prods = _compose_rot(dim, rot[:, None, :], rot[None, :, :])
        d = _rot_dist(dim, prods[:, :, None, :], rot[None, None, :, :])
        to_ident = _rot_dist(dim, prods, _identity_rot(dim))
    best = np.argmin(d, axis=2)
    hit = np.take_along_axis(d, best[:, :, None], axis=2)[:, :, 0] <= tol
    cayley = np.where(hit, best, -1).astype(np.int64)
    is_inv = to_ident <= tol
    inverse = np.where(is_inv.any(axis=1), np.argmax(is_inv, axis=1), -1).astype(np.int64)
    rot.flags.writeable = False
    cayley.flags.writeable = False
    inverse.flags.writeable = False
    return Factor(dim, rot, obj, cayley, inverse)


@dataclass(frozen=True)
class GroupElement:
    index: int
    parts: tuple
    rotations: tuple
    objects: tuple

    @property
    def rotation(self):
        if len(self.rotations) != 1:
            raise AttributeError("product-group elements carry one rotation per factor")
        return self.rotations[0]


class SymmetryGroup:
    """Finite symmetry group acting on the orientations of one or more bodies."""

    def __init__(self, name: str, factors: Sequence[Factor], descriptor: dict,
                 declared_order: Optional[int] = None):
        if not factors:
            raise ValueError("a group needs at least one factor")
        dims = {f.dim for f in factors}
        if len(dims) != 1:
            raise ValueError("all factors must share one ambient dimension")
        objs = [f.obj for f in factors]
        if len(set(objs)) != len(objs):
            raise ValueError("factors must act on distinct bodies")
        self.name = name
        self.factors = tuple(factors)
        self.dim = dims.pop()
        self.descriptor = descriptor
        self.shape = tuple(f.order for f in self.factors)
        self.order = int(np.prod(self.shape))
        self.declared_order = self.order if declared_order is None else declared_order

    def __repr__(self):
        return f"SymmetryGroup({self.name!r}, order={self.order})"

    @property
    def is_trivial(self) -> bool:
        return self.order == 1

    @property
    def objects(self) -> tuple:
        return tuple(f.obj for f in self.factors)

    @property
    def max_object(self) -> int:
        return max(self.objects)

    # -- indexing ------------------------------------------------------------
    def parts(self, index: int) -> tuple:
        if not 0 <= index < self.order:
            raise IndexError(f"element index {index} out of range for order {self.order}")
        return tuple(int(k) for k in np.unravel_index(index, self.shape))

    def index(self, parts) -> int:
        return int(np.ravel_multi_index(tuple(int(p) for p in parts), self.shape))

    def element(self, index: int) -> GroupElement:
        p = self.parts(index)
        return GroupElement(
            index,
            p,
            tuple(f.rotation(k) for f, k in zip(self.factors, p)),
            self.objects,
        )

    @cached_property
    def elements(self) -> list:
        return [self.element(i) for i in range(self.order)]

    @property
    def identity(self) -> GroupElement:
        return self.element(0)

    def compose_parts(self, a, b) -> np.ndarray:
        """Per-factor product ``a * b`` (vectorized over leading axes)."""
        a = np.asarray(a)
        b = np.asarray(b)
        out = np.empty(np.broadcast_shapes(a.shape, b.shape), dtype=np.int64)
        for f, fac in enumerate(self.factors):
            out[..., f] = fac.cayley[a[..., f], b[..., f]]
        return out

    def inverse_parts(self, a) -> np.ndarray:
        a = np.asarray(a)
        out = np.empty(a.shape, dtype=np.int64)
        for f, fac in enumerate(self.factors):
            out[..., f] = fac.inverse[a[..., f]]
        return out

    def compose(self, g: int, h: int) -> int:
        return self.index(self.compose_parts(self.parts(g), self.parts(h)))

    def inverse_of(self, g: int) -> int:
        return self.index(self.inverse_parts(self.parts(g)))

    @cached_property
    def cayley(self) -> np.ndarray:
        if self.order > _MAX_TABLE:
            raise ValueError("group too large for a full Cayley table")
        P = np.array([self.parts(i) for i in range(self.order)], dtype=np.int64).reshape(self.order, -1)
        prod = self.compose_parts(P[:, None, :], P[None, :, :])
        if np.any(prod < 0):
            out = np.full((self.order, self.order), -1, dtype=np.int64)
            ok = np.all(prod >= 0, axis=-1)
            out[ok] = np.ravel_multi_index(tuple(prod[ok].T), self.shape)
            return out
        return np.ravel_multi_index(tuple(np.moveaxis(prod, -1, 0)), self.shape)

    @cached_property
    def inverse(self) -> np.ndarray:
        P = np.array([self.parts(i) for i in range(self.order)], dtype=np.int64).reshape(self.order, -1)
        inv = self.inverse_parts(P)
        ok = np.all(inv >= 0, axis=-1)
        out = np.full(self.order, -1, dtype=np.int64)
        out[ok] = np.ravel_multi_index(tuple(inv[ok].T), self.shape)
        return out

    def on_object(self, obj: int) -> "SymmetryGroup":
        """Same group acting on body ``obj`` instead (single-factor groups only)."""
        if len(self.factors) != 1:
            raise ValueError("only single-factor groups can be moved to another body")
        return SymmetryGroup(self.name, [self.factors[0].moved_to(obj)], self.descriptor,
                             self.declared_order)

    # -- flat-array action ----------------------------------------------------
    def act_flat(self, space, parts, X: np.ndarray) -> np.ndarray:
        """Apply elements (given as per-factor parts) to flat configurations."""
        X = np.array(X, dtype=float, copy=True)
        parts = np.asarray(parts, dtype=np.int64)
        R = space.rots(X)
        for f, fac in enumerate(self.factors):
            k = parts[..., f]
            if self.dim == 2:
                R[..., fac.obj] = wrap_angle(R[..., fac.obj] - fac.rotations[k])
            else:
                R[..., fac.obj, :] = qmul(R[..., fac.obj, :], qconj(fac.rotations[k]))
        return space.join(space.trans(X), R) if self.dim == 3 else _rejoin2(space, X, R)


def _rejoin2(space, X, R):
    X[..., space.n_t:] = R
    return X


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------

def _single(name, dim, rotations, descriptor, declared_order) -> SymmetryGroup:
    return SymmetryGroup(name, [build_factor(dim, rotations)], descriptor, declared_order)


def make_cyclic_2d(n: int) -> SymmetryGroup:
    """Rotations of the plane by multiples of 2*pi/n."""
    if int(n) != n or n < 1:
        raise ValueError("cyclic group order must be a positive integer")
    n = int(n)
    angles = TWO_PI * np.arange(n) / n
    return _single(f"C{n}", 2, angles, {"kind": "cyclic2d", "n": n}, n)


def trivial_group(dim: int) -> SymmetryGroup:
    return make_cyclic_2d(1) if dim == 2 else make_cyclic_3d(1)


def _unit(v, what):
    v = np.asarray(v, dtype=float).reshape(3)
    n = np.linalg.norm(v)
    if n == 0 or not np.isfinite(n):
        raise ValueError(f"{what} must be a non-zero 3-vector")
    return v / n


def make_cyclic_3d(n: int, axis=(0.0, 0.0, 1.0)) -> SymmetryGroup:
    if int(n) != n or n < 1:
        raise ValueError("cyclic group order must be a positive integer")
    n = int(n)
    axis = _unit(axis, "axis")
    quats = quat_from_axis_angle(np.broadcast_to(axis, (n, 3)), TWO_PI * np.arange(n) / n)
    return _single(f"C{n}", 3, quats, {"kind": "cyclic3d", "n": n, "axis": axis.tolist()}, n)


def make_dihedral_3d(n: int, axis=(0.0, 0.0, 1.0), perp=(1.0, 0.0, 0.0)) -> SymmetryGroup:
    """Rotation group of a regular n-gon prism: order 2n."""
    if int(n) != n or n < 1:
        raise ValueError("dihedral group needs n >= 1")
    n = int(n)
    axis = _unit(axis, "axis")
    perp = _unit(perp, "perp")
    if abs(float(axis @ perp)) > 1e-9:
        raise ValueError("dihedral flip axis must be perpendicular to the main axis")
    turns = quat_from_axis_angle(np.broadcast_to(axis, (n, 3)), TWO_PI * np.arange(n) / n)
    k = np.arange(n)
    half = math.pi * k / n
    # flip axes: perp rotated about the main axis by pi*k/n
    flips_axes = (np.cos(half)[:, None] * perp + np.sin(half)[:, None] * np.cross(axis, perp))
    flips = quat_from_axis_angle(flips_axes, np.full(n, math.pi))
    desc = {"kind": "dihedral", "n": n, "axis": axis.tolist(), "perp": perp.tolist()}
    return _single(f"D{n}", 3, np.vstack([turns, flips]), desc, 2 * n)


def saturate(generators, limit: int = _MAX_SATURATED, tol: float = ELEMENT_TOL) -> np.ndarray:
    """Close a set of quaternions under multiplication; identity first."""
    elems = [np.array([1.0, 0.0, 0.0, 0.0])]
    gens = [np.asarray(g, dtype=float) / np.linalg.norm(g) for g in generators]

    def known(q):
        return np.min(quat_angle(np.array(elems), q)) <= tol

    for g in gens:
        if not known(g):
            elems.append(g)
    i = 0
    while i < len(elems):
        for g in gens:
            c = qmul(elems[i], g)
            if not known(c):
                elems.append(c)
                if len(elems) > limit:
                    raise ValueError("generators do not close into a finite group")
        i += 1
    return np.array(elems)


_BODY_DIAG = np.array([1.0, 1.0, 1.0])
_PHI = (1.0 + math.sqrt(5.0)) / 2.0


def make_tetrahedral() -> SymmetryGroup:
    gens = [quat_from_axis_angle(_BODY_DIAG, TWO_PI / 3), quat_from_axis_angle([0, 0, 1], math.pi)]
    return _single("T", 3, saturate(gens), {"kind": "tetrahedral"}, 12)


def make_octahedral() -> SymmetryGroup:
    gens = [quat_from_axis_angle([0, 0, 1], math.pi / 2), quat_from_axis_angle(_BODY_DIAG, TWO_PI / 3)]
    return _single("O", 3, saturate(gens), {"kind": "octahedral"}, 24)


def make_icosahedral() -> SymmetryGroup:
    # vertex axis (0, 1, phi) and face axis (1, 1, 1) of the icosahedron (0, +-1, +-phi) & perms
    gens = [quat_from_axis_angle([0.0, 1.0, _PHI], TWO_PI / 5), quat_from_axis_angle(_BODY_DIAG, TWO_PI / 3)]
    return _single("I", 3, saturate(gens), {"kind": "icosahedral"}, 60)


def from_rotations(dim: int, rotations, name: str = "custom",
                   declared_order: Optional[int] = None) -> SymmetryGroup:
    """Group from an explicit element list (identity first); verify before trusting it."""
    rot = np.asarray(rotations, dtype=float)
    desc = {"kind": "explicit", "dim": dim, "rotations": rot.tolist()}
    return SymmetryGroup(name, [build_factor(dim, rot)], desc, declared_order)


def product(groups: Sequence[tuple]) -> SymmetryGroup:
    """Direct product of single-body groups, each acting on its own body index."""
    if not groups:
        raise ValueError("product of zero groups")
    factors = []
    for g, obj in groups:
        if len(g.factors) != 1:
            raise ValueError("product factors must be single-body groups")
        factors.append(g.factors[0].moved_to(int(obj)))
    objs = [f.obj for f in factors]
    if len(set(objs)) != len(objs):
        raise ValueError("duplicate body index in product")
    desc = {"kind": "product",
            "factors": [{"group": g.descriptor, "object": int(obj)} for g, obj in groups]}
    name = " x ".join(g.name for g, _ in groups)
    declared = int(np.prod([g.declared_order for g, _ in groups]))
    return SymmetryGroup(name, factors, desc, declared)


# ---------------------------------------------------------------------------
# verification
# ---------------------------------------------------------------------------

@dataclass
class GroupReport:
    closure: bool
    identity: bool
    inverse: bool
    associativity: bool
    order: bool
    details: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.closure and self.identity and self.inverse and self.associativity and self.order

    def as_dict(self) -> dict:
        return {"closure": self.closure, "identity": self.identity, "inverse": self.inverse,
                "associativity": self.associativity, "order": self.order, "ok": self.ok,
                "details": list(self.details)}


def _verify_factor(fac: Factor, tol: float, details: list, label: str):
    dim, rot, n = fac.dim, fac.rotations, fac.order
    tab, inv = fac.cayley, fac.inverse
    closure = True
    for i in range(n):
        prods = _compose_rot(dim, rot[i], rot)
        idx = tab[i]
        if np.any(idx < 0):
            closure = False
            break
        if np.any(_rot_dist(dim, prods, rot[idx]) > tol):
            closure = False
            break
    if not closure:
        details.append(f"{label}: product of elements leaves the element list")

    ident = _identity_rot(dim)
    identity = bool(_rot_dist(dim, rot[0], ident) <= tol)
    if closure:
        identity = identity and bool(np.all(tab[0] == np.arange(n)) and np.all(tab[:, 0] == np.arange(n)))
    if not identity:
        details.append(f"{label}: element 0 is not a two-sided identity")

    inverse = bool(np.all(inv >= 0))
    if inverse:
        prods = _compose_rot(dim, rot, rot[inv])
        inverse = bool(np.all(_rot_dist(dim, prods, ident) <= tol))
        if closure:
            inverse = inverse and bool(np.all(tab[np.arange(n), inv] == 0))
    if not inverse:
        details.append(f"{label}: some element has no inverse")

    assoc = closure
    if closure:
        a = tab[tab[:, :, None], np.arange(n)[None, None, :]]   # (ab)c
        b = tab[np.arange(n)[:, None, None], tab[None, :, :]]   # a(bc)
        assoc = bool(np.array_equal(a, b))
        if not assoc:
            details.append(f"{label}: Cayley table is not associative")
    return closure, identity, inverse, assoc


def verify_group_axioms(G: SymmetryGroup, tol: float = ELEMENT_TOL) -> GroupReport:
    """Check closure, identity, inverses and associativity against rotation composition."""
    details: list = []
    res = [True, True, True, True]
    for f, fac in enumerate(G.factors):
        r = _verify_factor(fac, tol, details, f"factor {f}")
        res = [x and y for x, y in zip(res, r)]
    order_ok = G.order == G.declared_order
    if not order_ok:
        details.append(f"order {G.order} != declared {G.declared_order}")
    return GroupReport(*res, order=order_ok, details=details)


# ---------------------------------------------------------------------------
# action on configurations
# ---------------------------------------------------------------------------

def _check_target(G: SymmetryGroup, q: Config):
    if q.dim != G.dim:
        raise ValueError("group and configuration dimensions differ")
    if G.max_object >= q.n_objects:
        raise IndexError(f"group acts on body {G.max_object} but configuration has {q.n_objects}")


def act(g: GroupElement, q: Config) -> Config:
    """Apply a group element to the orientations of its target bodies."""
    if max(g.objects) >= q.n_objects:
        raise IndexError(f"element acts on body {max(g.objects)} but configuration has {q.n_objects}")
    if q.dim == 2:
        r = np.array(q.rotations)
        for rot, obj in zip(g.rotations, g.objects):
            r[obj] = r[obj] - rot.angle
        return Config(q.translations, r)
    r = np.array(q.rotations)
    for rot, obj in zip(g.rotations, g.objects):
        r[obj] = qmul(r[obj], qconj(rot.quaternion))
    return Config(q.translations, r)


def orbit(G: SymmetryGroup, q: Config) -> list:
    _check_target(G, q)
    return [act(g, q) for g in G.elements]


# ---------------------------------------------------------------------------
# JSON descriptors
# ---------------------------------------------------------------------------

def group_to_json(G: SymmetryGroup) -> dict:
    return dict(G.descriptor)


def group_from_json(desc: dict) -> SymmetryGroup:
    kind = desc.get("kind")
    if kind == "cyclic2d":
        return make_cyclic_2d(desc["n"])
    if kind == "cyclic3d":
        return make_cyclic_3d(desc["n"], desc.get("axis", (0, 0, 1)))
    if kind == "dihedral":
        return make_dihedral_3d(desc["n"], desc.get("axis", (0, 0, 1)), desc.get("perp", (1, 0, 0)))
    if kind == "tetrahedral":
        return make_tetrahedral()
    if kind == "octahedral":
        return make_octahedral()
    if kind == "icosahedral":
        return make_icosahedral()
    if kind == "explicit":
        return from_rotations(desc["dim"], desc["rotations"])
    if kind == "product":
        return product([(group_from_json(f["group"]), f["object"]) for f in desc["factors"]])
    raise ValueError(f"unknown group kind {kind!r}")
