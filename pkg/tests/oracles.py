"""Independent reference implementations used to freeze expected values.

Nothing here imports the planner's group, metric or collision code: groups
are rebuilt as rotation matrices, distances come from matrix chord lengths,
and intersection is decided by linear programming.
"""
from __future__ import annotations

import itertools
import math

import mpmath
import numpy as np
from scipy.optimize import linprog


# -- rotations as matrices ---------------------------------------------------

def rot2(a: float) -> np.ndarray:
    return np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])


def quat_matrix(q) -> np.ndarray:
    w, x, y, z = np.asarray(q, dtype=float) / np.linalg.norm(q)
    return np.array([
        [w * w + x * x - y * y - z * z, 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), w * w - x * x + y * y - z * z, 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), w * w - x * x - y * y + z * z],
    ])


def cyclic_matrices(n: int) -> list:
    return [rot2(2 * math.pi * k / n) for k in range(n)]


def octahedral_matrices() -> list:
    """Signed permutation matrices with determinant +1."""
    out = []
    for perm in itertools.permutations(range(3)):
        for signs in itertools.product((1, -1), repeat=3):
            M = np.zeros((3, 3))
            for r, c in enumerate(perm):
                M[r, c] = signs[r]
            if np.linalg.det(M) > 0:
                out.append(M)
    return out


def tetrahedral_matrices() -> list:
    """Cyclic permutations times sign patterns with an even number of flips."""
    out = []
    for shift in range(3):
        P = np.roll(np.eye(3), shift, axis=1)
        for signs in ((1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1)):
            out.append(np.diag(signs) @ P)
    return out


def closure(gens: list, limit: int = 200) -> list:
    elems = [np.eye(gens[0].shape[0])]
    frontier = list(elems)
    while frontier:
        nxt = []
        for a in frontier:
            for g in gens:
                c = a @ g
                if not any(np.abs(c - e).max() < 1e-9 for e in elems):
                    elems.append(c)
                    nxt.append(c)
        frontier = nxt
        assert len(elems) <= limit
    return elems


def axis_angle_matrix(axis, angle) -> np.ndarray:
    k = np.asarray(axis, float) / np.linalg.norm(axis)
    K = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + math.sin(angle) * K + (1 - math.cos(angle)) * K @ K


def rotation_angle(R: np.ndarray, S: np.ndarray) -> np.ndarray:
    """Angle of R^T S from the Frobenius chord |R - S|_F = 2 sqrt(2) sin(theta/2).

    Holds in 2D and 3D alike since tr(I - R^T S) = 2 - 2 cos(theta) in both.
    Broadcasts over leading axes.
    """
    c = np.linalg.norm(np.asarray(R) - np.asarray(S), axis=(-2, -1))
    return 2 * np.arcsin(np.minimum(1.0, c / (2 * math.sqrt(2))))


def angle_matrices(theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    c, s = np.cos(theta), np.sin(theta)
    return np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)


def quat_matrices(Q) -> np.ndarray:
    Q = np.asarray(Q, dtype=float)
    return np.array([quat_matrix(q) for q in Q.reshape(-1, 4)]).reshape(Q.shape[:-1] + (3, 3))


def orbit_distance(Ta, Ra, Tb, Rb, weights, groups) -> np.ndarray:
    """Brute-force min of the product metric over every element of the product group.

    ``Ta``: (N, m, d) translations, ``Ra``: (N, m, k, k) rotation matrices.
    ``groups`` maps a body index to an array of its symmetry matrices; other
    bodies get the identity.  The action is R -> R g^T.
    """
    Ta, Tb = np.asarray(Ta, float), np.asarray(Tb, float)
    m, k = Ra.shape[1], Ra.shape[-1]
    trans = np.sum((Ta - Tb) ** 2, axis=(-2, -1))
    choices = [np.asarray(groups.get(i, [np.eye(k)])) for i in range(m)]
    best = np.full(len(Ta), np.inf)
    for combo in itertools.product(*choices):
        s = trans.copy()
        for i, g in enumerate(combo):
            s += (weights[i] * rotation_angle(Ra[:, i], Rb[:, i] @ g.T)) ** 2
        best = np.minimum(best, s)
    return np.sqrt(best)


# -- classical bounds (mpmath, direct formulas) ------------------------------

def rrt_failure_classical(k: int, ell: float, nu: float, p: float, order: int = 1) -> mpmath.mpf:
    m = math.ceil(5 * ell / nu - 1e-9)
    k = mpmath.mpf(k)
    return k ** m * m * mpmath.e ** (-order * mpmath.mpf(p) * k) / mpmath.factorial(m - 1)


def harmonic_exact(n: int):
    from fractions import Fraction
    return sum(Fraction(1, i) for i in range(1, n + 1))


def ball_volume(d: int) -> float:
    # recursion V_d = 2 pi / d * V_{d-2}
    v = {0: 1.0, 1: 2.0}
    for k in range(2, d + 1):
        v[k] = 2 * math.pi / k * v[k - 2]
    return v[d]


def prm_expected_classical(ell, delta, vol, d) -> float:
    n = math.ceil(2 * ell / delta - 1e-9)
    return float(harmonic_exact(n)) * vol / (ball_volume(d) * (delta / 2) ** d)


def prm_star_classical(vol, d) -> float:
    return 2 * (1 + 1 / d) ** (1 / d) * (vol / ball_volume(d)) ** (1 / d)


def rrt_star_classical(vol, d, c_star, theta, mu, eps) -> float:
    return (2 + theta) * ((1 + eps / 4) * c_star * vol / ((d + 1) * theta * (1 - mu) * ball_volume(d))) ** (1 / (d + 1))


# -- intersection and graphs --------------------------------------------------

def hulls_intersect(A: np.ndarray, B: np.ndarray) -> bool:
    """Feasibility of sum(l_i a_i) = sum(m_j b_j) with l, m on simplices."""
    na, nb, d = len(A), len(B), A.shape[1]
    Aeq = np.zeros((d + 2, na + nb))
    Aeq[:d, :na] = A.T
    Aeq[:d, na:] = -B.T
    Aeq[d, :na] = 1
    Aeq[d + 1, na:] = 1
    beq = np.zeros(d + 2)
    beq[d] = beq[d + 1] = 1
    res = linprog(np.zeros(na + nb), A_eq=Aeq, b_eq=beq, bounds=(0, None), method="highs")
    return res.status == 0


def brute_shortest(n: int, edges: dict, s: int, t: int) -> float:
    """Shortest simple-path length by enumeration; edges maps (u, v) -> weight."""
    best = math.inf
    others = [v for v in range(n) if v not in (s, t)]
    for r in range(len(others) + 1):
        for mid in itertools.permutations(others, r):
            path = (s,) + mid + (t,)
            if all((a, b) in edges for a, b in zip(path[:-1], path[1:])):
                best = min(best, sum(edges[(a, b)] for a, b in zip(path[:-1], path[1:])))
    return best
