"""Brute-force reference computations used to verify the fast paths.

Nothing here calls the Frank-Wolfe solver.

* :func:`grid_hull_distance` searches barycentric weights on the simplex
  lattice with a fixed step. The last two weights of each lattice line are
  handled in closed form (a convex quadratic in one variable is minimised on
  a grid at one of the two lattice points bracketing its continuous
  minimiser), so the result equals full enumeration at a fraction of the cost.
* :func:`face_hull_distance` enumerates every face of the anchor simplex and
  solves the affine least-squares problem on each; exact for small anchor sets.
* :func:`exhaustive_er_hull` scores every admissible buffer with the grid
  oracle and returns the minimiser.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .policies import enumerate_admissible

__all__ = [
    "grid_hull_distance",
    "face_hull_distance",
    "oracle_objective",
    "exhaustive_er_hull",
    "OracleCase",
    "hull_cases",
    "er_hull_cases",
]


def grid_hull_distance(query, anchors, step: float = 0.002) -> float:
    """Minimum distance from ``query`` to lattice points of the anchor simplex."""
    q = np.asarray(query, dtype=np.float64)
    a = np.atleast_2d(np.asarray(anchors, dtype=np.float64))
    n = a.shape[0]
    steps = int(round(1.0 / step))
    if n == 1:
        return float(np.linalg.norm(a[0] - q))

    # work relative to the query so the objective is 0.5*|alpha @ b|^2
    b = a - q
    gram = b @ b.T

    def fixed_parts(weights):
        # weights: (m, n) lattice masses already assigned
        quad = 0.5 * np.einsum("ij,jk,ik->i", weights, gram, weights)
        cross = weights @ gram  # (m, n)
        return quad, cross

    lead = n - 2
    if lead == 0:
        prefixes = np.zeros((1, 0), dtype=np.int64)
    else:
        grids = np.meshgrid(*[np.arange(steps + 1)] * lead, indexing="ij")
        prefixes = np.stack([g.ravel() for g in grids], axis=1)
        prefixes = prefixes[prefixes.sum(axis=1) <= steps]
    remaining = steps - prefixes.sum(axis=1)

    u, v = n - 2, n - 1
    w = np.zeros((prefixes.shape[0], n))
    w[:, :lead] = prefixes / steps
    w[:, v] = remaining / steps  # start with all remaining mass on v
    quad, cross = fixed_parts(w)
    # moving mass s from v to u: f(s) = quad + s*(cross_u - cross_v) + 0.5*s^2*d
    d = gram[u, u] - 2 * gram[u, v] + gram[v, v]
    g0 = cross[:, u] - cross[:, v]
    r = remaining / steps
    if d > 0:
        s_star = -g0 / d
    else:
        s_star = np.where(g0 < 0, r, 0.0)
    lo = np.floor(np.clip(s_star, 0.0, r) * steps + 1e-9)
    best = np.full(r.shape, np.inf)
    for cand in (lo - 1, lo, lo + 1):
        cand = np.clip(cand, 0, remaining)
        s = cand / steps
        best = np.minimum(best, quad + s * g0 + 0.5 * s * s * d)
    return float(np.sqrt(max(2.0 * best.min(), 0.0)))


def face_hull_distance(query, anchors) -> float:
    """Exact distance by enumerating all faces of the anchor simplex."""
    q = np.asarray(query, dtype=np.float64)
    a = np.atleast_2d(np.asarray(anchors, dtype=np.float64))
    n = a.shape[0]
    best = min(np.linalg.norm(a - q, axis=1))
    for size in range(2, n + 1):
        for face in itertools.combinations(range(n), size):
            f = a[list(face)]
            base = f[0]
            basis = (f[1:] - base).T
            coef, *_ = np.linalg.lstsq(basis, q - base, rcond=None)
            weights = np.concatenate([[1.0 - coef.sum()], coef])
            if np.all(weights >= -1e-12):
                best = min(best, np.linalg.norm(base + basis @ coef - q))
    return float(best)


def oracle_objective(candidate, pool, current_timestamp, step=0.002, include_current=True) -> float:
    members = {s.key for s in candidate}
    anchors = np.vstack([s.code for s in candidate])
    total = 0.0
    for s in pool:
        if s.key in members:
            continue
        if not include_current and s.timestamp == current_timestamp:
            continue
        total += grid_hull_distance(s.code, anchors, step)
    past = {s.timestamp for s in pool if s.timestamp != current_timestamp}
    return total / (1 + len(past))


def exhaustive_er_hull(batch, buffer, k, step=0.002, include_current=True):
    """Every admissible buffer with its oracle objective, best first."""
    pool = list(buffer.members) + [s for s in batch.train if s.key not in buffer.identities]
    scored = [
        (oracle_objective(c, pool, batch.timestamp, step, include_current), c)
        for c in enumerate_admissible(pool, k)
    ]
    scored.sort(key=lambda x: x[0])
    return scored


@dataclass(frozen=True)
class OracleCase:
    query: np.ndarray
    anchors: np.ndarray


def hull_cases(count: int = 200, seed: int = 0) -> list:
    """Random projection instances: 1-4 anchors in [-1, 1]^d, queries in [-2, 2]^d, d <= 3."""
    rng = np.random.default_rng([seed, 7])
    out = []
    for _ in range(count):
        d = int(rng.integers(1, 4))
        n = int(rng.integers(1, 5))
        out.append(OracleCase(rng.uniform(-2, 2, size=d), rng.uniform(-1, 1, size=(n, d))))
    return out


def er_hull_cases(count: int = 50, seed: int = 0) -> list:
    """Small ER-Hull instances: up to 8 pool samples over 3 timestamps in 2-D.

    Returns ``(batch, buffer)`` pairs where the buffer already holds one
    sample from each of timestamps 1 and 2 and the batch is timestamp 3.
    """
    from .core import Batch, ReplayBuffer, Split, TimedSample

    rng = np.random.default_rng([seed, 11])
    out = []
    for _ in range(count):
        n_current = int(rng.integers(2, 7))
        past = [TimedSample(rng.normal(size=2) * 2.0, t, int(rng.integers(20)), Split.TRAIN) for t in (1, 2)]
        train = [TimedSample(rng.normal(size=2) + rng.normal(size=2), 3, i, Split.TRAIN) for i in range(n_current)]
        out.append((Batch(3, train), ReplayBuffer(2, past)))
    return out
