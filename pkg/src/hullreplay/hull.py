"""Convex-hull geometry in latent space.

The workhorse is :func:`project_points`, a batched Frank-Wolfe solver for

    min_{alpha in simplex}  0.5 * || alpha @ anchors - query ||^2

run for many queries against one anchor set at once. It uses away steps and
exact line search (the objective is quadratic), so it converges linearly on
the simplex. Every few iterations, and once more at the end, each row gets a
fully-corrective pass over its active vertices (Wolfe's minor cycle), which
lands on the exact minimiser as soon as the active face is identified.
Interior points therefore come back with distance ~1e-15 rather than
sqrt(tolerance). Convergence is always certified by the Frank-Wolfe gap.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import DimensionMismatch, EmptyAnchorSet, SampleKey, TimedSample, ValidationError

__all__ = [
    "DEFAULT_TOLERANCE",
    "DEFAULT_MAX_ITERATIONS",
    "HullProjection",
    "project_points",
    "project_onto_hull",
    "hull_distances",
    "batch_hull_distance",
    "sample_in_hull",
]

DEFAULT_TOLERANCE = 1e-7
DEFAULT_MAX_ITERATIONS = 10_000
_POLISH_EVERY = 5


@dataclass(frozen=True)
class HullProjection:
    projected_point: np.ndarray
    barycentric_weights: np.ndarray
    distance: float
    converged: bool
    iterations: int
    gap: float


@dataclass(frozen=True)
class _BatchProjection:
    points: np.ndarray
    weights: np.ndarray
    distances: np.ndarray
    converged: np.ndarray
    iterations: np.ndarray
    gaps: np.ndarray


def _check_inputs(queries, anchors):
    anchors = np.atleast_2d(np.asarray(anchors, dtype=np.float64))
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    if anchors.size == 0 or anchors.shape[0] == 0:
        raise EmptyAnchorSet("cannot project onto the hull of zero anchors")
    if queries.shape[1] != anchors.shape[1]:
        raise DimensionMismatch(
            f"query dimension {queries.shape[1]} != anchor dimension {anchors.shape[1]}"
        )
    return queries, anchors


def _corrective_step(gram, lin, alpha):
    """Exact minimisation over the face spanned by the support of ``alpha``.

    Solves the affine-constrained least squares on the active set; if the
    minimiser leaves the simplex, moves toward it until a weight hits zero,
    drops that vertex and repeats.
    """
    alpha = alpha.copy()
    for _ in range(alpha.size):
        support = np.flatnonzero(alpha > 0)
        ns = support.size
        kkt = np.zeros((ns + 1, ns + 1))
        kkt[:ns, :ns] = gram[np.ix_(support, support)]
        kkt[:ns, ns] = 1.0
        kkt[ns, :ns] = 1.0
        rhs = np.append(lin[support], 1.0)
        beta = np.linalg.lstsq(kkt, rhs, rcond=None)[0][:ns]
        if np.all(beta >= 0):
            alpha[:] = 0.0
            alpha[support] = beta / beta.sum()
            return alpha
        current = alpha[support]
        blocking = beta < 0
        ratios = current[blocking] / (current[blocking] - beta[blocking])
        j = np.argmin(ratios)
        theta = ratios[j]
        alpha[support] = current + theta * (beta - current)
        alpha[support[np.flatnonzero(blocking)[j]]] = 0.0
        np.maximum(alpha, 0.0, out=alpha)
        alpha /= alpha.sum()
    return alpha


def project_points(
    queries,
    anchors,
    tolerance: float = DEFAULT_TOLERANCE,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
    polish: bool = True,
) -> _BatchProjection:
    """Project every row of ``queries`` onto the convex hull of ``anchors``.

    Returns arrays of projected points ``(m, d)``, barycentric weights
    ``(m, n)``, Euclidean distances, convergence flags, iteration counts and
    final Frank-Wolfe duality gaps (on the half squared distance).
    """
    if tolerance <= 0:
        raise ValidationError("tolerance must be > 0")
    queries, anchors = _check_inputs(queries, anchors)
    m, n = queries.shape[0], anchors.shape[0]

    gram = anchors @ anchors.T
    lin = queries @ anchors.T
    diag = np.diag(gram)

    alpha = np.zeros((m, n))
    start = np.argmin(diag[None, :] - 2.0 * lin, axis=1)
    alpha[np.arange(m), start] = 1.0
    iterations = np.zeros(m, dtype=np.int64)
    gaps = np.full(m, np.inf)

    def objective(w, i):
        return 0.5 * w @ gram @ w - lin[i] @ w

    def refine(rows):
        for i in rows:
            refined = _corrective_step(gram, lin[i], alpha[i])
            if objective(refined, i) <= objective(alpha[i], i):
                alpha[i] = refined

    active = np.arange(m)
    for it in range(max_iterations + 1):
        if active.size == 0:
            break
        if polish and it > 0 and it % _POLISH_EVERY == 0:
            refine(active)
        a = alpha[active]
        ag = a @ gram
        grad = ag - lin[active]
        g_alpha = np.einsum("ij,ij->i", grad, a)
        s = np.argmin(grad, axis=1)
        rows = np.arange(active.size)
        fw_gap = g_alpha - grad[rows, s]
        gaps[active] = fw_gap

        finished = fw_gap <= tolerance
        if it == max_iterations:
            break
        if finished.any():
            keep = ~finished
            active, a, ag, grad, g_alpha, s, fw_gap = (
                x[keep] for x in (active, a, ag, grad, g_alpha, s, fw_gap)
            )
            rows = np.arange(active.size)
            if active.size == 0:
                break

        masked = np.where(a > 0, grad, -np.inf)
        v = np.argmax(masked, axis=1)
        away_gap = masked[rows, v] - g_alpha
        use_fw = fw_gap >= away_gap

        vert = np.where(use_fw, s, v)
        slope = np.where(use_fw, fw_gap, away_gap)
        a_g_a = np.einsum("ij,ij->i", ag, a)
        curvature = diag[vert] - 2.0 * ag[rows, vert] + a_g_a
        a_v = a[rows, v]
        with np.errstate(divide="ignore", invalid="ignore"):
            gamma_max = np.where(use_fw, 1.0, a_v / (1.0 - a_v))
            gamma = np.where(curvature > 0, slope / curvature, gamma_max)
        gamma = np.clip(gamma, 0.0, gamma_max)

        fw_rows = np.flatnonzero(use_fw)
        aw_rows = np.flatnonzero(~use_fw)
        new = a.copy()
        if fw_rows.size:
            gf = gamma[fw_rows, None]
            new[fw_rows] *= 1.0 - gf
            new[fw_rows, s[fw_rows]] += gamma[fw_rows]
        if aw_rows.size:
            ga = gamma[aw_rows]
            new[aw_rows] *= (1.0 + ga)[:, None]
            new[aw_rows, v[aw_rows]] -= ga
            dropped = aw_rows[ga >= gamma_max[aw_rows]]
            new[dropped, v[dropped]] = 0.0
        np.maximum(new, 0.0, out=new)
        new /= new.sum(axis=1, keepdims=True)
        alpha[active] = new
        iterations[active] += 1

    if polish:
        refine(range(m))
        grad = alpha @ gram - lin
        gaps = np.einsum("ij,ij->i", grad, alpha) - grad.min(axis=1)

    points = alpha @ anchors
    distances = np.linalg.norm(queries - points, axis=1)
    converged = gaps <= tolerance
    return _BatchProjection(points, alpha, distances, converged, iterations, gaps)


def project_onto_hull(
    query,
    anchors,
    tolerance: float = DEFAULT_TOLERANCE,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
) -> HullProjection:
    """Euclidean projection of one point onto the convex hull of ``anchors``.

    Example:
        >>> p = project_onto_hull([1.0, 1.0], [[1.0, 0.0], [0.0, 1.0]])
        >>> p.projected_point.round(6).tolist(), round(p.distance, 5)
        ([0.5, 0.5], 0.70711)
    """
    query = np.asarray(query, dtype=np.float64)
    if query.ndim != 1:
        raise DimensionMismatch("query must be a single 1-D latent code")
    res = project_points(query[None, :], anchors, tolerance, max_iterations)
    return HullProjection(
        projected_point=res.points[0],
        barycentric_weights=res.weights[0],
        distance=float(res.distances[0]),
        converged=bool(res.converged[0]),
        iterations=int(res.iterations[0]),
        gap=float(res.gaps[0]),
    )


def hull_distances(
    queries,
    anchors,
    tolerance: float = DEFAULT_TOLERANCE,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
) -> np.ndarray:
    """Distances from each query row to the hull of ``anchors``."""
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    if queries.shape[0] == 0:
        return np.zeros(0)
    return project_points(queries, anchors, tolerance, max_iterations).distances


def _codes(samples_or_codes) -> np.ndarray:
    items = list(samples_or_codes)
    if items and isinstance(items[0], TimedSample):
        return np.vstack([s.code for s in items])
    return np.atleast_2d(np.asarray(items, dtype=np.float64))


def batch_hull_distance(
    target_batch: Sequence[TimedSample],
    available: Iterable[SampleKey],
    buffer_candidate: Sequence[TimedSample],
    tolerance: float = DEFAULT_TOLERANCE,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
) -> float:
    """Summed distance from the available members of a batch to a candidate hull.

    Samples of ``target_batch`` whose identity is not in ``available``
    contribute nothing.
    """
    if len(buffer_candidate) == 0:
        raise EmptyAnchorSet("buffer candidate is empty")
    available = set(available)
    present = [s for s in target_batch if s.key in available]
    if not present:
        return 0.0
    anchors = _codes(buffer_candidate)
    return float(hull_distances(_codes(present), anchors, tolerance, max_iterations).sum())


def sample_in_hull(anchors, concentration: float = 1.0, rng=None, size: int | None = None):
    """Draw a point (or ``size`` points) from the hull with Dirichlet weights."""
    anchors = np.atleast_2d(np.asarray(anchors, dtype=np.float64))
    if anchors.shape[0] == 0:
        raise EmptyAnchorSet("cannot sample from the hull of zero anchors")
    if concentration <= 0:
        raise ValidationError("concentration must be > 0")
    rng = np.random.default_rng(rng)
    n = anchors.shape[0]
    if n == 1:
        weights = np.ones((1 if size is None else size, 1))
    else:
        weights = rng.dirichlet(np.full(n, float(concentration)), size=1 if size is None else size)
    points = weights @ anchors
    return points[0] if size is None else points
