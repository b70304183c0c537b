"""Replay-buffer update policies.

Every policy maps ``(current batch, previous buffer)`` to the next buffer.
The pool a policy chooses from is always ``batch.train`` plus the previous
buffer's members. ER-Rand and ER-Hull only ever return *admissible*
buffers: they cover ``min(k, D)`` distinct timestamps (``D`` the number of
timestamps in the pool) with one member each.
"""

from __future__ import annotations

import enum
import hashlib
import itertools
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import Batch, ReplayBuffer, ReplayError, TimedSample, ValidationError, stack_codes
from .hull import DEFAULT_MAX_ITERATIONS, DEFAULT_TOLERANCE, hull_distances

__all__ = [
    "PolicyKind",
    "PolicyConfig",
    "BufferUpdateRecord",
    "NoAdmissibleCandidate",
    "timestamp_coverage_constraint",
    "is_admissible",
    "count_admissible",
    "enumerate_admissible",
    "er_rand_update",
    "hull_objective",
    "er_hull_update",
    "kmeans_update",
    "bound_training_set",
    "Policy",
    "coverage_violations",
]


class NoAdmissibleCandidate(ReplayError):
    code = "no_admissible_candidate"


class PolicyKind(str, enum.Enum):
    LOWER = "lower"
    UPPER = "upper"
    ER_RAND = "er_rand"
    ER_HULL = "er_hull"
    KMEANS = "kmeans"


_LABELS = {
    PolicyKind.LOWER: "Lower",
    PolicyKind.UPPER: "Upper",
    PolicyKind.ER_RAND: "ER-Rand",
    PolicyKind.ER_HULL: "ER-Hull",
    PolicyKind.KMEANS: "KMeans",
}


@dataclass(frozen=True)
class PolicyConfig:
    kind: PolicyKind
    capacity: int = 3
    ransac_samples: int = 5000
    hull_tolerance: float = DEFAULT_TOLERANCE
    seed: int = 0
    # ER-Hull: sum the objective over the current batch too (as typeset).
    include_current: bool = True
    # ER-Rand: fill all k slots with balanced buckets when k exceeds the
    # number of pool timestamps, instead of one member per timestamp.
    balanced_fill: bool = False
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "kind", PolicyKind(self.kind))
        if self.capacity < 0:
            raise ValidationError("capacity must be >= 0")
        if self.kind is PolicyKind.ER_HULL and self.ransac_samples < 1:
            raise ValidationError("ransac_samples must be >= 1 for ER-Hull")

    @property
    def label(self) -> str:
        name = _LABELS[self.kind]
        if self.kind in (PolicyKind.LOWER, PolicyKind.UPPER):
            return name
        suffix = "-balanced" if self.balanced_fill and self.kind is PolicyKind.ER_RAND else ""
        return f"{name}-{self.capacity}{suffix}"


@dataclass
class BufferUpdateRecord:
    timestamp: int
    chosen: list
    candidates_evaluated: int
    objective_value: float | None = None
    rng_state_digest: str = ""

    def to_json(self) -> dict:
        return {
            "timestamp": self.timestamp,
            "chosen": [list(k) for k in self.chosen],
            "candidates_evaluated": self.candidates_evaluated,
            "objective_value": self.objective_value,
            "rng_state_digest": self.rng_state_digest,
        }


def _rng_digest(rng: np.random.Generator) -> str:
    state = json.dumps(rng.bit_generator.state, sort_keys=True, default=str)
    return hashlib.sha256(state.encode()).hexdigest()[:16]


def _pool(batch: Batch, buffer: ReplayBuffer) -> list:
    seen = set()
    pool = []
    for s in list(buffer.members) + list(batch.train):
        if s.key not in seen:
            seen.add(s.key)
            pool.append(s)
    return pool


def _groups(pool: Sequence[TimedSample]) -> dict:
    groups: dict[int, list] = {}
    for s in sorted(pool, key=lambda s: s.key):
        groups.setdefault(s.timestamp, []).append(s)
    return groups


def timestamp_coverage_constraint(pool: Sequence[TimedSample], k: int) -> int:
    """Number of distinct timestamps an admissible buffer must span."""
    return min(k, len({s.timestamp for s in pool}))


def is_admissible(candidate: Sequence[TimedSample], pool: Sequence[TimedSample], k: int) -> bool:
    keys = {s.key for s in pool}
    if len(candidate) > k or any(s.key not in keys for s in candidate):
        return False
    if len({s.key for s in candidate}) != len(candidate):
        return False
    stamps = [s.timestamp for s in candidate]
    required = timestamp_coverage_constraint(pool, k) if pool else 0
    return len(set(stamps)) == required and len(stamps) == required


def count_admissible(pool: Sequence[TimedSample], k: int) -> int:
    sizes = [len(g) for g in _groups(pool).values()]
    m = min(k, len(sizes))
    # elementary symmetric polynomial e_m(sizes)
    e = [1] + [0] * m
    for n in sizes:
        for r in range(m, 0, -1):
            e[r] += e[r - 1] * n
    return e[m]


def enumerate_admissible(pool: Sequence[TimedSample], k: int):
    """Yield every admissible buffer in a canonical order."""
    groups = _groups(pool)
    stamps = sorted(groups)
    m = min(k, len(stamps))
    for subset in itertools.combinations(stamps, m):
        for members in itertools.product(*(groups[c] for c in subset)):
            yield tuple(members)


def _sample_admissible(groups: dict, k: int, rng: np.random.Generator) -> tuple:
    """Uniform draw over admissible buffers (one member per chosen timestamp).

    A timestamp subset is chosen with probability proportional to the
    product of its group sizes, then one member is drawn per timestamp.
    """
    stamps = sorted(groups)
    sizes = [len(groups[c]) for c in stamps]
    n = len(stamps)
    m = min(k, n)
    # tail[i][r]: weighted count of ways to pick r timestamps from stamps[i:]
    tail = [[0] * (m + 1) for _ in range(n + 1)]
    tail[n][0] = 1
    for i in range(n - 1, -1, -1):
        tail[i][0] = 1
        for r in range(1, m + 1):
            tail[i][r] = tail[i + 1][r] + sizes[i] * tail[i + 1][r - 1]
    chosen = []
    r = m
    for i in range(n):
        if r == 0:
            break
        take = sizes[i] * tail[i + 1][r - 1]
        if rng.random() * tail[i][r] < take:
            group = groups[stamps[i]]
            chosen.append(group[rng.integers(len(group))])
            r -= 1
    return tuple(chosen)


def _sample_balanced(groups: dict, k: int, rng: np.random.Generator) -> tuple:
    """Fill ``k`` slots with per-timestamp bucket sizes differing by at most one."""
    stamps = sorted(groups)
    capacity = {c: len(groups[c]) for c in stamps}
    total = min(k, sum(capacity.values()))
    buckets = {c: 0 for c in stamps}
    remaining = total
    open_stamps = list(stamps)
    while remaining > 0:
        open_stamps = [c for c in open_stamps if buckets[c] < capacity[c]]
        if remaining >= len(open_stamps):
            for c in open_stamps:
                buckets[c] += 1
            remaining -= len(open_stamps)
        else:
            for j in rng.permutation(len(open_stamps))[:remaining]:
                buckets[open_stamps[j]] += 1
            remaining = 0
    chosen = []
    for c in stamps:
        if buckets[c]:
            group = groups[c]
            idx = np.sort(rng.choice(len(group), size=buckets[c], replace=False))
            chosen.extend(group[i] for i in idx)
    return tuple(chosen)


def er_rand_update(
    current_batch: Batch,
    buffer: ReplayBuffer,
    k: int,
    rng: np.random.Generator,
    balanced_fill: bool = False,
) -> ReplayBuffer:
    """Random buffer update constrained to maximal timestamp coverage."""
    if k < 0:
        raise ValidationError("k must be >= 0")
    pool = _pool(current_batch, buffer)
    if k == 0 or not pool:
        return ReplayBuffer(k)
    groups = _groups(pool)
    if balanced_fill and k > len(groups):
        chosen = _sample_balanced(groups, k, rng)
    else:
        chosen = _sample_admissible(groups, k, rng)
    return ReplayBuffer(k, chosen)


def hull_objective(
    candidate: Sequence[TimedSample],
    pool: Sequence[TimedSample],
    current_timestamp: int,
    include_current: bool = True,
    tolerance: float = DEFAULT_TOLERANCE,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
) -> float:
    """Normalised distance from every available pool sample to Hull(candidate).

    The numerator sums, over all seen timestamps, the distances of that
    timestamp's available samples to the candidate hull. The denominator is
    one plus the number of past timestamps present in the pool.
    """
    if not candidate:
        raise NoAdmissibleCandidate("empty candidate buffer")
    members = {s.key for s in candidate}
    targets = [
        s
        for s in pool
        if s.key not in members and (include_current or s.timestamp != current_timestamp)
    ]
    past = {s.timestamp for s in pool if s.timestamp != current_timestamp}
    denominator = 1 + len(past)
    if not targets:
        return 0.0
    d = hull_distances(stack_codes(targets), stack_codes(candidate), tolerance, max_iterations)
    return float(d.sum()) / denominator


def _ransac_candidates(groups: dict, k: int, n: int, rng: np.random.Generator) -> list:
    seen = set()
    out = []
    attempts = 0
    budget = 50 * n
    while len(out) < n and attempts < budget:
        attempts += 1
        cand = _sample_admissible(groups, k, rng)
        key = frozenset(s.key for s in cand)
        if key in seen:
            continue
        seen.add(key)
        out.append(cand)
    return out


def er_hull_update(
    current_batch: Batch,
    buffer: ReplayBuffer,
    k: int,
    n_samples: int,
    rng: np.random.Generator,
    tolerance: float = DEFAULT_TOLERANCE,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
    include_current: bool = True,
    workers: int = 1,
) -> tuple[ReplayBuffer, BufferUpdateRecord]:
    """Pick the admissible buffer whose hull best covers the available data.

    Candidates are enumerated exhaustively when there are at most
    ``n_samples`` of them; otherwise ``n_samples`` distinct candidates are
    drawn at random. Ties go to the earliest candidate.
    """
    if k < 1:
        raise ValidationError("ER-Hull needs k >= 1")
    if n_samples < 1:
        raise ValidationError("ER-Hull needs at least one RANSAC sample")
    pool = _pool(current_batch, buffer)
    if not pool:
        raise NoAdmissibleCandidate(f"timestamp {current_batch.timestamp}: empty pool")
    groups = _groups(pool)
    t = current_batch.timestamp

    if count_admissible(pool, k) <= n_samples:
        candidates = list(enumerate_admissible(pool, k))
    else:
        candidates = _ransac_candidates(groups, k, n_samples, rng)

    def score(cand):
        return hull_objective(cand, pool, t, include_current, tolerance, max_iterations)

    if workers > 1 and len(candidates) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            scores = list(ex.map(score, candidates))
    else:
        scores = [score(c) for c in candidates]

    best = 0
    for i, s in enumerate(scores):
        if s < scores[best]:
            best = i
    chosen = candidates[best]
    record = BufferUpdateRecord(
        timestamp=t,
        chosen=[s.key for s in chosen],
        candidates_evaluated=len(candidates),
        objective_value=float(scores[best]),
        rng_state_digest=_rng_digest(rng),
    )
    return ReplayBuffer(k, chosen), record


def _kmeans(x: np.ndarray, k: int, rng: np.random.Generator, max_iter=100, rtol=1e-6):
    n = x.shape[0]
    # k-means++ seeding
    centers = [x[rng.integers(n)]]
    d2 = np.sum((x - centers[0]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = rng.integers(n)
        else:
            idx = int(np.searchsorted(np.cumsum(d2), rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        centers.append(x[idx])
        d2 = np.minimum(d2, np.sum((x - x[idx]) ** 2, axis=1))
    centers = np.array(centers)

    prev = np.inf
    for _ in range(max_iter):
        dist = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        labels = dist.argmin(axis=1)
        inertia = dist[np.arange(n), labels].sum()
        for j in range(k):
            members = labels == j
            if members.any():
                centers[j] = x[members].mean(axis=0)
        if np.isfinite(prev) and abs(prev - inertia) <= rtol * max(prev, 1e-300):
            break
        prev = inertia
    dist = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    return centers, dist.argmin(axis=1)


def kmeans_update(
    current_batch: Batch, buffer: ReplayBuffer, k: int, rng: np.random.Generator
) -> ReplayBuffer:
    """Keep, for each of ``k`` clusters, the pool sample closest to its centroid."""
    if k < 1:
        raise ValidationError("k-means replay needs k >= 1")
    pool = sorted(_pool(current_batch, buffer), key=lambda s: s.key)
    if len(pool) <= k:
        return ReplayBuffer(k, pool)
    x = stack_codes(pool)
    centers, labels = _kmeans(x, k, rng)
    chosen = []
    for j in range(k):
        idx = np.flatnonzero(labels == j)
        if idx.size == 0:
            continue
        d = np.sum((x[idx] - centers[j]) ** 2, axis=1)
        chosen.append(pool[idx[np.argmin(d)]])
    return ReplayBuffer(k, chosen)


def bound_training_set(kind, history: Sequence[Batch], current_batch: Batch) -> list:
    """Training set of the lower (current batch only) or upper (everything) bound."""
    kind = PolicyKind(kind)
    if kind is PolicyKind.LOWER:
        return list(current_batch.train)
    if kind is PolicyKind.UPPER:
        out = []
        for b in history:
            if b.timestamp < current_batch.timestamp:
                out.extend(b.train)
        out.extend(current_batch.train)
        return out
    raise ValidationError(f"{kind.value} is not a bound policy")


@dataclass
class Policy:
    """Stateful wrapper driving one policy through an episode."""

    config: PolicyConfig
    seed: int = 0
    rng: np.random.Generator = field(init=False)

    def __post_init__(self):
        self.rng = np.random.default_rng([self.config.seed, self.seed])

    @property
    def is_bound(self) -> bool:
        return self.config.kind in (PolicyKind.LOWER, PolicyKind.UPPER)

    def training_set(self, history: Sequence[Batch], batch: Batch, buffer: ReplayBuffer) -> list:
        if self.is_bound:
            return bound_training_set(self.config.kind, history, batch)
        return list(batch.train) + list(buffer.members)

    def update(self, batch: Batch, buffer: ReplayBuffer) -> tuple[ReplayBuffer, BufferUpdateRecord]:
        cfg = self.config
        k = cfg.capacity
        if self.is_bound:
            new = ReplayBuffer(0)
        elif cfg.kind is PolicyKind.ER_HULL:
            if k == 0:
                new = ReplayBuffer(0)
            else:
                new, record = er_hull_update(
                    batch,
                    buffer,
                    k,
                    cfg.ransac_samples,
                    self.rng,
                    tolerance=cfg.hull_tolerance,
                    include_current=cfg.include_current,
                    workers=cfg.workers,
                )
                return new, record
        elif cfg.kind is PolicyKind.ER_RAND:
            new = er_rand_update(batch, buffer, k, self.rng, cfg.balanced_fill)
        else:
            new = kmeans_update(batch, buffer, k, self.rng) if k else ReplayBuffer(0)
        record = BufferUpdateRecord(
            timestamp=batch.timestamp,
            chosen=[s.key for s in new.members],
            candidates_evaluated=1,
            rng_state_digest=_rng_digest(self.rng),
        )
        return new, record


def coverage_violations(buffer: ReplayBuffer, pool_timestamps: set, k: int) -> list:
    """Describe how ``buffer`` breaks the capacity/coverage rule (empty if fine)."""
    problems = []
    if len(buffer) > k:
        problems.append(f"{len(buffer)} members exceed capacity {k}")
    required = min(k, len(pool_timestamps))
    stamps = [m.timestamp for m in buffer.members]
    if len(set(stamps)) != required:
        problems.append(f"spans {len(set(stamps))} timestamps, needs {required}")
    if k >= len(pool_timestamps) and len(stamps) != len(set(stamps)):
        problems.append("more than one member from a timestamp while k >= timestamps seen")
    return problems

