"""Anchor-hull proxy for a personalised generator.

A fitted model is nothing more than its anchor set: the latent codes it was
trained on. Its prior is their convex hull, inversion is projection onto
that hull, and synthesis draws from a source hull and realises each draw
through the model's hull.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import ReplayError, TimedSample, ValidationError, stack_codes, Batch
from .hull import DEFAULT_TOLERANCE, DEFAULT_MAX_ITERATIONS, project_points, sample_in_hull

__all__ = [
    "EmptyTrainingSet",
    "InsufficientSamples",
    "ZeroVector",
    "TrainerConfig",
    "SynthConfig",
    "AnchorHullModel",
    "EvalScores",
    "fit",
    "invert",
    "invert_many",
    "diagnostic_loss",
    "identity_score",
    "synthesize",
    "frechet_distance",
    "evaluate",
    "METRIC_DIRECTIONS",
]

COVARIANCE_RIDGE = 1e-6

# True when higher is better.
METRIC_DIRECTIONS = {
    "recon_l2": False,
    "recon_id": True,
    "synth_frechet": False,
    "synth_id": True,
}


class EmptyTrainingSet(ValidationError):
    code = "empty_training_set"


class InsufficientSamples(ReplayError, ValueError):
    code = "insufficient_samples"


class ZeroVector(ReplayError, ValueError):
    code = "zero_vector"


@dataclass(frozen=True)
class TrainerConfig:
    replay_weight: float = 1.0
    replay_fraction: float = 0.5
    tolerance: float = DEFAULT_TOLERANCE
    max_iterations: int = DEFAULT_MAX_ITERATIONS

    def __post_init__(self):
        if self.replay_weight < 0:
            raise ValidationError("replay_weight must be >= 0")
        if not 0.0 <= self.replay_fraction <= 1.0:
            raise ValidationError("replay_fraction must lie in [0, 1]")


@dataclass(frozen=True)
class SynthConfig:
    count: int = 50
    concentration: float = 1.0

    def __post_init__(self):
        if self.count < 1:
            raise ValidationError("synthesis count must be >= 1")
        if self.concentration <= 0:
            raise ValidationError("concentration must be > 0")


@dataclass(frozen=True)
class AnchorHullModel:
    anchors: tuple
    trained_at: int
    trainer: TrainerConfig
    anchor_codes: np.ndarray

    @property
    def size(self) -> int:
        return len(self.anchors)

    @property
    def dim(self) -> int:
        return self.anchor_codes.shape[1]


@dataclass(frozen=True)
class EvalScores:
    recon_l2: float
    recon_id: float
    synth_frechet: float
    synth_id: float

    def as_dict(self) -> dict:
        return {
            "recon_l2": self.recon_l2,
            "recon_id": self.recon_id,
            "synth_frechet": self.synth_frechet,
            "synth_id": self.synth_id,
        }


def fit(training_set: Sequence[TimedSample], t: int, trainer: TrainerConfig | None = None) -> AnchorHullModel:
    training_set = tuple(training_set)
    if not training_set:
        raise EmptyTrainingSet(f"timestamp {t}: empty training set")
    if max(s.timestamp for s in training_set) > t:
        raise ValidationError(f"training set contains samples newer than timestamp {t}")
    codes = stack_codes(training_set)
    codes.setflags(write=False)
    return AnchorHullModel(training_set, t, trainer or TrainerConfig(), codes)


def invert_many(model: AnchorHullModel, queries) -> tuple[np.ndarray, np.ndarray]:
    """Reconstructions and reconstruction distances for a stack of queries."""
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    res = project_points(
        queries, model.anchor_codes, model.trainer.tolerance, model.trainer.max_iterations
    )
    return res.points, res.distances


def invert(model: AnchorHullModel, query) -> tuple[np.ndarray, float]:
    query = np.asarray(query, dtype=np.float64)
    points, dist = invert_many(model, query[None, :])
    return points[0], float(dist[0])


def diagnostic_loss(model: AnchorHullModel) -> float:
    """Latent analogue of the replay-weighted reconstruction loss.

    Mean squared inversion error over the current batch's anchors plus
    ``replay_weight`` times the same over the older (replayed) anchors.
    """
    current = [s for s in model.anchors if s.timestamp == model.trained_at]
    replay = [s for s in model.anchors if s.timestamp != model.trained_at]

    def mse(samples):
        if not samples:
            return 0.0
        x = stack_codes(samples)
        recon, _ = invert_many(model, x)
        return float(np.mean(np.sum((recon - x) ** 2, axis=1)))

    loss = mse(current)
    if model.trainer.replay_weight > 0:
        loss += model.trainer.replay_weight * mse(replay)
    return loss


def identity_score(a, b, id_dims) -> float:
    """Cosine similarity of ``a`` and ``b`` restricted to ``id_dims``."""
    idx = np.asarray(list(id_dims), dtype=np.intp)
    if idx.size == 0:
        raise ValidationError("id_dims must be non-empty")
    ra = np.asarray(a, dtype=np.float64)[idx]
    rb = np.asarray(b, dtype=np.float64)[idx]
    na, nb = np.linalg.norm(ra), np.linalg.norm(rb)
    if na == 0 or nb == 0:
        raise ZeroVector("identity subspace restriction is the zero vector")
    return float(np.clip(ra @ rb / (na * nb), -1.0, 1.0))


def _identity_matrix(a, b, idx) -> np.ndarray:
    ra, rb = a[:, idx], b[:, idx]
    na = np.linalg.norm(ra, axis=1, keepdims=True)
    nb = np.linalg.norm(rb, axis=1, keepdims=True)
    if np.any(na == 0) or np.any(nb == 0):
        raise ZeroVector("identity subspace restriction is the zero vector")
    return np.clip((ra / na) @ (rb / nb).T, -1.0, 1.0)


def synthesize(
    model: AnchorHullModel,
    source_batch: Batch,
    count: int = 50,
    concentration: float = 1.0,
    rng=None,
) -> np.ndarray:
    """Draw ``count`` codes from the source batch's hull, realised by the model."""
    if count < 1:
        raise ValidationError("count must be >= 1")
    draws = sample_in_hull(source_batch.train_codes, concentration, rng, size=count)
    anchor_keys = {s.key for s in model.anchors}
    if all(s.key in anchor_keys for s in source_batch.train):
        # source hull lies inside the model hull: projection is the identity
        return draws
    realised, _ = invert_many(model, draws)
    return realised


def _sqrt_psd(mat: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh((mat + mat.T) / 2.0)
    w = np.sqrt(np.clip(w, 0.0, None))
    return (v * w) @ v.T


def frechet_distance(set_a, set_b) -> float:
    """Fréchet distance between Gaussian fits of two latent sets."""
    a = np.atleast_2d(np.asarray(set_a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(set_b, dtype=np.float64))
    if a.shape[0] < 2 or b.shape[0] < 2:
        raise InsufficientSamples("Fréchet distance needs at least two samples per set")
    if a.shape[1] != b.shape[1]:
        raise ValidationError("sets have different dimensions")
    d = a.shape[1]
    ridge = COVARIANCE_RIDGE * np.eye(d)
    mu_a, mu_b = a.mean(axis=0), b.mean(axis=0)
    cov_a = np.atleast_2d(np.cov(a, rowvar=False)) + ridge
    cov_b = np.atleast_2d(np.cov(b, rowvar=False)) + ridge
    root_a = _sqrt_psd(cov_a)
    cross = _sqrt_psd(root_a @ cov_b @ root_a)
    diff = mu_a - mu_b
    value = diff @ diff + np.trace(cov_a) + np.trace(cov_b) - 2.0 * np.trace(cross)
    return float(max(value, 0.0))


def evaluate(
    model: AnchorHullModel,
    target_batch: Batch,
    id_dims,
    synth: SynthConfig | None = None,
    rng=None,
) -> EvalScores:
    """Score ``model`` on one batch: reconstruction of its test split and synthesis."""
    synth = synth or SynthConfig()
    if not target_batch.test:
        raise ValidationError(f"batch {target_batch.timestamp} has no test samples")
    idx = np.asarray(list(id_dims), dtype=np.intp)
    rng = np.random.default_rng(rng)

    tests = target_batch.test_codes
    recon, dist = invert_many(model, tests)
    recon_id = np.diagonal(_identity_matrix(recon, tests, idx))

    generated = synthesize(model, target_batch, synth.count, synth.concentration, rng)
    synth_id = _identity_matrix(generated, tests, idx).max(axis=1)
    return EvalScores(
        recon_l2=float(dist.mean()),
        recon_id=float(recon_id.mean()),
        synth_frechet=frechet_distance(generated, tests),
        synth_id=float(synth_id.mean()),
    )
