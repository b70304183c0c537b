"""Domain types shared by every stage of a replay experiment.

A *stream* is a list of :class:`Batch` objects indexed by consecutive,
1-based timestamps. Every sample in a batch is a :class:`TimedSample`, a
latent code tagged with where it came from. Samples are identified by the
triple ``(timestamp, sample_index, split)``; the code itself never takes part
in equality, so buffers and training sets can be compared as identity sets.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "ReplayError",
    "ValidationError",
    "DimensionMismatch",
    "NonConsecutiveTimestamps",
    "EmptyTrainSet",
    "EmptyAnchorSet",
    "Split",
    "SampleKey",
    "TimedSample",
    "Batch",
    "ReplayBuffer",
    "StreamConfig",
    "Stream",
    "as_code",
    "stack_codes",
    "validate_stream",
]


class ReplayError(Exception):
    """Base class for all errors raised by this package."""

    code = "error"

    def to_record(self) -> dict:
        return {"error": self.code, "message": str(self)}


class ValidationError(ReplayError, ValueError):
    code = "validation_error"


class DimensionMismatch(ValidationError):
    code = "dimension_mismatch"


class NonConsecutiveTimestamps(ValidationError):
    code = "non_consecutive_timestamps"


class EmptyTrainSet(ValidationError):
    code = "empty_train_set"


class EmptyAnchorSet(ReplayError, ValueError):
    code = "empty_anchor_set"


class Split(str, enum.Enum):
    TRAIN = "train"
    TEST = "test"


SampleKey = tuple  # (timestamp, sample_index, split value)


def as_code(values) -> np.ndarray:
    """Return ``values`` as a read-only 1-D float64 latent code."""
    arr = np.array(values, dtype=np.float64).reshape(-1)
    if arr.size == 0:
        raise DimensionMismatch("latent code must have dimension >= 1")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("latent code contains non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TimedSample:
    code: np.ndarray
    timestamp: int
    sample_index: int
    split: Split = Split.TRAIN

    def __post_init__(self):
        object.__setattr__(self, "code", as_code(self.code))
        object.__setattr__(self, "split", Split(self.split))
        if self.timestamp < 1:
            raise ValidationError(f"timestamp must be >= 1, got {self.timestamp}")
        if self.sample_index < 0:
            raise ValidationError(f"sample_index must be >= 0, got {self.sample_index}")

    @property
    def key(self) -> SampleKey:
        return (self.timestamp, self.sample_index, self.split.value)

    @property
    def dim(self) -> int:
        return self.code.shape[0]

    def __eq__(self, other):
        if not isinstance(other, TimedSample):
            return NotImplemented
        return self.key == other.key

    def __hash__(self):
        return hash(self.key)

    def __repr__(self):
        return f"TimedSample(t={self.timestamp}, i={self.sample_index}, {self.split.value})"


def stack_codes(samples: Iterable[TimedSample]) -> np.ndarray:
    """Stack sample codes into an ``(n, d)`` array."""
    samples = list(samples)
    if not samples:
        return np.empty((0, 0))
    return np.vstack([s.code for s in samples])


@dataclass(frozen=True)
class Batch:
    timestamp: int
    train: tuple
    test: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "train", tuple(self.train))
        object.__setattr__(self, "test", tuple(self.test))

    @property
    def train_codes(self) -> np.ndarray:
        return stack_codes(self.train)

    @property
    def test_codes(self) -> np.ndarray:
        return stack_codes(self.test)


@dataclass(frozen=True)
class ReplayBuffer:
    """The retained past samples; ``members`` holds at most ``capacity`` items."""

    capacity: int
    members: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))
        if self.capacity < 0:
            raise ValidationError("buffer capacity must be >= 0")
        if len(self.members) > self.capacity:
            raise ValidationError(
                f"buffer holds {len(self.members)} members, capacity {self.capacity}"
            )

    @property
    def identities(self) -> frozenset:
        return frozenset(m.key for m in self.members)

    @property
    def timestamps(self) -> set:
        return {m.timestamp for m in self.members}

    def __len__(self):
        return len(self.members)

    def __eq__(self, other):
        if not isinstance(other, ReplayBuffer):
            return NotImplemented
        return self.identities == other.identities

    def __hash__(self):
        return hash(self.identities)


@dataclass(frozen=True)
class StreamConfig:
    num_timestamps: int = 10
    train_per_batch: int = 20
    test_per_batch: int = 10
    latent_dim: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.num_timestamps < 1:
            raise ValidationError("num_timestamps must be >= 1")
        if self.train_per_batch < 1:
            raise ValidationError("train_per_batch must be >= 1")
        if self.test_per_batch < 0:
            raise ValidationError("test_per_batch must be >= 0")
        if self.latent_dim < 1:
            raise ValidationError("latent_dim must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValidationError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class Stream:
    """A validated, immutable sequence of batches."""

    batches: tuple
    dim: int
    _index: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "batches", tuple(self.batches))
        index = {}
        for b in self.batches:
            for s in b.train + b.test:
                index[s.key] = s
        object.__setattr__(self, "_index", index)

    @property
    def num_timestamps(self) -> int:
        return len(self.batches)

    def __len__(self):
        return len(self.batches)

    def __iter__(self):
        return iter(self.batches)

    def batch(self, t: int) -> Batch:
        """Return the batch with (1-based) timestamp ``t``."""
        return self.batches[t - 1]

    def sample(self, key: SampleKey) -> TimedSample:
        return self._index[tuple(key)]

    def truncated(self, num_timestamps: int) -> "Stream":
        return Stream(self.batches[:num_timestamps], self.dim)


def validate_stream(batches: Sequence[Batch], config: StreamConfig | None = None) -> Stream:
    """Check a list of batches and wrap it in a :class:`Stream`.

    Timestamps must run 1..T without gaps, every code must share one
    dimension, every batch needs a non-empty train split, and sample
    identities must be unique. When ``config`` is given its ``num_timestamps``
    and ``latent_dim`` are enforced too.
    """
    batches = list(batches)
    if not batches:
        raise ValidationError("stream has no batches")

    timestamps = [b.timestamp for b in batches]
    if timestamps != list(range(1, len(batches) + 1)):
        raise NonConsecutiveTimestamps(
            f"timestamps must be 1..{len(batches)} in order, got {timestamps}"
        )
    if config is not None and len(batches) != config.num_timestamps:
        raise NonConsecutiveTimestamps(
            f"expected {config.num_timestamps} batches, got {len(batches)}"
        )

    dim = config.latent_dim if config is not None else None
    seen = set()
    for b in batches:
        if not b.train:
            raise EmptyTrainSet(f"batch {b.timestamp} has an empty train set")
        for split, members in ((Split.TRAIN, b.train), (Split.TEST, b.test)):
            for s in members:
                if s.timestamp != b.timestamp:
                    raise ValidationError(
                        f"batch {b.timestamp}: sample {s.key} carries timestamp {s.timestamp}"
                    )
                if s.split is not split:
                    raise ValidationError(f"batch {b.timestamp}: sample {s.key} in wrong split")
                if dim is None:
                    dim = s.dim
                elif s.dim != dim:
                    raise DimensionMismatch(
                        f"batch {b.timestamp}: sample {s.key} has dimension {s.dim}, expected {dim}"
                    )
                if s.key in seen:
                    raise ValidationError(f"batch {b.timestamp}: duplicate sample {s.key}")
                seen.add(s.key)
    return Stream(batches, dim)
