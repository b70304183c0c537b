"""Synthetic drifting latent streams and embedding-file I/O.

Each timestamp is a Gaussian cluster in latent space. The first ``id_dims``
coordinates hold a fixed identity vector with a small jitter; the remaining
style coordinates are centred on a random walk that moves ``style_drift``
per timestamp.

File format (JSON lines)::

    {"d": 16, "T": 10}
    {"t": 1, "i": 0, "split": "train", "v": [...]}
    ...

A CSV variant with columns ``t,i,split,v0..v{d-1}`` is accepted on load.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import (
    Batch,
    ReplayError,
    Split,
    Stream,
    StreamConfig,
    TimedSample,
    ValidationError,
    validate_stream,
)

__all__ = [
    "InvalidSpec",
    "ParseError",
    "StreamSpec",
    "generate_stream",
    "save_stream",
    "load_stream",
]

IDENTITY_JITTER = 0.1


class InvalidSpec(ValidationError):
    code = "invalid_spec"


class ParseError(ReplayError, ValueError):
    code = "parse_error"


@dataclass(frozen=True)
class StreamSpec:
    stream: StreamConfig = field(default_factory=StreamConfig)
    id_dims: int = 4
    style_drift: float = 1.0
    within_noise: float = 0.2

    def __post_init__(self):
        d = self.stream.latent_dim
        if self.id_dims < 1 or self.id_dims >= d:
            raise InvalidSpec(f"id_dims must be in [1, {d - 1}] for latent_dim {d}")
        if self.style_drift < 0:
            raise InvalidSpec("style_drift must be >= 0")
        if self.within_noise <= 0:
            raise InvalidSpec("within_noise must be > 0")

    @property
    def style_dims(self) -> int:
        return self.stream.latent_dim - self.id_dims

    def identity_vector(self) -> np.ndarray:
        """Unit-norm identity component, derived from the stream seed."""
        rng = np.random.default_rng([self.stream.seed, 0])
        v = rng.normal(size=self.id_dims)
        return v / np.linalg.norm(v)


def _unit(rng, dim):
    v = rng.normal(size=dim)
    return v / np.linalg.norm(v)


def style_centers(spec: StreamSpec) -> np.ndarray:
    """Random-walk style centres ``c_1..c_T`` (``c_0`` is the origin)."""
    rng = np.random.default_rng([spec.stream.seed, 1])
    centers = np.zeros((spec.stream.num_timestamps, spec.style_dims))
    c = np.zeros(spec.style_dims)
    for t in range(spec.stream.num_timestamps):
        c = c + spec.style_drift * _unit(rng, spec.style_dims)
        centers[t] = c
    return centers


def generate_stream(spec: StreamSpec) -> Stream:
    cfg = spec.stream
    identity = spec.identity_vector()
    centers = style_centers(spec)
    rng = np.random.default_rng([cfg.seed, 2])
    id_sd = IDENTITY_JITTER * spec.within_noise

    def draw(count):
        ids = identity + id_sd * rng.normal(size=(count, spec.id_dims))
        style = center + spec.within_noise * rng.normal(size=(count, spec.style_dims))
        return np.hstack([ids, style])

    batches = []
    for t in range(1, cfg.num_timestamps + 1):
        center = centers[t - 1]
        train = draw(cfg.train_per_batch)
        test = draw(cfg.test_per_batch)
        batches.append(
            Batch(
                t,
                [TimedSample(v, t, i, Split.TRAIN) for i, v in enumerate(train)],
                [TimedSample(v, t, i, Split.TEST) for i, v in enumerate(test)],
            )
        )
    return validate_stream(batches, cfg)


def save_stream(stream: Stream, path, fmt: str | None = None) -> None:
    """Write ``stream`` as JSON lines (default) or CSV; floats round-trip exactly."""
    path = Path(path)
    if fmt is None:
        fmt = "csv" if path.suffix.lower() == ".csv" else "jsonl"
    if fmt not in ("jsonl", "csv"):
        raise ParseError(f"unknown stream format {fmt!r}")
    samples = [s for b in stream for s in b.train + b.test]
    with path.open("w", newline="") as fh:
        if fmt == "csv":
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["t", "i", "split"] + [f"v{c}" for c in range(stream.dim)])
            for s in samples:
                writer.writerow(
                    [s.timestamp, s.sample_index, s.split.value]
                    + [format(float(x), ".17g") for x in s.code]
                )
            return
        fh.write(json.dumps({"d": stream.dim, "T": stream.num_timestamps}) + "\n")
        for s in samples:
            values = ",".join(format(float(x), ".17g") for x in s.code)
            fh.write(
                f'{{"t": {s.timestamp}, "i": {s.sample_index}, '
                f'"split": "{s.split.value}", "v": [{values}]}}\n'
            )


def _records_jsonl(path: Path):
    header = None
    with path.open() as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
            if header is None and "d" in obj and "v" not in obj:
                header = obj
                continue
            yield lineno, obj, header


def _records_csv(path: Path):
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            return
        vcols = sorted(
            (c for c in reader.fieldnames if c.startswith("v") and c[1:].isdigit()),
            key=lambda c: int(c[1:]),
        )
        for lineno, row in enumerate(reader, 2):
            try:
                obj = {
                    "t": int(row["t"]),
                    "i": int(row["i"]),
                    "split": row["split"],
                    "v": [float(row[c]) for c in vcols],
                }
            except (KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"{path}:{lineno}: bad CSV record ({exc})") from None
            yield lineno, obj, None


def load_stream(path, fmt: str | None = None) -> Stream:
    """Read an embedding file into a validated stream.

    ``fmt`` is ``"jsonl"`` or ``"csv"``; by default it is inferred from the
    file suffix.
    """
    path = Path(path)
    if fmt is None:
        fmt = "csv" if path.suffix.lower() == ".csv" else "jsonl"
    if fmt not in ("jsonl", "csv"):
        raise ParseError(f"unknown stream format {fmt!r}")
    records = _records_jsonl(path) if fmt == "jsonl" else _records_csv(path)

    by_t: dict[int, dict[str, list]] = {}
    seen = set()
    header = None
    for lineno, obj, hdr in records:
        header = hdr or header
        try:
            t, i, split, v = int(obj["t"]), int(obj["i"]), Split(obj["split"]), obj["v"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"{path}:{lineno}: malformed record ({exc})") from None
        key = (t, i, split.value)
        if key in seen:
            raise ParseError(f"{path}:{lineno}: duplicate record {key}")
        seen.add(key)
        try:
            sample = TimedSample(v, t, i, split)
        except ValidationError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from None
        if header is not None and sample.dim != header["d"]:
            raise ParseError(f"{path}:{lineno}: vector has {sample.dim} entries, header says {header['d']}")
        by_t.setdefault(t, {"train": [], "test": []})[split.value].append(sample)

    if not by_t:
        raise ParseError(f"{path}: no sample records")
    batches = []
    for t in sorted(by_t):
        groups = by_t[t]
        batches.append(
            Batch(
                t,
                sorted(groups["train"], key=lambda s: s.sample_index),
                sorted(groups["test"], key=lambda s: s.sample_index),
            )
        )
    stream = validate_stream(batches)
    if header is not None and "T" in header and header["T"] != stream.num_timestamps:
        raise ParseError(f"{path}: header says T={header['T']}, file has {stream.num_timestamps}")
    return stream
