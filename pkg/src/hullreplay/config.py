"""Experiment configuration files (YAML).

Example::

    stream:
      generate:
        num_timestamps: 10
        train_per_batch: 20
        test_per_batch: 10
        latent_dim: 16
        id_dims: 4
        style_drift: 1.0
        within_noise: 0.2
        seed: 0            # run seed s uses stream seed (seed + s)
    policies:
      - {kind: lower}
      - {kind: upper}
      - {kind: er_rand, capacity: 3}
      - {kind: er_hull, capacity: 3, ransac_samples: 5000}
    trainer: {replay_weight: 1.0, replay_fraction: 0.5}
    id_dims: [0, 1, 2, 3]
    synth: {count: 50, concentration: 1.0}
    metrics: [recon_l2, recon_id, synth_frechet, synth_id]
    seeds: [0, 1, 2]
    output: results/

Use ``stream: {load: {path: latents.jsonl, format: jsonl}}`` for an
embedding file instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from .core import Stream, StreamConfig, ValidationError
from .datagen import StreamSpec, generate_stream, load_stream
from .harness import METRICS, EvalConfig
from .model import SynthConfig, TrainerConfig
from .policies import PolicyConfig

__all__ = ["StreamSource", "ExperimentConfig", "load_config", "config_from_dict"]


@dataclass(frozen=True)
class StreamSource:
    spec: StreamSpec | None = None
    path: str | None = None
    format: str | None = None

    def __post_init__(self):
        if (self.spec is None) == (self.path is None):
            raise ValidationError("stream source needs exactly one of 'generate' or 'load'")

    def stream_for(self, seed: int) -> Stream:
        if self.path is not None:
            return load_stream(self.path, self.format)
        cfg = self.spec.stream
        shifted = StreamConfig(
            cfg.num_timestamps, cfg.train_per_batch, cfg.test_per_batch, cfg.latent_dim,
            (cfg.seed + seed) % 2**64,
        )
        return generate_stream(
            StreamSpec(shifted, self.spec.id_dims, self.spec.style_drift, self.spec.within_noise)
        )


@dataclass(frozen=True)
class ExperimentConfig:
    stream: StreamSource
    policies: tuple
    trainer: TrainerConfig = field(default_factory=TrainerConfig)
    id_dims: tuple = (0, 1, 2, 3)
    synth: SynthConfig = field(default_factory=SynthConfig)
    output: str = "results"
    seeds: tuple = (0,)
    metrics: tuple = METRICS
    jobs: int = 1

    def __post_init__(self):
        object.__setattr__(self, "policies", tuple(self.policies))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if not self.policies:
            raise ValidationError("config needs at least one policy")
        if not self.seeds:
            raise ValidationError("config needs at least one seed")
        labels = [p.label for p in self.policies]
        if len(set(labels)) != len(labels):
            raise ValidationError(f"duplicate policies in config: {labels}")

    @property
    def eval_config(self) -> EvalConfig:
        return EvalConfig(self.id_dims, self.synth, self.metrics)


def _build(cls, data, where):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ValidationError(f"{where}: expected a mapping")
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ValidationError(f"{where}: unknown keys {sorted(unknown)}")
    return cls(**data)


def config_from_dict(data: dict, base_dir: Path | None = None) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ValidationError("config must be a mapping")
    data = dict(data)
    src = data.pop("stream", None) or {"generate": {}}
    if "generate" in src:
        gen = dict(src["generate"] or {})
        stream_keys = {f.name for f in fields(StreamConfig)}
        scfg = _build(StreamConfig, {k: gen.pop(k) for k in list(gen) if k in stream_keys}, "stream.generate")
        source = StreamSource(spec=StreamSpec(scfg, **gen))
    elif "load" in src:
        load = dict(src["load"])
        path = Path(load["path"])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        source = StreamSource(path=str(path), format=load.get("format"))
    else:
        raise ValidationError("stream section needs 'generate' or 'load'")

    policies = data.pop("policies", None)
    if not isinstance(policies, list):
        raise ValidationError("'policies' must be a list")
    policies = [_build(PolicyConfig, p, f"policies[{i}]") for i, p in enumerate(policies)]
    trainer = _build(TrainerConfig, data.pop("trainer", None), "trainer")
    synth = _build(SynthConfig, data.pop("synth", None), "synth")
    known = {"id_dims", "output", "seeds", "metrics", "jobs"}
    unknown = set(data) - known
    if unknown:
        raise ValidationError(f"unknown top-level keys {sorted(unknown)}")
    return ExperimentConfig(source, policies, trainer, synth=synth, **data)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    with path.open() as fh:
        data = yaml.safe_load(fh)
    return config_from_dict(data, base_dir=path.parent)
