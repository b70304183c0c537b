"""Experience replay for continual personalisation, on latent anchor hulls."""

from .core import (
    Batch,
    ReplayBuffer,
    ReplayError,
    Split,
    Stream,
    StreamConfig,
    TimedSample,
    validate_stream,
)
from .datagen import StreamSpec, generate_stream, load_stream, save_stream
from .harness import EvalConfig, compare, run_episode
from .hull import batch_hull_distance, project_onto_hull, sample_in_hull
from .metrics import PerformanceMatrix, aip, average_at, forgetting
from .model import TrainerConfig, SynthConfig, evaluate, fit, frechet_distance, invert
from .policies import PolicyConfig, PolicyKind

__version__ = "0.1.0"
