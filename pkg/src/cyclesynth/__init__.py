"""Seed-free synthesis of instruction-tuning data.

Two models teach each other from a raw text corpus: a forward model maps
instructions to responses and a backward model maps responses to
instructions, each trained on the other's outputs against gold text. The
package covers corpus segmentation, prompt-driven standardization, the
dual training loop, consistency filtering, back-translation baselines,
and a quality-evaluation kit, all behind replaceable generation/training
backends with deterministic mock implementations for offline runs.
"""

from .backends import (
    DIRECTION_BACKWARD,
    DIRECTION_BASE,
    DIRECTION_FORWARD,
    DIRECTION_JUDGE,
    Encoder,
    GenerationBackend,
    GenerationParams,
    HTTPBackend,
    HTTPEncoder,
    ModelHandle,
)
from .baselines import GoldPair, SeedSet, sample_seed
from .clustering import ClusterModel, kmeans
from .config import RunConfig, load_config
from .corpus import RawDocument, SegmentedCorpus, segment_corpus
from .cycle import CycleConfig, FinalDataset, PseudoPair, run_cycles
from .evalkit import CorrelationReport, JudgeScore, build_report, judge_pairs
from .filtering import FilterConfig, FilterVerdict, filter_dataset, prune_cluster
from .kernels import KERNEL_BACKEND
from .manifest import RunManifest
from .mock import GaussianHashEncoder, HashedBigramEncoder, MockBackend
from .prompts import PromptRegistry
from .reformat import Record, StandardizedCorpus, reformat_corpus
from .runner import resume, run
from .stats import pearson
from .training import MockTrainer, TrainingHyperparams, TrainingJobSpec

__version__ = "0.1.0"

__all__ = [
    "DIRECTION_BACKWARD",
    "DIRECTION_BASE",
    "DIRECTION_FORWARD",
    "DIRECTION_JUDGE",
    "ClusterModel",
    "CorrelationReport",
    "CycleConfig",
    "Encoder",
    "FilterConfig",
    "FilterVerdict",
    "FinalDataset",
    "GaussianHashEncoder",
    "GenerationBackend",
    "GenerationParams",
    "GoldPair",
    "HTTPBackend",
    "HTTPEncoder",
    "HashedBigramEncoder",
    "JudgeScore",
    "KERNEL_BACKEND",
    "MockBackend",
    "MockTrainer",
    "ModelHandle",
    "PromptRegistry",
    "PseudoPair",
    "RawDocument",
    "Record",
    "RunConfig",
    "RunManifest",
    "SeedSet",
    "SegmentedCorpus",
    "StandardizedCorpus",
    "TrainingHyperparams",
    "TrainingJobSpec",
    "build_report",
    "filter_dataset",
    "judge_pairs",
    "kmeans",
    "load_config",
    "pearson",
    "prune_cluster",
    "reformat_corpus",
    "resume",
    "run",
    "run_cycles",
    "sample_seed",
    "segment_corpus",
    "__version__",
]
