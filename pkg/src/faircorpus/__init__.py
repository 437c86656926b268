"""Fairness benchmarking over an annotated corpus of tabular datasets."""

from .manifest import CorpusRegistry, DatasetAnnotation, Scenario, enumerate_scenarios, load_registry, parse_manifest
from .transform import TransformConfig, TransformReport, replay_transform, transform_pipeline

__all__ = [
    "CorpusRegistry",
    "DatasetAnnotation",
    "Scenario",
    "TransformConfig",
    "TransformReport",
    "enumerate_scenarios",
    "load_registry",
    "parse_manifest",
    "replay_transform",
    "transform_pipeline",
]
__version__ = "0.1.0"
