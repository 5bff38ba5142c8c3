"""Density-aware random-walk embeddings and MPNN graph classification."""

from .density import DensityProfile, EdgeTruss, Metric, core_numbers, degrees, density_profile
from .graph import GeneratorConfig, Graph, LabeledGraphSet, generate_synthetic, load_dataset
from .mpnn import InputMode, ModelConfig, TrainedModel, Variant
from .sgns import EmbeddingMatrix, SgnsConfig
from .walks import ThresholdRule, WalkConfig, WalkCorpus

__all__ = [
    "DensityProfile", "EdgeTruss", "Metric", "core_numbers", "degrees", "density_profile",
    "GeneratorConfig", "Graph", "LabeledGraphSet", "generate_synthetic", "load_dataset",
    "InputMode", "ModelConfig", "TrainedModel", "Variant",
    "EmbeddingMatrix", "SgnsConfig",
    "ThresholdRule", "WalkConfig", "WalkCorpus",
]
