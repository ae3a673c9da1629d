"""roadmrf: spatio-temporal superpixel-MRF road detection plus 3D corridor
scene reconstruction, rendering, export and evaluation."""

__version__ = "0.1.0"

from .corpus import CameraParams, Frame, RoadSpec, SequenceManifest, load_sequence, synthesize_sequence
from .features import FrameFeatures, GaborBank, compute_features, make_gabor_bank
from .mrf import EnergyParams, PipelineConfig, minimize_frame, run_sequence
from .pools import FeaturePools, SOMConfig, load_pools, save_pools, train_pools
from .superpixel import SuperpixelGraph, slic_segment

__all__ = [
    "CameraParams",
    "EnergyParams",
    "FeaturePools",
    "Frame",
    "FrameFeatures",
    "GaborBank",
    "PipelineConfig",
    "RoadSpec",
    "SOMConfig",
    "SequenceManifest",
    "SuperpixelGraph",
    "__version__",
    "compute_features",
    "load_pools",
    "load_sequence",
    "make_gabor_bank",
    "minimize_frame",
    "run_sequence",
    "save_pools",
    "slic_segment",
    "synthesize_sequence",
    "train_pools",
]
