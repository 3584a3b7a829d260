"""Density-crop labeling, two-stage detection fusion and COCO-style evaluation."""

from ._backend import BACKEND
from .crop_labeling import CropLabelConfig, DensityCrop, crop_statistics, label_crops, label_crops_single_step
from .dataset import AugmentConfig, Dataset, augment_with_crops, extract_crop_rasters, load_dataset, save_dataset
from .evaluation import EvalConfig, EvalResult, evaluate, evaluate_against_oracle
from .fusion import CropWorkOrder, FusionConfig, fuse, reproject, select_crops
from .geometry import Box, Detection, ImageExtent, iou, nms, pairwise_iou
from .simulator import (
    MockDetectorConfig,
    SceneConfig,
    generate_corpus,
    generate_scene,
    mock_detect,
    run_pipeline_experiment,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "AugmentConfig",
    "Box",
    "CropLabelConfig",
    "CropWorkOrder",
    "Dataset",
    "DensityCrop",
    "Detection",
    "EvalConfig",
    "EvalResult",
    "FusionConfig",
    "ImageExtent",
    "MockDetectorConfig",
    "SceneConfig",
    "augment_with_crops",
    "crop_statistics",
    "evaluate",
    "evaluate_against_oracle",
    "extract_crop_rasters",
    "fuse",
    "generate_corpus",
    "generate_scene",
    "iou",
    "label_crops",
    "label_crops_single_step",
    "load_dataset",
    "mock_detect",
    "nms",
    "pairwise_iou",
    "reproject",
    "run_pipeline_experiment",
    "save_dataset",
    "select_crops",
]
