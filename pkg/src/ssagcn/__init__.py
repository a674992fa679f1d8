"""Pedestrian trajectory prediction with social soft attention, sequential
scene attention sharing, graph convolution, and a temporal-convolution head
emitting bivariate-Gaussian futures."""

from .gaussians import GaussianParams, bivariate_nll, constrain_gaussian, sample_bivariate
from .model import ModelConfig, ModelParams, model_forward, predict_trajectories
from .rng import Rng
from .social import AttentionMatrix, SsaConfig, ssa_matrix, ssa_weight, symmetric_normalize
from .trajdata import (RawScene, SceneGrid, TrajectoryWindow, build_windows,
                       displacements, load_scene_grid, parse_trajectory_file,
                       save_grid, world_to_cell)
from .training import Checkpoint, TrainConfig, train

__version__ = "0.1.0"

__all__ = [
    "AttentionMatrix", "Checkpoint", "GaussianParams", "ModelConfig",
    "ModelParams", "RawScene", "Rng", "SceneGrid", "SsaConfig",
    "TrainConfig", "TrajectoryWindow", "bivariate_nll", "build_windows",
    "constrain_gaussian", "displacements", "load_scene_grid", "model_forward",
    "parse_trajectory_file", "predict_trajectories", "sample_bivariate",
    "save_grid", "ssa_matrix", "ssa_weight", "symmetric_normalize", "train",
    "world_to_cell",
]
