"""Pose estimation of rigid bodies by matching object mixture models against
measured densities from parallel-beam cameras or lateration devices."""

import logging

from .density import (
    FeatureComponent,
    GridSpec,
    MeasurementDensity,
    ObjectModel,
    SampleSet,
    SensingKernel,
    sample_components,
)
from .errors import MixposeError
from .estimator import AnnealSchedule, OptimizerOptions, calibrate, estimate_pose, nelder_mead
from .geometry import Lateration, ParallelCamera, Pose2P, Pose6D
from .kernels import BACKEND
from .objective import Observation, Problem, objective, objective_map

__version__ = "0.1.0"

logging.getLogger(__name__).addHandler(logging.NullHandler())

__all__ = [
    "AnnealSchedule",
    "BACKEND",
    "FeatureComponent",
    "GridSpec",
    "Lateration",
    "MeasurementDensity",
    "MixposeError",
    "ObjectModel",
    "Observation",
    "OptimizerOptions",
    "ParallelCamera",
    "Pose2P",
    "Pose6D",
    "Problem",
    "SampleSet",
    "SensingKernel",
    "calibrate",
    "estimate_pose",
    "nelder_mead",
    "objective",
    "objective_map",
    "sample_components",
]
