"""Data-driven output-feedback stabilizing policy iteration for unknown
discrete-time LTI plants with unmeasured states."""

from ofspi.tensor_ops import kron, mat_from_vecs, vec, vecs, vecv
from ofspi.plant import IOPlant, LtiSystem, check_assumption1, spectral_radius
from ofspi.reconstruction import FilterBank, companion_from_roots
from ofspi.excitation import (
    ExcitationSpec,
    ExperimentLog,
    RegressionData,
    build_regression,
    collect,
    rank_condition,
)
from ofspi.learner import SpiConfig, SpiResult, run_spi

__all__ = [
    "ExcitationSpec",
    "ExperimentLog",
    "FilterBank",
    "IOPlant",
    "LtiSystem",
    "RegressionData",
    "SpiConfig",
    "SpiResult",
    "build_regression",
    "check_assumption1",
    "collect",
    "companion_from_roots",
    "kron",
    "mat_from_vecs",
    "rank_condition",
    "run_spi",
    "spectral_radius",
    "vec",
    "vecs",
    "vecv",
]
