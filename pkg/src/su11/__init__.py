"""Gaussian-state simulation of SU(1,1) interferometers."""
from ._validation import DomainError
from .circuit import NLO, Circuit, Detector, Loss, Observable, Phase, Seed
from .estimator import SensitivityEstimator
from .fisher import FisherReport, cfi_gaussian, qcrb, qfi, qfi_gaussian
from .gaussian_core import GaussianState
from .interferometer import (InterferometerConfig, SensitivityReport, Topology, ZeroSlope,
                             optimize_operating_point, sensitivity, sweep)

__all__ = ["DomainError", "NLO", "Circuit", "Detector", "Loss", "Observable", "Phase", "Seed",
           "SensitivityEstimator", "FisherReport", "cfi_gaussian", "qcrb", "qfi", "qfi_gaussian",
           "GaussianState", "InterferometerConfig", "SensitivityReport", "Topology", "ZeroSlope",
           "optimize_operating_point", "sensitivity", "sweep"]
