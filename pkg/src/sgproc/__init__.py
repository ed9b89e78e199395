"""Stochastic growth processes: simulation, likelihoods and estimation.

A population of individuals arrives as a Poisson stream in a rectangular
window, lives for exponential lifetimes and grows along independent
Cox-Ingersoll-Ross paths.  The package simulates such populations, samples
them on a time grid, evaluates exact transition likelihoods and fits the
parameters by maximum likelihood.

Submodules
----------
specfun      log-scaled modified Bessel functions, polygamma
cir          CIR transition law, stationary Gamma law, samplers
idproc       immigration-death count chain and its information matrix
sgmodel      trajectory data model and simulator
likelihood   nonstationary and stationary log-likelihoods
estimate     simplex maximum-likelihood fits and asymptotic covariance
experiments  replicated re-estimation study
dataio       file formats
cli          ``sgproc`` command line
"""
from ._backend import BACKEND
from .cir import CirParams
from .errors import (ConvergenceError, DomainError, FitError, TrajectoryError,
                     TrajectoryFormatError)
from .estimate import FitOptions, FitResult, fit_full
from .idproc import IdParams
from .likelihood import LambdaKnown, SigmaKnown, loglik_nonstationary, loglik_stationary
from .sgmodel import (EulerScheme, ExactScheme, FixedInit, ModelParams, SamplingGrid,
                      StationaryInit, Trajectory, WindowSpec, simulate)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "CirParams",
    "IdParams",
    "ModelParams",
    "WindowSpec",
    "SamplingGrid",
    "FixedInit",
    "StationaryInit",
    "ExactScheme",
    "EulerScheme",
    "Trajectory",
    "simulate",
    "LambdaKnown",
    "SigmaKnown",
    "loglik_nonstationary",
    "loglik_stationary",
    "FitOptions",
    "FitResult",
    "fit_full",
    "DomainError",
    "TrajectoryError",
    "TrajectoryFormatError",
    "FitError",
    "ConvergenceError",
]
