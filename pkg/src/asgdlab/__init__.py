"""Simulation and analysis toolkit for asynchronous SGD through its continuous-time limit.

Subpackages and modules:

- :mod:`asgdlab.params`: parameter algebra, decay rates, thresholds
- :mod:`asgdlab.staleness`: delay laws and their diagnostics
- :mod:`asgdlab.loss`: perturbed quadratic objective
- :mod:`asgdlab.asgd`: discrete delayed-read simulator
- :mod:`asgdlab.sme`: stochastic modified equation and exact OU moments
- :mod:`asgdlab.hypo`: Lyapunov-matrix certificates
- :mod:`asgdlab.kfp`: Hermite-Galerkin phase-space solver
- :mod:`asgdlab.harness`: rate fitting, experiments and the CLI
"""
from .params import Params, derive_params, theorem_rate

__version__ = "0.1.0"

__all__ = ["Params", "derive_params", "theorem_rate", "__version__"]
