"""Numerical lab for the Vafa-Witten and Hitchin equations on flat complex tori."""

__version__ = "0.1.0"

from .bundle import BundleData, make_background
from .flow import FlowConfig, FlowTrace, run_flow
from .functional import PathSpec, donaldson_functional
from .lattice import LatticeTorus, build_torus
from .moment import moment_residual

__all__ = ["BundleData", "FlowConfig", "FlowTrace", "LatticeTorus", "PathSpec", "__version__",
           "build_torus", "donaldson_functional", "make_background", "moment_residual", "run_flow"]
