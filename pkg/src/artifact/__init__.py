"""Discrete transition behaviour of filtered-backprojection reconstructions
from sampled generalized Radon data."""

from .dtb import TransitionCTB, TransitionPrediction, dtb_via_upsilon, predict_ctb, predict_dtb, predict_dtb_from_phantom
from .errors import ArtifactError
from .families import FAMILIES, GrtFamily, InterfaceSurface, circular_arcs, disk_surface, parallel_beam
from .geometry import AdaptedFrame, build_adapted_frame, check_genericity, solve_tangency
from .harness import SweepReport, emit, estimate_order, run_sweep
from .presets import PRESETS, Scenario, build, preset
from .sampling import Lattice, make_kernel
from .signals import ConormalData, FilterSymbol, jump_phantom
from .transform import ReconstructionRequest, reconstruct

__version__ = "0.1.0"

__all__ = [
    "AdaptedFrame", "ArtifactError", "ConormalData", "FAMILIES", "FilterSymbol", "GrtFamily", "InterfaceSurface",
    "Lattice", "PRESETS", "ReconstructionRequest", "Scenario", "SweepReport", "TransitionCTB", "TransitionPrediction",
    "build", "build_adapted_frame", "check_genericity", "circular_arcs", "disk_surface", "dtb_via_upsilon", "emit",
    "estimate_order", "jump_phantom", "make_kernel", "parallel_beam", "predict_ctb", "predict_dtb",
    "predict_dtb_from_phantom", "preset", "reconstruct", "run_sweep", "solve_tangency",
]
