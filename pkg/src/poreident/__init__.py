"""Pore-scale Stokes flow, reactive transport with surface adsorption, and
identification of adsorption/desorption rates from breakthrough curves."""

from .exceptions import PoreIdentError
from .geometry import GeometryConfig, Mesh, Tag, build_geometry, build_ladder, triangulate
from .estimator import AdsorptionRateIdentifier
from .identification import (
    BreakthroughSimulator,
    FeasibleBox,
    Measurement,
    Stage,
    StagePlan,
    grid_sweep,
    multistage_identify,
    random_search,
    synthesize_measurement,
)
from .stokes import FlowBCs, solve_stokes
from .transport import Isotherm, TransportParams, run_transport

__version__ = "0.1.0"

__all__ = [
    "PoreIdentError",
    "GeometryConfig",
    "Mesh",
    "Tag",
    "build_geometry",
    "build_ladder",
    "triangulate",
    "FlowBCs",
    "solve_stokes",
    "Isotherm",
    "TransportParams",
    "run_transport",
    "BreakthroughSimulator",
    "FeasibleBox",
    "Measurement",
    "Stage",
    "StagePlan",
    "grid_sweep",
    "multistage_identify",
    "random_search",
    "synthesize_measurement",
    "AdsorptionRateIdentifier",
]
