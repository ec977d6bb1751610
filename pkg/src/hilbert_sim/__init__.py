"""Elastic sheet with a quantum fibre riding on every material point.

The macro body is a planar extensible elastica squeezed between two bars;
each node carries a qubit or a truncated oscillator whose Hamiltonian
depends on the local stretch and curvature, and the gradient of the fibre
propagator field can stiffen the sheet in return.
"""
__version__ = "0.1.0"

from .config import SimConfig, parse_config
from .driver import TrajectoryRecord, run
from .errors import HilbertSimError

__all__ = ["SimConfig", "TrajectoryRecord", "HilbertSimError", "parse_config", "run", "__version__"]
