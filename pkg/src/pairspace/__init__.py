"""Phase-space simulation of electron-positron pair production in
spatially and temporally inhomogeneous electromagnetic pulses.

Two complementary models share one field definition and analysis
pipeline: a pseudo-spectral solver for the equal-time Wigner-function
transport equations (quantum, interference-capable) and a semi-classical
trajectory Monte Carlo built on the locally-constant-field production
rate (fast, phase-free).  A homogeneous-field quantum-kinetic solver
serves as an independent validation oracle.
"""

from .fields import FieldParams, FieldInvariants
from .grid import GridSpec
from .dhw import DhwSystem, StepperConfig, WignerState
from .observables import CoarseGrainSpec, DensityMap
from .trajectory import ForceToggles, Particle, SampleWindow
from .qkt import QktPoint

__version__ = "0.1.0"

__all__ = [
    "FieldParams", "FieldInvariants", "GridSpec", "DhwSystem",
    "StepperConfig", "WignerState", "CoarseGrainSpec", "DensityMap",
    "ForceToggles", "Particle", "SampleWindow", "QktPoint", "__version__",
]
