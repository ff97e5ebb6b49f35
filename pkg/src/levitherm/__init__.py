"""Stochastic dynamics and thermodynamics of optically levitated particles.

Subpackages cover the environment couplings (gas, radiation), the
optical trap, Langevin simulation, spectral/statistical analysis,
bistable escape rates, and stochastic energetics.  All public APIs take
and return SI quantities.
"""

__version__ = "0.1.0"

from . import analysis, environment, kramers, langevin, optics, thermo
from .particles import ParticleSpec, Sphere, Cylinder, silica_sphere

__all__ = [
    "analysis",
    "environment",
    "kramers",
    "langevin",
    "optics",
    "thermo",
    "ParticleSpec",
    "Sphere",
    "Cylinder",
    "silica_sphere",
    "__version__",
]
