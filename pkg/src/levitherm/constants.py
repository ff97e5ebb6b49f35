"""Physical constants used throughout, in SI units."""

from scipy.constants import Boltzmann as k_B
from scipy.constants import hbar
from scipy.constants import speed_of_light as c_light
from scipy.constants import epsilon_0 as eps0

__all__ = ["k_B", "hbar", "c_light", "eps0"]
