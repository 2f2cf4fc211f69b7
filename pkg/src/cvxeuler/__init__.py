"""Convex-integration construction of continuous Euler-Reynolds iterates on the 3-torus.

Modules are organised by concern: :mod:`spectral` (band-limited fields),
:mod:`multipliers` (Fourier solution operators), :mod:`beltrami`,
:mod:`geometry` (direction families), :mod:`partition`, :mod:`stage`
(one iteration step and the driver), :mod:`diagnostics` and the command line.
"""

__version__ = "0.1.0"
