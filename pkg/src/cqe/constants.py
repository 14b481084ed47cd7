"""Physical constants used throughout the package (2019 SI / CODATA exact values).

All internal arithmetic is done in strict SI units (farad, henry, joule,
second, radian per second).  Unit conversion happens only at the netlist and
reporting boundaries, so the values below fully determine the numerical
output.
"""

import math

# elementary charge, C (exact)
E_CHARGE = 1.602176634e-19

# Planck constant, J s (exact)
H_PLANCK = 6.62607015e-34

# reduced Planck constant, J s
HBAR = H_PLANCK / (2.0 * math.pi)

# Boltzmann constant, J/K (exact)
K_BOLTZMANN = 1.380649e-23

# superconducting flux quantum h/2e, Wb
PHI0 = H_PLANCK / (2.0 * E_CHARGE)

# reduced flux quantum Phi0/2pi, Wb
PHI0_BAR = PHI0 / (2.0 * math.pi)

# von Klitzing constant h/e^2, ohm
R_KLITZING = H_PLANCK / E_CHARGE**2
