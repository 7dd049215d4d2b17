"""Physical constants (SI) used across the package.

CODATA 2018 exact/recommended values; rubidium-87 data from D. A. Steck,
"Rubidium 87 D Line Data" (rev. 2.2.2).
"""

import math

C_LIGHT = 299_792_458.0  # m/s, exact
H_PLANCK = 6.626_070_15e-34  # J s, exact
HBAR = H_PLANCK / (2.0 * math.pi)
K_BOLTZMANN = 1.380_649e-23  # J/K, exact
MU_0 = 1.256_637_062_12e-6  # N/A^2, CODATA 2018
MU_BOHR = 9.274_010_0783e-24  # J/T, CODATA 2018

# Rb-87
M_RB87 = 1.443_160_648e-25  # kg
LAMBDA_D1 = 794.978_851_156e-9  # m, D1 line (5S1/2 -> 5P1/2)
OMEGA_GS_RB87 = 2.0 * math.pi * 6.834_682_610_904_29e9  # rad/s, ground hyperfine splitting
A_HFS_RB87 = H_PLANCK * 3.417_341_305_452_15e9  # J, ground-state magnetic dipole constant
G_S = 2.002_319_304_36  # electron spin g-factor
G_I_RB87 = -0.000_995_141_4  # nuclear g-factor

GAUSS = 1e-4  # T
