"""Hand-built heightmap scenes with known stability ground truth.

Grids are 200x200 at 5 mm (1 m square) with the object centered.
"""

import numpy as np

from lazy_rearrange.stability import StabilityQuery

N, RES = 200, 0.005
_c = (np.arange(N) + 0.5) * RES - N * RES / 2
X, Y = np.meshgrid(_c, _c)


def box_bottom(half_x=0.05, half_y=0.05):
    return np.where((np.abs(X) < half_x) & (np.abs(Y) < half_y), 0.0, np.nan)


def fixtures():
    """(name, query, stable) triples."""
    out = []
    out.append(("flat-table", StabilityQuery(np.zeros((N, N)), box_bottom()), True))
    plateau_edge = np.where(X < -0.03, 0.05, 0.0)
    out.append(("half-overhang", StabilityQuery(plateau_edge, box_bottom()), False))
    wide = np.where((np.abs(X) < 0.2) & (np.abs(Y) < 0.2), 0.05, 0.0)
    out.append(("inside-wide-plateau", StabilityQuery(wide, box_bottom()), True))
    peak = np.zeros((N, N))
    peak[(np.abs(X - 0.0475) < 0.003) & (np.abs(Y - 0.0475) < 0.003)] = 0.03
    out.append(("edge-peak", StabilityQuery(peak, box_bottom()), False))
    pedestal = np.where((np.abs(X) < 0.02) & (np.abs(Y) < 0.02), 0.04, 0.0)
    out.append(("centered-pedestal", StabilityQuery(pedestal, box_bottom()), True))
    out.append(("off-center-mass-on-pedestal", StabilityQuery(pedestal, box_bottom(), (0.04, 0.0)), False))
    step = np.where(X > 0.0, 0.02, 0.0)
    out.append(("mass-over-raised-step", StabilityQuery(step, box_bottom(), (0.03, 0.0)), True))
    out.append(("mass-over-low-side", StabilityQuery(step, box_bottom(), (-0.03, 0.0)), False))
    return out
