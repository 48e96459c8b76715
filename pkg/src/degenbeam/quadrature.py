"""Per-element Gauss rules for integrands carrying the singular weight 1/a.

The weight 1/a(x) is smooth away from x=0 but varies fast on elements whose
endpoints differ by a large ratio.  The rule order is therefore escalated on
the element touching 0 and on any element with x_right/x_left above a fixed
ratio; everywhere else a short rule is exact for the polynomial parts.
"""

from functools import lru_cache

import numpy as np

DEFAULT_ORDER = 4
ELEVATED_ORDER = 16
# x_right/x_left above this escalates the rule; tuned so the remaining
# quadrature error on 1/a-weighted entries stays below 1e-9 relative.
ESCALATION_RATIO = 1.3


@lru_cache(maxsize=None)
def gauss_rule(order: int):
    """Gauss-Legendre points and weights on [-1, 1], cached and read-only."""
    points, weights = np.polynomial.legendre.leggauss(order)
    points.setflags(write=False)
    weights.setflags(write=False)
    return points, weights


def element_order(x_left: float, x_right: float) -> int:
    if x_left <= 0.0 or x_right > ESCALATION_RATIO * x_left:
        return ELEVATED_ORDER
    return DEFAULT_ORDER


def element_rule(x_left: float, x_right: float):
    """Gauss points and weights mapped onto [x_left, x_right]."""
    ref_x, ref_w = gauss_rule(element_order(x_left, x_right))
    half = 0.5 * (x_right - x_left)
    return x_left + half * (ref_x + 1.0), half * ref_w
