"""Smooth low-pass cutoff h and the dyadic band filter g(t) = h(t) - h(2t).

h is infinitely differentiable, even, non-increasing on [0, inf), equal to 1
on [0, 1/2] and 0 on [1, inf); the transition uses the standard exp(-1/x)
mollifier ramp. ``sharpness`` rescales the exponent of the ramp (smaller =
gentler transition); it does not move the support knots.
"""

from dataclasses import dataclass

import numpy as np

__all__ = ["mollifier_ramp", "SmoothFilter", "DEFAULT_FILTER"]


def _exp_bump(x, sharpness):
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.exp(-sharpness / x[pos])
    return out


def mollifier_ramp(s, sharpness=1.0):
    """C-infinity ramp: 1 for s <= 0, 0 for s >= 1, strictly decreasing between."""
    s = np.asarray(s, dtype=float)
    a = _exp_bump(1.0 - s, sharpness)
    b = _exp_bump(s, sharpness)
    with np.errstate(invalid="ignore"):
        out = np.where(a + b > 0, a / np.where(a + b > 0, a + b, 1.0), 0.0)
    out[s <= 0] = 1.0
    out[s >= 1] = 0.0
    return out


@dataclass(frozen=True)
class SmoothFilter:
    """The fixed cutoff h with support knots (1/2, 1).

    ``order`` is the guaranteed number of continuous derivatives; the
    construction is C-infinity, so this attribute only records the order
    assumed by finite-exponent localization tests.
    """

    sharpness: float = 1.0
    order: int = 4

    def low(self, t):
        """h(t); negative arguments are evaluated through evenness."""
        t = np.abs(np.asarray(t, dtype=float))
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        out = np.ones_like(t)
        out[t >= 1.0] = 0.0
        mid = (t > 0.5) & (t < 1.0)
        out[mid] = mollifier_ramp(2.0 * t[mid] - 1.0, self.sharpness)
        return float(out[0]) if scalar else out

    def band(self, t):
        """g(t) = h(t) - h(2t); supported on [1/4, 1]."""
        t = np.asarray(t, dtype=float)
        return self.low(t) - self.low(2.0 * t)

    def __call__(self, t):
        return self.low(t)


DEFAULT_FILTER = SmoothFilter()
