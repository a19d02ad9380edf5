"""Tabulated antiderivatives of smooth compactly supported densities."""

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .errors import NumericError

_GL_ORDER = 10


def mollifier(t, power=1):
    """exp(-1/(t(1-t))^power) on (0, 1), zero elsewhere."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = (t > 0.0) & (t < 1.0)
    ti = t[inside]
    out[inside] = np.exp(-((ti * (1.0 - ti)) ** -power))
    return out


class CumulativeIntegral:
    """x -> integral of ``density`` from ``lo`` to x.

    The density must vanish (with its derivatives) at both ends. Panel
    integrals use Gauss-Legendre; between nodes the antiderivative is a cubic
    Hermite interpolant whose slopes are the exact density values.
    """

    def __init__(self, density, lo, hi, panels=4096):
        if not hi > lo:
            raise ValueError("empty integration range")
        self.lo = float(lo)
        self.hi = float(hi)
        self.density = density
        nodes = np.linspace(self.lo, self.hi, panels + 1)
        gx, gw = np.polynomial.legendre.leggauss(_GL_ORDER)
        mid = 0.5 * (nodes[1:] + nodes[:-1])
        half = 0.5 * (nodes[1:] - nodes[:-1])
        pts = mid[:, None] + half[:, None] * gx[None, :]
        panel = (density(pts) * gw[None, :]).sum(axis=1) * half
        if not np.all(np.isfinite(panel)):
            raise NumericError("non-finite density sample in cumulative integral")
        cum = np.concatenate(([0.0], np.cumsum(panel)))
        self.total = float(cum[-1])
        self._spline = CubicHermiteSpline(nodes, cum, density(nodes))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        inner = self._spline(np.clip(x, self.lo, self.hi))
        return np.where(x <= self.lo, 0.0, np.where(x >= self.hi, self.total, inner))
