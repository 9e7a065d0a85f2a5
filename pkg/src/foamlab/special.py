"""Numeric kernels for the bump and smoothed-step primitives.

``bump(y) = exp(-1/(1 - y^2))`` on ``|y| < 1`` and 0 elsewhere.  The m-th
derivative has the closed form ``P_m(y) / (1 - y^2)^(2m) * bump(y)`` where the
integer polynomials ``P_m`` follow the recurrence

    P_{m+1} = P_m' * Q^2 + (4 m y Q - 2 y) * P_m,     Q = 1 - y^2.

``sstep`` is the normalised antiderivative of the bump, evaluated with a fixed
64-node Gauss-Legendre table.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from numpy.polynomial import polynomial as npoly
from numpy.polynomial.legendre import leggauss

QUAD_NODES = 64
_GL_X, _GL_W = leggauss(QUAD_NODES)


@lru_cache(maxsize=None)
def bump_poly(m: int) -> tuple[int, ...]:
    """Integer coefficients (low order first) of P_m."""
    if m == 0:
        return (1,)
    prev = np.array(bump_poly(m - 1), dtype=object)
    q = np.array([1, 0, -1], dtype=object)
    y = np.array([0, 1], dtype=object)
    d = npoly.polyder(prev) if len(prev) > 1 else np.array([0], dtype=object)
    term1 = npoly.polymul(d, npoly.polymul(q, q))
    factor = npoly.polysub(npoly.polymul(np.array([0, 4 * (m - 1)], dtype=object), q), 2 * y)
    term2 = npoly.polymul(factor, prev)
    out = npoly.polyadd(term1, term2)
    coeffs = [int(c) for c in out]
    while len(coeffs) > 1 and coeffs[-1] == 0:
        coeffs.pop()
    return tuple(coeffs)


def _horner(coeffs, y):
    acc = 0.0 * y
    for c in reversed(coeffs):
        acc = acc * y + c
    return acc


def bump_d(m: int, y: float) -> float:
    """m-th derivative of the bump at a scalar point."""
    if not -1.0 < y < 1.0:
        return 0.0
    q = 1.0 - y * y
    log_mag = -1.0 / q - 2 * m * math.log(q)
    if log_mag < -745.0:
        return 0.0
    return _horner(bump_poly(m), y) * math.exp(log_mag)


def bump_d_array(m: int, y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    inside = np.abs(y) < 1.0
    if not inside.any():
        return out
    yi = y[inside]
    q = 1.0 - yi * yi
    with np.errstate(divide="ignore", over="ignore", under="ignore"):
        log_mag = -1.0 / q - 2 * m * np.log(q)
        val = _horner(bump_poly(m), yi) * np.exp(np.maximum(log_mag, -745.0))
    val[log_mag < -745.0] = 0.0
    out[inside] = val
    return out


def _integrate_bump(a: float, b: float) -> float:
    t = 0.5 * (b - a) * _GL_X + 0.5 * (b + a)
    return 0.5 * (b - a) * float(np.sum(_GL_W * bump_d_array(0, t)))


#: integral of the bump over [-1, 1]
BUMP_INTEGRAL = 2.0 * _integrate_bump(0.0, 1.0)


def sstep(y: float) -> float:
    if y <= -1.0:
        return 0.0
    if y >= 1.0:
        return 1.0
    if y > 0.0:
        return 1.0 - sstep(-y)
    return _integrate_bump(-1.0, y) / BUMP_INTEGRAL


def sstep_array(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    out = np.where(y >= 1.0, 1.0, 0.0)
    mid = np.abs(y) < 1.0
    if mid.any():
        ym = y[mid]
        neg = -np.abs(ym)
        # nodes mapped onto [-1, neg] for every point at once
        half = 0.5 * (neg + 1.0)
        t = half[:, None] * _GL_X[None, :] + (0.5 * (neg - 1.0))[:, None]
        vals = half * (bump_d_array(0, t) @ _GL_W) / BUMP_INTEGRAL
        out[mid] = np.where(ym > 0.0, 1.0 - vals, vals)
    return out


def sstep_d(m: int, y: float) -> float:
    """m-th derivative of sstep; order 0 is sstep itself."""
    if m == 0:
        return sstep(y)
    return bump_d(m - 1, y) / BUMP_INTEGRAL


def sstep_d_array(m: int, y: np.ndarray) -> np.ndarray:
    if m == 0:
        return sstep_array(y)
    return bump_d_array(m - 1, y) / BUMP_INTEGRAL
