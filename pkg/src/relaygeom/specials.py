"""Error-function family: erf, erfc and the scaled complement erfcx.

Self-contained double-precision implementation, vectorized over numpy
arrays. Two regimes, split at |x| = 2:

* |x| < 2: Maclaurin series of erf, 48 terms evaluated by Horner's rule.
  The largest intermediate term at x = 2 is ~6, so cancellation costs at
  most a few ulp.
* |x| >= 2: Laplace continued fraction for the scaled complement,
  ``sqrt(pi) * exp(x^2) * erfc(x) = 1/(x + (1/2)/(x + 1/(x + (3/2)/(...))))``,
  evaluated backward from a fixed depth of 72, which is converged to double
  precision for every x >= 2.

Absolute error of erf is below 1e-14 on [-6, 6]; beyond |x| = 6 the result
saturates to +-1 (the true complement there is below 3e-17). erfcx is
accurate to ~1e-13 relative for x >= 0; for x < 0 it grows like
``2 exp(x^2)`` and overflows to inf near x = -26.6, which is the honest
double-precision answer.
"""

from __future__ import annotations

import math

import numpy as np

_SQRT_PI = math.sqrt(math.pi)
_TWO_OVER_SQRT_PI = 2.0 / _SQRT_PI
_SPLIT = 2.0
_CF_DEPTH = 72
_SERIES_TERMS = 48

# Coefficients of erf(x) * sqrt(pi) / (2 x) as a polynomial in x^2:
# (-1)^k / (k! (2k + 1)), highest order first for Horner evaluation.
_SERIES_COEF = np.array(
    [(-1.0) ** k / (math.factorial(k) * (2 * k + 1)) for k in range(_SERIES_TERMS)]
)[::-1].copy()


def _erf_series(x: np.ndarray) -> np.ndarray:
    """Maclaurin series of erf, valid to ~1e-15 absolute for |x| <= 2."""
    z = x * x
    acc = np.full_like(z, _SERIES_COEF[0])
    for c in _SERIES_COEF[1:]:
        acc = acc * z + c
    return _TWO_OVER_SQRT_PI * x * acc


def _erfcx_cf(x: np.ndarray) -> np.ndarray:
    """Continued fraction for erfcx, valid for x >= 2."""
    t = np.zeros_like(x)
    for n in range(_CF_DEPTH, 0, -1):
        t = (0.5 * n) / (x + t)
    return 1.0 / (_SQRT_PI * (x + t))


def _as_array(x) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    scalar = arr.ndim == 0
    return np.atleast_1d(arr), scalar


def erf(x):
    """Gauss error function, elementwise; odd, saturates to +-1."""
    arr, scalar = _as_array(x)
    ax = np.abs(arr)
    out = np.empty_like(arr)
    small = ax < _SPLIT
    if small.any():
        out[small] = _erf_series(arr[small])
    big = ~small
    if big.any():
        axb = ax[big]
        tail = np.exp(-axb * axb) * _erfcx_cf(axb)
        out[big] = np.copysign(1.0 - tail, arr[big])
    return float(out[0]) if scalar else out


def erfc(x):
    """Complementary error function ``1 - erf(x)``, elementwise.

    Computed from the continued fraction for x >= 2 to avoid the
    cancellation of ``1 - erf`` in the far tail.
    """
    arr, scalar = _as_array(x)
    out = np.empty_like(arr)
    hi = arr >= _SPLIT
    lo = arr <= -_SPLIT
    mid = ~(hi | lo)
    if hi.any():
        a = arr[hi]
        out[hi] = np.exp(-a * a) * _erfcx_cf(a)
    if lo.any():
        a = -arr[lo]
        out[lo] = 2.0 - np.exp(-a * a) * _erfcx_cf(a)
    if mid.any():
        out[mid] = 1.0 - _erf_series(arr[mid])
    return float(out[0]) if scalar else out


def erfcx(x):
    """Scaled complementary error function ``exp(x^2) * erfc(x)``, elementwise."""
    arr, scalar = _as_array(x)
    out = np.empty_like(arr)
    hi = arr >= _SPLIT
    neg = arr < 0.0
    mid = ~(hi | neg)
    if hi.any():
        out[hi] = _erfcx_cf(arr[hi])
    if mid.any():
        a = arr[mid]
        out[mid] = np.exp(a * a) * (1.0 - _erf_series(a))
    if neg.any():
        a = -arr[neg]
        # erfcx(-a) = 2 exp(a^2) - erfcx(a); may overflow to inf for a > ~26.6
        deep = a >= _SPLIT
        pos = np.empty_like(a)
        if deep.any():
            pos[deep] = _erfcx_cf(a[deep])
        if (~deep).any():
            am = a[~deep]
            pos[~deep] = np.exp(am * am) * (1.0 - _erf_series(am))
        with np.errstate(over="ignore"):
            out[neg] = 2.0 * np.exp(a * a) - pos
    return float(out[0]) if scalar else out
