"""Closed-form and recursive quantities of the giver scheme.

Every quantity here is dimensionless and refers to the unit-mean
normalisation of the wealth distribution.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ._validation import check_fraction, check_positive_int
from .exceptions import NumericalError

#: below this modulus the truncated moment series is accurate to double precision
TAYLOR_RADIUS = 1e-4
DEFAULT_TAYLOR_TERMS = 20


@dataclass(frozen=True)
class MomentSequence:
    """Steady-state moments ``mu_0 .. mu_n`` for a transfer fraction ``f``."""

    f: float
    values: np.ndarray

    def __getitem__(self, n):
        return self.values[n]

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    @property
    def n_max(self):
        return len(self.values) - 1

    @property
    def variance(self):
        return self.values[2] - self.values[1] ** 2


def _denominator(f, n):
    # 1 - f**n - (1-f)**n without cancellation for small f
    return -math.expm1(n * math.log1p(-f)) - f ** n


@lru_cache(maxsize=256)
def _moments_cached(f, n_max):
    a = [1.0, 1.0]
    row = [1, 2, 1]  # Pascal row for n = 2
    for n in range(2, n_max + 1):
        if n > 2:
            row = [1] + [row[k - 1] + row[k] for k in range(1, n)] + [1]
        denom = _denominator(f, n)
        if denom <= 0.0 or not math.isfinite(denom):
            raise NumericalError(f"moment recursion denominator vanished at n={n}, f={f}")
        total = math.fsum(row[k] * f ** k * a[k] * a[n - k] for k in range(1, n))
        a.append(total / denom)
        if not math.isfinite(a[-1]):
            raise NumericalError(f"moment mu_{n} overflowed for f={f}")
    return tuple(a[: n_max + 1])


def steady_moments(f, n_max):
    """Return the steady-state moments ``mu_0 .. mu_{n_max}``.

    The moments follow from matching powers of ``z`` in the steady-state
    functional equation, with ``mu_0 = mu_1 = 1``.

    >>> steady_moments(0.5, 3).values.tolist()
    [1.0, 1.0, 2.0, 6.0]
    """
    f = check_fraction(f)
    n_max = check_positive_int(n_max, "n_max")
    return MomentSequence(f, np.array(_moments_cached(f, n_max)))


@lru_cache(maxsize=256)
def complement_coefficients(f, n_terms=DEFAULT_TAYLOR_TERMS):
    """Coefficients ``c_n`` with ``1 - g(z) = sum_{n>=1} c_n z**n``.

    Returned as an array ``[c_1, ..., c_{n_terms}]``.
    """
    a = _moments_cached(f, n_terms)
    coef = [a[n] * (-1.0) ** (n + 1) / math.factorial(n) for n in range(1, n_terms + 1)]
    out = np.array(coef)
    out.flags.writeable = False
    return out


def taylor_complement(f, z, n_terms=DEFAULT_TAYLOR_TERMS):
    """Evaluate ``1 - g(z)`` from the moment series (Horner form)."""
    f = check_fraction(f)
    z = np.asarray(z, dtype=complex)
    coef = complement_coefficients(f, n_terms)
    acc = np.zeros_like(z)
    for c in coef[::-1]:
        acc = (acc + c) * z
    return acc


def taylor_eval(f, z, n_terms=DEFAULT_TAYLOR_TERMS):
    """Evaluate the Laplace transform ``g(z)`` from its moment series.

    ``g(z) = sum_n mu_n (-z)**n / n!``.  Intended for ``|z| < 1e-4``, where
    twenty terms reach double precision.  Accepts scalars or arrays.
    """
    f = check_fraction(f)
    n_terms = check_positive_int(n_terms, "n_terms")
    out = 1.0 - taylor_complement(f, z, n_terms)
    return out[()] if out.ndim == 0 else out


def variance_evolution(f, mu2_initial, t):
    """Variance of the unit-mean wealth distribution at time ``t``.

    Solves the second-moment relaxation equation starting from the
    initial second moment ``mu2_initial``; time is measured in mean
    transactions per agent.
    """
    f = check_fraction(f)
    if mu2_initial < 1.0:
        raise ValueError("mu2_initial must be >= 1 for a unit-mean distribution")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be nonnegative")
    out = (mu2_initial - 1.0 / (1.0 - f)) * np.exp(-f * (1.0 - f) * t) + f / (1.0 - f)
    return out[()] if out.ndim == 0 else out


def steady_variance(f):
    f = check_fraction(f)
    return f / (1.0 - f)


def relaxation_time(f):
    """E-folding time ``1 / (f (1 - f))`` of the variance."""
    f = check_fraction(f)
    return 1.0 / (f * (1.0 - f))


def asymptotic_exponent(f):
    """Power-law exponent ``alpha`` of ``|g(z)|`` at large ``|z|``.

    The density then behaves as ``w**(alpha - 1)`` near zero wealth, so
    ``alpha < 1`` (i.e. ``f > 1/2``) signals a divergent density at ``w = 0``.
    """
    f = check_fraction(f)
    return -1.0 / math.log2(1.0 - f)
