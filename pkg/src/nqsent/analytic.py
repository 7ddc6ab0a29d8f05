"""Closed-form reference values: zero-magnetization (Dicke) spectra and
entropies, their large-n Gaussian form, and the Haar-average (Page) entropy.

These are the oracles the statevector pipeline is tested against. Binomial
ratios use exact rational arithmetic up to n = 64 and log-gamma floats
beyond, which keeps oracle values free of cancellation noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.special import digamma

from .errors import DomainError

RATIONAL_LIMIT = 64


@dataclass
class DickeSpectrum:
    """Reduced-density eigenvalues of the half-filling superposition state.

    lambda_i = C(n-m, n/2-i) * C(m, i) / C(n, n/2) over the indices i where
    both binomials are nonzero; the distribution is hypergeometric.
    """

    n: int
    m: int
    indices: list[int]
    eigenvalues: np.ndarray  # ordered by index i

    def sorted_desc(self) -> np.ndarray:
        return np.sort(self.eigenvalues)[::-1]


def _support(n: int, m: int) -> range:
    lo = max(0, n // 2 - (n - m))
    hi = min(m, n // 2)
    return range(lo, hi + 1)


def dicke_spectrum(n: int, m: int) -> DickeSpectrum:
    if n % 2 != 0:
        raise DomainError(f"n={n} must be even")
    if not 1 <= m <= n - 1:
        raise DomainError(f"m={m} outside 1..{n - 1}")
    idx = list(_support(n, m))
    if n <= RATIONAL_LIMIT:
        c = math.comb(n, n // 2)
        vals = [Fraction(math.comb(n - m, n // 2 - i) * math.comb(m, i), c) for i in idx]
        assert sum(vals) == 1
        lam = np.array([float(v) for v in vals])
    else:
        logc = math.lgamma(n + 1) - 2 * math.lgamma(n // 2 + 1)
        lam = np.array(
            [
                math.exp(
                    math.lgamma(n - m + 1)
                    - math.lgamma(n // 2 - i + 1)
                    - math.lgamma(n // 2 - m + i + 1)
                    + math.lgamma(m + 1)
                    - math.lgamma(i + 1)
                    - math.lgamma(m - i + 1)
                    - logc
                )
                for i in idx
            ]
        )
        lam = lam / lam.sum()
    return DickeSpectrum(n=n, m=m, indices=idx, eigenvalues=lam)


def dicke_entropy(n: int, m: int) -> float:
    """Exact subregion entropy in nats from the hypergeometric spectrum."""
    lam = dicke_spectrum(n, m).eigenvalues
    nz = lam[lam > 0.0]
    return float(-(nz * np.log(nz)).sum())


def dicke_entropy_asymptotic(n: int, p: float) -> float:
    """Large-n Gaussian form 1/2 ln(2 pi e (n/2) p (1-p)) in nats.

    Note this treats the spectrum as a binomial over n/2 draws; the exact
    spectrum is hypergeometric, whose variance carries an extra factor
    (n/2)/(n-1) -> 1/2, so the exact entropy sits about (ln 2)/2 below this
    value even as n grows. The formula is kept as the reference form; see
    the acceptance suite for the measured gap.
    """
    if not 0.0 < p < 1.0:
        raise DomainError(f"p={p} outside (0, 1)")
    return 0.5 * math.log(2.0 * math.pi * math.e * (n / 2.0) * p * (1.0 - p))


def page_value(m: int, n: int) -> float:
    """Haar-average subsystem entropy in nats: H(2^n) - H(2^(n-m)) - (2^m - 1)/2^(n-m+1).

    Harmonic numbers are evaluated via the digamma function, which is the
    closed form of the partial sums to machine precision. For m > n/2 the
    pure-state symmetry m <-> n-m applies.
    """
    if not 1 <= m <= n - 1:
        raise DomainError(f"m={m} outside 1..{n - 1}")
    if m > n - m:
        m = n - m
    da = 1 << m
    db = 1 << (n - m)
    harmonic_diff = float(digamma(da * db + 1) - digamma(db + 1))
    return harmonic_diff - (da - 1) / (2.0 * db)
