"""Maximally-flat (Butterworth) low-pass filter design.

Analog prototype poles sit on the unit circle in the left half-plane; the
squared magnitude response is 1/(1 + w^(2n)), so the half-power point is
always at the critical frequency w = 1.  Discretization uses the bilinear
transform with the analog cutoff pre-warped to tan(pi * f_c), which keeps
the half-power property at the requested discrete cutoff.

Coefficient conventions:
  * analog polynomials are stored in descending degree (index 0 = s^n),
  * discrete filters store (b, a) in ascending lag order with a[0] = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConjugateAsymmetryError,
    InstabilityError,
    InvalidCutoffError,
    InvalidOrderError,
)

# Positivity of the volatility lag weights degrades badly past this order.
MAX_ORDER = 12

# |Im| below this is treated as conjugate-cancellation residue.
_IMAG_RESIDUE_TOL = 1e-12
# Relative tolerance when matching a pole with its conjugate partner.
_PAIR_TOL = 1e-9


def _check_order(n) -> int:
    if not isinstance(n, (int, np.integer)) or isinstance(n, bool):
        raise InvalidOrderError(f"filter order must be an integer, got {n!r}")
    if n < 1:
        raise InvalidOrderError(f"filter order must be >= 1, got {n}")
    if n > MAX_ORDER:
        raise InvalidOrderError(f"filter order must be <= {MAX_ORDER}, got {n}")
    return int(n)


@dataclass(frozen=True)
class FilterSpec:
    """Order and discrete cutoff (cycles per sample) of a low-pass design."""

    order: int
    cutoff: float

    def __post_init__(self):
        _check_order(self.order)
        if not (0.0 < self.cutoff < 0.5):
            raise InvalidCutoffError(
                f"cutoff must lie strictly inside (0, 0.5) cycles/sample, got {self.cutoff}"
            )


@dataclass(frozen=True)
class AnalogPrototype:
    """Unit-circle analog poles and the gain making DC gain exactly one."""

    poles: np.ndarray
    gain: float

    def __post_init__(self):
        poles = np.asarray(self.poles, dtype=complex)
        object.__setattr__(self, "poles", poles)
        if np.any(np.abs(np.abs(poles) - 1.0) > 1e-12):
            raise ValueError("analog prototype poles must lie on the unit circle")
        if np.any(poles.real >= 0.0):
            raise ValueError("analog prototype poles must lie in the open left half-plane")
        _split_conjugate_pairs(poles)  # raises if not conjugate-closed


@dataclass(frozen=True)
class DiscreteFilter:
    """Rational discrete filter, b/a in ascending lag order, a[0] = 1."""

    b: np.ndarray
    a: np.ndarray

    def __post_init__(self):
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        a = np.atleast_1d(np.asarray(self.a, dtype=float))
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "a", a)
        if a[0] != 1.0:
            raise ValueError(f"denominator must be normalized to a[0] = 1, got {a[0]}")
        dc = b.sum() / a.sum()
        if abs(dc - 1.0) > 1e-10:
            raise ValueError(f"low-pass filter must have unit DC gain, got {dc}")
        if len(a) > 1:
            roots = np.roots(a)
            if roots.size and np.max(np.abs(roots)) >= 1.0:
                raise InstabilityError(
                    f"denominator root of magnitude {np.max(np.abs(roots)):.6g} "
                    "is not strictly inside the unit circle"
                )

    @property
    def order(self) -> int:
        return len(self.a) - 1


def butterworth_poles(n) -> np.ndarray:
    """Left-half-plane unit-circle poles exp(j*pi*(2k-1+n)/(2n)), k = 1..n."""
    n = _check_order(n)
    k = np.arange(1, n + 1)
    return np.exp(1j * np.pi * (2 * k - 1 + n) / (2 * n))


def analog_prototype(n) -> AnalogPrototype:
    """Prototype with poles from :func:`butterworth_poles` and unit DC gain."""
    poles = butterworth_poles(n)
    gain = float(np.real(np.prod(-poles)))
    return AnalogPrototype(poles=poles, gain=gain)


def _split_conjugate_pairs(poles):
    """Partition poles into real ones and one representative per conjugate pair.

    Raises :class:`ConjugateAsymmetryError` when a complex pole has no partner.
    """
    reals: list[float] = []
    pending: list[complex] = []
    pairs: list[complex] = []
    for p in np.asarray(poles, dtype=complex):
        p = complex(p)
        if abs(p.imag) <= _IMAG_RESIDUE_TOL * max(1.0, abs(p)):
            reals.append(p.real)
            continue
        for i, q in enumerate(pending):
            if abs(p - q.conjugate()) <= _PAIR_TOL * max(1.0, abs(p)):
                pairs.append(q if q.imag > 0 else p)
                del pending[i]
                break
        else:
            pending.append(p)
    if pending:
        raise ConjugateAsymmetryError(
            f"poles are not closed under conjugation; unmatched: {pending}"
        )
    return reals, pairs


def analog_denominator(poles) -> np.ndarray:
    """Real coefficients of prod(s - s_k), descending degree (monic).

    Conjugate pairs are multiplied into real quadratics first so no
    imaginary residue accumulates during the full expansion.
    """
    reals, pairs = _split_conjugate_pairs(poles)
    coeffs = np.array([1.0])
    for p in pairs:
        quad = np.array([1.0, -2.0 * p.real, abs(p) ** 2])
        coeffs = np.convolve(coeffs, quad)
    for r in reals:
        coeffs = np.convolve(coeffs, np.array([1.0, -r]))
    return coeffs


def magnitude_response(n, w):
    """Analog magnitude 1/sqrt(1 + w^(2n)) at nonnegative frequency w."""
    n = _check_order(n)
    w = np.asarray(w, dtype=float)
    if np.any(w < 0):
        raise ValueError("frequency must be nonnegative")
    out = 1.0 / np.sqrt(1.0 + w ** (2 * n))
    return float(out) if out.ndim == 0 else out


def discretize(spec: FilterSpec) -> DiscreteFilter:
    """Bilinear transform of the analog prototype with cutoff pre-warping.

    The analog cutoff is tan(pi * spec.cutoff), so the discrete magnitude
    at the design cutoff is exactly 1/sqrt(2) up to rounding.
    """
    n = spec.order
    wa = math.tan(math.pi * spec.cutoff)
    reals, pairs = _split_conjugate_pairs(butterworth_poles(n))

    # Each analog pole s_k maps the factor (s - s_k) to
    # [(1 - s_k*wa) - (1 + s_k*wa) z^-1] / (wa (1 + z^-1)).
    den = np.array([1.0])
    for p in pairs:
        pw = p * wa
        quad = np.array(
            [abs(1 - pw) ** 2, -2.0 * (1.0 - abs(p) ** 2 * wa * wa), abs(1 + pw) ** 2]
        )
        den = np.convolve(den, quad)
    for r in reals:
        rw = r * wa
        den = np.convolve(den, np.array([1.0 - rw, -(1.0 + rw)]))

    num = wa ** n * np.array([math.comb(n, k) for k in range(n + 1)], dtype=float)

    a0 = den[0]
    a = den / a0
    a[0] = 1.0
    b = num / a0
    a = _snap_residue(a)
    # Pin exact unit DC gain: the convolved denominator sum cancels badly
    # at high order / small cutoff and would otherwise drift by ~1e-8.
    b *= a.sum() / b.sum()
    try:
        return DiscreteFilter(b=b, a=a)
    except InstabilityError:
        # Root clusters near z = 1 stop being resolvable in double precision
        # once order and 1/cutoff are both large (e.g. n = 8 at cutoff 1/500).
        raise InstabilityError(
            f"order {n} at cutoff {spec.cutoff:g} exceeds what rational "
            "coefficients can represent in double precision; lower the order "
            "or raise the cutoff"
        )


def _snap_residue(coeffs: np.ndarray, rel_tol: float = 1e-14) -> np.ndarray:
    """Zero out coefficients that are pure rounding residue (e.g. tan(pi/4) != 1)."""
    out = coeffs + 0.0  # also normalizes -0.0 to +0.0
    out[np.abs(out) <= rel_tol * np.max(np.abs(out))] = 0.0
    return out


def discrete_magnitude(filt: DiscreteFilter, freq):
    """|H(e^{j 2 pi f})| of a discrete filter at frequency f in [0, 0.5]."""
    freq = np.asarray(freq, dtype=float)
    m_b = np.arange(len(filt.b))
    m_a = np.arange(len(filt.a))
    phase = -2j * np.pi * np.atleast_1d(freq)[:, None]
    num = np.abs(np.exp(phase * m_b) @ filt.b)
    den = np.abs(np.exp(phase * m_a) @ filt.a)
    out = num / den
    return float(out[0]) if freq.ndim == 0 else out
