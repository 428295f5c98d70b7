"""State-space realization of discrete filters and lag-weight extraction.

The controller canonical form of b/a drives the variance recursion
Z(t+1) = A Z(t) + B u(t), y(t) = C Z(t) + d u(t).  The lag-k volatility
weight is h_k = C A^(k-1) B for k >= 1; the feedthrough d = b[0] is
excluded so the variance at t depends only on inputs strictly before t.
For the filter to define a valid volatility model the weights must be
nonnegative and sum to less than one; :func:`validate_weights` checks or
repairs that.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConstraintViolationError, InstabilityError
from .filter_design import DiscreteFilter

_NEG_TOL = 1e-12
_SUM_TOL = 1e-9

# Stop extending the default lag horizon once this share of the total
# absolute weight mass has been covered.
_MASS_COVERAGE = 0.9999
DEFAULT_MAX_LAGS = 750


@dataclass(frozen=True)
class StateSpaceModel:
    """(A, B, C, d) with A the companion matrix of the filter denominator."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    d: float

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        n = A.shape[0]
        B = np.asarray(self.B, dtype=float).reshape(n, 1)
        C = np.asarray(self.C, dtype=float).reshape(1, n)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "d", float(self.d))
        if A.shape != (n, n):
            raise ValueError(f"state matrix must be square, got {A.shape}")
        if n and np.max(np.abs(np.linalg.eigvals(A))) >= 1.0:
            raise InstabilityError("state matrix spectral radius is not < 1")

    @property
    def dim(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True)
class WeightReport:
    """First constraint violation found in a lag-weight sequence."""

    first_negative_lag: Optional[int]
    negative_magnitude: float
    raw_sum: float
    clipped_lags: int = 0

    def describe(self) -> str:
        parts = []
        if self.first_negative_lag is not None:
            parts.append(
                f"first negative weight at lag {self.first_negative_lag} "
                f"(magnitude {self.negative_magnitude:.3e}, "
                f"{self.clipped_lags} lag(s) affected)"
            )
        if self.raw_sum >= 1.0 + _SUM_TOL:
            parts.append(f"weight mass {self.raw_sum:.12g} >= 1")
        if not parts:
            parts.append("no violations")
        return "; ".join(parts)


@dataclass(frozen=True)
class LagWeights:
    """Volatility weights h_k indexed by lag k = 1..truncation_length.

    ``raw_sum`` records the weight mass as extracted from the model,
    before any clipping or renormalization.  Nonnegativity and unit sum
    hold only after :func:`validate_weights` in clip mode.
    """

    h: np.ndarray
    truncation_length: int
    raw_sum: float
    normalized: bool = False
    report: Optional[WeightReport] = None

    def __post_init__(self):
        h = np.asarray(self.h, dtype=float)
        object.__setattr__(self, "h", h)
        if len(h) != self.truncation_length:
            raise ValueError("truncation_length must equal len(h)")


def flat_weights(window: int) -> LagWeights:
    """Equal weights 1/W over lags 1..W (the rolling-window special case)."""
    if window < 1:
        raise ValueError("window must be >= 1")
    h = np.full(window, 1.0 / window)
    return LagWeights(h=h, truncation_length=window, raw_sum=1.0, normalized=True)


def to_controller_canonical(filt: DiscreteFilter) -> StateSpaceModel:
    """Controller canonical (A, B, C, d) realizing b/a with d = b[0]."""
    b = np.asarray(filt.b, dtype=float)
    a = np.asarray(filt.a, dtype=float)
    n = max(len(a), len(b)) - 1
    a = np.pad(a, (0, n + 1 - len(a)))
    b = np.pad(b, (0, n + 1 - len(b)))
    if n == 0:
        return StateSpaceModel(
            A=np.zeros((0, 0)), B=np.zeros((0, 1)), C=np.zeros((1, 0)), d=b[0]
        )
    A = np.zeros((n, n))
    A[0, :] = -a[1:]
    A[1:, :-1] = np.eye(n - 1)
    B = np.zeros((n, 1))
    B[0, 0] = 1.0
    C = (b[1:] - a[1:] * b[0]).reshape(1, n)
    return StateSpaceModel(A=A, B=B, C=C, d=b[0])


def impulse_weights(ss: StateSpaceModel, L: int) -> LagWeights:
    """h_k = C A^(k-1) B for k = 1..L, iterated without forming powers of A."""
    if L < 1:
        raise ValueError("truncation length must be >= 1")
    if ss.dim == 0:
        h = np.zeros(L)
        return LagWeights(h=h, truncation_length=L, raw_sum=0.0)
    h = np.empty(L)
    z = ss.B[:, 0].copy()
    for k in range(L):
        h[k] = ss.C[0] @ z
        z = ss.A @ z
    return LagWeights(h=h, truncation_length=L, raw_sum=float(h.sum()))


def default_truncation(ss: StateSpaceModel, max_lags: int = DEFAULT_MAX_LAGS) -> int:
    """Lag count covering 99.99% of |h| mass within max_lags, else max_lags."""
    w = impulse_weights(ss, max_lags)
    mass = np.abs(w.h)
    total = mass.sum()
    if total <= 0.0:
        return max_lags
    covered = np.cumsum(mass) / total
    idx = np.searchsorted(covered, _MASS_COVERAGE)
    return min(int(idx) + 1, max_lags)


def _build_report(h: np.ndarray, raw_sum: float) -> WeightReport:
    neg = np.flatnonzero(h < -_NEG_TOL)
    if neg.size:
        first = int(neg[0])
        return WeightReport(
            first_negative_lag=first + 1,
            negative_magnitude=float(-h[first]),
            raw_sum=raw_sum,
            clipped_lags=int(neg.size),
        )
    return WeightReport(first_negative_lag=None, negative_magnitude=0.0, raw_sum=raw_sum)


def validate_weights(w: LagWeights, mode: str = "clip") -> LagWeights:
    """Check the positivity and mass constraints on lag weights.

    strict: raise on any weight below -1e-12 or mass >= 1; weights pass
    through untouched (their sum stays strictly below one).
    clip: zero out negative weights and rescale the rest to sum exactly 1.
    Both modes reject a sequence with no positive mass at all.
    """
    if mode not in ("strict", "clip"):
        raise ValueError(f"mode must be 'strict' or 'clip', got {mode!r}")
    h = w.h
    report = _build_report(h, w.raw_sum)

    clipped = np.where(h < 0.0, 0.0, h)
    mass = clipped.sum()
    if mass <= 0.0:
        raise ConstraintViolationError(
            "degenerate weights: no positive mass at any lag", report=report
        )

    if mode == "strict":
        if report.first_negative_lag is not None:
            raise ConstraintViolationError(
                f"weight constraint violated: {report.describe()}", report=report
            )
        if w.raw_sum >= 1.0:
            raise ConstraintViolationError(
                f"weight mass {w.raw_sum:.12g} must be < 1", report=report
            )
        return LagWeights(
            h=h.copy(),
            truncation_length=w.truncation_length,
            raw_sum=w.raw_sum,
            normalized=False,
            report=report,
        )

    return LagWeights(
        h=clipped / mass,
        truncation_length=w.truncation_length,
        raw_sum=w.raw_sum,
        normalized=True,
        report=report,
    )


def weights_to_csv(w: LagWeights, path) -> None:
    """Write (lag, weight) rows for decay plots."""
    lags = np.arange(1, w.truncation_length + 1)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("lag,weight\n")
        for lag, weight in zip(lags, w.h):
            fh.write(f"{lag},{weight!r}\n")
