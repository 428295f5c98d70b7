"""Shared test utilities: random stable filters and independent oracles."""

import numpy as np

from volfactor.filter_design import DiscreteFilter


def random_stable_filter(rng, max_order=6) -> DiscreteFilter:
    """Random stable rational filter with unit DC gain.

    Poles are drawn inside the unit disk (conjugate-closed), the numerator
    is random, then scaled so sum(b) = sum(a).
    """
    n = int(rng.integers(1, max_order + 1))
    poles = []
    remaining = n
    while remaining >= 2:
        radius = rng.uniform(0.1, 0.95)
        angle = rng.uniform(0.05, np.pi - 0.05)
        p = radius * np.exp(1j * angle)
        poles += [p, np.conj(p)]
        remaining -= 2
    if remaining:
        poles.append(complex(rng.uniform(-0.9, 0.9)))
    a = np.real(np.poly(poles))
    a /= a[0]
    while True:
        b = rng.normal(size=n + 1)
        if abs(b.sum()) > 1e-2:
            break
    b *= a.sum() / b.sum()
    return DiscreteFilter(b=b, a=a)


def difference_equation_filter(b, a, x) -> np.ndarray:
    """Filter x through b/a with the direct-form recursion, written plainly."""
    b = np.asarray(b, dtype=float)
    a = np.asarray(a, dtype=float)
    y = np.zeros(len(x))
    for t in range(len(x)):
        acc = 0.0
        for m in range(len(b)):
            if t - m >= 0:
                acc += b[m] * x[t - m]
        for m in range(1, len(a)):
            if t - m >= 0:
                acc -= a[m] * y[t - m]
        y[t] = acc
    return y


def state_space_impulse_response(ss, L) -> np.ndarray:
    """[d, h_1, ..., h_{L-1}] via the state recursion Z(t+1) = A Z(t) + B u(t)."""
    out = np.zeros(L)
    if ss.dim == 0:
        out[0] = ss.d
        return out
    z = np.zeros(ss.dim)
    for t in range(L):
        u = 1.0 if t == 0 else 0.0
        out[t] = float(ss.C[0] @ z) + ss.d * u
        z = ss.A @ z + ss.B[:, 0] * u
    return out
