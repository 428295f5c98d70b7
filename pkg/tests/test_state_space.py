import numpy as np
import pytest
from scipy import signal

from helpers import difference_equation_filter, random_stable_filter, state_space_impulse_response
from volfactor.errors import ConstraintViolationError, InstabilityError
from volfactor.filter_design import DiscreteFilter, FilterSpec, discretize
from volfactor.state_space import (
    LagWeights,
    default_truncation,
    flat_weights,
    impulse_weights,
    to_controller_canonical,
    validate_weights,
)


def ewma_like_filter():
    return DiscreteFilter(b=[0.0, 0.06], a=[1.0, -0.94])


class TestControllerCanonical:
    def test_one_pole(self):
        ss = to_controller_canonical(ewma_like_filter())
        assert ss.A.tolist() == [[0.94]]
        assert ss.B.tolist() == [[1.0]]
        assert ss.C.tolist() == [[0.06]]
        assert ss.d == 0.0

    def test_passthrough(self):
        ss = to_controller_canonical(DiscreteFilter(b=[1.0], a=[1.0]))
        assert ss.dim == 0
        assert ss.d == 1.0

    def test_first_order_halfband(self):
        ss = to_controller_canonical(DiscreteFilter(b=[0.5, 0.5], a=[1.0, 0.0]))
        assert ss.A.tolist() == [[0.0]]
        assert ss.B.tolist() == [[1.0]]
        assert ss.C.tolist() == [[0.5]]
        assert ss.d == 0.5

    def test_matches_reference_realization(self):
        rng = np.random.default_rng(42)
        for _ in range(20):
            filt = random_stable_filter(rng)
            ss = to_controller_canonical(filt)
            A, B, C, D = signal.tf2ss(filt.b[::-1][::-1], filt.a)  # ascending == given
            # scipy expects descending-degree coefficients; equal length here
            A2, B2, C2, D2 = signal.tf2ss(filt.b, filt.a)
            assert np.allclose(ss.A, A2, atol=1e-12)
            assert np.allclose(ss.B, B2, atol=1e-12)
            assert np.allclose(ss.C, C2, atol=1e-12)
            assert np.allclose(ss.d, D2.ravel()[0], atol=1e-12)

    def test_fir_numerator_longer_than_denominator(self):
        ss = to_controller_canonical(DiscreteFilter(b=[0.25, 0.5, 0.25], a=[1.0]))
        w = impulse_weights(ss, 4)
        assert np.allclose(w.h, [0.5, 0.25, 0.0, 0.0], atol=1e-15)
        assert ss.d == 0.25


class TestImpulseWeights:
    def test_geometric_weights(self):
        ss = to_controller_canonical(ewma_like_filter())
        w = impulse_weights(ss, 3)
        assert np.allclose(w.h, [0.06, 0.0564, 0.053016], atol=1e-12)
        assert w.raw_sum == pytest.approx(0.06 + 0.0564 + 0.053016, abs=1e-15)

    def test_nilpotent(self):
        ss = to_controller_canonical(DiscreteFilter(b=[0.5, 0.5], a=[1.0, 0.0]))
        w = impulse_weights(ss, 3)
        assert w.h.tolist() == [0.5, 0.0, 0.0]

    def test_matches_difference_equation(self):
        # lag-k weight == unit-impulse response of b/a at lag k, minus feedthrough
        rng = np.random.default_rng(7)
        for _ in range(20):
            filt = random_stable_filter(rng)
            ss = to_controller_canonical(filt)
            L = 200
            impulse = np.zeros(L + 1)
            impulse[0] = 1.0
            ref = difference_equation_filter(filt.b, filt.a, impulse)
            w = impulse_weights(ss, L)
            assert np.max(np.abs(w.h - ref[1:])) < 1e-10
            assert abs(ss.d - ref[0]) < 1e-14

    def test_state_recursion_equals_difference_equation_on_signals(self):
        # full transfer-function round trip on random inputs, not just impulses
        rng = np.random.default_rng(21)
        for _ in range(10):
            filt = random_stable_filter(rng)
            ss = to_controller_canonical(filt)
            x = rng.normal(size=300)
            ref = difference_equation_filter(filt.b, filt.a, x)
            z = np.zeros(ss.dim)
            got = np.zeros(len(x))
            for t in range(len(x)):
                got[t] = (ss.C[0] @ z if ss.dim else 0.0) + ss.d * x[t]
                if ss.dim:
                    z = ss.A @ z + ss.B[:, 0] * x[t]
            assert np.max(np.abs(got - ref)) < 1e-10

    def test_length_monotone_prefix(self):
        ss = to_controller_canonical(discretize(FilterSpec(order=2, cutoff=0.01)))
        short = impulse_weights(ss, 100)
        long = impulse_weights(ss, 500)
        assert np.array_equal(short.h, long.h[:100])

    def test_deterministic(self):
        ss = to_controller_canonical(discretize(FilterSpec(order=3, cutoff=0.02)))
        assert np.array_equal(impulse_weights(ss, 250).h, impulse_weights(ss, 250).h)

    def test_feedthrough_plus_weights_equals_unit_dc_gain(self):
        # conditioning of the coefficient representation limits the horizon
        # accuracy at (high order, low cutoff); test the well-posed region
        cases = [(n, 1 / 500) for n in (1, 2, 3)]
        cases += [(n, 0.01) for n in (1, 2, 3, 4, 5)]
        cases += [(n, 0.05) for n in (1, 2, 3, 4, 5, 6)]
        for n, cutoff in cases:
            ss = to_controller_canonical(discretize(FilterSpec(order=n, cutoff=cutoff)))
            w = impulse_weights(ss, 20000)
            assert ss.d + w.h.sum() == pytest.approx(1.0, abs=1e-9)
            assert w.raw_sum < 1.0


class TestValidateWeights:
    def test_strict_passes_geometric(self):
        ss = to_controller_canonical(ewma_like_filter())
        w = impulse_weights(ss, 100)
        out = validate_weights(w, "strict")
        assert np.array_equal(out.h, w.h)
        assert not out.normalized
        assert out.raw_sum < 1.0

    def test_clip_renormalizes(self):
        w = LagWeights(h=np.array([0.5, -0.001, 0.4]), truncation_length=3, raw_sum=0.899)
        out = validate_weights(w, "clip")
        assert np.allclose(out.h, [0.5 / 0.9, 0.0, 0.4 / 0.9], atol=1e-15)
        assert out.h.sum() == pytest.approx(1.0, abs=1e-12)
        assert out.normalized
        assert out.report.first_negative_lag == 2
        assert out.report.negative_magnitude == pytest.approx(0.001)

    def test_strict_raises_on_negative(self):
        w = LagWeights(h=np.array([0.5, -0.001, 0.4]), truncation_length=3, raw_sum=0.899)
        with pytest.raises(ConstraintViolationError) as exc:
            validate_weights(w, "strict")
        assert exc.value.report.first_negative_lag == 2

    def test_strict_raises_on_mass_at_least_one(self):
        w = LagWeights(h=np.array([0.6, 0.5]), truncation_length=2, raw_sum=1.1)
        with pytest.raises(ConstraintViolationError):
            validate_weights(w, "strict")

    def test_all_zero_rejected_both_modes(self):
        w = LagWeights(h=np.zeros(5), truncation_length=5, raw_sum=0.0)
        for mode in ("strict", "clip"):
            with pytest.raises(ConstraintViolationError):
                validate_weights(w, mode)

    def test_butterworth_oscillation_caught_in_strict_mode(self):
        ss = to_controller_canonical(discretize(FilterSpec(order=8, cutoff=0.01)))
        w = impulse_weights(ss, 750)
        with pytest.raises(ConstraintViolationError) as exc:
            validate_weights(w, "strict")
        first_neg = int(np.flatnonzero(w.h < -1e-12)[0]) + 1
        assert exc.value.report.first_negative_lag == first_neg
        assert str(first_neg) in str(exc.value)

    def test_clip_repairs_oscillation(self):
        ss = to_controller_canonical(discretize(FilterSpec(order=8, cutoff=0.01)))
        out = validate_weights(impulse_weights(ss, 750), "clip")
        assert np.all(out.h >= 0.0)
        assert out.h.sum() == pytest.approx(1.0, abs=1e-12)


class TestHelpers:
    def test_flat_weights(self):
        w = flat_weights(4)
        assert np.allclose(w.h, 0.25)
        assert w.normalized

    def test_default_truncation_caps(self):
        # slow filter: coverage is only reached close to the cap
        ss = to_controller_canonical(discretize(FilterSpec(order=2, cutoff=1 / 500)))
        assert 700 < default_truncation(ss) <= 750

    def test_default_truncation_short_memory(self):
        ss = to_controller_canonical(ewma_like_filter())
        L = default_truncation(ss)
        # geometric 0.94 decay covers 99.99% of mass within ~150 lags
        assert 100 < L < 200

    def test_unstable_filter_rejected(self):
        with pytest.raises(InstabilityError):
            DiscreteFilter(b=[-0.1], a=[1.0, -1.1])
