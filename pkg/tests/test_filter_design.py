import numpy as np
import pytest
from scipy import signal

from volfactor.errors import (
    ConjugateAsymmetryError,
    InstabilityError,
    InvalidCutoffError,
    InvalidOrderError,
)
from volfactor.filter_design import (
    AnalogPrototype,
    DiscreteFilter,
    FilterSpec,
    analog_denominator,
    analog_prototype,
    butterworth_poles,
    discrete_magnitude,
    discretize,
    magnitude_response,
)

SQRT2 = np.sqrt(2.0)


class TestPoles:
    def test_n1(self):
        poles = butterworth_poles(1)
        assert len(poles) == 1
        assert abs(poles[0] - (-1.0)) < 1e-12

    def test_n2(self):
        poles = sorted(butterworth_poles(2), key=lambda p: p.imag)
        expected = [
            complex(-SQRT2 / 2, -SQRT2 / 2),
            complex(-SQRT2 / 2, SQRT2 / 2),
        ]
        for got, want in zip(poles, expected):
            assert abs(got - want) < 1e-12

    @pytest.mark.parametrize("n", range(1, 9))
    def test_unit_circle_left_half_conjugate_closed(self, n):
        poles = butterworth_poles(n)
        assert len(poles) == n
        assert np.all(np.abs(np.abs(poles) - 1.0) < 1e-12)
        assert np.all(poles.real < 0.0)
        # conjugate closure: the multiset matches its own conjugate
        conj = sorted(np.conj(poles), key=lambda p: (round(p.real, 9), round(p.imag, 9)))
        orig = sorted(poles, key=lambda p: (round(p.real, 9), round(p.imag, 9)))
        assert np.allclose(orig, conj, atol=1e-12)

    @pytest.mark.parametrize("bad", [0, -1, -5])
    def test_invalid_order(self, bad):
        with pytest.raises(InvalidOrderError):
            butterworth_poles(bad)

    def test_order_cap(self):
        with pytest.raises(InvalidOrderError):
            butterworth_poles(13)

    def test_prototype_gain(self):
        proto = analog_prototype(4)
        assert isinstance(proto, AnalogPrototype)
        assert proto.gain == pytest.approx(1.0, abs=1e-12)


class TestAnalogDenominator:
    def test_classical_polynomials(self):
        # hand-expanded: (s+1), (s^2 + sqrt2 s + 1), (s+1)(s^2+s+1)
        assert np.allclose(analog_denominator(butterworth_poles(1)), [1, 1], atol=1e-10)
        assert np.allclose(
            analog_denominator(butterworth_poles(2)), [1, SQRT2, 1], atol=1e-10
        )
        assert np.allclose(
            analog_denominator(butterworth_poles(3)), [1, 2, 2, 1], atol=1e-10
        )

    def test_real_coefficients(self):
        for n in range(1, 9):
            coeffs = analog_denominator(butterworth_poles(n))
            assert coeffs.dtype == float
            assert len(coeffs) == n + 1

    def test_asymmetric_poles_rejected(self):
        with pytest.raises(ConjugateAsymmetryError):
            analog_denominator([-0.5 + 0.5j, -0.5 + 0.25j])


class TestMagnitudeResponse:
    def test_passband_dc(self):
        assert magnitude_response(3, 0.0) == 1.0

    @pytest.mark.parametrize("n", range(1, 9))
    def test_half_power_at_critical_frequency(self, n):
        assert abs(magnitude_response(n, 1.0) - 1.0 / SQRT2) < 1e-12

    def test_point_value(self):
        assert magnitude_response(2, 2.0) == pytest.approx(1.0 / np.sqrt(17.0), abs=1e-12)

    @pytest.mark.parametrize("n", range(1, 9))
    def test_strictly_decreasing(self, n):
        # For n >= 4 the value saturates to exactly 1.0 near w = 0 in double
        # precision (w^(2n) underflows past eps); strictness is asserted
        # wherever the response is distinguishable from 1.
        w = np.linspace(0.0, 10.0, 1000)
        mags = magnitude_response(n, w)
        assert np.all(np.diff(mags) <= 0.0)
        off_plateau = mags < 1.0 - 1e-12
        assert np.all(np.diff(mags[off_plateau]) < 0.0)
        assert off_plateau.sum() > 900

    def test_negative_frequency_rejected(self):
        with pytest.raises(ValueError):
            magnitude_response(2, -0.1)


class TestDiscretize:
    def test_first_order_quarter_cutoff_exact(self):
        filt = discretize(FilterSpec(order=1, cutoff=0.25))
        assert filt.b.tolist() == [0.5, 0.5]
        assert filt.a.tolist() == [1.0, 0.0]

    def test_against_symbolic_bilinear_substitution(self):
        # oracle: exact symbolic substitution s -> (1 - q) / ((1 + q) * tan(pi/10))
        # into 1 / (s^2 + sqrt2 s + 1), q the one-sample delay
        import sympy as sp

        q = sp.symbols("q")
        wa = sp.tan(sp.pi / 10)
        num = (wa * (1 + q)) ** 2
        den = sp.expand((1 - q) ** 2 + sp.sqrt(2) * wa * (1 - q) * (1 + q) + num)
        num = sp.expand(num)
        a0 = den.coeff(q, 0)
        b_exact = [float(sp.N(num.coeff(q, i) / a0, 30)) for i in range(3)]
        a_exact = [float(sp.N(den.coeff(q, i) / a0, 30)) for i in range(3)]

        filt = discretize(FilterSpec(order=2, cutoff=0.1))
        assert np.allclose(filt.b, b_exact, atol=1e-9)
        assert np.allclose(filt.a, a_exact, atol=1e-9)

    def test_against_reference_design(self):
        rng = np.random.default_rng(1234)
        for _ in range(25):
            n = int(rng.integers(1, 7))
            cutoff = float(rng.uniform(0.01, 0.45))
            filt = discretize(FilterSpec(order=n, cutoff=cutoff))
            b_ref, a_ref = signal.butter(n, 2 * cutoff)
            assert np.allclose(filt.b, b_ref, atol=1e-9)
            assert np.allclose(filt.a, a_ref, atol=1e-9)

    def test_unit_dc_gain(self):
        rng = np.random.default_rng(99)
        for _ in range(30):
            n = int(rng.integers(1, 7))
            cutoff = float(rng.uniform(0.005, 0.48))
            filt = discretize(FilterSpec(order=n, cutoff=cutoff))
            assert abs(filt.b.sum() / filt.a.sum() - 1.0) < 1e-10

    def test_half_power_at_design_cutoff(self):
        for n in (1, 2, 3, 5):
            for cutoff in (0.01, 0.1, 0.25, 0.4):
                filt = discretize(FilterSpec(order=n, cutoff=cutoff))
                assert abs(discrete_magnitude(filt, cutoff) - 1.0 / SQRT2) < 1e-6

    def test_deterministic(self):
        f1 = discretize(FilterSpec(order=4, cutoff=0.07))
        f2 = discretize(FilterSpec(order=4, cutoff=0.07))
        assert np.array_equal(f1.b, f2.b)
        assert np.array_equal(f1.a, f2.a)

    @pytest.mark.parametrize("bad", [0.0, -0.1, 0.5, 0.75])
    def test_invalid_cutoff(self, bad):
        with pytest.raises(InvalidCutoffError):
            FilterSpec(order=2, cutoff=bad)

    def test_unrepresentable_design_raises(self):
        # order 12 at a 500-sample cutoff cannot be expressed as stable
        # double-precision rational coefficients
        with pytest.raises(InstabilityError):
            discretize(FilterSpec(order=12, cutoff=1.0 / 500.0))


class TestDiscreteFilterType:
    def test_requires_normalized_denominator(self):
        with pytest.raises(ValueError):
            DiscreteFilter(b=[1.0, 1.0], a=[2.0, 0.0])

    def test_requires_unit_dc_gain(self):
        with pytest.raises(ValueError):
            DiscreteFilter(b=[0.9], a=[1.0])

    def test_rejects_unstable_denominator(self):
        with pytest.raises(InstabilityError):
            DiscreteFilter(b=[-0.1], a=[1.0, -1.1])


class TestDiscreteMagnitude:
    def test_dc_gain_one(self):
        for n in (1, 2, 4):
            filt = discretize(FilterSpec(order=n, cutoff=0.1))
            assert abs(discrete_magnitude(filt, 0.0) - 1.0) < 1e-10

    def test_half_power_example(self):
        filt = discretize(FilterSpec(order=1, cutoff=0.25))
        assert abs(discrete_magnitude(filt, 0.25) - 0.70711) < 1e-5

    def test_stopband_below_cutoff_response(self):
        for n in (1, 2, 3):
            filt = discretize(FilterSpec(order=n, cutoff=0.2))
            assert discrete_magnitude(filt, 0.5) < discrete_magnitude(filt, 0.2)

    def test_monotone_nonincreasing_on_grid(self):
        grid = np.linspace(0.0, 0.5, 512)
        for n in (1, 2, 4, 6):
            filt = discretize(FilterSpec(order=n, cutoff=0.08))
            mags = discrete_magnitude(filt, grid)
            assert np.all(np.diff(mags) <= 1e-9)

    def test_vectorized_matches_scalar(self):
        filt = discretize(FilterSpec(order=3, cutoff=0.12))
        freqs = np.array([0.0, 0.05, 0.12, 0.3, 0.5])
        vec = discrete_magnitude(filt, freqs)
        for f, m in zip(freqs, vec):
            assert discrete_magnitude(filt, float(f)) == pytest.approx(m, abs=1e-15)
