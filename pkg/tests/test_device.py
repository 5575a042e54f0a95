import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nems_squeeze.device import (
    FLUX_QUANTUM,
    HBAR,
    BiasKind,
    DeviceParams,
    classify_bias,
    control_fields,
    josephson_energy,
    quadratic_coupling_magnitude,
    quadratic_coupling_rate,
    thermal_occupation,
    two_squid_energy,
)


def _params(flux_in_phi0: float, n: int | None = None, **overrides) -> DeviceParams:
    """Device with W=5 um, L=30 um and the field set for the requested flux."""
    w, length = 5e-6, 30e-6
    fields = dict(
        B=flux_in_phi0 * FLUX_QUANTUM / (w * length),
        W=w,
        L=length,
        l=30e-6,
        Ic=60e-9,
        M=1.3427225401676133e-19,  # x_zpf = 5e-13 m at 250 MHz
        omega0=2 * math.pi * 250e6,
        n=n if n is not None else round(flux_in_phi0),
    )
    fields.update(overrides)
    return DeviceParams(**fields)


class TestJosephsonEnergy:
    def test_half_integer_bias_vanishes(self):
        p = _params(0.5, n=0)
        for phi in (0.0, 0.7, 2.0):
            assert abs(josephson_energy(p, 0.0, phi)) <= 1e-12 * p.ej0

    @pytest.mark.parametrize("n", [0, 1, 2, 5])
    def test_integer_bias_value(self, n):
        p = _params(float(n), n=n)
        expected = -((-1) ** n) * 2 * p.ej0
        assert josephson_energy(p, 0.0, 0.0) == pytest.approx(expected, rel=1e-12)

    def test_quadratic_remainder_scales_as_x4(self):
        # against the explicit second-order expansion the remainder is O(X^4),
        # so halving X cuts it by about 16
        p = _params(3.0)
        c = math.pi * p.B * p.l / FLUX_QUANTUM

        def remainder(x):
            quadratic = -((-1) ** 3) * 2 * p.ej0 * (1 - (c * x) ** 2 / 2)
            return abs(josephson_energy(p, x, 0.0) - quadratic)

        x0 = 1e-9
        ratio = remainder(x0) / remainder(x0 / 2)
        assert ratio == pytest.approx(16.0, rel=0.05)

    def test_large_displacement_warns(self):
        p = _params(1.0)
        with pytest.warns(UserWarning):
            josephson_energy(p, p.W / 5, 0.0)

    @given(st.floats(0.0, 4.0), st.floats(-6.0, 6.0))
    @settings(max_examples=40, deadline=None)
    def test_flux_and_phase_periodicity(self, flux, phi):
        # at fixed phi the energy is antiperiodic under a one-quantum flux
        # shift; the physical flux periodicity holds jointly with a pi phase
        # shift (absorbed by the dynamical junction phase), and plainly for
        # two quanta
        p = _params(flux, n=0)
        tol = 1e-9 * p.ej0
        e0 = josephson_energy(p, 0.0, phi)
        assert abs(josephson_energy(_params(flux + 2.0, n=0), 0.0, phi) - e0) <= tol
        assert abs(josephson_energy(_params(flux + 1.0, n=0), 0.0, phi + math.pi) - e0) <= tol
        assert abs(josephson_energy(p, 0.0, phi + 2 * math.pi) - e0) <= tol


class TestClassifyBias:
    def test_half_integer_is_linear(self):
        bias = classify_bias(_params(5.5, n=5))
        assert bias.kind is BiasKind.LINEAR
        assert bias.coupling_rate is None

    def test_integer_is_quadratic(self):
        bias = classify_bias(_params(3.0))
        assert bias.kind is BiasKind.QUADRATIC
        assert bias.coupling_rate == pytest.approx(-bias.ej_quadratic, rel=1e-15)

    def test_general_coefficients_match_finite_differences(self):
        # the slope per unit x is ~1e-6 of the energy scale, so a wide stencil
        # keeps the difference clear of float cancellation while the curvature
        # of the cosine stays negligible over the step
        p = _params(3.3, n=3)
        bias = classify_bias(p)
        assert bias.kind is BiasKind.GENERAL

        def ej_of_x(x_dimless):
            return josephson_energy(p, x_dimless * p.x_zpf, 0.0)

        h = 50.0
        d1 = (ej_of_x(h) - ej_of_x(-h)) / (2 * h)
        d2 = (ej_of_x(h) - 2 * ej_of_x(0.0) + ej_of_x(-h)) / h**2
        assert bias.ej_linear == pytest.approx(d1, rel=1e-6)
        assert bias.ej_quadratic == pytest.approx(d2 / 2, rel=1e-6)

    def test_linear_coefficient_matches_finite_difference(self):
        p = _params(5.5, n=5)
        bias = classify_bias(p)

        def ej_of_x(x_dimless):
            return josephson_energy(p, x_dimless * p.x_zpf, 0.0)

        h = 50.0
        d1 = (ej_of_x(h) - ej_of_x(-h)) / (2 * h)
        assert bias.ej_linear == pytest.approx(d1, rel=1e-6)


class TestQuadraticCoupling:
    def test_zero_flux_gives_zero(self):
        p = _params(0.0, n=0)
        assert quadratic_coupling_rate(p) == 0.0

    def test_reference_magnitude(self):
        # SI oracle: E_J0 (pi B l dX0 / Phi0)^2 / hbar with B=0.2 T, l=30 um,
        # dX0=5e-13 m, Ic=60 nA -> 3.89e6 rad/s (0.62e6 cycles/s)
        b, length, dx0, ic = 0.2, 30e-6, 5e-13, 60e-9
        ej0_joule = ic * FLUX_QUANTUM / (2 * math.pi)
        oracle = ej0_joule * (math.pi * b * length * dx0 / FLUX_QUANTUM) ** 2 / HBAR
        assert oracle == pytest.approx(3.89e6, rel=2e-3)

        p = _params(14508.0)
        lam = quadratic_coupling_rate(p)
        assert abs(lam) == pytest.approx(oracle, rel=1e-3)
        assert abs(lam) == pytest.approx(quadratic_coupling_magnitude(p), rel=1e-9)

    def test_doubling_length_quadruples(self):
        p = _params(4.0)
        p2 = replace(p, l=2 * p.l)
        assert quadratic_coupling_rate(p2) == pytest.approx(
            4 * quadratic_coupling_rate(p), rel=1e-12
        )

    @pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
    def test_sign_alternates(self, n):
        lam = quadratic_coupling_rate(_params(float(n)))
        assert math.copysign(1.0, lam) == -((-1) ** n)

    def test_off_integer_bias_rejected(self):
        p = _params(3.3, n=3)
        with pytest.raises(ValueError, match="classify_bias"):
            quadratic_coupling_rate(p)


class TestTwoSquidEnergy:
    def test_self_term_vanishes_at_bias(self):
        p = _params(4.0)
        for m in (0, 1, 3):
            phi_x = (2 * m + 0.5) * FLUX_QUANTUM
            e = two_squid_energy(p, 0.0, 0.0, 0.0, phi_x)
            assert abs(e) <= 1e-12 * 4 * p.ej0

    def test_zero_flux_self_energy(self):
        p = _params(4.0)
        expected = -((-1) ** p.n) * 4 * p.ej0
        assert two_squid_energy(p, 0.0, 0.0, 0.0, 0.0) == pytest.approx(expected, rel=1e-12)

    def test_coupling_coefficient_matches_lambda(self):
        p = _params(4.0)
        phi_x = 0.5 * FLUX_QUANTUM
        x = 2e-10
        coeff = two_squid_energy(p, x, 0.0, 0.0, phi_x) / x**2
        lam = quadratic_coupling_rate(p)
        assert coeff == pytest.approx(-lam / p.x_zpf**2, rel=1e-9)


class TestControlFields:
    def test_zero_drive(self):
        ex, _ = control_fields(_params(1.0), 0.0, 0.0)
        assert ex == 0.0

    def test_degeneracy_point(self):
        _, dez = control_fields(_params(1.0), 1e-18, 0.0)
        assert dez == 0.0

    def test_linear_in_drive(self):
        p = _params(1.0)
        ex1, _ = control_fields(p, 1e-18, 0.0)
        ex2, _ = control_fields(p, 2e-18, 0.0)
        assert ex2 == pytest.approx(2 * ex1, rel=1e-12)

    def test_formula_values(self):
        p = _params(1.0)
        dphi = 0.01 * FLUX_QUANTUM
        ex, dez = control_fields(p, dphi, 0.05)
        assert ex == pytest.approx(4 * p.ej0 * math.pi * 0.01, rel=1e-12)
        from nems_squeeze.device import E_CHARGE

        assert dez == pytest.approx(
            0.1 * (2 * E_CHARGE) ** 2 / (2 * p.Ct * HBAR), rel=1e-12
        )

    def test_large_drive_warns(self):
        with pytest.warns(UserWarning):
            control_fields(_params(1.0), 0.2 * FLUX_QUANTUM, 0.0)


class TestThermalOccupation:
    def test_reference_values(self):
        omega = 2 * math.pi * 250e6
        assert thermal_occupation(omega, 0.02) == pytest.approx(1.2166, abs=2e-4)
        assert thermal_occupation(2 * omega, 0.02) == pytest.approx(0.4311, abs=2e-4)

    def test_zero_temperature(self):
        assert thermal_occupation(1e9, 0.0) == 0.0

    def test_validates_frequency(self):
        with pytest.raises(ValueError):
            thermal_occupation(0.0, 0.01)


class TestDeviceParams:
    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            _params(1.0, Ic=0.0)
        with pytest.raises(ValueError):
            _params(1.0, B=-0.1)

    def test_derived_quantities(self):
        p = _params(1.0)
        assert p.ej0 == pytest.approx(p.Ic * FLUX_QUANTUM / (2 * math.pi * HBAR), rel=1e-12)
        assert p.x_zpf == pytest.approx(5e-13, rel=1e-6)
