"""Device geometry and bias points to Josephson energies and coupling rates.

This module is the only place where SI quantities enter; every energy it
returns is already divided by hbar, i.e. an angular frequency in rad/s.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum

__all__ = [
    "HBAR",
    "E_CHARGE",
    "BOLTZMANN_KB",
    "FLUX_QUANTUM",
    "DeviceParams",
    "BiasKind",
    "BiasClass",
    "josephson_energy",
    "classify_bias",
    "quadratic_coupling_rate",
    "quadratic_coupling_magnitude",
    "two_squid_energy",
    "control_fields",
    "thermal_occupation",
]

# CODATA 2018 values, compiled in for reproducibility
HBAR = 1.054571817e-34  # J s
E_CHARGE = 1.602176634e-19  # C
PLANCK_H = 6.62607015e-34  # J s
BOLTZMANN_KB = 1.380649e-23  # J / K
FLUX_QUANTUM = PLANCK_H / (2.0 * E_CHARGE)  # Wb


@dataclass(frozen=True)
class DeviceParams:
    """Physical and geometric parameters of the resonator-in-SQUID device.

    Attributes
    ----------
    B : float
        Perpendicular magnetic field in tesla (>= 0).
    W, L : float
        SQUID loop width and length in meters.
    l : float
        Resonator length in meters; the loop area changes by l*X when the
        beam is displaced by X.
    Ic : float
        Junction critical current in amperes (junctions assumed identical).
    M : float
        Resonator mass in kg.
    omega0 : float
        Resonator angular frequency in rad/s.
    n : int
        Flux-quantum bias index of the individual SQUID loops.
    m : int
        Bias index of the outer loop in the twin-SQUID layout.
    Ct : float
        Total island capacitance in farads.
    ng : float
        Reduced gate charge (dimensionless).
    """

    B: float
    W: float
    L: float
    l: float
    Ic: float
    M: float
    omega0: float
    n: int
    m: int = 0
    Ct: float = 1e-15
    ng: float = 0.5

    def __post_init__(self):
        for name in ("W", "L", "l", "Ic", "M", "omega0", "Ct"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.B < 0:
            raise ValueError("B must be >= 0")

    @property
    def ej0(self) -> float:
        """Single-junction Josephson energy Ic*Phi0/(2 pi), in rad/s."""
        return self.Ic * FLUX_QUANTUM / (2.0 * math.pi * HBAR)

    @property
    def x_zpf(self) -> float:
        """Zero-point fluctuation sqrt(hbar / 2 M omega0), in meters."""
        return math.sqrt(HBAR / (2.0 * self.M * self.omega0))

    @property
    def flux_bias(self) -> float:
        """Equilibrium loop flux B*W*L in units of the flux quantum."""
        return self.B * self.W * self.L / FLUX_QUANTUM


def _cospi(x: float) -> float:
    # cos(pi x) with the argument reduced mod 2 first, so large bias indices
    # do not lose the exact zeros at half-integer x
    return math.cos(math.pi * math.remainder(x, 2.0))


def _sinpi(x: float) -> float:
    return math.sin(math.pi * math.remainder(x, 2.0))


def josephson_energy(params: DeviceParams, X: float, phi: float) -> float:
    """SQUID Josephson energy at beam displacement X and average phase phi.

    E_J = -2 E_J0 cos(pi Phi_e0/Phi0 + pi B l X / Phi0) cos(phi), in rad/s.
    The expansion point assumes |X| small against the loop width.
    """
    if abs(X) > params.W / 10.0:
        warnings.warn(
            f"displacement X={X:.3g} m exceeds W/10; the small-displacement "
            "flux expansion is inaccurate",
            stacklevel=2,
        )
    arg = params.flux_bias + params.B * params.l * X / FLUX_QUANTUM
    return -2.0 * params.ej0 * _cospi(arg) * math.cos(phi)


class BiasKind(Enum):
    LINEAR = "linear"
    QUADRATIC = "quadratic"
    GENERAL = "general"


@dataclass(frozen=True)
class BiasClass:
    """Classification of the flux bias point with leading coupling coefficients.

    ``ej_linear`` and ``ej_quadratic`` are the Taylor coefficients of the
    Josephson energy at phi = 0 in dimensionless-position units:
    E_J(x) = E_J(0) + ej_linear * x + ej_quadratic * x**2 + O(x**3), rad/s.
    ``coupling_rate`` is the quadratic Hamiltonian coupling (nonzero only at
    integer bias), defined so the interaction enters as
    -(coupling_rate/2) x**2 sigma_y; it equals -ej_quadratic there.
    """

    kind: BiasKind
    flux_bias: float
    ej_linear: float
    ej_quadratic: float
    coupling_rate: float | None = None


_BIAS_TOL = 1e-9


def classify_bias(params: DeviceParams) -> BiasClass:
    """Classify the equilibrium flux bias as linear, quadratic or general."""
    r = params.flux_bias
    c = math.pi * params.B * params.l * params.x_zpf / FLUX_QUANTUM  # rad per unit x
    ej_lin = 2.0 * params.ej0 * _sinpi(r) * c
    ej_quad = params.ej0 * _cospi(r) * c**2

    dist_int = abs(r - round(r))
    dist_half = abs(r - math.floor(r) - 0.5)
    if dist_half <= _BIAS_TOL:
        n = math.floor(r)
        coeff = ((-1) ** n) * 2.0 * params.ej0 * math.pi * (n + 0.5) * params.l * params.x_zpf / (
            params.W * params.L
        )
        return BiasClass(BiasKind.LINEAR, r, ej_linear=coeff, ej_quadratic=0.0)
    if dist_int <= _BIAS_TOL:
        n = round(r)
        lam = -((-1) ** n) * params.ej0 * (
            math.pi * n * params.l * params.x_zpf / (params.W * params.L)
        ) ** 2
        return BiasClass(
            BiasKind.QUADRATIC, r, ej_linear=0.0, ej_quadratic=-lam, coupling_rate=lam
        )
    return BiasClass(BiasKind.GENERAL, r, ej_linear=ej_lin, ej_quadratic=ej_quad)


def quadratic_coupling_rate(params: DeviceParams) -> float:
    """Quadratic coupling rate at integer flux bias, in rad/s.

    lambda_n = -(-1)^n E_J0 (pi n l x_zpf / (W L))^2.  Requires the actual
    flux B*W*L/Phi0 to agree with the integer index ``n`` to within 1e-6.
    """
    r = params.flux_bias
    if abs(r - params.n) > 1e-6:
        raise ValueError(
            f"flux bias {r:.9g} Phi0 is not the integer n={params.n} within 1e-6; "
            "use classify_bias for off-bias operation"
        )
    return -((-1) ** params.n) * params.ej0 * (
        math.pi * params.n * params.l * params.x_zpf / (params.W * params.L)
    ) ** 2


def quadratic_coupling_magnitude(params: DeviceParams) -> float:
    """|lambda| evaluated directly from the field, E_J0 (pi B l x_zpf / Phi0)^2.

    Equivalent to ``abs(quadratic_coupling_rate)`` when B*W*L = n*Phi0, but
    needs neither the loop area nor an integer bias.
    """
    return params.ej0 * (math.pi * params.B * params.l * params.x_zpf / FLUX_QUANTUM) ** 2


def two_squid_energy(
    params: DeviceParams, X: float, phi: float, phi_l: float, Phi_x: float
) -> float:
    """Josephson energy of the twin-SQUID layout, in rad/s.

    The two loops sit at opposite fluxes +-n*Phi0 and the outer loop carries
    flux ``Phi_x`` (in weber).  At Phi_x = (2m + 1/2) Phi0 the self-energy
    term vanishes and only the displacement-squared coupling survives.
    """
    sign = (-1) ** params.n
    self_term = -sign * 4.0 * params.ej0 * _cospi(Phi_x / FLUX_QUANTUM) * math.cos(phi)
    coupling = (
        sign
        * params.ej0
        * (math.pi * params.n * params.l / (params.W * params.L)) ** 2
        * X**2
        * math.cos(phi_l)
    )
    return self_term + coupling


def control_fields(params: DeviceParams, d_phi_x: float, d_ng: float) -> tuple[float, float]:
    """Qubit control amplitudes from a small flux drive and gate offset.

    Parameters
    ----------
    d_phi_x : float
        Amplitude of the outer-loop flux modulation, in weber.
    d_ng : float
        Gate-charge offset from the degeneracy point, ng = 1/2 + d_ng.

    Returns
    -------
    (ex, d_ez) : tuple of float
        Transverse drive E_x = 4 E_J0 pi dPhi_x / Phi0 and longitudinal
        detuning dE_z = (2 ng - 1)(2e)^2 / (2 Ct), both in rad/s.
    """
    ratio = math.pi * d_phi_x / FLUX_QUANTUM
    if abs(ratio) > 0.1:
        warnings.warn(
            f"pi*dPhi_x/Phi0 = {ratio:.3g} is not small; the linearized drive "
            "amplitude is inaccurate",
            stacklevel=2,
        )
    ex = 4.0 * params.ej0 * ratio
    d_ez = 2.0 * d_ng * (2.0 * E_CHARGE) ** 2 / (2.0 * params.Ct * HBAR)
    return ex, d_ez


def thermal_occupation(omega: float, temperature: float) -> float:
    """Bose-Einstein occupation 1/(exp(hbar omega / kB T) - 1).

    ``omega`` in rad/s, ``temperature`` in kelvin; zero temperature gives 0.
    """
    if omega <= 0:
        raise ValueError("omega must be positive")
    if temperature <= 0:
        return 0.0
    return 1.0 / math.expm1(HBAR * omega / (BOLTZMANN_KB * temperature))
