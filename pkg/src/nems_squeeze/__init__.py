"""Simulator for squeezing a nanomechanical resonator flux-coupled to a charge qubit.

Modules
-------
hilbert   operator algebra on the qubit (x) truncated-Fock composite space
device    geometry and bias points to Josephson energies and coupling rates
dynamics  Hamiltonians, closed evolution, spin-echo schedule, squeeze operator
lindblad  open-system evolution, rate calibration, decoherent squeezing runs
measure   characteristic-function readout protocol and moment extraction
cli       configuration-driven experiment runner (``nems-squeeze`` entry point)
"""

from .hilbert import (
    HilbertConfig,
    TruncationError,
    annihilation,
    creation,
    expect,
    matrix_exp,
    pauli,
    quadrature_x,
    tensor,
    thermal_state,
)
from .device import DeviceParams, BiasClass, BiasKind
from .dynamics import HamiltonianKind, HamiltonianSpec, PulseSchedule
from .lindblad import DecoherentRunConfig, LindbladChannel, MasterEqProblem
from .trajectory import Trajectory

__version__ = "0.1.0"
