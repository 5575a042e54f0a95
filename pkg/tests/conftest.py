import pytest

from nems_squeeze.lindblad import DecoherentRunConfig, decoherent_squeezing_run


@pytest.fixture(scope="session")
def reference_run():
    """Decoherent squeezing run with the reference parameter set.

    250 MHz resonator, Q=1e4, 20 mK, lam=5e6 rad/s, T1=1 us, T2=100 ns,
    thermal (x) sigma_x=+1, fock_dim=30.  Shared across test modules since
    several structural and cross-module checks probe the same trajectory.
    """
    return decoherent_squeezing_run(DecoherentRunConfig(lam=5e6))
