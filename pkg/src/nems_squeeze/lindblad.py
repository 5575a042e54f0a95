"""Open-system evolution of the qubit-resonator density matrix.

The generator is

    drho/dt = -i [H, rho] + sum_k L(A_k, gamma_k, N_k) rho,

with the thermal dissipator

    L(A, g, N) rho = (g/2)(N+1)(2 A rho A+ - A+A rho - rho A+A)
                   + (g/2) N  (2 A+ rho A - A A+ rho - rho A A+).

Integration is fixed-step classical Runge-Kutta; the step is validated by a
coarse/fine comparison of every reported observable at the trajectory end,
with automatic halving (at most three times) when the comparison fails.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .device import thermal_occupation
from .dynamics import HamiltonianKind, HamiltonianSpec, build_hamiltonian
from .hilbert import (
    HilbertConfig,
    annihilation,
    assert_truncation_ok,
    check_density_matrix,
    embed_qubit,
    embed_resonator,
    pauli,
    pure_density,
    qubit_state,
    reduce_to_resonator,
    thermal_state,
)
from .trajectory import Trajectory, TrajectoryBuilder

__all__ = [
    "LindbladChannel",
    "MasterEqProblem",
    "StepRefinementError",
    "IntegrityError",
    "liouvillian_apply",
    "integrate",
    "rates_from_coherence_times",
    "DecoherentRunConfig",
    "SqueezeRunResult",
    "derived_constants",
    "decoherent_squeezing_run",
    "echoed_decoherent_run",
    "dephasing_sweep",
]

# integrate() quality gates
_END_CONSISTENCY_TOL = 1e-6
_TRACE_DRIFT_TOL = 1e-8
_MIN_EIG_TOL = -1e-7
_MAX_HALVINGS = 3


class StepRefinementError(RuntimeError):
    """Step halving was exhausted without passing the end-state comparison."""


class IntegrityError(RuntimeError):
    """Trace, Hermiticity or positivity of the integrated state went out of bounds."""


@dataclass(frozen=True)
class LindbladChannel:
    """Collapse operator with decay rate (rad/s) and thermal bath occupation."""

    collapse: np.ndarray
    rate: float
    nbar: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.rate) and self.rate >= 0):
            raise ValueError(f"rate must be finite and >= 0, got {self.rate}")
        if not (math.isfinite(self.nbar) and self.nbar >= 0):
            raise ValueError(f"nbar must be finite and >= 0, got {self.nbar}")


@dataclass
class MasterEqProblem:
    """One master-equation integration on the composite space."""

    hamiltonian: np.ndarray
    channels: list[LindbladChannel]
    initial: np.ndarray
    t_final: float
    sample_every: float
    hilbert: HilbertConfig
    observables: dict[str, np.ndarray] = field(default_factory=dict)
    step: float | None = None
    monitor_truncation: bool = True

    def __post_init__(self):
        dim = self.hilbert.dim
        if self.hamiltonian.shape != (dim, dim):
            raise ValueError("Hamiltonian dimension does not match the Hilbert space")
        if self.initial.shape != (dim, dim):
            raise ValueError("initial state dimension does not match the Hilbert space")
        for ch in self.channels:
            if ch.collapse.shape != (dim, dim):
                raise ValueError("channel dimension does not match the Hilbert space")
        for name, op in self.observables.items():
            if op.shape != (dim, dim):
                raise ValueError(f"observable {name!r} dimension mismatch")
        if not self.t_final > 0:
            raise ValueError("t_final must be positive")
        if not 0 < self.sample_every <= self.t_final:
            raise ValueError("sample_every must lie in (0, t_final]")


def _compile_rhs(hamiltonian: np.ndarray, channels: list[LindbladChannel]):
    # drift term K rho + rho K+ with K = -iH - sum (g/2) A+A, plus jump terms
    k = -1j * hamiltonian.astype(complex)
    jumps: list[tuple[float, np.ndarray, np.ndarray]] = []
    for ch in channels:
        a = np.asarray(ch.collapse, dtype=complex)
        ad = a.conj().T
        down = ch.rate * (ch.nbar + 1.0)
        up = ch.rate * ch.nbar
        if down > 0:
            jumps.append((down, a, ad))
            k = k - 0.5 * down * (ad @ a)
        if up > 0:
            jumps.append((up, ad, a))
            k = k - 0.5 * up * (a @ ad)
    kd = k.conj().T

    def rhs(rho: np.ndarray) -> np.ndarray:
        out = k @ rho + rho @ kd
        for g, a, ad in jumps:
            out += g * (a @ rho @ ad)
        return out

    return rhs


def liouvillian_apply(rho: np.ndarray, problem: MasterEqProblem) -> np.ndarray:
    """One application of the generator, -i[H, rho] plus the dissipators."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != problem.hamiltonian.shape:
        raise ValueError(f"dimension mismatch: rho {rho.shape}")
    return _compile_rhs(problem.hamiltonian, problem.channels)(rho)


def _rk4_step(rhs, rho: np.ndarray, h: float) -> np.ndarray:
    k1 = rhs(rho)
    k2 = rhs(rho + (0.5 * h) * k1)
    k3 = rhs(rho + (0.5 * h) * k2)
    k4 = rhs(rho + h * k3)
    return rho + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _default_step(problem: MasterEqProblem) -> float:
    cands = [problem.sample_every]
    rates = [ch.rate * (ch.nbar + 1.0) for ch in problem.channels if ch.rate > 0]
    if rates:
        cands.append(1.0 / (50.0 * max(rates)))
    hnorm = float(np.linalg.norm(problem.hamiltonian, np.inf))
    if hnorm > 0:
        cands.append(0.5 / hnorm)
    return min(cands)


def integrate(problem: MasterEqProblem, keep_states: bool = False) -> Trajectory:
    """Integrate the master equation, sampling every ``sample_every`` seconds.

    Raises :class:`StepRefinementError` if the coarse/fine end-state
    comparison cannot be met, :class:`IntegrityError` if the trace drifts
    beyond 1e-8 or an eigenvalue of the state falls below -1e-7, and
    :class:`~nems_squeeze.hilbert.TruncationError` if the Fock truncation
    fills up (when ``monitor_truncation`` is set).
    """
    rho0 = check_density_matrix(np.asarray(problem.initial, dtype=complex), tol=1e-8)
    n_samples = max(1, round(problem.t_final / problem.sample_every))
    dt_sample = problem.t_final / n_samples
    h0 = problem.step if problem.step is not None else _default_step(problem)
    n_sub = max(1, math.ceil(dt_sample / h0))
    rhs = _compile_rhs(problem.hamiltonian, problem.channels)

    for _ in range(_MAX_HALVINGS + 1):
        builder = TrajectoryBuilder(
            problem.hilbert, keep_states=keep_states, extra_ops=problem.observables
        )
        dx0 = _initial_dx(builder, rho0)
        rho = rho0.copy()
        builder.add(0.0, rho)
        if problem.monitor_truncation:
            assert_truncation_ok(rho, problem.hilbert.fock_dim, context="t=0")
        h = dt_sample / n_sub
        for s in range(1, n_samples + 1):
            for _ in range(n_sub):
                rho = _rk4_step(rhs, rho, h)
            builder.add(s * dt_sample, rho)
            if problem.monitor_truncation:
                assert_truncation_ok(
                    rho, problem.hilbert.fock_dim, context=f"t={s * dt_sample:.3e} s"
                )
        # step-doubling consistency gate: the reported run (step h) must agree
        # at the trajectory end with a half-step re-run in every observable
        rho_half = rho0.copy()
        h_half = dt_sample / (2 * n_sub)
        for _ in range(2 * n_samples * n_sub):
            rho_half = _rk4_step(rhs, rho_half, h_half)
        run_obs = builder.observables_of(rho, dx0)
        half_obs = builder.observables_of(rho_half, dx0)
        worst = max(abs(run_obs[k] - half_obs[k]) for k in run_obs)
        if worst < _END_CONSISTENCY_TOL:
            break
        n_sub *= 2
    else:
        raise StepRefinementError(
            f"end-state comparison still differs by {worst:.3e} after "
            f"{_MAX_HALVINGS} step halvings"
        )

    traj = builder.build()
    drift = float(np.max(np.abs(traj.trace - 1.0)))
    if drift > _TRACE_DRIFT_TOL:
        raise IntegrityError(f"trace drifted by {drift:.3e} > {_TRACE_DRIFT_TOL:.0e}")
    min_eig = float(np.min(traj.min_eig))
    if min_eig < _MIN_EIG_TOL:
        raise IntegrityError(f"state eigenvalue {min_eig:.3e} below {_MIN_EIG_TOL:.0e}")
    return traj


def _initial_dx(builder: TrajectoryBuilder, rho0: np.ndarray) -> float:
    obs = {
        name: float(np.real(np.einsum("ij,ji->", rho0, op)))
        for name, op in builder._ops.items()
        if name in ("exp_x", "exp_x2")
    }
    return math.sqrt(max(obs["exp_x2"] - obs["exp_x"] ** 2, 0.0))


def rates_from_coherence_times(t1: float, t2: float, nq: float = 0.0) -> tuple[float, float]:
    """Channel rates reproducing longitudinal 1/T1 and transverse 1/T2 decay.

    With channels (sigma_minus, gamma_q, Nq) and (sigma_z, gamma_phi, Nq) the
    longitudinal rate is gamma_q (2Nq+1) and the transverse rate is
    gamma_q (2Nq+1)/2 + 2 gamma_phi (2Nq+1).  Requires T2 <= 2 T1.
    """
    if not t1 > 0 or not t2 > 0:
        raise ValueError("T1 and T2 must be positive")
    if nq < 0:
        raise ValueError("nq must be >= 0")
    if t2 > 2.0 * t1:
        raise ValueError(f"unphysical input: T2={t2} exceeds 2*T1={2 * t1}")
    therm = 2.0 * nq + 1.0
    gamma_q = 0.0 if math.isinf(t1) else 1.0 / (t1 * therm)
    gamma_phi = max(0.0, (1.0 / t2 - 0.5 / t1) / (2.0 * therm))
    return gamma_q, gamma_phi


@dataclass(frozen=True)
class DecoherentRunConfig:
    """Parameters of a decoherent squeezing run.

    ``lam`` is the effective continuous squeezing rate (rad/s): in the ideal
    limit the normalized position uncertainty follows exp(-lam*t).  The bath
    occupations are Bose-Einstein at ``temperature`` unless ``nq_override``
    is given; ``gamma_phi_override`` replaces the dephasing rate calibrated
    from T2 (used by the dephasing sweep).
    """

    lam: float
    omega0: float = 2.0 * math.pi * 250e6
    quality_factor: float = 1e4
    temperature: float = 0.02
    t1: float = 1e-6
    t2: float = 1e-7
    nq_override: float | None = None
    gamma_phi_override: float | None = None
    fock_dim: int = 30
    t_final: float = 1e-7
    sample_every: float = 2e-9
    step: float | None = None
    qubit_sign: int = +1

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        if self.qubit_sign not in (+1, -1):
            raise ValueError("qubit_sign must be +1 or -1")


@dataclass
class SqueezeRunResult:
    """Trajectory of a decoherent squeezing run plus the state at best squeezing."""

    trajectory: Trajectory
    rho_res_min: np.ndarray
    index_min: int
    t_min: float
    min_dx_norm: float
    derived: dict[str, float]


def _assemble_problem(cfg: DecoherentRunConfig) -> tuple[MasterEqProblem, dict[str, float]]:
    hcfg = HilbertConfig(cfg.fock_dim)
    d = cfg.fock_dim
    ez = 2.0 * cfg.omega0
    n_n = thermal_occupation(cfg.omega0, cfg.temperature)
    n_q = cfg.nq_override if cfg.nq_override is not None else thermal_occupation(
        ez, cfg.temperature
    )
    gamma_n = cfg.omega0 / cfg.quality_factor
    gamma_q, gamma_phi = rates_from_coherence_times(cfg.t1, cfg.t2, n_q)
    if cfg.gamma_phi_override is not None:
        gamma_phi = cfg.gamma_phi_override

    channels = [
        LindbladChannel(embed_resonator(annihilation(d), hcfg), gamma_n, n_n),
        LindbladChannel(embed_qubit(pauli("minus"), hcfg), gamma_q, n_q),
        LindbladChannel(embed_qubit(pauli("z"), hcfg), gamma_phi, n_q),
    ]
    h_sq = build_hamiltonian(
        HamiltonianSpec(HamiltonianKind.EFFECTIVE_SQUEEZE, {"lam": cfg.lam}), hcfg
    )
    rho0 = np.kron(pure_density(qubit_state("x", cfg.qubit_sign)), thermal_state(d, n_n))

    rates = [g for g in (gamma_n, gamma_q, gamma_phi) if g > 0]
    step = cfg.step
    if step is None:
        step = 1.0 / (50.0 * cfg.lam)
        if rates:
            step = min(step, 1.0 / (50.0 * max(rates)))
    problem = MasterEqProblem(
        hamiltonian=h_sq,
        channels=channels,
        initial=rho0,
        t_final=cfg.t_final,
        sample_every=cfg.sample_every,
        hilbert=hcfg,
        step=step,
    )
    derived = {
        "ez": ez,
        "n_n": n_n,
        "n_q": n_q,
        "gamma_n": gamma_n,
        "gamma_q": gamma_q,
        "gamma_phi": gamma_phi,
        "step": step,
    }
    return problem, derived


def derived_constants(cfg: DecoherentRunConfig) -> dict[str, float]:
    """Rates and bath occupations implied by a run configuration (no evolution)."""
    _, derived = _assemble_problem(cfg)
    return derived


def decoherent_squeezing_run(
    cfg: DecoherentRunConfig, keep_states: bool = False
) -> SqueezeRunResult:
    """Squeeze under the effective generator while all three baths act.

    Evolves (sigma_x = qubit_sign) (x) thermal under
    H = i lam (a^2 - a^dag^2) sigma_x / 2 with resonator damping omega0/Q,
    qubit relaxation and qubit dephasing, and records the reduced resonator
    state at the sample of smallest position uncertainty.  With
    ``keep_states`` the full sampled state list stays on the trajectory.
    """
    problem, derived = _assemble_problem(cfg)
    traj = integrate(problem, keep_states=True)
    idx = traj.argmin_dx()
    rho_min = reduce_to_resonator(traj.states[idx], problem.hilbert)
    if not keep_states:
        traj.states = None  # drop the bulky state list once the minimum is extracted
    return SqueezeRunResult(
        trajectory=traj,
        rho_res_min=rho_min,
        index_min=idx,
        t_min=float(traj.times[idx]),
        min_dx_norm=float(traj.dx_norm[idx]),
        derived=derived,
    )


def echoed_decoherent_run(cfg: DecoherentRunConfig, dt: float, cycles: int) -> Trajectory:
    """Echo-pulsed counterpart of :func:`decoherent_squeezing_run`.

    Each cycle is two master-equation intervals of length ``dt`` under the
    on-resonance interaction, separated by instantaneous sigma_x pulses, with
    the same dissipators acting throughout.  The interaction runs at twice
    ``cfg.lam``: one two-interval cycle accumulates half the squeeze of the
    continuous effective generator over the same wall-clock time, so doubling
    the rate makes the two models directly comparable on a shared time axis.
    Samples are taken at cycle boundaries, t = 2 k dt.
    """
    problem, _ = _assemble_problem(cfg)
    hcfg = problem.hilbert
    h_int = build_hamiltonian(
        HamiltonianSpec(HamiltonianKind.ROTATING_RWA, {"lam": 2.0 * cfg.lam}), hcfg
    )
    rhs = _compile_rhs(h_int, problem.channels)
    px = embed_qubit(pauli("x"), hcfg)

    n_sub = max(1, math.ceil(dt / problem.step))
    h = dt / n_sub
    rho = problem.initial.copy()
    builder = TrajectoryBuilder(hcfg)
    builder.add(0.0, rho)
    for k in range(1, cycles + 1):
        for _ in range(2):
            rho = px @ rho @ px
            for _ in range(n_sub):
                rho = _rk4_step(rhs, rho, h)
        assert_truncation_ok(rho, hcfg.fock_dim, context=f"cycle {k}")
        builder.add(2.0 * k * dt, rho)
    return builder.build()


def _sweep_point(args: tuple[DecoherentRunConfig, float]) -> float:
    cfg, rate = args
    result = decoherent_squeezing_run(replace(cfg, gamma_phi_override=rate))
    return result.min_dx_norm


def dephasing_sweep(
    cfg: DecoherentRunConfig, gamma_phi_list: list[float], workers: int = 1
) -> list[tuple[float, float]]:
    """Smallest normalized uncertainty reached, per qubit dephasing rate.

    Runs one decoherent squeezing run per rate in ``gamma_phi_list`` (rad/s),
    all other parameters fixed.  Results are returned in input order; with
    ``workers > 1`` the independent runs are distributed over processes.
    """
    if not gamma_phi_list:
        raise ValueError("gamma_phi_list must not be empty")
    jobs = [(cfg, float(r)) for r in gamma_phi_list]
    if workers <= 1:
        minima = [_sweep_point(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            minima = list(pool.map(_sweep_point, jobs))
    return [(rate, dx) for (_, rate), dx in zip(jobs, minima)]
