"""Configuration-driven experiment runner (console entry point ``nems-squeeze``).

Subcommands
-----------
device-report    bias classification, coupling coefficients, control fields
squeeze-ideal    closed-system echo protocol, per-cycle trajectory CSV
squeeze-lindblad decoherent squeezing run, trajectory CSV plus stored minimum state
sweep-dephasing  best squeezing versus qubit dephasing rate, CSV
measure          characteristic-function readout and moment extraction, CSV
rwa-check        exact-versus-approximate echo fidelity ladder

Every run writes ``summary.txt`` (config echo and derived constants first, so
a crash still leaves an auditable header).  Exit codes: 0 success, 2 config
error, 3 numeric or truncation failure, 4 internal consistency-check failure.
"""

from __future__ import annotations

import argparse
import hashlib
import math
import os
import sys

import numpy as np

from .config import ConfigError, RunConfig, load_config
from .device import (
    BiasKind,
    classify_bias,
    control_fields,
    quadratic_coupling_magnitude,
    quadratic_coupling_rate,
    thermal_occupation,
)
from .dynamics import PulseSchedule, rwa_cycle_fidelity, run_schedule, squeeze_operator
from .hilbert import (
    HilbertConfig,
    TruncationError,
    pure_density,
    qubit_state,
    thermal_state,
    vacuum_state,
)
from .lindblad import (
    DecoherentRunConfig,
    IntegrityError,
    StepRefinementError,
    decoherent_squeezing_run,
    dephasing_sweep,
    derived_constants,
)
from .measure import (
    ProtocolEquivalenceError,
    default_kappa_grid,
    generating_function,
    moments_from_gf,
    verify_protocol_equivalence,
    write_gf_csv,
)
from .trajectory import format_csv_value as fmt

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_CONSISTENCY = 4

_RWA_LADDER = (0.0, 0.002, 0.005, 0.01, 0.02, 0.05)


def _fmt_value(v) -> str:
    if isinstance(v, bool):
        return "pass" if v else "fail"
    if isinstance(v, float):
        return fmt(v)
    return str(v)


class SummaryWriter:
    """Append-only ``summary.txt``; the header lands on disk before any compute."""

    def __init__(self, outdir: str, command: str, cfg: RunConfig):
        self.path = os.path.join(outdir, "summary.txt")
        digest = hashlib.sha256()
        digest.update(command.encode())
        for k, v in sorted(cfg.echo.items()):
            digest.update(f"{k}={v};".encode())
        self.run_id = digest.hexdigest()[:12]
        with open(self.path, "w", newline="\n") as fh:
            fh.write(f"run_id = {self.run_id}\n")
            fh.write(f"command = {command}\n")
            fh.write("[config]\n")
            for k, v in sorted(cfg.echo.items()):
                fh.write(f"{k} = {v}\n")

    def section(self, name: str, values: dict) -> None:
        with open(self.path, "a", newline="\n") as fh:
            fh.write(f"[{name}]\n")
            for k, v in values.items():
                fh.write(f"{k} = {_fmt_value(v)}\n")

    def checks(self, checks: dict[str, bool]) -> int:
        self.section("checks", checks)
        return EXIT_OK if all(checks.values()) else EXIT_CONSISTENCY


def _resolve_lambda(cfg: RunConfig) -> tuple[float, str]:
    if cfg.squeeze is not None and cfg.squeeze.lambda_rads is not None:
        if not cfg.squeeze.lambda_rads > 0:
            raise ConfigError("[squeeze] lambda_rads must be positive")
        return cfg.squeeze.lambda_rads, "config"
    if cfg.device is not None:
        try:
            return abs(quadratic_coupling_rate(cfg.device)), "derived"
        except ValueError as exc:
            raise ConfigError(f"cannot derive the coupling from [device]: {exc}") from exc
    raise ConfigError("squeezing runs need [squeeze] lambda_rads or a full [device] section")


def _resolve_omega0(cfg: RunConfig) -> float:
    if cfg.decoherence is not None and cfg.decoherence.f0_Hz is not None:
        return 2.0 * math.pi * cfg.decoherence.f0_Hz
    if cfg.device is not None:
        return cfg.device.omega0
    raise ConfigError("need [device] f0_Hz or [decoherence] f0_Hz for the resonator frequency")


def _decoherent_run_config(cfg: RunConfig, lam: float) -> DecoherentRunConfig:
    dec = cfg.decoherence
    sign = cfg.squeeze.sigma_x if cfg.squeeze is not None else +1
    return DecoherentRunConfig(
        lam=lam,
        omega0=_resolve_omega0(cfg),
        quality_factor=dec.Q,
        temperature=dec.T_K,
        t1=dec.T1_s,
        t2=dec.T2_s,
        nq_override=dec.Nq_override,
        fock_dim=cfg.sim.fock_dim,
        t_final=cfg.sim.t_final_s,
        sample_every=cfg.sim.sample_every_s,
        step=cfg.sim.step_s,
        qubit_sign=sign,
    )


def cmd_device_report(cfg: RunConfig, outdir: str, args) -> int:
    if cfg.device is None:
        raise ConfigError("device-report needs a [device] section")
    d = cfg.device
    summary = SummaryWriter(outdir, "device-report", cfg)
    bias = classify_bias(d)
    lam_mag = quadratic_coupling_magnitude(d)
    try:
        lam_n = quadratic_coupling_rate(d)
    except ValueError:
        lam_n = None
    ex, dez = control_fields(d, cfg.device_extra.get("dphi_x_wb", 0.0), d.ng - 0.5)

    rows = [
        ("junction energy E_J0 (rad/s)", fmt(d.ej0)),
        ("zero-point motion x_zpf (m)", fmt(d.x_zpf)),
        ("flux bias (Phi0 units)", fmt(bias.flux_bias)),
        ("bias classification", bias.kind.value),
        ("linear coefficient (rad/s per x)", fmt(bias.ej_linear)),
        ("quadratic coefficient (rad/s per x^2)", fmt(bias.ej_quadratic)),
        ("coupling |lambda| from field (rad/s)", fmt(lam_mag)),
        ("coupling |lambda| from field (cycles/s)", fmt(lam_mag / (2.0 * math.pi))),
        ("drive E_x (rad/s)", fmt(ex)),
        ("detuning dE_z (rad/s)", fmt(dez)),
    ]
    if lam_n is not None:
        rows.insert(6, ("coupling lambda_n (rad/s, signed)", fmt(lam_n)))
    width = max(len(r[0]) for r in rows)
    print(f"device report (run {summary.run_id})")
    for name, value in rows:
        print(f"  {name:<{width}}  {value}")

    derived = {
        "ej0_rads": d.ej0,
        "x_zpf_m": d.x_zpf,
        "flux_bias_phi0": bias.flux_bias,
        "bias_kind": bias.kind.value,
        "ej_linear_rads": bias.ej_linear,
        "ej_quadratic_rads": bias.ej_quadratic,
        "lambda_magnitude_rads": lam_mag,
        "lambda_magnitude_cyclic_hz": lam_mag / (2.0 * math.pi),
        "ex_rads": ex,
        "dez_rads": dez,
    }
    if lam_n is not None:
        derived["lambda_n_rads"] = lam_n
    summary.section("derived", derived)
    return summary.checks({"bias_classified": True})


def cmd_squeeze_ideal(cfg: RunConfig, outdir: str, args) -> int:
    if cfg.squeeze is None:
        raise ConfigError("squeeze-ideal needs a [squeeze] section")
    lam, lam_source = _resolve_lambda(cfg)
    sq = cfg.squeeze
    cycles = sq.cycles
    if cycles is None:
        if sq.kappa_target is None:
            raise ConfigError("[squeeze] needs cycles or kappa_target")
        cycles = round(sq.kappa_target / (lam * sq.dt_s))
    if cycles < 1:
        raise ConfigError(f"[squeeze] cycles must be >= 1, got {cycles}")
    if sq.kappa_target is not None and sq.cycles is not None:
        if abs(sq.kappa_target - lam * cycles * sq.dt_s) > 0.5 * lam * sq.dt_s:
            raise ConfigError("[squeeze] cycles and kappa_target disagree")

    schedule = PulseSchedule(cycles=cycles, dt=sq.dt_s, lam=lam)
    hcfg = HilbertConfig(cfg.sim.fock_dim)
    summary = SummaryWriter(outdir, "squeeze-ideal", cfg)
    summary.section(
        "derived",
        {
            "lambda_rads": lam,
            "lambda_source": lam_source,
            "cycles": cycles,
            "dt_s": sq.dt_s,
            "kappa_target": schedule.kappa_target,
            "sigma_x_initial": sq.sigma_x,
        },
    )

    rho0 = np.kron(
        pure_density(qubit_state("x", sq.sigma_x)),
        thermal_state(hcfg.fock_dim, sq.resonator_nbar),
    )
    traj = run_schedule(schedule, rho0, hcfg)
    traj.to_csv(os.path.join(outdir, "trajectory.csv"))

    kappa_eff = -math.log(traj.dx_norm[-1])
    print(
        f"squeeze-ideal: {cycles} cycles, kappa target {fmt(schedule.kappa_target)}, "
        f"measured {fmt(kappa_eff)}"
    )
    summary.section(
        "results",
        {
            "kappa_eff": kappa_eff,
            "dx_norm_final": float(traj.dx_norm[-1]),
            "trajectory_csv": "trajectory.csv",
        },
    )
    return summary.checks(
        {
            "trace_preserved": bool(np.max(np.abs(traj.trace - 1.0)) <= 1e-8),
            "positivity": bool(np.min(traj.min_eig) >= -1e-7),
        }
    )


def cmd_squeeze_lindblad(cfg: RunConfig, outdir: str, args) -> int:
    if cfg.decoherence is None:
        raise ConfigError("squeeze-lindblad needs a [decoherence] section")
    lam, lam_source = _resolve_lambda(cfg)
    run_cfg = _decoherent_run_config(cfg, lam)
    summary = SummaryWriter(outdir, "squeeze-lindblad", cfg)
    derived = {"lambda_rads": lam, "lambda_source": lam_source, "units": cfg.sim.units}
    derived.update(derived_constants(run_cfg))
    if cfg.device is not None:
        derived["ej0_rads"] = cfg.device.ej0
        derived["x_zpf_m"] = cfg.device.x_zpf
    summary.section("derived", derived)

    result = decoherent_squeezing_run(run_cfg)
    traj = result.trajectory
    traj.to_csv(os.path.join(outdir, "trajectory.csv"))
    np.save(os.path.join(outdir, "resonator_state_min.npy"), result.rho_res_min)

    print(
        f"squeeze-lindblad: min dx/dx0 = {fmt(result.min_dx_norm)} "
        f"at t = {fmt(result.t_min)} s"
    )
    summary.section(
        "results",
        {
            "min_dx_norm": result.min_dx_norm,
            "t_min_s": result.t_min,
            "kappa_eff": -math.log(result.min_dx_norm),
            "dx_norm_final": float(traj.dx_norm[-1]),
            "trajectory_csv": "trajectory.csv",
            "state_min_npy": "resonator_state_min.npy",
        },
    )
    return summary.checks(
        {
            "trace_drift": bool(np.max(np.abs(traj.trace - 1.0)) <= 1e-8),
            "positivity": bool(np.min(traj.min_eig) >= -1e-7),
            "squeezing_attained": bool(result.min_dx_norm < 1.0),
        }
    )


def cmd_sweep_dephasing(cfg: RunConfig, outdir: str, args) -> int:
    if cfg.decoherence is None:
        raise ConfigError("sweep-dephasing needs a [decoherence] section")
    lam, lam_source = _resolve_lambda(cfg)
    if args.rates:
        try:
            rates = [float(tok) for tok in args.rates.split(",") if tok.strip()]
        except ValueError as exc:
            raise ConfigError(f"--rates: cannot parse {args.rates!r}") from exc
    else:
        rates = list(np.logspace(math.log10(0.1 * lam), math.log10(10.0 * lam), 5))
    if not rates:
        raise ConfigError("--rates produced an empty list")

    run_cfg = _decoherent_run_config(cfg, lam)
    summary = SummaryWriter(outdir, "sweep-dephasing", cfg)
    derived = {"lambda_rads": lam, "lambda_source": lam_source, "workers": args.workers}
    derived.update(derived_constants(run_cfg))
    summary.section("derived", derived)

    points = dephasing_sweep(run_cfg, rates, workers=args.workers)
    with open(os.path.join(outdir, "sweep.csv"), "w", newline="\n") as fh:
        fh.write("gamma_phi,min_dx_norm\n")
        for rate, min_dx in points:
            fh.write(f"{fmt(rate)},{fmt(min_dx)}\n")

    ordered = sorted(points)
    monotone = all(a[1] <= b[1] + 1e-12 for a, b in zip(ordered, ordered[1:]))
    for rate, min_dx in points:
        print(f"sweep-dephasing: gamma_phi = {fmt(rate)} -> min dx/dx0 = {fmt(min_dx)}")
    summary.section(
        "results",
        {"n_rates": len(points), "sweep_csv": "sweep.csv"},
    )
    return summary.checks({"monotone_in_dephasing": monotone})


def _measure_state(cfg: RunConfig, spec: str) -> tuple[np.ndarray, str]:
    d = cfg.sim.fock_dim
    if spec == "vacuum":
        return pure_density(vacuum_state(d)), "vacuum"
    if spec == "thermal":
        nbar = cfg.measure.nbar
        if nbar is None:
            if cfg.decoherence is None:
                raise ConfigError(
                    "thermal state needs [measure] nbar or a [decoherence] section"
                )
            nbar = thermal_occupation(_resolve_omega0(cfg), cfg.decoherence.T_K)
        return thermal_state(d, nbar), f"thermal(nbar={nbar:.6g})"
    if spec.startswith("squeezed:"):
        try:
            kappa = float(spec.split(":", 1)[1])
        except ValueError as exc:
            raise ConfigError(f"--state: cannot parse {spec!r}") from exc
        s = squeeze_operator(kappa, HilbertConfig(d))
        return pure_density(s @ vacuum_state(d)), f"squeezed(kappa={kappa:g})"
    if spec.startswith("from-run:"):
        run_dir = spec.split(":", 1)[1]
        path = os.path.join(run_dir, "resonator_state_min.npy")
        if not os.path.exists(path):
            raise ConfigError(f"unknown run id {run_dir!r}: no {path}")
        rho = np.load(path)
        return rho, f"from-run({run_dir})"
    raise ConfigError(
        f"--state must be vacuum, thermal, squeezed:<kappa> or from-run:<dir>, got {spec!r}"
    )


def cmd_measure(cfg: RunConfig, outdir: str, args) -> int:
    rho, label = _measure_state(cfg, args.state)
    grid = default_kappa_grid(cfg.measure.kappa_step)
    summary = SummaryWriter(outdir, "measure", cfg)
    summary.section(
        "derived",
        {
            "state": label,
            "kappa_step": cfg.measure.kappa_step,
            "shots": cfg.measure.shots if cfg.measure.shots is not None else "exact",
            "seed": cfg.sim.seed,
        },
    )

    curve = generating_function(rho, grid, shots=cfg.measure.shots, seed=cfg.sim.seed)
    with open(os.path.join(outdir, "gf.csv"), "w", newline="\n") as fh:
        write_gf_csv(curve, fh)
    est = moments_from_gf(curve)

    equivalence_ok = True
    try:
        verify_protocol_equivalence(rho, 1.0, grid / 2.0)
    except ProtocolEquivalenceError:
        equivalence_ok = False

    print(
        f"measure[{label}]: mean_x = {fmt(est.mean_x)}, var_x = {fmt(est.var_x)} "
        f"(error bound {fmt(est.error_bound)})"
    )
    summary.section(
        "results",
        {
            "mean_x": est.mean_x,
            "var_x": est.var_x,
            "dx": math.sqrt(max(est.var_x, 0.0)),
            "fd_step": est.fd_step,
            "error_bound": est.error_bound,
            "gf_csv": "gf.csv",
        },
    )
    return summary.checks(
        {
            "protocol_equivalence": equivalence_ok,
            "characteristic_bound": bool(
                np.max(np.hypot(curve.re, curve.im))
                <= 1.0 + (1e-9 if cfg.measure.shots is None else 5.0 / math.sqrt(cfg.measure.shots))
            ),
        }
    )


def cmd_rwa_check(cfg: RunConfig, outdir: str, args) -> int:
    if args.ladder:
        try:
            ladder = [float(tok) for tok in args.ladder.split(",") if tok.strip()]
        except ValueError as exc:
            raise ConfigError(f"--ladder: cannot parse {args.ladder!r}") from exc
    else:
        ladder = list(_RWA_LADDER)
    if not ladder:
        raise ConfigError("--ladder produced an empty list")

    hcfg = HilbertConfig(cfg.sim.fock_dim)
    summary = SummaryWriter(outdir, "rwa-check", cfg)
    summary.section("derived", {"fock_dim": cfg.sim.fock_dim, "ladder": ",".join(map(str, ladder))})

    fids = [rwa_cycle_fidelity(r, hcfg) for r in ladder]
    threshold = None
    for r, f in zip(ladder, fids):
        marker = ""
        if f < 0.999 and threshold is None:
            threshold = r
            marker = "   <- fidelity drops below 0.999"
        print(f"rwa-check: lambda/omega0 = {r:g} -> fidelity = {f:.9f}{marker}")

    results = {f"fidelity_at_{r:g}": f for r, f in zip(ladder, fids)}
    results["threshold_lambda_over_omega0"] = threshold if threshold is not None else "none"
    summary.section("results", results)

    checks = {"monotone_fidelity": all(a >= b - 1e-12 for a, b in zip(fids, fids[1:]))}
    if 0.0 in ladder:
        checks["exact_limit"] = bool(abs(fids[ladder.index(0.0)] - 1.0) <= 1e-9)
    return summary.checks(checks)


_COMMANDS = {
    "device-report": cmd_device_report,
    "squeeze-ideal": cmd_squeeze_ideal,
    "squeeze-lindblad": cmd_squeeze_lindblad,
    "sweep-dephasing": cmd_sweep_dephasing,
    "measure": cmd_measure,
    "rwa-check": cmd_rwa_check,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nems-squeeze",
        description="flux-coupled resonator squeezing: device estimates, protocols, readout",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("device-report", "bias classification and coupling constants"),
        ("squeeze-ideal", "closed-system echo squeezing trajectory"),
        ("squeeze-lindblad", "decoherent squeezing trajectory"),
        ("sweep-dephasing", "best squeezing versus dephasing rate"),
        ("measure", "characteristic-function readout and moments"),
        ("rwa-check", "fast-term validity fidelity ladder"),
    ):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", help="INI config file")
        sp.add_argument(
            "--paper-defaults",
            action="store_true",
            help="start from the built-in reference parameter set",
        )
        sp.add_argument("--seed", type=int, help="override [sim] seed")
        sp.add_argument("--out", help="output directory (default: [output] dir/<command>)")
        if name == "sweep-dephasing":
            sp.add_argument("--rates", help="comma-separated dephasing rates in rad/s")
            sp.add_argument("--workers", type=int, default=1, help="parallel worker processes")
        if name == "measure":
            sp.add_argument(
                "--state",
                default="vacuum",
                help="vacuum | thermal | squeezed:<kappa> | from-run:<dir>",
            )
        if name == "rwa-check":
            sp.add_argument("--ladder", help="comma-separated lambda/omega0 values")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(
            path=args.config,
            paper_defaults=args.paper_defaults,
            seed=args.seed,
            out_dir=args.out,
        )
        outdir = cfg.out_dir if args.out else os.path.join(cfg.out_dir, args.command)
        os.makedirs(outdir, exist_ok=True)
        return _COMMANDS[args.command](cfg, outdir, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TruncationError, StepRefinementError, IntegrityError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
