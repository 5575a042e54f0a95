"""INI-style run configuration: parsing, validation and reference defaults.

Sections and keys (flat ``key = value`` pairs, ``#`` comments):

    [device]       B_tesla W_m L_m l_m Ic_A M_kg f0_Hz n [m Ct_F ng dphi_x_wb]
    [sim]          fock_dim units step_s t_final_s sample_every_s seed
    [squeeze]      lambda_rads dt_s cycles [kappa_target sigma_x resonator_nbar]
    [decoherence]  Q T_K T1_s T2_s [Nq_override f0_Hz]
    [measure]      kappa_step [shots nbar]
    [output]       dir

Every physical key carries its unit in the name.  The mandatory ``units``
key (``angular`` or ``cyclic``) records which reading of frequency-like
literature values a configuration encodes; it does not rescale any key.
``f0_Hz`` is always cyclic and converted to omega0 = 2 pi f0 on load.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, replace

from .device import DeviceParams

__all__ = ["ConfigError", "RunConfig", "load_config", "paper_default_sections"]


class ConfigError(Exception):
    """Invalid or incomplete run configuration."""


@dataclass(frozen=True)
class SimSection:
    fock_dim: int = 30
    units: str | None = None
    step_s: float | None = None
    t_final_s: float = 1e-7
    sample_every_s: float = 2e-9
    seed: int = 12345


@dataclass(frozen=True)
class SqueezeSection:
    lambda_rads: float | None = None
    dt_s: float = 2e-10
    cycles: int | None = None
    kappa_target: float | None = None
    sigma_x: int = +1
    resonator_nbar: float = 0.0


@dataclass(frozen=True)
class DecoherenceSection:
    Q: float = 1e4
    T_K: float = 0.02
    T1_s: float = 1e-6
    T2_s: float = 1e-7
    Nq_override: float | None = None
    f0_Hz: float | None = None


@dataclass(frozen=True)
class MeasureSection:
    kappa_step: float = 0.05
    shots: int | None = None
    nbar: float | None = None


@dataclass
class RunConfig:
    device: DeviceParams | None
    device_extra: dict[str, float]
    sim: SimSection
    squeeze: SqueezeSection | None
    decoherence: DecoherenceSection | None
    measure: MeasureSection
    out_dir: str
    echo: dict[str, str] = field(default_factory=dict)


def paper_default_sections() -> dict[str, dict[str, str]]:
    """Built-in reference parameter set (angular reading of the MHz values).

    Device: 0.2 T field (snapped to the integer flux index n=14508 for a
    5 um x 30 um loop), 30 um beam, 60 nA junctions, and a beam mass chosen
    so the zero-point motion is 5e-13 m at 250 MHz.  Decoherence: Q=1e4,
    20 mK, T1=1 us, T2=100 ns; squeezing rate 5e6 rad/s.
    """
    return {
        "device": {
            "B_tesla": "0.20000088982323777",
            "W_m": "5e-6",
            "L_m": "30e-6",
            "l_m": "30e-6",
            "Ic_A": "60e-9",
            "M_kg": "1.3427225401676133e-19",
            "f0_Hz": "250e6",
            "n": "14508",
            "m": "0",
            "Ct_F": "1e-15",
            "ng": "0.5",
            "dphi_x_wb": "2.0678338484619295e-17",
        },
        "sim": {
            "fock_dim": "30",
            "units": "angular",
            "t_final_s": "1e-7",
            "sample_every_s": "2e-9",
            "seed": "12345",
        },
        "squeeze": {
            "lambda_rads": "5e6",
            "dt_s": "2e-10",
            "cycles": "300",
            "sigma_x": "1",
        },
        "decoherence": {
            "Q": "1e4",
            "T_K": "0.02",
            "T1_s": "1e-6",
            "T2_s": "1e-7",
        },
        "measure": {
            "kappa_step": "0.05",
        },
        "output": {
            "dir": "runs",
        },
    }


_KNOWN_KEYS = {
    "device": {
        "B_tesla", "W_m", "L_m", "l_m", "Ic_A", "M_kg", "f0_Hz",
        "n", "m", "Ct_F", "ng", "dphi_x_wb",
    },
    "sim": {"fock_dim", "units", "step_s", "t_final_s", "sample_every_s", "seed"},
    "squeeze": {"lambda_rads", "dt_s", "cycles", "kappa_target", "sigma_x", "resonator_nbar"},
    "decoherence": {"Q", "T_K", "T1_s", "T2_s", "Nq_override", "f0_Hz"},
    "measure": {"kappa_step", "shots", "nbar"},
    "output": {"dir"},
}


def _parse_file(path: str) -> dict[str, dict[str, str]]:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    parser.optionxform = str  # keys are case sensitive
    try:
        with open(path) as fh:
            parser.read_file(fh, source=path)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    return {section: dict(parser[section]) for section in parser.sections()}


def _merge(base: dict[str, dict[str, str]], over: dict[str, dict[str, str]]):
    out = {sec: dict(kv) for sec, kv in base.items()}
    for sec, kv in over.items():
        out.setdefault(sec, {}).update(kv)
    return out


def _want(sections, section: str, key: str, conv, default="__required__"):
    kv = sections.get(section, {})
    if key not in kv:
        if default == "__required__":
            raise ConfigError(f"[{section}] missing key {key}")
        return default
    raw = kv[key].strip()
    try:
        return conv(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] key {key}: cannot parse {raw!r}") from exc


def _to_int(raw: str) -> int:
    value = float(raw)
    if value != int(value):
        raise ValueError("not an integer")
    return int(value)


def _to_optional_int(raw: str) -> int | None:
    return _to_int(raw)


def load_config(
    path: str | None = None,
    paper_defaults: bool = False,
    seed: int | None = None,
    out_dir: str | None = None,
) -> RunConfig:
    """Load, merge and validate a run configuration.

    ``paper_defaults`` seeds the reference parameter set; keys from ``path``
    override it.  ``seed`` and ``out_dir`` override the corresponding config
    values (command-line precedence).
    """
    sections: dict[str, dict[str, str]] = {}
    if paper_defaults:
        sections = paper_default_sections()
    if path is not None:
        sections = _merge(sections, _parse_file(path))
    if not sections:
        raise ConfigError("no configuration given: pass --config and/or --paper-defaults")

    for sec, kv in sections.items():
        if sec not in _KNOWN_KEYS:
            raise ConfigError(f"unknown section [{sec}]")
        for key in kv:
            if key not in _KNOWN_KEYS[sec]:
                raise ConfigError(f"[{sec}] unknown key {key}")

    device = None
    device_extra: dict[str, float] = {}
    if "device" in sections:
        f0 = _want(sections, "device", "f0_Hz", float)
        if f0 <= 0:
            raise ConfigError("[device] f0_Hz must be positive")
        try:
            device = DeviceParams(
                B=_want(sections, "device", "B_tesla", float),
                W=_want(sections, "device", "W_m", float),
                L=_want(sections, "device", "L_m", float),
                l=_want(sections, "device", "l_m", float),
                Ic=_want(sections, "device", "Ic_A", float),
                M=_want(sections, "device", "M_kg", float),
                omega0=2.0 * math.pi * f0,
                n=_want(sections, "device", "n", _to_int),
                m=_want(sections, "device", "m", _to_int, default=0),
                Ct=_want(sections, "device", "Ct_F", float, default=1e-15),
                ng=_want(sections, "device", "ng", float, default=0.5),
            )
        except ValueError as exc:
            raise ConfigError(f"[device] {exc}") from exc
        device_extra["dphi_x_wb"] = _want(
            sections, "device", "dphi_x_wb", float, default=2.0678338484619295e-17
        )

    sim = SimSection(
        fock_dim=_want(sections, "sim", "fock_dim", _to_int, default=30),
        units=_want(sections, "sim", "units", str, default=None),
        step_s=_want(sections, "sim", "step_s", float, default=None),
        t_final_s=_want(sections, "sim", "t_final_s", float, default=1e-7),
        sample_every_s=_want(sections, "sim", "sample_every_s", float, default=2e-9),
        seed=_want(sections, "sim", "seed", _to_int, default=12345),
    )
    if sim.units is not None and sim.units not in ("angular", "cyclic"):
        raise ConfigError(f"[sim] units must be 'angular' or 'cyclic', got {sim.units!r}")
    if sim.fock_dim < 2:
        raise ConfigError("[sim] fock_dim must be >= 2")

    squeeze = None
    if "squeeze" in sections:
        squeeze = SqueezeSection(
            lambda_rads=_want(sections, "squeeze", "lambda_rads", float, default=None),
            dt_s=_want(sections, "squeeze", "dt_s", float, default=2e-10),
            cycles=_want(sections, "squeeze", "cycles", _to_optional_int, default=None),
            kappa_target=_want(sections, "squeeze", "kappa_target", float, default=None),
            sigma_x=_want(sections, "squeeze", "sigma_x", _to_int, default=1),
            resonator_nbar=_want(sections, "squeeze", "resonator_nbar", float, default=0.0),
        )
        if squeeze.sigma_x not in (1, -1):
            raise ConfigError("[squeeze] sigma_x must be 1 or -1")
        if not squeeze.dt_s > 0:
            raise ConfigError("[squeeze] dt_s must be positive")

    decoherence = None
    if "decoherence" in sections:
        decoherence = DecoherenceSection(
            Q=_want(sections, "decoherence", "Q", float),
            T_K=_want(sections, "decoherence", "T_K", float),
            T1_s=_want(sections, "decoherence", "T1_s", float),
            T2_s=_want(sections, "decoherence", "T2_s", float),
            Nq_override=_want(sections, "decoherence", "Nq_override", float, default=None),
            f0_Hz=_want(sections, "decoherence", "f0_Hz", float, default=None),
        )

    # the units assumption must be recorded whenever frequency-bearing
    # squeezing or decoherence inputs are in play
    if (squeeze is not None or decoherence is not None) and sim.units is None:
        raise ConfigError("[sim] units (angular|cyclic) is mandatory for squeezing runs")

    measure = MeasureSection(
        kappa_step=_want(sections, "measure", "kappa_step", float, default=0.05),
        shots=_want(sections, "measure", "shots", _to_optional_int, default=None),
        nbar=_want(sections, "measure", "nbar", float, default=None),
    )
    if not measure.kappa_step > 0:
        raise ConfigError("[measure] kappa_step must be positive")
    if measure.shots is not None and measure.shots < 1:
        raise ConfigError("[measure] shots must be >= 1")

    out = _want(sections, "output", "dir", str, default="runs")
    cfg = RunConfig(
        device=device,
        device_extra=device_extra,
        sim=sim,
        squeeze=squeeze,
        decoherence=decoherence,
        measure=measure,
        out_dir=out_dir if out_dir is not None else out,
        echo={
            f"{sec}.{k}": sections[sec][k].strip()
            for sec in sorted(sections)
            for k in sorted(sections[sec])
        },
    )
    if seed is not None:
        cfg.sim = replace(cfg.sim, seed=seed)
        cfg.echo["sim.seed"] = str(seed)
    return cfg
