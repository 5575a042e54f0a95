"""Time series of observables sampled along an evolution, with CSV output."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .hilbert import (
    HilbertConfig,
    embed_qubit,
    embed_resonator,
    number_operator,
    pauli,
    quadrature_x,
)

__all__ = ["CSV_COLUMNS", "Trajectory", "TrajectoryBuilder", "format_csv_value"]

# bit-exact output schema; min_eig is tracked internally but not emitted
CSV_COLUMNS = ("t_s", "dx_norm", "exp_x", "exp_x2", "sx", "sy", "sz", "nbar", "trace", "purity")


def format_csv_value(x: float) -> str:
    """Decimal floating point with 12 significant digits."""
    return format(float(x), ".12g")


@dataclass
class Trajectory:
    """Sampled expectation values along a run.

    ``dx_norm`` is the position uncertainty normalized to its initial value;
    the absolute uncertainty is recoverable as sqrt(exp_x2 - exp_x**2).
    """

    times: np.ndarray
    dx_norm: np.ndarray
    exp_x: np.ndarray
    exp_x2: np.ndarray
    sx: np.ndarray
    sy: np.ndarray
    sz: np.ndarray
    nbar: np.ndarray
    trace: np.ndarray
    purity: np.ndarray
    min_eig: np.ndarray
    states: list[np.ndarray] | None = field(default=None, repr=False)
    extras: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.times) == 0:
            raise ValueError("trajectory has no samples")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("sample times must be strictly increasing")

    @property
    def dx_abs(self) -> np.ndarray:
        return np.sqrt(np.maximum(self.exp_x2 - self.exp_x**2, 0.0))

    def argmin_dx(self) -> int:
        return int(np.argmin(self.dx_norm))

    def write_csv(self, fh) -> None:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        cols = (
            self.times,
            self.dx_norm,
            self.exp_x,
            self.exp_x2,
            self.sx,
            self.sy,
            self.sz,
            self.nbar,
            self.trace,
            self.purity,
        )
        for i in range(len(self.times)):
            fh.write(",".join(format_csv_value(c[i]) for c in cols) + "\n")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="\n") as fh:
            self.write_csv(fh)


class TrajectoryBuilder:
    """Accumulates samples of the standard observable set on the composite space."""

    def __init__(
        self,
        cfg: HilbertConfig,
        keep_states: bool = False,
        extra_ops: dict[str, np.ndarray] | None = None,
    ):
        d = cfg.fock_dim
        x = quadrature_x(d)
        self._ops = {
            "exp_x": embed_resonator(x, cfg),
            "exp_x2": embed_resonator(x @ x, cfg),
            "sx": embed_qubit(pauli("x"), cfg),
            "sy": embed_qubit(pauli("y"), cfg),
            "sz": embed_qubit(pauli("z"), cfg),
            "nbar": embed_resonator(number_operator(d), cfg),
        }
        self._extra_ops = dict(extra_ops or {})
        self._rows: dict[str, list[float]] = {
            k: [] for k in ("t", *self._ops, "trace", "purity", "min_eig")
        }
        self._extra_rows: dict[str, list[float]] = {k: [] for k in self._extra_ops}
        self._states: list[np.ndarray] | None = [] if keep_states else None

    def add(self, t: float, rho: np.ndarray) -> None:
        r = self._rows
        r["t"].append(float(t))
        for name, op in self._ops.items():
            r[name].append(float(np.real(np.einsum("ij,ji->", rho, op))))
        for name, op in self._extra_ops.items():
            self._extra_rows[name].append(float(np.real(np.einsum("ij,ji->", rho, op))))
        r["trace"].append(float(np.real(np.trace(rho))))
        r["purity"].append(float(np.real(np.einsum("ij,ji->", rho, rho))))
        r["min_eig"].append(float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min()))
        if self._states is not None:
            self._states.append(rho.copy())

    def observables_of(self, rho: np.ndarray, dx0: float) -> dict[str, float]:
        """The reported observable values of a single state (for convergence checks)."""
        out = {
            name: float(np.real(np.einsum("ij,ji->", rho, op))) for name, op in self._ops.items()
        }
        out["trace"] = float(np.real(np.trace(rho)))
        out["purity"] = float(np.real(np.einsum("ij,ji->", rho, rho)))
        dx = np.sqrt(max(out["exp_x2"] - out["exp_x"] ** 2, 0.0))
        out["dx_norm"] = dx / dx0
        return out

    def build(self) -> Trajectory:
        r = {k: np.asarray(v) for k, v in self._rows.items()}
        dx = np.sqrt(np.maximum(r["exp_x2"] - r["exp_x"] ** 2, 0.0))
        return Trajectory(
            times=r["t"],
            dx_norm=dx / dx[0],
            exp_x=r["exp_x"],
            exp_x2=r["exp_x2"],
            sx=r["sx"],
            sy=r["sy"],
            sz=r["sz"],
            nbar=r["nbar"],
            trace=r["trace"],
            purity=r["purity"],
            min_eig=r["min_eig"],
            states=self._states,
            extras={k: np.asarray(v) for k, v in self._extra_rows.items()},
        )
