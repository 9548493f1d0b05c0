"""Propagation of the truncated Schrödinger equation under piecewise-constant fields.

For a field that is constant on each step the step Hamiltonian
``H0 + u_m H1`` is real symmetric, so each step is applied exactly through its
eigendecomposition.  No splitting error enters; unitarity and the bound checks
only see linear-algebra roundoff.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, NonFiniteField, SchemaError
from .system import QuantumSystem

# units note written at the top of every CSV we emit
UNITS = "atomic units (hbar = 1)"


@dataclass
class ControlField:
    """Field ``u(t) = samples[m]`` on ``[m dt, (m+1) dt)``."""

    dt: float
    samples: np.ndarray

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.ndim != 1 or len(self.samples) == 0:
            raise ValueError("field needs a nonempty 1-d sample array")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not np.all(np.isfinite(self.samples)):
            raise NonFiniteField("field samples must be finite")

    @property
    def steps(self) -> int:
        return len(self.samples)

    @property
    def T(self) -> float:
        return self.steps * self.dt

    @property
    def K(self) -> float:
        return field_l1_norm(self)

    @property
    def times(self) -> np.ndarray:
        """Left endpoints of the steps."""
        return np.arange(self.steps) * self.dt

    def running_l1(self) -> np.ndarray:
        """``int_0^{t_m} |u|`` at the ``steps + 1`` step boundaries."""
        return np.concatenate([[0.0], np.cumsum(np.abs(self.samples)) * self.dt])

    def energy(self) -> float:
        """``int_0^T u**2 dt``."""
        return float(self.dt * np.sum(self.samples**2))

    @classmethod
    def constant(cls, value: float, T: float, steps: int) -> "ControlField":
        return cls(T / steps, np.full(steps, float(value)))


def field_l1_norm(field: ControlField) -> float:
    """Exact L1 norm ``dt * sum |u_m|`` of a piecewise-constant field."""
    return float(field.dt * np.sum(np.abs(field.samples)))


def basis_state(system: QuantumSystem, N: int, level: int) -> np.ndarray:
    psi = np.zeros(N, dtype=complex)
    pos = system.position(level)
    if pos >= N:
        raise DimensionMismatch(f"level {level} not in the first {N} levels")
    psi[pos] = 1.0
    return psi


def h0_expectation(system: QuantumSystem, psi: np.ndarray) -> np.ndarray:
    """``sum_j |c_j|**2 E_j`` for one state or a stack of states."""
    psi = np.asarray(psi)
    return np.abs(psi) ** 2 @ system.energies(psi.shape[-1])


class Propagator:
    """Exact step propagator for ``H0 + u H1`` truncated to ``N`` levels.

    Eigendecompositions are cached per distinct field value.  The cache belongs
    to the instance; use one propagator per thread.
    """

    def __init__(self, system: QuantumSystem, N: int):
        if N < 2:
            raise DimensionMismatch(f"need at least two levels, got N={N}")
        self.system = system
        self.N = N
        self.energies = system.energies(N)
        self.h1 = system.h1(N)
        self._h0 = np.diag(self.energies)
        self._cache: dict[float, tuple[np.ndarray, np.ndarray]] = {}

    def factor(self, u: float) -> tuple[np.ndarray, np.ndarray]:
        """Eigenvalues and eigenvectors of ``H0 + u H1`` (uncached)."""
        # dense LAPACK beats the tridiagonal driver at the sizes used here
        return np.linalg.eigh(self._h0 + u * self.h1)

    def decompose(self, u: float) -> tuple[np.ndarray, np.ndarray]:
        hit = self._cache.get(u)
        if hit is None:
            hit = self._cache[u] = self.factor(u)
        return hit

    def step(self, psi: np.ndarray, u: float, dt: float, adjoint: bool = False) -> np.ndarray:
        """Apply ``exp(-i dt (H0 + u H1))`` (or its adjoint) to ``psi``."""
        w, v = self.decompose(u)
        phase = np.exp((1j if adjoint else -1j) * dt * w)
        return v @ (phase * (v.T @ psi))

    def clear(self):
        self._cache.clear()


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    populations: np.ndarray
    h0_expect: np.ndarray
    running_K: np.ndarray
    levels: np.ndarray
    dt: float
    stride: int

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    @property
    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.states, axis=1)


def _check_inputs(system, N, field, psi0):
    psi0 = np.asarray(psi0, dtype=complex)
    if psi0.shape != (N,):
        raise DimensionMismatch(f"initial state has shape {psi0.shape}, expected ({N},)")
    if not np.all(np.isfinite(field.samples)):
        raise NonFiniteField("field samples must be finite")
    if abs(np.linalg.norm(psi0) - 1) > 1e-10:
        raise ValueError("initial state must be normalized")
    return psi0


def propagate(
    system: QuantumSystem,
    N: int,
    field: ControlField,
    psi0: np.ndarray,
    record_stride: int = 1,
    propagator: Propagator | None = None,
) -> Trajectory:
    """Integrate ``i d/dt psi = (H0 + u(t) H1) psi`` on the first ``N`` levels.

    States are recorded at every ``record_stride``-th step boundary, and always
    at ``t = 0`` and ``t = T``.
    """
    psi = _check_inputs(system, N, field, psi0)
    if record_stride < 1:
        raise ValueError("record_stride must be >= 1")
    prop = propagator or Propagator(system, N)
    M = field.steps
    record = list(range(0, M + 1, record_stride))
    if record[-1] != M:
        record.append(M)
    states = np.empty((len(record), N), dtype=complex)
    states[0] = psi
    r = 1
    for m, u in enumerate(field.samples):
        psi = prop.step(psi, u, field.dt)
        if r < len(record) and record[r] == m + 1:
            states[r] = psi
            r += 1

    record = np.asarray(record)
    pops = np.abs(states) ** 2
    return Trajectory(
        times=record * field.dt,
        states=states,
        populations=pops,
        h0_expect=pops @ prop.energies,
        running_K=field.running_l1()[record],
        levels=np.arange(N) + system.first_index,
        dt=field.dt,
        stride=record_stride,
    )


def propagate_backward(
    system: QuantumSystem, N: int, field: ControlField, psi_T: np.ndarray, propagator: Propagator | None = None
) -> np.ndarray:
    """Undo a forward propagation: apply the adjoint steps in reverse order."""
    prop = propagator or Propagator(system, N)
    psi = np.asarray(psi_T, dtype=complex)
    for u in field.samples[::-1]:
        psi = prop.step(psi, u, field.dt, adjoint=True)
    return psi


def leakage_profile(traj: Trajectory) -> np.ndarray:
    """Per-level maximum population over all recorded times."""
    if len(traj.states) == 0:
        raise ValueError("empty trajectory")
    return traj.populations.max(axis=0)


def final_distance(traj: Trajectory | np.ndarray, target: np.ndarray, squared: bool = False) -> float:
    """``1 - |<target|psi(T)>|`` (or ``1 - |<target|psi(T)>|**2`` with ``squared``)."""
    psi_T = traj.final if isinstance(traj, Trajectory) else np.asarray(traj)
    target = np.asarray(target)
    if psi_T.shape != target.shape:
        raise DimensionMismatch(f"state shape {psi_T.shape} vs target {target.shape}")
    overlap = abs(np.vdot(target, psi_T))
    return float(1 - overlap**2) if squared else float(1 - overlap)


def h0_rate(system: QuantumSystem, psi: np.ndarray, u: float) -> np.ndarray:
    """``d<H0>/dt = -i u <psi|[H0, H1]|psi>`` for one state or a stack of states."""
    N = psi.shape[-1]
    e = system.energies(N)
    h1 = system.h1(N)
    comm = e[:, None] * h1 - h1 * e[None, :]
    val = np.einsum("...i,ij,...j->...", psi.conj(), comm, psi)
    return (-1j * u * val).real


def h0_derivative_check(traj: Trajectory, field: ControlField, system: QuantumSystem) -> float:
    """Max residual between the finite-difference ``d<H0>/dt`` and the commutator formula.

    Uses the step-averaged (trapezoidal) commutator term against the forward
    difference over each step, so the residual vanishes as ``dt -> 0``.
    """
    if traj.stride != 1 or len(traj.states) != field.steps + 1:
        raise ValueError("derivative check needs a trajectory recorded at every step")
    fd = np.diff(traj.h0_expect) / field.dt
    rates = h0_rate(system, traj.states, 1.0)
    model = 0.5 * field.samples * (rates[:-1] + rates[1:])
    return float(np.max(np.abs(fd - model))) if len(fd) else 0.0


# --- file formats -----------------------------------------------------------


def _uniform_from_segments(starts, ends, values) -> ControlField:
    widths = np.asarray(ends) - np.asarray(starts)
    if np.any(widths <= 0):
        raise SchemaError("field time grid must be strictly increasing")
    dt = float(widths.min())
    ratio = widths / dt
    counts = np.rint(ratio).astype(int)
    if np.any(np.abs(ratio - counts) > 1e-9 * np.maximum(ratio, 1)):
        raise SchemaError("non-uniform field grid is not a multiple of its smallest step")
    return ControlField(dt, np.repeat(np.asarray(values, dtype=float), counts))


def load_field(path: str | Path) -> ControlField:
    """Read a field from CSV (``t,u`` left endpoints) or JSON (``{dt, samples}``).

    In the CSV form the last step lasts as long as the one before it, unless a
    final row ``T,`` with an empty value closes the horizon.  Non-uniform grids
    are split into equal substeps, which keeps the piecewise-constant field
    (and its L1 norm) unchanged.
    """
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".json" or text.lstrip().startswith("{"):
        doc = json.loads(text)
        try:
            return ControlField(float(doc["dt"]), np.asarray(doc["samples"], dtype=float))
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"field JSON needs dt and samples: {exc}") from None

    rows = [r for r in csv.reader(line for line in text.splitlines() if line.strip() and not line.startswith("#"))]
    if not rows or [c.strip() for c in rows[0]] != ["t", "u"]:
        raise SchemaError("field CSV must start with a 't,u' header")
    t, u = [], []
    end = None
    for row in rows[1:]:
        if len(row) < 2 or row[1].strip() == "":
            end = float(row[0])
            break
        t.append(float(row[0]))
        u.append(float(row[1]))
    if not t:
        raise SchemaError("field CSV has no samples")
    if t[0] != 0:
        raise SchemaError("field must start at t = 0")
    if end is None:
        end = t[-1] + (t[-1] - t[-2] if len(t) > 1 else 1.0)
    return _uniform_from_segments(t, t[1:] + [end], u)


def save_field(path: str | Path, field: ControlField) -> None:
    path = Path(path)
    if path.suffix.lower() == ".json":
        path.write_text(json.dumps({"dt": field.dt, "samples": field.samples.tolist()}))
        return
    with open(path, "w", newline="") as fh:
        fh.write(f"# piecewise-constant control field; t = left endpoint of each step, {UNITS}\n")
        w = csv.writer(fh)
        w.writerow(["t", "u"])
        for t, u in zip(field.times, field.samples):
            w.writerow([repr(float(t)), repr(float(u))])
        w.writerow([repr(field.T), ""])


def write_trajectory_csv(path: str | Path, traj: Trajectory) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# t: time; pop_j: population of level j; h0_expect: <H0>; {UNITS}\n")
        w = csv.writer(fh)
        w.writerow(["t"] + [f"pop_{j}" for j in traj.levels] + ["h0_expect"])
        for t, pops, h in zip(traj.times, traj.populations, traj.h0_expect):
            w.writerow([repr(float(t))] + [repr(float(p)) for p in pops] + [repr(float(h))])


def write_leakage_csv(path: str | Path, traj: Trajectory) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("# level: level index; max_pop: maximum population over the recorded trajectory\n")
        w = csv.writer(fh)
        w.writerow(["level", "max_pop"])
        for j, p in zip(traj.levels, leakage_profile(traj)):
            w.writerow([int(j), repr(float(p))])
