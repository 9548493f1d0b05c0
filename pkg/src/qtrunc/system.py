"""Quantum systems given by a discrete spectrum and a real symmetric coupling.

States are coordinate vectors in the eigenbasis of the free Hamiltonian, so a
system is fully described by its energies ``E_j`` and the matrix elements of
the coupling operator between those eigenstates.  Levels carry an explicit
``first_index``: the planar rotor starts at ``j = 1`` (odd subspace), the
harmonic oscillator at ``n = 0``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import CertificateViolation, DegenerateSpectrum, NonTridiagonal, SchemaError

SPECTRUM_KINDS = ("rotor", "oscillator", "table")
CLOSED_COUPLINGS = ("closed:rotor", "closed:oscillator")

# relative slack when comparing a measured constant to a certified one
_CERT_RTOL = 1e-12


@dataclass(frozen=True)
class Spectrum:
    kind: str
    first_index: int = 0
    table: tuple[float, ...] | None = None

    @property
    def closed_form(self) -> bool:
        return self.kind != "table"

    @property
    def size(self) -> float:
        """Number of available levels (``inf`` for closed forms)."""
        return math.inf if self.closed_form else len(self.table)

    def energy(self, j: int) -> float:
        """Energy of the level with (absolute) index ``j``."""
        if self.kind == "rotor":
            return float(j * j)
        if self.kind == "oscillator":
            return j + 0.5
        i = j - self.first_index
        if not 0 <= i < len(self.table):
            raise IndexError(f"level {j} outside tabulated spectrum")
        return self.table[i]

    def energies(self, n: int) -> np.ndarray:
        """Energies of the first ``n`` levels."""
        if n > self.size:
            raise IndexError(f"spectrum has only {self.size} levels, {n} requested")
        j = np.arange(self.first_index, self.first_index + n, dtype=float)
        if self.kind == "rotor":
            return j * j
        if self.kind == "oscillator":
            return j + 0.5
        return np.asarray(self.table[:n], dtype=float)

    def index_above(self, threshold: float) -> int:
        """Smallest level index ``j`` with ``E_j > threshold`` (exact for closed forms)."""
        if threshold < 0:
            return self.first_index
        if self.kind == "rotor":
            return max(self.first_index, math.isqrt(math.floor(threshold)) + 1)
        if self.kind == "oscillator":
            return max(self.first_index, math.floor(Fraction(threshold) - Fraction(1, 2)) + 1)
        hits = np.nonzero(np.asarray(self.table) > threshold)[0]
        if len(hits) == 0:
            raise IndexError(f"no tabulated level exceeds {threshold}")
        return self.first_index + int(hits[0])


@dataclass(frozen=True)
class Coupling:
    """Real symmetric coupling, stored by its off-diagonals.

    ``diagonals[0]`` holds the superdiagonal ``b_{j+1,j}`` starting at the
    first level, ``diagonals[1]`` the second superdiagonal and so on.  A
    closed-form coupling (``closed`` set) is always tridiagonal.
    """

    kind: str = "tridiagonal"
    closed: str | None = None
    diagonals: tuple[tuple[float, ...], ...] = ()

    @property
    def tridiagonal(self) -> bool:
        return self.kind == "tridiagonal"

    @property
    def bandwidth(self) -> int:
        return 1 if self.closed else len(self.diagonals)

    def superdiagonal(self, n: int, first_index: int) -> np.ndarray:
        """``b_{j+1,j}`` for the ``n - 1`` pairs among the first ``n`` levels."""
        j = np.arange(first_index, first_index + n - 1, dtype=float)
        if self.closed == "closed:rotor":
            return np.full(n - 1, 0.5)
        if self.closed == "closed:oscillator":
            return np.sqrt(j)
        return self._band(1, n)

    def _band(self, offset: int, n: int) -> np.ndarray:
        if offset > len(self.diagonals):
            return np.zeros(max(n - offset, 0))
        vals = self.diagonals[offset - 1]
        if len(vals) < n - offset:
            raise IndexError(f"coupling table too short for {n} levels")
        return np.asarray(vals[: n - offset], dtype=float)

    def matrix(self, n: int, first_index: int) -> np.ndarray:
        h1 = np.zeros((n, n))
        if n < 2:
            return h1
        offsets = range(1, self.bandwidth + 1)
        for off in offsets:
            band = self.superdiagonal(n, first_index) if off == 1 else self._band(off, n)
            idx = np.arange(n - off)
            h1[idx + off, idx] = band
            h1[idx, idx + off] = band
        return h1


@dataclass(frozen=True)
class Certificate:
    """Weak-coupling constants ``(k, C, d)`` and the range they were checked on."""

    k: int
    C: float
    d: float
    verified_up_to: int


@dataclass(frozen=True)
class QuantumSystem:
    name: str
    spectrum: Spectrum
    coupling: Coupling
    certificate: Certificate

    @property
    def first_index(self) -> int:
        return self.spectrum.first_index

    def energies(self, n: int) -> np.ndarray:
        return self.spectrum.energies(n)

    def h0(self, n: int) -> np.ndarray:
        return np.diag(self.energies(n))

    def h1(self, n: int) -> np.ndarray:
        return self.coupling.matrix(n, self.first_index)

    def superdiagonal(self, n: int) -> np.ndarray:
        if not self.coupling.tridiagonal:
            raise NonTridiagonal(f"{self.name}: coupling has bandwidth {self.coupling.bandwidth}")
        return self.coupling.superdiagonal(n, self.first_index)

    def position(self, level: int) -> int:
        """Position in a truncated state vector of the level with index ``level``."""
        pos = level - self.first_index
        if pos < 0:
            raise IndexError(f"level {level} below first index {self.first_index}")
        return pos

    def level(self, position: int) -> int:
        return position + self.first_index


def builtin_rotor() -> QuantumSystem:
    """Planar rotor restricted to odd eigenfunctions: ``E_j = j**2``, ``b = 1/2``."""
    return QuantumSystem(
        name="rotor",
        spectrum=Spectrum("rotor", first_index=1),
        coupling=Coupling(closed="closed:rotor"),
        certificate=Certificate(k=1, C=1.5, d=1.0, verified_up_to=1000),
    )


def builtin_oscillator() -> QuantumSystem:
    """Harmonic oscillator, ``E_n = n + 1/2`` and ``b_{n+1,n} = sqrt(n)``."""
    return QuantumSystem(
        name="oscillator",
        spectrum=Spectrum("oscillator", first_index=0),
        coupling=Coupling(closed="closed:oscillator"),
        certificate=Certificate(k=2, C=8.0, d=1.0, verified_up_to=1000),
    )


BUILTINS = {"rotor": builtin_rotor, "oscillator": builtin_oscillator}


def growth_ratios(system: QuantumSystem, k: int, levels: int) -> np.ndarray:
    """Per-level ratios ``|b_{j+1,j}| (E_{j+1}^k - E_j^k) / E_j^k`` for ``levels - 1`` pairs."""
    if levels < 2:
        raise ValueError("need at least two levels")
    b = system.superdiagonal(levels)
    e = system.energies(levels)
    if np.any(e[:-1] <= 0):
        j = system.level(int(np.nonzero(e[:-1] <= 0)[0][0]))
        raise DegenerateSpectrum(f"E_{j} = 0 on the checked range")
    ek = e**k
    return np.abs(b) * (ek[1:] - ek[:-1]) / ek[:-1]


def growth_constant(system: QuantumSystem, k: int, levels: int) -> float:
    """Smallest growth constant ``C`` admissible for the tridiagonal criterion.

    Returns the maximum over the checked pairs of
    ``|b_{j+1,j}| (E_{j+1}^k - E_j^k) / E_j^k``; the caller compares it with a
    certified ``C``.
    """
    return float(growth_ratios(system, k, levels).max())


def domination_surrogate(system: QuantumSystem, levels: int) -> float:
    """Operator-norm surrogate ``2 max|b|`` for a bounded tridiagonal coupling."""
    return 2.0 * float(np.abs(system.superdiagonal(levels)).max())


def check_certificate(system: QuantumSystem) -> None:
    """Raise :class:`CertificateViolation` if the stored constants fail on the verified range.

    The domination constant is only checked in the bounded case ``k = 1``.
    """
    cert = system.certificate
    ratios = growth_ratios(system, cert.k, cert.verified_up_to)
    bad = np.nonzero(ratios > cert.C * (1 + _CERT_RTOL))[0]
    if len(bad):
        j = system.level(int(bad[0]))
        raise CertificateViolation(
            f"{system.name}: growth ratio {ratios[bad[0]]:.6g} at j={j} exceeds C={cert.C}", level=j
        )
    if cert.k == 1:
        d_min = domination_surrogate(system, cert.verified_up_to)
        if d_min > cert.d * (1 + _CERT_RTOL):
            raise CertificateViolation(f"{system.name}: domination constant d={cert.d} below 2 max|b| = {d_min}")


def _require(cond, msg):
    if not cond:
        raise SchemaError(msg)


def load_system(config: dict | str | Path) -> QuantumSystem:
    """Build a system from a JSON document (dict, JSON text or file path)."""
    if isinstance(config, Path) or (isinstance(config, str) and not config.lstrip().startswith("{")):
        config = json.loads(Path(config).read_text())
    elif isinstance(config, str):
        config = json.loads(config)
    _require(isinstance(config, dict), "system config must be a JSON object")
    for key in ("spectrum", "coupling", "certificate"):
        _require(key in config, f"missing key {key!r}")

    spec = config["spectrum"]
    kind = spec.get("kind")
    _require(kind in SPECTRUM_KINDS, f"spectrum.kind must be one of {SPECTRUM_KINDS}")
    first = spec.get("first_index", {"rotor": 1, "oscillator": 0}.get(kind, 0))
    _require(isinstance(first, int) and first >= 0, "spectrum.first_index must be a nonnegative integer")
    table = None
    if kind == "table":
        energies = spec.get("energies")
        _require(isinstance(energies, list) and len(energies) >= 2, "table spectrum needs an energies list")
        table = tuple(float(e) for e in energies)
        _require(all(math.isfinite(e) and e >= 0 for e in table), "energies must be finite and nonnegative")
        _require(all(a <= b for a, b in zip(table, table[1:])), "energies must be nondecreasing")
    else:
        _require(first == {"rotor": 1, "oscillator": 0}[kind], f"{kind} spectrum has a fixed first_index")
    spectrum = Spectrum(kind, first_index=first, table=table)

    coup = config["coupling"]
    ckind = coup.get("kind", "tridiagonal")
    _require(ckind in ("tridiagonal", "banded"), "coupling.kind must be 'tridiagonal' or 'banded'")
    if ckind == "tridiagonal":
        sup = coup.get("super")
        if isinstance(sup, str):
            _require(sup in CLOSED_COUPLINGS, f"coupling.super must be one of {CLOSED_COUPLINGS} or a list")
            coupling = Coupling(closed=sup)
        else:
            _require(isinstance(sup, list), "coupling.super must be a list of numbers")
            coupling = Coupling(diagonals=(tuple(float(b) for b in sup),))
    else:
        diags = coup.get("diagonals")
        _require(isinstance(diags, list) and diags, "banded coupling needs a 'diagonals' list")
        coupling = Coupling(kind="banded", diagonals=tuple(tuple(float(b) for b in d) for d in diags))

    c = config["certificate"]
    try:
        cert = Certificate(k=int(c["k"]), C=float(c["C"]), d=float(c["d"]), verified_up_to=int(c["verified_up_to"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"bad certificate: {exc}") from None
    _require(cert.k >= 1 and cert.C > 0 and cert.d > 0, "certificate needs k >= 1, C > 0, d > 0")
    _require(cert.verified_up_to >= 2, "certificate.verified_up_to must be at least 2")
    _require(cert.verified_up_to <= spectrum.size, "tabulated spectrum shorter than verified_up_to")
    if not coupling.closed:
        _require(len(coupling.diagonals[0]) >= cert.verified_up_to - 1, "coupling table shorter than verified_up_to - 1")

    system = QuantumSystem(name=str(config.get("name", kind)), spectrum=spectrum, coupling=coupling, certificate=cert)
    if coupling.tridiagonal:
        check_certificate(system)
    return system


def system_to_dict(system: QuantumSystem) -> dict:
    sp, cp, ct = system.spectrum, system.coupling, system.certificate
    spectrum = {"kind": sp.kind, "first_index": sp.first_index}
    if sp.table is not None:
        spectrum["energies"] = list(sp.table)
    if cp.closed:
        coupling = {"kind": "tridiagonal", "super": cp.closed}
    elif cp.tridiagonal:
        coupling = {"kind": "tridiagonal", "super": list(cp.diagonals[0])}
    else:
        coupling = {"kind": "banded", "diagonals": [list(d) for d in cp.diagonals]}
    return {
        "name": system.name,
        "spectrum": spectrum,
        "coupling": coupling,
        "certificate": {"k": ct.k, "C": ct.C, "d": ct.d, "verified_up_to": ct.verified_up_to},
    }


def resolve_system(spec: str) -> QuantumSystem:
    """Builtin name or path to a JSON system file."""
    if spec in BUILTINS:
        return BUILTINS[spec]()
    return load_system(Path(spec))
