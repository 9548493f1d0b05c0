"""Truncation-size estimates for weakly coupled systems.

Two families of estimates live here.  The *rough* one follows from the energy
growth estimate ``<H0>(T) <= exp(C K) <H0>(0)`` and the tail inequality
``||psi_tail||^2 <= <H0>_tail / E_N``; it is valid for any bounded coupling
but grows like ``exp(C K)``.  The *refined* one uses the tridiagonal
structure of the coupling: a level ``p`` steps above the initial one is only
reached at order ``p`` of the Dyson series, so its amplitude is at most
``(2 c K)**p / p!``.

All factorials and powers are handled as sums of logarithms.  Quantities that
do not fit in a double raise :class:`BoundOverflow` carrying their log10.
"""

from __future__ import annotations

import math
import sys
from dataclasses import asdict, dataclass, field

from .errors import BoundOverflow, DegenerateSpectrum
from .system import QuantumSystem, domination_surrogate

LOG_MAX = math.log(sys.float_info.max)
LN10 = math.log(10.0)

# Sizes quoted for the built-ins at K = 3, eps = 1e-4; used to flag discrepancies.
REFERENCE_ROUGH_SIZES = {"rotor": 2.7e6, "oscillator": 2.38e15}
REFERENCE_RTOL = 0.01

# refined estimates are scanned upward from N = 1; this caps runaway inputs
MAX_SCAN = 10_000_000


@dataclass(frozen=True)
class FieldBudget:
    """L1 budget ``K >= int_0^T |u| dt`` of a control field, with its horizon."""

    K: float
    T: float = math.pi

    def __post_init__(self):
        if not self.K >= 0:
            raise ValueError(f"K must be nonnegative, got {self.K}")


def _exp_checked(log_value: float, what: str) -> float:
    if log_value > LOG_MAX:
        raise BoundOverflow(f"{what} exceeds the double range", log10=log_value / LN10)
    return math.exp(log_value)


def _log(x: float) -> float:
    return math.log(x) if x > 0 else -math.inf


def energy_growth_bound(C: float, K: float, h0_init: float) -> float:
    """Upper bound ``exp(C K) h0_init`` on ``<H0>`` after a field of L1 norm ``K``."""
    if min(C, K, h0_init) < 0:
        raise ValueError("C, K and h0_init must be nonnegative")
    if h0_init == 0:
        return 0.0
    return _exp_checked(C * K + math.log(h0_init), "energy growth bound")


def tail_norm_bound(h0_tail_expect: float, E_N: float) -> float:
    """Bound ``<H0>_tail / E_N`` on the squared norm outside the first levels."""
    if E_N <= 0:
        raise DegenerateSpectrum(f"cutoff energy must be positive, got {E_N}")
    return h0_tail_expect / E_N


def _rough_log(system: QuantumSystem, K: float, h0_init: float) -> float:
    # log of d K sqrt(h0) exp(C K / 2)
    cert = system.certificate
    return _log(cert.d) + _log(K) + 0.5 * _log(h0_init) + 0.5 * cert.C * K


def rough_error_bound(system: QuantumSystem, budget: FieldBudget, h0_init: float, N: int) -> float:
    """Bound ``d K sqrt(h0_init) exp(C K / 2) / sqrt(E_N)`` on the truncation error.

    ``N`` is a level index in the system's own numbering, so for the rotor
    ``E_10 = 100``.
    """
    if h0_init <= 0:
        raise ValueError("h0_init must be positive")
    E_N = system.spectrum.energy(N)
    if E_N <= 0:
        raise DegenerateSpectrum(f"E_{N} = {E_N} is not positive")
    if budget.K == 0:
        return 0.0
    return _exp_checked(_rough_log(system, budget.K, h0_init) - 0.5 * math.log(E_N), "rough error bound")


def rough_threshold_log10(system: QuantumSystem, budget: FieldBudget, h0_init: float, eps: float) -> float:
    """log10 of the energy ``h0_init (K d exp(C K/2) / eps)**2`` the cutoff level must exceed."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    return 2.0 * (_rough_log(system, budget.K, h0_init) - math.log(eps)) / LN10


def rough_dimension(system: QuantumSystem, budget: FieldBudget, h0_init: float, eps: float) -> int:
    """Smallest ``N`` with ``E_N > h0_init (K d exp(C K/2) / eps)**2``.

    Closed-form spectra are inverted exactly; tables are scanned.  Raises
    :class:`BoundOverflow` (with the log10 of the threshold) when the threshold
    itself is not representable.
    """
    log10_thr = rough_threshold_log10(system, budget, h0_init, eps)
    if log10_thr * LN10 > LOG_MAX:
        raise BoundOverflow("rough dimension threshold exceeds the double range", log10=log10_thr)
    threshold = 10.0**log10_thr if log10_thr > -math.inf else 0.0
    return system.spectrum.index_above(threshold)


def quoted_rough_size_log10(kind: str, K: float, eps: float) -> float:
    """log10 of the closed-form sizes quoted for the built-ins.

    rotor: ``K exp(3K/2) / eps``; oscillator: ``K**2 exp(16 K) / eps**2``.
    These are kept exactly as quoted even though the rotor one carries
    ``exp(C K)`` where the rough inversion gives ``exp(C K / 2)``.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if kind == "rotor":
        log_value = _log(K) + 1.5 * K - math.log(eps)
    elif kind == "oscillator":
        log_value = 2 * _log(K) + 16 * K - 2 * math.log(eps)
    else:
        raise ValueError(f"no quoted formula for {kind!r}")
    return log_value / LN10


def quoted_rough_size(kind: str, K: float, eps: float) -> float:
    log10 = quoted_rough_size_log10(kind, K, eps)
    if log10 == -math.inf:
        return 0.0
    return _exp_checked(log10 * LN10, "quoted rough size")


def log_refined_tail_bound(p: int, K: float, c: float) -> float:
    """Natural log of ``(2 c K)**p / p!``."""
    if p < 0 or K < 0 or c < 0:
        raise ValueError("p, K and c must be nonnegative")
    if p == 0:
        return 0.0
    return p * _log(2.0 * c * K) - math.lgamma(p + 1)


def refined_tail_bound(p: int, K: float, c: float) -> float:
    """Amplitude bound ``(2 c K)**p / p!`` on the level ``p`` steps above the initial one."""
    return _exp_checked(log_refined_tail_bound(p, K, c), "refined tail bound")


def log_bounded_condition(N: int, K: float, eps: float, c: float = 0.5) -> float:
    """log of ``c K (2 c K)**N / N!`` minus ``log eps``; the condition holds iff <= 0.

    With ``c = 1/2`` this is the rotor condition ``N! >= K**(N+1) / (2 eps)``.
    """
    return math.log(c) + _log(K) + log_refined_tail_bound(N, K, c) - math.log(eps)


def log_oscillator_condition(N: int, K: float, eps: float) -> float:
    """log of ``sqrt((N+1)/(N-1)!) 2**(2N+1/2) K**(N+1)`` minus ``log eps``; holds iff < 0."""
    return (
        0.5 * (math.log(N + 1) - math.lgamma(N))
        + (2 * N + 0.5) * math.log(2.0)
        + (N + 1) * _log(K)
        - math.log(eps)
    )


def _first_true(pred) -> int:
    for n in range(1, MAX_SCAN):
        if pred(n):
            return n
    raise BoundOverflow("refined dimension scan exhausted", log10=math.log10(MAX_SCAN))


def refined_dimension_bounded(K: float, eps: float, c: float) -> int:
    """Smallest ``N >= 1`` with ``c K (2 c K)**N / N! <= eps`` for a tridiagonal coupling of size ``c``."""
    if eps <= 0 or K < 0:
        raise ValueError("need eps > 0 and K >= 0")
    return _first_true(lambda n: log_bounded_condition(n, K, eps, c) <= 0)


def refined_dimension_rotor(K: float, eps: float) -> int:
    """Smallest ``N`` with ``N! >= K**(N+1) / (2 eps)``."""
    return refined_dimension_bounded(K, eps, 0.5)


def refined_dimension_oscillator(K: float, eps: float) -> int:
    """Smallest ``N >= 1`` with ``sqrt((N+1)/(N-1)!) 2**(2N+1/2) K**(N+1) < eps``."""
    if eps <= 0 or K < 0:
        raise ValueError("need eps > 0 and K >= 0")
    return _first_true(lambda n: log_oscillator_condition(n, K, eps) < 0)


@dataclass
class TruncationReport:
    system: str
    eps: float
    K: float
    h0_init: float
    energy_bound: float | None
    energy_bound_log10: float
    rough_N: int | str | None
    rough_threshold_log10: float
    rough_formula_value: float | None
    rough_formula_log10: float | None
    rough_formula_reference: float | None
    rough_formula_matches_reference: bool | None
    refined_N: int | None
    refined_condition_lhs_at_N: float | None
    refined_condition_lhs_at_N_minus_1: float | None
    provenance: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    @property
    def overflow(self) -> bool:
        return self.rough_N == "overflow"

    def to_dict(self) -> dict:
        # JSON has no infinities; log10 of a zero bound becomes null
        return {k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in asdict(self).items()}


def _refined(system: QuantumSystem, K: float, eps: float):
    """(N, lhs(N), lhs(N-1), provenance) for the refined estimate, or None if unavailable."""
    if system.spectrum.kind == "oscillator" and system.coupling.closed == "closed:oscillator":
        n = refined_dimension_oscillator(K, eps)
        lhs = lambda m: math.exp(log_oscillator_condition(m, K, eps)) * eps  # noqa: E731
        return n, lhs, "oscillator-refined"
    if not system.coupling.tridiagonal or system.certificate.k != 1:
        return None
    c = 0.5 if system.coupling.closed == "closed:rotor" else domination_surrogate(system, system.certificate.verified_up_to) / 2
    n = refined_dimension_bounded(K, eps, c)
    lhs = lambda m: math.exp(log_bounded_condition(m, K, eps, c)) * eps  # noqa: E731
    return n, lhs, "dyson-refined"


def full_report(system: QuantumSystem, budget: FieldBudget, psi0_index: int, eps: float) -> TruncationReport:
    """Rough and refined truncation sizes for a basis-state initial condition ``|phi_psi0_index>``."""
    K = budget.K
    cert = system.certificate
    h0_init = system.spectrum.energy(psi0_index)
    notes = []
    provenance = {}

    log_energy = cert.C * K + _log(h0_init)
    energy_bound = math.exp(log_energy) if log_energy <= LOG_MAX else None
    provenance["energy_bound"] = "gronwall"

    log10_thr = rough_threshold_log10(system, budget, h0_init, eps)
    try:
        rough_N = rough_dimension(system, budget, h0_init, eps)
    except BoundOverflow:
        rough_N = "overflow"
    provenance["rough_N"] = "gronwall-tail"
    if cert.k != 1:
        notes.append("rough estimate assumes a bounded coupling (k = 1); certificate has k = %d" % cert.k)

    formula = formula_log10 = reference = matches = None
    if system.spectrum.kind in REFERENCE_ROUGH_SIZES and system.coupling.closed:
        kind = system.spectrum.kind
        formula_log10 = quoted_rough_size_log10(kind, K, eps)
        formula = 10.0**formula_log10 if formula_log10 * LN10 <= LOG_MAX else None
        provenance["rough_formula_value"] = "quoted-closed-form"
        if K == 3 and eps == 1e-4:
            reference = REFERENCE_ROUGH_SIZES[kind]
            matches = abs(formula_log10 - math.log10(reference)) <= math.log10(1 + REFERENCE_RTOL)
            if not matches:
                notes.append(
                    f"quoted {kind} formula evaluates to 10^{formula_log10:.4f}, "
                    f"reference value is {reference:.3g}: mismatch"
                )

    refined_N = lhs_n = lhs_prev = None
    refined = _refined(system, K, eps) if K > 0 else None
    if refined is not None:
        refined_N, lhs, provenance["refined_N"] = refined
        lhs_n = lhs(refined_N)
        lhs_prev = lhs(refined_N - 1) if refined_N > 1 else None
    elif K == 0 and system.coupling.tridiagonal:
        # nothing leaves the initial level
        refined_N, lhs_n = 1, 0.0
        provenance["refined_N"] = "zero-field"
    else:
        notes.append("refined estimate needs a bounded tridiagonal coupling")

    return TruncationReport(
        system=system.name,
        eps=eps,
        K=K,
        h0_init=h0_init,
        energy_bound=energy_bound,
        energy_bound_log10=log_energy / LN10,
        rough_N=rough_N,
        rough_threshold_log10=log10_thr,
        rough_formula_value=formula,
        rough_formula_log10=formula_log10,
        rough_formula_reference=reference,
        rough_formula_matches_reference=matches,
        refined_N=refined_N,
        refined_condition_lhs_at_N=lhs_n,
        refined_condition_lhs_at_N_minus_1=lhs_prev,
        provenance=provenance,
        notes=notes,
    )
