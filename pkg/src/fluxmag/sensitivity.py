"""Closed-form sensitivity budget of a pulsed NV magnetometer.

The minimum detectable field per unit bandwidth is

    eta = A n_f / (G alpha E_F gamma_e dm exp(-(tau/T_coh)^p) C sqrt(N))
          * sqrt(t_m + tau) / tau

with ``gamma_e`` in rad/(s T).  :func:`improvement_ledger` splits the ratio of
two budgets into the multiplicative contribution of each factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from scipy.optimize import minimize_scalar

from .constants import DEFAULT_CONSTANTS, PhysicalConstants
from .params import ProtocolParams
from .spindyn import decay_envelope


def evaluate_sensitivity(p: ProtocolParams, consts: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    """Sensitivity in T/sqrt(Hz) for the parameter set ``p``."""
    p.check()
    envelope = decay_envelope(p.tau, p.T_coh, p.p)
    response = p.G * p.alpha * p.E_F * consts.gamma_e * p.delta_ms * envelope * p.C * math.sqrt(p.N)
    return p.A * p.n_f / response * math.sqrt(p.t_m + p.tau) / p.tau


def shot_noise_sensitivity(p: ProtocolParams, consts: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    """Sensitivity with the excess-noise ratio n_f set to 1."""
    return evaluate_sensitivity(p.replace(n_f=1.0), consts)


def duty_cycle(p: ProtocolParams) -> float:
    """Fraction of each measurement cycle spent sensing, tau / (t_m + tau)."""
    return p.tau / (p.t_m + p.tau)


def optimal_tau(p: ProtocolParams, consts: PhysicalConstants = DEFAULT_CONSTANTS,
                bounds: tuple[float, float] | None = None) -> float:
    """Free-evolution time minimising the sensitivity, others held fixed."""
    lo, hi = bounds if bounds is not None else (1e-3 * p.T_coh, 10 * p.T_coh)
    res = minimize_scalar(
        lambda log_tau: math.log(evaluate_sensitivity(p.replace(tau=math.exp(log_tau)), consts)),
        bounds=(math.log(lo), math.log(hi)),
        method="bounded",
        options={"xatol": 1e-10},
    )
    return math.exp(res.x)


def _budget_terms(p: ProtocolParams) -> dict[str, float]:
    # Multiplicative pieces of eta; keys name the parameter each row is credited to.
    return {
        "A": p.A,
        "n_f": p.n_f,
        "G": 1 / p.G,
        "alpha": 1 / p.alpha,
        "E_F": 1 / p.E_F,
        "delta_ms": 1 / p.delta_ms,
        "T_coh": 1 / decay_envelope(p.tau, p.T_coh, p.p),
        "N": 1 / math.sqrt(p.N),
        "C": 1 / p.C,
        "tau": math.sqrt(p.t_m + p.tau) / p.tau,
    }


# Parameters entering each term, for reporting which inputs drove a row.
_TERM_INPUTS = {
    "T_coh": ("T_coh", "p", "tau"),
    "tau": ("tau", "t_m"),
}

LEDGER_ORDER = ("G", "E_F", "T_coh", "N", "C", "tau", "alpha", "A", "n_f", "delta_ms")


def _round_sig(x: float, sig: int = 2) -> float:
    if x == 0:
        return 0.0
    return round(x, sig - 1 - math.floor(math.log10(abs(x))))


@dataclass(frozen=True)
class ImprovementLedger:
    """Per-factor sensitivity enhancements between two configurations.

    ``factors`` credits each multiplicative term of the budget to one
    parameter: the coherence row carries the whole decay-envelope change
    (T_coh, p and tau together) and the tau row carries the duty-cycle term
    sqrt(t_m + tau)/tau.  Their product equals ``total`` exactly.
    ``isolated`` holds the ratio obtained by changing each differing
    parameter alone with all others at their present values.
    """

    factors: dict[str, float]
    isolated: dict[str, float]
    drivers: dict[str, tuple[str, ...]]
    total: float
    eta_present: float
    eta_improved: float
    rounded_product: float = field(default=float("nan"))


def improvement_ledger(present: ProtocolParams, improved: ProtocolParams,
                       consts: PhysicalConstants = DEFAULT_CONSTANTS) -> ImprovementLedger:
    eta_p = evaluate_sensitivity(present, consts)
    eta_i = evaluate_sensitivity(improved, consts)
    before, after = _budget_terms(present), _budget_terms(improved)

    changed = [n for n in ProtocolParams.field_names() if getattr(present, n) != getattr(improved, n)]
    factors, drivers = {}, {}
    for key in LEDGER_ORDER:
        inputs = _TERM_INPUTS.get(key, (key,))
        moved = tuple(n for n in inputs if n in changed)
        if not moved:
            continue
        factors[key] = before[key] / after[key]
        drivers[key] = moved

    isolated = {
        n: eta_p / evaluate_sensitivity(present.replace(**{n: getattr(improved, n)}), consts)
        for n in changed
    }
    rounded = math.prod(_round_sig(f) for f in factors.values()) if factors else 1.0
    return ImprovementLedger(
        factors=factors,
        isolated=isolated,
        drivers=drivers,
        total=eta_p / eta_i,
        eta_present=eta_p,
        eta_improved=eta_i,
        rounded_product=rounded,
    )
