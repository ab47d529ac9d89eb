"""Protocol parameter records and their validation.

A :class:`ProtocolParams` holds every quantity entering the sensitivity
budget for one magnetometer configuration.  The reference columns of the
experiment (Ramsey, Ramsey with flux concentrators, flux concentration and
modulation) and the projected improved configuration are provided as module
constants.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace
from typing import NamedTuple

RAMSEY_A = 1.0
SPIN_ECHO_A = math.pi / 2
ALPHA_DEFAULT = 0.5774  # 1/sqrt(3) rounded as tabulated

FIELD_UNITS = {
    "A": "",
    "G": "",
    "alpha": "",
    "E_F": "",
    "C": "",
    "N": "photons",
    "T_coh": "s",
    "p": "",
    "tau": "s",
    "t_m": "s",
    "n_f": "",
    "delta_ms": "",
}


class Violation(NamedTuple):
    field: str
    rule: str
    value: float

    def __str__(self):
        return f"{self.field}: {self.rule} (got {self.value!r})"


class ParameterError(ValueError):
    """Raised when a parameter record fails validation."""

    def __init__(self, violations, where=""):
        self.violations = list(violations)
        prefix = f"{where}: " if where else ""
        super().__init__(prefix + "; ".join(str(v) for v in self.violations))


@dataclass(frozen=True)
class ProtocolParams:
    """Inputs of the sensitivity budget for one configuration (SI units).

    Attributes
    ----------
    A : protocol coefficient, 1 for Ramsey and pi/2 for spin echo.
    G : flux-concentrator magnification.
    alpha : projection of the field onto the NV axis.
    E_F : modulation efficiency (1 when the field is not modulated).
    C : measurement contrast.
    N : detected photons per measurement.
    T_coh : coherence time (T2* for Ramsey, T2 for spin echo), s.
    p : stretched exponent of the decay envelope.
    tau : free-evolution time, s.
    t_m : overhead time per measurement (initialisation, readout, delays), s.
    n_f : ratio of total noise to photon shot noise.
    delta_ms : spin quantum number difference of the interferometer states.
    """

    A: float = SPIN_ECHO_A
    G: float = 85.1
    alpha: float = ALPHA_DEFAULT
    E_F: float = 0.096
    C: float = 4.5e-3
    N: float = 7.0e9
    T_coh: float = 102e-6
    p: float = 1.24
    tau: float = 92.7e-6
    t_m: float = 140e-6
    n_f: float = 19.2
    delta_ms: float = 1.0

    def replace(self, **changes) -> "ProtocolParams":
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    @property
    def is_ramsey(self) -> bool:
        return math.isclose(self.A, RAMSEY_A)

    def check(self, where="") -> "ProtocolParams":
        """Return ``self`` or raise :class:`ParameterError` listing all violations."""
        report = validate_params(self)
        if report:
            raise ParameterError(report, where)
        return self


def validate_params(p: ProtocolParams) -> list[Violation]:
    """List every invariant violated by ``p``; an empty list means valid."""
    out = []

    def need(ok, name, rule):
        if not ok:
            out.append(Violation(name, rule, getattr(p, name)))

    for name in FIELD_UNITS:
        v = getattr(p, name)
        if not isinstance(v, (int, float)) or not math.isfinite(v):
            out.append(Violation(name, f"{name} finite", v))
    if out:
        return out

    need(math.isclose(p.A, RAMSEY_A) or math.isclose(p.A, SPIN_ECHO_A),
         "A", "A ∈ {1, π/2}")
    need(p.G >= 1, "G", "G ≥ 1")
    need(0 < p.alpha <= 1, "alpha", "0 < alpha ≤ 1")
    need(0 < p.E_F <= 1, "E_F", "0 < E_F ≤ 1")
    need(0 < p.C < 1, "C", "C ∈ (0, 1)")
    need(p.N > 0, "N", "N > 0")
    need(p.T_coh > 0, "T_coh", "T_coh > 0")
    need(p.p > 0, "p", "p > 0")
    need(p.tau > 0, "tau", "tau > 0")
    need(p.t_m >= 0, "t_m", "t_m ≥ 0")
    need(p.n_f >= 1, "n_f", "n_f ≥ 1")
    need(p.delta_ms > 0, "delta_ms", "delta_ms > 0")
    return out


# Reference parameter sets.  The Ramsey columns use T2* as T_coh and p = 1.
TABLE_S1 = {
    "ramsey": ProtocolParams(
        A=RAMSEY_A, G=1.0, E_F=1.0, N=7.6e9, C=1.2e-2, T_coh=1.13e-6,
        tau=0.7e-6, t_m=115e-6, n_f=12.2, p=1.0,
    ),
    "ramsey_fc": ProtocolParams(
        A=RAMSEY_A, G=85.1, E_F=1.0, N=7.0e9, C=9.2e-3, T_coh=1.13e-6,
        tau=0.7e-6, t_m=115e-6, n_f=15.6, p=1.0,
    ),
    "fcm": ProtocolParams(),
}

TABLE_S3_PRESENT = TABLE_S1["fcm"]
TABLE_S3_IMPROVED = TABLE_S3_PRESENT.replace(
    G=527.0, E_F=0.568, T_coh=694e-6, N=2.6e10, C=1.2e-2, tau=333.6e-6,
)

REFERENCE_SETS = {
    **TABLE_S1,
    "present": TABLE_S3_PRESENT,
    "improved": TABLE_S3_IMPROVED,
}


def reference_defaults(name: str) -> ProtocolParams:
    """Defaults used to fill omitted keys of a named parameter set."""
    return REFERENCE_SETS.get(name, TABLE_S1["fcm"])
