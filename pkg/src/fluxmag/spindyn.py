"""Signal models for Ramsey and spin-echo sensing.

Pulses are ideal and instantaneous.  Time runs from the end of the first
pi/2 pulse (t = 0) to the start of the last one (t = tau); a spin echo
flips the sign of the accumulated phase at tau/2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np
from scipy.integrate import simpson
from scipy.optimize import least_squares

from .constants import DEFAULT_CONSTANTS, PhysicalConstants
from .params import ProtocolParams

RAMSEY = "ramsey"
SPIN_ECHO = "spin_echo"

# 14N hyperfine splitting of the ms = +-1 lines.
HYPERFINE_14N = 2 * math.pi * 2.16e6  # rad/s

MIN_INTERVALS_PER_HALF = 256
POINTS_PER_PERIOD = 64


def decay_envelope(tau, T_coh: float, p: float):
    """Stretched-exponential coherence envelope exp(-(tau/T_coh)^p)."""
    if not T_coh > 0:
        raise ValueError(f"T_coh must be positive (got {T_coh})")
    if not p > 0:
        raise ValueError(f"p must be positive (got {p})")
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0):
        raise ValueError("tau must be non-negative")
    out = np.exp(-((tau / T_coh) ** p))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class PulseSequence:
    """A Ramsey (pi/2 - pi/2) or spin-echo (pi/2 - pi - pi/2) sequence.

    ``readout_phase`` is +1 for a final (pi/2)_x and -1 for (pi/2)_-x.
    """

    kind: Literal["ramsey", "spin_echo"]
    tau: float
    readout_phase: int = 1

    def __post_init__(self):
        if self.kind not in (RAMSEY, SPIN_ECHO):
            raise ValueError(f"unknown sequence kind {self.kind!r}")
        if not self.tau > 0:
            raise ValueError(f"tau must be positive (got {self.tau})")
        if self.readout_phase not in (1, -1):
            raise ValueError("readout_phase must be +1 or -1")

    def switching(self, t):
        """Sign s(t) with which the field at time t adds to the phase."""
        t = np.asarray(t, dtype=float)
        if self.kind == RAMSEY:
            return np.ones_like(t)
        return np.where(t < self.tau / 2, 1.0, -1.0)


def echo_grid(tau: float, f_mod: float | None = None,
              points_per_period: int = POINTS_PER_PERIOD,
              min_intervals: int = MIN_INTERVALS_PER_HALF) -> np.ndarray:
    """Time grid on [0, tau] suited to :func:`echo_phase`.

    Each half has an even number of intervals (Simpson), at least
    ``min_intervals`` and at least ``points_per_period`` per modulation
    period; tau/2 is always a node.
    """
    n = min_intervals
    if f_mod is not None and f_mod > 0:
        n = max(n, math.ceil(points_per_period * f_mod * tau / 2))
    n += n % 2
    first = np.linspace(0.0, tau / 2, n + 1)
    second = np.linspace(tau / 2, tau, n + 1)
    return np.concatenate([first, second[1:]])


@dataclass(frozen=True, eq=False)
class FieldWaveform:
    """Field B(t) in tesla sampled on a strictly increasing grid t (s)."""

    t: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        B = np.asarray(self.B, dtype=float)
        if t.ndim != 1 or t.shape != B.shape:
            raise ValueError("t and B must be 1-D arrays of equal length")
        if t.size < 3 or np.any(np.diff(t) <= 0):
            raise ValueError("time grid must be strictly increasing with >= 3 points")
        if not np.all(np.isfinite(B)):
            raise ValueError("waveform contains non-finite values")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "B", B)

    @classmethod
    def from_function(cls, func: Callable, tau: float, f_mod: float | None = None) -> "FieldWaveform":
        t = echo_grid(tau, f_mod)
        return cls(t, np.broadcast_to(func(t), t.shape).astype(float))

    @classmethod
    def constant(cls, value: float, tau: float) -> "FieldWaveform":
        t = echo_grid(tau)
        return cls(t, np.full_like(t, value))

    def __add__(self, other):
        _same_grid(self, other)
        return FieldWaveform(self.t, self.B + other.B)

    def __mul__(self, k):
        return FieldWaveform(self.t, self.B * float(k))

    __rmul__ = __mul__

    def mean(self) -> float:
        """Time average over the sampled span (trapezoid rule)."""
        return float(np.trapezoid(self.B, self.t) / (self.t[-1] - self.t[0]))


def _same_grid(a, b):
    if a.t.shape != b.t.shape or not np.array_equal(a.t, b.t):
        raise ValueError("waveforms are sampled on different grids")


def _half_integral(t, B, lo, hi):
    # Integrate B over [lo, hi], inserting the end points by interpolation if absent.
    inside = (t > lo) & (t < hi)
    ts = np.concatenate([[lo], t[inside], [hi]])
    Bs = np.concatenate([[np.interp(lo, t, B)], B[inside], [np.interp(hi, t, B)]])
    return simpson(Bs, x=ts)


def echo_phase(waveform: FieldWaveform, seq: PulseSequence,
               gamma_eff: float = DEFAULT_CONSTANTS.gamma_e) -> float:
    """Accumulated phase gamma_eff * integral_0^tau s(t) B(t) dt in radians.

    The integral is done by composite Simpson on each half of the sequence
    separately, so the sign switch of the echo never falls inside a panel.
    """
    if not gamma_eff > 0:
        raise ValueError("gamma_eff must be positive")
    t, B, tau = waveform.t, waveform.B, seq.tau
    span_tol = 1e-12 * tau
    if t[0] > span_tol or t[-1] < tau - span_tol:
        raise ValueError(
            f"waveform covers [{t[0]:.6g}, {t[-1]:.6g}] s but the sequence needs [0, {tau:.6g}] s"
        )
    if seq.kind == RAMSEY:
        total = _half_integral(t, B, 0.0, tau / 2) + _half_integral(t, B, tau / 2, tau)
    else:
        total = _half_integral(t, B, 0.0, tau / 2) - _half_integral(t, B, tau / 2, tau)
    return gamma_eff * float(total)


def hyperfine_triplet(center: float, splitting: float = HYPERFINE_14N) -> np.ndarray:
    """Angular frequencies of the three 14N hyperfine lines around ``center``."""
    return center + splitting * np.array([-1.0, 0.0, 1.0])


def ramsey_signal(t, C: float, T2_star: float, triplet, phases=None):
    """Free-induction decay C exp(-t/T2*) (1/3) sum_i cos(w_i t + phi_i)."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be non-negative")
    if not T2_star > 0:
        raise ValueError("T2_star must be positive")
    w = np.asarray(triplet, dtype=float)
    if w.shape != (3,):
        raise ValueError("triplet must hold three angular frequencies")
    phi = np.zeros(3) if phases is None else np.asarray(phases, dtype=float)
    osc = np.cos(np.multiply.outer(t, w) + phi).mean(axis=-1)
    out = C * np.exp(-t / T2_star) * osc
    return float(out) if out.ndim == 0 else out


# -- fringes -----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FringeCurve:
    """Readout signal S versus applied field B_a (T)."""

    B_a: np.ndarray
    S: np.ndarray
    response: float = float("nan")  # rad per tesla of applied field

    def __post_init__(self):
        B = np.asarray(self.B_a, dtype=float)
        S = np.asarray(self.S, dtype=float)
        if B.ndim != 1 or B.shape != S.shape:
            raise ValueError("B_a and S must be 1-D arrays of equal length")
        if np.any(np.diff(B) <= 0):
            raise ValueError("field grid must be strictly increasing")
        object.__setattr__(self, "B_a", B)
        object.__setattr__(self, "S", S)


def modulated_shape(tau: float, E_F: float, phase: float = 0.0) -> FieldWaveform:
    """Per-unit waveform 1 + E_F sin(2 pi t / tau + phase) of a sine-modulated field."""
    return FieldWaveform.from_function(
        lambda t: 1.0 + E_F * np.sin(2 * np.pi * t / tau + phase), tau, 1 / tau
    )


def response_per_tesla(params: ProtocolParams, seq: PulseSequence,
                       consts: PhysicalConstants = DEFAULT_CONSTANTS,
                       shape: FieldWaveform | None = None) -> float:
    """Echo phase per tesla of applied field, in rad/T.

    Ramsey sees the static field G alpha B_a.  A spin echo sees
    G alpha B_a times ``shape`` (normalised so that 1 is the equilibrium
    field); by default the synchronised sine with depth E_F.
    """
    if seq.kind == RAMSEY:
        wf = FieldWaveform.constant(params.G * params.alpha, seq.tau)
    else:
        if shape is None:
            shape = modulated_shape(seq.tau, params.E_F)
        wf = params.G * params.alpha * shape
    return echo_phase(wf, seq, consts.gamma_e * params.delta_ms)


def fringe_curve(params: ProtocolParams, seq: PulseSequence, B_a,
                 consts: PhysicalConstants = DEFAULT_CONSTANTS,
                 shape: FieldWaveform | None = None,
                 differential: bool = True) -> FringeCurve:
    """Readout S(B_a) = D C exp(-(tau/T_coh)^p) sin(phase(B_a)).

    With ``differential`` the two readouts with opposite final pulse phase
    are subtracted (D = 2); otherwise D is the sequence's readout sign.
    """
    params.check()
    kappa = response_per_tesla(params, seq, consts, shape)
    D = 2.0 if differential else float(seq.readout_phase)
    amp = D * params.C * decay_envelope(seq.tau, params.T_coh, params.p)
    B_a = np.asarray(B_a, dtype=float)
    return FringeCurve(B_a, amp * np.sin(kappa * B_a), kappa)


@dataclass(frozen=True)
class SlopeResult:
    value: float  # |dS/dB| in 1/T
    location: float  # field at the maximum, T
    fitted: bool = False


def max_slope(curve: FringeCurve, fit: bool = False) -> SlopeResult:
    """Largest |dS/dB| of a fringe.

    By default central differences on the samples; with ``fit`` a sinusoid
    a sin(k B + phi) + c is fitted and a*k returned.
    """
    B, S = curve.B_a, curve.S
    if B.size < 5:
        raise ValueError("need at least 5 points to estimate a slope")
    if np.ptp(S) <= 1e-14 * max(1.0, np.max(np.abs(S))):
        raise ValueError("no fringe: the curve is constant")
    slope = np.gradient(S, B, edge_order=2)
    i = int(np.argmax(np.abs(slope)))
    if not fit:
        return SlopeResult(float(abs(slope[i])), float(B[i]))

    # Frequency guess from the central-difference extremum and the amplitude.
    a0 = np.ptp(S) / 2
    k0 = abs(slope[i]) / a0 if a0 > 0 else 1.0
    phi0 = -k0 * B[i]
    x0 = np.array([a0, k0, phi0, np.mean(S)])

    def resid(x):
        return x[0] * np.sin(x[1] * B + x[2]) + x[3] - S

    res = least_squares(resid, x0, method="lm", x_scale="jac", max_nfev=2000)
    a, k, phi, _ = res.x
    loc = (np.round((k * B[i] + phi) / np.pi) * np.pi - phi) / k
    return SlopeResult(float(abs(a * k)), float(loc), True)


# -- decay fitting -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DecayCurve:
    t: np.ndarray
    S: np.ndarray
    sigma: np.ndarray | None = None

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        S = np.asarray(self.S, dtype=float)
        if t.ndim != 1 or t.shape != S.shape:
            raise ValueError("t and S must be 1-D arrays of equal length")
        if np.any(np.diff(t) <= 0):
            raise ValueError("time grid must be strictly increasing")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(S))):
            raise ValueError("decay curve contains non-finite values")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "S", S)
        if self.sigma is not None:
            sig = np.broadcast_to(np.asarray(self.sigma, dtype=float), t.shape).copy()
            if np.any(sig <= 0):
                raise ValueError("sigma must be positive")
            object.__setattr__(self, "sigma", sig)


@dataclass
class FitResult:
    model: str
    params: dict[str, float]
    stderr: dict[str, float]
    converged: bool
    nfev: int
    cost: float
    message: str = ""
    covariance: np.ndarray | None = field(default=None, repr=False)


class FitError(RuntimeError):
    """The decay fit did not converge; ``best`` holds the last iterate."""

    def __init__(self, message, best: FitResult | None = None):
        super().__init__(message)
        self.best = best


MAX_FIT_ITERATIONS = 200
FIT_XTOL = 1e-10

_MODEL_PARAMS = {
    "exponential": ("amplitude", "T_coh"),
    "stretched": ("amplitude", "T_coh", "p"),
    "triplet": ("amplitude", "T_coh", "omega", "splitting"),
}


def _model(name, x, t):
    """Model values and analytic Jacobian in the scaled time t."""
    if name == "exponential":
        a, T = x
        e = np.exp(-t / T)
        return a * e, np.column_stack([e, a * e * t / T**2])
    if name == "stretched":
        a, T, p = x
        u = np.clip(t / T, 1e-300, None)
        up = u**p
        e = np.exp(-up)
        dT = a * e * p * up / T
        dp = -a * e * up * np.log(u)
        return a * e, np.column_stack([e, dT, dp])
    a, T, w, d = x
    e = np.exp(-t / T)
    k = np.array([-1.0, 0.0, 1.0])
    arg = np.multiply.outer(t, np.ones(3)) * (w + d * k)
    c = np.cos(arg).mean(axis=1)
    s_w = -(np.sin(arg) * t[:, None]).mean(axis=1)
    s_d = -(np.sin(arg) * t[:, None] * k).mean(axis=1)
    return a * e * c, np.column_stack([e * c, a * e * c * t / T**2, a * e * s_w, a * e * s_d])


def _initial_guess(name, t, y, splitting):
    a0 = y[0] if abs(y[0]) > 0 else np.max(np.abs(y))
    # 1/e crossing of the magnitude as a coherence-time guess
    below = np.nonzero(np.abs(y) < abs(a0) / math.e)[0]
    T0 = t[below[0]] if below.size and t[below[0]] > 0 else t[-1] / 2
    if name == "exponential":
        return np.array([a0, T0])
    if name == "stretched":
        return np.array([a0, T0, 1.0])

    # Triplet: coarse search over the centre frequency with linear amplitude.
    dt = np.min(np.diff(t))
    w_grid = np.linspace(0, np.pi / dt, 4 * t.size)
    osc = np.cos(np.multiply.outer(w_grid, t)) * (1 + 2 * np.cos(splitting * t)) / 3
    best = (np.inf, None)
    for T in (t[-1] / 8, t[-1] / 4, t[-1] / 2):
        basis = osc * np.exp(-t / T)
        nrm = np.einsum("ij,ij->i", basis, basis)
        a = basis @ y / np.where(nrm > 0, nrm, 1.0)
        ssr = y @ y - a * (basis @ y)
        i = int(np.argmin(ssr))
        if ssr[i] < best[0]:
            best = (ssr[i], np.array([a[i], T, w_grid[i], splitting]))
    return best[1]


def fit_decay(curve: DecayCurve, model: Literal["exponential", "stretched", "triplet"],
              splitting: float = HYPERFINE_14N) -> FitResult:
    """Nonlinear least-squares fit of a coherence decay.

    Levenberg-Marquardt (damped Gauss-Newton) with analytic Jacobians,
    at most 200 iterations and a relative step tolerance of 1e-10.
    Uncertainties are one standard deviation from the covariance matrix;
    without per-point sigma the residual variance sets the noise scale.

    Raises
    ------
    FitError
        If the data carry no signal, the iteration limit is hit, or the
        covariance is singular.  The exception carries the best iterate.
    """
    if model not in _MODEL_PARAMS:
        raise ValueError(f"unknown model {model!r}; choose from {sorted(_MODEL_PARAMS)}")
    names = _MODEL_PARAMS[model]
    if curve.t.size < 8:
        raise ValueError("need at least 8 points to fit a decay")

    # Work with t and S scaled to order one for conditioning.
    t_scale = curve.t[-1] if curve.t[-1] > 0 else 1.0
    y_scale = np.max(np.abs(curve.S))
    if y_scale == 0:
        raise FitError("no signal: data are identically zero")
    t = curve.t / t_scale
    y = curve.S / y_scale
    w = np.ones_like(y) if curve.sigma is None else y_scale / curve.sigma
    split = splitting * t_scale

    x0 = _initial_guess(model, t, y, split)

    def resid(x):
        return (_model(model, x, t)[0] - y) * w

    def jac(x):
        return _model(model, x, t)[1] * w[:, None]

    res = least_squares(resid, x0, jac=jac, method="lm", xtol=FIT_XTOL,
                        ftol=1e-14, gtol=1e-14, max_nfev=MAX_FIT_ITERATIONS)

    unscale = np.array([y_scale, t_scale] + ([1.0] if model == "stretched" else [])
                       + ([1 / t_scale, 1 / t_scale] if model == "triplet" else []))
    values = res.x * unscale
    if model != "triplet":
        values[1] = abs(values[1])

    dof = max(y.size - len(x0), 1)
    JTJ = res.jac.T @ res.jac
    cov = None
    try:
        if np.linalg.cond(JTJ) < 1e14:
            cov = np.linalg.inv(JTJ)
            if curve.sigma is None:
                cov = cov * (2 * res.cost / dof)
            cov = cov * np.outer(unscale, unscale)
    except np.linalg.LinAlgError:
        cov = None

    stderr = (dict(zip(names, np.sqrt(np.abs(np.diag(cov))))) if cov is not None
              else dict.fromkeys(names, float("nan")))
    result = FitResult(
        model=model,
        params=dict(zip(names, map(float, values))),
        stderr={k: float(v) for k, v in stderr.items()},
        converged=bool(res.status > 0 and cov is not None),
        nfev=int(res.nfev),
        cost=float(res.cost) * y_scale**2,
        message=res.message,
        covariance=cov,
    )
    if res.status <= 0:
        raise FitError(f"fit did not converge within {MAX_FIT_ITERATIONS} iterations: {res.message}", result)
    if cov is None:
        raise FitError("fit converged to a degenerate point (singular covariance)", result)
    return result
