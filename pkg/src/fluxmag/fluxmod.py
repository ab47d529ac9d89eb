"""Flux concentration and mechanical flux modulation.

Lengths follow the lab conventions: concentrator gaps ``d`` in mm, chip
heights ``h`` and vibration amplitudes in micrometres, fields of the
transfer curve in gauss.  Only ratios of transfer-curve fields enter the
magnetometer response, so their unit never leaks into the budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .constants import DEFAULT_CONSTANTS
from .spindyn import SPIN_ECHO, FieldWaveform, PulseSequence, echo_grid, echo_phase

# Simulated magnification anchors: gap width (mm) -> G
MAGNIFICATION_ANCHORS = ((0.4, 74.0), (0.04, 527.0))
MEASURED_MAGNIFICATION = 85.0

# Measured B-h points at the optimal chip position: h (um) -> B (gauss)
EXPERIMENTAL_ANCHORS = ((0.0, 8.95), (3.0, 10.47), (6.0, 10.95))

# Ideal-geometry target: 56.8 % efficiency at 40.4 um amplitude about 40.4 um
IDEAL_H_EQ = 40.4
IDEAL_TARGET_EF = 0.568


# -- concentrator magnification ------------------------------------------------

@dataclass(frozen=True)
class ConcentratorFit:
    """Gap-dominated reluctance model G(d) = scale * a / (d + b), d in mm."""

    a: float
    b: float
    calibration_scale: float = 1.0

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0 and self.calibration_scale > 0):
            raise ValueError("a, b and calibration_scale must be positive")

    @classmethod
    def from_anchors(cls, anchors=MAGNIFICATION_ANCHORS, calibration_scale=1.0) -> "ConcentratorFit":
        """Solve a and b so that G passes through two (d, G) points."""
        (d1, g1), (d2, g2) = anchors
        # a = g1 (d1 + b) = g2 (d2 + b)
        b = (g1 * d1 - g2 * d2) / (g2 - g1)
        a = g1 * (d1 + b)
        return cls(a, b, calibration_scale)

    def calibrated(self, measured=MEASURED_MAGNIFICATION, at=MAGNIFICATION_ANCHORS[0][0]) -> "ConcentratorFit":
        """Rescale so that the model matches a measured magnification at gap ``at``."""
        base = self.a / (at + self.b)
        return ConcentratorFit(self.a, self.b, measured / base)


DEFAULT_CONCENTRATOR = ConcentratorFit.from_anchors()


def magnification(d, fit: ConcentratorFit = DEFAULT_CONCENTRATOR):
    """Field magnification of the concentrators for gap width ``d`` (mm)."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("gap width d must be positive")
    g = fit.calibration_scale * fit.a / (d + fit.b)
    return float(g) if g.ndim == 0 else g


# -- modulation efficiency and B-h transfer ------------------------------------

def modulation_efficiency(B_max, B_min, B_init):
    """E_F = (B_max - B_min) / (2 B_init)."""
    B_init = np.asarray(B_init, dtype=float)
    if np.any(B_init <= 0):
        raise ValueError("B_init must be positive")
    if np.any(np.asarray(B_max) < np.asarray(B_min)):
        raise ValueError("B_max must not be below B_min")
    ef = (np.asarray(B_max, dtype=float) - B_min) / (2 * B_init)
    return float(ef) if ef.ndim == 0 else ef


@dataclass(frozen=True)
class TransferCurve:
    """Field in the diamond as a function of chip height h (um).

    Three kinds are supported:

    ``experimental``
        monotone piecewise-cubic (PCHIP) interpolation through measured
        (h, B) anchors; defined only between the first and last anchor.
    ``ideal``
        saturating reluctance law B = B_sat h / (h + c), zero at contact.
    ``linear``
        B = slope * h, used to check the modulation machinery.
    """

    kind: Literal["experimental", "ideal", "linear"] = "experimental"
    anchors: tuple[tuple[float, float], ...] = EXPERIMENTAL_ANCHORS
    c: float = 12.72  # um, shape parameter of the ideal curve
    B_sat: float = 1.0  # gauss
    slope: float = 1.0  # gauss per um
    _interp: object = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind == "experimental":
            h, B = np.asarray(self.anchors, dtype=float).T
            if h.size < 2 or np.any(np.diff(h) <= 0):
                raise ValueError("anchor heights must be strictly increasing")
            if np.any(np.diff(B) <= 0):
                raise ValueError("anchor fields must be strictly increasing in h")
            if B[0] < 0:
                raise ValueError("B(0) must be non-negative")
            object.__setattr__(self, "_interp", PchipInterpolator(h, B, extrapolate=False))
        elif self.kind == "ideal":
            if not (self.c > 0 and self.B_sat > 0):
                raise ValueError("ideal curve needs c > 0 and B_sat > 0")
        elif self.kind == "linear":
            if not self.slope > 0:
                raise ValueError("linear curve needs a positive slope")
        else:
            raise ValueError(f"unknown transfer curve kind {self.kind!r}")

    @property
    def h_range(self) -> tuple[float, float]:
        if self.kind == "experimental":
            return self.anchors[0][0], self.anchors[-1][0]
        return 0.0, math.inf

    def __call__(self, h):
        return bh_transfer(h, self)

    @classmethod
    def from_csv(cls, path) -> "TransferCurve":
        """Experimental curve from a two-column CSV (h in um, B in gauss) with a header row."""
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls("experimental", tuple(map(tuple, data[:, :2].tolist())))


def bh_transfer(h, curve: TransferCurve):
    """Field B(h) in gauss for chip height ``h`` in micrometres."""
    h = np.asarray(h, dtype=float)
    lo, hi = curve.h_range
    span = max(hi - lo, 1.0) if math.isfinite(hi) else 1.0
    eps = 1e-9 * span
    if np.any(h < -eps) or (np.any(h < lo - eps)):
        raise ValueError(f"chip height below the curve domain (h >= {lo} um required)")
    if np.any(h > hi + eps):
        raise ValueError(f"chip height above the curve domain (h <= {hi} um required)")
    if curve.kind == "experimental":
        out = curve._interp(np.clip(h, lo, hi))
    elif curve.kind == "ideal":
        hc = np.clip(h, 0.0, None)
        out = curve.B_sat * hc / (hc + curve.c)
    else:
        out = curve.slope * np.clip(h, 0.0, None)
    return float(out) if np.ndim(out) == 0 else np.asarray(out)


def efficiency_vs_amplitude(h_eq: float, amplitudes, curve: TransferCurve):
    """E_F(a) = (B(h_eq + a) - B(h_eq - a)) / (2 B(h_eq)) for each amplitude a."""
    a = np.asarray(amplitudes, dtype=float)
    if np.any(a < 0):
        raise ValueError("amplitudes must be non-negative")
    B0 = bh_transfer(h_eq, curve)
    ef = (bh_transfer(h_eq + a, curve) - bh_transfer(h_eq - a, curve)) / (2 * B0)
    return float(ef) if np.ndim(ef) == 0 else np.asarray(ef)


def calibrate_ideal_curve(target=IDEAL_TARGET_EF, h_eq=IDEAL_H_EQ, amplitude=IDEAL_H_EQ,
                          B_sat=1.0, bracket=(1e-6, 1e4)) -> TransferCurve:
    """Ideal curve whose shape parameter c gives ``target`` efficiency.

    The efficiency at fixed amplitude falls monotonically with c, so c is
    found by bracketed root finding.
    """
    def mismatch(c):
        return efficiency_vs_amplitude(h_eq, amplitude, TransferCurve("ideal", c=c, B_sat=B_sat)) - target

    c = brentq(mismatch, *bracket, xtol=1e-14, rtol=1e-14)
    return TransferCurve("ideal", c=c, B_sat=B_sat)


IDEAL_CURVE = calibrate_ideal_curve()
EXPERIMENTAL_CURVE = TransferCurve()


# -- drive and waveform ----------------------------------------------------------

@dataclass(frozen=True)
class ModulationDrive:
    """Sinusoidal chip motion h(t) = h_eq + amplitude sin(2 pi f_mod t + phase).

    Time zero is the end of the first pi/2 pulse.  The trigger delays
    t_d1..t_d3 only shift the phase, by 2 pi f_mod (t_d1 + t_d2 + t_d3).
    """

    f_mod: float = 10.795e3  # Hz
    amplitude: float = 3.0  # um
    h_eq: float = 3.0  # um
    phase: float = 0.0  # rad
    t_d1: float = 0.0
    t_d2: float = 0.0
    t_d3: float = 0.0

    def __post_init__(self):
        if not self.f_mod > 0:
            raise ValueError("f_mod must be positive")
        if self.amplitude < 0:
            raise ValueError("amplitude must be non-negative")
        if self.amplitude > self.h_eq + 1e-12:
            raise ValueError("amplitude must not exceed h_eq (chip would hit the concentrators)")

    @property
    def period(self) -> float:
        return 1.0 / self.f_mod

    @property
    def effective_phase(self) -> float:
        delay = self.t_d1 + self.t_d2 + self.t_d3
        return (self.phase + 2 * math.pi * self.f_mod * delay) % (2 * math.pi)

    def height(self, t):
        return self.h_eq + self.amplitude * np.sin(2 * np.pi * self.f_mod * np.asarray(t) + self.effective_phase)

    def with_phase(self, phase: float) -> "ModulationDrive":
        return ModulationDrive(self.f_mod, self.amplitude, self.h_eq, phase)


def field_waveform(drive: ModulationDrive, curve: TransferCurve, t) -> FieldWaveform:
    """Field in the diamond B(t) = B(h(t)) in gauss on the time grid ``t``."""
    t = np.asarray(t, dtype=float)
    h = drive.height(t)
    lo, hi = curve.h_range
    if h.min() < lo - 1e-9 or h.max() > hi + 1e-9:
        raise ValueError(
            f"chip height spans [{h.min():.4g}, {h.max():.4g}] um, outside the curve domain [{lo}, {hi}]"
        )
    return FieldWaveform(t, bh_transfer(np.clip(h, lo, hi), curve))


def waveform_extremes(drive: ModulationDrive, curve: TransferCurve) -> tuple[float, float, float]:
    """(B_max, B_min, B_init) over one period of the drive."""
    return (
        bh_transfer(drive.h_eq + drive.amplitude, curve),
        bh_transfer(drive.h_eq - drive.amplitude, curve),
        bh_transfer(drive.h_eq, curve),
    )


def drive_efficiency(drive: ModulationDrive, curve: TransferCurve) -> float:
    return modulation_efficiency(*waveform_extremes(drive, curve))


def mean_offset(drive: ModulationDrive, curve: TransferCurve, n: int = 4096) -> float:
    """Period-averaged field minus B_init (zero for a linear curve), in gauss."""
    t = np.arange(n) / (n * drive.f_mod)
    B = bh_transfer(drive.height(t), curve)
    return float(np.mean(B) - bh_transfer(drive.h_eq, curve))


def normalized_shape(drive: ModulationDrive, curve: TransferCurve, tau: float) -> FieldWaveform:
    """Waveform on an echo grid over [0, tau], divided by B_init."""
    t = echo_grid(tau, drive.f_mod)
    wf = field_waveform(drive, curve, t)
    return wf * (1.0 / bh_transfer(drive.h_eq, curve))


@dataclass(frozen=True, eq=False)
class PhaseSweep:
    phases: np.ndarray  # rad
    response: np.ndarray  # signed echo phase per tesla at the diamond, rad/T
    fringe_frequency: np.ndarray  # |response| / 2 pi, fringes per tesla
    best_phase: float


def phase_sweep(drive: ModulationDrive, seq: PulseSequence, curve: TransferCurve,
                phases=None, gamma_eff: float = DEFAULT_CONSTANTS.gamma_e) -> PhaseSweep:
    """Echo response to a unit equilibrium field as a function of drive phase.

    For every trigger phase the waveform B(h(t)) / B_init is integrated with
    the echo sign switch; ``best_phase`` maximises the signed response.
    """
    if seq.kind != SPIN_ECHO:
        raise ValueError("phase sweep needs a spin-echo sequence")
    ratio = drive.f_mod * seq.tau
    if not 0.5 <= ratio <= 2.0:
        raise ValueError(f"f_mod * tau = {ratio:.3g}; modulation must be within a factor 2 of 1/tau")
    if phases is None:
        phases = np.linspace(0, 2 * np.pi, 181)
    phases = np.asarray(phases, dtype=float)
    resp = np.array([
        echo_phase(normalized_shape(drive.with_phase(ph), curve, seq.tau), seq, gamma_eff)
        for ph in phases
    ])
    return PhaseSweep(phases, resp, np.abs(resp) / (2 * np.pi), float(phases[int(np.argmax(resp))]))


def count_sign_changes(values) -> int:
    s = np.sign(np.asarray(values))
    s = s[s != 0]
    return int(np.count_nonzero(np.diff(s)))
