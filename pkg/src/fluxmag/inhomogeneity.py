"""Ensemble averaging over field inhomogeneity in the diamond.

Each NV sees B = G' B_a + B_r, with the magnification G' ~ N(G, (kG)^2) and
the static remanence field B_r ~ N(B_r0, (m B_r0)^2).  The ensemble signal
is the average of the single-field readout S'(B) over both distributions,
computed with tensor-product Gauss-Hermite quadrature.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar

from .constants import DEFAULT_CONSTANTS
from .params import TABLE_S1
from .spindyn import decay_envelope

DEFAULT_NODES = 64
CONVERGENCE_RTOL = 1e-8


def echo_response(gamma_e=DEFAULT_CONSTANTS.gamma_e, alpha=TABLE_S1["fcm"].alpha,
                  E_F=TABLE_S1["fcm"].E_F, tau=TABLE_S1["fcm"].tau) -> float:
    """Echo phase per tesla at the diamond for a synchronised sine modulation."""
    return gamma_e * alpha * E_F * (2 / math.pi) * tau


@dataclass(frozen=True)
class DispersionParams:
    """Gaussian spreads of magnification and remanence plus the intrinsic readout.

    Fields are SI: ``B_r0`` in tesla, ``T2`` and ``tau`` in seconds,
    ``kappa`` in rad/T.  ``k`` and ``m`` are relative widths; zero collapses
    the corresponding distribution to its mean.
    """

    G: float = 85.1
    k: float = 0.015
    B_r0: float = 25e-6
    m: float = 0.109
    C: float = 1.2e-2
    T2: float = 102e-6
    p: float = 1.24
    tau: float = 92.7e-6
    kappa: float = echo_response()
    phi0: float = 0.0

    def __post_init__(self):
        for name in ("G", "k", "B_r0", "m", "C", "T2", "p", "tau", "kappa", "phi0"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite")
        if self.k < 0 or self.m < 0:
            raise ValueError("k and m must be non-negative")
        if self.B_r0 < 0:
            raise ValueError("B_r0 must be non-negative")
        if not (self.G > 0 and self.C > 0 and self.T2 > 0 and self.p > 0 and self.tau > 0):
            raise ValueError("G, C, T2, p and tau must be positive")

    def replace(self, **changes) -> "DispersionParams":
        return replace(self, **changes)

    @property
    def amplitude(self) -> float:
        """Intrinsic fringe amplitude C exp(-(tau/T2)^p)."""
        return self.C * decay_envelope(self.tau, self.T2, self.p)

    def intrinsic(self) -> Callable:
        """Single-field readout S'(B) = C exp(-(tau/T2)^p) cos(kappa B + phi0)."""
        amp, kappa, phi0 = self.amplitude, self.kappa, self.phi0
        return lambda B: amp * np.cos(kappa * B + phi0)


class QuadratureWarning(RuntimeWarning):
    pass


def _nodes(n):
    x, w = np.polynomial.hermite_e.hermegauss(n)
    return x, w / math.sqrt(2 * math.pi)


def _ensemble(B_a, d, intrinsic, n):
    x, w = _nodes(n)
    sG = d.k * d.G
    sB = d.m * d.B_r0
    Gp = d.G + sG * x if sG > 0 else np.array([d.G])
    wG = w if sG > 0 else np.array([1.0])
    Br = d.B_r0 + sB * x if sB > 0 else np.array([d.B_r0])
    wB = w if sB > 0 else np.array([1.0])
    B_a = np.asarray(B_a, dtype=float)
    # field[..., i, j] = G'_i B_a + B_r_j
    field = B_a[..., None, None] * Gp[:, None] + Br[None, :]
    vals = np.asarray(intrinsic(field), dtype=float)
    return np.einsum("...ij,i,j->...", vals, wG, wB)


def ensemble_signal(B_a, d: DispersionParams, intrinsic: Callable | None = None,
                    nodes: int = DEFAULT_NODES, check: bool = True):
    """Ensemble-averaged readout at applied field(s) ``B_a`` (T).

    ``intrinsic`` maps an array of fields to signals; it defaults to the
    cosine readout of ``d``.  With ``check`` the result is recomputed with
    twice the nodes and a :class:`QuadratureWarning` is issued if the two
    differ by more than 1e-8 relative to the intrinsic scale.
    """
    f = d.intrinsic() if intrinsic is None else intrinsic
    out = _ensemble(B_a, d, f, nodes)
    if check:
        fine = _ensemble(B_a, d, f, 2 * nodes)
        scale = max(np.max(np.abs(fine)), d.amplitude if intrinsic is None else 0.0, 1e-300)
        err = np.max(np.abs(fine - out)) / scale
        if err > CONVERGENCE_RTOL:
            warnings.warn(
                f"Gauss-Hermite quadrature not converged: node doubling changed the result by {err:.2e}",
                QuadratureWarning, stacklevel=2,
            )
    return float(out) if np.ndim(out) == 0 else out


def ensemble_closed_form(B_a, d: DispersionParams):
    """Closed form of the ensemble average for the cosine readout.

    A Gaussian field of mean mu and variance s^2 averages cos(kappa B + phi0)
    to exp(-kappa^2 s^2 / 2) cos(kappa mu + phi0).
    """
    B_a = np.asarray(B_a, dtype=float)
    mu = d.G * B_a + d.B_r0
    var = (d.k * d.G * B_a) ** 2 + (d.m * d.B_r0) ** 2
    out = d.amplitude * np.exp(-0.5 * d.kappa**2 * var) * np.cos(d.kappa * mu + d.phi0)
    return float(out) if out.ndim == 0 else out


def fringe_period(d: DispersionParams) -> float:
    """Applied-field period of the ensemble fringe, 2 pi / (kappa G)."""
    return 2 * math.pi / (d.kappa * d.G)


def effective_contrast(d: DispersionParams, points: int = 257) -> float:
    """Contrast of the ensemble fringe in the units of the intrinsic contrast C.

    The ensemble signal is swept over one fringe period centred on
    B_a = 0; half its peak-to-peak swing is divided by the decay envelope
    so that a homogeneous field returns C.
    """
    P = fringe_period(d)
    grid = np.linspace(-P / 2, P / 2, points)
    S = ensemble_signal(grid, d)
    step = grid[1] - grid[0]

    def refine(i, sign):
        lo, hi = grid[i] - step, grid[i] + step
        res = minimize_scalar(lambda b: -sign * ensemble_signal(b, d, check=False),
                              bounds=(lo, hi), method="bounded", options={"xatol": 1e-6 * step})
        return max(sign * S[i], -res.fun) * sign

    top = refine(int(np.argmax(S)), 1)
    bottom = refine(int(np.argmin(S)), -1)
    return float((top - bottom) / 2 / decay_envelope(d.tau, d.T2, d.p))


def contrast_vs_remanence(d: DispersionParams, B_r0_grid):
    """Effective contrast for each mean remanence in ``B_r0_grid`` (T)."""
    grid = np.asarray(B_r0_grid, dtype=float)
    if np.any(grid < 0) or np.any(np.diff(grid) <= 0):
        raise ValueError("remanence grid must be non-negative and increasing")
    return np.array([effective_contrast(d.replace(B_r0=float(b))) for b in grid])


def ensemble_fringe(d: DispersionParams, B_a):
    """Ensemble fringe S(B_a) for plotting and asymmetry checks."""
    return ensemble_signal(np.asarray(B_a, dtype=float), d)
