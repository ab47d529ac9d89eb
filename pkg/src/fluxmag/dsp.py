"""Magnetometer time series: synthesis, Welch spectra, floors and tones.

Spectra are one-sided amplitude spectral densities in T/sqrt(Hz), scaled
so that white noise of per-sample standard deviation sigma sits at
sigma sqrt(2/fs) and a sinusoid of amplitude a integrates over its peak
to a mean square of a^2 / 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import signal

# 4-term minimum-sidelobe Blackman-Harris
BLACKMAN_HARRIS = (0.35875, 0.48829, 0.14128, 0.01168)

DEFAULT_FS = 1.15  # Hz
DEFAULT_WINDOW = 1380
TONE_GUARD_BINS = 2
PEAK_HALF_WIDTH = 4  # bins; main-lobe half width of the 4-term window
DETECTION_RATIO = 3.0


def differential_readout(S1, S2, S3, S4):
    """Normalised differential signal S1/S2 - S3/S4."""
    S2 = np.asarray(S2, dtype=float)
    S4 = np.asarray(S4, dtype=float)
    if np.any(S2 <= 0) or np.any(S4 <= 0):
        raise ValueError("normalising integrals S2 and S4 must be positive")
    out = np.asarray(S1, dtype=float) / S2 - np.asarray(S3, dtype=float) / S4
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class TimeSeries:
    samples: np.ndarray  # field-equivalent values, T
    fs: float  # Hz
    seed: int | None = None

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=float)
        if x.ndim != 1:
            raise ValueError("samples must be one-dimensional")
        if not np.all(np.isfinite(x)):
            raise ValueError("samples contain non-finite values")
        if not self.fs > 0:
            raise ValueError("sampling rate must be positive")
        object.__setattr__(self, "samples", x)

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.samples.size) / self.fs

    @property
    def duration(self) -> float:
        return self.samples.size / self.fs

    def __mul__(self, c):
        return TimeSeries(self.samples * c, self.fs, self.seed)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class Spectrum:
    f: np.ndarray  # Hz
    asd: np.ndarray  # T/sqrt(Hz)
    window: str = "blackmanharris"
    window_len: int = DEFAULT_WINDOW
    overlap: float = 0.5
    segments: int = 0
    fs: float = float("nan")

    @property
    def df(self) -> float:
        return float(self.f[1] - self.f[0])

    @property
    def psd(self) -> np.ndarray:
        return self.asd**2

    def resolvable_band(self) -> tuple[float, float]:
        """Lowest non-zero and highest frequency the estimate resolves."""
        return float(self.f[1]), float(self.f[-1])


def synthesize_timeseries(target_floor: float, fs: float, duration: float, tones=(),
                          seed: int | None = 0, flicker_corner: float = 0.0) -> TimeSeries:
    """White field noise at ``target_floor`` T/sqrt(Hz) plus injected tones.

    Parameters
    ----------
    target_floor : one-sided ASD of the noise, T/sqrt(Hz).
    fs : sampling rate, Hz.
    duration : record length, s; the sample count is round(duration * fs).
    tones : iterable of (frequency Hz, amplitude T) or (frequency, amplitude, phase rad).
    seed : RNG seed; equal seeds give bit-identical series.
    flicker_corner : if positive, the noise PSD is shaped by 1 + corner / f
        to mimic slow drift.
    """
    if target_floor < 0:
        raise ValueError("target_floor must be non-negative")
    if not fs > 0 or not duration > 0:
        raise ValueError("fs and duration must be positive")
    n = int(round(duration * fs))
    if n < 2:
        raise ValueError("record shorter than two samples")
    tones = [tuple(tn) for tn in tones]
    for tone in tones:
        if tone[0] >= fs / 2 or tone[0] < 0:
            raise ValueError(f"tone at {tone[0]} Hz aliases: must lie in [0, fs/2 = {fs / 2}) Hz")

    rng = np.random.default_rng(seed)
    sigma = target_floor * math.sqrt(fs / 2)
    x = rng.standard_normal(n) * sigma
    if flicker_corner > 0:
        X = np.fft.rfft(x)
        f = np.fft.rfftfreq(n, 1 / fs)
        gain = np.ones_like(f)
        gain[1:] = np.sqrt(1 + flicker_corner / f[1:])
        x = np.fft.irfft(X * gain, n)
    t = np.arange(n) / fs
    for tone in tones:
        freq, amp = tone[0], tone[1]
        phase = tone[2] if len(tone) > 2 else 0.0
        x = x + amp * np.sin(2 * np.pi * freq * t + phase)
    return TimeSeries(x, fs, seed)


def blackman_harris(n: int, coefficients=BLACKMAN_HARRIS) -> np.ndarray:
    """Periodic (DFT-even) cosine-sum window of length n."""
    return signal.windows.general_cosine(n, list(coefficients), sym=False)


def welch_segment_count(n: int, window_len: int, overlap: float) -> int:
    step = window_len - int(window_len * overlap)
    return (n - window_len) // step + 1


def welch_asd(ts: TimeSeries, window_len: int = DEFAULT_WINDOW, overlap: float = 0.5,
              coefficients=BLACKMAN_HARRIS, detrend="constant") -> Spectrum:
    """One-sided Welch ASD with a Blackman-Harris window."""
    if ts.samples.size < window_len:
        raise ValueError(
            f"series of {ts.samples.size} samples is shorter than one {window_len}-point window"
        )
    if not 0 <= overlap < 1:
        raise ValueError("overlap must be in [0, 1)")
    win = blackman_harris(window_len, coefficients)
    noverlap = int(window_len * overlap)
    f, psd = signal.welch(ts.samples, fs=ts.fs, window=win, nperseg=window_len,
                          noverlap=noverlap, detrend=detrend, scaling="density",
                          return_onesided=True)
    return Spectrum(
        f=f,
        asd=np.sqrt(psd),
        window="blackmanharris",
        window_len=window_len,
        overlap=overlap,
        segments=welch_segment_count(ts.samples.size, window_len, overlap),
        fs=ts.fs,
    )


def _tone_mask(sp: Spectrum, tones, guard):
    keep = np.ones(sp.f.size, dtype=bool)
    for ft in tones:
        i = int(round(ft / sp.df))
        keep[max(i - guard, 0): i + guard + 1] = False
    return keep


def noise_floor(sp: Spectrum, band=(0.02, 0.5), tones=(), guard: int = TONE_GUARD_BINS) -> float:
    """Median ASD over ``band`` (Hz) with +-guard bins around each tone masked."""
    lo, hi = band
    if lo > hi:
        raise ValueError("band must satisfy f_lo <= f_hi")
    if lo < sp.f[0] or hi > sp.f[-1] + 1e-12:
        raise ValueError(f"band [{lo}, {hi}] Hz exceeds the spectrum range [{sp.f[0]}, {sp.f[-1]:.4g}] Hz")
    sel = (sp.f >= lo) & (sp.f <= hi) & _tone_mask(sp, tones, guard)
    if not np.any(sel):
        raise ValueError("no spectral bins left in the band after masking tones")
    return float(np.median(sp.asd[sel]))


class ToneNotDetected(ValueError):
    pass


@dataclass(frozen=True)
class ToneEstimate:
    amplitude: float  # T
    frequency: float  # Hz, peak bin
    snr: float  # peak ASD over local floor ASD
    local_floor: float  # T/sqrt(Hz)


def recover_tone(sp: Spectrum, f: float, search_bins: int = 2,
                 half_width: int = PEAK_HALF_WIDTH) -> ToneEstimate:
    """Amplitude of a sinusoid near ``f`` from the spectral power in its peak.

    The density-scaled PSD is summed over the main lobe (which undoes the
    window's noise bandwidth), the local noise floor is removed, and the
    amplitude follows from mean square = a^2 / 2.

    Raises
    ------
    ToneNotDetected
        If the peak ASD is below three times the local floor.
    """
    if not sp.f[0] <= f <= sp.f[-1]:
        raise ValueError(f"{f} Hz lies outside the spectrum")
    i0 = int(round(f / sp.df))
    lo, hi = max(i0 - search_bins, 0), min(i0 + search_bins, sp.f.size - 1)
    ip = lo + int(np.argmax(sp.asd[lo: hi + 1]))

    side = np.r_[ip - 6 * half_width: ip - half_width - 1, ip + half_width + 2: ip + 6 * half_width + 1]
    side = side[(side >= 1) & (side < sp.f.size)]
    local = float(np.median(sp.asd[side])) if side.size else 0.0
    peak = float(sp.asd[ip])
    snr = peak / local if local > 0 else math.inf
    if not snr >= DETECTION_RATIO:
        raise ToneNotDetected(f"not detected: peak at {sp.f[ip]:.4g} Hz is {snr:.2f}x the local floor")

    a, b = max(ip - half_width, 0), min(ip + half_width, sp.f.size - 1)
    power = np.sum(sp.psd[a: b + 1] - local**2) * sp.df
    amplitude = math.sqrt(max(2 * power, 0.0))
    return ToneEstimate(amplitude, float(sp.f[ip]), snr, local)
