import math

import numpy as np
import pytest

from fluxmag.dsp import (
    BLACKMAN_HARRIS,
    Spectrum,
    TimeSeries,
    ToneNotDetected,
    blackman_harris,
    differential_readout,
    noise_floor,
    recover_tone,
    synthesize_timeseries,
    welch_asd,
    welch_segment_count,
)
from fluxmag.io import read_timeseries, write_timeseries

FS = 1.15
FLOOR = 32e-12
TONE = (0.1, 12e-9)


# -- readout -----------------------------------------------------------------------

def test_differential_readout():
    assert differential_readout(2.0, 2.0, 2.0, 2.0) == 0.0
    assert differential_readout(1.01, 1.00, 0.99, 1.00) == pytest.approx(0.02, rel=1e-12)
    base = differential_readout(1.3, 1.1, 0.7, 0.9)
    assert differential_readout(5 * 1.3, 5 * 1.1, 5 * 0.7, 5 * 0.9) == pytest.approx(base, rel=1e-15)
    with pytest.raises(ValueError):
        differential_readout(1.0, 0.0, 1.0, 1.0)


# -- synthesis ----------------------------------------------------------------------

def test_noise_scale():
    assert FLOOR * math.sqrt(FS / 2) == pytest.approx(24.3e-12, rel=1e-3)
    ts = synthesize_timeseries(FLOOR, FS, 200_000 / FS, seed=1)
    assert np.std(ts.samples) == pytest.approx(24.3e-12, rel=0.01)


def test_pure_tone_without_noise():
    ts = synthesize_timeseries(0.0, FS, 3600, tones=[TONE], seed=3)
    np.testing.assert_allclose(ts.samples, 12e-9 * np.sin(2 * np.pi * 0.1 * ts.t), atol=1e-22)


def test_reference_record_length():
    ts = synthesize_timeseries(FLOOR, FS, 3600, tones=[TONE], seed=0)
    assert ts.samples.size == 4140
    assert welch_segment_count(4140, 1380, 0.5) == 5
    assert welch_asd(ts).segments == 5


def test_aliasing_rejected():
    with pytest.raises(ValueError, match="alias"):
        synthesize_timeseries(FLOOR, FS, 100, tones=[(0.6, 1e-9)])


def test_determinism(tmp_path):
    a = synthesize_timeseries(FLOOR, FS, 3600, tones=[TONE], seed=42)
    b = synthesize_timeseries(FLOOR, FS, 3600, tones=[TONE], seed=42)
    assert a.samples.tobytes() == b.samples.tobytes()
    assert welch_asd(a).asd.tobytes() == welch_asd(b).asd.tobytes()
    c = synthesize_timeseries(FLOOR, FS, 3600, tones=[TONE], seed=43)
    assert not np.array_equal(a.samples, c.samples)


def test_timeseries_csv_round_trip(tmp_path):
    ts = synthesize_timeseries(FLOOR, FS, 100, seed=5)
    path = tmp_path / "ts.csv"
    write_timeseries(path, ts)
    back = read_timeseries(path)
    assert np.array_equal(back.samples, ts.samples)
    assert back.fs == pytest.approx(FS, rel=1e-12)


def test_flicker_option_raises_low_frequencies():
    white = welch_asd(synthesize_timeseries(FLOOR, FS, 20000, seed=9))
    drift = welch_asd(synthesize_timeseries(FLOOR, FS, 20000, seed=9, flicker_corner=0.05))
    lo = (white.f > 0.003) & (white.f < 0.01)
    hi = (white.f > 0.4) & (white.f < 0.5)
    assert np.median(drift.asd[lo]) > 1.5 * np.median(white.asd[lo])
    assert np.median(drift.asd[hi]) == pytest.approx(np.median(white.asd[hi]), rel=0.1)


# -- Welch estimate --------------------------------------------------------------------

def test_window_is_four_term_blackman_harris():
    n = 1380
    k = np.arange(n)
    a0, a1, a2, a3 = BLACKMAN_HARRIS
    ref = a0 - a1 * np.cos(2 * np.pi * k / n) + a2 * np.cos(4 * np.pi * k / n) - a3 * np.cos(6 * np.pi * k / n)
    np.testing.assert_allclose(blackman_harris(n), ref, atol=1e-15)


def test_zero_series():
    sp = welch_asd(TimeSeries(np.zeros(2000), FS))
    assert np.all(sp.asd == 0)


def test_short_series_rejected():
    with pytest.raises(ValueError, match="shorter than one"):
        welch_asd(TimeSeries(np.zeros(100), FS))


def _white(segments, seed=11):
    n = 690 * (segments + 1)
    return synthesize_timeseries(FLOOR, FS, n / FS, seed=seed)


def test_white_floor_level():
    ts = _white(40)
    sp = welch_asd(ts)
    assert sp.segments >= 20
    assert noise_floor(sp, (0.02, 0.5)) == pytest.approx(FLOOR, rel=0.15)
    # Raw periodogram oracle on the same data: mean one-sided PSD = 2 sigma^2 / fs.
    x = ts.samples - ts.samples.mean()
    P = 2 * np.abs(np.fft.rfft(x)) ** 2 / (FS * x.size)
    band = (np.fft.rfftfreq(x.size, 1 / FS) > 0.02) & (np.fft.rfftfreq(x.size, 1 / FS) < 0.5)
    assert math.sqrt(P[band].mean()) == pytest.approx(noise_floor(sp, (0.02, 0.5)), rel=0.1)


def test_parseval():
    ts = _white(40, seed=12)
    sp = welch_asd(ts)
    assert np.sum(sp.psd) * sp.df == pytest.approx(np.var(ts.samples), rel=0.2)


def test_asd_is_linear():
    ts = _white(5, seed=13)
    np.testing.assert_allclose(welch_asd(3.5 * ts).asd, 3.5 * welch_asd(ts).asd, rtol=1e-12)


def test_flat_floor_estimate():
    f = np.linspace(0, 0.575, 691)
    sp = Spectrum(f, np.full_like(f, 5e-12))
    assert noise_floor(sp, (0.02, 0.5)) == pytest.approx(5e-12, rel=0.05)


def test_floor_with_only_tone_left():
    sp = welch_asd(synthesize_timeseries(FLOOR, FS, 3600, tones=[TONE], seed=0))
    with pytest.raises(ValueError, match="no spectral bins"):
        noise_floor(sp, (0.0995, 0.1005), tones=[0.1])


def test_resolvable_band():
    sp = welch_asd(synthesize_timeseries(FLOOR, FS, 3600, seed=0))
    lo, hi = sp.resolvable_band()
    assert lo == pytest.approx(FS / 1380)
    assert hi == pytest.approx(FS / 2)


# -- tones -------------------------------------------------------------------------------

def test_tone_recovery_on_floor():
    sp = welch_asd(synthesize_timeseries(FLOOR, FS, 3600, tones=[TONE], seed=0))
    est = recover_tone(sp, 0.1)
    assert est.amplitude == pytest.approx(12e-9, rel=0.10)
    assert est.frequency == pytest.approx(0.1, abs=sp.df)


def test_tone_recovery_noiseless():
    sp = welch_asd(synthesize_timeseries(0.0, FS, 3600, tones=[TONE], seed=0))
    assert recover_tone(sp, 0.1).amplitude == pytest.approx(12e-9, rel=0.01)


def test_tone_not_detected():
    sp = welch_asd(synthesize_timeseries(FLOOR, FS, 3600, seed=0))
    with pytest.raises(ToneNotDetected, match="not detected"):
        recover_tone(sp, 0.1)
