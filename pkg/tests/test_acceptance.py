"""End-to-end acceptance checks.

Each test evaluates one criterion, records a PASS/FAIL line with the
numbers behind it, and fails if any sub-check fails.  The lines are echoed
in the pytest terminal summary; running this file directly prints them
without pytest::

    python tests/test_acceptance.py
"""

from __future__ import annotations

import sys
import time

import numpy as np

from fluxmag.constants import DEFAULT_CONSTANTS
from fluxmag.dsp import noise_floor, recover_tone, synthesize_timeseries, welch_asd
from fluxmag.fluxmod import (
    DEFAULT_CONCENTRATOR,
    EXPERIMENTAL_CURVE,
    IDEAL_CURVE,
    ModulationDrive,
    TransferCurve,
    count_sign_changes,
    drive_efficiency,
    efficiency_vs_amplitude,
    magnification,
    phase_sweep,
)
from fluxmag.inhomogeneity import (
    DispersionParams,
    contrast_vs_remanence,
    effective_contrast,
    ensemble_closed_form,
    ensemble_signal,
    fringe_period,
)
from fluxmag.photons import CURRENT_OPTICS, IMPROVED_OPTICS, photon_number
from fluxmag.scenario import load_scenario
from fluxmag.sensitivity import evaluate_sensitivity, improvement_ledger
from fluxmag.spindyn import (
    DecayCurve,
    FieldWaveform,
    PulseSequence,
    echo_phase,
    fit_decay,
    fringe_curve,
    hyperfine_triplet,
    max_slope,
    ramsey_signal,
)

GAMMA = DEFAULT_CONSTANTS.gamma_e
RESULTS: dict[int, str] = {}


class Check:
    """Collects named sub-checks of one criterion."""

    def __init__(self):
        self.items: list[tuple[str, bool]] = []
        self.notes: list[str] = []

    def note(self, label: str) -> None:
        """Informational item; never fails."""
        self.notes.append(label)

    def __call__(self, label: str, ok) -> bool:
        self.items.append((label, bool(ok)))
        return bool(ok)

    def within(self, label, value, target, rel):
        ok = abs(value / target - 1) <= rel
        return self(f"{label}={value:.4g} (target {target:.4g} ±{rel * 100:g}%)", ok)

    @property
    def passed(self) -> bool:
        return all(ok for _, ok in self.items)


def report(number: int, title: str, check: Check) -> None:
    status = "PASS" if check.passed else "FAIL"
    failed = [label for label, ok in check.items if not ok]
    detail = "; ".join((failed if failed else [label for label, _ in check.items]) + check.notes)
    line = f"criterion {number:2d} {status}  {title}: {detail}"
    RESULTS[number] = line
    print(line)
    assert check.passed, line


def _fringe_slope(p):
    kind = "ramsey" if p.is_ramsey else "spin_echo"
    seq = PulseSequence(kind, p.tau)
    kappa = fringe_curve(p, seq, [0.0, 1e-12]).response
    curve = fringe_curve(p, seq, np.linspace(-1.0, 1.0, 2001) / kappa)
    return max_slope(curve).value * 1e-3  # per mT


# ---------------------------------------------------------------------------------

def test_criterion_01_sensitivity_budget():
    c = Check()
    sets = load_scenario("table_s1.cfg").params
    for name, target in (("ramsey", 3.3e-9), ("ramsey_fc", 67e-12), ("fcm", 39e-12)):
        c.within(f"eta[{name}]", evaluate_sensitivity(sets[name]), target, 0.05)
    report(1, "sensitivity budget", c)


def test_criterion_02_projections():
    c = Check()
    fcm = load_scenario("table_s1.cfg").params["fcm"]
    improved = load_scenario("table_s3_improved.cfg").params["improved"]
    c.within("eta[fcm, n_f=1]", evaluate_sensitivity(fcm.replace(n_f=1.0)), 2.0e-12, 0.05)
    c.within("eta[improved]", evaluate_sensitivity(improved), 50e-15, 0.05)
    shot = evaluate_sensitivity(improved.replace(n_f=1.0))
    c.within("eta[improved, n_f=1]", shot, 2.6e-15, 0.05)
    c.within("eta[improved, n_f=1] vs rounded", shot, 3e-15, 0.20)
    report(2, "shot-noise and improved projections", c)


def test_criterion_03_improvement_ledger():
    c = Check()
    present = load_scenario("table_s3_present.cfg").params["present"]
    improved = load_scenario("table_s3_improved.cfg").params["improved"]
    led = improvement_ledger(present, improved)
    for name, target in (("G", 6.2), ("E_F", 5.9), ("T_coh", 1.6), ("N", 1.9), ("C", 2.7), ("tau", 2.5)):
        c.within(f"factor[{name}]", led.factors[name], target, 0.03)
    c(f"total={led.total:.1f} in [750, 790]", 750 <= led.total <= 790)
    # The coherence and duty-cycle rows credit whole terms of the budget;
    # changing T_coh or tau alone gives different numbers, shown for reference.
    c.note("change-alone T_coh={:.3g}, tau={:.3g}".format(led.isolated["T_coh"], led.isolated["tau"]))
    report(3, "improvement ledger", c)


def test_criterion_04_photon_budget():
    c = Check()
    t0 = time.perf_counter()
    c.within("N[current]", photon_number(CURRENT_OPTICS), 7.0e9, 0.10)
    c.within("N[improved]", photon_number(IMPROVED_OPTICS), 2.6e10, 0.10)
    elapsed = time.perf_counter() - t0
    c.within("beta[0.3 ppm]", CURRENT_OPTICS.beta(), 528.0, 0.005)
    c.within("beta[0.019 ppm]", IMPROVED_OPTICS.beta(), 33.44, 0.005)
    c(f"runtime={elapsed * 1e3:.1f} ms < 1 s", elapsed < 1.0)
    report(4, "photon budget", c)


def test_criterion_05_modulation_efficiency():
    c = Check()
    ef = drive_efficiency(ModulationDrive(amplitude=3.0, h_eq=3.0), EXPERIMENTAL_CURVE)
    c(f"E_F[anchors]={ef:.4%} (9.6% ±0.2 pp)", abs(ef - 0.096) <= 0.002)
    ideal = efficiency_vs_amplitude(40.4, 40.4, IDEAL_CURVE)
    c(f"E_F[ideal, 40.4 um]={ideal:.4%} (56.8%)", abs(ideal - 0.568) <= 1e-9)
    curve = efficiency_vs_amplitude(40.4, np.linspace(0, 40.4, 101), IDEAL_CURVE)
    c("E_F(a) strictly increasing", np.all(np.diff(curve) > 0))
    report(5, "modulation efficiency", c)


def test_criterion_06_concentrator():
    c = Check()
    g1, g2 = magnification(0.4), magnification(0.04)
    c(f"G(0.4 mm)={g1:.12g}", abs(g1 - 74.0) <= 1e-10 * 74)
    c(f"G(0.04 mm)={g2:.12g}", abs(g2 - 527.0) <= 1e-10 * 527)
    d = np.linspace(0.01, 1.0, 1000)
    c(f"strictly decreasing on [0.01, 1] mm (a={DEFAULT_CONCENTRATOR.a:.6g}, b={DEFAULT_CONCENTRATOR.b:.6g})",
      np.all(np.diff(magnification(d)) < 0))
    report(6, "concentrator model", c)


def test_criterion_07_echo_physics():
    c = Check()
    tau, b = 92.7e-6, 1e-6
    seq = PulseSequence("spin_echo", tau)
    scale = GAMMA * b * tau
    dc = echo_phase(FieldWaveform.constant(b, tau), seq, GAMMA)
    c(f"dc phase/scale={abs(dc) / scale:.1e} <= 1e-9", abs(dc) <= 1e-9 * scale)
    sine = echo_phase(FieldWaveform.from_function(lambda t: b * np.sin(2 * np.pi * t / tau), tau, 1 / tau),
                      seq, GAMMA)
    rel = abs(sine / (2 / np.pi * scale) - 1)
    c(f"synchronized sine rel. error={rel:.1e} < 1e-6", rel < 1e-6)

    linear = TransferCurve("linear", slope=1.0)
    drive = ModulationDrive(f_mod=1 / tau, amplitude=1.0, h_eq=1.0)
    quarter = phase_sweep(drive, seq, linear, np.array([np.pi / 2]), GAMMA).response[0]
    c(f"quarter-period response/scale={abs(quarter) / (GAMMA * tau):.1e}", abs(quarter) <= 1e-9 * GAMMA * tau)
    sweep = phase_sweep(drive, seq, linear, np.linspace(0, 2 * np.pi, 360, endpoint=False) + 0.01, GAMMA)
    r = sweep.response
    zeros = count_sign_changes(np.append(r, r[0]))
    c(f"zeros per period={zeros}", zeros == 2)
    c("extrema of opposite sign and equal size", r.max() > 0 > r.min() and abs(r.max() + r.min()) <= 1e-6 * r.max())
    report(7, "echo physics", c)


def test_criterion_08_asd_pipeline():
    c = Check()
    t0 = time.perf_counter()
    ts = synthesize_timeseries(32e-12, 1.15, 3600, tones=[(0.1, 12e-9)], seed=0)
    sp = welch_asd(ts, window_len=1380, overlap=0.5)
    tone = recover_tone(sp, 0.1).amplitude
    floor = noise_floor(sp, (0.02, 0.5), tones=[0.1])
    elapsed = time.perf_counter() - t0
    c(f"samples={ts.samples.size}, segments={sp.segments}", ts.samples.size == 4140 and sp.segments == 5)
    c.within("tone", tone, 12e-9, 0.10)
    c.within("floor", floor, 32e-12, 0.15)
    again = welch_asd(synthesize_timeseries(32e-12, 1.15, 3600, tones=[(0.1, 12e-9)], seed=0))
    c("bit-identical for equal seeds", again.asd.tobytes() == sp.asd.tobytes())
    c(f"runtime={elapsed:.2f} s < 5 s", elapsed < 5.0)
    report(8, "ASD pipeline", c)


def test_criterion_09_inhomogeneity():
    c = Check()
    d = DispersionParams()
    B = np.linspace(-2, 2, 81) * fringe_period(d)
    err = np.max(np.abs(ensemble_signal(B, d) - ensemble_closed_form(B, d))) / d.amplitude
    c(f"quadrature vs closed form={err:.1e} < 1e-6", err < 1e-6)
    c_eff = effective_contrast(d)
    c(f"C_eff={c_eff:.3e} within x1.5 of 4.5e-3", 4.5e-3 / 1.5 <= c_eff <= 4.5e-3 * 1.5)
    low = contrast_vs_remanence(d, [0.0, 2e-6])
    c(f"C(2 uT)/C(0)={low[1] / low[0]:.4f} >= 0.95", low[1] >= 0.95 * low[0])
    sweep = contrast_vs_remanence(d, np.linspace(0, 50e-6, 21))
    c("C(B_r0) nonincreasing on [0, 50 uT]", np.all(np.diff(sweep) <= 1e-15))
    report(9, "inhomogeneity", c)


def test_criterion_10_slope_model():
    c = Check()
    sets = load_scenario("table_s1.cfg").params
    slopes = {name: _fringe_slope(sets[name]) for name in ("ramsey", "ramsey_fc", "fcm")}
    for name, measured in (("ramsey", 0.959), ("ramsey_fc", 68.3), ("fcm", 289.5)):
        s = slopes[name]
        c(f"slope[{name}]={s:.4g}/mT vs {measured}", measured / 2 <= s <= measured * 2)
    ratio = slopes["ramsey_fc"] / slopes["ramsey"]
    c.within("FC/no-FC slope ratio", ratio, 71.2, 0.25)
    fcm = sets["fcm"]
    for field, k in (("G", 2.0), ("E_F", 0.5)):
        scaled = _fringe_slope(fcm.replace(**{field: getattr(fcm, field) * k}))
        c(f"slope linear in {field}", abs(scaled / slopes["fcm"] / k - 1) < 1e-3)
    report(10, "slope model", c)


def test_criterion_11_fit_recovery():
    c = Check()
    t = np.linspace(0, 300e-6, 50)
    clean = np.exp(-((t / 102e-6) ** 1.24))
    worst_T = worst_p = 0.0
    for seed in range(20):
        y = clean + 0.01 * np.random.default_rng(seed).standard_normal(t.size)
        res = fit_decay(DecayCurve(t, y), "stretched")
        worst_T = max(worst_T, abs(res.params["T_coh"] / 102e-6 - 1))
        worst_p = max(worst_p, abs(res.params["p"] / 1.24 - 1))
    c(f"T2 worst error={worst_T:.2%} <= 5%", worst_T <= 0.05)
    c(f"p worst error={worst_p:.2%} <= 10%", worst_p <= 0.10)

    tt = np.linspace(0, 4e-6, 200)
    fid = ramsey_signal(tt, 1.0, 1.13e-6, hyperfine_triplet(2 * np.pi * 5e6))
    worst_T2s = 0.0
    for seed in range(20):
        y = fid + 0.01 * np.random.default_rng(100 + seed).standard_normal(tt.size)
        res = fit_decay(DecayCurve(tt, y), "triplet")
        worst_T2s = max(worst_T2s, abs(res.params["T_coh"] / 1.13e-6 - 1))
    c(f"T2* worst error={worst_T2s:.2%} <= 5%", worst_T2s <= 0.05)
    report(11, "fit recovery", c)


if __name__ == "__main__":
    tests = [v for k, v in sorted(globals().items()) if k.startswith("test_criterion_")]
    failures = 0
    for fn in tests:
        try:
            fn()
        except AssertionError:
            failures += 1
    print(f"{len(tests) - failures}/{len(tests)} criteria passed")
    sys.exit(1 if failures else 0)
