"""Command-line front end: ``fluxmag <subcommand> [options]``.

Every subcommand prints a summary (``--format table|csv|json``) and, with
``--out``, writes its main curve as CSV (or JSON when the path ends in
``.json``).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dsp import ToneNotDetected, noise_floor, recover_tone, synthesize_timeseries, welch_asd
from .fluxmod import (
    IDEAL_CURVE,
    efficiency_vs_amplitude,
    magnification,
    normalized_shape,
    phase_sweep,
)
from .inhomogeneity import contrast_vs_remanence, effective_contrast, ensemble_fringe, fringe_period
from .io import format_csv, read_timeseries, write_spectrum, write_timeseries
from .params import ParameterError
from .photons import photon_density, photon_number
from .scenario import ScenarioError, load_scenario, parse_quantity
from .sensitivity import duty_cycle, evaluate_sensitivity, improvement_ledger, shot_noise_sensitivity
from .spindyn import RAMSEY, SPIN_ECHO, PulseSequence, fringe_curve, max_slope

EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_NOT_FOUND = 3
EXIT_INVALID = 4


def si_format(value: float, unit: str) -> str:
    """'3.3 nT' style rendering with two significant figures."""
    if value == 0 or not math.isfinite(value):
        return f"{value:g} {unit}"
    prefixes = [(1e-15, "f"), (1e-12, "p"), (1e-9, "n"), (1e-6, "µ"), (1e-3, "m"), (1.0, "")]
    scale, prefix = prefixes[0]
    for s, pfx in prefixes:
        if abs(value) >= s * 0.9995:
            scale, prefix = s, pfx
    v = value / scale
    text = f"{v:#.{3 if abs(v) >= 99.95 else 2}g}".rstrip(".")
    return f"{text} {prefix}{unit}"


def _to_micro(seconds: float) -> float:
    """Seconds to microseconds without binary round-off in the last digit."""
    return float(f"{seconds * 1e6:.12g}")


def render(rows: list[dict], fmt: str, summary: dict | None = None) -> str:
    if fmt == "json":
        return json.dumps({"rows": rows, **({"summary": summary} if summary else {})}, indent=2) + "\n"
    cols = list(rows[0]) if rows else []
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        w.writerows([_cell(r[c]) for c in cols] for r in rows)
        return buf.getvalue()
    cells = [[_cell(r[c], pretty=True) for c in cols] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(cols)]
    out = ["  ".join(c.ljust(w) for c, w in zip(cols, widths))]
    out.append("  ".join("-" * w for w in widths))
    out += ["  ".join(v.ljust(w) for v, w in zip(row, widths)) for row in cells]
    if summary:
        out.append("")
        out += [f"{k}: {_cell(v, pretty=True)}" for k, v in summary.items()]
    return "\n".join(out) + "\n"


def _cell(v, pretty=False):
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_cell(x, pretty) for x in v) + "]"
    if isinstance(v, float):
        return f"{v:.4g}" if pretty else repr(v)
    return str(v)


def _write(path, header, columns, summary=None):
    path = Path(path)
    if path.suffix == ".json":
        data = {h: [float(x) for x in col] for h, col in zip(header, columns)}
        if summary:
            data["summary"] = summary
        path.write_text(json.dumps(data, indent=2) + "\n")
    else:
        path.write_text(format_csv(header, columns))


# -- subcommands ------------------------------------------------------------------

def cmd_budget(args):
    cfg = load_scenario(args.scenario)
    rows = []
    for name, p in cfg.params.items():
        eta = evaluate_sensitivity(p, cfg.constants)
        shot = shot_noise_sensitivity(p, cfg.constants)
        rows.append({
            "set": name,
            "A": p.A, "G": p.G, "E_F": p.E_F, "C": p.C, "N": p.N,
            "T_coh_us": _to_micro(p.T_coh), "tau_us": _to_micro(p.tau), "t_m_us": _to_micro(p.t_m),
            "n_f": p.n_f, "duty_cycle": duty_cycle(p),
            "eta_T_per_rtHz": eta,
            "eta_shot_T_per_rtHz": shot,
            "eta": si_format(eta, "T/Hz^1/2"),
            "eta_shot": si_format(shot, "T/Hz^1/2"),
        })
    if args.out:
        Path(args.out).write_text(render(rows, "json" if args.out.endswith(".json") else "csv"))
    if args.format == "table":
        rows = [{k: r[k] for k in ("set", "A", "G", "E_F", "C", "N", "T_coh_us", "tau_us", "t_m_us",
                                   "n_f", "duty_cycle", "eta", "eta_shot")} for r in rows]
    return render(rows, args.format)


def cmd_ledger(args):
    a, b = load_scenario(args.src), load_scenario(args.dst)
    pa, pb = a.get(args.from_set), b.get(args.to_set)
    led = improvement_ledger(pa, pb, a.constants)
    rows = []
    for key, factor in led.factors.items():
        rows.append({
            "parameter": key,
            "present": getattr(pa, key),
            "improved": getattr(pb, key),
            "factor": factor,
            "factor_alone": led.isolated.get(key, float("nan")),
            "drivers": "+".join(led.drivers[key]),
        })
    summary = {
        "eta_present_T_per_rtHz": led.eta_present,
        "eta_improved_T_per_rtHz": led.eta_improved,
        "total": led.total,
        "product_of_rounded_factors": led.rounded_product,
    }
    if args.out:
        Path(args.out).write_text(render(rows, "json" if args.out.endswith(".json") else "csv", summary))
    return render(rows, args.format, summary)


def _sequence_for(p, tau=None):
    return PulseSequence(RAMSEY if p.is_ramsey else SPIN_ECHO, tau or p.tau)


def cmd_fringe(args):
    cfg = load_scenario(args.scenario)
    p = cfg.get(args.set)
    seq = _sequence_for(p)
    shape = None
    if args.waveform == "transfer" and seq.kind == SPIN_ECHO:
        drive = cfg.modulation.drive
        shape = normalized_shape(drive.with_phase(drive.effective_phase), cfg.modulation.curve, seq.tau)
    # Size the grid from the response so it always spans whole fringes.
    probe = fringe_curve(p, seq, [0.0, 1e-12], cfg.constants, shape)
    period = 2 * math.pi / abs(probe.response)
    B = np.linspace(-args.periods * period / 2, args.periods * period / 2, args.points)
    curve = fringe_curve(p, seq, B, cfg.constants, shape)
    slope = max_slope(curve)
    summary = {
        "set": args.set,
        "sequence": seq.kind,
        "response_rad_per_T": curve.response,
        "fringe_period_T": period,
        "max_slope_per_mT": slope.value * 1e-3,
        "max_slope_at_T": slope.location,
    }
    if args.out:
        _write(args.out, ["B_a_T", "S"], [curve.B_a, curve.S], summary)
    return render([summary], args.format)


def cmd_sweep(args):
    cfg = load_scenario(args.scenario)
    if args.kind == "efficiency":
        curve = IDEAL_CURVE if args.curve == "ideal" else cfg.modulation.curve
        h_eq = args.h_eq if args.h_eq is not None else (
            40.4 if args.curve == "ideal" else cfg.modulation.drive.h_eq)
        x = np.linspace(0, h_eq, args.points)
        y = efficiency_vs_amplitude(h_eq, x, curve)
        header = ["amplitude_um", "E_F"]
        summary = {"h_eq_um": h_eq, "curve": curve.kind, "E_F_at_max_amplitude": float(y[-1])}
    elif args.kind == "magnification":
        x = np.linspace(0.01, 1.0, args.points)
        y = magnification(x, cfg.modulation.concentrator)
        header = ["gap_mm", "G"]
        summary = {"G_at_scenario_gap": magnification(cfg.modulation.gap, cfg.modulation.concentrator)}
    else:
        p = cfg.get(args.set)
        x = np.linspace(0.02, 3.0, args.points) * p.T_coh
        y = np.array([evaluate_sensitivity(p.replace(tau=t), cfg.constants) for t in x])
        header = ["tau_s", "eta_T_per_rtHz"]
        i = int(np.argmin(y))
        summary = {"best_tau_s": float(x[i]), "best_eta_T_per_rtHz": float(y[i])}
    if args.out:
        _write(args.out, header, [x, y], summary)
    rows = [dict(zip(header, map(float, xy))) for xy in zip(x, y)] if args.format != "table" else [summary]
    return render(rows, args.format, summary if args.format == "json" else None)


def cmd_phase(args):
    cfg = load_scenario(args.scenario)
    p = cfg.get(args.set)
    seq = PulseSequence(SPIN_ECHO, p.tau)
    phases = np.linspace(0, 2 * np.pi, args.points)
    sweep = phase_sweep(cfg.modulation.drive, seq, cfg.modulation.curve, phases,
                        cfg.constants.gamma_e * p.delta_ms)
    summary = {"best_phase_rad": sweep.best_phase,
               "max_response_rad_per_T": float(np.max(sweep.response)),
               "f_mod_tau": cfg.modulation.drive.f_mod * p.tau}
    if args.out:
        _write(args.out, ["phase_rad", "response_rad_per_T", "fringe_frequency_per_T"],
               [sweep.phases, sweep.response, sweep.fringe_frequency], summary)
    return render([summary], args.format)


def cmd_contrast(args):
    cfg = load_scenario(args.scenario)
    d = cfg.dispersion
    if args.fringe:
        P = fringe_period(d)
        B = np.linspace(-args.periods * P / 2, args.periods * P / 2, args.points)
        S = ensemble_fringe(d, B)
        header, cols = ["B_a_T", "S"], [B, S]
    else:
        grid = np.linspace(0, args.max_remanence, args.points)
        C = contrast_vs_remanence(d, grid)
        header, cols = ["B_r0_T", "C_eff"], [grid, C]
    summary = {"intrinsic_C": d.C, "B_r0_T": d.B_r0, "effective_C": effective_contrast(d),
               "kappa_rad_per_T": d.kappa}
    if args.out:
        _write(args.out, header, cols, summary)
    return render([summary], args.format)


def cmd_photons(args):
    cfg = load_scenario(args.scenario)
    o = cfg.optical
    N = photon_number(o, cfg.constants)
    L = np.linspace(0, o.L_max, args.points)
    summary = {"N": N, "beta_per_m": o.beta(cfg.constants), "I0_W_per_m2": o.I0, "L_max_m": o.L_max}
    if args.out:
        _write(args.out, ["L_m", "dN_dL_per_m"], [L, photon_density(L, o, cfg.constants)], summary)
    return render([summary], args.format)


def _tones(specs, default):
    if not specs:
        return list(default)
    out = []
    for s in specs:
        f, _, a = s.partition(":")
        out.append((parse_quantity(f), parse_quantity(a)))
    return out


def cmd_synth(args):
    cfg = load_scenario(args.scenario)
    d = cfg.dsp
    floor = parse_quantity(args.floor) if args.floor else d.floor
    fs = args.fs or d.fs
    duration = args.duration or d.duration
    seed = d.seed if args.seed is None else args.seed
    ts = synthesize_timeseries(floor, fs, duration, _tones(args.tone, d.tones), seed, d.flicker_corner)
    summary = {"samples": ts.samples.size, "fs_Hz": ts.fs, "seed": seed,
               "sigma_T": floor * math.sqrt(fs / 2)}
    if args.out:
        write_timeseries(args.out, ts)
    return render([summary], args.format)


def cmd_asd(args):
    cfg = load_scenario(args.scenario)
    d = cfg.dsp
    ts = read_timeseries(args.inp)
    sp = welch_asd(ts, args.window or d.window_len, d.overlap, d.window_coefficients)
    tones = _tones(args.tone, d.tones)
    band = (max(d.band[0], sp.f[1]), min(d.band[1], sp.f[-1]))
    summary = {"segments": sp.segments, "df_Hz": sp.df,
               "resolvable_band_Hz": list(sp.resolvable_band()),
               "noise_floor_T_per_rtHz": noise_floor(sp, band, [f for f, _ in tones])}
    for f, _ in tones:
        try:
            summary[f"tone_{f:g}Hz_T"] = recover_tone(sp, f).amplitude
        except ToneNotDetected:
            summary[f"tone_{f:g}Hz_T"] = "not detected"
    if args.out:
        write_spectrum(args.out, sp)
    return render([summary], args.format)


# -- parser ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fluxmag",
        description="Sensitivity budget and signal simulation for NV magnetometry with flux modulation.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="subcommand")

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_, description=help_)
        p.set_defaults(func=func)
        p.add_argument("--scenario", default="table_s1.cfg",
                       help="scenario file or bundled name (default: table_s1.cfg)")
        p.add_argument("--out", help="write the main curve/table here (.csv or .json)")
        p.add_argument("--format", choices=("table", "csv", "json"), default="table",
                       help="stdout format (default: table)")
        return p

    add("budget", cmd_budget,
        "Sensitivity of every parameter set in T/Hz^1/2, with shot-noise limit and duty cycle.")

    p = sub.add_parser("ledger", help="Per-parameter sensitivity enhancement between two configurations.",
                       description="Per-parameter sensitivity enhancement between two configurations. "
                                   "Factors are dimensionless ratios eta(from)/eta(to).")
    p.set_defaults(func=cmd_ledger)
    p.add_argument("--from", dest="src", required=True, help="scenario with the present configuration")
    p.add_argument("--to", dest="dst", required=True, help="scenario with the improved configuration")
    p.add_argument("--from-set", help="parameter set name in --from (default: the only one)")
    p.add_argument("--to-set", help="parameter set name in --to (default: the only one)")
    p.add_argument("--out", help="write the ledger here (.csv or .json)")
    p.add_argument("--format", choices=("table", "csv", "json"), default="table")

    p = add("fringe", cmd_fringe,
            "Readout fringe S versus applied field B_a (tesla) for one parameter set; "
            "reports the maximum slope in 1/mT.")
    p.add_argument("--set", default="fcm", help="parameter set (default: fcm)")
    p.add_argument("--points", type=int, default=801)
    p.add_argument("--periods", type=float, default=2.0, help="fringe periods spanned by the field grid")
    p.add_argument("--waveform", choices=("sine", "transfer"), default="sine",
                   help="modulated field shape: ideal sine or the scenario's B-h transfer curve")

    p = add("sweep", cmd_sweep,
            "Parameter sweeps: modulation efficiency vs vibration amplitude (um), "
            "magnification vs concentrator gap (mm), or sensitivity (T/Hz^1/2) vs tau (s).")
    p.add_argument("--kind", choices=("efficiency", "magnification", "tau"), default="efficiency")
    p.add_argument("--curve", choices=("scenario", "ideal"), default="scenario",
                   help="transfer curve for --kind efficiency")
    p.add_argument("--h-eq", type=float, help="equilibrium chip height in um")
    p.add_argument("--set", default="fcm", help="parameter set for --kind tau")
    p.add_argument("--points", type=int, default=101)

    p = add("phase", cmd_phase,
            "Echo response (rad/T at the diamond) versus drive trigger phase (rad).")
    p.add_argument("--set", default="fcm")
    p.add_argument("--points", type=int, default=181)

    p = add("contrast", cmd_contrast,
            "Effective contrast versus mean remanence B_r0 (tesla), or the ensemble fringe with --fringe.")
    p.add_argument("--max-remanence", type=float, default=50e-6, help="upper end of the B_r0 grid, T")
    p.add_argument("--points", type=int, default=51)
    p.add_argument("--fringe", action="store_true", help="emit S(B_a) instead of C(B_r0)")
    p.add_argument("--periods", type=float, default=3.0)

    p = add("photons", cmd_photons,
            "Detected photons per measurement and the photon density along the beam (1/m).")
    p.add_argument("--points", type=int, default=201)

    p = add("synth", cmd_synth,
            "Synthesize a magnetometer record (tesla) with white noise and injected tones.")
    p.add_argument("--floor", help="noise floor, e.g. '32 pT/rtHz' (default: scenario)")
    p.add_argument("--fs", type=float, help="sampling rate, Hz")
    p.add_argument("--duration", type=float, help="record length, s")
    p.add_argument("--tone", action="append", help="tone 'freq:amplitude', e.g. '0.1 Hz:12 nT' (repeatable)")
    p.add_argument("--seed", type=int, help="RNG seed (default: scenario)")

    p = add("asd", cmd_asd,
            "Welch amplitude spectral density (T/Hz^1/2) of a (t, B) CSV record, "
            "with noise floor and tone recovery.")
    p.add_argument("--in", dest="inp", required=True, help="input CSV with columns t_s, B_T")
    p.add_argument("--window", type=int, help="Welch window length in samples (default: scenario)")
    p.add_argument("--tone", action="append", help="tone 'freq:amplitude' to mask and recover")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        text = args.func(args)
    except FileNotFoundError as exc:
        msg = str(exc) if "file not found" in str(exc) else f"file not found: {exc.filename or exc}"
        print(f"fluxmag {args.command}: error: {msg}", file=sys.stderr)
        return EXIT_NOT_FOUND
    except (ScenarioError, ParameterError) as exc:
        print(f"fluxmag {args.command}: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ValueError, KeyError, OSError) as exc:
        print(f"fluxmag {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
