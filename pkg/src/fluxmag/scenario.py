"""Scenario files: named parameter sets plus modulation, optics, dispersion and DSP blocks.

The format is INI-style text (the README documents every key)::

    # comments start with '#' or ';'
    [params.fcm]
    A = pi/2
    tau = 92.7 us
    N = 7.0e9

    [modulation]
    amplitude = 3 um

Every value is a number, optionally followed by a unit; numbers without a
unit are read in the canonical unit of the field (SI unless noted in
``CANONICAL``).  Omitted keys take their reference values.
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .constants import PhysicalConstants
from .dsp import BLACKMAN_HARRIS, DEFAULT_FS, DEFAULT_WINDOW
from .fluxmod import (
    DEFAULT_CONCENTRATOR,
    EXPERIMENTAL_ANCHORS,
    IDEAL_CURVE,
    ConcentratorFit,
    ModulationDrive,
    TransferCurve,
)
from .inhomogeneity import DispersionParams
from .params import ParameterError, ProtocolParams, reference_defaults
from .photons import OpticalParams

BUNDLED_DIR = Path(__file__).with_name("scenarios")

# SI multiplier of each accepted unit suffix.
UNITS = {
    "": 1.0, "1": 1.0, "rad": 1.0, "%": 1e-2, "ppm": 1e-6,
    "s": 1.0, "ms": 1e-3, "us": 1e-6, "µs": 1e-6, "μs": 1e-6, "ns": 1e-9,
    "T": 1.0, "mT": 1e-3, "uT": 1e-6, "µT": 1e-6, "μT": 1e-6, "nT": 1e-9, "pT": 1e-12, "fT": 1e-15,
    "gauss": 1e-4,
    "m": 1.0, "mm": 1e-3, "um": 1e-6, "µm": 1e-6, "μm": 1e-6, "nm": 1e-9,
    "m2": 1.0, "mm2": 1e-6, "um2": 1e-12, "µm2": 1e-12,
    "W": 1.0, "mW": 1e-3,
    "W/m2": 1.0, "MW/m2": 1e6,
    "Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9,
    "rad/T": 1.0, "rad/s/T": 1.0,
    "photons": 1.0,
}
for _p, _f in (("T", 1.0), ("nT", 1e-9), ("pT", 1e-12), ("fT", 1e-15)):
    UNITS[f"{_p}/rtHz"] = _f

# Canonical unit (as SI multiplier) of fields not stored in SI.
CANONICAL = {
    ("modulation", "amplitude"): 1e-6,
    ("modulation", "h_eq"): 1e-6,
    ("modulation", "c"): 1e-6,
    ("modulation", "B_sat"): 1e-4,
    ("modulation", "gap"): 1e-3,
    ("modulation", "a"): 1e-3,
    ("modulation", "b"): 1e-3,
    ("optical", "n_nv"): 1e-6,
}

_NUMBER = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_QUANTITY = re.compile(rf"^(?P<num>{_NUMBER})\s*(?P<unit>\S*)$")
_PI = re.compile(rf"^(?:(?P<mul>{_NUMBER})\s*\*?\s*)?pi(?:\s*(?P<op>[*/])\s*(?P<rest>.+))?$")


class ScenarioError(ValueError):
    """Malformed or invalid scenario file; ``lineno`` points at the offending line."""

    def __init__(self, message, path=None, lineno=None):
        self.path, self.lineno = path, lineno
        where = str(path) if path else "<scenario>"
        if lineno is not None:
            where += f":{lineno}"
        super().__init__(f"{where}: {message}")


def parse_quantity(text: str, canonical: float = 1.0) -> float:
    """Parse '92.7 us', '2.6e10', 'pi/2' or '2pi * 28 GHz' into a float in the canonical unit."""
    s = text.strip()
    m = _PI.match(s)
    if m:
        v = math.pi * float(m["mul"] or 1.0)
        if m["op"]:
            rest = parse_quantity(m["rest"], canonical)
            v = v * rest if m["op"] == "*" else v / rest
        return v
    m = _QUANTITY.match(s)
    if not m:
        raise ValueError(f"cannot parse quantity {text!r}")
    unit = m["unit"]
    if unit not in UNITS:
        raise ValueError(f"unknown unit {unit!r} in {text!r}")
    if unit in ("", "1"):
        return float(m["num"])
    return float(m["num"]) * UNITS[unit] / canonical


@dataclass(frozen=True)
class DspSettings:
    fs: float = DEFAULT_FS  # Hz
    duration: float = 3600.0  # s
    floor: float = 32e-12  # T/sqrt(Hz)
    tones: tuple[tuple[float, float], ...] = ((0.1, 12e-9),)  # (Hz, T)
    window_len: int = DEFAULT_WINDOW
    overlap: float = 0.5
    band: tuple[float, float] = (0.02, 0.5)  # Hz
    seed: int = 0
    flicker_corner: float = 0.0  # Hz
    window_coefficients: tuple[float, ...] = BLACKMAN_HARRIS

    def __post_init__(self):
        if not (self.fs > 0 and self.duration > 0 and self.floor >= 0):
            raise ValueError("fs, duration must be positive and floor non-negative")
        if self.window_len < 8:
            raise ValueError("window_len must be at least 8")
        if not 0 <= self.overlap < 1:
            raise ValueError("overlap must be in [0, 1)")
        if not 0 <= self.band[0] < self.band[1] <= self.fs / 2:
            raise ValueError("band must satisfy 0 <= f_lo < f_hi <= fs/2")
        for f, _ in self.tones:
            if not 0 <= f < self.fs / 2:
                raise ValueError(f"tone at {f} Hz aliases at fs = {self.fs} Hz")


@dataclass(frozen=True)
class ModulationSettings:
    drive: ModulationDrive = ModulationDrive()
    curve: TransferCurve = TransferCurve()
    concentrator: ConcentratorFit = DEFAULT_CONCENTRATOR
    gap: float = 0.4  # mm


@dataclass(frozen=True)
class ScenarioConfig:
    params: dict[str, ProtocolParams]
    constants: PhysicalConstants = PhysicalConstants()
    modulation: ModulationSettings = ModulationSettings()
    optical: OpticalParams = OpticalParams()
    dispersion: DispersionParams = DispersionParams()
    dsp: DspSettings = DspSettings()
    source: str | None = field(default=None, compare=False)

    def get(self, name: str | None = None) -> ProtocolParams:
        """Named parameter set; with ``name=None`` the only set in the file."""
        if name is None:
            if len(self.params) != 1:
                raise KeyError(f"scenario has several parameter sets {list(self.params)}; pick one")
            return next(iter(self.params.values()))
        try:
            return self.params[name]
        except KeyError:
            raise KeyError(f"no parameter set {name!r}; available: {list(self.params)}") from None


def _line_index(text):
    # (section, key) -> line number, and section -> header line number
    idx, heads = {}, {}
    section = None
    for n, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if not s or s[0] in "#;":
            continue
        m = re.match(r"^\[([^\]]+)\]", s)
        if m:
            section = m.group(1).strip()
            heads[section] = n
            continue
        m = re.match(r"^([^=:]+?)\s*[=:]", s)
        if m and section is not None:
            idx.setdefault((section, m.group(1).strip()), n)
    return idx, heads


_SIMPLE_BLOCKS = {
    "constants": PhysicalConstants,
    "optical": OpticalParams,
    "dispersion": DispersionParams,
}
_MOD_DRIVE = {f.name for f in fields(ModulationDrive)}
_MOD_EXTRA = {"curve", "anchors", "anchors_csv", "c", "B_sat", "slope", "gap", "a", "b", "calibration_scale"}
_DSP_KEYS = {f.name for f in fields(DspSettings)}


def parse_scenario(text: str, path=None) -> ScenarioConfig:
    """Parse and validate scenario text; see :func:`load_scenario`."""
    cp = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"),
                                   inline_comment_prefixes=("#",), default_section="__none__")
    cp.optionxform = str
    try:
        cp.read_string(text, source=str(path or "<scenario>"))
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] if exc.errors else None
        raise ScenarioError("syntax error", path, lineno) from None
    except (configparser.DuplicateSectionError, configparser.DuplicateOptionError) as exc:
        raise ScenarioError(exc.message.split(": ", 1)[-1], path, exc.lineno) from None
    except configparser.MissingSectionHeaderError as exc:
        raise ScenarioError("key outside of any [section]", path, exc.lineno) from None
    lines, heads = _line_index(text)

    def err(msg, section, key=None):
        return ScenarioError(msg, path, lines.get((section, key)) if key else heads.get(section))

    def quantity(section, key, block=None):
        raw = cp[section][key]
        try:
            return parse_quantity(raw, CANONICAL.get((block or section, key), 1.0))
        except ValueError as exc:
            raise err(f"[{section}] {key}: {exc}", section, key) from None

    def check_keys(section, allowed):
        for key in cp[section]:
            if key not in allowed:
                raise err(f"[{section}] unknown key {key!r}", section, key)

    param_sections = [s for s in cp.sections() if s.startswith("params.")]
    if not param_sections:
        raise ScenarioError("missing required block: at least one [params.<name>] section", path)
    known = set(_SIMPLE_BLOCKS) | {"modulation", "dsp"}
    for s in cp.sections():
        if s not in known and not s.startswith("params."):
            raise err(f"unknown section [{s}]", s)

    params = {}
    pnames = set(ProtocolParams.field_names())
    for s in param_sections:
        name = s.split(".", 1)[1]
        if not name:
            raise err("parameter set needs a name: [params.<name>]", s)
        check_keys(s, pnames)
        values = {k: quantity(s, k) for k in cp[s]}
        p = reference_defaults(name).replace(**values)
        try:
            params[name] = p.check(f"[{s}]")
        except ParameterError as exc:
            first = exc.violations[0].field
            raise err(f"validation error: {exc}", s, first) from None

    blocks = {}
    for s, cls in _SIMPLE_BLOCKS.items():
        if s not in cp:
            blocks[s] = cls()
            continue
        check_keys(s, {f.name for f in fields(cls)})
        try:
            blocks[s] = cls(**{k: quantity(s, k) for k in cp[s]})
        except ValueError as exc:
            raise err(f"validation error in [{s}]: {exc}", s) from None

    modulation = ModulationSettings()
    if "modulation" in cp:
        s = "modulation"
        check_keys(s, _MOD_DRIVE | _MOD_EXTRA)
        sec = cp[s]
        try:
            drive = ModulationDrive(**{k: quantity(s, k) for k in sec if k in _MOD_DRIVE})
            kind = sec.get("curve", "experimental").strip()
            if kind == "experimental":
                if "anchors_csv" in sec:
                    csv_path = Path(sec["anchors_csv"].strip())
                    if path is not None and not csv_path.is_absolute():
                        csv_path = Path(path).parent / csv_path
                    curve = TransferCurve.from_csv(csv_path)
                elif "anchors" in sec:
                    curve = TransferCurve("experimental", _parse_pairs(sec["anchors"]))
                else:
                    curve = TransferCurve("experimental", EXPERIMENTAL_ANCHORS)
            elif kind == "ideal":
                c = quantity(s, "c") if "c" in sec else IDEAL_CURVE.c
                B_sat = quantity(s, "B_sat") if "B_sat" in sec else 1.0
                curve = TransferCurve("ideal", c=c, B_sat=B_sat)
            elif kind == "linear":
                curve = TransferCurve("linear", slope=quantity(s, "slope") if "slope" in sec else 1.0)
            else:
                raise err(f"[modulation] curve must be experimental, ideal or linear (got {kind!r})", s, "curve")
            if "a" in sec or "b" in sec:
                conc = ConcentratorFit(quantity(s, "a"), quantity(s, "b"),
                                       quantity(s, "calibration_scale") if "calibration_scale" in sec else 1.0)
            else:
                scale = quantity(s, "calibration_scale") if "calibration_scale" in sec else 1.0
                conc = ConcentratorFit(DEFAULT_CONCENTRATOR.a, DEFAULT_CONCENTRATOR.b, scale)
            gap = quantity(s, "gap") if "gap" in sec else 0.4
            if not gap > 0:
                raise ValueError("gap must be positive")
            lo, hi = curve.h_range
            if drive.h_eq - drive.amplitude < lo - 1e-9 or drive.h_eq + drive.amplitude > hi + 1e-9:
                raise ValueError(
                    f"chip excursion [{drive.h_eq - drive.amplitude}, {drive.h_eq + drive.amplitude}] um "
                    f"leaves the transfer-curve domain [{lo}, {hi}] um"
                )
        except ScenarioError:
            raise
        except (ValueError, OSError) as exc:
            raise err(f"validation error in [modulation]: {exc}", s) from None
        modulation = ModulationSettings(drive, curve, conc, gap)

    dsp = DspSettings()
    if "dsp" in cp:
        s = "dsp"
        check_keys(s, _DSP_KEYS)
        sec = cp[s]
        kw = {}
        for k in sec:
            if k == "tones":
                try:
                    kw[k] = _parse_pairs(sec[k], sep=";")
                except ValueError as exc:
                    raise err(f"[dsp] tones: {exc}", s, k) from None
            elif k == "band":
                try:
                    lo_hi = tuple(parse_quantity(v) for v in sec[k].split(","))
                except ValueError as exc:
                    raise err(f"[dsp] band: {exc}", s, k) from None
                if len(lo_hi) != 2:
                    raise err("[dsp] band needs two frequencies 'f_lo, f_hi'", s, k)
                kw[k] = lo_hi
            elif k == "window_coefficients":
                kw[k] = tuple(float(v) for v in sec[k].split(","))
            elif k in ("window_len", "seed"):
                v = quantity(s, k)
                if v != int(v):
                    raise err(f"[dsp] {k} must be an integer", s, k)
                kw[k] = int(v)
            else:
                kw[k] = quantity(s, k)
        try:
            dsp = DspSettings(**kw)
        except ValueError as exc:
            raise err(f"validation error in [dsp]: {exc}", s) from None

    return ScenarioConfig(
        params=params,
        constants=blocks["constants"],
        modulation=modulation,
        optical=blocks["optical"],
        dispersion=blocks["dispersion"],
        dsp=dsp,
        source=str(path) if path else None,
    )


def _parse_pairs(text, sep=",", canon=(1.0, 1.0)):
    """'0:8.95, 3:10.47' -> ((0.0, 8.95), (3.0, 10.47))."""
    out = []
    for item in text.split(sep):
        item = item.strip()
        if not item:
            continue
        parts = item.split(":")
        if len(parts) != 2:
            raise ValueError(f"expected 'x:y' pair, got {item!r}")
        out.append((parse_quantity(parts[0], canon[0]), parse_quantity(parts[1], canon[1])))
    return tuple(out)


def resolve_scenario_path(path) -> Path:
    """Accept a filesystem path or the name of a bundled scenario."""
    p = Path(path)
    if p.is_file():
        return p
    bundled = BUNDLED_DIR / p.name
    if not p.parent.parts and bundled.is_file():
        return bundled
    raise FileNotFoundError(f"file not found: {path}")


def load_scenario(path) -> ScenarioConfig:
    """Read, parse and validate a scenario file.

    ``path`` may also be the bare name of a bundled scenario such as
    ``table_s1.cfg``.

    Raises
    ------
    FileNotFoundError
        If the file does not exist.
    ScenarioError
        On syntax errors (with line number), a missing parameter block, or
        any violated invariant (naming field and rule).
    """
    p = resolve_scenario_path(path)
    return parse_scenario(p.read_text(encoding="utf-8"), p)


def bundled_scenarios() -> list[str]:
    return sorted(f.name for f in BUNDLED_DIR.glob("*.cfg"))


def serialize(cfg: ScenarioConfig) -> str:
    """Render a configuration as scenario text that parses back to an equal object."""
    out = []

    def block(name, items):
        out.append(f"[{name}]")
        out.extend(f"{k} = {v}" for k, v in items)
        out.append("")

    for name, p in cfg.params.items():
        block(f"params.{name}", ((k, repr(v)) for k, v in asdict(p).items()))
    block("constants", ((k, repr(v)) for k, v in asdict(cfg.constants).items()))

    mod = cfg.modulation
    items = [(k, repr(getattr(mod.drive, k))) for k in
             ("f_mod", "amplitude", "h_eq", "phase", "t_d1", "t_d2", "t_d3")]
    items.append(("curve", mod.curve.kind))
    if mod.curve.kind == "experimental":
        items.append(("anchors", ", ".join(f"{h!r}:{b!r}" for h, b in mod.curve.anchors)))
    elif mod.curve.kind == "ideal":
        items += [("c", repr(mod.curve.c)), ("B_sat", repr(mod.curve.B_sat))]
    else:
        items.append(("slope", repr(mod.curve.slope)))
    items += [("a", repr(mod.concentrator.a)), ("b", repr(mod.concentrator.b)),
              ("calibration_scale", repr(mod.concentrator.calibration_scale)), ("gap", repr(mod.gap))]
    block("modulation", items)

    block("optical", ((k, repr(v)) for k, v in asdict(cfg.optical).items()))
    block("dispersion", ((k, repr(v)) for k, v in asdict(cfg.dispersion).items()))
    d = cfg.dsp
    block("dsp", [
        ("fs", repr(d.fs)), ("duration", repr(d.duration)), ("floor", repr(d.floor)),
        ("tones", "; ".join(f"{f!r}:{a!r}" for f, a in d.tones)),
        ("window_len", repr(d.window_len)), ("overlap", repr(d.overlap)),
        ("band", f"{d.band[0]!r}, {d.band[1]!r}"), ("seed", repr(d.seed)),
        ("flicker_corner", repr(d.flicker_corner)),
        ("window_coefficients", ", ".join(repr(c) for c in d.window_coefficients)),
    ])
    return "\n".join(out)
