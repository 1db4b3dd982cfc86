"""Run configuration: INI or JSON files, presets and validation.

Files use flat sections.  Every key is optional; unknown sections or keys
are rejected so that a typo never silently falls back to a default.

    [protocol]   protocols = het-intra, div-cross
    [comb]       lines, power_w, duration_s, wavelength_m
    [squeezing]  gain_a_db, gain_b_db
    [sample]     line, kappa, theta_rad, temperature_k | thermal
    [constraint] kind (sample|detector), split, lo (strong|matched), objective (local|global)
    [scan]       kappa, gain_db, lines, split   (comma-separated lists)
    [output]     path
    [oracle]     seed, mc_samples, n_half, tolerance_rel, mc_sigma_limit
"""

from __future__ import annotations

import configparser
import io
import json
from dataclasses import dataclass, replace

import numpy as np

from .receivers import PROTOCOLS, Protocol


class ConfigError(ValueError):
    """Invalid configuration; ``key`` names the offending ``section.key``."""

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


def _floats(text):
    return tuple(float(x) for x in str(text).replace(";", ",").split(",") if x.strip())


def _ints(text):
    return tuple(int(x) for x in str(text).replace(";", ",").split(",") if x.strip())


def _opt_float(text):
    return None if str(text).strip().lower() in ("", "none") else float(text)


def _protocols(text):
    names = text if isinstance(text, (list, tuple)) else str(text).split(",")
    return tuple(Protocol.parse(n) for n in names if str(n).strip())


# (section, key) -> (attribute, parser)
SCHEMA = {
    ("protocol", "protocols"): ("protocols", _protocols),
    ("comb", "lines"): ("n_lines", int),
    ("comb", "power_w"): ("power_w", float),
    ("comb", "duration_s"): ("duration_s", float),
    ("comb", "wavelength_m"): ("wavelength_m", float),
    ("squeezing", "gain_a_db"): ("gain_a_db", float),
    ("squeezing", "gain_b_db"): ("gain_b_db", float),
    ("sample", "line"): ("line", int),
    ("sample", "kappa"): ("kappa", float),
    ("sample", "theta_rad"): ("theta_rad", float),
    ("sample", "temperature_k"): ("temperature_k", _opt_float),
    ("sample", "thermal"): ("thermal", _opt_float),
    ("constraint", "kind"): ("constraint", str),
    ("constraint", "split"): ("split", _opt_float),
    ("constraint", "lo"): ("lo", str),
    ("constraint", "objective"): ("objective", str),
    ("scan", "kappa"): ("scan_kappa", _floats),
    ("scan", "gain_db"): ("scan_gain_db", _floats),
    ("scan", "lines"): ("scan_lines", _ints),
    ("scan", "split"): ("scan_split", _floats),
    ("scan", "constraint"): ("scan_constraint", lambda t: tuple(x.strip() for x in (
        t if isinstance(t, (list, tuple)) else str(t).split(",")) if x.strip())),
    ("output", "path"): ("output", lambda s: str(s) or None),
    ("oracle", "seed"): ("seed", int),
    ("oracle", "mc_samples"): ("mc_samples", int),
    ("oracle", "n_half"): ("oracle_n_half", int),
    ("oracle", "tolerance_rel"): ("tolerance_rel", float),
    ("oracle", "mc_sigma_limit"): ("mc_sigma_limit", float),
}
ATTRIBUTE_KEY = {attr: f"{sec}.{key}" for (sec, key), (attr, _) in SCHEMA.items()}


@dataclass(frozen=True)
class RunConfig:
    protocols: tuple = PROTOCOLS
    n_lines: int = 1001
    power_w: float = 0.015
    duration_s: float = 1.0
    wavelength_m: float = 1563e-9
    gain_a_db: float = 15.0
    gain_b_db: float = 15.0
    line: int = 1
    kappa: float = 1.0
    theta_rad: float = 0.0
    temperature_k: float | None = None
    thermal: float | None = None
    constraint: str = "sample"
    split: float | None = None
    lo: str = "strong"
    objective: str = "local"
    scan_kappa: tuple = ()
    scan_gain_db: tuple = ()
    scan_lines: tuple = ()
    scan_split: tuple = ()
    scan_constraint: tuple = ()
    output: str | None = None
    seed: int = 0
    mc_samples: int = 0
    oracle_n_half: int = 4
    tolerance_rel: float = 1e-9
    mc_sigma_limit: float = 4.0

    def __post_init__(self):
        self.validate()

    def validate(self):
        def fail(attr, msg):
            raise ConfigError(ATTRIBUTE_KEY[attr], msg)

        if not self.protocols:
            fail("protocols", "at least one protocol is required")
        for attr in ("n_lines",):
            v = getattr(self, attr)
            if v < 3 or v % 2 == 0:
                fail(attr, "number of lines must be odd and at least 3")
        for m in self.scan_lines:
            if m < 3 or m % 2 == 0:
                fail("scan_lines", f"number of lines must be odd and at least 3, got {m}")
        for attr in ("power_w", "duration_s", "wavelength_m"):
            if not getattr(self, attr) > 0:
                fail(attr, "must be positive")
        for attr in ("gain_a_db", "gain_b_db"):
            if not getattr(self, attr) >= 0:
                fail(attr, "gain in dB must be >= 0")
        for g in self.scan_gain_db:
            if g < 0:
                fail("scan_gain_db", "gain in dB must be >= 0")
        for k in (self.kappa, *self.scan_kappa):
            if not 0.0 <= k <= 1.0:
                fail("scan_kappa" if k != self.kappa else "kappa", f"kappa {k} outside [0, 1]")
        half = (min((self.n_lines, *self.scan_lines)) - 1) // 2
        if self.line == 0 or abs(self.line) > half:
            fail("line", f"absorbing line must satisfy 1 <= |m| <= {half}")
        if self.temperature_k is not None and self.thermal is not None:
            fail("thermal", "give either temperature_k or thermal, not both")
        if self.temperature_k is not None and not self.temperature_k > 0:
            fail("temperature_k", "must be positive")
        if self.thermal is not None and not self.thermal >= 0:
            fail("thermal", "must be non-negative")
        if self.constraint not in ("sample", "detector"):
            fail("constraint", "must be 'sample' or 'detector'")
        for c in self.scan_constraint:
            if c not in ("sample", "detector"):
                fail("scan_constraint", f"unknown constraint {c!r}")
        if self.lo not in ("strong", "matched"):
            fail("lo", "must be 'strong' or 'matched'")
        if self.objective not in ("local", "global"):
            fail("objective", "must be 'local' or 'global'")
        for f in ((self.split,) if self.split is not None else ()) + self.scan_split:
            if not 0.0 < f < 1.0:
                fail("split" if f == self.split else "scan_split", "power fraction must lie in (0, 1)")
        if self.mc_samples and self.mc_samples < 1000:
            fail("mc_samples", "Monte-Carlo needs at least 1000 samples (or 0 to disable)")
        if not 1 <= self.oracle_n_half <= 12:
            fail("oracle_n_half", "oracle half-width must lie in [1, 12]")
        if not self.tolerance_rel > 0:
            fail("tolerance_rel", "must be positive")
        if not self.mc_sigma_limit > 0:
            fail("mc_sigma_limit", "must be positive")
        if not 0 <= self.seed < 2 ** 64:
            fail("seed", "must be an unsigned 64-bit integer")

    @property
    def has_scan(self):
        return bool(self.scan_kappa or self.scan_gain_db or self.scan_lines or self.scan_split
                    or self.scan_constraint)

    # serialization ---------------------------------------------------------

    def to_sections(self):
        out = {}
        for (sec, key), (attr, _) in SCHEMA.items():
            value = getattr(self, attr)
            if value is None:
                continue
            if attr == "protocols":
                value = [p.name for p in value]
            elif isinstance(value, tuple):
                if not value:
                    continue
                value = [float(x) if isinstance(x, (float, np.floating)) else x for x in value]
            out.setdefault(sec, {})[key] = value
        return out

    def to_json(self):
        return json.dumps(self.to_sections(), indent=2)

    def to_ini(self):
        parser = configparser.ConfigParser()
        for sec, items in self.to_sections().items():
            parser[sec] = {k: ", ".join(map(_fmt, v)) if isinstance(v, list) else _fmt(v)
                           for k, v in items.items()}
        buf = io.StringIO()
        parser.write(buf)
        return buf.getvalue()


def _fmt(v):
    return repr(v) if isinstance(v, float) else str(v)


def from_sections(sections, base=None):
    """Build a config from a {section: {key: value}} mapping."""
    values = {}
    for sec, items in sections.items():
        if not isinstance(items, dict):
            raise ConfigError(sec, "section must map keys to values")
        for key, raw in items.items():
            if (sec, key) not in SCHEMA:
                raise ConfigError(f"{sec}.{key}", "unknown key")
            attr, parse = SCHEMA[(sec, key)]
            try:
                if isinstance(raw, list) and parse in (_floats, _ints):
                    value = tuple(float(x) if parse is _floats else int(x) for x in raw)
                elif isinstance(raw, bool) or (raw is None and parse is not _opt_float):
                    raise ValueError(f"invalid value {raw!r}")
                else:
                    value = parse(raw if raw is not None else "none")
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{sec}.{key}", str(exc)) from None
            values[attr] = value
    base = base or RunConfig()
    return replace(base, **values)


def load_config(path, base=None):
    """Read an INI or JSON file (JSON when the text starts with '{')."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_config(text, base)


def parse_config(text, base=None):
    if text.lstrip().startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("<file>", f"invalid JSON: {exc}") from None
        return from_sections(data, base)
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("<file>", f"invalid INI: {exc}") from None
    return from_sections({s: dict(parser[s]) for s in parser.sections()}, base)


PRESETS = {
    # symmetric line powers, sample-power budget, both receivers, kappa sweep
    "fig2": dict(constraint="sample", split=0.5, lo="matched", gain_a_db=15.0, gain_b_db=15.0,
                 scan_kappa=tuple(np.round(np.linspace(0.0, 1.0, 101), 10))),
    # cross-line entanglement, optimized split, both constraints via two runs
    "fig3": dict(protocols=(Protocol.parse("het-cross"), Protocol.parse("div-cross")),
                 constraint="sample", lo="strong", split=None, gain_a_db=15.0, gain_b_db=15.0,
                 scan_kappa=tuple(np.round(np.linspace(0.0, 1.0, 51), 10)),
                 scan_gain_db=(0.0, 15.0), scan_constraint=("sample", "detector")),
}


def preset(name):
    if name not in PRESETS:
        raise ConfigError("--preset", f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    values = dict(PRESETS[name])
    for key in ("scan_kappa", "scan_gain_db", "scan_split"):
        if key in values:
            values[key] = tuple(float(x) for x in values[key])
    return RunConfig(**values)


def gains_linear(config):
    return 10.0 ** (config.gain_a_db / 10.0), 10.0 ** (config.gain_b_db / 10.0)
