"""Run configuration for the batch front-end.

Configs are TOML files. Every key is checked against the schema below; an
unknown key or an invalid value is reported with the line it appears on.
Omitted keys take the defaults, which reproduce the reference operating point
(800 MHz carrier, 10 nF, 50/5 ohm, 10 Mohm off resistance, 0.25 V threshold).
"""

from __future__ import annotations

import copy
import re
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np

from .circuit import CircuitParams
from .errors import InfeasibleError
from .experiments import DETECTORS
from .modem import build_constellation

MODULATION_ORDERS = {"BASK": 2, "QASK": 4}

DEFAULTS = {
    "seed": 1,
    "workers": 0,
    "output_dir": "out",
    "emit_plots": False,
    "circuit": {
        "capacitance": 10e-9,
        "source_resistance": 50.0,
        "on_resistance": 5.0,
        "off_resistance": 10e6,
        "load_resistance": 1e3,
        "diode_threshold": 0.25,
        "carrier_frequency": 800e6,
    },
    "simulation": {
        "samples_per_period": 100,
        "refine_switching": False,
        "table_budget": 65536,
        "steady_tolerance": 1e-3,
    },
    "modulation": {
        "min_amplitude": 0.5,
        "avg_power": 5.0 / 16.0,
    },
    "transient": {
        "amplitude": 1.0,
        "duration": 20e-6,
        "loads": [1e3, "open"],
        "oracle": False,
        "write_every": 10,
    },
    "ber": {
        "block_length": 6,
        "eb_n0_db": [float(x) for x in range(0, 15)],
        "target_bits": 1_000_000,
        "curve": [
            {"modulation": "BASK", "detector": "ML_bounded", "symbol_period": 6.25e-6, "window": 1},
            {"modulation": "BASK", "detector": "ML_bounded", "symbol_period": 12.5e-6, "window": 1},
            {"modulation": "BASK", "detector": "ML_bounded", "symbol_period": 18.75e-6, "window": 1},
            {"modulation": "BASK", "detector": "ML_steady", "symbol_period": 18.75e-6, "window": 1},
            {"modulation": "QASK", "detector": "ML_steady", "symbol_period": 18.75e-6, "window": 1},
            {"modulation": "BASK", "detector": "MLSD", "symbol_period": 6.25e-6, "window": 6},
            {"modulation": "BASK", "detector": "MLSD", "symbol_period": 12.5e-6, "window": 6},
        ],
    },
    "eh": {
        "modulation": "BASK",
        "symbol_periods": [6.25e-6, 12.5e-6, 18.75e-6],
        "block_length": 6,
        "num_blocks": 1000,
    },
    "verify": {
        "amplitudes": [1.0, 0.0],
        "loads": [1e3, "open"],
        "duration": 20e-6,
        "steps_per_period": 200,
        "symbol_sequence": [1.0, 0.5, 1.0, 1.0, 0.5, 0.5],
        "symbol_period": 6.25e-6,
    },
}

_CURVE_KEYS = {"modulation", "detector", "symbol_period", "window"}


class ConfigError(ValueError):
    pass


@dataclass
class CurveSpec:
    modulation: str
    detector: str
    symbol_period: float
    window: int


@dataclass
class RunConfig:
    """Validated run configuration; ``raw`` keeps the merged key/value tree."""

    raw: dict
    source: str = "<defaults>"
    circuit: CircuitParams = field(init=False)
    curves: list = field(init=False)

    def __post_init__(self):
        self.circuit = CircuitParams(**self.raw["circuit"])
        self.curves = [CurveSpec(**c) for c in self.raw["ber"]["curve"]]

    def section(self, name):
        return self.raw[name]

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    @property
    def output_dir(self) -> Path:
        return Path(self.raw["output_dir"])

    def table_kwargs(self) -> dict:
        sim = self.raw["simulation"]
        return {"samples_per_period": sim["samples_per_period"],
                "refine": sim["refine_switching"], "budget": sim["table_budget"]}

    def constellation(self, modulation: str):
        mod = self.raw["modulation"]
        return build_constellation(modulation_order(modulation), mod["min_amplitude"], mod["avg_power"])

    def circuit_for_load(self, load) -> CircuitParams:
        params = dict(self.raw["circuit"])
        params["load_resistance"] = load
        return CircuitParams(**params)


def modulation_order(name: str) -> int:
    if name in MODULATION_ORDERS:
        return MODULATION_ORDERS[name]
    m = re.fullmatch(r"(\d+)-ASK", name)
    if m:
        return int(m.group(1))
    raise ValueError(f"unknown modulation {name!r}; use BASK, QASK or '<M>-ASK'")


class _Locator:
    """Maps (section path, key) to a line number of the TOML source."""

    def __init__(self, text: str):
        self.lines = text.splitlines()

    def find(self, path: tuple, key: str | None = None, occurrence: int = 0) -> int | None:
        header = ".".join(path)
        current = ""
        seen = -1
        for no, line in enumerate(self.lines, start=1):
            s = line.strip()
            m = re.match(r"^\[\[?\s*([^\]]+?)\s*\]\]?", s)
            if m:
                current = m.group(1)
                if current == header:
                    seen += 1
                    if key is None and seen == occurrence:
                        return no
                continue
            if key is not None and current == header and (seen == occurrence or not path):
                if re.match(rf"^{re.escape(key)}\s*=", s):
                    return no
        return None


def _where(loc, source, path, key=None, occurrence=0):
    line = loc.find(path, key, occurrence) if loc else None
    name = ".".join(path + ((key,) if key else ()))
    return f"{source}:{line}: {name}" if line else f"{source}: {name}"


def _merge(defaults, user, loc, source, path=()):
    out = copy.deepcopy(defaults)
    for key, value in user.items():
        if key not in defaults:
            raise ConfigError(f"{_where(loc, source, path, key)}: unknown key")
        if isinstance(defaults[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{_where(loc, source, path, key)}: expected a section")
            out[key] = _merge(defaults[key], value, loc, source, path + (key,))
        else:
            out[key] = value
    return out


def _validate(raw, loc, source):
    def fail(path, key, msg, occurrence=0):
        raise ConfigError(f"{_where(loc, source, path, key, occurrence)}: {msg}")

    for key in ("seed", "workers"):
        if not isinstance(raw[key], int) or raw[key] < 0:
            fail((), key, "must be a non-negative integer")
    try:
        CircuitParams(**raw["circuit"])
    except (TypeError, ValueError) as exc:
        fail(("circuit",), None, str(exc))
    sim = raw["simulation"]
    if not sim["samples_per_period"] >= 2:
        fail(("simulation",), "samples_per_period", "must be at least 2")
    if not (isinstance(sim["table_budget"], int) and sim["table_budget"] >= 1):
        fail(("simulation",), "table_budget", "must be a positive integer")
    if not 0 < sim["steady_tolerance"] < 1:
        fail(("simulation",), "steady_tolerance", "must lie in (0, 1)")
    von = raw["circuit"]["diode_threshold"]
    if raw["modulation"]["min_amplitude"] <= von:
        fail(("modulation",), "min_amplitude", f"must exceed the diode threshold {von} V")

    def check_modulation(path, key, name, occurrence=0):
        try:
            order = modulation_order(name)
            build_constellation(order, raw["modulation"]["min_amplitude"], raw["modulation"]["avg_power"])
        except InfeasibleError as exc:
            fail(("modulation",), "avg_power", str(exc))
        except ValueError as exc:
            fail(path, key, str(exc), occurrence)

    tr = raw["transient"]
    if not tr["duration"] > 0:
        fail(("transient",), "duration", "must be positive")
    if not tr["amplitude"] >= 0:
        fail(("transient",), "amplitude", "must be non-negative")
    if not (isinstance(tr["write_every"], int) and tr["write_every"] >= 1):
        fail(("transient",), "write_every", "must be a positive integer")
    ber = raw["ber"]
    big_l = ber["block_length"]
    if not (isinstance(big_l, int) and big_l >= 1):
        fail(("ber",), "block_length", "must be a positive integer")
    if not (isinstance(ber["target_bits"], int) and ber["target_bits"] >= 1):
        fail(("ber",), "target_bits", "must be a positive integer")
    if not all(isinstance(x, (int, float)) for x in ber["eb_n0_db"]):
        fail(("ber",), "eb_n0_db", "must be a list of numbers")
    for i, curve in enumerate(ber["curve"]):
        path = ("ber", "curve")
        if not isinstance(curve, dict):
            fail(("ber",), "curve", "entries must be tables")
        extra = set(curve) - _CURVE_KEYS
        if extra:
            fail(path, sorted(extra)[0], "unknown key", i)
        missing = _CURVE_KEYS - set(curve)
        if missing:
            fail(path, None, f"missing {', '.join(sorted(missing))}", i)
        check_modulation(path, "modulation", curve["modulation"], i)
        if curve["detector"] not in DETECTORS:
            fail(path, "detector", f"must be one of {', '.join(DETECTORS)}", i)
        if not curve["symbol_period"] > 0:
            fail(path, "symbol_period", "must be positive", i)
        k = curve["window"]
        if not (isinstance(k, int) and 1 <= k <= big_l and big_l % k == 0):
            fail(path, "window", f"must be a positive divisor of block_length {big_l}", i)
    eh = raw["eh"]
    check_modulation(("eh",), "modulation", eh["modulation"])
    if not all(ts > 0 for ts in eh["symbol_periods"]):
        fail(("eh",), "symbol_periods", "must all be positive")
    if not (isinstance(eh["num_blocks"], int) and eh["num_blocks"] >= 1):
        fail(("eh",), "num_blocks", "must be a positive integer")
    ver = raw["verify"]
    if not ver["steps_per_period"] >= 200:
        fail(("verify",), "steps_per_period", "must be at least 200")
    if not np.all(np.asarray(ver["amplitudes"], dtype=float) >= 0):
        fail(("verify",), "amplitudes", "must be non-negative")


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Read and validate a TOML run configuration (defaults only when ``path`` is None)."""
    user, loc, source = {}, None, "<defaults>"
    if path is not None:
        source = str(path)
        text = Path(path).read_text()
        try:
            user = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{source}: {exc}") from None
        loc = _Locator(text)
    raw = _merge(DEFAULTS, user, loc, source)
    for key, value in (overrides or {}).items():
        if value is not None:
            raw[key] = value
    _validate(raw, loc, source)
    return RunConfig(raw, source)
