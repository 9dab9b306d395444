"""Run configuration: an INI-style file with dotted keys, plus command-line overrides.

A file looks like::

    [device]
    target_rate = 4e6
    temperature = 25

    [detectors]
    late_click_prob = 0.02

    [run]
    seed = 1
    bits = 1048576

Every key may also be given as ``section.key=value`` on the command line; those win over
the file.  Unknown sections or keys are errors, so typos do not pass silently.
"""
from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .device import DeviceConfig, EfficiencyCurve, FeedbackParams, TimingParams
from .physics import DetectorParams, OpticalParams

NESTED = {
    "optics": OpticalParams,
    "detectors": DetectorParams,
    "timing": TimingParams,
    "feedback": FeedbackParams,
    "efficiency_curve": EfficiencyCurve,
}
ENGINES = ("auto", "dense", "sparse")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    device: DeviceConfig = field(default_factory=DeviceConfig)
    seed: int | None = None
    n_bits: int | None = None
    n_cycles: int | None = None
    seconds: float | None = None
    record_events: bool = True
    engine: str = "auto"
    out_dir: str | None = None

    def __post_init__(self):
        if self.seed is not None and not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.engine not in ENGINES:
            raise ConfigError(f"engine must be one of {ENGINES}")

    def length(self) -> dict:
        """The single run-length keyword for :func:`run_simulation`."""
        given = {k: v for k, v in (("n_bits", self.n_bits), ("n_cycles", self.n_cycles), ("seconds", self.seconds)) if v is not None}
        if len(given) != 1:
            raise ConfigError("give exactly one of bits, cycles or seconds")
        return given

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)


def _parse_value(text: str, current, key: str):
    text = text.strip()
    try:
        if isinstance(current, bool):
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if isinstance(current, int):
            return int(float(text)) if "e" in text.lower() else int(text)
        if isinstance(current, float):
            return float(text)
        if isinstance(current, tuple) or current is None:
            if text.lower() in ("", "none"):
                return None
            return tuple(float(x) for x in text.split(","))
        return text
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text!r}") from None


def _to_text(value) -> str:
    if isinstance(value, tuple):
        return ",".join(repr(float(x)) for x in value)
    if value is None:
        return "none"
    return str(value)


# run-section keys: name in file -> (RunConfig field, default used for typing)
_RUN_KEYS = {
    "seed": ("seed", 0),
    "bits": ("n_bits", 0),
    "cycles": ("n_cycles", 0),
    "seconds": ("seconds", 0.0),
    "record_events": ("record_events", True),
    "engine": ("engine", "auto"),
    "out": ("out_dir", ""),
}


def apply_overrides(run: RunConfig, items: dict[str, str]) -> RunConfig:
    """Apply ``{"section.key": "text"}`` pairs.  Sections: run, device and the nested ones."""
    device_top: dict = {}
    nested: dict[str, dict] = {}
    run_changes: dict = {}
    for dotted, text in items.items():
        if "." not in dotted:
            raise ConfigError(f"{dotted}: keys must be written section.key")
        section, key = dotted.split(".", 1)
        if section == "run":
            if key not in _RUN_KEYS:
                raise ConfigError(f"unknown key {dotted}")
            name, proto = _RUN_KEYS[key]
            value = _parse_value(text, proto, dotted)
            run_changes[name] = value if value != "" else None
        elif section == "device":
            fields = {f.name for f in dataclasses.fields(DeviceConfig)} - set(NESTED)
            if key not in fields:
                raise ConfigError(f"unknown key {dotted}")
            device_top[key] = _parse_value(text, getattr(run.device, key), dotted)
        elif section in NESTED:
            obj = getattr(run.device, section)
            if key not in {f.name for f in dataclasses.fields(obj)}:
                raise ConfigError(f"unknown key {dotted}")
            nested.setdefault(section, {})[key] = _parse_value(text, getattr(obj, key), dotted)
        else:
            raise ConfigError(f"unknown section {section!r}")
    try:
        for section, changes in nested.items():
            device_top[section] = dataclasses.replace(getattr(run.device, section), **changes)
        device = dataclasses.replace(run.device, **device_top) if device_top else run.device
        return dataclasses.replace(run, device=device, **run_changes)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path=None, overrides: dict[str, str] | None = None) -> RunConfig:
    """Defaults, then the file (if any), then ``overrides``."""
    items: dict[str, str] = {}
    if path is not None:
        parser = configparser.ConfigParser(interpolation=None)
        try:
            with Path(path).open() as fh:
                parser.read_file(fh)
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from None
        for section in parser.sections():
            for key, value in parser.items(section):
                items[f"{section}.{key}"] = value
    items.update(overrides or {})
    return apply_overrides(RunConfig(), items)


def dump_config(run: RunConfig) -> str:
    """INI text that :func:`load_config` reads back to an equal RunConfig."""
    parser = configparser.ConfigParser(interpolation=None)
    dev = run.device
    parser["device"] = {
        f.name: _to_text(getattr(dev, f.name)) for f in dataclasses.fields(dev) if f.name not in NESTED
    }
    for section in NESTED:
        obj = getattr(dev, section)
        parser[section] = {f.name: _to_text(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    parser["run"] = {
        key: _to_text(getattr(run, name)) for key, (name, _) in _RUN_KEYS.items() if getattr(run, name) is not None
    }
    lines = []
    for section in parser.sections():
        lines.append(f"[{section}]")
        lines.extend(f"{k} = {v}" for k, v in parser[section].items())
        lines.append("")
    return "\n".join(lines)


def config_hash(device: DeviceConfig) -> str:
    """SHA-256 of the canonical JSON form of a device configuration."""
    blob = json.dumps(dataclasses.asdict(device), sort_keys=True, default=list)
    return hashlib.sha256(blob.encode()).hexdigest()
