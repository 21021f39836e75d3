"""INI run configuration with strict key checking.

Sections and keys mirror the dataclass fields they populate::

    [device]     DeviceParams fields (k_u, area, thickness, tmr, ...)
    [pv]         PvModel fields (sigma_delta_rel, ..., distribution)
    [env]        temperature, magnetic_tamper_factor, wordline_pulse ("auto" or seconds)
    [driver]     kind, i_write, tau_cc_slow
    [retention]  c, k
    [run]        seed, scheme, sample_rate, noise_sigma ("auto" = 1 % of full scale)

Every omitted key takes its documented default.  Unknown sections or keys
are rejected.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

from .device import DeviceParams, ParameterError, RetentionFit
from .encoding import NONE, EncodingScheme
from .io import config_hash
from .trace import DEFAULT_SAMPLE_RATE, DriverMode, Environment
from .variation import PvModel


class ConfigMissing(FileNotFoundError):
    exit_code = 2


class ConfigSyntaxError(ValueError):
    exit_code = 3


@dataclass(frozen=True)
class RunSettings:
    seed: int = 0
    scheme: EncodingScheme = NONE
    sample_rate: float = DEFAULT_SAMPLE_RATE
    noise_sigma: float | None = None  # None: 1 % of the full-scale write current

    def __post_init__(self):
        if self.seed < 0:
            raise ParameterError("seed must be non-negative")
        if not self.sample_rate > 0:
            raise ParameterError("sample_rate must be positive")
        if self.noise_sigma is not None and self.noise_sigma < 0:
            raise ParameterError("noise_sigma must be >= 0")


@dataclass(frozen=True)
class RunConfig:
    device: DeviceParams = field(default_factory=DeviceParams)
    pv: PvModel = field(default_factory=PvModel)
    env: Environment = field(default_factory=Environment)
    driver: DriverMode = field(default_factory=DriverMode)
    retention: RetentionFit = field(default_factory=RetentionFit)
    run: RunSettings = field(default_factory=RunSettings)

    def to_dict(self) -> dict[str, dict[str, Any]]:
        out = {}
        for f in fields(self):
            section = getattr(self, f.name)
            out[f.name] = {k.name: _plain(getattr(section, k.name)) for k in fields(section)}
        return out

    @property
    def hash(self) -> str:
        return config_hash(self.to_dict())

    def with_seed(self, seed: int) -> "RunConfig":
        from dataclasses import replace
        return replace(self, run=replace(self.run, seed=seed))


def _plain(v):
    if isinstance(v, EncodingScheme):
        return str(v)
    if hasattr(v, "value"):  # enums
        return v.value
    return v


def _convert(section: str, key: str, raw: str, default: Any):
    raw = raw.strip()
    try:
        if section == "env" and key == "wordline_pulse":
            return None if raw.lower() in ("", "auto", "none") else float(raw)
        if section == "run" and key == "noise_sigma":
            return None if raw.lower() in ("", "auto", "none") else float(raw)
        if section == "run" and key == "scheme":
            return EncodingScheme.parse(raw)
        if isinstance(default, bool):
            return raw.lower() in ("1", "true", "yes", "on")
        if isinstance(default, int) and not hasattr(default, "value"):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw  # enums and strings; validated by the dataclass
    except ParameterError as exc:
        raise ConfigSyntaxError(f"[{section}] {key}: {exc}") from exc
    except ValueError as exc:
        raise ConfigSyntaxError(f"[{section}] {key}: cannot parse {raw!r}") from exc


def parse_config(path: str | Path | None) -> RunConfig:
    """Load and validate a config file; ``None`` gives all defaults.

    Raises :class:`ConfigMissing`, :class:`ConfigSyntaxError`, or
    :class:`~sttleak.device.ParameterError` for invariant violations.
    """
    defaults = RunConfig()
    if path is None:
        return defaults
    path = Path(path)
    if not path.is_file():
        raise ConfigMissing(f"config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None, strict=True)
    parser.optionxform = str
    try:
        parser.read_string(path.read_text(), source=str(path))
    except configparser.Error as exc:
        raise ConfigSyntaxError(str(exc)) from exc

    known = {f.name: f for f in fields(RunConfig)}
    built = {}
    for name in parser.sections():
        if name not in known:
            raise ConfigSyntaxError(f"unknown section [{name}]")
    for name in known:
        base = getattr(defaults, name)
        allowed = {f.name for f in fields(base)}
        kwargs = {k: getattr(base, k) for k in allowed}
        if parser.has_section(name):
            for key, raw in parser.items(name):
                if key not in allowed:
                    raise ConfigSyntaxError(f"unknown key {key!r} in [{name}]")
                kwargs[key] = _convert(name, key, raw, getattr(base, key))
        try:
            built[name] = type(base)(**kwargs)
        except ValueError as exc:
            if isinstance(exc, ParameterError):
                raise
            raise ParameterError(f"[{name}]: {exc}") from exc
    return RunConfig(**built)
