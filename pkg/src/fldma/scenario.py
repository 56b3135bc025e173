"""Simulation scenario: every knob of a Monte-Carlo run, with TOML I/O.

A configuration file groups keys into sections::

    [array]
    num_antennas = 128

    [users]
    num_ues = 40
    theta_max_deg = 60.0

Keys may also appear at top level.  Overrides use ``section.key=value`` or
plain ``key=value``.  Angles are given in degrees at this boundary.
"""

from __future__ import annotations

import dataclasses
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from .array import SPEED_OF_LIGHT, ArrayGeometry, OffsetPlan, OffsetScheme, generate_offsets, zero_plan
from .errors import ConfigError, PreconditionError
from .waveform import OfdmGrid

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised only on 3.10
    import tomli as tomllib

PRECODERS = ("mmse", "zf")
SINR_MODELS = ("total_power", "unit_columns", "closed_form")
PLAN_REDRAW = ("per_trial", "fixed")

SECTIONS = {
    "array": ("carrier_freq", "num_antennas"),
    "ofdm": ("subcarrier_spacing", "num_subcarriers", "cp_length"),
    "plan": ("scheme", "rho_max", "symmetric_double_overhead", "plan_redraw"),
    "users": ("num_ues", "theta_max_deg", "r_max"),
    "channel": ("num_paths", "rician_kappa", "multipath_margin"),
    "link": ("snr_db", "precoder", "sinr_model"),
    "run": ("trials", "seed"),
}


@dataclass(frozen=True)
class Scenario:
    """Defaults reproduce the 30 GHz, 128-antenna, 512-subcarrier setup."""

    carrier_freq: float = 30e9
    num_antennas: int = 128
    subcarrier_spacing: float = 15e3
    num_subcarriers: int = 512
    cp_length: int = 128
    scheme: str = "random_permutation"
    rho_max: float = 10.0
    symmetric_double_overhead: bool = False
    plan_redraw: str = "per_trial"
    num_ues: int = 2
    theta_max_deg: float = 20.0
    r_max: float = 3000.0
    num_paths: int = 0
    rician_kappa: float = 0.0
    # extra delay spread (in metres of path length) reserved inside the CP
    multipath_margin: float = 0.0
    snr_db: float = 20.0
    precoder: str = "mmse"
    sinr_model: str = "total_power"
    trials: int = 10000
    seed: int = 0

    def __post_init__(self):
        for f in dataclasses.fields(self):
            object.__setattr__(self, f.name, _coerce(f.name, f.type, getattr(self, f.name)))
        try:
            object.__setattr__(self, "scheme", OffsetScheme.parse(self.scheme).value)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        _one_of("precoder", self.precoder.lower(), PRECODERS)
        object.__setattr__(self, "precoder", self.precoder.lower())
        _one_of("sinr_model", self.sinr_model, SINR_MODELS)
        _one_of("plan_redraw", self.plan_redraw, PLAN_REDRAW)
        if self.sinr_model == "closed_form" and self.precoder != "mmse":
            raise ConfigError("sinr_model 'closed_form' requires precoder 'mmse'")
        positive = ("carrier_freq", "num_antennas", "subcarrier_spacing", "num_subcarriers", "r_max", "num_ues", "trials")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("cp_length", "rho_max", "num_paths", "rician_kappa", "multipath_margin", "seed"):
            if not getattr(self, name) >= 0:
                raise ConfigError(f"{name} must be non-negative, got {getattr(self, name)}")
        if not 0 <= self.theta_max_deg <= 90:
            raise ConfigError(f"theta_max_deg must lie in [0, 90], got {self.theta_max_deg}")
        if self.cp_length >= self.num_subcarriers:
            raise ConfigError("cp_length must be smaller than num_subcarriers")
        self._check_physics()

    def _check_physics(self):
        if self.num_ues > self.num_antennas:
            raise PreconditionError(f"num_ues={self.num_ues} exceeds num_antennas={self.num_antennas}")
        coverage = self.grid.max_range
        if self.r_max + self.multipath_margin > coverage * (1 + 1e-12):
            raise PreconditionError(
                f"R_max={self.r_max:g} m plus margin {self.multipath_margin:g} m exceeds CP coverage {coverage:.6g} m"
            )
        df = self.delta_f
        if df > 0 and not self.r_max < SPEED_OF_LIGHT / df:
            raise PreconditionError(f"R_max={self.r_max:g} m is not below the distance period {SPEED_OF_LIGHT / df:.6g} m")
        if self.offset_scheme is OffsetScheme.SYMMETRIC_RANDOM_PERMUTATION and self.num_antennas < 2:
            raise PreconditionError("symmetric plan needs at least two antennas")

    # derived objects ---------------------------------------------------

    @property
    def offset_scheme(self) -> OffsetScheme:
        return OffsetScheme(self.scheme)

    @property
    def theta_max(self) -> float:
        return math.radians(self.theta_max_deg)

    @property
    def snr_linear(self) -> float:
        return 10.0 ** (self.snr_db / 10.0)

    @property
    def geometry(self) -> ArrayGeometry:
        return ArrayGeometry.from_carrier(self.num_antennas, self.carrier_freq)

    @property
    def grid(self) -> OfdmGrid:
        return OfdmGrid(self.num_subcarriers, self.subcarrier_spacing, self.cp_length)

    @property
    def delta_f(self) -> float:
        """Offset increment implied by ``rho_max`` and the scheme."""
        if self.offset_scheme is OffsetScheme.ZERO or self.num_antennas < 2:
            return 0.0
        span = 2.0 * self.rho_max if self.offset_scheme is OffsetScheme.SYMMETRIC_RANDOM_PERMUTATION else self.rho_max
        return span * self.subcarrier_spacing / (self.num_antennas - 1)

    @property
    def overhead_rho(self) -> float:
        """``rho_max`` charged in the rate overhead for the FDA plan."""
        if self.offset_scheme is OffsetScheme.ZERO:
            return 0.0
        if self.symmetric_double_overhead and self.offset_scheme is OffsetScheme.SYMMETRIC_RANDOM_PERMUTATION:
            return 2.0 * self.rho_max
        return self.rho_max

    def plan(self, seed=None) -> OffsetPlan:
        """FDA offset plan; ``seed`` defaults to the scenario seed."""
        if self.offset_scheme is OffsetScheme.ZERO:
            return zero_plan(self.num_antennas, self.subcarrier_spacing)
        random = self.offset_scheme in (OffsetScheme.RANDOM_PERMUTATION, OffsetScheme.SYMMETRIC_RANDOM_PERMUTATION)
        return generate_offsets(
            self.offset_scheme,
            self.num_antennas,
            rho_max=self.rho_max,
            seed=(self.seed if seed is None else seed) if random else None,
            subcarrier_spacing=self.subcarrier_spacing,
        )

    def sdma_plan(self) -> OffsetPlan:
        return zero_plan(self.num_antennas, self.subcarrier_spacing)

    # I/O ----------------------------------------------------------------

    def replace(self, **changes) -> "Scenario":
        unknown = set(changes) - {f.name for f in dataclasses.fields(self)}
        if unknown:
            raise ConfigError(f"unknown scenario key {sorted(unknown)[0]!r}")
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_sections(self) -> dict:
        d = self.to_dict()
        return {sec: {k: d[k] for k in keys} for sec, keys in SECTIONS.items()}

    @classmethod
    def from_mapping(cls, data: dict, base: "Scenario | None" = None) -> "Scenario":
        flat = flatten_config(data)
        return (base or cls()).replace(**flat)

    @classmethod
    def load(cls, path=None, overrides=(), base: "Scenario | None" = None) -> "Scenario":
        """Defaults, then the TOML file at ``path``, then ``key=value`` overrides."""
        flat = {}
        if path is not None:
            with open(path, "rb") as fh:
                try:
                    data = tomllib.load(fh)
                except tomllib.TOMLDecodeError as exc:
                    raise ConfigError(f"{path}: {exc}") from None
            flat.update(flatten_config(data))
        flat.update(parse_overrides(overrides))
        return (base or cls()).replace(**flat)


_FIELD_NAMES = {f.name for f in dataclasses.fields(Scenario)}
_KEY_SECTION = {key: sec for sec, keys in SECTIONS.items() for key in keys}


def _one_of(name, value, allowed):
    if value not in allowed:
        raise ConfigError(f"{name} must be one of {', '.join(allowed)}; got {value!r}")


def _coerce(name, annotation, value):
    kind = annotation if isinstance(annotation, str) else getattr(annotation, "__name__", str(annotation))
    if kind == "bool":
        if isinstance(value, (bool, np.bool_)):
            return bool(value)
        if isinstance(value, str) and value.lower() in ("true", "false"):
            return value.lower() == "true"
        raise ConfigError(f"{name} must be a boolean, got {value!r}")
    if kind == "int":
        if isinstance(value, bool):
            raise ConfigError(f"{name} must be an integer, got {value!r}")
        try:
            as_float = float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{name} must be an integer, got {value!r}") from None
        if not as_float.is_integer():
            raise ConfigError(f"{name} must be an integer, got {value!r}")
        return int(as_float)
    if kind == "float":
        if isinstance(value, bool):
            raise ConfigError(f"{name} must be a number, got {value!r}")
        try:
            out = float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{name} must be a number, got {value!r}") from None
        if math.isnan(out):
            raise ConfigError(f"{name} must not be NaN")
        return out
    if not isinstance(value, str):
        raise ConfigError(f"{name} must be a string, got {value!r}")
    return value


def _check_key(key: str, section: str | None = None) -> str:
    if key not in _FIELD_NAMES:
        label = f"{section}.{key}" if section else key
        raise ConfigError(f"unknown configuration key {label!r}")
    if section is not None and _KEY_SECTION[key] != section:
        raise ConfigError(f"key {key!r} belongs in section [{_KEY_SECTION[key]}], not [{section}]")
    return key


def flatten_config(data: dict) -> dict:
    """Turn a sectioned mapping into ``{field: value}``, rejecting unknown keys."""
    flat = {}
    for key, value in data.items():
        if isinstance(value, dict):
            if key not in SECTIONS:
                raise ConfigError(f"unknown configuration section {key!r}")
            for sub, sub_value in value.items():
                flat[_check_key(sub, key)] = sub_value
        else:
            flat[_check_key(key)] = value
    return flat


def parse_value(raw: str):
    """Interpret an override value with TOML scalar rules, else keep the string."""
    try:
        return tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        return raw.strip()


def parse_overrides(items) -> dict:
    out = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, raw = item.split("=", 1)
        key = key.strip()
        if "." in key:
            section, name = key.split(".", 1)
            if section not in SECTIONS:
                raise ConfigError(f"unknown configuration section {section!r} in {key!r}")
            out[_check_key(name, section)] = parse_value(raw)
        else:
            out[_check_key(key)] = parse_value(raw)
    return out


def config_echo(scenario: Scenario) -> list[str]:
    """``section.key = value`` lines describing the resolved configuration."""
    lines = []
    for sec, values in scenario.to_sections().items():
        for key, value in values.items():
            lines.append(f"{sec}.{key} = {value!r}" if isinstance(value, str) else f"{sec}.{key} = {value}")
    return lines
