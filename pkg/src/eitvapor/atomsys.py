"""
Domain types, unit handling and parameter presets.

Every frequency-like quantity inside the package is an angular frequency in
rad/s. Rabi frequencies follow the convention ``Omega = mu * E / hbar`` (no
factor 1/2), so a resonant two-level atom undergoes population oscillations
at ``2 * Omega``. Conversions to Hz, MHz or units of gamma13 happen only at the
boundary (configuration files and the command line).
"""

from __future__ import annotations

import enum
import json
import math
import warnings
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy import constants

from .errors import EITWarning, ParameterError, UnitError

__all__ = [
    "SchemeKind",
    "FieldRole",
    "Unit",
    "AtomicSystem",
    "FieldDrive",
    "TwoPhotonConfig",
    "DetuningGrid",
    "MotionEnvironment",
    "Spectrum",
    "convert_units",
    "preset",
    "preset_names",
    "preset_record",
    "zeeman_splitting",
    "PRESSURE_BROADENING",
    "TORR",
]

TWO_PI = 2.0 * math.pi
TORR = 101325.0 / 760.0
#: Buffer-gas pressure broadening of the optical line, rad/s per Torr.
PRESSURE_BROADENING = TWO_PI * 10e6
#: Linear Zeeman shift of adjacent 87Rb F=2 ground sublevels, Hz per mG.
RB87_ZEEMAN_HZ_PER_MG = 0.7e3


class SchemeKind(str, enum.Enum):
    LAMBDA = "Lambda"
    LADDER = "Ladder"


class FieldRole(str, enum.Enum):
    PROBE = "Probe"
    CONTROL = "Control"


class Unit(str, enum.Enum):
    RAD_PER_SEC = "rad_s"
    HZ = "hz"
    MHZ = "mhz"
    GAMMA13 = "gamma13"

    @classmethod
    def parse(cls, value: Union[str, "Unit"]) -> "Unit":
        if isinstance(value, Unit):
            return value
        key = str(value).strip().lower().replace("/", "_").replace(" ", "")
        aliases = {
            "rad_s": cls.RAD_PER_SEC, "radpersec": cls.RAD_PER_SEC, "rad_per_s": cls.RAD_PER_SEC,
            "hz": cls.HZ, "mhz": cls.MHZ, "gamma13": cls.GAMMA13,
        }
        try:
            return aliases[key]
        except KeyError:
            raise UnitError(f"unknown unit {value!r}; expected one of "
                            f"{[u.value for u in cls]}") from None


def convert_units(value, from_unit, to_unit, gamma13: Optional[float] = None):
    """Linear conversion between detuning units.

    ``gamma13`` (rad/s) is required whenever either side is ``Unit.GAMMA13``.
    Works on scalars and arrays.
    """
    src, dst = Unit.parse(from_unit), Unit.parse(to_unit)
    if src is dst:
        return value
    return value * (_to_rad(src, gamma13) / _to_rad(dst, gamma13))


def _to_rad(unit: Unit, gamma13: Optional[float]) -> float:
    if unit is Unit.RAD_PER_SEC:
        return 1.0
    if unit is Unit.HZ:
        return TWO_PI
    if unit is Unit.MHZ:
        return TWO_PI * 1e6
    if gamma13 is None or gamma13 == 0:
        raise UnitError("conversion through gamma13 units needs a nonzero gamma13")
    return float(gamma13)


def zeeman_splitting(field_mG: float, hz_per_mG: float = RB87_ZEEMAN_HZ_PER_MG) -> float:
    """Adjacent-sublevel splitting (rad/s) for a bias field in mG."""
    return TWO_PI * hz_per_mG * field_mG


@dataclass(frozen=True)
class AtomicSystem:
    """Three-level atom with phenomenological decay and decoherence rates.

    Level |3> is the shared optically excited state. For a Lambda scheme |1>
    and |2> are ground sublevels; for a ladder scheme |2> is the upper state
    and ``gamma2`` is its population decay rate into |3>. Populations leaving
    |3> are redistributed into |1> and |2> with branching ratios r31 and r32
    (closed system).
    """

    scheme_kind: SchemeKind = SchemeKind.LAMBDA
    gamma13: float = 1.0
    gamma12: float = 1e-3
    gamma23: Optional[float] = None
    gamma3: float = 2.0
    r31: float = 0.5
    r32: float = 0.5
    omega12: float = 0.0
    dipole13: float = 2.537e-29
    density: float = 1.0e17
    gamma2: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "scheme_kind", SchemeKind(self.scheme_kind))
        if self.gamma23 is None:
            # unstated in the source material; gamma23 = gamma13 is the documented default
            object.__setattr__(self, "gamma23", self.gamma13)
        rates = dict(gamma13=self.gamma13, gamma12=self.gamma12, gamma23=self.gamma23,
                     gamma3=self.gamma3, gamma2=self.gamma2)
        for name, value in rates.items():
            if not np.isfinite(value) or value < 0:
                raise ParameterError(f"{name} must be a finite non-negative rate, got {value}")
        if self.r31 < 0 or self.r32 < 0 or abs(self.r31 + self.r32 - 1.0) > 1e-12:
            raise ParameterError(f"closed system needs r31 + r32 = 1 (got {self.r31} + {self.r32})")
        if self.gamma13 < 0.5 * self.gamma3 * (1 - 1e-12):
            raise ParameterError("gamma13 must be at least gamma3/2 (radiative limit)")
        if self.scheme_kind is SchemeKind.LAMBDA and self.gamma2 != 0:
            raise ParameterError("gamma2 (upper-state decay) is only meaningful for a ladder scheme")
        if self.density < 0 or self.dipole13 < 0:
            raise ParameterError("density and dipole13 must be non-negative")
        if self.gamma13 > 0 and self.gamma12 > 0.1 * self.gamma13:
            warnings.warn(f"gamma12 = {self.gamma12:g} is not small compared to gamma13 = "
                          f"{self.gamma13:g}; EIT will be weak", EITWarning, stacklevel=3)

    @property
    def chi_scale(self) -> float:
        """N mu13^2 / (hbar eps0), the prefactor of the probe susceptibility (rad/s)."""
        return self.density * self.dipole13 ** 2 / (constants.hbar * constants.epsilon_0)

    def replace(self, **changes) -> "AtomicSystem":
        data = {f: getattr(self, f) for f in self.__dataclass_fields__}
        data.update(changes)
        return AtomicSystem(**data)


def _as_vector(value) -> Tuple[float, float, float]:
    vec = np.asarray(value, dtype=float).reshape(-1)
    if vec.shape != (3,):
        raise ParameterError(f"wavevector must have three components, got {value!r}")
    return tuple(float(v) for v in vec)


@dataclass(frozen=True)
class FieldDrive:
    """One optical field: complex Rabi frequency, detuning and wavevector."""

    rabi: complex
    detuning: float = 0.0
    wavevector: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    role: FieldRole = FieldRole.PROBE

    def __post_init__(self):
        object.__setattr__(self, "rabi", complex(self.rabi))
        object.__setattr__(self, "detuning", float(self.detuning))
        object.__setattr__(self, "wavevector", _as_vector(self.wavevector))
        object.__setattr__(self, "role", FieldRole(self.role))

    @property
    def k(self) -> float:
        return float(np.linalg.norm(self.wavevector))

    @classmethod
    def from_wavelength(cls, rabi, detuning, wavelength, direction=(0.0, 0.0, 1.0),
                        role=FieldRole.PROBE) -> "FieldDrive":
        d = np.asarray(direction, dtype=float)
        d = d / np.linalg.norm(d)
        return cls(rabi, detuning, tuple(TWO_PI / wavelength * d), role)

    def replace(self, **changes) -> "FieldDrive":
        data = dict(rabi=self.rabi, detuning=self.detuning, wavevector=self.wavevector, role=self.role)
        data.update(changes)
        return FieldDrive(**data)


@dataclass(frozen=True)
class TwoPhotonConfig:
    """Two-photon detuning and effective wavevector of a probe/control pair."""

    delta: float
    k_eff: Tuple[float, float, float]

    @classmethod
    def from_fields(cls, scheme: SchemeKind, probe: FieldDrive, control: FieldDrive) -> "TwoPhotonConfig":
        kp, kc = np.array(probe.wavevector), np.array(control.wavevector)
        if SchemeKind(scheme) is SchemeKind.LAMBDA:
            return cls(probe.detuning - control.detuning, tuple(kp - kc))
        return cls(probe.detuning + control.detuning, tuple(kp + kc))

    @property
    def k_eff_norm(self) -> float:
        return float(np.linalg.norm(self.k_eff))


def probe_detuning_for(scheme: SchemeKind, delta, control_detuning: float):
    """One-photon probe detuning that realises two-photon detuning ``delta``
    with the control detuning held fixed (a probe-frequency scan)."""
    if SchemeKind(scheme) is SchemeKind.LAMBDA:
        return delta + control_detuning
    return delta - control_detuning


@dataclass(frozen=True)
class DetuningGrid:
    """Uniform, strictly increasing detuning grid. ``start``/``stop`` are rad/s;
    ``unit_hint`` only controls how values are displayed."""

    start: float
    stop: float
    points: int
    unit_hint: Unit = Unit.RAD_PER_SEC

    def __post_init__(self):
        object.__setattr__(self, "unit_hint", Unit.parse(self.unit_hint))
        if int(self.points) != self.points or self.points < 2:
            raise ParameterError(f"grid needs at least 2 points, got {self.points}")
        object.__setattr__(self, "points", int(self.points))
        if not self.stop > self.start:
            raise ParameterError("grid must be strictly increasing (stop > start)")

    @property
    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.points)

    @property
    def step(self) -> float:
        return (self.stop - self.start) / (self.points - 1)

    @classmethod
    def symmetric(cls, half_width: float, points: int, unit_hint=Unit.RAD_PER_SEC) -> "DetuningGrid":
        return cls(-half_width, half_width, points, unit_hint)


@dataclass(frozen=True)
class MotionEnvironment:
    """Thermal-motion and collision parameters (SI units, rates in rad/s).

    ``diffusion == 0`` means ballistic motion.
    """

    v_th: float = 0.0
    diffusion: float = 0.0
    waist_probe: float = 1e-3
    waist_control: float = 1e-3
    waist_generic: float = 1e-3
    gamma13_col: float = 0.0
    gamma12_col: float = 0.0
    buffer_pressure: float = 0.0

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise ParameterError(f"{name} must be finite and non-negative, got {value}")

    def replace(self, **changes) -> "MotionEnvironment":
        data = {f: getattr(self, f) for f in self.__dataclass_fields__}
        data.update(changes)
        return MotionEnvironment(**data)


@dataclass
class Spectrum:
    """Complex susceptibility sampled on a detuning grid (rad/s).

    ``transmission`` (intensity) and ``phase`` (rad) are filled in by
    :func:`eitvapor.optics.transmission_spectrum`.
    """

    delta: np.ndarray
    chi: np.ndarray
    transmission: Optional[np.ndarray] = None
    phase: Optional[np.ndarray] = None
    warnings: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    log_t: Optional[np.ndarray] = None

    def __post_init__(self):
        self.delta = np.asarray(self.delta, dtype=float)
        self.chi = np.asarray(self.chi, dtype=complex)
        if self.delta.shape != self.chi.shape or self.delta.ndim != 1:
            raise ParameterError("delta and chi must be 1-D arrays of equal length")
        if np.any(np.diff(self.delta) <= 0):
            raise ParameterError("spectrum detunings must be strictly increasing")

    @property
    def log_transmission(self) -> np.ndarray:
        if self.transmission is None:
            raise ValueError("spectrum has no transmission channel; run optics.transmission_spectrum")
        if self.log_t is not None:
            return self.log_t
        return np.log(self.transmission)


# --------------------------------------------------------------------------
# presets

def _load_catalog() -> dict:
    text = resources.files("eitvapor").joinpath("data/presets.json").read_text(encoding="utf-8")
    return json.loads(text)


_CATALOG = _load_catalog()


def preset_names() -> Sequence[str]:
    return tuple(k for k in _CATALOG if not k.startswith("_"))


def preset_record(name: str) -> dict:
    """Raw catalog record (a deep copy) for ``name``."""
    if name not in preset_names():
        raise KeyError(f"unknown preset {name!r}; valid presets: {', '.join(preset_names())}")
    return json.loads(json.dumps(_CATALOG[name]))


def _public(record: dict) -> dict:
    return {k: v for k, v in record.items() if not k.startswith("_")}


def build_system(record: dict, unit: Unit) -> AtomicSystem:
    rec = _public(record)
    for key in ("gamma13", "gamma12", "gamma23", "gamma3", "gamma2", "omega12"):
        if key in rec and rec[key] is not None:
            rec[key] = convert_units(float(rec[key]), unit, Unit.RAD_PER_SEC)
    return AtomicSystem(**rec)


def build_field(record: dict, unit: Unit, gamma13: Optional[float] = None) -> FieldDrive:
    rec = _public(record)
    rabi = rec.get("rabi", 0.0)
    if isinstance(rabi, (list, tuple)):
        rabi = complex(rabi[0], rabi[1])
    rabi = convert_units(complex(rabi), unit, Unit.RAD_PER_SEC, gamma13)
    detuning = convert_units(float(rec.get("detuning", 0.0)), unit, Unit.RAD_PER_SEC, gamma13)
    role = FieldRole(rec.get("role", "Probe"))
    if "wavevector" in rec:
        return FieldDrive(rabi, detuning, rec["wavevector"], role)
    direction = np.asarray(rec.get("direction", (0.0, 0.0, 1.0)), dtype=float)
    if "angle" in rec:
        th = float(rec["angle"])
        direction = np.array([math.sin(th), 0.0, math.cos(th)])
    return FieldDrive.from_wavelength(rabi, detuning, float(rec["wavelength_nm"]) * 1e-9,
                                      direction, role)


def build_motion(record: dict, unit: Unit) -> MotionEnvironment:
    rec = _public(record)
    for key in ("gamma13_col", "gamma12_col"):
        if key in rec:
            rec[key] = convert_units(float(rec[key]), unit, Unit.RAD_PER_SEC)
    return MotionEnvironment(**rec)


def preset(name: str) -> Tuple[AtomicSystem, Tuple[FieldDrive, FieldDrive], MotionEnvironment]:
    """Return ``(system, (probe, control), motion)`` for a named preset.

    Valid names: ``generic_gamma13``, ``rb87_d1_hyperfine``, ``rb87_d1_zeeman``,
    ``rb87_ladder_5d``, ``cs_d1_hyperfine``. The catalog lives in
    ``eitvapor/data/presets.json``.
    """
    rec = preset_record(name)
    unit = Unit.parse(rec["frequency_unit"])
    system = build_system(rec["system"], unit)
    fields = tuple(build_field(f, unit) for f in rec["fields"])
    motion = build_motion(rec["motion"], unit)
    return system, fields, motion
