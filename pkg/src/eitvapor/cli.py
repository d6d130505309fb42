"""
Config-driven command line front end.

A scenario is one JSON document::

    {
      "schema_version": 1,
      "preset": "generic_gamma13",
      "frequency_unit": "gamma13",
      "fields": {"control": {"rabi": 0.3}},
      "grid": {"span": 1.0, "points": 801},
      "motion_mode": "None",
      "fit": {"model": "Lorentzian"},
      "outputs": [{"format": "csv", "path": "spectrum.csv"}]
    }

Frequency-like values (rates, Rabi frequencies, detunings, grid bounds) are
given in ``frequency_unit``; with ``gamma13`` units the scale is the preset's
gamma13 or ``gamma13_rad_s``. ``grid.span`` is a half-width: the grid runs
from ``-span`` to ``+span`` (or give ``start`` and ``stop``). Everything
written to disk is in rad/s. Unknown keys are rejected.

Subcommands: ``spectrum``, ``scan``, ``fit``, ``presets``, ``check``.
Exit codes: 0 success, 1 validation or I/O error, 2 numeric failure.
"""

from __future__ import annotations

import argparse
import copy
import csv
import datetime as _dt
import hashlib
import json
import math
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from .atomsys import (TWO_PI, AtomicSystem, DetuningGrid, FieldDrive, FieldRole,
                      MotionEnvironment, SchemeKind, Spectrum, TwoPhotonConfig, Unit,
                      build_field, build_motion, build_system, convert_units,
                      preset_names, preset_record, probe_detuning_for)
from .errors import (ConfigError, EITError, EITWarning, FitError, NoResonanceError,
                     ParameterError, UnitError)
from .lineshape import FitResult, ModelKind, fit, quadratic_width_law
from .motion import (dicke_eit_spectrum, doppler_average, eit_width_collisional,
                     pressure_broadening, sigma_doppler, transit_cusp_spectrum)
from .multilevel import CouplingNode, ProbeRoot, spectrum_nested
from .optics import MediumSpec, figures_of_merit, transmission_spectrum
from .steady import chi_weak_probe

__all__ = [
    "SCHEMA_VERSION",
    "ScenarioConfig",
    "RunReport",
    "ScanTable",
    "ArtifactIOError",
    "run_spectrum",
    "run_scan",
    "fit_file",
    "write_spectrum_csv",
    "main",
]

SCHEMA_VERSION = 1
CSV_HEADER = ("delta_rad_s", "re_chi", "im_chi", "transmission", "phase_rad")
MOTION_MODES = ("None", "DopplerAverage", "DickeSubstitution", "TransitCusp",
                "CollisionalFormula")
FORMATS = ("csv", "json", "svg")


class ArtifactIOError(EITError, OSError):
    """Reading or writing a file failed; ``path`` names the file."""

    def __init__(self, message, path):
        super().__init__(f"{path}: {message}")
        self.path = str(path)


# --------------------------------------------------------------------------
# schema

NUM, INT, STR, BOOL, VEC3, RABI, NUMMAP = "number", "integer", "string", "bool", "vec3", "rabi", "nummap"
FREQ = "freq"  # number carried in frequency_unit

_SYSTEM = {"scheme_kind": STR, "gamma13": FREQ, "gamma12": FREQ, "gamma23": FREQ,
           "gamma3": FREQ, "gamma2": FREQ, "r31": NUM, "r32": NUM, "omega12": FREQ,
           "dipole13": NUM, "density": NUM}
_FIELD = {"rabi": RABI, "detuning": FREQ, "wavelength_nm": NUM, "direction": VEC3,
          "angle": NUM, "wavevector": VEC3}
_MOTION = {"v_th": NUM, "diffusion": NUM, "waist_probe": NUM, "waist_control": NUM,
           "waist_generic": NUM, "gamma13_col": FREQ, "gamma12_col": FREQ,
           "buffer_pressure": NUM, "pressure_broadening": BOOL}
_NODE: Dict[str, Any] = {"rabi": RABI, "gamma": FREQ, "delta": FREQ, "field_detuning": FREQ,
                         "emission": BOOL, "label": STR}
_NODE["children"] = [_NODE]

SCHEMA = {
    "schema_version": INT,
    "description": STR,
    "preset": STR,
    "frequency_unit": STR,
    "gamma13_rad_s": NUM,
    "system": _SYSTEM,
    "fields": {"probe": _FIELD, "control": _FIELD},
    "motion": _MOTION,
    "medium": {"length": NUM},
    "grid": {"start": FREQ, "stop": FREQ, "span": FREQ, "points": INT},
    "scan": STR,
    "motion_mode": STR,
    "doppler": {"method": STR, "nodes": INT, "tol": NUM},
    "multilevel": {"gamma": FREQ, "delta": FREQ, "children": [_NODE], "detuning_map": NUMMAP},
    "fit": {"model": STR, "init": NUMMAP, "fit_c": BOOL},
    "outputs": [{"format": STR, "path": STR}],
}


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _check(value, schema, path: str):
    where = path or "<root>"
    if isinstance(schema, dict):
        if not isinstance(value, dict):
            raise ConfigError(f"expected an object, got {type(value).__name__}", where)
        for key, sub in value.items():
            if key not in schema:
                raise ConfigError(f"unknown key {key!r}; allowed: {', '.join(sorted(schema))}",
                                  f"{path}.{key}" if path else key)
            _check(sub, schema[key], f"{path}.{key}" if path else key)
        return
    if isinstance(schema, list):
        if not isinstance(value, list):
            raise ConfigError(f"expected a list, got {type(value).__name__}", where)
        for i, item in enumerate(value):
            _check(item, schema[0], f"{path}.{i}")
        return
    ok = {
        NUM: _is_num, FREQ: _is_num,
        INT: lambda v: isinstance(v, int) and not isinstance(v, bool),
        STR: lambda v: isinstance(v, str),
        BOOL: lambda v: isinstance(v, bool),
        VEC3: lambda v: isinstance(v, list) and len(v) == 3 and all(map(_is_num, v)),
        RABI: lambda v: _is_num(v) or (isinstance(v, list) and len(v) == 2
                                       and all(map(_is_num, v))),
        NUMMAP: lambda v: isinstance(v, dict) and all(_is_num(x) for x in v.values()),
    }[schema](value)
    if not ok:
        raise ConfigError(f"expected {schema}, got {json.dumps(value)}", where)


def _schema_at(path: str):
    node: Any = SCHEMA
    for part in path.split("."):
        if isinstance(node, list):
            if not part.isdigit():
                raise ConfigError("list elements are addressed by index", path)
            node = node[0]
        elif isinstance(node, dict) and part in node:
            node = node[part]
        else:
            raise ConfigError("no such configuration field", path)
    return node


def _set_path(data: dict, path: str, value) -> None:
    parts = path.split(".")
    node: Any = data
    for i, part in enumerate(parts[:-1]):
        if isinstance(node, list):
            idx = int(part)
            if idx >= len(node):
                raise ConfigError("list index out of range", ".".join(parts[:i + 1]))
            node = node[idx]
        else:
            nxt = [] if parts[i + 1].isdigit() else {}
            node = node.setdefault(part, nxt)
    last = parts[-1]
    if isinstance(node, list):
        if int(last) >= len(node):
            raise ConfigError("list index out of range", path)
        node[int(last)] = value
    else:
        node[last] = value


@dataclass(frozen=True)
class ScenarioConfig:
    """A validated scenario document (plain JSON data)."""

    data: dict

    def __post_init__(self):
        _check(self.data, SCHEMA, "")
        version = self.data.get("schema_version")
        if version is None:
            raise ConfigError("required", "schema_version")
        if version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported version {version}; expected {SCHEMA_VERSION}",
                              "schema_version")
        mode = self.data.get("motion_mode", "None")
        if mode not in MOTION_MODES:
            raise ConfigError(f"must be one of {', '.join(MOTION_MODES)}", "motion_mode")
        if self.data.get("scan", "probe") not in ("probe", "control"):
            raise ConfigError("must be 'probe' or 'control'", "scan")
        if "multilevel" in self.data and mode != "None":
            raise ConfigError("a multilevel tree cannot be combined with a motion_mode",
                              "motion_mode")
        for i, out in enumerate(self.data.get("outputs", [])):
            if out.get("format") not in FORMATS:
                raise ConfigError(f"must be one of {', '.join(FORMATS)}", f"outputs.{i}.format")
            if "path" not in out:
                raise ConfigError("required", f"outputs.{i}.path")
        if "preset" in self.data and self.data["preset"] not in preset_names():
            raise ConfigError(f"unknown preset; valid: {', '.join(preset_names())}", "preset")
        try:
            Unit.parse(self.data.get("frequency_unit", "rad_s"))
        except UnitError as exc:
            raise ConfigError(str(exc), "frequency_unit") from None

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        return cls(copy.deepcopy(data))

    @classmethod
    def parse(cls, text: str) -> "ScenarioConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc.msg}", f"line {exc.lineno} column {exc.colno}") \
                from None
        return cls(data)

    @classmethod
    def from_file(cls, path) -> "ScenarioConfig":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ArtifactIOError(exc.strerror or str(exc), path) from None
        return cls.parse(text)

    def to_json(self) -> str:
        return json.dumps(self.data, sort_keys=True, indent=2) + "\n"

    def sha256(self) -> str:
        canonical = json.dumps(self.data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def with_value(self, path: str, value) -> "ScenarioConfig":
        """Copy with the numeric field at dotted ``path`` set to ``value``."""
        kind = _schema_at(path)
        if kind not in (NUM, FREQ, INT, RABI):
            raise ConfigError("sweep path must address a numeric field", path)
        data = copy.deepcopy(self.data)
        _set_path(data, path, int(value) if kind == INT else float(value))
        return ScenarioConfig(data)


# --------------------------------------------------------------------------
# scenario resolution

@dataclass
class _Scenario:
    system: AtomicSystem
    probe: FieldDrive
    control: FieldDrive
    motion: MotionEnvironment
    medium: MediumSpec
    grid: DetuningGrid
    unit: Unit
    gamma13_ref: Optional[float]
    scan: str
    mode: str
    doppler: dict
    tree: Optional[ProbeRoot]
    detuning_map: Optional[dict]
    fit: Optional[dict]


def _rabi_value(v) -> complex:
    return complex(v[0], v[1]) if isinstance(v, list) else complex(v)


def _section(path):
    """Re-raise parameter errors from a config section as ConfigError."""

    class _Guard:
        def __enter__(self):
            return self

        def __exit__(self, et, ev, tb):
            if et is not None and issubclass(et, (ParameterError, UnitError)) \
                    and not isinstance(ev, ConfigError):
                raise ConfigError(str(ev), path) from None
            return False

    return _Guard()


def _make_field(over: dict, base: Optional[FieldDrive], role: FieldRole, conv, path) -> FieldDrive:
    if base is None and not ({"wavelength_nm", "wavevector"} & over.keys()):
        raise ConfigError("needs wavelength_nm or wavevector (no preset to inherit from)", path)
    rabi = conv(_rabi_value(over["rabi"])) if "rabi" in over else (base.rabi if base else 0j)
    det = conv(float(over["detuning"])) if "detuning" in over else (base.detuning if base else 0.0)
    if "wavevector" in over:
        kvec = np.asarray(over["wavevector"], dtype=float)
    else:
        k = TWO_PI / (over["wavelength_nm"] * 1e-9) if "wavelength_nm" in over else base.k
        if "angle" in over:
            th = float(over["angle"])
            direction = np.array([math.sin(th), 0.0, math.cos(th)])
        elif "direction" in over:
            direction = np.asarray(over["direction"], dtype=float)
        elif base is not None and base.k > 0:
            direction = np.asarray(base.wavevector) / base.k
        else:
            direction = np.array([0.0, 0.0, 1.0])
        norm = np.linalg.norm(direction)
        if norm == 0:
            raise ConfigError("direction must be nonzero", f"{path}.direction")
        kvec = k * direction / norm
    return FieldDrive(rabi, det, tuple(kvec), role)


def _make_node(d: dict, conv, path: str) -> CouplingNode:
    if "rabi" not in d or "gamma" not in d:
        raise ConfigError("coupling nodes need rabi and gamma", path)
    kids = tuple(_make_node(c, conv, f"{path}.children.{i}")
                 for i, c in enumerate(d.get("children", [])))
    fd = d.get("field_detuning")
    with _section(path):
        return CouplingNode(conv(_rabi_value(d["rabi"])), conv(float(d["gamma"])),
                            conv(float(d.get("delta", 0.0))), kids,
                            None if fd is None else conv(float(fd)), d.get("emission", True),
                            d.get("label"))


def _resolve(cfg: ScenarioConfig) -> _Scenario:
    d = cfg.data
    rec = preset_record(d["preset"]) if "preset" in d else None
    punit = Unit.parse(rec["frequency_unit"]) if rec else Unit.RAD_PER_SEC
    unit = Unit.parse(d.get("frequency_unit", punit.value))

    base_sys = None
    if rec is not None:
        with _section("preset"):
            base_sys = build_system(rec["system"], punit)
    g13_ref = d.get("gamma13_rad_s", base_sys.gamma13 if base_sys else None)
    if unit is Unit.GAMMA13 and not g13_ref:
        raise ConfigError("gamma13 units need a preset or gamma13_rad_s", "frequency_unit")

    def conv(v):
        return convert_units(v, unit, Unit.RAD_PER_SEC, g13_ref)

    sys_over = dict(d.get("system", {}))
    for key, kind in _SYSTEM.items():
        if kind == FREQ and key in sys_over:
            sys_over[key] = conv(float(sys_over[key]))
    with _section("system"):
        if base_sys is not None:
            system = base_sys.replace(**sys_over)
        else:
            if "scheme_kind" not in sys_over:
                raise ConfigError("required without a preset", "system.scheme_kind")
            system = AtomicSystem(**sys_over)

    fcfg = d.get("fields", {})
    bases = {}
    if rec is not None:
        with _section("preset"):
            for f in rec["fields"]:
                drive = build_field(f, punit)
                bases[drive.role] = drive
    with _section("fields.probe"):
        probe = _make_field(fcfg.get("probe", {}), bases.get(FieldRole.PROBE), FieldRole.PROBE,
                            conv, "fields.probe")
    with _section("fields.control"):
        control = _make_field(fcfg.get("control", {}), bases.get(FieldRole.CONTROL),
                              FieldRole.CONTROL, conv, "fields.control")

    mot = dict(d.get("motion", {}))
    use_pressure = mot.pop("pressure_broadening", False)
    for key in ("gamma13_col", "gamma12_col"):
        if key in mot:
            mot[key] = conv(float(mot[key]))
    with _section("motion"):
        motion = build_motion(rec["motion"], punit).replace(**mot) if rec else MotionEnvironment(**mot)
        if use_pressure:
            motion = motion.replace(gamma13_col=motion.gamma13_col
                                    + pressure_broadening(motion.buffer_pressure))

    length = d.get("medium", {}).get("length", rec.get("medium_length") if rec else None)
    if length is None:
        raise ConfigError("required without a preset", "medium.length")
    with _section("medium"):
        medium = MediumSpec(float(length), system, probe.k)

    g = d.get("grid")
    if g is None or "points" not in g:
        raise ConfigError("grid with points and start/stop or span is required", "grid")
    with _section("grid"):
        if "span" in g:
            if "start" in g or "stop" in g:
                raise ConfigError("give either span or start/stop", "grid")
            grid = DetuningGrid.symmetric(conv(float(g["span"])), g["points"])
        elif "start" in g and "stop" in g:
            grid = DetuningGrid(conv(float(g["start"])), conv(float(g["stop"])), g["points"])
        else:
            raise ConfigError("needs span or start and stop", "grid")

    tree = dmap = None
    if "multilevel" in d:
        ml = d["multilevel"]
        kids = tuple(_make_node(c, conv, f"multilevel.children.{i}")
                     for i, c in enumerate(ml.get("children", [])))
        scan = d.get("scan", "probe")
        root_delta = conv(float(ml["delta"])) if "delta" in ml else (
            float(probe_detuning_for(system.scheme_kind, 0.0, control.detuning))
            if scan == "probe" else probe.detuning)
        gamma = conv(float(ml["gamma"])) if "gamma" in ml else system.gamma13
        with _section("multilevel"):
            tree = ProbeRoot(1.0, gamma, root_delta, kids)
        dmap = ml.get("detuning_map", {"root": 1.0} if scan == "probe" else {"0": 1.0})

    fit_cfg = d.get("fit")
    if fit_cfg is not None:
        try:
            ModelKind(fit_cfg.get("model", "Lorentzian"))
        except ValueError:
            raise ConfigError(f"unknown model; valid: {', '.join(m.value for m in ModelKind)}",
                              "fit.model") from None
    doppler = dict(d.get("doppler", {}))
    return _Scenario(system, probe, control, motion, medium, grid, unit, g13_ref,
                     d.get("scan", "probe"), d.get("motion_mode", "None"), doppler, tree, dmap,
                     fit_cfg)


def _k_eff_along_probe(sc: _Scenario) -> float:
    k_eff = np.asarray(TwoPhotonConfig.from_fields(sc.system.scheme_kind, sc.probe,
                                                   sc.control).k_eff)
    return float(abs(np.dot(k_eff, sc.probe.wavevector)) / sc.probe.k)


def _compute_chi(sc: _Scenario) -> Spectrum:
    sys_, ctl, grid = sc.system, sc.control, sc.grid
    delta1 = None if sc.scan == "probe" else sc.probe.detuning
    if sc.tree is not None:
        spec = spectrum_nested(sc.tree, grid, sc.detuning_map)
        spec.chi = 1j * sys_.chi_scale / sc.tree.gamma * spec.chi
        return spec
    mv = sc.motion
    k_eff_norm = TwoPhotonConfig.from_fields(sys_.scheme_kind, sc.probe, ctl).k_eff_norm
    if sc.mode == "DopplerAverage":
        return doppler_average(sys_, ctl, grid, sc.probe.k, _k_eff_along_probe(sc), mv.v_th,
                               delta1, sc.doppler.get("method", "auto"),
                               sc.doppler.get("nodes", 64), sc.doppler.get("tol", 1e-4))
    if sc.mode == "DickeSubstitution":
        return dicke_eit_spectrum(sys_, ctl, grid, k_eff_norm, mv.diffusion, mv.v_th or None,
                                  delta1)
    if sc.mode == "TransitCusp":
        return transit_cusp_spectrum(sys_, ctl, grid, mv.waist_generic, mv.v_th, delta1)
    delta = grid.values
    d1 = (probe_detuning_for(sys_.scheme_kind, delta, ctl.detuning) if delta1 is None
          else np.full_like(delta, delta1))
    meta = {"motion_mode": sc.mode}
    if sc.mode == "CollisionalFormula":
        sigma = sigma_doppler(mv.v_th, sc.probe.k)
        meta["gamma_eit_collisional"] = eit_width_collisional(sys_, mv, ctl.rabi, sigma)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", EITWarning)
            sys_ = sys_.replace(gamma13=sys_.gamma13 + mv.gamma13_col + sigma,
                                gamma12=sys_.gamma12 + mv.gamma12_col)
        meta["gamma13_effective"] = sys_.gamma13
        meta["gamma12_effective"] = sys_.gamma12
    chi = chi_weak_probe(sys_, ctl.rabi, d1, delta).value
    return Spectrum(delta, chi, meta=meta)


def _finite(v):
    if isinstance(v, dict):
        return {k: _finite(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_finite(x) for x in v]
    if isinstance(v, (np.floating, float)):
        return float(v) if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    return v


def _timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    now = (_dt.datetime.fromtimestamp(int(epoch), _dt.timezone.utc) if epoch
           else _dt.datetime.now(_dt.timezone.utc))
    return now.replace(microsecond=0).isoformat()


def _provenance(cfg: ScenarioConfig) -> dict:
    return {"config_sha256": cfg.sha256(), "version": __version__, "timestamp": _timestamp()}


@dataclass
class RunReport:
    """Result of :func:`run_spectrum`; ``spectrum`` is kept in memory only."""

    figures_of_merit: Optional[dict]
    fit: Optional[dict]
    warnings: List[str]
    provenance: dict
    parameters: dict
    artifacts: List[str] = field(default_factory=list)
    spectrum: Optional[Spectrum] = None
    fit_result: Optional[FitResult] = None

    def to_dict(self) -> dict:
        return _finite({"figures_of_merit": self.figures_of_merit, "fit": self.fit,
                        "warnings": list(self.warnings), "provenance": self.provenance,
                        "parameters": self.parameters, "artifacts": list(self.artifacts)})

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def _unique(messages) -> List[str]:
    return list(dict.fromkeys(str(m) for m in messages))


def _evaluate(cfg: ScenarioConfig):
    """Spectrum, figures of merit, fit and notes; lower-level warnings are
    left to the caller to record."""
    sc = _resolve(cfg)
    chi = _compute_chi(sc)
    spec = transmission_spectrum(chi, sc.medium)
    notes = list(spec.warnings)
    try:
        fom = figures_of_merit(spec).to_dict()
    except NoResonanceError as exc:
        fom = None
        notes.append(f"figures of merit unavailable: {exc}")
    fit_res = None
    if sc.fit is not None:
        init = sc.fit.get("init")
        fit_res = fit(spec, ModelKind(sc.fit.get("model", "Lorentzian")), init=init,
                      fit_c=sc.fit.get("fit_c", False))
        if not fit_res.converged:
            notes.append("lineshape fit did not converge")
    oc2 = abs(sc.control.rabi) ** 2
    params = {
        "frequency_unit": "rad_s",
        "scheme": sc.system.scheme_kind.value,
        "motion_mode": sc.mode if sc.tree is None else "multilevel",
        "gamma13": sc.system.gamma13,
        "gamma12": sc.system.gamma12,
        "omega_c": [sc.control.rabi.real, sc.control.rabi.imag],
        "gamma_eit_homogeneous": sc.system.gamma12 + (oc2 / sc.system.gamma13
                                                      if sc.system.gamma13 > 0 else 0.0),
        "od_homogeneous": sc.medium.od,
        "k_probe": sc.probe.k,
        "k_eff": TwoPhotonConfig.from_fields(sc.system.scheme_kind, sc.probe,
                                             sc.control).k_eff_norm,
        "sigma_doppler": sigma_doppler(sc.motion.v_th, sc.probe.k),
        "grid": {"start": sc.grid.start, "stop": sc.grid.stop, "points": sc.grid.points},
    }
    params.update({k: v for k, v in spec.meta.items() if isinstance(v, (int, float, str))})
    return sc, spec, fom, fit_res, notes, params


def _record(fn, *args):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        out = fn(*args)
    return out, [str(w.message) for w in caught]


# --------------------------------------------------------------------------
# artifact writers

def _open_for_write(path: Path):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        return open(path, "w", encoding="utf-8", newline="")
    except OSError as exc:
        raise ArtifactIOError(exc.strerror or str(exc), path) from None


def write_spectrum_csv(spectrum: Spectrum, path) -> None:
    """CSV with header ``delta_rad_s,re_chi,im_chi,transmission,phase_rad``."""
    path = Path(path)
    trans = spectrum.transmission if spectrum.transmission is not None \
        else np.full(spectrum.delta.shape, np.nan)
    phase = spectrum.phase if spectrum.phase is not None else np.full(spectrum.delta.shape, np.nan)
    with _open_for_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for row in zip(spectrum.delta, spectrum.chi.real, spectrum.chi.imag, trans, phase):
            w.writerow([repr(float(v)) for v in row])


def _write_text(text: str, path: Path) -> None:
    with _open_for_write(path) as fh:
        fh.write(text)


def _svg(path: Path, draw) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with matplotlib.rc_context({"svg.hashsalt": "eitvapor", "svg.fonttype": "path"}):
        fig = draw(plt)
        try:
            with _open_for_write(path) as fh:
                fig.savefig(fh, format="svg", metadata={"Date": None})
        finally:
            plt.close(fig)


def _spectrum_svg(spec: Spectrum, unit: Unit, g13, path: Path) -> None:
    x = convert_units(spec.delta, Unit.RAD_PER_SEC, unit, g13)

    def draw(plt):
        fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6, 6), sharex=True)
        ax1.plot(x, spec.transmission, lw=1.2)
        ax1.set_ylabel("transmission")
        ax2.plot(x, -spec.log_transmission, lw=1.2, color="C3")
        ax2.set_ylabel("-ln T")
        ax2.set_xlabel(f"two-photon detuning ({unit.value})")
        fig.tight_layout()
        return fig

    _svg(path, draw)


def _targets(cfg: ScenarioConfig, out_dir, formats, defaults) -> List[tuple]:
    base = Path(out_dir) if out_dir is not None else Path.cwd()
    declared = [(o["format"], o["path"]) for o in cfg.data.get("outputs", [])]
    if formats:
        chosen = [(f, p) for f, p in declared if f in formats]
        have = {f for f, _ in chosen}
        chosen += [(f, defaults[f]) for f in formats if f not in have]
    else:
        chosen = declared
    out, seen = [], set()
    for f, p in chosen:
        target = Path(p) if Path(p).is_absolute() else base / p
        if (f, target) not in seen:
            seen.add((f, target))
            out.append((f, target))
    return out


# --------------------------------------------------------------------------
# operations

def run_spectrum(config, out_dir=None, formats: Optional[Sequence[str]] = None) -> RunReport:
    """Compute one spectrum and write the declared artifacts.

    ``formats`` (from ``--format``) restricts the written artifacts; formats
    without a declared path go to ``spectrum.csv``, ``report.json`` or
    ``spectrum.svg`` under ``out_dir``.
    """
    cfg = config if isinstance(config, ScenarioConfig) else ScenarioConfig.from_dict(config)
    (sc, spec, fom, fit_res, notes, params), caught = _record(_evaluate, cfg)
    report = RunReport(fom, fit_res.to_dict() if fit_res else None, _unique(caught + notes),
                       _provenance(cfg), params, spectrum=spec, fit_result=fit_res)
    targets = _targets(cfg, out_dir, formats,
                       {"csv": "spectrum.csv", "json": "report.json", "svg": "spectrum.svg"})
    report.artifacts = [str(p) for _, p in targets]
    for fmt, path in targets:
        if fmt == "csv":
            write_spectrum_csv(spec, path)
        elif fmt == "svg":
            _spectrum_svg(spec, sc.unit, sc.gamma13_ref, path)
    for fmt, path in targets:
        if fmt == "json":
            _write_text(report.to_json(), path)
    return report


SCAN_COLUMNS = ("od", "od_eit", "gamma_eit_fit", "bandwidth", "delay", "tbp", "fit_fwhm",
                "fit_center", "fit_rms")


@dataclass
class ScanTable:
    path: str
    values: List[float]
    rows: List[dict]
    warnings: List[str]
    provenance: dict
    width_law: Optional[dict] = None

    def column(self, name: str) -> np.ndarray:
        return np.array([np.nan if r.get(name) is None else r[name] for r in self.rows])

    def to_dict(self) -> dict:
        return _finite({"sweep_path": self.path, "values": self.values, "rows": self.rows,
                        "warnings": self.warnings, "provenance": self.provenance,
                        "width_law": self.width_law})

    def to_csv(self) -> str:
        lines = [",".join((self.path,) + SCAN_COLUMNS)]
        for v, r in zip(self.values, self.rows):
            cells = [repr(float(v))]
            for c in SCAN_COLUMNS:
                x = r.get(c)
                cells.append("" if x is None or not math.isfinite(x) else repr(float(x)))
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"


def _scan_row(cfg: ScenarioConfig) -> dict:
    _, _, fom, fit_res, notes, _ = _evaluate(cfg)
    row = dict.fromkeys(SCAN_COLUMNS)
    if fom:
        row.update({k: fom[k] for k in SCAN_COLUMNS[:6]})
    if fit_res is not None:
        row.update(fit_fwhm=fit_res.fwhm, fit_center=fit_res.center, fit_rms=fit_res.rms_residual)
    row["notes"] = notes
    return row


def parse_sweep(text: str):
    """``path=v1,v2,...`` into ``(path, [floats])``."""
    if "=" not in text:
        raise ConfigError("expected <path>=<v1,v2,...>", "--sweep")
    path, _, vals = text.partition("=")
    try:
        values = [float(v) for v in vals.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"non-numeric sweep value in {vals!r}", path) from None
    if not values:
        raise ConfigError("no sweep values", path)
    return path.strip(), values


def run_scan(config, path: str, values: Sequence[float], out_dir=None,
             formats: Optional[Sequence[str]] = None, workers: Optional[int] = None) -> ScanTable:
    """Figures of merit (and fit results) for each value of a numeric field.

    Rows are computed concurrently and returned in sweep order. When the swept
    field is a beam angle and a fit is configured, the quadratic angle law is
    fitted to the row half-widths.
    """
    cfg = config if isinstance(config, ScenarioConfig) else ScenarioConfig.from_dict(config)
    configs = [cfg.with_value(path, v) for v in values]

    def compute():
        with ThreadPoolExecutor(max_workers=workers or min(8, len(configs))) as pool:
            return list(pool.map(_scan_row, configs))

    rows, caught = _record(compute)
    notes = caught + [n for r in rows for n in r.pop("notes")]
    law = None
    if path.endswith(".angle") and len(values) >= 3:
        widths = [r["fit_fwhm"] / 2 if r["fit_fwhm"] is not None else r["gamma_eit_fit"]
                  for r in rows]
        if all(w is not None for w in widths):
            q = quadratic_width_law(values, widths)
            law = {"offset": q.offset, "curvature": q.curvature, "offset_err": q.offset_err,
                   "curvature_err": q.curvature_err, "rms": q.rms,
                   "preferred_law": q.preferred_law}
    table = ScanTable(path, [float(v) for v in values], rows, _unique(notes), _provenance(cfg),
                      law)
    targets = _targets(cfg, out_dir, formats,
                       {"csv": "scan.csv", "json": "scan.json", "svg": "scan.svg"})
    for fmt, target in targets:
        if fmt == "csv":
            _write_text(table.to_csv(), target)
        elif fmt == "json":
            _write_text(json.dumps(table.to_dict(), sort_keys=True, indent=2) + "\n", target)
        else:
            def draw(plt):
                fig, ax = plt.subplots(figsize=(6, 4))
                ax.plot(table.values, table.column("gamma_eit_fit"), "o-")
                ax.set_xlabel(path)
                ax.set_ylabel("EIT half-width (rad/s)")
                fig.tight_layout()
                return fig
            _svg(target, draw)
    return table


def _read_spectrum_csv(path):
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ArtifactIOError(exc.strerror or str(exc), path) from None
    if not rows:
        raise ConfigError("empty file", str(path))
    header = [h.strip() for h in rows[0]]
    if "delta_rad_s" not in header:
        raise ConfigError("missing required column", "delta_rad_s")
    cols: Dict[str, List[float]] = {h: [] for h in header}
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise ConfigError(f"expected {len(header)} fields, got {len(row)}", f"line {lineno}")
        for h, cell in zip(header, row):
            try:
                cols[h].append(float(cell))
            except ValueError:
                raise ConfigError(f"line {lineno}: not a number: {cell!r}", h) from None
    x = np.array(cols["delta_rad_s"])
    bad = np.nonzero(np.diff(x) <= 0)[0]
    if bad.size:
        raise ConfigError(f"values must be strictly increasing (line {bad[0] + 3})", "delta_rad_s")
    return x, {h: np.array(v) for h, v in cols.items()}


def fit_file(csv_path, kind="Lorentzian", out_path=None, channel: str = "auto",
             init: Optional[dict] = None) -> FitResult:
    """Fit a spectrum CSV written by :func:`run_spectrum`.

    ``channel`` is ``absorption`` (``-ln T``), ``im_chi`` or ``auto`` (absorption
    when a finite transmission column is present).
    """
    x, cols = _read_spectrum_csv(csv_path)
    has_t = "transmission" in cols and np.all(np.isfinite(cols["transmission"])) \
        and np.all(cols["transmission"] > 0)
    if channel == "auto":
        channel = "absorption" if has_t else "im_chi"
    if channel == "absorption":
        if "transmission" not in cols:
            raise ConfigError("missing required column", "transmission")
        if not has_t:
            raise ConfigError("needs positive finite values for an absorption fit", "transmission")
        y = -np.log(cols["transmission"])
    elif channel == "im_chi":
        if "im_chi" not in cols:
            raise ConfigError("missing required column", "im_chi")
        y = cols["im_chi"]
    else:
        raise ConfigError("must be absorption, im_chi or auto", "channel")
    try:
        model = ModelKind(kind)
    except ValueError:
        raise ConfigError(f"unknown model; valid: {', '.join(m.value for m in ModelKind)}",
                          "model") from None
    res = fit(x, model, y=y, init=init)
    if out_path is not None:
        doc = {"fit": res.to_dict(), "source": str(csv_path), "channel": channel,
               "provenance": {"version": __version__, "timestamp": _timestamp()}}
        _write_text(json.dumps(_finite(doc), sort_keys=True, indent=2) + "\n", Path(out_path))
    return res


# --------------------------------------------------------------------------
# built-in invariant suite

def _check_suite():
    from .motion import doppler_chi
    from .multilevel import chi_nested
    from .steady import chi_numeric, chi_two_level
    from .timedomain import dark_state
    from . import bloch

    rng = np.random.default_rng(1)
    results = []

    worst = 0.0
    for _ in range(100):
        oc = rng.uniform(0.1, 3.0)
        d1, d = rng.uniform(-5, 5), rng.uniform(-1, 1)
        sys_ = AtomicSystem(gamma12=10 ** rng.uniform(-4, -1.5), density=1e17)
        scale = max(1.0, oc, abs(d1))
        probe = FieldDrive(1e-4 * scale, d1)
        ctl = FieldDrive(oc, d1 - d, role=FieldRole.CONTROL)
        num = chi_numeric(sys_, probe, ctl, check_linearity=False).value
        ana = chi_weak_probe(sys_, oc, d1, d).value
        worst = max(worst, abs(num - ana) / abs(ana))
    results.append(("oracle equivalence", worst < 1e-3, f"max rel err {worst:.2e}"))

    sys0 = AtomicSystem(gamma12=0.0)
    ratio = abs(chi_weak_probe(sys0, 0.7, 0.0, 0.0).value) / abs(chi_two_level(sys0, 0.0).value)
    results.append(("perfect transparency", ratio < 1e-12, f"|chi|/|chi_2lvl| = {ratio:.1e}"))

    s = AtomicSystem(gamma12=0.01)
    tree = ProbeRoot(1.0, s.gamma13, 0.4, (CouplingNode(0.5, s.gamma12, 0.4 - 0.1),))
    ref = chi_weak_probe(s, 0.5, 0.4, 0.3).value
    got = 1j * s.chi_scale / s.gamma13 * chi_nested(tree)
    err = abs(got - ref) / abs(ref)
    results.append(("nested reduction", err < 1e-12, f"rel err {err:.1e}"))

    gh, _ = doppler_chi(s, 0.5, 0.2, 0.05, 1.0, 0.01, 1.0, method="gauss_hermite", tol=1e-8)
    tz, _ = doppler_chi(s, 0.5, 0.2, 0.05, 1.0, 0.01, 1.0, method="trapezoid")
    err = float(np.max(np.abs(gh - tz) / np.abs(tz)))
    results.append(("Doppler quadrature", err < 1e-6, f"GH vs trapezoid rel err {err:.1e}"))

    op, oc = 0.3 + 0.1j, 0.8
    h = bloch.hamiltonian(op, oc, 0.0, 0.0)
    resid = float(np.linalg.norm(h @ dark_state(op, oc).amplitudes))
    results.append(("dark state", resid < 1e-14, f"|H D| = {resid:.1e}"))

    cfg = ScenarioConfig.from_dict({"schema_version": 1, "preset": "generic_gamma13",
                                    "grid": {"span": 1.0, "points": 11}})
    same = ScenarioConfig.parse(cfg.to_json()) == cfg
    results.append(("config round trip", same, "parse(serialize(c)) == c"))
    return results


# --------------------------------------------------------------------------
# command line

def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="eitvapor",
                                description="EIT spectra of thermal alkali vapor")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out-dir", default=None, help="directory for relative output paths")
    common.add_argument("--format", action="append", choices=FORMATS, dest="formats",
                        help="artifact format to write (repeatable)")
    common.add_argument("--quiet", action="store_true", help="suppress the stdout summary")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("spectrum", parents=[common], help="compute one spectrum")
    sp.add_argument("--config", required=True)
    sc = sub.add_parser("scan", parents=[common], help="sweep one numeric config field")
    sc.add_argument("--config", required=True)
    sc.add_argument("--sweep", required=True, help="<path>=<v1,v2,...>")
    sc.add_argument("--workers", type=int, default=None)
    fp = sub.add_parser("fit", parents=[common], help="fit a spectrum CSV")
    fp.add_argument("csv")
    fp.add_argument("--model", default="Lorentzian", choices=[m.value for m in ModelKind])
    fp.add_argument("--channel", default="auto", choices=("auto", "absorption", "im_chi"))
    pp = sub.add_parser("presets", help="list presets or show one")
    pp.add_argument("--show", metavar="NAME")
    sub.add_parser("check", parents=[common], help="run the built-in invariant suite")
    return p


def _say(args, text):
    if not getattr(args, "quiet", False):
        print(text)


def _warn_out(messages):
    for m in messages:
        print(f"warning: {m}", file=sys.stderr)


def _dispatch(args) -> int:
    if args.command == "presets":
        if args.show:
            try:
                rec = preset_record(args.show)
            except KeyError as exc:
                raise ConfigError(exc.args[0], "preset") from None
            print(json.dumps(rec, indent=2))
        else:
            for name in preset_names():
                print(f"{name}: {preset_record(name).get('description', '')}")
        return 0
    if args.command == "check":
        results = _check_suite()
        for name, ok, detail in results:
            _say(args, f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
        return 0 if all(ok for _, ok, _ in results) else 2
    if args.command == "fit":
        out = None
        if args.formats is None or "json" in args.formats:
            out = Path(args.out_dir or ".") / (Path(args.csv).stem + "_fit.json")
        res = fit_file(args.csv, args.model, out, args.channel)
        _say(args, f"{res.model.kind.value}: FWHM {res.fwhm:.6g} rad/s, center {res.center:.6g}, "
                   f"rms {res.rms_residual:.3g}, converged {res.converged}")
        return 0
    cfg = ScenarioConfig.from_file(args.config)
    if args.command == "spectrum":
        rep = run_spectrum(cfg, args.out_dir, args.formats)
        _warn_out(rep.warnings)
        if rep.figures_of_merit:
            f = rep.figures_of_merit
            _say(args, f"OD {f['od']:.4g}  OD_EIT {f['od_eit']:.4g}  "
                       f"gamma_EIT {f['gamma_eit_fit']:.4g} rad/s  delay {f['delay']:.4g} s")
        for a in rep.artifacts:
            _say(args, f"wrote {a}")
        return 0
    path, values = parse_sweep(args.sweep)
    table = run_scan(cfg, path, values, args.out_dir, args.formats, args.workers)
    _warn_out(table.warnings)
    _say(args, table.to_csv().rstrip("\n"))
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    try:
        return _dispatch(args)
    except (ConfigError, ParameterError, UnitError, ArtifactIOError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except EITError as exc:
        print(f"numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
