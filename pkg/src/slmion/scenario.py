"""Declarative scenario files.

A scenario is a TOML document (extension ``.scn``) whose physical values
carry unit suffixes, e.g. ``wavelength = "493 nm"``. Bare numbers are SI.
Drive frequencies also accept ``"0.5 gamma"`` and delays ``"0.027 1/gamma"``,
relative to ``drive.half_linewidth``. Every key is optional; see ``SCHEMA``
for names, units and defaults.
"""
from __future__ import annotations

import hashlib
import math
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .emitter import DriveParams
from .entanglement import DickeParams, ProtocolBudget
from .errors import ScenarioError
from .masks import Crosstalk, SLMGeometry, sector_partition
from .motion import BARIUM_138_MASS, ThermalState
from .optics import GridSpec, IonChain, OpticalTrain, _is_power_of_two
from .units import UnitError, parse_quantity

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

PIPELINES = ("field", "mask", "entangle", "coeffs", "motion")
MASK_KINDS = ("flat", "suppression", "blazed", "grating")

# Half linewidth for which a 0.1 m SLM distance gives tau * gamma = 0.027.
DEFAULT_HALF_LINEWIDTH = 0.027 * 299_792_458.0 / 0.2


def _positive(v):
    return None if v > 0 else "must be positive"


def _unit_interval(v):
    return None if 0 <= v <= 1 else "outside [0, 1]"


def _open_unit(v):
    return None if 0 < v < 1 else "outside (0, 1)"


def _non_negative(v):
    return None if v >= 0 else "must be non-negative"


def _at_least(n):
    return lambda v: None if v >= n else f"must be >= {n}"


def _pow2(v):
    return None if _is_power_of_two(v) else "must be a power of two >= 2"


def _levels(v):
    if v == "continuous" or v is None:
        return None
    return None if isinstance(v, int) and v >= 2 else "must be 'continuous' or an integer >= 2"


# section -> key -> (kind, default, check). Kinds are unit dimensions or
# one of int, str, bool, levels, choice:<a|b>, list:<dimension>, pair:<dimension>.
SCHEMA = {
    "optics": {
        "wavelength": ("length", 493e-9, _positive),
        "numerical_aperture": ("dimensionless", 0.6, _open_unit),
        "f1": ("length", 10e-3, _positive),
        "f2": ("length", 10e-3, _positive),
        "f3": ("length", 10e-3, _positive),
        "slm_reflectivity": ("dimensionless", 0.83, _unit_interval),
        "path_transmission": ("dimensionless", 0.08, _unit_interval),
        "roundtrip_phase": ("angle", 0.0, None),
    },
    "grid": {
        "size": ("int", 512, _pow2),
        "half_extent": ("length", 20e-6, _positive),
    },
    "chain": {
        "count": ("int", 3, _at_least(1)),
        "spacing": ("length", 5e-6, _positive),
        "positions": ("pairs:length", None, None),
        "drive_phases": ("list:angle", None, None),
        "psf_width": ("length", None, _positive),
    },
    "slm": {
        "match_grid": ("bool", True, None),
        "px": ("int", 1272, _at_least(2)),
        "py": ("int", 1024, _at_least(2)),
        "pitch": ("length", 12.5e-6, _positive),
        "mask": ("choice:" + "|".join(MASK_KINDS), "suppression", None),
        "levels": ("levels", "continuous", _levels),
        "crosstalk": ("bool", True, None),
        "crosstalk_width": ("dimensionless", 0.572, _non_negative),
        "crosstalk_reflectivity": ("dimensionless", 0.98, _unit_interval),
        "grating_period": ("dimensionless", 10.0, _at_least(2)),
        "detector_point": ("pair:length", [0.0, 0.0], None),
        "sector_offset": ("angle", 0.0, None),
        "sector_phases": ("list:angle", None, None),
    },
    "drive": {
        "half_linewidth": ("angular_frequency", DEFAULT_HALF_LINEWIDTH, _positive),
        "rabi": ("angular_frequency", "1 gamma", _non_negative),
        "detuning": ("angular_frequency", "0 gamma", None),
        "laser_frequency": ("angular_frequency", None, _non_negative),
        "delay": ("time", "0.027 1/gamma", _non_negative),
    },
    "thermal": {
        "trap_frequency": ("angular_frequency", 2 * math.pi * 1e6, _positive),
        "mass": ("mass", BARIUM_138_MASS, _positive),
        "temperature": ("temperature", 0.0, _non_negative),
        "monte_carlo_samples": ("int", 0, _non_negative),
    },
    "protocol": {
        "N": ("int", 2, _at_least(1)),
        "n": ("int", 1, _non_negative),
        "p": ("dimensionless", 0.05, _unit_interval),
        "rho": ("dimensionless", 0.07, _unit_interval),
        "duty_cycle": ("frequency", 3e3, _non_negative),
        "collection": ("dimensionless", 0.10, _unit_interval),
        "transmission": ("dimensionless", 0.915, _unit_interval),
        "qe": ("dimensionless", 0.90, _unit_interval),
    },
    "scan": {
        "pipeline": ("choice:" + "|".join(PIPELINES), "entangle", None),
        "variable": ("str", None, None),
        "unit": ("str", "", None),
        "start": ("dimensionless", None, None),
        "stop": ("dimensionless", None, None),
        "points": ("int", 0, _non_negative),
        "spacing": ("choice:linear|log", "linear", None),
        "values": ("list:dimensionless", None, None),
        "label": ("str", None, None),
    },
    "series": {
        "variable": ("str", None, None),
        "unit": ("str", "", None),
        "values": ("list:dimensionless", None, None),
    },
    "output": {
        "name": ("str", None, None),
        "columns": ("list:str", None, None),
    },
}


@dataclass(frozen=True)
class ScanSpec:
    pipeline: str = "entangle"
    variable: str | None = None
    unit: str = ""
    start: float | None = None
    stop: float | None = None
    points: int = 0
    spacing: str = "linear"
    values: tuple | None = None
    label: str | None = None

    def grid(self) -> list[float]:
        """Scan values in the declared unit."""
        if self.values is not None:
            return [float(v) for v in self.values]
        if self.points == 0:
            return []
        if self.spacing == "log":
            return np.geomspace(self.start, self.stop, self.points).tolist()
        return np.linspace(self.start, self.stop, self.points).tolist()


@dataclass(frozen=True)
class SeriesSpec:
    variable: str | None = None
    unit: str = ""
    values: tuple | None = None


@dataclass(frozen=True)
class Scenario:
    """Validated scenario. Section values are SI floats keyed by schema name."""

    sections: dict
    scan: ScanSpec = field(default_factory=ScanSpec)
    series: SeriesSpec = field(default_factory=SeriesSpec)
    output: dict = field(default_factory=dict)
    source_hash: str = ""
    name: str = "scenario"

    def __getitem__(self, dotted: str):
        section, key = dotted.split(".")
        return self.sections[section][key]

    def with_value(self, dotted: str, value) -> "Scenario":
        section, key = dotted.split(".")
        sections = {k: dict(v) for k, v in self.sections.items()}
        sections[section][key] = value
        return replace(self, sections=sections)

    # domain objects

    def optical_train(self) -> OpticalTrain:
        return OpticalTrain(**self.sections["optics"])

    def grid(self) -> GridSpec:
        return GridSpec(**self.sections["grid"])

    def psf_width(self) -> float:
        s = self["chain.psf_width"]
        return self.optical_train().psf_width if s is None else s

    def ion_chain(self) -> IonChain:
        c = self.sections["chain"]
        phases = c["drive_phases"] or ()
        if c["positions"] is not None:
            return IonChain(tuple(c["positions"]), tuple(phases), self.psf_width())
        return IonChain.linear(c["count"], c["spacing"], self.psf_width(), phases)

    def slm_geometry(self) -> SLMGeometry:
        c = self.sections["slm"]
        return SLMGeometry(c["px"], c["py"], c["pitch"])

    def crosstalk(self) -> Crosstalk | None:
        c = self.sections["slm"]
        if not c["crosstalk"]:
            return None
        return Crosstalk(c["crosstalk_width"], c["crosstalk_reflectivity"])

    def levels(self) -> int | None:
        v = self["slm.levels"]
        return None if v == "continuous" else int(v)

    def sector_layout(self):
        n = len(self.ion_chain())
        return sector_partition(n, self["slm.sector_offset"])

    def sector_phases(self):
        v = self["slm.sector_phases"]
        return (0.0,) * len(self.ion_chain()) if v is None else tuple(v)

    def drive(self) -> DriveParams:
        d = self.sections["drive"]
        omega_l = d["laser_frequency"]
        if omega_l is None:
            omega_l = 2 * math.pi * 299_792_458.0 / self["optics.wavelength"]
        return DriveParams(d["rabi"], d["detuning"], d["half_linewidth"], omega_l)

    def delay(self) -> float:
        return self["drive.delay"]

    def thermal_state(self) -> ThermalState:
        t = self.sections["thermal"]
        return ThermalState(t["trap_frequency"], t["mass"], t["temperature"])

    def dicke(self) -> DickeParams:
        p = self.sections["protocol"]
        return DickeParams(p["N"], p["n"], p["p"])

    def budget(self) -> ProtocolBudget:
        p = self.sections["protocol"]
        return ProtocolBudget(p["rho"], p["duty_cycle"])

    def parse_scan_value(self, dotted: str, value: float, unit: str):
        """Convert a scan value given in ``unit`` to the SI value of ``dotted``."""
        section, key = dotted.split(".")
        kind = SCHEMA[section][key][0]
        if kind == "int":
            return int(round(value))
        gamma = self["drive.half_linewidth"]
        text = f"{float(value)!r} {unit}".strip()
        return parse_quantity(text, kind, gamma=gamma)


def _convert(kind, raw, gamma):
    if kind == "int":
        if isinstance(raw, bool) or not isinstance(raw, int):
            raise UnitError(f"expected an integer, got {raw!r}")
        return raw
    if kind == "bool":
        if not isinstance(raw, bool):
            raise UnitError(f"expected true or false, got {raw!r}")
        return raw
    if kind == "str":
        if not isinstance(raw, str):
            raise UnitError(f"expected a string, got {raw!r}")
        return raw
    if kind == "levels":
        return raw
    if kind.startswith("choice:"):
        options = kind[7:].split("|")
        if raw not in options:
            raise UnitError(f"expected one of {options}, got {raw!r}")
        return raw
    if kind.startswith("list:"):
        if not isinstance(raw, list):
            raise UnitError(f"expected a list, got {raw!r}")
        return tuple(_convert(kind[5:], v, gamma) for v in raw)
    if kind.startswith("pair:"):
        if not isinstance(raw, list) or len(raw) != 2:
            raise UnitError(f"expected a two-element list, got {raw!r}")
        return tuple(parse_quantity(v, kind[5:], gamma) for v in raw)
    if kind.startswith("pairs:"):
        if not isinstance(raw, list):
            raise UnitError(f"expected a list of pairs, got {raw!r}")
        return tuple(_convert("pair:" + kind[6:], v, gamma) for v in raw)
    return parse_quantity(raw, kind, gamma)


def _valid_dotted(dotted) -> bool:
    if not isinstance(dotted, str) or dotted.count(".") != 1:
        return False
    section, key = dotted.split(".")
    return section in SCHEMA and section not in ("scan", "series", "output") and key in SCHEMA[section]


def _check_scan_unit(where, dotted, unit, values):
    section, key = dotted.split(".")
    kind = SCHEMA[section][key][0]
    if kind in ("int", "str", "bool", "levels") or kind.startswith(("choice", "list", "pair")):
        if kind != "int":
            return [f"{where}.variable: {dotted} cannot be scanned"]
        return [] if not unit else [f"{where}.unit: {dotted} takes no unit"]
    gamma = values.get("drive", {}).get("half_linewidth")
    try:
        parse_quantity(f"1 {unit}".strip(), kind, gamma=gamma)
    except UnitError as exc:
        return [f"{where}.unit: {exc}"]
    return []


def build_scenario(doc: dict, source_hash: str = "", name: str = "scenario") -> Scenario:
    """Validate a parsed document, collecting every problem before raising."""
    errors = []
    doc = dict(doc)
    scan_doc = doc.get("scan", {})
    if isinstance(scan_doc, dict) and "series" in scan_doc:
        scan_doc = dict(scan_doc)
        doc["series"] = scan_doc.pop("series")
        doc["scan"] = scan_doc
    for section in doc:
        if section not in SCHEMA:
            errors.append(f"{section}: unknown section")
        elif not isinstance(doc[section], dict):
            errors.append(f"{section}: expected a table")

    values = {}
    for section, keys in SCHEMA.items():
        given = doc.get(section, {})
        if not isinstance(given, dict):
            given = {}
        for key in given:
            if key not in keys:
                errors.append(f"{section}.{key}: unknown key")
        out = {}
        gamma = values.get("drive", {}).get("half_linewidth")
        for key, (kind, default, check) in keys.items():
            raw = given.get(key, default)
            if raw is None:
                out[key] = None
                continue
            try:
                v = _convert(kind, raw, gamma)
            except UnitError as exc:
                errors.append(f"{section}.{key}: {exc}")
                continue
            if check is not None and not kind.startswith(("list", "pair")):
                problem = check(v)
                if problem:
                    errors.append(f"{section}.{key}: {v!r} {problem}")
                    continue
            out[key] = v
            if section == "drive" and key == "half_linewidth":
                gamma = v
        values[section] = out

    proto = values["protocol"]
    if "n" in proto and "N" in proto and proto["n"] > proto["N"]:
        errors.append("protocol.n: exceeds protocol.N")

    chain = values["chain"]
    n_ions = len(chain["positions"]) if chain.get("positions") is not None else chain.get("count")
    for key in ("drive_phases",):
        v = chain.get(key)
        if v is not None and n_ions is not None and len(v) != n_ions:
            errors.append(f"chain.{key}: {len(v)} entries for {n_ions} ions")
    v = values["slm"].get("sector_phases")
    if v is not None and n_ions is not None and len(v) != n_ions:
        errors.append(f"slm.sector_phases: {len(v)} entries for {n_ions} sectors")

    scan = values["scan"]
    if "scan" in doc:
        if scan.get("variable") is None:
            errors.append("scan.variable: missing scan variable")
        elif not _valid_dotted(scan["variable"]):
            errors.append(f"scan.variable: {scan['variable']!r} is not a scenario parameter")
        else:
            errors += _check_scan_unit("scan", scan["variable"], scan.get("unit", ""), values)
        if scan.get("values") is None and scan.get("points", 0) > 0:
            for key in ("start", "stop"):
                if scan.get(key) is None:
                    errors.append(f"scan.{key}: required when scan.points > 0")
            if scan.get("spacing") == "log" and all(scan.get(k) is not None for k in ("start", "stop")):
                if scan["start"] <= 0 or scan["stop"] <= 0:
                    errors.append("scan.spacing: log spacing needs positive start and stop")
    series = values["series"]
    if "series" in doc:
        if series.get("variable") is None or not _valid_dotted(series["variable"]):
            errors.append(f"scan.series.variable: {series.get('variable')!r} is not a scenario parameter")
        elif series.get("unit") is not None:
            errors += _check_scan_unit("scan.series", series["variable"], series["unit"], values)
        if series.get("values") is None:
            errors.append("scan.series.values: missing")
        if series.get("variable") is not None and series.get("variable") == scan.get("variable"):
            errors.append("scan.series.variable: must differ from scan.variable")

    if errors:
        raise ScenarioError(errors)

    sections = {k: values[k] for k in SCHEMA if k not in ("scan", "series", "output")}
    scenario = Scenario(
        sections=sections,
        scan=ScanSpec(**{k: v for k, v in scan.items() if v is not None}),
        series=SeriesSpec(**series),
        output=dict(values["output"]),
        source_hash=source_hash,
        name=name,
    )
    try:
        scenario.optical_train()
        scenario.ion_chain()
        scenario.drive()
        scenario.thermal_state()
        scenario.dicke()
    except ValueError as exc:
        raise ScenarioError([str(exc)]) from None
    return scenario


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise ScenarioError([f"{path}: {exc.strerror}"]) from None
    try:
        doc = tomllib.loads(data.decode("utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ScenarioError([f"{path}: parse error: {exc}"]) from None
    return build_scenario(doc, hashlib.sha256(data).hexdigest(), path.stem)


def scenario_fields():
    """Dotted names of every scenario parameter."""
    return [f"{s}.{k}" for s, keys in SCHEMA.items() for k in keys]
