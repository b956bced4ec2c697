"""Unit-suffixed quantities in scenario files, e.g. ``"493 nm"`` or ``"1 MHz"``."""
from __future__ import annotations

import math
import re

from scipy import constants

# dimension -> {suffix: factor to SI}
_UNITS = {
    "length": {"m": 1.0, "mm": 1e-3, "um": 1e-6, "µm": 1e-6, "nm": 1e-9},
    "angle": {"rad": 1.0, "deg": math.pi / 180, "pi": math.pi},
    "frequency": {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9},
    # ordinary frequencies are multiplied by 2 pi; "gamma" is resolved later
    "angular_frequency": {"rad/s": 1.0, "Hz": 2 * math.pi, "kHz": 2e3 * math.pi,
                          "MHz": 2e6 * math.pi, "GHz": 2e9 * math.pi},
    "temperature": {"K": 1.0, "mK": 1e-3, "uK": 1e-6, "µK": 1e-6},
    "mass": {"kg": 1.0, "u": constants.atomic_mass, "amu": constants.atomic_mass},
    "time": {"s": 1.0, "ms": 1e-3, "us": 1e-6, "µs": 1e-6, "ns": 1e-9},
    "dimensionless": {"": 1.0},
}

_QUANTITY = re.compile(r"^\s*([-+0-9.eE]+(?:[eE][-+]?\d+)?)\s*([^\s]*)\s*$")


class UnitError(ValueError):
    pass


def parse_quantity(value, dimension: str, gamma: float | None = None) -> float:
    """Convert a scenario value to SI.

    Bare numbers are taken as SI. Angular frequencies accept the suffix
    ``gamma`` and times accept ``1/gamma`` when ``gamma`` is supplied.
    """
    if isinstance(value, bool):
        raise UnitError(f"expected a {dimension} quantity, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise UnitError(f"expected a {dimension} quantity, got {value!r}")
    m = _QUANTITY.match(value)
    if not m:
        raise UnitError(f"cannot parse {value!r} as a {dimension} quantity")
    try:
        number = float(m.group(1))
    except ValueError:
        raise UnitError(f"cannot parse {value!r} as a {dimension} quantity") from None
    suffix = m.group(2)
    if gamma is not None and dimension == "angular_frequency" and suffix == "gamma":
        return number * gamma
    if gamma is not None and dimension == "time" and suffix == "1/gamma":
        return number / gamma
    table = _UNITS[dimension]
    if suffix not in table:
        allowed = ", ".join(repr(u) for u in table)
        raise UnitError(f"unit {suffix!r} is not a {dimension} unit (allowed: {allowed})")
    return number * table[suffix]
