"""Flat key = value configuration files.

One assignment per line, ``#`` starts a comment, keys are snake_case and
values are plain scalars in SI units. Both the vehicle parameter files
and the scenario files use this format; the known keys are listed in the
README.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import fields
from pathlib import Path

from .plant import PhysicalParams


def read_kv(path) -> dict[str, str]:
    """Parse a flat key = value file into a string dict."""
    out: dict[str, str] = {}
    text = Path(path).read_text()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ValueError(f"{path}:{lineno}: empty key")
        if key in out:
            raise ValueError(f"{path}:{lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def as_float(kv: dict[str, str], key: str, default: float | None = None) -> float:
    if key not in kv:
        if default is None:
            raise KeyError(f"missing required key {key!r}")
        return default
    return float(kv[key])


def as_int(kv: dict[str, str], key: str, default: int | None = None) -> int:
    if key not in kv:
        if default is None:
            raise KeyError(f"missing required key {key!r}")
        return default
    return int(kv[key])


def as_str(kv: dict[str, str], key: str, default: str | None = None) -> str:
    if key not in kv:
        if default is None:
            raise KeyError(f"missing required key {key!r}")
        return default
    return kv[key]


def as_bool(kv: dict[str, str], key: str, default: bool) -> bool:
    if key not in kv:
        return default
    val = kv[key].lower()
    if val in ("true", "1", "yes", "on"):
        return True
    if val in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"key {key!r}: cannot parse {kv[key]!r} as bool")


_PARAM_FIELDS = {f.name for f in fields(PhysicalParams)} - {"cylinder_force_law"}


def load_physical_params(path=None) -> PhysicalParams:
    """Vehicle parameters from a key = value file; None loads the default set.

    File keys must match PhysicalParams field names; unknown keys are an
    error (they are usually typos). Values not present keep their defaults.
    """
    if path is None:
        ref = importlib.resources.files("suspsim.data") / "vehicle_default.cfg"
        with importlib.resources.as_file(ref) as p:
            kv = read_kv(p)
    else:
        kv = read_kv(path)
    unknown = set(kv) - _PARAM_FIELDS
    if unknown:
        raise ValueError(f"unknown vehicle parameter keys: {sorted(unknown)}")
    params = PhysicalParams(**{k: float(v) for k, v in kv.items()})
    params.validate()
    return params
