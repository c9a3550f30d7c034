"""
Run configuration: an INI-style file with typed keys.

Grammar: ``[section]`` headers, ``key = value`` lines, ``#`` or ``;`` comments.
Lists are comma-separated; lists of points are ``x,y,z`` triples separated by
semicolons. Every key is typed and unknown sections or keys are rejected.
See the README for the full key reference.
"""
from __future__ import annotations

import configparser
import hashlib
import json
import os
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .exceptions import ConfigurationError
from .lssolver import RegularizationPolicy
from .model import (ConstantDielectric, DrudeLorentz, MediumModel, Oscillator, PhysicalConstants,
                    TabulatedDielectric, voxelize)
from .operator import DEFAULT_DENSE_CAP
from .quadrature import MINUS, PLUS
from .spectral import GridConfig

__all__ = ["RunConfig", "load_config", "parse_config", "OUT_ENV"]

OUT_ENV = "PLASMONLS_OUT"


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _floats(s: str) -> tuple:
    return tuple(float(x) for x in s.split(",") if x.strip())


def _points(s: str) -> tuple:
    out = []
    for chunk in s.split(";"):
        if chunk.strip():
            p = _floats(chunk)
            if len(p) != 3:
                raise ValueError(f"point {chunk.strip()!r} needs three coordinates")
            out.append(p)
    return tuple(out)


def _choice(*options) -> Callable:
    def parse(s):
        v = s.strip().lower()
        if v not in options:
            raise ValueError(f"expected one of {options}, got {s!r}")
        return v
    return parse


def _str(s):
    return s.strip()


def _words(s):
    return tuple(w.strip() for w in s.split(",") if w.strip())


SCHEMA = {
    "run": {"seed": (int, 42), "workers": (int, 0)},
    "medium": {
        "shape": (_choice("box", "sphere", "slab", "voxels"), "voxels"),
        "size": (_floats, None), "radius": (float, None), "thickness": (float, None),
        "lateral": (_floats, None), "center": (_floats, (0.0, 0.0, 0.0)),
        "centers": (_points, ((0.0, 0.0, 0.0),)), "h": (float, 0.3),
        "dielectric": (_choice("drude", "lorentz", "constant", "tabulated"), "drude"),
        "plasma_freq": (float, 1.0), "damping": (float, 0.3),
        "oscillators": (_points, None),
        "value": (float, None), "nu_lo": (float, 0.0), "nu_hi": (float, None),
        "table": (_str, None),
        "strict_positivity": (_bool, False),
        "unit_system": (_choice("natural", "si"), "natural"),
    },
    "grid": {
        "n_k": (int, 4), "n_theta": (int, 2), "n_eta": (int, 2), "n_nu": (int, 4),
        "k_max": (float, 6.0), "nu_max": (float, 5.0), "nu_lo": (float, 0.5), "pv_mode": (_bool, False),
    },
    "solver": {
        "regularization": (_choice("complex_shift", "pv_split"), "complex_shift"),
        "sign": (_choice("plus", "minus"), "plus"),
        "eta_rel": (_floats, None),
        "eta_scale": (_choice("lambda", "grid"), "grid"),
        "coupling_scale": (float, 1.0),
        "dense_cap": (int, DEFAULT_DENSE_CAP),
        "method": (_choice("dense", "iterative"), "dense"),
        "born_max_order": (int, 50), "born_tol": (float, 1e-12),
    },
    "output": {"directory": (_str, "plasmonls_out"), "formats": (_words, ("csv", "json"))},
    "study": {
        "kind": (_choice("coupling", "volume"), "coupling"),
        "scales": (_floats, (0.1, 0.05, 0.025)),
        "points": (_points, None),
    },
    "verify": {
        "checks": (_words, None),
        "weak_scale": (float, 0.1), "dense_scale": (float, 1.0),
        "order_scales": (_floats, (0.1, 0.05, 0.025)),
        "refinement_levels": (int, 3), "unitarity_tol": (float, 1e-3), "n_pairs": (int, 4),
        "dense_n_k": (int, 3), "dense_n_theta": (int, 2), "dense_n_eta": (int, 2), "dense_n_nu": (int, 2),
        "bulk_plasma_freq": (float, 0.5), "bulk_damping": (float, 0.05), "bulk_sides": (_floats, None),
    },
}


@dataclass(frozen=True)
class RunConfig:
    """Parsed and validated configuration; ``values[section][key]`` holds typed values."""

    values: dict
    source: str = ""

    def __getitem__(self, section):
        return self.values[section]

    @property
    def seed(self) -> int:
        return self.values["run"]["seed"]

    def canonical(self) -> str:
        return json.dumps(self.values, sort_keys=True, default=list)

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]

    # -- builders ------------------------------------------------------------
    def constants(self) -> PhysicalConstants:
        return PhysicalConstants.si() if self["medium"]["unit_system"] == "si" else PhysicalConstants.natural()

    def dielectric(self):
        m = self["medium"]
        kind = m["dielectric"]
        if kind == "drude":
            return DrudeLorentz.drude(m["plasma_freq"], m["damping"])
        if kind == "lorentz":
            if not m["oscillators"]:
                raise ConfigurationError("[medium] oscillators is required for dielectric = lorentz")
            return DrudeLorentz(tuple(Oscillator(*o) for o in m["oscillators"]))
        if kind == "constant":
            if m["value"] is None or m["nu_hi"] is None:
                raise ConfigurationError("[medium] value and nu_hi are required for dielectric = constant")
            return ConstantDielectric(m["value"], m["nu_lo"], m["nu_hi"])
        path = m["table"]
        if not path:
            raise ConfigurationError("[medium] table is required for dielectric = tabulated")
        if not os.path.isabs(path) and self.source:
            path = os.path.join(os.path.dirname(os.path.abspath(self.source)), path)
        try:
            data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
        except OSError as exc:
            raise ConfigurationError(f"cannot read dielectric table {path}: {exc}") from exc
        return TabulatedDielectric(data[:, 0], data[:, 1])

    def medium(self) -> MediumModel:
        m = self["medium"]
        h = m["h"]
        shape = m["shape"]
        try:
            if shape == "voxels":
                return MediumModel(np.array(m["centers"]), h, self.dielectric(), self.constants(),
                                   m["strict_positivity"])
            spec = {"kind": shape, "center": m["center"]}
            if shape == "box":
                spec["size"] = m["size"]
            elif shape == "sphere":
                spec["radius"] = m["radius"]
            else:
                spec["thickness"] = m["thickness"]
                spec["lateral"] = m["lateral"]
            if any(v is None for v in spec.values()):
                raise ConfigurationError(f"[medium] missing dimensions for shape = {shape}")
            return voxelize(spec, h, self.dielectric(), self.constants(), m["strict_positivity"])
        except (TypeError, KeyError) as exc:
            raise ConfigurationError(f"invalid medium specification: {exc}") from exc

    def grid(self) -> GridConfig:
        g = self["grid"]
        return GridConfig(g["n_k"], g["n_theta"], g["n_eta"], g["n_nu"], g["k_max"], g["nu_max"], g["nu_lo"],
                          g["pv_mode"])

    def dense_grid(self) -> GridConfig:
        g, v = self["grid"], self["verify"]
        return GridConfig(v["dense_n_k"], v["dense_n_theta"], v["dense_n_eta"], v["dense_n_nu"], g["k_max"],
                          g["nu_max"], g["nu_lo"], g["pv_mode"])

    def regularization(self) -> RegularizationPolicy:
        s = self["solver"]
        sign = PLUS if s["sign"] == "plus" else MINUS
        eta = s["eta_rel"]
        if eta is None:
            eta = (1e-2, 1e-3, 1e-4) if s["eta_scale"] == "lambda" else (4.0, 2.0)
        return RegularizationPolicy(s["regularization"], sign, eta, s["eta_scale"])

    def workers(self, override=None) -> int:
        w = override if override is not None else self["run"]["workers"]
        return w if w and w > 0 else (os.cpu_count() or 1)


def parse_config(text: str, source: str = "") -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"),
                                       comment_prefixes=("#", ";"), empty_lines_in_values=False)
    parser.optionxform = str
    try:
        parser.read_string(text, source=source or "<config>")
    except configparser.Error as exc:
        raise ConfigurationError(f"config syntax error: {exc}") from exc
    values = {}
    for section, keys in SCHEMA.items():
        values[section] = {k: default for k, (_, default) in keys.items()}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigurationError(f"unknown config section [{section}]")
        for key, raw in parser.items(section):
            if key not in SCHEMA[section]:
                raise ConfigurationError(f"unknown config key {key!r} in [{section}]")
            conv = SCHEMA[section][key][0]
            try:
                values[section][key] = conv(raw)
            except ValueError as exc:
                raise ConfigurationError(f"bad value for [{section}] {key}: {exc}") from exc
    cfg = RunConfig(values, source)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    """Build every derived object once so errors surface before any computation."""
    try:
        cfg.grid()
        cfg.dense_grid()
        cfg.regularization()
        cfg.medium()
    except ConfigurationError:
        raise
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from exc
    if cfg["solver"]["dense_cap"] < 1:
        raise ConfigurationError("[solver] dense_cap must be positive")
    if cfg["verify"]["refinement_levels"] < 2:
        raise ConfigurationError("[verify] refinement_levels must be at least 2")


def load_config(path: str) -> RunConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, path)
