"""Problem-instance files: a versioned JSON tree describing a hybrid system.

Top-level keys::

    version             mandatory, currently 1
    name                optional label
    modes[]             dimension, domain (box), dynamics {A, B, c}, control_set
    jumps               sets[] (A/C/D region per mode), maps[] (mode, v, target, G, b)
    target              mode, region, h (affine expression)
    costs               lambda, K[] (one expression per mode), C_a[], C_c[], K0, C0, H
    declared_constants  beta
    initial             optional {mode, x}
    policy              optional {u: {breaks, values}, v[], controlled[]}

Regions are ``{"type": "ball", "center", "radius"}``, ``{"type": "box", "lo",
"hi"}``, ``{"type": "halfspace", "normal", "offset"}`` (the set
``normal . x <= offset``) or ``{"type": "union", "members": [...]}``.
Expressions are ``{"const", "x", "u", "x_norm", "u_norm"}``, all optional.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .errors import InputError
from .geometry import Box, region_from_dict
from .model import (
    AffineDynamics,
    AffineExpr,
    BoxControls,
    ControlledJumpCost,
    FiniteControls,
    HybridSystem,
    Jump,
    Mode,
)
from .trajectory import ControlPolicy, policy_from_dict

__all__ = ["SCHEMA_VERSION", "SCHEMA", "Instance", "SchemaError", "load_instance", "parse_instance", "bundled", "bundled_names"]

SCHEMA_VERSION = 1

_vec = {"type": "array", "items": {"type": "number"}, "minItems": 1}
_mat = {"type": "array", "items": _vec, "minItems": 1}
_region = {
    "oneOf": [
        {"type": "null"},
        {
            "type": "object",
            "required": ["type"],
            "properties": {
                "type": {"enum": ["ball", "box", "halfspace", "union"]},
                "center": _vec,
                "radius": {"type": "number", "exclusiveMinimum": 0},
                "lo": _vec,
                "hi": _vec,
                "normal": _vec,
                "offset": {"type": "number"},
                "members": {"type": "array", "minItems": 1},
            },
        },
    ]
}
_expr = {
    "type": "object",
    "properties": {
        "const": {"type": "number"},
        "x": _vec,
        "u": _vec,
        "x_norm": {"type": "number"},
        "u_norm": {"type": "number"},
    },
    "additionalProperties": False,
}

SCHEMA = {
    "type": "object",
    "required": ["version", "modes", "jumps", "target", "costs", "declared_constants"],
    "properties": {
        "version": {"const": SCHEMA_VERSION},
        "name": {"type": "string"},
        "modes": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["dimension", "domain", "dynamics", "control_set"],
                "properties": {
                    "dimension": {"type": "integer", "minimum": 1},
                    "domain": {
                        "type": "object",
                        "required": ["type", "lo", "hi"],
                        "properties": {"type": {"const": "box"}, "lo": _vec, "hi": _vec},
                    },
                    "dynamics": {
                        "type": "object",
                        "required": ["A", "B", "c"],
                        "properties": {"A": _mat, "B": _mat, "c": _vec},
                    },
                    "control_set": {
                        "oneOf": [
                            {
                                "type": "object",
                                "required": ["type", "lo", "hi"],
                                "properties": {"type": {"const": "box"}, "lo": _vec, "hi": _vec},
                            },
                            {
                                "type": "object",
                                "required": ["type", "points"],
                                "properties": {"type": {"const": "finite"}, "points": _mat},
                            },
                        ]
                    },
                },
            },
        },
        "jumps": {
            "type": "object",
            "properties": {
                "sets": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "properties": {"A": _region, "C": _region, "D": _region},
                        "additionalProperties": False,
                    },
                },
                "maps": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["mode", "v", "target", "G", "b"],
                        "properties": {
                            "mode": {"type": "integer", "minimum": 0},
                            "v": {"type": "integer", "minimum": 0},
                            "target": {"type": "integer", "minimum": 0},
                            "G": _mat,
                            "b": _vec,
                        },
                    },
                },
            },
        },
        "target": {
            "type": "object",
            "required": ["mode", "region"],
            "properties": {"mode": {"type": "integer", "minimum": 0}, "region": _region, "h": _expr},
        },
        "costs": {
            "type": "object",
            "required": ["lambda"],
            "properties": {
                "lambda": {"type": "number", "exclusiveMinimum": 0},
                "K": {"type": "array", "items": _expr},
                "K0": {"type": "number", "minimum": 0},
                "C0": {"type": "number", "minimum": 0},
                "H": {"type": "number", "minimum": 0},
                "C_a": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["mode", "v"],
                        "properties": {
                            "mode": {"type": "integer"},
                            "v": {"type": "integer"},
                            "const": {"type": "number"},
                            "x": _vec,
                            "x_norm": {"type": "number"},
                        },
                    },
                },
                "C_c": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["from", "to", "const"],
                        "properties": {
                            "from": {"type": "integer"},
                            "to": {"type": "integer"},
                            "const": {"type": "number"},
                            "dist": {"type": "number", "minimum": 0},
                        },
                    },
                },
            },
        },
        "declared_constants": {
            "type": "object",
            "required": ["beta"],
            "properties": {"beta": {"type": "number", "exclusiveMinimum": 0}},
        },
        "initial": {
            "type": "object",
            "required": ["mode", "x"],
            "properties": {"mode": {"type": "integer", "minimum": 0}, "x": _vec},
        },
        "policy": {"type": "object"},
    },
}


class SchemaError(InputError):
    """Instance file does not parse or does not match the schema."""

    def __init__(self, message: str, location: str = ""):
        super().__init__(f"{location}: {message}" if location else message)
        self.location = location


@dataclass(frozen=True, eq=False)
class Instance:
    system: HybridSystem
    raw: dict
    initial: tuple[np.ndarray, int] | None = None
    policy: ControlPolicy | None = None
    source: str = ""


def _expr_from(entry: dict | None) -> AffineExpr:
    entry = entry or {}
    return AffineExpr(
        const=float(entry.get("const", 0.0)),
        x=entry.get("x"),
        u=entry.get("u"),
        x_norm=float(entry.get("x_norm", 0.0)),
        u_norm=float(entry.get("u_norm", 0.0)),
    )


def parse_instance(raw: dict, source: str = "") -> Instance:
    """Validate ``raw`` against the schema and build the system."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        loc = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise SchemaError(err.message, f"{source}:{loc}" if source else loc)

    try:
        return _build(raw, source)
    except SchemaError:
        raise
    except (InputError, KeyError, IndexError, TypeError, ValueError) as exc:
        raise SchemaError(str(exc), source) from exc


def _build(raw: dict, source: str) -> Instance:
    n = len(raw["modes"])
    sets = raw["jumps"].get("sets", [])
    if len(sets) not in (0, n):
        raise SchemaError(f"jumps/sets has {len(sets)} entries for {n} modes", "jumps/sets")
    K_entries = raw["costs"].get("K", [])
    if len(K_entries) not in (0, n):
        raise SchemaError(f"costs/K has {len(K_entries)} entries for {n} modes", "costs/K")

    modes = []
    for q, m in enumerate(raw["modes"]):
        d = m["dimension"]
        dom = Box(m["domain"]["lo"], m["domain"]["hi"])
        if dom.dim != d:
            raise SchemaError(f"domain has dimension {dom.dim}, declared {d}", f"modes/{q}/domain")
        cs = m["control_set"]
        controls = BoxControls(cs["lo"], cs["hi"]) if cs["type"] == "box" else FiniteControls(cs["points"])
        dyn = AffineDynamics(m["dynamics"]["A"], m["dynamics"]["B"], m["dynamics"]["c"], controls)
        regs = sets[q] if sets else {}
        modes.append(
            Mode(
                domain=dom,
                dynamics=dyn,
                K=_expr_from(K_entries[q] if K_entries else None),
                A=region_from_dict(regs.get("A")),
                C=region_from_dict(regs.get("C")),
                D=region_from_dict(regs.get("D")),
            )
        )
    jumps = [Jump(j["mode"], j["v"], j["target"], j["G"], j["b"]) for j in raw["jumps"].get("maps", [])]
    costs = raw["costs"]
    C_a = {(c["mode"], c["v"]): _expr_from({k: c[k] for k in ("const", "x", "x_norm") if k in c}) for c in costs.get("C_a", [])}
    C_c = {(c["from"], c["to"]): ControlledJumpCost(float(c["const"]), float(c.get("dist", 0.0))) for c in costs.get("C_c", [])}
    tgt = raw["target"]
    system = HybridSystem(
        modes=tuple(modes),
        jumps=tuple(jumps),
        target_mode=tgt["mode"],
        target=region_from_dict(tgt["region"]),
        h=_expr_from(tgt.get("h")),
        lam=float(costs["lambda"]),
        beta=float(raw["declared_constants"]["beta"]),
        C_a=C_a,
        C_c=C_c,
        K0=costs.get("K0"),
        C0=costs.get("C0"),
        H=costs.get("H"),
        name=raw.get("name", Path(source).stem if source else "system"),
    )
    initial = None
    if "initial" in raw:
        initial = (np.array(raw["initial"]["x"], dtype=float), int(raw["initial"]["mode"]))
    policy = policy_from_dict(raw["policy"], system.control_dim) if "policy" in raw else None
    return Instance(system, raw, initial, policy, source)


def load_instance(path) -> Instance:
    path = Path(path)
    text = path.read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(exc.msg, f"{path}:line {exc.lineno} col {exc.colno}") from exc
    return parse_instance(raw, str(path))


def bundled_names() -> list[str]:
    root = resources.files("hybridreach") / "instances"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def bundled(name: str) -> Instance:
    """Load one of the instances shipped with the package (``e2``, ``e4``, ...)."""
    root = resources.files("hybridreach") / "instances"
    res = root / f"{name}.json"
    if not res.is_file():
        raise InputError(f"no bundled instance {name!r}; have {bundled_names()}")
    return parse_instance(json.loads(res.read_text()), f"{name}.json")
