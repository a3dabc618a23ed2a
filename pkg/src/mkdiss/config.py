"""YAML run configuration with one section per module.

Unknown sections or keys and mistyped values are hard errors that point
at the offending line.  Missing keys take the defaults below.
"""
from __future__ import annotations

import copy
import math
from pathlib import Path

import yaml

from .errors import ConfigurationError

NUM = (int, float)

# section -> key -> (accepted types, default); None in the types means nullable
SCHEMA = {
    "run": {
        "seed": ((int,), 0),
        "threads": ((int,), 1),
    },
    "grid": {
        "n": ((int,), 64),
        "box_length": (NUM, 2 * math.pi),
    },
    "rings": {
        "radius": (NUM, 1.0),
        "core_radius": (NUM, 0.3),
        "circulation": (NUM, 1.0),
        "inclination": (NUM, math.pi / 6),
        "separation": (NUM, 0.45),
    },
    "solver": {
        "nu": (NUM, 0.01),
        "t_final": (NUM, 2.0),
        "snapshot_interval": (NUM, 0.1),
        "cfl": (NUM, 0.5),
        "dealias": ((bool,), True),
        "viscous": ((str,), "integrating_factor"),
        "dt_max": (NUM + (None,), None),
        "store_fields": ((bool,), True),
    },
    "sparseness": {
        "delta": (NUM, 0.75),
        "lam": (NUM + (None,), None),
        "mode": ((str,), "3D"),
        "directions": ((int, None), None),
        "one_d": ((bool,), True),
    },
    "oscillation": {
        "weight": ((str,), "log_composite"),
        "k": ((int,), 1),
        "alpha": (NUM + (None,), None),
        "offset": (NUM + (None,), None),
        "r_max": (NUM, 0.5),
        "scales": ((list, None), None),
        "stride": ((int,), 2),
        "floor_fraction": (NUM, 1e-3),
        "center_region": ((str,), "valid"),
    },
    "harmonic": {
        "alphas": ((list,), [0.1, 0.25, 0.5, 0.75, 1.0]),
        "grid_n": ((int,), 512),
        "method": ((str,), "sor"),
        "boundary": ((str,), "shortley_weller"),
        "random_sets": ((int,), 0),
    },
    "monitor": {
        "k": ((int,), 0),
        "window": ((list, None), None),
        "measure_all": ((bool,), True),
        "constants": ((dict,), {"c_star": 1.0, "c1_of_M": 1.0, "c2_of_M": 1.0,
                                "c3": 1.0, "c4": 1.0}),
    },
}

CONSTANT_KEYS = ("c_star", "c1_of_M", "c2_of_M", "c3", "c4")


def defaults() -> dict:
    return {sec: {k: copy.deepcopy(v[1]) for k, v in keys.items()} for sec, keys in SCHEMA.items()}


def _where(source: str, node) -> str:
    return f"{source}:{node.start_mark.line + 1}"


def _type_ok(value, types) -> bool:
    if value is None:
        return None in types
    if isinstance(value, bool):
        return bool in types
    return isinstance(value, tuple(t for t in types if t is not None))


def _check_mapping(node, source, what):
    if not isinstance(node, yaml.MappingNode):
        raise ConfigurationError(f"{_where(source, node)}: {what} must be a mapping")


def load_config(path=None, text: str | None = None) -> dict:
    """Parse and validate a config file (or ``text``); ``None`` gives defaults."""
    cfg = defaults()
    if path is None and text is None:
        return cfg
    source = str(path) if path is not None else "<string>"
    if text is None:
        text = Path(path).read_text()
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"{source}: malformed YAML: {exc}") from exc
    if root is None:
        return cfg
    _check_mapping(root, source, "top level")
    loader = yaml.SafeLoader("")
    for sec_node, body in root.value:
        sec = sec_node.value
        if sec not in SCHEMA:
            raise ConfigurationError(f"{_where(source, sec_node)}: unknown section {sec!r}")
        _check_mapping(body, source, f"section {sec!r}")
        for key_node, val_node in body.value:
            key = key_node.value
            if key not in SCHEMA[sec]:
                raise ConfigurationError(
                    f"{_where(source, key_node)}: unknown key {key!r} in section {sec!r}")
            value = loader.construct_object(val_node, deep=True)
            types = SCHEMA[sec][key][0]
            if not _type_ok(value, types):
                raise ConfigurationError(
                    f"{_where(source, val_node)}: {sec}.{key} has the wrong type "
                    f"({type(value).__name__})")
            if sec == "monitor" and key == "constants":
                for c_node, cv_node in val_node.value:
                    if c_node.value not in CONSTANT_KEYS:
                        raise ConfigurationError(
                            f"{_where(source, c_node)}: unknown constant {c_node.value!r}")
                    cv = loader.construct_object(cv_node, deep=True)
                    if isinstance(cv, bool) or not isinstance(cv, NUM) or not cv > 0:
                        raise ConfigurationError(
                            f"{_where(source, cv_node)}: constant {c_node.value} must be positive")
                value = {**cfg[sec][key], **{c: float(v) for c, v in value.items()}}
            if isinstance(value, int) and not isinstance(value, bool) and float in types:
                value = float(value)
            cfg[sec][key] = value
    return cfg


def dump_config(cfg: dict) -> str:
    return yaml.safe_dump(cfg, sort_keys=False)
