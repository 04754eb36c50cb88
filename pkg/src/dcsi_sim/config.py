"""Flat key/value configuration files with dotted group names.

An empty file (or no file) reproduces the default two-TX evaluation setup.
Example::

    # experiment configuration
    scenario.rho1_db = 0
    mc.draws = 1000
    mc.seed = 12345
    sweep.rho_db = -10, -5, 0, 5, 10, 15, 20, 25, 30
    feedback.xi_cap = 20
"""
from __future__ import annotations

import copy

from .errors import ConfigurationError
from .scenario import _OVERRIDE_KEYS

DEFAULT_STRATEGIES = [
    "naive-hier", "lr-hier", "gr-hier", "optimal-hier",
    "naive-nonhier", "lr-nonhier", "gr-nonhier", "optimal-nonhier",
    "perfect",
]

DEFAULTS = {
    "scenario": {},  # overrides for build_default_scenario
    "mc": {"draws": 1000, "seed": 12345, "workers": 1},
    "strategy": {"grid_points": 33, "inner_samples": 200, "outer_samples": 20},
    "sweep": {
        "rho_db": [-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
        "power_dbw": [0.0, 5.0, 10.0, 15.0, 20.0, 25.0],
        "feedback_fractions": [0.05, 0.15, 0.25, 0.35, 0.45, 0.55, 0.65,
                               0.75, 0.85, 0.95],
        "strategies": list(DEFAULT_STRATEGIES),
    },
    "feedback": {"codebook_seed": 777, "xi_cap": 22,
                 "tx1_transmits_quantized": False},
    "output": {"dir": "results", "draw_hash": False},
}


def _parse_scalar(text: str):
    t = text.strip()
    low = t.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    try:
        return int(t)
    except ValueError:
        pass
    try:
        return float(t)
    except ValueError:
        pass
    return t


def _parse_value(text: str):
    if "," in text:
        return [_parse_scalar(p) for p in text.split(",") if p.strip()]
    return _parse_scalar(text)


def default_config() -> dict:
    return copy.deepcopy(DEFAULTS)


def load_config(path: str | None = None) -> dict:
    """Parse a config file on top of the defaults; None gives the defaults."""
    cfg = default_config()
    if path is None:
        return cfg
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file {path}: {exc}")
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigurationError(
                f"{path}:{lineno}: expected 'group.key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        if "." not in key:
            raise ConfigurationError(
                f"{path}:{lineno}: key {key!r} must be 'group.key'")
        group, _, name = key.partition(".")
        _set(cfg, group, name, _parse_value(value), f"{path}:{lineno}")
    return cfg


def _set(cfg: dict, group: str, name: str, value, where: str):
    if group not in cfg:
        raise ConfigurationError(f"{where}: unknown config group {group!r}")
    if group == "scenario":
        if name not in _OVERRIDE_KEYS:
            raise ConfigurationError(
                f"{where}: unknown scenario parameter {name!r}")
    elif name not in cfg[group]:
        raise ConfigurationError(f"{where}: unknown config key "
                                 f"{group}.{name!r}")
    if group != "scenario":
        old = cfg[group][name]
        if isinstance(old, list) and not isinstance(value, list):
            value = [value]
        if isinstance(old, bool) and not isinstance(value, bool):
            raise ConfigurationError(
                f"{where}: {group}.{name} expects a boolean")
    cfg[group][name] = value
    return cfg


def apply_cli_overrides(cfg: dict, seed=None, draws=None, workers=None,
                        out=None) -> dict:
    if seed is not None:
        cfg["mc"]["seed"] = int(seed)
    if draws is not None:
        if int(draws) < 1:
            raise ConfigurationError("--draws must be >= 1")
        cfg["mc"]["draws"] = int(draws)
    if workers is not None:
        if int(workers) < 1:
            raise ConfigurationError("--workers must be >= 1")
        cfg["mc"]["workers"] = int(workers)
    if out is not None:
        cfg["output"]["dir"] = str(out)
    return cfg
