"""Diffeomorphism actions on sampled fields and equivariance-defect tests."""

import json

from ._core import (
    Chart,
    Diffeo,
    DiffeolabError,
    Field,
    Operator,
    check_contravariance,
    lp_distance,
    lp_norm,
    set_thread_count,
    standard_diffeos,
    standard_fields,
)
from . import _core

__all__ = [
    "Chart",
    "Diffeo",
    "DiffeolabError",
    "Field",
    "Operator",
    "check_contravariance",
    "default_config",
    "diffeo",
    "equivariance_defect",
    "lp_distance",
    "lp_norm",
    "normalize_config",
    "operator",
    "run",
    "set_thread_count",
    "standard_diffeos",
    "standard_fields",
]


def operator(spec):
    """Build an operator from a dict such as {"kind": "blur", "params": {"sigma": 0.05}}."""
    return Operator.from_json_text(json.dumps(spec))


def diffeo(record, chart):
    """Build a diffeomorphism on `chart` from a constructor record dict."""
    return Diffeo.from_json_text(json.dumps(record), chart)


def equivariance_defect(op, phi, field, p=2.0):
    """Defect report as a dict (defect_abs, defect_rel, grid, ...)."""
    return json.loads(_core.equivariance_defect_json(op, phi, field, p))


def default_config():
    return json.loads(_core.default_config_json())


def normalize_config(config):
    """Validate a config dict and return it with every default filled in."""
    return json.loads(_core.normalize_config_json(json.dumps(config)))


def run(command, config_path="", out_dir="out"):
    """Run a CLI subcommand in-process; returns (exit_code, console_text, log_text)."""
    return _core.run_command(command, str(config_path), str(out_dir))
