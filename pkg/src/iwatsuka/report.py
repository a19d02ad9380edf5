"""Deterministic serialisation of reports."""

import json
import math
from importlib.metadata import PackageNotFoundError, version

import numpy as np

from .bands import fmt


def package_version():
    try:
        return version("artifact")
    except PackageNotFoundError:
        return "unknown"


def num(x):
    """A float rounded to 12 significant digits; non-finite values become strings."""
    x = float(x)
    if not math.isfinite(x):
        return fmt(x)
    return float(fmt(x))


def clean(obj):
    """Recursively round floats and turn arrays/tuples into lists."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [clean(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return num(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(clean(obj), indent=2, allow_nan=False) + "\n"


def header(command, cfg, **extra):
    """Reproducibility header: what produced the numbers that follow."""
    out = {"command": command, "version": package_version(), "solver": cfg.as_dict()}
    out.update(extra)
    return clean(out)
