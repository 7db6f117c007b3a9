"""JSON and CSV formats for measures, plans, fields and grid functions.

measure: ``{"points": [[...], ...], "weights": [...]}``
plan:    ``{"arity": m, "entries": [[i_0, ..., i_{m-1}, mass], ...]}``
field:   ``{"measure": <measure or path>, "values": [[...], ...]}``
grid:    ``{"axes": [[...], ...], "values": [flattened row-major]}``
"""

import csv
import json
from pathlib import Path

import numpy as np

from .costs import SampledVectorField
from .measures import CouplingPlan, DiscreteMeasure
from .monotone import GridFunction


class InputError(ValueError):
    """A scenario input is missing or malformed; ``path`` names the culprit."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = str(path)


def read_json(path):
    path = Path(path)
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise InputError(path, "file not found") from None
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise InputError(path, f"not valid JSON ({exc})") from None


def dumps(obj):
    """Canonical JSON text: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2, allow_nan=True) + "\n"


def write_json(path, obj):
    Path(path).write_text(dumps(obj))


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    return obj


def measure_to_dict(mu):
    return {"points": mu.points.tolist(), "weights": mu.weights.tolist()}


def measure_from_dict(data, source="<measure>"):
    try:
        return DiscreteMeasure(np.asarray(data["points"], dtype=float),
                               np.asarray(data["weights"], dtype=float))
    except KeyError as exc:
        raise InputError(source, f"measure is missing {exc}") from None
    except (TypeError, ValueError) as exc:
        raise InputError(source, str(exc)) from None


def load_measure(path):
    return measure_from_dict(read_json(path), path)


def save_measure(path, mu):
    write_json(path, measure_to_dict(mu))


def plan_to_dict(plan, threshold=0.0):
    entries = [list(t) + [w] for t, w in plan.entries(threshold)]
    return {"arity": plan.arity, "sizes": list(plan.support_sizes), "entries": entries}


def plan_from_dict(data, sizes=None, source="<plan>"):
    try:
        entries = data["entries"]
        arity = int(data["arity"])
    except KeyError as exc:
        raise InputError(source, f"plan is missing {exc}") from None
    if sizes is None:
        sizes = data.get("sizes")
    if sizes is None:
        idx = np.array([e[:arity] for e in entries], dtype=int)
        sizes = tuple(int(v) + 1 for v in idx.max(axis=0))
    try:
        return CouplingPlan.from_entries(tuple(sizes), entries)
    except (TypeError, ValueError, IndexError) as exc:
        raise InputError(source, str(exc)) from None


def write_plan_csv(path, plan, threshold=0.0):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"i{k}" for k in range(plan.arity)] + ["mass"])
        for t, mass in plan.entries(threshold):
            w.writerow(list(t) + [repr(float(mass))])


def field_to_dict(u):
    return {"measure": measure_to_dict(u.base), "values": u.values.tolist()}


def field_from_dict(data, base_dir=".", source="<field>"):
    try:
        m = data["measure"]
        values = np.asarray(data["values"], dtype=float)
    except KeyError as exc:
        raise InputError(source, f"field is missing {exc}") from None
    mu = load_measure(Path(base_dir) / m) if isinstance(m, str) else measure_from_dict(m, source)
    try:
        return SampledVectorField(mu, values)
    except (TypeError, ValueError) as exc:
        raise InputError(source, str(exc)) from None


def load_field(path):
    path = Path(path)
    return field_from_dict(read_json(path), path.parent, path)


def save_field(path, u):
    write_json(path, field_to_dict(u))


def grid_to_dict(g):
    return {"axes": [a.tolist() for a in g.axes], "values": g.values.ravel().tolist()}


def grid_from_dict(data, source="<grid>"):
    try:
        return GridFunction([np.asarray(a, dtype=float) for a in data["axes"]],
                            np.asarray(data["values"], dtype=float))
    except KeyError as exc:
        raise InputError(source, f"grid is missing {exc}") from None
    except (TypeError, ValueError) as exc:
        raise InputError(source, str(exc)) from None


def load_grid(path):
    return grid_from_dict(read_json(path), path)


def save_grid(path, g):
    write_json(path, grid_to_dict(g))
