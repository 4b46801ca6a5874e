"""Text formats: dataset CSV, flat configuration files and fit files."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

from .data import CONSTANT, OFFSET, DatasetError, DimensionGrid, EvaluationGrid, SurvivalDataset
from .model import AdditiveFit

__all__ = [
    "ConfigError",
    "FIT_SCHEMA",
    "parse_config",
    "read_config",
    "parse_list",
    "dataset_to_csv",
    "write_dataset_csv",
    "read_dataset_csv",
    "fit_to_dict",
    "fit_from_dict",
    "write_fit",
    "read_fit",
    "format_value",
]

FIT_SCHEMA = "hazard-sbf-fit/v1"


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


def parse_list(conv: Callable) -> Callable:
    def parse(text):
        items = [t.strip() for t in str(text).split(",") if t.strip()]
        if not items:
            raise ValueError("empty list")
        return [conv(t) for t in items]
    parse.__name__ = f"list of {getattr(conv, '__name__', 'value')}"
    return parse


def _bool(text):
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def parse_config(text: str, schema: Mapping[str, Callable], required=()) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment.

    ``schema`` maps every allowed key to a converter. Unknown keys,
    duplicates, bad values and missing required keys raise
    :class:`ConfigError`.
    """
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in schema:
            raise ConfigError(f"unknown config key {key!r} (line {lineno}); "
                              f"allowed: {', '.join(sorted(schema))}")
        if key in out:
            raise ConfigError(f"duplicate config key {key!r} (line {lineno})")
        conv = _bool if schema[key] is bool else schema[key]
        try:
            out[key] = conv(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid value for {key!r}: {value!r} ({exc})") from None
    missing = [k for k in required if k not in out]
    if missing:
        raise ConfigError(f"missing required config key(s): {', '.join(missing)}")
    return out


def read_config(path, schema, required=()) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    return parse_config(text, schema, required)


def format_value(x) -> str:
    """Shortest text that reads back to the same float."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def dataset_to_csv(dataset: SurvivalDataset, types_row: bool = True) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["entry", "exit", "event", *dataset.names])
    if types_row:
        writer.writerow(["#types", "time", "time", "flag", *dataset.kinds])
    for i in range(dataset.n):
        writer.writerow([format_value(dataset.entry[i]), format_value(dataset.exit[i]),
                         "1" if dataset.event[i] else "0",
                         *(format_value(v) for v in dataset.values[i])])
    return buf.getvalue()


def write_dataset_csv(dataset: SurvivalDataset, path, types_row: bool = True) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(dataset_to_csv(dataset, types_row))


def _parse_float(text, row, col):
    try:
        value = float(text)
    except ValueError:
        raise DatasetError(f"row {row}, column {col!r}: not a number: {text!r}") from None
    return value


def read_dataset_csv(path) -> SurvivalDataset:
    """Read the ``entry,exit,event,z1..zd`` layout with an optional ``#types`` row."""
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DatasetError(f"cannot read dataset {path}: {exc.strerror}") from None
    except UnicodeDecodeError:
        raise DatasetError(f"dataset {path} is not UTF-8 text") from None
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        raise DatasetError("empty dataset file")
    header = [c.strip() for c in rows[0]]
    if header[:3] != ["entry", "exit", "event"]:
        raise DatasetError(f"header must start with entry,exit,event; got {','.join(header[:3])}")
    names = tuple(header[3:])
    body = rows[1:]
    kinds = (CONSTANT,) * len(names)
    if body and body[0][0].strip() == "#types":
        types = [c.strip() for c in body[0]]
        if len(types) != len(header) + 1 or types[1:4] != ["time", "time", "flag"]:
            raise DatasetError("malformed #types row")
        kinds = tuple(types[4:])
        for name, kind in zip(names, kinds):
            if kind not in (CONSTANT, OFFSET):
                raise DatasetError(f"column {name!r}: type must be const or offset, got {kind!r}")
        body = body[1:]
    if not body:
        raise DatasetError("empty dataset")
    entry, exit_, event, values = [], [], [], []
    for i, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise DatasetError(f"row {i}: expected {len(header)} fields, got {len(row)}")
        entry.append(_parse_float(row[0], i, "entry"))
        exit_.append(_parse_float(row[1], i, "exit"))
        flag = row[2].strip()
        if flag not in ("0", "1"):
            raise DatasetError(f"row {i}: event must be 0 or 1, got {flag!r}")
        event.append(flag == "1")
        values.append([_parse_float(v, i, n) for v, n in zip(row[3:], names)])
    return SurvivalDataset(entry=entry, exit=exit_, event=event,
                           values=np.array(values, dtype=float).reshape(len(body), len(names)),
                           kinds=kinds, names=names)


def _floats(a):
    return [float(v) for v in np.asarray(a, dtype=float)]


def fit_to_dict(fit: AdditiveFit, names=None) -> dict:
    names = list(names) if names else ["time"] + [f"z{k}" for k in range(1, len(fit.grid))]
    dims = []
    for k, dim in enumerate(fit.grid.dims):
        entry = {
            "name": names[k],
            "lo": float(dim.lo),
            "hi": float(dim.hi),
            "n_points": int(dim.n_points),
            "bandwidth": float(fit.bandwidth[k]),
            "component": _floats(fit.components[k]),
            "weights": _floats(fit.weights[k]),
            "unsupported": [int(u) for u in fit.unsupported[k]],
        }
        if fit.derivatives is not None:
            entry["derivative"] = _floats(fit.derivatives[k])
        dims.append(entry)
    return {
        "schema": FIT_SCHEMA,
        "estimator": fit.estimator.value,
        "norming": fit.norming.value,
        "intercept": float(fit.intercept),
        "converged": bool(fit.converged),
        "diverged": bool(fit.diverged),
        "iterations_used": int(fit.iterations_used),
        "final_criterion": float(fit.final_criterion),
        "dimensions": dims,
    }


def fit_from_dict(obj: dict) -> AdditiveFit:
    if obj.get("schema") != FIT_SCHEMA:
        raise DatasetError(f"not a fit file (schema {obj.get('schema')!r}, expected {FIT_SCHEMA!r})")
    try:
        dims = obj["dimensions"]
        grid = EvaluationGrid(tuple(DimensionGrid(d["lo"], d["hi"], d["n_points"]) for d in dims))
        has_deriv = all("derivative" in d for d in dims)
        return AdditiveFit(
            intercept=obj["intercept"],
            components=tuple(np.array(d["component"], dtype=float) for d in dims),
            grid=grid,
            weights=tuple(np.array(d["weights"], dtype=float) for d in dims),
            estimator=obj["estimator"],
            bandwidth=tuple(float(d["bandwidth"]) for d in dims),
            derivatives=tuple(np.array(d["derivative"], dtype=float) for d in dims)
            if has_deriv else None,
            iterations_used=obj["iterations_used"],
            converged=obj["converged"],
            final_criterion=obj["final_criterion"],
            diverged=obj.get("diverged", False),
            unsupported=tuple(np.array(d["unsupported"], dtype=bool) for d in dims),
            norming=obj["norming"],
        )
    except (KeyError, TypeError) as exc:
        raise DatasetError(f"malformed fit file: {exc}") from None


def write_fit(fit: AdditiveFit, path, names=None) -> None:
    obj = fit_to_dict(fit, names)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=1, allow_nan=True)
        fh.write("\n")


def read_fit(path) -> AdditiveFit:
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise DatasetError(f"cannot read fit file {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise DatasetError(f"fit file {path} is not valid JSON: {exc}") from None
    return fit_from_dict(obj)
