"""CSV/JSON input and output helpers.

CSV dialect: comma-separated, header row required, UTF-8, '.' decimal, no NA
cells.  All floats are written with 17 significant digits so files round-trip
exactly; outputs are written to a temporary file and renamed, so a failing
command never leaves partial output behind.
"""

from __future__ import annotations

import json
import math
import os
import tempfile

import numpy as np
import pandas as pd

from .errors import DataError
from .groups import GroupLayout
from .solver import PathFit


def fmt_float(x) -> str:
    return format(float(x), ".17g")


def _json_17g(obj, out: list) -> None:
    if obj is None:
        out.append("null")
    elif obj is True:
        out.append("true")
    elif obj is False:
        out.append("false")
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            out.append("NaN")
        elif math.isinf(x):
            out.append("Infinity" if x > 0 else "-Infinity")
        else:
            out.append(fmt_float(x))
    elif isinstance(obj, dict):
        out.append("{")
        for i, (k, v) in enumerate(obj.items()):
            if i:
                out.append(", ")
            out.append(json.dumps(str(k)))
            out.append(": ")
            _json_17g(v, out)
        out.append("}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        out.append("[")
        for i, v in enumerate(obj):
            if i:
                out.append(", ")
            _json_17g(v, out)
        out.append("]")
    else:
        raise TypeError(f"cannot serialize {type(obj)}")


def dumps_17g(obj) -> str:
    out: list[str] = []
    _json_17g(obj, out)
    return "".join(out)


def atomic_write_text(path: str, text: str) -> None:
    """Write via a temporary file in the same directory and rename into place."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: str, header: list, rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        cells = []
        for cell in row:
            if isinstance(cell, (float, np.floating)):
                cells.append(fmt_float(cell))
            else:
                cells.append(str(cell))
        lines.append(",".join(cells))
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_json(path: str, obj) -> None:
    atomic_write_text(path, dumps_17g(obj) + "\n")


# ---------------------------------------------------------------------------
# tabular input
# ---------------------------------------------------------------------------

def read_table(path: str) -> pd.DataFrame:
    try:
        df = pd.read_csv(path)
    except FileNotFoundError:
        raise DataError(f"file not found: {path}")
    except Exception as exc:  # malformed CSV
        raise DataError(f"could not parse CSV {path}: {exc}")
    if df.shape[1] < 1 or df.shape[0] < 1:
        raise DataError(f"{path} has no data rows")
    if df.isna().any().any():
        raise DataError(f"{path} contains NA cells (not supported, no imputation)")
    return df

def read_xy(
    path: str, response: str, weight_column: str | None = None
) -> tuple[np.ndarray, np.ndarray, np.ndarray | None, list]:
    """(X, y, weights, feature_names) from a CSV with a named response column."""
    df = read_table(path)
    if response not in df.columns:
        raise DataError(f"response column {response!r} not in {path}")
    if weight_column is not None and weight_column not in df.columns:
        raise DataError(f"weight column {weight_column!r} not in {path}")
    y = df[response].to_numpy(dtype=np.float64)
    drop = [response] + ([weight_column] if weight_column else [])
    feats = [c for c in df.columns if c not in drop]
    if not feats:
        raise DataError("no feature columns left after removing response/weights")
    X = df[feats].to_numpy(dtype=np.float64)
    w = df[weight_column].to_numpy(dtype=np.float64) if weight_column else None
    return X, y, w, feats


def read_group_map(path: str, feature_names: list) -> GroupLayout:
    """Two-column CSV ``original_column,group_id``; repeats mean overlap."""
    df = read_table(path)
    if list(df.columns[:2]) != ["original_column", "group_id"]:
        raise DataError(
            f"{path} must have columns original_column,group_id "
            f"(got {list(df.columns)})"
        )
    name_to_idx = {name: i for i, name in enumerate(feature_names)}
    missing = sorted(set(df["original_column"].astype(str)) - set(name_to_idx))
    if missing:
        raise DataError(f"group map names not in the data: {missing}")
    groups: dict = {}
    for name, gid in zip(df["original_column"].astype(str), df["group_id"]):
        groups.setdefault(gid, []).append(name_to_idx[name])
    ordered = [groups[g] for g in sorted(groups)]
    covered = {c for members in ordered for c in members}
    absent = [feature_names[i] for i in range(len(feature_names)) if i not in covered]
    if absent:
        raise DataError(f"group map does not cover columns: {absent}")
    return GroupLayout.from_group_lists(ordered, n_original=len(feature_names))


# ---------------------------------------------------------------------------
# model serialization
# ---------------------------------------------------------------------------

def model_to_dict(fit: PathFit, feature_names: list, config: dict | None = None) -> dict:
    rows, cols = np.nonzero(fit.betas)
    triplets = [
        [int(r), int(c), float(fit.betas[r, c])] for r, c in zip(rows, cols)
    ]
    return {
        "family": fit.family,
        "lambda": fit.lambdas.tolist(),
        "theta": float(fit.theta),
        "rat": float(fit.rat),
        "intercepts": fit.intercepts.tolist(),
        "betas": triplets,
        "df": fit.df.tolist() if fit.df is not None else None,
        "df_heuristic": bool(fit.df_heuristic),
        "active_set_sizes": [int(a.size) for a in fit.active_sets],
        "convergence": [bool(c) for c in fit.converged],
        "n_sweeps": fit.n_sweeps.tolist(),
        "objectives": fit.objectives.tolist(),
        "feature_names": list(feature_names),
        "config": config or {},
    }


def load_model(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            model = json.load(fh)
    except FileNotFoundError:
        raise DataError(f"file not found: {path}")
    except json.JSONDecodeError as exc:
        raise DataError(f"could not parse model JSON {path}: {exc}")
    for key in ("lambda", "intercepts", "betas", "feature_names", "family"):
        if key not in model:
            raise DataError(f"model JSON missing field {key!r}")
    return model


def model_coef_matrix(model: dict) -> np.ndarray:
    p = len(model["feature_names"])
    L = len(model["lambda"])
    betas = np.zeros((p, L))
    for r, c, value in model["betas"]:
        betas[int(r), int(c)] = value
    return betas
