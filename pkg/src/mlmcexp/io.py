"""Matrix Market and vector files, and serialization of run results."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionError, FormatError, UnsupportedInputError
from .sparse import SparseMatrix

_SYMMETRIES = ("general", "symmetric")
_FIELDS = ("real", "integer")


def read_matrix_market(path) -> SparseMatrix:
    """Read a square coordinate Matrix Market file (real/integer, general/symmetric).

    Symmetric files are expanded to full storage and duplicate entries summed.
    """
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise FormatError("empty file", path, 1)

    head = lines[0].split()
    if len(head) != 5 or head[0].lower() != "%%matrixmarket":
        raise FormatError("missing '%%MatrixMarket' header", path, 1)
    obj, fmt, fld, sym = (h.lower() for h in head[1:])
    if obj != "matrix" or fmt != "coordinate":
        raise UnsupportedInputError(f"{path}:1: only 'matrix coordinate' files are supported")
    if fld == "pattern":
        raise UnsupportedInputError(f"{path}:1: pattern matrices carry no values and are not supported")
    if fld not in _FIELDS:
        raise UnsupportedInputError(f"{path}:1: unsupported field {fld!r}")
    if sym not in _SYMMETRIES:
        raise UnsupportedInputError(f"{path}:1: unsupported symmetry {sym!r}")

    body = ((k + 1, ln) for k, ln in enumerate(lines) if k > 0)
    size = None
    for lineno, ln in body:
        s = ln.strip()
        if not s or s.startswith("%"):
            continue
        parts = s.split()
        try:
            size = [int(p) for p in parts]
        except ValueError:
            raise FormatError(f"bad size line {s!r}", path, lineno) from None
        if len(size) != 3:
            raise FormatError(f"size line needs 3 integers, got {len(size)}", path, lineno)
        break
    if size is None:
        raise FormatError("missing size line", path, len(lines))
    nrows, ncols, nnz = size
    if nrows != ncols:
        raise DimensionError(f"{path}:{lineno}: matrix is {nrows}x{ncols}, expected square")
    if nrows < 0 or nnz < 0:
        raise FormatError("negative size", path, lineno)

    rows = np.empty(nnz, dtype=np.int64)
    cols = np.empty(nnz, dtype=np.int64)
    vals = np.empty(nnz)
    k = 0
    for lineno, ln in body:
        s = ln.strip()
        if not s or s.startswith("%"):
            continue
        parts = s.split()
        if len(parts) != 3:
            raise FormatError(f"expected 'row col value', got {s!r}", path, lineno)
        if k == nnz:
            raise FormatError(f"more than the declared {nnz} entries", path, lineno)
        try:
            r, c = int(parts[0]), int(parts[1])
        except ValueError:
            raise FormatError(f"non-integer index in {s!r}", path, lineno) from None
        try:
            v = float(parts[2])
        except ValueError:
            raise FormatError(f"non-numeric value {parts[2]!r}", path, lineno) from None
        if not (1 <= r <= nrows and 1 <= c <= ncols):
            raise FormatError(f"index ({r}, {c}) outside a {nrows}x{ncols} matrix", path, lineno)
        if not math.isfinite(v):
            raise FormatError(f"non-finite value {parts[2]!r}", path, lineno)
        if sym == "symmetric" and c > r:
            raise FormatError("symmetric files store the lower triangle only", path, lineno)
        rows[k], cols[k], vals[k] = r - 1, c - 1, v
        k += 1
    if k != nnz:
        raise FormatError(f"declared {nnz} entries, found {k}", path, len(lines))

    if sym == "symmetric":
        off = rows != cols
        rows, cols, vals = (np.concatenate((rows, cols[off])), np.concatenate((cols, rows[off])),
                            np.concatenate((vals, vals[off])))
    return SparseMatrix.from_coo(nrows, rows, cols, vals)


def write_matrix_market(path, a: SparseMatrix, symmetric: bool = False, comment: str | None = None):
    """Write ``a`` in coordinate real format; values use 17 significant digits."""
    rows, cols, vals = a.to_coo()
    if symmetric:
        if not a.is_symmetric():
            raise UnsupportedInputError("matrix is not symmetric")
        keep = cols <= rows
        rows, cols, vals = rows[keep], cols[keep], vals[keep]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"%%MatrixMarket matrix coordinate real {'symmetric' if symmetric else 'general'}\n")
        if comment:
            for ln in comment.splitlines():
                fh.write(f"% {ln}\n")
        fh.write(f"{a.n} {a.n} {rows.size}\n")
        for r, c, v in zip(rows, cols, vals):
            fh.write(f"{r + 1} {c + 1} {float(v)!r}\n")


def read_vector(path, n: int | None = None) -> np.ndarray:
    """Whitespace or newline separated reals; ``%`` and ``#`` start comments."""
    path = Path(path)
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, ln in enumerate(fh, start=1):
            s = ln.split("%", 1)[0].split("#", 1)[0]
            for tok in s.split():
                try:
                    v = float(tok)
                except ValueError:
                    raise FormatError(f"non-numeric value {tok!r}", path, lineno) from None
                if not math.isfinite(v):
                    raise FormatError(f"non-finite value {tok!r}", path, lineno)
                out.append(v)
    if not out:
        raise FormatError("vector file holds no values", path)
    vec = np.asarray(out, dtype=np.float64)
    if n is not None and vec.size != n:
        raise DimensionError(f"{path}: vector has {vec.size} entries, expected {n}")
    return vec


def write_vector(path, v):
    with open(path, "w", encoding="utf-8") as fh:
        for x in np.asarray(v, dtype=np.float64).ravel():
            fh.write(f"{float(x)!r}\n")


# ---------------------------------------------------------------------------
# results

LEVEL_FIELDS = ("l", "dt", "M", "mean", "variance", "cost")
SUMMARY_FIELDS = ("estimate", "statistical_error", "bias_estimate", "quadrature_error",
                  "total_cost", "wall_time_seconds", "converged")


@dataclass
class ResultRecord:
    estimate: float
    statistical_error: float
    bias_estimate: float
    total_cost: int
    wall_time_seconds: float
    converged: bool = True
    quadrature_error: float | None = None
    levels: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    @classmethod
    def from_mlmc(cls, result, config=None) -> "ResultRecord":
        levels = [
            {"l": int(lv.level), "dt": float(lv.dt(result.beta)), "M": int(lv.M), "mean": float(lv.mean),
             "variance": float(lv.variance), "cost": int(lv.cost)}
            for lv in result.levels
        ]
        quad = None if result.quadrature_error is None else float(result.quadrature_error)
        return cls(float(result.estimate), float(result.statistical_error), float(result.bias_estimate),
                   int(result.total_cost), float(result.wall_time), bool(result.converged),
                   quad, levels, dict(config or {}))

    def to_dict(self) -> dict:
        d = asdict(self)
        ordered = {k: d[k] for k in SUMMARY_FIELDS}
        ordered["levels"] = [{k: lv[k] for k in LEVEL_FIELDS} for lv in d["levels"]]
        ordered["config"] = d["config"]
        return ordered

    @classmethod
    def from_dict(cls, d: dict) -> "ResultRecord":
        nan = float("nan")

        def num(x):
            return nan if x is None else x

        return cls(
            estimate=num(d["estimate"]),
            statistical_error=num(d["statistical_error"]),
            bias_estimate=num(d["bias_estimate"]),
            total_cost=int(d["total_cost"]),
            wall_time_seconds=num(d["wall_time_seconds"]),
            converged=bool(d["converged"]),
            quadrature_error=d.get("quadrature_error"),
            levels=[{k: (num(lv[k]) if k in ("mean", "variance", "dt") else lv[k]) for k in LEVEL_FIELDS}
                    for lv in d.get("levels", [])],
            config=dict(d.get("config", {})),
        )


def _nulls(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, dict):
        return {k: _nulls(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_nulls(v) for v in x]
    if isinstance(x, np.generic):
        return _nulls(x.item())
    return x


def _csv_cell(x) -> str:
    x = _nulls(x)
    if x is None:
        return "null"
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _csv_value(s: str):
    if s == "null":
        return None
    if s in ("true", "false"):
        return s == "true"
    try:
        return int(s)
    except ValueError:
        return float(s)


def write_result(record: ResultRecord, path, format: str = "json"):
    """Serialize ``record``; non-finite floats become ``null``.

    csv is long form: ``section,key,l,value`` with one row per summary field,
    one row per level field and one row per config entry (JSON-encoded).
    """
    d = record.to_dict()
    if format == "json":
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(_nulls(d), fh, indent=2, allow_nan=False)
            fh.write("\n")
    elif format == "csv":
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["section", "key", "l", "value"])
            for k in SUMMARY_FIELDS:
                w.writerow(["summary", k, "", _csv_cell(d[k])])
            for lv in d["levels"]:
                for k in LEVEL_FIELDS[1:]:
                    w.writerow(["level", k, lv["l"], _csv_cell(lv[k])])
            for k, v in d["config"].items():
                w.writerow(["config", k, "", json.dumps(_nulls(v))])
    else:
        raise UnsupportedInputError(f"unknown result format {format!r}")


def read_result(path, format: str = "json") -> ResultRecord:
    if format == "json":
        with open(path, "r", encoding="utf-8") as fh:
            return ResultRecord.from_dict(json.load(fh))
    if format != "csv":
        raise UnsupportedInputError(f"unknown result format {format!r}")
    d: dict = {"levels": [], "config": {}}
    levels: dict[int, dict] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["section", "key", "l", "value"]:
            raise FormatError("not a result csv", path, 1)
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 4:
                raise FormatError("expected 4 columns", path, lineno)
            section, key, l, value = row
            if section == "summary":
                d[key] = _csv_value(value)
            elif section == "level":
                lv = levels.setdefault(int(l), {"l": int(l)})
                lv[key] = _csv_value(value)
            elif section == "config":
                d["config"][key] = json.loads(value)
            else:
                raise FormatError(f"unknown section {section!r}", path, lineno)
    d["levels"] = [levels[k] for k in sorted(levels)]
    return ResultRecord.from_dict(d)
