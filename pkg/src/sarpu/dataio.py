"""CSV ingestion, [-1, 1] scaling, one-hot expansion and the dataset container.

Schema files hold one ``name:kind`` line per CSV column, kind being
``continuous``, ``categorical`` or ``label``.  A label line may name its
positive value (``diagnosis:label:M``); otherwise labels must already be 0/1.

Dataset files are tab-separated text with a versioned magic first line::

    #SARPU-DATA v1
    kind pu            (or: kind labeled)
    rows 455
    cols 32
    propensity 30 31   (or: propensity -)
    columns s y e      (trailing per-row columns present)
    <features...>\t<s>\t<y>\t<e>
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from sarpu.types import LabeledDataset, PUDataset

log = logging.getLogger(__name__)

MAGIC = "#SARPU-DATA v1"
KINDS = ("continuous", "categorical", "label")


class DataFormatError(ValueError):
    """Malformed or incompatible data/schema file."""


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    kind: str
    positive: Optional[str] = None


def parse_schema(text: str) -> list:
    specs = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(":")]
        if len(parts) < 2 or parts[1] not in KINDS:
            raise DataFormatError(f"schema line {lineno}: expected name:kind, got {raw!r}")
        positive = parts[2] if len(parts) > 2 and parts[1] == "label" else None
        specs.append(ColumnSpec(parts[0], parts[1], positive))
    if sum(s.kind == "label" for s in specs) != 1:
        raise DataFormatError("schema needs exactly one label column")
    return specs


def read_schema(path) -> list:
    return parse_schema(Path(path).read_text())


@dataclass
class Preprocessor:
    """Column transforms fitted on training rows and reused on test rows."""

    specs: list
    mins: dict = field(default_factory=dict)
    maxs: dict = field(default_factory=dict)
    categories: dict = field(default_factory=dict)
    unknown_count: int = 0

    @property
    def feature_names(self) -> list:
        names = []
        for s in self.specs:
            if s.kind == "continuous":
                names.append(s.name)
            elif s.kind == "categorical":
                names.extend(f"{s.name}={v}" for v in self.categories[s.name])
        return names

    def fit(self, table: dict) -> "Preprocessor":
        for s in self.specs:
            col = table[s.name]
            if s.kind == "continuous":
                vals = _floats(col, s.name)
                self.mins[s.name] = float(vals.min())
                self.maxs[s.name] = float(vals.max())
            elif s.kind == "categorical":
                seen = []
                for v in col:
                    if v not in seen:
                        seen.append(v)
                self.categories[s.name] = seen
        return self

    def scale(self, name: str, values: np.ndarray) -> np.ndarray:
        lo, hi = self.mins[name], self.maxs[name]
        if hi == lo:
            # constant column carries no information
            return np.zeros_like(values)
        return np.clip(2.0 * (values - lo) / (hi - lo) - 1.0, -1.0, 1.0)

    def unscale(self, name: str, scaled: np.ndarray) -> np.ndarray:
        lo, hi = self.mins[name], self.maxs[name]
        return (np.asarray(scaled) + 1.0) / 2.0 * (hi - lo) + lo

    def transform(self, table: dict) -> LabeledDataset:
        blocks, y = [], None
        self.unknown_count = 0
        for s in self.specs:
            col = table[s.name]
            if s.kind == "continuous":
                blocks.append(self.scale(s.name, _floats(col, s.name))[:, None])
            elif s.kind == "categorical":
                cats = self.categories[s.name]
                onehot = np.zeros((len(col), len(cats)))
                for i, v in enumerate(col):
                    if v in cats:
                        onehot[i, cats.index(v)] = 1.0
                    else:
                        self.unknown_count += 1
                blocks.append(onehot)
            else:
                y = _labels(col, s)
        if self.unknown_count:
            log.warning("%d unknown categorical values mapped to all-zero columns", self.unknown_count)
        X = np.hstack(blocks) if blocks else np.zeros((len(y), 0))
        return LabeledDataset(X, y)


def _floats(col, name) -> np.ndarray:
    out = np.empty(len(col))
    for i, v in enumerate(col):
        try:
            out[i] = float(v)
        except ValueError:
            raise DataFormatError(f"column {name!r}, data row {i + 1}: cannot parse {v!r}") from None
    if not np.all(np.isfinite(out)):
        raise DataFormatError(f"column {name!r} contains non-finite values")
    return out


def _labels(col, spec: ColumnSpec) -> np.ndarray:
    if spec.positive is not None:
        return np.array([1 if v == spec.positive else 0 for v in col], dtype=np.int64)
    vals = set(col)
    if not vals <= {"0", "1"}:
        raise DataFormatError(
            f"label column {spec.name!r} has values {sorted(vals)[:5]}; "
            "declare the positive value as name:label:VALUE"
        )
    return np.array([int(v) for v in col], dtype=np.int64)


def read_table(path, specs) -> dict:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataFormatError(f"{path}: empty file") from None
        rows = [r for r in reader if r]
    missing = [s.name for s in specs if s.name not in header]
    if missing:
        raise DataFormatError(f"{path}: columns missing from header: {missing}")
    pos = {name: i for i, name in enumerate(header)}
    table = {}
    for s in specs:
        j = pos[s.name]
        try:
            table[s.name] = [r[j].strip() for r in rows]
        except IndexError:
            raise DataFormatError(f"{path}: short row for column {s.name!r}") from None
    return table


def load_csv(path, schema, preprocessor: Optional[Preprocessor] = None):
    """Load and preprocess a CSV; returns ``(dataset, preprocessor)``.

    ``schema`` is a list of :class:`ColumnSpec` or a schema file path.  Pass a
    fitted ``preprocessor`` to apply train-side statistics to test data.
    """
    specs = schema if isinstance(schema, list) else read_schema(schema)
    table = read_table(path, specs)
    if preprocessor is None:
        preprocessor = Preprocessor(specs).fit(table)
    return preprocessor.transform(table), preprocessor


def bundled_path(name: str) -> Path:
    return Path(resources.files("sarpu") / "data" / name)


def load_breast_cancer() -> LabeledDataset:
    """The bundled Wisconsin diagnostic breast cancer sample (malignant = 1)."""
    data, _ = load_csv(bundled_path("breast_cancer.csv"), bundled_path("breast_cancer.schema"))
    return data


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def _header(kind, n, d, idx, columns) -> list:
    return [
        MAGIC,
        f"kind {kind}",
        f"rows {n}",
        f"cols {d}",
        "propensity " + (" ".join(str(i) for i in idx) if idx else "-"),
        "columns " + " ".join(columns),
    ]


def _write(path, header, X, extra_cols) -> None:
    lines = list(header)
    for i in range(X.shape[0]):
        cells = [_fmt(v) for v in X[i]]
        for kind, col in extra_cols:
            cells.append(str(int(col[i])) if kind == "int" else _fmt(col[i]))
        lines.append("\t".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")


def save_pu(path, pu: PUDataset) -> None:
    cols, extra = ["s"], [("int", pu.observed)]
    if pu.hidden_classes is not None:
        cols.append("y")
        extra.append(("int", pu.hidden_classes))
    if pu.true_propensity is not None:
        cols.append("e")
        extra.append(("float", pu.true_propensity))
    header = _header("pu", pu.n, pu.n_features, pu.propensity_attr_indices, cols)
    _write(path, header, pu.features, extra)


def save_labeled(path, data: LabeledDataset, propensity=None) -> None:
    cols, extra = ["y"], [("int", data.classes)]
    if propensity is not None:
        cols.append("e")
        extra.append(("float", np.asarray(propensity, dtype=float)))
    header = _header("labeled", data.n, data.n_features, data.propensity_attr_indices, cols)
    _write(path, header, data.features, extra)


def _read(path):
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != MAGIC:
        found = lines[0] if lines else "<empty>"
        raise DataFormatError(f"{path}: version mismatch, expected {MAGIC!r}, found {found!r}")
    try:
        meta = {}
        for line in lines[1:6]:
            key, _, rest = line.partition(" ")
            meta[key] = rest
        kind = meta["kind"]
        n, d = int(meta["rows"]), int(meta["cols"])
        idx = () if meta["propensity"] == "-" else tuple(int(i) for i in meta["propensity"].split())
        columns = meta["columns"].split()
        body = lines[6:]
        if len(body) != n:
            raise DataFormatError(f"{path}: header says {n} rows, found {len(body)}")
        width = d + len(columns)
        cells = [row.split("\t") for row in body]
        if any(len(c) != width for c in cells):
            raise DataFormatError(f"{path}: expected {width} cells per row")
        arr = np.array(cells, dtype=float).reshape(n, width)
    except (KeyError, ValueError) as exc:
        if isinstance(exc, DataFormatError):
            raise
        raise DataFormatError(f"{path}: malformed file ({exc})") from exc
    extras = {name: arr[:, d + k] for k, name in enumerate(columns)}
    return kind, arr[:, :d], idx, extras


def load_pu(path) -> PUDataset:
    kind, X, idx, ex = _read(path)
    if kind != "pu":
        raise DataFormatError(f"{path}: expected a PU dataset, found kind {kind!r}")
    if "s" not in ex:
        raise DataFormatError(f"{path}: missing s column")
    y = ex["y"].astype(np.int64) if "y" in ex else None
    return PUDataset(X, ex["s"].astype(np.int64), y, ex.get("e"), idx)


def load_labeled(path):
    """Returns ``(dataset, propensity or None)``."""
    kind, X, idx, ex = _read(path)
    if kind != "labeled":
        raise DataFormatError(f"{path}: expected a labeled dataset, found kind {kind!r}")
    return LabeledDataset(X, ex["y"].astype(np.int64), idx), ex.get("e")
