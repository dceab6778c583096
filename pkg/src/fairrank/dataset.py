"""Data model, CSV ingestion and monotonicity-aware min-max scaling.

A :class:`Dataset` holds protected features ``A``, legitimate features ``X``
(each annotated with a :class:`Direction`) and optional ``"+"``/``"-"``
labels. Legitimate features are mapped to ``[0, 1]`` such that larger is
always better; see :func:`fit_scaling` and :func:`apply_scaling`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np
import pandas as pd
import yaml
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import NEGATIVE, POSITIVE, SchemaError, as_label_array

__all__ = [
    "Direction",
    "FeatureRole",
    "FeatureSpec",
    "Dataset",
    "ScalingSpec",
    "MonotonicScaler",
    "SchemaError",
    "fit_scaling",
    "apply_scaling",
    "load_schema",
    "load_csv",
    "load_german_credit",
    "train_test_split",
    "write_csv",
]


class FeatureRole(str, enum.Enum):
    PROTECTED = "protected"
    LEGITIMATE = "legitimate"


class Direction(str, enum.Enum):
    """Whether higher (``UP``) or lower (``DOWN``) raw values are beneficial."""

    UP = "up"
    DOWN = "down"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        token = str(value).strip().lower()
        aliases = {"up": cls.UP, "+": cls.UP, "↑": cls.UP, "increasing": cls.UP,
                   "down": cls.DOWN, "-": cls.DOWN, "↓": cls.DOWN,
                   "decreasing": cls.DOWN}
        if token not in aliases:
            raise SchemaError(f"unknown direction {value!r}")
        return aliases[token]


PROTECTED_KINDS = ("numeric", "binary", "ordinal", "categorical")


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    role: FeatureRole
    direction: Direction | None = None
    kind: str | None = None
    levels: tuple | None = None

    def __post_init__(self):
        if self.role is FeatureRole.LEGITIMATE and self.direction is None:
            raise SchemaError(f"legitimate feature {self.name!r} needs a direction")
        if self.role is FeatureRole.PROTECTED and self.direction is not None:
            raise SchemaError(f"protected feature {self.name!r} cannot carry a direction")
        if self.kind is not None and self.kind not in PROTECTED_KINDS:
            raise SchemaError(f"unknown kind {self.kind!r} for {self.name!r}")


def _infer_kind(series):
    if series.nunique(dropna=False) <= 2:
        return "binary"
    if pd.api.types.is_numeric_dtype(series):
        return "numeric"
    return "categorical"


@dataclass(frozen=True)
class Dataset:
    """Observations with protected/legitimate columns and optional labels.

    ``frame`` holds one column per feature in ``features`` order. Legitimate
    columns are float; protected columns keep their original values
    (categories stay categories).
    """

    frame: pd.DataFrame
    features: tuple
    labels: np.ndarray | None = None
    ids: np.ndarray | None = None

    def __post_init__(self):
        names = [f.name for f in self.features]
        if list(self.frame.columns) != names:
            raise SchemaError("frame columns do not match the feature list")
        if len(set(names)) != len(names):
            raise SchemaError("duplicate feature names")
        if not self.legitimate_names:
            raise SchemaError("dataset needs at least one legitimate feature")
        if self.frame.isna().to_numpy().any():
            raise SchemaError("dataset contains missing values")
        for f in self.features:
            if f.role is FeatureRole.LEGITIMATE and not pd.api.types.is_numeric_dtype(
                    self.frame[f.name]):
                raise SchemaError(f"legitimate feature {f.name!r} must be numeric")
        if self.labels is not None:
            labels = as_label_array(self.labels)
            if labels.shape[0] != len(self.frame):
                raise SchemaError("labels length does not match observations")
            object.__setattr__(self, "labels", labels)
        if self.ids is not None:
            ids = np.asarray(self.ids)
            if ids.shape[0] != len(self.frame):
                raise SchemaError("ids length does not match observations")
            object.__setattr__(self, "ids", ids)

    @classmethod
    def from_frame(cls, frame, directions, protected=(), labels=None, ids=None,
                   kinds=None):
        """Build a dataset from a DataFrame.

        Parameters
        ----------
        frame : DataFrame
            Must contain every column named in ``directions`` and ``protected``.
            Other columns are ignored.
        directions : dict
            Legitimate feature name -> direction (``"up"``/``"down"``).
        protected : sequence
            Names of protected columns.
        kinds : dict, optional
            Override the inferred kind of protected columns.
        """
        kinds = dict(kinds or {})
        protected = list(protected)
        legit = list(directions)
        overlap = set(protected) & set(legit)
        if overlap:
            raise SchemaError(
                f"features cannot be both protected and legitimate: {sorted(overlap)}")
        missing = [c for c in protected + legit if c not in frame.columns]
        if missing:
            raise SchemaError(f"missing columns: {missing}")
        specs = []
        for name in protected:
            kind = kinds.get(name) or _infer_kind(frame[name])
            specs.append(FeatureSpec(name, FeatureRole.PROTECTED, kind=kind))
        for name in legit:
            specs.append(FeatureSpec(name, FeatureRole.LEGITIMATE,
                                     Direction.parse(directions[name])))
        sub = frame[protected + legit].copy()
        for name in legit:
            try:
                sub[name] = pd.to_numeric(sub[name], errors="raise").astype(float)
            except (ValueError, TypeError):
                raise SchemaError(f"legitimate feature {name!r} must be numeric") from None
        sub = sub.reset_index(drop=True)
        return cls(sub, tuple(specs), labels=labels, ids=ids)

    @property
    def n(self):
        return len(self.frame)

    @property
    def legitimate(self):
        return tuple(f for f in self.features if f.role is FeatureRole.LEGITIMATE)

    @property
    def protected(self):
        return tuple(f for f in self.features if f.role is FeatureRole.PROTECTED)

    @property
    def legitimate_names(self):
        return [f.name for f in self.legitimate]

    @property
    def protected_names(self):
        return [f.name for f in self.protected]

    @property
    def directions(self):
        return {f.name: f.direction for f in self.legitimate}

    @property
    def X(self):
        """Raw legitimate features as an ``(n, L)`` float array."""
        return self.frame[self.legitimate_names].to_numpy(dtype=float)

    @property
    def A(self):
        return self.frame[self.protected_names]

    def subset(self, index):
        index = np.asarray(index, dtype=int)
        return replace(
            self,
            frame=self.frame.iloc[index].reset_index(drop=True),
            labels=None if self.labels is None else self.labels[index],
            ids=None if self.ids is None else self.ids[index],
        )

    def with_labels(self, labels):
        return replace(self, labels=labels)

    def schema_dict(self):
        """Schema annotation in the same layout :func:`load_schema` reads."""
        feats = {}
        for f in self.features:
            entry = {"role": f.role.value}
            if f.direction is not None:
                entry["direction"] = f.direction.value
            if f.kind is not None:
                entry["kind"] = f.kind
            if f.levels is not None:
                entry["levels"] = list(f.levels)
            feats[f.name] = entry
        return {"features": feats}


# -- scaling ---------------------------------------------------------------

@dataclass(frozen=True)
class ScalingSpec:
    """Per-feature min/max and direction learned from a fit dataset."""

    names: tuple
    mins: np.ndarray
    maxs: np.ndarray
    directions: tuple

    def __post_init__(self):
        mins = np.asarray(self.mins, dtype=float)
        maxs = np.asarray(self.maxs, dtype=float)
        if mins.shape != (len(self.names),) or maxs.shape != mins.shape:
            raise SchemaError("min/max arrays do not match feature names")
        if np.any(mins > maxs):
            raise SchemaError("min exceeds max")
        object.__setattr__(self, "mins", mins)
        object.__setattr__(self, "maxs", maxs)
        object.__setattr__(self, "directions",
                           tuple(Direction.parse(d) for d in self.directions))

    @property
    def degenerate(self):
        return self.maxs == self.mins

    def to_dict(self):
        return {
            "names": list(self.names),
            "min": self.mins.tolist(),
            "max": self.maxs.tolist(),
            "direction": [d.value for d in self.directions],
            "degenerate": self.degenerate.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["names"]), d["min"], d["max"], tuple(d["direction"]))


def fit_scaling(dataset):
    """Record the observed range of each legitimate feature."""
    if dataset.n == 0:
        raise SchemaError("cannot fit scaling on an empty dataset")
    X = dataset.X
    return ScalingSpec(
        names=tuple(dataset.legitimate_names),
        mins=X.min(axis=0),
        maxs=X.max(axis=0),
        directions=tuple(f.direction for f in dataset.legitimate),
    )


def _rows_matrix(spec, rows):
    if isinstance(rows, Dataset):
        rows = rows.frame[rows.legitimate_names]
    if isinstance(rows, pd.DataFrame):
        unknown = [c for c in rows.columns if c not in spec.names]
        if unknown:
            raise SchemaError(f"unknown features: {unknown}")
        missing = [c for c in spec.names if c not in rows.columns]
        if missing:
            raise SchemaError(f"missing features: {missing}")
        return rows[list(spec.names)].to_numpy(dtype=float)
    X = np.asarray(rows, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != len(spec.names):
        raise SchemaError(
            f"expected {len(spec.names)} legitimate features, got shape {X.shape}")
    return X


def apply_scaling(spec, rows):
    """Map raw legitimate features to ``Z`` in ``[0, 1]``.

    Values outside the fitted range are clamped. Degenerate (constant)
    features map to 0 regardless of direction.
    """
    X = _rows_matrix(spec, rows)
    span = spec.maxs - spec.mins
    degenerate = span == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        Z = (X - spec.mins) / np.where(degenerate, 1.0, span)
    Z = np.clip(Z, 0.0, 1.0)
    down = np.array([d is Direction.DOWN for d in spec.directions])
    Z[:, down] = 1.0 - Z[:, down]
    Z[:, degenerate] = 0.0
    return Z


class MonotonicScaler(TransformerMixin, BaseEstimator):
    """Min-max scaler that flips features where lower raw values are better.

    Parameters
    ----------
    directions : sequence of {"up", "down"}
        One entry per input column.
    """

    def __init__(self, directions=None):
        self.directions = directions

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=float)
        directions = self.directions
        if directions is None:
            directions = ["up"] * X.shape[1]
        if len(directions) != X.shape[1]:
            raise SchemaError("need one direction per column")
        if X.shape[0] == 0:
            raise SchemaError("cannot fit scaling on an empty array")
        self.spec_ = ScalingSpec(
            names=tuple(range(X.shape[1])),
            mins=X.min(axis=0),
            maxs=X.max(axis=0),
            directions=tuple(directions),
        )
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "spec_")
        return apply_scaling(self.spec_, np.asarray(X, dtype=float))


# -- ingestion -------------------------------------------------------------

def _parse_feature_entry(name, entry):
    if not isinstance(entry, dict) or "role" not in entry:
        raise SchemaError(f"schema entry for {name!r} needs a role")
    try:
        role = FeatureRole(str(entry["role"]).lower())
    except ValueError:
        raise SchemaError(f"unknown role {entry['role']!r} for {name!r}") from None
    direction = entry.get("direction")
    levels = entry.get("levels")
    return FeatureSpec(
        name=name,
        role=role,
        direction=None if direction is None else Direction.parse(direction),
        kind=entry.get("kind"),
        levels=None if levels is None else tuple(levels),
    )


def load_schema(source):
    """Read a schema annotation (YAML path or already-parsed dict).

    Layout::

        label: admitted          # optional label column
        positive: "yes"          # optional; value that means "+"
        id: applicant_id         # optional id column
        features:
          gender: {role: protected}
          gre_q:  {role: legitimate, direction: up}
    """
    if isinstance(source, (str, Path)):
        with open(source) as fh:
            source = yaml.safe_load(fh)
    if not isinstance(source, dict) or not isinstance(source.get("features"), dict):
        raise SchemaError("schema must contain a 'features' mapping")
    schema = dict(source)
    schema["features"] = tuple(
        _parse_feature_entry(name, entry) for name, entry in source["features"].items())
    return schema


def _encode_levels(series, levels, name):
    mapping = {str(level): i for i, level in enumerate(levels)}
    codes = series.astype(str).map(mapping)
    if codes.isna().any():
        bad = sorted(set(series.astype(str)[codes.isna()]))
        raise SchemaError(f"unknown levels for {name!r}: {bad}")
    return codes.astype(float)


def _parse_labels(raw, positive):
    if positive is None:
        return as_label_array(raw.astype(str).to_numpy())
    pos = str(positive)
    return np.where(raw.astype(str).to_numpy() == pos, POSITIVE, NEGATIVE)


def _frame_to_dataset(df, schema):
    features = schema["features"]
    missing = [f.name for f in features if f.name not in df.columns]
    label_col, id_col = schema.get("label"), schema.get("id")
    for extra in (label_col, id_col):
        if extra is not None and extra not in df.columns:
            missing.append(extra)
    if missing:
        raise SchemaError(f"missing columns: {missing}")
    out = pd.DataFrame(index=range(len(df)))
    specs = []
    for f in features:
        col = df[f.name].reset_index(drop=True)
        if col.isna().any():
            raise SchemaError(f"column {f.name!r} has missing values")
        if f.role is FeatureRole.LEGITIMATE:
            if f.levels is not None:
                col = _encode_levels(col, f.levels, f.name)
            else:
                try:
                    col = pd.to_numeric(col, errors="raise").astype(float)
                except (ValueError, TypeError):
                    raise SchemaError(f"unparseable value in column {f.name!r}") from None
            specs.append(f)
        else:
            kind = f.kind or _infer_kind(col)
            if f.levels is not None:
                col = _encode_levels(col, f.levels, f.name)
                kind = f.kind or "ordinal"
            specs.append(replace(f, kind=kind))
        out[f.name] = col
    labels = None
    if label_col is not None:
        labels = _parse_labels(df[label_col].reset_index(drop=True), schema.get("positive"))
    ids = None if id_col is None else df[id_col].to_numpy()
    return Dataset(out, tuple(specs), labels=labels, ids=ids)


def load_csv(path, schema):
    """Load a CSV with a header row into a :class:`Dataset`.

    ``schema`` is a path to a YAML annotation or a dict in the same layout
    (see :func:`load_schema`).
    """
    schema = load_schema(schema)
    try:
        df = pd.read_csv(path, skipinitialspace=True, float_precision="round_trip")
    except pd.errors.EmptyDataError:
        raise SchemaError(f"{path} is empty") from None
    if len(df) == 0:
        raise SchemaError(f"{path} has no observations")
    return _frame_to_dataset(df, schema)


def write_csv(dataset, path, schema_path=None, label_column="label", id_column="id"):
    """Write a dataset as CSV (and optionally its schema as YAML)."""
    df = dataset.frame.copy()
    if dataset.ids is not None:
        df.insert(0, id_column, dataset.ids)
    if dataset.labels is not None:
        df[label_column] = dataset.labels
    df.to_csv(path, index=False, float_format="%.10g")
    if schema_path is not None:
        schema = dataset.schema_dict()
        if dataset.labels is not None:
            schema["label"] = label_column
        if dataset.ids is not None:
            schema["id"] = id_column
        with open(schema_path, "w") as fh:
            yaml.safe_dump(schema, fh, sort_keys=False)


def default_german_mapping():
    text = resources.files("fairrank").joinpath("data/german_credit.yaml").read_text()
    return yaml.safe_load(text)


def load_german_credit(path, mapping=None):
    """Read the UCI ``german.data`` file into a :class:`Dataset`.

    ``mapping`` (dict or YAML path) names the raw columns and, for each
    retained feature, its role, direction and ordinal encoding of the
    categorical codes. The packaged mapping is used by default. Raw columns
    not listed under ``features`` are dropped.
    """
    if mapping is None:
        mapping = default_german_mapping()
    elif isinstance(mapping, (str, Path)):
        with open(mapping) as fh:
            mapping = yaml.safe_load(fh)
    columns = mapping["columns"]
    retained = mapping.get("retained", list(mapping["features"]))
    missing = [name for name in retained if name not in mapping["features"]]
    if missing:
        raise SchemaError(f"mapping config lacks retained features: {missing}")

    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            fields = line.split()
            if len(fields) != len(columns):
                raise SchemaError(
                    f"line {lineno}: expected {len(columns)} fields, got {len(fields)}")
            rows.append(fields)
    if not rows:
        raise SchemaError(f"{path} has no observations")
    raw = pd.DataFrame(rows, columns=columns)

    out = pd.DataFrame(index=range(len(raw)))
    specs = []
    for name in retained:
        entry = mapping["features"][name]
        source = raw[entry.get("column", name)]
        spec = _parse_feature_entry(name, entry)
        encoding = entry.get("encoding")
        if encoding is not None:
            codes = source.map({str(k): v for k, v in encoding.items()})
            if codes.isna().any():
                bad = sorted(set(source[codes.isna()]))
                raise SchemaError(f"unmapped codes for {name!r}: {bad}")
            col = codes if spec.role is FeatureRole.PROTECTED and spec.kind == "categorical" \
                else codes.astype(float)
        else:
            try:
                col = pd.to_numeric(source, errors="raise").astype(float)
            except (ValueError, TypeError):
                raise SchemaError(f"non-numeric value in column {name!r}") from None
        if spec.role is FeatureRole.PROTECTED and spec.kind is None:
            spec = replace(spec, kind=_infer_kind(col))
        out[name] = col
        specs.append(spec)
    label = mapping["label"]
    labels = np.where(raw[label["column"]] == str(label["positive"]), POSITIVE, NEGATIVE)
    return Dataset(out, tuple(specs), labels=labels, ids=np.arange(1, len(raw) + 1))


def train_test_split(dataset, test_size, seed=0):
    """Shuffle deterministically under ``seed`` and hold out ``test_size`` rows.

    ``test_size`` is a row count, or a fraction when given as a float in
    ``(0, 1)``.
    """
    n = dataset.n
    if isinstance(test_size, float) and 0 < test_size < 1:
        test_size = int(round(test_size * n))
    test_size = int(test_size)
    if test_size < 0 or test_size >= n:
        raise ValueError(f"test_size must be in [0, {n}), got {test_size}")
    perm = np.random.default_rng(seed).permutation(n)
    return dataset.subset(np.sort(perm[test_size:])), dataset.subset(np.sort(perm[:test_size]))
