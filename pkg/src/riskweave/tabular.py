"""Schema-aware tabular datasets: parsing, splitting, synthesis.

CSV dialect (v1): UTF-8, first line is the header, comma separator, values must
not contain commas. Missing values are rejected at parse time (the
``allow_missing`` flag on FeatureSpec is reserved for a later version).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import (
    BadSchemaFile,
    EmptyFile,
    FractionOutOfRange,
    MissingColumn,
    NTooSmall,
    TargetNotBinary,
    UnknownColumn,
    ValueOutOfDomain,
)
from .prng import SplitMix64

CATEGORICAL = "categorical"
NUMERIC = "numeric"


@dataclass(frozen=True)
class FeatureSpec:
    """One column: either categorical with declared levels or numeric with a unit."""

    name: str
    kind: str
    levels: tuple[str, ...] = ()
    unit: str = ""
    allow_missing: bool = False  # reserved, not honored in v1

    def __post_init__(self):
        if not self.name:
            raise ValueError("feature name must be non-empty")
        if self.kind not in (CATEGORICAL, NUMERIC):
            raise ValueError(f"unknown feature kind {self.kind!r}")
        if self.kind == CATEGORICAL:
            if not self.levels:
                raise ValueError(f"categorical feature {self.name!r} needs levels")
            if len(set(self.levels)) != len(self.levels):
                raise ValueError(f"duplicate levels on feature {self.name!r}")


@dataclass(frozen=True)
class TargetSpec:
    """Binary target: a name, its two labels, and which label means 'high risk'."""

    name: str
    labels: tuple[str, str]
    positive: str

    def __post_init__(self):
        if len(self.labels) != 2 or self.labels[0] == self.labels[1]:
            raise ValueError("target needs exactly two distinct labels")
        if self.positive not in self.labels:
            raise ValueError("positive label must be one of the target labels")


@dataclass(frozen=True)
class Schema:
    features: tuple[FeatureSpec, ...]
    target: TargetSpec

    def __post_init__(self):
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise ValueError("feature names must be unique")
        if self.target.name in names:
            raise ValueError("target name clashes with a feature name")

    @property
    def feature_names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.features)

    @property
    def classes(self) -> tuple[str, str]:
        return self.target.labels

    @property
    def positive_index(self) -> int:
        return self.target.labels.index(self.target.positive)

    def feature(self, name: str) -> FeatureSpec:
        for f in self.features:
            if f.name == name:
                return f
        raise KeyError(name)

    def index_of(self, name: str) -> int:
        for i, f in enumerate(self.features):
            if f.name == name:
                return i
        raise KeyError(name)

    def coerce_value(self, spec: FeatureSpec, raw, *, row=None):
        """Validate one raw value against a feature spec; returns the typed value."""
        if spec.kind == NUMERIC:
            if isinstance(raw, bool):
                raise ValueOutOfDomain(
                    f"{spec.name}: expected a number, got a boolean",
                    row=row, column=spec.name, value=raw,
                )
            if isinstance(raw, (int, float)):
                value = float(raw)
            else:
                value = _parse_decimal(str(raw))
                if value is None:
                    raise ValueOutOfDomain(
                        f"{spec.name}: {raw!r} is not a decimal number",
                        row=row, column=spec.name, value=raw,
                    )
            if not math.isfinite(value):
                raise ValueOutOfDomain(
                    f"{spec.name}: non-finite value", row=row, column=spec.name, value=raw,
                )
            return value
        text = str(raw)
        if text not in spec.levels:
            raise ValueOutOfDomain(
                f"{spec.name}: {text!r} is not one of {list(spec.levels)}",
                row=row, column=spec.name, value=text,
            )
        return text

    def coerce_instance(self, mapping) -> tuple:
        """Turn a {feature name: value} mapping into a positional value tuple."""
        missing = [f.name for f in self.features if f.name not in mapping]
        if missing:
            raise ValueOutOfDomain(f"missing features: {missing}", missing=missing)
        extra = [k for k in mapping if k not in self.feature_names]
        if extra:
            raise ValueOutOfDomain(f"unknown features: {extra}", unknown=extra)
        return tuple(self.coerce_value(f, mapping[f.name]) for f in self.features)

    def to_json(self) -> dict:
        return {
            "features": [
                {
                    "name": f.name,
                    "kind": f.kind,
                    **({"levels": list(f.levels)} if f.kind == CATEGORICAL else {"unit": f.unit}),
                }
                for f in self.features
            ],
            "target": {
                "name": self.target.name,
                "labels": list(self.target.labels),
                "positive": self.target.positive,
            },
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Schema":
        try:
            feats = tuple(
                FeatureSpec(
                    name=f["name"],
                    kind=f["kind"],
                    levels=tuple(f.get("levels", ())),
                    unit=f.get("unit", ""),
                )
                for f in obj["features"]
            )
            tgt = obj["target"]
            target = TargetSpec(tgt["name"], tuple(tgt["labels"]), tgt["positive"])
        except (KeyError, TypeError, ValueError) as exc:
            raise BadSchemaFile(f"malformed schema object: {exc}") from exc
        return cls(feats, target)


@dataclass(frozen=True)
class Dataset:
    """Immutable rows (feature tuples, schema order) plus parallel target labels."""

    schema: Schema
    rows: tuple[tuple, ...]
    labels: tuple[str, ...]
    provenance: str = ""

    def __post_init__(self):
        if len(self.rows) != len(self.labels):
            raise ValueError("rows and labels length mismatch")
        width = len(self.schema.features)
        for r in self.rows:
            if len(r) != width:
                raise ValueError("row arity does not match schema")
        valid = set(self.schema.classes)
        for lab in self.labels:
            if lab not in valid:
                raise ValueError(f"label {lab!r} not in target classes")

    @property
    def n(self) -> int:
        return len(self.rows)

    def class_counts(self) -> tuple[int, int]:
        a, b = self.schema.classes
        ca = sum(1 for lab in self.labels if lab == a)
        return (ca, len(self.labels) - ca)


def _parse_decimal(text: str):
    """Decimal numbers with '.' separator only; returns None when unparseable."""
    t = text.strip()
    if not t or "," in t:
        return None
    try:
        v = float(t)
    except ValueError:
        return None
    if t.lower() in ("nan", "inf", "-inf", "+inf", "infinity", "-infinity", "+infinity"):
        return None
    return v


def _split_lines(text: str) -> list[str]:
    lines = text.replace("\r\n", "\n").replace("\r", "\n").split("\n")
    return [ln for ln in lines if ln != ""]


def parse_csv(text: str, schema: Schema) -> Dataset:
    """Parse CSV text against a schema. Row order is preserved.

    Raises UnknownColumn / MissingColumn on header mismatches, EmptyFile when
    there are no data rows, ValueOutOfDomain for values outside the schema
    (row numbers are 1-based over data rows).
    """
    lines = _split_lines(text)
    if not lines:
        raise EmptyFile("no header line")
    header = [h.strip() for h in lines[0].split(",")]
    expected = set(schema.feature_names) | {schema.target.name}
    for name in header:
        if name not in expected:
            raise UnknownColumn(f"column {name!r} not in schema", column=name)
    for name in expected:
        if name not in header:
            raise MissingColumn(f"column {name!r} missing from header", column=name)
    if len(header) != len(expected):
        dupes = sorted({h for h in header if header.count(h) > 1})
        raise UnknownColumn(f"duplicated columns: {dupes}", column=dupes[0])
    if len(lines) == 1:
        raise EmptyFile("header only, no data rows")

    col_of = {name: i for i, name in enumerate(header)}
    target_col = col_of[schema.target.name]
    feature_cols = [col_of[f.name] for f in schema.features]

    rows = []
    labels = []
    for rownum, line in enumerate(lines[1:], start=1):
        cells = line.split(",")
        if len(cells) != len(header):
            raise ValueOutOfDomain(
                f"row {rownum}: expected {len(header)} values, got {len(cells)}",
                row=rownum, column=None,
            )
        values = tuple(
            schema.coerce_value(spec, cells[col].strip(), row=rownum)
            for spec, col in zip(schema.features, feature_cols)
        )
        label = cells[target_col].strip()
        if label not in schema.classes:
            raise ValueOutOfDomain(
                f"row {rownum}: target {label!r} not in {list(schema.classes)}",
                row=rownum, column=schema.target.name, value=label,
            )
        rows.append(values)
        labels.append(label)
    return Dataset(schema, tuple(rows), tuple(labels), provenance="csv")


def serialize_csv(dataset: Dataset) -> str:
    """Inverse of parse_csv: floats use repr (shortest round-trip form)."""
    header = ",".join(list(dataset.schema.feature_names) + [dataset.schema.target.name])
    out = [header]
    for values, label in zip(dataset.rows, dataset.labels):
        cells = [repr(v) if isinstance(v, float) else str(v) for v in values]
        out.append(",".join(cells + [label]))
    return "\n".join(out) + "\n"


def infer_schema(text: str) -> Schema:
    """Infer a Schema from CSV text. The last column is the target.

    A column is numeric iff all its non-empty values parse as decimal numbers;
    otherwise it is categorical with the observed levels sorted
    lexicographically. The positive target label is the minority class
    (risk events are the rarer outcome), ties broken lexicographically.
    """
    lines = _split_lines(text)
    if not lines:
        raise EmptyFile("no header line")
    header = [h.strip() for h in lines[0].split(",")]
    if len(lines) == 1:
        raise EmptyFile("header only, no data rows")

    columns: list[list[str]] = [[] for _ in header]
    for rownum, line in enumerate(lines[1:], start=1):
        cells = line.split(",")
        if len(cells) != len(header):
            raise ValueOutOfDomain(
                f"row {rownum}: expected {len(header)} values, got {len(cells)}",
                row=rownum, column=None,
            )
        for i, cell in enumerate(cells):
            columns[i].append(cell.strip())

    target_values = columns[-1]
    distinct = sorted(set(target_values))
    if len(distinct) != 2:
        raise TargetNotBinary(
            f"target column {header[-1]!r} has {len(distinct)} distinct labels",
            labels=distinct,
        )
    counts = {lab: target_values.count(lab) for lab in distinct}
    positive = min(distinct, key=lambda lab: (counts[lab], lab))

    feats = []
    for name, col in zip(header[:-1], columns[:-1]):
        non_empty = [c for c in col if c != ""]
        if non_empty and all(_parse_decimal(c) is not None for c in non_empty):
            feats.append(FeatureSpec(name, NUMERIC, unit=""))
        else:
            feats.append(FeatureSpec(name, CATEGORICAL, levels=tuple(sorted(set(col)))))
    return Schema(tuple(feats), TargetSpec(header[-1], (distinct[0], distinct[1]), positive))


def split(dataset: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Deterministic shuffled split; |test| = round(n * test_fraction)."""
    if not (0.0 < test_fraction < 1.0):
        raise FractionOutOfRange(f"test_fraction {test_fraction} not in (0, 1)")
    n = dataset.n
    if n < 2:
        raise NTooSmall("need at least 2 rows to split", n=n)
    n_test = int(math.floor(n * test_fraction + 0.5))
    n_test = max(1, min(n - 1, n_test))
    indices = list(range(n))
    SplitMix64(seed).shuffle(indices)
    test_idx = indices[:n_test]
    train_idx = indices[n_test:]

    def take(idx):
        return Dataset(
            dataset.schema,
            tuple(dataset.rows[i] for i in idx),
            tuple(dataset.labels[i] for i in idx),
            provenance=dataset.provenance,
        )

    return take(train_idx), take(test_idx)


# --- schema text files -------------------------------------------------------
#
# One line per entry, '|'-separated fields:
#   feature: <name> | categorical | <level>, <level>, ...
#   feature: <name> | numeric | <unit>
#   target: <name> | <label>, <label> | positive=<label>
# Blank lines and lines starting with '#' are ignored.

def schema_to_text(schema: Schema) -> str:
    out = []
    for f in schema.features:
        if f.kind == CATEGORICAL:
            out.append(f"feature: {f.name} | categorical | {', '.join(f.levels)}")
        else:
            out.append(f"feature: {f.name} | numeric | {f.unit}")
    t = schema.target
    out.append(f"target: {t.name} | {', '.join(t.labels)} | positive={t.positive}")
    return "\n".join(out) + "\n"


def schema_from_text(text: str) -> Schema:
    feats: list[FeatureSpec] = []
    target: TargetSpec | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if ":" not in line:
            raise BadSchemaFile(f"line {lineno}: expected 'feature:' or 'target:'", line=lineno)
        head, _, rest = line.partition(":")
        parts = [p.strip() for p in rest.split("|")]
        if head.strip() == "feature":
            if len(parts) != 3:
                raise BadSchemaFile(f"line {lineno}: feature needs 3 fields", line=lineno)
            name, kind, detail = parts
            if kind == CATEGORICAL:
                levels = tuple(s.strip() for s in detail.split(",") if s.strip())
                feats.append(FeatureSpec(name, CATEGORICAL, levels=levels))
            elif kind == NUMERIC:
                feats.append(FeatureSpec(name, NUMERIC, unit=detail))
            else:
                raise BadSchemaFile(f"line {lineno}: unknown kind {kind!r}", line=lineno)
        elif head.strip() == "target":
            if len(parts) != 3 or not parts[2].startswith("positive="):
                raise BadSchemaFile(f"line {lineno}: malformed target line", line=lineno)
            name = parts[0]
            labels = tuple(s.strip() for s in parts[1].split(","))
            if len(labels) != 2:
                raise BadSchemaFile(f"line {lineno}: target needs two labels", line=lineno)
            target = TargetSpec(name, (labels[0], labels[1]), parts[2][len("positive="):].strip())
        else:
            raise BadSchemaFile(f"line {lineno}: unknown entry {head.strip()!r}", line=lineno)
    if target is None:
        raise BadSchemaFile("no target line")
    try:
        return Schema(tuple(feats), target)
    except ValueError as exc:
        raise BadSchemaFile(str(exc)) from exc


# --- synthetic CHD-like corpus ----------------------------------------------

LOW_RISK = "low risk"
HIGH_RISK = "high risk"

_AGE_BANDS = ("40-55", "55-65", "65-75", "75-90")
_AGE_WEIGHTS = (0.38, 0.29, 0.22, 0.11)


def chd_schema() -> Schema:
    """13-feature heart-risk schema used by the synthetic generator."""
    feats = (
        FeatureSpec("Age", CATEGORICAL, levels=_AGE_BANDS),
        FeatureSpec("Sex", CATEGORICAL, levels=("Female", "Male")),
        FeatureSpec("Cholesterol HDL ratio", CATEGORICAL, levels=("Normal", "High")),
        FeatureSpec("Total cholesterol", NUMERIC, unit="mmol/L"),
        FeatureSpec("HDL cholesterol", NUMERIC, unit="mmol/L"),
        FeatureSpec("Triglycerides", NUMERIC, unit="mmol/L"),
        FeatureSpec("Systolic blood pressure", NUMERIC, unit="mmHg"),
        FeatureSpec("Diastolic blood pressure", NUMERIC, unit="mmHg"),
        FeatureSpec("BMI", NUMERIC, unit="kg/m2"),
        FeatureSpec("Daily alcohol consumption", NUMERIC, unit="ml/day"),
        FeatureSpec("Smoking status", CATEGORICAL, levels=("Never", "Former", "Current")),
        FeatureSpec("Diabetes", CATEGORICAL, levels=("No", "Yes")),
        FeatureSpec("Physical activity", CATEGORICAL, levels=("Low", "Moderate", "High")),
    )
    return Schema(feats, TargetSpec("CHD risk", (LOW_RISK, HIGH_RISK), HIGH_RISK))


@dataclass(frozen=True)
class PlantedRules:
    """The label rule the generator used; kept so tests can re-apply it.

    High risk iff age is 75-90, or age is 65-75 with a High cholesterol-HDL
    ratio and daily alcohol at or above the threshold. BMI is generated but
    never consulted, on purpose.
    """

    alcohol_threshold: float = 68.5
    feature_names: tuple[str, ...] = ("Age", "Cholesterol HDL ratio", "Daily alcohol consumption")

    def label_for(self, row: tuple, schema: Schema) -> str:
        age = row[schema.index_of("Age")]
        ratio = row[schema.index_of("Cholesterol HDL ratio")]
        alcohol = row[schema.index_of("Daily alcohol consumption")]
        if age == "75-90":
            return HIGH_RISK
        if age == "65-75" and ratio == "High" and alcohol >= self.alcohol_threshold:
            return HIGH_RISK
        return LOW_RISK

    def describe(self) -> str:
        return (
            "high risk when Age = 75-90, or when Age = 65-75 and "
            "Cholesterol HDL ratio = High and Daily alcohol consumption >= "
            f"{self.alcohol_threshold} ml/day; low risk otherwise"
        )


@dataclass(frozen=True)
class ChdSynthesis:
    dataset: Dataset
    rules: PlantedRules = field(default_factory=PlantedRules)
    noise: float = 0.05


def synthesize_chd_like(seed: int, n: int, noise: float = 0.05) -> ChdSynthesis:
    """Generate an n-row corpus whose labels follow PlantedRules plus label noise."""
    if n < 100:
        raise NTooSmall(f"need n >= 100, got {n}", n=n)
    if not (0.0 <= noise < 1.0):
        raise FractionOutOfRange(f"noise {noise} not in [0, 1)")
    schema = chd_schema()
    rules = PlantedRules()
    rng = SplitMix64(seed)

    rows = []
    labels = []
    for _ in range(n):
        age = rng.choice_weighted(_AGE_BANDS, _AGE_WEIGHTS)
        sex = rng.choice_weighted(("Female", "Male"), (0.52, 0.48))
        ratio = rng.choice_weighted(("Normal", "High"), (0.6, 0.4))
        total_chol = round(rng.next_gauss(5.6, 1.0), 2)
        hdl = round(max(0.5, rng.next_gauss(1.3, 0.3)), 2)
        trig = round(max(0.3, rng.next_gauss(1.6, 0.7)), 2)
        sbp = round(rng.next_gauss(133.0, 17.0), 1)
        dbp = round(rng.next_gauss(82.0, 10.0), 1)
        bmi = round(rng.next_gauss(26.5, 4.0), 1)
        alcohol = round(rng.next_double() * 160.0, 1)
        smoking = rng.choice_weighted(("Never", "Former", "Current"), (0.5, 0.3, 0.2))
        diabetes = rng.choice_weighted(("No", "Yes"), (0.92, 0.08))
        activity = rng.choice_weighted(("Low", "Moderate", "High"), (0.3, 0.5, 0.2))
        row = (
            age, sex, ratio, total_chol, hdl, trig, sbp, dbp, bmi, alcohol,
            smoking, diabetes, activity,
        )
        label = rules.label_for(row, schema)
        if noise > 0.0 and rng.next_double() < noise:
            label = HIGH_RISK if label == LOW_RISK else LOW_RISK
        rows.append(row)
        labels.append(label)

    dataset = Dataset(schema, tuple(rows), tuple(labels), provenance=f"synthetic-chd(seed={seed})")
    return ChdSynthesis(dataset=dataset, rules=rules, noise=noise)
