"""Discrete-time logistic outcome model over treatment cycles.

Each attempted cycle is one Bernoulli person-period row; the model has one
intercept per cycle plus shared feature weights. Cumulative success over t
cycles is 1 - prod(1 - p_s). Fitting maximizes the ridge-penalized
log-likelihood by full-batch gradient ascent with backtracking line search.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    BadModelFile,
    CycleOutOfRange,
    NoComparablePairs,
    NoData,
    NotConverged,
    NTooSmall,
    SchemaMismatch,
    ValueOutOfDomain,
)
from .prng import SplitMix64
from .tabular import (
    CATEGORICAL,
    NUMERIC,
    FeatureSpec,
    Schema,
    TargetSpec,
    _split_lines,
)
from .verbal import (
    NATURAL_FREQUENCY,
    PERCENTAGE,
    VERBAL,
    VerbalMap,
    format_probability,
)


def ivf_schema() -> Schema:
    """The eight patient inputs of the fertility outcome setting."""
    feats = (
        FeatureSpec("Age", NUMERIC, unit="years"),
        FeatureSpec("Years of infertility", NUMERIC, unit="years"),
        FeatureSpec("Number of eggs collected in first IVF cycle", NUMERIC, unit="eggs"),
        FeatureSpec("Type of embryo transfer", CATEGORICAL, levels=(
            "No embryos transferred",
            "Stage 2 embryos transferred on day 2 or 3",
            "Blastocyst transferred on day 5 or 6",
        )),
        FeatureSpec("Previous pregnancy", CATEGORICAL, levels=("No", "Yes")),
        FeatureSpec("Tubal infertility", CATEGORICAL, levels=("No", "Yes")),
        FeatureSpec("First cycle type", CATEGORICAL, levels=("IVF", "ICSI")),
        FeatureSpec("Embryos frozen in first cycle", CATEGORICAL, levels=("No", "Yes")),
    )
    return Schema(feats, TargetSpec("Live birth", ("no", "yes"), "yes"))


@dataclass(frozen=True)
class CycleRecord:
    """One attempted cycle: patient features, 1-based cycle index, outcome."""

    values: tuple
    cycle_index: int
    outcome: bool

    def __post_init__(self):
        if self.cycle_index < 1:
            raise ValueError("cycle_index must be >= 1")

    @classmethod
    def from_mapping(cls, schema: Schema, mapping, cycle_index: int,
                     outcome: bool) -> "CycleRecord":
        return cls(schema.coerce_instance(mapping), cycle_index, bool(outcome))


# --- feature encoding ----------------------------------------------------------

@dataclass(frozen=True)
class EncodedColumn:
    feature: str
    kind: str  # "onehot" | "numeric"
    level: str = ""
    mean: float = 0.0
    std: float = 1.0


@dataclass(frozen=True)
class Encoding:
    """One-hot (first level dropped) for categoricals, standardized numerics."""

    schema: Schema
    columns: tuple[EncodedColumn, ...]

    @property
    def width(self) -> int:
        return len(self.columns)

    def encode_values(self, values: tuple) -> list[float]:
        out = []
        for col in self.columns:
            v = values[self.schema.index_of(col.feature)]
            if col.kind == "onehot":
                out.append(1.0 if v == col.level else 0.0)
            else:
                out.append((v - col.mean) / col.std)
        return out

    def decode(self, vector) -> tuple:
        values = []
        i = 0
        for spec in self.schema.features:
            if spec.kind == CATEGORICAL:
                width = len(spec.levels) - 1
                hot = None
                for j in range(width):
                    if vector[i + j] >= 0.5:
                        hot = spec.levels[1 + j]
                        break
                values.append(hot if hot is not None else spec.levels[0])
                i += width
            else:
                col = self.columns[i]
                values.append(vector[i] * col.std + col.mean)
                i += 1
        return tuple(values)


def raw_columns(schema: Schema) -> tuple[EncodedColumn, ...]:
    """Column layout with no standardization (mean 0, std 1)."""
    cols = []
    for spec in schema.features:
        if spec.kind == CATEGORICAL:
            for level in spec.levels[1:]:
                cols.append(EncodedColumn(spec.name, "onehot", level=level))
        else:
            cols.append(EncodedColumn(spec.name, "numeric"))
    return tuple(cols)


def build_encoding(schema: Schema, records) -> Encoding:
    """Standardization constants come from the person-period rows themselves."""
    cols = []
    for spec in schema.features:
        if spec.kind == CATEGORICAL:
            for level in spec.levels[1:]:
                cols.append(EncodedColumn(spec.name, "onehot", level=level))
        else:
            idx = schema.index_of(spec.name)
            xs = [r.values[idx] for r in records]
            mean = sum(xs) / len(xs)
            var = sum((x - mean) ** 2 for x in xs) / len(xs)
            std = math.sqrt(var)
            cols.append(EncodedColumn(spec.name, "numeric", mean=mean,
                                      std=std if std > 0 else 1.0))
    return Encoding(schema=schema, columns=tuple(cols))


# --- model -----------------------------------------------------------------------

@dataclass(frozen=True)
class CycleModel:
    schema: Schema
    encoding: Encoding
    weights: tuple[float, ...]
    intercepts: tuple[float, ...]
    train_records: int

    @property
    def n_cycles(self) -> int:
        return len(self.intercepts)


@dataclass(frozen=True)
class CumulativeCurve:
    conditional: tuple[float, ...]
    cumulative: tuple[float, ...]


def logistic(z: float) -> float:
    """Numerically stable 1 / (1 + exp(-z))."""
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def _encode_instance(model: CycleModel, features) -> list[float]:
    try:
        values = model.schema.coerce_instance(features)
    except Exception as exc:
        raise SchemaMismatch(f"features do not conform to schema: {exc}") from exc
    return model.encoding.encode_values(values)


def linear_predictor(model: CycleModel, features, t: int) -> float:
    """alpha_t + w . x(features) for 1-based cycle t."""
    if not (1 <= t <= model.n_cycles):
        raise CycleOutOfRange(f"cycle {t} outside 1..{model.n_cycles}", t=t,
                              max_cycles=model.n_cycles)
    x = _encode_instance(model, features)
    z = model.intercepts[t - 1]
    for w, v in zip(model.weights, x):
        z += w * v
    return z


def predict_curve(model: CycleModel, features, n_cycles: Optional[int] = None) -> CumulativeCurve:
    """Per-cycle success probabilities and the cumulative 1 - prod(1 - p_s)."""
    if n_cycles is None:
        n_cycles = model.n_cycles
    if not (1 <= n_cycles <= model.n_cycles):
        raise CycleOutOfRange(f"n_cycles {n_cycles} outside 1..{model.n_cycles}",
                              t=n_cycles, max_cycles=model.n_cycles)
    x = _encode_instance(model, features)
    base = 0.0
    for w, v in zip(model.weights, x):
        base += w * v
    conditional = []
    cumulative = []
    survival = 1.0
    for t in range(n_cycles):
        p = logistic(model.intercepts[t] + base)
        conditional.append(p)
        survival *= (1.0 - p)
        cumulative.append(1.0 - survival)
    return CumulativeCurve(conditional=tuple(conditional), cumulative=tuple(cumulative))


# --- fitting ---------------------------------------------------------------------

class FitProblem:
    """Penalized mean log-likelihood and its gradient, for fitting and for
    finite-difference checks. theta stacks [feature weights, cycle intercepts]."""

    def __init__(self, X: np.ndarray, t_index: np.ndarray, y: np.ndarray,
                 n_cycles: int, reg: float):
        self.X = X
        self.t_index = t_index
        self.y = y
        self.n_cycles = n_cycles
        self.reg = reg
        self.n = X.shape[0]
        self.width = X.shape[1]

    def _z(self, theta: np.ndarray) -> np.ndarray:
        w = theta[:self.width]
        alpha = theta[self.width:]
        return self.X @ w + alpha[self.t_index]

    def value(self, theta: np.ndarray) -> float:
        z = self._z(theta)
        loglik = self.y * z - np.logaddexp(0.0, z)
        w = theta[:self.width]
        return float(loglik.mean() - (self.reg / self.n) * np.dot(w, w))

    def gradient(self, theta: np.ndarray) -> np.ndarray:
        z = self._z(theta)
        p = 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))
        resid = self.y - p
        w = theta[:self.width]
        grad_w = self.X.T @ resid / self.n - (2.0 * self.reg / self.n) * w
        grad_a = np.bincount(self.t_index, weights=resid, minlength=self.n_cycles) / self.n
        return np.concatenate([grad_w, grad_a])


def build_problem(records, schema: Schema, n_cycles: int,
                  reg: float = 1e-4) -> tuple[FitProblem, Encoding]:
    records = list(records)
    if not records:
        raise NoData("no cycle records")
    seen = {r.cycle_index for r in records}
    for t in range(1, n_cycles + 1):
        if t not in seen:
            raise NoData(f"no records for cycle {t}", cycle=t)
    beyond = max(seen)
    if beyond > n_cycles:
        raise CycleOutOfRange(f"record at cycle {beyond} exceeds T={n_cycles}",
                              t=beyond, max_cycles=n_cycles)
    encoding = build_encoding(schema, records)
    X = np.array([encoding.encode_values(r.values) for r in records], dtype=np.float64)
    t_index = np.array([r.cycle_index - 1 for r in records], dtype=np.int64)
    y = np.array([1.0 if r.outcome else 0.0 for r in records], dtype=np.float64)
    return FitProblem(X, t_index, y, n_cycles, reg), encoding


def fit(records, schema: Schema, n_cycles: int = 6, reg: float = 1e-4,
        tol: float = 1e-6, max_iter: int = 10000) -> CycleModel:
    """Maximize the ridge-penalized Bernoulli log-likelihood from zero init.

    The objective is averaged per record (with the penalty scaled to match),
    which leaves the maximizer unchanged; convergence means the averaged
    gradient's max-norm is <= tol. Deterministic: full-batch gradient ascent
    with Armijo backtracking, no randomness anywhere.
    """
    if reg < 0:
        raise ValueError("reg must be >= 0")
    problem, encoding = build_problem(records, schema, n_cycles, reg)
    theta = np.zeros(problem.width + n_cycles)
    value = problem.value(theta)
    step = 1.0
    for iteration in range(max_iter):
        grad = problem.gradient(theta)
        gmax = float(np.max(np.abs(grad))) if grad.size else 0.0
        if gmax <= tol:
            return _model_from_theta(problem, encoding, schema, theta)
        gg = float(np.dot(grad, grad))
        step = min(step * 4.0, 1e6)
        while True:
            candidate = theta + step * grad
            new_value = problem.value(candidate)
            if new_value >= value + 1e-4 * step * gg:
                theta = candidate
                value = new_value
                break
            step *= 0.5
            if step < 1e-15:
                raise NotConverged(
                    f"line search stalled at iteration {iteration}",
                    iterations=iteration, gradient_max=gmax,
                )
    raise NotConverged(f"no convergence in {max_iter} iterations",
                       iterations=max_iter,
                       gradient_max=float(np.max(np.abs(problem.gradient(theta)))))


def _model_from_theta(problem: FitProblem, encoding: Encoding, schema: Schema,
                      theta: np.ndarray) -> CycleModel:
    w = theta[:problem.width]
    alpha = theta[problem.width:]
    return CycleModel(
        schema=schema,
        encoding=encoding,
        weights=tuple(float(v) for v in w),
        intercepts=tuple(float(v) for v in alpha),
        train_records=problem.n,
    )


def raw_space_params(model: CycleModel) -> tuple[tuple[float, ...], tuple[float, ...]]:
    """Re-express fitted weights/intercepts over unstandardized features.

    Useful for comparing against generator ground truth: standardization maps
    w_enc . (x - m)/s onto (w_enc/s) . x with the means folded into intercepts.
    """
    w_raw = []
    shift = 0.0
    for w, col in zip(model.weights, model.encoding.columns):
        if col.kind == "numeric":
            w_raw.append(w / col.std)
            shift += w * col.mean / col.std
        else:
            w_raw.append(w)
    a_raw = tuple(a - shift for a in model.intercepts)
    return tuple(w_raw), a_raw


# --- evaluation --------------------------------------------------------------------

def concordance_index(model: CycleModel, held_out) -> float:
    """Pairwise ranking score over comparable patient pairs.

    ``held_out`` items are (features, observed_cycles, success). A pair is
    comparable when one patient succeeded and the other is known not to have
    succeeded by that cycle. Ranking uses the model's first-cycle cumulative
    probability; score ties count one half.
    """
    scored = []
    for features, observed, success in held_out:
        if observed < 1:
            raise CycleOutOfRange(f"observed cycles {observed} must be >= 1", t=observed)
        c1 = predict_curve(model, features, 1).cumulative[0]
        scored.append((c1, int(observed), bool(success)))
    concordant = 0.0
    comparable = 0
    n = len(scored)
    for i in range(n):
        s_i, t_i, succ_i = scored[i]
        if not succ_i:
            continue
        for j in range(n):
            if j == i:
                continue
            s_j, t_j, succ_j = scored[j]
            if succ_j:
                if t_j <= t_i:
                    continue
            else:
                if t_j < t_i:
                    continue
            comparable += 1
            if s_i > s_j:
                concordant += 1.0
            elif s_i == s_j:
                concordant += 0.5
    if comparable == 0:
        raise NoComparablePairs("no comparable pairs in held-out data")
    return concordant / comparable


def narrate_curve(curve: CumulativeCurve, t: int, vmap: Optional[VerbalMap] = None,
                  templates=None) -> str:
    """Sentence for cumulative success by cycle t in percentage and frequency form."""
    from .narrate import TemplateSet  # local import to avoid a module cycle

    if not (1 <= t <= len(curve.cumulative)):
        raise CycleOutOfRange(f"cycle {t} outside 1..{len(curve.cumulative)}", t=t)
    if vmap is None:
        vmap = VerbalMap.default()
    if templates is None:
        templates = TemplateSet.default()
    value = curve.cumulative[t - 1]
    percent = format_probability(value, PERCENTAGE)
    frequency = format_probability(value, NATURAL_FREQUENCY, base=100)
    phrase = format_probability(value, VERBAL, vmap=vmap)
    if t == 1:
        return templates.render("curve_first", percent=percent, frequency=frequency,
                                phrase=phrase)
    return templates.render("curve_combined", cycles=t, percent=percent,
                            frequency=frequency, phrase=phrase)


# --- synthetic corpus ----------------------------------------------------------------

@dataclass(frozen=True)
class IvfTruth:
    column_labels: tuple[str, ...]
    weights: tuple[float, ...]      # raw space: one-hot + unstandardized numerics
    intercepts: tuple[float, ...]


@dataclass(frozen=True)
class IvfSynthesis:
    schema: Schema
    records: tuple[CycleRecord, ...]
    truth: IvfTruth
    # per-patient (features values, observed cycles, succeeded) for ranking tests
    patients: tuple[tuple[tuple, int, bool], ...]


_IVF_RAW_WEIGHTS = {
    "Age": -0.12,
    "Years of infertility": -0.05,
    "Number of eggs collected in first IVF cycle": 0.08,
    ("Type of embryo transfer", "Stage 2 embryos transferred on day 2 or 3"): 0.6,
    ("Type of embryo transfer", "Blastocyst transferred on day 5 or 6"): 1.0,
    ("Previous pregnancy", "Yes"): 0.5,
    ("Tubal infertility", "Yes"): -0.45,
    ("First cycle type", "ICSI"): 0.2,
    ("Embryos frozen in first cycle", "Yes"): 0.55,
}

_IVF_INTERCEPTS = (1.9, 1.8, 1.7, 1.6, 1.5, 1.4)


def synthesize_ivf_like(seed: int, n_records: int, n_cycles: int = 6,
                        censor_per_cycle: float = 0.12) -> IvfSynthesis:
    """Generate person-period records from a known model until n_records rows.

    Patients attempt consecutive cycles until first success, random censoring,
    or the cycle cap; every attempted cycle becomes one record. The generating
    weights live in raw feature space (see raw_space_params).
    """
    if n_records < 100:
        raise NTooSmall(f"need n_records >= 100, got {n_records}", n=n_records)
    schema = ivf_schema()
    cols = raw_columns(schema)
    weights = []
    labels = []
    for col in cols:
        key = col.feature if col.kind == "numeric" else (col.feature, col.level)
        weights.append(_IVF_RAW_WEIGHTS[key])
        labels.append(col.feature if col.kind == "numeric" else f"{col.feature}={col.level}")
    intercepts = _IVF_INTERCEPTS[:n_cycles]
    if len(intercepts) < n_cycles:
        intercepts = intercepts + tuple(
            intercepts[-1] - 0.1 * (i + 1) for i in range(n_cycles - len(intercepts))
        )
    rng = SplitMix64(seed)

    def draw_patient() -> tuple:
        age = round(min(45.0, max(22.0, rng.next_gauss(34.0, 4.5))), 1)
        years = float(rng.next_below(13))
        eggs = float(round(min(25.0, max(0.0, rng.next_gauss(9.0, 4.5)))))
        transfer = rng.choice_weighted(schema.feature("Type of embryo transfer").levels,
                                       (0.3, 0.4, 0.3))
        prev = rng.choice_weighted(("No", "Yes"), (0.6, 0.4))
        tubal = rng.choice_weighted(("No", "Yes"), (0.65, 0.35))
        kind = rng.choice_weighted(("IVF", "ICSI"), (0.6, 0.4))
        frozen = rng.choice_weighted(("No", "Yes"), (0.55, 0.45))
        return (age, years, eggs, transfer, prev, tubal, kind, frozen)

    def raw_dot(values: tuple) -> float:
        z = 0.0
        for w, col in zip(weights, cols):
            v = values[schema.index_of(col.feature)]
            if col.kind == "onehot":
                z += w * (1.0 if v == col.level else 0.0)
            else:
                z += w * v
        return z

    records: list[CycleRecord] = []
    patients: list[tuple[tuple, int, bool]] = []
    while len(records) < n_records:
        values = draw_patient()
        base = raw_dot(values)
        observed = 0
        succeeded = False
        for t in range(1, n_cycles + 1):
            p = logistic(intercepts[t - 1] + base)
            outcome = rng.next_double() < p
            records.append(CycleRecord(values=values, cycle_index=t, outcome=outcome))
            observed = t
            if outcome:
                succeeded = True
                break
            if rng.next_double() < censor_per_cycle:
                break
        patients.append((values, observed, succeeded))

    return IvfSynthesis(
        schema=schema,
        records=tuple(records),
        truth=IvfTruth(column_labels=tuple(labels), weights=tuple(weights),
                       intercepts=tuple(intercepts)),
        patients=tuple(patients),
    )


# --- serialization and CSV -------------------------------------------------------------

CYCLES_FORMAT = "riskweave-cycles"
CYCLES_VERSION = 1


def model_to_json(model: CycleModel) -> dict:
    return {
        "format": CYCLES_FORMAT,
        "version": CYCLES_VERSION,
        "schema": model.schema.to_json(),
        "columns": [
            {"feature": c.feature, "kind": c.kind, "level": c.level,
             "mean": c.mean, "std": c.std}
            for c in model.encoding.columns
        ],
        "weights": list(model.weights),
        "intercepts": list(model.intercepts),
        "train_records": model.train_records,
    }


def model_from_json(obj: dict) -> CycleModel:
    if not isinstance(obj, dict) or obj.get("format") != CYCLES_FORMAT:
        raise BadModelFile("not a cycle model document")
    if obj.get("version") != CYCLES_VERSION:
        raise BadModelFile(f"unsupported cycle model version {obj.get('version')!r}")
    try:
        schema = Schema.from_json(obj["schema"])
        cols = tuple(
            EncodedColumn(feature=c["feature"], kind=c["kind"], level=c.get("level", ""),
                          mean=c.get("mean", 0.0), std=c.get("std", 1.0))
            for c in obj["columns"]
        )
        return CycleModel(
            schema=schema,
            encoding=Encoding(schema=schema, columns=cols),
            weights=tuple(float(w) for w in obj["weights"]),
            intercepts=tuple(float(a) for a in obj["intercepts"]),
            train_records=int(obj["train_records"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise BadModelFile(f"malformed cycle model document: {exc}") from exc


def save_model(model: CycleModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_json(model), fh, indent=2)
        fh.write("\n")


def load_model(path) -> CycleModel:
    with open(path, "r", encoding="utf-8") as fh:
        return model_from_json(json.load(fh))


def curve_to_csv(curve: CumulativeCurve) -> str:
    lines = ["cycle,conditional_p,cumulative_p"]
    for t, (p, c) in enumerate(zip(curve.conditional, curve.cumulative), start=1):
        lines.append(f"{t},{p!r},{c!r}")
    return "\n".join(lines) + "\n"


CYCLE_COLUMN = "cycle"
OUTCOME_COLUMN = "outcome"


def records_to_csv(schema: Schema, records) -> str:
    header = ",".join(list(schema.feature_names) + [CYCLE_COLUMN, OUTCOME_COLUMN])
    lines = [header]
    for r in records:
        cells = [repr(v) if isinstance(v, float) else str(v) for v in r.values]
        cells.append(str(r.cycle_index))
        cells.append("1" if r.outcome else "0")
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def records_from_csv(text: str, schema: Schema) -> tuple[CycleRecord, ...]:
    lines = _split_lines(text)
    if not lines:
        raise NoData("no header line")
    header = [h.strip() for h in lines[0].split(",")]
    expected = list(schema.feature_names) + [CYCLE_COLUMN, OUTCOME_COLUMN]
    if sorted(header) != sorted(expected):
        raise SchemaMismatch(
            f"header {header} does not match features + cycle + outcome",
        )
    if len(lines) == 1:
        raise NoData("header only, no data rows")
    col_of = {name: i for i, name in enumerate(header)}
    records = []
    for rownum, line in enumerate(lines[1:], start=1):
        cells = line.split(",")
        if len(cells) != len(header):
            raise ValueOutOfDomain(
                f"row {rownum}: expected {len(header)} values, got {len(cells)}",
                row=rownum, column=None,
            )
        values = tuple(
            schema.coerce_value(spec, cells[col_of[spec.name]].strip(), row=rownum)
            for spec in schema.features
        )
        try:
            cycle = int(cells[col_of[CYCLE_COLUMN]].strip())
        except ValueError as exc:
            raise ValueOutOfDomain(f"row {rownum}: bad cycle index",
                                   row=rownum, column=CYCLE_COLUMN) from exc
        raw_outcome = cells[col_of[OUTCOME_COLUMN]].strip().lower()
        if raw_outcome in ("1", "true", "yes"):
            outcome = True
        elif raw_outcome in ("0", "false", "no"):
            outcome = False
        else:
            raise ValueOutOfDomain(f"row {rownum}: bad outcome {raw_outcome!r}",
                                   row=rownum, column=OUTCOME_COLUMN)
        records.append(CycleRecord(values=values, cycle_index=cycle, outcome=outcome))
    return tuple(records)
