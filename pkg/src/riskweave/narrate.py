"""Narrative rendering of predictions: path explanations, global rule
summaries, what-if suggestions, and coverage caveats for unmodeled attributes.

All wording lives in a template file with named slots so study iterations can
re-phrase without touching code. Templates are audited to stay associational
("is based on", "does not take into account"), never causal.
"""

from __future__ import annotations

import json
import math
import re
import string
from dataclasses import dataclass
from importlib import resources
from typing import Optional

from .cart import (
    EQUALS,
    GREATER_OR_EQUAL,
    LESS_THAN,
    NOT_EQUALS,
    DecisionTree,
    Leaf,
    Prediction,
    _predict_values,
)
from .errors import (
    InvalidTemplate,
    MissingTemplate,
    SchemaMismatch,
    UnknownLabel,
)
from .tabular import NUMERIC, Schema
from .verbal import VerbalMap, verbalize

_INF = math.inf


# --- templates -----------------------------------------------------------------

TEMPLATES_FORMAT = "riskweave-templates"
TEMPLATES_VERSION = 1

ALLOWED_SLOTS = {
    "outcome": {"label", "certainty"},
    "reasons": {"conditions"},
    "support": {"samples"},
    "cond_equals": {"feature", "value"},
    "cond_not_in": {"feature", "values"},
    "cond_below": {"feature", "value", "unit"},
    "cond_at_least": {"feature", "value", "unit"},
    "cond_between": {"feature", "lo", "hi", "unit"},
    "scope": {"features"},
    "rule_line": {"index", "conditions", "label", "certainty", "samples"},
    "rule_line_unconditional": {"index", "label", "certainty", "samples"},
    "caveat_none": {"features"},
    "caveat_modeled": {"attributes"},
    "caveat_unmodeled": {"attributes", "features"},
    "curve_first": {"percent", "frequency", "phrase"},
    "curve_combined": {"cycles", "percent", "frequency", "phrase"},
}


class TemplateSet:
    """Named text templates with {slot} placeholders, validated on load."""

    def __init__(self, templates: dict[str, str]):
        formatter = string.Formatter()
        for name, text in templates.items():
            if name not in ALLOWED_SLOTS:
                raise InvalidTemplate(f"unknown template name {name!r}", template=name)
            slots = {fname for _, fname, _, _ in formatter.parse(text) if fname}
            unknown = slots - ALLOWED_SLOTS[name]
            if unknown:
                raise InvalidTemplate(
                    f"template {name!r} uses unknown slots {sorted(unknown)}",
                    template=name, slots=sorted(unknown),
                )
        missing = set(ALLOWED_SLOTS) - set(templates)
        if missing:
            raise InvalidTemplate(f"missing templates: {sorted(missing)}")
        self._templates = dict(templates)

    def render(self, name: str, **slots) -> str:
        if name not in self._templates:
            raise MissingTemplate(f"no template named {name!r}", template=name)
        return self._templates[name].format(**slots)

    @classmethod
    def from_json(cls, obj) -> "TemplateSet":
        if not isinstance(obj, dict) or obj.get("format") != TEMPLATES_FORMAT:
            raise InvalidTemplate("not a templates document")
        if obj.get("version") != TEMPLATES_VERSION:
            raise InvalidTemplate(f"unsupported templates version {obj.get('version')!r}")
        return cls(obj.get("templates", {}))

    @classmethod
    def load(cls, path) -> "TemplateSet":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))

    @classmethod
    def default(cls) -> "TemplateSet":
        text = resources.files("riskweave.data").joinpath("templates.json").read_text("utf-8")
        return cls.from_json(json.loads(text))


def _fmt_num(v: float) -> str:
    return f"{v:g}"


def _join_and(parts: list[str]) -> str:
    if len(parts) <= 1:
        return parts[0] if parts else ""
    if len(parts) == 2:
        return f"{parts[0]} and {parts[1]}"
    return ", ".join(parts[:-1]) + f", and {parts[-1]}"


# --- merged path conditions ------------------------------------------------------

EQUALS_KIND = "equals"
NOT_IN_KIND = "not_in"
INTERVAL_KIND = "interval"


@dataclass(frozen=True)
class Condition:
    """One per-feature condition merged from a decision path.

    Numeric conditions are half-open intervals [lo, hi); categorical ones
    either pin a level or exclude a set of levels (in path order).
    """

    feature: str
    kind: str
    levels: tuple[str, ...] = ()
    lo: float = -_INF
    hi: float = _INF

    def holds(self, value) -> bool:
        if self.kind == EQUALS_KIND:
            return value == self.levels[0]
        if self.kind == NOT_IN_KIND:
            return value not in self.levels
        return self.lo <= value < self.hi


class _FeatureConstraint:
    """Accumulates every predicate a path imposes on one feature."""

    __slots__ = ("required", "excluded", "lo", "hi", "numeric", "impossible")

    def __init__(self):
        self.required: Optional[str] = None
        self.excluded: list[str] = []
        self.lo = -_INF
        self.hi = _INF
        self.numeric = False
        self.impossible = False

    def add(self, op: str, value) -> None:
        if op == EQUALS:
            if self.required is not None and self.required != value:
                # hand-built trees can demand two different levels at once
                self.impossible = True
            self.required = value
        elif op == NOT_EQUALS:
            if value not in self.excluded:
                self.excluded.append(value)
        elif op == LESS_THAN:
            self.numeric = True
            self.hi = min(self.hi, value)
        elif op == GREATER_OR_EQUAL:
            self.numeric = True
            self.lo = max(self.lo, value)
        else:
            raise ValueError(f"unknown predicate op {op!r}")

    def to_condition(self, feature: str) -> Condition:
        if self.numeric:
            return Condition(feature, INTERVAL_KIND, lo=self.lo, hi=self.hi)
        if self.required is not None:
            return Condition(feature, EQUALS_KIND, levels=(self.required,))
        return Condition(feature, NOT_IN_KIND, levels=tuple(self.excluded))

    def satisfiable(self, spec) -> bool:
        if self.impossible:
            return False
        if self.numeric:
            return self.lo < self.hi
        if self.required is not None:
            return self.required not in self.excluded
        return any(level not in self.excluded for level in spec.levels)

    def satisfied_by(self, value) -> bool:
        if self.numeric:
            return self.lo <= value < self.hi
        if self.required is not None:
            return value == self.required
        return value not in self.excluded

    def replacement(self, spec, step: float):
        """A concrete satisfying value: interval midpoint when bounded, the
        boundary nudged by the smallest observed value gap when unbounded."""
        if self.numeric:
            if self.lo > -_INF and self.hi < _INF:
                mid = self.lo + (self.hi - self.lo) / 2.0
                return mid if self.lo <= mid < self.hi else self.lo
            if self.hi < _INF:
                return self.hi - step
            if self.lo > -_INF:
                return self.lo + step
            return 0.0
        if self.required is not None:
            return self.required
        for level in spec.levels:
            if level not in self.excluded:
                return level
        return None


def _constraints_from_path(path) -> tuple[list[str], dict[str, _FeatureConstraint]]:
    order: list[str] = []
    state: dict[str, _FeatureConstraint] = {}
    for predicate, taken in path:
        eff = predicate if taken else predicate.negated()
        con = state.get(eff.feature)
        if con is None:
            con = _FeatureConstraint()
            state[eff.feature] = con
            order.append(eff.feature)
        con.add(eff.op, eff.value)
    return order, state


def decision_path_conditions(prediction: Prediction) -> tuple[Condition, ...]:
    """Group a prediction's path by feature and merge it into readable conditions.

    Repeated exclusions of one categorical feature collapse into a single
    "not in {...}" condition; numeric bounds intersect into one interval.
    Output order is first occurrence along the path.
    """
    order, state = _constraints_from_path(prediction.path)
    return tuple(state[f].to_condition(f) for f in order)


def render_condition(cond: Condition, templates: Optional[TemplateSet] = None,
                     schema: Optional[Schema] = None) -> str:
    """One short clause per condition, e.g. "Age is not 65-75 or 75-90"."""
    if templates is None:
        templates = TemplateSet.default()
    unit = ""
    if schema is not None:
        try:
            spec = schema.feature(cond.feature)
            if spec.kind == NUMERIC and spec.unit:
                unit = f" {spec.unit}"
        except KeyError:
            pass
    if cond.kind == EQUALS_KIND:
        return templates.render("cond_equals", feature=cond.feature, value=cond.levels[0])
    if cond.kind == NOT_IN_KIND:
        return templates.render(
            "cond_not_in", feature=cond.feature, values=" or ".join(cond.levels)
        )
    if cond.lo > -_INF and cond.hi < _INF:
        return templates.render(
            "cond_between", feature=cond.feature,
            lo=_fmt_num(cond.lo), hi=_fmt_num(cond.hi), unit=unit,
        )
    if cond.hi < _INF:
        return templates.render("cond_below", feature=cond.feature,
                                value=_fmt_num(cond.hi), unit=unit)
    return templates.render("cond_at_least", feature=cond.feature,
                            value=_fmt_num(cond.lo), unit=unit)


# --- narratives ------------------------------------------------------------------

@dataclass(frozen=True)
class Explanation:
    conditions: tuple[Condition, ...]
    condition_texts: tuple[str, ...]
    label: str
    certainty_phrase: str
    text: str
    samples: int
    confidence_p: float


def narrate_prediction(prediction: Prediction, accuracy: float,
                       vmap: Optional[VerbalMap] = None,
                       templates: Optional[TemplateSet] = None,
                       schema: Optional[Schema] = None) -> Explanation:
    """Fixed three-part narrative: outcome + certainty, reasons, support count."""
    if vmap is None:
        vmap = VerbalMap.default()
    if templates is None:
        templates = TemplateSet.default()
    phrase = verbalize(vmap, accuracy, prediction.confidence_p)
    conditions = decision_path_conditions(prediction)
    condition_texts = tuple(render_condition(c, templates, schema) for c in conditions)
    sentences = [templates.render("outcome", label=prediction.label, certainty=phrase)]
    if condition_texts:
        sentences.append(templates.render("reasons", conditions=_join_and(list(condition_texts))))
    sentences.append(templates.render("support", samples=prediction.samples))
    return Explanation(
        conditions=conditions,
        condition_texts=condition_texts,
        label=prediction.label,
        certainty_phrase=phrase,
        text=" ".join(sentences),
        samples=prediction.samples,
        confidence_p=prediction.confidence_p,
    )


@dataclass(frozen=True)
class Rule:
    conditions: tuple[Condition, ...]
    condition_texts: tuple[str, ...]
    label: str
    samples: int
    confidence_p: float


@dataclass(frozen=True)
class GlobalSummary:
    rules: tuple[Rule, ...]
    text: str


def _leaf_paths(tree: DecisionTree):
    """Yield (leaf, path) depth-first, true branch first."""
    out = []

    def walk(node, path):
        if isinstance(node, Leaf):
            out.append((node, tuple(path)))
            return
        path.append((node.predicate, True))
        walk(node.if_true, path)
        path.pop()
        path.append((node.predicate, False))
        walk(node.if_false, path)
        path.pop()

    walk(tree.root, [])
    return out


def global_summary(tree: DecisionTree, accuracy: float = 1.0,
                   vmap: Optional[VerbalMap] = None,
                   templates: Optional[TemplateSet] = None) -> GlobalSummary:
    """One rule per leaf (depth-first, true branch first), largest leaves first.

    Pass the model's evaluated accuracy so rule certainty phrases are honest;
    it defaults to the top band when no evaluation is available.
    """
    if vmap is None:
        vmap = VerbalMap.default()
    if templates is None:
        templates = TemplateSet.default()
    rules = []
    for leaf, path in _leaf_paths(tree):
        order, state = _constraints_from_path(path)
        conditions = tuple(state[f].to_condition(f) for f in order)
        rules.append(Rule(
            conditions=conditions,
            condition_texts=tuple(render_condition(c, templates, tree.schema)
                                  for c in conditions),
            label=leaf.label,
            samples=leaf.samples,
            confidence_p=leaf.confidence_p,
        ))
    rules.sort(key=lambda r: -r.samples)

    used = tree.used_features()
    scope_features = _join_and(list(used)) if used else "no patient attributes"
    lines = [templates.render("scope", features=scope_features)]
    for i, rule in enumerate(rules, start=1):
        phrase = verbalize(vmap, accuracy, rule.confidence_p)
        if rule.condition_texts:
            lines.append(templates.render(
                "rule_line", index=i, conditions=_join_and(list(rule.condition_texts)),
                label=rule.label, certainty=phrase, samples=rule.samples,
            ))
        else:
            lines.append(templates.render(
                "rule_line_unconditional", index=i,
                label=rule.label, certainty=phrase, samples=rule.samples,
            ))
    return GlobalSummary(rules=tuple(rules), text="\n".join(lines))


# --- what-if ---------------------------------------------------------------------

@dataclass(frozen=True)
class Change:
    feature: str
    old: object
    new: object


@dataclass(frozen=True)
class Counterfactual:
    changes: tuple[Change, ...]
    new_label: str
    new_confidence_p: float


def default_immutable_features(schema: Schema) -> frozenset:
    """Features a patient cannot act on; v1 flags age-like features by name."""
    out = set()
    for f in schema.features:
        tokens = re.split(r"[^a-z0-9]+", f.name.lower())
        if "age" in tokens:
            out.add(f.name)
    return frozenset(out)


def what_if(tree: DecisionTree, instance, target_label: str,
            immutable_features=None) -> Optional[Counterfactual]:
    """Smallest set of feature changes that moves the prediction to target_label.

    Scans every leaf with the target label, counts the features whose values
    violate that leaf's root-path constraints, and picks the leaf with the
    fewest required changes (ties: highest leaf samples, then lowest
    confidence p, then depth-first order). Returns None when no target leaf is
    reachable without touching an immutable feature. ``immutable_features``
    defaults to the age-like features of the schema.
    """
    schema = tree.schema
    if target_label not in schema.classes:
        raise UnknownLabel(f"{target_label!r} is not a class of this model",
                           label=target_label, classes=list(schema.classes))
    try:
        values = schema.coerce_instance(instance)
    except Exception as exc:
        raise SchemaMismatch(f"instance does not conform to schema: {exc}") from exc
    if immutable_features is None:
        immutable = default_immutable_features(schema)
    else:
        immutable = frozenset(immutable_features)

    current = _predict_values(tree, values)
    if current.label == target_label:
        return Counterfactual(changes=(), new_label=current.label,
                              new_confidence_p=current.confidence_p)

    best_key = None
    best_pick = None
    for dfs_index, (leaf, path) in enumerate(_leaf_paths(tree)):
        if leaf.label != target_label:
            continue
        order, state = _constraints_from_path(path)
        if not all(state[f].satisfiable(schema.feature(f)) for f in order):
            continue
        violated = [
            f for f in schema.feature_names
            if f in state and not state[f].satisfied_by(values[schema.index_of(f)])
        ]
        if any(f in immutable for f in violated):
            continue
        key = (len(violated), -leaf.samples, leaf.confidence_p, dfs_index)
        if best_key is None or key < best_key:
            best_key = key
            best_pick = (leaf, state, violated)
    if best_pick is None:
        return None

    leaf, state, violated = best_pick
    changes = []
    for f in violated:
        spec = schema.feature(f)
        step = tree.numeric_steps.get(f, 1.0) if spec.kind == NUMERIC else 0.0
        changes.append(Change(
            feature=f,
            old=values[schema.index_of(f)],
            new=state[f].replacement(spec, step),
        ))
    return Counterfactual(changes=tuple(changes), new_label=leaf.label,
                          new_confidence_p=leaf.confidence_p)


# --- coverage ----------------------------------------------------------------------

@dataclass(frozen=True)
class CoverageReport:
    modeled: tuple[str, ...]
    unmodeled: tuple[str, ...]
    caveat_text: str


def _normalize(text: str) -> str:
    return " ".join(text.lower().split())


def load_lexicon(path=None) -> dict[str, str]:
    """Alias table mapping lay phrasings to canonical feature names."""
    if path is None:
        raw = resources.files("riskweave.data").joinpath("lexicon.json").read_text("utf-8")
        obj = json.loads(raw)
    else:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    aliases = obj.get("aliases", {}) if isinstance(obj, dict) else {}
    return {_normalize(k): v for k, v in aliases.items()}


def coverage_report(schema: Schema, asserted, lexicon: Optional[dict] = None,
                    templates: Optional[TemplateSet] = None) -> CoverageReport:
    """Partition patient-asserted attributes into modeled vs unmodeled.

    Matching is case-insensitive and alias-normalized. The caveat names every
    unmodeled attribute and says the model does not take it into account; it
    never claims the attribute is irrelevant.
    """
    if templates is None:
        templates = TemplateSet.default()
    if lexicon is None:
        lexicon = load_lexicon()
    by_norm = {_normalize(f.name): f.name for f in schema.features}

    modeled: list[str] = []
    unmodeled: list[str] = []
    seen = set()
    for raw in asserted:
        norm = _normalize(str(raw))
        if not norm or norm in seen:
            continue
        seen.add(norm)
        canonical = by_norm.get(norm)
        if canonical is None:
            alias_target = lexicon.get(norm)
            if alias_target is not None:
                canonical = by_norm.get(_normalize(alias_target))
        if canonical is not None:
            if canonical not in modeled:
                modeled.append(canonical)
        else:
            unmodeled.append(str(raw).strip())

    feature_list = _join_and([f.name for f in schema.features])
    parts = []
    if modeled:
        parts.append(templates.render("caveat_modeled", attributes=_join_and(modeled)))
    if unmodeled:
        parts.append(templates.render(
            "caveat_unmodeled", attributes=_join_and(unmodeled), features=feature_list,
        ))
    if not parts:
        parts.append(templates.render("caveat_none", features=feature_list))
    return CoverageReport(
        modeled=tuple(modeled),
        unmodeled=tuple(unmodeled),
        caveat_text=" ".join(parts),
    )
