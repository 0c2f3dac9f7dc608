"""JSON payload builders shared by the HTTP service and the CLI's --json mode.

Keeping these in one place guarantees the CLI emits exactly the service's
response shapes (minus the model_id wrapper the service adds).
"""

from __future__ import annotations

from typing import Optional

from . import cart, cycles, metrics, narrate
from .errors import UndefinedMetric
from .verbal import NATURAL_FREQUENCY, PERCENTAGE, VERBAL, VerbalMap, format_probability, verbalize


def predict_payload(tree: cart.DecisionTree, instance, accuracy: float,
                    vmap: Optional[VerbalMap] = None) -> dict:
    if vmap is None:
        vmap = VerbalMap.default()
    p = cart.predict(tree, instance)
    share = p.majority_fraction
    return {
        "label": p.label,
        "counts": {cls: c for cls, c in zip(p.classes, p.counts)},
        "samples": p.samples,
        "confidence_p": p.confidence_p,
        "certainty_phrase": verbalize(vmap, accuracy, p.confidence_p),
        # how many of the leaf's people had the predicted outcome, two framings
        "percent": format_probability(share, PERCENTAGE),
        "frequency": format_probability(share, NATURAL_FREQUENCY, base=100),
        "path": [
            {"feature": pred.feature, "op": pred.op, "value": pred.value, "branch": taken}
            for pred, taken in p.path
        ],
    }


def explain_payload(tree: cart.DecisionTree, instance, accuracy: float,
                    vmap: Optional[VerbalMap] = None,
                    templates: Optional[narrate.TemplateSet] = None) -> dict:
    p = cart.predict(tree, instance)
    explanation = narrate.narrate_prediction(p, accuracy, vmap=vmap,
                                             templates=templates, schema=tree.schema)
    share = p.majority_fraction
    return {
        "label": explanation.label,
        "text": explanation.text,
        "conditions": list(explanation.condition_texts),
        "certainty_phrase": explanation.certainty_phrase,
        "samples": explanation.samples,
        "confidence_p": explanation.confidence_p,
        "percent": format_probability(share, PERCENTAGE),
        "frequency": format_probability(share, NATURAL_FREQUENCY, base=100),
    }


def whatif_payload(tree: cart.DecisionTree, instance, target_label: str,
                   immutable_features=None) -> dict:
    cf = narrate.what_if(tree, instance, target_label,
                         immutable_features=immutable_features)
    if cf is None:
        return {"possible": False, "changes": None, "new_label": None,
                "new_confidence_p": None}
    return {
        "possible": True,
        "changes": [{"feature": c.feature, "from": c.old, "to": c.new}
                    for c in cf.changes],
        "new_label": cf.new_label,
        "new_confidence_p": cf.new_confidence_p,
    }


def coverage_payload(schema, asserted, lexicon=None,
                     templates: Optional[narrate.TemplateSet] = None) -> dict:
    report = narrate.coverage_report(schema, asserted, lexicon=lexicon,
                                     templates=templates)
    return {
        "modeled": list(report.modeled),
        "unmodeled": list(report.unmodeled),
        "caveat_text": report.caveat_text,
    }


def curve_payload(model: cycles.CycleModel, instance, n_cycles: Optional[int] = None,
                  vmap: Optional[VerbalMap] = None,
                  templates: Optional[narrate.TemplateSet] = None) -> dict:
    if vmap is None:
        vmap = VerbalMap.default()
    curve = cycles.predict_curve(model, instance, n_cycles)
    t = len(curve.cumulative)
    final = curve.cumulative[-1]
    return {
        "cycles": list(range(1, t + 1)),
        "conditional": list(curve.conditional),
        "cumulative": list(curve.cumulative),
        "text": cycles.narrate_curve(curve, t, vmap=vmap, templates=templates),
        "certainty_phrase": format_probability(final, VERBAL, vmap=vmap),
        "percent": format_probability(final, PERCENTAGE),
        "frequency": format_probability(final, NATURAL_FREQUENCY, base=100),
        "samples": model.train_records,
    }


def confusion_payload(m: metrics.ConfusionMatrix) -> dict:
    payload = m.to_json()
    payload["accuracy"] = metrics.accuracy(m)
    try:
        payload["recall"] = metrics.recall(m)
        payload["false_negative_rate"] = metrics.false_negative_rate(m)
    except UndefinedMetric:
        payload["recall"] = None
        payload["false_negative_rate"] = None
    try:
        payload["false_omission_rate"] = metrics.false_omission_rate(m)
    except UndefinedMetric:
        payload["false_omission_rate"] = None
    return payload
