"""Verbal certainty phrases and lay-audience probability framings.

Two distinct certainty channels meet here: model-level accuracy (one number
for the whole model) and the per-prediction confidence p-value. The verbal map
is a 2-D grid over bands of both; below the accuracy cutoff every phrase gets
a "possibly" hedge. The grid ships as editable JSON data, not code, so study
iterations can reword it without a release.
"""

from __future__ import annotations

import json
import math
from decimal import ROUND_HALF_UP, Decimal
from dataclasses import dataclass
from importlib import resources

from .errors import InvalidBase, InvalidMap

VERBAL_MAP_FORMAT = "riskweave-verbal-map"
VERBAL_MAP_VERSION = 1

PERCENTAGE = "percentage"
NATURAL_FREQUENCY = "natural_frequency"
VERBAL = "verbal"


@dataclass(frozen=True)
class VerbalMap:
    """Banded phrase grid: rows = accuracy bands (low to high), cols = p bands."""

    accuracy_edges: tuple[float, ...]
    confidence_edges: tuple[float, ...]
    phrases: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        for edges in (self.accuracy_edges, self.confidence_edges):
            if not edges:
                raise InvalidMap("band edges must be non-empty")
            if any(not (0.0 < e < 1.0) for e in edges):
                raise InvalidMap("band edges must lie strictly inside (0, 1)")
            if any(b <= a for a, b in zip(edges, edges[1:])):
                raise InvalidMap("band edges must be strictly increasing")
        n_rows = len(self.accuracy_edges) + 1
        n_cols = len(self.confidence_edges) + 1
        if len(self.phrases) != n_rows:
            raise InvalidMap(f"phrase grid needs {n_rows} rows, got {len(self.phrases)}")
        for row in self.phrases:
            if len(row) != n_cols:
                raise InvalidMap(f"phrase grid rows need {n_cols} phrases, got {len(row)}")
            if any(not isinstance(p, str) or not p for p in row):
                raise InvalidMap("every grid cell needs a non-empty phrase")

    def accuracy_band(self, accuracy: float) -> int:
        band = 0
        for e in self.accuracy_edges:
            if accuracy >= e:
                band += 1
        return band

    def confidence_band(self, p: float) -> int:
        for i, e in enumerate(self.confidence_edges):
            if p <= e:
                return i
        return len(self.confidence_edges)

    def to_json(self) -> dict:
        return {
            "format": VERBAL_MAP_FORMAT,
            "version": VERBAL_MAP_VERSION,
            "accuracy_edges": list(self.accuracy_edges),
            "confidence_edges": list(self.confidence_edges),
            "phrases": [list(row) for row in self.phrases],
        }

    @classmethod
    def from_json(cls, obj) -> "VerbalMap":
        if not isinstance(obj, dict) or obj.get("format") != VERBAL_MAP_FORMAT:
            raise InvalidMap("not a verbal-map document")
        if obj.get("version") != VERBAL_MAP_VERSION:
            raise InvalidMap(f"unsupported verbal-map version {obj.get('version')!r}")
        try:
            return cls(
                accuracy_edges=tuple(obj["accuracy_edges"]),
                confidence_edges=tuple(obj["confidence_edges"]),
                phrases=tuple(tuple(row) for row in obj["phrases"]),
            )
        except (KeyError, TypeError) as exc:
            raise InvalidMap(f"malformed verbal-map document: {exc}") from exc

    @classmethod
    def load(cls, path) -> "VerbalMap":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))

    @classmethod
    def default(cls) -> "VerbalMap":
        text = resources.files("riskweave.data").joinpath("verbal_map.json").read_text("utf-8")
        return cls.from_json(json.loads(text))


def verbalize(vmap: VerbalMap, accuracy: float, confidence_p: float) -> str:
    """Look up the certainty phrase for (model accuracy, prediction p-value)."""
    if not (0.0 <= accuracy <= 1.0) or not (0.0 <= confidence_p <= 1.0):
        raise InvalidMap(
            f"accuracy and confidence_p must lie in [0, 1], got ({accuracy}, {confidence_p})"
        )
    return vmap.phrases[vmap.accuracy_band(accuracy)][vmap.confidence_band(confidence_p)]


def _round_half_up(value: float, base: int) -> int:
    """Half-up rounding of value * base with decimal semantics.

    Works on the shortest decimal form of the float, so 0.285 of 100 gives 29
    rather than following the binary representation down to 28.
    """
    scaled = Decimal(repr(value)) * base
    return int(scaled.quantize(Decimal(1), rounding=ROUND_HALF_UP))


def format_probability(value: float, style: str = PERCENTAGE, base: int = 100,
                       vmap: VerbalMap | None = None) -> str:
    """Render a probability as a percentage, a natural frequency, or a phrase.

    The verbal style reduces the map to a single axis by fixing the accuracy
    band at the top row; the complement 1 - value (the chance the event does
    not happen) plays the role of the p-value, so high probabilities read as
    high-certainty phrases.
    """
    if not math.isfinite(value) or not (0.0 <= value <= 1.0):
        raise InvalidBase(f"probability must lie in [0, 1], got {value}")
    if style == PERCENTAGE:
        return f"{_round_half_up(value, 100)}%"
    if style == NATURAL_FREQUENCY:
        if base < 1:
            raise InvalidBase(f"frequency base must be >= 1, got {base}")
        return f"{_round_half_up(value, base)} in {base} people like you"
    if style == VERBAL:
        if vmap is None:
            vmap = VerbalMap.default()
        return vmap.phrases[-1][vmap.confidence_band(1.0 - value)]
    raise InvalidBase(f"unknown style {style!r}")
