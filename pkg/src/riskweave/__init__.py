"""riskweave: interpretable risk trees with calibrated verbal communication.

Library layout mirrors the pipeline: ``tabular`` (data in), ``cart`` (tree
learning + per-leaf confidence), ``metrics`` (model-level evaluation),
``verbal`` (phrases and framings), ``narrate`` (explanations, what-if,
coverage), ``cycles`` (multi-cycle outcome curves), ``service`` (HTTP API),
``cli`` (command line).
"""

__version__ = "0.1.0"

from . import cart, cycles, metrics, narrate, tabular, verbal  # noqa: F401
