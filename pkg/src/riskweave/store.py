"""Versioned model envelopes and crash-safe file persistence.

Both the CLI and the HTTP service write the same envelope documents, so a
model trained at the command line can be dropped into a service storage root
and vice versa. Writes go to a temp file in the same directory and are moved
into place with os.replace, so readers never observe a partial artifact.
"""

from __future__ import annotations

import json
import os
import uuid
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Union

from . import cart, cycles
from .errors import BadModelFile

ENVELOPE_FORMAT = "riskweave-model-envelope"
ENVELOPE_VERSION = 1

KIND_TREE = "tree"
KIND_CYCLES = "cycles"


@dataclass(frozen=True)
class ModelEnvelope:
    model_id: str
    kind: str
    created_at: str
    accuracy: Optional[float]
    train_size: int
    artifact: Union[cart.DecisionTree, cycles.CycleModel]

    @property
    def schema(self):
        return self.artifact.schema


def new_model_id() -> str:
    return uuid.uuid4().hex[:12]


def now_iso() -> str:
    return datetime.now(timezone.utc).isoformat()


def make_envelope(kind: str, artifact, accuracy: Optional[float], train_size: int,
                  model_id: Optional[str] = None) -> ModelEnvelope:
    return ModelEnvelope(
        model_id=model_id or new_model_id(),
        kind=kind,
        created_at=now_iso(),
        accuracy=accuracy,
        train_size=train_size,
        artifact=artifact,
    )


def envelope_to_json(env: ModelEnvelope) -> dict:
    if env.kind == KIND_TREE:
        artifact = cart.tree_to_json(env.artifact)
    elif env.kind == KIND_CYCLES:
        artifact = cycles.model_to_json(env.artifact)
    else:
        raise BadModelFile(f"unknown model kind {env.kind!r}")
    return {
        "format": ENVELOPE_FORMAT,
        "version": ENVELOPE_VERSION,
        "model_id": env.model_id,
        "kind": env.kind,
        "created_at": env.created_at,
        "accuracy": env.accuracy,
        "train_size": env.train_size,
        "artifact": artifact,
    }


def envelope_from_json(obj: dict) -> ModelEnvelope:
    if not isinstance(obj, dict) or obj.get("format") != ENVELOPE_FORMAT:
        raise BadModelFile("not a model envelope document")
    if obj.get("version") != ENVELOPE_VERSION:
        raise BadModelFile(f"unsupported envelope version {obj.get('version')!r}")
    kind = obj.get("kind")
    if kind == KIND_TREE:
        artifact = cart.tree_from_json(obj["artifact"])
    elif kind == KIND_CYCLES:
        artifact = cycles.model_from_json(obj["artifact"])
    else:
        raise BadModelFile(f"unknown model kind {kind!r}")
    try:
        return ModelEnvelope(
            model_id=obj["model_id"],
            kind=kind,
            created_at=obj["created_at"],
            accuracy=obj["accuracy"],
            train_size=obj["train_size"],
            artifact=artifact,
        )
    except KeyError as exc:
        raise BadModelFile(f"malformed envelope: missing {exc}") from exc


def save_envelope(env: ModelEnvelope, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.parent / f".{path.name}.{uuid.uuid4().hex}.tmp"
    data = json.dumps(envelope_to_json(env), indent=2) + "\n"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(data)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def load_envelope(path) -> ModelEnvelope:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise BadModelFile(f"{path}: not valid JSON: {exc}") from exc
    return envelope_from_json(obj)
