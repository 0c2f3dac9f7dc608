"""HTTP/JSON service over a persistent model registry.

Research-tool posture: no authentication, bind to loopback by default. Error
bodies are always {"error": code, "detail": text, "context": {...}} with the
code taken from the domain error class. Models are immutable snapshots; the
registry serializes writers and lets readers work off an atomically swapped
dict, and the feedback log is append-only JSON lines.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import cart, cycles, metrics, narrate, reporting, tabular
from .errors import RiskweaveError, UnknownModel, WrongModelKind
from .store import (
    KIND_CYCLES,
    KIND_TREE,
    ModelEnvelope,
    load_envelope,
    make_envelope,
    now_iso,
    save_envelope,
)
from .verbal import VerbalMap

_STATUS_BY_CODE = {
    "UnknownModel": 404,
    "UnknownLabel": 422,
    "CycleOutOfRange": 422,
    "NotConverged": 422,
}


@dataclass
class ServiceConfig:
    storage_root: Path
    verbal_map_path: Optional[Path] = None
    templates_path: Optional[Path] = None
    lexicon_path: Optional[Path] = None
    ui_dir: Optional[Path] = None
    demo: bool = False


class ModelRegistry:
    """Disk-backed registry. One writer lock; readers see atomic snapshots."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.models_dir = self.root / "models"
        self.models_dir.mkdir(parents=True, exist_ok=True)
        self.feedback_path = self.root / "feedback.jsonl"
        self._write_lock = threading.Lock()
        self._feedback_lock = threading.Lock()
        self._entries: dict[str, ModelEnvelope] = {}
        self._load_all()

    def _load_all(self) -> None:
        entries = {}
        for path in sorted(self.models_dir.glob("*.json")):
            env = load_envelope(path)
            entries[env.model_id] = env
        self._entries = entries

    def ids(self) -> list[str]:
        return sorted(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, model_id: str) -> ModelEnvelope:
        env = self._entries.get(model_id)
        if env is None:
            raise UnknownModel(f"no model with id {model_id!r}", model_id=model_id)
        return env

    def has(self, model_id: str) -> bool:
        return model_id in self._entries

    def add(self, kind: str, artifact, accuracy, train_size,
            model_id: Optional[str] = None) -> ModelEnvelope:
        with self._write_lock:
            env = make_envelope(kind, artifact, accuracy, train_size, model_id=model_id)
            save_envelope(env, self.models_dir / f"{env.model_id}.json")
            entries = dict(self._entries)
            entries[env.model_id] = env
            self._entries = entries
            return env

    def append_feedback(self, entry: dict) -> None:
        line = json.dumps(entry, ensure_ascii=False)
        with self._feedback_lock:
            with open(self.feedback_path, "a", encoding="utf-8") as fh:
                fh.write(line + "\n")


# --- request bodies -------------------------------------------------------------

class TrainTreeRequest(BaseModel):
    csv: str
    schema_doc: Optional[dict] = Field(None, alias="schema")
    params: dict = Field(default_factory=dict)
    test_fraction: float = 0.2
    split_seed: int = 0

    model_config = {"populate_by_name": True}


class InstanceRequest(BaseModel):
    instance: dict


class WhatIfRequest(BaseModel):
    instance: dict
    target_label: str
    immutable_features: Optional[list[str]] = None


class CoverageRequest(BaseModel):
    asserted: list[str]


class TrainCyclesRequest(BaseModel):
    records_csv: str
    schema_doc: Optional[dict] = Field(None, alias="schema")
    n_cycles: int = 6
    reg: float = 1e-4
    tol: float = 1e-4
    max_iter: int = 10000

    model_config = {"populate_by_name": True}


class CyclePredictRequest(BaseModel):
    instance: dict
    n_cycles: Optional[int] = None


class FeedbackRequest(BaseModel):
    model_id: str
    comment: str = ""
    understandability: Optional[int] = Field(None, ge=1, le=5)
    comprehension: dict[str, Any] = Field(default_factory=dict)
    demographics: dict[str, Any] = Field(default_factory=dict)


def _require_kind(env: ModelEnvelope, kind: str) -> None:
    if env.kind != kind:
        raise WrongModelKind(
            f"model {env.model_id} is a {env.kind} model, endpoint needs {kind}",
            model_id=env.model_id, kind=env.kind,
        )


def create_app(config: ServiceConfig) -> FastAPI:
    app = FastAPI(title="riskweave", version="0.1.0", docs_url="/docs")
    # research tool bound to loopback; the browser UI may run off a dev server
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"],
    )

    registry = ModelRegistry(Path(config.storage_root))
    vmap = (VerbalMap.load(config.verbal_map_path)
            if config.verbal_map_path else VerbalMap.default())
    templates = (narrate.TemplateSet.load(config.templates_path)
                 if config.templates_path else narrate.TemplateSet.default())
    lexicon = narrate.load_lexicon(config.lexicon_path)
    app.state.registry = registry

    @app.exception_handler(RiskweaveError)
    def _domain_error(_request, exc: RiskweaveError):
        status = _STATUS_BY_CODE.get(exc.code, 400)
        return JSONResponse(status_code=status, content=exc.to_payload())

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "models": len(registry)}

    @app.get("/models")
    def list_models() -> dict:
        out = []
        for model_id in registry.ids():
            env = registry.get(model_id)
            out.append({
                "model_id": env.model_id,
                "kind": env.kind,
                "created_at": env.created_at,
                "accuracy": env.accuracy,
                "train_size": env.train_size,
            })
        return {"models": out}

    @app.get("/models/{model_id}")
    def model_info(model_id: str) -> dict:
        env = registry.get(model_id)
        info = {
            "model_id": env.model_id,
            "kind": env.kind,
            "created_at": env.created_at,
            "accuracy": env.accuracy,
            "train_size": env.train_size,
            "schema": env.schema.to_json(),
        }
        if env.kind == KIND_CYCLES:
            info["max_cycles"] = env.artifact.n_cycles
        return info

    @app.post("/models", status_code=201)
    def train_tree(body: TrainTreeRequest) -> dict:
        if body.schema_doc is not None:
            schema = tabular.Schema.from_json(body.schema_doc)
            dataset = tabular.parse_csv(body.csv, schema)
        else:
            schema = tabular.infer_schema(body.csv)
            dataset = tabular.parse_csv(body.csv, schema)
        params = cart.TrainParams(**body.params) if body.params else cart.TrainParams()
        train_set, test_set = tabular.split(dataset, body.test_fraction, body.split_seed)
        tree = cart.train(train_set, params)
        confusion = metrics.evaluate(tree, test_set)
        acc = metrics.accuracy(confusion)
        env = registry.add(KIND_TREE, tree, acc, tree.train_size)
        return {
            "model_id": env.model_id,
            "accuracy": acc,
            "confusion_matrix": confusion.to_json(),
        }

    @app.post("/models/{model_id}/predict")
    def predict(model_id: str, body: InstanceRequest) -> dict:
        env = registry.get(model_id)
        _require_kind(env, KIND_TREE)
        payload = reporting.predict_payload(env.artifact, body.instance,
                                            env.accuracy or 1.0, vmap=vmap)
        return {"model_id": env.model_id, **payload}

    @app.post("/models/{model_id}/explain")
    def explain(model_id: str, body: InstanceRequest) -> dict:
        env = registry.get(model_id)
        _require_kind(env, KIND_TREE)
        payload = reporting.explain_payload(env.artifact, body.instance,
                                            env.accuracy or 1.0,
                                            vmap=vmap, templates=templates)
        return {"model_id": env.model_id, **payload}

    @app.post("/models/{model_id}/whatif")
    def whatif(model_id: str, body: WhatIfRequest) -> dict:
        env = registry.get(model_id)
        _require_kind(env, KIND_TREE)
        payload = reporting.whatif_payload(env.artifact, body.instance, body.target_label,
                                           immutable_features=body.immutable_features)
        return {"model_id": env.model_id, **payload}

    @app.post("/models/{model_id}/coverage")
    def coverage(model_id: str, body: CoverageRequest) -> dict:
        env = registry.get(model_id)
        payload = reporting.coverage_payload(env.schema, body.asserted,
                                             lexicon=lexicon, templates=templates)
        return {"model_id": env.model_id, **payload}

    @app.post("/cycles", status_code=201)
    def train_cycles(body: TrainCyclesRequest) -> dict:
        schema = (tabular.Schema.from_json(body.schema_doc)
                  if body.schema_doc else cycles.ivf_schema())
        records = cycles.records_from_csv(body.records_csv, schema)
        model = cycles.fit(records, schema, n_cycles=body.n_cycles, reg=body.reg,
                           tol=body.tol, max_iter=body.max_iter)
        env = registry.add(KIND_CYCLES, model, None, model.train_records)
        return {"model_id": env.model_id, "train_records": model.train_records,
                "max_cycles": model.n_cycles}

    @app.post("/cycles/{model_id}/predict")
    def cycles_predict(model_id: str, body: CyclePredictRequest) -> dict:
        env = registry.get(model_id)
        _require_kind(env, KIND_CYCLES)
        payload = reporting.curve_payload(env.artifact, body.instance,
                                          n_cycles=body.n_cycles,
                                          vmap=vmap, templates=templates)
        return {"model_id": env.model_id, **payload}

    @app.post("/feedback", status_code=201)
    def feedback(body: FeedbackRequest) -> dict:
        if not registry.has(body.model_id):
            raise UnknownModel(f"no model with id {body.model_id!r}",
                               model_id=body.model_id)
        entry = {
            "timestamp": now_iso(),
            "model_id": body.model_id,
            "comment": body.comment,
            "understandability": body.understandability,
            "comprehension": body.comprehension,
            "demographics": body.demographics,
        }
        registry.append_feedback(entry)
        return {"status": "recorded"}

    if config.demo:
        _seed_demo_models(registry)

    if config.ui_dir is not None and Path(config.ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=str(config.ui_dir), html=True), name="ui")

    return app


def _seed_demo_models(registry: ModelRegistry) -> None:
    """Train one heart-risk tree and one fertility cycle model at startup."""
    if not registry.has("demo-chd"):
        synthesis = tabular.synthesize_chd_like(seed=1, n=2279)
        train_set, test_set = tabular.split(synthesis.dataset, 0.2, seed=7)
        tree = cart.train(train_set, cart.TrainParams(max_depth=4))
        acc = metrics.accuracy(metrics.evaluate(tree, test_set))
        registry.add(KIND_TREE, tree, acc, tree.train_size, model_id="demo-chd")
    if not registry.has("demo-ivf"):
        synthesis = cycles.synthesize_ivf_like(seed=2, n_records=8000)
        model = cycles.fit(synthesis.records, synthesis.schema, n_cycles=6, tol=1e-4)
        registry.add(KIND_CYCLES, model, None, model.train_records, model_id="demo-ivf")
