"""Command-line front door.

Exit codes: 0 success, 1 domain error (code printed to stderr), 2 usage error
(argparse). Results go to stdout, JSON with --json, human text otherwise; all
output is deterministic for fixed files and seeds. The RISKWEAVE_CONFIG env
var may point at a JSON file of defaults for --verbal-map, --templates,
--lexicon and --storage-root.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Optional

from . import cart, cycles, metrics, narrate, reporting, tabular
from .errors import RiskweaveError, WrongModelKind
from .store import KIND_CYCLES, KIND_TREE, load_envelope, make_envelope, save_envelope
from .verbal import VerbalMap

CONFIG_ENV = "RISKWEAVE_CONFIG"
_CONFIG_KEYS = ("verbal_map", "templates", "lexicon", "storage_root")


def _load_config_defaults() -> dict:
    path = os.environ.get(CONFIG_ENV)
    if not path:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    return {k: obj[k] for k in _CONFIG_KEYS if k in obj}


def _read(path) -> str:
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


def _write(path, text: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _emit(args, payload: dict, human: str) -> None:
    if getattr(args, "json", False):
        print(json.dumps(payload, indent=2))
    else:
        print(human)


def _vmap(args) -> VerbalMap:
    path = getattr(args, "verbal_map", None)
    return VerbalMap.load(path) if path else VerbalMap.default()


def _templates(args) -> narrate.TemplateSet:
    path = getattr(args, "templates", None)
    return narrate.TemplateSet.load(path) if path else narrate.TemplateSet.default()


def _load_kind(path, kind: str):
    env = load_envelope(path)
    if env.kind != kind:
        raise WrongModelKind(f"{path} holds a {env.kind} model, need {kind}",
                             kind=env.kind)
    return env


def _load_dataset(args) -> tabular.Dataset:
    text = _read(args.data)
    if getattr(args, "schema", None):
        schema = tabular.schema_from_text(_read(args.schema))
    else:
        schema = tabular.infer_schema(text)
    return tabular.parse_csv(text, schema)


def _instance(args) -> dict:
    return json.loads(_read(args.input))


# --- subcommands -----------------------------------------------------------------

def _cmd_synth(args) -> int:
    if args.domain == "chd":
        synthesis = tabular.synthesize_chd_like(args.seed, args.n, noise=args.noise)
        _write(args.out, tabular.serialize_csv(synthesis.dataset))
        payload = {
            "rows": synthesis.dataset.n,
            "features": len(synthesis.dataset.schema.features),
            "planted_rule": synthesis.rules.describe(),
            "out": args.out,
        }
        human = (f"wrote {synthesis.dataset.n} rows x "
                 f"{len(synthesis.dataset.schema.features)} features to {args.out}\n"
                 f"planted rule: {synthesis.rules.describe()}")
        if args.schema_out:
            _write(args.schema_out, tabular.schema_to_text(synthesis.dataset.schema))
            payload["schema_out"] = args.schema_out
            human += f"\nschema written to {args.schema_out}"
    else:
        synthesis = cycles.synthesize_ivf_like(args.seed, args.n)
        _write(args.out, cycles.records_to_csv(synthesis.schema, synthesis.records))
        payload = {
            "records": len(synthesis.records),
            "patients": len(synthesis.patients),
            "out": args.out,
        }
        human = (f"wrote {len(synthesis.records)} cycle records "
                 f"({len(synthesis.patients)} patients) to {args.out}")
        if args.schema_out:
            _write(args.schema_out, tabular.schema_to_text(synthesis.schema))
            payload["schema_out"] = args.schema_out
            human += f"\nschema written to {args.schema_out}"
    _emit(args, payload, human)
    return 0


def _cmd_train(args) -> int:
    dataset = _load_dataset(args)
    params = cart.TrainParams(
        max_depth=args.max_depth,
        min_samples_leaf=args.min_samples_leaf,
        min_impurity_decrease=args.min_impurity_decrease,
    )
    train_set, test_set = tabular.split(dataset, args.test_fraction, args.seed)
    tree = cart.train(train_set, params)
    confusion = metrics.evaluate(tree, test_set)
    acc = metrics.accuracy(confusion)
    env = make_envelope(KIND_TREE, tree, acc, tree.train_size)
    save_envelope(env, args.out)
    payload = {
        "accuracy": acc,
        "confusion_matrix": reporting.confusion_payload(confusion),
        "train_rows": train_set.n,
        "test_rows": test_set.n,
        "out": args.out,
    }
    human = (f"trained on {train_set.n} rows, evaluated on {test_set.n}\n"
             f"accuracy {acc:.4f}\n"
             f"model written to {args.out}")
    _emit(args, payload, human)
    return 0


def _cmd_evaluate(args) -> int:
    env = _load_kind(args.model, KIND_TREE)
    dataset = tabular.parse_csv(_read(args.data), env.schema)
    confusion = metrics.evaluate(env.artifact, dataset)
    payload = reporting.confusion_payload(confusion)
    lines = [
        f"tp {confusion.tp}  fp {confusion.fp}  tn {confusion.tn}  fn {confusion.fn}",
        f"accuracy {payload['accuracy']:.4f}",
    ]
    if payload["recall"] is not None:
        lines.append(f"recall {payload['recall']:.4f}")
        lines.append(f"false negative rate {payload['false_negative_rate']:.4f}")
    if payload["false_omission_rate"] is not None:
        lines.append(f"false omission rate {payload['false_omission_rate']:.4f}")
    _emit(args, payload, "\n".join(lines))
    return 0


def _cmd_predict(args) -> int:
    env = _load_kind(args.model, KIND_TREE)
    payload = reporting.predict_payload(env.artifact, _instance(args),
                                        env.accuracy or 1.0, vmap=_vmap(args))
    counts = ", ".join(f"{k}={v}" for k, v in payload["counts"].items())
    human = (f"prediction: {payload['label']}\n"
             f"certainty phrase: {payload['certainty_phrase']}\n"
             f"confidence p: {payload['confidence_p']:.6g}\n"
             f"leaf samples: {payload['samples']}\n"
             f"leaf counts: {counts}")
    _emit(args, payload, human)
    return 0


def _cmd_explain(args) -> int:
    env = _load_kind(args.model, KIND_TREE)
    payload = reporting.explain_payload(env.artifact, _instance(args),
                                        env.accuracy or 1.0,
                                        vmap=_vmap(args), templates=_templates(args))
    _emit(args, payload, payload["text"])
    return 0


def _cmd_whatif(args) -> int:
    env = _load_kind(args.model, KIND_TREE)
    immutable = None
    if args.mutable_all:
        immutable = ()
    payload = reporting.whatif_payload(env.artifact, _instance(args), args.target,
                                       immutable_features=immutable)
    if not payload["possible"]:
        human = "no route to the target label without changing protected features"
    elif not payload["changes"]:
        human = "no change needed; the prediction already matches the target label"
    else:
        lines = [
            f"change {c['feature']}: {c['from']} -> {c['to']}" for c in payload["changes"]
        ]
        lines.append(f"new label: {payload['new_label']}")
        human = "\n".join(lines)
    _emit(args, payload, human)
    return 0


def _cmd_coverage(args) -> int:
    env = load_envelope(args.model)
    asserted = [a.strip() for a in args.attributes.split(",") if a.strip()]
    lexicon = narrate.load_lexicon(args.lexicon) if args.lexicon else None
    payload = reporting.coverage_payload(env.schema, asserted, lexicon=lexicon,
                                         templates=_templates(args))
    human = (f"modeled: {', '.join(payload['modeled']) or '(none)'}\n"
             f"unmodeled: {', '.join(payload['unmodeled']) or '(none)'}\n"
             f"{payload['caveat_text']}")
    _emit(args, payload, human)
    return 0


def _cmd_cycles_fit(args) -> int:
    schema = (tabular.schema_from_text(_read(args.schema))
              if args.schema else cycles.ivf_schema())
    records = cycles.records_from_csv(_read(args.data), schema)
    model = cycles.fit(records, schema, n_cycles=args.cycles, reg=args.reg,
                       tol=args.tol, max_iter=args.max_iter)
    env = make_envelope(KIND_CYCLES, model, None, model.train_records)
    save_envelope(env, args.out)
    payload = {"train_records": model.train_records, "max_cycles": model.n_cycles,
               "out": args.out}
    _emit(args, payload,
          f"fitted cycle model on {model.train_records} records "
          f"(up to {model.n_cycles} cycles)\nmodel written to {args.out}")
    return 0


def _cmd_cycles_predict(args) -> int:
    env = _load_kind(args.model, KIND_CYCLES)
    payload = reporting.curve_payload(env.artifact, _instance(args),
                                      n_cycles=args.cycles,
                                      vmap=_vmap(args), templates=_templates(args))
    curve = cycles.CumulativeCurve(
        conditional=tuple(payload["conditional"]),
        cumulative=tuple(payload["cumulative"]),
    )
    if args.csv_out:
        _write(args.csv_out, cycles.curve_to_csv(curve))
    rows = [
        f"cycle {t}: this cycle {p:.4f}, cumulative {c:.4f}"
        for t, p, c in zip(payload["cycles"], payload["conditional"], payload["cumulative"])
    ]
    human = "\n".join(rows) + "\n" + payload["text"]
    if args.csv_out:
        human += f"\ncurve written to {args.csv_out}"
    _emit(args, payload, human)
    return 0


def _cmd_reliability(args) -> int:
    env = _load_kind(args.model, KIND_TREE)
    dataset = tabular.parse_csv(_read(args.data), env.schema)
    scored = metrics.score_predictions(env.artifact, dataset)
    diagram = metrics.reliability(scored, args.bins)
    csv_text = diagram.to_csv()
    if args.out:
        _write(args.out, csv_text)
    payload = {
        "bins": [
            {"lo": b.lo, "hi": b.hi, "mean_confidence": b.mean_confidence,
             "observed_accuracy": b.observed_accuracy, "count": b.count}
            for b in diagram.bins
        ],
    }
    human = csv_text.rstrip("\n") + (f"\nwritten to {args.out}" if args.out else "")
    _emit(args, payload, human)
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import ServiceConfig, create_app

    config = ServiceConfig(
        storage_root=Path(args.storage_root),
        verbal_map_path=Path(args.verbal_map) if args.verbal_map else None,
        templates_path=Path(args.templates) if args.templates else None,
        lexicon_path=Path(args.lexicon) if args.lexicon else None,
        ui_dir=Path(args.ui_dir) if args.ui_dir else None,
        demo=args.demo,
    )
    app = create_app(config)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


# --- parser ------------------------------------------------------------------------

def build_parser(defaults: Optional[dict] = None) -> argparse.ArgumentParser:
    defaults = defaults or {}
    parser = argparse.ArgumentParser(
        prog="riskweave",
        description="Train and explain interpretable risk models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_json(p):
        p.add_argument("--json", action="store_true", help="emit JSON instead of text")

    def add_verbal(p):
        p.add_argument("--verbal-map", dest="verbal_map",
                       default=defaults.get("verbal_map"),
                       help="path to a verbal-map JSON config")
        p.add_argument("--templates", default=defaults.get("templates"),
                       help="path to a narrative templates JSON config")

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--n", type=int, required=True,
                   help="rows (chd) or cycle records (ivf)")
    p.add_argument("--out", required=True)
    p.add_argument("--noise", type=float, default=0.05, help="label noise rate (chd)")
    p.add_argument("--domain", choices=["chd", "ivf"], default="chd")
    p.add_argument("--schema-out", dest="schema_out", default=None,
                   help="also write the schema text file here")
    add_json(p)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("train", help="train a risk tree from CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--schema", default=None, help="schema text file (else inferred)")
    p.add_argument("--out", required=True)
    p.add_argument("--max-depth", type=int, default=4)
    p.add_argument("--min-samples-leaf", type=int, default=10)
    p.add_argument("--min-impurity-decrease", type=float, default=1e-2)
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=7, help="split seed")
    add_json(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("evaluate", help="confusion matrix and error-type metrics")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    add_json(p)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("predict", help="predict one patient record")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True, help="patient JSON file")
    add_verbal(p)
    add_json(p)
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("explain", help="narrative explanation for one record")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    add_verbal(p)
    add_json(p)
    p.set_defaults(func=_cmd_explain)

    p = sub.add_parser("whatif", help="smallest change reaching a target label")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--mutable-all", action="store_true",
                   help="allow changing age-like features too")
    add_json(p)
    p.set_defaults(func=_cmd_whatif)

    p = sub.add_parser("coverage", help="which asserted attributes the model covers")
    p.add_argument("--model", required=True)
    p.add_argument("--attributes", required=True, help="comma-separated attribute list")
    p.add_argument("--lexicon", default=defaults.get("lexicon"))
    add_verbal(p)
    add_json(p)
    p.set_defaults(func=_cmd_coverage)

    p = sub.add_parser("cycles-fit", help="fit a multi-cycle outcome model")
    p.add_argument("--data", required=True, help="person-period CSV")
    p.add_argument("--schema", default=None, help="schema text file (else the builtin)")
    p.add_argument("--out", required=True)
    p.add_argument("--cycles", type=int, default=6)
    p.add_argument("--reg", type=float, default=1e-4)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--max-iter", type=int, default=10000)
    add_json(p)
    p.set_defaults(func=_cmd_cycles_fit)

    p = sub.add_parser("cycles-predict", help="cumulative success curve for one patient")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--cycles", type=int, default=None)
    p.add_argument("--csv-out", dest="csv_out", default=None)
    add_verbal(p)
    add_json(p)
    p.set_defaults(func=_cmd_cycles_predict)

    p = sub.add_parser("reliability", help="calibration diagram data as CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--bins", type=int, default=10)
    p.add_argument("--out", default=None)
    add_json(p)
    p.set_defaults(func=_cmd_reliability)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--storage-root", dest="storage_root",
                   default=defaults.get("storage_root", "./riskweave-store"))
    p.add_argument("--verbal-map", dest="verbal_map", default=defaults.get("verbal_map"))
    p.add_argument("--templates", default=defaults.get("templates"))
    p.add_argument("--lexicon", default=defaults.get("lexicon"))
    p.add_argument("--ui-dir", dest="ui_dir", default=None,
                   help="serve a built web UI from this directory at /ui")
    p.add_argument("--demo", action="store_true",
                   help="seed demo heart-risk and fertility models on startup")
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    try:
        defaults = _load_config_defaults()
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: BadConfig: {exc}", file=sys.stderr)
        return 1
    parser = build_parser(defaults)
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except RiskweaveError as exc:
        print(f"error: {exc.code}: {exc.detail or exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: FileNotFound: {exc}", file=sys.stderr)
        return 1
    except json.JSONDecodeError as exc:
        print(f"error: BadJson: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
