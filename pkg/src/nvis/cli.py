"""Headless command-line access to every capability.

Compute commands print one JSON document to stdout and are byte-identical
across repeated runs. Failures print {"error": {"kind", "detail"}} and exit
nonzero: 2 for usage problems, 3 for parse/validation errors, 4 for anything
unexpected at runtime.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .attacks import Algorithm, AttackSpec, run_attack
from .diff import compare_at_layer
from .engine import FreezeConfig, mutate_output, predict
from .errors import NvisError, ParseError
from .format import MANIFEST_NAME, WEIGHTS_NAME, parse_model
from .gradients import saliency as compute_saliency
from .inputs import load_input_file
from .model import Model, extract_layers, validate
from .tensor import Tensor
from . import render as render_mod

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_RUNTIME = 4

_VALIDATION_KINDS = {
    "parse",
    "integrity",
    "validation",
    "invalid-shape",
    "invalid-input",
    "invalid-config",
    "range",
    "unsupported-configuration",
    "unsupported-model",
    "incomparable-traces",
    "not-found",
}


def _emit(doc) -> None:
    sys.stdout.write(json.dumps(doc, indent=2) + "\n")


def load_model_dir(path: str | Path) -> Model:
    model_dir = Path(path)
    manifest = model_dir / MANIFEST_NAME
    weights = model_dir / WEIGHTS_NAME
    if not manifest.is_file() or not weights.is_file():
        raise FileNotFoundError(f"{model_dir} does not contain {MANIFEST_NAME} and {WEIGHTS_NAME}")
    return parse_model(manifest.read_bytes(), weights.read_bytes())


def _load_freeze(path: str | None) -> FreezeConfig:
    if path is None:
        return FreezeConfig.empty()
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: not valid JSON: {exc}") from None
    return FreezeConfig.from_doc(doc)


def _cmd_validate(args) -> int:
    model_dir = Path(args.model_dir)
    manifest = model_dir / MANIFEST_NAME
    weights = model_dir / WEIGHTS_NAME
    if not manifest.is_file() or not weights.is_file():
        raise FileNotFoundError(f"{model_dir} does not contain {MANIFEST_NAME} and {WEIGHTS_NAME}")
    try:
        model = parse_model(manifest.read_bytes(), weights.read_bytes())
    except NvisError as exc:
        doc = {"ok": False, "error": {"kind": exc.kind, "detail": exc.detail}}
        violations = getattr(exc, "violations", None)
        if violations:
            doc["violations"] = [
                {"layer": v.layer, "message": v.message} for v in violations
            ]
        _emit(doc)
        return EXIT_VALIDATION
    violations = validate(model)
    if violations:
        _emit({"ok": False, "violations": [{"layer": v.layer, "message": v.message} for v in violations]})
        return EXIT_VALIDATION
    _emit({"ok": True, "name": model.name, "layers": len(model.layers)})
    return EXIT_OK


def _cmd_predict(args) -> int:
    model = load_model_dir(args.model_dir)
    tensor = load_input_file(args.input, model.input_shape)
    label, probs = predict(model, tensor)
    _emit({"predicted_class": label, "probs": probs.tolist()})
    return EXIT_OK


def _cmd_trace(args) -> int:
    model = load_model_dir(args.model_dir)
    tensor = load_input_file(args.input, model.input_shape)
    freeze = _load_freeze(args.freeze)
    trace = mutate_output(model, tensor, freeze)
    layers = []
    out_dir = Path(args.out) if args.out else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    for info, t in zip(extract_layers(model), trace.per_layer):
        layer_doc = {
            "index": info.index,
            "kind": info.kind,
            "output_shape": list(info.output_shape),
            "filter_count": info.filter_count,
            "frozen_filters": list(freeze.filters_for(info.index)),
        }
        if out_dir is not None:
            paths = []
            channels = t.shape[0] if t.rank == 3 else 1
            for c in range(channels):
                png = render_mod.to_png(render_mod.render_feature_map(t, c))
                name = f"layer{info.index:02d}_ch{c:03d}.png"
                (out_dir / name).write_bytes(png)
                paths.append(name)
            layer_doc["renders"] = paths
        layers.append(layer_doc)
    doc = {
        "freeze": freeze.to_doc(),
        "predicted_class": trace.predicted_class,
        "final_probs": trace.final_probs.tolist(),
        "layers": layers,
    }
    if out_dir is not None:
        (out_dir / "trace.json").write_text(json.dumps(doc, indent=2) + "\n")
    _emit(doc)
    return EXIT_OK


def _cmd_compare(args) -> int:
    model = load_model_dir(args.model_dir)
    tensor_a = load_input_file(args.input_a, model.input_shape)
    tensor_b = load_input_file(args.input_b, model.input_shape)
    freeze = _load_freeze(args.freeze)
    trace_a = mutate_output(model, tensor_a, freeze)
    trace_b = mutate_output(model, tensor_b, freeze)
    report = compare_at_layer(trace_a, trace_b, args.layer)
    _emit(report.to_doc())
    return EXIT_OK


def _cmd_attack(args) -> int:
    model = load_model_dir(args.model_dir)
    tensor = load_input_file(args.input, model.input_shape)
    spec = AttackSpec(
        algorithm=Algorithm(args.alg),
        epsilon=args.eps,
        true_label=args.label,
        steps=args.steps,
        step_size=args.step_size if args.step_size is not None else args.eps,
    )
    n_classes = extract_layers(model)[-1].output_shape[0]
    spec.validate(n_classes)
    before, _ = predict(model, tensor)
    adversarial = run_attack(model, tensor, spec)
    after, _ = predict(model, adversarial)
    _emit(
        {
            "spec": spec.to_doc(),
            "predicted_class_before": before,
            "predicted_class_after": after,
            "adversarial": {"shape": list(adversarial.shape), "values": adversarial.tolist()},
        }
    )
    return EXIT_OK


def _cmd_saliency(args) -> int:
    model = load_model_dir(args.model_dir)
    tensor = load_input_file(args.input, model.input_shape)
    result = compute_saliency(model, tensor, args.label)
    values = result.values
    if args.out:
        plane = Tensor(values.array[None, :, :], _unchecked=True) if values.rank == 2 else values
        Path(args.out).write_bytes(render_mod.to_png(render_mod.render_feature_map(plane, 0)))
    _emit({"label": args.label, "values": {"shape": list(values.shape), "values": values.tolist()}})
    return EXIT_OK


def _cmd_serve(args) -> int:
    import os

    import uvicorn

    from .service import create_app, resolve_addr

    data_dir = args.data_dir or os.environ.get("NVIS_DATA_DIR") or "nvis-data"
    ui_dir = args.ui_dir or os.environ.get("NVIS_UI_DIR")
    host, port = resolve_addr(args.addr)
    app = create_app(data_dir, ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=port, log_level="info")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nvis", description="CNN inspection workbench")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a model directory against every invariant")
    p.add_argument("model_dir")
    p.set_defaults(fn=_cmd_validate)

    p = sub.add_parser("predict", help="class scores for one input")
    p.add_argument("model_dir")
    p.add_argument("input")
    p.set_defaults(fn=_cmd_predict)

    p = sub.add_parser("trace", help="record every layer output, optionally with frozen filters")
    p.add_argument("model_dir")
    p.add_argument("input")
    p.add_argument("--freeze", help="freeze config JSON file")
    p.add_argument("--out", help="directory for per-layer PNGs and trace.json")
    p.set_defaults(fn=_cmd_trace)

    p = sub.add_parser("compare", help="diff two inputs' activations at one layer")
    p.add_argument("model_dir")
    p.add_argument("input_a")
    p.add_argument("input_b")
    p.add_argument("--layer", type=int, required=True)
    p.add_argument("--freeze", help="freeze config JSON file")
    p.set_defaults(fn=_cmd_compare)

    p = sub.add_parser("attack", help="generate an adversarial input")
    p.add_argument("model_dir")
    p.add_argument("input")
    p.add_argument("--alg", choices=[a.value for a in Algorithm], required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--steps", type=int, default=1)
    p.add_argument("--step-size", dest="step_size", type=float)
    p.add_argument("--label", type=int, required=True)
    p.set_defaults(fn=_cmd_attack)

    p = sub.add_parser("saliency", help="input-gradient saliency map for a label")
    p.add_argument("model_dir")
    p.add_argument("input")
    p.add_argument("--label", type=int, required=True)
    p.add_argument("--out", help="write the rendered map to this PNG path")
    p.set_defaults(fn=_cmd_saliency)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--addr", help="host:port (default NVIS_ADDR or 127.0.0.1:8095)")
    p.add_argument("--data-dir", dest="data_dir", help="registry directory (default NVIS_DATA_DIR or ./nvis-data)")
    p.add_argument("--ui-dir", dest="ui_dir", help="static web UI directory to mount at / (default NVIS_UI_DIR)")
    p.set_defaults(fn=_cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except FileNotFoundError as exc:
        _emit({"error": {"kind": "usage", "detail": str(exc)}})
        return EXIT_USAGE
    except NvisError as exc:
        _emit({"error": {"kind": exc.kind, "detail": exc.detail}})
        return EXIT_VALIDATION if exc.kind in _VALIDATION_KINDS else EXIT_RUNTIME
    except Exception as exc:  # pragma: no cover - defensive
        _emit({"error": {"kind": "runtime", "detail": f"{type(exc).__name__}: {exc}"}})
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
