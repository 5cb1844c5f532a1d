"""HTTP operation surface: model/input registries plus compute endpoints.

Request and response bodies are plain JSON documents. Freezing is
request-scoped: models are immutable once uploaded, and every trace/compare
call carries its own freeze configuration, so responses are deterministic
functions of (model id, input ids, request body). Errors always serialize as
{"error": {"kind", "detail"}}.
"""

from __future__ import annotations

import base64
import binascii
import json
import os
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from . import render as render_mod
from .attacks import AttackSpec, run_attack
from .diff import compare_at_layer
from .engine import FreezeConfig, mutate_output
from .errors import NotFoundError, NvisError, ParseError
from .gradients import saliency as compute_saliency
from .inputs import tensor_from_doc, tensor_from_image_bytes, tensor_from_pixels
from .model import Model, extract_layers
from .store import Store
from .tensor import Tensor

__all__ = ["create_app", "DEFAULT_ADDR"]

DEFAULT_ADDR = "127.0.0.1:8095"

_STATUS_BY_KIND = {
    "not-found": 404,
    "error": 500,
}


def _status_for(err: NvisError) -> int:
    return _STATUS_BY_KIND.get(err.kind, 400)


def _error_response(err: NvisError) -> JSONResponse:
    return JSONResponse(
        status_code=_status_for(err),
        content={"error": {"kind": err.kind, "detail": err.detail}},
    )


async def _json_body(request: Request) -> dict:
    try:
        doc = json.loads(await request.body())
    except json.JSONDecodeError as exc:
        raise ParseError(f"request body is not valid JSON: {exc}", "$") from None
    if not isinstance(doc, dict):
        raise ParseError("request body must be a JSON object", "$")
    return doc


def _render_tensor_channels(store: Store, tensor: Tensor) -> list[str]:
    channels = tensor.shape[0] if tensor.rank == 3 else 1
    ids = []
    for c in range(channels):
        png = render_mod.to_png(render_mod.render_feature_map(tensor, c))
        ids.append(store.put_render(png))
    return ids


def _freeze_from(doc: dict) -> FreezeConfig:
    freeze_doc = doc.get("freeze")
    if freeze_doc is None:
        return FreezeConfig.empty()
    return FreezeConfig.from_doc(freeze_doc)


def _trace_doc(store: Store, model: Model, model_id: str, input_id: str, trace) -> dict:
    layers = []
    for info, tensor in zip(extract_layers(model), trace.per_layer):
        layers.append(
            {
                "index": info.index,
                "kind": info.kind,
                "output_shape": list(info.output_shape),
                "filter_count": info.filter_count,
                "frozen_filters": list(trace.freeze.filters_for(info.index)),
                "render_ids": _render_tensor_channels(store, tensor),
            }
        )
    return {
        "model_id": model_id,
        "input_id": input_id,
        "freeze": trace.freeze.to_doc(),
        "predicted_class": trace.predicted_class,
        "final_probs": trace.final_probs.tolist(),
        "layers": layers,
    }


def create_app(data_dir: str | Path, ui_dir: str | Path | None = None) -> FastAPI:
    store = Store(data_dir)
    app = FastAPI(title="nvis", docs_url=None, redoc_url=None)

    @app.exception_handler(NvisError)
    async def _handle_nvis_error(_request, exc: NvisError):
        return _error_response(exc)

    @app.exception_handler(Exception)
    async def _handle_unexpected(_request, exc: Exception):
        return JSONResponse(status_code=500, content={"error": {"kind": "error", "detail": str(exc)}})

    @app.post("/models")
    async def upload_model(request: Request):
        doc = await _json_body(request)
        manifest = doc.get("manifest")
        if isinstance(manifest, dict):
            manifest_bytes = json.dumps(manifest).encode("utf-8")
        elif isinstance(manifest, str):
            manifest_bytes = manifest.encode("utf-8")
        else:
            raise ParseError("'manifest' must be the model.json object or its text", "$.manifest")
        weights_b64 = doc.get("weights_b64")
        if not isinstance(weights_b64, str):
            raise ParseError("'weights_b64' must be a base64 string", "$.weights_b64")
        try:
            blob = base64.b64decode(weights_b64, validate=True)
        except (binascii.Error, ValueError) as exc:
            raise ParseError(f"'weights_b64' is not valid base64: {exc}", "$.weights_b64") from None
        return store.put_model(manifest_bytes, blob)

    @app.get("/models")
    async def list_models():
        return {"models": store.list_models()}

    @app.get("/models/{model_id}")
    async def get_model(model_id: str):
        return store.model_entry(model_id)

    @app.post("/models/{model_id}/inputs")
    async def upload_input(model_id: str, request: Request):
        model = store.get_model(model_id)
        doc = await _json_body(request)
        if "image_b64" in doc:
            if not isinstance(doc["image_b64"], str):
                raise ParseError("'image_b64' must be a base64 string", "$.image_b64")
            try:
                raw = base64.b64decode(doc["image_b64"], validate=True)
            except (binascii.Error, ValueError) as exc:
                raise ParseError(f"'image_b64' is not valid base64: {exc}", "$.image_b64") from None
            tensor = tensor_from_image_bytes(raw, model.input_shape)
        elif "tensor" in doc:
            tensor = tensor_from_doc(doc["tensor"], model.input_shape)
        else:
            raise ParseError("provide 'image_b64' or 'tensor'", "$")
        render_ids = _render_tensor_channels(store, tensor)
        return store.put_input(model_id, tensor, source="upload", render_ids=render_ids)

    @app.get("/models/{model_id}/inputs")
    async def list_inputs(model_id: str):
        store.get_model(model_id)
        return {"inputs": store.list_inputs(model_id)}

    @app.get("/models/{model_id}/inputs/{input_id}")
    async def get_input(model_id: str, input_id: str):
        entry = store.input_entry(model_id, input_id)
        tensor = store.get_input(model_id, input_id)
        entry["pixels"] = {"shape": list(tensor.shape), "values": tensor.tolist()}
        return entry

    @app.post("/models/{model_id}/sketch")
    async def sketch_input(model_id: str, request: Request):
        model = store.get_model(model_id)
        doc = await _json_body(request)
        tensor = tensor_from_pixels(doc.get("pixels"), model.input_shape)
        render_ids = _render_tensor_channels(store, tensor)
        return store.put_input(model_id, tensor, source="sketch", render_ids=render_ids)

    @app.post("/models/{model_id}/trace")
    async def trace(model_id: str, request: Request):
        model = store.get_model(model_id)
        doc = await _json_body(request)
        input_id = doc.get("input_id")
        if not isinstance(input_id, str):
            raise ParseError("'input_id' must be a string", "$.input_id")
        tensor = store.get_input(model_id, input_id)
        freeze = _freeze_from(doc)
        result = mutate_output(model, tensor, freeze)
        return _trace_doc(store, model, model_id, input_id, result)

    @app.post("/models/{model_id}/compare")
    async def compare(model_id: str, request: Request):
        model = store.get_model(model_id)
        doc = await _json_body(request)
        for key in ("input_a", "input_b"):
            if not isinstance(doc.get(key), str):
                raise ParseError(f"'{key}' must be a string", f"$.{key}")
        layer_index = doc.get("layer_index")
        if isinstance(layer_index, bool) or not isinstance(layer_index, int):
            raise ParseError("'layer_index' must be an integer", "$.layer_index")
        freeze = _freeze_from(doc)
        tensor_a = store.get_input(model_id, doc["input_a"])
        tensor_b = store.get_input(model_id, doc["input_b"])
        trace_a = mutate_output(model, tensor_a, freeze)
        trace_b = mutate_output(model, tensor_b, freeze)
        report = compare_at_layer(trace_a, trace_b, layer_index)
        result = report.to_doc()
        ta = trace_a.per_layer[layer_index]
        tb = trace_b.per_layer[layer_index]
        renders_a = _render_tensor_channels(store, ta)
        renders_b = _render_tensor_channels(store, tb)
        renders_diff = _render_tensor_channels(store, report.heatmap)
        for channel_doc, ra, rb, rd in zip(result["per_channel"], renders_a, renders_b, renders_diff):
            channel_doc["render_a"] = ra
            channel_doc["render_b"] = rb
            channel_doc["render_diff"] = rd
        return result

    @app.post("/models/{model_id}/attack")
    async def attack(model_id: str, request: Request):
        model = store.get_model(model_id)
        doc = await _json_body(request)
        input_id = doc.get("input_id")
        if not isinstance(input_id, str):
            raise ParseError("'input_id' must be a string", "$.input_id")
        spec = AttackSpec.from_doc(doc.get("spec"))
        tensor = store.get_input(model_id, input_id)
        n_classes = extract_layers(model)[-1].output_shape[0]
        spec.validate(n_classes)
        adversarial = run_attack(model, tensor, spec)
        render_ids = _render_tensor_channels(store, adversarial)
        return store.put_input(
            model_id,
            adversarial,
            source="attack",
            parent_input_id=input_id,
            attack_spec=spec.to_doc(),
            render_ids=render_ids,
        )

    @app.post("/models/{model_id}/saliency")
    async def saliency(model_id: str, request: Request):
        model = store.get_model(model_id)
        doc = await _json_body(request)
        input_id = doc.get("input_id")
        if not isinstance(input_id, str):
            raise ParseError("'input_id' must be a string", "$.input_id")
        label = doc.get("label")
        if isinstance(label, bool) or not isinstance(label, int):
            raise ParseError("'label' must be an integer", "$.label")
        tensor = store.get_input(model_id, input_id)
        result = compute_saliency(model, tensor, label)
        values = result.values
        png = render_mod.to_png(render_mod.render_feature_map(
            Tensor(values.array[None, :, :], _unchecked=True) if values.rank == 2 else values, 0
        ))
        return {
            "label": label,
            "values": {"shape": list(values.shape), "values": values.tolist()},
            "render_id": store.put_render(png),
        }

    @app.get("/renders/{render_id}")
    async def get_render(render_id: str):
        return Response(content=store.get_render(render_id), media_type="image/png")

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app


def resolve_addr(addr: str | None) -> tuple[str, int]:
    value = addr or os.environ.get("NVIS_ADDR") or DEFAULT_ADDR
    host, _, port = value.rpartition(":")
    if not host or not port.isdigit():
        raise ParseError(f"address must look like host:port, got {value!r}")
    return host, int(port)
