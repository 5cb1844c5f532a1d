"""Flat content-addressed persistence for models, inputs, and rendered images.

Ids are hex digests of the stored content, so uploads are idempotent, entries
survive restarts (every listing re-scans the directory), and cached values
can never go stale. Writes go through a temp path + atomic rename; concurrent
writers of the same content simply race to create the same entry.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
import threading
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import NotFoundError
from .format import parse_model
from .model import Model, extract_layers
from .tensor import Tensor

__all__ = ["Store"]

_HASH_CHARS = 32


def _digest(*parts: bytes) -> str:
    h = hashlib.sha256()
    for part in parts:
        h.update(len(part).to_bytes(8, "little"))
        h.update(part)
    return h.hexdigest()[:_HASH_CHARS]


def _canonical_json(doc) -> bytes:
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _atomic_write(path: Path, data: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class Store:
    """Registry rooted at a data directory; safe for many readers, serialized writers."""

    def __init__(self, data_dir: str | Path):
        self.root = Path(data_dir)
        (self.root / "models").mkdir(parents=True, exist_ok=True)
        (self.root / "renders").mkdir(parents=True, exist_ok=True)
        self._model_cache: dict[str, Model] = {}
        self._lock = threading.Lock()

    # -- models ---------------------------------------------------------

    def put_model(self, manifest: bytes, weights_blob: bytes) -> dict:
        """Validate and persist; returns the entry. Identical bytes yield the same id."""
        model = parse_model(manifest, weights_blob)
        canonical = _canonical_json(json.loads(manifest.decode("utf-8")))
        model_id = _digest(canonical, weights_blob)
        model_dir = self.root / "models" / model_id
        with self._lock:
            if not model_dir.exists():
                staging = Path(tempfile.mkdtemp(dir=self.root / "models", prefix=".tmp-"))
                try:
                    (staging / "model.json").write_bytes(manifest)
                    (staging / "weights.bin").write_bytes(weights_blob)
                    meta = {"id": model_id, "name": model.name, "created_at": _now()}
                    (staging / "meta.json").write_bytes(_canonical_json(meta))
                    (staging / "inputs").mkdir()
                    os.rename(staging, model_dir)
                except OSError:
                    if model_dir.exists():
                        pass  # concurrent identical upload won the race
                    else:
                        raise
            self._model_cache[model_id] = model
        return self.model_entry(model_id)

    def get_model(self, model_id: str) -> Model:
        with self._lock:
            cached = self._model_cache.get(model_id)
        if cached is not None:
            return cached
        model_dir = self.root / "models" / model_id
        if not model_dir.is_dir():
            raise NotFoundError(f"unknown model id {model_id!r}")
        model = parse_model((model_dir / "model.json").read_bytes(), (model_dir / "weights.bin").read_bytes())
        with self._lock:
            self._model_cache[model_id] = model
        return model

    def model_entry(self, model_id: str) -> dict:
        model_dir = self.root / "models" / model_id
        if not model_dir.is_dir():
            raise NotFoundError(f"unknown model id {model_id!r}")
        meta = json.loads((model_dir / "meta.json").read_text())
        model = self.get_model(model_id)
        layers = [
            {
                "index": info.index,
                "kind": info.kind,
                "output_shape": list(info.output_shape),
                "filter_count": info.filter_count,
            }
            for info in extract_layers(model)
        ]
        return {
            "id": meta["id"],
            "name": meta["name"],
            "input_shape": list(model.input_shape),
            "layers": layers,
            "created_at": meta["created_at"],
        }

    def list_models(self) -> list[dict]:
        entries = []
        for child in sorted((self.root / "models").iterdir()):
            if child.name.startswith(".") or not child.is_dir():
                continue
            entries.append(self.model_entry(child.name))
        entries.sort(key=lambda e: (e["created_at"], e["id"]))
        return entries

    # -- inputs ---------------------------------------------------------

    def put_input(
        self,
        model_id: str,
        tensor: Tensor,
        source: str,
        parent_input_id: str | None = None,
        attack_spec: dict | None = None,
        render_ids: list[str] | None = None,
    ) -> dict:
        inputs_dir = self._inputs_dir(model_id)
        meta = {
            "source": source,
            "shape": list(tensor.shape),
        }
        if parent_input_id is not None:
            meta["parent_input_id"] = parent_input_id
        if attack_spec is not None:
            meta["attack_spec"] = attack_spec
        raw = tensor.tobytes()
        input_id = _digest(model_id.encode(), raw, _canonical_json(meta))
        meta["id"] = input_id
        if render_ids is not None:
            meta["render_ids"] = render_ids
        entry_dir = inputs_dir / input_id
        with self._lock:
            if not entry_dir.exists():
                staging = Path(tempfile.mkdtemp(dir=inputs_dir, prefix=".tmp-"))
                try:
                    (staging / "tensor.bin").write_bytes(raw)
                    (staging / "meta.json").write_bytes(_canonical_json(meta))
                    os.rename(staging, entry_dir)
                except OSError:
                    if not entry_dir.exists():
                        raise
        return self.input_entry(model_id, input_id)

    def get_input(self, model_id: str, input_id: str) -> Tensor:
        entry_dir = self._inputs_dir(model_id) / input_id
        if not entry_dir.is_dir():
            raise NotFoundError(f"unknown input id {input_id!r}")
        meta = json.loads((entry_dir / "meta.json").read_text())
        raw = (entry_dir / "tensor.bin").read_bytes()
        flat = np.frombuffer(raw, dtype="<f4")
        return Tensor(flat.reshape(tuple(meta["shape"])))

    def input_entry(self, model_id: str, input_id: str) -> dict:
        entry_dir = self._inputs_dir(model_id) / input_id
        if not entry_dir.is_dir():
            raise NotFoundError(f"unknown input id {input_id!r}")
        meta = json.loads((entry_dir / "meta.json").read_text())
        entry = {
            "id": meta["id"],
            "source": meta["source"],
            "shape": meta["shape"],
            "parent_input_id": meta.get("parent_input_id"),
            "attack_spec": meta.get("attack_spec"),
        }
        if "render_ids" in meta:
            entry["render_ids"] = meta["render_ids"]
        return entry

    def list_inputs(self, model_id: str) -> list[dict]:
        inputs_dir = self._inputs_dir(model_id)
        entries = []
        for child in sorted(inputs_dir.iterdir()):
            if child.name.startswith(".") or not child.is_dir():
                continue
            entries.append(self.input_entry(model_id, child.name))
        return entries

    def _inputs_dir(self, model_id: str) -> Path:
        model_dir = self.root / "models" / model_id
        if not model_dir.is_dir():
            raise NotFoundError(f"unknown model id {model_id!r}")
        inputs_dir = model_dir / "inputs"
        inputs_dir.mkdir(exist_ok=True)
        return inputs_dir

    # -- renders --------------------------------------------------------

    def put_render(self, png: bytes) -> str:
        render_id = _digest(png)
        path = self.root / "renders" / f"{render_id}.png"
        if not path.exists():
            _atomic_write(path, png)
        return render_id

    def get_render(self, render_id: str) -> bytes:
        path = self.root / "renders" / f"{render_id}.png"
        if not path.is_file() or "/" in render_id or "\\" in render_id or ".." in render_id:
            raise NotFoundError(f"unknown render id {render_id!r}")
        return path.read_bytes()
