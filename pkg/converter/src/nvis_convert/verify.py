"""Logit-parity verification between a Keras checkpoint and its NVIS conversion.

The converted model is exercised strictly from the outside, through the
``nvis`` command line (JSON on stdout), never by importing the engine. Keras
provides the reference probabilities. The report fails loudly when any logit
drifts beyond the bound or any label disagrees.
"""

from __future__ import annotations

import json
import subprocess
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

__all__ = ["VerificationError", "verify", "PARITY_BOUND"]

PARITY_BOUND = 1e-4


class VerificationError(Exception):
    pass


def _nvis_predict(nvis_cmd, model_dir: Path, image_path: Path) -> list[float]:
    proc = subprocess.run(
        [*nvis_cmd, "predict", str(model_dir), str(image_path)],
        capture_output=True,
        text=True,
    )
    if proc.returncode != 0:
        raise VerificationError(
            f"nvis predict failed on {image_path.name} (exit {proc.returncode}): {proc.stdout or proc.stderr}"
        )
    return json.loads(proc.stdout)["probs"]


def verify(
    checkpoint_path: str | Path,
    nvis_dir: str | Path,
    image_paths: list[Path],
    nvis_cmd: tuple[str, ...] = ("nvis",),
    bound: float = PARITY_BOUND,
) -> dict:
    """Compare per-logit outputs on every image; returns the parity report."""
    import keras
    from PIL import Image

    if not image_paths:
        raise VerificationError("no verification images supplied")

    model = keras.models.load_model(checkpoint_path, compile=False)
    _, h, w, c = model.input_shape

    batch = np.zeros((len(image_paths), h, w, c), dtype=np.float32)
    for i, path in enumerate(image_paths):
        image = Image.open(path)
        image.load()
        if c == 1:
            image = image.convert("L")
            batch[i, :, :, 0] = np.asarray(image, dtype=np.float32) / 255.0
        else:
            image = image.convert("RGB")
            batch[i] = np.asarray(image, dtype=np.float32) / 255.0
    reference = model.predict(batch, verbose=0)

    model_dir = Path(nvis_dir)
    with ThreadPoolExecutor(max_workers=8) as pool:
        converted = list(
            pool.map(lambda p: _nvis_predict(nvis_cmd, model_dir, p), image_paths)
        )

    worst = 0.0
    worst_image = None
    disagreements = []
    for path, ref_row, got_row in zip(image_paths, reference, converted):
        got = np.asarray(got_row, dtype=np.float64)
        ref = np.asarray(ref_row, dtype=np.float64)
        if got.shape != ref.shape:
            raise VerificationError(
                f"{path.name}: class count mismatch ({got.shape} vs {ref.shape})"
            )
        gap = float(np.max(np.abs(got - ref)))
        if gap > worst:
            worst, worst_image = gap, path.name
        if int(np.argmax(got)) != int(np.argmax(ref)):
            disagreements.append(path.name)

    report = {
        "images": len(image_paths),
        "max_abs_logit_diff": worst,
        "worst_image": worst_image,
        "bound": bound,
        "label_disagreements": disagreements,
        "passed": worst <= bound and not disagreements,
    }
    if not report["passed"]:
        raise VerificationError(
            f"parity check failed: max |diff| {worst:.3e} (bound {bound:.0e}), "
            f"{len(disagreements)} label disagreements: {disagreements[:5]}"
        )
    return report
