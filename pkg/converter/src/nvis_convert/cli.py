"""``nvis-convert <ckpt> <out_dir> [--verify <image_dir>]``."""

from __future__ import annotations

import argparse
import json
import subprocess
import sys
from pathlib import Path

from .convert import ConversionError, convert
from .verify import VerificationError, verify


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="nvis-convert",
        description="Convert a Keras HDF5 checkpoint to the NVIS model format",
    )
    parser.add_argument("checkpoint", help="path to the .h5/.keras checkpoint")
    parser.add_argument("out_dir", help="directory to write model.json and weights.bin")
    parser.add_argument("--verify", metavar="IMAGE_DIR", help="verify logit parity on PNG/JPEG images")
    parser.add_argument("--nvis-bin", default="nvis", help="nvis executable used for validation/verification")
    args = parser.parse_args(argv)

    try:
        manifest = convert(args.checkpoint, args.out_dir)
    except ConversionError as exc:
        print(json.dumps({"error": {"kind": "conversion", "detail": str(exc)}}))
        return 3

    result = {
        "out_dir": args.out_dir,
        "layers": [layer["kind"] for layer in manifest["layers"]],
        "total_elements": manifest["total_elements"],
    }

    check = subprocess.run(
        [args.nvis_bin, "validate", args.out_dir], capture_output=True, text=True
    )
    result["validated"] = check.returncode == 0
    if check.returncode != 0:
        result["validate_output"] = check.stdout.strip()
        print(json.dumps(result, indent=2))
        return 3

    if args.verify:
        images = sorted(
            p for p in Path(args.verify).iterdir() if p.suffix.lower() in (".png", ".jpg", ".jpeg")
        )
        try:
            result["parity"] = verify(
                args.checkpoint, args.out_dir, images, nvis_cmd=(args.nvis_bin,)
            )
        except VerificationError as exc:
            result["parity_error"] = str(exc)
            print(json.dumps(result, indent=2))
            return 4

    print(json.dumps(result, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
