#!/usr/bin/env python3
"""Regenerate the bundled sample images in src/vpe_service/samples/."""

from pathlib import Path

from vpe_service.samples import write_samples

if __name__ == "__main__":
    out_dir = Path(__file__).resolve().parent.parent / "src" / "vpe_service" / "samples"
    for path in write_samples(out_dir):
        print(path)
