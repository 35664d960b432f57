"""Launcher: ``vpe-service --port 8601`` or ``python -m vpe_service``."""

from __future__ import annotations

import argparse

import uvicorn

from .app import create_app
from .config import NEURAL_DEFAULTS, ServiceConfig


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Run the perception service.")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8601)
    parser.add_argument("--detector", default=None,
                        help=f"e.g. builtin:palette or {NEURAL_DEFAULTS['detector']}")
    parser.add_argument("--depth", default=None,
                        help=f"e.g. builtin:groundplane or {NEURAL_DEFAULTS['depth']}")
    parser.add_argument("--ocr", default=None,
                        help=f"e.g. builtin:glyphs or {NEURAL_DEFAULTS['ocr']}")
    parser.add_argument("--vqa", default=None,
                        help=f"e.g. builtin:rules or {NEURAL_DEFAULTS['vqa']}")
    parser.add_argument("--device", default=None, help="cpu (default) or a CUDA device")
    parser.add_argument("--neural", action="store_true",
                        help="use the neural model defaults for all four slots")
    parser.add_argument("--max-image-bytes", type=int, default=None)
    return parser


def main(argv: list[str] | None = None) -> None:
    args = build_parser().parse_args(argv)
    overrides = {"host": args.host, "port": args.port}
    if args.neural:
        overrides.update(
            detector_model=NEURAL_DEFAULTS["detector"],
            depth_model=NEURAL_DEFAULTS["depth"],
            ocr_model=NEURAL_DEFAULTS["ocr"],
            vqa_model=NEURAL_DEFAULTS["vqa"],
        )
    for key, value in (
        ("detector_model", args.detector),
        ("depth_model", args.depth),
        ("ocr_model", args.ocr),
        ("vqa_model", args.vqa),
        ("device", args.device),
        ("max_image_bytes", args.max_image_bytes),
    ):
        if value is not None:
            overrides[key] = value
    cfg = ServiceConfig.from_env(**overrides)
    uvicorn.run(create_app(cfg), host=cfg.host, port=cfg.port)


if __name__ == "__main__":
    main()
