"""Service configuration."""

from __future__ import annotations

import os
from dataclasses import dataclass

DEFAULT_MAX_IMAGE_BYTES = 8 * 1024 * 1024

# The builtin suite resolves with no downloads; these are the neural
# counterparts for natural images.
NEURAL_DEFAULTS = {
    "detector": "hf:IDEA-Research/grounding-dino-tiny",
    "depth": "hf:Intel/dpt-hybrid-midas",
    "ocr": "easyocr:en",
    "vqa": "hf:Salesforce/blip2-flan-t5-xl",
}


@dataclass(frozen=True)
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8601
    detector_model: str = "builtin:palette"
    depth_model: str = "builtin:groundplane"
    ocr_model: str = "builtin:glyphs"
    vqa_model: str = "builtin:rules"
    device: str = "cpu"
    max_image_bytes: int = DEFAULT_MAX_IMAGE_BYTES

    def __post_init__(self) -> None:
        if self.max_image_bytes <= 0:
            raise ValueError("max_image_bytes must be positive")

    @classmethod
    def from_env(cls, **overrides) -> "ServiceConfig":
        env = {
            "detector_model": os.environ.get("VPE_SERVICE_DETECTOR"),
            "depth_model": os.environ.get("VPE_SERVICE_DEPTH"),
            "ocr_model": os.environ.get("VPE_SERVICE_OCR"),
            "vqa_model": os.environ.get("VPE_SERVICE_VQA"),
            "device": os.environ.get("VPE_SERVICE_DEVICE"),
        }
        kwargs = {k: v for k, v in env.items() if v}
        kwargs.update(overrides)
        return cls(**kwargs)
