"""Model registry: resolves configured model identifiers into live adapters.

Identifier grammar: ``builtin:<name>``, ``hf:<repo-id>`` (transformers), or
``easyocr:<lang>``. Every slot must resolve at startup or the service refuses
to start; with ``require_all=False`` failed slots are recorded and reported
as degraded by the health endpoint.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import builtin, neural
from .config import ServiceConfig

SLOTS = ("detector", "depth", "ocr", "vqa")


class ModelLoadError(Exception):
    """A configured model identifier could not be resolved."""


@dataclass
class Slot:
    model_id: str
    model: object | None = None
    error: str | None = None

    @property
    def ready(self) -> bool:
        return self.model is not None


@dataclass
class ModelRegistry:
    slots: dict[str, Slot] = field(default_factory=dict)

    def __getattr__(self, name: str):
        if name in SLOTS:
            slot = self.slots[name]
            if slot.model is None:
                raise ModelLoadError(f"{name} model {slot.model_id!r} is not loaded: {slot.error}")
            return slot.model
        raise AttributeError(name)

    def ready(self, name: str) -> bool:
        return self.slots[name].ready

    def all_ready(self) -> bool:
        return all(s.ready for s in self.slots.values())

    def status(self) -> dict:
        return {
            name: {
                "id": slot.model_id,
                "ready": slot.ready,
                **({"error": slot.error} if slot.error else {}),
            }
            for name, slot in self.slots.items()
        }


def _load_detector(model_id: str, cfg: ServiceConfig):
    if model_id == "builtin:palette":
        return builtin.PaletteDetector()
    if model_id.startswith("hf:"):
        return neural.GroundingDetector(model_id[3:], cfg.device)
    raise ModelLoadError(f"unknown detector model {model_id!r}")

def _load_depth(model_id: str, cfg: ServiceConfig):
    if model_id == "builtin:groundplane":
        return builtin.GroundPlaneDepth()
    if model_id.startswith("hf:"):
        return neural.TransformerDepth(model_id[3:], cfg.device)
    raise ModelLoadError(f"unknown depth model {model_id!r}")

def _load_ocr(model_id: str, cfg: ServiceConfig):
    if model_id == "builtin:glyphs":
        return builtin.GlyphOcr()
    if model_id.startswith("easyocr:"):
        return neural.EasyOcrEngine(model_id.split(":", 1)[1])
    raise ModelLoadError(f"unknown ocr model {model_id!r}")

def _load_vqa(model_id: str, cfg: ServiceConfig, registry: ModelRegistry):
    if model_id == "builtin:rules":
        # The rule engine answers from detections, so it shares the other slots.
        if not (registry.ready("detector") and registry.ready("depth")):
            raise ModelLoadError("builtin:rules needs the detector and depth slots loaded")
        return builtin.RuleVqa(registry.detector, registry.depth)
    if model_id.startswith("hf:"):
        return neural.Blip2Vqa(model_id[3:], cfg.device)
    raise ModelLoadError(f"unknown vqa model {model_id!r}")


def load_registry(cfg: ServiceConfig, require_all: bool = True) -> ModelRegistry:
    registry = ModelRegistry()
    loaders = {
        "detector": lambda: _load_detector(cfg.detector_model, cfg),
        "depth": lambda: _load_depth(cfg.depth_model, cfg),
        "ocr": lambda: _load_ocr(cfg.ocr_model, cfg),
        "vqa": lambda: _load_vqa(cfg.vqa_model, cfg, registry),
    }
    ids = {
        "detector": cfg.detector_model,
        "depth": cfg.depth_model,
        "ocr": cfg.ocr_model,
        "vqa": cfg.vqa_model,
    }
    for name in SLOTS:
        slot = Slot(model_id=ids[name])
        registry.slots[name] = slot
        try:
            slot.model = loaders[name]()
        except Exception as e:  # adapters raise ImportError/OSError/etc.
            slot.error = str(e)
            if require_all:
                raise ModelLoadError(
                    f"cannot load {name} model {slot.model_id!r}: {e}"
                ) from e
    return registry
