"""Adapters for neural backends (transformers pipelines, EasyOCR).

Imports are deferred to construction time: the packages and weights are only
needed when one of these model identifiers is configured. All adapters expose
the same duck-typed interface as the builtin suite (pixel-space boxes,
inverse-depth maps in [0, 1], free-text VQA answers).
"""

from __future__ import annotations

import numpy as np


def _to_pil(image: np.ndarray):
    from PIL import Image

    return Image.fromarray(image)


class GroundingDetector:
    """Zero-shot grounded detection via a transformers pipeline."""

    def __init__(self, model_id: str, device: str = "cpu"):
        from transformers import pipeline

        self._pipe = pipeline(
            "zero-shot-object-detection", model=model_id,
            device=-1 if device == "cpu" else device,
        )

    def known_labels(self) -> list[str]:  # open-vocabulary
        return []

    def detect(self, image: np.ndarray, query: str) -> list[dict]:
        results = self._pipe(_to_pil(image), candidate_labels=[query])
        out = []
        for r in results:
            box = r["box"]
            out.append({
                "box": (float(box["xmin"]), float(box["ymin"]),
                        float(box["xmax"]), float(box["ymax"])),
                "confidence": float(r["score"]),
            })
        out.sort(key=lambda d: (-d["confidence"], d["box"]))
        return out


class TransformerDepth:
    """Monocular depth via a transformers depth-estimation pipeline.

    MiDaS-family models predict disparity (inverse depth), which is what the
    closeness convention needs; the map is min-max rescaled to [0, 1].
    """

    def __init__(self, model_id: str, device: str = "cpu"):
        from transformers import pipeline

        self._pipe = pipeline(
            "depth-estimation", model=model_id,
            device=-1 if device == "cpu" else device,
        )

    def inverse_depth(self, image: np.ndarray) -> np.ndarray:
        predicted = self._pipe(_to_pil(image))["predicted_depth"]
        arr = predicted.squeeze().cpu().numpy().astype(np.float64)
        if arr.shape != image.shape[:2]:
            from PIL import Image

            resized = Image.fromarray(arr).resize(
                (image.shape[1], image.shape[0]), Image.BILINEAR
            )
            arr = np.asarray(resized, dtype=np.float64)
        lo, hi = float(arr.min()), float(arr.max())
        if hi <= lo:
            return np.zeros_like(arr)
        return (arr - lo) / (hi - lo)


class EasyOcrEngine:
    def __init__(self, lang: str = "en"):
        import easyocr

        self._reader = easyocr.Reader([lang], gpu=False, verbose=False)

    def read(self, image: np.ndarray) -> list[dict]:
        out = []
        for quad, text, conf in self._reader.readtext(image):
            xs = [p[0] for p in quad]
            ys = [p[1] for p in quad]
            if not text.strip():
                continue
            out.append({
                "text": text,
                "box": (float(min(xs)), float(min(ys)), float(max(xs)), float(max(ys))),
                "confidence": float(conf),
            })
        return out


class Blip2Vqa:
    """Multiple-choice VQA over a BLIP-2 checkpoint.

    The model prompt is formatted as
    ``Question: {question} Choices: {choice1, choice2, ...} Answer:``.
    """

    def __init__(self, model_id: str, device: str = "cpu"):
        from transformers import Blip2ForConditionalGeneration, Blip2Processor

        self._processor = Blip2Processor.from_pretrained(model_id)
        self._model = Blip2ForConditionalGeneration.from_pretrained(model_id)
        self._device = device
        if device != "cpu":
            self._model = self._model.to(device)

    def answer(self, image: np.ndarray, question: str, choices: list[str]) -> str:
        prompt = f"Question: {question} Choices: {', '.join(choices)} Answer:"
        inputs = self._processor(images=_to_pil(image), text=prompt, return_tensors="pt")
        if self._device != "cpu":
            inputs = {k: v.to(self._device) for k, v in inputs.items()}
        ids = self._model.generate(**inputs, max_new_tokens=10)
        return self._processor.batch_decode(ids, skip_special_tokens=True)[0].strip()
