"""Bundled sample scenes for smoke tests and the end-to-end run.

Scenes are drawn for the builtin model suite: solid palette-colored shapes on
white (the detector's legend), vertical placement encoding distance (the
ground-plane depth heuristic), and text in the 5x7 font (the glyph OCR).
Regenerate with ``python scripts/make_samples.py``.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from .builtin import load_palette
from .glyphs import render_text

WIDTH, HEIGHT = 320, 240

SAMPLE_FILES = (
    "scene.png",        # one dog (lower left), one frisbee (upper right)
    "sign.png",         # the word SHOP
    "depth_pair.png",   # two dogs, the nearer one lower in the frame
    "object_scene.png",
    "count_scene.png",
    "spatial_scene.png",
    "scale_scene.png",
    "text_scene.png",
)


def _canvas() -> Image.Image:
    return Image.new("RGB", (WIDTH, HEIGHT), (255, 255, 255))


def _paste_text(img: Image.Image, text: str, origin: tuple[int, int], scale: int = 6) -> None:
    mask = render_text(text.upper(), scale=scale)
    arr = np.array(img)
    x0, y0 = origin
    h, w = mask.shape
    region = arr[y0 : y0 + h, x0 : x0 + w]
    region[mask] = (0, 0, 0)
    img.paste(Image.fromarray(arr))


def build_samples() -> dict[str, Image.Image]:
    palette = load_palette()
    images: dict[str, Image.Image] = {}

    scene = _canvas()
    d = ImageDraw.Draw(scene)
    d.rectangle([40, 120, 140, 200], fill=palette["dog"])
    d.ellipse([180, 60, 240, 100], fill=palette["frisbee"])
    images["scene.png"] = scene

    sign = _canvas()
    _paste_text(sign, "SHOP", (70, 90), scale=7)
    images["sign.png"] = sign

    depth_pair = _canvas()
    d = ImageDraw.Draw(depth_pair)
    d.rectangle([40, 150, 120, 230], fill=palette["dog"])   # near: low in frame
    d.rectangle([200, 30, 260, 80], fill=palette["dog"])    # far: high in frame
    images["depth_pair.png"] = depth_pair

    object_scene = _canvas()
    d = ImageDraw.Draw(object_scene)
    d.rectangle([90, 90, 220, 190], fill=palette["dog"])
    images["object_scene.png"] = object_scene

    count_scene = _canvas()
    d = ImageDraw.Draw(count_scene)
    d.rectangle([30, 60, 110, 150], fill=palette["cat"])
    d.rectangle([180, 70, 270, 160], fill=palette["cat"])
    images["count_scene.png"] = count_scene

    spatial_scene = _canvas()
    d = ImageDraw.Draw(spatial_scene)
    d.rectangle([30, 100, 90, 180], fill=palette["spoon"])
    d.rectangle([200, 80, 290, 200], fill=palette["potted plant"])
    images["spatial_scene.png"] = spatial_scene

    scale_scene = _canvas()
    d = ImageDraw.Draw(scale_scene)
    d.rectangle([30, 50, 200, 180], fill=palette["laptop"])
    d.ellipse([240, 140, 280, 180], fill=palette["sports ball"])
    images["scale_scene.png"] = scale_scene

    text_scene = _canvas()
    _paste_text(text_scene, "OPEN", (80, 100), scale=6)
    images["text_scene.png"] = text_scene

    return images


def write_samples(out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, img in build_samples().items():
        path = out / name
        img.save(path)
        written.append(path)
    return written


def sample_path(name: str) -> Path:
    """Path of a bundled sample image."""
    return Path(str(resources.files("vpe_service").joinpath("samples").joinpath(name)))
