from __future__ import annotations

import base64
import io
import json
from importlib import resources
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from vpe_service.app import create_app
from vpe_service.config import ServiceConfig
from vpe_service.samples import sample_path


def load_schema(name: str) -> dict:
    text = resources.files("vpe_service").joinpath(f"schemas/{name}").read_text()
    return json.loads(text)


def b64_file(path: Path) -> str:
    return base64.b64encode(path.read_bytes()).decode("ascii")


def b64_image(img: Image.Image, fmt: str = "PNG") -> str:
    buf = io.BytesIO()
    img.save(buf, format=fmt)
    return base64.b64encode(buf.getvalue()).decode("ascii")


def b64_sample(name: str) -> str:
    return b64_file(sample_path(name))


def image_array(name: str) -> np.ndarray:
    return np.asarray(Image.open(sample_path(name)).convert("RGB"))


@pytest.fixture(scope="session")
def client():
    from fastapi.testclient import TestClient

    app = create_app(ServiceConfig())
    with TestClient(app) as c:
        yield c
