"""Shared by the unit and acceptance suites: random scene builders plus
independent brute-force oracles. The oracle_* functions recompute results
from raw fixture dicts and stay clear of the code paths they check; only the
backend builders touch package code."""

from __future__ import annotations

import random

from vpe.perception import FixtureBackend

OBJECTS = ("obja", "objb", "objc")


def random_box(rng: random.Random) -> list[float]:
    xs = sorted(round(rng.uniform(0, 1), 4) for _ in range(2))
    ys = sorted(round(rng.uniform(0, 1), 4) for _ in range(2))
    return [xs[0], ys[0], xs[1], ys[1]]


def random_scene(rng: random.Random, max_dets: int = 4) -> dict:
    """Raw objdet fixture entry for one image: queries -> detection dicts."""
    objdet = {}
    for obj in OBJECTS:
        dets = []
        for _ in range(rng.randint(0, max_dets)):
            dets.append(
                {
                    "box": random_box(rng),
                    "confidence": round(rng.uniform(0, 1), 4),
                    "closeness": round(rng.uniform(0, 1), 4),
                }
            )
        objdet[obj] = dets
    return {"objdet": objdet}


def backend_for_scene(scene: dict, image: str = "img") -> FixtureBackend:
    return FixtureBackend.from_dict({"images": {image: scene}})


def oracle_filter_sort(raw_dets: list[dict], threshold: float) -> list[tuple]:
    """Reference obj_det result as comparable tuples."""
    kept = [d for d in raw_dets if d["confidence"] >= threshold]
    kept.sort(key=lambda d: (-d["confidence"], tuple(d["box"])))
    return [(d["confidence"], tuple(d["box"]), d["closeness"]) for d in kept]


def oracle_best(raw_dets: list[dict], threshold: float) -> dict | None:
    ordered = oracle_filter_sort(raw_dets, threshold)
    if not ordered:
        return None
    conf, box, closeness = ordered[0]
    return {"box": list(box), "confidence": conf, "closeness": closeness}


def oracle_count(raw_dets: list[dict], threshold: float, op: str, operand: int) -> bool:
    n = len([d for d in raw_dets if d["confidence"] >= threshold])
    return {
        "==": n == operand,
        "!=": n != operand,
        "<": n < operand,
        "<=": n <= operand,
        ">": n > operand,
        ">=": n >= operand,
    }[op]


def _center(box: list[float]) -> tuple[float, float]:
    return ((box[0] + box[2]) / 2.0, (box[1] + box[3]) / 2.0)


def oracle_spatial(subject: dict, reference: dict, rel: str) -> bool:
    scx, scy = _center(subject["box"])
    rcx, rcy = _center(reference["box"])
    if rel == "left":
        return scx < rcx
    if rel == "right":
        return scx > rcx
    if rel == "above":
        return scy < rcy
    if rel == "below":
        return scy > rcy
    if rel == "front":
        return subject["closeness"] > reference["closeness"]
    if rel == "behind":
        return subject["closeness"] < reference["closeness"]
    raise ValueError(rel)


def _area(box: list[float]) -> float:
    return (box[2] - box[0]) * (box[3] - box[1])


def oracle_scale(subject: dict, reference: dict, rel: str, tau: float) -> bool | None:
    """None marks the degenerate-area case (module scores it 0)."""
    s_area = _area(subject["box"])
    r_area = _area(reference["box"])
    if s_area == 0.0 or r_area == 0.0:
        return None
    ratio = s_area / r_area
    if rel == "bigger":
        return ratio > tau
    if rel == "smaller":
        return ratio < 1.0 / tau
    if rel == "same":
        return 1.0 / tau <= ratio <= tau
    raise ValueError(rel)
