"""Box-layout rendering to binary PPM (P6) images.

Entities are drawn in index order as filled rectangles over a white
background with 50% alpha compositing; each category gets a fixed hashed
hue, so renders are byte-identical across runs and implementations.
"""
from __future__ import annotations

from .scenegraph import BoundingBox, Scene


def hsv_to_rgb(h: float, s: float, v: float) -> tuple[float, float, float]:
    """Standard HSV (h in degrees) to RGB in [0, 1]."""
    h = h % 360.0
    c = v * s
    x = c * (1.0 - abs((h / 60.0) % 2.0 - 1.0))
    m = v - c
    sector = int(h // 60.0)
    r, g, b = [
        (c, x, 0.0),
        (x, c, 0.0),
        (0.0, c, x),
        (0.0, x, c),
        (x, 0.0, c),
        (c, 0.0, x),
    ][sector]
    return (r + m, g + m, b + m)


def _round_half_even(value: float) -> int:
    return int(round(value))


def category_color(category_index: int) -> tuple[int, int, int]:
    """Deterministic 8-bit color: hue (index * 47) mod 360, s=0.8, v=0.9."""
    rgb = hsv_to_rgb((category_index * 47) % 360, 0.8, 0.9)
    return tuple(_round_half_even(255.0 * c) for c in rgb)


def _covered_range(lo: float, extent: float, size: int) -> range:
    # same discretization as the layout mask: a pixel is covered iff its
    # center falls in [lo, lo + extent)
    first = size
    last = -1
    for i in range(size):
        center = (i + 0.5) / size
        if lo <= center < lo + extent:
            if i < first:
                first = i
            last = i
    return range(first, last + 1)


def render_boxes(
    boxes: list[BoundingBox], categories: list[int], size: int
) -> bytes:
    """Render boxes to a size x size P6 image."""
    pixels = [[255, 255, 255] for _ in range(size * size)]
    for box, cat in zip(boxes, categories):
        color = category_color(cat)
        rows = _covered_range(box.y, box.h, size)
        cols = _covered_range(box.x, box.w, size)
        for r in rows:
            base = r * size
            for c in cols:
                px = pixels[base + c]
                for ch in range(3):
                    px[ch] = _round_half_even((color[ch] + px[ch]) / 2.0)
    header = f"P6\n{size} {size}\n255\n".encode("ascii")
    body = bytes(v for px in pixels for v in px)
    return header + body


def render_scene(scene: Scene, size: int) -> bytes:
    if scene.gt_boxes is None:
        raise ValueError("scene has no boxes to render")
    return render_boxes(scene.gt_boxes, scene.graph.entities, size)
