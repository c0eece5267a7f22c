"""Small-multiples SVG of trajectory fragments, rendered from the viz-kernels JSON alone."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Any

CELL = 180
COLUMNS = 4
MARGIN = 18
COS30 = math.cos(math.pi / 6)
SIN30 = math.sin(math.pi / 6)


def isometric(point: list[float]) -> tuple[float, float]:
    """Fixed isometric projection; screen y grows downwards."""
    x, y, z = point
    return (x - y) * COS30, (x + y) * SIN30 - z


def _fmt(value: float) -> str:
    return f"{value:.3f}"


def _extent(fragments: list[dict[str, Any]]) -> float:
    """Largest projected coordinate across every fragment, so all cells share one scale."""
    largest = 1e-9
    for fragment in fragments:
        pivot = fragment["points"][len(fragment["points"]) // 2]
        tip = [p + v for p, v in zip(pivot, _unit(fragment["output_vector"]), strict=True)]
        for point in [*fragment["points"], tip, [0.0, 0.0, 0.0]]:
            u, v = isometric(point)
            largest = max(largest, abs(u), abs(v))
    return largest


def _unit(vector: list[float]) -> list[float]:
    norm = math.sqrt(sum(c * c for c in vector))
    if norm == 0.0:
        return [0.0, 0.0, 0.0]
    return [c / norm for c in vector]


def _cell(fragment: dict[str, Any], origin: tuple[float, float], scale: float) -> list[str]:
    ox, oy = origin
    centre = (ox + CELL / 2, oy + CELL / 2 + 8)

    def screen(point: list[float]) -> tuple[str, str]:
        u, v = isometric(point)
        return _fmt(centre[0] + scale * u), _fmt(centre[1] + scale * v)

    points = fragment["points"]
    pivot = points[len(points) // 2]
    tip = [p + v for p, v in zip(pivot, _unit(fragment["output_vector"]), strict=True)]
    kernel = fragment["kernel"]
    polyline = " ".join(",".join(screen(p)) for p in points)
    zx, zy = screen([0.0, 0.0, 0.0])
    px, py = screen(pivot)
    tx, ty = screen(tip)
    return [
        f'<g id="kernel-{kernel["layer"]}-{kernel["out_channel"]}">',
        f'<rect x="{_fmt(ox)}" y="{_fmt(oy)}" width="{CELL}" height="{CELL}" '
        'fill="none" stroke="#cccccc"/>',
        f'<text x="{_fmt(ox + 6)}" y="{_fmt(oy + 14)}" font-size="11">'
        f'kernel {kernel["out_channel"]} |f|={fragment["activation"]:.3f} '
        f're={fragment["output_real"]:.3f}</text>',
        f'<circle cx="{zx}" cy="{zy}" r="2.5" fill="#000000"/>',
        f'<polyline points="{polyline}" fill="none" stroke="#1f77b4" stroke-width="1.5"/>',
        f'<circle cx="{px}" cy="{py}" r="2" fill="#1f77b4"/>',
        f'<line x1="{px}" y1="{py}" x2="{tx}" y2="{ty}" stroke="#d62728" '
        'stroke-width="1.5" marker-end="url(#arrow)"/>',
        "</g>",
    ]


def render_svg(document: dict[str, Any]) -> str:
    """One cell per fragment: the window polyline, the origin, and the output direction
    drawn as an arrow from the pivot point."""
    fragments = document["fragments"]
    rows = max(1, math.ceil(len(fragments) / COLUMNS))
    width = COLUMNS * CELL + 2 * MARGIN
    height = rows * CELL + 2 * MARGIN + 20
    scale = (CELL / 2 - 20) / _extent(fragments)

    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        "<defs>",
        '<marker id="arrow" viewBox="0 0 10 10" refX="9" refY="5" markerWidth="6" '
        'markerHeight="6" orient="auto-start-reverse">',
        '<path d="M 0 0 L 10 5 L 0 10 z" fill="#d62728"/>',
        "</marker>",
        "</defs>",
        f'<text x="{MARGIN}" y="{MARGIN + 4}" font-size="13">'
        f'layer {document["layer"]}, seed {document["seed"]}</text>',
    ]
    for index, fragment in enumerate(fragments):
        row, column = divmod(index, COLUMNS)
        origin = (MARGIN + column * CELL, MARGIN + 20 + row * CELL)
        lines.extend(_cell(fragment, origin, scale))
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def write_svg(document: dict[str, Any], path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_svg(document))
    return path
