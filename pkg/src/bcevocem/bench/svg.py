"""SVG 1.1 rendering of a navigation episode: layout, plans, executed and centroid paths."""

from __future__ import annotations

import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np

from ..mpc import EpisodeRecord, RolloutEnv

SVG_NS = "http://www.w3.org/2000/svg"
SIZE = 600
PAD = 20


class UnsupportedEnvError(ValueError):
    pass


def _bounds(env: RolloutEnv, record: EpisodeRecord | None) -> tuple[float, float, float, float]:
    pts = [env.start[:2], env.goal[:2]]
    for c in env.obstacles:
        cx, cy = c.center
        pts += [(cx - c.radius, cy - c.radius), (cx + c.radius, cy + c.radius)]
    if record is not None and len(record.states):
        pts += list(np.asarray(record.states)[:, :2])
    a = np.asarray(pts, dtype=np.float64)
    lo, hi = a.min(axis=0), a.max(axis=0)
    span = max(float((hi - lo).max()), 1e-9)
    return float(lo[0]), float(lo[1]), span, span


def _points(xy: np.ndarray, to_px) -> str:
    return " ".join(f"{px:.2f},{py:.2f}" for px, py in (to_px(x, y) for x, y in xy))


def trajectory_svg(record: EpisodeRecord | None, env: RolloutEnv, step: int = -1) -> ET.Element:
    """Build the SVG tree; ``record=None`` or an empty record draws the layout only.

    Worker plans and the centroid path are taken from control step ``step``
    (default: the last one); the executed path covers the whole episode.
    """
    if env.state_dim != 2:
        raise UnsupportedEnvError(f"trajectory plots need a 2-D state, got state_dim={env.state_dim}")
    x0, y0, w, h = _bounds(env, record)
    scale = (SIZE - 2 * PAD) / max(w, h)

    def to_px(x, y):
        # y axis points up in world coordinates
        return PAD + (x - x0) * scale, SIZE - PAD - (y - y0) * scale

    ET.register_namespace("", SVG_NS)
    root = ET.Element("svg", {"xmlns": SVG_NS, "version": "1.1", "width": str(SIZE), "height": str(SIZE),
                              "viewBox": f"0 0 {SIZE} {SIZE}"})
    ET.SubElement(root, "rect", {"width": str(SIZE), "height": str(SIZE), "fill": "white"})

    obs = ET.SubElement(root, "g", {"id": "obstacles", "fill": "#888888"})
    for c in env.obstacles:
        cx, cy = to_px(*c.center)
        ET.SubElement(obs, "circle", {"cx": f"{cx:.2f}", "cy": f"{cy:.2f}", "r": f"{c.radius * scale:.2f}"})

    if record is not None:
        plans = ET.SubElement(root, "g", {"id": "worker-plans", "fill": "none", "stroke": "#6495ed",
                                          "stroke-width": "0.6", "stroke-opacity": "0.4"})
        if record.worker_paths:
            for path in np.asarray(record.worker_paths[step]):
                ET.SubElement(plans, "polyline", {"points": _points(path[:, :2], to_px)})
        if record.centroid_paths:
            cpath = np.asarray(record.centroid_paths[step])[:, :2]
            ET.SubElement(root, "polyline", {"id": "centroid-path", "points": _points(cpath, to_px), "fill": "none",
                                             "stroke": "green", "stroke-width": "1.5", "stroke-dasharray": "6 4"})
        if len(record.states):
            ET.SubElement(root, "polyline", {"id": "executed-path", "fill": "none", "stroke": "red",
                                             "stroke-width": "2",
                                             "points": _points(np.asarray(record.states)[:, :2], to_px)})

    for name, pt, color in (("start", env.start, "blue"), ("goal", env.goal, "black")):
        px, py = to_px(*pt[:2])
        ET.SubElement(root, "circle", {"id": name, "cx": f"{px:.2f}", "cy": f"{py:.2f}", "r": "5", "fill": color})
    return root


def emit_trajectory_svg(record: EpisodeRecord | None, env: RolloutEnv, path: str | Path, step: int = -1) -> Path:
    path = Path(path)
    tree = ET.ElementTree(trajectory_svg(record, env, step))
    path.parent.mkdir(parents=True, exist_ok=True)
    tree.write(path, encoding="utf-8", xml_declaration=True)
    return path
