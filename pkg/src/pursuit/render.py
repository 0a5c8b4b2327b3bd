"""SVG snapshots: gray obstacles, black contaminated space, white cleared space,
hatched robot perception, robots as dots."""

from __future__ import annotations

import os
from xml.sax.saxutils import escape

import numpy as np

from .geometry import Environment, compute_frontier, detect_critical_points
from .grid import GridModel, Snapshot

STYLE = """
.obstacle{fill:#8c8c8c;stroke:#444;stroke-width:0.5;fill-rule:evenodd}
.contaminated{fill:#000}
.cleared{fill:#fff}
.seen{fill:url(#hatch)}
.robot{fill:#d62728;stroke:#fff;stroke-width:0.8}
.cp{fill:#1f77b4}
.cplabel{font:9px sans-serif;fill:#1f77b4}
.frontier{fill:none;stroke:#2ca02c;stroke-width:0.8;stroke-dasharray:3,2}
"""

SCALE = 400.0  # pixels across the longer bounding-box side


def _fmt(v: float) -> str:
    s = f"{v:.3f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


class _Frame:
    def __init__(self, env: Environment, margin: float = 10.0):
        x0, y0, x1, y1 = env.bbox
        span = max(x1 - x0, y1 - y0) or 1.0
        self.k = SCALE / span
        self.x0, self.y1 = x0, y1
        self.margin = margin
        self.w = (x1 - x0) * self.k + 2 * margin
        self.h = (y1 - y0) * self.k + 2 * margin

    def xy(self, p) -> tuple[str, str]:
        return _fmt((p[0] - self.x0) * self.k + self.margin), _fmt((self.y1 - p[1]) * self.k + self.margin)

    def ring(self, pts) -> str:
        return "M" + " L".join(" ".join(self.xy(p)) for p in pts) + " Z"


def _runs(row: np.ndarray):
    """(start, length) of each run of True in a 1-d mask."""
    if not row.any():
        return []
    padded = np.concatenate([[False], row, [False]])
    d = np.diff(padded.astype(np.int8))
    starts = np.nonzero(d == 1)[0]
    ends = np.nonzero(d == -1)[0]
    return list(zip(starts.tolist(), (ends - starts).tolist()))


def _cells(grid: GridModel, frame: _Frame, mask: np.ndarray, cls: str) -> list[str]:
    out = []
    rast = grid.raster(mask)
    cw = grid.h * frame.k
    ox, oy = grid.origin
    for j in range(grid.ny):
        for i, n in _runs(rast[j]):
            x, _ = frame.xy((ox + i * grid.h, 0.0))
            _, y = frame.xy((0.0, oy + (j + 1) * grid.h))
            out.append(f'<rect class="{cls}" x="{x}" y="{y}" width="{_fmt(n * cw)}" height="{_fmt(cw)}"/>')
    return out


def render_svg(env: Environment, snapshot: Snapshot, grid: GridModel, cps=None, frontiers: bool = True) -> str:
    """One SVG 1.1 document for a world snapshot classified on ``grid``."""
    frame = _Frame(env)
    cps = detect_critical_points(env) if cps is None else cps
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{_fmt(frame.w)}" height="{_fmt(frame.h)}" '
        f'viewBox="0 0 {_fmt(frame.w)} {_fmt(frame.h)}">',
        "<defs>",
        '<pattern id="hatch" width="6" height="6" patternUnits="userSpaceOnUse">'
        '<path d="M0,0 L6,6 M6,0 L0,6" stroke="#888" stroke-width="0.6"/></pattern>',
        f"<style>{STYLE}</style>",
        "</defs>",
        f"<title>round {snapshot.round}</title>",
    ]
    free = ~snapshot.contaminated
    parts += _cells(grid, frame, free, "cleared")
    parts += _cells(grid, frame, snapshot.contaminated, "contaminated")
    parts += _cells(grid, frame, snapshot.seen, "seen")
    # obstacles: the frame outside the outer boundary, then each hole
    x0, y0, x1, y1 = env.bbox
    pad = frame.margin / frame.k
    box = [(x0 - pad, y0 - pad), (x1 + pad, y0 - pad), (x1 + pad, y1 + pad), (x0 - pad, y1 + pad)]
    parts.append(f'<path class="obstacle" d="{frame.ring(box)} {frame.ring(env.outer.vertices)}"/>')
    for h in env.holes:
        parts.append(f'<path class="obstacle" d="{frame.ring(h.vertices)}"/>')
    if frontiers:
        for c in cps:
            for seg in compute_frontier(env, c):
                pts = " ".join(",".join(frame.xy(p)) for p in seg.segment)
                parts.append(f'<polyline class="frontier" points="{pts}"/>')
    for c in cps:
        x, y = frame.xy(c.location)
        parts.append(f'<circle class="cp" cx="{x}" cy="{y}" r="2"/>')
        parts.append(f'<text class="cplabel" x="{x}" y="{y}" dx="3" dy="-3">{escape(str(c.id))}</text>')
    for rid in sorted(snapshot.positions):
        x, y = frame.xy(snapshot.positions[rid])
        parts.append(f'<circle class="robot" cx="{x}" cy="{y}" r="4"><title>robot {rid}</title></circle>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render_history(env: Environment, grid: GridModel, history, outdir, cps=None) -> list[str]:
    os.makedirs(outdir, exist_ok=True)
    cps = detect_critical_points(env) if cps is None else cps
    written = []
    for snap in history:
        path = os.path.join(outdir, f"round_{snap.round:04d}.svg")
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(render_svg(env, snap, grid, cps))
        written.append(path)
    return written
