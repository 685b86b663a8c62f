"""Funnel plots as deterministic SVG.

Styling is fixed so that identical inputs give byte-identical files. Every
plotted element carries an SVG id (``<prefix>fitted-points``,
``<prefix>tested-points``, ``<prefix>mean-line``, ``<prefix>band-upper``,
``<prefix>band-lower``) so that the geometry can be checked from the file
itself with :func:`svg_geometry`.
"""

from __future__ import annotations

import io
import os
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from typing import Sequence

import matplotlib
import numpy as np
from matplotlib.figure import Figure

from .meta import GroupKappa, MetaModel, PredictionBand

__all__ = ["FunnelPanel", "funnel_figure", "write_svg", "svg_bytes", "svg_geometry", "PanelGeometry"]

_RC = {
    "svg.hashsalt": "concord-funnel",
    "svg.fonttype": "none",
    "font.family": "DejaVu Sans",
    "font.size": 8,
    "axes.linewidth": 0.6,
    "path.simplify": False,
}


@dataclass(frozen=True)
class FunnelPanel:
    model: MetaModel
    band: PredictionBand
    fitted: tuple[GroupKappa, ...]
    tested: tuple[GroupKappa, ...] = ()
    title: str = ""
    prefix: str = ""


def _draw(ax, panel: FunnelPanel):
    p = panel.prefix
    band = panel.band
    m, lo, hi = band.m, band.lo, band.hi
    ax.plot(m, hi, "-", color="black", lw=1.0, gid=f"{p}band-upper")
    ax.plot(m, lo, "-", color="black", lw=1.0, gid=f"{p}band-lower")
    ax.plot([m[0], m[-1]], [band.mean, band.mean], "--", color="black", lw=0.8, gid=f"{p}mean-line")
    if panel.fitted:
        ax.plot(
            [g.m for g in panel.fitted],
            [g.kappa for g in panel.fitted],
            "o",
            ms=4,
            mfc="none",
            mec="black",
            mew=0.8,
            gid=f"{p}fitted-points",
        )
    if panel.tested:
        ax.plot(
            [g.m for g in panel.tested],
            [g.kappa for g in panel.tested],
            "o",
            ms=4.5,
            mfc="black",
            mec="black",
            gid=f"{p}tested-points",
        )
    ys = list(lo) + list(hi) + [g.kappa for g in (*panel.fitted, *panel.tested)]
    pad = 0.05 * (max(ys) - min(ys) or 1.0)
    ax.set_ylim(min(ys) - pad, max(ys) + pad)
    ax.set_xlim(0, m[-1])
    ax.set_xlabel("m (evaluated articles)")
    ax.set_ylabel("kappa")
    if panel.title:
        ax.set_title(panel.title)


def funnel_figure(panels: Sequence[FunnelPanel], ncols: int = 1) -> Figure:
    n = len(panels)
    nrows = -(-n // ncols)
    with matplotlib.rc_context(_RC):
        fig = Figure(figsize=(4.2 * ncols, 3.2 * nrows))
        for i, panel in enumerate(panels):
            ax = fig.add_subplot(nrows, ncols, i + 1)
            _draw(ax, panel)
        fig.tight_layout()
    return fig


def svg_bytes(fig: Figure) -> bytes:
    buf = io.BytesIO()
    with matplotlib.rc_context(_RC):
        fig.savefig(buf, format="svg", metadata={"Date": None})
    return buf.getvalue()


def write_svg(fig: Figure, path: str | os.PathLike) -> None:
    data = svg_bytes(fig)
    with open(path, "wb") as f:
        f.write(data)


# --------------------------------------------------------------------------
# reading geometry back out of the SVG

_NS = {"svg": "http://www.w3.org/2000/svg", "xlink": "http://www.w3.org/1999/xlink"}
_NUM = re.compile(r"-?\d+(?:\.\d+)?(?:e-?\d+)?")


@dataclass(frozen=True)
class PanelGeometry:
    """Marker centres and band polylines in SVG user units (y grows downward)."""

    fitted: tuple[tuple[float, float], ...]
    tested: tuple[tuple[float, float], ...]
    upper: tuple[tuple[float, float], ...]
    lower: tuple[tuple[float, float], ...]
    mean: tuple[tuple[float, float], ...]

    @staticmethod
    def _at(line, x: float) -> float:
        xs = np.array([p[0] for p in line])
        ys = np.array([p[1] for p in line])
        if not xs[0] <= x <= xs[-1]:
            raise ValueError(f"x={x} outside the drawn band [{xs[0]}, {xs[-1]}]")
        return float(np.interp(x, xs, ys))

    def position(self, point: tuple[float, float]) -> str:
        """"above", "below" or "inside" the drawn band, as it appears on the page."""
        x, y = point
        if y < self._at(self.upper, x):
            return "above"
        if y > self._at(self.lower, x):
            return "below"
        return "inside"


def _group(root, gid):
    for g in root.iter(f"{{{_NS['svg']}}}g"):
        if g.get("id") == gid:
            return g
    return None


def _markers(root, gid):
    g = _group(root, gid)
    if g is None:
        return ()
    return tuple(
        (float(u.get("x")), float(u.get("y"))) for u in g.iter(f"{{{_NS['svg']}}}use")
    )


def _polyline(root, gid):
    g = _group(root, gid)
    if g is None:
        return ()
    path = next(g.iter(f"{{{_NS['svg']}}}path"))
    nums = [float(x) for x in _NUM.findall(path.get("d"))]
    return tuple(zip(nums[0::2], nums[1::2]))


def svg_geometry(svg: bytes | str, prefix: str = "") -> PanelGeometry:
    root = ET.fromstring(svg.encode() if isinstance(svg, str) else svg)
    return PanelGeometry(
        fitted=_markers(root, f"{prefix}fitted-points"),
        tested=_markers(root, f"{prefix}tested-points"),
        upper=_polyline(root, f"{prefix}band-upper"),
        lower=_polyline(root, f"{prefix}band-lower"),
        mean=_polyline(root, f"{prefix}mean-line"),
    )
