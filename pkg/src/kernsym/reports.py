"""Report emission and re-parsing: CSV, JSON, and SVG bar charts.

CSV schema for symmetry profiles (header always present, one row per
conv layer): layer,index,k,score,defined,strided. Scores are written
with repr() so a round-trip reproduces every float bit-exactly;
undefined scores serialize as nan (CSV) / null (JSON) and render as a
gap in the chart. Strided layers carry an asterisk after their name in
rendered output (chart labels, text tables), never in the CSV/JSON
payload where the strided column already says it.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import xml.etree.ElementTree as ET

from .errors import EmptyProfile
from .symmetry import ProfileEntry, SymmetryProfile, SymmetryScore

TOOL_VERSION = "0.1.0"


def display_name(entry: ProfileEntry) -> str:
    return entry.score.layer_name + ("*" if entry.strided else "")


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def write_profile_csv(profile: SymmetryProfile, fh) -> None:
    writer = csv.writer(fh)
    writer.writerow(["layer", "index", "k", "score", "defined", "strided"])
    for i, entry in enumerate(profile.entries):
        s = entry.score
        writer.writerow(
            [s.layer_name, i, s.kernel_side, repr(float(s.value)), s.defined, entry.strided]
        )


def profile_to_csv(profile: SymmetryProfile) -> str:
    buf = io.StringIO(newline="")
    write_profile_csv(profile, buf)
    return buf.getvalue()


def read_profile_csv(text: str, model: str = "") -> SymmetryProfile:
    entries = []
    for row in csv.DictReader(io.StringIO(text)):
        defined = row["defined"] == "True"
        entries.append(
            ProfileEntry(
                score=SymmetryScore(
                    value=float(row["score"]),
                    layer_name=row["layer"],
                    kernel_side=int(row["k"]),
                    defined=defined,
                ),
                strided=row["strided"] == "True",
            )
        )
    return SymmetryProfile(model=model, entries=tuple(entries))


def profile_to_json(profile: SymmetryProfile, input_digests: dict[str, str] | None = None) -> str:
    doc = {
        "tool_version": TOOL_VERSION,
        "model": profile.model,
        "inputs": input_digests or {},
        "layers": [
            {
                "layer": e.score.layer_name,
                "index": i,
                "k": e.score.kernel_side,
                "score": float(e.score.value) if e.score.defined else None,
                "defined": bool(e.score.defined),
                "strided": bool(e.strided),
            }
            for i, e in enumerate(profile.entries)
        ],
    }
    return json.dumps(doc, indent=2)


def read_profile_json(text: str) -> SymmetryProfile:
    doc = json.loads(text)
    entries = []
    for row in doc["layers"]:
        value = row["score"] if row["defined"] else float("nan")
        entries.append(
            ProfileEntry(
                score=SymmetryScore(
                    value=value,
                    layer_name=row["layer"],
                    kernel_side=row["k"],
                    defined=row["defined"],
                ),
                strided=row["strided"],
            )
        )
    return SymmetryProfile(model=doc["model"], entries=tuple(entries))


_BAR_W = 28
_GAP_W = 14
_CHART_H = 160
_TOP = 24
_LEFT = 42
_BOTTOM = 34


def emit_svg_chart(profile: SymmetryProfile, title: str | None = None) -> str:
    """One bar per layer on a [0, 1] axis; undefined scores become a gap marker."""
    if len(profile.entries) == 0:
        raise EmptyProfile("cannot chart an empty profile")
    n = len(profile.entries)
    width = _LEFT + n * (_BAR_W + _GAP_W) + 16
    height = _TOP + _CHART_H + _BOTTOM
    svg = ET.Element(
        "svg",
        {
            "xmlns": "http://www.w3.org/2000/svg",
            "version": "1.1",
            "width": str(width),
            "height": str(height),
            "viewBox": f"0 0 {width} {height}",
        },
    )
    ET.SubElement(svg, "title").text = title or f"mean-kernel symmetry: {profile.model}"
    base_y = _TOP + _CHART_H
    # y axis with 0/0.5/1 ticks
    ET.SubElement(svg, "line", {
        "x1": str(_LEFT - 6), "y1": str(base_y), "x2": str(width - 8), "y2": str(base_y),
        "stroke": "#333", "stroke-width": "1",
    })
    for frac in (0.0, 0.5, 1.0):
        y = base_y - frac * _CHART_H
        ET.SubElement(svg, "line", {
            "x1": str(_LEFT - 6), "y1": f"{y:.1f}", "x2": str(_LEFT), "y2": f"{y:.1f}",
            "stroke": "#333", "stroke-width": "1",
        })
        tick = ET.SubElement(svg, "text", {
            "x": str(_LEFT - 9), "y": f"{y + 4:.1f}", "font-size": "10",
            "text-anchor": "end", "font-family": "sans-serif",
        })
        tick.text = f"{frac:g}"
    for i, entry in enumerate(profile.entries):
        s = entry.score
        x = _LEFT + i * (_BAR_W + _GAP_W)
        cx = x + _BAR_W / 2
        if s.defined:
            h = s.value * _CHART_H
            if not math.isfinite(h):
                h = 0.0
            ET.SubElement(svg, "rect", {
                "x": str(x), "y": f"{base_y - h:.3f}",
                "width": str(_BAR_W), "height": f"{h:.3f}",
                "fill": "#4878a8" if not entry.strided else "#a85448",
            })
            value_label = ET.SubElement(svg, "text", {
                "x": f"{cx:.1f}", "y": f"{base_y - h - 4:.3f}", "font-size": "9",
                "text-anchor": "middle", "font-family": "sans-serif",
            })
            value_label.text = f"{s.value:.3f}"
        else:
            gap = ET.SubElement(svg, "text", {
                "x": f"{cx:.1f}", "y": f"{base_y - 6:.1f}", "font-size": "10",
                "text-anchor": "middle", "font-family": "sans-serif",
                "class": "undefined-score",
            })
            gap.text = "n/a"
        name_label = ET.SubElement(svg, "text", {
            "x": f"{cx:.1f}", "y": str(base_y + 14), "font-size": "9",
            "text-anchor": "middle", "font-family": "sans-serif",
        })
        name_label.text = display_name(entry)
    return ET.tostring(svg, encoding="unicode")
