import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from kernsym.errors import EmptyProfile
from kernsym.reports import (
    emit_svg_chart,
    profile_to_csv,
    profile_to_json,
    read_profile_csv,
    read_profile_json,
)
from kernsym.symmetry import ProfileEntry, SymmetryProfile, SymmetryScore


def _profile(values, model="toy"):
    entries = []
    for i, v in enumerate(values):
        defined = v is not None
        entries.append(ProfileEntry(
            score=SymmetryScore(
                value=v if defined else float("nan"),
                layer_name=f"conv{i + 1}",
                kernel_side=3,
                defined=defined,
            ),
            strided=(i % 2 == 1),
        ))
    return SymmetryProfile(model=model, entries=tuple(entries))


def test_csv_round_trip_preserves_scores_exactly():
    profile = _profile([0.123456789012345678, 1.0, 1 - 6 * np.sqrt(2) / 14])
    text = profile_to_csv(profile)
    again = read_profile_csv(text, model="toy")
    for a, b in zip(profile.entries, again.entries):
        assert a.score.value == b.score.value  # bit-exact via repr round-trip
        assert a.score.layer_name == b.score.layer_name
        assert a.strided == b.strided


def test_csv_schema_header_and_rows():
    text = profile_to_csv(_profile([0.5, None]))
    lines = text.strip().splitlines()
    assert lines[0] == "layer,index,k,score,defined,strided"
    assert len(lines) == 3
    cells = lines[2].split(",")
    assert cells[0] == "conv2" and cells[4] == "False"
    assert math.isnan(float(cells[3]))


def test_json_round_trip():
    profile = _profile([0.987654321098765, None, 0.25])
    doc = profile_to_json(profile, input_digests={"weights.safetensors": "ab" * 32})
    again = read_profile_json(doc)
    assert again.model == "toy"
    assert len(again) == 3
    assert again.entries[0].score.value == profile.entries[0].score.value
    assert not again.entries[1].score.defined
    assert math.isnan(again.entries[1].score.value)
    assert again.entries[2].strided == profile.entries[2].strided


def test_json_undefined_is_null_not_nan():
    doc = profile_to_json(_profile([None]))
    assert "NaN" not in doc
    assert '"score": null' in doc


def test_svg_two_bars_for_two_layers():
    svg = emit_svg_chart(_profile([0.4, 0.9]))
    root = ET.fromstring(svg)  # well-formed XML
    ns = "{http://www.w3.org/2000/svg}"
    rects = root.findall(f".//{ns}rect")
    assert len(rects) == 2


def test_svg_full_score_bar_spans_chart_height():
    svg = emit_svg_chart(_profile([1.0]))
    root = ET.fromstring(svg)
    ns = "{http://www.w3.org/2000/svg}"
    rect = root.find(f".//{ns}rect")
    assert float(rect.get("height")) == pytest.approx(160.0)


def test_svg_undefined_scores_render_gap_marker():
    svg = emit_svg_chart(_profile([0.7, None]))
    root = ET.fromstring(svg)
    ns = "{http://www.w3.org/2000/svg}"
    assert len(root.findall(f".//{ns}rect")) == 1
    gaps = [t for t in root.findall(f".//{ns}text") if t.get("class") == "undefined-score"]
    assert len(gaps) == 1 and gaps[0].text == "n/a"


def test_svg_strided_layer_names_carry_asterisk():
    svg = emit_svg_chart(_profile([0.5, 0.5]))
    root = ET.fromstring(svg)
    ns = "{http://www.w3.org/2000/svg}"
    labels = [t.text for t in root.findall(f".//{ns}text")]
    assert "conv1" in labels
    assert "conv2*" in labels


def test_svg_empty_profile_raises():
    with pytest.raises(EmptyProfile):
        emit_svg_chart(SymmetryProfile(model="x", entries=()))


def test_json_carries_tool_version_and_digests():
    import json as json_mod

    doc = json_mod.loads(profile_to_json(_profile([0.5]), {"a": "1" * 64}))
    assert doc["tool_version"]
    assert doc["inputs"] == {"a": "1" * 64}
