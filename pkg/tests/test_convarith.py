import json

import numpy as np
import pytest

from kernsym.convarith import (
    ConvLayerSpec,
    is_uneven,
    output_size,
    padding_consumption,
    propagate_and_lint,
    suggest_input_size,
)
from kernsym.errors import SchemaError, ShapeUnderflow, WindowTooLarge
from kernsym.manifest import parse_manifest

from oracles import enumerate_consumption


def _manifest(layers, h=224, w=224):
    return parse_manifest(json.dumps({
        "model": "m", "input": {"h": h, "w": w, "c": 3}, "layers": layers,
    }))


def test_output_size_stride2_224():
    assert output_size(224, 3, 2, 1, 1) == 112


def test_output_size_same_convolution():
    assert output_size(5, 3, 1, 1, 1) == 5


def test_output_size_stride2_225():
    assert output_size(225, 3, 2, 1, 1) == 113


def test_output_size_window_too_large():
    with pytest.raises(WindowTooLarge):
        output_size(2, 5, 1, 1, 1)


def test_output_size_monotone_in_extent():
    prev = 0
    for n in range(7, 64):
        m = output_size(n, 7, 3, 2, 1)
        assert m >= prev
        prev = m


def test_consumption_stride2_224_uses_no_right_padding():
    assert padding_consumption(224, 3, 2, 1, 1) == (1, 0)


def test_consumption_stride2_225_even():
    assert padding_consumption(225, 3, 2, 1, 1) == (1, 1)


def test_consumption_stride1_same_touches_both_sides():
    assert padding_consumption(5, 3, 1, 1, 1) == (1, 1)


def test_consumption_7x7_stride2_pad3():
    assert padding_consumption(224, 7, 2, 3, 3) == (3, 2)


def test_consumption_matches_window_enumeration():
    for n in range(1, 33):
        for k in range(1, 8):
            for s in range(1, 5):
                for p_lo in range(4):
                    for p_hi in range(4):
                        if n + p_lo + p_hi < k:
                            with pytest.raises(WindowTooLarge):
                                padding_consumption(n, k, s, p_lo, p_hi)
                            continue
                        m, lo, hi = enumerate_consumption(n, k, s, p_lo, p_hi)
                        assert output_size(n, k, s, p_lo, p_hi) == m
                        assert padding_consumption(n, k, s, p_lo, p_hi) == (lo, hi)


def test_used_never_exceeds_provided():
    rng = np.random.default_rng(0)
    for _ in range(500):
        n = int(rng.integers(1, 80))
        k = int(rng.integers(1, 8))
        s = int(rng.integers(1, 5))
        p_lo, p_hi = int(rng.integers(0, 4)), int(rng.integers(0, 4))
        if n + p_lo + p_hi < k:
            continue
        lo, hi = padding_consumption(n, k, s, p_lo, p_hi)
        assert 0 <= lo <= p_lo and 0 <= hi <= p_hi


def test_stride1_symmetric_padding_never_uneven():
    for n in range(3, 40):
        for k in (1, 3, 5, 7):
            for p in range(0, 3):
                if n + 2 * p < k:
                    continue
                lo, hi = padding_consumption(n, k, 1, p, p)
                assert lo == hi


def test_is_uneven_axes():
    spec = ConvLayerSpec.symmetric((3, 3), stride=(2, 2), pad=1)
    cons = is_uneven(spec, (224, 225))
    assert cons.uneven_vertical and not cons.uneven_horizontal
    assert cons.used == (1, 0, 1, 1)


def test_spec_rejects_reflect_padding_at_kernel_extent():
    with pytest.raises(SchemaError):
        ConvLayerSpec(kernel=(3, 3), padding=(3, 0, 0, 0), padding_mode="reflect")


def test_spec_rejects_bad_mode():
    with pytest.raises(SchemaError):
        ConvLayerSpec(kernel=(3, 3), padding_mode="wrap")


def test_lint_single_strided_conv_at_224():
    manifest = _manifest([
        {"name": "conv1", "kind": "conv2d", "kernel": [3, 3], "stride": [2, 2],
         "padding": [1, 1, 1, 1], "weight": "w"},
    ])
    rows = propagate_and_lint(manifest, (224, 224))
    assert len(rows) == 1
    assert rows[0].flagged and rows[0].strided
    assert rows[0].output_hw == (112, 112)


def test_lint_all_stride1_has_no_flags():
    manifest = _manifest([
        {"name": "conv1", "kind": "conv2d", "kernel": [3, 3], "padding": [1, 1, 1, 1], "weight": "a"},
        {"name": "relu1", "kind": "relu"},
        {"name": "conv2", "kind": "conv2d", "kernel": [5, 5], "padding": [2, 2, 2, 2], "weight": "b"},
    ])
    rows = propagate_and_lint(manifest, (224, 224))
    assert not any(r.flagged for r in rows)


def test_lint_resnet_style_chain_matches_enumeration():
    manifest = _manifest([
        {"name": "conv1", "kind": "conv2d", "kernel": [7, 7], "stride": [2, 2],
         "padding": [3, 3, 3, 3], "weight": "w1"},
        {"name": "pool1", "kind": "maxpool", "kernel": [3, 3], "stride": [2, 2],
         "padding": [1, 1, 1, 1]},
        {"name": "stage2", "kind": "conv2d", "kernel": [3, 3], "stride": [2, 2],
         "padding": [1, 1, 1, 1], "weight": "w2"},
        {"name": "stage3", "kind": "conv2d", "kernel": [3, 3], "stride": [2, 2],
         "padding": [1, 1, 1, 1], "weight": "w3"},
        {"name": "stage4", "kind": "conv2d", "kernel": [3, 3], "stride": [2, 2],
         "padding": [1, 1, 1, 1], "weight": "w4"},
    ])
    rows = propagate_and_lint(manifest, (224, 224))
    n = 224
    for row in rows:
        k, s, p = row.kind, row.name, None
        kk = {"conv1": 7, "pool1": 3}.get(row.name, 3)
        pp = {"conv1": 3, "pool1": 1}.get(row.name, 1)
        m, lo, hi = enumerate_consumption(n, kk, 2, pp, pp)
        assert row.flagged == (lo != hi)
        assert row.output_hw == (m, m)
        n = m
    assert all(r.flagged for r in rows)  # every stride-2 layer is uneven at 224


def test_lint_shape_underflow():
    manifest = _manifest([
        {"name": "conv1", "kind": "conv2d", "kernel": [7, 7], "weight": "w"},
    ], h=4, w=4)
    with pytest.raises(ShapeUnderflow):
        propagate_and_lint(manifest, (4, 4))


def test_suggest_single_stride2_layer_wants_225():
    manifest = _manifest([
        {"name": "conv1", "kind": "conv2d", "kernel": [3, 3], "stride": [2, 2],
         "padding": [1, 1, 1, 1], "weight": "w"},
    ])
    assert suggest_input_size(manifest, (224, 224)) == (225, 225)


def test_suggest_keeps_already_even_base():
    manifest = _manifest([
        {"name": "conv1", "kind": "conv2d", "kernel": [3, 3], "padding": [1, 1, 1, 1], "weight": "w"},
    ])
    assert suggest_input_size(manifest, (224, 224)) == (224, 224)


def test_suggest_two_stacked_stride2_layers_confirmed_by_scan():
    layers = [
        {"name": "conv1", "kind": "conv2d", "kernel": [3, 3], "stride": [2, 2],
         "padding": [1, 1, 1, 1], "weight": "w1"},
        {"name": "conv2", "kind": "conv2d", "kernel": [3, 3], "stride": [2, 2],
         "padding": [1, 1, 1, 1], "weight": "w2"},
    ]
    manifest = _manifest(layers)
    got = suggest_input_size(manifest, (224, 224))

    def flags_at(n):
        rows = propagate_and_lint(manifest, (n, n))
        return any(r.flagged for r in rows)

    expected = next(n for n in range(224, 241) if not flags_at(n))
    assert got == (expected, expected)


def test_suggest_returns_none_when_unfixable():
    # right/bottom padding is never provided, so consumption stays uneven at any size
    manifest = _manifest([
        {"name": "conv1", "kind": "conv2d", "kernel": [3, 3], "stride": [2, 2],
         "padding": [1, 0, 1, 0], "weight": "w"},
    ])
    assert suggest_input_size(manifest, (224, 224), search_limit=16) is None
