"""Model manifests: the architecture facts weight containers do not carry.

A manifest is a UTF-8 JSON document:

    {
      "model": "name",
      "input": {"h": 224, "w": 224, "c": 3},
      "layers": [
        {"name": "conv1", "kind": "conv2d", "kernel": [3, 3],
         "stride": [2, 2], "padding": [1, 1, 1, 1], "padding_mode": "zero",
         "weight": "conv1.weight", "bias": "conv1.bias"},
        {"name": "relu1", "kind": "relu"},
        ...
      ]
    }

Layer kinds: conv2d, maxpool, blurpool, relu, global_avg_pool, dense.
stride defaults to [1, 1], padding to [0, 0, 0, 0] (top, bottom, left,
right), padding_mode to "zero". blurpool is parameter-free: a fixed 3x3
binomial filter, stride 2, reflect padding 1; the fields may be omitted
or must match those values. The layer graph is a single chain.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .convarith import ConvLayerSpec, PADDING_MODES, layer_output_hw
from .errors import BindingError, SchemaError, ShapeUnderflow, WindowTooLarge

LAYER_KINDS = ("conv2d", "maxpool", "blurpool", "relu", "global_avg_pool", "dense")

BLURPOOL_SPEC = ConvLayerSpec(
    kernel=(3, 3), stride=(2, 2), padding=(1, 1, 1, 1), padding_mode="reflect"
)


@dataclass(frozen=True)
class LayerDef:
    name: str
    kind: str
    spec: ConvLayerSpec | None = None
    weight: str | None = None
    bias: str | None = None


@dataclass(frozen=True)
class ModelManifest:
    model: str
    input_hw: tuple[int, int]
    input_channels: int
    layers: tuple[LayerDef, ...]


def _expect(cond: bool, idx: int, field: str, msg: str) -> None:
    if not cond:
        raise SchemaError(f"layer {idx} field {field!r}: {msg}")


def _int_pair(value, idx: int, field: str) -> tuple[int, int]:
    _expect(
        isinstance(value, list) and len(value) == 2 and all(isinstance(v, int) for v in value),
        idx, field, f"expected [int, int], got {value!r}",
    )
    return (value[0], value[1])


def _parse_layer(obj, idx: int) -> LayerDef:
    if not isinstance(obj, dict):
        raise SchemaError(f"layer {idx} field 'layer': expected an object, got {type(obj).__name__}")
    name = obj.get("name")
    _expect(isinstance(name, str) and name != "", idx, "name", "required non-empty string")
    kind = obj.get("kind")
    _expect(kind in LAYER_KINDS, idx, "kind", f"must be one of {LAYER_KINDS}, got {kind!r}")

    weight = obj.get("weight")
    bias = obj.get("bias")
    if weight is not None:
        _expect(isinstance(weight, str), idx, "weight", "must be a string")
    if bias is not None:
        _expect(isinstance(bias, str), idx, "bias", "must be a string")

    spec = None
    if kind in ("conv2d", "maxpool"):
        _expect("kernel" in obj, idx, "kernel", f"required for kind {kind!r}")
        kernel = _int_pair(obj["kernel"], idx, "kernel")
        stride = _int_pair(obj.get("stride", [1, 1]), idx, "stride")
        padding = obj.get("padding", [0, 0, 0, 0])
        _expect(
            isinstance(padding, list) and len(padding) == 4 and all(isinstance(v, int) for v in padding),
            idx, "padding", f"expected [t, b, l, r], got {padding!r}",
        )
        mode = obj.get("padding_mode", "zero")
        _expect(mode in PADDING_MODES, idx, "padding_mode", f"must be one of {PADDING_MODES}")
        try:
            spec = ConvLayerSpec(kernel, stride, tuple(padding), mode)
        except SchemaError as exc:
            raise SchemaError(f"layer {idx} field 'padding': {exc}") from exc
    elif kind == "blurpool":
        for field, fixed in (
            ("kernel", [3, 3]),
            ("stride", [2, 2]),
            ("padding", [1, 1, 1, 1]),
            ("padding_mode", "reflect"),
        ):
            if field in obj:
                _expect(obj[field] == fixed, idx, field, f"blurpool is fixed to {fixed}")
        spec = BLURPOOL_SPEC

    if kind == "conv2d":
        _expect(weight is not None, idx, "weight", "required for conv2d")
    if kind == "dense":
        _expect(weight is not None, idx, "weight", "required for dense")
    if kind in ("maxpool", "blurpool", "relu", "global_avg_pool"):
        _expect(weight is None and bias is None, idx, "weight", f"{kind} takes no parameters")

    return LayerDef(name=name, kind=kind, spec=spec, weight=weight, bias=bias)


def parse_manifest(text: str, store=None) -> ModelManifest:
    """Parse and validate a manifest; with a store, also check bindings.

    Structural problems raise SchemaError naming the layer index and
    field. Binding problems (missing tensor, wrong rank, kernel size not
    matching the bound weight) raise BindingError naming the tensor.
    Channel-chain mismatches across layers are SchemaErrors.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"manifest is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaError("manifest must be a JSON object")
    model = doc.get("model")
    if not isinstance(model, str) or not model:
        raise SchemaError("field 'model': required non-empty string")
    inp = doc.get("input")
    if (
        not isinstance(inp, dict)
        or not all(isinstance(inp.get(k), int) and inp[k] >= 1 for k in ("h", "w", "c"))
    ):
        raise SchemaError("field 'input': expected {\"h\": int, \"w\": int, \"c\": int}, all >= 1")
    layers_doc = doc.get("layers")
    if not isinstance(layers_doc, list):
        raise SchemaError("field 'layers': expected a list")

    layers = tuple(_parse_layer(obj, i) for i, obj in enumerate(layers_doc))
    seen = set()
    for i, layer in enumerate(layers):
        if layer.name in seen:
            raise SchemaError(f"layer {i} field 'name': duplicate layer name {layer.name!r}")
        seen.add(layer.name)

    manifest = ModelManifest(
        model=model,
        input_hw=(inp["h"], inp["w"]),
        input_channels=inp["c"],
        layers=layers,
    )
    if store is not None:
        validate_bindings(manifest, store)
    return manifest


def _bound_shape(store, name: str, rank: int, layer_name: str) -> tuple[int, ...]:
    if name not in store:
        raise BindingError(f"layer {layer_name!r}: tensor {name!r} not in store")
    shape = store.entry(name).shape
    if len(shape) != rank:
        raise BindingError(
            f"layer {layer_name!r}: tensor {name!r} has rank {len(shape)}, expected {rank}"
        )
    return shape


def validate_bindings(manifest: ModelManifest, store) -> None:
    """Check every binding resolves and the channel chain threads end to end."""
    c = manifest.input_channels
    hw: tuple[int, int] | None = manifest.input_hw
    for idx, layer in enumerate(manifest.layers):
        if hw is None and layer.kind in ("conv2d", "maxpool", "blurpool", "global_avg_pool"):
            raise SchemaError(f"layer {idx} field 'kind': {layer.kind} after flatten has no spatial input")
        if layer.kind == "conv2d":
            shape = _bound_shape(store, layer.weight, 4, layer.name)
            if (shape[2], shape[3]) != layer.spec.kernel:
                raise BindingError(
                    f"layer {layer.name!r}: tensor {layer.weight!r} kernel {shape[2:]} "
                    f"does not match declared {layer.spec.kernel}"
                )
            if shape[1] != c:
                raise SchemaError(
                    f"layer {idx} field 'weight': expects {shape[1]} input channels, "
                    f"chain provides {c}"
                )
            if layer.bias is not None:
                bshape = _bound_shape(store, layer.bias, 1, layer.name)
                if bshape[0] != shape[0]:
                    raise BindingError(
                        f"layer {layer.name!r}: bias {layer.bias!r} length {bshape[0]} "
                        f"does not match {shape[0]} neurons"
                    )
            c = shape[0]
        elif layer.kind == "dense":
            shape = _bound_shape(store, layer.weight, 2, layer.name)
            in_features = c if hw is None else c * hw[0] * hw[1]
            if shape[1] != in_features:
                raise SchemaError(
                    f"layer {idx} field 'weight': expects {shape[1]} input features, "
                    f"chain provides {in_features}"
                )
            if layer.bias is not None:
                bshape = _bound_shape(store, layer.bias, 1, layer.name)
                if bshape[0] != shape[0]:
                    raise BindingError(
                        f"layer {layer.name!r}: bias {layer.bias!r} length {bshape[0]} "
                        f"does not match {shape[0]} units"
                    )
            c = shape[0]
            hw = None
            continue
        if hw is not None and layer.spec is not None:
            try:
                hw = layer_output_hw(layer.spec, hw)
            except WindowTooLarge as exc:
                raise SchemaError(f"layer {idx} field 'kernel': {exc}") from exc
        elif layer.kind == "global_avg_pool":
            hw = (1, 1)
        if hw is not None and min(hw) < 1:
            raise ShapeUnderflow(f"layer {layer.name!r}: spatial extent shrank below 1")
