"""A small exact CNN forward/backward engine.

Feature maps are (C, H, W) float64 arrays for a single image; batching
is a caller-side loop. Convolution is cross-correlation (no kernel
flip), matching mainstream frameworks; that matters here because the
surrounding analysis is reflection-sensitive. Reductions go through
numpy einsum without BLAS dispatch, so summation order is fixed and
runs reproduce bit-for-bit on one platform.

Padding modes:

* zero: constant zeros;
* reflect: mirror without repeating the edge element;
* partial_conv: zero padding, then each output is scaled by
  (kernel area) / (in-bounds input cells under that window), which
  exactly cancels the border deficit for uniform kernels.

Pooling: maxpool (padding acts as minus infinity, so it never wins),
blurpool (fixed 3x3 binomial filter, reflect padding, stride 2), and
global average pooling. Gradients are exact reverse mode; the maxpool
gradient routes to the first argmax cell in row-major order, and the
partial_conv scale factors are treated as constants.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .convarith import ConvLayerSpec
from .errors import (
    NoForwardCache,
    NonFiniteValues,
    ShapeMismatch,
    WindowTooLarge,
)
from .tensors import check_tensor4

BLUR_FILTER = np.outer([1.0, 2.0, 1.0], [1.0, 2.0, 1.0]) / 16.0
BLUR_SPEC = ConvLayerSpec(kernel=(3, 3), stride=(2, 2), padding=(1, 1, 1, 1), padding_mode="reflect")


def check_feature_map(x, name: str = "input") -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 3:
        raise ShapeMismatch(f"{name}: expected (C, H, W), got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NonFiniteValues(f"{name}: contains NaN or Inf")
    return np.ascontiguousarray(a)


def _reflect_indices(n: int, lo: int, hi: int) -> np.ndarray:
    """Source index for each padded coordinate, mirroring without edge repeat."""
    if lo > n - 1 or hi > n - 1:
        raise WindowTooLarge(f"reflect padding ({lo}, {hi}) needs extent > padding, got {n}")
    idx = np.arange(-lo, n + hi)
    idx = np.where(idx < 0, -idx, idx)
    idx = np.where(idx >= n, 2 * n - 2 - idx, idx)
    return idx


def _pad_forward(x: np.ndarray, spec: ConvLayerSpec, fill: float = 0.0):
    """Pad (C, H, W) per spec; returns (padded, cache for backward)."""
    t, b, l, r = spec.padding
    if spec.padding_mode == "reflect":
        rows = _reflect_indices(x.shape[1], t, b)
        cols = _reflect_indices(x.shape[2], l, r)
        return x[:, rows[:, None], cols[None, :]], (rows, cols)
    xp = np.pad(x, ((0, 0), (t, b), (l, r)), mode="constant", constant_values=fill)
    return xp, None


def _pad_backward(dxp: np.ndarray, x_shape, spec: ConvLayerSpec, cache) -> np.ndarray:
    t, b, l, r = spec.padding
    if spec.padding_mode == "reflect":
        rows, cols = cache
        dx = np.zeros(x_shape, dtype=np.float64)
        np.add.at(dx, (slice(None), rows[:, None], cols[None, :]), dxp)
        return dx
    h, w = x_shape[1], x_shape[2]
    return dxp[:, t : t + h, l : l + w]


def _windows(xp: np.ndarray, kernel, stride) -> np.ndarray:
    """Strided sliding windows of a padded map: (C, H_out, W_out, kh, kw)."""
    kh, kw = kernel
    if xp.shape[1] < kh or xp.shape[2] < kw:
        raise WindowTooLarge(
            f"window {kernel} exceeds padded extent {xp.shape[1]}x{xp.shape[2]}"
        )
    win = sliding_window_view(xp, (kh, kw), axis=(1, 2))
    return win[:, :: stride[0], :: stride[1], :, :]


def _partial_conv_scale(x_shape, spec: ConvLayerSpec) -> np.ndarray:
    """(kh*kw) / in-bounds-count per output position, shape (H_out, W_out)."""
    ones = np.ones((1, x_shape[1], x_shape[2]), dtype=np.float64)
    t, b, l, r = spec.padding
    op = np.pad(ones, ((0, 0), (t, b), (l, r)), mode="constant")
    counts = _windows(op, spec.kernel, spec.stride).sum(axis=(3, 4))[0]
    if np.any(counts == 0):
        raise WindowTooLarge("a window covers no input cells; reduce padding")
    return (spec.kernel[0] * spec.kernel[1]) / counts


class Layer:
    """Base layer: forward caches whatever backward needs."""

    name = "layer"

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dy: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def params(self) -> dict[str, np.ndarray]:
        return {}

    def grads(self) -> dict[str, np.ndarray]:
        return {}

    def _need_cache(self, cache):
        if cache is None:
            raise NoForwardCache(f"{self.name}: backward before forward")
        return cache


class Conv2d(Layer):
    def __init__(self, weight: np.ndarray, bias: np.ndarray | None, spec: ConvLayerSpec, name="conv"):
        self.w = check_tensor4(weight, name)
        self.b = np.zeros(self.w.shape[0]) if bias is None else np.asarray(bias, dtype=np.float64)
        if self.b.shape != (self.w.shape[0],):
            raise ShapeMismatch(f"{name}: bias shape {self.b.shape} vs {self.w.shape[0]} neurons")
        if (self.w.shape[2], self.w.shape[3]) != tuple(spec.kernel):
            raise ShapeMismatch(f"{name}: weight kernel {self.w.shape[2:]} vs spec {spec.kernel}")
        self.spec = spec
        self.name = name
        self.dw = np.zeros_like(self.w)
        self.db = np.zeros_like(self.b)
        self._cache = None

    def forward(self, x):
        if x.ndim != 3 or x.shape[0] != self.w.shape[1]:
            raise ShapeMismatch(
                f"{self.name}: input {x.shape} vs {self.w.shape[1]} weight channels"
            )
        xp, pad_cache = _pad_forward(x, self.spec)
        win = _windows(xp, self.spec.kernel, self.spec.stride)
        y = np.einsum("chwab,ncab->nhw", win, self.w)
        scale = None
        if self.spec.padding_mode == "partial_conv":
            scale = _partial_conv_scale(x.shape, self.spec)
            y *= scale[None, :, :]
        y += self.b[:, None, None]
        self._cache = (x.shape, xp.shape, win, pad_cache, scale)
        return y

    def backward(self, dy):
        x_shape, xp_shape, win, pad_cache, scale = self._need_cache(self._cache)
        self.db = np.einsum("nhw->n", dy)
        if scale is not None:
            dy = dy * scale[None, :, :]
        self.dw = np.einsum("nhw,chwab->ncab", dy, win)
        dxp = np.zeros(xp_shape, dtype=np.float64)
        sh, sw = self.spec.stride
        kh, kw = self.spec.kernel
        h_out, w_out = dy.shape[1], dy.shape[2]
        for a in range(kh):
            for b in range(kw):
                patch = np.einsum("nhw,nc->chw", dy, self.w[:, :, a, b])
                dxp[:, a : a + sh * h_out : sh, b : b + sw * w_out : sw] += patch
        return _pad_backward(dxp, x_shape, self.spec, pad_cache)

    def params(self):
        return {"w": self.w, "b": self.b}

    def grads(self):
        return {"w": self.dw, "b": self.db}


class ReLU(Layer):
    def __init__(self, name="relu"):
        self.name = name
        self._mask = None

    def forward(self, x):
        self._mask = x > 0
        return x * self._mask

    def backward(self, dy):
        mask = self._need_cache(self._mask)
        return dy * mask


class MaxPool(Layer):
    """Windowed max; padded cells act as minus infinity and never win."""

    def __init__(self, spec: ConvLayerSpec, name="maxpool"):
        self.spec = spec
        self.name = name
        self._cache = None

    def forward(self, x):
        xp, _ = _pad_forward(x, ConvLayerSpec(self.spec.kernel, self.spec.stride,
                                              self.spec.padding, "zero"), fill=-np.inf)
        win = _windows(xp, self.spec.kernel, self.spec.stride)
        c, h_out, w_out, kh, kw = win.shape
        flat = win.reshape(c, h_out, w_out, kh * kw)
        arg = flat.argmax(axis=3)
        y = np.take_along_axis(flat, arg[..., None], axis=3)[..., 0]
        if not np.all(np.isfinite(y)):
            raise WindowTooLarge(f"{self.name}: a window covers no input cells")
        self._cache = (x.shape, xp.shape, arg)
        return y

    def backward(self, dy):
        x_shape, xp_shape, arg = self._need_cache(self._cache)
        kh, kw = self.spec.kernel
        sh, sw = self.spec.stride
        c, h_out, w_out = dy.shape
        ci, hi, wi = np.meshgrid(
            np.arange(c), np.arange(h_out), np.arange(w_out), indexing="ij"
        )
        rows = hi * sh + arg // kw
        cols = wi * sw + arg % kw
        dxp = np.zeros(xp_shape, dtype=np.float64)
        np.add.at(dxp, (ci, rows, cols), dy)
        t, _, l, _ = self.spec.padding
        return dxp[:, t : t + x_shape[1], l : l + x_shape[2]]


class BlurPool(Layer):
    """Antialiased downsampling: 3x3 binomial low-pass, reflect pad, stride 2."""

    def __init__(self, name="blurpool"):
        self.spec = BLUR_SPEC
        self.name = name
        self._cache = None

    def forward(self, x):
        xp, pad_cache = _pad_forward(x, self.spec)
        win = _windows(xp, self.spec.kernel, self.spec.stride)
        y = np.einsum("chwab,ab->chw", win, BLUR_FILTER)
        self._cache = (x.shape, xp.shape, pad_cache)
        return y

    def backward(self, dy):
        x_shape, xp_shape, pad_cache = self._need_cache(self._cache)
        dxp = np.zeros(xp_shape, dtype=np.float64)
        sh, sw = self.spec.stride
        h_out, w_out = dy.shape[1], dy.shape[2]
        for a in range(3):
            for b in range(3):
                dxp[:, a : a + sh * h_out : sh, b : b + sw * w_out : sw] += dy * BLUR_FILTER[a, b]
        return _pad_backward(dxp, x_shape, self.spec, pad_cache)


class GlobalAvgPool(Layer):
    def __init__(self, name="gap"):
        self.name = name
        self._shape = None

    def forward(self, x):
        self._shape = x.shape
        return x.mean(axis=(1, 2), keepdims=True)

    def backward(self, dy):
        shape = self._need_cache(self._shape)
        scale = 1.0 / (shape[1] * shape[2])
        return np.broadcast_to(dy * scale, shape).copy()


class Dense(Layer):
    """Fully connected layer; flattens whatever comes in, row-major."""

    def __init__(self, weight: np.ndarray, bias: np.ndarray | None, name="dense"):
        self.w = np.asarray(weight, dtype=np.float64)
        if self.w.ndim != 2:
            raise ShapeMismatch(f"{name}: dense weight must be rank-2, got {self.w.shape}")
        self.b = np.zeros(self.w.shape[0]) if bias is None else np.asarray(bias, dtype=np.float64)
        if self.b.shape != (self.w.shape[0],):
            raise ShapeMismatch(f"{name}: bias shape {self.b.shape} vs {self.w.shape[0]} units")
        self.name = name
        self.dw = np.zeros_like(self.w)
        self.db = np.zeros_like(self.b)
        self._cache = None

    def forward(self, x):
        xf = x.ravel()
        if xf.shape[0] != self.w.shape[1]:
            raise ShapeMismatch(
                f"{self.name}: {xf.shape[0]} inputs vs weight expecting {self.w.shape[1]}"
            )
        self._cache = (x.shape, xf)
        return self.w @ xf + self.b

    def backward(self, dy):
        x_shape, xf = self._need_cache(self._cache)
        self.dw = np.outer(dy, xf)
        self.db = dy.copy()
        return (self.w.T @ dy).reshape(x_shape)

    def params(self):
        return {"w": self.w, "b": self.b}

    def grads(self):
        return {"w": self.dw, "b": self.db}


class Model:
    """An ordered layer chain built from a manifest and a tensor store.

    A model instance is single-writer during forward/backward (layers
    cache intermediates); run one instance per worker.
    """

    def __init__(self, layers: list[Layer]):
        self.layers = layers

    @classmethod
    def from_manifest(cls, manifest, store) -> "Model":
        from .manifest import validate_bindings

        validate_bindings(manifest, store)
        layers: list[Layer] = []
        for ld in manifest.layers:
            if ld.kind == "conv2d":
                bias = store.to_array(ld.bias) if ld.bias else None
                layers.append(Conv2d(store.to_array(ld.weight), bias, ld.spec, name=ld.name))
            elif ld.kind == "maxpool":
                layers.append(MaxPool(ld.spec, name=ld.name))
            elif ld.kind == "blurpool":
                layers.append(BlurPool(name=ld.name))
            elif ld.kind == "relu":
                layers.append(ReLU(name=ld.name))
            elif ld.kind == "global_avg_pool":
                layers.append(GlobalAvgPool(name=ld.name))
            elif ld.kind == "dense":
                bias = store.to_array(ld.bias) if ld.bias else None
                layers.append(Dense(store.to_array(ld.weight), bias, name=ld.name))
        return cls(layers)

    def forward(self, x) -> np.ndarray:
        out = check_feature_map(x)
        for layer in self.layers:
            out = layer.forward(out)
        return out

    def backward(self, dy: np.ndarray) -> np.ndarray:
        grad = np.asarray(dy, dtype=np.float64)
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def parameters(self) -> list[tuple[str, str, np.ndarray]]:
        """(layer_name, param_name, array) triples, in layer order."""
        out = []
        for layer in self.layers:
            for pname, arr in layer.params().items():
                out.append((layer.name, pname, arr))
        return out

    def gradients(self) -> list[tuple[str, str, np.ndarray]]:
        out = []
        for layer in self.layers:
            for pname, arr in layer.grads().items():
                out.append((layer.name, pname, arr))
        return out


def conv2d_forward(x, weight, bias, spec: ConvLayerSpec) -> np.ndarray:
    """One-shot convolution of a (C, H, W) map; see Conv2d for semantics."""
    return Conv2d(weight, bias, spec).forward(check_feature_map(x))


def pool_forward(x, kind: str, spec: ConvLayerSpec | None = None) -> np.ndarray:
    """One-shot pooling: kind is maxpool, blurpool, or global_avg_pool."""
    xm = check_feature_map(x)
    if kind == "maxpool":
        if spec is None:
            raise ShapeMismatch("maxpool needs a ConvLayerSpec")
        return MaxPool(spec).forward(xm)
    if kind == "blurpool":
        return BlurPool().forward(xm)
    if kind == "global_avg_pool":
        return GlobalAvgPool().forward(xm)
    raise ShapeMismatch(f"unknown pooling kind {kind!r}")


def mse_loss(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean squared error over all elements; returns (loss, dloss/dpred)."""
    t = np.asarray(target, dtype=np.float64)
    if pred.shape != t.shape:
        raise ShapeMismatch(f"prediction {pred.shape} vs target {t.shape}")
    err = pred - t
    loss = float(np.mean(err * err))
    return loss, (2.0 / err.size) * err


def softmax_cross_entropy(logits: np.ndarray, label: int) -> tuple[float, np.ndarray]:
    """Cross entropy of softmax(logits) against an integer label."""
    z = logits - np.max(logits)
    e = np.exp(z)
    p = e / np.sum(e)
    loss = float(-np.log(p[label]))
    dlogits = p.copy()
    dlogits[label] -= 1.0
    return loss, dlogits
