"""Integer arithmetic of convolution window placement.

Strided convolutions can silently ignore padding on the bottom/right:
the first window always starts at padded coordinate 0, the last ends at
stride*(m-1) + k - 1, and whatever padding lies beyond that is never
touched. A layer that consumes more padding on one side than the other
trains against spatially biased zeros, which skews its mean kernel.
This module computes exact per-side consumption, lints whole layer
chains, and searches for the smallest input size that makes every
layer's consumption even.

All arithmetic here is exact integer math; dilation is fixed at 1.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import SchemaError, ShapeUnderflow, WindowTooLarge

PADDING_MODES = ("zero", "reflect", "partial_conv")

# Layer kinds that place windows and therefore consume padding.
WINDOWED_KINDS = ("conv2d", "maxpool", "blurpool")


@dataclass(frozen=True)
class ConvLayerSpec:
    """Window geometry of one conv or pooling layer.

    padding is per-side (top, bottom, left, right); per-side is the
    primitive so asymmetric hypotheticals are expressible, and
    :meth:`symmetric` is the everyday constructor.
    """

    kernel: tuple[int, int]
    stride: tuple[int, int] = (1, 1)
    padding: tuple[int, int, int, int] = (0, 0, 0, 0)
    padding_mode: str = "zero"

    def __post_init__(self):
        kh, kw = self.kernel
        sh, sw = self.stride
        if kh < 1 or kw < 1:
            raise SchemaError(f"kernel dims must be positive, got {self.kernel}")
        if sh < 1 or sw < 1:
            raise SchemaError(f"stride dims must be positive, got {self.stride}")
        if len(self.padding) != 4 or min(self.padding) < 0:
            raise SchemaError(f"padding must be 4 non-negative ints (t, b, l, r), got {self.padding}")
        if self.padding_mode not in PADDING_MODES:
            raise SchemaError(f"padding_mode must be one of {PADDING_MODES}, got {self.padding_mode!r}")
        if self.padding_mode == "reflect":
            t, b, l, r = self.padding
            if t >= kh or b >= kh or l >= kw or r >= kw:
                raise SchemaError("reflect padding must stay below the kernel extent on each side")

    @classmethod
    def symmetric(cls, kernel, stride=(1, 1), pad=0, padding_mode="zero") -> "ConvLayerSpec":
        """Same padding amount on all four sides."""
        return cls(tuple(kernel), tuple(stride), (pad, pad, pad, pad), padding_mode)


@dataclass(frozen=True)
class PaddingConsumption:
    """How much of the provided per-side padding any window actually covers."""

    used: tuple[int, int, int, int]      # top, bottom, left, right
    provided: tuple[int, int, int, int]
    uneven_vertical: bool
    uneven_horizontal: bool

    @property
    def uneven(self) -> bool:
        return self.uneven_vertical or self.uneven_horizontal


def output_size(n: int, k: int, s: int, p_lo: int, p_hi: int) -> int:
    """Number of window positions along one axis: floor((n + p_lo + p_hi - k) / s) + 1."""
    if n < 1:
        raise ShapeUnderflow(f"input extent must be >= 1, got {n}")
    if n + p_lo + p_hi < k:
        raise WindowTooLarge(f"window k={k} exceeds padded extent {n}+{p_lo}+{p_hi}")
    return (n + p_lo + p_hi - k) // s + 1


def _covered(c: int, k: int, s: int, m: int) -> bool:
    """Is padded coordinate c inside any of the m windows [s*j, s*j + k)?"""
    hi_j = min(m - 1, c // s)
    lo_j = max(0, -(-(c - k + 1) // s))
    return lo_j <= hi_j


def padding_consumption(n: int, k: int, s: int, p_lo: int, p_hi: int) -> tuple[int, int]:
    """Padding cells on the (low, high) side covered by at least one window.

    The first window covers padded coordinates [0, k), so the low side
    loses nothing; the last window ends at s*(m-1) + k - 1 and padding
    past that on the high side is simply never touched. For the common
    case (p <= k, s <= k) this equals (min(p_lo, k),
    clamp(s*(m-1) + k - p_lo - n, 0, p_hi)); the per-cell test also
    accounts for coverage gaps when the stride exceeds the kernel.
    """
    m = output_size(n, k, s, p_lo, p_hi)
    used_lo = sum(1 for c in range(p_lo) if _covered(c, k, s, m))
    used_hi = sum(1 for c in range(p_lo + n, p_lo + n + p_hi) if _covered(c, k, s, m))
    return used_lo, used_hi


def is_uneven(spec: ConvLayerSpec, input_hw: tuple[int, int]) -> PaddingConsumption:
    """Per-axis consumption of one layer on the given (h, w) input."""
    h, w = input_hw
    t, b, l, r = spec.padding
    used_t, used_b = padding_consumption(h, spec.kernel[0], spec.stride[0], t, b)
    used_l, used_r = padding_consumption(w, spec.kernel[1], spec.stride[1], l, r)
    return PaddingConsumption(
        used=(used_t, used_b, used_l, used_r),
        provided=spec.padding,
        uneven_vertical=used_t != used_b,
        uneven_horizontal=used_l != used_r,
    )


def layer_output_hw(spec: ConvLayerSpec, input_hw: tuple[int, int]) -> tuple[int, int]:
    h, w = input_hw
    t, b, l, r = spec.padding
    return (
        output_size(h, spec.kernel[0], spec.stride[0], t, b),
        output_size(w, spec.kernel[1], spec.stride[1], l, r),
    )


@dataclass(frozen=True)
class LintRow:
    """One layer's report line from propagate_and_lint."""

    name: str
    kind: str
    input_hw: tuple[int, int]
    output_hw: tuple[int, int]
    consumption: PaddingConsumption | None
    strided: bool
    flagged: bool
    padding_mode: str | None


def propagate_and_lint(manifest, input_hw: tuple[int, int] | None = None) -> list[LintRow]:
    """Thread spatial sizes through the layer chain and flag uneven layers.

    Windowed layers (conv2d, maxpool, blurpool) get a consumption
    breakdown; relu passes through; global_avg_pool collapses to 1x1;
    dense flattens and ends spatial tracking. Raises ShapeUnderflow when
    a window no longer fits an intermediate extent.
    """
    hw = tuple(input_hw) if input_hw is not None else manifest.input_hw
    rows: list[LintRow] = []
    spatial = True
    for layer in manifest.layers:
        if not spatial and layer.kind in WINDOWED_KINDS + ("global_avg_pool",):
            raise ShapeUnderflow(f"layer {layer.name!r}: no spatial extent left after flatten")
        if layer.kind in WINDOWED_KINDS:
            spec = layer.spec
            try:
                out_hw = layer_output_hw(spec, hw)
            except WindowTooLarge as exc:
                raise ShapeUnderflow(f"layer {layer.name!r}: {exc}") from exc
            cons = is_uneven(spec, hw)
            rows.append(
                LintRow(
                    name=layer.name,
                    kind=layer.kind,
                    input_hw=hw,
                    output_hw=out_hw,
                    consumption=cons,
                    strided=max(spec.stride) > 1,
                    flagged=cons.uneven,
                    padding_mode=spec.padding_mode,
                )
            )
            hw = out_hw
        elif layer.kind == "global_avg_pool":
            rows.append(LintRow(layer.name, layer.kind, hw, (1, 1), None, False, False, None))
            hw = (1, 1)
        elif layer.kind == "relu":
            rows.append(LintRow(layer.name, layer.kind, hw, hw, None, False, False, None))
        elif layer.kind == "dense":
            rows.append(LintRow(layer.name, layer.kind, hw, (1, 1), None, False, False, None))
            spatial = False
            hw = (1, 1)
        else:
            raise SchemaError(f"layer {layer.name!r}: unknown kind {layer.kind!r}")
    return rows


def suggest_input_size(manifest, base_hw: tuple[int, int], search_limit: int = 16):
    """Smallest (h, w) >= base with a flag-free lint report, or None.

    The two axes thread independently through the arithmetic, so each is
    searched upward on its own within base..base+search_limit.
    """
    if search_limit < 0:
        raise ValueError("search_limit must be >= 0")

    def axis_ok(hw: tuple[int, int], axis: int) -> bool:
        for row in propagate_and_lint(manifest, hw):
            if row.consumption is None:
                continue
            bad = row.consumption.uneven_vertical if axis == 0 else row.consumption.uneven_horizontal
            if bad:
                return False
        return True

    found: list[int | None] = [None, None]
    for axis in range(2):
        for delta in range(search_limit + 1):
            hw = list(base_hw)
            hw[axis] += delta
            try:
                ok = axis_ok((hw[0], hw[1]), axis)
            except ShapeUnderflow:
                continue
            if ok:
                found[axis] = base_hw[axis] + delta
                break
    if found[0] is None or found[1] is None:
        return None
    return (found[0], found[1])
