"""Fixed-point quantization and the bit-serial slice/stream decomposition.

Values are quantized to integer codes, weights are split into unsigned
slices on a positive or negative channel (differential mapping), inputs are
split into unsigned streams of their two's-complement pattern, and
shift-and-add recombines per-slice/per-stream partial products.
"""

from dataclasses import dataclass

import numpy as np

POSITIVE = "positive"
NEGATIVE = "negative"


@dataclass(frozen=True)
class FxpFormat:
    """Fixed-point format: total_bits wide, frac_bits of fraction."""

    total_bits: int
    frac_bits: int
    signed: bool = True

    def __post_init__(self):
        if not 1 <= self.total_bits <= 32:
            raise ValueError(f"total_bits must be in [1, 32], got {self.total_bits}")
        if not 0 <= self.frac_bits < self.total_bits:
            raise ValueError(
                f"frac_bits must be in [0, total_bits), got {self.frac_bits}"
            )

    @property
    def min_code(self) -> int:
        return -(1 << (self.total_bits - 1)) if self.signed else 0

    @property
    def max_code(self) -> int:
        if self.signed:
            return (1 << (self.total_bits - 1)) - 1
        return (1 << self.total_bits) - 1

    @property
    def resolution(self) -> float:
        return 2.0 ** (-self.frac_bits)

    @property
    def min_value(self) -> float:
        return self.min_code * self.resolution

    @property
    def max_value(self) -> float:
        return self.max_code * self.resolution


@dataclass(frozen=True)
class SliceScheme:
    """How weight and input codes decompose into slices and streams."""

    weight_bits: int
    slice_width: int
    input_bits: int
    stream_width: int

    def __post_init__(self):
        for name in ("weight_bits", "slice_width", "input_bits", "stream_width"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.weight_bits % self.slice_width:
            raise ValueError(
                f"slice_width {self.slice_width} does not divide "
                f"weight_bits {self.weight_bits}"
            )
        if self.input_bits % self.stream_width:
            raise ValueError(
                f"stream_width {self.stream_width} does not divide "
                f"input_bits {self.input_bits}"
            )

    @property
    def n_slices(self) -> int:
        return self.weight_bits // self.slice_width

    @property
    def n_streams(self) -> int:
        return self.input_bits // self.stream_width

    @property
    def slice_levels(self) -> int:
        """Distinct values a slice can take (2^slice_width)."""
        return 1 << self.slice_width

    @property
    def stream_levels(self) -> int:
        return 1 << self.stream_width


@dataclass(frozen=True)
class SlicedValue:
    """Little-endian unsigned slices of a weight magnitude on one channel."""

    slices: tuple
    sign_channel: str

    def magnitude(self, slice_width: int) -> int:
        return sum(s << (k * slice_width) for k, s in enumerate(self.slices))


@dataclass
class QuantStats:
    """Diagnostic counters for quantization (saturation is silent by contract)."""

    saturated: int = 0
    total: int = 0


def quantize(x, fmt: FxpFormat, stats: QuantStats | None = None):
    """Quantize real values to integer codes.

    Round-to-nearest-even of x * 2^frac_bits, saturated to the format range.
    Accepts scalars or arrays; returns int64 codes of the same shape.
    """
    x = np.asarray(x, dtype=np.float64)
    scaled = np.round(x * (1 << fmt.frac_bits))
    codes = np.clip(scaled, fmt.min_code, fmt.max_code).astype(np.int64)
    if stats is not None:
        stats.total += int(x.size)
        stats.saturated += int(
            np.count_nonzero((scaled < fmt.min_code) | (scaled > fmt.max_code))
        )
    return codes if codes.ndim else int(codes)


def dequantize(codes, fmt: FxpFormat):
    """Map integer codes back to real values (codes * 2^-frac_bits)."""
    out = np.asarray(codes, dtype=np.float64) * fmt.resolution
    return out if out.ndim else float(out)


def _check_weight_range(code, scheme: SliceScheme):
    limit = 1 << (scheme.weight_bits - 1)
    bad = np.abs(np.asarray(code)) >= limit
    if np.any(bad):
        raise ValueError(
            f"weight code magnitude must be < 2^{scheme.weight_bits - 1}"
        )


def _check_input_range(code, scheme: SliceScheme):
    lo = -(1 << (scheme.input_bits - 1))
    hi = (1 << (scheme.input_bits - 1)) - 1
    arr = np.asarray(code)
    if np.any((arr < lo) | (arr > hi)):
        raise ValueError(f"input code must be in [{lo}, {hi}]")


def slice_weight(code: int, scheme: SliceScheme):
    """Split a signed weight code into (positive, negative) channel slices.

    The magnitude goes on the channel matching the sign, little-endian;
    the other channel is all zeros. At most one channel is nonzero.
    """
    _check_weight_range(code, scheme)
    mag = abs(int(code))
    chunks = tuple(
        (mag >> (k * scheme.slice_width)) & (scheme.slice_levels - 1)
        for k in range(scheme.n_slices)
    )
    zeros = (0,) * scheme.n_slices
    if code >= 0:
        return SlicedValue(chunks, POSITIVE), SlicedValue(zeros, NEGATIVE)
    return SlicedValue(zeros, POSITIVE), SlicedValue(chunks, NEGATIVE)


def stream_input(code: int, scheme: SliceScheme):
    """Split a signed input code into unsigned streams, little-endian.

    Streams are chunks of the two's-complement bit pattern; recombination
    interprets the most significant stream's top bit with negative weight.
    """
    _check_input_range(code, scheme)
    pattern = int(code) & ((1 << scheme.input_bits) - 1)
    return tuple(
        (pattern >> (s * scheme.stream_width)) & (scheme.stream_levels - 1)
        for s in range(scheme.n_streams)
    )


def slice_magnitudes(mags, scheme: SliceScheme):
    """Vectorized little-endian slicing of nonnegative magnitudes.

    Returns an array of shape (n_slices, *mags.shape) of unsigned slice values.
    """
    mags = np.asarray(mags, dtype=np.int64)
    if np.any(mags < 0):
        raise ValueError("magnitudes must be nonnegative")
    shifts = np.arange(scheme.n_slices, dtype=np.int64) * scheme.slice_width
    shape = (scheme.n_slices,) + (1,) * mags.ndim
    return (mags >> shifts.reshape(shape)) & (scheme.slice_levels - 1)


def stream_codes(codes, scheme: SliceScheme):
    """Vectorized streaming of signed input codes.

    Returns an array of shape (n_streams, *codes.shape) of unsigned chunks
    of the two's-complement pattern, least significant stream first.
    """
    codes = np.asarray(codes, dtype=np.int64)
    _check_input_range(codes, scheme)
    pattern = codes & ((1 << scheme.input_bits) - 1)
    shifts = np.arange(scheme.n_streams, dtype=np.int64) * scheme.stream_width
    shape = (scheme.n_streams,) + (1,) * codes.ndim
    return (pattern >> shifts.reshape(shape)) & (scheme.stream_levels - 1)


def recombine_slices(slices, slice_width: int) -> int:
    """Inverse of little-endian slicing: sum of slices * 2^(k*slice_width)."""
    return int(sum(int(s) << (k * slice_width) for k, s in enumerate(slices)))


def recombine_streams(streams, scheme: SliceScheme) -> int:
    """Inverse of stream_input: two's-complement reassembly to a signed int."""
    raw = recombine_slices(streams, scheme.stream_width)
    if raw >= 1 << (scheme.input_bits - 1):
        raw -= 1 << scheme.input_bits
    return raw


def recombination_weights(scheme: SliceScheme) -> np.ndarray:
    """Shift factors 2^(s*stream_width + k*slice_width), shape (streams, slices)."""
    sw = np.arange(scheme.n_streams, dtype=np.float64) * scheme.stream_width
    kw = np.arange(scheme.n_slices, dtype=np.float64) * scheme.slice_width
    return 2.0 ** (sw[:, None] + kw[None, :])


def exact_product_partials(streams, weight: SlicedValue, scheme: SliceScheme):
    """Exact per-stream/per-slice partial products for one (input, weight) pair.

    The most significant stream's chunk is interpreted as a signed value
    (its top bit carries negative weight), so the matrix feeds shift_and_add
    with uniform positive shift factors.
    """
    vals = np.array(streams, dtype=np.float64)
    if len(vals) != scheme.n_streams:
        raise ValueError("stream count does not match scheme")
    top = int(streams[-1])
    if top >= scheme.stream_levels // 2:
        vals[-1] = top - scheme.stream_levels
    return vals[:, None] * np.array(weight.slices, dtype=np.float64)[None, :]


def shift_and_add(partials, scheme: SliceScheme, sign_channel: str = POSITIVE) -> float:
    """Weighted recombination of partial products into one real.

    Sums partials[s][k] * 2^(s*stream_width + k*slice_width); the result is
    negated for the negative weight channel. The sign correction for the most
    significant input bit is carried by the partials themselves (see
    exact_product_partials).
    """
    partials = np.asarray(partials, dtype=np.float64)
    if partials.shape != (scheme.n_streams, scheme.n_slices):
        raise ValueError(
            f"partials must have shape {(scheme.n_streams, scheme.n_slices)}, "
            f"got {partials.shape}"
        )
    total = float(np.sum(recombination_weights(scheme) * partials))
    return -total if sign_channel == NEGATIVE else total
