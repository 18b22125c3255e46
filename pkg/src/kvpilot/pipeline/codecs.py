"""Lossless codecs over quantized symbol streams.

Three codec kinds, all bit-exact on roundtrip:

- ``none``: symbols bit-packed at exactly their quantizer width.
- ``rle_bitpack``: byte-level run-length coding of the bit-packed stream.
- ``entropy``: order-0 adaptive range coding of the raw symbols.

Symbols are serialized as one substream per distinct head bit width (widths
descending, heads in (layer, head) scan order within a width), so mixed-head
tensors pack each head at its own width.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np

from kvpilot.pipeline.quantize import QuantizedTensor
from kvpilot.pipeline.tensors import SOURCE_WIDTH_BYTES

CODEC_KINDS = ("none", "rle_bitpack", "entropy")


class CodecError(ValueError):
    """Raised for malformed or truncated codec payloads."""


@dataclass(frozen=True)
class CodecConfig:
    kind: str = "none"

    def __post_init__(self) -> None:
        if self.kind not in CODEC_KINDS:
            raise ValueError(f"unknown codec kind {self.kind!r}; expected one of {CODEC_KINDS}")


@dataclass(frozen=True, eq=False)
class CompressedBlob:
    """Encoded symbols plus raw metadata and enough structure to decode.

    ``payload`` holds the codec output over symbols; ``metadata`` holds the
    group scales and zeros (float16 each) followed by the packed head class
    map when present. Structural fields (shape, widths, importance) are
    derivable from the strategy plus the counted metadata and are not part
    of the byte accounting.
    """

    payload: bytes
    metadata: bytes
    original_bytes: int
    shape: tuple[int, int, int, int]
    group_size: int
    bits_per_head: np.ndarray
    mixed: bool
    head_importance: np.ndarray = field(repr=False, default=None)  # type: ignore[assignment]

    @property
    def metadata_nbytes(self) -> int:
        return len(self.metadata)

    @property
    def compressed_nbytes(self) -> int:
        return len(self.payload) + len(self.metadata)

    @property
    def cr(self) -> float:
        return self.original_bytes / self.compressed_nbytes


# --------------------------------------------------------------------------
# bit packing
# --------------------------------------------------------------------------


def pack_bits(symbols: np.ndarray, width: int) -> bytes:
    """Pack a 1-D uint8 symbol array at exactly ``width`` bits per symbol."""
    if not 1 <= width <= 8:
        raise ValueError(f"width must be in 1..8, got {width}")
    sym = np.ascontiguousarray(symbols, dtype=np.uint8).reshape(-1, 1)
    if sym.size and int(sym.max()) >= 1 << width:
        raise ValueError(f"symbol exceeds {width}-bit range")
    cols = np.unpackbits(sym, axis=1)
    return np.packbits(cols[:, 8 - width :]).tobytes()


def unpack_bits(data: bytes, width: int, count: int) -> np.ndarray:
    """Inverse of :func:`pack_bits` for a known symbol count."""
    expected = math.ceil(count * width / 8)
    if len(data) != expected:
        raise CodecError(f"bit-packed stream is {len(data)} bytes, expected {expected}")
    if count == 0:
        return np.zeros(0, dtype=np.uint8)
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8), count=count * width)
    rows = bits.reshape(count, width)
    pad = np.zeros((count, 8 - width), dtype=np.uint8)
    return np.packbits(np.concatenate([pad, rows], axis=1), axis=1).reshape(-1)


# --------------------------------------------------------------------------
# byte-level run-length coding (PackBits-style)
# --------------------------------------------------------------------------

_RLE_MIN_RUN = 3
_RLE_MAX_RUN = 130  # control byte 128..255 encodes runs of 3..130
_RLE_MAX_LITERAL = 128  # control byte 0..127 precedes 1..128 literal bytes


def rle_encode(data: bytes) -> bytes:
    """Greedy run-length coding: runs of >= 3 equal bytes become (control, byte)."""
    arr = np.frombuffer(data, dtype=np.uint8)
    n = arr.size
    if n == 0:
        return b""
    boundaries = np.flatnonzero(np.diff(arr)) + 1
    starts = np.concatenate(([0], boundaries)).tolist()
    ends = np.concatenate((boundaries, [n])).tolist()

    out = bytearray()
    lit_start: int | None = None

    def flush_literal(upto: int) -> None:
        nonlocal lit_start
        if lit_start is None:
            return
        pos = lit_start
        while pos < upto:
            chunk = min(_RLE_MAX_LITERAL, upto - pos)
            out.append(chunk - 1)
            out.extend(data[pos : pos + chunk])
            pos += chunk
        lit_start = None

    for run_start, run_end in zip(starts, ends):
        run = run_end - run_start
        if run >= _RLE_MIN_RUN:
            flush_literal(run_start)
            value = data[run_start]
            while run >= _RLE_MIN_RUN:
                chunk = min(_RLE_MAX_RUN, run)
                out.append(128 + chunk - _RLE_MIN_RUN)
                out.append(value)
                run -= chunk
            if run:
                lit_start = run_end - run
        elif lit_start is None:
            lit_start = run_start
    flush_literal(n)
    return bytes(out)


def rle_decode(data: bytes) -> bytes:
    """Inverse of :func:`rle_encode`; raises :class:`CodecError` on truncation."""
    out = bytearray()
    pos = 0
    n = len(data)
    while pos < n:
        control = data[pos]
        pos += 1
        if control < 128:
            length = control + 1
            if pos + length > n:
                raise CodecError("truncated literal run")
            out.extend(data[pos : pos + length])
            pos += length
        else:
            if pos >= n:
                raise CodecError("truncated repeat run")
            out.extend(data[pos : pos + 1] * (control - 128 + _RLE_MIN_RUN))
            pos += 1
    return bytes(out)


# --------------------------------------------------------------------------
# order-0 adaptive range coder
# --------------------------------------------------------------------------

_RC_TOP = 1 << 24
_RC_BOTTOM = 1 << 16
_RC_MASK = 0xFFFFFFFF
_FREQ_INCREMENT = 32
_FREQ_LIMIT = _RC_BOTTOM  # total frequency must stay below the renorm bound


class _Fenwick:
    """Fenwick tree over symbol frequencies: point update, prefix sum, search."""

    def __init__(self, size: int) -> None:
        self.size = size
        self.tree = [0] * (size + 1)
        for s in range(size):
            self.add(s, 1)  # every symbol starts with frequency 1
        self.freq = [1] * size
        self.total = size

    def add(self, index: int, amount: int) -> None:
        i = index + 1
        while i <= self.size:
            self.tree[i] += amount
            i += i & (-i)

    def prefix(self, index: int) -> int:
        """Sum of frequencies of symbols strictly below ``index``."""
        total = 0
        i = index
        while i > 0:
            total += self.tree[i]
            i -= i & (-i)
        return total

    def find(self, target: int) -> int:
        """Largest symbol s with prefix(s) <= target."""
        pos = 0
        remaining = target
        bit = 1 << (self.size.bit_length())
        while bit:
            nxt = pos + bit
            if nxt <= self.size and self.tree[nxt] <= remaining:
                remaining -= self.tree[nxt]
                pos = nxt
            bit >>= 1
        return pos

    def bump(self, symbol: int) -> None:
        self.add(symbol, _FREQ_INCREMENT)
        self.freq[symbol] += _FREQ_INCREMENT
        self.total += _FREQ_INCREMENT
        if self.total >= _FREQ_LIMIT:
            self._halve()

    def _halve(self) -> None:
        self.tree = [0] * (self.size + 1)
        total = 0
        for s in range(self.size):
            halved = max(1, self.freq[s] // 2)
            self.freq[s] = halved
            total += halved
            self.add(s, halved)
        self.total = total


class _RangeEncoder:
    def __init__(self) -> None:
        self.low = 0
        self.range = _RC_MASK
        self.out = bytearray()

    def encode(self, cum: int, freq: int, total: int) -> None:
        unit = self.range // total
        self.low += unit * cum
        self.range = unit * freq
        while True:
            if (self.low ^ (self.low + self.range)) < _RC_TOP:
                pass
            elif self.range < _RC_BOTTOM:
                self.range = (-self.low) & (_RC_BOTTOM - 1)
            else:
                break
            self.out.append((self.low >> 24) & 0xFF)
            self.low = (self.low << 8) & _RC_MASK
            self.range = (self.range << 8) & _RC_MASK

    def finish(self) -> bytes:
        for _ in range(4):
            self.out.append((self.low >> 24) & 0xFF)
            self.low = (self.low << 8) & _RC_MASK
        return bytes(self.out)


class _RangeDecoder:
    def __init__(self, data: bytes) -> None:
        self.data = data
        self.pos = 0
        self.low = 0
        self.range = _RC_MASK
        self.code = 0
        for _ in range(4):
            self.code = ((self.code << 8) | self._next_byte()) & _RC_MASK

    def _next_byte(self) -> int:
        if self.pos < len(self.data):
            byte = self.data[self.pos]
            self.pos += 1
            return byte
        raise CodecError("range-coded stream truncated")

    def decode_target(self, total: int) -> int:
        unit = self.range // total
        return min((self.code - self.low) // unit, total - 1)

    def advance(self, cum: int, freq: int, total: int) -> None:
        unit = self.range // total
        self.low += unit * cum
        self.range = unit * freq
        while True:
            if (self.low ^ (self.low + self.range)) < _RC_TOP:
                pass
            elif self.range < _RC_BOTTOM:
                self.range = (-self.low) & (_RC_BOTTOM - 1)
            else:
                break
            self.code = ((self.code << 8) | self._next_byte()) & _RC_MASK
            self.low = (self.low << 8) & _RC_MASK
            self.range = (self.range << 8) & _RC_MASK


def range_encode(symbols: np.ndarray, alphabet: int) -> bytes:
    """Order-0 adaptive range coding of a 1-D symbol array."""
    model = _Fenwick(alphabet)
    encoder = _RangeEncoder()
    for s in symbols.tolist():
        encoder.encode(model.prefix(s), model.freq[s], model.total)
        model.bump(s)
    return encoder.finish()


def range_decode(data: bytes, alphabet: int, count: int) -> np.ndarray:
    """Inverse of :func:`range_encode` for a known symbol count."""
    model = _Fenwick(alphabet)
    decoder = _RangeDecoder(data)
    out = np.empty(count, dtype=np.uint8)
    for i in range(count):
        target = decoder.decode_target(model.total)
        symbol = model.find(target)
        decoder.advance(model.prefix(symbol), model.freq[symbol], model.total)
        model.bump(symbol)
        out[i] = symbol
    return out


# --------------------------------------------------------------------------
# blob assembly
# --------------------------------------------------------------------------


def _width_streams(qt: QuantizedTensor) -> list[tuple[int, np.ndarray, np.ndarray]]:
    """(width, head mask, flat symbols) per distinct width, widths descending."""
    streams = []
    for width in sorted(set(qt.bits_per_head.reshape(-1).tolist()), reverse=True):
        mask = qt.bits_per_head == width
        streams.append((int(width), mask, qt.symbols[mask].reshape(-1)))
    return streams


def _serialize_metadata(qt: QuantizedTensor) -> bytes:
    parts = [qt.scales.tobytes(), qt.zeros.tobytes()]
    if qt.head_classes is not None:
        parts.append(np.packbits(qt.head_classes.reshape(-1)).tobytes())
    return b"".join(parts)


def encode_lossless(qt: QuantizedTensor, c: CodecConfig) -> CompressedBlob:
    """Serialize quantized symbols under the chosen codec; metadata stays raw."""
    streams = _width_streams(qt)
    if c.kind in ("none", "rle_bitpack"):
        packed = b"".join(pack_bits(stream, width) for width, _, stream in streams)
        payload = packed if c.kind == "none" else rle_encode(packed)
    else:
        parts = []
        for width, _, stream in streams:
            coded = range_encode(stream, 1 << width)
            parts.append(struct.pack(">I", len(coded)))
            parts.append(coded)
        payload = b"".join(parts)
    return CompressedBlob(
        payload=payload,
        metadata=_serialize_metadata(qt),
        original_bytes=qt.symbols.size * SOURCE_WIDTH_BYTES,
        shape=qt.symbols.shape,
        group_size=qt.group_size,
        bits_per_head=qt.bits_per_head,
        mixed=qt.head_classes is not None,
        head_importance=qt.head_importance,
    )


def decode_lossless(blob: CompressedBlob, c: CodecConfig) -> QuantizedTensor:
    """Exact inverse of :func:`encode_lossless`."""
    layers, heads, tokens, channels = blob.shape
    groups = channels // blob.group_size
    group_count = layers * heads * tokens * groups

    meta = blob.metadata
    expected = group_count * 4 + (math.ceil(layers * heads / 8) if blob.mixed else 0)
    if len(meta) != expected:
        raise CodecError(f"metadata is {len(meta)} bytes, expected {expected}")
    scales = np.frombuffer(meta[: group_count * 2], dtype=np.float16).reshape(layers, heads, tokens, groups)
    zeros = np.frombuffer(meta[group_count * 2 : group_count * 4], dtype=np.float16).reshape(scales.shape)
    head_classes = None
    if blob.mixed:
        raw = np.frombuffer(meta[group_count * 4 :], dtype=np.uint8)
        head_classes = np.unpackbits(raw, count=layers * heads).astype(bool).reshape(layers, heads)

    widths = [
        (int(width), blob.bits_per_head == width)
        for width in sorted(set(blob.bits_per_head.reshape(-1).tolist()), reverse=True)
    ]
    symbols = np.zeros((layers, heads, tokens, channels), dtype=np.uint8)

    if c.kind in ("none", "rle_bitpack"):
        packed = blob.payload if c.kind == "none" else rle_decode(blob.payload)
        offset = 0
        for width, mask in widths:
            count = int(mask.sum()) * tokens * channels
            nbytes = math.ceil(count * width / 8)
            chunk = packed[offset : offset + nbytes]
            offset += nbytes
            symbols[mask] = unpack_bits(chunk, width, count).reshape(-1, tokens, channels)
        if offset != len(packed):
            raise CodecError(f"{len(packed) - offset} trailing bytes in bit-packed payload")
    else:
        offset = 0
        payload = blob.payload
        for width, mask in widths:
            if offset + 4 > len(payload):
                raise CodecError("entropy payload truncated at stream header")
            (length,) = struct.unpack_from(">I", payload, offset)
            offset += 4
            if offset + length > len(payload):
                raise CodecError("entropy payload truncated")
            count = int(mask.sum()) * tokens * channels
            symbols[mask] = range_decode(payload[offset : offset + length], 1 << width, count).reshape(
                -1, tokens, channels
            )
            offset += length
        if offset != len(payload):
            raise CodecError(f"{len(payload) - offset} trailing bytes in entropy payload")

    return QuantizedTensor(
        symbols=symbols,
        scales=scales,
        zeros=zeros,
        group_size=blob.group_size,
        bits_per_head=blob.bits_per_head,
        head_classes=head_classes,
        head_importance=blob.head_importance,
    )
