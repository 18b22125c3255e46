"""Strategy identity: transform x quantizer x codec plus numeric knobs.

A strategy serializes to a flat key-value id string, e.g.::

    t=delta;q=mixed,hi=8,lo=2,g=32,rho=0.25;c=entropy
    t=identity;q=uniform,b=4,g=32;c=none

Grammar (three ';'-separated segments, fixed order)::

    id      := 't=' transform ';q=' quant ';c=' codec
    transform := 'identity' | 'delta' | 'hadamard'
    quant   := 'uniform,b=' int ',g=' int
             | 'mixed,hi=' int ',lo=' int ',g=' int ',rho=' float
    codec   := 'none' | 'rle' | 'entropy'

Integers are decimal; rho uses the shortest exact float representation, so
parse(format(s)) round-trips bit-exact and the id is injective over the
strategy fields.
"""

from __future__ import annotations

from dataclasses import dataclass

from kvpilot.pipeline.codecs import CodecConfig
from kvpilot.pipeline.quantize import QuantConfig
from kvpilot.pipeline.transforms import TransformConfig

_TRANSFORM_TOKENS = {
    "identity": "identity",
    "delta_over_tokens": "delta",
    "hadamard_over_channels": "hadamard",
}
_CODEC_TOKENS = {"none": "none", "rle_bitpack": "rle", "entropy": "entropy"}
_TRANSFORM_KINDS = {v: k for k, v in _TRANSFORM_TOKENS.items()}
_CODEC_KINDS = {v: k for k, v in _CODEC_TOKENS.items()}


@dataclass(frozen=True)
class StrategyConfig:
    """One point in the compression strategy space."""

    transform: TransformConfig
    quant: QuantConfig
    codec: CodecConfig

    @property
    def id(self) -> str:
        """Stable, injective text form of the strategy."""
        q = self.quant
        if q.kind == "uniform_group":
            quant = f"uniform,b={q.bits},g={q.group_size}"
        else:
            quant = f"mixed,hi={q.high_bits},lo={q.low_bits},g={q.group_size},rho={q.retrieval_fraction!r}"
        return f"t={_TRANSFORM_TOKENS[self.transform.kind]};q={quant};c={_CODEC_TOKENS[self.codec.kind]}"

    def __str__(self) -> str:
        return self.id


def _parse_kv(token: str, segment: str) -> tuple[str, str]:
    if "=" not in token:
        raise ValueError(f"malformed token {token!r} in strategy id segment {segment!r}")
    key, _, value = token.partition("=")
    return key, value


def parse_strategy_id(text: str) -> StrategyConfig:
    """Parse the id grammar back into a :class:`StrategyConfig`.

    Raises ValueError on any deviation from the documented grammar.
    """
    segments = text.strip().split(";")
    if len(segments) != 3:
        raise ValueError(f"strategy id must have 3 ';'-separated segments, got {len(segments)}: {text!r}")

    t_key, t_value = _parse_kv(segments[0], segments[0])
    if t_key != "t" or t_value not in _TRANSFORM_KINDS:
        raise ValueError(f"bad transform segment {segments[0]!r}")
    transform = TransformConfig(kind=_TRANSFORM_KINDS[t_value])

    q_key, q_value = _parse_kv(segments[1], segments[1])
    if q_key != "q":
        raise ValueError(f"bad quant segment {segments[1]!r}")
    q_tokens = q_value.split(",")
    q_kind, params = q_tokens[0], dict(_parse_kv(tok, segments[1]) for tok in q_tokens[1:])
    if q_kind == "uniform":
        if set(params) != {"b", "g"}:
            raise ValueError(f"uniform quant needs exactly b and g, got {sorted(params)} in {segments[1]!r}")
        quant = QuantConfig(kind="uniform_group", bits=int(params["b"]), group_size=int(params["g"]))
    elif q_kind == "mixed":
        if set(params) != {"hi", "lo", "g", "rho"}:
            raise ValueError(f"mixed quant needs exactly hi, lo, g, rho, got {sorted(params)} in {segments[1]!r}")
        quant = QuantConfig(
            kind="mixed_head",
            high_bits=int(params["hi"]),
            low_bits=int(params["lo"]),
            group_size=int(params["g"]),
            retrieval_fraction=float(params["rho"]),
        )
    else:
        raise ValueError(f"unknown quant kind {q_kind!r} in {segments[1]!r}")

    c_key, c_value = _parse_kv(segments[2], segments[2])
    if c_key != "c" or c_value not in _CODEC_KINDS:
        raise ValueError(f"bad codec segment {segments[2]!r}")
    codec = CodecConfig(kind=_CODEC_KINDS[c_value])

    return StrategyConfig(transform=transform, quant=quant, codec=codec)


def analytic_cr(strategy: StrategyConfig) -> float:
    """Closed-form compression-ratio estimate from the bit accounting.

    Effective bits per value are the quantizer width (blended by the
    retrieval fraction for mixed heads) plus 32 bits of group header
    (16-bit scale + 16-bit zero) amortized over group_size values:
    cr = 16 / (b_eff + 32 / group_size). Codec gains are ignored, so the
    estimate is codec-agnostic and deterministic per strategy.
    """
    q = strategy.quant
    if q.kind == "uniform_group":
        b_eff = float(q.bits)
    else:
        rho = q.retrieval_fraction
        b_eff = rho * q.high_bits + (1.0 - rho) * q.low_bits
    return 16.0 / (b_eff + 32.0 / q.group_size)
