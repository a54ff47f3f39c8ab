"""Structured random linear codes over GF(2^8) for packet erasure recovery."""

from .block import (ConstraintRow, DecodeResult, decode_ge, decode_it,
                    decode_sge, encode_block, expand_row, generate_row,
                    nonbinary_columns, pack_repair_packet, parse_repair_packet)
from .conv import (RepairHeader, RepairPacket, SlidingEncoder, SourcePacket,
                   StreamDecoder, pack_packet, parse_packet)
from .gf256 import gf_div, gf_inv, gf_mul, symbol_mul_add, symbol_xor_in
from .params import (CodeParams, OverheadEstimate, ParamTable,
                     ParamTableEntry, TuningConfig, estimate_avg_overhead,
                     nonbinary_period, tune)
from .simulate import (EXHAUSTED, BlockTrialConfig, ConvTrialConfig,
                       MetricsReport, run_baseline, run_block_batch,
                       run_block_trial, run_conv_batch, run_conv_session)

__version__ = "0.1.0"

__all__ = [
    "CodeParams", "TuningConfig", "ParamTable", "ParamTableEntry",
    "OverheadEstimate", "estimate_avg_overhead", "tune", "nonbinary_period",
    "ConstraintRow", "DecodeResult", "generate_row", "expand_row",
    "nonbinary_columns", "encode_block", "decode_ge", "decode_it",
    "decode_sge", "pack_repair_packet", "parse_repair_packet",
    "RepairHeader", "SourcePacket", "RepairPacket", "SlidingEncoder",
    "StreamDecoder", "pack_packet", "parse_packet",
    "gf_mul", "gf_inv", "gf_div", "symbol_xor_in", "symbol_mul_add",
    "BlockTrialConfig", "ConvTrialConfig", "MetricsReport", "EXHAUSTED",
    "run_block_trial", "run_block_batch", "run_baseline",
    "run_conv_session", "run_conv_batch",
]
