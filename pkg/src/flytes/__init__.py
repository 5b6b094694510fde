"""Multibyte ("flyte") floating-point storage formats.

flytes keep the sign and exponent of binary32/binary64 and store 2 to 7
bytes per value. Arithmetic always happens in the parent native type; this
package handles conversion, packed storage, vector-block pack/unpack and a
small set of BLAS kernels built on them.
"""

from . import _backend
from .convert import (
    RoundDecomposition,
    RoundingMode,
    bits_to_float,
    float_to_bits,
    narrow,
    narrow_array,
    round_decompose,
    widen,
    widen_array,
)
from .formats import FORMATS, TABLE_ORDER, DecodedValue, FloatClass, FlyteFormat, classify, decode, format_of
from .packed import (
    PackedArray,
    alignment_period,
    byte_size,
    packed_get,
    packed_load,
    packed_new,
    packed_save,
    packed_set,
)
from .simd import (
    PackPlan,
    build_pack_plan,
    build_unpack_plan,
    pack_block,
    pack_stream,
    unpack_block,
    unpack_stream,
)

backend_name = _backend.name
set_backend = _backend.set_backend
use_backend = _backend.use_backend
available_backends = _backend.available

__version__ = "0.1.0"

__all__ = [
    "RoundDecomposition", "RoundingMode", "bits_to_float", "float_to_bits", "narrow", "narrow_array",
    "round_decompose", "widen", "widen_array",
    "FORMATS", "TABLE_ORDER", "DecodedValue", "FloatClass", "FlyteFormat", "classify", "decode", "format_of",
    "PackedArray", "alignment_period", "byte_size", "packed_get", "packed_load", "packed_new", "packed_save",
    "packed_set",
    "PackPlan", "build_pack_plan", "build_unpack_plan", "pack_block", "pack_stream", "unpack_block",
    "unpack_stream",
    "backend_name", "set_backend", "use_backend", "available_backends",
]
