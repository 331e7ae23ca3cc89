"""Lossy compression of dense tensors via truncated Tucker decompositions.

The tensor is reduced with a sequentially truncated HOSVD, the core is
quantized and bit-plane coded until an error target is met, and the factors
are stored as weighted Householder reflectors.
"""

from .container import ContainerError
from .entropy import DecodeError
from .estimator import TuckerCompressor
from .pipeline import CompressionResult, compress, decompress, decompress_float

__all__ = ["CompressionResult", "ContainerError", "DecodeError", "TuckerCompressor", "compress",
           "decompress", "decompress_float"]
__version__ = "0.1.0"
