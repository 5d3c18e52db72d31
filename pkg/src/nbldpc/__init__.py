"""Non-binary LDPC codes over the binary erasure channel."""

__version__ = "0.1.0"
