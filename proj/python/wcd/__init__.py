"""Python surface of the hierarchical web-content detector core."""

from wcd._core import (
    Scorer,
    chunk_bags,
    chunks,
    chunk_bins,
    features,
    flat_bag,
    flat_bins,
    hash_variant_id,
    murmur3_32,
    param_count,
    pyramid,
    sha256_hex,
    tokenize,
)

__all__ = [
    "Scorer",
    "chunk_bags",
    "chunks",
    "chunk_bins",
    "features",
    "flat_bag",
    "flat_bins",
    "hash_variant_id",
    "murmur3_32",
    "param_count",
    "pyramid",
    "sha256_hex",
    "tokenize",
]
