"""Key-homomorphic pseudorandom masks: F(key, t)[i] = key * H(t, i) mod p.

H derives public per-(iteration, index) coefficients from SHA-256, so the
construction is exactly additive in the key: F(k1 + k2, t) = F(k1, t) +
F(k2, t), componentwise in Z_p, and Lagrange combinations of evaluations on
Shamir shares of a key equal the evaluation on the key itself. Those two
identities are what the aggregation protocol stands on.

SECURITY WARNING: this default backend is NOT a standalone PRF. The
coefficients H(t, i) are public, so a single output component reveals the
key by division. It is only safe where every evaluation stays secret until
summed with others, as in the aggregation flow here. A lattice-based
almost-key-homomorphic PRF can replace it behind the same three functions.
"""

from __future__ import annotations

import hashlib
import struct
from functools import lru_cache

from .field import P, mul

DOMAIN_TAG = b"STANDFIRM-H"  # protocol constant; keeps H out of other contexts


def hash_to_field(domain_tag: bytes, t: int, i: int) -> int:
    """SHA-256(tag || t_le64 || i_le64), first 16 digest bytes LE, mod p."""
    digest = hashlib.sha256(domain_tag + struct.pack("<QQ", t, i)).digest()
    return int.from_bytes(digest[:16], "little") % P


@lru_cache(maxsize=256)
def coefficient_vector(t: int, d: int) -> tuple[int, ...]:
    """Public coefficients (H(t, 0), ..., H(t, d-1)); cached, they are shared
    by every key evaluated at iteration t."""
    return tuple(hash_to_field(DOMAIN_TAG, t, i) for i in range(d))


def evaluate(key: int, t: int, d: int) -> list[int]:
    """Mask vector for (key, iteration t) of dimension d."""
    if d < 1:
        raise ValueError("mask dimension must be >= 1")
    return [mul(key, h) for h in coefficient_vector(t, d)]


def precompute_masks(key: int, num_iterations: int, d: int) -> list[list[int]]:
    """Masks for iterations 0..num_iterations-1, bitwise equal to on-the-fly
    evaluation; lets a device front-load all mask computation."""
    if num_iterations < 1:
        raise ValueError("need at least one iteration")
    return [evaluate(key, t, d) for t in range(num_iterations)]
