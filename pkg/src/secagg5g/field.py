"""Arithmetic over Z_p with p = 2^61 - 1, and the fixed-point update codec.

The Mersenne prime keeps reduction to a shift-and-add and leaves ample
headroom for sums of thousands of quantized model updates. Values are plain
Python ints in canonical form [0, p): a 61x61-bit product needs 122 bits,
which numpy's uint64 cannot hold. Vectors are lists of canonical ints.
"""

from __future__ import annotations

from dataclasses import dataclass

P = (1 << 61) - 1  # fixed protocol modulus, shared by keys, shares and masks


def reduce(x: int) -> int:
    """Reduce a non-negative x < 2^122 into [0, p)."""
    r = (x >> 61) + (x & P)
    if r >= P:
        r -= P
    return r


def add(a: int, b: int) -> int:
    s = a + b
    return s - P if s >= P else s


def sub(a: int, b: int) -> int:
    s = a - b
    return s + P if s < 0 else s


def mul(a: int, b: int) -> int:
    return reduce(a * b)


def neg(a: int) -> int:
    return P - a if a else 0


def inv(a: int) -> int:
    """Multiplicative inverse via Fermat: a^(p-2) mod p."""
    if a == 0:
        raise ZeroDivisionError("0 has no inverse in Z_p")
    return pow(a, P - 2, P)


def rand_element(rng) -> int:
    """Uniform element of Z_p from a seeded random.Random."""
    return rng.randrange(P)


def vec_add(a: list[int], b: list[int]) -> list[int]:
    """Componentwise (a + b) mod p."""
    if len(a) != len(b):
        raise ValueError(f"dimension mismatch: {len(a)} vs {len(b)}")
    return [add(x, y) for x, y in zip(a, b)]


def vec_sub(a: list[int], b: list[int]) -> list[int]:
    """Componentwise (a - b) mod p; inverse of vec_add in the second argument."""
    if len(a) != len(b):
        raise ValueError(f"dimension mismatch: {len(a)} vs {len(b)}")
    return [sub(x, y) for x, y in zip(a, b)]


@dataclass(frozen=True)
class FixedPointCodec:
    """Signed fixed-point mapping between real update vectors and Z_p.

    Negative values occupy the upper half of the field. The headroom
    invariant guarantees that the field sum of up to ``max_summands``
    encoded vectors decodes to the signed real sum without ambiguity.
    """

    frac_bits: int = 16
    magnitude_bound: float = 1.0
    max_summands: int = 1024

    def __post_init__(self):
        if self.frac_bits < 0:
            raise ValueError("frac_bits must be >= 0")
        if self.magnitude_bound <= 0:
            raise ValueError("magnitude_bound must be positive")
        if self.max_summands < 1:
            raise ValueError("max_summands must be >= 1")
        headroom = self.max_summands * (self.magnitude_bound * self.scale + 1)
        if not headroom < P / 2:
            raise ValueError(
                "codec overflows the field: "
                f"{self.max_summands} * ({self.magnitude_bound} * 2^{self.frac_bits} + 1) >= p/2"
            )

    @property
    def scale(self) -> int:
        return 1 << self.frac_bits


def encode_update(w, codec: FixedPointCodec) -> list[int]:
    """Quantize a real vector into Z_p: round(w_i * 2^f), negatives wrapped.

    Raises ValueError when any |w_i| exceeds the codec's magnitude bound;
    silent wraparound would corrupt aggregated averages undetectably.
    """
    bound = codec.magnitude_bound
    out = []
    for x in w:
        x = float(x)
        if abs(x) > bound:
            raise ValueError(f"update component {x} exceeds magnitude bound {bound}")
        out.append(round(x * codec.scale) % P)
    return out


def decode_sum(v: list[int], codec: FixedPointCodec, num_summands: int) -> list[float]:
    """Decode a field sum of encoded vectors back to signed reals.

    Components above p/2 are negative. Valid for sums of at most
    ``codec.max_summands`` encoded vectors (per-component error is then
    bounded by num_summands * 2^-(f+1)).
    """
    if num_summands > codec.max_summands:
        raise ValueError(
            f"{num_summands} summands exceeds codec limit {codec.max_summands}"
        )
    half = P >> 1
    scale = codec.scale
    return [(x - P if x > half else x) / scale for x in v]
