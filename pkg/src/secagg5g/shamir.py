"""t-out-of-k Shamir secret sharing over Z_p for scalar keys.

Shares are evaluations of a random degree-(t-1) polynomial at the fixed
points x = 1..k (the base-station index), so reconstruction from any subset
is independent of ordering. ``recover`` returns None below threshold,
mirroring an ideal scheme's failure output rather than raising.

``combine_linear`` is the generic primitive the protocol leans on:
Lagrange coefficients applied to any linear function of the shares
reconstruct the same linear function of the secret.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from . import field
from .field import P


@dataclass(frozen=True)
class SecretShare:
    """One Shamir evaluation point (x, y); x = 0 is reserved for the secret."""

    x: int
    y: int

    def __post_init__(self):
        if self.x == 0:
            raise ValueError("share point x = 0 is reserved for the secret")


@dataclass(frozen=True)
class AccessStructure:
    threshold: int
    total: int

    def __post_init__(self):
        if not 1 <= self.threshold <= self.total:
            raise ValueError(
                f"need 1 <= threshold <= total, got ({self.threshold}, {self.total})"
            )


def _poly_eval(coeffs: Sequence[int], x: int, prime: int) -> int:
    """Horner evaluation; coeffs ordered constant term first."""
    acc = 0
    for c in reversed(coeffs):
        acc = (acc * x + c) % prime
    return acc


def split(secret: int, acc: AccessStructure, rng, prime: int = P) -> list[SecretShare]:
    """Split a secret into ``acc.total`` shares at x = 1..total.

    The polynomial has constant term ``secret`` and uniformly random higher
    coefficients drawn from the injected rng, so runs are reproducible.
    """
    coeffs = [secret % prime]
    coeffs += [rng.randrange(prime) for _ in range(acc.threshold - 1)]
    return [SecretShare(j, _poly_eval(coeffs, j, prime)) for j in range(1, acc.total + 1)]


def lagrange_coeffs_at_zero(xs: Sequence[int], prime: int = P) -> list[int]:
    """Coefficients lambda_j with sum(lambda_j * f(x_j)) = f(0) for deg f < len(xs).

    Points must be distinct and nonzero.
    """
    if len(set(xs)) != len(xs):
        raise ValueError("duplicate evaluation points")
    if any(x % prime == 0 for x in xs):
        raise ValueError("x = 0 is not a valid share point")
    coeffs = []
    for j, xj in enumerate(xs):
        num, den = 1, 1
        for m, xm in enumerate(xs):
            if m == j:
                continue
            num = num * xm % prime
            den = den * (xm - xj) % prime
        coeffs.append(num * pow(den, prime - 2, prime) % prime)
    return coeffs


def recover(shares: Iterable[SecretShare], acc: AccessStructure, prime: int = P) -> int | None:
    """Interpolate the secret at x = 0, or None when below threshold."""
    shares = list(shares)
    xs = [s.x for s in shares]
    if len(set(xs)) != len(xs):
        raise ValueError("duplicate share x values")
    if len(shares) < acc.threshold:
        return None
    coeffs = lagrange_coeffs_at_zero(xs, prime)
    return sum(lam * s.y for lam, s in zip(coeffs, shares)) % prime


def combine_linear(
    payloads: Sequence[list[int]], coeffs: Sequence[int], prime: int = P
) -> list[int]:
    """Componentwise sum(coeffs[j] * payloads[j]) mod prime.

    Applied to per-share mask vectors with Lagrange coefficients this
    performs vector-valued reconstruction.
    """
    if len(payloads) != len(coeffs):
        raise ValueError(f"{len(payloads)} payloads vs {len(coeffs)} coefficients")
    if not payloads:
        raise ValueError("nothing to combine")
    dim = len(payloads[0])
    if any(len(p) != dim for p in payloads):
        raise ValueError("payload dimensions differ")
    if prime == P:
        out = [0] * dim
        for lam, payload in zip(coeffs, payloads):
            for i, v in enumerate(payload):
                out[i] = field.add(out[i], field.mul(lam, v))
        return out
    return [
        sum(lam * payload[i] for lam, payload in zip(coeffs, payloads)) % prime
        for i in range(dim)
    ]
