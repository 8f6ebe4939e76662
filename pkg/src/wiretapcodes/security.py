"""Hash-based security layer.

A seed ``lam`` (a nonzero element of GF(2^q)) defines the pair of maps

    encode:  (s, b) -> lam^{-1} * (s || b)
    decode:  v      -> left-most k bits of (lam * v)

where ``s`` is the k-bit secret, ``b`` is (q-k) bits of fresh local
randomness, ``||`` is bit-string concatenation and ``*`` is multiplication in
GF(2^q).  Decoding inverts encoding exactly; over a uniform choice of seed
the decode family is 2-universal, which is what limits how much the
eavesdropper's observations can reveal about ``s``.

Bit-string convention (fixed for checkpoint/config interop): index 0 of a
bit-string is its left-most bit, i.e. the most significant bit of the
integer representation.  Seeds appear in config files as binary strings such
as "0001".
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .gf2 import GF2Field

# Enumerate-all-seeds search is only the default up to this degree; beyond it
# callers must supply an explicit candidate subset.
EXHAUSTIVE_SEED_DEGREE = 6


def format_bits(value: int, width: int) -> str:
    if not 0 <= value < (1 << width):
        raise ValueError(f"{value} does not fit in {width} bits")
    return format(value, f"0{width}b")


def parse_bits(bits: str) -> tuple[int, int]:
    """Parse a binary string into (value, width)."""
    if not bits or any(c not in "01" for c in bits):
        raise ValueError(f"not a binary string: {bits!r}")
    return int(bits, 2), len(bits)


def concat_bits(left: int, left_width: int, right: int, right_width: int) -> int:
    """Bit-string concatenation, left operand in the left-most position."""
    if not 0 <= left < (1 << left_width):
        raise ValueError(f"{left} does not fit in {left_width} bits")
    if not 0 <= right < (1 << right_width):
        raise ValueError(f"{right} does not fit in {right_width} bits")
    return (left << right_width) | right


def leftmost_bits(value: int, width: int, k: int) -> int:
    """The k left-most bits of a width-bit string."""
    if not 0 <= k <= width:
        raise ValueError(f"cannot take {k} left-most bits of a width-{width} string")
    return value >> (width - k)


@dataclass(frozen=True)
class Seed:
    """Nonzero field element parameterizing the hash pair."""

    lam: int
    q: int

    def __post_init__(self):
        if not 0 < self.lam < (1 << self.q):
            raise ValueError(f"seed must be a nonzero width-{self.q} element, got {self.lam}")

    @classmethod
    def from_string(cls, bits: str) -> "Seed":
        value, width = parse_bits(bits)
        return cls(value, width)

    def to_string(self) -> str:
        return format_bits(self.lam, self.q)


def encode_secret(s: int, b: int, seed: Seed, field: GF2Field, k: int) -> int:
    """Map secret bits plus local randomness into the reliability-layer input.

    Returns lam^{-1} * (s || b); bijective in (s, b) for a fixed seed.
    """
    if field.q != seed.q:
        raise ValueError(f"seed width {seed.q} does not match field degree {field.q}")
    if not 0 <= k <= field.q:
        raise ValueError(f"secret width k={k} outside 0..{field.q}")
    v = concat_bits(s, k, b, field.q - k)
    return field.mul(field.inv(seed.lam), v)


def decode_secret(v: int, seed: Seed, field: GF2Field, k: int) -> int:
    """Recover the k-bit secret: the k left-most bits of lam * v."""
    if field.q != seed.q:
        raise ValueError(f"seed width {seed.q} does not match field degree {field.q}")
    field.validate(v)
    return leftmost_bits(field.mul(seed.lam, v), field.q, k)


def encode_map(seed: Seed, field: GF2Field, k: int) -> np.ndarray:
    """Lookup table for batched encoding: index (s || b) -> v.

    Entry w of the table is ``encode_secret(s, b, ...)`` for the (s, b) pair
    whose concatenation equals w, i.e. multiplication of w by lam^{-1}.
    """
    if field.q != seed.q:
        raise ValueError(f"seed width {seed.q} does not match field degree {field.q}")
    if not 0 <= k <= field.q:
        raise ValueError(f"secret width k={k} outside 0..{field.q}")
    inv = field.inv(seed.lam)
    return np.array([field.mul(inv, w) for w in field.elements()], dtype=np.int64)


def decode_map(seed: Seed, field: GF2Field, k: int) -> np.ndarray:
    """Lookup table for batched decoding: v -> k left-most bits of lam * v."""
    if field.q != seed.q:
        raise ValueError(f"seed width {seed.q} does not match field degree {field.q}")
    if not 0 <= k <= field.q:
        raise ValueError(f"secret width k={k} outside 0..{field.q}")
    shift = field.q - k
    return np.array([field.mul(seed.lam, v) >> shift for v in field.elements()],
                    dtype=np.int64)


def all_seeds(q: int) -> list[Seed]:
    """Every admissible seed for degree q (all nonzero elements)."""
    return [Seed(lam, q) for lam in range(1, 1 << q)]


def default_seed_candidates(q: int) -> list[Seed]:
    """Default search space for seed selection.

    Exhaustive only for small degrees; leakage estimation per candidate is
    expensive, so larger fields require an explicitly configured subset.
    """
    if q > EXHAUSTIVE_SEED_DEGREE:
        raise ValueError(
            f"q={q} > {EXHAUSTIVE_SEED_DEGREE}: supply an explicit candidate subset"
        )
    return all_seeds(q)


def select_seed(candidates: Sequence[Seed], leakage_oracle: Callable[[Seed], float]) -> Seed:
    """Pick the candidate with the smallest estimated leakage.

    Ties break toward the numerically smallest lambda.  The oracle must be
    deterministic given its own RNG seed for reproducible selection.
    """
    if not candidates:
        raise ValueError("empty seed candidate list")
    best = None
    best_key = None
    for seed in candidates:
        key = (leakage_oracle(seed), seed.lam)
        if best_key is None or key < best_key:
            best, best_key = seed, key
    return best
