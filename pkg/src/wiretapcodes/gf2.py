"""GF(2^q) arithmetic underpinning the 2-universal hash layer.

Field elements are Python ints in ``[0, 2^q)`` whose binary digits are the
coefficients of a polynomial over GF(2).  Bit ``q-1`` of the int is the
left-most bit of the width-``q`` bit-string the element represents.

Multiplication is carry-less (shift-and-XOR) with inline reduction modulo a
pinned irreducible polynomial of degree ``q``.  The default modulus for each
degree is the lexicographically smallest irreducible polynomial, re-verified
by exhaustive trial division whenever a field is constructed:

    q=1  : 0b10                 x
    q=2  : 0b111                x^2+x+1
    q=3  : 0b1011               x^3+x+1
    q=4  : 0b10011              x^4+x+1
    q=5  : 0b100101             x^5+x^2+1
    q=6  : 0b1000011            x^6+x+1
    q=7  : 0b10000011           x^7+x+1
    q=8  : 0b100011011          x^8+x^4+x^3+x+1
    q=9  : 0b1000000011         x^9+x+1
    q=10 : 0b10000001001        x^10+x^3+1
    q=11 : 0b100000000101       x^11+x^2+1
    q=12 : 0b1000000001001      x^12+x^3+1
    q=13 : 0b10000000011011     x^13+x^4+x^3+x+1
    q=14 : 0b100000000100001    x^14+x^5+1
    q=15 : 0b1000000000000011   x^15+x+1
    q=16 : 0b10000000000101011  x^16+x^5+x^3+x+1
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

MAX_DEGREE = 16

DEFAULT_MODULI: dict[int, int] = {
    1: 0b10,
    2: 0b111,
    3: 0b1011,
    4: 0b10011,
    5: 0b100101,
    6: 0b1000011,
    7: 0b10000011,
    8: 0b100011011,
    9: 0b1000000011,
    10: 0b10000001001,
    11: 0b100000000101,
    12: 0b1000000001001,
    13: 0b10000000011011,
    14: 0b100000000100001,
    15: 0b1000000000000011,
    16: 0b10000000000101011,
}


def poly_mod(a: int, b: int) -> int:
    """Remainder of polynomial division a mod b over GF(2)."""
    if b == 0:
        raise ValueError("polynomial division by zero")
    db = b.bit_length() - 1
    while a.bit_length() - 1 >= db and a != 0:
        a ^= b << (a.bit_length() - 1 - db)
    return a

def is_irreducible(poly: int, degree: int) -> bool:
    """Exhaustive trial division; intended for degree <= 16."""
    if poly.bit_length() - 1 != degree:
        return False
    for d in range(1, degree // 2 + 1):
        for f in range(1 << d, 1 << (d + 1)):
            if poly_mod(poly, f) == 0:
                return False
    return True


@dataclass(frozen=True)
class GF2Field:
    """The field GF(2^q) with a fixed reduction polynomial.

    ``modulus`` defaults to the pinned table above; irreducibility is checked
    at construction either way, so a bad custom modulus fails fast.
    """

    q: int
    modulus: int

    def __init__(self, q: int, modulus: int | None = None):
        if not 1 <= q <= MAX_DEGREE:
            raise ValueError(f"field degree q={q} outside supported range 1..{MAX_DEGREE}")
        if modulus is None:
            modulus = DEFAULT_MODULI[q]
        if not is_irreducible(modulus, q):
            raise ValueError(f"modulus {modulus:#b} is not an irreducible polynomial of degree {q}")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "modulus", modulus)

    @property
    def order(self) -> int:
        return 1 << self.q

    def validate(self, a: int) -> int:
        if not 0 <= a < self.order:
            raise ValueError(f"{a} is not a width-{self.q} field element")
        return a

    def mul(self, a: int, b: int) -> int:
        """Carry-less product reduced modulo the field polynomial."""
        self.validate(a)
        self.validate(b)
        high = 1 << self.q
        p = 0
        while b:
            if b & 1:
                p ^= a
            a <<= 1
            if a & high:
                a ^= self.modulus
            b >>= 1
        return p

    def inv(self, a: int) -> int:
        """Multiplicative inverse via a^(2^q - 2) square-and-multiply."""
        self.validate(a)
        if a == 0:
            raise ZeroDivisionError("zero has no multiplicative inverse in GF(2^q)")
        result = 1
        base = a
        e = self.order - 2
        while e:
            if e & 1:
                result = self.mul(result, base)
            base = self.mul(base, base)
            e >>= 1
        return result

    def elements(self) -> range:
        return range(self.order)

    def nonzero_elements(self) -> range:
        return range(1, self.order)

    def mul_table(self) -> np.ndarray:
        """Full order x order multiplication table (test/oracle helper)."""
        return _mul_table(self.q, self.modulus)


@lru_cache(maxsize=8)
def _mul_table(q: int, modulus: int) -> np.ndarray:
    field = GF2Field(q, modulus)
    n = field.order
    table = np.zeros((n, n), dtype=np.int32)
    for a in range(n):
        row = table[a]
        for b in range(a, n):
            row[b] = field.mul(a, b)
    i_lower = np.tril_indices(n, -1)
    table[i_lower] = table.T[i_lower]
    return table
