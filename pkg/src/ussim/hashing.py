"""Almost-strongly-universal tagging over GF(2^a).

A hash key is a pair (multiplier, offset). The tag of an a-bit message m is
the low t bits of multiplier * m in GF(2^a), XORed with the t-bit offset.
Over a uniform key the tag of any fixed message is exactly uniform, and any
two distinct messages produce any given tag pair with probability 2^(-2t),
which is the collision behaviour the signature thresholds assume. The offset
term matters: without it the all-zero message would hash to the all-zero tag
under every multiplier.

Polynomials over GF(2) are encoded as integers, bit i holding the
coefficient of x^i. The field modulus for width a is the irreducible
polynomial of degree a with the smallest integer encoding.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np

__all__ = [
    "HashKey",
    "KeyId",
    "Tag",
    "find_irreducible",
    "gf_mul",
    "make_tag",
    "batch_tags",
]

# A tag is a plain int of tag_len_bits width.
Tag = int


class KeyId(NamedTuple):
    """Identifies one issued key: who it was issued to, and at which slot."""

    origin_recipient: int
    slot: int


@dataclass(frozen=True)
class HashKey:
    """One-time hash key: an a-bit field multiplier and a t-bit offset."""

    multiplier: int
    offset: int

    def __post_init__(self) -> None:
        if self.multiplier < 0:
            raise ValueError("multiplier must be non-negative")
        if self.offset < 0:
            raise ValueError("offset must be non-negative")


def _degree(p: int) -> int:
    return p.bit_length() - 1


def _clmul(x: int, y: int) -> int:
    """Carry-less product of two GF(2) polynomials."""
    out = 0
    while y:
        if y & 1:
            out ^= x
        x <<= 1
        y >>= 1
    return out


def _pmod(x: int, m: int) -> int:
    dm = _degree(m)
    while x and _degree(x) >= dm:
        x ^= m << (_degree(x) - dm)
    return x


def _pgcd(x: int, y: int) -> int:
    while y:
        x, y = y, _pmod(x, y)
    return x


def _square_mod(p: int, m: int) -> int:
    # Squaring over GF(2) just spreads the coefficients to even positions.
    sq = 0
    i = 0
    while p:
        if p & 1:
            sq |= 1 << (2 * i)
        p >>= 1
        i += 1
    return _pmod(sq, m)


def _prime_factors(n: int) -> list[int]:
    out = []
    d = 2
    while d * d <= n:
        if n % d == 0:
            out.append(d)
            while n % d == 0:
                n //= d
        d += 1
    if n > 1:
        out.append(n)
    return out


@functools.lru_cache(maxsize=None)
def _small_irreducibles(max_degree: int = 9) -> tuple[int, ...]:
    # Sieve by integer encoding; candidates appear in increasing degree, so
    # every proper factor of degree <= d/2 has already been collected.
    found: list[int] = []
    for f in range(2, 1 << (max_degree + 1)):
        d = _degree(f)
        if all(_pmod(f, g) != 0 for g in found if _degree(g) <= d // 2):
            found.append(f)
    return tuple(found)


def _is_irreducible(f: int) -> bool:
    """Deterministic irreducibility test for a GF(2) polynomial."""
    d = _degree(f)
    if d <= 0:
        return False
    if d == 1:
        return True
    if f & 1 == 0:  # divisible by x
        return False
    for g in _small_irreducibles():
        dg = _degree(g)
        if dg > d // 2:
            break
        if _pmod(f, g) == 0:
            return False
    # f is irreducible iff x^(2^d) == x (mod f) and x^(2^(d/p)) - x is
    # coprime to f for every prime p dividing d.
    checkpoints = {d // p for p in _prime_factors(d)}
    h = 2  # the polynomial x
    for i in range(1, d + 1):
        h = _square_mod(h, f)
        if i in checkpoints and _pgcd(h ^ 2, f) != 1:
            return False
    return _pmod(h ^ 2, f) == 0


@functools.lru_cache(maxsize=None)
def find_irreducible(msg_len_bits: int) -> int:
    """Smallest-encoding irreducible polynomial of the given degree.

    The scan starts at x^a + 1 and steps by 2: a usable modulus needs a
    nonzero constant term, and for degree 1 that picks x + 1 over x.
    """
    a = msg_len_bits
    if not isinstance(a, int) or isinstance(a, bool):
        raise ValueError("msg_len_bits must be an int")
    if not 1 <= a <= 4096:
        raise ValueError(f"msg_len_bits must be in [1, 4096], got {a}")
    candidate = (1 << a) | 1
    while True:
        if _is_irreducible(candidate):
            return candidate
        candidate += 2


def _check_width(name: str, value: int, width: int) -> None:
    if not isinstance(value, int) or isinstance(value, bool):
        raise ValueError(f"{name} must be an int")
    if value < 0 or value.bit_length() > width:
        raise ValueError(f"{name} must fit in {width} bits, got {value}")


def gf_mul(x: int, y: int, msg_len_bits: int) -> int:
    """Product of two field elements of width msg_len_bits."""
    _check_width("x", x, msg_len_bits)
    _check_width("y", y, msg_len_bits)
    return _pmod(_clmul(x, y), find_irreducible(msg_len_bits))


def make_tag(key: HashKey, message: int, msg_len_bits: int, tag_len_bits: int) -> Tag:
    """Tag one message with one key.

    The tag is the low tag_len_bits of key.multiplier * message in
    GF(2^msg_len_bits), XORed with key.offset.
    """
    a, t = msg_len_bits, tag_len_bits
    if not 1 <= t <= a:
        raise ValueError(f"tag_len_bits must be in [1, msg_len_bits], got {t}")
    _check_width("message", message, a)
    _check_width("key.multiplier", key.multiplier, a)
    _check_width("key.offset", key.offset, t)
    product = gf_mul(key.multiplier, message, a)
    return (product & ((1 << t) - 1)) ^ key.offset


def default_tag_len(msg_len_bits: int) -> int:
    """Default tag width: the message width, capped at 32 bits."""
    return min(msg_len_bits, 32)


def _mul_table(message: int, msg_len_bits: int) -> list[int]:
    # table[j] = x^j * message in the field, so a product decomposes into
    # XORs selected by the multiplier's bits
    a = msg_len_bits
    poly = find_irreducible(a)
    high = 1 << (a - 1)
    mask = (1 << a) - 1
    table = []
    cur = message
    for _ in range(a):
        table.append(cur)
        carry = cur & high
        cur = (cur << 1) & mask
        if carry:
            cur ^= poly & mask
    return table


def tags_of_arrays(
    multipliers: np.ndarray,
    offsets: np.ndarray,
    message: int,
    msg_len_bits: int,
    tag_len_bits: int,
) -> np.ndarray:
    """Vectorized make_tag over parallel multiplier/offset arrays."""
    a, t = msg_len_bits, tag_len_bits
    _check_width("message", message, a)
    if not 1 <= t <= a:
        raise ValueError(f"tag_len_bits must be in [1, msg_len_bits], got {t}")
    table = _mul_table(message, a)
    if a <= 64 and t <= 64:
        mults = np.asarray(multipliers, dtype=np.uint64)
        offs = np.asarray(offsets, dtype=np.uint64)
        acc = np.zeros(mults.shape, dtype=np.uint64)
        one = np.uint64(1)
        for j in range(a):
            bit = (mults >> np.uint64(j)) & one
            acc ^= np.uint64(table[j]) * bit
        return (acc & np.uint64((1 << t) - 1)) ^ offs
    mults = np.asarray(multipliers, dtype=object)
    offs = np.asarray(offsets, dtype=object)
    acc = np.zeros(mults.shape, dtype=object)
    for j in range(a):
        acc ^= ((mults >> j) & 1) * table[j]
    return (acc & ((1 << t) - 1)) ^ offs


def batch_tags(
    keys: Iterable[tuple[KeyId, HashKey]],
    message: int,
    msg_len_bits: int,
    tag_len_bits: int,
) -> list[tuple[KeyId, Tag]]:
    """Tag one message under many keys, in canonical KeyId order.

    Canonical order is origin_recipient major, slot minor. Duplicate KeyIds
    are rejected.
    """
    entries = sorted(keys, key=lambda kv: kv[0])
    for (ida, _), (idb, _) in zip(entries, entries[1:]):
        if ida == idb:
            raise ValueError(f"duplicate KeyId {ida}")
    if not entries:
        return []
    mults = np.array([key.multiplier for _, key in entries], dtype=object)
    offs = np.array([key.offset for _, key in entries], dtype=object)
    for _, key in entries:
        _check_width("key.multiplier", key.multiplier, msg_len_bits)
        _check_width("key.offset", key.offset, tag_len_bits)
    tags = tags_of_arrays(mults, offs, message, msg_len_bits, tag_len_bits)
    return [(kid, int(tag)) for (kid, _), tag in zip(entries, tags)]
