"""
Wegman-Carter style authentication of the classical channel.

A message is cut into 64-bit words and hashed as a polynomial over GF(2^64) in a tree
of fixed-size chunks; every tree level consumes one fresh 64-bit key and the root is
encrypted with a 64-bit one-time pad. A message of W words therefore costs
64 · max(1, ⌈log_1024 W⌉) + 64 key bits, logarithmic in its length, and a forged
message of at most W words passes with probability below L · 1024 / 2^64.
"""
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from src.errors import AuthDesyncError, AuthenticationError, ParameterError, PoolExhaustedError
from src.protocol.keys import KeyBuffer
from src.protocol.messages import AuthTag
from src.utils.util import as_bits, get_logger

log = get_logger(__name__)

WORD_BITS = 64
CHUNK_WORDS = 1024
TAG_BITS = 64
MASK64 = (1 << 64) - 1
# x^64 + x^4 + x^3 + x + 1
_REDUCTION_SHIFTS = (1, 3, 4)

_U64 = np.uint64


@dataclass
class AuthKeyPool:
    """
    Secret authentication bits shared by Alice and Bob; each party owns a copy and
    both consume it in the same order. Bits are never handed out twice.
    """
    bits: np.ndarray
    consumed: int = 0
    total_used: int = field(default=0, repr=False)

    def __post_init__(self):
        self.bits = as_bits(self.bits).copy()
        if not 0 <= self.consumed <= len(self.bits):
            raise ParameterError(f"Consumed count {self.consumed} outside pool of {len(self.bits)} bits")

    def __len__(self):
        return len(self.bits)

    @property
    def remaining(self) -> int:
        return len(self.bits) - self.consumed

    def take(self, n_bits: int) -> np.ndarray:
        if n_bits > self.remaining:
            raise PoolExhaustedError(f"Authentication pool exhausted: need {n_bits} bits, {self.remaining} left")
        chunk = self.bits[self.consumed:self.consumed + n_bits]
        self.consumed += n_bits
        self.total_used += n_bits
        return chunk

    def extend(self, new_bits: np.ndarray):
        self.bits = np.concatenate([self.bits, as_bits(new_bits)])

    def snapshot(self) -> "AuthKeyPool":
        return AuthKeyPool(self.bits.copy(), self.consumed, self.total_used)

    def to_dict(self):
        return {"n_bits": len(self.bits), "consumed": self.consumed,
                "bits": np.packbits(self.bits).tobytes().hex()}


def levels_for(n_bytes: int) -> int:
    """Number of tree levels needed for a message of ``n_bytes`` (length word included)."""
    words = -(-n_bytes // 8) + 1
    levels, capacity = 1, CHUNK_WORDS
    while words > capacity:
        levels += 1
        capacity *= CHUNK_WORDS
    return levels


def key_bits_for(n_bytes: int) -> int:
    return WORD_BITS * levels_for(n_bytes) + TAG_BITS


def _words(message: bytes) -> np.ndarray:
    padded = message + b"\x00" * (-len(message) % 8)
    words = np.frombuffer(padded, dtype=">u8").astype(_U64)
    return np.append(words, _U64(len(message) * 8))


def _bits_to_int(bits: np.ndarray) -> int:
    return int.from_bytes(np.packbits(bits).tobytes(), "big")


def gf_mul(a: int, b: int) -> int:
    """Product in GF(2^64) modulo x^64 + x^4 + x^3 + x + 1."""
    r = 0
    while b:
        if b & 1:
            r ^= a
        a <<= 1
        b >>= 1
    while r >> 64:
        hi = r >> 64
        r = (r & MASK64) ^ hi
        for shift in _REDUCTION_SHIFTS:
            r ^= hi << shift
    return r


def _gf_mul_vec(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Element-wise GF(2^64) product of two uint64 arrays."""
    lo = np.zeros_like(a)
    hi = np.zeros_like(a)
    zero, one = _U64(0), _U64(1)
    for bit in range(64):
        mask = zero - ((b >> _U64(bit)) & one)
        lo ^= (a << _U64(bit)) & mask
        if bit:
            hi ^= (a >> _U64(64 - bit)) & mask
    # fold the high half back twice; the second overflow is at most 4 bits wide
    for _ in range(2):
        carry = np.zeros_like(hi)
        lo ^= hi
        for shift in _REDUCTION_SHIFTS:
            lo ^= hi << _U64(shift)
            carry ^= hi >> _U64(64 - shift)
        hi = carry
    return lo


def _powers(key: int, count: int) -> np.ndarray:
    powers = np.empty(count, dtype=_U64)
    value = key
    for i in range(count):
        powers[i] = value
        value = gf_mul(value, key)
    return powers


def _hash_level(words: np.ndarray, key: int) -> np.ndarray:
    """Hash every chunk of ``words`` to one word: Σ w_i · k^(len - i) with Horner ordering."""
    n = len(words)
    starts = np.arange(0, n, CHUNK_WORDS)
    chunk_len = np.minimum(CHUNK_WORDS, n - starts)
    position = np.arange(n)
    exponent = chunk_len[position // CHUNK_WORDS] - position % CHUNK_WORDS
    powers = _powers(key, int(chunk_len.max()))
    return np.bitwise_xor.reduceat(_gf_mul_vec(words, powers[exponent - 1]), starts)


def universal_hash(message: bytes, level_keys: Tuple[int, ...]) -> int:
    words = _words(message)
    for key in level_keys:
        words = _hash_level(words, key)
    if len(words) != 1:
        raise AuthenticationError("Hash tree did not reduce to a single word")
    return int(words[0])


def _compute(message: bytes, pool: AuthKeyPool) -> Tuple[str, int]:
    n_levels = levels_for(len(message))
    used = WORD_BITS * n_levels + TAG_BITS
    if used > pool.remaining:
        raise PoolExhaustedError(f"Authentication pool exhausted: need {used} bits, {pool.remaining} left")
    keys = tuple(_bits_to_int(pool.take(WORD_BITS)) for _ in range(n_levels))
    pad = _bits_to_int(pool.take(TAG_BITS))
    return f"{universal_hash(message, keys) ^ pad:016x}", used


def generate_tag(message: bytes, pool: AuthKeyPool, message_id: int = 0) -> AuthTag:
    """
    Tag a message with fresh pool bits.

    :param message: Canonical message bytes.
    :param pool: The sender's copy of the authentication pool; advanced in place.
    :param message_id: Id of the message the tag travels with.
    :return: The AUTH_TAG envelope, carrying the pool offset the key bits started at.
    """
    offset = pool.consumed
    tag, used = _compute(message, pool)
    return AuthTag(message_id, offset, used, tag)


def verify_tag(message: bytes, tag: AuthTag, pool: AuthKeyPool) -> bool:
    """
    Recompute the tag from the receiver's pool copy, consuming the same key bits.

    :raises AuthDesyncError: the tag was made at a different pool offset.
    """
    if tag.key_offset != pool.consumed:
        raise AuthDesyncError(f"Tag made at pool offset {tag.key_offset}, receiver is at {pool.consumed}")
    expected, used = _compute(message, pool)
    return used == tag.key_bits_used and expected == tag.tag


def verify_tag_at(message: bytes, tag: AuthTag, pool_bits: np.ndarray) -> bool:
    """Offline check of one tag against a snapshot of the pool bits."""
    pool = AuthKeyPool(pool_bits, consumed=0)
    if tag.key_offset + tag.key_bits_used > len(pool):
        return False
    pool.consumed = tag.key_offset
    return verify_tag(message, tag, pool)


@dataclass(frozen=True)
class Replenishment:
    delivered_key: KeyBuffer
    replenished: bool
    donated_bits: int


def replenish(pool: AuthKeyPool, final_key: KeyBuffer, n_bits: int) -> Replenishment:
    """
    Move the first ``n_bits`` of the final key into the pool; they are not delivered.
    A key too short to donate leaves the pool untouched and is delivered whole.
    """
    if n_bits < 0:
        raise ParameterError(f"Replenishment size must be >= 0, got {n_bits}")
    if n_bits == 0:
        return Replenishment(final_key, True, 0)
    if len(final_key) < n_bits:
        log.warning(f"Final key of {len(final_key)} bits cannot donate {n_bits} bits: pool not replenished")
        return Replenishment(final_key, False, 0)
    pool.extend(final_key.bits[:n_bits])
    delivered = KeyBuffer(final_key.bits[n_bits:], final_key.ticks[n_bits:], final_key.stage, final_key.leaked_bits)
    return Replenishment(delivered, True, n_bits)
