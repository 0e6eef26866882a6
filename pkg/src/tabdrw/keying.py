"""Key-derived randomness and the rank-based Gray-code bit generator.

All keyed randomness comes from SplitMix64 run in counter mode. The stream
for ``(key, purpose)`` starts from an 8-byte BLAKE2b digest of
``b"tabdrw/v1" + key (8 bytes, little endian) + purpose``; output ``i`` is
``mix(seed + (i + 1) * 0x9E3779B97F4A7C15)`` with the standard SplitMix64
finalizer. Changing any of this breaks compatibility with existing
watermarks, so the version tag must be bumped alongside.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
MIX1 = np.uint64(0xBF58476D1CE4E5B9)
MIX2 = np.uint64(0x94D049BB133111EB)
U64_MAX = (1 << 64) - 1
STREAM_TAG = b"tabdrw/v1"

GRAY2 = "gray2"
GRAY1 = "gray1"
BIT_MODES = (GRAY2, GRAY1)


def parse_key(text: str | int) -> int:
    """Accept a decimal or 0x-prefixed hexadecimal 64-bit key."""
    if isinstance(text, (int, np.integer)):
        value = int(text)
    else:
        s = text.strip().lower()
        try:
            value = int(s, 16) if s.startswith("0x") else int(s, 10)
        except ValueError:
            raise ValueError(f"invalid key {text!r}: expected decimal or 0x-hex") from None
    if not 0 <= value <= U64_MAX:
        raise ValueError(f"key {value} does not fit in 64 bits")
    return value


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * MIX1
    z = (z ^ (z >> np.uint64(27))) * MIX2
    return z ^ (z >> np.uint64(31))


class KeyedStream:
    """Counter-mode SplitMix64 stream; draws are consumed in order."""

    def __init__(self, seed: int):
        self.seed = np.uint64(seed & U64_MAX)
        self.counter = 0

    def u64(self, n: int) -> np.ndarray:
        idx = np.arange(self.counter + 1, self.counter + n + 1, dtype=np.uint64)
        self.counter += n
        with np.errstate(over="ignore"):
            return _mix(self.seed + idx * GOLDEN)

    def uniform(self, n: int) -> np.ndarray:
        """Doubles in [0, 1) with 53 random bits."""
        return (self.u64(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def randbelow(self, bound: int) -> int:
        """Unbiased integer in [0, bound) by rejection sampling."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        limit = (1 << 64) - ((1 << 64) % bound)
        while True:
            u = int(self.u64(1)[0])
            if u < limit:
                return u % bound

    def normal(self, n: int) -> np.ndarray:
        """Standard normal draws by Box-Muller, two per pair of uniforms."""
        k = (n + 1) // 2
        u = self.u64(2 * k) >> np.uint64(11)
        u1 = (u[0::2].astype(np.float64) + 1.0) * 2.0**-53  # (0, 1], keeps log finite
        u2 = u[1::2].astype(np.float64) * 2.0**-53
        r = np.sqrt(-2.0 * np.log(u1))
        z = np.empty(2 * k)
        z[0::2] = r * np.cos(2.0 * np.pi * u2)
        z[1::2] = r * np.sin(2.0 * np.pi * u2)
        return z[:n]


def stream_seed(key: int, purpose: str) -> int:
    digest = hashlib.blake2b(STREAM_TAG + parse_key(key).to_bytes(8, "little")
                             + purpose.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def keyed_prng(key: int, purpose: str) -> KeyedStream:
    return KeyedStream(stream_seed(key, purpose))


def derive_subset(key: int, p: int, size: int | None = None) -> list[int]:
    """Key-selected column subset of size ceil(p/2) (or ``size``), sorted."""
    if p < 2:
        raise ValueError("subset selection needs p >= 2")
    k = math.ceil(p / 2) if size is None else size
    if not 1 <= k <= p:
        raise ValueError(f"subset size {k} outside [1, {p}]")
    rng = keyed_prng(key, "subset")
    pool = list(range(p))
    for i in range(k):
        j = i + rng.randbelow(p - i)
        pool[i], pool[j] = pool[j], pool[i]
    return sorted(pool[:k])


def derive_permutation(key: int, p: int) -> tuple[int, ...]:
    if p < 1:
        raise ValueError("permutation needs p >= 1")
    rng = keyed_prng(key, "perm")
    perm = list(range(p))
    for i in range(p - 1, 0, -1):
        j = rng.randbelow(i + 1)
        perm[i], perm[j] = perm[j], perm[i]
    return tuple(perm)


def invert_permutation(perm) -> tuple[int, ...]:
    inv = [0] * len(perm)
    for q, c in enumerate(perm):
        inv[c] = q
    return tuple(inv)


# ------------------------------------------------------------------ ranks

@dataclass(frozen=True)
class RankContext:
    subset: tuple[int, ...]
    scores: np.ndarray
    ranks: np.ndarray
    normalized_ranks: np.ndarray


def rank_context(Z: np.ndarray, key: int, subset_size: int | None = None) -> RankContext:
    """Ascending ranks of the key-subset row sums.

    Equal scores are ordered by the full standardized row, compared
    lexicographically, so the ranking never depends on row order. Rows that
    are identical in every column share the smallest rank of their group.
    """
    Z = np.asarray(Z, dtype=np.float64)
    n, p = Z.shape
    if n < 1:
        raise ValueError("ranking needs at least one row")
    subset = tuple(derive_subset(key, p, subset_size))
    scores = Z[:, list(subset)].sum(axis=1)
    order = np.lexsort(tuple(Z[:, c] for c in range(p - 1, -1, -1)) + (scores,))
    s_sorted, z_sorted = scores[order], Z[order]
    same = np.zeros(n, dtype=bool)
    if n > 1:
        same[1:] = (s_sorted[1:] == s_sorted[:-1]) & np.all(z_sorted[1:] == z_sorted[:-1], axis=1)
    pos = np.arange(n)
    group_start = np.maximum.accumulate(np.where(same, 0, pos))
    ranks = np.empty(n, dtype=np.int64)
    ranks[order] = group_start
    norm = ranks / (n - 1) if n > 1 else np.zeros(n)
    return RankContext(subset, scores, ranks, norm)


# ------------------------------------------------------------------- bits

@dataclass(frozen=True)
class BitSequence:
    bits: tuple[int, ...]
    mode: str = GRAY2

    @property
    def m(self) -> int:
        return len(self.bits)


def _check_mode(mode: str) -> None:
    if mode not in BIT_MODES:
        raise ValueError(f"unknown bit mode {mode!r}; expected one of {BIT_MODES}")


def n_levels(m: int, mode: str = GRAY2) -> int:
    return math.ceil(m / 2) if mode == GRAY2 else m


def leaf_index(rank_norm: float, m: int, mode: str = GRAY2) -> int:
    depth = n_levels(m, mode)
    return min(int(math.floor(2**depth * rank_norm)), 2**depth - 1)


def bits_matrix(ranks_norm: np.ndarray, m: int, mode: str = GRAY2) -> np.ndarray:
    """Vectorized bit generation: one row of m bits per normalized rank."""
    _check_mode(mode)
    r = np.asarray(ranks_norm, dtype=np.float64)
    if m < 1:
        raise ValueError("m must be >= 1")
    if np.any((r < 0) | (r > 1)):
        raise ValueError("normalized ranks must lie in [0, 1]")
    cols = []
    for j in range(1, n_levels(m, mode) + 1):
        k = np.minimum(np.floor(r * 2.0**j).astype(np.int64), 2**j - 1)
        hi = ((k % 4 == 0) | (k % 4 == 3)).astype(np.uint8)
        cols.append(hi)
        if mode == GRAY2:
            cols.append(1 - hi)
    return np.stack(cols[:m], axis=-1)


def bits_for_rank(rank_norm: float, m: int, mode: str = GRAY2) -> BitSequence:
    if not 0.0 <= rank_norm <= 1.0:
        raise ValueError(f"normalized rank {rank_norm} outside [0, 1]")
    return BitSequence(tuple(int(b) for b in bits_matrix(np.array([rank_norm]), m, mode)[0]), mode)


def bits_for_table(Z: np.ndarray, key: int, m: int, mode: str = GRAY2,
                   subset_size: int | None = None) -> np.ndarray:
    """N x m matrix of pseudorandom bits, one row per table row."""
    ctx = rank_context(Z, key, subset_size)
    return bits_matrix(ctx.normalized_ranks, m, mode)
