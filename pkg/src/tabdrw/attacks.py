"""Post-processing and adaptive attacks used for robustness benchmarking.

Every attack is a pure function of (table, spec): randomness comes from
``numpy.random.default_rng(spec.seed)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .embed import EmbedConfig, embed
from .keying import keyed_prng, rank_context
from .table import CATEGORICAL, DISCRETE, Table
from .transform import TransformState, fit_transform

ATTACK_KINDS = ("row_del", "col_del", "cell_del", "g_noise", "c_noise", "a_noise",
                "truncation", "quantization", "resample", "shuffle", "adv_row_del", "rewatermark")

# Strengths used when a spec leaves them unset.
DEFAULT_STRENGTH = {
    "row_del": 0.1, "col_del": 2, "cell_del": 0.1, "g_noise": 0.1, "c_noise": 0.1,
    "a_noise": 0.1, "quantization": 10, "adv_row_del": 0.1, "rewatermark": 10,
}


class AttackError(ValueError):
    """Attack parameters invalid for the table."""


@dataclass(frozen=True)
class AttackSpec:
    """One attack instance.

    ``strength`` is the fraction (row_del, cell_del, g_noise, c_noise,
    adv_row_del), the column count (col_del), the noise level (a_noise), the
    bin count (quantization) or the number of keys (rewatermark).
    """

    kind: str
    strength: float | None = None
    seed: int = 0
    target: str | None = None
    attacker_key: int = 0
    gamma: float = 0.5
    delta: float = 0.5

    def __post_init__(self):
        if self.kind not in ATTACK_KINDS:
            raise AttackError(f"unknown attack {self.kind!r}; expected one of {ATTACK_KINDS}")
        if self.strength is None and self.kind in DEFAULT_STRENGTH:
            object.__setattr__(self, "strength", DEFAULT_STRENGTH[self.kind])
        s = self.strength
        if self.kind in ("row_del", "cell_del", "g_noise", "c_noise") and not 0 <= s <= 1:
            raise AttackError(f"{self.kind} fraction must lie in [0, 1]")
        if self.kind == "adv_row_del" and not 0 <= s < 1:
            raise AttackError("adv_row_del fraction must lie in [0, 1)")
        if self.kind in ("col_del", "rewatermark") and (s < 0 or s != int(s)):
            raise AttackError(f"{self.kind} needs a non-negative integer strength")
        if self.kind == "a_noise" and s < 0:
            raise AttackError("a_noise sigma must be >= 0")
        if self.kind == "quantization" and (s < 2 or s != int(s)):
            raise AttackError("quantization needs an integer bin count >= 2")


def _snap(values: np.ndarray, table: Table, cols) -> np.ndarray:
    for j in cols:
        kind = table.schema[j].kind
        if kind.kind in (DISCRETE, CATEGORICAL):
            scale = 10.0**kind.decimals
            values[:, j] = np.round(values[:, j] * scale) / scale
    return values


def _replacement_column(table: Table, j: int, n: int, reference: Table | None,
                        rng: np.random.Generator) -> np.ndarray:
    pool = reference.values[:, j] if reference is not None else table.values[:, j]
    return pool[rng.integers(0, pool.size, n)]


def _check_reference(table: Table, reference: Table | None, kind: str) -> None:
    if reference is None:
        warnings.warn(f"{kind}: no reference table given; replacement values are bootstrapped "
                      "from the attacked table itself", stacklevel=3)
    elif reference.names != table.names or reference.n_rows == 0:
        raise AttackError(f"{kind}: reference table schema does not match the target")


def truncate_leading_digit(x: np.ndarray) -> np.ndarray:
    """Keep only the first significant digit: 123.45 -> 100, 0.0678 -> 0.06."""
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(x)
    nz = x != 0
    a = np.abs(x[nz])
    e = np.floor(np.log10(a))
    digit = np.floor(a / 10.0**e)
    e = np.where(digit >= 10, e + 1, np.where(digit < 1, e - 1, e))
    digit = np.floor(a / 10.0**e)
    # divide for negative exponents so 6 * 10**-2 lands on the nearest double 0.06
    mag = np.where(e >= 0, digit * 10.0**np.maximum(e, 0), digit / 10.0**np.maximum(-e, 0))
    out[nz] = np.sign(x[nz]) * mag
    return out


def quantize_column(col: np.ndarray, bins: int) -> np.ndarray:
    """Map values to their empirical quantile bin, then to that bin's median."""
    edges = np.quantile(col, np.linspace(0, 1, bins + 1)[1:-1])
    idx = np.searchsorted(edges, col, side="right")
    out = np.empty_like(col)
    for b in np.unique(idx):
        sel = idx == b
        out[sel] = np.median(col[sel])
    return out


def adaptive_row_deletion(table: Table, attacker_key: int, frac: float, seed: int,
                          columns: list[int] | None = None) -> Table:
    """Remove rows whose attacker-key normalized rank falls in a random interval."""
    if not 0 <= frac < 1:
        raise AttackError("fraction must lie in [0, 1)")
    if frac == 0 or table.n_rows == 0:
        return table
    cols = columns if columns is not None else table.numeric_indices
    Z, _ = fit_transform(table, TransformState(tuple(cols)))
    ranks = rank_context(Z, attacker_key).normalized_ranks
    start = np.random.default_rng(seed).uniform(0.0, 1.0 - frac)
    keep = (ranks < start) | (ranks >= start + frac)
    return table.take(np.flatnonzero(keep))


def rewatermark_attack(table: Table, n_keys: int, gamma: float, delta: float, seed: int,
                       columns: tuple[str, ...] | None = None) -> Table:
    """Embed ``n_keys`` more watermarks with fresh keys (privacy variant)."""
    if n_keys < 0:
        raise AttackError("n_keys must be >= 0")
    keys = keyed_prng(seed, "rewatermark").u64(n_keys)
    for key in keys:
        table, _ = embed(table, EmbedConfig(gamma, delta, int(key), columns=columns, privacy=True))
    return table


def apply_attack(table: Table, spec: AttackSpec, reference: Table | None = None) -> Table:
    kind, s = spec.kind, spec.strength
    rng = np.random.default_rng(spec.seed)
    n = table.n_rows
    values = np.array(table.values)
    num = table.numeric_indices

    if kind == "shuffle":
        return table.take(rng.permutation(n))
    if kind == "row_del":
        drop = rng.choice(n, size=int(round(s * n)), replace=False)
        return table.take(np.setdiff1d(np.arange(n), drop))
    if kind == "adv_row_del":
        return adaptive_row_deletion(table, spec.attacker_key, s, spec.seed)
    if kind == "rewatermark":
        return rewatermark_attack(table, int(s), spec.gamma, spec.delta, spec.seed)
    if kind == "col_del":
        count = int(s)
        if count > len(num):
            raise AttackError(f"cannot replace {count} of {len(num)} numeric columns")
        if count:
            _check_reference(table, reference, kind)
        for j in rng.choice(num, size=count, replace=False):
            values[:, j] = _replacement_column(table, j, n, reference, rng)
    elif kind in ("cell_del", "c_noise"):
        if kind == "cell_del" and s > 0:
            _check_reference(table, reference, kind)
        src = reference if kind == "cell_del" else None
        hit = rng.random(values.shape) < s
        for j in range(table.n_cols):
            rows = np.flatnonzero(hit[:, j])
            values[rows, j] = _replacement_column(table, j, rows.size, src, rng)
    elif kind == "g_noise":
        block = values[:, num]
        values[:, num] = block + rng.standard_normal(block.shape) * s * np.abs(block)
        values = _snap(values, table, num)
    elif kind == "a_noise":
        block = values[:, num]
        lo, hi = block.min(axis=0), block.max(axis=0)
        values[:, num] = block + rng.standard_normal(block.shape) * s * block.std(axis=0)
        values = _snap(values, table, num)
        values[:, num] = np.clip(values[:, num], lo, hi)
    elif kind == "truncation":
        values[:, num] = truncate_leading_digit(values[:, num])
    elif kind == "quantization":
        for j in num:
            values[:, j] = quantize_column(values[:, j], int(s))
        values = _snap(values, table, num)
    elif kind == "resample":
        if spec.target is None:
            raise AttackError("resample needs a target column")
        j = table.index(spec.target)
        if table.schema[j].kind.kind != CATEGORICAL:
            raise AttackError(f"resample target {spec.target!r} is not categorical")
        classes = np.unique(values[:, j])
        quota = np.full(classes.size, n // classes.size)
        quota[: n % classes.size] += 1
        rows = [rng.choice(np.flatnonzero(values[:, j] == c), size=q, replace=True)
                for c, q in zip(classes, quota)]
        return table.take(rng.permutation(np.concatenate(rows)))
    return table.with_values(values)


def with_seed(spec: AttackSpec, seed: int) -> AttackSpec:
    return replace(spec, seed=seed)
