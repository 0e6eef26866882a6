"""Watermark embedding by aligning the signs of imaginary DFT coefficients.

Each row of the standardized watermark block is moved to the frequency
domain. For every effective coefficient whose imaginary sign disagrees with
the row's key-derived bit, and whose |Im| is among the ceil(gamma*m)
smallest of the row, the imaginary part is replaced by ``-delta * Im``.
With gamma = delta = 1 every mismatched sign is flipped.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .keying import GRAY2, BIT_MODES, bits_for_table, derive_permutation, parse_key
from .table import CATEGORICAL, DISCRETE, Table, TableError, with_bounds_from_data
from .transform import (TransformState, dft_rows, fit_transform, idft_rows,
                        inverse_transform, n_effective)


class EmbedError(ValueError):
    """Invalid embedding configuration for the given table."""


@dataclass(frozen=True)
class EmbedConfig:
    gamma: float
    delta: float
    key: int
    columns: tuple[str, ...] | None = None
    privacy: bool = False
    bit_mode: str = GRAY2
    postprocess: bool = True
    clip_continuous: bool = False
    include_categorical: bool = False
    subset_size: int | None = None

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise EmbedError(f"gamma={self.gamma} outside [0, 1]")
        if not -1.0 <= self.delta <= 1.0:
            raise EmbedError(f"delta={self.delta} outside [-1, 1]")
        if self.bit_mode not in BIT_MODES:
            raise EmbedError(f"unknown bit mode {self.bit_mode!r}")
        object.__setattr__(self, "key", parse_key(self.key))
        if self.columns is not None:
            object.__setattr__(self, "columns", tuple(self.columns))


def resolve_columns(table: Table, config: EmbedConfig) -> list[int]:
    """Indices of the watermark columns, in table order."""
    if config.columns is None:
        cols = [j for j, c in enumerate(table.schema)
                if c.kind.is_numeric or config.include_categorical]
    else:
        try:
            cols = [table.index(name) for name in config.columns]
        except TableError as exc:
            raise EmbedError(str(exc)) from None
        if len(set(cols)) != len(cols):
            raise EmbedError("watermark columns listed more than once")
        for j in cols:
            if table.schema[j].kind.kind == CATEGORICAL and not config.include_categorical:
                raise EmbedError(f"column {table.names[j]!r} is categorical; "
                                 "enable include_categorical to watermark it")
    if len(cols) < 3:
        raise EmbedError(f"need at least 3 watermark columns, got {len(cols)}")
    if table.n_rows:
        for j in cols:
            col = table.values[:, j]
            if col.min() == col.max():
                raise EmbedError(f"column {table.names[j]!r} is constant and cannot carry a watermark")
    return cols


def transform_template(columns: Sequence[int], config: EmbedConfig) -> TransformState:
    perm = derive_permutation(config.key, len(columns)) if config.privacy else None
    return TransformState(tuple(columns), (), perm, refit=True)


def _smallest_k(magnitudes: np.ndarray, k: int) -> np.ndarray:
    """Mask of the k smallest entries per row (ties resolved by position)."""
    if k <= 0:
        return np.zeros(magnitudes.shape, dtype=bool)
    order = np.argsort(magnitudes, axis=1, kind="stable")
    mask = np.zeros(magnitudes.shape, dtype=bool)
    np.put_along_axis(mask, order[:, :k], True, axis=1)
    return mask


def modify_rows(Y: np.ndarray, bits: np.ndarray, gamma: float, delta: float
                ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Apply the soft sign alignment to a batch of spectra.

    Returns the new spectra, the N x m mask of modified coefficients and the
    per-row |Im| threshold (NaN when gamma selects nothing).
    """
    Y = np.asarray(Y, dtype=np.complex128)
    p = Y.shape[1]
    m = n_effective(p)
    bits = np.asarray(bits)
    if bits.shape != (Y.shape[0], m):
        raise EmbedError(f"bit matrix shape {bits.shape} does not match ({Y.shape[0]}, {m})")
    eff = Y[:, 1:m + 1]
    im = eff.imag
    k = math.ceil(gamma * m - 1e-12)
    small = _smallest_k(np.abs(im), k)
    mask = (im * (2.0 * bits - 1.0) < 0) & small
    thresholds = np.sort(np.abs(im), axis=1)[:, k - 1] if k > 0 else np.full(Y.shape[0], np.nan)
    new_eff = np.where(mask, eff.real - 1j * delta * im, eff)
    out = Y.copy()
    out[:, 1:m + 1] = new_eff
    out[:, p - m:p] = np.where(mask[:, ::-1], np.conj(new_eff[:, ::-1]), Y[:, p - m:p])
    return out, mask, thresholds


def modify_row(y, bits: Sequence[int], gamma: float, delta: float):
    """Single-row form of :func:`modify_rows`; returns (spectrum, S)."""
    entries = y.entries if hasattr(y, "entries") else np.asarray(y)
    out, mask, _ = modify_rows(entries[None, :], np.asarray(bits)[None, :], gamma, delta)
    return out[0], {int(t) + 1 for t in np.flatnonzero(mask[0])}


def embed_matrix(Z: np.ndarray, key: int, gamma: float, delta: float, bit_mode: str = GRAY2,
                 subset_size: int | None = None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Watermark a standardized matrix directly.

    Returns (Z_wm, modified mask, bits used for embedding).
    """
    m = n_effective(Z.shape[1])
    bits = bits_for_table(Z, key, m, bit_mode, subset_size)
    Y, mask, _ = modify_rows(dft_rows(Z), bits, gamma, delta)
    return idft_rows(Y), mask, bits


@dataclass
class EmbedReport:
    columns: list[str]
    m: int
    mask: np.ndarray = field(repr=False)
    bits: np.ndarray = field(repr=False)
    thresholds: np.ndarray = field(repr=False)
    n_rounded: int
    rounding_magnitude: float
    n_clipped: int
    clip_ratio: float
    state: TransformState = field(repr=False)

    @property
    def s_sizes(self) -> np.ndarray:
        return self.mask.sum(axis=1)

    def modified_sets(self) -> list[set[int]]:
        return [{int(t) + 1 for t in np.flatnonzero(row)} for row in self.mask]

    def to_dict(self) -> dict:
        hist = Counter(int(s) for s in self.s_sizes)
        n_slots = self.mask.size
        return {
            "columns": self.columns,
            "n_rows": int(self.mask.shape[0]),
            "m": self.m,
            "modified_fraction": float(self.mask.sum() / n_slots) if n_slots else 0.0,
            "s_size_histogram": {str(k): hist.get(k, 0) for k in range(self.m + 1)},
            "rounded_cells": self.n_rounded,
            "rounding_magnitude": self.rounding_magnitude,
            "clipped_cells": self.n_clipped,
            "clipping_ratio": self.clip_ratio,
        }

    def to_json(self, **extra) -> str:
        return json.dumps({**self.to_dict(), **extra}, indent=2)


def _round_clip(values: np.ndarray, table: Table, columns: Sequence[int], clip_continuous: bool
                ) -> tuple[np.ndarray, int, float, int]:
    out = values.copy()
    n_rounded, n_clipped, magnitude = 0, 0, 0.0
    for j in columns:
        col = table.schema[j]
        kind = col.kind
        if kind.kind in (DISCRETE, CATEGORICAL):
            scale = 10.0**kind.decimals
            snapped = np.round(out[:, j] * scale) / scale
            changed = snapped != out[:, j]
            n_rounded += int(changed.sum())
            magnitude += float(np.abs(snapped - out[:, j]).sum())
            out[:, j] = snapped
        if kind.kind == CATEGORICAL:
            lo, hi = 0.0, float(len(kind.codebook) - 1)
        elif kind.kind == DISCRETE or clip_continuous:
            lo = -np.inf if col.lower is None else col.lower
            hi = np.inf if col.upper is None else col.upper
        else:
            continue
        clipped = np.clip(out[:, j], lo, hi)
        n_clipped += int((clipped != out[:, j]).sum())
        out[:, j] = clipped
    mean_mag = magnitude / n_rounded if n_rounded else 0.0
    return out, n_rounded, mean_mag, n_clipped


def round_and_clip(values: np.ndarray, table: Table, columns: Sequence[int] | None = None,
                   clip_continuous: bool = True) -> np.ndarray:
    """Snap discrete and categorical cells to their grid, then clip to bounds.

    Rounding is half-to-even on the 10**-decimals grid. Missing bounds fall
    back to the observed range of ``table``.
    """
    table = with_bounds_from_data(table)
    cols = range(table.n_cols) if columns is None else columns
    return _round_clip(np.asarray(values, dtype=np.float64), table, cols, clip_continuous)[0]


def embed(table: Table, config: EmbedConfig) -> tuple[Table, EmbedReport]:
    if table.n_rows < 1:
        raise EmbedError("cannot watermark an empty table")
    cols = resolve_columns(table, config)
    Z, state = fit_transform(table, transform_template(cols, config))
    Zw, mask, bits = embed_matrix(Z, config.key, config.gamma, config.delta,
                            config.bit_mode, config.subset_size)
    # thresholds are recomputed from the pre-watermark spectra for the report
    _, _, thresholds = modify_rows(dft_rows(Z), np.zeros(mask.shape, dtype=np.uint8),
                                   config.gamma, config.delta)
    values = np.array(table.values)
    # rows with an empty modified set keep their exact original values
    touched = np.flatnonzero(mask.any(axis=1))
    values[np.ix_(touched, cols)] = inverse_transform(Zw, state)[touched]
    n_rounded, magnitude, n_clipped = 0, 0.0, 0
    if config.postprocess:
        bounded = with_bounds_from_data(table)
        values, n_rounded, magnitude, n_clipped = _round_clip(values, bounded, cols,
                                                              config.clip_continuous)
    n_cells = table.n_rows * len(cols)
    report = EmbedReport(
        columns=[table.names[j] for j in cols], m=n_effective(len(cols)), mask=mask, bits=bits,
        thresholds=thresholds, n_rounded=n_rounded, rounding_magnitude=magnitude,
        n_clipped=n_clipped, clip_ratio=n_clipped / n_cells, state=state,
    )
    return table.with_values(values), report
