"""Alignment counting, the one-sided Z statistic and null calibration."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from statistics import NormalDist
from typing import Iterable, Mapping

import numpy as np

from .embed import EmbedConfig, resolve_columns, transform_template
from .keying import GRAY2, bits_for_table
from .table import Table
from .transform import TransformError, TransformState, dft_rows, fit_transform, n_effective

DEFAULT_THRESHOLD = 6.0
DEFAULT_ALPHAS = (0.05, 0.01, 0.001)
THEORETICAL = "theoretical"
MONTE_CARLO = "monte_carlo"


class DetectError(ValueError):
    """Invalid detection input or calibration request."""


@dataclass(frozen=True)
class NullStats:
    mu: float
    sigma: float
    critical_values: Mapping[float, float]
    source: str
    m: int

    def __post_init__(self):
        if not self.sigma > 0:
            raise DetectError("null standard deviation must be positive")

    def critical(self, alpha: float) -> float:
        try:
            return self.critical_values[alpha]
        except KeyError:
            raise DetectError(f"no critical value stored for alpha={alpha}") from None

    def to_dict(self) -> dict:
        return {"mu": self.mu, "sigma": self.sigma, "source": self.source, "m": self.m,
                "critical_values": {repr(a): q for a, q in sorted(self.critical_values.items())}}


def theoretical_null(m: int, alphas: Iterable[float] = DEFAULT_ALPHAS) -> NullStats:
    """Binomial(m, 1/2) moments with standard-normal critical values."""
    if m < 1:
        raise DetectError("m must be >= 1")
    std_normal = NormalDist()
    crit = {float(a): std_normal.inv_cdf(1.0 - a) for a in alphas}
    return NullStats(m / 2.0, math.sqrt(m) / 2.0, crit, THEORETICAL, m)


def save_null(null: NullStats, path: str | Path) -> None:
    Path(path).write_text(json.dumps(null.to_dict(), indent=2) + "\n", encoding="utf-8")


def load_null(path: str | Path) -> NullStats:
    d = json.loads(Path(path).read_text(encoding="utf-8"))
    try:
        crit = {float(a): float(q) for a, q in d.get("critical_values", {}).items()}
        return NullStats(float(d["mu"]), float(d["sigma"]), crit, d.get("source", MONTE_CARLO),
                         int(d["m"]))
    except KeyError as exc:
        raise DetectError(f"{path}: missing field {exc}") from None


def count_alignments(Z: np.ndarray, key: int, bit_mode: str = GRAY2,
                     subset_size: int | None = None, bits: np.ndarray | None = None) -> np.ndarray:
    """Per-row number of effective coefficients whose Im sign matches its bit.

    Bits are regenerated from ``Z`` unless given; passing the embedding-time
    bits reproduces the known-bits setting the robustness bounds assume.
    """
    m = n_effective(Z.shape[1])
    if bits is None:
        bits = bits_for_table(Z, key, m, bit_mode, subset_size)
    elif np.shape(bits) != (Z.shape[0], m):
        raise DetectError(f"bit matrix shape {np.shape(bits)} does not match ({Z.shape[0]}, {m})")
    im = dft_rows(Z)[:, 1:m + 1].imag
    return np.sum(im * (2.0 * bits - 1.0) > 0, axis=1).astype(np.int64)


def standardized_block(table: Table, config: EmbedConfig,
                       state: TransformState | None = None) -> np.ndarray:
    """Z for the watermark columns, refitted unless a frozen state is given."""
    if state is None:
        cols = resolve_columns(table, config)
        template = transform_template(cols, config)
    else:
        if max(state.columns, default=-1) >= table.n_cols:
            raise DetectError("transform state refers to columns the table does not have")
        template = state.frozen()
    try:
        return fit_transform(table, template)[0]
    except TransformError as exc:
        raise DetectError(str(exc)) from None


def alignment_counts(table: Table, config: EmbedConfig, state: TransformState | None = None,
                     bits: np.ndarray | None = None) -> np.ndarray:
    if table.n_rows < 1:
        raise DetectError("cannot run detection on an empty table")
    Z = standardized_block(table, config, state)
    return count_alignments(Z, config.key, config.bit_mode, config.subset_size, bits)


def z_score(t_counts: np.ndarray, null: NullStats) -> float:
    t = np.asarray(t_counts, dtype=np.float64)
    if t.size < 1:
        raise DetectError("need at least one alignment count")
    return float((t.mean() - null.mu) / (null.sigma / math.sqrt(t.size)))


@dataclass
class DetectionReport:
    z: float
    t_counts: np.ndarray = field(repr=False)
    n_rows: int
    m: int
    threshold: float
    decision: bool
    null: NullStats

    @property
    def null_source(self) -> str:
        return self.null.source

    def to_dict(self) -> dict:
        return {"z": self.z, "decision": self.decision, "n_rows": self.n_rows, "m": self.m,
                "threshold": self.threshold, "mean_alignment": float(np.mean(self.t_counts)),
                "null": self.null.to_dict()}

    def to_json(self, **extra) -> str:
        return json.dumps({**self.to_dict(), **extra}, indent=2)


def detect(table: Table, config: EmbedConfig, null: NullStats | None = None,
           threshold: float = DEFAULT_THRESHOLD,
           state: TransformState | None = None,
           bits: np.ndarray | None = None) -> DetectionReport:
    counts = alignment_counts(table, config, state, bits)
    m = n_effective(len(state.columns) if state is not None else len(resolve_columns(table, config)))
    if null is None:
        null = theoretical_null(m)
    elif null.m != m:
        raise DetectError(f"null was calibrated for m={null.m}, table has m={m}")
    z = z_score(counts, null)
    return DetectionReport(z, counts, len(counts), m, float(threshold), bool(z > threshold), null)


def calibrate_null(tables: Iterable[Table], config: EmbedConfig, n_resamples: int = 100_000,
                   alphas: Iterable[float] = (0.001,), rows_per_table: int | None = None,
                   seed: int = 0, min_tables: int = 10) -> NullStats:
    """Monte-Carlo null for the detection key in ``config``.

    Alignment counts from unwatermarked tables are pooled to estimate the
    null mean and standard deviation. Critical values come from bootstrap
    tables of ``rows_per_table`` counts drawn from the pool: q_alpha is the
    ceil(alpha * n_resamples)-th largest bootstrap Z.
    """
    pooled, sizes, ms = [], [], set()
    for t in tables:
        pooled.append(alignment_counts(t, config))
        sizes.append(t.n_rows)
        ms.add(n_effective(len(resolve_columns(t, config))))
    if len(pooled) < min_tables:
        raise DetectError(f"calibration needs at least {min_tables} null tables, got {len(pooled)}")
    alphas = [float(a) for a in alphas]
    for a in alphas:
        if not 0 < a < 1 or a * n_resamples < 1:
            raise DetectError(f"alpha={a} needs at least {math.ceil(1 / a)} resamples, "
                              f"got {n_resamples}")
    if len(ms) != 1:
        raise DetectError("null tables disagree on the number of watermark columns")
    m = ms.pop()
    counts = np.concatenate(pooled)
    mu = float(counts.mean())
    sigma = float(counts.std(ddof=1))
    if not sigma > 0:
        raise DetectError("null alignment counts have zero variance")
    n = rows_per_table or int(np.median(sizes))
    freq = np.bincount(counts, minlength=m + 1) / counts.size
    rng = np.random.default_rng(seed)
    draws = rng.multinomial(n, freq, size=n_resamples)
    means = draws @ np.arange(m + 1) / n
    zs = np.sort((means - mu) / (sigma / math.sqrt(n)))[::-1]
    crit = {a: float(zs[math.ceil(a * n_resamples) - 1]) for a in alphas}
    return NullStats(mu, sigma, crit, MONTE_CARLO, m)
