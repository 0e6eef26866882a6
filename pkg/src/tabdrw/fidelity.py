"""Model-free fidelity metrics between an original and a released table."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import ks_2samp

from .table import Table


class FidelityError(ValueError):
    """Inputs cannot be compared."""


def ks_statistic(a: np.ndarray, b: np.ndarray) -> float:
    """Largest gap between the two empirical CDFs."""
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if a.size == 0 or b.size == 0:
        raise FidelityError("KS statistic needs non-empty samples")
    return float(ks_2samp(a, b, method="asymp").statistic)


def tvd(a: np.ndarray, b: np.ndarray, n_categories: int | None = None) -> float:
    """Total variation distance between category frequencies of integer codes."""
    a, b = np.asarray(a).astype(np.int64), np.asarray(b).astype(np.int64)
    if a.size == 0 or b.size == 0:
        raise FidelityError("TVD needs non-empty samples")
    k = n_categories or int(max(a.max(), b.max())) + 1
    if max(a.max(), b.max()) >= k or min(a.min(), b.min()) < 0:
        raise FidelityError("codes fall outside the shared codebook")
    pa = np.bincount(a, minlength=k) / a.size
    pb = np.bincount(b, minlength=k) / b.size
    return float(0.5 * np.abs(pa - pb).sum())


def empirical_w2_1d(a: np.ndarray, b: np.ndarray) -> float:
    """Wasserstein-2 distance between equal-size samples via sorted matching."""
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise FidelityError("samples must have equal length")
    return float(np.sqrt(np.mean((np.sort(a) - np.sort(b)) ** 2)))


def _check_schemas(real_t: Table, synth_t: Table) -> None:
    if real_t.names != synth_t.names:
        raise FidelityError("tables have different columns")
    for c1, c2 in zip(real_t.schema, synth_t.schema):
        if c1.kind.is_numeric != c2.kind.is_numeric or c1.kind.codebook != c2.kind.codebook:
            raise FidelityError(f"column {c1.name!r} has mismatched kinds")


def column_distances(real_t: Table, synth_t: Table) -> dict[str, float]:
    _check_schemas(real_t, synth_t)
    out = {}
    for j, col in enumerate(real_t.schema):
        a, b = real_t.values[:, j], synth_t.values[:, j]
        if col.kind.is_numeric:
            out[col.name] = ks_statistic(a, b)
        else:
            out[col.name] = tvd(a, b, len(col.kind.codebook))
    return out


def density_score(real_t: Table, synth_t: Table) -> float:
    return 1.0 - float(np.mean(list(column_distances(real_t, synth_t).values())))


def _corr_gaps(real_t: Table, synth_t: Table) -> tuple[list[float], list[tuple[str, str]]]:
    _check_schemas(real_t, synth_t)
    num = real_t.numeric_indices
    if len(num) < 2:
        raise FidelityError("correlation score needs at least two numeric columns")
    gaps, skipped = [], []
    A, B = real_t.values[:, num], synth_t.values[:, num]
    ok = (A.std(axis=0) > 0) & (B.std(axis=0) > 0)
    with np.errstate(invalid="ignore", divide="ignore"):
        ra, rb = np.corrcoef(A, rowvar=False), np.corrcoef(B, rowvar=False)
    for x in range(len(num)):
        for y in range(x + 1, len(num)):
            if ok[x] and ok[y]:
                gaps.append(abs(ra[x, y] - rb[x, y]))
            else:
                skipped.append((real_t.names[num[x]], real_t.names[num[y]]))
    if not gaps:
        raise FidelityError("every numeric column pair involves a constant column")
    return gaps, skipped


def corr_score(real_t: Table, synth_t: Table) -> float:
    """1 - mean |r_real - r_synth| / 2 over numeric column pairs."""
    gaps, _ = _corr_gaps(real_t, synth_t)
    return float(np.clip(1.0 - np.mean(gaps) / 2.0, 0.0, 1.0))


@dataclass
class FidelityReport:
    density: float
    corr: float
    mean_abs_corr_diff: float
    per_column_distances: dict[str, float] = field(default_factory=dict)
    skipped_pairs: list[tuple[str, str]] = field(default_factory=list)

    def to_json(self, **extra) -> str:
        d = {"density": self.density, "corr": self.corr,
             "mean_abs_corr_diff": self.mean_abs_corr_diff,
             "per_column_distances": self.per_column_distances,
             "skipped_pairs": [list(p) for p in self.skipped_pairs]}
        return json.dumps({**d, **extra}, indent=2)


def fidelity_report(real_t: Table, synth_t: Table) -> FidelityReport:
    dists = column_distances(real_t, synth_t)
    gaps, skipped = _corr_gaps(real_t, synth_t)
    mean_gap = float(np.mean(gaps))
    return FidelityReport(1.0 - float(np.mean(list(dists.values()))),
                          float(np.clip(1.0 - mean_gap / 2.0, 0.0, 1.0)), mean_gap, dists, skipped)
