"""Yeo-Johnson power transform, standardization and the unitary row DFT.

The column-wise pipeline maps a table slice X (N x p) to a standardized
matrix Z, optionally reordering columns with a keyed permutation first:
``Z[:, q] = standardize(yj(X[:, columns[perm[q]]]))``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .table import Table

LAMBDA_BOUNDS = (-5.0, 5.0)
PRESCAN_STEP = 0.5
LAMBDA_XTOL = 1e-6
IMAG_RESIDUE_TOL = 1e-8


class TransformError(ValueError):
    """Raised when a column cannot be fitted or a state does not match the data."""


class YJDomainError(TransformError):
    """The requested inverse Yeo-Johnson preimage does not exist."""


# ---------------------------------------------------------------- Yeo-Johnson

# lambdas this close to 0 or 2 use the log branch; the product lam * log1p(x)
# would otherwise underflow and the neglected term is O(lam * log1p(x)**2)
_LOG_BRANCH_TOL = 1e-12

def yj_forward(x, lam: float):
    """Yeo-Johnson transform of ``x`` (scalar or array) with parameter ``lam``."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    xp, xn = x[pos], x[~pos]
    if abs(lam) < _LOG_BRANCH_TOL:
        out[pos] = np.log1p(xp)
    else:
        out[pos] = np.expm1(lam * np.log1p(xp)) / lam
    if abs(lam - 2.0) < _LOG_BRANCH_TOL:
        out[~pos] = -np.log1p(-xn)
    else:
        out[~pos] = -np.expm1((2.0 - lam) * np.log1p(-xn)) / (2.0 - lam)
    return out if out.ndim else float(out)


def yj_inverse(y, lam: float):
    """Inverse Yeo-Johnson transform; raises YJDomainError outside the range."""
    y = np.asarray(y, dtype=np.float64)
    out = np.empty_like(y)
    pos = y >= 0
    yp, yn = y[pos], y[~pos]
    if abs(lam) < _LOG_BRANCH_TOL:
        out[pos] = np.expm1(yp)
    else:
        base = lam * yp
        if np.any(base <= -1.0):
            raise YJDomainError(f"value above the range of the transform for lambda={lam}")
        out[pos] = np.expm1(np.log1p(base) / lam)
    if abs(lam - 2.0) < _LOG_BRANCH_TOL:
        out[~pos] = -np.expm1(-yn)
    else:
        base = -(2.0 - lam) * yn
        if np.any(base <= -1.0):
            raise YJDomainError(f"value below the range of the transform for lambda={lam}")
        out[~pos] = -np.expm1(np.log1p(base) / (2.0 - lam))
    return out if out.ndim else float(out)


class _ProfileLikelihood:
    """Log-likelihood of lambda for one column with the log terms cached."""

    def __init__(self, x: np.ndarray):
        self.n = x.size
        self.log_pos = np.log1p(x[x >= 0])
        self.log_neg = np.log1p(-x[x < 0])
        self.jac = float(np.sum(np.sign(x) * np.log1p(np.abs(x))))

    def __call__(self, lams) -> np.ndarray:
        lams = np.atleast_1d(np.asarray(lams, dtype=np.float64))[:, None]
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            lp = np.where(lams == 0, 1.0, lams)
            pos = np.where(lams == 0, self.log_pos, np.expm1(lams * self.log_pos) / lp)
            ln = np.where(lams == 2, 1.0, 2.0 - lams)
            neg = np.where(lams == 2, -self.log_neg, -np.expm1((2.0 - lams) * self.log_neg) / ln)
            psi = np.concatenate([np.broadcast_to(pos, (lams.shape[0], self.log_pos.size)),
                                  np.broadcast_to(neg, (lams.shape[0], self.log_neg.size))], axis=1)
            var = np.var(psi, axis=1)
            ll = -0.5 * self.n * np.log(var) + (lams[:, 0] - 1.0) * self.jac
        return np.where(np.isfinite(ll) & (var > 0), ll, -np.inf)

    def scalar(self, lam: float) -> float:
        """Same value as ``self(lam)[0]`` without the batching overhead."""
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            pos = self.log_pos if lam == 0 else np.expm1(lam * self.log_pos) / lam
            neg = -self.log_neg if lam == 2 else -np.expm1((2.0 - lam) * self.log_neg) / (2.0 - lam)
            psi = np.concatenate((pos, neg))
            dev = psi - psi.sum() / self.n
            var = float(dev @ dev) / self.n
            ll = -0.5 * self.n * math.log(var) + (lam - 1.0) * self.jac if var > 0 else -math.inf
        return ll if math.isfinite(ll) else -math.inf


def yj_log_likelihood(column: np.ndarray, lam: float) -> float:
    """Gaussian profile log-likelihood of ``lam`` for one column."""
    return float(_ProfileLikelihood(np.asarray(column, dtype=np.float64))(lam)[0])


def fit_lambda(column: np.ndarray) -> float:
    """Maximum-likelihood Yeo-Johnson parameter on [-5, 5].

    A coarse 0.5-step scan picks the starting bracket, then bounded Brent
    refines it. The column is sorted first so the result does not depend on
    row order.
    """
    x = np.sort(np.asarray(column, dtype=np.float64))
    if x.size < 2 or x[0] == x[-1]:
        raise TransformError("cannot fit a transform on a constant column")
    ll = _ProfileLikelihood(x)
    lo, hi = LAMBDA_BOUNDS
    grid = np.arange(lo, hi + PRESCAN_STEP / 2, PRESCAN_STEP)
    scores = ll(grid)
    best = int(np.argmax(scores))
    a = max(lo, grid[best] - PRESCAN_STEP)
    b = min(hi, grid[best] + PRESCAN_STEP)
    res = minimize_scalar(lambda lam: -ll.scalar(lam), bounds=(a, b),
                          method="bounded", options={"xatol": LAMBDA_XTOL})
    if np.isfinite(res.fun) and -res.fun >= scores[best]:
        return float(res.x)
    return float(grid[best])


# ------------------------------------------------------------ column pipeline

@dataclass(frozen=True)
class YjColumnParams:
    lam: float
    mean: float
    std: float

    def __post_init__(self):
        if not np.isfinite(self.lam):
            raise TransformError("lambda must be finite")
        if not self.std > 0:
            raise TransformError("std must be positive")


@dataclass(frozen=True)
class TransformState:
    """Everything needed to map table columns to Z and back.

    ``params[q]`` belongs to transformed column q, i.e. to table column
    ``columns[permutation[q]]``.
    """

    columns: tuple[int, ...]
    params: tuple[YjColumnParams, ...] = ()
    permutation: tuple[int, ...] | None = None
    refit: bool = True

    def __post_init__(self):
        cols = tuple(int(c) for c in self.columns)
        if len(set(cols)) != len(cols) or any(c < 0 for c in cols):
            raise TransformError("watermark column indices must be unique and non-negative")
        perm = None if self.permutation is None else tuple(int(q) for q in self.permutation)
        if perm is not None and sorted(perm) != list(range(len(cols))):
            raise TransformError("permutation is not a bijection on the watermark columns")
        if self.params and len(self.params) != len(cols):
            raise TransformError("one parameter set per watermark column is required")
        object.__setattr__(self, "columns", cols)
        object.__setattr__(self, "permutation", perm)
        object.__setattr__(self, "params", tuple(self.params))

    @property
    def p(self) -> int:
        return len(self.columns)

    @property
    def order(self) -> list[int]:
        """Table column indices in transformed order."""
        perm = self.permutation or range(self.p)
        return [self.columns[q] for q in perm]

    def frozen(self) -> "TransformState":
        return TransformState(self.columns, self.params, self.permutation, refit=False)

    def with_mode(self, refit: bool) -> "TransformState":
        return TransformState(self.columns, self.params, self.permutation, refit=refit)


def _fit_column(col: np.ndarray) -> YjColumnParams:
    lam = fit_lambda(col)
    psi = np.sort(yj_forward(col, lam))
    mean = float(np.mean(psi))
    std = float(np.sqrt(np.mean((psi - mean) ** 2)))
    if not std > 0:
        raise TransformError("transformed column has zero variance")
    return YjColumnParams(lam, mean, std)


def fit_transform(table: Table | np.ndarray, template: TransformState
                  ) -> tuple[np.ndarray, TransformState]:
    """Standardized matrix Z and the state that produced it.

    In refit mode the parameters are estimated on this table; otherwise the
    template's parameters are reused unchanged.
    """
    values = table.values if isinstance(table, Table) else np.asarray(table, dtype=np.float64)
    if max(template.columns, default=-1) >= values.shape[1]:
        raise TransformError("watermark column index outside the table")
    X = values[:, template.order]
    if template.refit:
        params = []
        for q in range(X.shape[1]):
            try:
                params.append(_fit_column(X[:, q]))
            except TransformError as exc:
                raise TransformError(f"column {template.order[q]}: {exc}") from None
        state = TransformState(template.columns, tuple(params), template.permutation, True)
    else:
        if not template.params:
            raise TransformError("frozen transform needs fitted parameters")
        state = template
    Z = np.empty_like(X)
    for q, prm in enumerate(state.params):
        Z[:, q] = (yj_forward(X[:, q], prm.lam) - prm.mean) / prm.std
    return Z, state


def inverse_transform(Z: np.ndarray, state: TransformState) -> np.ndarray:
    """Map Z back to the watermark columns, returned in ``state.columns`` order."""
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim != 2 or Z.shape[1] != state.p or not state.params:
        raise TransformError("matrix shape does not match the transform state")
    X = np.empty_like(Z)
    for q, prm in enumerate(state.params):
        X[:, q] = yj_inverse(Z[:, q] * prm.std + prm.mean, prm.lam)
    out = np.empty_like(X)
    perm = state.permutation or tuple(range(state.p))
    out[:, list(perm)] = X
    return out


# --------------------------------------------------------------------- DFT

@functools.lru_cache(maxsize=64)
def dft_matrix(p: int) -> np.ndarray:
    """Unitary DFT matrix F with F[t, n] = exp(-2 pi i t n / p) / sqrt(p)."""
    idx = np.arange(p)
    phase = (np.outer(idx, idx) % p) * (2.0 * np.pi / p)
    F = (np.cos(phase) - 1j * np.sin(phase)) / np.sqrt(p)
    F.setflags(write=False)
    return F


def n_effective(p: int) -> int:
    return (p - 1) // 2


@dataclass(frozen=True)
class SpectralRow:
    entries: np.ndarray

    @property
    def p(self) -> int:
        return self.entries.shape[-1]

    @property
    def m(self) -> int:
        return n_effective(self.p)


def dft_rows(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    p = X.shape[-1]
    if p < 2:
        raise TransformError("the DFT needs at least two columns")
    return X @ dft_matrix(p)


def idft_rows(Y: np.ndarray) -> np.ndarray:
    Y = np.asarray(Y, dtype=np.complex128)
    X = Y @ np.conj(dft_matrix(Y.shape[-1]))
    scale = max(1.0, float(np.max(np.abs(Y)))) if Y.size else 1.0
    if X.size and np.max(np.abs(X.imag)) > IMAG_RESIDUE_TOL * scale:
        raise TransformError("spectrum is not conjugate-symmetric; inverse is not real")
    return X.real.copy()


def dft_row(x: Sequence[float]) -> SpectralRow:
    return SpectralRow(dft_rows(np.asarray(x, dtype=np.float64)[None, :])[0])


def idft_row(y: SpectralRow | np.ndarray) -> np.ndarray:
    entries = y.entries if isinstance(y, SpectralRow) else np.asarray(y)
    return idft_rows(entries[None, :])[0]


# ------------------------------------------------------------ persistence

def save_state(state: TransformState, path: str | Path) -> None:
    lines = [
        f"refit={int(state.refit)}",
        "columns=" + ",".join(map(str, state.columns)),
        "permutation=" + ("" if state.permutation is None else ",".join(map(str, state.permutation))),
    ]
    for q, prm in enumerate(state.params):
        lines += [f"lambda.{q}={prm.lam!r}", f"mean.{q}={prm.mean!r}", f"std.{q}={prm.std!r}"]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v.strip())


def load_state(path: str | Path) -> TransformState:
    kv = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip() and not line.startswith("#"):
            key, _, value = line.partition("=")
            kv[key.strip()] = value.strip()
    try:
        columns = _ints(kv["columns"])
        perm_text = kv.get("permutation", "")
        params = tuple(
            YjColumnParams(float(kv[f"lambda.{q}"]), float(kv[f"mean.{q}"]), float(kv[f"std.{q}"]))
            for q in range(len(columns))
        ) if "lambda.0" in kv else ()
        return TransformState(columns, params, _ints(perm_text) if perm_text else None,
                              refit=kv.get("refit", "1") == "1")
    except KeyError as exc:
        raise TransformError(f"{path}: missing key {exc}") from None
