"""Synthetic multivariate Gaussian tables driven by the keyed stream."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .keying import keyed_prng
from .table import ColumnKind, ColumnSchema, Table


@dataclass(frozen=True)
class GaussianSpec:
    """Rows are i.i.d. N(0, Sigma).

    ``covariance`` is ``"identity"``, ``"ar1"`` (with ``rho``) or
    ``"explicit"`` (with ``matrix``).
    """

    n_rows: int
    p: int
    covariance: str = "identity"
    rho: float = 0.0
    matrix: np.ndarray | None = None
    seed: int = 0

    def __post_init__(self):
        if self.n_rows < 0 or self.p < 3:
            raise ValueError("need n_rows >= 0 and p >= 3")
        if self.covariance not in ("identity", "ar1", "explicit"):
            raise ValueError(f"unknown covariance {self.covariance!r}")
        if self.covariance == "ar1" and not -1 < self.rho < 1:
            raise ValueError("AR(1) coefficient must lie in (-1, 1)")
        if self.covariance == "explicit":
            if self.matrix is None or np.shape(self.matrix) != (self.p, self.p):
                raise ValueError("explicit covariance needs a p x p matrix")
            if not np.allclose(self.matrix, np.transpose(self.matrix)):
                raise ValueError("covariance matrix must be symmetric")

    def sigma(self) -> np.ndarray:
        if self.covariance == "identity":
            return np.eye(self.p)
        if self.covariance == "ar1":
            idx = np.arange(self.p)
            return self.rho ** np.abs(idx[:, None] - idx[None, :])
        return np.asarray(self.matrix, dtype=np.float64)


def parse_covariance(text: str) -> tuple[str, float]:
    """``"identity"`` or ``"ar1:<rho>"``."""
    if text == "identity":
        return "identity", 0.0
    kind, _, rho = text.partition(":")
    if kind == "ar1" and rho:
        return "ar1", float(rho)
    raise ValueError(f"covariance must be 'identity' or 'ar1:<rho>', got {text!r}")


def cholesky_factor(sigma: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        raise ValueError("covariance matrix is not positive definite") from None


def gaussian_matrix(spec: GaussianSpec) -> np.ndarray:
    L = cholesky_factor(spec.sigma())
    G = keyed_prng(spec.seed, "synth").normal(spec.n_rows * spec.p).reshape(spec.n_rows, spec.p)
    return G @ L.T


def continuous_schema(p: int, prefix: str = "x") -> tuple[ColumnSchema, ...]:
    return tuple(ColumnSchema(f"{prefix}{j}", ColumnKind.continuous()) for j in range(p))


def generate(spec: GaussianSpec) -> Table:
    return Table(continuous_schema(spec.p), gaussian_matrix(spec))


def add_gaussian_noise(table: Table, sigma: float, seed: int) -> Table:
    """Add i.i.d. N(0, sigma^2) to every numeric cell; categorical codes are kept."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0:
        return table
    cols = table.numeric_indices
    noise = keyed_prng(seed, "noise").normal(table.n_rows * len(cols))
    values = np.array(table.values)
    values[:, cols] += sigma * noise.reshape(table.n_rows, len(cols))
    return table.with_values(values)


def add_label_column(table: Table, seed: int, weights=(0.7, 0.3), name: str = "label") -> Table:
    """Append an independent categorical column with the given class weights."""
    w = np.asarray(weights, dtype=np.float64)
    u = keyed_prng(seed, "label").uniform(table.n_rows)
    codes = np.searchsorted(np.cumsum(w / w.sum()), u, side="right").astype(np.float64)
    codes = np.minimum(codes, len(w) - 1)
    labels = [f"c{k}" for k in range(len(w))]
    schema = table.schema + (ColumnSchema(name, ColumnKind.categorical(labels)),)
    return Table(schema, np.column_stack([table.values, codes]))
