"""Closed-form distortion predictions and robustness lower bounds.

Everything here works in the standardized domain. A row x of length p is
watermarked on a set S of effective frequencies; the sine kernel
``beta_S(n, j) = sum_{k in S} sin(2 pi k n / p) sin(2 pi k j / p)`` drives
all distortion formulas, and the robustness bounds are built from the
standard normal CDF and the exponential integral E1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist
from typing import Iterable

import numpy as np

EULER_GAMMA = 0.57721566490153286061
_E1_EPS = 1e-16
_E1_MAX_ITER = 500


class BoundError(ValueError):
    """Parameters outside the domain of a bound."""


@dataclass(frozen=True)
class SpectrumSet:
    S: frozenset[int]
    p: int

    def __init__(self, S: Iterable[int], p: int):
        S = frozenset(int(k) for k in S)
        m = (p - 1) // 2
        if p < 3:
            raise BoundError("p must be >= 3")
        if any(not 1 <= k <= m for k in S):
            raise BoundError(f"frequencies must lie in 1..{m}")
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "p", p)

    @property
    def m(self) -> int:
        return (self.p - 1) // 2


@dataclass(frozen=True)
class BoundParams:
    N: int
    p: int
    gamma: float
    delta: float
    sigma: float
    lambda_min: float = 1.0
    lambda_max: float = 1.0

    def __post_init__(self):
        if self.N < 1 or self.p < 3:
            raise BoundError("need N >= 1 and p >= 3")
        if not 0 < self.lambda_min <= self.lambda_max:
            raise BoundError("eigenvalues must satisfy 0 < lambda_min <= lambda_max")
        if not 0 <= self.gamma <= 1:
            raise BoundError("gamma must lie in [0, 1]")
        if not (self.delta > 0 and self.sigma > 0):
            raise BoundError("delta and sigma must be positive")

    @property
    def m(self) -> int:
        return (self.p - 1) // 2


# ----------------------------------------------------------- distortion

def beta_matrix(spec: SpectrumSet) -> np.ndarray:
    """p x p matrix B with B[n, j] = beta_S(n, j); symmetric."""
    n = np.arange(spec.p)
    B = np.zeros((spec.p, spec.p))
    for k in sorted(spec.S):
        s = np.sin(2.0 * np.pi * ((k * n) % spec.p) / spec.p)
        B += np.outer(s, s)
    return B


def beta_vector(spec: SpectrumSet, j: int) -> np.ndarray:
    if not 0 <= j < spec.p:
        raise BoundError(f"column index {j} outside [0, {spec.p})")
    return beta_matrix(spec)[:, j]


def alpha_coefficient(p: int, delta: float) -> float:
    return 2.0 * (1.0 + delta) / p


def predicted_delta(x_row: np.ndarray, spec: SpectrumSet, delta: float) -> np.ndarray:
    """Per-entry change of a row when the frequencies in S are modified."""
    x = np.asarray(x_row, dtype=np.float64)
    if x.shape != (spec.p,):
        raise BoundError(f"row length {x.shape} does not match p={spec.p}")
    return -alpha_coefficient(spec.p, delta) * (beta_matrix(spec) @ x)


def _check_square(Sigma: np.ndarray) -> np.ndarray:
    Sigma = np.asarray(Sigma, dtype=np.float64)
    if Sigma.ndim != 2 or Sigma.shape[0] != Sigma.shape[1]:
        raise BoundError("covariance must be a square matrix")
    return Sigma


def delta_pcc(Sigma: np.ndarray, beta_j: np.ndarray, beta_l: np.ndarray, alpha: float,
              j: int, l: int) -> float:
    """Change of the (j, l) second-moment correlation under a fixed S.

    ``Sigma`` is the second-moment matrix of the standardized rows and
    ``beta_j``/``beta_l`` are columns j and l of :func:`beta_matrix`.
    """
    Sigma = _check_square(Sigma)
    bj, bl = np.asarray(beta_j, dtype=np.float64), np.asarray(beta_l, dtype=np.float64)
    return float(-alpha * ((Sigma @ bl)[j] + (Sigma @ bj)[l]) + alpha**2 * (bj @ Sigma @ bl))


def w2_bound(Sigma: np.ndarray, beta_j: np.ndarray, alpha: float) -> float:
    """Upper bound on the 1-D Wasserstein-2 shift of column j."""
    Sigma = _check_square(Sigma)
    b = np.asarray(beta_j, dtype=np.float64)
    q = float(b @ Sigma @ b)
    if q < -1e-12:
        raise BoundError("covariance is not positive semidefinite")
    return abs(alpha) * math.sqrt(max(q, 0.0))


def apply_fixed_spectrum(X: np.ndarray, spec: SpectrumSet, delta: float) -> np.ndarray:
    """Replace Im(y_k) by -delta * Im(y_k) for every k in S on every row.

    This is the embedding with the modified set forced to be the same on all
    rows; it goes through the DFT and serves as an empirical oracle for the
    closed forms above.
    """
    from .transform import dft_rows, idft_rows

    Y = dft_rows(X)
    for k in spec.S:
        Y[:, k] = Y[:, k].real - 1j * delta * Y[:, k].imag
        Y[:, spec.p - k] = np.conj(Y[:, k])
    return idft_rows(Y)


# ------------------------------------------------------- special functions

def exp_integral_e1(u: float) -> float:
    """E1(u) for u > 0: power series up to 1, continued fraction beyond."""
    if not u > 0:
        raise BoundError("E1 is defined for u > 0 only")
    if u <= 1.0:
        total, term = 0.0, 1.0
        for k in range(1, _E1_MAX_ITER):
            term *= -u / k
            contrib = -term / k
            total += contrib
            if abs(contrib) < _E1_EPS * abs(total):
                break
        return total - EULER_GAMMA - math.log(u)
    # modified Lentz evaluation of the continued fraction for e^u E1(u)
    tiny = 1e-300
    b = u + 1.0
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, _E1_MAX_ITER):
        a = -float(i * i)
        b += 2.0
        d = 1.0 / (a * d + b)
        c = b + a / c
        step = c * d
        h *= step
        if abs(step - 1.0) < _E1_EPS:
            break
    return h * math.exp(-u)


def normal_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def script_I(s: float, lambda_min: float = 1.0, lambda_max: float = 1.0) -> float:
    """The three-term error function of the Gaussian robustness bound."""
    if not s > 0:
        raise BoundError("s must be positive")
    if not 0 < lambda_min <= lambda_max:
        raise BoundError("eigenvalues must satisfy 0 < lambda_min <= lambda_max")
    s2 = s * s
    t1 = s / math.sqrt(s2 + lambda_min) * (normal_cdf(math.sqrt(1 + lambda_min / s2)) - 0.5)
    t2 = s / math.sqrt(s2 + lambda_max) * (1.0 - normal_cdf(math.sqrt(1 + lambda_max / s2)))
    t3 = 0.0
    if lambda_max > lambda_min:
        t3 = (exp_integral_e1(lambda_min / (2 * s2)) - exp_integral_e1(lambda_max / (2 * s2))) \
            / math.sqrt(8 * math.pi * math.e)
    return t1 + t2 + t3


# ----------------------------------------------------------------- bounds

def bound_bracket(params: BoundParams) -> float:
    """1 - I(sigma) - I(sigma / delta)."""
    lo, hi = params.lambda_min, params.lambda_max
    return 1.0 - script_I(params.sigma, lo, hi) - script_I(params.sigma / params.delta, lo, hi)


def z_lower_bound(params: BoundParams) -> float:
    return math.sqrt(params.m * params.N) * params.gamma * bound_bracket(params)


def sample_size_bound(alpha: float, beta: float, params: BoundParams,
                      q_alpha: float | None = None) -> int | float:
    """Rows needed for power 1 - beta at level alpha; ``inf`` when vacuous.

    ``q_alpha`` defaults to the exact standard-normal upper quantile.
    """
    if not (0 < alpha < 1 and 0 < beta < 1):
        raise BoundError("alpha and beta must lie in (0, 1)")
    q = NormalDist().inv_cdf(1.0 - alpha) if q_alpha is None else q_alpha
    bracket = bound_bracket(params)
    if bracket <= 0 or params.gamma == 0:
        return math.inf
    m = params.m
    value = (q + math.sqrt(2 * m * math.log(1 / beta))) ** 2 / (m * params.gamma**2 * bracket**2)
    return math.ceil(value)


def golden_section_max(f, a: float, b: float, tol: float = 1e-8) -> tuple[float, float]:
    """Maximize a unimodal f on [a, b]; returns (argmax, max)."""
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    c, d = b - inv_phi * (b - a), a + inv_phi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = f(d)
    x = (a + b) / 2.0
    return x, f(x)


def subgaussian_objective(theta: float, delta: float, sigma: float, lambda_min: float,
                          kappa: float, c4: float) -> float:
    rho = (1.0 - theta) ** 2 / (2.0 * c4 * kappa**4)
    a = theta * lambda_min / (2.0 * sigma**2)
    return rho * (2.0 - math.exp(-a) - math.exp(-a * delta**2))


def subgaussian_z_bound(N: int, m: int, gamma: float, delta: float, sigma: float,
                        lambda_min: float, kappa: float, c4: float) -> float:
    if kappa < 1 or c4 <= 0:
        raise BoundError("need kappa >= 1 and C4 > 0")
    if not (delta > 0 and sigma > 0 and lambda_min > 0):
        raise BoundError("delta, sigma and lambda_min must be positive")
    _, best = golden_section_max(
        lambda t: subgaussian_objective(t, delta, sigma, lambda_min, kappa, c4), 0.0, 1.0)
    return math.sqrt(m * N) * gamma * best
