"""Gaussian densities, exact and truncated sampling, conditional moments,
whitening maps and parameter-distance bounds.

All densities are handled in log space. Sample batches are ``(n, d)``
float64 arrays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple, Optional

import numpy as np
from scipy import linalg

from .errors import (
    DimensionMismatchError,
    FactorizationError,
    InsufficientDataError,
    InvalidInputError,
    LowMassError,
    ValidationError,
)
from .rng import as_generator

LOG_2PI = math.log(2.0 * math.pi)


class MCEstimate(NamedTuple):
    """A Monte Carlo estimate with its standard error."""

    value: float
    stderr: float

    def __float__(self):
        return float(self.value)


def _mean_estimate(values: np.ndarray) -> MCEstimate:
    values = np.asarray(values, dtype=float)
    n = values.size
    mean = float(values.mean())
    se = float(values.std(ddof=1) / math.sqrt(n)) if n > 1 else float("inf")
    return MCEstimate(mean, se)


@dataclass(frozen=True, eq=False)
class GaussianParams:
    """Mean vector and full-rank covariance of a multivariate Gaussian."""

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float)).copy()
        cov = np.atleast_2d(np.asarray(self.covariance, dtype=float)).copy()
        if mean.ndim != 1:
            raise ValidationError("mean must be a vector")
        d = mean.shape[0]
        if cov.shape != (d, d):
            raise DimensionMismatchError(f"covariance shape {cov.shape} does not match mean length {d}")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise InvalidInputError("parameters must be finite")
        scale = max(1.0, float(np.max(np.abs(cov))))
        if np.max(np.abs(cov - cov.T)) > 1e-12 * scale:
            raise ValidationError("covariance is not symmetric")
        cov = 0.5 * (cov + cov.T)
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)
        # fail fast on indefinite input
        _ = self.chol

    @classmethod
    def standard(cls, d: int) -> "GaussianParams":
        return cls(np.zeros(d), np.eye(d))

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    @cached_property
    def chol(self) -> np.ndarray:
        """Lower Cholesky factor of the covariance."""
        try:
            return linalg.cholesky(self.covariance, lower=True)
        except linalg.LinAlgError as exc:
            raise FactorizationError("covariance is not positive definite") from exc

    @cached_property
    def log_det(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self.chol))))

    @cached_property
    def precision(self) -> np.ndarray:
        inv = linalg.cho_solve((self.chol, True), np.eye(self.dim))
        return 0.5 * (inv + inv.T)

    def to_json(self) -> dict:
        return {"mean": self.mean.tolist(), "covariance": self.covariance.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "GaussianParams":
        return cls(np.asarray(obj["mean"], dtype=float), np.asarray(obj["covariance"], dtype=float))

    def __eq__(self, other):
        if not isinstance(other, GaussianParams):
            return NotImplemented
        return np.array_equal(self.mean, other.mean) and np.array_equal(self.covariance, other.covariance)

    def __repr__(self):
        return f"GaussianParams(mean={self.mean.tolist()}, covariance={self.covariance.tolist()})"


@dataclass(frozen=True)
class TruncatedGaussian:
    """A Gaussian conditioned on a set; ``alpha_hat`` is its mass if known."""

    params: GaussianParams
    set: object
    alpha_hat: Optional[float] = None

    def __post_init__(self):
        if self.alpha_hat is not None and not (0.0 < self.alpha_hat <= 1.0):
            raise ValidationError(f"alpha_hat must lie in (0, 1], got {self.alpha_hat}")

    @property
    def dim(self) -> int:
        return self.params.dim


@dataclass(frozen=True)
class IsotropicCert:
    a: float
    b: float

    def __post_init__(self):
        if self.a < 0:
            raise ValidationError("a must be non-negative")
        if not 0.0 <= self.b < 1.0:
            raise ValidationError("b must lie in [0, 1)")


def _as_points(x, d: int) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    pts = np.atleast_2d(arr)
    if pts.shape[-1] != d:
        raise DimensionMismatchError(f"expected points of dimension {d}, got {pts.shape[-1]}")
    return pts, single


def log_density(params: GaussianParams, x) -> np.ndarray | float:
    """Log of the Gaussian density at ``x`` (a point or an ``(n, d)`` batch)."""
    pts, single = _as_points(x, params.dim)
    if not np.all(np.isfinite(pts)):
        raise InvalidInputError("non-finite input to log_density")
    z = linalg.solve_triangular(params.chol, (pts - params.mean).T, lower=True)
    out = -0.5 * np.sum(z * z, axis=0) - 0.5 * params.log_det - 0.5 * params.dim * LOG_2PI
    return float(out[0]) if single else out


def log_standard_density(x) -> np.ndarray | float:
    """Log density of the standard Gaussian, without any factorization."""
    arr = np.asarray(x, dtype=float)
    d = arr.shape[-1]
    out = -0.5 * np.sum(arr * arr, axis=-1) - 0.5 * d * LOG_2PI
    return float(out) if np.ndim(out) == 0 else out


def sample(params: GaussianParams, rng, n: int) -> np.ndarray:
    """Draw ``n`` i.i.d. points from N(mean, covariance)."""
    if n < 1:
        raise ValidationError("n must be >= 1")
    rng = as_generator(rng)
    z = rng.standard_normal((n, params.dim))
    return params.mean + z @ params.chol.T


def default_max_attempts(alpha: float | None) -> int:
    if alpha is None or alpha <= 0:
        return 1000
    return int(max(1000, math.ceil(10.0 / alpha)))


def truncated_sample(
    tg: TruncatedGaussian, rng, n: int, max_attempts_per_sample: int | None = None
) -> tuple[np.ndarray, float]:
    """Rejection-sample ``n`` points from ``tg``.

    Returns the batch and the observed acceptance rate, an estimate of the
    set's mass. Raises :class:`LowMassError` if some point needs more than
    ``max_attempts_per_sample`` consecutive proposals.
    """
    if n < 1:
        raise ValidationError("n must be >= 1")
    if max_attempts_per_sample is None:
        max_attempts_per_sample = default_max_attempts(tg.alpha_hat)
    if max_attempts_per_sample < 1:
        raise ValidationError("max_attempts_per_sample must be >= 1")
    rng = as_generator(rng)
    chunks = []
    have = 0
    proposed = 0
    accepted = 0
    run = 0  # rejections since the last acceptance
    rate = tg.alpha_hat if tg.alpha_hat is not None else 0.5
    while have < n:
        need = n - have
        block = int(min(max(64, math.ceil(1.2 * need / max(rate, 1e-3))), 2_000_000))
        x = sample(tg.params, rng, block)
        mask = np.asarray(tg.set.contains(x), dtype=bool)
        idx = np.flatnonzero(mask)
        done = idx.size >= need
        if done:
            idx = idx[:need]
        # longest run of rejections inside this block, including the carry-over
        if idx.size == 0:
            longest = run + block
        else:
            gaps = np.diff(np.concatenate(([-1], idx))) - 1
            gaps[0] += run
            longest = int(gaps.max())
        if longest >= max_attempts_per_sample:
            seen = proposed + block
            acc = (accepted + idx.size) / seen
            raise LowMassError(
                f"more than {max_attempts_per_sample} rejections for one sample "
                f"(acceptance estimate {acc:.3g})",
                acc,
            )
        if done:
            # stop at the n-th acceptance so the proposal count stays exact
            proposed += int(idx[-1]) + 1
            run = 0
        else:
            proposed += block
            run = block - 1 - int(idx[-1]) if idx.size else run + block
        accepted += idx.size
        chunks.append(x[idx])
        have += idx.size
        rate = max(accepted / proposed, 1e-6)
    return np.concatenate(chunks, axis=0), accepted / proposed


def mass_estimate(params: GaussianParams, set, rng, n: int) -> MCEstimate:
    """Monte Carlo estimate of N(params; set) with its standard error."""
    if n < 1:
        raise ValidationError("n must be >= 1")
    x = sample(params, rng, n)
    inside = np.asarray(set.contains(x), dtype=float)
    p = float(inside.mean())
    return MCEstimate(p, math.sqrt(p * (1.0 - p) / n))


def gaussian_mass(params: GaussianParams, set, rng=None, n: int = 200_000) -> float:
    """Mass of ``set`` in closed form when the set supports it, else by Monte Carlo."""
    exact = getattr(set, "exact_mass", None)
    if exact is not None:
        value = exact(params)
        if value is not None:
            return float(value)
    if rng is None:
        raise ValidationError("no closed form for this set; an rng is required")
    return float(mass_estimate(params, set, rng, n).value)


def conditional_moments(samples) -> tuple[np.ndarray, np.ndarray]:
    """Empirical mean and unbiased (n-1) covariance of a batch."""
    x = np.atleast_2d(np.asarray(samples, dtype=float))
    n, d = x.shape
    if n < d + 1:
        raise InsufficientDataError(f"need at least d+1={d + 1} samples, got {n}")
    mu = x.mean(axis=0)
    centered = x - mu
    cov = centered.T @ centered / (n - 1)
    return mu, 0.5 * (cov + cov.T)


@dataclass(frozen=True, eq=False)
class AffineMap:
    """``x -> W (x - shift)`` together with its inverse."""

    matrix: np.ndarray
    shift: np.ndarray
    inverse_matrix: np.ndarray = field(repr=False)

    def forward(self, x):
        return (np.asarray(x, dtype=float) - self.shift) @ self.matrix.T

    def inverse(self, y):
        return np.asarray(y, dtype=float) @ self.inverse_matrix.T + self.shift

    def forward_params(self, p: GaussianParams) -> GaussianParams:
        w = self.matrix
        return GaussianParams(w @ (p.mean - self.shift), w @ p.covariance @ w.T)

    def inverse_params(self, p: GaussianParams) -> GaussianParams:
        w = self.inverse_matrix
        return GaussianParams(w @ p.mean + self.shift, w @ p.covariance @ w.T)

    @property
    def log_abs_det(self) -> float:
        return float(np.linalg.slogdet(self.matrix)[1])

    def to_json(self) -> dict:
        return {"matrix": self.matrix.tolist(), "shift": self.shift.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "AffineMap":
        m = np.asarray(obj["matrix"], dtype=float)
        return cls(m, np.asarray(obj["shift"], dtype=float), np.linalg.inv(m))

    @classmethod
    def identity(cls, d: int) -> "AffineMap":
        return cls(np.eye(d), np.zeros(d), np.eye(d))


def _sym_eig(sigma: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    sigma = np.asarray(sigma, dtype=float)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise DimensionMismatchError("expected a square matrix")
    if not np.all(np.isfinite(sigma)):
        raise InvalidInputError("non-finite matrix")
    sym = 0.5 * (sigma + sigma.T)
    vals, vecs = np.linalg.eigh(sym)
    if vals[0] <= 0:
        raise FactorizationError("matrix is not positive definite")
    return vals, vecs


def whitening_transform(mu_s, sigma_s) -> AffineMap:
    """Map ``x -> sigma_s^{-1/2} (x - mu_s)`` using the symmetric inverse root."""
    vals, vecs = _sym_eig(sigma_s)
    w = (vecs / np.sqrt(vals)) @ vecs.T
    w_inv = (vecs * np.sqrt(vals)) @ vecs.T
    return AffineMap(0.5 * (w + w.T), np.asarray(mu_s, dtype=float).copy(), 0.5 * (w_inv + w_inv.T))


def spherical_transform(mu_s, sigma_s) -> AffineMap:
    """Translate by ``mu_s`` and scale isotropically by the largest conditional std.

    For a spherical Gaussian truncated to a convex set the largest conditional
    variance matches the untruncated one along directions the set does not
    cut, so the image of the true Gaussian stays close to isotropic.
    """
    vals, _ = _sym_eig(sigma_s)
    d = vals.shape[0]
    s = math.sqrt(float(vals[-1]))
    return AffineMap(np.eye(d) / s, np.asarray(mu_s, dtype=float).copy(), np.eye(d) * s)


def translation_transform(mu_s) -> AffineMap:
    mu_s = np.asarray(mu_s, dtype=float)
    d = mu_s.shape[0]
    return AffineMap(np.eye(d), mu_s.copy(), np.eye(d))


def _inv_sqrt(sigma: np.ndarray) -> np.ndarray:
    vals, vecs = _sym_eig(sigma)
    return (vecs / np.sqrt(vals)) @ vecs.T


def tv_parameter_bound(p1: GaussianParams, p2: GaussianParams) -> float:
    """Upper bound on TV(N1, N2) from the mean and covariance discrepancy."""
    if p1.dim != p2.dim:
        raise DimensionMismatchError("parameter dimensions differ")
    r = _inv_sqrt(p1.covariance)
    mean_term = 0.5 * float(np.linalg.norm(r @ (p1.mean - p2.mean)))
    cov_term = math.sqrt(2.0) * float(np.linalg.norm(np.eye(p1.dim) - r @ p2.covariance @ r, "fro"))
    return mean_term + cov_term


def truncated_log_density(tg: TruncatedGaussian, x, alpha: float) -> np.ndarray:
    """log of 1_S(x) N(x) / alpha; ``-inf`` outside the set."""
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    out = np.full(pts.shape[0], -np.inf)
    inside = np.asarray(tg.set.contains(pts), dtype=bool)
    if inside.any():
        out[inside] = log_density(tg.params, pts[inside]) - math.log(alpha)
    return out


def _alpha_of(tg: TruncatedGaussian, rng, n: int) -> float:
    if tg.alpha_hat is not None:
        return tg.alpha_hat
    return gaussian_mass(tg.params, tg.set, rng, n)


def tv_monte_carlo(tg1: TruncatedGaussian, tg2: TruncatedGaussian, rng, n: int) -> MCEstimate:
    """Monte Carlo total variation between two truncated Gaussians.

    Uses the mixture reference m = (f1 + f2)/2, under which
    TV = E_m[|f1 - f2| / (f1 + f2)] = E_m[|tanh((log f1 - log f2)/2)|].
    Unknown masses are estimated first (closed form where possible).
    """
    if tg1.dim != tg2.dim:
        raise DimensionMismatchError("dimensions differ")
    rng = as_generator(rng)
    a1 = _alpha_of(tg1, rng, max(n, 100_000))
    a2 = _alpha_of(tg2, rng, max(n, 100_000))
    n1 = max(1, n // 2)
    n2 = max(1, n - n1)
    x1, _ = truncated_sample(TruncatedGaussian(tg1.params, tg1.set, a1), rng, n1)
    x2, _ = truncated_sample(TruncatedGaussian(tg2.params, tg2.set, a2), rng, n2)
    x = np.concatenate([x1, x2], axis=0)
    l1 = truncated_log_density(tg1, x, a1)
    l2 = truncated_log_density(tg2, x, a2)
    vals = np.empty(x.shape[0])
    both = np.isfinite(l1) & np.isfinite(l2)
    vals[~both] = 1.0
    vals[both] = np.abs(np.tanh(0.5 * (l1[both] - l2[both])))
    return _mean_estimate(vals)


def isotropic_check(params: GaussianParams, cert: IsotropicCert, tol: float = 1e-9) -> bool:
    """True iff ``params`` is in (a, b)-isotropic position (up to ``tol``)."""
    d = params.dim
    if float(params.mean @ params.mean) > cert.a + tol:
        return False
    dev = params.covariance - np.eye(d)
    if float(np.sum(dev * dev)) > cert.a + tol:
        return False
    eig = np.linalg.eigvalsh(params.covariance)
    lo, hi = 1.0 - cert.b, 1.0 / (1.0 - cert.b)
    return bool(eig[0] >= lo - tol and eig[-1] <= hi + tol)
