"""Hermite coefficients of the weighted characteristic function.

For a truncated Gaussian N(mu*, Sigma*, S) with mass alpha*, the function

    psi(x) = 1_S(x) N(mu*, Sigma*; x) / (alpha* N(0, I; x))

has Hermite coefficients c_V = E_{N0}[psi H_V] = E_{x ~ N(mu*, Sigma*, S)}[H_V(x)],
so they can be estimated by plain sample means over the truncated samples
without knowing S, alpha* or the true parameters.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, ValidationError
from .gaussian import (
    GaussianParams,
    MCEstimate,
    TruncatedGaussian,
    _mean_estimate,
    log_density,
    log_standard_density,
    sample,
    truncated_sample,
)
from .hermite import HermiteExpansion, design_matrix, hermite_multi, multi_index_array
from .rng import as_generator
from .sets import SetOracle

COEFF_CHUNK = 32768


@dataclass(frozen=True)
class PsiTarget:
    """Ground-truth psi for a fully specified truncated Gaussian (test use)."""

    true_params: GaussianParams
    set: SetOracle
    alpha_star: float

    def __post_init__(self):
        if not 0.0 < self.alpha_star <= 1.0:
            raise ValidationError("alpha_star must lie in (0, 1]")
        if self.set.dim != self.true_params.dim:
            raise DimensionMismatchError("set and parameters have different dimensions")

    @property
    def dim(self) -> int:
        return self.true_params.dim

    @property
    def truncated(self) -> TruncatedGaussian:
        return TruncatedGaussian(self.true_params, self.set, self.alpha_star)

    def __call__(self, x):
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.zeros(pts.shape[0])
        inside = np.asarray(self.set.contains(pts), dtype=bool)
        if inside.any():
            p = pts[inside]
            out[inside] = np.exp(log_density(self.true_params, p) - log_standard_density(p)) / self.alpha_star
        return float(out[0]) if np.ndim(x) == 1 else out


def estimate_coefficients(samples, k: int) -> HermiteExpansion:
    """Sample means of every ``H_V`` with ``|V| <= k`` over the batch."""
    x = np.atleast_2d(np.asarray(samples, dtype=float))
    if k < 0:
        raise ValidationError("k must be >= 0")
    n, d = x.shape
    if n < 1:
        raise ValidationError("sample batch is empty")
    idx = multi_index_array(d, k)
    partial = []
    for s in range(0, n, COEFF_CHUNK):
        # np.sum is pairwise within a chunk; chunk totals are combined with fsum
        partial.append(design_matrix(x[s : s + COEFF_CHUNK], idx).sum(axis=0))
    stacked = np.array(partial)
    totals = np.array([math.fsum(stacked[:, j]) for j in range(idx.shape[0])])
    coeffs = totals / n
    coeffs[0] = 1.0
    return HermiteExpansion(d, k, coeffs)


def eval_psi_k(expansion: HermiteExpansion, x):
    """Clamped expansion ``max(0, sum c_V H_V(x))``."""
    return expansion(x)


def psi_l2_error(
    expansion: HermiteExpansion, target: PsiTarget, rng, n: int, clamp: bool = True
) -> MCEstimate:
    """Monte Carlo estimate of ``E_{N0}[(psi_k - psi)^2]``."""
    if expansion.dim != target.dim:
        raise DimensionMismatchError("expansion and target dimensions differ")
    if n < 2:
        raise ValidationError("n must be >= 2")
    x = sample(GaussianParams.standard(target.dim), as_generator(rng), n)
    approx = expansion(x) if clamp else expansion.evaluate(x)
    return _mean_estimate((approx - target(x)) ** 2)


def coefficient_variance_probe(target: PsiTarget, V, rng, n: int, trials: int) -> float:
    """Empirical variance of the estimate of ``c_V`` across independent batches."""
    if trials < 30:
        raise ValidationError("trials must be >= 30")
    V = tuple(int(v) for v in V)
    if len(V) != target.dim:
        raise DimensionMismatchError("multi-index length differs from dimension")
    if sum(V) == 0:
        return 0.0
    rng = as_generator(rng)
    vals = np.empty(trials)
    for t in range(trials):
        x, _ = truncated_sample(target.truncated, rng, n)
        vals[t] = float(np.mean(hermite_multi(V, x)))
    return float(vals.var(ddof=1))


def suggested_degree(alpha: float, surface_area: float, eps: float) -> int:
    """Degree suggested by the ``Gamma^2 / (alpha eps^4)`` schedule, all constants 1."""
    if not 0.0 < alpha <= 1.0 or eps <= 0 or surface_area < 0:
        raise ValidationError("need alpha in (0, 1], eps > 0, surface_area >= 0")
    return max(1, math.ceil(surface_area**2 / (alpha * eps**4)))
