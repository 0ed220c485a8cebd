"""Recover the truncation set by thresholding a corrected Hermite expansion.

In working coordinates ``y = T(x)``, with the estimated Gaussian N-hat,

    f(y) = N(0, I; y) / N-hat(y) * psi_k(y)

approximates ``1_S / alpha``, which is 0 outside the set and at least 1
inside, so ``{f > 1/2}`` estimates S. The raw stage-one expansion is used
without rescaling.
"""
from __future__ import annotations

import numpy as np

from .errors import DimensionMismatchError, ValidationError
from .gaussian import AffineMap, GaussianParams, MCEstimate, log_density, log_standard_density, sample
from .hermite import HermiteExpansion
from .optimizer import LOG_CLAMP
from .rng import as_generator
from .sets import SetOracle

THRESHOLD = 0.5


class RecoveredSet(SetOracle):
    """Predicate ``weighted_indicator(x) > 1/2`` with the SetOracle interface.

    ``est_params`` are in original coordinates; ``transform`` maps original
    points to the coordinates the expansion was fitted in.
    """

    kind = "RecoveredSet"
    gsa_class = "unknown"

    def __init__(self, psi_k: HermiteExpansion, est_params: GaussianParams, transform: AffineMap | None = None):
        if psi_k.dim != est_params.dim:
            raise DimensionMismatchError("expansion and parameters have different dimensions")
        super().__init__(psi_k.dim)
        self.psi_k = psi_k
        self.est_params = est_params
        self.transform = transform if transform is not None else AffineMap.identity(psi_k.dim)
        self._working = self.transform.forward_params(est_params)

    def weighted_indicator(self, x):
        pts, single = self._points(x)
        y = self.transform.forward(pts)
        logr = np.minimum(log_standard_density(y) - log_density(self._working, y), LOG_CLAMP)
        psi = np.atleast_1d(self.psi_k(y))
        out = np.zeros(pts.shape[0])
        pos = psi > 0
        out[pos] = np.exp(logr[pos]) * psi[pos]
        return float(out[0]) if single else out

    def _contains(self, pts):
        return np.atleast_1d(self.weighted_indicator(pts)) > THRESHOLD

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "psi_k": self.psi_k.to_json(),
            "est_params": self.est_params.to_json(),
            "transform": self.transform.to_json(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "RecoveredSet":
        return cls(
            HermiteExpansion.from_json(obj["psi_k"]),
            GaussianParams.from_json(obj["est_params"]),
            AffineMap.from_json(obj["transform"]),
        )


def weighted_indicator(rs: RecoveredSet, x):
    return rs.weighted_indicator(x)


def classify(rs: RecoveredSet, x):
    """True iff the weighted indicator is strictly above 1/2."""
    return rs.contains(x)


def symdiff_mass(rs: SetOracle, truth: SetOracle, true_params: GaussianParams, rng, n: int) -> MCEstimate:
    """Mass under the true Gaussian of the points the two sets disagree on."""
    if n < 1:
        raise ValidationError("n must be >= 1")
    if rs.dim != truth.dim or truth.dim != true_params.dim:
        raise DimensionMismatchError("dimensions differ")
    x = sample(true_params, as_generator(rng), n)
    diff = np.asarray(rs.contains(x), dtype=bool) != np.asarray(truth.contains(x), dtype=bool)
    p = float(diff.mean())
    return MCEstimate(p, float(np.sqrt(p * (1.0 - p) / n)))
