"""Figure-1 style presets.

The published simulations give only the true mean and the conditional mean
of the truncated sample for two isotropic 2-D Gaussians:

    A: mu* = (0.1, 0.78), conditional mean (0.48, 0.32)
    B: mu* = (0, 0),      conditional mean (0.47, 0.27)

The truncation sets themselves are unpublished. Each preset uses the
halfspace ``{x : n.x >= b}`` whose normal ``n`` points from mu* to the
conditional mean and whose offset ``b`` is calibrated so that the exact
conditional mean of N(mu*, I) on the halfspace equals the published value.
For a unit normal and identity covariance that mean is
``mu* + n * phi(t) / (1 - Phi(t))`` with ``t = b - n.mu*``, so ``t`` solves an
inverse Mills-ratio equation. The resulting masses are about 0.63 (A) and
0.67 (B).
"""
from __future__ import annotations

import numpy as np
from scipy.optimize import brentq
from scipy.special import log_ndtr, ndtri

from .errors import ValidationError
from .sets import Halfspace

FIG1_PRESETS = {
    "A": {"mean": [0.1, 0.78], "conditional_mean": [0.48, 0.32]},
    "B": {"mean": [0.0, 0.0], "conditional_mean": [0.47, 0.27]},
}


def mills_ratio(t: float) -> float:
    """``phi(t) / (1 - Phi(t))`` computed in log space."""
    return float(np.exp(-0.5 * t * t - 0.5 * np.log(2 * np.pi) - log_ndtr(-t)))


def calibrate_halfspace(mu_star, mu_cond) -> Halfspace:
    """Halfspace whose N(mu_star, I)-conditional mean is ``mu_cond``."""
    mu_star = np.asarray(mu_star, dtype=float)
    shift = np.asarray(mu_cond, dtype=float) - mu_star
    r = float(np.linalg.norm(shift))
    if r <= 0:
        raise ValidationError("conditional mean must differ from the true mean")
    n = shift / r
    t = brentq(lambda s: mills_ratio(s) - r, -40.0, 40.0, xtol=1e-14)
    return Halfspace(n, float(t + n @ mu_star))


def halfspace_with_mass(mu_star, normal, alpha: float) -> Halfspace:
    """Halfspace with the given normal and N(mu_star, I)-mass ``alpha``."""
    if not 0.0 < alpha < 1.0:
        raise ValidationError("alpha must lie in (0, 1)")
    n = np.asarray(normal, dtype=float)
    n = n / np.linalg.norm(n)
    return Halfspace(n, float(n @ np.asarray(mu_star, dtype=float) - ndtri(alpha)))


def fig1_config(preset: str) -> dict:
    """Estimation config for a preset: known isotropic covariance, halfspace set."""
    if preset not in FIG1_PRESETS:
        raise ValidationError(f"unknown preset {preset!r}; choose from {sorted(FIG1_PRESETS)}")
    p = FIG1_PRESETS[preset]
    hs = calibrate_halfspace(p["mean"], p["conditional_mean"])
    return {
        "dim": 2,
        "mean": list(p["mean"]),
        "covariance": [[1.0, 0.0], [0.0, 1.0]],
        "set": hs.to_json(),
        "transform": "translate",
        "known_covariance": True,
    }
