"""Truncation-set families, membership, and noise-sensitivity probes.

Every oracle is an immutable predicate over points of R^d. ``contains``
accepts a single point (returns ``bool``) or an ``(n, d)`` batch (returns a
boolean array). Sets serialize to ``{"kind": ..., params...}`` JSON.
"""
from __future__ import annotations

import math
from typing import Optional

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import DimensionMismatchError, SizeError, ValidationError
from .gaussian import GaussianParams, MCEstimate, _mean_estimate
from .rng import as_generator

HALFSPACE_GSA = math.sqrt(2.0 / math.pi)
MAX_PTF_DEGREE = 6
MAX_LOWER_BOUND_DIM = 20


def _is_diagonal(cov: np.ndarray) -> bool:
    return bool(np.all(cov == np.diag(np.diag(cov))))


class SetOracle:
    """Base class for truncation sets."""

    kind = "SetOracle"
    #: quantitative Gaussian surface area bound, when one is known
    gsa_bound: Optional[float] = None
    #: asymptotic surface-area class from the literature, as text
    gsa_class: Optional[str] = None

    def __init__(self, dim: int):
        self.dim = int(dim)

    def _points(self, x):
        arr = np.asarray(x, dtype=float)
        single = arr.ndim == 1
        pts = np.atleast_2d(arr)
        if pts.shape[-1] != self.dim:
            raise DimensionMismatchError(f"{self.kind} has dimension {self.dim}, got points of dimension {pts.shape[-1]}")
        return pts, single

    def contains(self, x):
        pts, single = self._points(x)
        out = self._contains(pts)
        return bool(out[0]) if single else out

    def _contains(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def exact_mass(self, params) -> Optional[float]:
        """Closed-form Gaussian mass, or ``None`` when unavailable."""
        return None

    def to_json(self) -> dict:
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}({self.to_json()})"


class FullSpace(SetOracle):
    kind = "FullSpace"
    gsa_bound = 0.0

    def _contains(self, pts):
        return np.ones(pts.shape[0], dtype=bool)

    def exact_mass(self, params):
        return 1.0

    def to_json(self):
        return {"kind": self.kind, "dim": self.dim}


class Halfspace(SetOracle):
    """``{x : normal . x >= offset}``."""

    kind = "Halfspace"
    gsa_bound = HALFSPACE_GSA

    def __init__(self, normal, offset: float = 0.0):
        normal = np.atleast_1d(np.asarray(normal, dtype=float))
        if not np.any(normal):
            raise ValidationError("halfspace normal must be nonzero")
        super().__init__(normal.shape[0])
        self.normal = normal
        self.offset = float(offset)

    def _contains(self, pts):
        return pts @ self.normal >= self.offset

    def exact_mass(self, params):
        m = float(self.normal @ params.mean)
        s = math.sqrt(float(self.normal @ params.covariance @ self.normal))
        return float(ndtr((m - self.offset) / s))

    def to_json(self):
        return {"kind": self.kind, "normal": self.normal.tolist(), "offset": self.offset}


class HalfspaceIntersection(SetOracle):
    kind = "HalfspaceIntersection"
    gsa_class = "O(sqrt(log k))"

    def __init__(self, halfspaces):
        halfspaces = list(halfspaces)
        if not halfspaces:
            raise ValidationError("need at least one halfspace")
        dims = {h.dim for h in halfspaces}
        if len(dims) != 1:
            raise DimensionMismatchError("halfspaces have different dimensions")
        super().__init__(dims.pop())
        self.halfspaces = halfspaces
        if len(halfspaces) == 1:
            self.gsa_bound = HALFSPACE_GSA

    def _contains(self, pts):
        out = np.ones(pts.shape[0], dtype=bool)
        for h in self.halfspaces:
            out &= h._contains(pts)
        return out

    def exact_mass(self, params):
        if len(self.halfspaces) == 1:
            return self.halfspaces[0].exact_mass(params)
        return None

    def to_json(self):
        return {"kind": self.kind, "halfspaces": [h.to_json() for h in self.halfspaces]}


class AxisBox(SetOracle):
    """``{x : lo <= x <= hi}`` componentwise; bounds may be infinite."""

    kind = "AxisBox"
    gsa_class = "O(sqrt(log d))"

    def __init__(self, lo, hi):
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        if lo.shape != hi.shape:
            raise DimensionMismatchError("lo and hi differ in length")
        if np.any(lo > hi):
            raise ValidationError("box requires lo <= hi componentwise")
        super().__init__(lo.shape[0])
        self.lo = lo
        self.hi = hi

    def _contains(self, pts):
        return np.all((pts >= self.lo) & (pts <= self.hi), axis=1)

    def exact_mass(self, params):
        if not _is_diagonal(params.covariance):
            return None
        s = np.sqrt(np.diag(params.covariance))
        upper = ndtr((self.hi - params.mean) / s)
        lower = ndtr((self.lo - params.mean) / s)
        return float(np.prod(upper - lower))

    def to_json(self):
        return {"kind": self.kind, "lo": _json_floats(self.lo), "hi": _json_floats(self.hi)}


class PolynomialThreshold(SetOracle):
    """``{x : sign * p(x) >= 0}`` for a sparse monomial polynomial ``p``."""

    kind = "PolynomialThreshold"
    gsa_class = "O(degree)"

    def __init__(self, dim: int, coeffs: dict, sign: int = 1):
        super().__init__(dim)
        if sign not in (1, -1):
            raise ValidationError("sign must be +1 or -1")
        items = []
        for idx, c in coeffs.items():
            idx = tuple(int(v) for v in idx)
            if len(idx) != dim or min(idx) < 0:
                raise ValidationError(f"bad multi-index {idx} for dimension {dim}")
            items.append((idx, float(c)))
        self.degree = max((sum(i) for i, _ in items), default=0)
        if self.degree > MAX_PTF_DEGREE:
            raise ValidationError(f"polynomial degree {self.degree} exceeds {MAX_PTF_DEGREE}")
        self.coeffs = dict(items)
        self.sign = sign
        self._exps = np.array([i for i, _ in items], dtype=int).reshape(len(items), dim)
        self._vals = np.array([c for _, c in items], dtype=float)

    def polynomial(self, pts: np.ndarray) -> np.ndarray:
        if not self._vals.size:
            return np.zeros(pts.shape[0])
        mono = np.prod(pts[:, None, :] ** self._exps[None, :, :], axis=2)
        return mono @ self._vals

    def _contains(self, pts):
        return self.sign * self.polynomial(pts) >= 0

    def to_json(self):
        return {
            "kind": self.kind,
            "dim": self.dim,
            "coeffs": [[list(i), c] for i, c in self.coeffs.items()],
            "sign": self.sign,
        }


class LowerBoundFamily(SetOracle):
    """Cube-with-thresholds set in R^{d+1} used by the mean lower bound.

    For ``side=+1`` the set is ``[-1+delta, 0] x [-1,1]^d`` together with the
    slabs ``[0, t_V] x G_V``, where ``G_V`` is the orthant piece of the cube
    ``[-1,1]^d`` picked by the sign pattern ``V`` of the last ``d``
    coordinates. ``side=-1`` mirrors the first coordinate. ``thresholds`` is
    indexed by ``pattern_index``: bit ``i`` is set when coordinate ``i+1`` is
    negative.
    """

    kind = "LowerBoundFamily"
    gsa_class = "O(d)"

    def __init__(self, d: int, thresholds, delta: float = 0.0, side: int = 1):
        d = int(d)
        if d < 1:
            raise ValidationError("d must be >= 1")
        if d > MAX_LOWER_BOUND_DIM:
            raise SizeError(f"d={d} needs 2^{d} thresholds; limit is d <= {MAX_LOWER_BOUND_DIM}")
        t = np.asarray(thresholds, dtype=float).ravel()
        if t.shape[0] != 2**d:
            raise ValidationError(f"expected {2**d} thresholds, got {t.shape[0]}")
        if np.any((t < 0) | (t > 1)):
            raise ValidationError("thresholds must lie in [0, 1]")
        if not -1.0 <= delta <= 1.0:
            raise ValidationError("delta must lie in [-1, 1]")
        if side not in (1, -1):
            raise ValidationError("side must be +1 or -1")
        super().__init__(d + 1)
        self.d = d
        self.thresholds = t
        self.delta = float(delta)
        self.side = side
        self._weights = 1 << np.arange(d)

    @staticmethod
    def pattern_index(signs) -> int:
        """Index of the sign pattern ``signs`` (entries +1/-1)."""
        return int(sum(1 << i for i, s in enumerate(signs) if s < 0))

    def cell_index(self, pts: np.ndarray) -> np.ndarray:
        """Sign-pattern index of each point's last ``d`` coordinates."""
        return (pts[:, 1:] < 0).astype(np.int64) @ self._weights

    def _contains(self, pts):
        x1 = self.side * pts[:, 0]
        y = pts[:, 1:]
        in_cube = np.all(np.abs(y) <= 1.0, axis=1)
        left = (x1 >= -1.0 + self.delta) & (x1 <= 0.0)
        t = self.thresholds[self.cell_index(pts)]
        right = (x1 >= 0.0) & (x1 <= t)
        return in_cube & (left | right)

    def _cube_probs(self, mean, sd):
        """Per-coordinate probabilities of [0,1] and [-1,0] for the last d coordinates."""
        pos = ndtr((1.0 - mean) / sd) - ndtr((0.0 - mean) / sd)
        neg = ndtr((0.0 - mean) / sd) - ndtr((-1.0 - mean) / sd)
        return pos, neg

    def slab_masses(self, params) -> Optional[np.ndarray]:
        """Mass of ``[0, t_V] x G_V`` for every pattern (mirrored for side -1)."""
        if not _is_diagonal(params.covariance):
            return None
        mean = params.mean.copy()
        mean[0] *= self.side
        sd = np.sqrt(np.diag(params.covariance))
        pos, neg = self._cube_probs(mean[1:], sd[1:])
        bits = (np.arange(2**self.d)[:, None] >> np.arange(self.d)[None, :]) & 1
        cell = np.prod(np.where(bits == 1, neg[None, :], pos[None, :]), axis=1)
        x1 = ndtr((self.thresholds - mean[0]) / sd[0]) - ndtr((0.0 - mean[0]) / sd[0])
        return x1 * cell

    def left_mass(self, params, delta: Optional[float] = None) -> Optional[float]:
        if not _is_diagonal(params.covariance):
            return None
        delta = self.delta if delta is None else delta
        mean = params.mean.copy()
        mean[0] *= self.side
        sd = np.sqrt(np.diag(params.covariance))
        pos, neg = self._cube_probs(mean[1:], sd[1:])
        cube = float(np.prod(pos + neg))
        x1 = ndtr((0.0 - mean[0]) / sd[0]) - ndtr((-1.0 + delta - mean[0]) / sd[0])
        return float(x1) * cube

    def exact_mass(self, params):
        slabs = self.slab_masses(params)
        if slabs is None:
            return None
        return float(self.left_mass(params) + slabs.sum())

    def to_json(self):
        return {
            "kind": self.kind,
            "d": self.d,
            "thresholds": self.thresholds.tolist(),
            "delta": self.delta,
            "side": self.side,
        }


def _json_floats(arr):
    # JSON has no infinity literal; encode as strings
    return [float(v) if math.isfinite(v) else ("inf" if v > 0 else "-inf") for v in arr]


def _parse_floats(values):
    return np.array([float(v) for v in values], dtype=float)


def set_from_json(obj: dict) -> SetOracle:
    kind = obj.get("kind")
    if kind == "FullSpace":
        return FullSpace(obj["dim"])
    if kind == "Halfspace":
        return Halfspace(obj["normal"], obj.get("offset", 0.0))
    if kind == "HalfspaceIntersection":
        return HalfspaceIntersection([set_from_json(h) for h in obj["halfspaces"]])
    if kind == "AxisBox":
        return AxisBox(_parse_floats(obj["lo"]), _parse_floats(obj["hi"]))
    if kind == "PolynomialThreshold":
        coeffs = {tuple(i): c for i, c in obj["coeffs"]}
        return PolynomialThreshold(obj["dim"], coeffs, obj.get("sign", 1))
    if kind == "LowerBoundFamily":
        return LowerBoundFamily(obj["d"], obj["thresholds"], obj.get("delta", 0.0), obj.get("side", 1))
    if kind == "RecoveredSet":
        from .recovery import RecoveredSet  # recovery depends on this module

        return RecoveredSet.from_json(obj)
    raise ValidationError(f"unknown set kind {kind!r}")


# --- lower-bound construction ------------------------------------------------


def threshold_cdf(t):
    """CDF of the threshold law: 1 - exp(-2t) on [0, 1), atom of e^-2 at 1."""
    t = np.asarray(t, dtype=float)
    return np.where(t < 0, 0.0, np.where(t < 1, 1.0 - np.exp(-2.0 * t), 1.0))


def sample_thresholds(rng, size: int) -> np.ndarray:
    """Inverse-CDF draws from :func:`threshold_cdf`."""
    u = as_generator(rng).random(size)
    t = -0.5 * np.log1p(-u)
    return np.minimum(t, 1.0)


def lower_bound_target_mass(d: int) -> float:
    """Integral over the cube of min(N(e1, I), N(-e1, I)) in R^{d+1}."""
    slab = float(ndtr(-1.0) - ndtr(-2.0))
    cube = float(ndtr(1.0) - ndtr(-1.0)) ** d
    return 2.0 * slab * cube


def build_lower_bound_set(d: int, rng, side: int = 1) -> LowerBoundFamily:
    """Draw the 2^d thresholds and pick delta so the set's mass hits the target.

    The mass under N(side * e1, I) is a sum of products of 1-D normal
    probabilities, so delta is found by inverting the left-slab mass exactly
    (clipped to [-1, 1]).
    """
    if d > MAX_LOWER_BOUND_DIM:
        raise SizeError(f"d={d} needs 2^{d} thresholds; limit is d <= {MAX_LOWER_BOUND_DIM}")
    if d < 1:
        raise ValidationError("d must be >= 1")
    t = sample_thresholds(rng, 2**d)
    s = LowerBoundFamily(d, t, 0.0, side)
    mean = np.zeros(d + 1)
    mean[0] = side
    params = GaussianParams(mean, np.eye(d + 1))
    target = lower_bound_target_mass(d)
    cube = float(ndtr(1.0) - ndtr(-1.0)) ** d
    need_left = target - float(s.slab_masses(params).sum())
    # left slab mass: (Phi(-1) - Phi(delta - 2)) * cube
    q = float(ndtr(-1.0)) - need_left / cube
    q = min(max(q, float(ndtr(-3.0))), float(ndtr(-1.0)))
    delta = min(1.0, max(-1.0, float(ndtri(q)) + 2.0))
    return LowerBoundFamily(d, t, delta, side)


# --- noise sensitivity -----------------------------------------------------------


def correlated_pairs(d: int, rho: float, rng, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``n`` pairs (x, z) with standard marginals and correlation 1 - rho."""
    if not 0.0 < rho < 1.0:
        raise ValidationError("rho must lie in (0, 1)")
    rng = as_generator(rng)
    x = rng.standard_normal((n, d))
    y = rng.standard_normal((n, d))
    r = 1.0 - rho
    z = r * x + math.sqrt(1.0 - r * r) * y
    return x, z


def noise_sensitivity(set: SetOracle, rho: float, rng, n: int, chunk: int = 250_000) -> MCEstimate:
    """Monte Carlo estimate of 2 E[1_S(x) 1_{S^c}(z)] over correlated pairs."""
    rng = as_generator(rng)
    parts = []
    left = n
    while left > 0:
        m = min(chunk, left)
        x, z = correlated_pairs(set.dim, rho, rng, m)
        parts.append(2.0 * (set.contains(x) & ~set.contains(z)))
        left -= m
    return _mean_estimate(np.concatenate(parts))


def noise_sensitivity_bound(set: SetOracle, rho: float) -> Optional[float]:
    """sqrt(pi) sqrt(rho) * Gamma(S) when a quantitative bound is known."""
    if set.gsa_bound is None:
        return None
    return math.sqrt(math.pi) * math.sqrt(rho) * set.gsa_bound
