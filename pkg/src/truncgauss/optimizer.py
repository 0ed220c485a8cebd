"""Convex objective in natural parameters, its stochastic gradient, the
projection onto the near-isotropic set, and projected SGD.

Iterates live in the reparameterization ``(u, B) = (Sigma^{-1} mu, Sigma^{-1})``.
With ``M2 = Sigma_S + mu_S mu_S^T`` built from the empirical conditional
moments, the per-sample weight is

    log(e^h N0(x)) = x^T (B - I) x / 2 - tr((B - I) M2) / 2 - u^T (x - mu_S)

and the objective is ``M(u, B) = E_{x ~ N*_S}[e^h N0(x) psi_k(x)]``. On a
fixed batch this is a nonnegative sum of exponentials of affine functions of
``(u, B)``, hence convex.

Vectorized points are ``w = (B.ravel(), u)`` of length ``d^2 + d``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from numba import njit

from .errors import (
    DimensionMismatchError,
    FactorizationError,
    InvalidInputError,
    NumericalOverflowError,
    ValidationError,
)
from .gaussian import GaussianParams, IsotropicCert, LOG_2PI
from .hermite import HermiteExpansion
from .rng import STAGE_SGD, substream

LOG_CLAMP = 700.0
DEFAULT_B = 1.0 / 16.0
DEFAULT_C = 4.0
MIN_RADIUS = 1.0


@dataclass(frozen=True, eq=False)
class ReparamPoint:
    """SGD iterate ``(u, B)``; B symmetric positive definite."""

    u: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        u = np.atleast_1d(np.asarray(self.u, dtype=float)).copy()
        B = np.atleast_2d(np.asarray(self.B, dtype=float)).copy()
        d = u.shape[0]
        if u.ndim != 1 or B.shape != (d, d):
            raise DimensionMismatchError(f"u has length {d} but B has shape {B.shape}")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(B))):
            raise InvalidInputError("non-finite reparameterized point")
        scale = max(1.0, float(np.max(np.abs(B))))
        if np.max(np.abs(B - B.T)) > 1e-12 * scale:
            raise ValidationError("B is not symmetric")
        B = 0.5 * (B + B.T)
        try:
            np.linalg.cholesky(B)
        except np.linalg.LinAlgError as exc:
            raise FactorizationError("B is not positive definite") from exc
        u.setflags(write=False)
        B.setflags(write=False)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "B", B)

    @property
    def dim(self) -> int:
        return self.u.shape[0]

    @classmethod
    def from_params(cls, p: GaussianParams) -> "ReparamPoint":
        prec = p.precision
        return cls(prec @ p.mean, prec)

    def to_params(self) -> GaussianParams:
        sigma = np.linalg.inv(self.B)
        sigma = 0.5 * (sigma + sigma.T)
        return GaussianParams(sigma @ self.u, sigma)

    def vector(self) -> np.ndarray:
        return np.concatenate([self.B.ravel(), self.u])

    @classmethod
    def from_vector(cls, w, d: int) -> "ReparamPoint":
        w = np.asarray(w, dtype=float)
        if w.shape != (d * d + d,):
            raise DimensionMismatchError(f"expected a vector of length {d * d + d}")
        return cls(w[d * d :], w[: d * d].reshape(d, d))


@dataclass(frozen=True)
class ProjectionSet:
    """Points whose implied ``(mu, Sigma)`` are in (a, b)-isotropic position."""

    a: float
    b: float = DEFAULT_B

    def __post_init__(self):
        IsotropicCert(self.a, self.b)  # validates

    @classmethod
    def from_alpha(cls, alpha: float, c: float = DEFAULT_C, b: float = DEFAULT_B, min_radius: float = MIN_RADIUS):
        """``a = max(c log(1/alpha), min_radius)``."""
        if not 0.0 < alpha <= 1.0:
            raise ValidationError("alpha must lie in (0, 1]")
        return cls(max(c * math.log(1.0 / alpha), min_radius), b)

    @property
    def cert(self) -> IsotropicCert:
        return IsotropicCert(self.a, self.b)

    def contains(self, p: ReparamPoint, tol: float = 1e-9) -> bool:
        return _is_member(p.u, p.B, self.a, self.b, tol)


@dataclass(frozen=True)
class SgdConfig:
    """Projected SGD settings. ``lam`` sets the step size ``1/(lam * i)``."""

    T: int
    lam: float
    K: int = 1
    seed: int = 0
    minibatch: int = 1
    eval_points: int = 2000

    def __post_init__(self):
        if int(self.T) < 1:
            raise ValidationError("T must be >= 1")
        if not self.lam > 0:
            raise ValidationError("lambda must be > 0")
        if int(self.K) < 1 or int(self.K) % 2 == 0:
            raise ValidationError("K must be odd and >= 1")
        if int(self.minibatch) < 1 or int(self.eval_points) < 1:
            raise ValidationError("minibatch and eval_points must be >= 1")
        if not 0 <= int(self.seed) < 2**64:
            raise ValidationError("seed must be an unsigned 64-bit integer")

    def to_json(self) -> dict:
        return {"T": self.T, "lambda": self.lam, "K": self.K, "seed": self.seed,
                "minibatch": self.minibatch, "eval_points": self.eval_points}

    @classmethod
    def from_json(cls, obj: dict) -> "SgdConfig":
        obj = dict(obj)
        if "lambda" in obj:
            obj["lam"] = obj.pop("lambda")
        return cls(**obj)


@dataclass
class ObjectiveTrace:
    """Objective at the running average, sampled every ``T/100`` steps."""

    iteration: list = field(default_factory=list)
    objective: list = field(default_factory=list)
    clamp_count: list = field(default_factory=list)

    def append(self, it: int, value: float, clamps: int):
        self.iteration.append(int(it))
        self.objective.append(float(value))
        self.clamp_count.append(int(clamps))

    def rows(self):
        return list(zip(self.iteration, self.objective, self.clamp_count))

    def smoothed(self, window: int = 10) -> np.ndarray:
        v = np.asarray(self.objective, dtype=float)
        if v.size == 0:
            return v
        w = min(window, v.size)
        return np.convolve(v, np.ones(w) / w, mode="valid")

    def __eq__(self, other):
        return isinstance(other, ObjectiveTrace) and self.rows() == other.rows()


# ---------------------------------------------------------------------------
# objective and gradient


def _points(x, d: int) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    if pts.shape[1] != d:
        raise DimensionMismatchError(f"point dimension {pts.shape[1]} differs from {d}")
    return pts


def _second_moment(mu_s, sigma_s) -> tuple[np.ndarray, np.ndarray]:
    mu_s = np.asarray(mu_s, dtype=float)
    sigma_s = np.asarray(sigma_s, dtype=float)
    return mu_s, sigma_s + np.outer(mu_s, mu_s)


def _log_weight(u, B, x, mu_s, m2) -> np.ndarray:
    d = u.shape[0]
    dev = B - np.eye(d)
    quad = np.einsum("ni,ij,nj->n", x, dev, x)
    return 0.5 * quad - 0.5 * float(np.sum(dev * m2)) - (x - mu_s) @ u


def _psi_values(psi_k, x) -> np.ndarray:
    if isinstance(psi_k, HermiteExpansion):
        return np.atleast_1d(psi_k(x))
    if callable(psi_k):
        return np.atleast_1d(np.asarray(psi_k(x), dtype=float))
    vals = np.atleast_1d(np.asarray(psi_k, dtype=float))
    if vals.shape[0] != x.shape[0]:
        raise DimensionMismatchError("precomputed psi values do not match the batch")
    return vals


def _clamped_weights(logw: np.ndarray) -> tuple[np.ndarray, int]:
    over = logw > LOG_CLAMP
    return np.exp(np.minimum(logw, LOG_CLAMP)), int(over.sum())


def log_weight(p: ReparamPoint, x, mu_s, sigma_s):
    """``log(e^h N0(x)) = h + log N0(x)``."""
    pts = _points(x, p.dim)
    mu, m2 = _second_moment(mu_s, sigma_s)
    out = _log_weight(p.u, p.B, pts, mu, m2)
    return float(out[0]) if np.ndim(x) == 1 else out


def h_value(p: ReparamPoint, x, mu_s, sigma_s):
    """The exponent ``h(u, B; x)``."""
    pts = _points(x, p.dim)
    mu, m2 = _second_moment(mu_s, sigma_s)
    lw = _log_weight(p.u, p.B, pts, mu, m2)
    out = lw + 0.5 * np.sum(pts * pts, axis=1) + 0.5 * p.dim * LOG_2PI
    return float(out[0]) if np.ndim(x) == 1 else out


def _objective(u, B, x, psi_vals, mu_s, m2, diagnostics=None) -> float:
    active = psi_vals > 0
    if not active.any():
        return 0.0
    logw = _log_weight(u, B, x[active], mu_s, m2)
    w, clamped = _clamped_weights(logw)
    if diagnostics is not None:
        diagnostics["clamped"] = diagnostics.get("clamped", 0) + clamped
    if clamped == logw.size:
        raise NumericalOverflowError("every objective term overflowed")
    return float(np.sum(w * psi_vals[active]) / x.shape[0])


def objective_estimate(p: ReparamPoint, samples, psi_k, mu_s, sigma_s, diagnostics: Optional[dict] = None) -> float:
    """Sample mean of ``e^h N0(x) psi_k(x)`` over the batch.

    ``psi_k`` may be an expansion, a callable or precomputed values. Terms
    whose log weight exceeds 700 are clamped and counted in
    ``diagnostics["clamped"]``.
    """
    x = _points(samples, p.dim)
    if x.shape[0] < 1:
        raise ValidationError("sample batch is empty")
    mu, m2 = _second_moment(mu_s, sigma_s)
    return _objective(p.u, p.B, x, _psi_values(psi_k, x), mu, m2, diagnostics)


def _gradient_rows(u, B, x, psi_vals, mu_s, m2) -> tuple[np.ndarray, int]:
    n, d = x.shape
    out = np.zeros((n, d * d + d))
    active = psi_vals > 0
    if not active.any():
        return out, 0
    xa = x[active]
    w, clamped = _clamped_weights(_log_weight(u, B, xa, mu_s, m2))
    scale = w * psi_vals[active]
    outer = 0.5 * (xa[:, :, None] * xa[:, None, :] - m2)
    out[active, : d * d] = outer.reshape(-1, d * d) * scale[:, None]
    out[active, d * d :] = (mu_s - xa) * scale[:, None]
    return out, clamped


def gradient_sample(p: ReparamPoint, x, psi_k, mu_s, sigma_s) -> np.ndarray:
    """Stochastic gradient ``v`` for one sample, ``(B-block.ravel(), u-block)``."""
    pts = _points(x, p.dim)
    if pts.shape[0] != 1:
        raise ValidationError("gradient_sample takes a single point; use gradient_batch")
    return gradient_batch(p, pts, psi_k, mu_s, sigma_s)[0]


def gradient_batch(p: ReparamPoint, samples, psi_k, mu_s, sigma_s) -> np.ndarray:
    """Per-sample stochastic gradients, one row per point."""
    x = _points(samples, p.dim)
    mu, m2 = _second_moment(mu_s, sigma_s)
    return _gradient_rows(p.u, p.B, x, _psi_values(psi_k, x), mu, m2)[0]


# ---------------------------------------------------------------------------
# projection


def _eig_B(B: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    B = 0.5 * (B + B.T)
    if not np.all(np.isfinite(B)):
        raise FactorizationError("non-finite B")
    vals, vecs = np.linalg.eigh(B)
    if np.min(np.abs(vals)) <= 1e-12 * max(1.0, float(np.max(np.abs(vals)))):
        raise FactorizationError("B is singular")
    return vals, vecs


def _is_member(u, B, a, b, tol=1e-9) -> bool:
    vals, vecs = _eig_B(B)
    if vals[0] <= 0:
        return False
    sig = 1.0 / vals
    lo, hi = 1.0 - b, 1.0 / (1.0 - b)
    if sig.min() < lo - tol or sig.max() > hi + tol:
        return False
    if float(np.sum((sig - 1.0) ** 2)) > a + tol:
        return False
    mu = vecs @ ((vecs.T @ u) * sig)
    return float(mu @ mu) <= a + tol


def _project(u, B, a, b, tol=1e-9) -> tuple[np.ndarray, np.ndarray]:
    vals, vecs = _eig_B(B)
    mu = vecs @ ((vecs.T @ u) / vals)
    lo, hi = 1.0 - b, 1.0 / (1.0 - b)
    # eigen-clip and Frobenius shrink of Sigma - I; the shrink keeps the band,
    # so the loop settles after one round in exact arithmetic
    sig = 1.0 / np.clip(vals, lo, hi)
    for _ in range(10):
        sig = np.clip(sig, lo, hi)
        dev2 = float(np.sum((sig - 1.0) ** 2))
        if dev2 > a:
            sig = 1.0 + (sig - 1.0) * math.sqrt(a / dev2)
        if sig.min() >= lo - tol and sig.max() <= hi + tol and float(np.sum((sig - 1.0) ** 2)) <= a + tol:
            break
    m2 = float(mu @ mu)
    if m2 > a:
        mu = mu * math.sqrt(a / m2)
    beta = 1.0 / sig
    B_new = (vecs * beta) @ vecs.T
    B_new = 0.5 * (B_new + B_new.T)
    return B_new @ mu, B_new


def project_to_D(p: ReparamPoint, dset: ProjectionSet) -> ReparamPoint:
    """Map a point into D; members are returned unchanged."""
    if _is_member(p.u, p.B, dset.a, dset.b):
        return p
    u, B = _project(p.u, p.B, dset.a, dset.b)
    return ReparamPoint(u, B)


def _project_raw(u, B, a, b):
    if _is_member(u, B, a, b):
        return u, B
    return _project(u, B, a, b)


def _project_mean_only(u, B, B_inv, a):
    mu = B_inv @ u
    m2 = float(mu @ mu)
    if m2 > a:
        return B @ (mu * math.sqrt(a / m2))
    return u


# ---------------------------------------------------------------------------
# SGD


def _sgd_loop_numpy(xs, psi_all, mu_s, m2, u, B, lam, a, b, fixed, B_inv, checkpoints):
    """Reference loop built from the public gradient and projection routines."""
    T, _, d = xs.shape
    sum_u = np.zeros(d)
    sum_B = np.zeros((d, d))
    nc = checkpoints.shape[0]
    avg_u = np.zeros((nc, d))
    avg_B = np.zeros((nc, d, d))
    clamp_at = np.zeros(nc, dtype=np.int64)
    clamps = 0
    c = 0
    for i in range(1, T + 1):
        pv = psi_all[i - 1]
        if np.any(pv > 0):
            rows, n_clamped = _gradient_rows(u, B, xs[i - 1], pv, mu_s, m2)
            clamps += n_clamped
            g = rows.mean(axis=0)
            eta = 1.0 / (lam * i)
            u = u - eta * g[d * d :]
            if fixed:
                u = _project_mean_only(u, B, B_inv, a)
            else:
                gB = g[: d * d].reshape(d, d)
                B = B - eta * 0.5 * (gB + gB.T)
                try:
                    u, B = _project_raw(u, B, a, b)
                except FactorizationError:
                    return 1, sum_u, sum_B, avg_u, avg_B, clamp_at
        sum_u += u
        sum_B += B
        if c < nc and checkpoints[c] == i:
            avg_u[c] = sum_u / i
            avg_B[c] = sum_B / i
            clamp_at[c] = clamps
            c += 1
    return 0, sum_u, sum_B, avg_u, avg_B, clamp_at


@njit(cache=True)
def _project_nb(u, B, a, b, tol):
    """Compiled twin of ``_project_raw``; status 1 flags a singular B."""
    d = u.shape[0]
    Bs = 0.5 * (B + B.T)
    vals, vecs = np.linalg.eigh(Bs)
    amax = 1.0
    amin = np.inf
    for j in range(d):
        amax = max(amax, abs(vals[j]))
        amin = min(amin, abs(vals[j]))
    if amin <= 1e-12 * amax:
        return 1, u, B
    lo = 1.0 - b
    hi = 1.0 / (1.0 - b)
    coords = vecs.T @ u
    mu = vecs @ (coords / vals)
    member = vals[0] > 0
    if member:
        dev2 = 0.0
        for j in range(d):
            s = 1.0 / vals[j]
            if s < lo - tol or s > hi + tol:
                member = False
            dev2 += (s - 1.0) ** 2
        if dev2 > a + tol or mu @ mu > a + tol:
            member = False
    if member:
        return 0, u, B
    sig = np.empty(d)
    for j in range(d):
        sig[j] = 1.0 / min(max(vals[j], lo), hi)
    for _ in range(10):
        for j in range(d):
            sig[j] = min(max(sig[j], lo), hi)
        dev2 = 0.0
        for j in range(d):
            dev2 += (sig[j] - 1.0) ** 2
        if dev2 > a:
            f = np.sqrt(a / dev2)
            for j in range(d):
                sig[j] = 1.0 + (sig[j] - 1.0) * f
        ok = True
        dev2 = 0.0
        for j in range(d):
            if sig[j] < lo - tol or sig[j] > hi + tol:
                ok = False
            dev2 += (sig[j] - 1.0) ** 2
        if ok and dev2 <= a + tol:
            break
    m2 = mu @ mu
    if m2 > a:
        mu = mu * np.sqrt(a / m2)
    B_new = (vecs * (1.0 / sig)) @ vecs.T
    B_new = 0.5 * (B_new + B_new.T)
    return 0, B_new @ mu, B_new


@njit(cache=True)
def _sgd_loop_numba(xs, psi_all, mu_s, m2, u0, B0, lam, a, b, fixed, B_inv, checkpoints):
    T, mb, d = xs.shape
    u = u0.copy()
    B = B0.copy()
    sum_u = np.zeros(d)
    sum_B = np.zeros((d, d))
    nc = checkpoints.shape[0]
    avg_u = np.zeros((nc, d))
    avg_B = np.zeros((nc, d, d))
    clamp_at = np.zeros(nc, dtype=np.int64)
    clamps = 0
    c = 0
    gu = np.zeros(d)
    gB = np.zeros((d, d))
    for i in range(1, T + 1):
        gu[:] = 0.0
        gB[:, :] = 0.0
        active = False
        for j in range(mb):
            pv = psi_all[i - 1, j]
            if pv <= 0:
                continue
            active = True
            x = xs[i - 1, j]
            quad = 0.0
            tr = 0.0
            lin = 0.0
            for p in range(d):
                for q in range(d):
                    dev = B[p, q] - (1.0 if p == q else 0.0)
                    quad += x[p] * dev * x[q]
                    tr += dev * m2[p, q]
                lin += (x[p] - mu_s[p]) * u[p]
            lw = 0.5 * quad - 0.5 * tr - lin
            if lw > 700.0:
                lw = 700.0
                clamps += 1
            s = np.exp(lw) * pv
            for p in range(d):
                gu[p] += (mu_s[p] - x[p]) * s
                for q in range(d):
                    gB[p, q] += 0.5 * (x[p] * x[q] - m2[p, q]) * s
        if active:
            eta = 1.0 / (lam * i)
            for p in range(d):
                u[p] -= eta * gu[p] / mb
            if fixed:
                mu = B_inv @ u
                r2 = mu @ mu
                if r2 > a:
                    u = B @ (mu * np.sqrt(a / r2))
            else:
                for p in range(d):
                    for q in range(d):
                        B[p, q] -= eta * 0.5 * (gB[p, q] + gB[q, p]) / mb
                status, u, B = _project_nb(u, B, a, b, 1e-9)
                if status != 0:
                    return 1, sum_u, sum_B, avg_u, avg_B, clamp_at
        sum_u += u
        sum_B += B
        if c < nc and checkpoints[c] == i:
            avg_u[c] = sum_u / i
            avg_B[c] = sum_B / i
            clamp_at[c] = clamps
            c += 1
    return 0, sum_u, sum_B, avg_u, avg_B, clamp_at


def sgd_run(
    config: SgdConfig,
    sampler: Callable[[np.random.Generator, int], np.ndarray],
    psi_k,
    mu_s,
    sigma_s,
    dset: ProjectionSet,
    rng=None,
    fixed_covariance=None,
    backend: str = "numba",
) -> tuple[GaussianParams, ObjectiveTrace]:
    """One projected-SGD run; returns the averaged iterate and the trace.

    ``sampler(rng, n)`` returns ``n`` fresh truncated samples. If
    ``fixed_covariance`` is given, B is held at its inverse and only ``u``
    is optimized. ``backend="numpy"`` runs the uncompiled reference loop.
    """
    mu_s, m2 = _second_moment(mu_s, sigma_s)
    d = mu_s.shape[0]
    if rng is None:
        rng = substream(config.seed, STAGE_SGD)
    T, mb = int(config.T), int(config.minibatch)
    eval_x = np.asarray(sampler(rng, int(config.eval_points)), dtype=float)
    xs = np.asarray(sampler(rng, T * mb), dtype=float).reshape(T, mb, d)
    if isinstance(psi_k, HermiteExpansion) or callable(psi_k):
        psi_all = _psi_values(psi_k, xs.reshape(-1, d)).reshape(T, mb)
        psi_eval = _psi_values(psi_k, eval_x)
    else:
        raise ValidationError("psi_k must be an expansion or a callable")

    if fixed_covariance is not None:
        B0 = np.linalg.inv(np.asarray(fixed_covariance, dtype=float))
        B0 = 0.5 * (B0 + B0.T)
        B_inv = np.asarray(fixed_covariance, dtype=float)
    else:
        B0 = np.linalg.inv(np.asarray(sigma_s, dtype=float))
        B0 = 0.5 * (B0 + B0.T)
        B_inv = None
    u = B0 @ mu_s
    B = B0.copy()
    if fixed_covariance is None:
        u, B = _project_raw(u, B, dset.a, dset.b)
    else:
        u = _project_mean_only(u, B, B_inv, dset.a)

    every = max(1, T // 100)
    checkpoints = np.array(sorted(set(range(every, T + 1, every)) | {T}), dtype=np.int64)
    fixed = fixed_covariance is not None
    if backend not in ("numba", "numpy"):
        raise ValidationError("backend must be 'numba' or 'numpy'")
    loop = _sgd_loop_numba if backend == "numba" else _sgd_loop_numpy
    c = np.ascontiguousarray
    status, sum_u, sum_B, avg_u, avg_B, clamp_at = loop(
        c(xs), c(psi_all), c(mu_s), c(m2), c(u), c(B), float(config.lam), float(dset.a),
        float(dset.b), bool(fixed), c(B_inv if fixed else np.eye(d)), checkpoints,
    )
    if status != 0:
        raise FactorizationError("an SGD iterate has singular B")
    trace = ObjectiveTrace()
    trace.append(0, _objective(u, B, eval_x, psi_eval, mu_s, m2), 0)
    for j, it in enumerate(checkpoints):
        trace.append(it, _objective(avg_u[j], avg_B[j], eval_x, psi_eval, mu_s, m2), clamp_at[j])
    B_hat = sum_B / T
    B_hat = 0.5 * (B_hat + B_hat.T)
    try:
        sigma_hat = np.linalg.inv(B_hat)
    except np.linalg.LinAlgError as exc:
        raise FactorizationError("averaged B is singular") from exc
    sigma_hat = 0.5 * (sigma_hat + sigma_hat.T)
    return GaussianParams(sigma_hat @ (sum_u / T), sigma_hat), trace


def median_of_runs(runs) -> GaussianParams:
    """The run minimizing the median distance to the other runs (a medoid).

    Distances are Euclidean between ``(mean, covariance.ravel())`` vectors;
    ties go to the earliest run.
    """
    runs = list(runs)
    if not runs:
        raise ValidationError("no runs to combine")
    if len(runs) == 1:
        return runs[0]
    vecs = np.array([np.concatenate([r.mean, r.covariance.ravel()]) for r in runs])
    dist = np.linalg.norm(vecs[:, None, :] - vecs[None, :, :], axis=2)
    scores = [float(np.median(np.delete(dist[i], i))) for i in range(len(runs))]
    return runs[int(np.argmin(scores))]


def hessian_probe(
    p: ReparamPoint,
    direction,
    samples=None,
    psi_k=None,
    mu_s=None,
    sigma_s=None,
    eps: float = 1e-3,
    objective: Optional[Callable[[np.ndarray], float]] = None,
) -> float:
    """Central second difference of the objective along ``direction``.

    By default the objective is the empirical one on ``samples``; pass
    ``objective`` (a function of the vectorized point) to probe another one.
    """
    z = np.asarray(direction, dtype=float)
    d = p.dim
    if z.shape != (d * d + d,):
        raise DimensionMismatchError(f"direction must have length {d * d + d}")
    if abs(float(np.linalg.norm(z)) - 1.0) > 1e-9:
        raise ValidationError("direction must be a unit vector")
    if eps <= 0:
        raise ValidationError("eps must be > 0")
    if objective is None:
        x = _points(samples, d)
        psi_vals = _psi_values(psi_k, x)
        mu, m2 = _second_moment(mu_s, sigma_s)

        def objective(w):
            return _objective(w[d * d :], w[: d * d].reshape(d, d), x, psi_vals, mu, m2)

    w0 = p.vector()
    return (objective(w0 + eps * z) - 2.0 * objective(w0) + objective(w0 - eps * z)) / eps**2
