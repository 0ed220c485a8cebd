"""Normalized (orthonormal) probabilists' Hermite polynomials.

``H_n = He_n / sqrt(n!)`` so that E_{N(0,1)}[H_n H_m] = delta_nm, and the
d-variate ``H_V(x) = prod_i H_{V_i}(x_i)`` form an orthonormal basis of
L^2(N(0, I)).

Multi-indices of total degree <= k are enumerated in graded order: by
total degree, then in descending lexicographic order inside each degree, so
that for d=2, k=1 the order is (0,0), (1,0), (0,1).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import DimensionMismatchError, SizeError, ValidationError

MAX_INDEX_COUNT = 2**31


def hermite_table(x, k: int) -> np.ndarray:
    """All of ``H_0(x) .. H_k(x)``, stacked along a new last axis."""
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape + (k + 1,))
    out[..., 0] = 1.0
    if k >= 1:
        out[..., 1] = x
    for n in range(1, k):
        out[..., n + 1] = (x * out[..., n] - math.sqrt(n) * out[..., n - 1]) / math.sqrt(n + 1)
    return out


def hermite_1d(n: int, x):
    """Normalized Hermite polynomial of degree ``n`` via the stable recurrence."""
    if n < 0:
        raise ValidationError("degree must be non-negative")
    val = hermite_table(x, n)[..., n]
    return float(val) if np.ndim(val) == 0 else val


def hermite_multi(V, x):
    """``prod_i H_{V_i}(x_i)`` for a point or an ``(n, d)`` batch."""
    V = tuple(int(v) for v in V)
    arr = np.asarray(x, dtype=float)
    if arr.shape[-1] != len(V):
        raise DimensionMismatchError(f"multi-index has length {len(V)}, point has dimension {arr.shape[-1]}")
    out = np.ones(arr.shape[:-1])
    for i, v in enumerate(V):
        if v:
            out = out * hermite_table(arr[..., i], v)[..., v]
    return float(out) if np.ndim(out) == 0 else out


def count_multi_indices(d: int, k: int) -> int:
    return math.comb(d + k, k)


def _compositions(total: int, d: int) -> Iterator[tuple]:
    """Non-negative d-tuples summing to ``total`` in descending lex order."""
    if d == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, d - 1):
            yield (first,) + rest


def enumerate_multi_indices(d: int, k: int) -> list[tuple]:
    """All V in N^d with |V| <= k, in graded order; there are C(d+k, k)."""
    if d < 1 or k < 0:
        raise ValidationError("need d >= 1 and k >= 0")
    if count_multi_indices(d, k) > MAX_INDEX_COUNT:
        raise SizeError(f"C({d}+{k}, {k}) multi-indices exceed the 2^31 limit")
    return [V for g in range(k + 1) for V in _compositions(g, d)]


def multi_index_array(d: int, k: int) -> np.ndarray:
    return np.array(enumerate_multi_indices(d, k), dtype=np.int64).reshape(-1, d)


def design_matrix(x, indices: np.ndarray) -> np.ndarray:
    """Matrix of ``H_V(x_i)``: rows are points, columns follow ``indices``."""
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    d = indices.shape[1]
    if pts.shape[1] != d:
        raise DimensionMismatchError(f"indices have dimension {d}, points have {pts.shape[1]}")
    k = int(indices.max()) if indices.size else 0
    table = hermite_table(pts, k)  # (n, d, k+1)
    out = table[:, 0, indices[:, 0]]
    for j in range(1, d):
        out = out * table[:, j, indices[:, j]]
    return out


@dataclass(frozen=True, eq=False)
class HermiteExpansion:
    """Coefficients over all multi-indices of degree <= ``max_degree``.

    ``coeffs`` is dense, in the graded enumeration order.
    """

    dim: int
    max_degree: int
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float).ravel().copy()
        expected = count_multi_indices(self.dim, self.max_degree)
        if c.shape[0] != expected:
            raise ValidationError(f"expected {expected} coefficients, got {c.shape[0]}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def from_map(cls, dim: int, max_degree: int, coeff_map: dict) -> "HermiteExpansion":
        idx = enumerate_multi_indices(dim, max_degree)
        pos = {V: i for i, V in enumerate(idx)}
        c = np.zeros(len(idx))
        for V, val in coeff_map.items():
            V = tuple(int(v) for v in V)
            if len(V) != dim:
                raise DimensionMismatchError(f"index {V} has wrong length for dim {dim}")
            if V not in pos:
                raise ValidationError(f"index {V} exceeds degree {max_degree}")
            c[pos[V]] = float(val)
        return cls(dim, max_degree, c)

    @classmethod
    def constant(cls, dim: int, value: float = 1.0, max_degree: int = 0) -> "HermiteExpansion":
        c = np.zeros(count_multi_indices(dim, max_degree))
        c[0] = value
        return cls(dim, max_degree, c)

    @property
    def indices(self) -> np.ndarray:
        return multi_index_array(self.dim, self.max_degree)

    @property
    def degrees(self) -> np.ndarray:
        return self.indices.sum(axis=1)

    def coefficient(self, V) -> float:
        V = tuple(int(v) for v in V)
        if len(V) != self.dim:
            raise DimensionMismatchError("index length differs from dim")
        if sum(V) > self.max_degree:
            return 0.0
        return float(self.coeffs[enumerate_multi_indices(self.dim, self.max_degree).index(V)])

    def as_map(self) -> dict:
        return {V: float(c) for V, c in zip(enumerate_multi_indices(self.dim, self.max_degree), self.coeffs)}

    def evaluate(self, x, chunk: int = 65536):
        """Unclamped sum of ``c_V H_V(x)``."""
        arr = np.asarray(x, dtype=float)
        single = arr.ndim == 1
        pts = np.atleast_2d(arr)
        if pts.shape[1] != self.dim:
            raise DimensionMismatchError(f"expansion has dim {self.dim}, points have {pts.shape[1]}")
        idx = self.indices
        out = np.empty(pts.shape[0])
        for s in range(0, pts.shape[0], chunk):
            out[s : s + chunk] = design_matrix(pts[s : s + chunk], idx) @ self.coeffs
        return float(out[0]) if single else out

    def __call__(self, x):
        """Clamped value ``max(0, sum c_V H_V(x))``."""
        val = np.maximum(0.0, self.evaluate(x))
        return float(val) if np.ndim(val) == 0 else val

    def truncate(self, k: int) -> "HermiteExpansion":
        """The same expansion restricted to degrees <= k."""
        if k > self.max_degree:
            raise ValidationError("cannot truncate to a higher degree")
        n = count_multi_indices(self.dim, k)
        return HermiteExpansion(self.dim, k, self.coeffs[:n])

    def l2_norm_squared(self) -> float:
        """E_{N0}[(sum c_V H_V)^2] by Parseval."""
        return float(self.coeffs @ self.coeffs)

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "max_degree": self.max_degree,
            "coeffs": [[list(V), float(c)] for V, c in zip(enumerate_multi_indices(self.dim, self.max_degree), self.coeffs)],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "HermiteExpansion":
        return cls.from_map(obj["dim"], obj["max_degree"], {tuple(V): c for V, c in obj["coeffs"]})


def noise_operator_apply(expansion: HermiteExpansion, rho: float) -> HermiteExpansion:
    """Scale each coefficient by ``rho ** |V|``."""
    if not 0.0 <= rho <= 1.0:
        raise ValidationError("rho must lie in [0, 1]")
    scale = np.power(float(rho), expansion.degrees)
    return HermiteExpansion(expansion.dim, expansion.max_degree, expansion.coeffs * scale)
