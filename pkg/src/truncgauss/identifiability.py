"""Min-mass ERM over boxes, the Scheffe tournament, low-dimensional
parameter grids and raw-moment matching."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DimensionMismatchError, SizeError, ValidationError
from .gaussian import GaussianParams, TruncatedGaussian, log_density, truncated_sample
from .hermite import enumerate_multi_indices, multi_index_array
from .rng import as_generator
from .sets import AxisBox, SetOracle

TOURNAMENT_CONST = 8.0
MAX_GRID = 10**6


@dataclass(frozen=True)
class Hypothesis:
    """A candidate truncated Gaussian with density ``1_S N(params) / alpha_hat``."""

    params: GaussianParams
    set: SetOracle
    alpha_hat: float

    def __post_init__(self):
        if not 0.0 < self.alpha_hat <= 1.0:
            raise ValidationError("alpha_hat must lie in (0, 1]")
        if self.set.dim != self.params.dim:
            raise DimensionMismatchError("set and parameters have different dimensions")

    @property
    def dim(self) -> int:
        return self.params.dim

    @property
    def truncated(self) -> TruncatedGaussian:
        return TruncatedGaussian(self.params, self.set, self.alpha_hat)

    def log_pdf(self, x) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.full(pts.shape[0], -np.inf)
        inside = np.asarray(self.set.contains(pts), dtype=bool)
        if inside.any():
            out[inside] = log_density(self.params, pts[inside]) - math.log(self.alpha_hat)
        return out

    def to_json(self) -> dict:
        return {"params": self.params.to_json(), "set": self.set.to_json(), "alpha_hat": self.alpha_hat}


@dataclass(frozen=True)
class MomentVector:
    """Raw moments ``m_V = E[x^V]`` for every ``|V| <= max_degree``."""

    dim: int
    max_degree: int
    values: np.ndarray
    stderr: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (math.comb(self.dim + self.max_degree, self.max_degree),):
            raise ValidationError("moment vector has the wrong length")
        if v[0] != 1.0:
            raise ValidationError("the degree-0 moment must be 1")

    def as_map(self) -> dict:
        return dict(zip(enumerate_multi_indices(self.dim, self.max_degree), map(float, self.values)))


def erm_min_mass_box(samples, guess: GaussianParams | None = None) -> AxisBox:
    """Componentwise bounding box of the batch.

    Every axis box containing the samples contains this one, so it has the
    least mass among consistent boxes under any Gaussian ``guess``.
    """
    x = np.atleast_2d(np.asarray(samples, dtype=float))
    if x.shape[0] < 1:
        raise ValidationError("sample batch is empty")
    if guess is not None and guess.dim != x.shape[1]:
        raise DimensionMismatchError("guess and samples have different dimensions")
    return AxisBox(x.min(axis=0), x.max(axis=0))


@dataclass
class TournamentResult:
    winner: Optional[int]
    wins: np.ndarray  # wins[i, j] = 1 if i beat (or drew with) j
    samples_per_pool: int

    @property
    def failed(self) -> bool:
        return self.winner is None

    def to_json(self, hypotheses=None) -> dict:
        out = {
            "winner": self.winner,
            "failure": self.failed,
            "samples_per_pool": self.samples_per_pool,
            "win_matrix": self.wins.astype(int).tolist(),
        }
        if hypotheses is not None:
            out["hypotheses"] = [h.to_json() for h in hypotheses]
        return out


def tournament_sample_size(n_hyp: int, eps: float, delta: float, const: float = TOURNAMENT_CONST) -> int:
    if eps <= 0 or not 0 < delta < 1:
        raise ValidationError("need eps > 0 and delta in (0, 1)")
    return int(math.ceil(const * math.log(3.0 * n_hyp**2 / delta) / eps**2))


def tournament(data, hypotheses, eps: float, delta: float, rng, const: float = TOURNAMENT_CONST) -> TournamentResult:
    """Pairwise Scheffe tournament.

    For each pair (i, j) the Scheffe set is ``A = {h_i > h_j}``. Its mass
    under X is estimated from ``data`` and under each hypothesis from one
    pool of draws per hypothesis; the hypothesis whose mass is closer to
    X's wins, ties count for both. The winner is the hypothesis with the
    most wins among those winning at least half of their matches (earliest
    index on ties); if none does, the result records failure.
    """
    hyps = list(hypotheses)
    if not hyps:
        raise ValidationError("need at least one hypothesis")
    data = np.atleast_2d(np.asarray(data, dtype=float))
    d = data.shape[1]
    if any(h.dim != d for h in hyps):
        raise DimensionMismatchError("hypothesis and data dimensions differ")
    N = len(hyps)
    m = tournament_sample_size(N, eps, delta, const)
    if data.shape[0] < m:
        raise ValidationError(f"need at least {m} samples from X, got {data.shape[0]}")
    rng = as_generator(rng)
    pools = [truncated_sample(h.truncated, rng, m)[0] for h in hyps]
    data = data[:m]
    # log densities of every hypothesis on every pool (and on the data)
    on_data = np.array([h.log_pdf(data) for h in hyps])
    on_pool = [np.array([h.log_pdf(p) for h in hyps]) for p in pools]
    wins = np.zeros((N, N), dtype=bool)
    for i in range(N):
        wins[i, i] = False
        for j in range(i + 1, N):
            p_x = np.mean(on_data[i] > on_data[j])
            p_i = np.mean(on_pool[i][i] > on_pool[i][j])
            p_j = np.mean(on_pool[j][i] > on_pool[j][j])
            gap_i, gap_j = abs(p_i - p_x), abs(p_j - p_x)
            wins[i, j] = gap_i <= gap_j
            wins[j, i] = gap_j <= gap_i
    counts = wins.sum(axis=1)
    need = (N - 1) / 2.0
    eligible = [i for i in range(N) if counts[i] >= need]
    winner = max(eligible, key=lambda i: (counts[i], -i)) if eligible else None
    return TournamentResult(winner, wins, m)


def grid_hypotheses(dim: int, box_radius: float, step: float, set_candidates, variances=(1.0,), alpha_hats=None):
    """Cartesian grid of means (per axis ``floor(2r/step)+1`` centered points)
    and diagonal variances, crossed with candidate sets.

    ``alpha_hats`` gives the mass of each (params, set) pair; by default the
    mass is computed in closed form where the set supports it.
    """
    if dim < 1 or dim > 2:
        raise SizeError("grid hypotheses are limited to d <= 2")
    if box_radius < 0 or step <= 0:
        raise ValidationError("need box_radius >= 0 and step > 0")
    n_axis = int(math.floor(2.0 * box_radius / step + 1e-12)) + 1
    axis = (np.arange(n_axis) - (n_axis - 1) / 2.0) * step
    variances = [float(v) for v in variances]
    sets = list(set_candidates)
    total = n_axis**dim * len(variances) ** dim * len(sets)
    if total > MAX_GRID:
        raise SizeError(f"grid of {total} hypotheses exceeds {MAX_GRID}")
    out = []
    for mean in itertools.product(axis, repeat=dim):
        for var in itertools.product(variances, repeat=dim):
            params = GaussianParams(np.array(mean), np.diag(var))
            for s in sets:
                if s.dim != dim:
                    raise DimensionMismatchError("candidate set has the wrong dimension")
                a = s.exact_mass(params) if alpha_hats is None else alpha_hats(params, s)
                if a is None:
                    raise ValidationError("set mass unavailable; pass alpha_hats")
                if a > 0:
                    out.append(Hypothesis(params, s, min(float(a), 1.0)))
    return out


def empirical_moments(samples, k: int) -> MomentVector:
    """Raw moments ``mean(x^V)`` for all ``|V| <= k``, with standard errors."""
    if k < 0:
        raise ValidationError("k must be >= 0")
    x = np.atleast_2d(np.asarray(samples, dtype=float))
    n, d = x.shape
    if n < 1:
        raise ValidationError("sample batch is empty")
    idx = multi_index_array(d, k)
    powers = np.ones((n, idx.shape[0]))
    for j in range(d):
        pw = x[:, j : j + 1] ** np.arange(k + 1)
        powers *= pw[:, idx[:, j]]
    vals = powers.mean(axis=0)
    vals[0] = 1.0
    se = powers.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.full(idx.shape[0], np.inf)
    return MomentVector(d, k, vals, se)


def moment_distance(a: MomentVector, b: MomentVector) -> float:
    """Largest absolute gap between matching moments."""
    if a.dim != b.dim or a.max_degree != b.max_degree:
        raise DimensionMismatchError("moment vectors have different dimension or degree")
    return float(np.max(np.abs(np.asarray(a.values) - np.asarray(b.values))))
