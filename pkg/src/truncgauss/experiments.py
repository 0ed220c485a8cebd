"""Configuration, the end-to-end estimation pipeline and the experiment
commands behind the CLI.

Every command is a function of its config dict and master seed. Randomness
is drawn from substreams keyed by (stage, index), so outputs other than the
``timings`` fields are reproducible bit for bit.
"""
from __future__ import annotations

import copy
import json
import math
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import io
from .errors import SizeError, TruncGaussError, ValidationError
from .gaussian import (
    AffineMap,
    GaussianParams,
    TruncatedGaussian,
    conditional_moments,
    sample,
    spherical_transform,
    translation_transform,
    truncated_sample,
    tv_monte_carlo,
    whitening_transform,
)
from .hermite import HermiteExpansion
from .identifiability import Hypothesis, empirical_moments, moment_distance, tournament, tournament_sample_size
from .optimizer import ProjectionSet, SgdConfig, median_of_runs, sgd_run
from .presets import fig1_config
from .psi import PsiTarget, estimate_coefficients, psi_l2_error
from .recovery import RecoveredSet, symdiff_mass
from .rng import (
    STAGE_DIAGNOSTICS,
    STAGE_MOMENTS,
    STAGE_PSI,
    STAGE_RECOVERY,
    STAGE_SGD,
    STAGE_TRIALS,
    substream,
)
from .sets import build_lower_bound_set, lower_bound_target_mass, set_from_json

TRANSFORMS = ("whiten", "spherical", "translate")
MAX_LOWER_BOUND_D = 14

TRACE_HEADER = ["run", "iteration", "objective", "clamp_count"]


# ---------------------------------------------------------------------------
# config handling


def _check_seed(seed) -> int:
    if seed is None:
        raise ValidationError("a seed is required")
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise ValidationError("seed must be an integer")
    if not 0 <= int(seed) < 2**64:
        raise ValidationError("seed must be an unsigned 64-bit integer")
    return int(seed)


def parse_value(text: str):
    """Parse a CLI override value as JSON, falling back to the raw string."""
    try:
        return json.loads(text)
    except (json.JSONDecodeError, TypeError):
        return text


def apply_overrides(cfg: dict, overrides: dict) -> dict:
    """Set leaf values addressed by dotted paths, e.g. ``{"sgd.T": 500}``."""
    out = copy.deepcopy(cfg)
    for path, value in overrides.items():
        keys = path.split(".")
        node = out
        for k in keys[:-1]:
            if k not in node or not isinstance(node[k], dict):
                node[k] = {}
            node = node[k]
        node[keys[-1]] = value
    return out


def _merge(defaults: dict, cfg: dict) -> dict:
    out = copy.deepcopy(defaults)
    for k, v in cfg.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


SGD_DEFAULTS = {"T": 50000, "K": 1, "lambda": None, "lambda_scale": 0.1, "minibatch": 1, "eval_points": 2000}


@dataclass
class ExperimentConfig:
    """One estimation problem: truth, set, degree, sample counts and SGD settings.

    ``transform`` selects the working coordinates: ``whiten`` (conditional
    mean and covariance mapped to 0 and I), ``spherical`` (translation and a
    single isotropic scale) or ``translate``. With ``known_covariance`` the
    true covariance is treated as known and only the mean is optimized.
    ``sgd.lambda`` of ``None`` means ``lambda_scale * alpha_hat**3``.
    """

    dim: int
    mean: list
    covariance: list
    set: dict
    seed: int
    k: int = 6
    n_psi: int = 100000
    n_moments: int = 100000
    n_eval: int = 100000
    sgd: dict = field(default_factory=lambda: dict(SGD_DEFAULTS))
    c: float = 4.0
    alpha_lower_bound: Optional[float] = None
    transform: str = "whiten"
    known_covariance: bool = False
    max_attempts: Optional[int] = None

    def __post_init__(self):
        self.seed = _check_seed(self.seed)
        self.sgd = _merge(SGD_DEFAULTS, self.sgd or {})
        for name in ("n_psi", "n_moments", "n_eval"):
            if int(getattr(self, name)) < 1:
                raise ValidationError(f"{name} must be >= 1")
        if int(self.k) < 0:
            raise ValidationError("k must be >= 0")
        if self.transform not in TRANSFORMS:
            raise ValidationError(f"transform must be one of {TRANSFORMS}")
        if self.alpha_lower_bound is not None and not 0 < self.alpha_lower_bound <= 1:
            raise ValidationError("alpha_lower_bound must lie in (0, 1]")
        if self.c <= 0:
            raise ValidationError("c must be > 0")
        if self.sgd["lambda"] is None and not self.sgd["lambda_scale"] > 0:
            raise ValidationError("sgd.lambda_scale must be > 0")
        # validates T, K, minibatch, eval_points and lambda
        SgdConfig(T=int(self.sgd["T"]), lam=float(self.sgd["lambda"] or 1.0), K=int(self.sgd["K"]),
                  seed=self.seed, minibatch=int(self.sgd["minibatch"]), eval_points=int(self.sgd["eval_points"]))
        params = self.true_params
        s = self.truncation_set
        if params.dim != int(self.dim) or s.dim != int(self.dim):
            raise ValidationError("dim, mean, covariance and set disagree")

    @property
    def true_params(self) -> GaussianParams:
        return GaussianParams(np.asarray(self.mean, dtype=float), np.asarray(self.covariance, dtype=float))

    @property
    def truncation_set(self):
        return set_from_json(self.set)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(obj) - known
        if extra:
            raise ValidationError(f"unknown config fields: {sorted(extra)}")
        try:
            return cls(**obj)
        except TypeError as exc:
            raise ValidationError(str(exc)) from exc


# ---------------------------------------------------------------------------
# pipeline


class Timer:
    """Accumulates wall-clock time per named stage."""

    def __init__(self):
        self.stages: dict = {}
        self._start = time.perf_counter()

    @contextmanager
    def stage(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.stages[name] = self.stages.get(name, 0.0) + time.perf_counter() - t0

    def report(self) -> dict:
        out = dict(self.stages)
        out["total"] = time.perf_counter() - self._start
        return out


@contextmanager
def _tagged(stage: str):
    """Prefix library errors with the pipeline stage, keeping their type."""
    try:
        yield
    except TruncGaussError as exc:
        if getattr(exc, "stage", None) is None:
            exc.stage = stage
            if exc.args:
                exc.args = (f"[{stage}] {exc.args[0]}",) + exc.args[1:]
        raise


def make_transform(kind: str, mu_s, sigma_s) -> AffineMap:
    if kind == "whiten":
        return whitening_transform(mu_s, sigma_s)
    if kind == "spherical":
        return spherical_transform(mu_s, sigma_s)
    if kind == "translate":
        return translation_transform(mu_s)
    raise ValidationError(f"unknown transform {kind!r}")


@dataclass
class PipelineResult:
    estimate: GaussianParams
    runs: list
    traces: list
    psi: HermiteExpansion
    transform: AffineMap
    mu_s: np.ndarray
    sigma_s: np.ndarray
    lam: float
    radius: float


def estimate_pipeline(
    x_moments,
    x_psi,
    sgd_sampler: Callable[[np.random.Generator, int], np.ndarray],
    *,
    k: int,
    alpha: float,
    alpha_hat: float,
    sgd: dict,
    seed: int,
    c: float = 4.0,
    transform: str = "whiten",
    known_covariance=None,
    timer: Optional[Timer] = None,
    sgd_key: int = 0,
) -> PipelineResult:
    """Moments, working coordinates, Hermite coefficients, K SGD runs and medoid.

    ``sgd_sampler(rng, n)`` draws truncated samples in original coordinates.
    ``alpha`` sizes the projection set; ``alpha_hat`` sets the default step
    parameter. Returns estimates in original coordinates.
    """
    timer = timer or Timer()
    x_moments = np.atleast_2d(np.asarray(x_moments, dtype=float))
    d = x_moments.shape[1]
    with timer.stage("moments"), _tagged("moments"):
        if known_covariance is not None and x_moments.shape[0] < d + 1:
            mu_s = x_moments.mean(axis=0)
            sigma_s = np.asarray(known_covariance, dtype=float).copy()
        else:
            mu_s, sigma_s = conditional_moments(x_moments)
        tr = make_transform(transform, mu_s, sigma_s)
        m_w = tr.forward(mu_s)
        s_w = tr.matrix @ sigma_s @ tr.matrix.T
        s_w = 0.5 * (s_w + s_w.T)
        fixed = None
        if known_covariance is not None:
            fixed = tr.matrix @ np.asarray(known_covariance, dtype=float) @ tr.matrix.T
            fixed = 0.5 * (fixed + fixed.T)
    with timer.stage("psi"), _tagged("psi"):
        psi = estimate_coefficients(tr.forward(x_psi), k)
    with timer.stage("sgd"), _tagged("sgd"):
        lam = float(sgd["lambda"]) if sgd.get("lambda") is not None else float(sgd["lambda_scale"]) * alpha_hat**3
        K = int(sgd["K"])
        cfg = SgdConfig(T=int(sgd["T"]), lam=lam, K=K, seed=seed,
                        minibatch=int(sgd["minibatch"]), eval_points=int(sgd["eval_points"]))
        dset = ProjectionSet.from_alpha(alpha, c=c)

        def sampler(r, n):
            return tr.forward(sgd_sampler(r, n))

        runs, traces = [], []
        for rep in range(K):
            est_w, trace = sgd_run(cfg, sampler, psi, m_w, s_w, dset,
                                   rng=substream(seed, STAGE_SGD, sgd_key, rep), fixed_covariance=fixed)
            runs.append(tr.inverse_params(est_w))
            traces.append(trace)
        estimate = median_of_runs(runs)
    return PipelineResult(estimate, runs, traces, psi, tr, mu_s, sigma_s, lam, dset.a)


@dataclass
class EstimationReport:
    """Pipeline output. ``timings`` is the only non-reproducible field."""

    mu_hat: list
    sigma_hat: list
    alpha_hat: float
    mu_s: list
    sigma_s: list
    mean_error: float
    cov_error: float
    per_degree: list
    symdiff: dict
    runs: list
    trace_file: str
    clamp_total: int
    lam: float
    radius: float
    recovered_set: dict
    config: dict
    timings: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> "EstimationReport":
        return cls(**obj)

    @property
    def estimate(self) -> GaussianParams:
        return GaussianParams(np.asarray(self.mu_hat), np.asarray(self.sigma_hat))


def _params_json(p: GaussianParams) -> dict:
    return {"mean": p.mean.tolist(), "covariance": p.covariance.tolist()}


def _trace_rows(traces) -> list:
    rows = []
    for r, t in enumerate(traces):
        rows.extend((r, it, obj, cl) for it, obj, cl in t.rows())
    return rows


def _per_degree(psi: HermiteExpansion, target: PsiTarget, seed: int, n: int) -> list:
    """Coefficient energy per degree and the L2 error of each truncation."""
    degrees = psi.degrees
    table = []
    for j in range(psi.max_degree + 1):
        err = psi_l2_error(psi.truncate(j), target, substream(seed, STAGE_DIAGNOSTICS, 1, j), n)
        table.append({
            "degree": j,
            "coefficient_energy": float(np.sum(psi.coeffs[degrees == j] ** 2)),
            "l2_error": err.value,
            "l2_error_stderr": err.stderr,
        })
    return table


def cmd_estimate(config: ExperimentConfig | dict, out: Optional[str | Path] = None) -> EstimationReport:
    """Run the three-stage pipeline on a fully specified synthetic problem.

    Writes ``report.json`` and ``trace.csv`` when ``out`` is given.
    """
    timer = Timer()
    cfg = config if isinstance(config, ExperimentConfig) else ExperimentConfig.from_dict(config)
    truth = cfg.true_params
    S = cfg.truncation_set
    seed = cfg.seed
    with timer.stage("sampling"), _tagged("sampling"):
        tg = TruncatedGaussian(truth, S, cfg.alpha_lower_bound)
        x_m, alpha_hat = truncated_sample(tg, substream(seed, STAGE_MOMENTS), int(cfg.n_moments), cfg.max_attempts)
        tg_run = TruncatedGaussian(truth, S, alpha_hat)
        x_psi, _ = truncated_sample(tg_run, substream(seed, STAGE_PSI), int(cfg.n_psi), cfg.max_attempts)
    alpha = cfg.alpha_lower_bound if cfg.alpha_lower_bound is not None else alpha_hat

    def sgd_sampler(r, n):
        return truncated_sample(tg_run, r, n, cfg.max_attempts)[0]

    res = estimate_pipeline(
        x_m, x_psi, sgd_sampler, k=int(cfg.k), alpha=alpha, alpha_hat=alpha_hat, sgd=cfg.sgd, seed=seed,
        c=cfg.c, transform=cfg.transform, known_covariance=truth.covariance if cfg.known_covariance else None,
        timer=timer,
    )
    with timer.stage("recovery"), _tagged("recovery"):
        rs = RecoveredSet(res.psi, res.estimate, res.transform)
        sd = symdiff_mass(rs, S, truth, substream(seed, STAGE_RECOVERY), int(cfg.n_eval))
    with timer.stage("diagnostics"), _tagged("diagnostics"):
        alpha_star = S.exact_mass(truth)
        if alpha_star is None:
            alpha_star = alpha_hat
        target = PsiTarget(res.transform.forward_params(truth), _working_set(S, res.transform), float(alpha_star))
        per_degree = _per_degree(res.psi, target, seed, min(int(cfg.n_eval), 20000))
    est = res.estimate
    report = EstimationReport(
        mu_hat=est.mean.tolist(),
        sigma_hat=est.covariance.tolist(),
        alpha_hat=float(alpha_hat),
        mu_s=res.mu_s.tolist(),
        sigma_s=np.asarray(res.sigma_s).tolist(),
        mean_error=float(np.linalg.norm(est.mean - truth.mean)),
        cov_error=float(np.linalg.norm(est.covariance - truth.covariance)),
        per_degree=per_degree,
        symdiff={"value": sd.value, "stderr": sd.stderr},
        runs=[_params_json(r) for r in res.runs],
        trace_file="trace.csv",
        clamp_total=int(sum(t.clamp_count[-1] for t in res.traces)),
        lam=res.lam,
        radius=res.radius,
        recovered_set=rs.to_json(),
        config=cfg.to_dict(),
    )
    if out is not None:
        with timer.stage("output"):
            outdir = Path(out)
            outdir.mkdir(parents=True, exist_ok=True)
            io.write_rows(outdir / "trace.csv", TRACE_HEADER, _trace_rows(res.traces))
    report.timings = timer.report()
    if out is not None:
        io.write_json(Path(out) / "report.json", report.to_json())
    return report


class _WorkingSet:
    """A set seen through an affine change of coordinates."""

    def __init__(self, base, transform: AffineMap):
        self.base = base
        self.transform = transform
        self.dim = base.dim

    def contains(self, y):
        return self.base.contains(self.transform.inverse(y))


def _working_set(S, transform: AffineMap):
    return _WorkingSet(S, transform)


# ---------------------------------------------------------------------------
# Figure-1 style simulation

FIG1_DEGREES = [1, 2, 3, 4, 6]


def cmd_fig1(overrides: Optional[dict] = None, out: Optional[str | Path] = None) -> dict:
    """Estimate the mean for several Hermite degrees on a preset problem.

    ``overrides`` may set ``preset`` ("A" or "B"), ``degrees`` and any
    estimation field. Samples are drawn once and shared by every degree.
    Writes ``report.json``, ``summary.csv`` (one row per degree),
    ``points.csv`` (sample cloud plus reference points) and ``trace.csv``.
    """
    timer = Timer()
    overrides = dict(overrides or {})
    preset = overrides.pop("preset", "A")
    degrees = [int(k) for k in overrides.pop("degrees", FIG1_DEGREES)]
    n_points = int(overrides.pop("n_points", 2000))
    if not degrees or min(degrees) < 0:
        raise ValidationError("degrees must be a non-empty list of non-negative integers")
    base = _merge(fig1_config(preset), {"k": max(degrees)})
    cfg = ExperimentConfig.from_dict(_merge(base, overrides))
    if cfg.dim != 2:
        raise ValidationError("fig1 runs in two dimensions")
    truth, S, seed = cfg.true_params, cfg.truncation_set, cfg.seed
    with timer.stage("sampling"), _tagged("sampling"):
        tg = TruncatedGaussian(truth, S, cfg.alpha_lower_bound)
        x_m, alpha_hat = truncated_sample(tg, substream(seed, STAGE_MOMENTS), int(cfg.n_moments), cfg.max_attempts)
        tg_run = TruncatedGaussian(truth, S, alpha_hat)
        x_psi, _ = truncated_sample(tg_run, substream(seed, STAGE_PSI), int(cfg.n_psi), cfg.max_attempts)
    alpha = cfg.alpha_lower_bound if cfg.alpha_lower_bound is not None else alpha_hat

    def sgd_sampler(r, n):
        return truncated_sample(tg_run, r, n, cfg.max_attempts)[0]

    rows, results, traces = [], [], []
    for i, k in enumerate(degrees):
        res = estimate_pipeline(
            x_m, x_psi, sgd_sampler, k=k, alpha=alpha, alpha_hat=alpha_hat, sgd=cfg.sgd, seed=seed, c=cfg.c,
            transform=cfg.transform, known_covariance=truth.covariance if cfg.known_covariance else None,
            timer=timer, sgd_key=i,
        )
        err = float(np.linalg.norm(res.estimate.mean - truth.mean))
        rows.append((k, res.estimate.mean[0], res.estimate.mean[1], err))
        results.append({"k": k, "mu_hat": res.estimate.mean.tolist(), "sigma_hat": res.estimate.covariance.tolist(),
                        "mean_error": err})
        traces.extend(res.traces)
    mu_s = x_m.mean(axis=0)
    report = {
        "preset": preset,
        "mu_star": truth.mean.tolist(),
        "mu_s": mu_s.tolist(),
        "alpha_hat": float(alpha_hat),
        "degrees": results,
        "config": cfg.to_dict(),
    }
    if out is not None:
        with timer.stage("output"):
            outdir = Path(out)
            outdir.mkdir(parents=True, exist_ok=True)
            io.write_rows(outdir / "summary.csv", ["k", "mu_hat0", "mu_hat1", "mean_error"], rows)
            pts = [("sample", "", a, b) for a, b in x_psi[:n_points]]
            pts.append(("true_mean", "", *truth.mean))
            pts.append(("conditional_mean", "", *mu_s))
            pts.extend(("estimate", k, a, b) for k, a, b, _ in rows)
            io.write_rows(outdir / "points.csv", ["kind", "k", "x0", "x1"], pts)
            io.write_rows(outdir / "trace.csv", TRACE_HEADER, _trace_rows(traces))
    report["timings"] = timer.report()
    if out is not None:
        io.write_json(Path(out) / "report.json", report)
    return report


# ---------------------------------------------------------------------------
# lower-bound experiment

LOWER_BOUND_DEFAULTS = {"d": 8, "sizes": [8, 2048], "trials": 50, "k": 2,
                        "sgd": {"T": 5000, "K": 1, "lambda": None, "lambda_scale": 0.1,
                                "minibatch": 1, "eval_points": 500}}


def birthday_probability(m: int, cells: int) -> float:
    """Chance that ``m`` uniform draws over ``cells`` cells share a cell."""
    if m > cells:
        return 1.0
    return 1.0 - math.exp(sum(math.log1p(-i / cells) for i in range(m)))


def cmd_lower_bound(config: dict, out: Optional[str | Path] = None) -> dict:
    """Mean-estimation error and subcube collisions on the lower-bound family.

    Each trial picks a side at random, draws ``m`` samples from
    N(side * e1, I) truncated to the matching set, and estimates the mean
    with the pipeline (known identity covariance, translated coordinates,
    SGD resampling the ``m`` points). Collisions count samples landing in a
    sign-pattern cell already occupied.
    """
    timer = Timer()
    cfg = _merge(LOWER_BOUND_DEFAULTS, config)
    seed = _check_seed(cfg.get("seed"))
    d, trials, k = int(cfg["d"]), int(cfg["trials"]), int(cfg["k"])
    sizes = [int(m) for m in cfg["sizes"]]
    if d > MAX_LOWER_BOUND_D:
        raise SizeError(f"d must be <= {MAX_LOWER_BOUND_D}")
    if d < 1 or trials < 1 or not sizes or min(sizes) < 1 or k < 0:
        raise ValidationError("need d >= 1, trials >= 1, sizes >= 1 and k >= 0")
    alpha = lower_bound_target_mass(d)
    cells = 2**d
    rows, per_size = [], []
    for si, m in enumerate(sizes):
        errors, collided, counts = [], [], []
        for t in range(trials):
            rng = substream(seed, STAGE_TRIALS, si, t)
            with timer.stage("sampling"), _tagged("sampling"):
                side = 1 if rng.random() < 0.5 else -1
                S = build_lower_bound_set(d, rng, side=side)
                mean = np.zeros(d + 1)
                mean[0] = side
                truth = GaussianParams(mean, np.eye(d + 1))
                x, acc = truncated_sample(TruncatedGaussian(truth, S, alpha), rng, m)
                cell = S.cell_index(x)
                n_coll = m - np.unique(cell).size
            res = estimate_pipeline(
                x, x, lambda r, n, x=x: x[r.integers(0, x.shape[0], n)], k=k, alpha=alpha, alpha_hat=alpha,
                sgd=cfg["sgd"], seed=seed, c=float(cfg.get("c", 4.0)), transform="translate",
                known_covariance=np.eye(d + 1), timer=timer, sgd_key=si * trials + t,
            )
            errors.append(float(np.linalg.norm(res.estimate.mean - truth.mean)))
            collided.append(n_coll > 0)
            counts.append(n_coll)
        e = np.array(errors)
        coll = np.array(collided, dtype=float)
        p_b = birthday_probability(m, cells)
        row = {
            "m": m,
            "mean_error": float(e.mean()),
            "error_stderr": float(e.std(ddof=1) / math.sqrt(trials)) if trials > 1 else float("inf"),
            "collision_fraction": float(coll.mean()),
            "birthday_probability": p_b,
            "birthday_stderr": math.sqrt(p_b * (1 - p_b) / trials),
            "mean_collision_count": float(np.mean(counts)),
        }
        per_size.append(row)
        rows.append(tuple(row.values()))
    report = {"d": d, "trials": trials, "k": k, "alpha": alpha, "cells": cells, "sizes": per_size, "config": cfg}
    if out is not None:
        with timer.stage("output"):
            outdir = Path(out)
            outdir.mkdir(parents=True, exist_ok=True)
            io.write_rows(outdir / "summary.csv", list(per_size[0].keys()), rows)
    report["timings"] = timer.report()
    if out is not None:
        io.write_json(Path(out) / "report.json", report)
    return report


# ---------------------------------------------------------------------------
# moment check

MOMENT_DEFAULTS = {"k": 6, "n": 100000, "threshold": 1e-3, "n_tv": 100000}


def _truncated_from_json(obj: dict) -> TruncatedGaussian:
    params = GaussianParams(np.asarray(obj["mean"], dtype=float), np.asarray(obj["covariance"], dtype=float))
    return TruncatedGaussian(params, set_from_json(obj["set"]), obj.get("alpha"))


def cmd_moment_check(config: dict, out: Optional[str | Path] = None) -> dict:
    """Compare two truncated Gaussians through their empirical raw moments.

    Verdict: ``inconclusive`` when ``k = 0``; ``different`` when some moment
    gap exceeds three combined standard errors and the largest gap reaches
    ``threshold``; ``same`` otherwise.
    """
    timer = Timer()
    cfg = _merge(MOMENT_DEFAULTS, config)
    seed = _check_seed(cfg.get("seed"))
    k, n = int(cfg["k"]), int(cfg["n"])
    if k < 0 or n < 2:
        raise ValidationError("need k >= 0 and n >= 2")
    with _tagged("config"):
        first, second = _truncated_from_json(cfg["first"]), _truncated_from_json(cfg["second"])
    with timer.stage("sampling"), _tagged("sampling"):
        xa, _ = truncated_sample(first, substream(seed, STAGE_DIAGNOSTICS, 0), n)
        xb, _ = truncated_sample(second, substream(seed, STAGE_DIAGNOSTICS, 1), n)
    with timer.stage("moments"):
        ma, mb = empirical_moments(xa, k), empirical_moments(xb, k)
        dist = moment_distance(ma, mb)
        gaps = np.abs(ma.values - mb.values)
        se = np.sqrt(ma.stderr**2 + mb.stderr**2)
        se[0] = 0.0
        z = np.where(se > 0, gaps / np.where(se > 0, se, 1.0), 0.0)
        max_z = float(z.max())
        # the moment that sets the distance, in its own standard errors
        dist_z = float(z[int(np.argmax(gaps))])
    with timer.stage("tv"), _tagged("tv"):
        tv = tv_monte_carlo(first, second, substream(seed, STAGE_DIAGNOSTICS, 2), int(cfg["n_tv"]))
    if k == 0:
        verdict = "inconclusive"
    elif max_z > 3.0 and dist >= float(cfg["threshold"]):
        verdict = "different"
    else:
        verdict = "same"
    report = {
        "k": k,
        "moment_distance": dist,
        "max_gap_in_stderr": max_z,
        "distance_in_stderr": dist_z,
        "tv": {"value": tv.value, "stderr": tv.stderr},
        "threshold": float(cfg["threshold"]),
        "verdict": verdict,
        "config": cfg,
    }
    if out is not None:
        with timer.stage("output"):
            outdir = Path(out)
            outdir.mkdir(parents=True, exist_ok=True)
            io.write_rows(outdir / "summary.csv", ["moment_distance", "max_gap_in_stderr", "tv", "verdict"],
                          [(dist, max_z, tv.value, verdict)])
    report["timings"] = timer.report()
    if out is not None:
        io.write_json(Path(out) / "report.json", report)
    return report


# ---------------------------------------------------------------------------
# set recovery


def cmd_recover_set(config: ExperimentConfig | dict, out: Optional[str | Path] = None, grid: int = 101) -> dict:
    """Run the estimation pipeline and export the recovered set.

    ``points.csv`` holds labeled points: a ``grid x grid`` lattice over
    three estimated standard deviations around the estimated mean when
    d <= 2, otherwise ``grid**2`` draws from the estimated Gaussian.
    """
    if isinstance(config, dict):
        config = dict(config)
        grid = int(config.pop("grid", grid))
    if grid < 2:
        raise ValidationError("grid must be >= 2")
    report = cmd_estimate(config, out=out)
    t0 = time.perf_counter()
    rs = RecoveredSet.from_json(report.recovered_set)
    cfg = ExperimentConfig.from_dict(report.config)
    est = report.estimate
    d = est.dim
    if d <= 2:
        sd = np.sqrt(np.diag(est.covariance))
        axes = [np.linspace(m - 3 * s, m + 3 * s, grid) for m, s in zip(est.mean, sd)]
        pts = np.stack([a.ravel() for a in np.meshgrid(*axes, indexing="ij")], axis=1)
    else:
        pts = sample(est, substream(cfg.seed, STAGE_RECOVERY, 1), grid * grid)
    inside = rs.contains(pts)
    truth = cfg.truncation_set.contains(pts)
    result = {
        "recovered_set": report.recovered_set,
        "symdiff": report.symdiff,
        "mu_hat": report.mu_hat,
        "sigma_hat": report.sigma_hat,
        "grid_agreement": float(np.mean(inside == truth)),
        "config": report.config,
    }
    if out is not None:
        outdir = Path(out)
        header = [f"x{i}" for i in range(d)] + ["recovered", "truth"]
        io.write_rows(outdir / "points.csv", header,
                      [(*p, int(a), int(b)) for p, a, b in zip(pts, inside, truth)])
    timings = dict(report.timings)
    timings["export"] = time.perf_counter() - t0
    timings["total"] += timings["export"]
    result["timings"] = timings
    if out is not None:
        io.write_json(Path(out) / "report.json", result)
    return result


# ---------------------------------------------------------------------------
# tournament

TOURNAMENT_DEFAULTS = {"eps": 0.1, "delta": 0.05, "n_tv": 20000, "compute_tv": True}


def default_tournament_config() -> dict:
    """X = N(0, 1) on [-1, 2] against 20 hypotheses on the same interval.

    Hypothesis 0 has mean 0.02 (close to X); the rest vary the mean over
    +-0.3, +-0.6, +-0.9 and the variance over 0.6, 1, 1.6, plus one narrow
    hypothesis centered at 0.
    """
    interval = {"kind": "AxisBox", "lo": [-1.0], "hi": [2.0]}

    def h(mean, var):
        return {"mean": [mean], "covariance": [[var]], "set": interval}

    hyps = [h(0.02, 1.0)]
    hyps += [h(m, v) for m in (-0.9, -0.6, -0.3, 0.3, 0.6, 0.9) for v in (0.6, 1.0, 1.6)]
    hyps.append(h(0.0, 0.3))
    return {"target": h(0.0, 1.0), "hypotheses": hyps}


def cmd_tournament(config: dict, out: Optional[str | Path] = None) -> dict:
    """Scheffe tournament between hypotheses, with X given by ``target``.

    Each hypothesis is ``{mean, covariance, set, alpha?}``; a missing
    ``alpha`` is filled in with the set's exact mass.
    """
    timer = Timer()
    cfg = _merge(TOURNAMENT_DEFAULTS, config)
    seed = _check_seed(cfg.get("seed"))
    with _tagged("config"):
        target = _truncated_from_json(cfg["target"])
        hyps = []
        for h in cfg["hypotheses"]:
            tg = _truncated_from_json(h)
            a = tg.alpha_hat if tg.alpha_hat is not None else tg.set.exact_mass(tg.params)
            if a is None:
                raise ValidationError("hypothesis mass unavailable; give alpha")
            hyps.append(Hypothesis(tg.params, tg.set, float(a)))
        if not hyps:
            raise ValidationError("need at least one hypothesis")
    eps, delta = float(cfg["eps"]), float(cfg["delta"])
    m = tournament_sample_size(len(hyps), eps, delta)
    with timer.stage("sampling"), _tagged("sampling"):
        data, _ = truncated_sample(target, substream(seed, STAGE_TRIALS, 0), m)
    with timer.stage("tournament"), _tagged("tournament"):
        res = tournament(data, hyps, eps, delta, substream(seed, STAGE_TRIALS, 1))
    tvs = None
    if cfg["compute_tv"]:
        with timer.stage("tv"), _tagged("tv"):
            tvs = [tv_monte_carlo(target, h.truncated, substream(seed, STAGE_TRIALS, 2, i), int(cfg["n_tv"])).value
                   for i, h in enumerate(hyps)]
    report = res.to_json(hyps)
    report["tv_to_target"] = tvs
    report["config"] = cfg
    if out is not None:
        with timer.stage("output"):
            outdir = Path(out)
            outdir.mkdir(parents=True, exist_ok=True)
            io.write_rows(outdir / "summary.csv", ["hypothesis", "wins", "tv_to_target", "winner"],
                          [(i, int(res.wins[i].sum()), "" if tvs is None else tvs[i], int(res.winner == i))
                           for i in range(len(hyps))])
    report["timings"] = timer.report()
    if out is not None:
        io.write_json(Path(out) / "report.json", report)
    return report
