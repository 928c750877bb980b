"""Variability statistics: summaries, pooled same-net variance, tester deflation,
n-way ANOVA with MSE-ratios and classical partial F, sigma extrapolation, and
the sample-size resampling experiment.

The ANOVA fits one least-squares linear model per outcome (continuous terms
plus one-hot categoricals with the reference level dropped) and reports, for
each predictor, both the factor by which the residual MSE grows when the
predictor is removed and the classical partial F with its upper-tail p-value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import qr
from scipy.special import betainc, erf

__all__ = [
    "StatSummary",
    "PredictorSpec",
    "PredictorStats",
    "AnovaResult",
    "SnvResult",
    "DeflationResult",
    "SampleSizeRow",
    "summarize",
    "pooled_snv",
    "deflate_tester",
    "anova",
    "f_upper_tail",
    "five_sigma_interval",
    "k_sigma_interval",
    "gaussian_compliance",
    "sample_size_experiment",
]

_ZERO_SSE_REL = 1e-12


@dataclass(frozen=True)
class StatSummary:
    """Global summary of one outcome: moments plus min/max.

    ``std`` uses the n-1 denominator; skewness and kurtosis use population
    moments (n denominator), with kurtosis non-excess (3.0 for a Gaussian).
    Both are ``None`` for constant data, where the shape is undefined.
    """

    n: int
    mean: float
    std: float
    min: float
    max: float
    skewness: float | None
    kurtosis: float | None


@dataclass(frozen=True)
class PredictorSpec:
    """One independent variable: continuous values or categorical labels."""

    name: str
    kind: str
    values: np.ndarray

    def __post_init__(self):
        if self.kind not in ("continuous", "categorical"):
            raise ValueError(f"kind must be 'continuous' or 'categorical', got {self.kind!r}")
        if self.kind == "continuous":
            vals = np.asarray(self.values, dtype=float)
            if not np.isfinite(vals).all():
                raise ValueError(f"predictor {self.name!r} has non-finite values")
        else:
            vals = np.asarray([str(v) for v in self.values], dtype=object)
            if np.unique(vals.astype(str)).size < 2:
                raise ValueError(f"categorical predictor {self.name!r} has fewer than 2 levels")
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True)
class PredictorStats:
    mse_ratio: float
    f_stat: float
    df_num: int
    p_value: float


@dataclass(frozen=True)
class AnovaResult:
    coefficients: dict[str, float]
    residual_mse: float
    residual_df: int
    predictors: dict[str, PredictorStats]


@dataclass(frozen=True)
class SnvResult:
    """Pooled same-net sigma plus the group bookkeeping."""

    sigma: float
    groups_used: int
    groups_dropped: int
    pooled_df: int


@dataclass(frozen=True)
class DeflationResult:
    sigma_true: float
    tester_dominated: bool


@dataclass(frozen=True)
class SampleSizeRow:
    """Relative sigma-estimate error envelope at one sample size."""

    n: int
    trials: int
    min_rel_err: float
    max_rel_err: float
    max_abs_rel_err: float
    quantiles: dict[str, float] = field(default_factory=dict)


def summarize(values) -> StatSummary:
    """Moment summary of a sample (n >= 2)."""
    x = np.asarray(values, dtype=float)
    if x.ndim != 1:
        x = x.ravel()
    if x.size < 2:
        raise ValueError("need at least 2 values to summarize")
    mean = float(np.mean(x))
    d = x - mean
    m2 = float(np.mean(d**2))
    std = float(np.std(x, ddof=1))
    if m2 == 0.0:
        skew = kurt = None
    else:
        skew = float(np.mean(d**3) / m2**1.5)
        kurt = float(np.mean(d**4) / m2**2)
    return StatSummary(
        n=x.size, mean=mean, std=std, min=float(np.min(x)), max=float(np.max(x)),
        skewness=skew, kurtosis=kurt,
    )


def pooled_snv(groups) -> SnvResult:
    """Pooled same-net sigma: sqrt( sum (n_i - 1) s_i^2 / sum (n_i - 1) ).

    Each group is the list of one net's values across boards; groups with
    fewer than 2 observations carry no variance information and are dropped
    (counted in the result).
    """
    if hasattr(groups, "values") and callable(groups.values):
        groups = groups.values()
    num = 0.0
    df = 0
    used = dropped = 0
    for g in groups:
        x = np.asarray(g, dtype=float)
        if x.size < 2:
            dropped += 1
            continue
        num += (x.size - 1) * float(np.var(x, ddof=1))
        df += x.size - 1
        used += 1
    if used == 0:
        raise ValueError("no group with n >= 2; pooled variance undefined")
    return SnvResult(sigma=math.sqrt(num / df), groups_used=used, groups_dropped=dropped, pooled_df=df)


def deflate_tester(sigma_meas: float, sigma_tester: float) -> DeflationResult:
    """Remove tester repeatability by subtracting variances.

    Returns sqrt(max(0, sigma_meas^2 - sigma_tester^2)); the tester-dominated
    flag is set when the tester sigma is at least the measured sigma, in
    which case the true sigma is indistinguishable from zero.
    """
    if sigma_meas < 0 or sigma_tester < 0:
        raise ValueError("sigmas must be non-negative")
    dominated = sigma_tester >= sigma_meas
    value = math.sqrt(max(0.0, sigma_meas**2 - sigma_tester**2))
    return DeflationResult(sigma_true=value, tester_dominated=dominated)


def f_upper_tail(f: float, df1: int, df2: int) -> float:
    """P(F >= f) for the F(df1, df2) distribution, via the regularized
    incomplete beta function."""
    if not np.isfinite(f):
        return 0.0
    if f <= 0:
        return 1.0
    return float(betainc(df2 / 2.0, df1 / 2.0, df2 / (df2 + df1 * f)))


def _design_columns(predictors: list[PredictorSpec], n: int):
    """Design matrix columns (intercept first) and per-term column indices."""
    cols: list[np.ndarray] = [np.ones(n)]
    names: list[str] = ["intercept"]
    owner: dict[str, list[int]] = {}
    for spec in predictors:
        if len(spec.values) != n:
            raise ValueError(f"predictor {spec.name!r} has {len(spec.values)} values, expected {n}")
        idx: list[int] = []
        if spec.kind == "continuous":
            idx.append(len(cols))
            cols.append(np.asarray(spec.values, dtype=float))
            names.append(spec.name)
        else:
            levels = sorted({str(v) for v in spec.values})
            vals = np.asarray([str(v) for v in spec.values])
            for level in levels[1:]:
                idx.append(len(cols))
                cols.append((vals == level).astype(float))
                names.append(f"{spec.name}={level}")
        owner[spec.name] = idx
    return np.column_stack(cols), names, owner


def _sse(x: np.ndarray, y: np.ndarray):
    beta, _, _, _ = np.linalg.lstsq(x, y, rcond=None)
    r = y - x @ beta
    return float(r @ r), beta


def anova(outcome, predictors: list[PredictorSpec]) -> AnovaResult:
    """Full-model least squares fit plus per-predictor removal statistics.

    For every predictor the model is refit without that predictor's columns;
    ``mse_ratio`` is MSE_reduced / MSE_full (the relative-importance ratio)
    and ``f_stat`` the classical partial F, whose upper tail gives the
    p-value. A noise-free fit reports +inf / p=0 for load-bearing terms and
    exactly 1 / p=1 for irrelevant ones.
    """
    y = np.asarray(outcome, dtype=float)
    n = y.size
    if not predictors:
        raise ValueError("at least one predictor is required")
    x, names, owner = _design_columns(list(predictors), n)
    p = x.shape[1]
    if n <= p:
        raise ValueError(f"{n} observations cannot support {p} model parameters")

    # Column-pivoted QR exposes the first aliased column by name.
    _, r, piv = qr(x, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = diag[0] * max(n, p) * np.finfo(float).eps
    rank = int(np.sum(diag > tol))
    if rank < p:
        raise ValueError(f"design matrix rank deficient: term {names[piv[rank]]!r} is aliased")

    sse_full, beta = _sse(x, y)
    df_full = n - p
    mse_full = sse_full / df_full
    sst = float(np.sum((y - y.mean()) ** 2))
    zero_tol = _ZERO_SSE_REL * max(sst, 1.0)
    full_is_exact = sse_full <= zero_tol

    stats: dict[str, PredictorStats] = {}
    for spec in predictors:
        drop = owner[spec.name]
        keep = [j for j in range(p) if j not in drop]
        sse_red, _ = _sse(x[:, keep], y)
        df_num = len(drop)
        df_red = n - len(keep)
        if full_is_exact:
            if sse_red <= zero_tol:
                stats[spec.name] = PredictorStats(1.0, 0.0, df_num, 1.0)
            else:
                stats[spec.name] = PredictorStats(math.inf, math.inf, df_num, 0.0)
            continue
        mse_ratio = (sse_red / df_red) / mse_full
        f = ((sse_red - sse_full) / df_num) / mse_full
        f = max(f, 0.0)
        stats[spec.name] = PredictorStats(mse_ratio, f, df_num, f_upper_tail(f, df_num, df_full))

    coeffs = {name: float(b) for name, b in zip(names, beta)}
    return AnovaResult(
        coefficients=coeffs,
        residual_mse=mse_full,
        residual_df=df_full,
        predictors=stats,
    )


def five_sigma_interval(mu: float, sigma: float) -> tuple[float, float]:
    """(mu - 5 sigma, mu + 5 sigma); degenerate when sigma is 0."""
    return k_sigma_interval(mu, sigma, 5.0)


def k_sigma_interval(mu: float, sigma: float, k: float) -> tuple[float, float]:
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    return (mu - k * sigma, mu + k * sigma)


def gaussian_compliance(k: float, sides: int = 1) -> float:
    """Fraction of a Gaussian population compliant at the k-sigma limit.

    ``sides=1`` (default) counts only the upper-tail failures, which is the
    convention behind "4-sigma compliance permits ~1 failure per 31,000";
    ``sides=2`` excludes both tails.
    """
    one_sided = 0.5 * (1.0 + erf(k / math.sqrt(2.0)))
    if sides == 1:
        return float(one_sided)
    if sides == 2:
        return float(erf(k / math.sqrt(2.0)))
    raise ValueError("sides must be 1 or 2")


def sample_size_experiment(
    pool,
    sizes,
    trials: int = 500,
    seed: int = 0,
    quantile_points=(0.05, 0.25, 0.5, 0.75, 0.95),
) -> list[SampleSizeRow]:
    """Spread of sigma estimates versus sample size, resampled from a finite pool.

    For each n, ``trials`` subsets of exactly n values are drawn without
    replacement and the relative error of the subset sigma against the full
    pool sigma is recorded. Draws use counter-based Philox streams keyed by
    (seed, size index, trial), so results are bit-reproducible and
    independent of any parallel execution order.
    """
    x = np.asarray(pool, dtype=float)
    sigma_pool = float(np.std(x, ddof=1))
    if sigma_pool == 0:
        raise ValueError("pool sigma is zero; relative error undefined")
    rows = []
    for si, n in enumerate(sizes):
        n = int(n)
        if n < 2:
            raise ValueError(f"sample size {n} is too small for a sigma estimate")
        if n > x.size:
            raise ValueError(f"sample size {n} exceeds pool size {x.size}")
        if trials < 1:
            raise ValueError("need at least 1 trial")
        rel = np.empty(trials)
        for t in range(trials):
            rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy=seed, spawn_key=(si, t))))
            sub = x[rng.choice(x.size, size=n, replace=False)]
            rel[t] = np.std(sub, ddof=1) / sigma_pool - 1.0
        rows.append(
            SampleSizeRow(
                n=n,
                trials=trials,
                min_rel_err=float(rel.min()),
                max_rel_err=float(rel.max()),
                max_abs_rel_err=float(np.abs(rel).max()),
                quantiles={f"q{int(q * 100):02d}": float(np.quantile(rel, q)) for q in quantile_points},
            )
        )
    return rows
