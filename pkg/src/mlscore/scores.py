"""Laplacian-style feature scores: the classic graph score and the
margin-weighted variant. Lower is better for both."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .data import DataError, Dataset
from .margins import InteractionWeights, MarginModel, interaction_weights

# methods ranked ascending (lower score = keep); gate methods rank descending
LOWER_IS_BETTER = frozenset({"ls", "mls"})

KERNEL_MODES = ("heat", "binary-knn", "printed")


@dataclass(frozen=True)
class KernelConfig:
    """Affinity settings for the classic score.

    mode "heat" is exp(-||xi - xj||^2 / t) with t defaulting to the mean
    squared pairwise distance; "binary-knn" is a symmetrized 0/1 neighbor
    graph; "printed" is the unsquared, unnegated exponential exp(+||xi -
    xj|| / t), kept only so the two conventions can be compared.
    """

    bandwidth: float | None = None
    mode: str = "heat"
    n_neighbors: int = 5

    def __post_init__(self):
        if self.mode not in KERNEL_MODES:
            raise ValueError(f"mode must be one of {KERNEL_MODES}, got {self.mode!r}")
        if self.bandwidth is not None and self.bandwidth <= 0:
            raise ValueError("bandwidth must be positive")
        if self.n_neighbors < 1:
            raise ValueError("n_neighbors must be >= 1")


@dataclass
class ScoreReport:
    method: str
    scores: np.ndarray
    params: dict
    constant_feature_flags: np.ndarray
    feature_names: list[str]
    warnings: list[str] = field(default_factory=list)
    seed: int | None = None


def _affinity(X: np.ndarray, config: KernelConfig) -> np.ndarray:
    n = X.shape[0]
    sq = squareform(pdist(X, metric="sqeuclidean"))
    if config.mode == "binary-knn":
        if config.n_neighbors > n - 1:
            raise ValueError(
                f"n_neighbors must be <= n-1 ({n - 1}), got {config.n_neighbors}"
            )
        ranked = sq.copy()
        np.fill_diagonal(ranked, -1.0)  # self sorts first even under ties
        order = np.argsort(ranked, axis=1, kind="stable")
        S = np.zeros((n, n))
        rows = np.repeat(np.arange(n), config.n_neighbors)
        S[rows, order[:, 1 : config.n_neighbors + 1].ravel()] = 1.0
        S = np.maximum(S, S.T)
        np.fill_diagonal(S, 1.0)
        return S
    t = config.bandwidth
    if t is None:
        mean_sq = float(sq[np.triu_indices(n, k=1)].mean()) if n > 1 else 0.0
        t = mean_sq if mean_sq > 0 else 1.0
    if config.mode == "printed":
        # literal convention: positive exponent over the unsquared norm;
        # overflows to inf on spread-out data, which is the point of the demo
        with np.errstate(over="ignore"):
            return np.exp(np.sqrt(sq) / t)
    return np.exp(-sq / t)


def laplacian_score(ds: Dataset, config: KernelConfig | None = None) -> ScoreReport:
    """Graph smoothness score f~' L f~ / f~' D f~ per feature.

    f~ is the feature centered by its degree-weighted mean, L = D - S the
    unnormalized graph Laplacian of the affinity S. Constant features score
    +inf and are flagged.
    """
    config = config or KernelConfig()
    X = ds.values
    constant = X.max(axis=0) == X.min(axis=0)
    if constant.all():
        raise DataError("all features are constant; nothing to score")
    S = _affinity(X, config)
    dvec = S.sum(axis=1)
    total = dvec.sum()
    F_centered = X - (dvec @ X) / total
    weighted_sq = (dvec[:, None] * F_centered * F_centered).sum(axis=0)
    smooth = (F_centered * (S @ F_centered)).sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        scores = (weighted_sq - smooth) / weighted_sq
    scores = np.where(constant, np.inf, scores)
    return ScoreReport(
        method="ls",
        scores=scores,
        params={
            "mode": config.mode,
            "bandwidth": config.bandwidth,
            "n_neighbors": config.n_neighbors,
        },
        constant_feature_flags=constant,
        feature_names=list(ds.feature_names),
    )


def mls_naive(f, weights: InteractionWeights, u) -> float:
    """Reference double sum over all ordered pairs:
    sum_ij (f_i - f_j)^2 * w_ij * u_i / Var(f).

    Kept deliberately close to the definition; the matrix form in ``mls`` is
    checked against this.
    """
    f = np.asarray(f, dtype=float)
    u = np.asarray(u, dtype=float)
    var = float(np.var(f, ddof=1))
    if var == 0.0:
        raise ValueError("variance is zero; score undefined")
    diff = f[:, None] - f[None, :]
    return float(np.sum(diff * diff * weights.weights * u[:, None]) / var)


def _mls_numerators(F: np.ndarray, W: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Vector of f'UDf + 1'UWf^2 - 2 f'WUf per column of F (U = diag(u),
    D = diag(W 1)). Equals the naive pair sum when W is symmetric."""
    dvec = W.sum(axis=1)
    F2 = F * F
    t1 = (u * dvec) @ F2
    t2 = (u @ W) @ F2
    t3 = (F * (W @ (u[:, None] * F))).sum(axis=0)
    return t1 + t2 - 2.0 * t3


def mls(ds: Dataset, model: MarginModel) -> ScoreReport:
    """Margin-weighted score for every feature of ds.

    The model must have been built on the same (standardized) dataset.
    Constant features score +inf; if no sample carries margin weight the
    scores are all zero and ranking falls back to index order.
    """
    X = ds.values
    constant = X.max(axis=0) == X.min(axis=0)
    if constant.all():
        raise DataError("all features are constant; nothing to score")
    W = interaction_weights(model).weights
    numerators = _mls_numerators(X, W, model.u)
    variances = X.var(axis=0, ddof=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        scores = numerators / variances
    scores = np.where(constant, np.inf, scores)
    report = ScoreReport(
        method="mls",
        scores=scores,
        params={
            "quantile": model.config.quantile,
            "skew_right": model.config.skew_right,
            "skew_left": model.config.skew_left,
            "k": model.config.k,
            "t": model.t,
        },
        constant_feature_flags=constant,
        feature_names=list(ds.feature_names),
    )
    if not model.u.any():
        report.warnings.append("no sample carries margin weight; scores are all zero")
    return report


def select_top(report: ScoreReport, num_features: int) -> list[int]:
    """Indices of the best ``num_features`` features, best first.

    Ascending scores for the Laplacian family, descending (largest gate
    parameter) otherwise; ties break toward the lowest feature index.
    """
    d = report.scores.shape[0]
    if not 1 <= num_features <= d:
        raise ValueError(f"num_features must be in [1, {d}], got {num_features}")
    keys = report.scores if report.method in LOWER_IS_BETTER else -report.scores
    order = np.argsort(keys, kind="stable")
    if report.constant_feature_flags.all():
        report.warnings.append("all features constant; selection is arbitrary")
    return [int(i) for i in order[:num_features]]


def ranked_rows(report: ScoreReport) -> list[tuple[str, float, int]]:
    """(feature_name, score, rank) for the full ranking, best first."""
    order = select_top(report, report.scores.shape[0])
    return [
        (report.feature_names[idx], float(report.scores[idx]), rank + 1)
        for rank, idx in enumerate(order)
    ]
