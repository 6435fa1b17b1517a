"""Stochastic feature gates and the two trainable selection losses.

A gate is z_r = clamp(0.5 + mu_r + eps_r, 0, 1) with Gaussian noise eps;
P(Z_r >= 0) = Phi((mu_r + 0.5) / sigma) is the smooth open-gate probability
that feeds the loss denominators. Both losses are implemented exactly as
stated, leading minus included; ``sign_flip`` negates them for callers who
want minimization to reward smooth (low-score) features instead.

Gradients are analytic in mu for a fixed noise draw and, for the graph
loss, a fixed kernel bandwidth; the clamp contributes subgradient zero at
its boundaries. Finite differences of the same frozen-everything loss are
the ground truth the tests compare against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist, squareform
from scipy.special import ndtr

from .data import Dataset
from .margins import MarginModel, interaction_weights
from .scores import _mls_numerators

VAR_GUARD = 1e-12  # below this a gated feature counts as switched off
LOSS_VARIANTS = ("dufs", "dufs-mls")
_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass
class GateState:
    mu: np.ndarray
    sigma: float = 0.5
    delta: float = 1e-4
    m_gates: int | None = None  # defaults to the gate count
    sign_flip: bool = False

    def __post_init__(self):
        mu = np.array(self.mu, dtype=float)
        if mu.ndim != 1 or mu.size == 0:
            raise ValueError("mu must be a non-empty 1-d vector")
        if not np.all(np.isfinite(mu)):
            raise ValueError("mu must be finite")
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.delta <= 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        self.mu = mu
        if self.m_gates is None:
            self.m_gates = mu.size
        elif self.m_gates < 1:
            raise ValueError("m_gates must be >= 1")

    @classmethod
    def fresh(cls, n_features: int, **kwargs) -> "GateState":
        return cls(mu=np.zeros(n_features), **kwargs)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 500
    learning_rate: float = 0.1
    optimizer: str = "adam"
    seed: int = 0
    loss_variant: str = "dufs"

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.optimizer not in ("adam", "gd"):
            raise ValueError(f"optimizer must be 'adam' or 'gd', got {self.optimizer!r}")
        if self.loss_variant not in LOSS_VARIANTS:
            raise ValueError(f"loss_variant must be one of {LOSS_VARIANTS}")


@dataclass
class TrainTrace:
    loss_history: np.ndarray
    mu: np.ndarray
    open_probabilities: np.ndarray
    no_margin_signal: bool = False


def sample_gates(state: GateState, rng: np.random.Generator) -> np.ndarray:
    """One stochastic gate draw, clamped into [0, 1]."""
    eps = rng.normal(0.0, state.sigma, state.mu.size)
    return np.clip(0.5 + state.mu + eps, 0.0, 1.0)


def open_prob(state: GateState) -> np.ndarray:
    """P(Z_r >= 0) = Phi((mu_r + 0.5) / sigma), elementwise."""
    return ndtr((state.mu + 0.5) / state.sigma)


def _denominator(state: GateState) -> float:
    return state.m_gates * float(open_prob(state).sum()) + state.delta


def _phi_over_sigma(state: GateState) -> np.ndarray:
    # d/dmu of Phi((mu + 0.5)/sigma)
    x = (state.mu + 0.5) / state.sigma
    return np.exp(-0.5 * x * x) / (_SQRT_2PI * state.sigma)


def dufs_bandwidth(gated: np.ndarray) -> float:
    """Per-epoch heat-kernel bandwidth: mean squared pairwise distance of
    the gated rows, floored at 1 so the kernel cannot collapse."""
    sq = pdist(gated, metric="sqeuclidean")
    return max(1.0, float(sq.mean()))


def _dufs_core(
    F: np.ndarray,
    z: np.ndarray,
    state: GateState,
    bandwidth: float,
    want_grad: bool,
) -> tuple[float, np.ndarray | None]:
    gated = F * z
    sq = squareform(pdist(gated, metric="sqeuclidean"))
    W = np.exp(-sq / bandwidth)
    dvec = W.sum(axis=1)
    tiny = np.flatnonzero(dvec < 1e-300)
    if tiny.size:
        raise ValueError(f"degenerate kernel row at sample {int(tiny[0])}")

    H = (W @ gated) / dvec[:, None]
    trace = float((gated * gated).sum() - (gated * H).sum())
    denom = _denominator(state)
    loss = -trace / denom
    if state.sign_flip:
        loss = -loss
    if not want_grad:
        return loss, None

    # dT/dz splits into the direct path through the gated columns and the
    # kernel path through W (and the degrees it induces)
    F2 = F * F
    G = gated @ gated.T
    R = (W * G).sum(axis=1)
    P = W * (G / dvec[:, None] - (R / (dvec * dvec))[:, None])
    kernel_path = (2.0 * z / bandwidth) * (
        (P.sum(axis=1) + P.sum(axis=0)) @ F2 - 2.0 * (F * (P @ F)).sum(axis=0)
    )
    Hf = (W @ F) / dvec[:, None]
    direct_path = 2.0 * z * (F2.sum(axis=0) - (F * Hf).sum(axis=0))
    dT_dz = direct_path + kernel_path

    open_mask = (z > 0.0) & (z < 1.0)
    grad = -(dT_dz * open_mask) / denom + trace * (
        state.m_gates * _phi_over_sigma(state)
    ) / denom**2
    if state.sign_flip:
        grad = -grad
    return loss, grad


def dufs_loss(
    ds: Dataset, z: np.ndarray, state: GateState, bandwidth: float | None = None
) -> float:
    """Gated graph loss -Tr[F~' L F~] / (m * sum P(Z>=0) + delta) with the
    random-walk Laplacian of the heat kernel over gated rows.

    The bandwidth defaults to the gated-data heuristic; pass it explicitly
    to hold it fixed while mu varies (gradient checks do).
    """
    z = np.asarray(z, dtype=float)
    if bandwidth is None:
        bandwidth = dufs_bandwidth(ds.values * z)
    loss, _ = _dufs_core(ds.values, z, state, bandwidth, want_grad=False)
    return loss


def _dufs_mls_core(
    F: np.ndarray,
    z: np.ndarray,
    state: GateState,
    model: MarginModel,
    want_grad: bool,
) -> tuple[float, np.ndarray | None]:
    W = interaction_weights(model).weights
    u = model.u
    n = F.shape[0]
    gated = F * z
    numerators = _mls_numerators(gated, W, u)
    variances = gated.var(axis=0, ddof=1)
    live = variances > VAR_GUARD
    nu = np.where(live, numerators / np.where(live, variances, 1.0), 0.0)
    total = float(nu.sum())
    denom = _denominator(state)
    loss = -total / denom
    if state.sign_flip:
        loss = -loss
    if not want_grad:
        return loss, None

    # quotient rule through the gated columns; U and W stay frozen, so the
    # only moving parts are the bilinear forms and the gated variance
    dvec = W.sum(axis=1)
    grad_g = (
        2.0 * (u * dvec)[:, None] * gated
        + 2.0 * gated * (W @ u)[:, None]
        - 2.0 * (W @ (u[:, None] * gated) + u[:, None] * (W @ gated))
    )
    dnum_dz = (F * grad_g).sum(axis=0)
    centered = gated - gated.mean(axis=0)
    dvar_dz = 2.0 / (n - 1) * (F * centered).sum(axis=0)
    dnu_dz = np.where(
        live,
        (dnum_dz * variances - numerators * dvar_dz) / np.where(live, variances, 1.0) ** 2,
        0.0,
    )
    open_mask = (z > 0.0) & (z < 1.0)
    grad = -(dnu_dz * open_mask) / denom + total * (
        state.m_gates * _phi_over_sigma(state)
    ) / denom**2
    if state.sign_flip:
        grad = -grad
    return loss, grad


def dufs_mls_loss(
    ds: Dataset, z: np.ndarray, state: GateState, model: MarginModel
) -> float:
    """Margin-weighted gate loss: per-feature scores of the gated columns
    against the frozen margin kernel, summed, normalized by the open-gate
    mass, leading minus as stated. Features whose gated variance falls
    below the guard contribute zero.
    """
    z = np.asarray(z, dtype=float)
    loss, _ = _dufs_mls_core(ds.values, z, state, model, want_grad=False)
    return loss


def loss_gradient(
    ds: Dataset,
    z: np.ndarray,
    state: GateState,
    variant: str,
    model: MarginModel | None = None,
    bandwidth: float | None = None,
) -> np.ndarray:
    """Analytic d loss / d mu for a fixed gate draw.

    For the graph variant the kernel bandwidth must be supplied (or it is
    computed once from the current gated rows); differentiation runs
    through the gating, the kernel, the Laplacian, the variance, and the
    open-probability terms. Saturated gates get subgradient zero.
    """
    z = np.asarray(z, dtype=float)
    if variant == "dufs":
        if bandwidth is None:
            bandwidth = dufs_bandwidth(ds.values * z)
        _, grad = _dufs_core(ds.values, z, state, bandwidth, want_grad=True)
    elif variant == "dufs-mls":
        if model is None:
            raise ValueError("dufs-mls gradient needs a margin model")
        _, grad = _dufs_mls_core(ds.values, z, state, model, want_grad=True)
    else:
        raise ValueError(f"variant must be one of {LOSS_VARIANTS}, got {variant!r}")
    return grad


def train(
    ds: Dataset,
    config: TrainConfig,
    state: GateState,
    model: MarginModel | None = None,
) -> TrainTrace:
    """Gradient-train the gate means for a fixed epoch budget.

    One fresh noise draw per epoch; the graph variant refreshes its kernel
    bandwidth from the gated data at the top of each epoch and holds it
    fixed for that epoch's gradient. Deterministic for a given seed.
    """
    if config.loss_variant == "dufs-mls" and model is None:
        raise ValueError("loss_variant 'dufs-mls' needs a margin model")
    rng = np.random.default_rng(config.seed)
    work = GateState(
        mu=state.mu.copy(),
        sigma=state.sigma,
        delta=state.delta,
        m_gates=state.m_gates,
        sign_flip=state.sign_flip,
    )
    F = ds.values
    history = np.empty(config.epochs)
    # adam accumulators
    m_acc = np.zeros_like(work.mu)
    v_acc = np.zeros_like(work.mu)
    beta1, beta2, eps_opt = 0.9, 0.999, 1e-8

    for epoch in range(config.epochs):
        z = sample_gates(work, rng)
        if config.loss_variant == "dufs":
            bandwidth = dufs_bandwidth(F * z)
            loss, grad = _dufs_core(F, z, work, bandwidth, want_grad=True)
        else:
            loss, grad = _dufs_mls_core(F, z, work, model, want_grad=True)
        if not math.isfinite(loss):
            raise ValueError(f"non-finite loss at epoch {epoch}")
        history[epoch] = loss
        if config.optimizer == "adam":
            m_acc = beta1 * m_acc + (1.0 - beta1) * grad
            v_acc = beta2 * v_acc + (1.0 - beta2) * grad * grad
            m_hat = m_acc / (1.0 - beta1 ** (epoch + 1))
            v_hat = v_acc / (1.0 - beta2 ** (epoch + 1))
            work.mu = work.mu - config.learning_rate * m_hat / (np.sqrt(v_hat) + eps_opt)
        else:
            work.mu = work.mu - config.learning_rate * grad

    no_signal = bool(model is not None and not model.u.any())
    return TrainTrace(
        loss_history=history,
        mu=work.mu,
        open_probabilities=open_prob(work),
        no_margin_signal=no_signal,
    )
