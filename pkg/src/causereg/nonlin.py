"""Non-linear causally regularized classifier with per-sample coefficients.

The model is  sigma(w'x + beta' (alpha(Ex) . Ex) + b)  where E embeds the
input, alpha is a small MLP, and "." is the elementwise product.  The
whole pre-sigmoid logit can be rewritten as omega(x)'x + b with

    omega_i(x) = w_i + (beta . alpha(Ex))' E_i,

so the effective regression coefficient varies per input, and the causal
penalty is applied to it per sample:

    mean_j [ cross_entropy_j + lam * sum_i c_i * omega_i(x_j)^2 ].

Training is adamax over all parameters with hand-written gradients; the
skip coefficients w start from a weighted-penalty logistic fit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from . import nn
from .detector import CausalWeights
from .errors import ConfigError, DomainError, NumericalError, ShapeError
from .glm import FitConfig, fit_causal_logistic
from .metrics import auc


@dataclass
class NonlinModel:
    w: np.ndarray          # (m,) skip coefficients
    b: np.ndarray          # (1,) intercept
    beta: np.ndarray       # (q,)
    embed: np.ndarray      # (q, m)
    alpha_net: nn.Network  # q -> q, relu hidden, identity output
    q: int

    def parameters(self) -> list[np.ndarray]:
        return [self.w, self.b, self.beta, self.embed, *self.alpha_net.parameters()]


@dataclass(frozen=True)
class NonlinConfig:
    q: int = 16
    alpha_hidden: tuple[int, ...] = (32, 32)
    dropout: float = 0.0
    max_epochs: int = 150
    batch_size: int = 128
    patience: int = 15
    learning_rate: float = 0.002
    seed: int = 0
    val_fraction: float = 0.15
    init_from_logistic: bool = True

    def __post_init__(self):
        if self.q < 1:
            raise ConfigError("q must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must lie in [0, 1)")
        if not 0.0 < self.val_fraction < 0.5:
            raise ConfigError("val_fraction must lie in (0, 0.5)")


def init_nonlin_model(
    m: int, config: NonlinConfig, rng: np.random.Generator, w0=None, b0: float = 0.0
) -> NonlinModel:
    q = config.q
    spec = nn.mlp_spec(q, list(config.alpha_hidden), output_dim=q, output_activation="identity")
    alpha_net = nn.Network(spec, rng)
    bound = np.sqrt(6.0 / (m + q))
    return NonlinModel(
        w=np.zeros(m) if w0 is None else np.asarray(w0, dtype=float).copy(),
        b=np.array([float(b0)]),
        beta=rng.uniform(-0.1, 0.1, size=q),
        embed=rng.uniform(-bound, bound, size=(q, m)),
        alpha_net=alpha_net,
        q=q,
    )


def nonlincause_forward(model: NonlinModel, x: np.ndarray):
    """Predicted probabilities and per-sample coefficients.

    Returns ``(p, omega)`` with ``p`` of shape (n,) and ``omega`` (n, m);
    by construction ``omega_j ' x_j + b`` equals the pre-sigmoid logit.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[1] != model.w.size:
        raise ShapeError(f"x must have {model.w.size} columns")
    u = x @ model.embed.T
    a = model.alpha_net.predict(u)
    logit = x @ model.w + (a * u) @ model.beta + model.b[0]
    omega = model.w[None, :] + (a * model.beta) @ model.embed
    return expit(logit), omega


def nonlincause_loss_and_grads(
    model: NonlinModel,
    x: np.ndarray,
    y: np.ndarray,
    c: np.ndarray,
    lam: float,
    dropout: float = 0.0,
    rng: np.random.Generator | None = None,
):
    """Objective value and gradients for one batch.

    The loss is mean cross-entropy plus ``lam * mean_j sum_i c_i
    omega_i(x_j)^2``; gradients align with ``model.parameters()``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    n = x.shape[0]
    u = x @ model.embed.T
    a, cache = model.alpha_net.forward(u, train=True, dropout=dropout, rng=rng)
    s = a * u
    logit = x @ model.w + s @ model.beta + model.b[0]
    p = expit(logit)
    omega = model.w[None, :] + (a * model.beta) @ model.embed

    loss = nn.cross_entropy_loss(p, y) + lam * float(np.mean((omega * omega) @ c))

    dz = (p - y) / n
    d_w = x.T @ dz
    d_b = np.array([dz.sum()])
    d_beta = s.T @ dz
    d_s = np.outer(dz, model.beta)
    d_a = d_s * u
    d_u = d_s * a
    d_embed = np.zeros_like(model.embed)
    if lam != 0.0:
        d_omega = (2.0 * lam / n) * (omega * c[None, :])
        d_w += d_omega.sum(axis=0)
        d_v = d_omega @ model.embed.T  # v = a * beta
        d_a += d_v * model.beta
        d_beta += (d_v * a).sum(axis=0)
        d_embed += (a * model.beta).T @ d_omega
    alpha_grads, d_u_alpha = model.alpha_net.backward(cache, d_a)
    d_u += d_u_alpha
    d_embed += d_u.T @ x
    return loss, [d_w, d_b, d_beta, d_embed, *alpha_grads]


def eq_objective(model: NonlinModel, x, y, c, lam: float) -> float:
    """Deterministic objective value (no dropout), for gradient checks."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    p, omega = nonlincause_forward(model, x)
    return nn.cross_entropy_loss(p, y) + lam * float(np.mean((omega * omega) @ np.asarray(c, dtype=float)))


@dataclass
class NonlinTrainResult:
    model: NonlinModel
    history: list[nn.EpochStats]
    best_epoch: int
    stopped_early: bool


def train_nonlincause(
    x: np.ndarray,
    y: np.ndarray,
    c,
    lam: float,
    config: NonlinConfig = NonlinConfig(),
) -> NonlinTrainResult:
    """Fit the per-sample-coefficient model by minibatch adamax.

    The skip coefficients are initialized from the weighted-penalty
    logistic fit at the same lambda and weights (disable with
    ``init_from_logistic=False``); the embedding is randomly initialized.
    Early stopping tracks validation accuracy.  A NaN loss aborts with
    diagnostics.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if isinstance(c, CausalWeights):
        c = c.c
    c = np.asarray(c, dtype=float).ravel()
    if c.size != x.shape[1]:
        raise ShapeError("c length must match variable count")
    if lam < 0:
        raise DomainError("lambda must be >= 0")

    rng = np.random.default_rng(config.seed)
    n = x.shape[0]
    order = rng.permutation(n)
    n_val = max(1, int(round(config.val_fraction * n)))
    val_idx, tr_idx = order[:n_val], order[n_val:]
    x_tr, y_tr, x_va, y_va = x[tr_idx], y[tr_idx], x[val_idx], y[val_idx]

    w0, b0 = None, 0.0
    if config.init_from_logistic:
        base = fit_causal_logistic(x_tr, y_tr, FitConfig(lam=lam, weights=c, norm="l1", tol=1e-8))
        w0, b0 = base.w, base.b
    model = init_nonlin_model(x.shape[1], config, rng, w0=w0, b0=b0)

    params = model.parameters()
    state = nn.AdamaxState.for_params(params, learning_rate=config.learning_rate)
    history: list[nn.EpochStats] = []
    best_score, best_epoch, best_params, stale = -np.inf, 0, None, 0
    stopped_early = False
    for epoch in range(1, config.max_epochs + 1):
        perm = rng.permutation(x_tr.shape[0])
        losses = []
        for start in range(0, perm.size, config.batch_size):
            idx = perm[start : start + config.batch_size]
            loss, grads = nonlincause_loss_and_grads(
                model, x_tr[idx], y_tr[idx], c, lam, dropout=config.dropout, rng=rng
            )
            if not np.isfinite(loss):
                raise NumericalError(
                    f"nonlinCause training diverged (epoch {epoch}, batch at {start}): loss={loss}"
                )
            losses.append(loss)
            nn.adamax_step(params, grads, state)
        p_va, _ = nonlincause_forward(model, x_va)
        score = float(np.mean((p_va > 0.5).astype(float) == y_va))
        history.append(nn.EpochStats(train_loss=float(np.mean(losses)), val_accuracy=score))
        if score > best_score:
            best_score, best_epoch, stale = score, epoch, 0
            best_params = [p.copy() for p in params]
        else:
            stale += 1
            if stale >= config.patience:
                stopped_early = True
                break
    if best_params is not None:
        for current, best in zip(params, best_params):
            current[...] = best
    return NonlinTrainResult(model=model, history=history, best_epoch=best_epoch, stopped_early=stopped_early)


def heldout_auc(model: NonlinModel, x, y) -> float:
    p, _ = nonlincause_forward(model, x)
    return auc(p, y)
