"""Multivariate causal hypothesis generation.

A representation network maps inputs to sigmoid coordinates h(x); a
linear head predicts the label from h.  Each head coefficient w_i is
penalized by the anti-causality score g_i of its coordinate, computed by
a frozen batch-level detector, so training steers the coordinates of h
towards causal relationships with the target:

    mean_j [ CE(w'h_j + b) ] + lam * sum_i g_i(h batch) |w_i|
    + l1_lower * sum |h-net weights|.

The detector g is a mean-embedding classifier: a pairwise featurizer
phi(h, y) averaged over a fixed-size batch of 200 pairs, followed by a
classifier head.  It is trained once on synthetic Beta scenarios (causal:
h ~ Beta, y|h ~ Bernoulli(h); anti-causal: y ~ Bernoulli(p), h|y ~ Beta
per class) and then frozen; gradients still flow through it into the
representation network.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from . import nn
from .errors import ConfigError, DomainError, NumericalError, ShapeError

SET_SIZE = 200  # pairs per detector batch; chosen so g is reliable


# -- mean-embedding anti-causal detector -------------------------------------


@dataclass
class MeanEmbedDetector:
    """Frozen g: batches of (h, y) pairs -> anti-causality score in (0, 1)."""

    phi_net: nn.Network   # (h, y) pair -> feature vector
    head: nn.Network      # mean feature -> sigmoid score
    set_size: int
    heldout_error: float = float("nan")
    reliable: bool = True

    def score_sets(self, h_sets: np.ndarray, y_sets: np.ndarray) -> np.ndarray:
        """Scores for ``(n_sets, set_len)`` arrays of h values and labels."""
        n_sets, set_len = h_sets.shape
        pairs = np.stack([h_sets.ravel(), y_sets.ravel()], axis=1)
        feats = self.phi_net.predict(pairs).reshape(n_sets, set_len, -1).mean(axis=1)
        return self.head.predict(feats).ravel()

    def score_coordinates(self, h: np.ndarray, y: np.ndarray) -> np.ndarray:
        """One g score per column of ``h`` paired with the shared labels."""
        h = np.asarray(h, dtype=float)
        y = np.asarray(y, dtype=float).ravel()
        if h.ndim != 2 or h.shape[0] != y.size:
            raise ShapeError("h must be (batch, coords) with rows matching y")
        k = h.shape[1]
        return self.score_sets(h.T, np.tile(y, (k, 1)))

    def coordinate_grads(self, h: np.ndarray, y: np.ndarray, upstream: np.ndarray):
        """Scores and d(sum_i upstream_i * g_i)/dh with frozen parameters."""
        h = np.asarray(h, dtype=float)
        y = np.asarray(y, dtype=float).ravel()
        batch, k = h.shape
        pairs = np.stack([h.T.ravel(), np.tile(y, k)], axis=1)
        feats, phi_cache = self.phi_net.forward(pairs, train=True)
        d_phi = feats.shape[1]
        means = feats.reshape(k, batch, d_phi).mean(axis=1)
        scores, head_cache = self.head.forward(means, train=True)
        _, d_means = self.head.backward(head_cache, np.asarray(upstream, dtype=float).reshape(k, 1))
        d_feats = np.repeat(d_means / batch, batch, axis=0)
        _, d_pairs = self.phi_net.backward(phi_cache, d_feats)
        return scores.ravel(), d_pairs[:, 0].reshape(k, batch).T


@dataclass(frozen=True)
class AntiCausalConfig:
    n_sets: int = 3000
    set_size: int = SET_SIZE
    d_phi: int = 16
    phi_hidden: tuple[int, ...] = (32, 32)
    head_hidden: tuple[int, ...] = (32, 32)
    sets_per_step: int = 16
    max_epochs: int = 40
    patience: int = 8
    learning_rate: float = 0.002
    seed: int = 0
    error_target: float = 0.10
    val_fraction: float = 0.2

    def __post_init__(self):
        if self.set_size < 2:
            raise ConfigError("set_size must be >= 2")
        if self.n_sets < 10:
            raise ConfigError("n_sets must be >= 10")


def sample_beta_scenario_sets(rng: np.random.Generator, n_sets: int, set_size: int):
    """Synthetic detector corpus: causal sets labeled 0, anti-causal 1."""
    h = np.empty((n_sets, set_size))
    y = np.empty((n_sets, set_size))
    labels = rng.integers(0, 2, size=n_sets).astype(float)
    for i in range(n_sets):
        if labels[i] == 0.0:  # h -> y, calibrated by construction
            a, b = rng.uniform(0.5, 5.0, size=2)
            h[i] = rng.beta(a, b, size=set_size)
            y[i] = (rng.random(set_size) < h[i]).astype(float)
        else:  # y -> h
            p = rng.uniform(0.2, 0.8)
            y[i] = (rng.random(set_size) < p).astype(float)
            a0, b0, a1, b1 = rng.uniform(0.5, 5.0, size=4)
            h0 = rng.beta(a0, b0, size=set_size)
            h1 = rng.beta(a1, b1, size=set_size)
            h[i] = np.where(y[i] == 1.0, h1, h0)
    return h, y, labels


def train_anticausal_detector_beta(config: AntiCausalConfig = AntiCausalConfig()) -> MeanEmbedDetector:
    """Train and freeze the batch-level anti-causality detector.

    If the held-out error misses ``config.error_target`` the detector is
    still returned, flagged unreliable, with a warning.
    """
    rng = np.random.default_rng(config.seed)
    h, y, labels = sample_beta_scenario_sets(rng, config.n_sets, config.set_size)
    n_val = max(2, int(round(config.val_fraction * config.n_sets)))
    h_tr, y_tr, l_tr = h[n_val:], y[n_val:], labels[n_val:]
    h_va, y_va, l_va = h[:n_val], y[:n_val], labels[:n_val]

    phi = nn.Network(
        nn.mlp_spec(2, list(config.phi_hidden), output_dim=config.d_phi, output_activation="identity"),
        rng,
    )
    head = nn.Network(nn.mlp_spec(config.d_phi, list(config.head_hidden)), rng)
    det = MeanEmbedDetector(phi_net=phi, head=head, set_size=config.set_size)
    params = [*phi.parameters(), *head.parameters()]
    n_phi = len(phi.parameters())
    state = nn.AdamaxState.for_params(params, learning_rate=config.learning_rate)

    best_err, best_params, stale = np.inf, None, 0
    n_tr = l_tr.size
    for _ in range(config.max_epochs):
        order = rng.permutation(n_tr)
        for start in range(0, n_tr, config.sets_per_step):
            idx = order[start : start + config.sets_per_step]
            hb, yb, lb = h_tr[idx], y_tr[idx], l_tr[idx]
            n_sets, set_len = hb.shape
            pairs = np.stack([hb.ravel(), yb.ravel()], axis=1)
            feats, phi_cache = phi.forward(pairs, train=True)
            means = feats.reshape(n_sets, set_len, -1).mean(axis=1)
            out, head_cache = head.forward(means, train=True)
            dz = (out - lb[:, None]) / n_sets
            head_grads, d_means = head.backward(head_cache, dz, from_preactivation=True)
            d_feats = np.repeat(d_means / set_len, set_len, axis=0)
            phi_grads, _ = phi.backward(phi_cache, d_feats)
            nn.adamax_step(params, [*phi_grads, *head_grads], state)
        val_scores = det.score_sets(h_va, y_va)
        err = float(np.mean((val_scores >= 0.5).astype(float) != l_va))
        if err < best_err:
            best_err, stale = err, 0
            best_params = [p.copy() for p in params]
        else:
            stale += 1
            if stale >= config.patience:
                break
    if best_params is not None:
        for current, best in zip(params, best_params):
            current[...] = best
    det.heldout_error = best_err
    det.reliable = best_err <= config.error_target
    if not det.reliable:
        warnings.warn(
            f"anti-causal detector error {best_err:.3f} misses target {config.error_target}"
        )
    return det


# -- hypothesis generator -----------------------------------------------------


@dataclass
class HypothesisModel:
    h_net: nn.Network     # inputs -> sigmoid coordinates
    w: np.ndarray         # (K_h,) head coefficients
    b: np.ndarray         # (1,)
    g_net: MeanEmbedDetector | None
    k_h: int
    mean_g: np.ndarray = field(default=None)  # g averaged over training data

    def parameters(self) -> list[np.ndarray]:
        return [self.w, self.b, *self.h_net.parameters()]

    def coordinates(self, x: np.ndarray) -> np.ndarray:
        return self.h_net.predict(np.asarray(x, dtype=float))

    def predict(self, x: np.ndarray) -> np.ndarray:
        h = self.coordinates(x)
        return expit(h @ self.w + self.b[0])


@dataclass(frozen=True)
class HypgenConfig:
    k_h: int = 8
    h_hidden: tuple[int, ...] = (32,)
    l1_lower: float = 0.0
    batch_size: int = SET_SIZE
    max_epochs: int = 60
    patience: int = 10
    learning_rate: float = 0.002
    seed: int = 0
    val_fraction: float = 0.15

    def __post_init__(self):
        if self.k_h < 1:
            raise ConfigError("k_h must be >= 1")
        if self.l1_lower < 0:
            raise ConfigError("l1_lower must be >= 0")


def hypgen_loss_and_grads(
    model: HypothesisModel,
    x: np.ndarray,
    y: np.ndarray,
    lam: float,
    l1_lower: float = 0.0,
):
    """Batch objective of the regularized generator and its gradients.

    The anti-causality scores are computed on this batch and treated as a
    function of h (gradients flow through the frozen detector into the
    representation network).  Gradients align with ``model.parameters()``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    n = x.shape[0]
    h, h_cache = model.h_net.forward(x, train=True)
    logit = h @ model.w + model.b[0]
    p = expit(logit)
    loss = nn.cross_entropy_loss(p, y)

    dz = (p - y) / n
    d_w = h.T @ dz
    d_b = np.array([dz.sum()])
    d_h = np.outer(dz, model.w)

    if lam != 0.0:
        if model.g_net is None:
            raise ConfigError("lam > 0 requires a frozen anti-causal detector")
        scores, d_h_pen = model.g_net.coordinate_grads(h, y, lam * np.abs(model.w))
        loss += lam * float(scores @ np.abs(model.w))
        d_w += lam * scores * np.sign(model.w)
        d_h += d_h_pen

    h_grads, _ = model.h_net.backward(h_cache, d_h)
    if l1_lower != 0.0:
        slot = 0
        for ls in model.h_net.spec.layers:
            weight = model.h_net.parameters()[slot]
            loss += l1_lower * float(np.abs(weight).sum())
            h_grads[slot] = h_grads[slot] + l1_lower * np.sign(weight)
            slot += 4 if ls.batch_norm else 2
    return loss, [d_w, d_b, *h_grads]


def eq_objective(model: HypothesisModel, x, y, lam: float, l1_lower: float = 0.0) -> float:
    """Deterministic objective value, for finite-difference checks."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    h = model.coordinates(x)
    p = expit(h @ model.w + model.b[0])
    loss = nn.cross_entropy_loss(p, y)
    if lam != 0.0:
        scores = model.g_net.score_coordinates(h, y)
        loss += lam * float(scores @ np.abs(model.w))
    if l1_lower != 0.0:
        slot = 0
        for ls in model.h_net.spec.layers:
            loss += l1_lower * float(np.abs(model.h_net.parameters()[slot]).sum())
            slot += 4 if ls.batch_norm else 2
    return loss


@dataclass
class HypgenTrainResult:
    model: HypothesisModel
    history: list[nn.EpochStats]
    best_epoch: int
    stopped_early: bool


def train_hypothesis_generator(
    x: np.ndarray,
    y: np.ndarray,
    g_net: MeanEmbedDetector | None,
    lam: float,
    config: HypgenConfig = HypgenConfig(),
) -> HypgenTrainResult:
    """Train the hypothesis generator with the batch-level causal penalty.

    Minibatches have exactly ``config.batch_size`` rows (the tail of each
    epoch is dropped so g always sees the set size it was trained on).
    With ``lam == 0`` and ``l1_lower == 0`` this is a plain MLP classifier
    and the detector machinery is skipped entirely.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if lam < 0:
        raise DomainError("lambda must be >= 0")
    if lam > 0 and g_net is None:
        raise ConfigError("lam > 0 requires a frozen anti-causal detector")
    if lam > 0 and g_net.set_size != config.batch_size:
        raise ConfigError("batch_size must equal the detector's set size")

    rng = np.random.default_rng(config.seed)
    n = x.shape[0]
    order = rng.permutation(n)
    n_val = max(1, int(round(config.val_fraction * n)))
    val_idx, tr_idx = order[:n_val], order[n_val:]
    x_tr, y_tr, x_va, y_va = x[tr_idx], y[tr_idx], x[val_idx], y[val_idx]
    if x_tr.shape[0] < config.batch_size:
        raise ConfigError("training set smaller than one batch")

    spec = nn.mlp_spec(x.shape[1], list(config.h_hidden), output_dim=config.k_h)
    h_net = nn.Network(spec, rng)
    model = HypothesisModel(
        h_net=h_net,
        w=rng.uniform(-0.1, 0.1, size=config.k_h),
        b=np.zeros(1),
        g_net=g_net,
        k_h=config.k_h,
    )
    params = model.parameters()
    state = nn.AdamaxState.for_params(params, learning_rate=config.learning_rate)

    history: list[nn.EpochStats] = []
    best_score, best_epoch, best_params, stale = -np.inf, 0, None, 0
    stopped_early = False
    n_tr = x_tr.shape[0]
    for epoch in range(1, config.max_epochs + 1):
        perm = rng.permutation(n_tr)
        losses = []
        for start in range(0, n_tr - config.batch_size + 1, config.batch_size):
            idx = perm[start : start + config.batch_size]
            loss, grads = hypgen_loss_and_grads(model, x_tr[idx], y_tr[idx], lam, config.l1_lower)
            if not np.isfinite(loss):
                raise NumericalError(f"hypothesis generator diverged at epoch {epoch}")
            losses.append(loss)
            nn.adamax_step(params, grads, state)
        score = float(np.mean((model.predict(x_va) > 0.5).astype(float) == y_va))
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

    # average anti-causality per coordinate over the training data
    if g_net is not None:
        chunks = []
        for start in range(0, n_tr - g_net.set_size + 1, g_net.set_size):
            h = model.coordinates(x_tr[start : start + g_net.set_size])
            chunks.append(g_net.score_coordinates(h, y_tr[start : start + g_net.set_size]))
        model.mean_g = np.mean(chunks, axis=0) if chunks else np.zeros(config.k_h)
    else:
        model.mean_g = np.zeros(config.k_h)
    return HypgenTrainResult(model=model, history=history, best_epoch=best_epoch, stopped_early=stopped_early)


def train_mlp_classifier(x, y, config: HypgenConfig = HypgenConfig(), g_net=None) -> HypgenTrainResult:
    """Unregularized baseline: the same loop with both penalties off."""
    cfg = HypgenConfig(
        k_h=config.k_h,
        h_hidden=config.h_hidden,
        l1_lower=0.0,
        batch_size=config.batch_size,
        max_epochs=config.max_epochs,
        patience=config.patience,
        learning_rate=config.learning_rate,
        seed=config.seed,
        val_fraction=config.val_fraction,
    )
    return train_hypothesis_generator(x, y, g_net, lam=0.0, config=cfg)


@dataclass
class Hypothesis:
    coordinate: int
    weight: float
    anti_causal_score: float
    top_inputs: list[int]


def input_relevance(h_net: nn.Network) -> np.ndarray:
    """(inputs, coordinates) relevance as the product of |weight| matrices."""
    rel = None
    slot = 0
    for ls in h_net.spec.layers:
        weight = np.abs(h_net.parameters()[slot])
        rel = weight if rel is None else rel @ weight
        slot += 4 if ls.batch_norm else 2
    return rel


def extract_hypotheses(model: HypothesisModel, top_k: int, n_inputs: int = 5) -> list[Hypothesis]:
    """Coordinates ranked by |w_i| * (1 - mean g_i), with their top inputs.

    Each hypothesis is described by the input variables with the largest
    absolute weight-path into its coordinate.
    """
    if top_k < 0:
        raise DomainError("top_k must be >= 0")
    if top_k == 0:
        return []
    if model.mean_g is None:
        raise ConfigError("model has no stored mean anti-causality scores")
    if top_k > model.k_h:
        warnings.warn(f"top_k={top_k} exceeds {model.k_h} coordinates; truncating")
        top_k = model.k_h
    strength = np.abs(model.w) * (1.0 - model.mean_g)
    order = np.argsort(-strength, kind="stable")[:top_k]
    rel = input_relevance(model.h_net)
    out = []
    for coord in order:
        inputs = np.argsort(-rel[:, coord], kind="stable")[:n_inputs]
        out.append(
            Hypothesis(
                coordinate=int(coord),
                weight=float(model.w[coord]),
                anti_causal_score=float(model.mean_g[coord]),
                top_inputs=[int(i) for i in inputs],
            )
        )
    return out
