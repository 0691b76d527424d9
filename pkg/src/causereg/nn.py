"""Minimal dense feedforward network engine.

Everything here is plain float64 numpy: dense layers with optional batch
normalization, relu/sigmoid/identity activations, hand-written
backpropagation that returns both parameter gradients and the gradient
with respect to the input batch (composite models in ``nonlin`` and
``hypgen`` need the latter), the adamax optimizer, and a small training
loop with early stopping on validation accuracy.

Loss conventions (used consistently by the gradient code and the tests):

* ``cross_entropy``: mean over examples of ``-y log p - (1-y) log(1-p)``
  for a single sigmoid output ``p``.
* ``squared``: mean over examples of ``0.5 * sum((a - y)**2)`` over the
  output units.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.special import expit

from .errors import ConfigError, ConsistencyError, DomainError, ShapeError

ACTIVATIONS = ("relu", "sigmoid", "identity")
BN_EPS = 1e-8
BN_MOMENTUM = 0.9
MODEL_VERSION = "nn-v1"


@dataclass(frozen=True)
class LayerSpec:
    in_dim: int
    out_dim: int
    activation: str = "relu"
    batch_norm: bool = False

    def __post_init__(self):
        if self.in_dim < 1 or self.out_dim < 1:
            raise ConfigError(f"layer dims must be >= 1, got {self.in_dim}x{self.out_dim}")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")


@dataclass(frozen=True)
class NetSpec:
    input_dim: int
    layers: tuple[LayerSpec, ...]

    def __post_init__(self):
        if self.input_dim < 1:
            raise ConfigError("input_dim must be >= 1")
        if not self.layers:
            raise ConfigError("a network needs at least one layer")
        if self.layers[0].in_dim != self.input_dim:
            raise ConfigError("first layer in_dim must equal input_dim")
        for a, b in zip(self.layers, self.layers[1:]):
            if a.out_dim != b.in_dim:
                raise ConfigError(f"layer dims do not chain: {a.out_dim} -> {b.in_dim}")

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_dim


def mlp_spec(
    input_dim: int,
    hidden: Sequence[int],
    output_dim: int = 1,
    *,
    hidden_activation: str = "relu",
    output_activation: str = "sigmoid",
    batch_norm: bool = False,
) -> NetSpec:
    """Convenience constructor for the usual hidden-stack + head shape."""
    dims = [input_dim, *hidden]
    layers = [
        LayerSpec(dims[i], dims[i + 1], hidden_activation, batch_norm)
        for i in range(len(hidden))
    ]
    layers.append(LayerSpec(dims[-1], output_dim, output_activation, False))
    return NetSpec(input_dim, tuple(layers))


def _init_weight(rng: np.random.Generator, in_dim: int, out_dim: int) -> np.ndarray:
    # uniform +-sqrt(6/(in+out)) keeps activations at unit scale at init
    bound = np.sqrt(6.0 / (in_dim + out_dim))
    return rng.uniform(-bound, bound, size=(in_dim, out_dim))


class Network:
    """A dense feedforward network with explicit forward/backward passes."""

    def __init__(self, spec: NetSpec, rng: np.random.Generator):
        self.spec = spec
        self.layers: list[dict] = []
        for ls in spec.layers:
            layer = {
                "W": _init_weight(rng, ls.in_dim, ls.out_dim),
                "b": np.zeros(ls.out_dim),
            }
            if ls.batch_norm:
                layer["gamma"] = np.ones(ls.out_dim)
                layer["beta"] = np.zeros(ls.out_dim)
                layer["run_mean"] = np.zeros(ls.out_dim)
                layer["run_var"] = np.ones(ls.out_dim)
            self.layers.append(layer)

    # -- parameter plumbing -------------------------------------------------

    def parameters(self) -> list[np.ndarray]:
        """Trainable arrays in a fixed order (running stats excluded)."""
        out = []
        for ls, layer in zip(self.spec.layers, self.layers):
            out.extend([layer["W"], layer["b"]])
            if ls.batch_norm:
                out.extend([layer["gamma"], layer["beta"]])
        return out

    def set_parameters(self, values: Iterable[np.ndarray]) -> None:
        for current, new in zip(self.parameters(), values, strict=True):
            if current.shape != new.shape:
                raise ShapeError(f"parameter shape {new.shape} != {current.shape}")
            current[...] = new

    def copy_parameters(self) -> list[np.ndarray]:
        return [p.copy() for p in self.parameters()]

    def state_arrays(self) -> dict[str, list]:
        """Running batch-norm statistics, for serialization."""
        stats = []
        for ls, layer in zip(self.spec.layers, self.layers):
            if ls.batch_norm:
                stats.append({"mean": layer["run_mean"].tolist(), "var": layer["run_var"].tolist()})
            else:
                stats.append(None)
        return {"batch_norm": stats}

    # -- forward / backward -------------------------------------------------

    def forward(
        self,
        x: np.ndarray,
        train: bool = False,
        dropout: float = 0.0,
        rng: np.random.Generator | None = None,
    ) -> tuple[np.ndarray, list | None]:
        """Run the network on a batch.

        Returns ``(output, cache)``; the cache is only built in train mode
        and is what :meth:`backward` consumes.  In infer mode batch-norm
        layers use their stored running statistics.
        """
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.spec.input_dim:
            raise ShapeError(f"expected batch of shape (n, {self.spec.input_dim}), got {x.shape}")
        if not np.all(np.isfinite(x)):
            raise DomainError("non-finite values in input batch")
        if dropout and not 0.0 <= dropout < 1.0:
            raise ConfigError("dropout rate must lie in [0, 1)")
        if train and dropout > 0.0 and rng is None:
            raise ConfigError("dropout in train mode needs an rng")

        cache: list | None = [] if train else None
        a = x
        last = len(self.layers) - 1
        for idx, (ls, layer) in enumerate(zip(self.spec.layers, self.layers)):
            z = a @ layer["W"] + layer["b"]
            step = {"x": a, "z": z}
            if ls.batch_norm:
                if train:
                    if z.shape[0] < 2:
                        raise ShapeError("batch norm in train mode needs batch size >= 2")
                    mean = z.mean(axis=0)
                    var = z.var(axis=0)
                    inv_std = 1.0 / np.sqrt(var + BN_EPS)
                    xhat = (z - mean) * inv_std
                    layer["run_mean"][...] = BN_MOMENTUM * layer["run_mean"] + (1 - BN_MOMENTUM) * mean
                    layer["run_var"][...] = BN_MOMENTUM * layer["run_var"] + (1 - BN_MOMENTUM) * var
                    step.update(xhat=xhat, inv_std=inv_std)
                else:
                    inv_std = 1.0 / np.sqrt(layer["run_var"] + BN_EPS)
                    xhat = (z - layer["run_mean"]) * inv_std
                h = layer["gamma"] * xhat + layer["beta"]
            else:
                h = z
            if ls.activation == "relu":
                a = np.maximum(h, 0.0)
            elif ls.activation == "sigmoid":
                a = expit(h)
            else:
                a = h
            step["h"] = h
            step["a"] = a  # pre-dropout activation; activation derivatives need it
            if train and dropout > 0.0 and idx != last:
                mask = (rng.random(a.shape) >= dropout) / (1.0 - dropout)
                a = a * mask
                step["drop_mask"] = mask
            if train:
                cache.append(step)
        return a, cache

    def backward(self, cache: list, d_out: np.ndarray, from_preactivation: bool = False):
        """Backpropagate ``d_out`` through a cached train-mode forward pass.

        ``d_out`` is the gradient with respect to the network output.  With
        ``from_preactivation=True`` it is instead taken with respect to the
        last layer's pre-activation (the fused cross-entropy path).

        Returns ``(grads, d_x)`` with ``grads`` aligned to
        :meth:`parameters` and ``d_x`` the gradient w.r.t. the input batch.
        """
        if cache is None or len(cache) != len(self.layers):
            raise ConsistencyError("cache does not match this network (was forward run with train=True?)")
        if cache[-1]["a"].shape != np.shape(d_out):
            raise ConsistencyError(f"d_out shape {np.shape(d_out)} != cached output {cache[-1]['a'].shape}")

        grads: list[np.ndarray | None] = [None] * len(self.parameters())
        # parameter slot offsets per layer
        offsets = []
        pos = 0
        for ls in self.spec.layers:
            offsets.append(pos)
            pos += 4 if ls.batch_norm else 2

        d_a = np.asarray(d_out, dtype=float)
        for idx in range(len(self.layers) - 1, -1, -1):
            ls, layer, step = self.spec.layers[idx], self.layers[idx], cache[idx]
            if "x" not in step:
                raise ConsistencyError("cache entry missing forward intermediates")
            if "drop_mask" in step:
                d_a = d_a * step["drop_mask"]
            if from_preactivation and idx == len(self.layers) - 1:
                d_h = d_a
            elif ls.activation == "relu":
                d_h = d_a * (step["h"] > 0.0)
            elif ls.activation == "sigmoid":
                d_h = d_a * step["a"] * (1.0 - step["a"])
            else:
                d_h = d_a
            if ls.batch_norm:
                xhat, inv_std = step["xhat"], step["inv_std"]
                n = xhat.shape[0]
                d_gamma = np.sum(d_h * xhat, axis=0)
                d_beta = np.sum(d_h, axis=0)
                d_xhat = d_h * layer["gamma"]
                d_z = (inv_std / n) * (
                    n * d_xhat - d_xhat.sum(axis=0) - xhat * np.sum(d_xhat * xhat, axis=0)
                )
                grads[offsets[idx] + 2] = d_gamma
                grads[offsets[idx] + 3] = d_beta
            else:
                d_z = d_h
            grads[offsets[idx]] = step["x"].T @ d_z
            grads[offsets[idx] + 1] = d_z.sum(axis=0)
            d_a = d_z @ layer["W"].T
        return grads, d_a

    def predict(self, x: np.ndarray) -> np.ndarray:
        out, _ = self.forward(x, train=False)
        return out


# -- adamax -------------------------------------------------------------


@dataclass
class AdamaxState:
    """Optimizer state; one slot per parameter array, in parameter order."""

    first_moment: list[np.ndarray]
    inf_norm: list[np.ndarray]
    step_count: int = 0
    learning_rate: float = 0.002
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def for_params(cls, params: Sequence[np.ndarray], **hyper) -> "AdamaxState":
        state = cls(
            first_moment=[np.zeros_like(p) for p in params],
            inf_norm=[np.zeros_like(p) for p in params],
            **hyper,
        )
        if not (0.0 <= state.beta1 < 1.0 and 0.0 <= state.beta2 < 1.0):
            raise ConfigError("beta1 and beta2 must lie in [0, 1)")
        return state


def adamax_step(
    params: Sequence[np.ndarray],
    grads: Sequence[np.ndarray],
    state: AdamaxState,
) -> tuple[Sequence[np.ndarray], AdamaxState]:
    """One adamax update, in place on ``params`` and ``state``.

    m <- b1 m + (1-b1) g;  u <- max(b2 u, |g|);
    theta <- theta - lr/(1-b1^t) * m / (u + eps)
    """
    if len(params) != len(grads) or len(params) != len(state.first_moment):
        raise ShapeError("params/grads/state length mismatch")
    state.step_count += 1
    scale = state.learning_rate / (1.0 - state.beta1**state.step_count)
    for p, g, m, u in zip(params, grads, state.first_moment, state.inf_norm):
        if p.shape != g.shape:
            raise ShapeError(f"grad shape {g.shape} != param shape {p.shape}")
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        np.maximum(state.beta2 * u, np.abs(g), out=u)
        p -= scale * m / (u + state.epsilon)
    return params, state


# -- losses ---------------------------------------------------------------


def cross_entropy_loss(p: np.ndarray, y: np.ndarray) -> float:
    p = np.clip(np.asarray(p, dtype=float).ravel(), 1e-12, 1.0 - 1e-12)
    y = np.asarray(y, dtype=float).ravel()
    return float(np.mean(-y * np.log(p) - (1.0 - y) * np.log1p(-p)))


def squared_loss(a: np.ndarray, y: np.ndarray) -> float:
    a = np.asarray(a, dtype=float)
    y = np.asarray(y, dtype=float).reshape(a.shape)
    return float(np.mean(0.5 * np.sum((a - y) ** 2, axis=1)))


# -- training loop --------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    max_epochs: int = 100
    batch_size: int = 128
    patience: int = 10
    seed: int = 0
    learning_rate: float = 0.002
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    dropout: float = 0.0
    lr_decay: float = 1.0  # multiply the step size on validation plateaus
    lr_decay_patience: int = 10

    def __post_init__(self):
        if self.max_epochs < 1 or self.batch_size < 1 or self.patience < 1:
            raise ConfigError("max_epochs, batch_size and patience must be >= 1")
        if self.patience > self.max_epochs:
            raise ConfigError("patience must not exceed max_epochs")
        if not 0.0 < self.lr_decay <= 1.0 or self.lr_decay_patience < 1:
            raise ConfigError("lr_decay must lie in (0, 1] with lr_decay_patience >= 1")


@dataclass
class EpochStats:
    train_loss: float
    val_accuracy: float


@dataclass
class TrainResult:
    net: Network
    history: list[EpochStats]
    best_epoch: int
    stopped_early: bool


def _validation_score(net: Network, x: np.ndarray, y: np.ndarray, loss: str) -> float:
    out = net.predict(x)
    if loss == "cross_entropy":
        pred = (out.ravel() > 0.5).astype(float)
        return float(np.mean(pred == y.ravel()))
    return -float(squared_loss(out, y))


def train(
    net: Network,
    train_set: tuple[np.ndarray, np.ndarray],
    valid_set: tuple[np.ndarray, np.ndarray],
    loss: str = "cross_entropy",
    config: TrainConfig = TrainConfig(),
) -> TrainResult:
    """Minibatch adamax training with early stopping.

    The parameters left on ``net`` afterwards are those of the best
    validation epoch, not the last one.  Deterministic given
    ``config.seed`` (one rng drives shuffling and dropout).  Validation
    accuracy for cross-entropy thresholds the sigmoid output at 0.5; for
    squared loss the score slot holds negative validation MSE.
    """
    x_tr, y_tr = (np.asarray(a, dtype=float) for a in train_set)
    x_va, y_va = (np.asarray(a, dtype=float) for a in valid_set)
    if loss not in ("cross_entropy", "squared"):
        raise ConfigError(f"unknown loss {loss!r}")
    if x_tr.shape[0] == 0 or x_va.shape[0] == 0:
        raise ConfigError("train and validation sets must be non-empty")
    if loss == "cross_entropy" and not np.all(np.isin(y_tr, (0.0, 1.0))):
        raise DomainError("cross-entropy labels must be in {0, 1}")

    rng = np.random.default_rng(config.seed)
    state = AdamaxState.for_params(
        net.parameters(),
        learning_rate=config.learning_rate,
        beta1=config.beta1,
        beta2=config.beta2,
        epsilon=config.epsilon,
    )
    has_bn = any(ls.batch_norm for ls in net.spec.layers)

    history: list[EpochStats] = []
    best_score = -np.inf
    best_epoch = 0
    best_params: list[np.ndarray] | None = None
    stale = 0
    stopped_early = False

    n = x_tr.shape[0]
    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(n)
        losses = []
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            if has_bn and idx.size < 2:
                continue  # batch-norm cannot normalize a single row
            xb, yb = x_tr[idx], y_tr[idx]
            out, cache = net.forward(xb, train=True, dropout=config.dropout, rng=rng)
            yb2 = yb.reshape(out.shape)
            if loss == "cross_entropy":
                losses.append(cross_entropy_loss(out, yb2))
                d = (out - yb2) / out.shape[0]
                grads, _ = net.backward(cache, d, from_preactivation=True)
            else:
                losses.append(squared_loss(out, yb2))
                grads, _ = net.backward(cache, (out - yb2) / out.shape[0])
            adamax_step(net.parameters(), grads, state)
        score = _validation_score(net, x_va, y_va, loss)
        history.append(EpochStats(train_loss=float(np.mean(losses)), val_accuracy=score))
        if score > best_score:
            best_score = score
            best_epoch = epoch
            best_params = net.copy_parameters()
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                stopped_early = True
                break
            if config.lr_decay < 1.0 and stale % config.lr_decay_patience == 0:
                state.learning_rate *= config.lr_decay
    if best_params is not None:
        net.set_parameters(best_params)
    return TrainResult(net=net, history=history, best_epoch=best_epoch, stopped_early=stopped_early)


# -- serialization ---------------------------------------------------------


def model_to_dict(net: Network) -> dict:
    return {
        "version": MODEL_VERSION,
        "spec": {
            "input_dim": net.spec.input_dim,
            "layers": [
                {
                    "in_dim": ls.in_dim,
                    "out_dim": ls.out_dim,
                    "activation": ls.activation,
                    "batch_norm": ls.batch_norm,
                }
                for ls in net.spec.layers
            ],
        },
        "parameters": [p.tolist() for p in net.parameters()],
        "state": net.state_arrays(),
    }


def model_from_dict(payload: dict) -> Network:
    if payload.get("version") != MODEL_VERSION:
        raise ConfigError(f"unsupported model version {payload.get('version')!r}")
    spec = NetSpec(
        input_dim=payload["spec"]["input_dim"],
        layers=tuple(LayerSpec(**ls) for ls in payload["spec"]["layers"]),
    )
    net = Network(spec, np.random.default_rng(0))
    net.set_parameters([np.asarray(p, dtype=float) for p in payload["parameters"]])
    bn_stats = payload["state"]["batch_norm"]
    for layer, ls, stats in zip(net.layers, spec.layers, bn_stats):
        if ls.batch_norm:
            layer["run_mean"][...] = np.asarray(stats["mean"], dtype=float)
            layer["run_var"][...] = np.asarray(stats["var"], dtype=float)
    return net


def save_model(net: Network, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(net), fh)


def load_model(path) -> Network:
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
