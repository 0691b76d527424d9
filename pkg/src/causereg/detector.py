"""Neural causality detector.

Maps the empirical joint distribution of a (count variable, binary
target) pair to the probability that the variable does *not* cause the
target.  Training data comes from the synthetic scenario corpus; scoring
works variable-by-variable on real count matrices.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from . import nn
from .errors import ConfigError, DomainError, ShapeError
from .metrics import mutual_information, spearman
from .scenarios import DEFAULT_K, Scenario, ScenarioSample

MODEL_VERSION = "detector-v1"


@dataclass(frozen=True)
class EmpiricalJoint:
    """A length-2K probability vector ordered [p(1,0)..p(K,0), p(1,1)..p(K,1)]."""

    probs: np.ndarray
    k: int

    def __post_init__(self):
        if self.probs.shape != (2 * self.k,):
            raise ShapeError(f"probs must have length {2 * self.k}")
        if np.any(self.probs < 0) or abs(self.probs.sum() - 1.0) > 1e-12:
            raise DomainError("probs must be a probability vector")


def empirical_joint(draws, k: int) -> EmpiricalJoint:
    """Count (x, y) pairs into the flat 2K representation.

    ``draws`` is an (n, 2) array-like with x in 1..K and y in {0, 1}.
    """
    draws = np.asarray(draws)
    if draws.size == 0:
        raise DomainError("empty draws")
    draws = draws.reshape(-1, 2)
    x, y = draws[:, 0].astype(np.int64), draws[:, 1].astype(np.int64)
    if x.min() < 1 or x.max() > k:
        raise DomainError(f"x values must lie in [1, {k}]")
    if not np.all((y == 0) | (y == 1)):
        raise DomainError("y values must be bits")
    codes = y * k + (x - 1)
    counts = np.bincount(codes, minlength=2 * k)
    return EmpiricalJoint(probs=counts / counts.sum(), k=k)


@dataclass
class CausalWeights:
    """Per-variable non-causality probabilities c_i = P[X_i does not cause Y]."""

    c: np.ndarray
    degenerate: np.ndarray = field(default=None)  # columns with a single distinct value

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        if np.any(self.c < 0) or np.any(self.c > 1):
            raise DomainError("causal weights must lie in [0, 1]")
        if self.degenerate is None:
            self.degenerate = np.zeros(self.c.size, dtype=bool)


@dataclass
class DetectorModel:
    net: nn.Network
    k: int
    metadata: dict


@dataclass(frozen=True)
class DetectorNetConfig:
    hidden: tuple[int, ...] = (128, 128, 128, 128)
    batch_norm: bool = True
    split: tuple[float, float, float] = (0.75, 0.10, 0.15)
    augment_y_flip: bool = True

    def __post_init__(self):
        if abs(sum(self.split) - 1.0) > 1e-9 or min(self.split) <= 0:
            raise ConfigError("split fractions must be positive and sum to 1")


def _flip_y_blocks(feats: np.ndarray) -> np.ndarray:
    """Swap the y=0 and y=1 halves of joint feature vectors.

    Every scenario's Y-conditionals are Unif(0,1) Bernoulli parameters,
    symmetric under relabeling the two y values, so the flipped joint is
    an equally likely draw of the same scenario.  Used only to enlarge
    the training split.
    """
    k = feats.shape[1] // 2
    return np.concatenate([feats[:, k:], feats[:, :k]], axis=1)


def corpus_features(corpus: Iterable[ScenarioSample], k: int = DEFAULT_K):
    """Stream a corpus into (features, labels, scenario names).

    Features are the empirical joints of each sample's draws; the samples
    themselves (and their draw arrays) are not retained.
    """
    feats, labels, names = [], [], []
    for sample in corpus:
        if sample.k != k:
            raise ShapeError(f"sample K={sample.k} does not match corpus K={k}")
        feats.append(empirical_joint(sample.draws, k).probs)
        labels.append(sample.label)
        names.append(sample.scenario.value)
    if not feats:
        raise ConfigError("empty corpus")
    return np.asarray(feats), np.asarray(labels, dtype=float), names


def _scenario_stratified_split(names, split, rng):
    names = np.asarray(names)
    idx_tr, idx_va, idx_te = [], [], []
    for scen in np.unique(names):
        idx = np.flatnonzero(names == scen)
        rng.shuffle(idx)
        n = idx.size
        n_tr = max(1, int(round(split[0] * n)))
        n_va = max(1, int(round(split[1] * n)))
        n_tr = min(n_tr, n - 2) if n >= 3 else max(1, n - 2)
        idx_tr.extend(idx[:n_tr])
        idx_va.extend(idx[n_tr : n_tr + n_va])
        idx_te.extend(idx[n_tr + n_va :])
    return (np.sort(np.asarray(p, dtype=int)) for p in (idx_tr, idx_va, idx_te))


def train_detector(
    corpus,
    net_config: DetectorNetConfig = DetectorNetConfig(),
    train_config: nn.TrainConfig = nn.TrainConfig(max_epochs=200, patience=15),
    k: int = DEFAULT_K,
) -> DetectorModel:
    """Train the non-causality classifier on a scenario corpus.

    ``corpus`` is either an iterable of :class:`ScenarioSample` or a
    pre-built ``(features, labels, scenario_names)`` triple.  The split is
    stratified by scenario; held-out misclassification error lands in the
    model metadata.  Deterministic given ``train_config.seed``.
    """
    if isinstance(corpus, tuple) and len(corpus) == 3:
        feats, labels, names = corpus
    else:
        feats, labels, names = corpus_features(corpus, k)
    if np.unique(labels).size < 2:
        raise ConfigError("corpus must contain both labels")

    rng = np.random.default_rng(train_config.seed)
    idx_tr, idx_va, idx_te = _scenario_stratified_split(names, net_config.split, rng)
    spec = nn.mlp_spec(2 * k, net_config.hidden, batch_norm=net_config.batch_norm)
    net = nn.Network(spec, rng)
    x_tr, y_tr = feats[idx_tr], labels[idx_tr]
    if net_config.augment_y_flip:
        x_tr = np.vstack([x_tr, _flip_y_blocks(x_tr)])
        y_tr = np.concatenate([y_tr, y_tr])
    result = nn.train(
        net,
        (x_tr, y_tr),
        (feats[idx_va], labels[idx_va]),
        loss="cross_entropy",
        config=train_config,
    )
    test_scores = net.predict(feats[idx_te]).ravel()
    test_pred = (test_scores >= 0.5).astype(float)
    err = float(np.mean(test_pred != labels[idx_te]))
    metadata = {
        "heldout_error": err,
        "heldout_n": int(idx_te.size),
        "train_n": int(idx_tr.size),
        "best_epoch": result.best_epoch,
        "stopped_early": result.stopped_early,
        "seed": train_config.seed,
    }
    return DetectorModel(net=net, k=k, metadata=metadata)


def score_joint(model: DetectorModel, joint: EmpiricalJoint) -> float:
    """Sigmoid non-causality score for one empirical joint."""
    if joint.k != model.k:
        raise ShapeError(f"joint K={joint.k} does not match model K={model.k}")
    return float(model.net.predict(joint.probs[None, :])[0, 0])


def score_noncausality(model: DetectorModel, draws) -> float:
    """c = P[X does not cause Y] from raw (x, y) draws."""
    return score_joint(model, empirical_joint(draws, model.k))


def score_all(model: DetectorModel, x: np.ndarray, y: np.ndarray) -> CausalWeights:
    """Score every column of a count matrix against the binary target.

    Columns hold counts binned into ``[0, K-1]``; indexing is shifted to
    ``1..K`` internally.  Constant columns are still scored but flagged
    degenerate.
    """
    x = np.asarray(x)
    y = np.asarray(y).ravel()
    if x.ndim != 2 or x.shape[0] != y.size:
        raise ShapeError("x must be (n, m) with rows matching y")
    if x.min() < 0 or x.max() > model.k - 1:
        raise DomainError(f"counts must be binned into [0, {model.k - 1}]")
    feats = np.empty((x.shape[1], 2 * model.k))
    degenerate = np.zeros(x.shape[1], dtype=bool)
    pairs = np.empty((y.size, 2), dtype=np.int64)
    pairs[:, 1] = y
    for j in range(x.shape[1]):
        pairs[:, 0] = x[:, j] + 1
        feats[j] = empirical_joint(pairs, model.k).probs
        degenerate[j] = np.unique(x[:, j]).size == 1
    c = model.net.predict(feats).ravel()
    return CausalWeights(c=np.clip(c, 0.0, 1.0), degenerate=degenerate)


@dataclass
class DetectorEvaluation:
    error: float
    ci95: tuple[float, float]
    n: int
    per_scenario: dict


def evaluate_detector(model: DetectorModel, corpus) -> DetectorEvaluation:
    """Misclassification rate at threshold 0.5 (ties count as "not causal")."""
    if isinstance(corpus, tuple) and len(corpus) == 3:
        feats, labels, names = corpus
    else:
        feats, labels, names = corpus_features(corpus, model.k)
    scores = model.net.predict(feats).ravel()
    pred = (scores >= 0.5).astype(float)
    wrong = pred != labels
    err = float(wrong.mean())
    n = labels.size
    half = 1.959963984540054 * np.sqrt(max(err * (1 - err), 0.0) / n)
    per_scenario = {}
    names = np.asarray(names)
    for scen in np.unique(names):
        mask = names == scen
        per_scenario[str(scen)] = {
            "n": int(mask.sum()),
            "errors": int(wrong[mask].sum()),
            "label": int(labels[mask][0]),
        }
    return DetectorEvaluation(
        error=err, ci95=(max(0.0, err - half), min(1.0, err + half)), n=n, per_scenario=per_scenario
    )


def spearman_mi_check(weights: CausalWeights, x: np.ndarray, y: np.ndarray) -> float:
    """Spearman correlation between causality score 1-c and per-column MI."""
    x = np.asarray(x)
    if x.ndim != 2 or x.shape[1] < 3:
        raise DomainError("need a matrix with at least 3 columns")
    if weights.c.size != x.shape[1]:
        raise ShapeError("weights length must match column count")
    mi = np.array([mutual_information(x[:, j], y) for j in range(x.shape[1])])
    return spearman(1.0 - weights.c, mi)


# -- serialization -----------------------------------------------------------


def detector_to_dict(model: DetectorModel) -> dict:
    return {
        "version": MODEL_VERSION,
        "k": model.k,
        "net": nn.model_to_dict(model.net),
        "metadata": model.metadata,
    }


def detector_from_dict(payload: dict) -> DetectorModel:
    if payload.get("version") != MODEL_VERSION:
        raise ConfigError(f"unsupported detector version {payload.get('version')!r}")
    return DetectorModel(
        net=nn.model_from_dict(payload["net"]),
        k=int(payload["k"]),
        metadata=payload.get("metadata", {}),
    )


def save_detector(model: DetectorModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(detector_to_dict(model), fh)


def load_detector(path) -> DetectorModel:
    with open(path, encoding="utf-8") as fh:
        return detector_from_dict(json.load(fh))
