import time

import numpy as np
import pytest

from causereg import detector, hypgen, nn, scenarios

DETECTOR_K = 16


@pytest.fixture(scope="session")
def acceptance_detector():
    """Desk-scale detector: 10^4 scenarios, 10^4 draws each, timed.

    Shared by the acceptance suite and the detector behaviour tests so
    the expensive training happens once per session.
    """
    t0 = time.time()
    rng = np.random.default_rng(707)
    corpus = scenarios.iter_detector_corpus(rng, n_per_case=1000, k=DETECTOR_K, n_draws=10_000)
    feats, labels, names = detector.corpus_features(corpus, DETECTOR_K)
    corpus_seconds = time.time() - t0

    t0 = time.time()
    model = detector.train_detector(
        (feats, labels, names),
        detector.DetectorNetConfig(hidden=(128, 128, 128, 128)),
        nn.TrainConfig(max_epochs=80, patience=10, batch_size=128, seed=11),
        k=DETECTOR_K,
    )
    train_seconds = time.time() - t0

    rng_eval = np.random.default_rng(909)
    fresh = scenarios.iter_detector_corpus(rng_eval, n_per_case=150, k=DETECTOR_K, n_draws=10_000)
    eval_feats = detector.corpus_features(fresh, DETECTOR_K)
    return {
        "model": model,
        "train_features": (feats, labels, names),
        "eval_features": eval_feats,
        "corpus_seconds": corpus_seconds,
        "train_seconds": train_seconds,
    }


@pytest.fixture(scope="session")
def anticausal_detector():
    """Frozen Beta-scenario anti-causality detector at desk scale."""
    t0 = time.time()
    det = hypgen.train_anticausal_detector_beta(
        hypgen.AntiCausalConfig(n_sets=3000, seed=41)
    )
    return {"detector": det, "train_seconds": time.time() - t0}
