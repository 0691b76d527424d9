"""Planted-structure benchmark builders shared by tests.

These construct datasets with known ground truth for the non-linear and
hypothesis-generation experiments: an interaction benchmark where the
outcome depends on a product of two variables (invisible to a linear
model), and a multivariate-cause benchmark where the outcome needs
conjunctions of variables while strongly predictive confounded variables
try to lure the models away.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit


def interaction_benchmark(seed, n=4000, m=20, k=16, interaction=3.0, linear=0.3):
    """Counts X, outcome driven by the product of columns 0 and 1.

    Columns 2 and 3 carry weak linear effects so the linear baseline is
    above chance but far below a model that captures the interaction.
    Returns (x, y).
    """
    rng = np.random.default_rng(seed)
    x = np.minimum(rng.poisson(1.5, size=(n, m)), k - 1)
    z = (x - x.mean(axis=0)) / np.maximum(x.std(axis=0), 1e-9)
    logit = interaction * z[:, 0] * z[:, 1] + linear * (z[:, 2] + z[:, 3])
    y = (rng.random(n) < expit(logit)).astype(float)
    return x.astype(float), y


def multivariate_cause_benchmark(seed, n=4200, m=24, n_pairs=3, conf_block=6):
    """Binary features; y needs conjunctions of causal pairs.

    Variables 0..2*n_pairs-1 form AND-pairs that drive y; the next
    ``conf_block`` variables are driven by a latent confounder that also
    enters y (predictive but not causal); the rest are noise.  Returns
    (x, y, truth) with truth[i] = 1 for the causal variables.
    """
    rng = np.random.default_rng(seed)
    x = (rng.random((n, m)) < 0.5).astype(float)
    zc = rng.standard_normal(n)
    lo = 2 * n_pairs
    for j in range(lo, lo + conf_block):
        x[:, j] = (rng.random(n) < expit(1.8 * zc)).astype(float)
    logit = 2.0 * zc.copy()
    for p in range(n_pairs):
        conj = x[:, 2 * p] * x[:, 2 * p + 1]
        logit += 3.0 * (conj - conj.mean())
    y = (rng.random(n) < expit(logit)).astype(float)
    truth = np.zeros(m)
    truth[:lo] = 1.0
    return x, y, truth


def hypothesis_truth_score(hypotheses, truth):
    """Mean ground-truth causality of each hypothesis's top inputs, averaged."""
    if not hypotheses:
        return 0.0
    per = [float(np.mean([truth[i] for i in h.top_inputs])) for h in hypotheses]
    return float(np.mean(per))
