"""Independent oracle implementations used to freeze expected values.

Everything here deliberately avoids the package's own code paths: brute
force pair counting, direct series evaluation, quadrature, IRLS Newton,
augmented least squares, and central finite differences.
"""

from __future__ import annotations

import numpy as np
from scipy import integrate


def central_diff_grads(objective, params, h=1e-5):
    """Central finite-difference gradient of a scalar objective.

    ``objective`` is a zero-argument callable that reads the current
    values of ``params`` (a list of arrays mutated in place).
    """
    grads = []
    for p in params:
        g = np.zeros_like(p)
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            ix = it.multi_index
            old = p[ix]
            p[ix] = old + h
            f_plus = objective()
            p[ix] = old - h
            f_minus = objective()
            p[ix] = old
            g[ix] = (f_plus - f_minus) / (2.0 * h)
        grads.append(g)
    return grads


def max_rel_error(analytic, numeric):
    """Worst disagreement relative to the overall gradient scale.

    ``max |a - b| / max(|a|, |b|)`` with the maxima taken over every entry
    of every array.  Entries on exactly invariant directions (analytic 0,
    finite-difference round-off ~1e-12) then compare against the real
    gradient magnitude instead of against themselves.
    """
    scale = 1e-12
    worst = 0.0
    for a, b in zip(analytic, numeric):
        a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
        scale = max(scale, float(np.max(np.abs(a), initial=0.0)), float(np.max(np.abs(b), initial=0.0)))
        worst = max(worst, float(np.max(np.abs(a - b), initial=0.0)))
    return worst / scale


def brute_auc(scores, labels):
    """Exhaustive pair counting; ties contribute 1/2."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=int)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    total = 0.0
    for sp in pos:
        for sn in neg:
            if sp > sn:
                total += 1.0
            elif sp == sn:
                total += 0.5
    return total / (len(pos) * len(neg))


def brute_f1(scores, labels, threshold=0.5):
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=int)
    tp = fp = fn = 0
    for s, lab in zip(scores, labels):
        pred = 1 if s > threshold else 0
        if pred == 1 and lab == 1:
            tp += 1
        elif pred == 1 and lab == 0:
            fp += 1
        elif pred == 0 and lab == 1:
            fn += 1
    if tp == 0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return 2 * precision * recall / (precision + recall)


def brute_mi(x, y):
    """Direct summation over the empirical contingency table, in nats."""
    x = list(x)
    y = list(y)
    n = len(x)
    xv, yv = sorted(set(x)), sorted(set(y))
    mi = 0.0
    for a in xv:
        px = sum(1 for v in x if v == a) / n
        for b in yv:
            pxy = sum(1 for xi, yi in zip(x, y) if xi == a and yi == b) / n
            py = sum(1 for v in y if v == b) / n
            if pxy > 0:
                mi += pxy * np.log(pxy / (px * py))
    return max(mi, 0.0)


def newton_logistic(x, y, max_iters=200, tol=1e-12, ridge=0.0):
    """IRLS Newton for unregularized logistic regression with intercept.

    Independent of the package solver (different algorithm and code).
    Returns (w, b).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    n, m = x.shape
    xa = np.hstack([x, np.ones((n, 1))])
    theta = np.zeros(m + 1)
    for _ in range(max_iters):
        z = xa @ theta
        p = 1.0 / (1.0 + np.exp(-z))
        grad = xa.T @ (p - y) / n + ridge * theta
        w_diag = p * (1.0 - p) / n
        hess = xa.T @ (xa * w_diag[:, None]) + (ridge + 1e-12) * np.eye(m + 1)
        step = np.linalg.solve(hess, grad)
        theta -= step
        if np.max(np.abs(step)) < tol:
            break
    return theta[:m], theta[m]


def phi_quadrature(x):
    """Unit normal CDF by adaptive quadrature of the density."""
    density = lambda t: np.exp(-0.5 * t * t) / np.sqrt(2.0 * np.pi)
    if x <= 0:
        val, _ = integrate.quad(density, -60.0, x, epsabs=1e-16, epsrel=1e-13)
        return val
    val, _ = integrate.quad(density, -60.0, 0.0, epsabs=1e-16, epsrel=1e-13)
    val2, _ = integrate.quad(density, 0.0, x, epsabs=1e-16, epsrel=1e-13)
    return val + val2


def penalized_lstsq(x, y, d1, d2, lam):
    """Direct minimizer of (1/n)||y - X b||^2 + lam (d1 b1^2 + d2 b2^2).

    Solved as an augmented least-squares problem via QR (numpy lstsq),
    with no use of the orthonormal-design shortcut.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    n = x.shape[0]
    aug = np.vstack([x / np.sqrt(n), np.diag(np.sqrt([lam * d1, lam * d2]))])
    rhs = np.concatenate([y / np.sqrt(n), [0.0, 0.0]])
    sol, *_ = np.linalg.lstsq(aug, rhs, rcond=None)
    return sol
