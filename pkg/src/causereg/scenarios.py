"""Synthetic causal-scenario generation.

Two-variable labeled datasets are drawn from ten directed structures over
an observed count variable X (support ``1..K`` in draws, categories
``0..K-1`` in the underlying count semantics), a binary target Y, and
hidden categorical variables H.  Each conditional in the factorization is
drawn independently: count conditionals come from a five-component
mixture of count distributions, hidden-variable conditionals from flat
Dirichlets, and binary conditionals from Unif(0,1) Bernoulli parameters.
Hidden variables are marginalized exactly, so every sample carries its
true joint alongside i.i.d. draws.

Also builds semi-synthetic multivariate benchmarks (count matrix, binary
outcome, known per-variable causal ground truth) used wherever real
labeled data would be needed.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np
from scipy import stats

from .accel import njit_or_none
from .errors import ConfigError, DomainError

DEFAULT_K = 16
HIDDEN_CARD_RANGE = (2, 100)

MARGINAL_KINDS = ("zipf", "poisson", "dirichlet_binary", "dirichlet_trinary", "dirichlet_full")


class Scenario(str, Enum):
    """The ten two-variable structures; the first four contain X -> ... -> Y."""

    DIRECT = "direct"
    INDIRECT = "indirect"
    CONF_DIRECT = "conf_direct"
    CONF_INDIRECT = "conf_indirect"
    REVERSE_DIRECT = "reverse_direct"
    REVERSE_INDIRECT = "reverse_indirect"
    CONF_REVERSE_DIRECT = "conf_reverse_direct"
    CONF_REVERSE_INDIRECT = "conf_reverse_indirect"
    CONFOUNDED_ONLY = "confounded_only"
    INDEPENDENT = "independent"


CAUSAL_SCENARIOS = (
    Scenario.DIRECT,
    Scenario.INDIRECT,
    Scenario.CONF_DIRECT,
    Scenario.CONF_INDIRECT,
)


def causal_label(scenario: Scenario) -> int:
    """1 means "X does not cause Y"; 0 means it does."""
    return 0 if scenario in CAUSAL_SCENARIOS else 1


@dataclass(frozen=True)
class MarginalSpec:
    kind: str
    k: int
    s: float | None = None

    def __post_init__(self):
        if self.kind not in MARGINAL_KINDS:
            raise ConfigError(f"unknown marginal kind {self.kind!r}")
        if self.k < 2:
            raise DomainError("marginal support size K must be >= 2")
        if self.kind in ("zipf", "poisson") and (self.s is None or self.s <= 0):
            raise ConfigError(f"{self.kind} needs a shape parameter s > 0")


def sample_marginals(
    rng: np.random.Generator, n_rows: int, k: int, dof: float = 1.0
) -> np.ndarray:
    """Draw ``n_rows`` count distributions over categories ``0..k-1``.

    Each row independently picks one of the five mixture components
    uniformly.  Zipf and Poisson shape parameters are chi-square(dof)
    draws; Zipf is truncated to the support and renormalized, Poisson
    lumps its tail mass above ``k-2`` into the top category.  The binary
    and trinary components put a flat Dirichlet on the lowest 2 or 3
    categories; the full component is a flat Dirichlet over all ``k``.
    """
    if k < 2:
        raise DomainError("marginal support size K must be >= 2")
    if n_rows < 1:
        raise DomainError("n_rows must be >= 1")
    out = np.zeros((n_rows, k))
    kinds = rng.integers(0, len(MARGINAL_KINDS), size=n_rows)
    support = np.arange(k)

    idx = np.flatnonzero(kinds == 0)  # zipf
    if idx.size:
        s = rng.chisquare(dof, size=idx.size)
        raw = np.power.outer(1.0 / (support + 1.0), s).T  # (len(idx), k)
        out[idx] = raw / raw.sum(axis=1, keepdims=True)
    idx = np.flatnonzero(kinds == 1)  # poisson
    if idx.size:
        s = rng.chisquare(dof, size=idx.size)
        pmf = stats.poisson.pmf(support[: k - 1], s[:, None])
        out[idx, : k - 1] = pmf
        out[idx, k - 1] = stats.poisson.sf(k - 2, s)
    idx = np.flatnonzero(kinds == 2)  # dirichlet over lowest 2
    if idx.size:
        out[idx, :2] = rng.dirichlet(np.ones(2), size=idx.size)
    idx = np.flatnonzero(kinds == 3)  # dirichlet over lowest 3 (clamped to k)
    if idx.size:
        width = min(3, k)
        out[idx, :width] = rng.dirichlet(np.ones(width), size=idx.size)
    idx = np.flatnonzero(kinds == 4)  # flat dirichlet over all k
    if idx.size:
        out[idx] = rng.dirichlet(np.ones(k), size=idx.size)
    return out


def sample_marginal(rng: np.random.Generator, k: int, dof: float = 1.0) -> np.ndarray:
    """One draw from the five-component count-distribution mixture."""
    return sample_marginals(rng, 1, k, dof)[0]


def marginal_probs(spec: MarginalSpec, rng: np.random.Generator) -> np.ndarray:
    """Materialize a probability vector for a fixed mixture component."""
    k, support = spec.k, np.arange(spec.k)
    if spec.kind == "zipf":
        raw = (support + 1.0) ** (-spec.s)
        return raw / raw.sum()
    if spec.kind == "poisson":
        p = np.empty(k)
        p[: k - 1] = stats.poisson.pmf(support[: k - 1], spec.s)
        p[k - 1] = stats.poisson.sf(k - 2, spec.s)
        return p
    if spec.kind == "dirichlet_binary":
        p = np.zeros(k)
        p[:2] = rng.dirichlet(np.ones(2))
        return p
    if spec.kind == "dirichlet_trinary":
        p = np.zeros(k)
        width = min(3, k)
        p[:width] = rng.dirichlet(np.ones(width))
        return p
    return rng.dirichlet(np.ones(k))


# -- draw sampling kernel (numba with numpy fallback) ----------------------


def _codes_from_uniforms_numpy(cdf: np.ndarray, u: np.ndarray) -> np.ndarray:
    codes = np.searchsorted(cdf, u, side="right")
    return np.minimum(codes, cdf.size - 1).astype(np.int64)


def _codes_from_uniforms_py(cdf, u):  # pragma: no cover - numba compiles this
    n = u.shape[0]
    m = cdf.shape[0]
    codes = np.empty(n, dtype=np.int64)
    for i in range(n):
        lo, hi = 0, m - 1
        ui = u[i]
        while lo < hi:
            mid = (lo + hi) // 2
            if cdf[mid] <= ui:
                lo = mid + 1
            else:
                hi = mid
        codes[i] = lo
    return codes


_decorator = njit_or_none(cache=True)
if _decorator is not None:
    _codes_from_uniforms = _decorator(_codes_from_uniforms_py)
else:
    _codes_from_uniforms = _codes_from_uniforms_numpy


def draw_from_joint(rng: np.random.Generator, probs: np.ndarray, n_draws: int) -> np.ndarray:
    """i.i.d. (x, y) draws from a flat joint; x in 1..K, y in {0,1}."""
    k = probs.size // 2
    cdf = np.cumsum(probs)
    codes = _codes_from_uniforms(cdf, rng.random(n_draws))
    draws = np.empty((n_draws, 2), dtype=np.int16)
    draws[:, 0] = codes % k + 1
    draws[:, 1] = codes // k
    return draws


# -- scenario joints --------------------------------------------------------


@dataclass
class ScenarioSample:
    """A labeled synthetic instance.

    ``joint`` is the true joint as a flat length-2K vector ordered
    ``[p(1,0)..p(K,0), p(1,1)..p(K,1)]``; ``draws`` is an (n, 2) integer
    array of (x, y) pairs; ``label`` is 1 when X does not cause Y.
    """

    joint: np.ndarray
    draws: np.ndarray
    label: int
    scenario: Scenario
    k: int

    @property
    def joint_xy(self) -> np.ndarray:
        """Joint reshaped to (K, 2)."""
        return self.joint.reshape(2, self.k).T


def _flatten_joint(joint_xy: np.ndarray) -> np.ndarray:
    return np.concatenate([joint_xy[:, 0], joint_xy[:, 1]])


def _hidden_card(rng: np.random.Generator, card_range: tuple[int, int]) -> int:
    return int(rng.integers(card_range[0], card_range[1] + 1))


@dataclass
class ScenarioTables:
    """The independently drawn conditionals of one scenario's factorization."""

    scenario: Scenario
    k: int
    tables: dict


def draw_scenario_tables(
    rng: np.random.Generator,
    scenario: Scenario,
    k: int = DEFAULT_K,
    dof: float = 1.0,
    hidden_card_range: tuple[int, int] = HIDDEN_CARD_RANGE,
) -> ScenarioTables:
    """Draw every conditional in the scenario's factorization.

    Conditionals of Y given its parents are Bernoulli with Unif(0,1)
    parameters per parent configuration; hidden-variable conditionals
    (and the root p(h)) are flat Dirichlet; conditionals of X come from
    the count-distribution mixture, one draw per parent configuration.
    """
    t: dict = {}
    if scenario == Scenario.DIRECT:
        t["px"] = sample_marginal(rng, k, dof)
        t["py1x"] = rng.random(k)
    elif scenario == Scenario.INDIRECT:
        t["px"] = sample_marginal(rng, k, dof)
        card = _hidden_card(rng, hidden_card_range)
        t["phx"] = rng.dirichlet(np.ones(card), size=k)  # p(h | x)
        t["py1h"] = rng.random(card)
    elif scenario == Scenario.CONF_DIRECT:
        card = _hidden_card(rng, hidden_card_range)
        t["ph"] = rng.dirichlet(np.ones(card))
        t["pxh"] = sample_marginals(rng, card, k, dof)  # p(x | h)
        t["py1xh"] = rng.random((k, card))  # p(y=1 | x, h)
    elif scenario == Scenario.CONF_INDIRECT:
        card = _hidden_card(rng, hidden_card_range)
        card2 = _hidden_card(rng, hidden_card_range)
        t["ph"] = rng.dirichlet(np.ones(card))
        t["pxh"] = sample_marginals(rng, card, k, dof)
        t["ph2x"] = rng.dirichlet(np.ones(card2), size=k)  # p(h' | x)
        t["py1hh2"] = rng.random((card, card2))
    elif scenario == Scenario.REVERSE_DIRECT:
        t["py1"] = float(rng.random())
        t["pxy"] = sample_marginals(rng, 2, k, dof)  # p(x | y)
    elif scenario == Scenario.REVERSE_INDIRECT:
        t["py1"] = float(rng.random())
        card = _hidden_card(rng, hidden_card_range)
        t["phy"] = rng.dirichlet(np.ones(card), size=2)  # p(h | y)
        t["pxh"] = sample_marginals(rng, card, k, dof)
    elif scenario == Scenario.CONF_REVERSE_DIRECT:
        card = _hidden_card(rng, hidden_card_range)
        t["ph"] = rng.dirichlet(np.ones(card))
        t["py1h"] = rng.random(card)
        t["pxhy"] = sample_marginals(rng, card * 2, k, dof).reshape(card, 2, k)
    elif scenario == Scenario.CONF_REVERSE_INDIRECT:
        card = _hidden_card(rng, hidden_card_range)
        card2 = _hidden_card(rng, hidden_card_range)
        t["ph"] = rng.dirichlet(np.ones(card))
        t["py1h"] = rng.random(card)
        t["ph2y"] = rng.dirichlet(np.ones(card2), size=2)  # p(h' | y)
        t["pxhh2"] = sample_marginals(rng, card * card2, k, dof).reshape(card, card2, k)
    elif scenario == Scenario.CONFOUNDED_ONLY:
        card = _hidden_card(rng, hidden_card_range)
        t["ph"] = rng.dirichlet(np.ones(card))
        t["pxh"] = sample_marginals(rng, card, k, dof)
        t["py1h"] = rng.random(card)
    elif scenario == Scenario.INDEPENDENT:
        t["px"] = sample_marginal(rng, k, dof)
        t["py1"] = float(rng.random())
    else:  # pragma: no cover
        raise ConfigError(f"unknown scenario {scenario!r}")
    return ScenarioTables(scenario=scenario, k=k, tables=t)


def joint_from_tables(tables: ScenarioTables) -> np.ndarray:
    """Marginalize the hidden variables exactly; returns p(X, Y) as (K, 2)."""
    t, k = tables.tables, tables.k
    joint = np.empty((k, 2))
    scenario = tables.scenario
    if scenario == Scenario.DIRECT:
        joint[:, 1] = t["px"] * t["py1x"]
        joint[:, 0] = t["px"] * (1.0 - t["py1x"])
    elif scenario == Scenario.INDIRECT:
        py1x = t["phx"] @ t["py1h"]
        joint[:, 1] = t["px"] * py1x
        joint[:, 0] = t["px"] * (1.0 - py1x)
    elif scenario == Scenario.CONF_DIRECT:
        joint[:, 1] = np.einsum("h,hx,xh->x", t["ph"], t["pxh"], t["py1xh"])
        joint[:, 0] = t["ph"] @ t["pxh"] - joint[:, 1]
    elif scenario == Scenario.CONF_INDIRECT:
        joint[:, 1] = np.einsum("h,hx,xg,hg->x", t["ph"], t["pxh"], t["ph2x"], t["py1hh2"])
        joint[:, 0] = t["ph"] @ t["pxh"] - joint[:, 1]
    elif scenario == Scenario.REVERSE_DIRECT:
        joint[:, 0] = (1.0 - t["py1"]) * t["pxy"][0]
        joint[:, 1] = t["py1"] * t["pxy"][1]
    elif scenario == Scenario.REVERSE_INDIRECT:
        joint[:, 0] = (1.0 - t["py1"]) * (t["phy"][0] @ t["pxh"])
        joint[:, 1] = t["py1"] * (t["phy"][1] @ t["pxh"])
    elif scenario == Scenario.CONF_REVERSE_DIRECT:
        joint[:, 0] = np.einsum("h,h,hx->x", t["ph"], 1.0 - t["py1h"], t["pxhy"][:, 0])
        joint[:, 1] = np.einsum("h,h,hx->x", t["ph"], t["py1h"], t["pxhy"][:, 1])
    elif scenario == Scenario.CONF_REVERSE_INDIRECT:
        pyh = np.stack([1.0 - t["py1h"], t["py1h"]], axis=1)  # (card, 2)
        joint[:, :] = np.einsum("h,hy,yg,hgx->xy", t["ph"], pyh, t["ph2y"], t["pxhh2"])
    elif scenario == Scenario.CONFOUNDED_ONLY:
        joint[:, 1] = np.einsum("h,hx,h->x", t["ph"], t["pxh"], t["py1h"])
        joint[:, 0] = t["ph"] @ t["pxh"] - joint[:, 1]
    else:  # Scenario.INDEPENDENT
        joint[:, 0] = t["px"] * (1.0 - t["py1"])
        joint[:, 1] = t["px"] * t["py1"]
    return joint


def scenario_joint(
    rng: np.random.Generator,
    scenario: Scenario,
    k: int = DEFAULT_K,
    dof: float = 1.0,
    hidden_card_range: tuple[int, int] = HIDDEN_CARD_RANGE,
) -> np.ndarray:
    """Draw one true joint p(X, Y) of shape (K, 2) for a scenario."""
    return joint_from_tables(draw_scenario_tables(rng, scenario, k, dof, hidden_card_range))


def sample_scenario(
    rng: np.random.Generator,
    scenario: Scenario,
    k: int = DEFAULT_K,
    n_draws: int = 1000,
    dof: float = 1.0,
) -> ScenarioSample:
    """Build one labeled sample: true joint plus i.i.d. draws from it."""
    if n_draws < 1:
        raise DomainError("n_draws must be >= 1")
    joint = scenario_joint(rng, scenario, k, dof)
    probs = _flatten_joint(joint)
    draws = draw_from_joint(rng, probs, n_draws)
    return ScenarioSample(joint=probs, draws=draws, label=causal_label(scenario), scenario=scenario, k=k)


def iter_detector_corpus(
    rng: np.random.Generator,
    n_per_case: int,
    k: int = DEFAULT_K,
    n_draws: int = 1000,
    dof: float = 1.0,
):
    """Yield ``10 * n_per_case`` scenario samples, ``n_per_case`` per case.

    Streaming variant of :func:`generate_detector_corpus` for corpora too
    large to hold all draws in memory at once.
    """
    if n_per_case < 1:
        raise DomainError("n_per_case must be >= 1")
    for scenario in Scenario:
        for _ in range(n_per_case):
            yield sample_scenario(rng, scenario, k, n_draws, dof)


def generate_detector_corpus(
    rng: np.random.Generator,
    n_per_case: int,
    k: int = DEFAULT_K,
    n_draws: int = 1000,
    dof: float = 1.0,
) -> list[ScenarioSample]:
    """Labeled corpus over all ten scenarios; class balance is 4:6."""
    return list(iter_detector_corpus(rng, n_per_case, k, n_draws, dof))


# -- semi-synthetic multivariate benchmark ----------------------------------


@dataclass(frozen=True)
class BenchmarkSpec:
    m: int
    n: int
    frac_causal: float
    confounder_count: int = 3
    effect_scale: float = 1.0
    seed: int = 0
    k: int = DEFAULT_K
    confounder_y_scale: float = 2.0
    confounder_x_loading: tuple[float, float] = (0.6, 1.2)

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise ConfigError("m and n must be >= 1")
        if not 0.0 <= self.frac_causal < 1.0:
            raise ConfigError("frac_causal must lie in [0, 1)")
        if self.confounder_count < 1:
            raise ConfigError("confounder_count must be >= 1")
        if self.effect_scale <= 0:
            raise ConfigError("effect_scale must be > 0")
        if self.k < 2:
            raise ConfigError("K must be >= 2")


@dataclass
class SemisyntheticBenchmark:
    """Count matrix, binary outcome, and per-variable ground truth.

    ``labels[i]`` is 1 when variable i truly causes y, 0 otherwise;
    ``roles[i]`` is one of ``causal`` / ``confounded`` / ``noise``.
    """

    x: np.ndarray
    y: np.ndarray
    labels: np.ndarray
    roles: list[str]
    spec: BenchmarkSpec
    column_names: list[str]


def generate_semisynthetic_benchmark(spec: BenchmarkSpec) -> SemisyntheticBenchmark:
    """Build a benchmark with known causal / confounded / noise variables.

    Causal variables enter the outcome logit directly (standardized, with
    coefficients of magnitude ~``effect_scale``).  Confounded variables
    are count channels driven by latent Gaussian confounders that also
    enter the logit, so they correlate with y without causing it.  The
    rest are pure noise.  Non-causal variables split evenly between
    confounded and noise; roles are assigned to shuffled column positions.
    """
    rng = np.random.default_rng(spec.seed)
    m, n, k = spec.m, spec.n, spec.k
    n_causal = int(round(spec.frac_causal * m))
    n_conf = (m - n_causal) // 2
    roles_blocked = (["causal"] * n_causal + ["confounded"] * n_conf
                     + ["noise"] * (m - n_causal - n_conf))
    order = rng.permutation(m)
    roles = [""] * m
    for pos, role in zip(order, roles_blocked):
        roles[pos] = role

    z = rng.standard_normal((n, spec.confounder_count))
    x = np.empty((n, m), dtype=np.int64)
    mu = rng.uniform(0.5, 3.0, size=m)
    conf_assign = {}
    next_conf = 0
    for j in range(m):
        if roles[j] == "confounded":
            cix = next_conf % spec.confounder_count
            next_conf += 1
            conf_assign[j] = cix
            g = rng.uniform(*spec.confounder_x_loading)
            rate = mu[j] * np.exp(g * z[:, cix] - 0.5 * g * g)
            x[:, j] = np.minimum(rng.poisson(rate), k - 1)
        else:
            x[:, j] = np.minimum(rng.poisson(mu[j], size=n), k - 1)

    logit = np.zeros(n)
    causal_cols = [j for j in range(m) if roles[j] == "causal"]
    for j in causal_cols:
        col = x[:, j].astype(float)
        sd = col.std()
        zcol = (col - col.mean()) / (sd if sd > 0 else 1.0)
        beta = spec.effect_scale * rng.uniform(0.3, 1.0) * rng.choice((-1.0, 1.0))
        logit += beta * zcol
    alpha = spec.effect_scale * spec.confounder_y_scale * rng.uniform(
        0.8, 1.2, size=spec.confounder_count
    ) * rng.choice((-1.0, 1.0), size=spec.confounder_count)
    logit += z @ alpha

    y = (rng.random(n) < 1.0 / (1.0 + np.exp(-logit))).astype(np.int64)
    labels = np.array([1 if r == "causal" else 0 for r in roles])
    names = [f"var_{j:03d}" for j in range(m)]
    return SemisyntheticBenchmark(x=x, y=y, labels=labels, roles=roles, spec=spec, column_names=names)


# -- serialization -----------------------------------------------------------


def save_corpus(samples: list[ScenarioSample], out_dir, seed: int | None = None) -> None:
    """Write a corpus as one CSV per sample plus a manifest JSON."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"schema_version": "corpus-v1", "seed": seed, "samples": []}
    for i, sample in enumerate(samples):
        name = f"sample_{i:05d}.csv"
        with open(out / name, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "y"])
            writer.writerows(sample.draws.tolist())
        manifest["samples"].append(
            {
                "file": name,
                "scenario": sample.scenario.value,
                "label": sample.label,
                "k": sample.k,
                "joint": sample.joint.tolist(),
            }
        )
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh)


def load_corpus(in_dir) -> list[ScenarioSample]:
    src = Path(in_dir)
    with open(src / "manifest.json", encoding="utf-8") as fh:
        manifest = json.load(fh)
    samples = []
    for entry in manifest["samples"]:
        draws = np.loadtxt(src / entry["file"], delimiter=",", skiprows=1, dtype=np.int64, ndmin=2)
        samples.append(
            ScenarioSample(
                joint=np.asarray(entry["joint"], dtype=float),
                draws=draws.astype(np.int16),
                label=int(entry["label"]),
                scenario=Scenario(entry["scenario"]),
                k=int(entry["k"]),
            )
        )
    return samples


def save_benchmark(bench: SemisyntheticBenchmark, out_dir) -> None:
    """Write data.csv (count columns + label) and ground_truth.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "data.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(bench.column_names + ["label"])
        for row, yi in zip(bench.x.tolist(), bench.y.tolist()):
            writer.writerow(row + [yi])
    truth = {
        "schema_version": "benchmark-truth-v1",
        "labels": {name: int(lab) for name, lab in zip(bench.column_names, bench.labels)},
        "roles": {name: role for name, role in zip(bench.column_names, bench.roles)},
        "spec": {
            "m": bench.spec.m,
            "n": bench.spec.n,
            "frac_causal": bench.spec.frac_causal,
            "confounder_count": bench.spec.confounder_count,
            "effect_scale": bench.spec.effect_scale,
            "seed": bench.spec.seed,
            "k": bench.spec.k,
        },
    }
    with open(out / "ground_truth.json", "w", encoding="utf-8") as fh:
        json.dump(truth, fh, indent=1)
