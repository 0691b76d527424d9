"""End-to-end experiment orchestration.

One call runs: benchmark generation -> detector training (or loading) ->
per-variable scoring -> the three regularized fits (weighted-penalty,
plain L1, two-step) -> metrics -> a schema-validated JSON report plus
artifact files in a per-run directory.  Stage failures are recorded in
the report instead of aborting the pipeline.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__, detector, glm, metrics, nn
from .data import stratified_split
from .errors import CauseRegError
from .scenarios import BenchmarkSpec, generate_semisynthetic_benchmark, iter_detector_corpus, save_benchmark

REPORT_VERSION = "report-v1"


@dataclass(frozen=True)
class DetectorStage:
    model_path: str | None = None  # load instead of training when set
    n_per_case: int = 300
    n_draws: int = 5000
    hidden: tuple[int, ...] = (128, 128, 128, 128)
    max_epochs: int = 120
    patience: int = 12


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    out_dir: str = "runs/exp"
    m: int = 200
    n: int = 10000
    frac_causal: float = 0.2
    confounder_count: int = 3
    effect_scale: float = 1.0
    k: int = 16
    lam: float = 0.02
    lambda_grid: tuple[float, ...] = ()
    ks: tuple[int, ...] = (10, 25, 50)
    detector_stage: DetectorStage = field(default_factory=DetectorStage)
    split: tuple[float, float, float] = (0.75, 0.10, 0.15)


def load_report_schema() -> dict:
    with resources.files("causereg").joinpath("report_schema.json").open(encoding="utf-8") as fh:
        return json.load(fh)


def validate_report(report: dict) -> None:
    jsonschema.validate(report, load_report_schema())


def coefficient_ranking(w: np.ndarray) -> np.ndarray:
    """Variable indices ordered by |coefficient|, largest first (stable)."""
    return np.argsort(-np.abs(np.asarray(w, dtype=float)), kind="stable")


def run_experiment(config: ExperimentConfig) -> dict:
    """Execute the pipeline and return the report dict (also written to disk)."""
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = {
        "schema_version": REPORT_VERSION,
        "created_unix": time.time(),
        "versions": {"causereg": __version__, "numpy": np.__version__},
        "config": asdict(config),
        "stage_errors": {},
        "metrics": {
            "auc": {},
            "f1": {},
            "causality_at_k": {},
            "spearman_rho": None,
            "sparsity": {},
            "detector_heldout_error": None,
        },
        "per_variable": [],
    }

    bench = model = weights = None
    fits: dict[str, glm.GlmFit] = {}

    try:
        spec = BenchmarkSpec(
            m=config.m,
            n=config.n,
            frac_causal=config.frac_causal,
            confounder_count=config.confounder_count,
            effect_scale=config.effect_scale,
            seed=config.seed,
            k=config.k,
        )
        bench = generate_semisynthetic_benchmark(spec)
        save_benchmark(bench, out / "benchmark")
    except (CauseRegError, OSError) as exc:
        report["stage_errors"]["benchmark"] = str(exc)

    if bench is not None:
        try:
            stage = config.detector_stage
            if stage.model_path:
                model = detector.load_detector(stage.model_path)
            else:
                corpus = iter_detector_corpus(
                    np.random.default_rng(config.seed + 1), stage.n_per_case, config.k, stage.n_draws
                )
                feats = detector.corpus_features(corpus, config.k)
                model = detector.train_detector(
                    feats,
                    detector.DetectorNetConfig(hidden=stage.hidden),
                    nn.TrainConfig(
                        max_epochs=stage.max_epochs, patience=stage.patience, seed=config.seed + 1
                    ),
                    k=config.k,
                )
                detector.save_detector(model, out / "detector.json")
            report["metrics"]["detector_heldout_error"] = model.metadata.get("heldout_error")
        except (CauseRegError, OSError) as exc:
            report["stage_errors"]["detector"] = str(exc)

    mi = None
    if bench is not None and model is not None:
        try:
            weights = detector.score_all(model, bench.x, bench.y)
            mi = np.array(
                [metrics.mutual_information(bench.x[:, j], bench.y) for j in range(bench.spec.m)]
            )
            report["metrics"]["spearman_rho"] = detector.spearman_mi_check(weights, bench.x, bench.y)
            with open(out / "scores.json", "w", encoding="utf-8") as fh:
                json.dump(
                    {
                        "schema_version": "scores-v1",
                        "scores": {nm: float(ci) for nm, ci in zip(bench.column_names, weights.c)},
                    },
                    fh,
                )
        except (CauseRegError, OSError) as exc:
            report["stage_errors"]["score"] = str(exc)

    if bench is not None and weights is not None:
        try:
            idx_tr, _, idx_te = stratified_split(bench.y, config.split, seed=config.seed + 2)
            x_tr, y_tr = bench.x[idx_tr].astype(float), bench.y[idx_tr].astype(float)
            x_te, y_te = bench.x[idx_te].astype(float), bench.y[idx_te].astype(float)
            fits["logcause"] = glm.fit_causal_logistic(
                x_tr, y_tr, glm.FitConfig(lam=config.lam, weights=weights.c, norm="l1")
            )
            fits["logl1"] = glm.fit_plain_l1(x_tr, y_tr, config.lam)
            fits["two_step"] = glm.fit_two_step(x_tr, y_tr, weights.c, lam=config.lam)
            for name, fit in fits.items():
                scores = glm.predict(fit, x_te)
                report["metrics"]["auc"][name] = metrics.auc(scores, y_te)
                report["metrics"]["f1"][name] = metrics.f1(scores, y_te)
                report["metrics"]["sparsity"][name] = fit.nonzero_count
                ranking = coefficient_ranking(fit.w)
                report["metrics"]["causality_at_k"][name] = {
                    str(k): metrics.causality_at_k(ranking, bench.labels, k)
                    for k in config.ks
                    if k <= bench.spec.m
                }
        except (CauseRegError, OSError) as exc:
            report["stage_errors"]["fits"] = str(exc)

    if bench is not None:
        for j, name in enumerate(bench.column_names):
            report["per_variable"].append(
                {
                    "name": name,
                    "role": bench.roles[j],
                    "truth": float(bench.labels[j]),
                    "c": float(weights.c[j]) if weights is not None else None,
                    "mi": float(mi[j]) if mi is not None else None,
                    "coef_logcause": float(fits["logcause"].w[j]) if "logcause" in fits else None,
                    "coef_logl1": float(fits["logl1"].w[j]) if "logl1" in fits else None,
                    "coef_two_step": float(fits["two_step"].w[j]) if "two_step" in fits else None,
                }
            )

    validate_report(report)
    with open(out / "report.json", "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=1, sort_keys=True)
    return report
