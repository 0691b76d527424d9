"""Command-line interface.

Subcommands: gen-synth, train-detector, score, fit, fit-nonlin, hypgen,
theorem-check, benchmark, report.  Every subcommand accepts --seed,
--out-dir and --config (TOML or JSON; file values fill in flags that were
not given explicitly).  Exit codes: 0 success, 1 usage error, 2 data
error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, detector, glm, hypgen, metrics, nn, nonlin, scenarios, theory
from .data import bin_table, ingest_csv
from .errors import (
    ConfigError,
    ConsistencyError,
    DataError,
    DomainError,
    NumericalError,
    ShapeError,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _load_config_file(path: str) -> dict:
    text = Path(path).read_bytes()
    if path.endswith((".toml", ".tml")):
        try:
            import tomllib
        except ModuleNotFoundError:
            import tomli as tomllib
        return tomllib.loads(text.decode("utf-8"))
    return json.loads(text.decode("utf-8"))


def _common(parser: _Parser) -> None:
    parser.add_argument("--seed", type=int, default=None, help="rng seed (default 0)")
    parser.add_argument("--out-dir", default=None, help="directory for artifacts")
    parser.add_argument("--config", default=None, help="TOML or JSON file with flag defaults")


class _Args:
    """Flag values merged with the optional config file."""

    def __init__(self, ns: argparse.Namespace):
        self._ns = ns
        self._cfg = _load_config_file(ns.config) if ns.config else {}

    def get(self, name: str, default=None):
        value = getattr(self._ns, name, None)
        if value is not None:
            return value
        return self._cfg.get(name, default)


def _write_json(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, indent=1, sort_keys=True)
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


def _load_table(args: _Args):
    table = ingest_csv(args.get("data"), args.get("label_col", "label"))
    if args.get("log_bin", False):
        table = bin_table(table, int(args.get("bins", 16)))
    return table


def _parse_hidden(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise ConfigError(f"bad layer list {text!r}; expected e.g. 128,128") from None


# -- handlers ----------------------------------------------------------------


def _cmd_gen_synth(args: _Args) -> int:
    seed = int(args.get("seed", 0))
    rng = np.random.default_rng(seed)
    samples = scenarios.generate_detector_corpus(
        rng,
        n_per_case=int(args.get("n_per_case", 50)),
        k=int(args.get("k", 16)),
        n_draws=int(args.get("n_draws", 1000)),
        dof=float(args.get("dof", 1.0)),
    )
    out = args.get("out_dir", "corpus")
    scenarios.save_corpus(samples, out, seed=seed)
    print(f"wrote {len(samples)} samples to {out}")
    return EXIT_OK


def _cmd_train_detector(args: _Args) -> int:
    corpus = scenarios.load_corpus(args.get("corpus"))
    k = corpus[0].k
    model = detector.train_detector(
        corpus,
        detector.DetectorNetConfig(hidden=_parse_hidden(args.get("layers", "128,128,128,128"))),
        nn.TrainConfig(
            max_epochs=int(args.get("max_epochs", 200)),
            patience=int(args.get("patience", 15)),
            batch_size=int(args.get("batch_size", 128)),
            seed=int(args.get("seed", 0)),
        ),
        k=k,
    )
    detector.save_detector(model, args.get("out", "detector.json"))
    print(
        f"detector trained: held-out error {model.metadata['heldout_error']:.4f} "
        f"(n={model.metadata['heldout_n']})"
    )
    return EXIT_OK


def _cmd_score(args: _Args) -> int:
    model = detector.load_detector(args.get("model"))
    table = _load_table(args)
    weights = detector.score_all(model, table.x, table.y)
    payload = {
        "schema_version": "scores-v1",
        "scores": {name: float(c) for name, c in zip(table.columns, weights.c)},
        "degenerate": [table.columns[i] for i in np.flatnonzero(weights.degenerate)],
    }
    _write_json(payload, args.get("out"))
    return EXIT_OK


def _read_scores(path_or_uniform: str, columns: list[str]) -> np.ndarray | None:
    if path_or_uniform == "uniform":
        return None
    with open(path_or_uniform, encoding="utf-8") as fh:
        payload = json.load(fh)
    scores = payload["scores"] if "scores" in payload else payload
    missing = [c for c in columns if c not in scores]
    if missing:
        raise DataError(f"scores file missing columns: {missing[:5]}")
    return np.array([float(scores[c]) for c in columns])


def _cmd_fit(args: _Args) -> int:
    table = _load_table(args)
    c = _read_scores(args.get("scores", "uniform"), table.columns)
    lam = float(args.get("lam", 0.0))
    mode = args.get("mode", "causal")
    x, y = table.x.astype(float), table.y.astype(float)
    if mode == "two-step":
        fit = glm.fit_two_step(x, y, c if c is not None else np.zeros(table.m), lam=lam,
                               cutoff=float(args.get("cutoff", 0.5)))
    elif mode == "l1":
        fit = glm.fit_plain_l1(x, y, lam)
    elif mode == "causal":
        fit = glm.fit_causal_logistic(
            x, y, glm.FitConfig(lam=lam, norm=args.get("norm", "l1"), weights=c)
        )
    else:
        raise ConfigError(f"unknown mode {mode!r}")
    payload = {
        "schema_version": "fit-v1",
        "mode": mode,
        "coefficients": {name: float(w) for name, w in zip(table.columns, fit.w)},
        "intercept": float(fit.b),
        "config": {"lambda": lam, "norm": fit.norm, "scores": args.get("scores", "uniform")},
        "diagnostics": {
            "converged": bool(fit.converged),
            "iterations": int(fit.n_iters),
            "objective": float(fit.objective_history[-1]),
            "kkt_residual": float(fit.kkt_residual),
            "nonzero_count": int(fit.nonzero_count),
            "excluded": [table.columns[i] for i in fit.excluded] if fit.excluded is not None else None,
        },
    }
    _write_json(payload, args.get("out"))
    return EXIT_OK


_ARCH_PRESETS = {
    "desk": {"q": 16, "alpha_hidden": (32, 32), "dropout": 0.0,
             "k_h": 8, "h_hidden": (32,), "phi_hidden": (32, 32), "head_hidden": (32, 32)},
    "paper": {"q": 200, "alpha_hidden": (200, 200, 200), "dropout": 0.8,
              "k_h": 200, "h_hidden": (200, 200, 200), "phi_hidden": (200, 200, 200),
              "head_hidden": (200, 200, 200, 200, 200)},
}


def _cmd_fit_nonlin(args: _Args) -> int:
    table = _load_table(args)
    c = _read_scores(args.get("scores", "uniform"), table.columns)
    arch = _ARCH_PRESETS[args.get("arch", "desk")]
    config = nonlin.NonlinConfig(
        q=int(args.get("q", arch["q"])),
        alpha_hidden=arch["alpha_hidden"],
        dropout=float(args.get("dropout", arch["dropout"])),
        max_epochs=int(args.get("max_epochs", 150)),
        seed=int(args.get("seed", 0)),
    )
    result = nonlin.train_nonlincause(
        table.x.astype(float),
        table.y.astype(float),
        c if c is not None else np.ones(table.m),
        float(args.get("lam", 0.0)),
        config,
    )
    p, omega = nonlin.nonlincause_forward(result.model, table.x.astype(float))
    payload = {
        "schema_version": "nonlin-fit-v1",
        "config": {"lambda": float(args.get("lam", 0.0)), "q": config.q, "arch": args.get("arch", "desk")},
        "train_auc": metrics.auc(p, table.y),
        "best_epoch": result.best_epoch,
        "stopped_early": result.stopped_early,
        "mean_abs_omega": float(np.mean(np.abs(omega))),
        "skip_coefficients": {name: float(w) for name, w in zip(table.columns, result.model.w)},
    }
    _write_json(payload, args.get("out"))
    return EXIT_OK


def _cmd_hypgen(args: _Args) -> int:
    table = _load_table(args)
    arch = _ARCH_PRESETS[args.get("arch", "desk")]
    seed = int(args.get("seed", 0))
    det = hypgen.train_anticausal_detector_beta(
        hypgen.AntiCausalConfig(
            n_sets=int(args.get("g_sets", 2000)),
            phi_hidden=arch["phi_hidden"],
            head_hidden=arch["head_hidden"],
            seed=seed + 1,
        )
    )
    config = hypgen.HypgenConfig(
        k_h=int(args.get("k_h", arch["k_h"])),
        h_hidden=arch["h_hidden"],
        l1_lower=float(args.get("l1_lower", 1e-4)),
        max_epochs=int(args.get("max_epochs", 60)),
        seed=seed,
    )
    result = hypgen.train_hypothesis_generator(
        table.x.astype(float), table.y.astype(float), det, float(args.get("lam", 0.0)), config
    )
    hypotheses = hypgen.extract_hypotheses(result.model, int(args.get("top_k", config.k_h)))
    payload = {
        "schema_version": "hypotheses-v1",
        "detector_error": det.heldout_error,
        "hypotheses": [
            {
                "coordinate": h.coordinate,
                "weight": h.weight,
                "anti_causal_score": h.anti_causal_score,
                "top_inputs": [table.columns[i] for i in h.top_inputs],
            }
            for h in hypotheses
        ],
    }
    _write_json(payload, args.get("out"))
    return EXIT_OK


def _cmd_theorem_check(args: _Args) -> int:
    cfg = theory.TheoremConfig(
        n=int(args.get("n", 500)),
        gamma=float(args.get("gamma", 1.0)),
        beta1=float(args.get("beta1", 1.0)),
        beta2=float(args.get("beta2", 0.8)),
        lam=float(args.get("lam", 1.0)),
        epsilon=float(args.get("epsilon", 0.1)),
        noise_kind=args.get("noise", "gaussian"),
        trials=int(args.get("trials", 20000)),
        seed=int(args.get("seed", 0)),
    )
    which = args.get("which", "causal")
    results = {}
    for name in ("causal", "ridge") if which == "both" else (which,):
        closed = theory.causal_accuracy_closed_form(cfg, name)
        sim = theory.simulate_causal_accuracy(cfg, name)
        se = theory.binomial_se(closed, cfg.trials)
        results[name] = {
            "closed_form": closed,
            "empirical": sim.empirical,
            "se": se,
            "pass": bool(abs(sim.empirical - closed) <= 3.0 * se),
        }
    payload = {"schema_version": "theorem-check-v1", "config": cfg.__dict__, **results}
    sweep = args.get("sweep_csv")
    if sweep:
        lams = np.logspace(-3, max(np.log10(max(cfg.lam, 1e-3)) + 2, 1), 40)
        Path(sweep).parent.mkdir(parents=True, exist_ok=True)
        with open(sweep, "w", encoding="utf-8") as fh:
            fh.write("lambda,closed_causal,closed_ridge,limit\n")
            limit = theory.closed_form_limit_lambda_inf(cfg)
            for lam in lams:
                c2 = theory.TheoremConfig(**{**cfg.__dict__, "lam": float(lam)})
                fh.write(
                    f"{lam},{theory.causal_accuracy_closed_form(c2, 'causal')},"
                    f"{theory.causal_accuracy_closed_form(c2, 'ridge')},{limit}\n"
                )
    _write_json(payload, args.get("out"))
    return EXIT_OK if all(r["pass"] for r in results.values()) else EXIT_NUMERIC


def _cmd_benchmark(args: _Args) -> int:
    spec = scenarios.BenchmarkSpec(
        m=int(args.get("m", 200)),
        n=int(args.get("n", 10000)),
        frac_causal=float(args.get("frac_causal", 0.2)),
        confounder_count=int(args.get("confounders", 3)),
        effect_scale=float(args.get("effect_scale", 1.0)),
        seed=int(args.get("seed", 0)),
        k=int(args.get("k", 16)),
    )
    bench = scenarios.generate_semisynthetic_benchmark(spec)
    out = args.get("out_dir", "benchmark")
    scenarios.save_benchmark(bench, out)
    print(f"wrote benchmark ({spec.n} x {spec.m}) to {out}")
    return EXIT_OK


def _cmd_report(args: _Args) -> int:
    from .experiment import DetectorStage, ExperimentConfig, run_experiment

    raw = dict(args._cfg)
    det_raw = raw.pop("detector_stage", {})
    if "hidden" in det_raw:
        det_raw["hidden"] = tuple(det_raw["hidden"])
    overrides = {}
    if args.get("seed") is not None:
        overrides["seed"] = int(args.get("seed"))
    if args.get("out_dir") is not None:
        overrides["out_dir"] = args.get("out_dir")
    for key in ("lambda_grid", "ks"):
        if key in raw:
            raw[key] = tuple(raw[key])
    config = ExperimentConfig(**{**raw, **overrides}, detector_stage=DetectorStage(**det_raw))
    report = run_experiment(config)
    failed = report["stage_errors"]
    print(f"report written to {config.out_dir}/report.json"
          + (f" (stage errors: {sorted(failed)})" if failed else ""))
    return EXIT_OK if not failed else EXIT_NUMERIC


def build_parser() -> _Parser:
    parser = _Parser(prog="causereg", description=__doc__)
    parser.add_argument("--version", action="version", version=f"causereg {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synth", help="generate a labeled scenario corpus")
    _common(p)
    p.add_argument("--n-per-case", type=int, default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--n-draws", type=int, default=None)
    p.add_argument("--dof", type=float, default=None)
    p.set_defaults(handler=_cmd_gen_synth)

    p = sub.add_parser("train-detector", help="train the causality detector on a corpus")
    _common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--layers", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--max-epochs", type=int, default=None)
    p.add_argument("--patience", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.set_defaults(handler=_cmd_train_detector)

    p = sub.add_parser("score", help="score each column of a dataset")
    _common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--label-col", default=None)
    p.add_argument("--log-bin", action="store_true", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(handler=_cmd_score)

    p = sub.add_parser("fit", help="fit a (causally) regularized logistic model")
    _common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--label-col", default=None)
    p.add_argument("--scores", default=None, help="scores.json or 'uniform'")
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--norm", choices=("l1", "l2"), default=None)
    p.add_argument("--mode", choices=("causal", "l1", "two-step"), default=None)
    p.add_argument("--cutoff", type=float, default=None)
    p.add_argument("--log-bin", action="store_true", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(handler=_cmd_fit)

    p = sub.add_parser("fit-nonlin", help="fit the per-sample-coefficient model")
    _common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--label-col", default=None)
    p.add_argument("--scores", default=None)
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--arch", choices=tuple(_ARCH_PRESETS), default=None)
    p.add_argument("--q", type=int, default=None)
    p.add_argument("--dropout", type=float, default=None)
    p.add_argument("--max-epochs", type=int, default=None)
    p.add_argument("--log-bin", action="store_true", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(handler=_cmd_fit_nonlin)

    p = sub.add_parser("hypgen", help="generate multivariate causal hypotheses")
    _common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--label-col", default=None)
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--arch", choices=tuple(_ARCH_PRESETS), default=None)
    p.add_argument("--k-h", type=int, default=None)
    p.add_argument("--l1-lower", type=float, default=None)
    p.add_argument("--g-sets", type=int, default=None)
    p.add_argument("--top-k", type=int, default=None)
    p.add_argument("--max-epochs", type=int, default=None)
    p.add_argument("--log-bin", action="store_true", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(handler=_cmd_hypgen)

    p = sub.add_parser("theorem-check", help="verify the closed-form accuracy by simulation")
    _common(p)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--beta1", type=float, default=None)
    p.add_argument("--beta2", type=float, default=None)
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--noise", choices=("gaussian", "laplace"), default=None)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--which", choices=("causal", "ridge", "both"), default=None)
    p.add_argument("--sweep-csv", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(handler=_cmd_theorem_check)

    p = sub.add_parser("benchmark", help="generate a semi-synthetic benchmark dataset")
    _common(p)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--frac-causal", type=float, default=None)
    p.add_argument("--confounders", type=int, default=None)
    p.add_argument("--effect-scale", type=float, default=None)
    p.add_argument("--k", type=int, default=None)
    p.set_defaults(handler=_cmd_benchmark)

    p = sub.add_parser("report", help="run the full experiment pipeline from a config")
    _common(p)
    p.set_defaults(handler=_cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        return ns.handler(_Args(ns))
    except SystemExit as exc:  # argparse --help / usage errors
        return int(exc.code or 0)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, DomainError, ShapeError, ConsistencyError, OSError, KeyError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
