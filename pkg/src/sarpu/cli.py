"""Command-line entry point: ``sarpu generate|train|evaluate|bench|verify``.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numeric divergence.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from sarpu import dataio
from sarpu.benchmark import (
    METHODS,
    PreconditionError,
    canonical_method,
    evaluate_method,
    FittedMethod,
    fit_method,
    long_table,
    run_benchmark,
    summary_table,
)
from sarpu.em import EMConfig
from sarpu.glm import DivergenceError, TrainConfig, load_model, predict_proba, save_model
from sarpu.simulate import SimulationConfig, make_blobs, make_experiment_instances
from sarpu.verify import SUITES, run_suite

log = logging.getLogger("sarpu")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DIVERGED = 0, 1, 2, 3
DATA_DIR_ENV = "SARPU_DATA_DIR"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _resolve(path: str) -> Path:
    p = Path(path)
    if not p.exists() and not p.is_absolute() and os.environ.get(DATA_DIR_ENV):
        alt = Path(os.environ[DATA_DIR_ENV]) / p
        if alt.exists():
            return alt
    return p


def load_dataset(args):
    """Returns ``(name, LabeledDataset)`` for the ``--dataset`` flag."""
    name = args.dataset
    if name == "synthetic-blobs":
        return name, make_blobs(args.n_rows, args.n_features, args.separation, seed=args.seed)
    if name == "breast-cancer":
        return name, dataio.load_breast_cancer()
    path = _resolve(name)
    schema = args.schema or str(path.with_suffix(".schema"))
    data, _ = dataio.load_csv(path, _resolve(schema))
    return path.stem, data


def _sim_config(args) -> SimulationConfig:
    try:
        return SimulationConfig(
            k_clusters=args.k_clusters,
            k_prop_attrs=args.k_prop_attrs,
            p_low=args.p_low,
            p_high=args.p_high,
            n_splits=args.n_splits,
            n_labelings=args.n_labelings,
            test_fraction=args.test_fraction,
            seed=args.seed,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _em_config(args) -> EMConfig:
    try:
        return EMConfig(
            max_iters=args.max_iters,
            slope_window=args.slope_window,
            slope_tol=args.slope_tol,
            loglik_rel_tol=args.loglik_tol,
            retrain_after=not args.no_retrain,
            warm_start=not args.cold_start,
            e_floor=args.e_floor,
            train=TrainConfig(l2_strength=args.l2),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def cmd_generate(args) -> int:
    name, data = load_dataset(args)
    cfg = _sim_config(args)
    exp = make_experiment_instances(data, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for inst in exp:
        stem = f"split{inst.split}-labeling{inst.labeling}"
        dataio.save_pu(out / f"{stem}-train.txt", inst.train)
        dataio.save_labeled(out / f"{stem}-test.txt", inst.test, inst.test_propensity)
        files += [f"{stem}-train.txt", f"{stem}-test.txt"]
    manifest = dict(exp.manifest, dataset=name, files=files)
    _write_json(out / "manifest.json", manifest)
    print(f"wrote {len(exp)} instances to {out}")
    return EXIT_OK


def cmd_train(args) -> int:
    method = canonical_method(args.method)
    train = dataio.load_pu(_resolve(args.input))
    fitted = fit_method(method, train, _em_config(args))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_model(fitted.classifier, out / "classifier.model")
    meta = {"method": method, "e_floor": args.e_floor, "n_train": train.n}
    if fitted.propensity_model is not None:
        save_model(fitted.propensity_model, out / "propensity.model")
    if method == "sar-em":
        em = fitted.extras["em"]
        (out / "em_trace.jsonl").write_text(em.trace_lines())
        meta.update(converged=em.converged, iterations=em.iterations)
    if method == "sar-strat":
        res = fitted.extras["stratification"]
        rows = res.stratification.summary_rows(train)
        lines = ["configuration\trows\tlabeled\tc_hat\tfallback"]
        lines += [
            f"{r['configuration']}\t{r['rows']}\t{r['labeled']}\t{r['c_hat']:.17g}\t{int(r['fallback'])}"
            for r in rows
        ]
        (out / "strata.tsv").write_text("\n".join(lines) + "\n")
    if "c" in fitted.extras:
        meta["c"] = fitted.extras["c"]
    _write_json(out / "meta.json", meta)
    print(f"trained {method}; models in {out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    clf = load_model(_resolve(args.model))
    test, e_true = dataio.load_labeled(_resolve(args.test))
    wanted = [m.strip() for m in args.metrics.split(",") if m.strip()]
    unknown = set(wanted) - {"mse", "auc", "mse_e"}
    if unknown:
        raise UsageError(f"unknown metrics: {sorted(unknown)}")
    propensity = None
    if "mse_e" in wanted:
        if not args.propensity_model:
            raise UsageError("mse_e needs --propensity-model")
        if e_true is None:
            raise PreconditionError("test file carries no true propensities")
        e_model = load_model(_resolve(args.propensity_model))
        idx = list(test.propensity_attr_indices)
        propensity = lambda X: predict_proba(e_model, X[:, idx])
    fitted = FittedMethod("evaluated", clf, propensity=propensity)
    vals = evaluate_method(fitted, test, e_true)
    result = {}
    names = {"mse": "mse_f", "auc": "auc_f", "mse_e": "mse_e"}
    for m in wanted:
        if names[m] not in vals:
            raise PreconditionError(f"cannot compute {m}: no positive test rows")
        result[m] = vals[names[m]]
    for k, v in result.items():
        print(f"{k}\t{v:.10g}")
    if args.out:
        _write_json(Path(args.out), result)
    return EXIT_OK


def cmd_bench(args) -> int:
    name, data = load_dataset(args)
    methods = [canonical_method(m.strip()) for m in args.methods.split(",") if m.strip()]
    bench = run_benchmark(
        data,
        _sim_config(args),
        methods,
        _em_config(args),
        dataset_name=name,
        jobs=args.jobs,
        propensity_on=args.propensity_on,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = summary_table(bench)
    (out / "summary.tsv").write_text(summary)
    (out / "long.tsv").write_text(long_table(bench))
    _write_json(
        out / "manifest.json",
        dict(bench.manifest, dataset=name, methods=methods, e_floor=args.e_floor),
    )
    sys.stdout.write(summary)
    if bench.failures:
        print(f"{len(bench.failures)} method fits failed; see long.tsv", file=sys.stderr)
    return EXIT_OK


def cmd_verify(args) -> int:
    suites = list(SUITES) if args.suite == "all" else [args.suite]
    ok = True
    for suite in suites:
        for res in run_suite(suite):
            print(res.line())
            ok &= res.passed
    if not ok:
        print("verification failed", file=sys.stderr)
    return EXIT_OK if ok else EXIT_DATA


def _add_dataset_args(p):
    p.add_argument("--dataset", default="synthetic-blobs",
                   help="synthetic-blobs, breast-cancer, or a CSV path")
    p.add_argument("--schema", help="schema file for a CSV dataset (default: <csv>.schema)")
    p.add_argument("--n-rows", type=int, default=2000, help="synthetic-blobs size")
    p.add_argument("--n-features", type=int, default=4)
    p.add_argument("--separation", type=float, default=3.0)


def _add_sim_args(p):
    p.add_argument("--k-clusters", type=int, default=5)
    p.add_argument("--k-prop-attrs", type=int, default=2)
    p.add_argument("--p-low", type=float, default=0.2)
    p.add_argument("--p-high", type=float, default=0.8)
    p.add_argument("--n-splits", type=int, default=5)
    p.add_argument("--n-labelings", type=int, default=5)
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)


def _add_train_args(p):
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument("--slope-window", type=int, default=10)
    p.add_argument("--slope-tol", type=float, default=1e-4)
    p.add_argument("--loglik-tol", type=float, default=1e-6)
    p.add_argument("--no-retrain", action="store_true", help="skip the final propensity-weighted refit")
    p.add_argument("--cold-start", action="store_true", help="do not warm-start M-step fits")
    p.add_argument("--e-floor", type=float, default=0.05)
    p.add_argument("--l2", type=float, default=None, help="L2 strength (default 1/n)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sarpu", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="write simulated PU instances and a manifest")
    _add_dataset_args(p)
    _add_sim_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train one method on a PU instance file")
    p.add_argument("--method", required=True, choices=list(METHODS) + ["sar-scar-strat"])
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    _add_train_args(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a trained classifier on a test file")
    p.add_argument("--model", required=True)
    p.add_argument("--propensity-model")
    p.add_argument("--test", required=True)
    p.add_argument("--metrics", default="mse,auc")
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("bench", help="run the simulated benchmark")
    _add_dataset_args(p)
    _add_sim_args(p)
    _add_train_args(p)
    p.add_argument("--methods", default=",".join(METHODS))
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--propensity-on", choices=("test", "train"), default="test")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("verify", help="run theory verification suites")
    p.add_argument("--suite", choices=list(SUITES) + ["all"], default="all")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"sarpu: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DivergenceError as exc:
        print(f"sarpu: training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (PreconditionError, dataio.DataFormatError, FileNotFoundError) as exc:
        print(f"sarpu: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"sarpu: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
