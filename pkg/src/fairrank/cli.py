"""Command-line interface.

Exit codes: 0 on success, 1 for user errors (bad flags, unreadable or
mismatched inputs), 2 for unexpected internal failures. Outputs default to
the directory named by ``FAIRRANK_OUTPUT`` (or ``./results``).
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np
import pandas as pd
import yaml

from . import __version__, audit, harness, northstar, synthgen
from ._validation import SchemaError
from .dataset import load_csv, write_csv

log = logging.getLogger("fairrank")

EXIT_OK, EXIT_USER, EXIT_INTERNAL = 0, 1, 2
_USER_ERRORS = (SchemaError, ValueError, KeyError, FileNotFoundError, IsADirectoryError,
                yaml.YAMLError, pd.errors.ParserError, json.JSONDecodeError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _output_root():
    return Path(os.environ.get(harness.OUTPUT_ENV) or "results")


def _out_path(given, default_name):
    return Path(given) if given else _output_root() / default_name


def _read_yaml(path):
    if path is None:
        return {}
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ValueError(f"{path}: expected a mapping at the top level")
    return data


def _write_json(obj, path):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def cmd_generate(args):
    cohort = synthgen.sample_cohort(synthgen.CohortSpec(n=args.n, seed=args.seed))
    if args.running:
        labels = synthgen.label_running_example(cohort, seed=args.label_seed)
    else:
        labels = synthgen.label_zeta(cohort, args.zeta, seed=args.label_seed,
                                     noise_sd=args.noise_sd)
    out = _out_path(args.out, "cohort.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    schema = Path(args.schema_out) if args.schema_out else out.with_suffix(".schema.yaml")
    write_csv(cohort.with_labels(labels), out, schema_path=schema)
    print(f"wrote {out} and {schema}")


def _rank_config(args):
    cfg = _read_yaml(args.config)
    return northstar.RankConfig.from_dict(cfg.get("rank", {})), cfg


def cmd_fit(args):
    data = load_csv(args.data, args.schema)
    config, cfg = _rank_config(args)
    alpha = args.alpha if args.alpha is not None else cfg.get("alpha")
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    model, cohort = northstar.fit(data, alpha=alpha, config=config, seed=seed)
    out = _out_path(args.out, "fit")
    out.mkdir(parents=True, exist_ok=True)
    model.to_json(out / "model.json")
    cohort.to_csv(out / "cohort.csv")
    w = ", ".join(f"{n}={v:.3f}" for n, v in zip(model.feature_names, model.psi))
    print(f"alpha={model.alpha:.4g} nu={model.nu} delta={model.delta:.6g} psi: {w}")
    print(f"wrote {out / 'model.json'} and {out / 'cohort.csv'}")


def cmd_rank(args):
    model = northstar.RankModel.from_json(args.model)
    data = load_csv(args.data, args.schema)
    cohort = northstar.rank(model, data, alpha=args.alpha)
    out = _out_path(args.out, "ranked.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    cohort.to_csv(out)
    print(f"wrote {out}")


def cmd_predict(args):
    model = northstar.RankModel.from_json(args.model)
    data = load_csv(args.data, args.schema)
    outcomes, d = northstar.predict(model, data)
    ids = data.ids if data.ids is not None else np.arange(1, data.n + 1)
    out = _out_path(args.out, "predictions.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame({"id": ids, "distance": d, "outcome": outcomes}).to_csv(
        out, index=False, float_format="%.17g")
    print(f"{int(np.sum(outcomes == '+'))}/{len(outcomes)} positive; wrote {out}")


def _align(cohort, data):
    # rows of `data` in cohort order, matched on id
    if data.ids is None:
        if data.n != cohort.n:
            raise SchemaError("data has no id column and a different row count")
        return data
    index = {v: i for i, v in enumerate(data.ids.tolist())}
    try:
        rows = [index[v] for v in cohort.ids.tolist()]
    except KeyError as exc:
        raise SchemaError(f"cohort id {exc.args[0]!r} not found in data") from None
    return data.subset(np.asarray(rows))


def cmd_audit(args):
    model = northstar.RankModel.from_json(args.model)
    cohort = northstar.RankedCohort.from_csv(args.cohort)
    if cohort.Z.shape[1] != len(model.psi):
        raise SchemaError(f"cohort has {cohort.Z.shape[1]} scaled features, "
                          f"model expects {len(model.psi)}")
    kwargs = {}
    if cohort.outcomes is not None:
        kwargs["alpha"] = float(np.mean(cohort.outcomes == "+"))
    if args.data:
        data = _align(cohort, load_csv(args.data, args.schema))
        if data.labels is not None:
            kwargs["labels"] = data.labels
        if args.group:
            if args.group not in data.frame.columns:
                raise SchemaError(f"group column {args.group!r} not in data")
            kwargs["protected"] = data.frame[args.group].to_numpy()
            kwargs["disadvantaged"] = args.disadvantaged
            kwargs["reference"] = args.reference
    if args.basis == "labels":
        if cohort.outcomes is None:
            raise ValueError("cohort has no outcomes; rank with --alpha first")
        report = audit.audit_report(cohort.Z, model.psi, outcomes=cohort.outcomes,
                                    method=args.method, **kwargs)
    else:
        report = audit.audit_report(cohort.Z, model.psi, positions=cohort.positions,
                                    outcomes=cohort.outcomes, method=args.method, **kwargs)
    out = _out_path(args.out, "audit.json")
    _write_json(report.to_dict(), out)
    print(f"S={report.S:.6g} T={report.T} ({report.basis}); wrote {out}")


def _experiment_config(args):
    config = harness.ExperimentConfig(**_read_yaml(args.config))
    if args.seeds:
        config.seeds = list(args.seeds)
    return config


def cmd_sweep_alpha(args):
    config = _experiment_config(args)
    rows = harness.run_alpha_sweep(config)
    out = config.resolve_output(args.out)
    path = harness.write_results(rows, out, "alpha_sweep", config)
    print(f"wrote {path}")


def cmd_sweep_zeta(args):
    config = _experiment_config(args)
    rows = harness.run_zeta_sweep(config)
    out = config.resolve_output(args.out)
    path = harness.write_results(rows, out, "zeta_sweep", config)
    print(f"wrote {path}")


def cmd_emit_figures(args):
    rows = []
    for path in args.results:
        rows += harness.load_rows(path)
    if not rows:
        raise ValueError("result files contain no rows")
    out = _out_path(args.out, "figures")
    out.mkdir(parents=True, exist_ok=True)
    figures = args.figures or sorted(harness.FIGURES)
    written = 0
    for fig in figures:
        try:
            frame = harness.emit_figure_data(rows, fig)
        except ValueError as exc:
            if args.figures:
                raise
            log.info("skipping %s: %s", fig, exc)
            continue
        if args.format == "json":
            payload = {"figure": fig, "missing": [list(m) for m in frame.attrs["missing"]],
                       "series": frame.to_dict("records")}
            _write_json(payload, out / f"{fig}.json")
        else:
            frame.to_csv(out / f"{fig}.csv", index=False, float_format="%.12g")
        written += 1
    if not written:
        raise ValueError("no figure could be built from these results")
    print(f"wrote {written} figure file(s) to {out}")


def build_parser():
    p = _Parser(prog="fairrank", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="synthetic admission cohort with labels")
    g.add_argument("--n", type=int, default=1000)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--label-seed", type=int, default=0)
    g.add_argument("--zeta", type=float, default=0.0)
    g.add_argument("--noise-sd", type=float, default=0.1)
    g.add_argument("--running", action="store_true",
                   help="use the fixed running-example label rule instead of zeta")
    g.add_argument("--out", help="CSV path")
    g.add_argument("--schema-out", help="schema YAML path (default: next to the CSV)")
    g.set_defaults(func=cmd_generate)

    f = sub.add_parser("fit", help="fit a ranking model on a labeled CSV")
    f.add_argument("--data", required=True)
    f.add_argument("--schema", required=True)
    f.add_argument("--alpha", type=float)
    f.add_argument("--seed", type=int)
    f.add_argument("--config", help="YAML with optional keys rank, alpha, seed")
    f.add_argument("--out", help="output directory")
    f.set_defaults(func=cmd_fit)

    r = sub.add_parser("rank", help="rank rows with a fitted model")
    r.add_argument("--model", required=True)
    r.add_argument("--data", required=True)
    r.add_argument("--schema", required=True)
    r.add_argument("--alpha", type=float, help="label the top ceil(alpha*n) rows")
    r.add_argument("--out")
    r.set_defaults(func=cmd_rank)

    pr = sub.add_parser("predict", help="classify rows with the stored threshold")
    pr.add_argument("--model", required=True)
    pr.add_argument("--data", required=True)
    pr.add_argument("--schema", required=True)
    pr.add_argument("--out")
    pr.set_defaults(func=cmd_predict)

    a = sub.add_parser("audit", help="meritocratic unfairness of a ranked cohort")
    a.add_argument("--model", required=True)
    a.add_argument("--cohort", required=True)
    a.add_argument("--basis", choices=("ranking", "labels"), default="ranking")
    a.add_argument("--data", help="original CSV, for accuracy and group statistics")
    a.add_argument("--schema")
    a.add_argument("--group", help="protected column for admission rates")
    a.add_argument("--disadvantaged")
    a.add_argument("--reference")
    a.add_argument("--method", default="ours")
    a.add_argument("--out")
    a.set_defaults(func=cmd_audit)

    for name, func, what in (("sweep-alpha", cmd_sweep_alpha, "label-based S over alpha"),
                             ("sweep-zeta", cmd_sweep_zeta, "all methods over zeta")):
        s = sub.add_parser(name, help=what)
        s.add_argument("--config", help="experiment YAML")
        s.add_argument("--seeds", type=int, nargs="+")
        s.add_argument("--out", help="run directory")
        s.set_defaults(func=func)

    e = sub.add_parser("emit-figures", help="tidy series behind each figure")
    e.add_argument("--results", nargs="+", required=True)
    e.add_argument("--figures", nargs="+", choices=sorted(harness.FIGURES))
    e.add_argument("--format", choices=("csv", "json"), default="csv")
    e.add_argument("--out")
    e.set_defaults(func=cmd_emit_figures)
    return p


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USER
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "audit" and args.data and not args.schema:
        print("fairrank audit: --data needs --schema", file=sys.stderr)
        return EXIT_USER
    try:
        args.func(args)
    except _USER_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USER
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
