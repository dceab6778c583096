"""Experiment orchestration: zeta sweeps, alpha sweeps and figure data.

Seeds for each stage are derived from one master seed per run, so changing
one stage (say the forest) never perturbs another (say the cohort draw)::

    stage_seed = SeedSequence(master, spawn_key=(STAGES.index(stage),)).generate_state(1)[0]
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
import yaml

from . import audit, baselines, northstar, synthgen
from ._validation import positive_mask
from .dataset import apply_scaling, load_csv, load_german_credit, train_test_split

__all__ = [
    "STAGES",
    "METHODS",
    "ExperimentConfig",
    "derive_seed",
    "prepare_split",
    "run_zeta_sweep",
    "run_alpha_sweep",
    "summarize",
    "emit_figure_data",
    "write_results",
    "evaluate_split",
    "load_rows",
    "FIGURES",
]

log = logging.getLogger(__name__)

STAGES = ("cohort", "labels", "split", "forest", "logreg")
METHODS = ("ours", "logreg-all", "logreg-ftu", "test-labels")
OUTPUT_ENV = "FAIRRANK_OUTPUT"


def derive_seed(master, stage):
    ss = np.random.SeedSequence(int(master), spawn_key=(STAGES.index(stage),))
    return int(ss.generate_state(1)[0])


def _grid(start, stop, step):
    n = int(round((stop - start) / step))
    return [round(start + i * step, 10) for i in range(n + 1)]


@dataclass
class ExperimentConfig:
    source: str = "synthetic"
    csv_path: str | None = None
    schema_path: str | None = None
    german_path: str | None = None
    german_mapping: str | None = None
    methods: list = field(default_factory=lambda: list(METHODS))
    alphas: list = field(default_factory=lambda: _grid(0.0, 1.0, 0.1))
    zetas: list = field(default_factory=lambda: _grid(0.0, 3.0, 0.5))
    seeds: list = field(default_factory=lambda: list(range(5)))
    test_size: int = 200
    n: int = 1000
    noise_sd: float = 0.1
    alpha_sweep_zeta: float = 1.0
    l2: float = 1.0
    rank: dict = field(default_factory=dict)
    group_column: str | None = "gender"
    disadvantaged: str | None = "female"
    reference: str | None = "male"
    baseline_labels: str = "threshold"
    output_dir: str | None = None

    def __post_init__(self):
        if self.source not in ("synthetic", "csv", "german"):
            raise ValueError(f"unknown source {self.source!r}")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ValueError(f"unknown methods: {sorted(unknown)}")
        if not self.methods or not self.alphas or not self.zetas or not self.seeds:
            raise ValueError("methods, alphas, zetas and seeds must be non-empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be distinct")
        if self.baseline_labels not in ("threshold", "alpha"):
            raise ValueError("baseline_labels must be 'threshold' or 'alpha'")
        if self.source == "csv" and not (self.csv_path and self.schema_path):
            raise ValueError("csv source needs csv_path and schema_path")
        if self.source == "german" and not self.german_path:
            raise ValueError("german source needs german_path")

    @property
    def rank_config(self):
        return northstar.RankConfig.from_dict(self.rank)

    @classmethod
    def from_yaml(cls, path):
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
        return cls(**data)

    def to_dict(self):
        return asdict(self)

    def resolve_output(self, override=None):
        out = override or self.output_dir or os.environ.get(OUTPUT_ENV) or "results"
        return Path(out)


def prepare_split(config, seed, zeta=None):
    """Load or generate data for one seed and split it into train/test."""
    if config.source == "synthetic":
        cohort = synthgen.sample_cohort(
            synthgen.CohortSpec(n=config.n, seed=derive_seed(seed, "cohort")))
        zeta = config.alpha_sweep_zeta if zeta is None else zeta
        labels = synthgen.label_zeta(cohort, zeta, derive_seed(seed, "labels"), config.noise_sd)
        data = cohort.with_labels(labels)
    elif config.source == "csv":
        data = load_csv(config.csv_path, config.schema_path)
    else:
        data = load_german_credit(config.german_path, config.german_mapping)
    return train_test_split(data, config.test_size, derive_seed(seed, "split"))


@dataclass
class _Fitted:
    model: northstar.RankModel
    logreg: dict
    Z_test: np.ndarray
    seconds: dict


def _fit_methods(train, test, config, seed):
    seconds = {}
    t0 = time.perf_counter()
    model, _ = northstar.fit(train, config=config.rank_config, seed=derive_seed(seed, "forest"))
    seconds["ours"] = time.perf_counter() - t0
    logreg = {}
    for method, subset in (("logreg-all", "all"), ("logreg-ftu", "ftu")):
        if method in config.methods:
            t0 = time.perf_counter()
            logreg[method] = baselines.train_logreg(train, subset, l2=config.l2,
                                                    seed=derive_seed(seed, "logreg"))
            seconds[method] = time.perf_counter() - t0
    Z_test = apply_scaling(model.scaling, test)
    return _Fitted(model, logreg, Z_test, seconds)


def _group_values(config, test):
    if config.group_column and config.group_column in test.frame.columns:
        return test.frame[config.group_column].to_numpy()
    return None


def _row(report, *, sweep, zeta, alpha, seed, model, runtime):
    row = {"sweep": sweep, "zeta": zeta, "alpha": alpha, "seed": seed}
    row.update(report.to_row())
    row["omega"] = json.dumps(np.round(model.weights.omega, 12).tolist())
    row["rho_tilde"] = json.dumps(np.round(model.penalty.rho_tilde, 12).tolist())
    row["runtime"] = runtime
    return row


def _audit_kwargs(config, test):
    groups = _group_values(config, test)
    kwargs = {"labels": test.labels, "protected": groups}
    present = set() if groups is None else set(groups.tolist())
    if config.disadvantaged in present:
        kwargs["disadvantaged"] = config.disadvantaged
    if config.reference in present:
        kwargs["reference"] = config.reference
    return kwargs


def evaluate_split(train, test, config, seed, zeta=None):
    """All methods on one train/test split, audited on the test rows."""
    fitted = _fit_methods(train, test, config, seed)
    model, Z, psi = fitted.model, fitted.Z_test, fitted.model.psi
    test_alpha = float(positive_mask(test.labels).mean())
    kw = _audit_kwargs(config, test)
    rows = []
    if "ours" in config.methods:
        t0 = time.perf_counter()
        cohort = northstar.rank(model, test, alpha=test_alpha)
        rep = audit.audit_report(Z, psi, positions=cohort.positions, outcomes=cohort.outcomes,
                                 alpha=test_alpha, method="ours", **kw)
        rows.append(_row(rep, sweep="zeta", zeta=zeta, alpha=test_alpha, seed=seed,
                         model=model, runtime=fitted.seconds["ours"] + time.perf_counter() - t0))
    for method, lr in fitted.logreg.items():
        positions = baselines.rank_by_probability(lr, test)
        if config.baseline_labels == "alpha":
            outcomes, alpha = baselines.label_top_alpha(positions, test_alpha), test_alpha
        else:
            outcomes, alpha = lr.predict(test), None
        rep = audit.audit_report(Z, psi, positions=positions, outcomes=outcomes,
                                 alpha=alpha, method=method, **kw)
        rows.append(_row(rep, sweep="zeta", zeta=zeta, alpha=alpha, seed=seed,
                         model=model, runtime=fitted.seconds[method]))
    if "test-labels" in config.methods:
        rep = audit.audit_report(Z, psi, outcomes=test.labels, alpha=test_alpha,
                                 method="test-labels", **kw)
        rows.append(_row(rep, sweep="zeta", zeta=zeta, alpha=test_alpha, seed=seed,
                         model=model, runtime=0.0))
    return rows


def run_zeta_sweep(config):
    """One row per (zeta, seed, method) on synthetic cohorts."""
    if config.source != "synthetic":
        raise ValueError("zeta sweeps need the synthetic source")
    rows = []
    for zeta in config.zetas:
        for seed in config.seeds:
            train, test = prepare_split(config, seed, zeta)
            rows += evaluate_split(train, test, config, seed, zeta)
            log.info("zeta=%s seed=%s done", zeta, seed)
    return rows


def run_alpha_sweep(config):
    """Label-based S for every (alpha, seed, method) on the test split."""
    rows = []
    zeta = config.alpha_sweep_zeta if config.source == "synthetic" else None
    for seed in config.seeds:
        train, test = prepare_split(config, seed, zeta)
        fitted = _fit_methods(train, test, config, seed)
        model, Z, psi = fitted.model, fitted.Z_test, fitted.model.psi
        kw = _audit_kwargs(config, test)
        positions = {m: baselines.rank_by_probability(lr, test)
                     for m, lr in fitted.logreg.items()}
        for alpha in config.alphas:
            labeled = {}
            if "ours" in config.methods:
                labeled["ours"] = northstar.rank(model, test, alpha=alpha).outcomes
            for m, pos in positions.items():
                labeled[m] = baselines.label_top_alpha(pos, alpha)
            for method, outcomes in labeled.items():
                rep = audit.audit_report(Z, psi, outcomes=outcomes, alpha=alpha,
                                         method=method, **kw)
                rows.append(_row(rep, sweep="alpha", zeta=zeta, alpha=alpha, seed=seed,
                                 model=model, runtime=fitted.seconds[method]))
    return rows


_METRICS = ("S", "T", "accuracy", "ratio", "count_ratio")


def summarize(rows, by=("zeta", "method")):
    """Mean and standard deviation of the audit metrics over seeds."""
    df = pd.DataFrame(rows)
    if df.empty:
        raise ValueError("no rows to summarize")
    by = [b for b in by if b in df.columns]
    metrics = [m for m in _METRICS if m in df.columns]
    metrics += [c for c in df.columns if c.startswith("rate[")]
    keys = df[by].astype(str).agg("|".join, axis=1) if by else None
    grouped = df.assign(_key=keys).groupby("_key", sort=False)
    out = grouped[by].first()
    for m in metrics:
        values = grouped[m].agg(["mean", "std", "count"])
        out[f"{m}_mean"] = values["mean"]
        out[f"{m}_std"] = values["std"].fillna(0.0)
    out["n_seeds"] = grouped["seed"].nunique()
    return out.reset_index(drop=True)


# figure -> (sweep, x, y, audit basis)
FIGURES = {
    "fig1": ("alpha", "alpha", "S", "labels"),
    "fig2": ("zeta", "zeta", "S", "ranking"),
    "fig3": ("zeta", "zeta", "accuracy", None),
    "fig4": ("zeta", "zeta", "ratio", None),
}


def emit_figure_data(rows, figure_id):
    """Tidy long-format series behind a figure.

    Grid points that some methods lack are logged and listed in
    ``frame.attrs["missing"]``.
    """
    if figure_id not in FIGURES:
        raise ValueError(f"unknown figure {figure_id!r}; choose from {sorted(FIGURES)}")
    df = pd.DataFrame(rows)
    if df.empty:
        raise ValueError("no rows to emit")
    sweep, x, y, basis = FIGURES[figure_id]
    if "sweep" in df.columns:
        df = df[df["sweep"] == sweep]
    if basis is not None:
        df = df[df["basis"] == basis]
    if x == "zeta":
        df = df[df["zeta"].notna()]
    df = df[df[y].notna()]
    if df.empty:
        raise ValueError(f"rows contain no data for {figure_id}")
    g = df.groupby(["method", x], sort=True)[y].agg(["mean", "std", "count"]).reset_index()
    frame = pd.DataFrame({
        "figure": figure_id,
        "method": g["method"],
        "x_name": x,
        "x": g[x].astype(float),
        "y_name": y,
        "y_mean": g["mean"],
        "y_std": g["std"].fillna(0.0),
        "n_seeds": g["count"],
    })
    grid = sorted(set(frame["x"]))
    missing = [(m, xv) for m in sorted(set(frame["method"]))
               for xv in grid if not ((frame["method"] == m) & (frame["x"] == xv)).any()]
    if missing:
        log.warning("%s: missing grid points %s", figure_id, missing)
    frame.attrs["missing"] = missing
    return frame


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_results(rows, out_dir, name, config=None):
    """Write ``<name>.csv`` (deterministic), timings and a JSON manifest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    df = pd.DataFrame(rows)
    results = out_dir / f"{name}.csv"
    df.drop(columns=["runtime"], errors="ignore").to_csv(results, index=False,
                                                        float_format="%.12g")
    if "runtime" in df.columns:
        df[["sweep", "zeta", "alpha", "seed", "method", "runtime"]].to_csv(
            out_dir / f"{name}_timings.csv", index=False)
    summary = out_dir / f"{name}_summary.csv"
    by = ("zeta", "method") if name.startswith("zeta") else ("alpha", "method")
    summarize(rows, by).to_csv(summary, index=False, float_format="%.12g")
    manifest = {
        "name": name,
        "config": None if config is None else config.to_dict(),
        "files": {p.name: _sha256(p) for p in (results, summary)},
        "versions": _versions(),
    }
    with open(out_dir / f"{name}_manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, default=str)
    return results


def _versions():
    import scipy
    import sklearn

    from . import __version__
    return {"fairrank": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "scikit-learn": sklearn.__version__, "pandas": pd.__version__}


def load_rows(path):
    df = pd.read_csv(path, float_precision="round_trip")
    return df.to_dict("records")

