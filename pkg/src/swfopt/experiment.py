"""End-to-end case-study runs: ingest, group rates, post- and in-processing.

Every report file starts with ``#`` provenance lines carrying the config
hash and seeds, and contains no timestamps, so a rerun from the same
manifest reproduces it byte for byte.  Wall-clock timings live only in the
JSON manifest.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
import warnings
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import __version__, alloc, data, learn, metrics
from .swf import SwfSpec

DATASET_ENV = "SWFOPT_DATASET"
CASE_STUDY_SWFS = ("utilitarian", "alpha:alpha=0.5", "proportional", "maximin")
LAMBDA2_GRID = (0.1, 1.0, 10.0, 50.0, 100.0)
MANIFEST_SUFFIX = ".manifest.json"
TABLE1_TARGETS = {  # (young, old) means in percent
    "positive_rate": (70.33, 82.14),
    "true_positive_rate": (82.03, 91.01),
}
TABLE1_TOL = 5.0
ACCURACY_DROP_TOL = 0.05
EXPECTED_FACTS = {"records": 1000, "young_count": 548, "old_count": 452,
                  "young_positive_pct": 65, "old_positive_pct": 76}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str | None = None
    n_splits: int = 5
    seed_base: int = 0
    swfs: tuple[str, ...] = CASE_STUDY_SWFS
    lambda2: tuple[float, ...] = LAMBDA2_GRID
    C: float = 1.0
    lambda1: float = 1e-4
    kappa: float = 5.0
    max_iter: int = 2000
    budget: float = data.DEFAULT_BUDGET
    output_dir: str = "swfopt-out"

    def __post_init__(self):
        if self.n_splits < 1:
            raise ConfigError("n_splits must be at least 1")
        try:
            for s in self.swfs:
                SwfSpec.parse(s)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if any(v < 0 for v in self.lambda2):
            raise ConfigError("lambda2 values must be nonnegative")
        if self.budget < 0:
            raise ConfigError("budget must be nonnegative")

    @property
    def specs(self) -> list[SwfSpec]:
        return [SwfSpec.parse(s) for s in self.swfs]

    def train_config(self, lambda2: float = 0.0, swf: SwfSpec | None = None) -> learn.TrainConfig:
        kw = dict(C=self.C, lambda1=self.lambda1, lambda2=lambda2, kappa=self.kappa,
                  max_iter=self.max_iter)
        if swf is not None:
            kw["swf"] = swf
        return learn.TrainConfig(**kw)

    def snapshot(self) -> dict:
        d = asdict(self)
        d["swfs"] = list(self.swfs)
        d["lambda2"] = list(self.lambda2)
        return d

    def config_hash(self) -> str:
        """Hash of every setting except the output directory."""
        d = self.snapshot()
        d.pop("output_dir")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def seeds(self) -> list[int]:
        return [self.seed_base + k for k in range(self.n_splits)]


_INT_KEYS = {"n_splits", "seed_base", "max_iter"}
_FLOAT_KEYS = {"C", "lambda1", "kappa", "budget"}
_KEYS = {f.name for f in fields(ExperimentConfig)}


def _coerce(key: str, value):
    if key not in _KEYS:
        raise ConfigError(f"unknown config key {key!r}")
    try:
        if key in _INT_KEYS:
            return int(value)
        if key in _FLOAT_KEYS:
            return float(value)
        if key == "swfs":
            items = value.split(";") if isinstance(value, str) else value
            return tuple(s.strip() for s in items if s.strip())
        if key == "lambda2":
            items = value.split(",") if isinstance(value, str) else value
            return tuple(float(v) for v in items)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {value!r}") from None
    return value


def parse_config_text(text: str) -> dict:
    """``key = value`` lines; ``#`` starts a comment; ``swfs`` is ``;``-separated."""
    out = {}
    for no, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {no}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = _coerce(key, value)
    return out


def load_config(path: str | Path | None = None, overrides: dict | None = None,
                environ: dict | None = None) -> ExperimentConfig:
    """File values, then overrides; the dataset falls back to the environment."""
    kw = {}
    if path is not None:
        try:
            kw.update(parse_config_text(Path(path).read_text()))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    for k, v in (overrides or {}).items():
        if v is not None:
            kw[k] = _coerce(k, v)
    env = os.environ if environ is None else environ
    if not kw.get("dataset") and env.get(DATASET_ENV):
        kw["dataset"] = env[DATASET_ENV]
    return ExperimentConfig(**kw)


# --- results ------------------------------------------------------------------

@dataclass
class Check:
    name: str
    passed: bool
    detail: str


@dataclass
class RunResult:
    command: str
    files: list[str] = field(default_factory=list)
    checks: list[Check] = field(default_factory=list)
    timings: dict[str, float] = field(default_factory=dict)
    values: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)


class _Writer:
    def __init__(self, cfg: ExperimentConfig, command: str, result: RunResult):
        self.root = Path(cfg.output_dir)
        self.root.mkdir(parents=True, exist_ok=True)
        self.header = [f"swfopt {__version__} command={command} config_hash={cfg.config_hash()}",
                       f"seed_base={cfg.seed_base} seeds={','.join(map(str, cfg.seeds()))}"]
        self.result = result

    def write(self, name: str, body: str, extra: Sequence[str] = ()) -> Path:
        path = self.root / name
        path.parent.mkdir(parents=True, exist_ok=True)
        head = "".join(f"# {line}\n" for line in [*self.header, *extra])
        path.write_text(head + body)
        self.result.files.append(name)
        return path

    def csv(self, name: str, header: Sequence[str], rows, extra: Sequence[str] = ()) -> Path:
        body = ",".join(header) + "\n" + "".join(",".join(map(_cell, r)) + "\n" for r in rows)
        return self.write(name, body, extra)


def _cell(v) -> str:
    if v is None:
        return "NA"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


class _Timer:
    def __init__(self, result: RunResult, stage: str):
        self.result, self.stage = result, stage

    def __enter__(self):
        self.t0 = time.perf_counter()

    def __exit__(self, *exc):
        self.result.timings[self.stage] = self.result.timings.get(self.stage, 0.0) + (
            time.perf_counter() - self.t0)


def _dataset_path(cfg: ExperimentConfig) -> Path:
    if not cfg.dataset:
        raise ConfigError(f"no dataset path given (use --dataset, a config file, or ${DATASET_ENV})")
    return Path(cfg.dataset)


def load_records(cfg: ExperimentConfig) -> list[data.CreditRecord]:
    path = _dataset_path(cfg)
    if not path.is_file():
        raise FileNotFoundError(f"dataset not found: {path}")
    return data.parse_german_credit(path)


@dataclass
class SplitData:
    plan: data.SplitPlan
    train: data.EncodedDataset
    test: data.EncodedDataset


def prepare_splits(cfg: ExperimentConfig, records) -> list[SplitData]:
    out = []
    for plan in data.make_splits(records, cfg.n_splits, cfg.seed_base, cfg.budget):
        ds = data.encode(records, plan.train_idx)
        out.append(SplitData(plan, ds.subset(plan.train_idx), ds.subset(plan.test_idx)))
    return out


# --- commands -------------------------------------------------------------------

def run_ingest(cfg: ExperimentConfig) -> RunResult:
    res = RunResult("ingest")
    with _Timer(res, "parse"):
        records = load_records(cfg)
    facts = data.dataset_facts(records)
    w = _Writer(cfg, "ingest", res)
    with _Timer(res, "encode"):
        enc = data.encode(records)
        data.write_encoded_csv(w.root / "encoded.csv", enc,
                               [*w.header, "standardization statistics fitted on all records"])
        res.files.append("encoded.csv")
    observed = {
        "records": facts["records"],
        "young_count": facts["young_count"],
        "old_count": facts["old_count"],
        "young_positive_pct": round(100 * facts["young_positive_share"]),
        "old_positive_pct": round(100 * facts["old_positive_share"]),
    }
    lines = [f"{k} {facts[k]!r}" for k in facts] + [f"{k} {observed[k]}" for k in
                                                   ("young_positive_pct", "old_positive_pct")]
    w.write("facts.txt", "\n".join(lines) + "\n")
    for k, want in EXPECTED_FACTS.items():
        res.checks.append(Check(f"fact {k}", observed[k] == want, f"{observed[k]} (expected {want})"))
    res.values["facts"] = facts
    return res


def _split_extra(sd: SplitData) -> list[str]:
    return [f"split_seed={sd.plan.seed}"]


def _write_plans(w: _Writer, splits: Sequence[SplitData]):
    for k, sd in enumerate(splits):
        w.write(f"splits/split_{k}.txt", sd.plan.to_text())


def run_table1(cfg: ExperimentConfig, records=None, splits=None) -> RunResult:
    res = RunResult("table1")
    records = records if records is not None else load_records(cfg)
    with _Timer(res, "split"):
        splits = splits if splits is not None else prepare_splits(cfg, records)
    w = _Writer(cfg, "table1", res)
    _write_plans(w, splits)
    reports, accs = [], []
    for k, sd in enumerate(splits):
        with _Timer(res, "train"):
            try:
                model = learn.train_standard(sd.train.X, sd.train.y, cfg.train_config(),
                                             sd.train.feature_names)
            except learn.TrainingError as exc:
                raise learn.TrainingError(f"split {k}: {exc}") from exc
        ev = learn.evaluate_model(model, sd.test.X, sd.test.y)
        rep = metrics.classification_group_report(ev.predictions, sd.test.y, sd.test.groups)
        reports.append(rep)
        accs.append(ev.accuracy)
        w.write(f"table1_split_{k}.csv", metrics.report_csv(rep), _split_extra(sd))
    agg = metrics.aggregate_reports(reports)
    w.write("table1_aggregate.csv", metrics.report_csv(agg))
    w.write("table1.txt", metrics.format_table(agg))
    for f, (young, old) in TABLE1_TARGETS.items():
        for g, target in (("young", young), ("old", old)):
            got = agg.mean[g][f]
            res.checks.append(Check(f"table1 {g} {f}", abs(got - target) <= TABLE1_TOL,
                                    f"{got:.2f} vs {target:.2f} (tol {TABLE1_TOL})"))
        res.checks.append(Check(f"table1 ordering {f}", agg.mean["old"][f] > agg.mean["young"][f],
                                f"old {agg.mean['old'][f]:.2f} > young {agg.mean['young'][f]:.2f}"))
    res.values.update(aggregate=agg, reports=reports, accuracy=accs)
    return res


def run_post(cfg: ExperimentConfig, records=None, splits=None) -> RunResult:
    res = RunResult("post")
    records = records if records is not None else load_records(cfg)
    with _Timer(res, "split"):
        splits = splits if splits is not None else prepare_splits(cfg, records)
    w = _Writer(cfg, "post", res)
    _write_plans(w, splits)
    specs = cfg.specs
    rows, ratios = [], {}
    for k, sd in enumerate(splits):
        with _Timer(res, "train"):
            model = learn.train_standard(sd.train.X, sd.train.y, cfg.train_config(),
                                         sd.train.feature_names)
        p_hat = learn.predict_proba(model, sd.test.X)
        problem = alloc.AllocationProblem(p_hat, sd.plan.requests, sd.plan.budget)
        qualified = sd.test.y == 1
        for spec in specs:
            with _Timer(res, "solve"), warnings.catch_warnings():
                warnings.simplefilter("ignore", alloc.DegeneratePlayerWarning)
                try:
                    sol = alloc.solve(problem, spec)
                except ValueError as exc:
                    raise alloc.AllocationError(f"{spec}: {exc}") from exc
            ar = metrics.approval_ratios(sol, sd.plan.requests, sd.test.groups, qualified,
                                         metrics.GROUP_ORDER)
            for g in metrics.GROUP_ORDER:
                ratios.setdefault((str(spec), g), []).append(ar[g].all_ratio)
                rows.append([k, sd.plan.seed, str(spec), g, ar[g].all_ratio, ar[g].qualified_ratio,
                             float(sol.total_granted)])
            res.checks.append(Check(f"post budget split {k} {spec}",
                                    sol.total_granted <= sd.plan.budget * (1 + alloc.FEAS_TOL),
                                    f"granted {sol.total_granted:.6f} <= {sd.plan.budget}"))
    w.csv("post_ratios.csv", ["split", "seed", "swf", "group", "all_ratio", "qualified_ratio",
                              "total_granted"], rows)
    summary = []
    for spec in specs:
        means = {g: float(np.mean(ratios[(str(spec), g)])) for g in metrics.GROUP_ORDER}
        summary.append([str(spec), means["young"], means["old"], abs(means["young"] - means["old"])])
    w.csv("post_summary.csv", ["swf", "young_all_ratio", "old_all_ratio", "gap"], summary)
    by = {r[0]: r for r in summary}
    if "utilitarian" in by:
        u = by["utilitarian"]
        res.checks.append(Check("post utilitarian favors old", u[2] > u[1],
                                f"old {u[2]:.4f} > young {u[1]:.4f}"))
        if "proportional" in by:
            pf = by["proportional"]
            res.checks.append(Check("post proportional narrows gap", pf[3] < u[3],
                                    f"{pf[3]:.4f} < {u[3]:.4f}"))
    res.values["summary"] = summary
    return res


def _cell_stats(model, sd: SplitData):
    ev = learn.evaluate_model(model, sd.test.X, sd.test.y)
    rep = metrics.classification_group_report(ev.predictions, sd.test.y, sd.test.groups)
    return rep, ev.accuracy


def run_inproc(cfg: ExperimentConfig, records=None, splits=None) -> RunResult:
    res = RunResult("inproc")
    records = records if records is not None else load_records(cfg)
    with _Timer(res, "split"):
        splits = splits if splits is not None else prepare_splits(cfg, records)
    w = _Writer(cfg, "inproc", res)
    _write_plans(w, splits)
    cells: dict[tuple[float, str], list] = {}
    for k, sd in enumerate(splits):
        with _Timer(res, "train"):
            base = learn.train_standard(sd.train.X, sd.train.y, cfg.train_config())
        cells.setdefault((0.0, "standard"), []).append(_cell_stats(base, sd))
        for lam in cfg.lambda2:
            for spec in cfg.specs:
                with _Timer(res, "train"), warnings.catch_warnings():
                    warnings.simplefilter("ignore", learn.ExperimentalSWFWarning)
                    model = learn.train_in_processing(sd.train.X, sd.train.y,
                                                      cfg.train_config(lam, spec))
                cells.setdefault((float(lam), str(spec)), []).append(_cell_stats(model, sd))
    rows, summary = [], []
    for (lam, tag) in sorted(cells):
        for k, (rep, acc) in enumerate(cells[(lam, tag)]):
            for g in metrics.GROUP_ORDER:
                r = rep.groups[g]
                rows.append([lam, tag, k, g, r.positive_rate, r.true_positive_rate,
                             r.true_negative_rate, acc])
        agg = metrics.aggregate_reports([c[0] for c in cells[(lam, tag)]])
        summary.append([lam, tag, agg.gap("positive_rate"), agg.gap("true_positive_rate"),
                        float(np.mean([c[1] for c in cells[(lam, tag)]]))])
    w.csv("inproc_cells.csv", ["lambda2", "swf", "split", "group", "positive_rate",
                               "true_positive_rate", "true_negative_rate", "accuracy"], rows)
    w.csv("inproc_summary.csv", ["lambda2", "swf", "positive_rate_gap", "true_positive_rate_gap",
                                 "accuracy"], summary)
    by = {(r[0], r[1]): r for r in summary}
    std = by[(0.0, "standard")]
    for spec in cfg.specs:
        key = (1.0, str(spec))
        if key in by:
            r = by[key]
            res.checks.append(Check(f"inproc gaps shrink {spec}", r[2] < std[2] and r[3] < std[3],
                                    f"PR gap {r[2]:.2f} vs {std[2]:.2f}; TPR gap {r[3]:.2f} vs {std[3]:.2f}"))
    for (lam, tag), r in sorted(by.items()):
        if tag == "standard":
            continue
        drop = std[4] - r[4]
        res.checks.append(Check(f"inproc accuracy lambda2={lam!r} {tag}", drop <= ACCURACY_DROP_TOL,
                                f"accuracy {r[4]:.4f} vs standard {std[4]:.4f}"))
    res.values["summary"] = summary
    return res


COMMANDS: dict[str, Callable[[ExperimentConfig], RunResult]] = {
    "ingest": run_ingest,
    "table1": run_table1,
    "post": run_post,
    "inproc": run_inproc,
}


# --- manifests and replay ---------------------------------------------------------

def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(cfg: ExperimentConfig, result: RunResult) -> Path:
    root = Path(cfg.output_dir)
    manifest = {
        "format": "swfopt-run-manifest v1",
        "command": result.command,
        "version": __version__,
        "config": cfg.snapshot(),
        "config_hash": cfg.config_hash(),
        "seeds": cfg.seeds(),
        "artifacts": {name: _sha256(root / name) for name in sorted(result.files)},
        "timings_seconds": {k: round(v, 6) for k, v in sorted(result.timings.items())},
        "checks": [asdict(c) for c in result.checks],
    }
    path = root / f"{result.command}{MANIFEST_SUFFIX}"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def run_command(command: str, cfg: ExperimentConfig) -> RunResult:
    result = COMMANDS[command](cfg)
    write_manifest(cfg, result)
    return result


def replay(manifest_path: str | Path, output_dir: str | None = None) -> tuple[RunResult, list[str]]:
    """Rerun a recorded command and list artifacts whose bytes differ."""
    manifest = json.loads(Path(manifest_path).read_text())
    snap = dict(manifest["config"])
    snap["swfs"] = tuple(snap["swfs"])
    snap["lambda2"] = tuple(snap["lambda2"])
    cfg = ExperimentConfig(**snap)
    if output_dir is not None:
        cfg = replace(cfg, output_dir=output_dir)
    if cfg.config_hash() != manifest["config_hash"]:
        raise ConfigError("manifest config does not match its recorded hash")
    result = run_command(manifest["command"], cfg)
    root = Path(cfg.output_dir)
    mismatched = [name for name, digest in manifest["artifacts"].items()
                  if not (root / name).is_file() or _sha256(root / name) != digest]
    return result, mismatched
