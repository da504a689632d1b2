"""Metrics, evaluation reports, experiment sweeps and feature/label correlation."""

from __future__ import annotations

import configparser
import csv
import io as _io
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .dataset import (
    DatasetError,
    MetaDataset,
    SamplingConfig,
    load_meta_dataset,
    load_video_order,
    prepare,
    split_test_groups,
)
from .features import FeatureSchema, PedestrianSample
from .fuzzy import ActivationTrace, CrossingLabel, FisModel, infer
from .io import DEFAULT_SEED, atomic_write_text, config_digest
from .mining import MiningConfig, train
from .modelfile import save_model

log = logging.getLogger(__name__)

FACTORS = ("quantity", "randomness", "selection", "ablation", "mix")

# Short names used in generated ablation row labels (e.g. "J14K-NProximity").
ABLATION_LABELS = {
    "distance": "Distance",
    "proximity": "Proximity",
    "action": "Action",
    "gaze": "Attention",
    "body_orientation": "Orientation",
    "zebra_crossing": "ZebraCross",
    "motion_ability": "MotionAbility",
    "age": "Age",
}


# --------------------------------------------------------------------------
# metrics
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts with CROSSING as the positive class."""

    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn, self.tn + other.tn)

    def swapped(self) -> "ConfusionMatrix":
        """Same counts with NOT_CROSSING treated as positive."""
        return ConfusionMatrix(self.tn, self.fn, self.fp, self.tp)


def confusion(predictions: Sequence[int], labels: Sequence[int]) -> ConfusionMatrix:
    if len(predictions) != len(labels):
        raise ValueError(f"length mismatch: {len(predictions)} predictions vs {len(labels)} labels")
    if not labels:
        raise ValueError("need at least one prediction/label pair")
    tp = fp = fn = tn = 0
    for p, y in zip(predictions, labels):
        p, y = int(p), int(y)
        if p not in (0, 1) or y not in (0, 1):
            raise ValueError(f"class codes must be 0 or 1, got prediction {p} / label {y}")
        if p == 1 and y == 1:
            tp += 1
        elif p == 1:
            fp += 1
        elif y == 1:
            fn += 1
        else:
            tn += 1
    return ConfusionMatrix(tp, fp, fn, tn)


def _ratio(num: int, den: int) -> float:
    # 0/0 is defined as 0
    return num / den if den else 0.0


def precision(cm: ConfusionMatrix) -> float:
    return _ratio(cm.tp, cm.tp + cm.fp)


def recall(cm: ConfusionMatrix) -> float:
    return _ratio(cm.tp, cm.tp + cm.fn)


def f1_score(cm: ConfusionMatrix) -> float:
    """Harmonic mean of precision and recall; every undefined ratio counts as 0."""
    p, r = precision(cm), recall(cm)
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


def macro_f1(cm: ConfusionMatrix) -> float:
    return (f1_score(cm) + f1_score(cm.swapped())) / 2


# --------------------------------------------------------------------------
# evaluation
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class EvaluationReport:
    group: str
    conf: str
    rules: int
    confusion: ConfusionMatrix
    abstentions: int
    seed: int | None = None
    traces: tuple[tuple[PedestrianSample, CrossingLabel, ActivationTrace], ...] = field(default=(), compare=False,
                                                                                      repr=False)

    @property
    def f1(self) -> float:
        return f1_score(self.confusion)

    @property
    def precision(self) -> float:
        return precision(self.confusion)

    @property
    def recall(self) -> float:
        return recall(self.confusion)

    @property
    def macro_f1(self) -> float:
        return macro_f1(self.confusion)

    def as_row(self) -> dict[str, Any]:
        cm = self.confusion
        return {
            "conf": self.conf, "group": self.group, "rules": self.rules, "n": cm.total,
            "f1": _fmt(self.f1), "precision": _fmt(self.precision), "recall": _fmt(self.recall),
            "macro_f1": _fmt(self.macro_f1), "tp": cm.tp, "fp": cm.fp, "fn": cm.fn, "tn": cm.tn,
            "abstentions": self.abstentions, "seed": "" if self.seed is None else self.seed,
        }


def _fmt(x: float) -> str:
    return f"{x:.4f}"


def evaluate(
    model: FisModel,
    test_group: MetaDataset | Sequence[PedestrianSample],
    group: str = "all",
    conf: str = "",
    seed: int | None = None,
    keep_traces: bool = False,
) -> EvaluationReport:
    """Run the model over a test group. Abstentions count as NOT_CROSSING predictions."""
    samples = test_group.samples if isinstance(test_group, MetaDataset) else tuple(test_group)
    if not samples:
        raise ValueError(f"test group {group!r} is empty")
    preds, labels, traces = [], [], []
    abstentions = 0
    for s in samples:
        label, trace = infer(model, s)
        preds.append(int(label))
        labels.append(int(s.label))
        abstentions += trace.abstained
        if keep_traces:
            traces.append((s, label, trace))
    return EvaluationReport(group, conf, len(model.rules), confusion(preds, labels), abstentions, seed,
                            tuple(traces))


TRACE_HEADER = "group\tvideo_id\tpedestrian_id\tframe_index\tlabel\tpredicted\tabstained\tscore\tactivated_rules"


def trace_lines(report: EvaluationReport, header: bool = True) -> str:
    """One tab-separated line per prediction: ids, truth, prediction, score, activated rules."""
    out = [TRACE_HEADER] if header else []
    for s, label, trace in report.traces:
        out.append("\t".join([
            report.group, s.video_id, s.pedestrian_id, str(s.frame_index), str(int(s.label)), str(int(label)),
            "1" if trace.abstained else "0", repr(trace.scores[label]),
            ";".join(str(r) for r in trace.activated),
        ]))
    return "\n".join(out) + "\n"


def details_csv(reports: Sequence[EvaluationReport]) -> str:
    buf = _io.StringIO()
    rows = [r.as_row() for r in reports]
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


# --------------------------------------------------------------------------
# result tables (Conf, Rules, F1 per test group)
# --------------------------------------------------------------------------


@dataclass
class ResultRow:
    conf: str
    rules: int | None
    f1: dict[str, float] = field(default_factory=dict)
    error: str | None = None
    provenance: dict[str, Any] = field(default_factory=dict)


def table_csv(rows: Sequence[ResultRow], groups: Sequence[str], header: Mapping[str, Any] | None = None) -> str:
    buf = _io.StringIO()
    for key, value in (header or {}).items():
        buf.write(f"# {key}: {value}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["Conf", "Rules", *groups])
    for r in rows:
        if r.error is not None:
            writer.writerow([r.conf, "error", *("" for _ in groups)])
        else:
            writer.writerow([r.conf, r.rules, *(_f2(r.f1.get(g)) for g in groups)])
    return buf.getvalue()


def _f2(x: float | None) -> str:
    return "" if x is None else f"{x:.2f}"


def table_text(rows: Sequence[ResultRow], groups: Sequence[str]) -> str:
    """Aligned, human-readable version of :func:`table_csv`."""
    cells = [["Conf", "R", *(f"F1 {g}" for g in groups)]]
    for r in rows:
        if r.error is not None:
            cells.append([r.conf, "-", *("error" if i == 0 else "" for i in range(len(groups)))])
        else:
            cells.append([r.conf, str(r.rules), *(_f2(r.f1.get(g)) for g in groups)])
    widths = [max(len(row[i]) for row in cells) for i in range(len(cells[0]))]
    lines = []
    for n, row in enumerate(cells):
        lines.append("  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(row, widths))))
        if n == 0:
            lines.append("-" * len(lines[0]))
    errors = [r for r in rows if r.error is not None]
    for r in errors:
        lines.append(f"! {r.conf}: {r.error}")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# experiment plans
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TestGroupSpec:
    __test__ = False  # not a pytest class

    name: str
    source: str
    group: str = "all"


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    sampling: SamplingConfig
    mining: MiningConfig = MiningConfig()
    exclude: tuple[str, ...] = ()


@dataclass
class ExperimentPlan:
    """A named factor sweep: configurations to train, groups to test on, source files."""

    name: str
    factor: str
    configs: list[ExperimentConfig]
    tests: list[TestGroupSpec]
    sources: dict[str, Path] = field(default_factory=dict)
    video_orders: dict[str, Path] = field(default_factory=dict)
    schema: FeatureSchema = field(default_factory=FeatureSchema)

    def __post_init__(self) -> None:
        if self.factor not in FACTORS:
            raise ValueError(f"factor must be one of {FACTORS}, got {self.factor!r}")
        names = [c.name for c in self.configs]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate configuration names in plan: {names}")


def ablation_configs(baseline: ExperimentConfig, features: Sequence[str]) -> list[ExperimentConfig]:
    """Baseline plus one configuration per dropped feature (``<base>-N<Feature>``)."""
    out = [baseline]
    for f in features:
        label = ABLATION_LABELS.get(f, "".join(p.title() for p in f.split("_")))
        out.append(ExperimentConfig(f"{baseline.name}-N{label}", baseline.sampling, baseline.mining,
                                    baseline.exclude + (f,)))
    return out


def randomness_configs(baseline: ExperimentConfig, seeds: Sequence[int]) -> list[ExperimentConfig]:
    """Baseline plus one randomly ordered draw per seed (``<base>R1``, ``<base>R2``, ...)."""
    out = [baseline]
    for i, seed in enumerate(seeds, 1):
        sampling = SamplingConfig(baseline.sampling.target_record_count, "random", seed,
                                  baseline.sampling.frame_restrictions, baseline.sampling.balance,
                                  baseline.sampling.mix)
        out.append(ExperimentConfig(f"{baseline.name}R{i}", sampling, baseline.mining, baseline.exclude))
    return out


_SAMPLING_KEYS = {"target_record_count", "ordering", "seed", "frame_restrictions", "balance", "mix"}
_MINING_KEYS = set(MiningConfig.__dataclass_fields__)


def _split_options(options: Mapping[str, str], where: str) -> tuple[dict, dict, tuple[str, ...]]:
    sampling, mining, exclude = {}, {}, ()
    for key, value in options.items():
        key = key.replace("-", "_")
        if key == "train":
            sampling["mix"] = value
        elif key == "exclude":
            exclude = tuple(x.strip() for x in value.split(",") if x.strip())
        elif key in _SAMPLING_KEYS:
            sampling[key] = value
        elif key in _MINING_KEYS:
            mining[key] = value
        else:
            raise ValueError(f"{where}: unknown option {key!r}")
    return sampling, mining, exclude


def _expand(configs: list[ExperimentConfig], baseline: ExperimentConfig,
            generated: list[ExperimentConfig]) -> list[ExperimentConfig]:
    """Put ``generated`` (which starts with the baseline) where the baseline was."""
    i = next(k for k, c in enumerate(configs) if c is baseline)
    return configs[:i] + generated + configs[i + 1:]


def load_plan(path: str | Path) -> ExperimentPlan:
    """Parse an INI-style plan file. See README for the layout."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"plan file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";",))
    parser.optionxform = str
    parser.read_string(path.read_text(encoding="utf-8"), source=str(path))
    base = path.parent

    if not parser.has_section("plan"):
        raise ValueError(f"{path}: missing [plan] section")
    head = parser["plan"]
    schema = FeatureSchema.load(base / head["schema"]) if "schema" in head else FeatureSchema()
    sources = {k: base / v for k, v in parser["sources"].items()} if parser.has_section("sources") else {}
    orders = {k: base / v for k, v in parser["video_order"].items()} if parser.has_section("video_order") else {}
    tests = []
    if parser.has_section("tests"):
        for name, spec in parser["tests"].items():
            source, _, group = spec.partition(":")
            tests.append(TestGroupSpec(name, source.strip(), (group or "all").strip()))

    default_seed = int(head.get("seed", DEFAULT_SEED))
    defaults_mining = dict(parser["mining"]) if parser.has_section("mining") else {}
    configs: list[ExperimentConfig] = []
    for section in parser.sections():
        if not section.startswith("config "):
            continue
        name = section[len("config "):].strip()
        sampling, mining, exclude = _split_options(parser[section], section)
        sampling.setdefault("seed", default_seed)
        if "mix" not in sampling:
            raise ValueError(f"{path}: [{section}] needs 'train = <source>:<count>[, ...]'")
        mining = {**defaults_mining, **mining}
        configs.append(ExperimentConfig(name, SamplingConfig.from_mapping(sampling),
                                        MiningConfig.from_mapping(mining), exclude))
    by_name = {c.name: c for c in configs}

    def _baseline(section: str) -> ExperimentConfig:
        ref = parser[section].get("baseline", "")
        if ref not in by_name:
            raise ValueError(f"{path}: [{section}] baseline {ref!r} is not a configured [config ...]")
        return by_name[ref]

    if parser.has_section("ablation"):
        b = _baseline("ablation")
        feats = [f.strip() for f in parser["ablation"].get("features", "").split(",") if f.strip()]
        if not feats:
            feats = [f.name for f in schema.active]
        configs = _expand(configs, b, ablation_configs(b, feats))
    if parser.has_section("randomness"):
        b = _baseline("randomness")
        seeds = [int(s) for s in parser["randomness"].get("seeds", "1,2,3").split(",") if s.strip()]
        configs = _expand(configs, b, randomness_configs(b, seeds))
    return ExperimentPlan(head.get("name", path.stem), head.get("factor", "quantity"), configs, tests,
                          sources, orders, schema)


@dataclass
class ExperimentResult:
    plan: str
    factor: str
    groups: list[str]
    rows: list[ResultRow]

    def csv(self) -> str:
        return table_csv(self.rows, self.groups, {"plan": self.plan, "factor": self.factor})

    def text(self) -> str:
        return table_text(self.rows, self.groups)


def run_experiment(
    plan: ExperimentPlan,
    datasets: Mapping[str, MetaDataset] | None = None,
    out_dir: str | Path | None = None,
) -> ExperimentResult:
    """Sample, train and evaluate every configuration; a failing row is recorded, not fatal.

    ``datasets`` may pre-supply loaded sources by name; anything else is read
    from ``plan.sources``. With ``out_dir``, each row's model and provenance
    record are written under it.
    """
    cache: dict[str, MetaDataset] = dict(datasets or {})

    def source(name: str) -> MetaDataset:
        if name not in cache:
            if name not in plan.sources:
                raise DatasetError(f"unknown source {name!r}")
            order = load_video_order(plan.video_orders[name]) if name in plan.video_orders else None
            ds = load_meta_dataset(plan.sources[name], plan.schema, order)
            cache[name] = MetaDataset(ds.samples, name, ds.video_order, ds.rejected, ds.notes, ds.header)
        return cache[name]

    groups = [t.name for t in plan.tests]
    rows = []
    for cfg in plan.configs:
        prov: dict[str, Any] = {
            "conf": cfg.name,
            "factor": plan.factor,
            "seed": cfg.sampling.seed,
            "sampling": cfg.sampling.to_dict(),
            "mining": cfg.mining.to_dict(),
            "mining_digest": config_digest(cfg.mining.to_dict()),
            "excluded_features": list(cfg.exclude),
        }
        try:
            needed = {name for name, _ in cfg.sampling.mix}
            data = prepare({n: source(n) for n in sorted(needed)}, cfg.sampling)
            prov["training_samples"] = len(data)
            prov["training_sources"] = {name: count for name, count in cfg.sampling.mix}
            prov["training_tags"] = data.tag_counts()
            schema = plan.schema.without(*cfg.exclude) if cfg.exclude else plan.schema
            model = train(data.samples, schema, cfg.mining)
            f1s = {}
            metrics = {}
            for t in plan.tests:
                test = split_test_groups(source(t.source))[t.group]
                report = evaluate(model, test, t.name, cfg.name, cfg.sampling.seed)
                f1s[t.name] = report.f1
                metrics[t.name] = report.as_row()
            prov["rules"] = len(model.rules)
            prov["evaluation"] = metrics
            row = ResultRow(cfg.name, len(model.rules), f1s, None, prov)
            if out_dir is not None:
                save_model(model, Path(out_dir) / "models" / f"{cfg.name}.json")
        except Exception as exc:  # noqa: BLE001 - row isolation
            log.warning("configuration %s failed: %s", cfg.name, exc)
            prov["error"] = f"{type(exc).__name__}: {exc}"
            row = ResultRow(cfg.name, None, {}, prov["error"], prov)
        rows.append(row)
        if out_dir is not None:
            atomic_write_text(Path(out_dir) / "provenance" / f"{cfg.name}.json",
                              json.dumps(row.provenance, indent=2, sort_keys=True) + "\n")
    return ExperimentResult(plan.name, plan.factor, groups, rows)


# --------------------------------------------------------------------------
# correlation
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Correlation:
    feature: str
    value: float
    constant: bool = False


def feature_codes(samples: Sequence[PedestrianSample], spec) -> np.ndarray:
    """Continuous values as-is; categories as their index in the schema's declared order."""
    if spec.kind == "continuous":
        return np.array([float(s.features[spec.name]) for s in samples])
    index = {c: i for i, c in enumerate(spec.domain)}
    return np.array([float(index[s.features[spec.name]]) for s in samples])


def _pearson(x: np.ndarray, y: np.ndarray) -> float | None:
    dx, dy = x - x.mean(), y - y.mean()
    sxx, syy = float(np.dot(dx, dx)), float(np.dot(dy, dy))
    if sxx == 0 or syy == 0:
        return None
    r = float(np.dot(dx, dy)) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def correlate(dataset: MetaDataset | Sequence[PedestrianSample],
              schema: FeatureSchema | None = None) -> list[Correlation]:
    """Point-biserial correlation of every active feature with the crossing label."""
    schema = schema or FeatureSchema()
    samples = dataset.samples if isinstance(dataset, MetaDataset) else tuple(dataset)
    if len(samples) < 2:
        raise ValueError("correlation needs at least 2 samples")
    y = np.array([float(int(s.label)) for s in samples])
    if np.all(y == y[0]):
        raise ValueError("correlation needs both classes present")
    out = []
    for spec in schema.active:
        r = _pearson(feature_codes(samples, spec), y)
        out.append(Correlation(spec.name, 0.0, True) if r is None else Correlation(spec.name, r))
    return out


def correlation_table(correlations: Sequence[Correlation]) -> str:
    lines = ["feature\tcorrelation\tconstant"]
    lines += [f"{c.feature}\t{c.value:.4f}\t{'yes' if c.constant else 'no'}" for c in correlations]
    return "\n".join(lines) + "\n"
