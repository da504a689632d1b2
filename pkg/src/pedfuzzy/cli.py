"""Command-line front end: prepare, train, evaluate, experiment, explain, synth, correlate."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
import warnings
from pathlib import Path
from typing import Sequence

from . import __version__
from .dataset import (
    SamplingConfig,
    dumps_meta_dataset,
    load_meta_dataset,
    load_video_order,
    parse_count,
    prepare,
    split_test_groups,
)
from .evaluation import (
    ResultRow,
    correlate,
    correlation_table,
    details_csv,
    evaluate,
    load_plan,
    run_experiment,
    table_csv,
    table_text,
    trace_lines,
)
from .explain import explain_prediction, ledger_for, ledger_records, ledger_text, plot_data
from .features import FeatureSchema
from .io import atomic_write_text, config_digest, provenance, read_key_values
from .mining import MiningConfig, train
from .modelfile import dumps_model, load_model
from .synthetic import PlantedSpec, default_planted_model, generate, load_planted_spec

log = logging.getLogger("pedfuzzy")


def _schema(path: str | None) -> FeatureSchema:
    return FeatureSchema.load(path) if path else FeatureSchema()


def _named_paths(items: Sequence[str]) -> dict[str, Path]:
    """``name=path`` or bare ``path`` (named by its stem)."""
    out: dict[str, Path] = {}
    for item in items:
        name, sep, path = item.partition("=")
        if not sep:
            name, path = Path(item).stem, item
        if name in out:
            raise ValueError(f"input name {name!r} given twice")
        out[name] = Path(path)
    return out


def _display(pairs: Sequence[str] | None) -> dict[str, str] | None:
    if not pairs:
        return None
    out = {}
    for p in pairs:
        key, sep, value = p.partition("=")
        if not sep:
            raise ValueError(f"--display expects key=value, got {p!r}")
        out[key.strip()] = value.strip()
    return out


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def cmd_prepare(args: argparse.Namespace) -> int:
    schema = _schema(args.schema)
    values = {}
    if args.config:
        values.update(read_key_values(args.config))
    if args.seed is not None:
        values["seed"] = args.seed
    if args.target is not None:
        values["target_record_count"] = args.target
    if args.ordering is not None:
        values["ordering"] = args.ordering
    if args.no_frame_restrictions:
        values["frame_restrictions"] = "off"
    if args.no_balance:
        values["balance"] = "off"
    config = SamplingConfig.from_mapping(values)
    orders = {k: load_video_order(p) for k, p in _named_paths(args.video_order or []).items()}
    inputs = _named_paths(args.inputs)
    sources = {}
    for name, path in inputs.items():
        sources[name] = load_meta_dataset(path, schema, orders.get(name))
        for row, problem in sources[name].rejected:
            log.warning("%s: rejected %s", path, problem)
    prepared = prepare(sources, config)
    prov = provenance(config.to_dict(), config.seed, sampling=config.to_dict(),
                      inputs={n: {"file": p.name, "rows": len(sources[n]), "rejected": len(sources[n].rejected)}
                              for n, p in inputs.items()},
                      output_rows=len(prepared), tags=prepared.tag_counts())
    atomic_write_text(args.output, dumps_meta_dataset(prepared, schema, prov))
    print(f"wrote {len(prepared)} samples to {args.output}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    schema = _schema(args.schema)
    if args.exclude:
        schema = schema.without(*args.exclude)
    config = MiningConfig.load(args.config) if args.config else MiningConfig()
    if args.seed is not None:
        config = config.replace(random_seed=args.seed)
    data = load_meta_dataset(args.data, schema)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        model = train(data.samples, schema, config)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    atomic_write_text(args.output, dumps_model(model))
    print(f"trained {len(model.rules)} rules from {len(data)} samples -> {args.output}")
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    schema = _schema(args.schema)
    groups = [g.strip() for g in args.groups.split(",") if g.strip()]
    conf = args.conf or Path(args.model).stem
    seed = model.metadata.get("provenance", {}).get("seed")
    reports = []
    for name, path in _named_paths(args.data).items():
        split = split_test_groups(load_meta_dataset(path, schema))
        for g in groups:
            if g not in split:
                raise ValueError(f"unknown group {g!r}; expected all or beh")
            reports.append(evaluate(model, split[g], f"{name}_{g}", conf, seed, keep_traces=bool(args.traces)))
    row = ResultRow(conf, len(model.rules), {r.group: r.f1 for r in reports})
    names = [r.group for r in reports]
    header = {"model": Path(args.model).name, "model_digest": config_digest({"model": dumps_model(model)}),
              "seed": seed, "tool_version": __version__}
    atomic_write_text(args.output, table_csv([row], names, header))
    if args.table:
        atomic_write_text(args.table, table_text([row], names))
    if args.details:
        atomic_write_text(args.details, details_csv(reports))
    if args.traces:
        atomic_write_text(args.traces, "".join(trace_lines(r, header=i == 0) for i, r in enumerate(reports)))
    print(table_text([row], names), end="")
    return 0


def cmd_experiment(args: argparse.Namespace) -> int:
    plan = load_plan(args.plan)
    out = Path(args.output)
    result = run_experiment(plan, out_dir=out)
    atomic_write_text(out / "results.csv", result.csv())
    atomic_write_text(out / "results.txt", result.text())
    print(result.text(), end="")
    failed = [r for r in result.rows if r.error is not None]
    if failed:
        print(f"{len(failed)} of {len(result.rows)} configuration(s) failed", file=sys.stderr)
    return 1 if result.rows and len(failed) == len(result.rows) else 0


def _parse_sample(text: str, model) -> dict:
    values = {}
    for item in text.split(","):
        key, sep, value = item.partition("=")
        if not sep:
            raise ValueError(f"--sample expects name=value pairs, got {item!r}")
        values[key.strip()] = value.strip()
    out = {}
    for var in model.variables:
        if var.name in values:
            out[var.name] = float(values[var.name]) if var.kind == "continuous" else values[var.name]
    return out


def cmd_explain(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    display = _display(args.display)
    if args.sample:
        text = explain_prediction(model, _parse_sample(args.sample, model), display)
    else:
        data = load_meta_dataset(args.data, _schema(args.schema))
        if args.row is not None:
            if not 1 <= args.row <= len(data):
                raise ValueError(f"--row must be in 1..{len(data)}")
            text = explain_prediction(model, data.samples[args.row - 1], display)
        else:
            ledger = ledger_for(model, data.samples)
            text = ledger_text(ledger, model, args.top, display)
            if args.records:
                atomic_write_text(args.records, ledger_records(ledger, model, display))
            if args.plot_data:
                atomic_write_text(args.plot_data, plot_data(ledger, args.top))
    if args.output:
        atomic_write_text(args.output, text)
    print(text, end="")
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    schema = _schema(args.schema)
    spec = load_planted_spec(args.spec, schema) if args.spec else PlantedSpec(default_planted_model(schema))
    if args.seed is not None:
        spec = dataclasses.replace(spec, seed=args.seed)
    data = generate(spec)
    spec_record = {k: v for k, v in spec.__dict__.items() if k != "planted"}
    spec_record["samplers"] = dict(spec.samplers)
    prov = provenance(spec_record, spec.seed, **data.header)
    atomic_write_text(args.output, dumps_meta_dataset(data, schema, prov))
    if args.model_out:
        atomic_write_text(args.model_out, dumps_model(spec.planted))
    print(f"wrote {len(data)} synthetic samples to {args.output}")
    return 0


def cmd_correlate(args: argparse.Namespace) -> int:
    schema = _schema(args.schema)
    data = load_meta_dataset(args.data, schema)
    text = correlation_table(correlate(data, schema))
    if args.output:
        atomic_write_text(args.output, text)
    print(text, end="")
    return 0


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pedfuzzy", description=__doc__)
    p.add_argument("--version", action="version", version=f"pedfuzzy {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("prepare", help="validate, frame-restrict and balance meta-datasets")
    s.add_argument("inputs", nargs="+", help="meta-dataset files, optionally as name=path")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--schema")
    s.add_argument("--config", help="sampling config (key = value)")
    s.add_argument("--video-order", action="append", help="video order file, optionally as name=path")
    s.add_argument("--seed", type=int)
    s.add_argument("--target", type=parse_count, help="target record count, e.g. 2000 or 8K")
    s.add_argument("--ordering", choices=["quality-sorted", "random"])
    s.add_argument("--no-frame-restrictions", action="store_true")
    s.add_argument("--no-balance", action="store_true")
    s.set_defaults(func=cmd_prepare)

    s = sub.add_parser("train", help="mine a fuzzy rule base and write a model file")
    s.add_argument("data")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--schema")
    s.add_argument("--config", help="mining config (key = value)")
    s.add_argument("--exclude", nargs="*", default=[], help="features to leave out")
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("evaluate", help="score a model on test groups")
    s.add_argument("model")
    s.add_argument("data", nargs="+", help="test meta-datasets, optionally as name=path")
    s.add_argument("-o", "--output", required=True, help="report CSV (Conf, Rules, F1 per group)")
    s.add_argument("--groups", default="all,beh")
    s.add_argument("--conf", help="configuration label for the report row")
    s.add_argument("--schema")
    s.add_argument("--table", help="also write an aligned text table here")
    s.add_argument("--details", help="per-group metrics CSV")
    s.add_argument("--traces", help="per-prediction trace file")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("experiment", help="run an experiment plan")
    s.add_argument("plan")
    s.add_argument("-o", "--output", required=True, help="output directory")
    s.set_defaults(func=cmd_experiment)

    s = sub.add_parser("explain", help="explain one prediction or rank rule activations over a dataset")
    s.add_argument("model")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", help="meta-dataset to explain")
    src.add_argument("--sample", help="single sample as name=value,name=value")
    s.add_argument("--row", type=int, help="explain only this 1-based row of --data")
    s.add_argument("--top", type=int, default=10)
    s.add_argument("--display", action="append", help="display name, e.g. zebra_crossing=CrossLevel")
    s.add_argument("--schema")
    s.add_argument("-o", "--output")
    s.add_argument("--records", help="structured per-rule CSV")
    s.add_argument("--plot-data", help="two-column rule/percentage table")
    s.set_defaults(func=cmd_explain)

    s = sub.add_parser("synth", help="generate a meta-dataset from a planted rule base")
    s.add_argument("spec", nargs="?", help="planted spec file (key = value); defaults if omitted")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--model-out", help="write the planted model here")
    s.add_argument("--schema")
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("correlate", help="feature/label correlation of a meta-dataset")
    s.add_argument("data")
    s.add_argument("--schema")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_correlate)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - every failure becomes a diagnostic + nonzero exit
        if args.verbose:
            raise
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
