"""Labelled meta-datasets generated from a known (planted) rule base.

Used as ground truth for the miner: if the planted rules live in the same
vocabulary the miner partitions, a good miner recovers them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .dataset import MetaDataset
from .evaluation import confusion, f1_score
from .features import FeatureSchema, PedestrianSample
from .fuzzy import CrossingLabel, FisModel, FuzzyRule, LinguisticVariable, infer
from .io import DEFAULT_SEED, parse_bool, read_key_values
from .mining import MiningConfig, partition_variables

SAMPLERS = ("uniform", "terms")


class GenerationError(RuntimeError):
    pass


def planted_variables(schema: FeatureSchema | None = None, distance_max: float = 50.0,
                      terms: int = 3) -> list[LinguisticVariable]:
    schema = (schema or FeatureSchema()).with_bounds({"distance": (0.0, distance_max)})
    return partition_variables(schema, MiningConfig(terms_per_continuous_variable=terms))


def default_planted_model(schema: FeatureSchema | None = None, distance_max: float = 50.0) -> FisModel:
    """Five rules over the default vocabulary, mixing one- and two-term antecedents."""
    schema = schema or FeatureSchema()
    variables = planted_variables(schema, distance_max)
    idx = {v.name: i for i, v in enumerate(variables)}

    def ant(**terms: str) -> tuple[tuple[int, int], ...]:
        return tuple((idx[n], variables[idx[n]].term_index(t)) for n, t in terms.items())

    C, N = CrossingLabel.CROSSING, CrossingLabel.NOT_CROSSING
    rules = (
        FuzzyRule(ant(proximity="near", zebra_crossing="present"), C, 1.0, 1),
        FuzzyRule(ant(proximity="far"), N, 1.0, 2),
        FuzzyRule(ant(action="run", distance="too near"), C, 0.9, 3),
        FuzzyRule(ant(gaze="not_looking", proximity="medium"), N, 0.8, 4),
        FuzzyRule(ant(action="walk", zebra_crossing="present"), C, 0.7, 5),
    )
    return FisModel(tuple(variables), rules, display=schema.display_names())


@dataclass(frozen=True)
class PlantedSpec:
    planted: FisModel
    samples_per_class: int = 2500
    label_noise_rate: float = 0.0
    seed: int = DEFAULT_SEED
    samplers: Mapping[str, str] = field(default_factory=dict)
    default_sampler: str = "uniform"
    irrelevant_rate: float = 0.1
    batch_size: int = 1000
    dataset_tag: str = "synthetic"
    max_batches: int = 10_000
    keep_abstained: bool = False

    def __post_init__(self) -> None:
        if self.samples_per_class <= 0:
            raise ValueError("samples_per_class must be > 0")
        if not 0.0 <= self.label_noise_rate < 0.5:
            raise ValueError("label_noise_rate must be in [0, 0.5)")
        if not 0.0 <= self.irrelevant_rate <= 1.0:
            raise ValueError("irrelevant_rate must be in [0, 1]")
        for name, sampler in {**self.samplers, "*": self.default_sampler}.items():
            if sampler not in SAMPLERS:
                raise ValueError(f"sampler for {name!r} must be one of {SAMPLERS}")
        if not self.planted.rules:
            raise ValueError("planted model has no rules")


def _draw(var: LinguisticVariable, sampler: str, rng: np.random.Generator, n: int) -> list[Any]:
    if var.kind == "categorical":
        picks = rng.integers(0, len(var.domain), size=n)
        return [var.domain[i] for i in picks]
    lo, hi = var.domain
    if sampler == "uniform" or lo == hi:
        return [float(x) for x in rng.uniform(lo, hi, size=n)]
    terms = rng.integers(0, len(var.terms), size=n)
    out = []
    for t in terms:
        a, b, c = var.terms[t].membership.params[:3]
        out.append(float(rng.triangular(a, b, c)) if a < c else float(b))
    return out


def generate(spec: PlantedSpec) -> MetaDataset:
    """Sample features, label them with the planted model, and balance by rejection.

    Draws on which the planted model abstains are discarded, unless
    ``keep_abstained`` is set, in which case they keep the abstention label
    (not crossing). Labels are then
    flipped for exactly ``round(noise * n)`` samples of each class, so the
    output stays exactly balanced.
    """
    model = spec.planted
    n = spec.samples_per_class
    accepted: list[PedestrianSample] = []
    counts = {CrossingLabel.CROSSING: 0, CrossingLabel.NOT_CROSSING: 0}
    drawn = abstained = 0
    batch = 0
    while min(counts.values()) < n:
        if batch >= spec.max_batches:
            raise GenerationError(f"could not fill both classes after {batch} batches (counts={counts})")
        rng = np.random.default_rng([spec.seed, batch])
        columns = {v.name: _draw(v, spec.samplers.get(v.name, spec.default_sampler), rng, spec.batch_size)
                   for v in model.variables}
        relevant = rng.random(spec.batch_size) >= spec.irrelevant_rate
        for j in range(spec.batch_size):
            features = {name: col[j] for name, col in columns.items()}
            label, trace = infer(model, features)
            drawn += 1
            if trace.abstained:
                abstained += 1
                if not spec.keep_abstained:
                    continue
            if counts[label] >= n:
                continue
            counts[label] += 1
            accepted.append(PedestrianSample(
                features=features, label=label, dataset=spec.dataset_tag,
                video_id=f"synth_{batch:04d}", pedestrian_id=f"p{j:04d}", frame_index=j,
                behavioral=bool(relevant[j]),
            ))
        batch += 1
        if not spec.keep_abstained and drawn >= spec.batch_size and abstained > drawn / 2:
            raise GenerationError(
                f"planted model abstains on {abstained}/{drawn} draws; broaden its rules or the samplers"
            )

    flips = round(spec.label_noise_rate * n)
    if flips:
        rng = np.random.default_rng([spec.seed, spec.max_batches + 1])
        # pick both classes' members before flipping anything, so no sample flips twice
        by_class = {cls: [i for i, s in enumerate(accepted) if s.label is cls] for cls in CrossingLabel}
        for cls, members in by_class.items():
            for i in rng.choice(len(members), size=flips, replace=False):
                s = accepted[members[i]]
                accepted[members[i]] = PedestrianSample(
                    s.features, CrossingLabel(1 - int(s.label)), s.dataset, s.video_id, s.pedestrian_id,
                    s.frame_index, s.crossing_event_frame, s.behavioral, {"flipped": True},
                )
    header = {"draws": drawn, "abstained_draws": abstained, "flipped_per_class": flips}
    return MetaDataset(tuple(accepted), source=spec.dataset_tag, header=header)


def planted_labels(planted: FisModel, samples: Sequence[Any]) -> list[CrossingLabel]:
    return [infer(planted, s)[0] for s in samples]


def oracle_f1(planted: FisModel, trained: FisModel, samples: Sequence[Any]) -> float:
    """Positive-class F1 of ``trained`` against the planted model's noise-free labels."""
    truth = planted_labels(planted, samples)
    preds = [infer(trained, s)[0] for s in samples]
    return f1_score(confusion(preds, truth))


def load_planted_spec(path: str | Path, schema: FeatureSchema | None = None) -> PlantedSpec:
    """Read a key/value spec file. ``planted_model`` (optional) is a model file path."""
    from .modelfile import load_model

    path = Path(path)
    values = read_key_values(path)
    distance_max = float(values.pop("distance_max", 50.0))
    model_path = values.pop("planted_model", "")
    planted = load_model(path.parent / model_path) if model_path else default_planted_model(schema, distance_max)
    samplers = {}
    for key in [k for k in values if k.startswith("sampler.")]:
        samplers[key[len("sampler."):]] = values.pop(key)
    kwargs: dict[str, Any] = {"planted": planted, "samplers": samplers}
    casts = {"samples_per_class": int, "label_noise_rate": float, "seed": int, "irrelevant_rate": float,
             "batch_size": int, "dataset_tag": str, "default_sampler": str, "max_batches": int,
             "keep_abstained": parse_bool}
    for key, raw in values.items():
        if key == "sampler":
            kwargs["default_sampler"] = raw
        elif key in casts:
            kwargs[key] = casts[key](raw)
        else:
            raise ValueError(f"{path}: unknown synth option {key!r}")
    return PlantedSpec(**kwargs)
