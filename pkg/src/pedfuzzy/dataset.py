"""Meta-dataset files and the sampling pipeline (frame restrictions, balancing, groups, mixing).

File layout (comma-separated, version 1)::

    # pedfuzzy-metadataset 1
    # orientation_shifted: true
    # provenance: {"tool": "pedfuzzy", ...}
    dataset,video_id,pedestrian_id,frame_index,crossing_event_frame,behavioral_flag,<features...>,label
    JAAD,video_0001,0_1_3b,12,40,1,...,1

``crossing_event_frame`` may be empty. ``behavioral_flag`` is 1 for
annotation-relevant pedestrians and 0 for irrelevant ones. ``label`` is 1
(crossing) or 0 (not crossing). A file without the ``orientation_shifted``
line is treated as raw orientations and shifted on load.
"""

from __future__ import annotations

import csv
import dataclasses
import io as _io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .features import FeatureSchema, PedestrianSample, SampleError, validate_sample
from .fuzzy import CrossingLabel
from .io import DEFAULT_SEED, atomic_write_text, parse_bool, read_key_values

FORMAT_LINE = "# pedfuzzy-metadataset 1"
ID_COLUMNS = ("dataset", "video_id", "pedestrian_id", "frame_index", "crossing_event_frame", "behavioral_flag")
REQUIRED_ID_COLUMNS = ("dataset", "video_id", "pedestrian_id", "frame_index", "behavioral_flag")
ORDERINGS = ("quality-sorted", "random")

MAX_FRAMES_AFTER_CROSSING = 60
MAX_FRAMES_NOT_CROSSING = 90


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class MetaDataset:
    samples: tuple[PedestrianSample, ...]
    source: str = ""
    video_order: tuple[str, ...] = ()
    rejected: tuple[tuple[int, str], ...] = field(default=(), compare=False)
    notes: tuple[str, ...] = field(default=(), compare=False)
    header: Mapping[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "samples", tuple(self.samples))
        seen = list(dict.fromkeys(self.video_order))
        for s in self.samples:
            if s.video_id not in seen:
                seen.append(s.video_id)
        object.__setattr__(self, "video_order", tuple(seen))

    def __len__(self) -> int:
        return len(self.samples)

    def class_counts(self) -> dict[CrossingLabel, int]:
        counts = {CrossingLabel.NOT_CROSSING: 0, CrossingLabel.CROSSING: 0}
        for s in self.samples:
            counts[s.label] += 1
        return counts

    def tag_counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for s in self.samples:
            out[s.dataset] = out.get(s.dataset, 0) + 1
        return dict(sorted(out.items()))

    def derive(self, samples: Sequence[PedestrianSample], *notes: str, **changes: Any) -> "MetaDataset":
        return dataclasses.replace(self, samples=tuple(samples), notes=self.notes + notes, **changes)


@dataclass(frozen=True)
class SamplingConfig:
    """How a training set is drawn. ``mix`` entries are ``(source, count)``."""

    target_record_count: int | None = None
    ordering: str = "quality-sorted"
    seed: int = DEFAULT_SEED
    frame_restrictions: bool = True
    balance: bool = True
    mix: tuple[tuple[str, int], ...] = ()

    def __post_init__(self) -> None:
        if self.target_record_count is not None and self.target_record_count <= 0:
            raise ValueError("target_record_count must be > 0")
        if self.ordering not in ORDERINGS:
            raise ValueError(f"ordering must be one of {ORDERINGS}, got {self.ordering!r}")
        for source, count in self.mix:
            if count <= 0:
                raise ValueError(f"mix count for {source!r} must be > 0")

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["mix"] = [list(m) for m in self.mix]
        return d

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any]) -> "SamplingConfig":
        kwargs: dict[str, Any] = {}
        for key, raw in values.items():
            if key == "target_record_count":
                kwargs[key] = None if str(raw).strip().lower() in ("", "none", "all") else parse_count(raw)
            elif key == "ordering":
                kwargs[key] = str(raw).strip()
            elif key == "seed":
                kwargs[key] = int(raw)
            elif key in ("frame_restrictions", "balance"):
                kwargs[key] = parse_bool(raw)
            elif key == "mix":
                kwargs[key] = parse_mix(raw) if isinstance(raw, str) else tuple(raw)
            else:
                raise ValueError(f"unknown sampling option {key!r}")
        return cls(**kwargs)

    @classmethod
    def load(cls, path: str | Path) -> "SamplingConfig":
        return cls.from_mapping(read_key_values(path))


def parse_count(text: str | int) -> int:
    """``"8000"``, ``"8K"`` or ``"8k"`` -> 8000."""
    if isinstance(text, int):
        return text
    t = str(text).strip().lower()
    mult = 1000 if t.endswith("k") else 1
    return int(float(t.rstrip("k")) * mult)


def parse_mix(text: str) -> tuple[tuple[str, int], ...]:
    """``"JAAD:8K, PIE:8K"`` -> ``(("JAAD", 8000), ("PIE", 8000))``."""
    parts = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        source, _, count = item.rpartition(":")
        if not source:
            raise ValueError(f"mix entry must be source:count, got {item!r}")
        parts.append((source.strip(), parse_count(count)))
    return tuple(parts)


# --------------------------------------------------------------------------
# file I/O
# --------------------------------------------------------------------------


def columns_for(schema: FeatureSchema) -> list[str]:
    return [*ID_COLUMNS, *schema.names, "label"]


def load_meta_dataset(
    path: str | Path,
    schema: FeatureSchema | None = None,
    video_order: Sequence[str] | None = None,
) -> MetaDataset:
    """Read and validate a meta-dataset file; invalid rows are counted in ``rejected``."""
    schema = schema or FeatureSchema()
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"meta-dataset not found: {path}")
    text = path.read_text(encoding="utf-8")
    if not text.strip():
        raise DatasetError(f"{path}: empty file")
    lines = text.splitlines()
    if lines[0].strip() != FORMAT_LINE:
        raise DatasetError(f"{path}: first line must be {FORMAT_LINE!r}")
    header: dict[str, Any] = {}
    body_start = 1
    while body_start < len(lines) and lines[body_start].startswith("#"):
        key, _, value = lines[body_start][1:].partition(":")
        header[key.strip()] = value.strip()
        body_start += 1
    notes = []
    if "orientation_shifted" in header:
        shifted = parse_bool(header["orientation_shifted"])
    else:
        shifted = False
        notes.append("no orientation_shifted header: orientation treated as raw and shifted by +45 on load")
    header["orientation_shifted"] = "true"

    reader = csv.DictReader(_io.StringIO("\n".join(lines[body_start:])))
    if not reader.fieldnames:
        raise DatasetError(f"{path}: missing column header row")
    cols = [c.strip() for c in reader.fieldnames]
    required = [*REQUIRED_ID_COLUMNS, *(f.name for f in schema.active), "label"]
    missing = [c for c in required if c not in cols]
    if missing:
        raise DatasetError(f"{path}: missing columns: {', '.join(missing)}")

    samples = []
    rejected = []
    for row_no, record in enumerate(reader, 1):
        record = {k.strip(): v for k, v in record.items() if k is not None}
        try:
            samples.append(validate_sample(record, schema, row_no, orientation_shifted=shifted))
        except SampleError as exc:
            rejected.append((row_no, str(exc)))
    if not samples and not rejected:
        raise DatasetError(f"{path}: no data rows")
    if rejected:
        notes.append(f"{len(rejected)} row(s) rejected")
    return MetaDataset(tuple(samples), source=path.stem, video_order=tuple(video_order or ()),
                       rejected=tuple(rejected), notes=tuple(notes), header=header)


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dumps_meta_dataset(dataset: MetaDataset, schema: FeatureSchema | None = None,
                       provenance: Mapping[str, Any] | None = None) -> str:
    schema = schema or FeatureSchema()
    buf = _io.StringIO()
    buf.write(FORMAT_LINE + "\n")
    buf.write("# orientation_shifted: true\n")
    if provenance is not None:
        buf.write("# provenance: " + json.dumps(provenance, sort_keys=True) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns_for(schema))
    for s in dataset.samples:
        writer.writerow([
            s.dataset, s.video_id, s.pedestrian_id, s.frame_index, _cell(s.crossing_event_frame),
            1 if s.behavioral else 0,
            *(_cell(s.features.get(n)) for n in schema.names),
            int(s.label),
        ])
    return buf.getvalue()


def save_meta_dataset(dataset: MetaDataset, path: str | Path, schema: FeatureSchema | None = None,
                      provenance: Mapping[str, Any] | None = None) -> None:
    atomic_write_text(path, dumps_meta_dataset(dataset, schema, provenance))


def load_video_order(path: str | Path) -> tuple[str, ...]:
    """One video id per line, best first. ``#`` comments allowed."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"video order file not found: {path}")
    out = []
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            out.append(line)
    return tuple(out)


# --------------------------------------------------------------------------
# sampling
# --------------------------------------------------------------------------


def apply_frame_restrictions(dataset: MetaDataset) -> MetaDataset:
    """Keep at most 60 frames after a crossing event and the first 90 frames of non-crossers.

    Both limits are inclusive. A crossing pedestrian without an event frame
    keeps every frame and a note is recorded.
    """
    groups: dict[tuple, list[int]] = {}
    for i, s in enumerate(dataset.samples):
        groups.setdefault(s.pedestrian_key, []).append(i)
    keep = set()
    notes = []
    for key, idx in groups.items():
        members = [dataset.samples[i] for i in idx]
        events = [s.crossing_event_frame for s in members if s.crossing_event_frame is not None]
        crossing = bool(events) or any(s.label is CrossingLabel.CROSSING for s in members)
        if crossing:
            if not events:
                notes.append(f"pedestrian {'/'.join(key)} crosses but has no crossing_event_frame; all frames kept")
                keep.update(idx)
                continue
            limit = min(events) + MAX_FRAMES_AFTER_CROSSING
            keep.update(i for i in idx if dataset.samples[i].frame_index <= limit)
        else:
            ordered = sorted(idx, key=lambda i: (dataset.samples[i].frame_index, i))
            keep.update(ordered[:MAX_FRAMES_NOT_CROSSING])
    return dataset.derive([s for i, s in enumerate(dataset.samples) if i in keep], *notes)


def _video_ranked(dataset: MetaDataset, ordering: str, seed: int) -> list[PedestrianSample]:
    videos = list(dataset.video_order)
    if ordering == "random":
        perm = np.random.default_rng(seed).permutation(len(videos))
        videos = [videos[i] for i in perm]
    elif ordering != "quality-sorted":
        raise ValueError(f"unknown ordering {ordering!r}")
    rank = {v: r for r, v in enumerate(videos)}
    order = sorted(range(len(dataset.samples)), key=lambda i: (rank[dataset.samples[i].video_id], i))
    return [dataset.samples[i] for i in order]


def balance_classes(
    dataset: MetaDataset,
    target_count: int,
    seed: int = DEFAULT_SEED,
    ordering: str = "quality-sorted",
) -> MetaDataset:
    """Draw ``target_count`` samples split evenly between the classes, walking videos in order.

    ``quality-sorted`` walks ``dataset.video_order``; ``random`` walks a
    seeded permutation of it. On an odd target the crossing class gets the
    extra sample.
    """
    if target_count <= 0:
        raise DatasetError("target_count must be > 0")
    counts = dataset.class_counts()
    n_cross, n_not = counts[CrossingLabel.CROSSING], counts[CrossingLabel.NOT_CROSSING]
    need_cross = math.ceil(target_count / 2)
    need_not = target_count // 2
    if need_cross > n_cross or need_not > n_not:
        achievable = 2 * min(n_cross, n_not) + (1 if n_cross > n_not else 0)
        raise DatasetError(
            f"cannot balance {target_count} samples from {dataset.source or 'dataset'} "
            f"({n_cross} crossing, {n_not} not crossing); achievable maximum is {achievable}"
        )
    taken = {CrossingLabel.CROSSING: 0, CrossingLabel.NOT_CROSSING: 0}
    need = {CrossingLabel.CROSSING: need_cross, CrossingLabel.NOT_CROSSING: need_not}
    out = []
    for s in _video_ranked(dataset, ordering, seed):
        if taken[s.label] < need[s.label]:
            taken[s.label] += 1
            out.append(s)
    return dataset.derive(out)


def max_balanced(dataset: MetaDataset) -> int:
    counts = dataset.class_counts()
    return 2 * min(counts.values())


def split_test_groups(dataset: MetaDataset) -> dict[str, MetaDataset]:
    """``all`` is the input; ``beh`` drops pedestrians flagged annotation-irrelevant."""
    beh = dataset.derive([s for s in dataset.samples if s.behavioral])
    return {"all": dataset, "beh": beh}


def mix_datasets(
    parts: Sequence[tuple[MetaDataset, int]],
    seed: int = DEFAULT_SEED,
    ordering: str = "quality-sorted",
) -> MetaDataset:
    """Concatenate a balanced draw of ``count`` samples from each part."""
    if not parts:
        raise DatasetError("nothing to mix")
    drawn = []
    for n, (part, count) in enumerate(parts):
        try:
            drawn.append(balance_classes(part, count, seed, ordering))
        except DatasetError as exc:
            raise DatasetError(f"mix part {n} ({part.source or 'unnamed'}, {count}): {exc}") from exc
    samples = [s for d in drawn for s in d.samples]
    order = [v for d in drawn for v in d.video_order]
    source = "+".join(f"{p.source or 'part'}:{c}" for p, c in parts)
    return MetaDataset(tuple(samples), source=source, video_order=tuple(order))


def prepare(sources: Mapping[str, MetaDataset], config: SamplingConfig) -> MetaDataset:
    """Frame restrictions, then a mixed or balanced draw, per ``config``.

    ``sources`` maps a name to a loaded dataset; ``config.mix`` refers to
    those names. Without a mix, exactly one source is expected.
    """
    if not sources:
        raise DatasetError("no input datasets")
    staged = {name: apply_frame_restrictions(ds) if config.frame_restrictions else ds
              for name, ds in sources.items()}
    if config.mix:
        parts = []
        for name, count in config.mix:
            if name not in staged:
                raise DatasetError(f"mix refers to unknown source {name!r} (have {sorted(staged)})")
            parts.append((staged[name], count))
        return mix_datasets(parts, config.seed, config.ordering)
    if len(staged) != 1:
        raise DatasetError("several inputs given but no mix configured")
    (ds,) = staged.values()
    if not config.balance:
        if config.target_record_count is not None:
            return ds.derive(_video_ranked(ds, config.ordering, config.seed)[: config.target_record_count])
        return ds
    target = config.target_record_count if config.target_record_count is not None else max_balanced(ds)
    return balance_classes(ds, target, config.seed, config.ordering)
