"""Pedestrian feature schema, per-frame samples and the deterministic encoders.

The schema file is pipe-delimited text, one feature per line::

    # pedfuzzy-schema 1
    # name | code | kind | domain | active | terms | display
    body_orientation | BO_P | continuous | 0:360 | yes | | Orientation
    distance | DE_P | continuous | 0:auto | yes | too near,near,far | Distance
    gaze | GA_P | categorical | looking,not_looking | yes | | Gaze

``auto`` as an upper bound means "take it from the training data".
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Mapping

from .fuzzy import CrossingLabel, FuzzyModelError

SCHEMA_HEADER = "# pedfuzzy-schema 1"
ORIENTATION = "body_orientation"
ORIENTATION_SHIFT = 45.0
DATASET_TAGS = ("JAAD", "PIE", "synthetic", "other")

ACTION_CLASSES = ("standing", "walk", "wave", "run", "undefined")
_ACTION_GROUPS = {
    0: ("Standing", "Check-watch", "Cross-arms", "Scratch-head", "Hands-clap"),
    1: ("Walk", "Turn"),
    2: ("Wave", "Point", "Wave2"),
    3: ("Run", "Jog"),
    4: ("Sit-down", "Get-up", "Box", "Kick", "Pick-up", "Bend", "Jump", "Position Jump"),
}
ACTION_VOCABULARY = tuple(label for group in _ACTION_GROUPS.values() for label in group)


def _norm_action(label: str) -> str:
    return "-".join(str(label).strip().lower().replace("_", " ").replace("-", " ").split())


_ACTION_LOOKUP: dict[str, int] = {}
for _cls, _labels in _ACTION_GROUPS.items():
    for _label in _labels:
        _ACTION_LOOKUP[_norm_action(_label)] = _cls
for _cls, _name in enumerate(ACTION_CLASSES):
    _ACTION_LOOKUP.setdefault(_norm_action(_name), _cls)
_ACTION_LOOKUP.setdefault("stand", 0)


class SchemaError(ValueError):
    pass


class SampleError(ValueError):
    """A raw record failed validation. ``problems`` lists ``(field, message)``."""

    def __init__(self, row: int | None, problems: list[tuple[str, str]]):
        self.row = row
        self.problems = problems
        where = f"row {row}: " if row is not None else ""
        super().__init__(where + "; ".join(f"{f}: {m}" for f, m in problems))


# --------------------------------------------------------------------------
# encoders
# --------------------------------------------------------------------------


def shift_orientation(phi: float) -> float:
    """Rotate a body orientation by +45 degrees so the right-facing band is contiguous."""
    phi = float(phi)
    if not math.isfinite(phi):
        raise ValueError(f"orientation must be finite, got {phi}")
    out = (phi + ORIENTATION_SHIFT) % 360.0
    # (tiny negative) % 360 can round to exactly 360.0
    return 0.0 if out >= 360.0 else out


def estimate_distance(known_width_m: float, focal_length_px: float, pixel_width: float) -> float:
    """Triangle-similarity range estimate: ``W * F / P``."""
    if pixel_width <= 0:
        raise ValueError(f"pixel width must be > 0 (degenerate detection box), got {pixel_width}")
    if known_width_m <= 0 or focal_length_px <= 0:
        raise ValueError("known width and focal length must be > 0")
    return known_width_m * focal_length_px / pixel_width


def map_action(raw_action: str | int) -> int:
    """Group a raw action label (or one of the five group names) into class 0..4."""
    if isinstance(raw_action, int) and not isinstance(raw_action, bool):
        if 0 <= raw_action < len(ACTION_CLASSES):
            return raw_action
    key = _norm_action(raw_action)
    if key.isdigit() and int(key) < len(ACTION_CLASSES):
        return int(key)
    try:
        return _ACTION_LOOKUP[key]
    except KeyError:
        raise ValueError(
            f"unknown action {raw_action!r}; admissible labels: {', '.join(ACTION_VOCABULARY)}"
            f" or a group name ({', '.join(ACTION_CLASSES)})"
        ) from None


# --------------------------------------------------------------------------
# schema
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    code: str
    kind: str
    domain: tuple
    active: bool = True
    terms: tuple[str, ...] = ()
    display: str = ""

    def __post_init__(self) -> None:
        if self.kind not in ("continuous", "categorical"):
            raise SchemaError(f"feature {self.name!r}: kind must be continuous or categorical")
        if self.kind == "continuous":
            lo, hi = self.domain
            if hi is not None and float(hi) < float(lo):
                raise SchemaError(f"feature {self.name!r}: empty domain {self.domain}")
        elif len(self.domain) < 1:
            raise SchemaError(f"feature {self.name!r}: categorical feature needs categories")

    @property
    def label(self) -> str:
        return self.display or self.name


DEFAULT_FEATURES = (
    FeatureSpec("motion_ability", "MA_P", "categorical",
                ("fully_capable", "wheelchair", "crutches", "walking_frame", "wheelchair_pusher"),
                active=False, display="MotionAbility"),
    FeatureSpec("age", "AG_P", "categorical", ("adult", "child"), active=False, display="Age"),
    FeatureSpec(ORIENTATION, "BO_P", "continuous", (0.0, 360.0), display="Orientation"),
    FeatureSpec("gaze", "GA_P", "categorical", ("looking", "not_looking"), display="Gaze"),
    FeatureSpec("action", "AC_P", "categorical", ACTION_CLASSES, display="Action"),
    FeatureSpec("proximity", "PR_P", "categorical", ("near", "medium", "far"), display="Proximity"),
    FeatureSpec("zebra_crossing", "ZC_P", "categorical", ("present", "absent"), display="ZebraCrossing"),
    FeatureSpec("distance", "DE_P", "continuous", (0.0, None), terms=("too near", "near", "far"),
                display="Distance"),
)


@dataclass(frozen=True)
class FeatureSchema:
    features: tuple[FeatureSpec, ...] = DEFAULT_FEATURES

    def __post_init__(self) -> None:
        object.__setattr__(self, "features", tuple(self.features))
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise SchemaError(f"duplicate feature names: {names}")
        if not any(f.active for f in self.features):
            raise SchemaError("at least one feature must be active")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.features)

    @property
    def active(self) -> tuple[FeatureSpec, ...]:
        return tuple(f for f in self.features if f.active)

    def __getitem__(self, name: str) -> FeatureSpec:
        for f in self.features:
            if f.name == name:
                return f
        raise KeyError(f"schema has no feature {name!r}")

    def without(self, *names: str) -> "FeatureSchema":
        for n in names:
            self[n]
        return FeatureSchema(tuple(replace(f, active=False) if f.name in names else f for f in self.features))

    def with_active(self, names: Iterable[str]) -> "FeatureSchema":
        names = set(names)
        for n in names:
            self[n]
        return FeatureSchema(tuple(replace(f, active=f.name in names) for f in self.features))

    def with_bounds(self, bounds: Mapping[str, tuple[float, float]]) -> "FeatureSchema":
        return FeatureSchema(tuple(replace(f, domain=tuple(bounds[f.name])) if f.name in bounds else f
                                   for f in self.features))

    def resolve_bounds(self, samples: Iterable[Any]) -> "FeatureSchema":
        """Fill ``auto`` upper bounds of active continuous features from observed data."""
        open_ = [f.name for f in self.active if f.kind == "continuous" and f.domain[1] is None]
        if not open_:
            return self
        highs = {n: None for n in open_}
        for s in samples:
            for n in open_:
                v = s.features.get(n)
                if v is not None and (highs[n] is None or v > highs[n]):
                    highs[n] = v
        bounds = {}
        for n in open_:
            lo = float(self[n].domain[0])
            bounds[n] = (lo, float(highs[n]) if highs[n] is not None else lo)
        return self.with_bounds(bounds)

    def display_names(self) -> dict[str, str]:
        return {f.name: f.display for f in self.features if f.display}

    def to_text(self) -> str:
        lines = [SCHEMA_HEADER, "# name | code | kind | domain | active | terms | display"]
        for f in self.features:
            if f.kind == "continuous":
                lo, hi = f.domain
                dom = f"{_num(lo)}:{'auto' if hi is None else _num(hi)}"
            else:
                dom = ",".join(f.domain)
            lines.append(" | ".join([f.name, f.code, f.kind, dom, "yes" if f.active else "no",
                                     ",".join(f.terms), f.display]))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, source: str = "<schema>") -> "FeatureSchema":
        lines = text.splitlines()
        if not lines or lines[0].strip() != SCHEMA_HEADER:
            raise SchemaError(f"{source}: first line must be {SCHEMA_HEADER!r}")
        specs = []
        for lineno, raw in enumerate(lines[1:], 2):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split("|")]
            parts += [""] * (7 - len(parts))
            if len(parts) != 7 or not parts[0]:
                raise SchemaError(f"{source}:{lineno}: expected 7 '|'-separated fields")
            name, code, kind, dom, active, terms, display = parts
            try:
                if kind == "continuous":
                    lo, hi = dom.split(":")
                    domain: tuple = (float(lo), None if hi.strip() == "auto" else float(hi))
                else:
                    domain = tuple(c.strip() for c in dom.split(",") if c.strip())
                spec = FeatureSpec(name, code, kind, domain, _yes(active),
                                   tuple(t.strip() for t in terms.split(",") if t.strip()), display)
            except (ValueError, SchemaError) as exc:
                raise SchemaError(f"{source}:{lineno}: {exc}") from exc
            specs.append(spec)
        return cls(tuple(specs))

    @classmethod
    def load(cls, path: str | Path) -> "FeatureSchema":
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"schema file not found: {path}")
        return cls.from_text(path.read_text(encoding="utf-8"), str(path))


def _yes(text: str) -> bool:
    if text.lower() in ("yes", "true", "1", "on", "active"):
        return True
    if text.lower() in ("no", "false", "0", "off", "inactive"):
        return False
    raise ValueError(f"active flag must be yes/no, got {text!r}")


def _num(x: float) -> str:
    return repr(float(x)).removesuffix(".0") if float(x).is_integer() else repr(float(x))


# --------------------------------------------------------------------------
# samples
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PedestrianSample:
    """One pedestrian at one frame: feature values, label and provenance."""

    features: Mapping[str, Any]
    label: CrossingLabel
    dataset: str = "other"
    video_id: str = ""
    pedestrian_id: str = ""
    frame_index: int = 0
    crossing_event_frame: int | None = None
    behavioral: bool = True
    extra: Mapping[str, Any] = field(default_factory=dict, compare=False)

    @property
    def pedestrian_key(self) -> tuple[str, str, str]:
        return (self.dataset, self.video_id, self.pedestrian_id)


def _parse_int(value: str, name: str, problems: list, optional: bool = False) -> int | None:
    if value is None or str(value).strip() == "":
        if not optional:
            problems.append((name, "missing value"))
        return None
    try:
        f = float(value)
        if not f.is_integer():
            raise ValueError
        return int(f)
    except ValueError:
        problems.append((name, f"not an integer: {value!r}"))
        return None


def _canonical_tag(value: str) -> str | None:
    for tag in DATASET_TAGS:
        if str(value).strip().lower() == tag.lower():
            return tag
    return None


def validate_sample(
    record: Mapping[str, Any],
    schema: FeatureSchema | None = None,
    row: int | None = None,
    orientation_shifted: bool = True,
) -> PedestrianSample:
    """Type- and range-check one raw record and build a sample.

    If ``orientation_shifted`` is false, the +45 degree orientation shift is
    applied here. Every problem in the row is collected before raising.
    """
    schema = schema or FeatureSchema()
    problems: list[tuple[str, str]] = []
    if "label" not in record:
        raise SampleError(row, [("label", "missing column 'label'")])
    try:
        label = CrossingLabel.parse(record["label"])
    except FuzzyModelError as exc:
        problems.append(("label", str(exc)))
        label = None

    features: dict[str, Any] = {}
    for spec in schema.features:
        raw = record.get(spec.name)
        if raw is None or str(raw).strip() == "":
            if spec.active:
                problems.append((spec.name, "missing value"))
            continue
        if spec.kind == "continuous":
            try:
                value = float(raw)
                if not math.isfinite(value):
                    raise ValueError
            except (TypeError, ValueError):
                problems.append((spec.name, f"not a number: {raw!r}"))
                continue
            lo, hi = spec.domain
            if spec.name == ORIENTATION:
                if not orientation_shifted:
                    if not 0.0 <= value <= 360.0:
                        problems.append((spec.name, f"{value} outside [0, 360]"))
                        continue
                    value = shift_orientation(value)
                elif not 0.0 <= value < 360.0:
                    problems.append((spec.name, f"{value} outside [0, 360)"))
                    continue
            elif value < lo or (hi is not None and value > hi):
                problems.append((spec.name, f"{value} outside [{lo}, {'inf' if hi is None else hi}]"))
                continue
            features[spec.name] = value
        else:
            text = str(raw).strip()
            if spec.name == "action":
                try:
                    text = ACTION_CLASSES[map_action(text)]
                except ValueError as exc:
                    problems.append((spec.name, str(exc)))
                    continue
            matches = [c for c in spec.domain if c.lower() == text.lower()]
            if not matches:
                problems.append((spec.name, f"{text!r} not in {list(spec.domain)}"))
                continue
            features[spec.name] = matches[0]

    tag = _canonical_tag(record.get("dataset", "other") or "other")
    if tag is None:
        problems.append(("dataset", f"unknown dataset tag {record.get('dataset')!r}; expected {DATASET_TAGS}"))
    frame = _parse_int(record.get("frame_index"), "frame_index", problems)
    event = _parse_int(record.get("crossing_event_frame"), "crossing_event_frame", problems, optional=True)
    beh_raw = record.get("behavioral_flag", "1")
    behavioral = True
    if str(beh_raw).strip().lower() in ("1", "true", "yes", "relevant", ""):
        behavioral = True
    elif str(beh_raw).strip().lower() in ("0", "false", "no", "irrelevant"):
        behavioral = False
    else:
        problems.append(("behavioral_flag", f"not a flag: {beh_raw!r}"))
    if problems:
        raise SampleError(row, problems)
    return PedestrianSample(
        features=features,
        label=label,
        dataset=tag,
        video_id=str(record.get("video_id", "")).strip(),
        pedestrian_id=str(record.get("pedestrian_id", "")).strip(),
        frame_index=frame if frame is not None else 0,
        crossing_event_frame=event,
        behavioral=behavioral,
    )
