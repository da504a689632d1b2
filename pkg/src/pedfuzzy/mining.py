"""Learning a weighted fuzzy rule base from labelled samples.

Candidates come from a level-wise (apriori-style) search over conjunctions of
fuzzy terms. Each surviving antecedent set yields one rule per class whose
fuzzy confidence clears the threshold; rule weights are penalised certainty
factors, and a greedy coverage pass picks the final rule base.
"""

from __future__ import annotations

import dataclasses
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .features import FeatureSchema, PedestrianSample
from .fuzzy import (
    CrossingLabel,
    Decision,
    FisModel,
    FuzzyRule,
    FuzzyTerm,
    LinguisticVariable,
    MembershipFunction,
    TNorm,
    membership_degree,
)
from .io import DEFAULT_SEED, provenance, read_key_values

SELECTIONS = ("greedy-coverage", "keep-all-pruned")

_DEFAULT_LABELS = {
    2: ("low", "high"),
    3: ("low", "medium", "high"),
    4: ("very low", "low", "high", "very high"),
    5: ("very low", "low", "medium", "high", "very high"),
}


class TrainingError(RuntimeError):
    pass


class DegenerateDomainWarning(UserWarning):
    pass


class ImbalanceWarning(UserWarning):
    pass


@dataclass(frozen=True)
class MiningConfig:
    min_support: float = 0.05
    min_confidence: float = 0.6
    max_antecedents: int = 3
    terms_per_continuous_variable: int = 3
    selection: str = "greedy-coverage"
    coverage_epsilon: float = 0.05
    random_seed: int = DEFAULT_SEED
    tnorm: str = "product"
    decision: str = "weighted-vote"

    def __post_init__(self) -> None:
        if not 0 < self.min_support <= 1:
            raise ValueError(f"min_support must be in (0, 1], got {self.min_support}")
        if not 0 < self.min_confidence <= 1:
            raise ValueError(f"min_confidence must be in (0, 1], got {self.min_confidence}")
        if self.max_antecedents < 1:
            raise ValueError("max_antecedents must be >= 1")
        if self.terms_per_continuous_variable < 2:
            raise ValueError("terms_per_continuous_variable must be >= 2")
        if self.selection not in SELECTIONS:
            raise ValueError(f"selection must be one of {SELECTIONS}, got {self.selection!r}")
        if not 0 < self.coverage_epsilon <= 1:
            raise ValueError("coverage_epsilon must be in (0, 1]")
        TNorm(self.tnorm)
        Decision(self.decision)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def replace(self, **changes: Any) -> "MiningConfig":
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any]) -> "MiningConfig":
        fields = {f.name: f.type for f in dataclasses.fields(cls)}
        kwargs: dict[str, Any] = {}
        for key, raw in values.items():
            if key not in fields:
                raise ValueError(f"unknown mining option {key!r}")
            default = getattr(cls, key)
            kwargs[key] = type(default)(raw) if not isinstance(default, str) else str(raw)
        return cls(**kwargs)

    @classmethod
    def load(cls, path: str | Path) -> "MiningConfig":
        return cls.from_mapping(read_key_values(path))


@dataclass(frozen=True)
class CandidateRule:
    rule: FuzzyRule
    support: float
    confidence: float


# --------------------------------------------------------------------------
# vocabulary
# --------------------------------------------------------------------------


def _term_labels(spec, k: int) -> tuple[str, ...]:
    if spec.terms and len(spec.terms) == k:
        return tuple(spec.terms)
    return _DEFAULT_LABELS.get(k, tuple(f"level {i + 1}" for i in range(k)))


def uniform_partition(name: str, lo: float, hi: float, labels: Sequence[str]) -> LinguisticVariable:
    """Uniform triangles over ``[lo, hi]``; neighbours cross at degree 0.5."""
    k = len(labels)
    step = (hi - lo) / (k - 1)
    peaks = [lo + i * step for i in range(k - 1)] + [hi]
    terms = []
    for i, label in enumerate(labels):
        a = peaks[i - 1] if i > 0 else lo
        c = peaks[i + 1] if i < k - 1 else hi
        terms.append(FuzzyTerm(label, MembershipFunction.triangular(a, peaks[i], c)))
    return LinguisticVariable(name, "continuous", (lo, hi), tuple(terms))


def partition_variables(schema: FeatureSchema, config: MiningConfig | None = None) -> list[LinguisticVariable]:
    """One linguistic variable per active feature, in schema order."""
    config = config or MiningConfig()
    out = []
    for spec in schema.active:
        if spec.kind == "categorical":
            terms = tuple(FuzzyTerm(c, MembershipFunction.singleton(c)) for c in spec.domain)
            out.append(LinguisticVariable(spec.name, "categorical", spec.domain, terms))
            continue
        lo, hi = spec.domain
        if hi is None:
            raise ValueError(f"feature {spec.name!r} has an unresolved upper bound; call schema.resolve_bounds")
        lo, hi = float(lo), float(hi)
        if lo == hi:
            warnings.warn(f"feature {spec.name!r} has a degenerate domain [{lo}, {hi}]; using one constant term",
                          DegenerateDomainWarning, stacklevel=2)
            term = FuzzyTerm("constant", MembershipFunction.trapezoidal(lo, lo, hi, hi))
            out.append(LinguisticVariable(spec.name, "continuous", (lo, hi), (term,)))
            continue
        out.append(uniform_partition(spec.name, lo, hi, _term_labels(spec, config.terms_per_continuous_variable)))
    return out


# --------------------------------------------------------------------------
# fuzzy measures
# --------------------------------------------------------------------------


class _Table:
    """Per-variable membership matrices (samples x terms) and the label vector."""

    def __init__(self, data: Sequence[PedestrianSample], variables: Sequence[LinguisticVariable]):
        self.n = len(data)
        self.labels = np.fromiter((int(s.label) for s in data), dtype=np.int8, count=self.n)
        self.columns: list[np.ndarray] = []
        for var in variables:
            dom = var.domain if var.kind == "continuous" else None
            values = []
            for i, s in enumerate(data):
                x = s.features.get(var.name)
                if x is None:
                    raise ValueError(f"sample {i} has no value for variable {var.name!r}")
                values.append(x)
            m = np.array([[membership_degree(t.membership, x, dom) for t in var.terms] for x in values],
                         dtype=float).reshape(self.n, len(var.terms))
            self.columns.append(m)

    def firing(self, antecedents: Sequence[tuple[int, int]], tnorm: TNorm) -> np.ndarray:
        out = None
        for v, t in antecedents:
            col = self.columns[v][:, t]
            if out is None:
                out = col.copy()
            elif tnorm is TNorm.MINIMUM:
                out = np.minimum(out, col)
            else:
                out = out * col
        return out

    def class_sums(self, firing: np.ndarray) -> tuple[float, float, float]:
        """Total firing, firing over NOT_CROSSING samples, firing over CROSSING samples."""
        return (float(np.sum(firing)), float(np.sum(firing[self.labels == 0])),
                float(np.sum(firing[self.labels == 1])))


def _as_table(data, variables) -> _Table:
    return data if isinstance(data, _Table) else _Table(data, variables)


def _measures(total: float, by_class: float, n: int) -> tuple[float, float]:
    if total <= 0:
        return 0.0, 0.0
    return total / n, by_class / total


def _penalized_cf(total: float, match: float, other: float) -> float:
    if total <= 0:
        return 0.0
    return min(1.0, max(0.0, (match - other) / total))


def fuzzy_support_confidence(
    candidate: CandidateRule | FuzzyRule,
    data: Sequence[PedestrianSample],
    variables: Sequence[LinguisticVariable],
    tnorm: str = "product",
) -> tuple[float, float]:
    """Fuzzy support (mean firing) and confidence (class share of firing mass)."""
    rule = candidate.rule if isinstance(candidate, CandidateRule) else candidate
    table = _as_table(data, variables)
    if table.n == 0:
        raise ValueError("data must be non-empty")
    sums = table.class_sums(table.firing(rule.antecedents, TNorm(tnorm)))
    return _measures(sums[0], sums[1 + int(rule.consequent)], table.n)


def compute_rule_weight(
    candidate: CandidateRule | FuzzyRule,
    data: Sequence[PedestrianSample],
    variables: Sequence[LinguisticVariable],
    tnorm: str = "product",
) -> float:
    """Penalised certainty factor: (matching mass - opposing mass) / total mass, floored at 0."""
    rule = candidate.rule if isinstance(candidate, CandidateRule) else candidate
    table = _as_table(data, variables)
    total, f0, f1 = table.class_sums(table.firing(rule.antecedents, TNorm(tnorm)))
    match, other = (f1, f0) if rule.consequent is CrossingLabel.CROSSING else (f0, f1)
    return _penalized_cf(total, match, other)


def mine_candidates(
    data: Sequence[PedestrianSample],
    variables: Sequence[LinguisticVariable],
    config: MiningConfig | None = None,
) -> list[CandidateRule]:
    """Level-wise search over antecedent conjunctions up to ``max_antecedents``.

    Only antecedent sets meeting ``min_support`` are extended. Output is
    sorted lexicographically by (variable, term) pairs, then by class.
    """
    config = config or MiningConfig()
    table = _as_table(data, variables)
    if table.n == 0:
        raise ValueError("data must be non-empty")
    tnorm = TNorm(config.tnorm)

    level: dict[tuple, np.ndarray] = {}
    for v, var in enumerate(variables):
        for t in range(len(var.terms)):
            f = table.firing(((v, t),), tnorm)
            if np.sum(f) / table.n >= config.min_support:
                level[((v, t),)] = f
    frequent: dict[tuple, np.ndarray] = dict(level)
    depth = 1
    while level and depth < config.max_antecedents:
        keys = sorted(level)
        nxt: dict[tuple, np.ndarray] = {}
        for i, a in enumerate(keys):
            for b in keys[i + 1:]:
                if a[:-1] != b[:-1]:
                    break
                if b[-1][0] <= a[-1][0]:
                    continue
                joined = a + (b[-1],)
                if any(joined[:j] + joined[j + 1:] not in level for j in range(len(joined))):
                    continue
                col = table.columns[b[-1][0]][:, b[-1][1]]
                f = np.minimum(level[a], col) if tnorm is TNorm.MINIMUM else level[a] * col
                if np.sum(f) / table.n >= config.min_support:
                    nxt[joined] = f
        frequent.update(nxt)
        level = nxt
        depth += 1

    out: list[CandidateRule] = []
    for ants in sorted(frequent):
        total, f0, f1 = table.class_sums(frequent[ants])
        for cls, match, other in ((CrossingLabel.NOT_CROSSING, f0, f1), (CrossingLabel.CROSSING, f1, f0)):
            support, confidence = _measures(total, match, table.n)
            if support < config.min_support or confidence < config.min_confidence:
                continue
            rule = FuzzyRule(ants, cls, _penalized_cf(total, match, other), len(out) + 1)
            out.append(CandidateRule(rule, support, confidence))
    return out


def _subsumes(general: FuzzyRule, specific: FuzzyRule) -> bool:
    return general.consequent == specific.consequent and set(general.antecedents) <= set(specific.antecedents)


def select_rules(
    candidates: Sequence[CandidateRule],
    data: Sequence[PedestrianSample],
    variables: Sequence[LinguisticVariable],
    config: MiningConfig | None = None,
) -> list[FuzzyRule]:
    """Choose the final rule base and renumber it 1..n.

    Identical antecedent sets keep only their heavier rule. ``greedy-coverage``
    then walks candidates by weight * support and takes a rule when it is not
    subsumed by a chosen same-class rule and it newly covers at least one
    training sample of its own class (firing >= ``coverage_epsilon``). It
    stops once every sample is covered. ``keep-all-pruned`` keeps the rest.
    """
    config = config or MiningConfig()
    # one rule per antecedent set: the heavier one (first seen on equal weight)
    best: dict[tuple, CandidateRule] = {}
    for c in candidates:
        key = c.rule.antecedents
        if key not in best or c.rule.weight > best[key].rule.weight:
            best[key] = c
    candidates = [c for c in candidates if best[c.rule.antecedents] is c]
    if config.selection == "keep-all-pruned":
        chosen = [c.rule for c in candidates]
    else:
        table = _as_table(data, variables)
        tnorm = TNorm(config.tnorm)
        # strongest weight * support first; on ties, shorter antecedents first
        order = sorted(candidates, key=lambda c: (-c.rule.weight * c.support, len(c.rule.antecedents),
                                                   c.rule.antecedents, int(c.rule.consequent)))
        # a rule covers the samples of its own class on which it fires >= epsilon
        covered = np.zeros(table.n, dtype=bool)
        chosen = []
        for c in order:
            if covered.all():
                break
            if c.rule.weight <= 0 or any(_subsumes(p, c.rule) for p in chosen):
                continue
            hits = (table.firing(c.rule.antecedents, tnorm) >= config.coverage_epsilon) & (
                table.labels == int(c.rule.consequent))
            if not (hits & ~covered).any():
                continue
            chosen.append(c.rule)
            covered |= hits
    return [dataclasses.replace(r, id=i) for i, r in enumerate(chosen, 1)]


def train(
    data: Sequence[PedestrianSample],
    schema: FeatureSchema | None = None,
    config: MiningConfig | None = None,
) -> FisModel:
    """Partition, mine, weight and select: samples in, deployable model out."""
    schema = schema or FeatureSchema()
    config = config or MiningConfig()
    if not data:
        raise TrainingError("cannot train on an empty dataset")
    n1 = sum(1 for s in data if s.label is CrossingLabel.CROSSING)
    n0 = len(data) - n1
    notes = []
    if abs(n1 - n0) > 0.1 * max(n1, n0):
        msg = f"class imbalance: {n1} crossing vs {n0} not crossing"
        warnings.warn(msg, ImbalanceWarning, stacklevel=2)
        notes.append(msg)
    schema = schema.resolve_bounds(data)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", DegenerateDomainWarning)
        variables = partition_variables(schema, config)
    for w in caught:
        notes.append(str(w.message))
        warnings.warn(w.message, w.category, stacklevel=2)
    table = _Table(data, variables)
    candidates = mine_candidates(table, variables, config)
    rules = select_rules(candidates, table, variables, config)
    if not rules:
        raise TrainingError(
            f"no rules survived mining (candidates={len(candidates)}, min_support={config.min_support}, "
            f"min_confidence={config.min_confidence})"
        )
    config_dict = config.to_dict()
    metadata = {
        "provenance": provenance(config_dict, config.random_seed),
        "mining_config": config_dict,
        "training": {
            "samples": len(data),
            "crossing": n1,
            "not_crossing": n0,
            "features": [v.name for v in variables],
            "candidates": len(candidates),
            "rules": len(rules),
            "notes": notes,
        },
    }
    used = {var.name for var in variables}
    display = {k: v for k, v in schema.display_names().items() if k in used}
    return FisModel(tuple(variables), tuple(rules), tnorm=config.tnorm, decision=config.decision,
                    display=display, metadata=metadata)
