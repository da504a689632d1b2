"""Linguistic variables, weighted fuzzy rules and zero-order Takagi-Sugeno inference."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence


class FuzzyModelError(ValueError):
    """Raised when a model, rule or input violates the fuzzy-core contracts."""


class CrossingLabel(enum.IntEnum):
    NOT_CROSSING = 0
    CROSSING = 1

    @property
    def text(self) -> str:
        return "crossing" if self is CrossingLabel.CROSSING else "not crossing"

    @classmethod
    def parse(cls, value: Any) -> "CrossingLabel":
        """Accept 0/1, booleans and the usual textual spellings."""
        if isinstance(value, CrossingLabel):
            return value
        if isinstance(value, (bool, int)) and int(value) in (0, 1):
            return cls(int(value))
        text = str(value).strip().lower().replace("-", "_").replace(" ", "_")
        if text in ("1", "cross", "crossing", "c"):
            return cls.CROSSING
        if text in ("0", "not_cross", "not_crossing", "notcrossing", "nc", "no_cross"):
            return cls.NOT_CROSSING
        raise FuzzyModelError(f"cannot interpret {value!r} as a crossing label")


class TNorm(str, enum.Enum):
    PRODUCT = "product"
    MINIMUM = "minimum"


class Decision(str, enum.Enum):
    WEIGHTED_VOTE = "weighted-vote"
    WINNER_RULE = "winner-rule"


# --------------------------------------------------------------------------
# membership functions
# --------------------------------------------------------------------------

MF_KINDS = ("triangular", "trapezoidal", "singleton")


@dataclass(frozen=True)
class MembershipFunction:
    """Triangular ``(a, b, c)``, trapezoidal ``(a, b, c, d)`` or crisp singleton.

    A singleton carries its category in ``category`` and no parameters.
    """

    kind: str
    params: tuple[float, ...] = ()
    category: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in MF_KINDS:
            raise FuzzyModelError(f"unknown membership function kind {self.kind!r}")
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if self.kind == "singleton":
            if not self.category:
                raise FuzzyModelError("singleton membership needs a category")
            if self.params:
                raise FuzzyModelError("singleton membership takes no parameters")
            return
        n = 3 if self.kind == "triangular" else 4
        if len(self.params) != n:
            raise FuzzyModelError(f"{self.kind} membership needs {n} parameters, got {len(self.params)}")
        if any(not math.isfinite(p) for p in self.params):
            raise FuzzyModelError(f"non-finite {self.kind} parameters {self.params}")
        if any(lo > hi for lo, hi in zip(self.params, self.params[1:])):
            raise FuzzyModelError(f"{self.kind} parameters must be non-decreasing: {self.params}")

    @classmethod
    def triangular(cls, a: float, b: float, c: float) -> "MembershipFunction":
        return cls("triangular", (a, b, c))

    @classmethod
    def trapezoidal(cls, a: float, b: float, c: float, d: float) -> "MembershipFunction":
        return cls("trapezoidal", (a, b, c, d))

    @classmethod
    def singleton(cls, category: str) -> "MembershipFunction":
        return cls("singleton", (), str(category))


def _ramp_up(x: float, a: float, b: float) -> float:
    return (x - a) / (b - a)


def membership_degree(mf: MembershipFunction, x: Any, domain: tuple[float, float] | None = None) -> float:
    """Degree of ``x`` in ``mf``.

    Continuous inputs outside ``domain`` are clamped to the nearest endpoint
    before evaluation.
    """
    if mf.kind == "singleton":
        return 1.0 if str(x) == mf.category else 0.0
    x = float(x)
    if math.isnan(x):
        raise FuzzyModelError("membership of NaN is undefined")
    if domain is not None:
        x = min(max(x, domain[0]), domain[1])
    if mf.kind == "triangular":
        a, b, c = mf.params
        if x == b:
            return 1.0
        if x <= a or x >= c:
            return 0.0
        return _ramp_up(x, a, b) if x < b else (c - x) / (c - b)
    a, b, c, d = mf.params
    if b <= x <= c:
        return 1.0
    if x <= a or x >= d:
        return 0.0
    return _ramp_up(x, a, b) if x < b else (d - x) / (d - c)


# --------------------------------------------------------------------------
# variables
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class FuzzyTerm:
    label: str
    membership: MembershipFunction

    def __post_init__(self) -> None:
        if not self.label or not self.label.strip():
            raise FuzzyModelError("term label must be non-empty")


@dataclass(frozen=True)
class LinguisticVariable:
    """A named input with an ordered partition of fuzzy terms.

    ``domain`` is ``(lo, hi)`` for continuous variables and the tuple of
    categories for categorical ones.
    """

    name: str
    kind: str
    domain: tuple
    terms: tuple[FuzzyTerm, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "terms", tuple(self.terms))
        object.__setattr__(self, "domain", tuple(self.domain))
        if not self.name:
            raise FuzzyModelError("variable name must be non-empty")
        labels = [t.label for t in self.terms]
        if len(set(labels)) != len(labels):
            raise FuzzyModelError(f"duplicate term labels in variable {self.name!r}: {labels}")
        if self.kind == "continuous":
            if len(self.domain) != 2 or float(self.domain[0]) > float(self.domain[1]):
                raise FuzzyModelError(f"variable {self.name!r}: continuous domain must be (lo, hi) with lo <= hi")
            object.__setattr__(self, "domain", (float(self.domain[0]), float(self.domain[1])))
            degenerate = self.domain[0] == self.domain[1]
            if len(self.terms) < (1 if degenerate else 2):
                raise FuzzyModelError(f"continuous variable {self.name!r} needs at least 2 terms")
            if any(t.membership.kind == "singleton" for t in self.terms):
                raise FuzzyModelError(f"continuous variable {self.name!r} cannot hold singleton terms")
            gap = _coverage_gap(self.domain, [t.membership for t in self.terms])
            if gap is not None:
                raise FuzzyModelError(f"variable {self.name!r}: no term has positive membership at {gap}")
        elif self.kind == "categorical":
            cats = [str(c) for c in self.domain]
            object.__setattr__(self, "domain", tuple(cats))
            if len(set(cats)) != len(cats) or not cats:
                raise FuzzyModelError(f"categorical variable {self.name!r} needs distinct categories")
            term_cats = [t.membership.category for t in self.terms]
            if any(t.membership.kind != "singleton" for t in self.terms) or sorted(term_cats) != sorted(cats):
                raise FuzzyModelError(
                    f"categorical variable {self.name!r} needs exactly one singleton term per category"
                )
        else:
            raise FuzzyModelError(f"variable {self.name!r}: unknown kind {self.kind!r}")

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(t.label for t in self.terms)

    def term_index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise FuzzyModelError(f"variable {self.name!r} has no term {label!r}") from None


def _positive_region(mf: MembershipFunction) -> tuple[float, bool, float, bool]:
    """Where ``mf`` is > 0, as ``(lo, lo_closed, hi, hi_closed)``."""
    p = mf.params
    left, right = (p[0], p[1]), (p[-2], p[-1])
    return left[0], left[0] == left[1], right[1], right[0] == right[1]


def _coverage_gap(domain: tuple[float, float], mfs: Sequence[MembershipFunction]) -> float | None:
    """First point of ``domain`` where every membership is 0, or ``None`` if covered."""
    lo, hi = domain
    reach, included = lo, False  # [lo, reach) is covered, plus reach itself if ``included``
    # at equal starts, closed intervals first so they can cover the start point
    for a, a_closed, b, b_closed in sorted((_positive_region(m) for m in mfs), key=lambda r: (r[0], not r[1])):
        if reach > hi or (reach == hi and included):
            break
        if a > reach or (a == reach and not (included or a_closed)):
            return reach
        if b > reach:
            reach, included = b, b_closed
        elif b == reach:
            included = included or b_closed
    if reach > hi or (reach == hi and included):
        return None
    return reach


def fuzzify(variable: LinguisticVariable, x: Any) -> tuple[float, ...]:
    """Membership degree of ``x`` in every term of ``variable``, in term order."""
    if variable.kind == "categorical":
        if str(x) not in variable.domain:
            raise FuzzyModelError(
                f"variable {variable.name!r}: unknown category {x!r} (expected one of {list(variable.domain)})"
            )
        return tuple(membership_degree(t.membership, x) for t in variable.terms)
    return tuple(membership_degree(t.membership, x, variable.domain) for t in variable.terms)


# --------------------------------------------------------------------------
# rules and models
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class FuzzyRule:
    """``IF x_i is A_i AND ... THEN class WITH weight``.

    ``antecedents`` is a sorted tuple of ``(variable index, term index)``;
    variables that do not appear are "don't care".
    """

    antecedents: tuple[tuple[int, int], ...]
    consequent: CrossingLabel
    weight: float
    id: int = 0

    def __post_init__(self) -> None:
        ants = tuple(sorted((int(v), int(t)) for v, t in dict(self.antecedents).items()))
        if len(ants) != len(self.antecedents):
            raise FuzzyModelError(f"rule {self.id}: a variable appears twice in the antecedent")
        if not ants:
            raise FuzzyModelError(f"rule {self.id}: at least one antecedent is required")
        object.__setattr__(self, "antecedents", ants)
        object.__setattr__(self, "consequent", CrossingLabel(self.consequent))
        w = float(self.weight)
        if not 0.0 <= w <= 1.0:
            raise FuzzyModelError(f"rule {self.id}: weight {w} outside [0, 1]")
        object.__setattr__(self, "weight", w)

    @property
    def variables(self) -> frozenset[int]:
        return frozenset(v for v, _ in self.antecedents)


@dataclass(frozen=True)
class FisModel:
    """Immutable predictor: variables, rule base and inference settings."""

    variables: tuple[LinguisticVariable, ...]
    rules: tuple[FuzzyRule, ...]
    tnorm: TNorm = TNorm.PRODUCT
    decision: Decision = Decision.WEIGHTED_VOTE
    abstain_threshold: float = 0.0
    display: Mapping[str, str] = field(default_factory=dict)
    metadata: Mapping[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "rules", tuple(self.rules))
        object.__setattr__(self, "tnorm", TNorm(self.tnorm))
        object.__setattr__(self, "decision", Decision(self.decision))
        object.__setattr__(self, "display", dict(self.display))
        if self.abstain_threshold < 0:
            raise FuzzyModelError("abstention threshold must be >= 0")
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            raise FuzzyModelError(f"duplicate variable names: {names}")
        ids = [r.id for r in self.rules]
        if len(set(ids)) != len(ids):
            raise FuzzyModelError("rule ids must be unique")
        for rule in self.rules:
            for v, t in rule.antecedents:
                if not 0 <= v < len(self.variables) or not 0 <= t < len(self.variables[v].terms):
                    raise FuzzyModelError(f"rule {rule.id} references missing variable/term ({v}, {t})")

    def variable_index(self, name: str) -> int:
        for i, v in enumerate(self.variables):
            if v.name == name:
                return i
        raise FuzzyModelError(f"model has no variable {name!r}")

    def rule(self, rule_id: int) -> FuzzyRule:
        for r in self.rules:
            if r.id == rule_id:
                return r
        raise FuzzyModelError(f"model has no rule {rule_id}")

    def with_rules(self, rules: Sequence[FuzzyRule]) -> "FisModel":
        return FisModel(self.variables, tuple(rules), self.tnorm, self.decision,
                        self.abstain_threshold, self.display, self.metadata)


# --------------------------------------------------------------------------
# inference
# --------------------------------------------------------------------------


def _features(sample: Any) -> Mapping[str, Any]:
    return sample.features if hasattr(sample, "features") else sample


def _conjunction(degrees: Sequence[float], tnorm: TNorm) -> float:
    if tnorm is TNorm.MINIMUM:
        return min(degrees)
    out = 1.0
    for d in degrees:
        out *= d
    return out


def firing_strength(rule: FuzzyRule, sample: Any, model: FisModel) -> float:
    """Conjunction of the rule's antecedent memberships for one sample."""
    values = _features(sample)
    degrees = []
    for v, t in rule.antecedents:
        var = model.variables[v]
        if var.name not in values or values[var.name] is None:
            raise FuzzyModelError(f"rule {rule.id}: sample has no value for variable {var.name!r}")
        degrees.append(fuzzify(var, values[var.name])[t])
    return _conjunction(degrees, model.tnorm)


@dataclass(frozen=True)
class ActivationTrace:
    """What happened inside one prediction.

    ``firing`` and ``association`` hold only rules with non-zero firing,
    keyed by rule id. ``top_rule`` is the rule with the largest association
    degree (lowest id on ties), or ``None`` when nothing fired.
    """

    firing: Mapping[int, float]
    association: Mapping[int, float]
    scores: Mapping[CrossingLabel, float]
    chosen: CrossingLabel
    abstained: bool
    top_rule: int | None
    decision: Decision

    @property
    def activated(self) -> tuple[int, ...]:
        """Fired rule ids, strongest association first."""
        return tuple(sorted(self.association, key=lambda rid: (-self.association[rid], rid)))


def _decide(
    association: Mapping[int, float],
    consequents: Mapping[int, CrossingLabel],
    decision: Decision,
    threshold: float,
) -> tuple[dict[CrossingLabel, float], CrossingLabel, bool, int | None]:
    per_class: dict[CrossingLabel, list[float]] = {c: [] for c in CrossingLabel}
    for rid, a in association.items():
        per_class[consequents[rid]].append(a)
    if decision is Decision.WEIGHTED_VOTE:
        scores = {c: math.fsum(v) for c, v in per_class.items()}
    else:
        scores = {c: max(v, default=0.0) for c, v in per_class.items()}
    cross, stay = scores[CrossingLabel.CROSSING], scores[CrossingLabel.NOT_CROSSING]
    best = max(cross, stay)
    top = None
    positive = [rid for rid, a in association.items() if a > 0]
    if positive:
        top = min(positive, key=lambda rid: (-association[rid], rid))
    if best <= threshold or cross == stay:
        return scores, CrossingLabel.NOT_CROSSING, True, None
    return scores, CrossingLabel.CROSSING if cross > stay else CrossingLabel.NOT_CROSSING, False, top


def infer(model: FisModel, sample: Any) -> tuple[CrossingLabel, ActivationTrace]:
    """Classify one sample and record which rules fired.

    Weighted vote sums ``firing * weight`` per class; winner-rule keeps the
    per-class maximum. Ties and scores at or below the abstention threshold
    resolve to NOT_CROSSING with ``abstained`` set.
    """
    if not model.rules:
        raise FuzzyModelError("cannot infer with an empty rule base")
    values = _features(sample)
    needed = sorted({v for r in model.rules for v, _ in r.antecedents})
    fuzzified: dict[int, tuple[float, ...]] = {}
    for v in needed:
        var = model.variables[v]
        if var.name not in values or values[var.name] is None:
            users = [r.id for r in model.rules if v in r.variables]
            raise FuzzyModelError(f"rule {users[0]}: sample has no value for variable {var.name!r}")
        fuzzified[v] = fuzzify(var, values[var.name])
    firing: dict[int, float] = {}
    association: dict[int, float] = {}
    for rule in model.rules:
        f = _conjunction([fuzzified[v][t] for v, t in rule.antecedents], model.tnorm)
        if f > 0:
            firing[rule.id] = f
            association[rule.id] = f * rule.weight
    consequents = {r.id: r.consequent for r in model.rules}
    scores, chosen, abstained, top = _decide(association, consequents, model.decision, model.abstain_threshold)
    trace = ActivationTrace(firing, association, scores, chosen, abstained, top, model.decision)
    return chosen, trace


def predict(model: FisModel, samples: Sequence[Any]) -> list[CrossingLabel]:
    return [infer(model, s)[0] for s in samples]
