"""Rule rendering, per-prediction explanations and corpus-level activation ledgers."""

from __future__ import annotations

import csv
import io as _io
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

from .fuzzy import ActivationTrace, CrossingLabel, FisModel, FuzzyRule, fuzzify, infer


@dataclass
class ActivationLedger:
    """Counts over many traces.

    ``activations[r]`` counts predictions where rule ``r`` fired at all;
    ``top[r]`` counts predictions where it had the largest association
    degree. Abstained predictions increment only ``total``/``abstained``.
    Ledgers combine with ``+`` (associative and commutative).
    """

    activations: Counter = field(default_factory=Counter)
    top: Counter = field(default_factory=Counter)
    total: int = 0
    abstained: int = 0

    def record(self, trace: ActivationTrace) -> "ActivationLedger":
        self.total += 1
        if trace.abstained:
            self.abstained += 1
        for rid in trace.firing:
            self.activations[rid] += 1
        if not trace.abstained and trace.top_rule is not None:
            self.top[trace.top_rule] += 1
        return self

    def __add__(self, other: "ActivationLedger") -> "ActivationLedger":
        return ActivationLedger(self.activations + other.activations, self.top + other.top,
                                self.total + other.total, self.abstained + other.abstained)

    merge = __add__

    @property
    def decided(self) -> int:
        return self.total - self.abstained


def record(trace: ActivationTrace, ledger: ActivationLedger | None = None) -> ActivationLedger:
    return (ledger if ledger is not None else ActivationLedger()).record(trace)


def ledger_from(traces: Iterable[ActivationTrace]) -> ActivationLedger:
    ledger = ActivationLedger()
    for t in traces:
        ledger.record(t)
    return ledger


def _ranked(counts: Counter, denominator: int, k: int | None, rule_ids: Iterable[int] | None):
    ids = set(rule_ids) if rule_ids is not None else {r for r, c in counts.items() if c > 0}
    ranked = sorted(ids, key=lambda r: (-counts.get(r, 0), r))
    if k is not None:
        ranked = ranked[:k]
    return [(r, 100.0 * counts.get(r, 0) / denominator if denominator else 0.0) for r in ranked]


def top_rules(ledger: ActivationLedger, k: int | None = 10,
              rule_ids: Iterable[int] | None = None) -> list[tuple[int, float]]:
    """Rules ranked by how often they were the strongest rule, as % of non-abstained predictions.

    Ties go to the lower rule id. Passing ``rule_ids`` also lists rules that
    never won (at 0%).
    """
    if ledger.total <= 0:
        raise ValueError("ledger is empty")
    return _ranked(ledger.top, ledger.decided, k, rule_ids)


def fired_rules(ledger: ActivationLedger, k: int | None = 10,
                rule_ids: Iterable[int] | None = None) -> list[tuple[int, float]]:
    """Rules ranked by how often they fired at all, as % of all predictions."""
    if ledger.total <= 0:
        raise ValueError("ledger is empty")
    return _ranked(ledger.activations, ledger.total, k, rule_ids)


def feature_usage(ledger: ActivationLedger, model: FisModel, k: int | None = 10) -> dict[str, int]:
    """How many of the top-k rules mention each variable."""
    usage = {v.name: 0 for v in model.variables}
    for rid, _ in top_rules(ledger, k):
        for v, _t in model.rule(rid).antecedents:
            usage[model.variables[v].name] += 1
    return usage


# --------------------------------------------------------------------------
# rendering
# --------------------------------------------------------------------------


def _names(model: FisModel, display: Mapping[str, str] | None) -> Mapping[str, str]:
    return model.display if display is None else display


def render_rule(rule: FuzzyRule, model: FisModel, display: Mapping[str, str] | None = None) -> str:
    """``IF (Var IS term) AND ... THEN (Cross IS crossing) WEIGHT 0.66``.

    ``display`` maps variable names (``"zebra_crossing"``) and
    ``"variable.term"`` keys to the words shown; it defaults to the model's.
    """
    names = _names(model, display)
    parts = []
    for v, t in rule.antecedents:
        var = model.variables[v]
        label = var.terms[t].label
        parts.append(f"({names.get(var.name, var.name)} IS {names.get(f'{var.name}.{label}', label)})")
    return f"IF {' AND '.join(parts)} THEN (Cross IS {rule.consequent.text}) WEIGHT {rule.weight:.2f}"


def format_activation(rule_id: int, percentage: float) -> str:
    return f"Rule No. {rule_id} was triggered {percentage:.2f}% of the time"


@dataclass(frozen=True)
class Explanation:
    chosen: CrossingLabel
    abstained: bool
    scores: Mapping[CrossingLabel, float]
    fired: tuple[tuple[int, float, float, str], ...]
    inputs: tuple[tuple[str, Any, tuple[tuple[str, float], ...]], ...]


def explain(model: FisModel, sample: Any, display: Mapping[str, str] | None = None) -> Explanation:
    """Structured explanation: scores, fired rules (strongest first) and fuzzified inputs."""
    chosen, trace = infer(model, sample)
    fired = tuple((rid, trace.association[rid], trace.firing[rid], render_rule(model.rule(rid), model, display))
                  for rid in trace.activated)
    values = sample.features if hasattr(sample, "features") else sample
    used = sorted({v for r in model.rules for v, _ in r.antecedents})
    inputs = []
    for v in used:
        var = model.variables[v]
        degrees = fuzzify(var, values[var.name])
        inputs.append((var.name, values[var.name], tuple(zip(var.labels, degrees))))
    return Explanation(chosen, trace.abstained, dict(trace.scores), fired, tuple(inputs))


def explain_prediction(model: FisModel, sample: Any, display: Mapping[str, str] | None = None) -> str:
    """Plain-text report of one prediction. Membership degrees are printed at full precision."""
    ex = explain(model, sample, display)
    names = _names(model, display)
    cross, stay = ex.scores[CrossingLabel.CROSSING], ex.scores[CrossingLabel.NOT_CROSSING]
    lines = [f"Prediction: {ex.chosen.text}" + (" (abstained)" if ex.abstained else "")]
    lines.append(f"Scores: crossing={cross:.6f} not crossing={stay:.6f} ({model.decision.value})")
    if not ex.fired:
        lines.append("No rule matched this sample; defaulting to not crossing.")
    else:
        lines.append("Fired rules (strongest first):")
        for rid, assoc, firing, text in ex.fired:
            lines.append(f"  R{rid}: degree {assoc!r} (firing {firing!r}) {text}")
    lines.append("Inputs:")
    for name, value, degrees in ex.inputs:
        shown = ", ".join(f"{names.get(f'{name}.{label}', label)}={d!r}" for label, d in degrees)
        lines.append(f"  {names.get(name, name)} = {value}: {shown}")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# ledger reports
# --------------------------------------------------------------------------


def ledger_text(ledger: ActivationLedger, model: FisModel, k: int = 10,
                display: Mapping[str, str] | None = None) -> str:
    lines = [
        f"Predictions: {ledger.total} (abstained: {ledger.abstained})",
        f"Rules in model: {len(model.rules)}; rules that fired at least once: "
        f"{sum(1 for r in model.rules if ledger.activations.get(r.id, 0) > 0)}",
        f"Top {min(k, len(model.rules))} rules by top-firing share:",
    ]
    ids = [r.id for r in model.rules]
    fired = dict(fired_rules(ledger, None, ids))
    for rid, pct in top_rules(ledger, k, ids):
        lines.append(f"  {format_activation(rid, pct)} (fired in {fired[rid]:.2f}% of predictions)")
        lines.append(f"    {render_rule(model.rule(rid), model, display)}")
    usage = feature_usage(ledger, model, k)
    names = _names(model, display)
    lines.append("Feature usage in these rules: " +
                 ", ".join(f"{names.get(n, n)}={c}" for n, c in sorted(usage.items(), key=lambda x: (-x[1], x[0]))))
    return "\n".join(lines) + "\n"


def ledger_records(ledger: ActivationLedger, model: FisModel, display: Mapping[str, str] | None = None) -> str:
    """One CSV record per rule: id, rendered text, counts and percentages."""
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["rule_id", "rule", "activations", "top_firing", "top_percentage", "fired_percentage"])
    ids = [r.id for r in model.rules]
    fired = dict(fired_rules(ledger, None, ids))
    for rid, pct in top_rules(ledger, None, ids):
        w.writerow([rid, render_rule(model.rule(rid), model, display), ledger.activations.get(rid, 0),
                    ledger.top.get(rid, 0), f"{pct:.4f}", f"{fired[rid]:.4f}"])
    return buf.getvalue()


def plot_data(ledger: ActivationLedger, k: int = 10) -> str:
    """Two-column table (rule, percentage) for a bar chart of the top-k rules."""
    lines = ["rule\tpercentage"]
    lines += [f"R{rid}\t{pct:.4f}" for rid, pct in top_rules(ledger, k)]
    return "\n".join(lines) + "\n"


def ledger_for(model: FisModel, samples: Sequence[Any]) -> ActivationLedger:
    return ledger_from(infer(model, s)[1] for s in samples)
