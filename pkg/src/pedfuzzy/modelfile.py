"""Text (JSON) persistence for :class:`FisModel`.

Layout, version 1::

    {
      "format": "pedfuzzy-model",
      "format_version": 1,
      "inference": {"tnorm": ..., "decision": ..., "abstain_threshold": ...},
      "variables": [{"name", "kind", "domain", "terms": [{"label", "kind", "params" | "category"}]}],
      "display": {"zebra_crossing": "CrossLevel", "zebra_crossing.present": "easy", ...},
      "rules": [{"id", "if": [[variable, term], ...], "then": "crossing" | "not crossing", "weight"}],
      "metadata": {... provenance, mining config, training summary ...}
    }

Antecedents are stored by variable name and term label. Floats are written
with ``repr`` precision so ``load(save(m))`` re-serialises byte-identically.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

from .fuzzy import (
    CrossingLabel,
    FisModel,
    FuzzyModelError,
    FuzzyRule,
    FuzzyTerm,
    LinguisticVariable,
    MembershipFunction,
)

FORMAT = "pedfuzzy-model"
FORMAT_VERSION = 1


def model_to_dict(model: FisModel) -> dict[str, Any]:
    variables = []
    for var in model.variables:
        terms = []
        for t in var.terms:
            mf = t.membership
            entry: dict[str, Any] = {"label": t.label, "kind": mf.kind}
            if mf.kind == "singleton":
                entry["category"] = mf.category
            else:
                entry["params"] = list(mf.params)
            terms.append(entry)
        variables.append({"name": var.name, "kind": var.kind, "domain": list(var.domain), "terms": terms})
    rules = [
        {
            "id": r.id,
            "if": [[model.variables[v].name, model.variables[v].terms[t].label] for v, t in r.antecedents],
            "then": r.consequent.text,
            "weight": r.weight,
        }
        for r in model.rules
    ]
    return {
        "format": FORMAT,
        "format_version": FORMAT_VERSION,
        "inference": {
            "tnorm": model.tnorm.value,
            "decision": model.decision.value,
            "abstain_threshold": model.abstain_threshold,
        },
        "variables": variables,
        "display": dict(sorted(model.display.items())),
        "rules": rules,
        "metadata": model.metadata,
    }


def model_from_dict(data: dict[str, Any]) -> FisModel:
    if data.get("format") != FORMAT:
        raise FuzzyModelError(f"not a model file (format={data.get('format')!r})")
    if data.get("format_version") != FORMAT_VERSION:
        raise FuzzyModelError(f"unsupported model format version {data.get('format_version')!r}")
    variables = []
    for v in data["variables"]:
        terms = []
        for t in v["terms"]:
            if t["kind"] == "singleton":
                mf = MembershipFunction.singleton(t["category"])
            else:
                mf = MembershipFunction(t["kind"], tuple(t["params"]))
            terms.append(FuzzyTerm(t["label"], mf))
        variables.append(LinguisticVariable(v["name"], v["kind"], tuple(v["domain"]), tuple(terms)))
    names = [v.name for v in variables]
    rules = []
    for r in data["rules"]:
        ants = []
        for name, label in r["if"]:
            if name not in names:
                raise FuzzyModelError(f"rule {r['id']} references unknown variable {name!r}")
            vi = names.index(name)
            ants.append((vi, variables[vi].term_index(label)))
        rules.append(FuzzyRule(tuple(ants), CrossingLabel.parse(r["then"]), r["weight"], r["id"]))
    inf = data["inference"]
    return FisModel(
        tuple(variables),
        tuple(rules),
        tnorm=inf["tnorm"],
        decision=inf["decision"],
        abstain_threshold=inf["abstain_threshold"],
        display=data.get("display", {}),
        metadata=data.get("metadata", {}),
    )


def dumps_model(model: FisModel) -> str:
    return json.dumps(model_to_dict(model), indent=2, ensure_ascii=False) + "\n"


def loads_model(text: str) -> FisModel:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FuzzyModelError(f"model file is not valid JSON: {exc}") from exc
    return model_from_dict(data)


def save_model(model: FisModel, path: str | Path) -> None:
    from .io import atomic_write_text

    atomic_write_text(path, dumps_model(model))


def load_model(path: str | Path) -> FisModel:
    return loads_model(Path(path).read_text(encoding="utf-8"))
