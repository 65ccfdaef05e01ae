"""Accuracy, breakdowns and the error taxonomy for translation outputs."""

from __future__ import annotations

import csv
import json
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from . import automaton
from .dataset import Sample
from .ltl import Formula, LTLSyntaxError, parse_prefix, print_prefix, props
from .patterns import UNKNOWN, classify

SYNTAX = "SyntaxError"
MISCLASSIFIED = "MisclassifiedType"
PROPOSITIONS = "IncorrectPropositions"
PERMUTATION = "IncorrectPermutation"
UNKNOWN_TEMPLATE = "UnknownTemplate"
CATEGORIES = (SYNTAX, MISCLASSIFIED, PROPOSITIONS, PERMUTATION, UNKNOWN_TEMPLATE)
MODES = ("exact_match", "semantic_equivalence")


def _parse(pred: Formula | str | None) -> Formula | None:
    if isinstance(pred, Formula):
        return pred
    if pred is None:
        return None
    try:
        return parse_prefix(pred)
    except LTLSyntaxError:
        return None


def _same_language(gold: Formula, pred: Formula) -> bool:
    try:
        return automaton.equivalent(gold, pred).equivalent
    except automaton.FormulaTooLarge:
        return False


def categorize_error(gold: Formula, pred: Formula | str | None, check_equivalence: bool = True) -> str | None:
    """Error category of ``pred`` against ``gold``; ``None`` when the two are
    equivalent (only checked with ``check_equivalence``). Categories are
    tried in order syntax, type, propositions, permutation; anything left is
    an unknown template."""
    f = _parse(pred)
    if f is None:
        return SYNTAX
    if check_equivalence and _same_language(gold, f):
        return None
    t_gold, t_pred = classify(gold), classify(f)
    if t_gold != UNKNOWN and t_pred != UNKNOWN and t_gold != t_pred:
        return MISCLASSIFIED
    if len(set(props(gold))) != len(set(props(f))):
        return PROPOSITIONS
    if t_pred != UNKNOWN and t_pred == t_gold:
        return PERMUTATION
    return UNKNOWN_TEMPLATE


@dataclass(frozen=True)
class Bucket:
    n: int
    correct: int

    @property
    def accuracy(self) -> float:
        return self.correct / self.n if self.n else 0.0

    def to_json(self) -> dict:
        return {"n": self.n, "correct": self.correct, "accuracy": self.accuracy}


def _buckets(pairs: Iterable[tuple[object, bool]]) -> dict[str, Bucket]:
    n: Counter = Counter()
    ok: Counter = Counter()
    for key, good in pairs:
        n[str(key)] += 1
        ok[str(key)] += bool(good)
    return {k: Bucket(n[k], ok[k]) for k in sorted(n, key=_natural)}


def _natural(key: str):
    return (0, int(key), "") if key.isdigit() else (1, 0, key)


@dataclass(frozen=True)
class EvalReport:
    mode: str
    total: int
    correct: int
    per_template: dict[str, Bucket]
    per_prop_count: dict[str, Bucket]
    errors: dict[str, int]
    rer_by_count: dict[str, Bucket] = field(default_factory=dict)
    reg_by_length: dict[str, Bucket] = field(default_factory=dict)

    @property
    def accuracy(self) -> float:
        return self.correct / self.total if self.total else 0.0

    def to_json(self) -> dict:
        return {
            "mode": self.mode,
            "total": self.total,
            "correct": self.correct,
            "accuracy": self.accuracy,
            "per_template": {k: b.to_json() for k, b in self.per_template.items()},
            "per_prop_count": {k: b.to_json() for k, b in self.per_prop_count.items()},
            "errors": dict(self.errors),
            "rer_by_count": {k: b.to_json() for k, b in self.rer_by_count.items()},
            "reg_by_length": {k: b.to_json() for k, b in self.reg_by_length.items()},
        }

    def csv_rows(self) -> list[tuple[str, str, int, int, float]]:
        rows = [("overall", "all", self.total, self.correct, self.accuracy)]
        for name in ("per_template", "per_prop_count", "rer_by_count", "reg_by_length"):
            for key, b in getattr(self, name).items():
                rows.append((name, key, b.n, b.correct, b.accuracy))
        for cat in CATEGORIES:
            rows.append(("errors", cat, self.errors[cat], 0, 0.0))
        return rows

    def write(self, out_dir: str | Path) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        with open(out / "breakdown.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["breakdown", "key", "n", "correct", "accuracy"])
            w.writerows(self.csv_rows())


def is_correct(gold: Formula, pred_text: str, mode: str) -> bool:
    if mode == "exact_match":
        return pred_text.split() == print_prefix(gold).split()
    if mode == "semantic_equivalence":
        f = _parse(pred_text)
        return f is not None and _same_language(gold, f)
    raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")


def score(predictions: Sequence[tuple[Sample, str]], mode: str = "semantic_equivalence") -> EvalReport:
    """Score predicted prefix texts against gold samples. Malformed
    predictions are counted as incorrect, never rejected."""
    outcomes = []
    errors = dict.fromkeys(CATEGORIES, 0)
    for sample, text in predictions:
        good = is_correct(sample.formula, text, mode)
        outcomes.append((sample, good))
        if not good:
            cat = categorize_error(sample.formula, text, check_equivalence=False)
            errors[cat or UNKNOWN_TEMPLATE] += 1
    return EvalReport(
        mode=mode,
        total=len(outcomes),
        correct=sum(good for _, good in outcomes),
        per_template=_buckets((s.template_id, good) for s, good in outcomes),
        per_prop_count=_buckets((s.prop_count, good) for s, good in outcomes),
        errors=errors,
    )


# --- recognition and grounding ---------------------------------------------------------


@dataclass(frozen=True)
class REAnnotation:
    res: tuple[str, ...]
    re_to_key: Mapping[str, str] = field(hash=False)

    @classmethod
    def from_json(cls, obj: dict) -> REAnnotation:
        """Accepts a grounding result (``res`` as objects with ``text``) or
        plain lists of strings."""
        res = tuple(r["text"] if isinstance(r, dict) else r for r in obj.get("res", ()))
        return cls(res, dict(obj.get("re_to_key", {})))


def length_bucket(text: str, width: int = 10) -> str:
    lo = (len(text) // width) * width
    return f"{lo}-{lo + width - 1}"


def rer_reg_scores(gold: Sequence[REAnnotation], pred: Sequence[REAnnotation]) -> dict:
    """Recognition: whole-command set match of expressions, by number of
    gold expressions. Grounding: per gold expression, the predicted key must
    match, by expression length."""
    if len(gold) != len(pred):
        raise ValueError(f"{len(gold)} gold annotations but {len(pred)} predictions")
    rer = [(len(set(g.res)), set(g.res) == set(p.res)) for g, p in zip(gold, pred)]
    reg = []
    for g, p in zip(gold, pred):
        for text in dict.fromkeys(g.res):
            reg.append((text, p.re_to_key.get(text) == g.re_to_key.get(text)))
    rer_by = _buckets(rer)
    reg_by = _buckets((length_bucket(t), ok) for t, ok in reg)
    return {
        "rer_accuracy": sum(ok for _, ok in rer) / len(rer) if rer else 0.0,
        "reg_accuracy": sum(ok for _, ok in reg) / len(reg) if reg else 0.0,
        "rer_by_count": rer_by,
        "reg_by_length": reg_by,
    }


def with_grounding(report: EvalReport, scores: dict) -> EvalReport:
    return EvalReport(
        report.mode,
        report.total,
        report.correct,
        report.per_template,
        report.per_prop_count,
        report.errors,
        scores["rer_by_count"],
        scores["reg_by_length"],
    )


def read_predictions(path: str | Path) -> list[str]:
    """One JSON object per line with a ``prediction`` field, in gold order."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(json.loads(line)["prediction"])
    return out


def error_breakdown(pairs: Iterable[tuple[Formula, str]]) -> dict[str, int]:
    hist: dict[str, int] = defaultdict(int)
    for gold, pred in pairs:
        cat = categorize_error(gold, pred)
        if cat is not None:
            hist[cat] += 1
    return {c: hist[c] for c in CATEGORIES}


__all__ = [
    "CATEGORIES",
    "MISCLASSIFIED",
    "MODES",
    "PERMUTATION",
    "PROPOSITIONS",
    "SYNTAX",
    "UNKNOWN_TEMPLATE",
    "Bucket",
    "EvalReport",
    "REAnnotation",
    "categorize_error",
    "error_breakdown",
    "is_correct",
    "length_bucket",
    "read_predictions",
    "rer_reg_scores",
    "score",
    "with_grounding",
]
