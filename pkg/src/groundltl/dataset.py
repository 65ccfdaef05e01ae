"""Lifted and grounded corpora: permutation augmentation, holdout splits, statistics."""

from __future__ import annotations

import itertools
import json
import random
import re
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from statistics import mean
from typing import Iterable, Sequence

from . import automaton, patterns
from .ltl import Formula, parse_prefix, print_prefix, props, skeletonize, substitute


class DatasetError(ValueError):
    pass


class PlaceholderMismatch(DatasetError):
    pass


class TooFewClasses(DatasetError):
    pass


ORIGINS = ("seed", "permuted", "grounded")
REGIMES = ("utterance_holdout", "formula_holdout", "type_holdout")


@dataclass(frozen=True)
class Sample:
    utterance: str
    formula: Formula
    template_id: str | None
    props: tuple[str, ...]
    origin: str = "seed"

    def __post_init__(self):
        object.__setattr__(self, "props", tuple(self.props))
        if self.origin not in ORIGINS:
            raise DatasetError(f"unknown origin {self.origin!r}")

    @property
    def ltl_prefix(self) -> str:
        return print_prefix(self.formula)

    @property
    def prop_count(self) -> int:
        return len(set(props(self.formula)))

    @property
    def skeleton(self) -> Formula:
        return skeletonize(self.formula)[0]

    def to_json(self) -> dict:
        return {
            "utterance": self.utterance,
            "ltl_prefix": self.ltl_prefix,
            "template_id": self.template_id,
            "props": list(self.props),
            "origin": self.origin,
        }

    @classmethod
    def from_json(cls, obj: dict) -> Sample:
        return cls(obj["utterance"], parse_prefix(obj["ltl_prefix"]), obj.get("template_id"), obj["props"], obj.get("origin", "seed"))


def read_jsonl(path: str | Path) -> list[Sample]:
    with open(path, encoding="utf-8") as fh:
        return [Sample.from_json(json.loads(line)) for line in fh if line.strip()]


def write_jsonl(samples: Iterable[Sample], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in samples:
            fh.write(json.dumps(s.to_json(), ensure_ascii=False) + "\n")


def seed_corpus(seed: int = 0) -> list[Sample]:
    """The synthetic seed corpus, regenerated from the seed tables."""
    from .seeds import seed_records

    return [Sample.from_json(r) for r in seed_records(seed)]


def shipped_seed_corpus() -> list[Sample]:
    """The seed corpus file shipped with the package."""
    from . import data_file

    return read_jsonl(data_file("seed_corpus.jsonl"))


# --- augmentation ------------------------------------------------------------------


def _rename_words(text: str, mapping: dict[str, str]) -> str:
    pattern = re.compile(r"\b(" + "|".join(re.escape(p) for p in sorted(mapping, key=len, reverse=True)) + r")\b")
    return pattern.sub(lambda m: mapping[m.group(1)], text)


def _mentions(text: str, prop: str) -> bool:
    return re.search(r"\b" + re.escape(prop) + r"\b", text) is not None


def permute_augment(samples: Iterable[Sample], dedup: bool = True, cap: int | None = None) -> list[Sample]:
    """Every consistent joint renaming of each sample's propositions in its
    utterance and formula. ``cap`` bounds the permutations kept per sample."""
    out: list[Sample] = []
    seen: set[tuple[str, str]] = set()
    for s in samples:
        names = list(dict.fromkeys(props(s.formula)))
        for p in names:
            if not _mentions(s.utterance, p):
                raise PlaceholderMismatch(f"{p!r} is in the formula but not in {s.utterance!r}")
        for i, perm in enumerate(itertools.permutations(names)):
            if cap is not None and i >= cap:
                break
            mapping = dict(zip(names, perm))
            identity = all(a == b for a, b in mapping.items())
            new = Sample(
                _rename_words(s.utterance, mapping),
                substitute(s.formula, mapping),
                s.template_id,
                tuple(mapping.get(p, p) for p in s.props),
                s.origin if identity else "permuted",
            )
            key = (new.utterance, new.ltl_prefix)
            if dedup and key in seen:
                continue
            seen.add(key)
            out.append(new)
    return out


# --- splits -----------------------------------------------------------------------


@dataclass(frozen=True)
class SplitSpec:
    regime: str
    folds: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise DatasetError(f"unknown regime {self.regime!r}; expected one of {REGIMES}")
        if self.folds < 2:
            raise DatasetError("folds must be at least 2")


@dataclass
class _UnionFind:
    parent: dict = field(default_factory=dict)

    def find(self, x):
        self.parent.setdefault(x, x)
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, x, y):
        rx, ry = self.find(x), self.find(y)
        if rx != ry:
            self.parent[max(rx, ry)] = min(rx, ry)


def equivalence_classes(formulas: Sequence[Formula]) -> list[int]:
    """Class index per formula; formulas share a class iff equivalent."""
    uf = _UnionFind()
    distinct = list(dict.fromkeys(formulas))
    buckets: dict[bytes | None, list[int]] = defaultdict(list)
    for i, f in enumerate(distinct):
        buckets[patterns.fingerprint(f)].append(i)
    for members in buckets.values():
        for x, y in itertools.combinations(members, 2):
            if uf.find(x) != uf.find(y) and automaton.equivalent(distinct[x], distinct[y]):
                uf.union(x, y)
    index = {f: uf.find(i) for i, f in enumerate(distinct)}
    return [index[f] for f in formulas]


def _family(s: Sample) -> str:
    tid = s.template_id or patterns.classify(s.formula)
    return tid if tid == patterns.UNKNOWN else patterns.family_of(tid)


def _greedy(classes: list, folds: int, rng: random.Random) -> dict:
    """Largest class first, each to the currently smallest fold."""
    sizes: dict = defaultdict(int)
    for c in classes:
        sizes[c] += 1
    order = sorted(sizes, key=lambda c: (-sizes[c], str(c)))
    load = [0] * folds
    where = {}
    for c in order:
        k = min(range(folds), key=lambda j: (load[j], j))
        where[c] = k
        load[k] += sizes[c]
    return where


def make_split(samples: Sequence[Sample], spec: SplitSpec) -> list[int]:
    """Fold index for every sample."""
    rng = random.Random(spec.seed)
    match spec.regime:
        case "utterance_holdout":
            texts = sorted({s.utterance for s in samples})
            if len(texts) < spec.folds:
                raise TooFewClasses(f"{len(texts)} utterances for {spec.folds} folds")
            rng.shuffle(texts)
            where = {t: i % spec.folds for i, t in enumerate(texts)}
            return [where[s.utterance] for s in samples]
        case "formula_holdout":
            keys = equivalence_classes([s.skeleton for s in samples])
        case "type_holdout":
            keys = [_family(s) for s in samples]
    if len(set(keys)) < spec.folds:
        raise TooFewClasses(f"{len(set(keys))} classes for {spec.folds} folds")
    where = _greedy(keys, spec.folds, rng)
    return [where[k] for k in keys]


def fold(samples: Sequence[Sample], assignment: Sequence[int], k: int) -> tuple[list[Sample], list[Sample]]:
    """(train, test) with fold ``k`` held out."""
    train = [s for s, f in zip(samples, assignment) if f != k]
    test = [s for s, f in zip(samples, assignment) if f == k]
    return train, test


def vocabulary(samples: Iterable[Sample]) -> set[str]:
    return {p for s in samples for p in props(s.formula)}


def vocabulary_disjointness(train: Iterable[Sample], test: Iterable[Sample]) -> bool:
    return not (vocabulary(train) & vocabulary(test))


# --- statistics ------------------------------------------------------------------------


def corpus_stats(samples: Sequence[Sample]) -> dict:
    if not samples:
        return {"count": 0, "distinct_formulas": 0, "props": None, "length": None, "vocabulary": 0}
    counts = [s.prop_count for s in samples]
    lengths = [len(s.ltl_prefix.split()) for s in samples]
    return {
        "count": len(samples),
        "distinct_formulas": len({s.ltl_prefix for s in samples}),
        "props": {"min": min(counts), "max": max(counts), "mean": mean(counts)},
        "length": {"min": min(lengths), "max": max(lengths), "mean": mean(lengths)},
        "vocabulary": len(vocabulary(samples)),
    }


# --- grounding ---------------------------------------------------------------------------


def ground_corpus(
    lifted: Sequence[Sample],
    re_bank: dict[str, Sequence[str]],
    keys: Iterable[str],
    seed: int = 0,
    sample_size: int | None = None,
) -> list[Sample]:
    """Replace placeholders by referring expressions of randomly drawn landmarks.

    ``re_bank`` maps a landmark key to its referring expressions; ``keys`` are
    the landmarks available (e.g. the keys of one city's semantic database).
    With ``sample_size`` only that many lifted samples are drawn.
    """
    keys = sorted(set(keys))
    if not re_bank or not keys:
        raise DatasetError("empty referring-expression bank or landmark set")
    missing = [k for k in keys if not re_bank.get(k)]
    if missing:
        raise DatasetError(f"no referring expressions for {missing}")
    rng = random.Random(seed)
    chosen = list(lifted) if sample_size is None else rng.sample(list(lifted), sample_size)
    out = []
    for s in chosen:
        names = list(dict.fromkeys(props(s.formula)))
        if len(names) > len(keys):
            raise DatasetError(f"{len(names)} placeholders but only {len(keys)} landmarks")
        picked = rng.sample(keys, len(names))
        to_key = dict(zip(names, picked))
        to_re = {p: rng.choice(list(re_bank[k])) for p, k in to_key.items()}
        out.append(
            Sample(
                _rename_words(s.utterance, to_re),
                substitute(s.formula, to_key),
                s.template_id,
                tuple(to_key.get(p, p) for p in s.props),
                "grounded",
            )
        )
    return out


def vocabulary_shift_split(
    lifted: Sequence[Sample],
    re_bank: dict[str, Sequence[str]],
    folds: int = 2,
    seed: int = 0,
) -> list[list[Sample]]:
    """Grounded folds whose landmark vocabularies are pairwise disjoint: the
    keys are dealt into ``folds`` groups and each fold's share of the lifted
    samples is grounded with its own group only."""
    rng = random.Random(seed)
    keys = sorted(re_bank)
    rng.shuffle(keys)
    groups = [keys[i::folds] for i in range(folds)]
    order = list(lifted)
    rng.shuffle(order)
    shares = [order[i::folds] for i in range(folds)]
    return [ground_corpus(share, re_bank, group, seed=seed + i) for i, (share, group) in enumerate(zip(shares, groups))]
