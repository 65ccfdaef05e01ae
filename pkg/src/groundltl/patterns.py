"""Robot-mission specification patterns and the lifted template set.

Each family is instantiated for a number of waypoints (or, for the
restricted-avoidance families, a number of visits to a single waypoint).
The default arity ranges produce 47 pairwise inequivalent templates.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import automaton
from .ltl import (
    CANONICAL_PROPS,
    And,
    Equiv,
    Finally,
    Formula,
    Globally,
    Implies,
    Next,
    Not,
    Or,
    Prop,
    StrongRelease,
    Until,
    WeakUntil,
    conj,
    print_prefix,
    props,
    skeletonize,
    substitute,
)

UNKNOWN = "unknown"


class ArityMismatch(ValueError):
    pass


def _visit(ps):
    return conj([Finally(p) for p in ps])


def _sequence_visit(ps):
    f = Finally(ps[-1])
    for p in reversed(ps[:-1]):
        f = Finally(And(p, f))
    return f


def _ordered_parts(ps):
    return [Finally(ps[-1])] + [Until(Not(ps[i + 1]), ps[i]) for i in range(len(ps) - 1)]


def _ordered_visit(ps):
    return conj(_ordered_parts(ps))


def _strictly_ordered_visit(ps):
    single = [Until(Not(ps[i]), Until(ps[i], Until(Not(ps[i]), ps[i + 1]))) for i in range(len(ps) - 1)]
    return conj(_ordered_parts(ps) + single)


def _patrolling(ps):
    return conj([Globally(Finally(p)) for p in ps])


def _global_avoidance(ps):
    return conj([Globally(Not(p)) for p in ps])


def visits_at_least(a: Formula, n: int) -> Formula:
    """At least ``n`` separate visits: maximal blocks where ``a`` holds."""
    f = Finally(a)
    for _ in range(n - 1):
        f = Finally(And(a, Until(a, And(Not(a), Until(Not(a), f)))))
    return f


def _upper_restricted(ps, n):
    return Not(visits_at_least(ps[0], n + 1))


def _lower_restricted(ps, n):
    return visits_at_least(ps[0], n)


def _exact_restricted(ps, n):
    a = ps[0]
    # n blocks of `a` separated by gaps ...
    left = a
    for i in range(2 * n - 3, -1, -1):
        left = And(Not(a) if i % 2 else a, Finally(left))
    # ... and no further alternation afterwards
    terms = [Not(a) if i % 2 == 0 else a for i in range(2 * n + 1)]
    right = terms[-1]
    for t in reversed(terms[:-1]):
        right = Or(t, Globally(right))
    return StrongRelease(left, right)


@dataclass(frozen=True)
class Family:
    name: str
    build: object
    counts: bool = False  # n counts visits to one waypoint
    fixed_props: int | None = None
    arities: tuple[int, ...] = (1, 2, 3, 4, 5)


FAMILIES: dict[str, Family] = {
    f.name: f
    for f in [
        Family("visit", _visit),
        Family("sequence_visit", _sequence_visit, arities=(2, 3, 4, 5)),
        Family("ordered_visit", _ordered_visit, arities=(2, 3, 4, 5)),
        Family("strictly_ordered_visit", _strictly_ordered_visit, arities=(2, 3, 4, 5)),
        Family("patrolling", _patrolling),
        Family("bound_delay", lambda ps: Globally(Equiv(ps[0], Next(ps[1]))), fixed_props=2, arities=(2,)),
        Family("delayed_reaction", lambda ps: Globally(Implies(ps[0], Finally(ps[1]))), fixed_props=2, arities=(2,)),
        Family("prompt_reaction", lambda ps: Globally(Implies(ps[0], Next(ps[1]))), fixed_props=2, arities=(2,)),
        Family("wait", lambda ps: WeakUntil(ps[0], ps[1]), fixed_props=2, arities=(2,)),
        Family("past_avoidance", lambda ps: WeakUntil(Not(ps[0]), ps[1]), fixed_props=2, arities=(2,)),
        Family("future_avoidance", lambda ps: Globally(Implies(ps[0], Next(Globally(Not(ps[1]))))), fixed_props=2, arities=(2,)),
        Family("global_avoidance", _global_avoidance),
        Family("upper_restricted_avoidance", _upper_restricted, counts=True),
        # n=1 would coincide with visit_1
        Family("lower_restricted_avoidance", _lower_restricted, counts=True, arities=(2, 3, 4, 5)),
        Family("exact_restricted_avoidance", _exact_restricted, counts=True),
    ]
}

# rows of the reference pattern table that are not followed, with the reason
KNOWN_DISCREPANCIES: dict[str, str] = {
    "lower_restricted_avoidance_1": "reference reads !F a, contradicting 'at least one visit'; F a is used",
    "upper_restricted_avoidance_2": "reference formula is equivalent to upper_restricted_avoidance_1; the recursion is used",
}

# families whose formula does not depend on the order of the waypoints
PERMUTATION_INVARIANT = frozenset({"visit", "patrolling", "global_avoidance"})


@dataclass(frozen=True, order=True)
class PatternTemplate:
    family: str
    n: int

    def __post_init__(self):
        fam = FAMILIES.get(self.family)
        if fam is None:
            raise ValueError(f"unknown pattern family {self.family!r}")
        if self.n < 1 or (fam.fixed_props is not None and self.n != fam.fixed_props):
            raise ArityMismatch(f"{self.family} does not take n={self.n}")

    @property
    def id(self) -> str:
        return f"{self.family}_{self.n}"

    @property
    def prop_count(self) -> int:
        fam = FAMILIES[self.family]
        return 1 if fam.counts else self.n

    @classmethod
    def from_id(cls, template_id: str) -> PatternTemplate:
        family, _, n = template_id.rpartition("_")
        return cls(family, int(n))


def instantiate(t: PatternTemplate, names: list[str]) -> Formula:
    if len(names) != t.prop_count:
        raise ArityMismatch(f"{t.id} takes {t.prop_count} propositions, got {len(names)}")
    if len(set(names)) != len(names):
        raise ArityMismatch(f"propositions must be distinct: {names}")
    ps = [Prop(p) for p in names]
    fam = FAMILIES[t.family]
    return fam.build(ps, t.n) if fam.counts else fam.build(ps)


def default_arities() -> dict[str, tuple[int, ...]]:
    return {name: fam.arities for name, fam in FAMILIES.items()}


def templates(arities: dict[str, tuple[int, ...]] | None = None) -> list[PatternTemplate]:
    arities = arities or default_arities()
    return [PatternTemplate(fam, n) for fam in FAMILIES for n in arities.get(fam, ())]


@lru_cache(maxsize=None)
def _all_templates() -> tuple[tuple[str, Formula], ...]:
    out = []
    for t in templates():
        skeleton, _ = skeletonize(instantiate(t, list(CANONICAL_PROPS[: t.prop_count])))
        out.append((t.id, skeleton))
    if len(out) != 47:
        raise AssertionError(f"default arity table yields {len(out)} templates, expected 47")
    return tuple(out)


def all_templates() -> list[tuple[str, Formula]]:
    """The 47 lifted templates as (template id, skeleton)."""
    return list(_all_templates())


def template_skeleton(template_id: str) -> Formula:
    return dict(_all_templates())[template_id]


def family_of(template_id: str) -> str:
    return PatternTemplate.from_id(template_id).family


def templates_json() -> list[dict]:
    return [
        {"id": tid, "family": family_of(tid), "n": PatternTemplate.from_id(tid).n, "skeleton": print_prefix(sk)}
        for tid, sk in all_templates()
    ]


# --- classification -------------------------------------------------------------

_BANK_PROPS = CANONICAL_PROPS[:8]
_BANK_PREFIX = 3
_BANK_CYCLE = 12  # multiple of every cycle length 1..4


@lru_cache(maxsize=1)
def _lasso_bank() -> np.ndarray:
    """Random lassos unrolled to one shape: (lasso, position, prop) bools."""
    rng = random.Random(20240613)
    rows = []
    for _ in range(2048):
        p, c = rng.randint(0, _BANK_PREFIX), rng.randint(1, 4)
        letters = [[rng.random() < 0.5 for _ in _BANK_PROPS] for _ in range(p + c)]
        prefix, cycle = letters[:p], letters[p:]
        word = prefix + [cycle[i % c] for i in range(_BANK_PREFIX - p + _BANK_CYCLE)]
        rows.append(word)
    bank = np.array(rows, dtype=bool)
    bank.setflags(write=False)
    return bank


def fingerprint(f: Formula) -> bytes | None:
    """Truth values on a fixed bank of lassos; equal for equivalent formulas.

    ``None`` when ``f`` uses a proposition outside the bank's alphabet (the
    first eight canonical skeleton names).
    """
    if not set(props(f)) <= set(_BANK_PROPS):
        return None
    return _fingerprint(f)


def _fingerprint(f: Formula) -> bytes:
    bank = _lasso_bank()
    n = bank.shape[1]
    succ = [i + 1 if i + 1 < n else _BANK_PREFIX for i in range(n)]
    col = {name: i for i, name in enumerate(_BANK_PROPS)}

    def value(name):
        return bank[:, :, col[name]]

    vals = automaton._eval_positions(f, value, succ, (bank.shape[0],))[f][:, 0]
    return np.packbits(vals).tobytes()


@lru_cache(maxsize=1)
def _fingerprint_index() -> dict[bytes, list[tuple[str, Formula]]]:
    """Fingerprints of every template under every renaming of its props."""
    index: dict[bytes, list[tuple[str, Formula]]] = {}
    for tid, skeleton in _all_templates():
        names = props(skeleton)
        seen = set()
        for perm in itertools.permutations(names):
            g = substitute(skeleton, dict(zip(names, perm)))
            if g in seen:
                continue
            seen.add(g)
            index.setdefault(_fingerprint(g), []).append((tid, g))
    return index


def classify(f: Formula) -> str:
    """Template id whose skeleton is equivalent to ``f``'s, up to renaming of
    the template's propositions; :data:`UNKNOWN` otherwise."""
    skeleton, _ = skeletonize(f)
    if len(props(skeleton)) > len(_BANK_PROPS):
        return UNKNOWN
    candidates = _fingerprint_index().get(_fingerprint(skeleton), [])
    for tid, g in candidates:
        if automaton.equivalent(skeleton, g):
            return tid
    return UNKNOWN
