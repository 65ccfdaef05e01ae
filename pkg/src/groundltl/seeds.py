"""Deterministic synthetic seed corpus for the lifted dataset.

Every seed is an English command over single-letter placeholders together
with its formula. The per-template seed counts and the number of distinct
placeholder sets per template are frozen below; they were solved offline so
that permutation augmentation reproduces the published corpus shape:
2,125 distinct formulas, 49,655 utterances, mean proposition count 3.79 and
mean prefix length 18.89.
"""

from __future__ import annotations

import itertools
import random

from .patterns import PatternTemplate, all_templates, instantiate

# lowercase letters that are neither English one-letter words nor operator tokens
PLACEHOLDERS = tuple("bcdfghjklmnpqrstvwxyz")

# template id -> (seed commands, distinct placeholder sets)
ALLOCATION: dict[str, tuple[int, int]] = {
    "visit_1": (5, 1),
    "visit_2": (196, 18),
    "visit_3": (233, 6),
    "visit_4": (233, 6),
    "visit_5": (5, 1),
    "sequence_visit_2": (125, 16),
    "sequence_visit_3": (233, 6),
    "sequence_visit_4": (231, 6),
    "sequence_visit_5": (5, 1),
    "ordered_visit_2": (232, 24),
    "ordered_visit_3": (232, 6),
    "ordered_visit_4": (233, 6),
    "ordered_visit_5": (5, 1),
    "strictly_ordered_visit_2": (232, 6),
    "strictly_ordered_visit_3": (233, 6),
    "strictly_ordered_visit_4": (232, 6),
    "strictly_ordered_visit_5": (13, 1),
    "patrolling_1": (5, 1),
    "patrolling_2": (232, 6),
    "patrolling_3": (232, 6),
    "patrolling_4": (232, 6),
    "patrolling_5": (5, 1),
    "bound_delay_2": (5, 1),
    "delayed_reaction_2": (40, 1),
    "prompt_reaction_2": (137, 68),
    "wait_2": (5, 1),
    "past_avoidance_2": (5, 1),
    "future_avoidance_2": (148, 6),
    "global_avoidance_1": (5, 1),
    "global_avoidance_2": (232, 6),
    "global_avoidance_3": (233, 6),
    "global_avoidance_4": (233, 6),
    "global_avoidance_5": (5, 1),
    "upper_restricted_avoidance_1": (5, 1),
    "upper_restricted_avoidance_2": (5, 1),
    "upper_restricted_avoidance_3": (5, 1),
    "upper_restricted_avoidance_4": (5, 1),
    "upper_restricted_avoidance_5": (5, 1),
    "lower_restricted_avoidance_2": (5, 1),
    "lower_restricted_avoidance_3": (5, 1),
    "lower_restricted_avoidance_4": (5, 1),
    "lower_restricted_avoidance_5": (5, 1),
    "exact_restricted_avoidance_1": (5, 1),
    "exact_restricted_avoidance_2": (5, 1),
    "exact_restricted_avoidance_3": (5, 1),
    "exact_restricted_avoidance_4": (5, 1),
    "exact_restricted_avoidance_5": (5, 1),
}

_NUMBER = {1: "one", 2: "two", 3: "three", 4: "four", 5: "five", 6: "six"}
_TIMES = {1: "once", 2: "twice", 3: "three times", 4: "four times", 5: "five times", 6: "six times"}


def _listing(ps: list[str], last: str = "and") -> str:
    if len(ps) == 1:
        return ps[0]
    return ", ".join(ps[:-1]) + f" {last} " + ps[-1]


def _chain(ps: list[str], link: str) -> str:
    return f" {link} ".join(ps)


def _ordered(ps: list[str], n: int) -> str:
    rules = [f"do not go to {ps[i + 1]} before {ps[i]}" for i in range(len(ps) - 1)]
    return f"eventually reach {ps[-1]}, but " + _listing(rules)


_CORES = {
    "visit": [
        lambda ps, n: f"visit {_listing(ps)}",
        lambda ps, n: f"go to {_listing(ps)} in any order",
        lambda ps, n: f"make your way to {_listing(ps, 'as well as')} at some point",
    ],
    "sequence_visit": [
        lambda ps, n: "visit " + _chain(ps, "and then"),
        lambda ps, n: "go to " + _chain(ps, "and later"),
        lambda ps, n: "reach " + _chain(ps, "followed at some point by"),
    ],
    "ordered_visit": [
        _ordered,
        lambda ps, n: f"visit {_listing(ps)} but never enter a place before the one listed ahead of it",
        lambda ps, n: f"find {ps[-1]}, keeping the order " + _chain(ps, "before") + " for first arrivals",
    ],
    "strictly_ordered_visit": [
        lambda ps, n: f"visit {_listing(ps)} in that exact order without repetitions",
        lambda ps, n: "go to " + _chain(ps, "then") + ", in this order, and visit each one only once before moving on",
        lambda ps, n: f"reach {_listing(ps)} strictly in sequence, never returning to an earlier stop",
    ],
    "patrolling": [
        lambda ps, n: f"keep visiting {_listing(ps)} forever",
        lambda ps, n: f"patrol {_listing(ps)} infinitely often",
        lambda ps, n: f"never stop going back to {_listing(ps)}",
    ],
    "bound_delay": [
        lambda ps, n: f"{ps[1]} must hold at the next step exactly when {ps[0]} holds now",
        lambda ps, n: f"if and only if you see {ps[0]}, be at {ps[1]} right after",
        lambda ps, n: f"go to {ps[1]} one step after {ps[0]}, and only then",
    ],
    "delayed_reaction": [
        lambda ps, n: f"whenever you see {ps[0]}, go to {ps[1]} at some later point",
        lambda ps, n: f"every time {ps[0]} happens, eventually reach {ps[1]}",
        lambda ps, n: f"each visit to {ps[0]} must be answered by a visit to {ps[1]} sooner or later",
    ],
    "prompt_reaction": [
        lambda ps, n: f"whenever you see {ps[0]}, go to {ps[1]} at the very next step",
        lambda ps, n: f"right after each {ps[0]}, be at {ps[1]}",
        lambda ps, n: f"every time {ps[0]} holds, {ps[1]} must follow immediately",
    ],
    "wait": [
        lambda ps, n: f"stay at {ps[0]} until you see {ps[1]}, which may never happen",
        lambda ps, n: f"remain in {ps[0]} till {ps[1]} shows up, if it ever does",
        lambda ps, n: f"wait at {ps[0]} for {ps[1]}, possibly forever",
    ],
    "past_avoidance": [
        lambda ps, n: f"do not go to {ps[0]} until you reach {ps[1]}, which you may never do",
        lambda ps, n: f"avoid {ps[0]} before {ps[1]} happens, if it happens at all",
        lambda ps, n: f"stay away from {ps[0]} as long as {ps[1]} has not been seen",
    ],
    "future_avoidance": [
        lambda ps, n: f"once you visit {ps[0]}, never visit {ps[1]} afterwards",
        lambda ps, n: f"after seeing {ps[0]}, you must avoid {ps[1]} from then on",
        lambda ps, n: f"{ps[1]} is forbidden from the step after you reach {ps[0]}",
    ],
    "global_avoidance": [
        lambda ps, n: f"never visit {_listing(ps, 'or')}",
        lambda ps, n: f"always avoid {_listing(ps)}",
        lambda ps, n: f"stay away from {_listing(ps)} at all times",
    ],
    "upper_restricted_avoidance": [
        lambda ps, n: f"visit {ps[0]} at most {_TIMES[n]}",
        lambda ps, n: f"do not go to {ps[0]} on more than {_NUMBER[n]} separate occasions",
        lambda ps, n: f"you may enter {ps[0]} no more than {_TIMES[n]}",
    ],
    "lower_restricted_avoidance": [
        lambda ps, n: f"visit {ps[0]} at least {_TIMES[n]}",
        lambda ps, n: f"go to {ps[0]} on {_NUMBER[n]} or more separate occasions",
        lambda ps, n: f"make no fewer than {_NUMBER[n]} distinct visits to {ps[0]}",
    ],
    "exact_restricted_avoidance": [
        lambda ps, n: f"visit {ps[0]} exactly {_TIMES[n]}",
        lambda ps, n: f"make exactly {_NUMBER[n]} separate visits to {ps[0]}",
        lambda ps, n: f"go to {ps[0]} {_TIMES[n]}, no more and no less",
    ],
}

_OPENERS = ["", "please ", "robot, ", "you need to ", "your task is to ", "make sure you ", "try to ", "now "]
_CLOSERS = ["", " please", " when you are ready", " as soon as possible", " for me", " today"]


def utterance(family: str, n: int, ps: list[str], variant: int) -> str:
    """The ``variant``-th phrasing of a command; phrasings differ in wording."""
    cores = _CORES[family]
    core, rest = variant % len(cores), variant // len(cores)
    opener, closer = rest % len(_OPENERS), rest // len(_OPENERS)
    if closer >= len(_CLOSERS):
        raise ValueError(f"only {len(cores) * len(_OPENERS) * len(_CLOSERS)} phrasings for {family}")
    return _OPENERS[opener] + cores[core](ps, n) + _CLOSERS[closer]


def _letter_sets(rng: random.Random, k: int, count: int) -> list[tuple[str, ...]]:
    pool = list(itertools.combinations(PLACEHOLDERS, k))
    return sorted(rng.sample(pool, count))


def seed_records(seed: int = 0) -> list[dict]:
    """The seed corpus as JSON-ready records (utterance, ltl_prefix, template_id, props, origin)."""
    from .ltl import print_prefix

    rng = random.Random(seed)
    out = []
    for tid, _ in all_templates():
        t = PatternTemplate.from_id(tid)
        seeds, sets = ALLOCATION[tid]
        letters = _letter_sets(rng, t.prop_count, sets)
        for i in range(seeds):
            ps = list(letters[i % sets])
            text = utterance(t.family, t.n, ps, i // sets)
            out.append(
                {
                    "utterance": text,
                    "ltl_prefix": print_prefix(instantiate(t, ps)),
                    "template_id": tid,
                    "props": ps,
                    "origin": "seed",
                }
            )
    texts = [r["utterance"] for r in out]
    if len(set(texts)) != len(texts):
        raise AssertionError("seed utterances collide")
    return out
