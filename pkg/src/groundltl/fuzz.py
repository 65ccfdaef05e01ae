"""Random formula generation for property tests and oracle sweeps."""

from __future__ import annotations

import random

from .ltl import (
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
)

UNARY = (Not, Next, Finally, Globally)
BINARY = (And, Or, Implies, Equiv, Until, WeakUntil, StrongRelease)


def random_formula(rng: random.Random, max_size: int, names: list[str], max_depth: int | None = None) -> Formula:
    """A formula with at most ``max_size`` nodes over ``names``."""
    target = rng.randint(1, max_size)
    return _build(rng, target, names, max_depth if max_depth is not None else max_size)


def _build(rng: random.Random, budget: int, names: list[str], depth: int) -> Formula:
    if budget <= 1 or depth <= 1:
        return Prop(rng.choice(names))
    if budget == 2 or rng.random() < 0.4:
        return rng.choice(UNARY)(_build(rng, budget - 1, names, depth - 1))
    left = rng.randint(1, budget - 2)
    return rng.choice(BINARY)(
        _build(rng, left, names, depth - 1),
        _build(rng, budget - 1 - left, names, depth - 1),
    )
