import os

from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from groundltl.ltl import (
    And,
    Equiv,
    Finally,
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

settings.register_profile("default", deadline=None, max_examples=100, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", deadline=None, max_examples=1000, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

UNARY = (Not, Next, Finally, Globally)
BINARY = (And, Or, Implies, Equiv, Until, WeakUntil, StrongRelease)


def formulas(names=("a", "b", "c"), max_leaves=8):
    """Random formulas over ``names``."""
    leaves = st.sampled_from(list(names)).map(Prop)

    def extend(children):
        unary = st.tuples(st.sampled_from(UNARY), children).map(lambda t: t[0](t[1]))
        binary = st.tuples(st.sampled_from(BINARY), children, children).map(lambda t: t[0](t[1], t[2]))
        return unary | binary

    return st.recursive(leaves, extend, max_leaves=max_leaves)


def letters(names=("a", "b", "c")):
    return st.frozensets(st.sampled_from(list(names)))


def lassos(names=("a", "b", "c"), max_prefix=3, max_cycle=3):
    from groundltl.automaton import LassoTrace

    return st.builds(
        lambda p, c: LassoTrace(tuple(p), tuple(c)),
        st.lists(letters(names), max_size=max_prefix),
        st.lists(letters(names), min_size=1, max_size=max_cycle),
    )


# acceptance verdicts, printed once at the end of the run
CRITERIA: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for k in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[k])
