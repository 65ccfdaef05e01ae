import itertools
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import formulas
from groundltl.decode import (
    END,
    DecodeSession,
    DisallowedToken,
    SessionFinished,
    Vocabulary,
    constrained_decode,
    replay_sampler,
    resample_decode,
    uniform_sampler,
    unconstrained_decode,
)
from groundltl.ltl import OPERATOR_ARITY, height, parse_prefix, print_prefix, size

VOCAB = Vocabulary.build(["a", "b", "c", "d", "f"])
SMALL = Vocabulary.build(["a", "b"])
OPS = set(OPERATOR_ARITY)


def test_height_one_admits_props_only():
    s = DecodeSession(VOCAB, max_height=1)
    assert set(s.allowed_tokens()) == set(VOCAB.props)


def test_fresh_session_admits_everything_but_end():
    s = DecodeSession(VOCAB, max_height=3)
    assert set(s.allowed_tokens()) == set(VOCAB.tokens) - {END}
    assert s.pending == 1


def test_after_binary_operator():
    s = DecodeSession(VOCAB, max_height=3).feed("U")
    assert s.pending == 2
    allowed = set(s.allowed_tokens())
    assert END not in allowed and set(VOCAB.props) <= allowed and OPS <= allowed
    s2 = DecodeSession(VOCAB, max_height=2).feed("U")
    assert set(s2.allowed_tokens()) == set(VOCAB.props)


def test_complete_formula_admits_end_only():
    s = DecodeSession(VOCAB, max_height=3).feed("F").feed("a")
    assert s.allowed_tokens() == [END]
    assert s.complete


def test_feed_sequence():
    s = DecodeSession(VOCAB, max_height=4)
    for tok in ["&", "F", "a", "b"]:
        s.feed(tok)
    assert s.text() == "& F a b"
    s.feed(END)
    with pytest.raises(SessionFinished):
        s.feed("a")
    with pytest.raises(SessionFinished):
        s.allowed_next()


def test_disallowed_token():
    s = DecodeSession(VOCAB, max_height=2).feed("G")
    assert set(s.allowed_tokens()) == set(VOCAB.props)
    with pytest.raises(DisallowedToken):
        s.feed("F")
    with pytest.raises(DisallowedToken):
        DecodeSession(VOCAB, 3).feed(END)
    with pytest.raises(DisallowedToken):
        DecodeSession(VOCAB, 3).feed("zebra")


def test_replay():
    assert constrained_decode(replay_sampler(["F", "b", END]), VOCAB, 8, 80) == parse_prefix("F b")


def test_adversarial_until_sampler_terminates():
    def always_until(session):
        return [1.0 if t == "U" else 0.0 for t in session.vocab.tokens]

    f = constrained_decode(always_until, VOCAB, max_height=4, max_tokens=80)
    assert height(f) == 4
    f = constrained_decode(always_until, VOCAB, max_height=30, max_tokens=9)
    assert size(f) <= 9


def test_invalid_bounds():
    with pytest.raises(ValueError):
        constrained_decode(lambda s: [0.0] * len(VOCAB.tokens), VOCAB, 3, 0)
    with pytest.raises(ValueError):
        DecodeSession(VOCAB, 0)


def test_proposer_that_never_ends_is_forced_to_finish():
    f = resample_decode(lambda s: "U", VOCAB, max_height=3, max_tokens=10, max_tries=2)
    assert size(f) <= 10 and height(f) <= 3


def test_vocab_rejects_clashing_props():
    with pytest.raises(ValueError):
        Vocabulary.build(["a", "U"])


@pytest.mark.parametrize("seed", range(20))
def test_uniform_decodes_are_valid(seed):
    rng = random.Random(seed)
    f = constrained_decode(uniform_sampler(rng), VOCAB, 8, 80, rng=rng)
    assert height(f) <= 8 and size(f) <= 80
    assert parse_prefix(print_prefix(f)) == f


def test_same_seed_same_output():
    runs = []
    for _ in range(2):
        rng = random.Random(42)
        runs.append([constrained_decode(uniform_sampler(rng), VOCAB, 8, 80, rng=rng) for _ in range(20)])
    assert runs[0] == runs[1]


def test_unconstrained_baseline_is_mostly_invalid():
    rng = random.Random(0)
    bad = 0
    for _ in range(200):
        text = unconstrained_decode(uniform_sampler(rng), VOCAB, 80, rng=rng)
        try:
            parse_prefix(text)
        except Exception:
            bad += 1
    assert bad > 100


def _completable(session, max_height, max_tokens, memo):
    key = (tuple(session.slots), len(session.emitted))
    if key in memo:
        return memo[key]
    if session.complete:
        memo[key] = True
        return True
    ok = False
    for tok in session.allowed_tokens():
        nxt = DecodeSession(session.vocab, max_height, max_tokens)
        nxt.emitted, nxt.slots = list(session.emitted), list(session.slots)
        nxt.feed(tok)
        if not _completable(nxt, max_height, max_tokens, memo):
            memo[key] = False
            return False
        ok = True
    memo[key] = ok
    return ok


@pytest.mark.parametrize("max_height, max_tokens", [(1, 1), (2, 3), (3, 5), (3, 7), (4, 6)])
def test_every_admitted_token_extends_to_a_formula(max_height, max_tokens):
    assert _completable(DecodeSession(SMALL, max_height, max_tokens), max_height, max_tokens, {})


def _all_formulas(h):
    if h == 1:
        return ["a", "b"]
    lower = _all_formulas(h - 1)
    out = list(lower) + [f"{op} {x}" for op, k in OPERATOR_ARITY.items() if k == 1 for x in lower]
    out += [f"{op} {x} {y}" for op, k in OPERATOR_ARITY.items() if k == 2 for x in lower for y in lower]
    return list(dict.fromkeys(out))


def test_every_bounded_formula_is_reachable():
    for text in _all_formulas(3):
        s = DecodeSession(SMALL, max_height=3)
        for tok in text.split() + [END]:
            s.feed(tok)
        assert s.finished


@given(formulas(("a", "b", "c", "d", "f"), max_leaves=10))
def test_any_formula_within_bounds_replays(f):
    tokens = print_prefix(f).split()
    s = DecodeSession(VOCAB, height(f), len(tokens))
    for tok in tokens:
        s.feed(tok)
    assert s.complete and s.formula() == f
    if height(f) > 1:
        t = DecodeSession(VOCAB, height(f) - 1)
        with pytest.raises(DisallowedToken):
            for tok in tokens:
                t.feed(tok)


@given(st.integers(0, 10**6), st.integers(1, 10), st.integers(1, 40))
def test_random_decodes_respect_bounds(seed, max_height, max_tokens):
    rng = random.Random(seed)
    f = constrained_decode(uniform_sampler(rng), VOCAB, max_height, max_tokens, rng=rng)
    assert height(f) <= max_height and size(f) <= max_tokens


def test_resample_decode_skips_rejected_proposals():
    stream = iter(["F", "F", "zebra", "a", "b", END, END])
    f = resample_decode(lambda s: next(stream), VOCAB, max_height=2, max_tokens=10)
    assert f == parse_prefix("F a")
