import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import formulas
from groundltl import automaton
from groundltl.ltl import (
    CANONICAL_PROPS,
    And,
    Equiv,
    FalseConst,
    Finally,
    Globally,
    Implies,
    InvalidProposition,
    LTLSyntaxError,
    Next,
    Not,
    Or,
    Prop,
    StrongRelease,
    TrailingTokens,
    TRUE,
    TrueConst,
    UnexpectedEndOfInput,
    Until,
    WeakUntil,
    desugar,
    from_json,
    height,
    parse_infix,
    parse_prefix,
    print_infix,
    print_prefix,
    props,
    size,
    skeletonize,
    substitute,
    to_json,
    walk,
)

a, b, h = Prop("a"), Prop("b"), Prop("h")


@pytest.mark.parametrize(
    "text, expected",
    [
        ("F b", Finally(Prop("b"))),
        ("& F b F h", And(Finally(Prop("b")), Finally(h))),
        ("a", a),
        ("G e b X h", Globally(Equiv(Prop("b"), Next(h)))),
        ("G i b X h", Globally(Implies(Prop("b"), Next(h)))),
        ("U b h", Until(Prop("b"), h)),
        ("W a b", WeakUntil(a, Prop("b"))),
        ("M a b", StrongRelease(a, Prop("b"))),
    ],
)
def test_parse_prefix_examples(text, expected):
    assert parse_prefix(text) == expected
    assert print_prefix(expected) == text


def test_parse_prefix_tolerates_extra_whitespace():
    assert parse_prefix("  &   F b\tF h ") == And(Finally(Prop("b")), Finally(h))


@pytest.mark.parametrize("text", ["F", "& a", "U a", "F F", "", "   "])
def test_too_few_operands(text):
    with pytest.raises(UnexpectedEndOfInput):
        parse_prefix(text)


@pytest.mark.parametrize("text", ["a b", "F a b", "& a b c"])
def test_trailing_tokens(text):
    with pytest.raises(TrailingTokens):
        parse_prefix(text)


def test_any_non_operator_token_is_a_prop():
    assert parse_prefix("F walmart_42") == Finally(Prop("walmart_42"))


@pytest.mark.parametrize("name", ["i", "e", "F", "U", "", "two words", "a-b"])
def test_invalid_prop_names(name):
    with pytest.raises(InvalidProposition):
        Prop(name)


def test_reserved_tokens_are_operators_in_prefix():
    # `i` is implication, so "F i" lacks operands rather than naming a prop
    with pytest.raises(LTLSyntaxError):
        parse_prefix("F i")


def test_infix_examples():
    assert parse_infix("F(a) & (!a U b)") == And(Finally(a), Until(Not(a), Prop("b")))
    assert print_infix(Globally(Not(a))) == "G(!(a))"
    assert parse_infix("(a)") == a
    assert parse_infix("a -> b <-> c") == Equiv(Implies(a, Prop("b")), Prop("c"))
    assert parse_infix("a | b & c") == Or(a, And(Prop("b"), Prop("c")))


def test_infix_error_has_position():
    with pytest.raises(LTLSyntaxError, match="at"):
        parse_infix("a & (b")


def test_desugar_examples():
    f = desugar(Finally(a))
    assert isinstance(f, Until)
    assert automaton.equivalent(f, Finally(a))
    w = desugar(WeakUntil(a, Prop("b")))
    assert automaton.equivalent(w, Until(a, Or(Prop("b"), Globally(a))))
    m = desugar(StrongRelease(a, Prop("b")))
    assert automaton.equivalent(m, Until(Prop("b"), And(a, Prop("b"))))


def test_skeletonize_examples():
    assert skeletonize(Finally(Prop("chase"))) == (Finally(a), {"chase": "a"})
    assert skeletonize(Finally(Prop("walmart"))) == (Finally(a), {"walmart": "a"})
    assert skeletonize(parse_prefix("& F b F h")) == (parse_prefix("& F a F b"), {"b": "a", "h": "b"})


def test_canonical_alphabet_skips_operator_letters():
    assert CANONICAL_PROPS[:5] == ("a", "b", "c", "d", "f")
    assert len(CANONICAL_PROPS) == 26
    assert not {"e", "i"} & set(CANONICAL_PROPS)


def test_skeletonize_rejects_more_than_26_props():
    many = And(Prop("p0"), Prop("p1"))
    for k in range(2, 27):
        many = And(many, Prop(f"p{k}"))
    with pytest.raises(ValueError):
        skeletonize(many)


def test_substitute_examples():
    assert substitute(Finally(Prop("A")), {"A": "walmart"}) == Finally(Prop("walmart"))
    f = parse_prefix("& F A F B")
    assert substitute(f, {"A": "A", "B": "B"}) == f
    assert substitute(f, {"A": "B", "B": "A"}) == parse_prefix("& F B F A")


def test_truth_constants_print_as_tautologies_over_existing_props():
    assert print_prefix(And(TRUE, Prop("q"))) == "& | q ! q q"
    assert print_prefix(FalseConst()) == "& a ! a"
    assert automaton.equivalent(parse_prefix(print_prefix(And(TRUE, Prop("q")))), Prop("q"))
    assert isinstance(TRUE, TrueConst)


def test_json_encoding_shape():
    assert to_json(Finally(Prop("b"))) == {"op": "finally", "args": [{"prop": "b"}]}


def test_size_and_height():
    f = parse_prefix("& F b F h")
    assert size(f) == 5
    assert height(f) == 3
    assert height(a) == size(a) == 1


@given(formulas(("a", "b", "c", "d", "f"), max_leaves=12))
def test_prefix_round_trip(f):
    text = print_prefix(f)
    assert parse_prefix(text) == f
    assert len(text.split()) == size(f)


@given(formulas(("a", "b", "c", "d", "f"), max_leaves=12))
def test_infix_round_trip(f):
    assert parse_infix(print_infix(f)) == f


@given(formulas(("a", "b", "c", "d", "f"), max_leaves=12))
def test_json_round_trip(f):
    assert from_json(to_json(f)) == f


@given(formulas(("walmart", "chase", "p1", "q"), max_leaves=10))
def test_skeletonize_is_idempotent_and_invertible(f):
    skeleton, mapping = skeletonize(f)
    assert list(dict.fromkeys(props(skeleton))) == list(CANONICAL_PROPS[: len(set(props(f)))])
    assert skeletonize(skeleton) == (skeleton, {p: p for p in props(skeleton)})
    inverse = {v: k for k, v in mapping.items()}
    assert substitute(skeleton, inverse) == f


@given(formulas(), st.permutations(["a", "b", "c"]))
def test_substitute_then_inverse_is_identity(f, perm):
    mapping = dict(zip(["a", "b", "c"], perm))
    inverse = {v: k for k, v in mapping.items()}
    assert substitute(substitute(f, mapping), inverse) == f


@given(formulas(max_leaves=6))
def test_desugar_removes_sugar_and_preserves_language(f):
    g = desugar(f)
    kinds = {type(x) for x in walk(g)}
    assert not kinds & {Implies, Equiv, Finally, Globally, WeakUntil, StrongRelease}
    assert automaton.equivalent(f, g)


def test_formulas_are_hashable_and_immutable():
    f = parse_prefix("& F b F h")
    assert f == parse_prefix("& F b F h") and hash(f) == hash(parse_prefix("& F b F h"))
    with pytest.raises(AttributeError):
        f.left = a
