import json

import httpx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from groundltl import data_file
from groundltl.grounding import (
    SYMBOLS,
    BackendConfig,
    BackendError,
    Backends,
    EmbeddingCache,
    GroundingResult,
    HashingEmbedder,
    HTTPBackend,
    Landmark,
    MockBackend,
    NonSubstringOutput,
    OverlappingSpans,
    ReferringExpression,
    SemanticDB,
    TooManyLandmarks,
    UnboundSymbol,
    ZeroVector,
    ground_command,
    ground_res,
    lift,
    load_prompt,
    locate,
    match_res,
    normalize_key,
    recognize_res,
    request_hash,
    translate_lifted,
)
from groundltl.ltl import LTLSyntaxError, parse_prefix, props, skeletonize, substitute

CITY = SemanticDB.load(data_file("city_db.json"))


class ScriptedChat:
    """Answers recognition prompts with ``res`` and translation prompts with ``ltl``."""

    def __init__(self, res=(), ltl="F A"):
        self.res, self.ltl, self.prompts = list(res), ltl, []

    def chat(self, prompt):
        self.prompts.append(prompt)
        if prompt.rstrip().endswith("Propositions:"):
            return " | ".join(self.res)
        return self.ltl


class TableEmbedder:
    model = "table"

    def __init__(self, table):
        self.table = table

    def embed(self, texts):
        return np.array([self.table[t] for t in texts], dtype=float)


def test_recognize_examples():
    chat = ScriptedChat(["Cutler Majestic Theater"])
    assert recognize_res("visit Cutler Majestic Theater", chat) == [ReferringExpression("Cutler Majestic Theater", (6, 29))]
    assert [r.text for r in recognize_res("move to red room", ScriptedChat(["red room"]))] == ["red room"]
    chat = ScriptedChat(["x"])
    assert recognize_res("", chat) == [] and chat.prompts == []


def test_recognize_uses_prompt_template_verbatim():
    chat = ScriptedChat(["red room"])
    recognize_res("move to red room", chat)
    template = load_prompt("rer")
    assert chat.prompts[0] == template.replace("{utterance}", "move to red room")
    assert chat.prompts[0].rstrip().endswith("Utterance: move to red room\nPropositions:")


def test_recognize_rejects_invented_text():
    with pytest.raises(NonSubstringOutput):
        recognize_res("visit the bank", ScriptedChat(["the museum"]))


def test_locate_orders_by_position_and_uses_leftmost_unconsumed():
    res = locate("go to the bank, then the bank again", ["the bank", "the bank"])
    assert [r.span for r in res] == [(6, 14), (21, 29)]
    res = locate("visit bb then aa", ["aa", "bb"])
    assert [r.text for r in res] == ["bb", "aa"]


def test_span_must_fit_text():
    with pytest.raises(ValueError):
        ReferringExpression("bank", (0, 3))


def test_self_similarity_wins():
    emb = HashingEmbedder()
    for key in CITY.keys():
        assert ground_res([CITY.serialized(key)], CITY, emb) == {CITY.serialized(key): key}


def test_store_and_bank_example():
    db = SemanticDB.from_json({"Walmart": {"shop": "supermarket", "addr:street": "Main Street"}, "Chase": {"amenity": "bank"}})
    emb = HashingEmbedder()
    assert ground_res(["the store on Main Street"], db, emb) == {"the store on Main Street": "walmart"}
    assert ground_res(["the bank"], db, emb) == {"the bank": "chase"}


def test_ties_go_to_smaller_key_and_are_reported():
    db = SemanticDB.from_json({"beta": {}, "alpha": {}})
    emb = TableEmbedder({"alpha": [1, 0], "beta": [1, 0], "x": [2, 0]})
    (m,) = match_res(["x"], db, emb)
    assert m.key == "alpha" and m.tied == ("beta",)
    chat = ScriptedChat(["x"], "F A")
    result = ground_command("visit x", db, Backends(chat, emb))
    assert result.re_to_key == {"x": "alpha"} and result.ambiguous == ("x",)


def test_zero_vector():
    db = SemanticDB.from_json({"alpha": {}})
    with pytest.raises(ZeroVector):
        match_res(["x"], db, TableEmbedder({"alpha": [1, 0], "x": [0, 0]}))


@given(st.lists(st.floats(0.01, 100), min_size=4, max_size=4), st.integers(0, 2**31))
@settings(max_examples=50)
def test_argmax_is_scale_invariant(scales, seed):
    rng = np.random.default_rng(seed)
    keys = ["k0", "k1", "k2"]
    db = SemanticDB({k: Landmark(k, ()) for k in keys})
    vecs = {k: rng.normal(size=5) for k in keys + ["q"]}
    base = match_res(["q"], db, TableEmbedder(vecs))[0].key
    scaled = {k: v * s for (k, v), s in zip(vecs.items(), scales)}
    assert match_res(["q"], db, TableEmbedder(scaled))[0].key == base


def test_lift_examples():
    u = "Go to the store on Main Street, but only after visiting the bank"
    res = locate(u, ["the store on Main Street", "the bank"])
    lifted, k2s = lift(u, res, {"the store on Main Street": "walmart", "the bank": "chase"})
    assert lifted == "Go to A, but only after visiting B"
    assert k2s == {"walmart": "A", "chase": "B"}
    assert lift("stay here", [], {}) == ("stay here", {})
    u = "go to Chase, then to the bank"
    res = locate(u, ["Chase", "the bank"])
    lifted, k2s = lift(u, res, {"Chase": "chase", "the bank": "chase"})
    assert lifted == "go to A, then to A" and k2s == {"chase": "A"}


def test_lift_errors():
    u = "visit the big bank"
    with pytest.raises(OverlappingSpans):
        lift(u, [ReferringExpression("the big bank", (6, 18)), ReferringExpression("big", (10, 13))], {"the big bank": "a", "big": "b"})
    u = "p q r s t v"
    res = locate(u, u.split())
    with pytest.raises(TooManyLandmarks):
        lift(u, res, {t: f"k{t}" for t in u.split()})


@pytest.mark.parametrize(
    "utterance, answer",
    [("visit b", "F b"), ("go to h in the very next time instant whenever you see b", "G i b X h"), ("eventually reach b and h", "& F b F h")],
)
def test_translate_examples(utterance, answer):
    chat = ScriptedChat(ltl=f"{answer}\n")
    assert translate_lifted(utterance, chat, constrained=False) == parse_prefix(answer)
    assert translate_lifted(utterance, chat, constrained=True, symbols=("b", "h")) == parse_prefix(answer)
    assert chat.prompts[0].rstrip().endswith(f"Utterance: {utterance}\nLTL:")


def test_translate_unconstrained_surfaces_syntax_errors_and_constrained_repairs():
    chat = ScriptedChat(ltl="& F A")
    with pytest.raises(LTLSyntaxError):
        translate_lifted("visit A", chat, constrained=False)
    f = translate_lifted("visit A", chat, constrained=True)
    assert set(props(f)) <= set(SYMBOLS)
    assert translate_lifted("visit A", ScriptedChat(ltl="F zebra A"), constrained=True) == parse_prefix("F A")


def test_running_example():
    u = "Go to the store on Main Street, but only after visiting the bank"
    chat = ScriptedChat(["the store on Main Street", "the bank"], "& F A U ! A B")
    result = ground_command(u, CITY, Backends(chat, HashingEmbedder()))
    assert result.grounded_formula == parse_prefix("& F walmart U ! walmart chase")
    assert result.lifted_utterance == "Go to A, but only after visiting B"
    assert GroundingResult.from_json(json.loads(result.dumps())) == result


def test_single_landmark():
    chat = ScriptedChat(["Chase bank on Boylston Street"], "F A")
    result = ground_command("visit Chase bank on Boylston Street", CITY, Backends(chat, HashingEmbedder()))
    assert result.grounded_formula == parse_prefix("F chase")


def test_unbound_symbol_is_tagged():
    chat = ScriptedChat(["the bank"], "& F A F B")
    with pytest.raises(UnboundSymbol) as err:
        ground_command("visit the bank", CITY, Backends(chat, HashingEmbedder()))
    assert err.value.stage == "ground"


def test_stage_tags():
    with pytest.raises(NonSubstringOutput) as err:
        ground_command("visit the bank", CITY, Backends(ScriptedChat(["museum"]), HashingEmbedder()))
    assert err.value.stage == "rer"
    db = SemanticDB.from_json({"alpha": {}})
    with pytest.raises(ZeroVector) as err:
        ground_command("visit x", db, Backends(ScriptedChat(["x"]), TableEmbedder({"alpha": [1.0], "x": [0.0]})))
    assert err.value.stage == "reg"
    with pytest.raises(LTLSyntaxError) as err:
        ground_command("visit the bank", CITY, Backends(ScriptedChat(["the bank"], "F"), HashingEmbedder()), constrained=False)
    assert err.value.stage == "translate"


NAMES = ["Walmart", "Chase", "Panera Bread", "Wang Theater", "the bank", "Jiaho supermarket"]


@given(
    st.lists(st.sampled_from(NAMES), min_size=1, max_size=6),
    st.sampled_from(["F A", "& F A F B", "U ! A B", "G ! C", "& F A & F B F C"]),
)
@settings(max_examples=60)
def test_key_symbol_map_is_a_bijection(mentions, ltl):
    utterance = "go to " + ", then ".join(mentions)
    chat = ScriptedChat(mentions, ltl)
    try:
        result = ground_command(utterance, CITY, Backends(chat, HashingEmbedder()))
    except UnboundSymbol:
        keys = set(ground_res(mentions, CITY, HashingEmbedder()).values())
        assert not set(props(parse_prefix(ltl))) <= set(SYMBOLS[: len(keys)])
        return
    k2s = result.key_to_symbol
    assert len(set(k2s.values())) == len(k2s)
    assert list(k2s.values()) == list(SYMBOLS[: len(k2s)])
    assert set(result.re_to_key.values()) == set(k2s)
    assert result.grounded_formula == substitute(result.lifted_formula, {s: k for k, s in k2s.items()})
    assert skeletonize(result.grounded_formula)[0] == skeletonize(result.lifted_formula)[0]
    again = ground_command(utterance, CITY, Backends(ScriptedChat(mentions, ltl), HashingEmbedder()))
    assert again.dumps() == result.dumps()


def test_db_shape_and_keys():
    assert normalize_key("Jiaho supermarket") == "jiaho_supermarket"
    db = SemanticDB.from_json({"Jiaho supermarket": {"shop": "supermarket", "addr:street": "Washington Street"}})
    assert db.keys() == ["jiaho_supermarket"]
    assert db.serialized("jiaho_supermarket") == "Jiaho supermarket addr:street: Washington Street shop: supermarket"
    assert SemanticDB.from_json(db.to_json()) == db
    with pytest.raises(ValueError):
        SemanticDB({})
    with pytest.raises(ValueError):
        SemanticDB.from_json({"A b": {}, "a-b": {}})


def test_backend_config_validation(tmp_path):
    with pytest.raises(ValueError):
        BackendConfig(timeout=0)
    with pytest.raises(ValueError):
        BackendConfig(max_in_flight=0)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"chat_url": "http://x/v1", "chat_model": "m"}))
    assert BackendConfig.load(path).chat_model == "m"


def _transport(log):
    def handler(request):
        log.append(request)
        body = json.loads(request.content)
        if request.url.path.endswith("/chat/completions"):
            return httpx.Response(200, json={"choices": [{"message": {"content": "Propositions: the bank"}}]})
        if request.url.path.endswith("/embeddings"):
            rows = [{"index": i, "embedding": [float(len(t)), 1.0]} for i, t in enumerate(body["input"])]
            return httpx.Response(200, json={"data": list(reversed(rows))})
        return httpx.Response(404, text="nope")

    return httpx.MockTransport(handler)


def test_http_backend(monkeypatch):
    monkeypatch.setenv("TEST_TOKEN", "sekret")
    log = []
    cfg = BackendConfig(chat_url="http://llm.test/v1/", embed_url="http://emb.test/v1", chat_model="m1", embed_model="e1", token_env="TEST_TOKEN")
    backend = HTTPBackend(cfg, transport=_transport(log))
    assert recognize_res("visit the bank", backend)[0].text == "the bank"
    assert backend.embed(["ab", "abcd"]).tolist() == [[2.0, 1.0], [4.0, 1.0]]
    assert str(log[0].url) == "http://llm.test/v1/chat/completions"
    assert log[0].headers["authorization"] == "Bearer sekret"
    assert json.loads(log[0].content)["model"] == "m1"
    assert json.loads(log[1].content)["model"] == "e1"


def test_http_backend_errors():
    bad = httpx.MockTransport(lambda r: httpx.Response(500, text="boom"))
    with pytest.raises(BackendError):
        HTTPBackend(BackendConfig(), transport=bad).chat("hi")
    junk = httpx.MockTransport(lambda r: httpx.Response(200, json={"choices": []}))
    with pytest.raises(BackendError):
        HTTPBackend(BackendConfig(), transport=junk).chat("hi")

    def down(request):
        raise httpx.ConnectError("refused")

    with pytest.raises(BackendError):
        HTTPBackend(BackendConfig(), transport=httpx.MockTransport(down)).embed(["x"])


def test_mock_backend_record_and_replay(tmp_path):
    chat = ScriptedChat(["the bank"], "F A")
    recorder = MockBackend(chat_model="m", embed_model="hashing-256", upstream_chat=chat, upstream_embed=HashingEmbedder())
    first = ground_command("visit the bank", CITY, Backends(recorder, recorder))
    recorder.save(tmp_path / "mock.json")
    replay = MockBackend.load(tmp_path / "mock.json")
    second = ground_command("visit the bank", CITY, Backends(replay, replay))
    assert first.dumps() == second.dumps()
    with pytest.raises(BackendError):
        replay.chat("something never recorded")
    assert request_hash("chat", "m", "x") != request_hash("chat", "m2", "x")


def test_embedding_cache_hits_once(tmp_path):
    calls = []

    class Counting(HashingEmbedder):
        def embed(self, texts):
            calls.append(list(texts))
            return super().embed(texts)

    cache = EmbeddingCache(Counting(), tmp_path / "cache.json")
    a = cache.embed(["x", "y", "x"])
    b = cache.embed(["y"])
    assert calls == [["x", "y"]]
    assert (a[1] == b[0]).all()
    cache.save()
    again = EmbeddingCache(Counting(), tmp_path / "cache.json")
    again.embed(["x"])
    assert calls == [["x", "y"]]


def test_hashing_embedder_is_deterministic():
    e = HashingEmbedder()
    assert (e.embed(["desk A"]) == HashingEmbedder().embed(["desk A"])).all()
    assert not (e.embed(["desk A"]) == e.embed(["desk B"])).all()


def _fixture_lines():
    mock = MockBackend.load(data_file("fixtures", "mock_backend.json"))
    backends = Backends(mock, mock)
    dbs = {}
    commands = [json.loads(l) for l in data_file("fixtures", "commands.jsonl").read_text().splitlines() if l.strip()]
    out = []
    for c in commands:
        db = dbs.setdefault(c["db"], SemanticDB.load(data_file(f"{c['db']}_db.json")))
        out.append(ground_command(c["utterance"], db, backends).dumps())
    return out


def test_fixture_replay_is_byte_identical():
    expected = data_file("fixtures", "expected_results.jsonl").read_text().splitlines()
    got = _fixture_lines()
    assert len(got) == 100
    assert got == expected
    assert json.loads(got[0])["grounded_formula"] == "& F walmart U ! walmart chase"
