"""Grounding natural-language commands to formulas over landmark keys.

Three stages over pluggable backends: referring-expression recognition (a
chat model repeats substrings of the command), referring-expression
grounding (cosine similarity between embeddings of each expression and of
each landmark's serialized attributes), and lifted translation (expressions
are replaced by placeholders A-E, the lifted command is translated, and the
placeholders are substituted back by landmark keys).
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Protocol, Sequence

import httpx
import numpy as np

from .decode import END, DecodeSession, Vocabulary, resample_decode
from .ltl import PROP_RE, RESERVED, Formula, LTLSyntaxError, parse_prefix, print_prefix, props, substitute

SYMBOLS = ("A", "B", "C", "D", "E")
STAGES = ("rer", "reg", "lift", "translate", "ground")


class GroundingError(RuntimeError):
    stage: str | None = None


class BackendError(GroundingError):
    pass


class NonSubstringOutput(GroundingError):
    pass


class ZeroVector(GroundingError):
    pass


class UnboundSymbol(GroundingError):
    pass


class OverlappingSpans(GroundingError):
    pass


class TooManyLandmarks(GroundingError):
    pass


# --- semantic database ---------------------------------------------------------------


def normalize_key(name: str) -> str:
    """'Jiaho supermarket' -> 'jiaho_supermarket'."""
    key = re.sub(r"[^0-9a-z]+", "_", name.lower()).strip("_")
    if not key or not PROP_RE.fullmatch(key) or key in RESERVED:
        raise ValueError(f"landmark name {name!r} does not give a usable key")
    return key


def _render(value) -> str:
    if isinstance(value, (list, tuple)):
        return ", ".join(_render(v) for v in value)
    return str(value)


@dataclass(frozen=True)
class Landmark:
    name: str
    attributes: tuple[tuple[str, str], ...]
    predicate: object = field(default=None, compare=False)  # state -> bool, used only by planners

    def serialize(self) -> str:
        """Name followed by ``attr: value`` pairs in sorted attribute order."""
        return " ".join([self.name] + [f"{k}: {v}" for k, v in self.attributes])


@dataclass(frozen=True)
class SemanticDB:
    entries: dict[str, Landmark]

    def __post_init__(self):
        if not self.entries:
            raise ValueError("semantic database is empty")
        for key in self.entries:
            if not PROP_RE.fullmatch(key) or key in RESERVED:
                raise ValueError(f"invalid landmark key {key!r}")

    @classmethod
    def from_json(cls, obj: dict) -> SemanticDB:
        """``{"Display Name": {"attr": value, ...}, ...}``; keys are normalized."""
        entries: dict[str, Landmark] = {}
        for name, attrs in obj.items():
            key = normalize_key(name)
            if key in entries:
                raise ValueError(f"landmarks {entries[key].name!r} and {name!r} share key {key!r}")
            pairs = tuple(sorted((str(k), _render(v)) for k, v in (attrs or {}).items()))
            entries[key] = Landmark(name, pairs)
        return cls(entries)

    @classmethod
    def load(cls, path: str | Path) -> SemanticDB:
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))

    def to_json(self) -> dict:
        return {lm.name: dict(lm.attributes) for lm in self.entries.values()}

    def keys(self) -> list[str]:
        return sorted(self.entries)

    def serialized(self, key: str) -> str:
        return self.entries[key].serialize()


# --- backends --------------------------------------------------------------------------


class ChatBackend(Protocol):
    def chat(self, prompt: str) -> str: ...


class Embedder(Protocol):
    model: str

    def embed(self, texts: Sequence[str]) -> np.ndarray: ...


@dataclass(frozen=True)
class BackendConfig:
    chat_url: str = "https://api.openai.com/v1"
    chat_model: str = "gpt-4"
    translate_template: str = "lifted"
    embed_url: str = "https://api.openai.com/v1"
    embed_model: str = "text-embedding-ada-002"
    timeout: float = 60.0
    max_in_flight: int = 4
    cache_path: str | None = None
    token_env: str = "OPENAI_API_KEY"

    def __post_init__(self):
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be at least 1")

    @classmethod
    def load(cls, path: str | Path) -> BackendConfig:
        with open(path, encoding="utf-8") as fh:
            return cls(**json.load(fh))


def request_hash(kind: str, model: str, content: str) -> str:
    payload = json.dumps({"kind": kind, "model": model, "content": content}, sort_keys=True)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class HTTPBackend:
    """OpenAI-compatible chat-completions and embeddings client."""

    def __init__(self, config: BackendConfig, transport: httpx.BaseTransport | None = None):
        self.config = config
        self.model = config.embed_model
        token = os.environ.get(config.token_env, "")
        headers = {"Authorization": f"Bearer {token}"} if token else {}
        self._client = httpx.Client(headers=headers, timeout=config.timeout, transport=transport)
        self._slots = threading.BoundedSemaphore(config.max_in_flight)

    def _post(self, url: str, body: dict) -> dict:
        with self._slots:
            try:
                resp = self._client.post(url, json=body)
            except httpx.HTTPError as exc:
                raise BackendError(f"request to {url} failed: {exc}") from exc
        if resp.status_code != 200:
            raise BackendError(f"{url} returned HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            return resp.json()
        except ValueError as exc:
            raise BackendError(f"{url} returned non-JSON body") from exc

    def chat(self, prompt: str) -> str:
        body = {
            "model": self.config.chat_model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": 0,
        }
        data = self._post(self.config.chat_url.rstrip("/") + "/chat/completions", body)
        try:
            return data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendError("malformed chat-completions response") from exc

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        body = {"model": self.config.embed_model, "input": list(texts)}
        data = self._post(self.config.embed_url.rstrip("/") + "/embeddings", body)
        try:
            rows = sorted(data["data"], key=lambda d: d["index"])
            return np.array([r["embedding"] for r in rows], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise BackendError("malformed embeddings response") from exc

    def close(self) -> None:
        self._client.close()


_STOPWORDS = frozenset("an and at by for in of on the to with".split())


class HashingEmbedder:
    """Offline embedder: signed feature hashing of content words (weight 3)
    and their character trigrams. Deterministic across processes;
    integer-valued."""

    def __init__(self, dim: int = 256):
        self.dim = dim
        self.model = f"hashing-{dim}"

    def _features(self, text: str) -> list[tuple[str, int]]:
        words = [w for w in re.findall(r"[a-z0-9]+", text.lower()) if w not in _STOPWORDS]
        feats = [(f"w:{w}", 3) for w in words]
        for w in words:
            padded = f"#{w}#"
            feats += [(f"c:{padded[i:i + 3]}", 1) for i in range(len(padded) - 2)]
        return feats

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dim))
        for row, text in enumerate(texts):
            for feat, weight in self._features(text):
                h = int.from_bytes(hashlib.blake2b(feat.encode(), digest_size=8).digest(), "big")
                out[row, h % self.dim] += weight if (h >> 32) & 1 else -weight
        return out


class MockBackend:
    """Replays recorded responses keyed by request hash. With ``upstream``
    set, misses are forwarded and recorded (record mode); without it a miss
    is a :class:`BackendError` and no network I/O ever happens."""

    def __init__(
        self,
        responses: dict | None = None,
        chat_model: str = "mock-chat",
        embed_model: str = "mock-embed",
        upstream_chat: ChatBackend | None = None,
        upstream_embed: Embedder | None = None,
    ):
        self.responses: dict[str, dict] = dict(responses or {})
        self.chat_model = chat_model
        self.model = embed_model
        self.upstream_chat = upstream_chat
        self.upstream_embed = upstream_embed
        self._lock = threading.Lock()

    @classmethod
    def load(cls, path: str | Path) -> MockBackend:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
        return cls(obj["responses"], obj["chat_model"], obj["embed_model"])

    def to_json(self) -> dict:
        return {
            "chat_model": self.chat_model,
            "embed_model": self.model,
            "responses": dict(sorted(self.responses.items())),
        }

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=1, sort_keys=True)
            fh.write("\n")

    def _lookup(self, kind: str, model: str, content: str, fetch):
        h = request_hash(kind, model, content)
        hit = self.responses.get(h)
        if hit is not None:
            return hit["response"]
        if fetch is None:
            raise BackendError(f"no recorded {kind} response for request {h[:12]}")
        value = fetch()
        with self._lock:
            self.responses[h] = {"kind": kind, "response": value}
        return value

    def chat(self, prompt: str) -> str:
        up = self.upstream_chat
        return self._lookup("chat", self.chat_model, prompt, None if up is None else lambda: up.chat(prompt))

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        up = self.upstream_embed
        rows = []
        for t in texts:
            fetch = None if up is None else (lambda t=t: [_compact(x) for x in up.embed([t])[0]])
            rows.append(self._lookup("embed", self.model, t, fetch))
        return np.array(rows, dtype=float).reshape(len(texts), -1)


def _compact(x: float):
    x = float(x)
    return int(x) if x.is_integer() else x


class EmbeddingCache:
    """Content-hash keyed vectors; concurrent reads, exclusive writes,
    optionally persisted as JSON."""

    def __init__(self, embedder: Embedder, path: str | Path | None = None):
        self.embedder = embedder
        self.model = embedder.model
        self.path = Path(path) if path else None
        self._store: dict[str, list[float]] = {}
        self._lock = threading.Lock()
        if self.path and self.path.exists():
            self._store = json.loads(self.path.read_text(encoding="utf-8"))

    def _key(self, text: str) -> str:
        return hashlib.sha256(f"{self.embedder.model}\0{text}".encode("utf-8")).hexdigest()

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        keys = [self._key(t) for t in texts]
        missing = sorted({(k, t) for k, t in zip(keys, texts) if k not in self._store})
        if missing:
            vecs = self.embedder.embed([t for _, t in missing])
            with self._lock:
                for (k, _), v in zip(missing, vecs):
                    self._store[k] = [float(x) for x in v]
        return np.array([self._store[k] for k in keys], dtype=float).reshape(len(texts), -1)

    def save(self) -> None:
        if self.path:
            with self._lock:
                self.path.write_text(json.dumps(self._store, sort_keys=True), encoding="utf-8")


# --- prompts ---------------------------------------------------------------------------


def load_prompt(template_id: str) -> str:
    """Prompt template shipped as ``data/prompts/<id>.txt``; ``{utterance}``
    marks where the command goes."""
    path = resources.files("groundltl") / "data" / "prompts" / f"{template_id}.txt"
    if not path.is_file():
        raise FileNotFoundError(f"no prompt template {template_id!r}")
    return path.read_text(encoding="utf-8")


def render_prompt(template: str, utterance: str) -> str:
    return template.replace("{utterance}", utterance)


def _answer_line(text: str, label: str) -> str:
    line = text.strip().splitlines()[0].strip() if text.strip() else ""
    if line.lower().startswith(label.lower() + ":"):
        line = line[len(label) + 1:].strip()
    return line


# --- stage 1: recognition --------------------------------------------------------------


@dataclass(frozen=True)
class ReferringExpression:
    text: str
    span: tuple[int, int]

    def __post_init__(self):
        if self.span[1] - self.span[0] != len(self.text) or not self.text:
            raise ValueError(f"span {self.span} does not fit {self.text!r}")

    def to_json(self) -> dict:
        return {"text": self.text, "span": list(self.span)}

    @classmethod
    def from_json(cls, obj: dict) -> ReferringExpression:
        return cls(obj["text"], tuple(obj["span"]))


def locate(utterance: str, texts: Iterable[str]) -> list[ReferringExpression]:
    """Place each text at its leftmost occurrence not overlapping an earlier
    placement; results in order of position."""
    taken: list[tuple[int, int]] = []
    out = []
    for text in texts:
        start = utterance.find(text)
        while start != -1 and any(start < e and s < start + len(text) for s, e in taken):
            start = utterance.find(text, start + 1)
        if start == -1:
            raise NonSubstringOutput(f"{text!r} is not an unused substring of {utterance!r}")
        taken.append((start, start + len(text)))
        out.append(ReferringExpression(text, (start, start + len(text))))
    return sorted(out, key=lambda r: r.span)


def recognize_res(utterance: str, backend: ChatBackend, template: str | None = None) -> list[ReferringExpression]:
    if not utterance.strip():
        return []
    prompt = render_prompt(template if template is not None else load_prompt("rer"), utterance)
    line = _answer_line(backend.chat(prompt), "Propositions")
    texts = [t.strip() for t in line.split(" | ") if t.strip()]
    return locate(utterance, texts)


# --- stage 2: grounding ----------------------------------------------------------------


@dataclass(frozen=True)
class KeyMatch:
    text: str
    key: str
    score: float
    tied: tuple[str, ...]  # other keys within tolerance of the best score


def _unit(rows: np.ndarray, what: Sequence[str]) -> np.ndarray:
    norms = np.linalg.norm(rows, axis=1)
    for n, w in zip(norms, what):
        if n == 0:
            raise ZeroVector(f"embedding of {w!r} has zero norm")
    return rows / norms[:, None]


def match_res(texts: Sequence[str], db: SemanticDB, embedder: Embedder, tol: float = 1e-9) -> list[KeyMatch]:
    """Cosine argmax over landmark keys; ties go to the smaller key."""
    if not texts:
        return []
    keys = db.keys()
    docs = [db.serialized(k) for k in keys]
    key_vecs = _unit(np.asarray(embedder.embed(docs), dtype=float), docs)
    re_vecs = _unit(np.asarray(embedder.embed(list(texts)), dtype=float), texts)
    sims = re_vecs @ key_vecs.T
    out = []
    for text, row in zip(texts, sims):
        best = float(row.max())
        close = [k for k, s in zip(keys, row) if s >= best - tol]  # keys are sorted
        out.append(KeyMatch(text, close[0], best, tuple(close[1:])))
    return out


def ground_res(res: Sequence[ReferringExpression | str], db: SemanticDB, embedder: Embedder) -> dict[str, str]:
    texts = list(dict.fromkeys(r.text if isinstance(r, ReferringExpression) else r for r in res))
    return {m.text: m.key for m in match_res(texts, db, embedder)}


# --- stage 3: lifting and translation --------------------------------------------------


def lift(
    utterance: str, res: Sequence[ReferringExpression], re_to_key: dict[str, str]
) -> tuple[str, dict[str, str]]:
    """Replace expressions left to right by A, B, ...; expressions grounded
    to the same key share a symbol. Returns (lifted text, key -> symbol)."""
    ordered = sorted(res, key=lambda r: r.span)
    for a, b in zip(ordered, ordered[1:]):
        if b.span[0] < a.span[1]:
            raise OverlappingSpans(f"{a.text!r} and {b.text!r} overlap")
    key_to_symbol: dict[str, str] = {}
    pieces, cursor = [], 0
    for r in ordered:
        key = re_to_key[r.text]
        if key not in key_to_symbol:
            if len(key_to_symbol) == len(SYMBOLS):
                raise TooManyLandmarks(f"more than {len(SYMBOLS)} landmarks in {utterance!r}")
            key_to_symbol[key] = SYMBOLS[len(key_to_symbol)]
        pieces += [utterance[cursor:r.span[0]], key_to_symbol[key]]
        cursor = r.span[1]
    pieces.append(utterance[cursor:])
    return "".join(pieces), key_to_symbol


def translate_lifted(
    lifted_utterance: str,
    backend: ChatBackend,
    constrained: bool = True,
    template: str | None = None,
    symbols: Sequence[str] = SYMBOLS,
    max_height: int = 32,
    max_tokens: int = 128,
) -> Formula:
    """Translate with the chat model. Unconstrained, the answer must parse.
    Constrained, the answer's tokens are replayed through a decode session:
    tokens the mask rejects are skipped, and once the answer is used up the
    formula is closed with the first admissible symbol."""
    prompt = render_prompt(template if template is not None else load_prompt("lifted"), lifted_utterance)
    answer = _answer_line(backend.chat(prompt), "LTL")
    if not constrained:
        return parse_prefix(answer)
    stream = answer.split()
    cursor = [0]

    def propose(session: DecodeSession) -> str:
        if cursor[0] >= len(stream):
            return END
        cursor[0] += 1
        return stream[cursor[0] - 1]

    vocab = Vocabulary.build(list(symbols))
    prefer_leaves = [0.0] * len(vocab.operators) + [1.0] * (len(vocab.props) + 1)
    return resample_decode(
        propose, vocab, max_height, max_tokens, max_tries=len(stream) + 1, fallback=lambda s: prefer_leaves
    )


# --- full pipeline ---------------------------------------------------------------------


@dataclass(frozen=True)
class GroundingResult:
    utterance: str
    res: tuple[ReferringExpression, ...]
    re_to_key: dict[str, str] = field(hash=False)
    key_to_symbol: dict[str, str] = field(hash=False)
    lifted_utterance: str
    lifted_formula: Formula
    grounded_formula: Formula
    ambiguous: tuple[str, ...] = ()  # expressions whose best key was tied

    def to_json(self) -> dict:
        return {
            "utterance": self.utterance,
            "res": [r.to_json() for r in self.res],
            "re_to_key": dict(sorted(self.re_to_key.items())),
            "key_to_symbol": dict(sorted(self.key_to_symbol.items())),
            "lifted_utterance": self.lifted_utterance,
            "lifted_formula": print_prefix(self.lifted_formula),
            "grounded_formula": print_prefix(self.grounded_formula),
            "ambiguous": list(self.ambiguous),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, ensure_ascii=False)

    @classmethod
    def from_json(cls, obj: dict) -> GroundingResult:
        return cls(
            obj["utterance"],
            tuple(ReferringExpression.from_json(r) for r in obj["res"]),
            dict(obj["re_to_key"]),
            dict(obj["key_to_symbol"]),
            obj["lifted_utterance"],
            parse_prefix(obj["lifted_formula"]),
            parse_prefix(obj["grounded_formula"]),
            tuple(obj.get("ambiguous", ())),
        )


@dataclass(frozen=True)
class Backends:
    chat: ChatBackend
    embed: Embedder
    rer_template: str = "rer"
    translate_template: str = "lifted"

    def __post_init__(self):
        if not isinstance(self.embed, EmbeddingCache):
            object.__setattr__(self, "embed", EmbeddingCache(self.embed))


class _Stage:
    def __init__(self, name: str):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and isinstance(exc, (GroundingError, LTLSyntaxError)) and getattr(exc, "stage", None) is None:
            exc.stage = self.name
        return False


def ground_command(utterance: str, db: SemanticDB, backends: Backends, constrained: bool = True) -> GroundingResult:
    with _Stage("rer"):
        res = recognize_res(utterance, backends.chat, load_prompt(backends.rer_template))
    with _Stage("reg"):
        matches = match_res(list(dict.fromkeys(r.text for r in res)), db, backends.embed)
        re_to_key = {m.text: m.key for m in matches}
    with _Stage("lift"):
        lifted_utterance, key_to_symbol = lift(utterance, res, re_to_key)
    with _Stage("translate"):
        lifted = translate_lifted(
            lifted_utterance,
            backends.chat,
            constrained,
            load_prompt(backends.translate_template),
            symbols=SYMBOLS,
        )
    with _Stage("ground"):
        symbol_to_key = {s: k for k, s in key_to_symbol.items()}
        unbound = sorted(set(props(lifted)) - set(symbol_to_key))
        if unbound:
            raise UnboundSymbol(f"lifted formula uses unbound symbols {unbound}")
        grounded = substitute(lifted, symbol_to_key)
    return GroundingResult(
        utterance,
        tuple(res),
        re_to_key,
        key_to_symbol,
        lifted_utterance,
        lifted,
        grounded,
        tuple(m.text for m in matches if m.tied),
    )


__all__ = [
    "SYMBOLS",
    "BackendConfig",
    "BackendError",
    "Backends",
    "EmbeddingCache",
    "GroundingError",
    "GroundingResult",
    "HTTPBackend",
    "HashingEmbedder",
    "KeyMatch",
    "Landmark",
    "MockBackend",
    "NonSubstringOutput",
    "OverlappingSpans",
    "ReferringExpression",
    "SemanticDB",
    "TooManyLandmarks",
    "UnboundSymbol",
    "ZeroVector",
    "ground_command",
    "ground_res",
    "lift",
    "load_prompt",
    "locate",
    "match_res",
    "normalize_key",
    "recognize_res",
    "render_prompt",
    "request_hash",
    "translate_lifted",
]
