"""Type-constrained decoding of prefix formulas.

A :class:`DecodeSession` tracks the open operand slots of a partial prefix
formula, each with the tree height still available to it, and answers which
tokens may come next. Any sampler that scores the vocabulary can be driven
through the mask; the output always parses.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .ltl import OPERATOR_ARITY, Formula, parse_prefix

END = "<end>"


class DecodeError(RuntimeError):
    pass


class SessionFinished(DecodeError):
    pass


class DisallowedToken(DecodeError):
    pass


class TokenBudgetExceeded(DecodeError):
    pass


@dataclass(frozen=True)
class Vocabulary:
    operators: tuple[tuple[str, int], ...]
    props: tuple[str, ...]
    end: str = END

    @classmethod
    def build(cls, props: Sequence[str], operators: dict[str, int] | None = None) -> Vocabulary:
        ops = OPERATOR_ARITY if operators is None else operators
        clash = set(props) & (set(ops) | {END})
        if clash:
            raise ValueError(f"propositions clash with operator tokens: {sorted(clash)}")
        return cls(tuple(ops.items()), tuple(props))

    @property
    def tokens(self) -> tuple[str, ...]:
        return tuple(op for op, _ in self.operators) + self.props + (self.end,)

    @property
    def max_arity(self) -> int:
        return max((k for _, k in self.operators), default=0)

    def index(self, token: str) -> int:
        return self.tokens.index(token)


class DecodeSession:
    """Mask oracle for one decode. Lone propositions have height 1."""

    def __init__(self, vocab: Vocabulary, max_height: int, max_tokens: int | None = None):
        if max_height < 1:
            raise ValueError("max_height must be at least 1")
        if max_tokens is not None and max_tokens < 1:
            raise ValueError("max_tokens must be at least 1")
        self.vocab = vocab
        self.max_height = max_height
        self.max_tokens = max_tokens
        self.emitted: list[str] = []
        self.slots: list[int] = [max_height]  # remaining height per open slot, top is last
        self.finished = False
        self._arity = dict(vocab.operators)
        self._props = set(vocab.props)

    @property
    def pending(self) -> int:
        return len(self.slots)

    @property
    def complete(self) -> bool:
        return not self.slots

    def _remaining(self) -> float:
        return math.inf if self.max_tokens is None else self.max_tokens - len(self.emitted)

    def _operator_ok(self, arity: int) -> bool:
        if self.slots[-1] <= 1:
            return False
        # every slot still open after this token needs at least one more token
        return len(self.slots) - 1 + arity <= self._remaining() - 1

    def allows(self, token: str) -> bool:
        if self.finished:
            raise SessionFinished("session already emitted the end token")
        if self.complete:
            return token == self.vocab.end
        if token in self._props:
            return True
        arity = self._arity.get(token)
        return arity is not None and self._operator_ok(arity)

    def allowed_next(self) -> np.ndarray:
        """Boolean mask aligned with ``vocab.tokens``."""
        return np.array([self.allows(t) for t in self.vocab.tokens], dtype=bool)

    def allowed_tokens(self) -> list[str]:
        return [t for t in self.vocab.tokens if self.allows(t)]

    def feed(self, token: str) -> DecodeSession:
        if not self.allows(token):
            raise DisallowedToken(f"{token!r} is not allowed after {' '.join(self.emitted)!r}")
        if token == self.vocab.end:
            self.finished = True
            return self
        budget = self.slots.pop()
        self.emitted.append(token)
        arity = self._arity.get(token, 0) if token not in self._props else 0
        self.slots.extend([budget - 1] * arity)
        return self

    def text(self) -> str:
        return " ".join(self.emitted)

    def formula(self) -> Formula:
        if not self.complete:
            raise DecodeError("formula is not complete yet")
        return parse_prefix(self.text())


Sampler = Callable[[DecodeSession], Sequence[float]]


def _pick(scores: np.ndarray, mask: np.ndarray, rng: random.Random | None) -> int:
    masked = np.where(mask, scores, -np.inf)
    if rng is None:
        return int(np.argmax(masked))
    # renormalise over the admitted tokens
    z = masked - masked[mask].max()
    p = np.where(mask, np.exp(z), 0.0)
    p /= p.sum()
    return rng.choices(range(len(p)), weights=p.tolist())[0]


def constrained_decode(
    sampler: Sampler,
    vocab: Vocabulary,
    max_height: int,
    max_tokens: int,
    rng: random.Random | None = None,
) -> Formula:
    """Decode until the end token. ``sampler`` returns one score per vocabulary
    token (log-probabilities or logits); without ``rng`` the masked argmax is
    taken, with it a token is sampled from the masked softmax."""
    session = DecodeSession(vocab, max_height, max_tokens)
    tokens = vocab.tokens
    for _ in range(max_tokens + 1):
        scores = np.asarray(sampler(session), dtype=float)
        if scores.shape != (len(tokens),):
            raise ValueError(f"sampler returned {scores.shape}, expected ({len(tokens)},)")
        session.feed(tokens[_pick(scores, session.allowed_next(), rng)])
        if session.finished:
            return session.formula()
    raise TokenBudgetExceeded(f"no end token within {max_tokens} tokens")


def resample_decode(
    propose: Callable[[DecodeSession], str],
    vocab: Vocabulary,
    max_height: int,
    max_tokens: int,
    max_tries: int = 16,
    fallback: Sampler | None = None,
) -> Formula:
    """Rejection variant for samplers that only return a token: disallowed
    proposals are redrawn; after ``max_tries`` rejections the first admitted
    token (or ``fallback``'s masked argmax) is used."""
    session = DecodeSession(vocab, max_height, max_tokens)
    tokens = vocab.tokens
    for _ in range(max_tokens + 1):
        for _ in range(max_tries):
            tok = propose(session)
            if tok in tokens and session.allows(tok):
                break
        else:
            mask = session.allowed_next()
            scores = np.zeros(len(tokens)) if fallback is None else np.asarray(fallback(session), dtype=float)
            tok = tokens[_pick(scores, mask, None)]
        session.feed(tok)
        if session.finished:
            return session.formula()
    raise TokenBudgetExceeded(f"no end token within {max_tokens} tokens")


def unconstrained_decode(sampler: Sampler, vocab: Vocabulary, max_tokens: int, rng: random.Random | None = None) -> str:
    """Baseline without the mask: stops at the end token or the budget."""
    out: list[str] = []
    tokens = vocab.tokens
    shadow = DecodeSession(vocab, 1, None)  # only handed to the sampler
    everything = np.ones(len(tokens), dtype=bool)
    for _ in range(max_tokens):
        scores = np.asarray(sampler(shadow), dtype=float)
        tok = tokens[_pick(scores, everything, rng)]
        if tok == vocab.end:
            break
        out.append(tok)
    return " ".join(out)


def uniform_sampler(rng: random.Random) -> Sampler:
    """Independent uniform scores per step."""

    def sample(session: DecodeSession) -> list[float]:
        return [rng.random() for _ in session.vocab.tokens]

    return sample


def replay_sampler(tokens: Sequence[str]) -> Sampler:
    """Scores that favour a recorded token stream, one per step. Leaves score
    above operators, so a masked stream is closed off rather than padded."""
    stream = list(tokens)

    def sample(session: DecodeSession) -> list[float]:
        step = len(session.emitted)
        want = stream[step] if step < len(stream) else session.vocab.end
        ops = dict(session.vocab.operators)
        return [1.0 if t == want else 0.0 if t in ops else 0.5 for t in session.vocab.tokens]

    return sample
