"""Büchi automata for LTL: tableau translation, emptiness, equivalence.

Translation goes through negation normal form and the on-the-fly tableau
(node splitting on Until/Release/Or), producing a generalized automaton
with state labels that is then degeneralized with a round-robin counter.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .ltl import (
    FALSE,
    TRUE,
    And,
    Equiv,
    FalseConst,
    Finally,
    Formula,
    Globally,
    Implies,
    Next,
    Not,
    Or,
    Prop,
    Release,
    StrongRelease,
    TrueConst,
    Until,
    WeakUntil,
    conj,
    print_prefix,
    props,
)

DEFAULT_NODE_BUDGET = 10**6


class FormulaTooLarge(RuntimeError):
    pass


# --- lasso traces and the positional evaluator --------------------------------


@dataclass(frozen=True)
class LassoTrace:
    """The infinite word ``prefix + cycle + cycle + ...``."""

    prefix: tuple[frozenset[str], ...]
    cycle: tuple[frozenset[str], ...]

    def __post_init__(self):
        if not self.cycle:
            raise ValueError("lasso cycle must be non-empty")
        object.__setattr__(self, "prefix", tuple(frozenset(v) for v in self.prefix))
        object.__setattr__(self, "cycle", tuple(frozenset(v) for v in self.cycle))

    @property
    def positions(self) -> tuple[frozenset[str], ...]:
        return self.prefix + self.cycle

    def successor(self, i: int) -> int:
        return i + 1 if i + 1 < len(self.prefix) + len(self.cycle) else len(self.prefix)

    def to_json(self) -> dict:
        return {"prefix": [sorted(v) for v in self.prefix], "cycle": [sorted(v) for v in self.cycle]}


# one-step unfoldings: value now from operand values now and own value next
_UNFOLD_UNARY = {
    Finally: (lambda x, nxt: x | nxt, False),
    Globally: (lambda x, nxt: x & nxt, True),
}
_UNFOLD_BINARY = {
    Until: (lambda x, y, nxt: y | (x & nxt), False),
    WeakUntil: (lambda x, y, nxt: y | (x & nxt), True),
    StrongRelease: (lambda x, y, nxt: y & (x | nxt), False),
    Release: (lambda x, y, nxt: y & (x | nxt), True),
}


def _boolean(g: Formula, args: list[np.ndarray]) -> np.ndarray:
    match g:
        case Not():
            return ~args[0]
        case And():
            return args[0] & args[1]
        case Or():
            return args[0] | args[1]
        case Implies():
            return ~args[0] | args[1]
        case Equiv():
            return args[0] == args[1]
    raise TypeError(f"not a boolean connective: {g!r}")


def _eval_positions(f: Formula, value, succ: Sequence[int], shape: tuple[int, ...]) -> dict[Formula, np.ndarray]:
    """Truth of every subformula of ``f`` at every lasso position.

    ``value(name)`` returns a bool array of ``shape + (n,)``; ``succ`` is the
    successor index of every position. Until-like operators are least
    fixpoints and Release-like ones greatest fixpoints of their one-step
    unfolding, iterated until stable.
    """
    n = len(succ)
    succ = np.asarray(succ)
    cache: dict[Formula, np.ndarray] = {}

    def fix(step, start: bool):
        v = np.full(shape + (n,), start, dtype=bool)
        while True:
            nv = step(v[..., succ])
            if np.array_equal(nv, v):
                return v
            v = nv

    def ev(g: Formula) -> np.ndarray:
        hit = cache.get(g)
        if hit is not None:
            return hit
        match g:
            case Prop(name):
                r = value(name)
            case TrueConst():
                r = np.ones(shape + (n,), dtype=bool)
            case FalseConst():
                r = np.zeros(shape + (n,), dtype=bool)
            case Next(a):
                r = ev(a)[..., succ]
            case Finally(a) | Globally(a):
                x = ev(a)
                step, start = _UNFOLD_UNARY[type(g)]
                r = fix(lambda nxt: step(x, nxt), start)
            case Until(a, b) | WeakUntil(a, b) | StrongRelease(a, b) | Release(a, b):
                x, y = ev(a), ev(b)
                step, start = _UNFOLD_BINARY[type(g)]
                r = fix(lambda nxt: step(x, y, nxt), start)
            case _:
                r = _boolean(g, [ev(c) for c in g.children])
        cache[g] = r
        return r

    ev(f)
    return cache


def eval_lasso(f: Formula, trace: LassoTrace) -> bool:
    # propositions absent from every valuation are false everywhere
    positions = trace.positions
    succ = [trace.successor(i) for i in range(len(positions))]

    def value(name: str) -> np.ndarray:
        return np.array([name in v for v in positions], dtype=bool)

    return bool(_eval_positions(f, value, succ, ())[f][0])


def eval_lasso_batch(f: Formula, alphabet: Sequence[str], prefix_len: int, cycle_len: int) -> np.ndarray:
    """Evaluate ``f`` on every lasso with the given prefix and cycle lengths.

    Lasso ``r`` spells ``r`` in base ``2**len(alphabet)`` (prefix letters
    first, most significant first); bit ``k`` of a letter says whether
    ``alphabet[k]`` holds.
    """
    return eval_lassos(f, alphabet, prefix_len, cycle_len)[prefix_len]


def eval_lassos(f: Formula, alphabet: Sequence[str], max_prefix: int, cycle_len: int) -> list[np.ndarray]:
    """:func:`eval_lasso_batch` for every prefix length up to ``max_prefix``.

    Cycles are solved once by fixpoint iteration and prefix letters are then
    prepended one at a time.
    """
    letters = 1 << len(alphabet)
    index = {name: bit for bit, name in enumerate(alphabet)}
    cycles = _word_table(cycle_len, letters)
    n_cycles = len(cycles)

    def cycle_value(name: str) -> np.ndarray:
        bit = index.get(name)
        if bit is None:
            return np.zeros(cycles.shape, dtype=bool)
        return ((cycles >> bit) & 1).astype(bool)

    succ = [(i + 1) % cycle_len for i in range(cycle_len)]
    level = {g: v[:, 0] for g, v in _eval_positions(f, cycle_value, succ, (n_cycles,)).items()}
    rows = n_cycles
    order = list(level)  # children precede parents in evaluation order
    out = [level[f]]
    for _ in range(max_prefix):
        letter = np.repeat(np.arange(letters), rows)
        prev = level
        level = {}
        for g in order:
            match g:
                case Prop(name):
                    bit = index.get(name)
                    r = np.zeros(letters * rows, dtype=bool) if bit is None else ((letter >> bit) & 1).astype(bool)
                case TrueConst():
                    r = np.ones(letters * rows, dtype=bool)
                case FalseConst():
                    r = np.zeros(letters * rows, dtype=bool)
                case Next(a):
                    r = np.tile(prev[a], letters)
                case Finally(a) | Globally(a):
                    r = _UNFOLD_UNARY[type(g)][0](level[a], np.tile(prev[g], letters))
                case Until(a, b) | WeakUntil(a, b) | StrongRelease(a, b) | Release(a, b):
                    r = _UNFOLD_BINARY[type(g)][0](level[a], level[b], np.tile(prev[g], letters))
                case _:
                    r = _boolean(g, [level[c] for c in g.children])
            level[g] = r
        rows *= letters
        out.append(level[f])
    return out


@lru_cache(maxsize=32)
def _word_table(n: int, letters: int) -> np.ndarray:
    """All words of length ``n``; row ``r`` spells ``r`` in base ``letters``."""
    rows = np.arange(letters**n)
    cols = [(rows // letters ** (n - 1 - i)) % letters for i in range(n)]
    table = np.stack(cols, axis=1) if cols else np.zeros((1, 0), dtype=int)
    table.setflags(write=False)
    return table


def enumerate_lassos(alphabet: Sequence[str], prefix_len: int, cycle_len: int) -> Iterable[LassoTrace]:
    k = len(alphabet)
    valuations = [frozenset(a for bit, a in enumerate(alphabet) if m >> bit & 1) for m in range(1 << k)]
    for word in itertools.product(valuations, repeat=prefix_len + cycle_len):
        yield LassoTrace(word[:prefix_len], word[prefix_len:])


# --- negation normal form, interned -----------------------------------------

# node kinds of the interned NNF
_TRUE, _FALSE, _LIT, _AND, _OR, _NEXT, _UNTIL, _RELEASE = range(8)


class _Closure:
    """Hash-consed NNF subformulas; ids are small ints."""

    def __init__(self):
        self.table: dict[tuple, int] = {}
        self.nodes: list[tuple] = []
        self.eventual: set[int] = set()  # nodes equivalent to F of themselves
        self.persistent: set[int] = set()  # nodes equivalent to G of themselves

    def make(self, *key) -> int:
        nid = self.table.get(key)
        if nid is None:
            nid = len(self.nodes)
            self.table[key] = nid
            self.nodes.append(key)
        return nid

    def _neg_lit(self, i: int) -> int:
        _, name, pos = self.nodes[i]
        return self.make(_LIT, name, not pos)

    def finally_(self, x: int) -> int:
        """F x, as a deterministic Until when x starts with a literal.

        F(l & y) = !l U (l & y) whenever y holds at every point before one
        where it holds (y = F y); the first l-point is as good as any later one.
        """
        if x in self.eventual:
            return x
        node = self.nodes[x]
        if node[0] == _LIT:
            res = self.make(_UNTIL, self._neg_lit(x), x)
        elif node[0] == _AND and self.nodes[node[1]][0] == _LIT and node[2] in self.eventual:
            res = self.make(_UNTIL, self._neg_lit(node[1]), x)
        elif node[0] == _AND and self.nodes[node[2]][0] == _LIT and node[1] in self.eventual:
            res = self.make(_UNTIL, self._neg_lit(node[2]), x)
        else:
            res = self.make(_UNTIL, self.make(_TRUE), x)
        self.eventual.add(res)
        return res

    def globally(self, x: int) -> int:
        """G x; dual of :meth:`finally_` (G(l | y) = !l R (l | y) when y = G y)."""
        if x in self.persistent:
            return x
        node = self.nodes[x]
        if node[0] == _LIT:
            res = self.make(_RELEASE, self._neg_lit(x), x)
        elif node[0] == _OR and self.nodes[node[1]][0] == _LIT and node[2] in self.persistent:
            res = self.make(_RELEASE, self._neg_lit(node[1]), x)
        elif node[0] == _OR and self.nodes[node[2]][0] == _LIT and node[1] in self.persistent:
            res = self.make(_RELEASE, self._neg_lit(node[2]), x)
        else:
            res = self.make(_RELEASE, self.make(_FALSE), x)
        self.persistent.add(res)
        return res

    def nnf(self, f: Formula, neg: bool = False) -> int:
        match f:
            case Prop(name):
                return self.make(_LIT, name, not neg)
            case TrueConst():
                return self.make(_FALSE if neg else _TRUE)
            case FalseConst():
                return self.make(_TRUE if neg else _FALSE)
            case Not(a):
                return self.nnf(a, not neg)
            case And(a, b):
                kind = _OR if neg else _AND
                return self.make(kind, self.nnf(a, neg), self.nnf(b, neg))
            case Or(a, b):
                kind = _AND if neg else _OR
                return self.make(kind, self.nnf(a, neg), self.nnf(b, neg))
            case Implies(a, b):
                if neg:
                    return self.make(_AND, self.nnf(a), self.nnf(b, True))
                return self.make(_OR, self.nnf(a, True), self.nnf(b))
            case Equiv(a, b):
                pa, pb, na, nb = self.nnf(a), self.nnf(b), self.nnf(a, True), self.nnf(b, True)
                if neg:
                    return self.make(_OR, self.make(_AND, pa, nb), self.make(_AND, na, pb))
                return self.make(_OR, self.make(_AND, pa, pb), self.make(_AND, na, nb))
            case Next(a):
                return self.make(_NEXT, self.nnf(a, neg))
            case Finally(a):
                return self.globally(self.nnf(a, True)) if neg else self.finally_(self.nnf(a))
            case Globally(a):
                return self.finally_(self.nnf(a, True)) if neg else self.globally(self.nnf(a))
            case Until(a, b):
                if neg:
                    return self.make(_RELEASE, self.nnf(a, True), self.nnf(b, True))
                return self.make(_UNTIL, self.nnf(a), self.nnf(b))
            case Release(a, b):
                if neg:
                    return self.make(_UNTIL, self.nnf(a, True), self.nnf(b, True))
                return self.make(_RELEASE, self.nnf(a), self.nnf(b))
            case WeakUntil(a, b):
                # a W b = b R (a | b)
                if neg:
                    return self.make(_UNTIL, self.nnf(b, True), self.make(_AND, self.nnf(a, True), self.nnf(b, True)))
                return self.make(_RELEASE, self.nnf(b), self.make(_OR, self.nnf(a), self.nnf(b)))
            case StrongRelease(a, b):
                # a M b = b U (a & b)
                if neg:
                    return self.make(_RELEASE, self.nnf(b, True), self.make(_OR, self.nnf(a, True), self.nnf(b, True)))
                return self.make(_UNTIL, self.nnf(b), self.make(_AND, self.nnf(a), self.nnf(b)))
        raise TypeError(f"not a formula: {f!r}")


# --- automata -----------------------------------------------------------------

Label = tuple[frozenset[str], frozenset[str]]  # (must hold, must not hold)


def label_allows(label: Label, valuation: frozenset[str] | set[str]) -> bool:
    pos, neg = label
    return pos <= valuation and not (neg & valuation)


def label_formula(label: Label) -> Formula:
    pos, neg = label
    lits: list[Formula] = [Prop(p) for p in sorted(pos)] + [Not(Prop(p)) for p in sorted(neg)]
    return conj(lits) if lits else TRUE


@dataclass(frozen=True)
class BuchiAutomaton:
    """State-labelled Büchi automaton.

    A run ``q0 q1 ...`` reads the word ``v0 v1 ...`` when every ``vi``
    satisfies ``labels[qi]``; ``q0`` must be initial. Edge constraints in
    :meth:`transitions` are the labels of the target states.
    """

    alphabet: tuple[str, ...]
    labels: tuple[Label, ...]
    successors: tuple[tuple[int, ...], ...]
    initial: frozenset[int]
    accepting: frozenset[int]
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def num_states(self) -> int:
        return len(self.labels)

    @property
    def states(self) -> range:
        return range(len(self.labels))

    def transitions(self) -> list[tuple[int, Formula, int]]:
        return [(q, label_formula(self.labels[r]), r) for q in self.states for r in self.successors[q]]

    def initial_transitions(self) -> list[tuple[Formula, int]]:
        return [(label_formula(self.labels[q]), q) for q in sorted(self.initial)]

    def to_json(self) -> dict:
        return {
            "alphabet": list(self.alphabet),
            "states": self.num_states,
            "initial": [{"guard": print_prefix(g), "dst": q} for g, q in self.initial_transitions()],
            "accepting": sorted(self.accepting),
            "edges": [{"src": q, "guard": print_prefix(g), "dst": r} for q, g, r in self.transitions()],
        }

    def to_dot(self) -> str:
        lines = ["digraph buchi {", "  rankdir=LR;", '  init [shape=point];']
        for q in self.states:
            shape = "doublecircle" if q in self.accepting else "circle"
            lines.append(f"  q{q} [shape={shape}];")
        for g, q in self.initial_transitions():
            lines.append(f'  init -> q{q} [label="{print_prefix(g)}"];')
        for q, g, r in self.transitions():
            lines.append(f'  q{q} -> q{r} [label="{print_prefix(g)}"];')
        lines.append("}")
        return "\n".join(lines)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


def _tableau(closure: _Closure, root: int, budget: int):
    """Node-splitting tableau; returns (labels, succ, initial, acceptance sets).

    Expansion of a (new, old, next) triple is memoised, since its outcome does
    not depend on where the node came from; the successors of a finished
    node are the expansion of its next-set.
    """
    nodes = closure.nodes
    neg_of = {}
    for i, node in enumerate(nodes):
        if node[0] == _LIT:
            neg_of[i] = closure.table.get((_LIT, node[1], not node[2]))
    finished: dict[tuple[frozenset, frozenset, frozenset], int] = {}
    keys: list[tuple[frozenset, frozenset, frozenset]] = []
    memo: dict[tuple[frozenset, frozenset, frozenset], frozenset[int]] = {}
    work = 0

    def satisfied(eta: int, old: set[int]) -> bool:
        node = nodes[eta]
        kind = node[0]
        if kind == _OR:
            return node[1] in old or node[2] in old
        if kind == _UNTIL:
            return node[2] in old
        if kind == _RELEASE:
            return node[1] in old and node[2] in old
        if kind == _AND:
            return node[1] in old and node[2] in old
        return kind == _TRUE

    def finish(old: set[int], nxt: set[int]) -> int:
        lits = frozenset(i for i in old if nodes[i][0] == _LIT)
        pending = frozenset(i for i in old if nodes[i][0] == _UNTIL and nodes[i][2] not in old)
        # equal label, next obligations and pending Untils: same future
        key = (lits, frozenset(nxt), pending)
        nid = finished.get(key)
        if nid is None:
            nid = finished[key] = len(keys)
            keys.append(key)
        return nid

    def expand(new: frozenset[int], old: frozenset[int], nxt: frozenset[int]) -> frozenset[int]:
        nonlocal work
        mkey = (new, old, nxt)
        hit = memo.get(mkey)
        if hit is not None:
            return hit
        work += 1
        if work > budget:
            raise FormulaTooLarge(f"tableau exceeded the node budget of {budget}")
        new_s, old_s, nxt_s = set(new), set(old), set(nxt)
        result: frozenset[int] = frozenset()
        while True:
            # cheap formulas first so contradictions surface before splitting
            eta = None
            for cand in new_s:
                if nodes[cand][0] not in (_OR, _UNTIL, _RELEASE):
                    eta = cand
                    break
            if eta is None:
                if not new_s:
                    result = frozenset([finish(old_s, nxt_s)])
                    break
                eta = min(new_s)
            new_s.discard(eta)
            if eta in old_s:
                continue
            node = nodes[eta]
            kind = node[0]
            if kind == _FALSE:
                break
            if kind == _LIT:
                if neg_of[eta] in old_s:
                    break
                old_s.add(eta)
                continue
            if satisfied(eta, old_s):
                old_s.add(eta)
                continue
            if kind == _TRUE:
                continue
            if kind == _AND:
                old_s.add(eta)
                new_s.update(c for c in node[1:] if c not in old_s)
                continue
            if kind == _NEXT:
                old_s.add(eta)
                nxt_s.add(node[1])
                continue
            a, b = node[1], node[2]
            if kind == _UNTIL:
                new1, next1, new2 = {a}, {eta}, {b}
            elif kind == _RELEASE:
                new1, next1, new2 = {b}, {eta}, {a, b}
            else:
                new1, next1, new2 = {a}, set(), {b}
            old_s.add(eta)
            first = expand(frozenset(new_s | (new1 - old_s)), frozenset(old_s), frozenset(nxt_s | next1))
            second = expand(frozenset(new_s | (new2 - old_s)), frozenset(old_s), frozenset(nxt_s))
            result = first | second
            break
        memo[mkey] = result
        return result

    initial = set(expand(frozenset([root]), frozenset(), frozenset()))
    succ: list[set[int]] = []
    while len(succ) < len(keys):
        q = len(succ)
        succ.append(set())
        succ[q] = set(expand(keys[q][1], frozenset(), frozenset()))

    n = len(keys)
    labels = []
    for lits, _, _ in keys:
        pos = frozenset(nodes[i][1] for i in lits if nodes[i][2])
        neg = frozenset(nodes[i][1] for i in lits if not nodes[i][2])
        labels.append((pos, neg))
    untils = sorted({u for _, _, pending in keys for u in pending})
    acc_sets = []
    for u in untils:
        acc = frozenset(q for q in range(n) if u not in keys[q][2])
        if acc not in acc_sets:
            acc_sets.append(acc)
    return labels, succ, initial, acc_sets


def _degeneralize(labels, succ, initial, acc_sets):
    """Counter construction: level ``k`` means every set was seen since the
    last visit to level ``k``; a state may clear several levels at once."""
    k = len(acc_sets)
    index: dict[tuple[int, int], int] = {}
    order: list[tuple[int, int]] = []

    def sid(q: int, i: int) -> int:
        s = index.get((q, i))
        if s is None:
            s = index[(q, i)] = len(order)
            order.append((q, i))
        return s

    def advance(q: int, i: int) -> int:
        while i < k and q in acc_sets[i]:
            i += 1
        return i

    init = [sid(q, advance(q, 0)) for q in sorted(initial)]
    out: list[list[int]] = []
    j = 0
    while j < len(order):
        q, i = order[j]
        base = 0 if i == k else i
        out.append([sid(r, advance(r, base)) for r in sorted(succ[q])])
        j += 1
    new_labels = [labels[q] for q, _ in order]
    accepting = {s for s, (_, i) in enumerate(order) if i == k}
    return new_labels, out, set(init), accepting


def _sccs(n: int, succ: Sequence[Sequence[int]]) -> list[list[int]]:
    """Tarjan, iterative."""
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    result = []
    counter = 0
    for root in range(n):
        if index[root] != -1:
            continue
        call = [(root, 0)]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack[root] = True
        while call:
            v, pi = call[-1]
            if pi < len(succ[v]):
                call[-1] = (v, pi + 1)
                w = succ[v][pi]
                if index[w] == -1:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack[w] = True
                    call.append((w, 0))
                elif on_stack[w]:
                    low[v] = min(low[v], index[w])
            else:
                call.pop()
                if call:
                    u = call[-1][0]
                    low[u] = min(low[u], low[v])
                if low[v] == index[v]:
                    comp = []
                    while True:
                        w = stack.pop()
                        on_stack[w] = False
                        comp.append(w)
                        if w == v:
                            break
                    result.append(comp)
    return result


def _prune(labels, succ, initial, accepting):
    """Drop states that are unreachable or cannot reach an accepting cycle."""
    n = len(labels)
    reach = set(initial)
    todo = list(initial)
    while todo:
        q = todo.pop()
        for r in succ[q]:
            if r not in reach:
                reach.add(r)
                todo.append(r)
    live = set()
    for comp in _sccs(n, succ):
        cs = set(comp)
        cyclic = len(comp) > 1 or comp[0] in succ[comp[0]]
        if cyclic and cs & accepting:
            live |= cs
    pred: list[list[int]] = [[] for _ in range(n)]
    for q in range(n):
        for r in succ[q]:
            pred[r].append(q)
    todo = list(live)
    while todo:
        q = todo.pop()
        for p in pred[q]:
            if p not in live:
                live.add(p)
                todo.append(p)
    keep = sorted(reach & live)
    remap = {q: i for i, q in enumerate(keep)}
    return (
        [labels[q] for q in keep],
        [[remap[r] for r in succ[q] if r in remap] for q in keep],
        {remap[q] for q in initial if q in remap},
        {remap[q] for q in accepting if q in remap},
    )


def to_buchi(f: Formula, alphabet: Iterable[str] | None = None, node_budget: int = DEFAULT_NODE_BUDGET, prune: bool = True) -> BuchiAutomaton:
    closure = _Closure()
    root = closure.nnf(f)
    labels, succ, initial, acc_sets = _tableau(closure, root, node_budget)
    tableau_states = len(labels)
    labels, succ, initial, accepting = _degeneralize(labels, succ, initial, acc_sets)
    if prune:
        labels, succ, initial, accepting = _prune(labels, succ, initial, accepting)
    sigma = tuple(sorted(set(props(f)) | set(alphabet or ())))
    return BuchiAutomaton(
        alphabet=sigma,
        labels=tuple(labels),
        successors=tuple(tuple(sorted(s)) for s in succ),
        initial=frozenset(initial),
        accepting=frozenset(accepting),
        meta={"tableau_states": tableau_states},
    )


def _min_valuation(label: Label) -> frozenset[str]:
    return label[0]


def is_empty(A: BuchiAutomaton) -> LassoTrace | None:
    """Nested depth-first search. Returns ``None`` if the language is empty,
    otherwise an accepted lasso."""
    return _search(sorted(A.initial), A.successors.__getitem__, A.accepting.__contains__, A.labels.__getitem__)


def _search(initial, succ, is_accepting, label) -> LassoTrace | None:
    """Nested DFS over an implicit graph of hashable states."""
    outer_seen: set = set()
    inner_seen: set = set()
    on_stack: dict = {}
    path: list = []

    for start in initial:
        if start in outer_seen:
            continue
        outer_seen.add(start)
        path.append(start)
        on_stack[start] = 0
        iters = [iter(succ(start))]
        while iters:
            q = path[-1]
            nxt = next(iters[-1], None)
            if nxt is not None:
                if nxt not in outer_seen:
                    outer_seen.add(nxt)
                    on_stack[nxt] = len(path)
                    path.append(nxt)
                    iters.append(iter(succ(nxt)))
                continue
            # post-order: launch the inner search from accepting states
            if is_accepting(q):
                tail = _inner_dfs(succ, q, on_stack, inner_seen)
                if tail is not None:
                    j = on_stack[tail[-1]]
                    stem, loop = path[:j], path[j:] + tail[:-1]
                    return LassoTrace(
                        tuple(_min_valuation(label(q)) for q in stem),
                        tuple(_min_valuation(label(q)) for q in loop),
                    )
            iters.pop()
            path.pop()
            del on_stack[q]
    return None


def _inner_dfs(succ, seed, on_stack: dict, seen: set) -> list | None:
    """Search for a path from ``seed`` back to the outer stack.

    Returns the path (excluding ``seed``) ending in a stack state."""
    path = [seed]
    iters = [iter(succ(seed))]
    while iters:
        nxt = next(iters[-1], None)
        if nxt is None:
            iters.pop()
            path.pop()
            continue
        if nxt in on_stack:
            return path[1:] + [nxt]
        if nxt not in seen:
            seen.add(nxt)
            path.append(nxt)
            iters.append(iter(succ(nxt)))
    return None


def accepts(A: BuchiAutomaton, trace: LassoTrace) -> bool:
    """Membership by emptiness of the product with the lasso's own automaton."""
    positions = trace.positions
    n = len(positions)
    ok = [[label_allows(A.labels[q], positions[i]) for i in range(n)] for q in A.states]
    index: dict[tuple[int, int], int] = {}
    states: list[tuple[int, int]] = []

    def sid(q: int, i: int) -> int:
        s = index.get((q, i))
        if s is None:
            s = index[(q, i)] = len(states)
            states.append((q, i))
        return s

    init = [sid(q, 0) for q in sorted(A.initial) if ok[q][0]]
    succ: list[list[int]] = []
    j = 0
    while j < len(states):
        q, i = states[j]
        ni = trace.successor(i)
        succ.append([sid(r, ni) for r in A.successors[q] if ok[r][ni]])
        j += 1
    product = BuchiAutomaton(
        alphabet=A.alphabet,
        labels=tuple((frozenset(), frozenset()) for _ in states),
        successors=tuple(tuple(s) for s in succ),
        initial=frozenset(init),
        accepting=frozenset(s for s, (q, _) in enumerate(states) if q in A.accepting),
    )
    return is_empty(product) is not None


def accepts_batch(A: BuchiAutomaton, alphabet: Sequence[str], prefix_len: int, cycle_len: int) -> np.ndarray:
    """Membership of every lasso of the given shape, same order as
    :func:`eval_lasso_batch`."""
    return accepts_lassos(A, alphabet, prefix_len, cycle_len)[prefix_len]


def accepts_lassos(A: BuchiAutomaton, alphabet: Sequence[str], max_prefix: int, cycle_len: int) -> list[np.ndarray]:
    """:func:`accepts_batch` for every prefix length up to ``max_prefix``.

    The product with each cycle is solved for all cycles at once with the
    Büchi fixpoint ``nu Z. mu Y. pre(Y) | (acc & pre(Z))``; the states reached
    after each prefix are then matched against the cycle solutions.
    """
    letters = 1 << len(alphabet)
    n = A.num_states
    if n == 0:
        return [np.zeros(letters ** (p + cycle_len), dtype=bool) for p in range(max_prefix + 1)]
    index = {name: bit for bit, name in enumerate(alphabet)}
    allowed = np.zeros((n, letters), dtype=bool)  # allowed[q, letter]
    for q, (pos, neg) in enumerate(A.labels):
        for m in range(letters):
            val = {a for a, bit in index.items() if m >> bit & 1}
            allowed[q, m] = pos <= val and not (neg & val)
    adj_t = np.zeros((n, n), dtype=np.float32)  # adj_t[r, q] = q -> r
    for q in range(n):
        for r in A.successors[q]:
            adj_t[r, q] = 1.0
    accepting = np.zeros(n, dtype=bool)
    accepting[list(A.accepting)] = True
    initial = np.zeros(n, dtype=bool)
    initial[list(A.initial)] = True

    cycles = _word_table(cycle_len, letters)
    here = allowed.T[cycles]  # (cycles, position, state)

    def pre(x: np.ndarray) -> np.ndarray:
        nxt = np.roll(x, -1, axis=1).reshape(-1, n).astype(np.float32)
        return here & ((nxt @ adj_t) > 0).reshape(x.shape)

    z = here.copy()
    while True:
        pz = pre(z) & accepting
        y = np.zeros_like(z)
        while True:
            ny = pre(y) | pz
            if np.array_equal(ny, y):
                break
            y = ny
        if np.array_equal(y, z):
            break
        z = y
    good = z[:, 0, :].astype(np.float32)  # (cycles, state)
    # states about to read the first cycle letter, per prefix word
    cur = initial[None, :]
    adj = adj_t.T
    out = []
    for p in range(max_prefix + 1):
        if p:
            masked = (cur[:, None, :] & allowed.T[None, :, :]).reshape(-1, n)
            cur = (masked.astype(np.float32) @ adj) > 0
        out.append(((cur.astype(np.float32) @ good.T) > 0).reshape(-1))
    return out


# --- equivalence ---------------------------------------------------------------


@dataclass(frozen=True)
class EquivalenceResult:
    equivalent: bool
    witness: LassoTrace | None = None  # satisfies exactly one of the formulas

    def __bool__(self) -> bool:
        return self.equivalent


def intersect(A: BuchiAutomaton, B: BuchiAutomaton) -> BuchiAutomaton:
    """Reachable part of the synchronous product; a flag bit alternates
    between waiting for an accepting state of ``A`` and one of ``B``."""
    index: dict[tuple[int, int, int], int] = {}
    states: list[tuple[int, int, int]] = []
    labels: list[Label] = []

    def compatible(la: Label, lb: Label) -> Label | None:
        pos, neg = la[0] | lb[0], la[1] | lb[1]
        return None if pos & neg else (pos, neg)

    def sid(p: int, q: int, k: int) -> int | None:
        s = index.get((p, q, k))
        if s is None:
            label = compatible(A.labels[p], B.labels[q])
            if label is None:
                return None
            s = index[(p, q, k)] = len(states)
            states.append((p, q, k))
            labels.append(label)
        return s

    init = {s for p in A.initial for q in B.initial if (s := sid(p, q, 0)) is not None}
    succ: list[tuple[int, ...]] = []
    j = 0
    while j < len(states):
        p, q, k = states[j]
        if k == 0 and p in A.accepting:
            k = 1
        elif k == 1 and q in B.accepting:
            k = 0
        out = {s for r in A.successors[p] for t in B.successors[q] if (s := sid(r, t, k)) is not None}
        succ.append(tuple(sorted(out)))
        j += 1
    return BuchiAutomaton(
        alphabet=tuple(sorted(set(A.alphabet) | set(B.alphabet))),
        labels=tuple(labels),
        successors=tuple(succ),
        initial=frozenset(init),
        accepting=frozenset(s for s, (p, _, k) in enumerate(states) if k == 0 and p in A.accepting),
    )


@lru_cache(maxsize=4096)
def _cached_buchi(f: Formula, node_budget: int) -> BuchiAutomaton:
    return to_buchi(f, node_budget=node_budget)


def _difference_witness(f: Formula, g: Formula, node_budget: int) -> LassoTrace | None:
    """A lasso satisfying ``f`` but not ``g``, if any."""
    A, B = _cached_buchi(f, node_budget), _cached_buchi(Not(g), node_budget)

    def label(state):
        la, lb = A.labels[state[0]], B.labels[state[1]]
        return la[0] | lb[0], la[1] | lb[1]

    def ok(p, q):
        la, lb = A.labels[p], B.labels[q]
        return not (la[0] & lb[1] or la[1] & lb[0])

    def succ(state):
        p, q, k = state
        if k == 0 and p in A.accepting:
            k = 1
        elif k == 1 and q in B.accepting:
            k = 0
        return [(r, t, k) for r in A.successors[p] for t in B.successors[q] if ok(r, t)]

    initial = [(p, q, 0) for p in sorted(A.initial) for q in sorted(B.initial) if ok(p, q)]
    return _search(initial, succ, lambda s: s[2] == 0 and s[0] in A.accepting, label)


def equivalent(f: Formula, g: Formula, node_budget: int = DEFAULT_NODE_BUDGET) -> EquivalenceResult:
    """Language equality via emptiness of ``A(f) x A(!g)`` and ``A(g) x A(!f)``."""
    if f == g:
        return EquivalenceResult(True)
    for left, right in ((f, g), (g, f)):
        w = _difference_witness(left, right, node_budget)
        if w is not None:
            return EquivalenceResult(False, w)
    return EquivalenceResult(True)


def implies(f: Formula, g: Formula, node_budget: int = DEFAULT_NODE_BUDGET) -> bool:
    """L(f) is a subset of L(g)."""
    return _difference_witness(f, g, node_budget) is None


def satisfiable(f: Formula) -> bool:
    return is_empty(to_buchi(f)) is not None


__all__ = [
    "BuchiAutomaton",
    "EquivalenceResult",
    "FormulaTooLarge",
    "LassoTrace",
    "accepts",
    "accepts_batch",
    "accepts_lassos",
    "enumerate_lassos",
    "equivalent",
    "eval_lasso",
    "eval_lasso_batch",
    "eval_lassos",
    "implies",
    "intersect",
    "is_empty",
    "label_allows",
    "satisfiable",
    "to_buchi",
    "FALSE",
    "TRUE",
]
