"""Planning on a labelled map graph against an LTL formula.

The product of the map (where the robot may always stay put) with the
formula's Büchi automaton is searched for an accepting lasso; the shortest
prefix wins. No lasso means the command is unsatisfiable on this map.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .automaton import LassoTrace, _eval_positions, _sccs, eval_lasso, label_allows, to_buchi
from .ltl import Formula, map_props, props


class PlannerError(ValueError):
    pass


class UnknownProposition(PlannerError):
    pass


class MalformedPlan(PlannerError):
    pass


@dataclass(frozen=True)
class SemanticMap:
    nodes: tuple[str, ...]
    labels: dict[str, frozenset[str]] = field(compare=False)
    edges: frozenset[tuple[str, str]]
    initial: str
    alphabet: frozenset[str] = frozenset()
    aliases: dict[str, str] = field(default_factory=dict, compare=False)  # short name -> label

    def __post_init__(self):
        if self.initial not in self.nodes:
            raise PlannerError(f"initial node {self.initial!r} is not a node")
        for u, v in self.edges:
            if u not in self.nodes or v not in self.nodes:
                raise PlannerError(f"edge {u!r} -> {v!r} leaves the node set")
        labels = {n: frozenset(self.labels.get(n, ())) for n in self.nodes}
        object.__setattr__(self, "labels", labels)
        declared = frozenset(self.alphabet) | frozenset().union(*labels.values())
        object.__setattr__(self, "alphabet", declared)
        for short, target in self.aliases.items():
            if target not in declared:
                raise PlannerError(f"alias {short!r} points to unknown label {target!r}")

    def resolve(self, f: Formula) -> Formula:
        """Rewrite alias names to the labels they stand for."""
        return map_props(f, lambda p: self.aliases.get(p, p)) if self.aliases else f

    def successors(self, node: str) -> list[str]:
        """The node itself (the robot may wait), then its neighbours."""
        return [node] + sorted({v for u, v in self.edges if u == node} - {node})

    def moves(self, u: str, v: str) -> bool:
        return u == v or (u, v) in self.edges

    @classmethod
    def from_json(cls, obj: dict) -> SemanticMap:
        nodes = obj["nodes"]
        edges = {tuple(e) for e in obj.get("edges", [])}
        if obj.get("undirected", False):
            edges |= {(v, u) for u, v in edges}
        return cls(
            nodes=tuple(nodes),
            labels={n: frozenset(ls) for n, ls in nodes.items()},
            edges=frozenset(edges),
            initial=obj["initial"],
            alphabet=frozenset(obj.get("alphabet", ())),
            aliases=dict(obj.get("aliases", {})),
        )

    @classmethod
    def load(cls, path: str | Path) -> SemanticMap:
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))

    def to_json(self) -> dict:
        return {
            "initial": self.initial,
            "nodes": {n: sorted(self.labels[n]) for n in self.nodes},
            "edges": sorted(list(e) for e in self.edges),
            "alphabet": sorted(self.alphabet),
            "aliases": dict(sorted(self.aliases.items())),
        }


@dataclass(frozen=True)
class Plan:
    prefix: tuple[str, ...]
    cycle: tuple[str, ...]  # empty: stay at the last prefix node forever

    def nodes(self) -> tuple[tuple[str, ...], tuple[str, ...]]:
        if self.cycle:
            return self.prefix, self.cycle
        if not self.prefix:
            raise MalformedPlan("plan has no nodes")
        return self.prefix[:-1], self.prefix[-1:]

    def to_json(self) -> dict:
        return {"prefix": list(self.prefix), "cycle": list(self.cycle)}


@dataclass(frozen=True)
class Unsatisfiable:
    reason: str

    def __bool__(self) -> bool:
        return False


def _check_props(m: SemanticMap, f: Formula) -> Formula:
    f = m.resolve(f)
    unknown = sorted(set(props(f)) - m.alphabet)
    if unknown:
        raise UnknownProposition(f"propositions not on the map: {unknown}")
    return f


def trace_of(m: SemanticMap, plan: Plan) -> LassoTrace:
    prefix, cycle = plan.nodes()
    return LassoTrace(tuple(m.labels[n] for n in prefix), tuple(m.labels[n] for n in cycle))


def well_formed(m: SemanticMap, plan: Plan) -> bool:
    prefix, cycle = plan.nodes()
    path = list(prefix) + list(cycle)
    if not path or path[0] != m.initial or any(n not in m.labels for n in path):
        return False
    steps = list(zip(path, path[1:])) + [(cycle[-1], cycle[0])]
    return all(m.moves(u, v) for u, v in steps)


def verify(m: SemanticMap, f: Formula, plan: Plan) -> bool:
    """Independent check: the plan moves along the map and its label trace
    satisfies ``f``."""
    f = _check_props(m, f)
    return well_formed(m, plan) and eval_lasso(f, trace_of(m, plan))


def plan(m: SemanticMap, f: Formula) -> Plan | Unsatisfiable:
    f = _check_props(m, f)
    A = to_buchi(f, sorted(m.alphabet))
    if not A.initial:
        return Unsatisfiable("the formula itself is unsatisfiable")

    def ok(node: str, q: int) -> bool:
        return label_allows(A.labels[q], m.labels[node])

    index: dict[tuple[str, int], int] = {}
    states: list[tuple[str, int]] = []
    parent: list[int] = []
    queue: deque[int] = deque()

    def visit(s: tuple[str, int], src: int) -> None:
        if s not in index:
            index[s] = len(states)
            states.append(s)
            parent.append(src)
            queue.append(index[s])

    for q in sorted(A.initial):
        if ok(m.initial, q):
            visit((m.initial, q), -1)
    succ: list[list[int]] = []
    while queue:
        i = queue.popleft()
        node, q = states[i]
        for v in m.successors(node):
            for r in A.successors[q]:
                if ok(v, r):
                    visit((v, r), i)
    # successor lists once every state has an index (BFS order = depth order)
    for node, q in states:
        succ.append([index[(v, r)] for v in m.successors(node) for r in A.successors[q] if ok(v, r)])
    if not states:
        return Unsatisfiable("no product state matches the initial node")

    comp = [0] * len(states)
    nontrivial = set()
    for c, members in enumerate(_sccs(len(states), succ)):
        for s in members:
            comp[s] = c
        if len(members) > 1 or members[0] in succ[members[0]]:
            nontrivial.add(c)
    for s in range(len(states)):  # BFS order: first hit has the shortest prefix
        if states[s][1] in A.accepting and comp[s] in nontrivial:
            return _lasso(states, parent, succ, comp, s)
    return Unsatisfiable("no accepting cycle in the product of map and automaton")


def _lasso(states, parent, succ, comp, s: int) -> Plan:
    stem = []
    i = parent[s]
    while i != -1:
        stem.append(i)
        i = parent[i]
    stem.reverse()
    # shortest cycle through s inside its component
    back = {s: None}
    queue = deque([s])
    loop_end = None
    while queue and loop_end is None:
        i = queue.popleft()
        for j in succ[i]:
            if j == s:
                loop_end = i
                break
            if comp[j] == comp[s] and j not in back:
                back[j] = i
                queue.append(j)
    loop = []
    i = loop_end
    while i is not None:
        loop.append(i)
        i = back[i]
    loop.reverse()
    return Plan(tuple(states[i][0] for i in stem), tuple(states[i][0] for i in loop))


def bounded_satisfiable(m: SemanticMap, f: Formula, max_prefix: int = 6, max_cycle: int = 6) -> bool:
    """Brute force: does any map walk shaped prefix . cycle^omega with the
    given length bounds satisfy ``f``? Walks are enumerated with numpy and
    evaluated with the lasso fixpoint oracle; independent of the automaton."""
    f = _check_props(m, f)
    nodes = list(m.nodes)
    pos = {n: i for i, n in enumerate(nodes)}
    adj = np.zeros((len(nodes), len(nodes)), dtype=bool)
    for n in nodes:
        for v in m.successors(n):
            adj[pos[n], pos[v]] = True
    names = sorted(set(props(f)))
    codes = np.array([[p in m.labels[n] for p in names] for n in nodes], dtype=bool).reshape(len(nodes), len(names))
    walks = np.array([[pos[m.initial]]], dtype=np.int16)
    by_len = {1: walks}
    for length in range(2, max_prefix + max_cycle + 1):
        last = walks[:, -1]
        rows, cols = np.nonzero(adj[last])
        walks = np.concatenate([walks[rows], cols[:, None].astype(np.int16)], axis=1)
        by_len[length] = walks
    for p in range(max_prefix + 1):
        for c in range(1, max_cycle + 1):
            w = by_len[p + c]
            w = w[adj[w[:, -1], w[:, p]]]  # cycle closes
            if len(w) == 0:
                continue
            if names:
                vals = np.unique(codes[w].reshape(len(w), -1), axis=0).reshape(-1, p + c, len(names))
            else:
                vals = np.zeros((1, p + c, 0), dtype=bool)
            succ = list(range(1, p + c)) + [p]

            def value(name, vals=vals):
                return vals[:, :, names.index(name)]

            if _eval_positions(f, value, succ, (len(vals),))[f][:, 0].any():
                return True
    return False


__all__ = [
    "MalformedPlan",
    "Plan",
    "PlannerError",
    "SemanticMap",
    "UnknownProposition",
    "Unsatisfiable",
    "bounded_satisfiable",
    "plan",
    "trace_of",
    "verify",
    "well_formed",
]
