"""Regenerate the shipped data files under src/groundltl/data.

Outputs: the two indoor maps and their semantic databases, the robot demo
commands with gold formulas, a small city database, the lifted seed corpus,
and the recorded mock-backend fixture for 100 grounding commands.

The fixture's chat responses are scripted from gold annotations (no hosted
model is queried); embeddings come from the offline hashing embedder.
"""

from __future__ import annotations

import json
import random
import re
from pathlib import Path

from groundltl import grounding as g
from groundltl.dataset import Sample, write_jsonl
from groundltl.ltl import (
    Finally,
    Formula,
    Globally,
    Implies,
    Next,
    Not,
    Or,
    Prop,
    Until,
    conj,
    parse_prefix,
    print_prefix,
    substitute,
)
from groundltl.patterns import PatternTemplate, instantiate, visits_at_least
from groundltl.seeds import seed_records

DATA = Path(__file__).resolve().parents[1] / "src" / "groundltl" / "data"


def P(name: str) -> Prop:
    return Prop(name)


def t(family: str, *keys: str, n: int | None = None) -> Formula:
    tpl = PatternTemplate(family, n if n is not None else len(keys))
    return instantiate(tpl, list(keys))


def avoid(*keys: str) -> Formula:
    return conj([Globally(Not(P(k))) for k in keys])


def after_avoid(a: str, b: str) -> Formula:
    return Globally(Implies(P(a), Next(Globally(Not(P(b))))))


def until_first(a: str, b: str) -> Formula:
    return Until(Not(P(a)), P(b))


ENV1_DB = {
    "bookshelf": {"material": "wood", "color": "brown"},
    "desk A": {"material": "wood", "color": "brown"},
    "desk B": {"material": "metal", "color": "white"},
    "doorway": {},
    "kitchen counter": {"color": "white"},
    "couch": {"color": "blue", "brand": "IKEA"},
    "door": {"material": "steel", "color": "grey"},
    "table": {"color": "white"},
}

ENV2_DB = {
    "hallway A": {"decoration": "painting"},
    "hallway B": {"decoration": "none"},
    "table A": {"location": "kitchen", "material": "metal", "color": "blue"},
    "table B": {"location": "atrium", "material": "metal", "color": "white"},
    "classroom": {"door": ["glass", "grey"]},
    "elevator": {"color": "purple"},
    "staircase": {},
    "front desk": {},
    "office": {"door": ["wood", "yellow"]},
}

# the kitchen counter is only reachable through the doorway, the couch only
# through the kitchen counter; everything else hangs off an unlabeled hub
ENV1_MAP = {
    "initial": "living_room",
    "undirected": True,
    "aliases": {"counter": "kitchen_counter"},
    "nodes": {
        "living_room": [],
        "bookshelf": ["bookshelf"],
        "desk_a": ["desk_a"],
        "desk_b": ["desk_b"],
        "doorway": ["doorway"],
        "kitchen_counter": ["kitchen_counter"],
        "couch": ["couch"],
        "door": ["door"],
        "table": ["table"],
    },
    "edges": [
        ["living_room", "door"],
        ["living_room", "bookshelf"],
        ["living_room", "desk_a"],
        ["living_room", "desk_b"],
        ["living_room", "table"],
        ["living_room", "doorway"],
        ["doorway", "kitchen_counter"],
        ["kitchen_counter", "couch"],
    ],
}

# the office is only reachable through the front desk, table A only through
# hallway A; the robot starts in hallway B
ENV2_MAP = {
    "initial": "hallway_b",
    "undirected": True,
    "nodes": {
        "hallway_a": ["hallway_a"],
        "hallway_b": ["hallway_b"],
        "table_a": ["table_a"],
        "table_b": ["table_b"],
        "classroom": ["classroom"],
        "elevator": ["elevator"],
        "staircase": ["staircase"],
        "front_desk": ["front_desk"],
        "office": ["office"],
    },
    "edges": [
        ["hallway_b", "front_desk"],
        ["hallway_b", "elevator"],
        ["hallway_b", "staircase"],
        ["hallway_b", "table_b"],
        ["hallway_b", "classroom"],
        ["hallway_b", "hallway_a"],
        ["front_desk", "office"],
        ["hallway_a", "table_a"],
    ],
}

# (row, utterance, [(referring expression, key)], gold formula, expected status)
ENV1_COMMANDS = [
    (1, "go to brown bookshelf, metal desk, wooden desk, kitchen counter, and the blue couch in any order",
     [("brown bookshelf", "bookshelf"), ("metal desk", "desk_b"), ("wooden desk", "desk_a"),
      ("kitchen counter", "kitchen_counter"), ("the blue couch", "couch")],
     t("visit", "bookshelf", "desk_b", "desk_a", "kitchen_counter", "couch"), "sat"),
    (2, "move to grey door, then bookrack, then brown desk, then counter, then white desk",
     [("grey door", "door"), ("bookrack", "bookshelf"), ("brown desk", "desk_a"), ("counter", "kitchen_counter"),
      ("white desk", "desk_b")],
     t("sequence_visit", "door", "bookshelf", "desk_a", "kitchen_counter", "desk_b"), "sat"),
    (3, "visit brown wooden desk but only after bookshelf",
     [("brown wooden desk", "desk_a"), ("bookshelf", "bookshelf")],
     t("ordered_visit", "bookshelf", "desk_a"), "sat"),
    (4, "go from brown bookshelf to white metal desk and only visit each landmark one time",
     [("brown bookshelf", "bookshelf"), ("white metal desk", "desk_b")],
     t("strictly_ordered_visit", "bookshelf", "desk_b"), "sat"),
    (5, "go to brown wooden desk exactly once and do not visit brown desk before bookshelf",
     [("brown wooden desk", "desk_a"), ("brown desk", "desk_a"), ("bookshelf", "bookshelf")],
     conj([t("exact_restricted_avoidance", "desk_a", n=1), until_first("desk_a", "bookshelf")]), "sat"),
    (6, "go to white desk at least three times",
     [("white desk", "desk_b")], t("lower_restricted_avoidance", "desk_b", n=3), "sat"),
    (7, "go to wooden bookshelf at least five times",
     [("wooden bookshelf", "bookshelf")], t("lower_restricted_avoidance", "bookshelf", n=5), "sat"),
    (8, "visit bookshelf at most three times",
     [("bookshelf", "bookshelf")], t("upper_restricted_avoidance", "bookshelf", n=3), "sat"),
    (9, "visit counter at most 5 times",
     [("counter", "kitchen_counter")], t("upper_restricted_avoidance", "kitchen_counter", n=5), "sat"),
    (10, "go to wooden desk exactly three times",
     [("wooden desk", "desk_a")], t("exact_restricted_avoidance", "desk_a", n=3), "sat"),
    (11, "move to brown wooden desk exactly 5 times",
     [("brown wooden desk", "desk_a")], t("exact_restricted_avoidance", "desk_a", n=5), "sat"),
    (12, "go to doorway exactly two times, in addition always avoid the table",
     [("doorway", "doorway"), ("the table", "table")],
     conj([t("exact_restricted_avoidance", "doorway", n=2), avoid("table")]), "sat"),
    (13, "go to brown desk only after visiting bookshelf, in addition go to brown desk only after visiting white desk",
     [("brown desk", "desk_a"), ("bookshelf", "bookshelf"), ("brown desk", "desk_a"), ("white desk", "desk_b")],
     conj([Finally(P("desk_a")), until_first("desk_a", "bookshelf"), until_first("desk_a", "desk_b")]), "sat"),
    (14, "visit wooden desk exactly two times, in addition do not go to wooden desk before bookrack",
     [("wooden desk", "desk_a"), ("wooden desk", "desk_a"), ("bookrack", "bookshelf")],
     conj([t("exact_restricted_avoidance", "desk_a", n=2), until_first("desk_a", "bookshelf")]), "sat"),
    (15, "visit wooden desk at least two times, in addition do not go to wooden desk before bookshelf",
     [("wooden desk", "desk_a"), ("wooden desk", "desk_a"), ("bookshelf", "bookshelf")],
     conj([t("lower_restricted_avoidance", "desk_a", n=2), until_first("desk_a", "bookshelf")]), "sat"),
    (16, "visit the blue IKEA couch, in addition never go to the big steel door",
     [("the blue IKEA couch", "couch"), ("the big steel door", "door")],
     conj([Finally(P("couch")), avoid("door")]), "sat"),
    (17, "visit white kitchen counter then go to brown desk, in addition never visit white table",
     [("white kitchen counter", "kitchen_counter"), ("brown desk", "desk_a"), ("white table", "table")],
     conj([t("sequence_visit", "kitchen_counter", "desk_a"), avoid("table")]), "sat"),
    (18, "go to the grey door, and only then go to the bookshelf, in addition always avoid the table",
     [("the grey door", "door"), ("the bookshelf", "bookshelf"), ("the table", "table")],
     conj([t("ordered_visit", "door", "bookshelf"), avoid("table")]), "sat"),
    (19, "go to kitchen counter then wooden desk, in addition after going to counter, you must avoid white table",
     [("kitchen counter", "kitchen_counter"), ("wooden desk", "desk_a"), ("counter", "kitchen_counter"),
      ("white table", "table")],
     conj([t("sequence_visit", "kitchen_counter", "desk_a"), after_avoid("kitchen_counter", "table")]), "sat"),
    (20, "Go to bookshelf, alternatively go to metal desk",
     [("bookshelf", "bookshelf"), ("metal desk", "desk_b")],
     Or(Finally(P("bookshelf")), Finally(P("desk_b"))), "sat"),
    (21, "Go to counter, alternatively go to metal desk",
     [("counter", "kitchen_counter"), ("metal desk", "desk_b")],
     Or(Finally(P("kitchen_counter")), Finally(P("desk_b"))), "sat"),
    (22, "Go to the counter, but never visit the counter",
     [("the counter", "kitchen_counter"), ("the counter", "kitchen_counter")],
     conj([Finally(P("kitchen_counter")), avoid("kitchen_counter")]), "unsat"),
    (23, "do not go to the wooden desk until bookshelf, and do not go to bookshelf until wooden desk",
     [("the wooden desk", "desk_a"), ("bookshelf", "bookshelf"), ("bookshelf", "bookshelf"), ("wooden desk", "desk_a")],
     conj([until_first("desk_a", "bookshelf"), until_first("bookshelf", "desk_a")]), "unsat"),
    (24, "go to brown desk exactly once, in addition go to brown desk at least twice",
     [("brown desk", "desk_a"), ("brown desk", "desk_a")],
     conj([t("exact_restricted_avoidance", "desk_a", n=1), t("lower_restricted_avoidance", "desk_a", n=2)]), "unsat"),
    (25, "find the kitchen counter, in addition avoid the doorway",
     [("the kitchen counter", "kitchen_counter"), ("the doorway", "doorway")],
     conj([Finally(P("kitchen_counter")), avoid("doorway")]), "unsat"),
    (26, "move to couch exactly twice, in addition pass by counter at most once",
     [("couch", "couch"), ("counter", "kitchen_counter")],
     conj([t("exact_restricted_avoidance", "couch", n=2), t("upper_restricted_avoidance", "kitchen_counter", n=1)]),
     "unsat"),
    (27, "navigate to the counter then the brown desk, in addition after going to the counter, you must avoid doorway",
     [("the counter", "kitchen_counter"), ("the brown desk", "desk_a"), ("the counter", "kitchen_counter"),
      ("doorway", "doorway")],
     conj([t("sequence_visit", "kitchen_counter", "desk_a"), after_avoid("kitchen_counter", "doorway")]), "unsat"),
    (28, "Visit the counter at least 2 times and at most 5 times",
     [("the counter", "kitchen_counter")],
     conj([visits_at_least(P("kitchen_counter"), 2), t("upper_restricted_avoidance", "kitchen_counter", n=5)]), "sat"),
    (29, "visit counter at least six times",
     [("counter", "kitchen_counter")], visits_at_least(P("kitchen_counter"), 6), "sat"),
    (30, "either go to bookshelf then desk A, or go to couch",
     [("bookshelf", "bookshelf"), ("desk A", "desk_a"), ("couch", "couch")],
     Or(t("sequence_visit", "bookshelf", "desk_a"), Finally(P("couch"))), "sat"),
]

ENV2_COMMANDS = [
    (1, "navigate to the office with the wooden door, the classroom with glass door and the table in the atrium "
        "in any order",
     [("the office with the wooden door", "office"), ("the classroom with glass door", "classroom"),
      ("the table in the atrium", "table_b")],
     t("visit", "office", "classroom", "table_b"), "sat"),
    (2, "go down the hallway decorated with paintings, then find the kitchen table, then front desk, then staircase",
     [("the hallway decorated with paintings", "hallway_a"), ("the kitchen table", "table_a"),
      ("front desk", "front_desk"), ("staircase", "staircase")],
     t("sequence_visit", "hallway_a", "table_a", "front_desk", "staircase"), "sat"),
    (3, "navigate to classroom but do not visit classroom before the white table in atrium",
     [("classroom", "classroom"), ("classroom", "classroom"), ("the white table in atrium", "table_b")],
     t("ordered_visit", "table_b", "classroom"), "sat"),
    (4, "only visit classroom once, and do not visit classroom until you visit elevator first",
     [("classroom", "classroom"), ("classroom", "classroom"), ("elevator", "elevator")],
     conj([t("exact_restricted_avoidance", "classroom", n=1), until_first("classroom", "elevator")]), "sat"),
    (5, "Go to the staircase, front desk and the white table in the atrium in that exact order. "
        "You are not permitted to revisit any of these locations",
     [("the staircase", "staircase"), ("front desk", "front_desk"), ("the white table in the atrium", "table_b")],
     t("strictly_ordered_visit", "staircase", "front_desk", "table_b"), "sat"),
    (6, "go to the purple elevator at least five times",
     [("the purple elevator", "elevator")], t("lower_restricted_avoidance", "elevator", n=5), "sat"),
    (7, "visit the kitchen table at most three times",
     [("the kitchen table", "table_a")], t("upper_restricted_avoidance", "table_a", n=3), "sat"),
    (8, "navigate to the classroom exactly four times",
     [("the classroom", "classroom")], t("exact_restricted_avoidance", "classroom", n=4), "sat"),
    (9, "go to the front desk then the yellow office door, in addition do not visit the classroom with glass door",
     [("the front desk", "front_desk"), ("the yellow office door", "office"),
      ("the classroom with glass door", "classroom")],
     conj([t("sequence_visit", "front_desk", "office"), avoid("classroom")]), "sat"),
    (10, "go to the stairs then the front desk, in addition avoid purple elevator",
     [("the stairs", "staircase"), ("the front desk", "front_desk"), ("purple elevator", "elevator")],
     conj([t("sequence_visit", "staircase", "front_desk"), avoid("elevator")]), "sat"),
    (11, "move to elevator then front desk, in addition avoid staircase",
     [("elevator", "elevator"), ("front desk", "front_desk"), ("staircase", "staircase")],
     conj([t("sequence_visit", "elevator", "front_desk"), avoid("staircase")]), "sat"),
    (12, "go to front desk exactly two times, in addition avoid elevator",
     [("front desk", "front_desk"), ("elevator", "elevator")],
     conj([t("exact_restricted_avoidance", "front_desk", n=2), avoid("elevator")]), "sat"),
    (13, "Go to elevator, alternatively go to staircase",
     [("elevator", "elevator"), ("staircase", "staircase")],
     Or(Finally(P("elevator")), Finally(P("staircase"))), "sat"),
    (14, "Go to the front desk at least two different occasions, in addition you are only permitted to visit "
         "the staircase at most once",
     [("the front desk", "front_desk"), ("the staircase", "staircase")],
     conj([t("lower_restricted_avoidance", "front_desk", n=2), t("upper_restricted_avoidance", "staircase", n=1)]),
     "sat"),
    (15, "Visit the elevator exactly once, in addition visit the front desk on at least 2 separate occasions",
     [("the elevator", "elevator"), ("the front desk", "front_desk")],
     conj([t("exact_restricted_avoidance", "elevator", n=1), t("lower_restricted_avoidance", "front_desk", n=2)]),
     "sat"),
    (16, "Go to the office, in addition avoid visiting the elevator and the classroom",
     [("the office", "office"), ("the elevator", "elevator"), ("the classroom", "classroom")],
     conj([Finally(P("office")), avoid("elevator", "classroom")]), "sat"),
    (17, "Visit the front desk, in addition you are not permitted to visit elevator and staircase",
     [("the front desk", "front_desk"), ("elevator", "elevator"), ("staircase", "staircase")],
     conj([Finally(P("front_desk")), avoid("elevator", "staircase")]), "sat"),
    (18, "Visit the purple door elevator, then go to the front desk and then go to the kitchen table, in addition "
         "you can never go to the elevator once you've seen the front desk",
     [("the purple door elevator", "elevator"), ("the front desk", "front_desk"), ("the kitchen table", "table_a"),
      ("the elevator", "elevator"), ("the front desk", "front_desk")],
     conj([t("sequence_visit", "elevator", "front_desk", "table_a"), after_avoid("front_desk", "elevator")]), "sat"),
    (19, "Visit the front desk then the white table, in addition if you visit the staircase you must avoid the "
         "elevator after that",
     [("the front desk", "front_desk"), ("the white table", "table_b"), ("the staircase", "staircase"),
      ("the elevator", "elevator")],
     conj([t("sequence_visit", "front_desk", "table_b"), after_avoid("staircase", "elevator")]), "sat"),
    (20, "Go to the classroom with glass door, but never visit the classroom with glass door",
     [("the classroom with glass door", "classroom"), ("the classroom with glass door", "classroom")],
     conj([Finally(P("classroom")), avoid("classroom")]), "unsat"),
    (21, "do not go to the white table until classroom, and do not go to the classroom until white table",
     [("the white table", "table_b"), ("classroom", "classroom"), ("the classroom", "classroom"),
      ("white table", "table_b")],
     conj([until_first("table_b", "classroom"), until_first("classroom", "table_b")]), "unsat"),
    (22, "go to kitchen table exactly once, in addition go to kitchen table at least twice",
     [("kitchen table", "table_a"), ("kitchen table", "table_a")],
     conj([t("exact_restricted_avoidance", "table_a", n=1), t("lower_restricted_avoidance", "table_a", n=2)]),
     "unsat"),
    (23, "find the office, in addition avoid visiting the front desk and the classroom and the table in atrium",
     [("the office", "office"), ("the front desk", "front_desk"), ("the classroom", "classroom"),
      ("the table in atrium", "table_b")],
     conj([Finally(P("office")), avoid("front_desk", "classroom", "table_b")]), "unsat"),
    (24, "move to the kitchen table exactly twice, in addition pass by hallway decorated by paintings at most once",
     [("the kitchen table", "table_a"), ("hallway decorated by paintings", "hallway_a")],
     conj([t("exact_restricted_avoidance", "table_a", n=2), t("upper_restricted_avoidance", "hallway_a", n=1)]),
     "unsat"),
    (25, "navigate to the kitchen table then the front desk, in addition after going to the kitchen table, you must "
         "avoid hallway decorated with paintings",
     [("the kitchen table", "table_a"), ("the front desk", "front_desk"), ("the kitchen table", "table_a"),
      ("hallway decorated with paintings", "hallway_a")],
     conj([t("sequence_visit", "table_a", "front_desk"), after_avoid("table_a", "hallway_a")]), "unsat"),
    (26, "Go to the front desk at least 4 different occasions, additionally, you are only permitted to visit the "
         "staircase at most once",
     [("the front desk", "front_desk"), ("the staircase", "staircase")],
     conj([t("lower_restricted_avoidance", "front_desk", n=4), t("upper_restricted_avoidance", "staircase", n=1)]),
     "sat"),
    (27, "Visit the front desk, additionally if you visit the elevator you must visit the office after that",
     [("the front desk", "front_desk"), ("the elevator", "elevator"), ("the office", "office")],
     conj([Finally(P("front_desk")), t("delayed_reaction", "elevator", "office")]), "sat"),
    (28, "Visit the front desk, additionally you visit the elevator you must visit the office after that the white "
         "table and the classroom",
     [("the front desk", "front_desk"), ("the elevator", "elevator"), ("the office", "office"),
      ("the white table", "table_b"), ("the classroom", "classroom")],
     conj([Finally(P("front_desk")),
           Globally(Implies(P("elevator"), t("sequence_visit", "office", "table_b", "classroom")))]), "sat"),
]

CITY_DB = {
    "Walmart": {"shop": "supermarket", "brand": "Walmart", "addr:street": "Main Street"},
    "Chase": {"amenity": "bank", "brand": "Chase", "addr:street": "Boylston Street"},
    "Jiaho supermarket": {
        "addr:housenumber": "692", "shop": "supermarket", "opening_hours": "Mo-Su 08:00-20:00",
        "phone": "6173389788", "addr:postcode": "02111", "addr:street": "Washington Street",
    },
    "Panera Bread": {"amenity": "fast_food", "cuisine": "sandwich", "addr:street": "Stuart Street"},
    "Wang Theater": {"amenity": "theatre", "addr:street": "Tremont Street"},
    "The Kensington": {"building": "apartments", "addr:street": "Washington Street"},
    "Seybolt Park": {"leisure": "park"},
    "Cutler Majestic Theater": {"amenity": "theatre", "operator": "Emerson College", "addr:street": "Tremont Street"},
    "Dunkin Donuts": {"amenity": "cafe", "cuisine": "donut", "addr:street": "Summer Street"},
    "New Saigon Sandwich": {"amenity": "fast_food", "cuisine": "vietnamese", "addr:street": "Washington Street"},
    "St James Church": {"amenity": "place_of_worship", "religion": "christian", "addr:street": "Harrison Avenue"},
    "Montien": {"amenity": "restaurant", "cuisine": "thai", "addr:street": "Stuart Street"},
}

CITY_RES = {
    "walmart": ["the store on Main Street", "Walmart", "the Walmart supermarket"],
    "chase": ["the bank", "Chase bank on Boylston Street", "Chase"],
    "jiaho_supermarket": ["Jiaho supermarket", "the supermarket on Washington Street"],
    "panera_bread": ["Panera Bread", "the sandwich place on Stuart Street"],
    "wang_theater": ["Wang Theater", "the theatre on Tremont Street"],
    "the_kensington": ["The Kensington apartments", "The Kensington"],
    "seybolt_park": ["Seybolt Park", "the park"],
    "cutler_majestic_theater": ["Cutler Majestic Theater", "the Emerson College theatre"],
    "dunkin_donuts": ["Dunkin Donuts", "the donut cafe on Summer Street"],
    "new_saigon_sandwich": ["New Saigon Sandwich", "the Vietnamese sandwich shop"],
    "st_james_church": ["St James Church", "the Christian church on Harrison Avenue"],
    "montien": ["Thai restaurant Montien", "Montien"],
}


def dump(obj, name: str) -> None:
    with open(DATA / name, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, ensure_ascii=False)
        fh.write("\n")


def demo_rows():
    rows = []
    for env, table in (("env1", ENV1_COMMANDS), ("env2", ENV2_COMMANDS)):
        for row, utt, res, f, status in table:
            rows.append({
                "env": env, "row": row, "utterance": utt,
                "res": [list(r) for r in res], "ltl": print_prefix(f), "expect": status,
            })
    return rows


def city_commands(rng: random.Random, count: int):
    """Ground lifted seed utterances with city landmarks; the referring
    expressions are recorded for scripting the recognition answers."""
    seeds = [s for s in seed_records(0) if len(set(s["props"])) <= 5]
    keys = sorted(CITY_RES)
    out = []
    while len(out) < count:
        s = rng.choice(seeds)
        names = list(dict.fromkeys(s["props"]))
        picked = rng.sample(keys, len(names))
        to_re = {p: rng.choice(CITY_RES[k]) for p, k in zip(names, picked)}
        if len(set(to_re.values())) < len(to_re):
            continue
        pattern = re.compile(r"\b(" + "|".join(map(re.escape, names)) + r")\b")
        spans, text, cursor, pieces = [], s["utterance"], 0, []
        for m in pattern.finditer(text):
            pieces.append(text[cursor:m.start()])
            spans.append((to_re[m.group(1)], dict(zip(names, picked))[m.group(1)]))
            pieces.append(to_re[m.group(1)])
            cursor = m.end()
        pieces.append(text[cursor:])
        utt = "".join(pieces)
        f = substitute(Sample.from_json(s).formula, dict(zip(names, picked)))
        out.append({"utterance": utt, "res": [list(r) for r in spans], "ltl": print_prefix(f)})
    return out


class ScriptedChat:
    """Answers recognition with the annotated expressions and translation
    with the gold formula lifted through the pipeline's own bijection."""

    def __init__(self, utterance: str, res, gold: Formula, db: g.SemanticDB, embedder):
        self.utterance = utterance
        self.res = res
        self.gold = gold
        self.db = db
        self.embedder = embedder

    def chat(self, prompt: str) -> str:
        if prompt.rstrip().endswith("Propositions:"):
            return " | ".join(text for text, _ in self.res)
        gold_key = dict(self.res)
        located = g.locate(self.utterance, [text for text, _ in self.res])
        matched = g.ground_res(located, self.db, self.embedder)
        _, key_to_symbol = g.lift(self.utterance, located, matched)
        mapping = {gold_key[r.text]: key_to_symbol[matched[r.text]] for r in located}
        return print_prefix(substitute(self.gold, mapping))


def build_fixture(commands, dbs):
    embedder = g.HashingEmbedder()
    mock = g.MockBackend(chat_model="scripted-gold", embed_model=embedder.model, upstream_embed=embedder)
    results = []
    for cmd in commands:
        db = dbs[cmd["db"]]
        res = [tuple(r) for r in cmd["res"]]
        mock.upstream_chat = ScriptedChat(cmd["utterance"], res, parse_prefix(cmd["ltl"]), db, embedder)
        result = g.ground_command(cmd["utterance"], db, g.Backends(mock, mock))
        results.append(result.dumps())
    mock.upstream_chat = mock.upstream_embed = None
    return mock, results


def main() -> None:
    DATA.mkdir(parents=True, exist_ok=True)
    (DATA / "fixtures").mkdir(exist_ok=True)
    dump(ENV1_DB, "env1_db.json")
    dump(ENV2_DB, "env2_db.json")
    dump(ENV1_MAP, "env1_map.json")
    dump(ENV2_MAP, "env2_map.json")
    dump(CITY_DB, "city_db.json")
    rows = demo_rows()
    dump(rows, "demo_commands.json")
    write_jsonl([Sample.from_json(r) for r in seed_records(0)], DATA / "seed_corpus.jsonl")

    dbs = {
        "env1": g.SemanticDB.from_json(ENV1_DB),
        "env2": g.SemanticDB.from_json(ENV2_DB),
        "city": g.SemanticDB.from_json(CITY_DB),
    }
    commands = [
        {"id": "running-example", "db": "city",
         "utterance": "Go to the store on Main Street, but only after visiting the bank",
         "res": [["the store on Main Street", "walmart"], ["the bank", "chase"]],
         "ltl": "& F walmart U ! walmart chase"},
        {"id": "visit-chase", "db": "city", "utterance": "visit Chase bank on Boylston Street",
         "res": [["Chase bank on Boylston Street", "chase"]], "ltl": "F chase"},
    ]
    commands += [
        {"id": f"{r['env']}-{r['row']}", "db": r["env"], "utterance": r["utterance"], "res": r["res"], "ltl": r["ltl"]}
        for r in rows
    ]
    rng = random.Random(7)
    for i, c in enumerate(city_commands(rng, 100 - len(commands))):
        commands.append({"id": f"city-{i}", "db": "city", **c})
    assert len(commands) == 100
    mock, results = build_fixture(commands, dbs)
    with open(DATA / "fixtures" / "commands.jsonl", "w", encoding="utf-8") as fh:
        for c in commands:
            fh.write(json.dumps({"id": c["id"], "db": c["db"], "utterance": c["utterance"]}, ensure_ascii=False) + "\n")
    mock.save(DATA / "fixtures" / "mock_backend.json")
    with open(DATA / "fixtures" / "expected_results.jsonl", "w", encoding="utf-8") as fh:
        for line in results:
            fh.write(line + "\n")


if __name__ == "__main__":
    main()
