"""Acceptance criteria. Each test prints one PASS/FAIL line; the lines are
repeated in the terminal summary."""

import itertools
import json
import random
import time
from pathlib import Path


from conftest import CRITERIA
from groundltl import automaton, data_file, dataset, evaluate, patterns, planner
from groundltl.decode import Vocabulary, constrained_decode, uniform_sampler, unconstrained_decode
from groundltl.fuzz import random_formula
from groundltl.grounding import Backends, MockBackend, SemanticDB, ground_command
from groundltl.ltl import Finally, LTLSyntaxError, Prop, height, parse_infix, parse_prefix, print_prefix, props, size, substitute

TABLE = json.loads((Path(__file__).parent / "oracles" / "pattern_table.json").read_text())


def report(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'} - {detail}"
    CRITERIA[n] = line
    print(line)
    assert ok, line


def test_c01_template_count():
    start = time.perf_counter()
    items = patterns.all_templates()
    equal = [(a, b) for (a, f), (b, g) in itertools.combinations(items, 2) if automaton.equivalent(f, g)]
    seconds = time.perf_counter() - start
    ok = len(items) == 47 and not equal and seconds < 60
    report(1, ok, f"{len(items)} templates, {len(equal)} equivalent pairs, {seconds:.1f}s for 1081 checks")


def test_c02_pattern_table():
    def inst(family, n, names=None):
        t = patterns.PatternTemplate(family, n)
        return patterns.instantiate(t, names or list("abcdf")[: t.prop_count])

    failures = []
    rows = TABLE["generic"] + TABLE["counting"]
    for family, n, text in rows:
        if (family, n) == ("lower_restricted_avoidance", 1):
            continue  # flagged row, asserted as F a below
        if not automaton.equivalent(inst(family, n), parse_infix(text)):
            failures.append(f"{family}_{n}")
    # exact n=3 against the instance printed in the grounded prompt
    prompt = data_file("prompts", "grounded.txt").read_text()
    line = next(l for l in prompt.splitlines() if l.startswith("LTL: M") and "seybolt_park" in l)
    printed = parse_prefix(line[len("LTL: "):])
    if not automaton.equivalent(inst("exact_restricted_avoidance", 3, ["seybolt_park"]), printed):
        failures.append("exact_restricted_avoidance_3")
    lower_flag = "lower_restricted_avoidance_1" in patterns.KNOWN_DISCREPANCIES
    lower_ok = lower_flag and inst("lower_restricted_avoidance", 1) == Finally(Prop("a"))
    if not lower_ok:
        failures.append("lower_restricted_avoidance_1 (flag)")
    detail = f"{len(rows) + 1 - len(failures)}/{len(rows) + 1} rows equivalent"
    if failures:
        detail += f"; not equivalent: {', '.join(failures)}"
        if failures == ["upper_restricted_avoidance_2"]:
            detail += " (printed row equals upper_restricted_avoidance_1; see KNOWN_DISCREPANCIES)"
    report(2, not failures, detail)


def test_c03_oracle_agreement():
    rng = random.Random(2024)
    start = time.perf_counter()
    bad, count, biggest = 0, 10_000, 0
    for _ in range(count):
        f = random_formula(rng, 12, ["a", "b", "c"])
        biggest = max(biggest, size(f))
        alphabet = sorted(set(props(f)))
        A = automaton.to_buchi(f, alphabet)
        for c in range(1, 4):
            expected = automaton.eval_lassos(f, alphabet, 3, c)
            got = automaton.accepts_lassos(A, alphabet, 3, c)
            bad += sum(int((x != y).any()) for x, y in zip(expected, got))
    seconds = time.perf_counter() - start
    ok = bad == 0 and biggest <= 12 and seconds < 300
    report(3, ok, f"{count} formulas (max size {biggest}), {bad} disagreements, {seconds:.1f}s")


def test_c04_constrained_decoding():
    vocab = Vocabulary.build(["a", "b", "c", "d", "f"])
    rng = random.Random(7)
    errors = 0
    for _ in range(10_000):
        f = constrained_decode(uniform_sampler(rng), vocab, 8, 80, rng=rng)
        try:
            g = parse_prefix(print_prefix(f))
            if g != f or height(f) > 8 or size(f) > 80:
                errors += 1
        except LTLSyntaxError:
            errors += 1
    invalid = 0
    for _ in range(10_000):
        text = unconstrained_decode(uniform_sampler(rng), vocab, 80, rng=rng)
        try:
            parse_prefix(text)
        except LTLSyntaxError:
            invalid += 1
    ok = errors == 0 and invalid > 5_000
    report(4, ok, f"constrained: {errors}/10000 invalid; unconstrained baseline: {invalid / 100:.1f}% invalid")


def test_c05_augmentation():
    out = dataset.permute_augment(dataset.shipped_seed_corpus())
    formulas = len({s.ltl_prefix for s in out})
    # synthetic seeds: every template over fresh placeholder names
    rng = random.Random(3)
    seeds = []
    for tid, _ in patterns.all_templates():
        t = patterns.PatternTemplate.from_id(tid)
        names = rng.sample(["b", "c", "d", "f", "g", "h"], t.prop_count)
        seeds.append(dataset.Sample("reach " + " and ".join(names), patterns.instantiate(t, names), tid, tuple(names)))
    aug = dataset.permute_augment(seeds)
    keys = {(s.utterance, s.ltl_prefix) for s in aug}
    idempotent = {(s.utterance, s.ltl_prefix) for s in dataset.permute_augment(aug)} == keys
    closed = all({(x.utterance, x.ltl_prefix) for x in dataset.permute_augment([s])} <= keys for s in aug)
    ok = formulas == 2125 and len(out) == 49655 and idempotent and closed
    report(5, ok, f"{formulas} formulas, {len(out)} utterances; synthetic seeds closed={closed} idempotent={idempotent}")


def test_c06_holdout_disjointness():
    corpus = dataset.permute_augment(dataset.shipped_seed_corpus())
    problems = []
    assign = dataset.make_split(corpus, dataset.SplitSpec("formula_holdout", 5, 0))
    by_fold = [sorted({s.skeleton for s, k in zip(corpus, assign) if k == j}, key=print_prefix) for j in range(5)]
    pairs = 0
    for i, j in itertools.combinations(range(5), 2):
        for f, g in itertools.product(by_fold[i], by_fold[j]):
            pairs += 1
            if automaton.equivalent(f, g):
                problems.append(f"formula folds {i}/{j}")
    assign = dataset.make_split(corpus, dataset.SplitSpec("type_holdout", 5, 0))
    fams = [{patterns.family_of(s.template_id) for s, k in zip(corpus, assign) if k == j} for j in range(5)]
    if any(fams[i] & fams[j] for i, j in itertools.combinations(range(5), 2)):
        problems.append("type folds share a family")
    bank = {}
    for name in ("city", "env1", "env2"):
        db = SemanticDB.load(data_file(f"{name}_db.json"))
        for key in db.keys():
            bank[key] = [db.entries[key].name]
    lifted = random.Random(0).sample(corpus, 500)
    folds = dataset.vocabulary_shift_split(lifted, bank, folds=2, seed=0)
    vocab_ok = dataset.vocabulary_disjointness(folds[0], folds[1]) and all(folds)
    if not vocab_ok:
        problems.append("vocabulary-shift folds share a landmark")
    detail = f"{pairs} cross-fold skeleton pairs checked, families disjoint, vocabulary shift disjoint={vocab_ok}"
    report(6, not problems, detail if not problems else "; ".join(problems))


def test_c07_pipeline_determinism():
    mock = MockBackend.load(data_file("fixtures", "mock_backend.json"))
    backends = Backends(mock, mock)
    commands = [json.loads(l) for l in data_file("fixtures", "commands.jsonl").read_text().splitlines() if l.strip()]
    expected = data_file("fixtures", "expected_results.jsonl").read_text().splitlines()
    dbs = {}
    got = []
    for c in commands:
        db = dbs.setdefault(c["db"], SemanticDB.load(data_file(f"{c['db']}_db.json")))
        got.append(ground_command(c["utterance"], db, backends).dumps())
    same = sum(a == b for a, b in zip(got, expected))
    running = json.loads(got[0])
    running_ok = running["grounded_formula"] == "& F walmart U ! walmart chase" and running["utterance"].startswith("Go to the store")
    ok = len(got) == 100 and same == 100 and len(expected) == 100 and running_ok
    report(7, ok, f"{same}/{len(got)} byte-identical; running example -> {running['grounded_formula']}")


def test_c08_planner():
    rows = json.loads(data_file("demo_commands.json").read_text())
    problems, unsat = [], {"env1": 0, "env2": 0}
    for env in ("env1", "env2"):
        m = planner.SemanticMap.load(data_file(f"{env}_map.json"))
        for r in (r for r in rows if r["env"] == env):
            f = parse_prefix(r["ltl"])
            result = planner.plan(m, f)
            if r["expect"] == "unsat":
                unsat[env] += 1
                if result:
                    problems.append(f"{env} row {r['row']} planned")
            elif not (result and planner.verify(m, f, result)):
                problems.append(f"{env} row {r['row']} failed")
    rng = random.Random(11)
    disagreements, trials = 0, 400
    for _ in range(trials):
        n = rng.randint(1, 5)
        nodes = {f"n{i}": rng.sample(["a", "b", "c"], rng.randint(0, 2)) for i in range(n)}
        edges = [[f"n{i}", f"n{j}"] for i in range(n) for j in range(n) if i != j and rng.random() < 0.4]
        m = planner.SemanticMap.from_json({"nodes": nodes, "edges": edges, "initial": "n0", "alphabet": ["a", "b", "c"]})
        f = random_formula(rng, 8, ["a", "b", "c"])
        result = planner.plan(m, f)
        if result and not planner.verify(m, f, result):
            disagreements += 1
        elif bool(result) != planner.bounded_satisfiable(m, f, 6, 6):
            disagreements += 1
    ok = not problems and unsat == {"env1": 6, "env2": 6} and disagreements == 0
    detail = f"UNSAT env1={unsat['env1']} env2={unsat['env2']}, {len(rows)} demo rows, {disagreements}/{trials} completeness disagreements"
    report(8, ok, detail if not problems else "; ".join(problems))


def _independent_category(gold, text):
    """The cascade written out again, directly from its definition."""
    try:
        pred = parse_prefix(text)
    except LTLSyntaxError:
        return {evaluate.SYNTAX}
    tg, tp = patterns.classify(gold), patterns.classify(pred)
    holds = set()
    if tg != patterns.UNKNOWN and tp != patterns.UNKNOWN and tg != tp:
        holds.add(evaluate.MISCLASSIFIED)
    elif len(set(props(gold))) != len(set(props(pred))):
        holds.add(evaluate.PROPOSITIONS)
    elif tp != patterns.UNKNOWN and tp == tg:
        holds.add(evaluate.PERMUTATION)
    elif tp == patterns.UNKNOWN:
        holds.add(evaluate.UNKNOWN_TEMPLATE)
    return holds


def test_c09_error_taxonomy():
    hand = [
        ("F a", "U a", evaluate.SYNTAX),
        ("& F a F b", "F & a F b", evaluate.MISCLASSIFIED),
        ("F a", "& F a X b", evaluate.PROPOSITIONS),
        ("& U ! b a F b", "& U ! a b F a", evaluate.PERMUTATION),
        ("F a", "X a", evaluate.UNKNOWN_TEMPLATE),
    ]
    hand_ok = all(evaluate.categorize_error(parse_prefix(g), p) == c for g, p, c in hand)
    rng = random.Random(9)
    templates = patterns.all_templates()
    seen, bad, n = {}, 0, 0
    while n < 1000:
        tid, gold = rng.choice(templates)
        roll = rng.random()
        if roll < 0.1:
            text = " ".join(print_prefix(gold).split()[:-1]) or "F"
        elif roll < 0.55:
            other = rng.choice(templates)[1]
            names = list(dict.fromkeys(props(other)))
            text = print_prefix(substitute(other, dict(zip(names, rng.sample(names, len(names))))))
        else:
            text = print_prefix(random_formula(rng, 10, ["a", "b", "c"]))
        cat = evaluate.categorize_error(gold, text)
        if cat is None:
            continue  # correct prediction
        n += 1
        seen[cat] = seen.get(cat, 0) + 1
        if _independent_category(gold, text) != {cat}:
            bad += 1
    ok = hand_ok and bad == 0 and set(seen) == set(evaluate.CATEGORIES)
    report(9, ok, f"hand instances ok={hand_ok}; 1000 fuzzed incorrect: {dict(sorted(seen.items()))}, {bad} not exactly one")


def test_c10_corpus_stats():
    stats = dataset.corpus_stats(dataset.permute_augment(dataset.shipped_seed_corpus()))
    p, l = stats["props"], stats["length"]
    ok = (p["min"], p["max"], l["min"], l["max"]) == (1, 5, 2, 67) and abs(p["mean"] - 3.79) <= 0.01 and abs(l["mean"] - 18.89) <= 0.01
    report(10, ok, f"props ({p['min']}, {p['max']}, {p['mean']:.4f}), length ({l['min']}, {l['max']}, {l['mean']:.4f})")
