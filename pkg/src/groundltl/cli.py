"""Command-line entry point.

Exit codes: 0 on success (an unsatisfiable plan is an answer, not an
error), 1 on domain errors, 2 on usage errors. Logs go to standard error as
one JSON object per line.
"""

from __future__ import annotations

import argparse
import json
import logging
import random
import sys
import time
from dataclasses import dataclass
from pathlib import Path

from . import __version__, automaton, data_file, dataset, evaluate, grounding, patterns, planner
from .decode import DecodeError, Vocabulary, constrained_decode, replay_sampler, uniform_sampler
from .ltl import LTLSyntaxError, Formula, parse_infix, parse_prefix, print_infix, print_prefix, to_json

log = logging.getLogger("groundltl")


class _JSONFormatter(logging.Formatter):
    def format(self, record: logging.LogRecord) -> str:
        entry = {"level": record.levelname.lower(), "stage": getattr(record, "stage", record.name), "msg": record.getMessage()}
        entry.update(getattr(record, "fields", {}))
        return json.dumps(entry, sort_keys=True, default=str)


def _setup_logging(verbosity: int) -> None:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(_JSONFormatter())
    log.handlers[:] = [handler]
    log.propagate = False
    log.setLevel(logging.WARNING if verbosity < 0 else logging.INFO if verbosity == 0 else logging.DEBUG)


def _log(stage: str, msg: str, **fields) -> None:
    log.info(msg, extra={"stage": stage, "fields": fields})


@dataclass(frozen=True)
class RunConfig:
    command: str
    seed: int
    out_dir: Path
    backend_config: Path | None
    token_env: str

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> RunConfig:
        return cls(
            args.command,
            args.seed,
            Path(args.out_dir),
            Path(args.backend_config) if args.backend_config else None,
            args.token_env,
        )


def _formula(text: str, infix: bool) -> Formula:
    return parse_infix(text) if infix else parse_prefix(text)


def _shipped(path: str, suffix: str) -> Path:
    """A user path, or the name of a shipped file (``env1``, ``env1.json``)."""
    p = Path(path)
    if p.exists():
        return p
    stem = p.name.removesuffix(".json").removesuffix(suffix)
    candidate = data_file(f"{stem}{suffix}.json")
    if candidate.is_file():
        return Path(str(candidate))
    raise FileNotFoundError(f"no such file: {path}")


def _samples(path: str | None) -> list[dataset.Sample]:
    if path:
        return dataset.read_jsonl(path)
    return dataset.permute_augment(dataset.shipped_seed_corpus())


# --- subcommands -----------------------------------------------------------------------


def cmd_parse(args, cfg: RunConfig) -> int:
    f = _formula(args.formula, args.infix)
    match args.to:
        case "prefix":
            print(print_prefix(f))
        case "infix":
            print(print_infix(f))
        case "json":
            print(json.dumps(to_json(f), sort_keys=True))
    return 0


def cmd_check_equiv(args, cfg: RunConfig) -> int:
    f, g = _formula(args.left, args.infix), _formula(args.right, args.infix)
    result = automaton.equivalent(f, g)
    if result.equivalent:
        print("EQUIVALENT")
    else:
        w = result.witness
        print("NOT EQUIVALENT")
        print(f"witness: prefix={[sorted(s) for s in w.prefix]} cycle={[sorted(s) for s in w.cycle]}")
    return 0


def cmd_templates(args, cfg: RunConfig) -> int:
    out = Path(args.out) if args.out else cfg.out_dir / "templates.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    entries = patterns.templates_json()
    out.write_text(json.dumps(entries, indent=2) + "\n", encoding="utf-8")
    _log("templates", "wrote templates", path=str(out), count=len(entries))
    print(f"{len(entries)} templates written to {out}")
    return 0


def cmd_gen_dataset(args, cfg: RunConfig) -> int:
    seeds = dataset.read_jsonl(args.seeds) if args.seeds else dataset.shipped_seed_corpus()
    samples = dataset.permute_augment(seeds, dedup=not args.no_dedup, cap=args.cap)
    if args.res:
        bank = json.loads(Path(args.res).read_text(encoding="utf-8"))
        keys = grounding.SemanticDB.load(args.db).keys() if args.db else sorted(bank)
        samples = dataset.ground_corpus(samples, bank, keys, seed=cfg.seed, sample_size=args.sample)
    out = Path(args.out) if args.out else cfg.out_dir / "corpus.jsonl"
    out.parent.mkdir(parents=True, exist_ok=True)
    dataset.write_jsonl(samples, out)
    _log("dataset", "wrote corpus", path=str(out), count=len(samples))
    print(f"{len(samples)} samples written to {out}")
    return 0


def cmd_split(args, cfg: RunConfig) -> int:
    samples = _samples(args.data)
    spec = dataset.SplitSpec(args.regime, args.folds, cfg.seed)
    assignment = dataset.make_split(samples, spec)
    out = Path(args.out) if args.out else cfg.out_dir / f"split_{args.regime}.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps({"regime": args.regime, "folds": args.folds, "seed": cfg.seed, "assignment": assignment}) + "\n")
    sizes = [assignment.count(k) for k in range(args.folds)]
    _log("split", "wrote split", path=str(out), fold_sizes=sizes)
    print(f"fold sizes {sizes} written to {out}")
    return 0


def cmd_stats(args, cfg: RunConfig) -> int:
    print(json.dumps(dataset.corpus_stats(_samples(args.data)), indent=2, sort_keys=True))
    return 0


def _backends(args, cfg: RunConfig) -> grounding.Backends:
    if args.mock:
        mock = grounding.MockBackend.load(args.mock)
        return grounding.Backends(mock, mock)
    if cfg.backend_config is None:
        raise grounding.BackendError("either --mock or --backend-config is required")
    conf = grounding.BackendConfig.load(cfg.backend_config)
    if cfg.token_env != conf.token_env:
        conf = grounding.BackendConfig(**{**conf.__dict__, "token_env": cfg.token_env})
    http = grounding.HTTPBackend(conf)
    embed = grounding.EmbeddingCache(http, conf.cache_path)
    return grounding.Backends(http, embed, translate_template=conf.translate_template)


def cmd_ground(args, cfg: RunConfig) -> int:
    backends = _backends(args, cfg)
    dbs: dict[str, grounding.SemanticDB] = {}

    def db_for(name: str | None) -> grounding.SemanticDB:
        key = name or args.db
        if key is None:
            raise grounding.GroundingError("no semantic database given (--db)")
        if key not in dbs:
            dbs[key] = grounding.SemanticDB.load(_shipped(key, "_db"))
        return dbs[key]

    if args.utterance is not None:
        jobs = [{"utterance": args.utterance, "db": None}]
    else:
        with open(args.commands, encoding="utf-8") as fh:
            jobs = [json.loads(line) for line in fh if line.strip()]
    lines = []
    for job in jobs:
        result = grounding.ground_command(job["utterance"], db_for(job.get("db")), backends, not args.unconstrained)
        _log("ground", "grounded", utterance=job["utterance"], formula=print_prefix(result.grounded_formula))
        lines.append(result.dumps())
    if isinstance(backends.embed, grounding.EmbeddingCache):
        backends.embed.save()
    text = "".join(line + "\n" for line in lines)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_decode(args, cfg: RunConfig) -> int:
    vocab = Vocabulary.build(args.props)
    if args.fixture:
        with open(args.fixture, encoding="utf-8") as fh:
            streams = [line.split() for line in fh if line.strip()]
        for tokens in streams:
            f = constrained_decode(replay_sampler(tokens), vocab, args.max_height, args.max_tokens)
            print(print_prefix(f))
        return 0
    rng = random.Random(cfg.seed)
    for _ in range(args.count):
        f = constrained_decode(uniform_sampler(rng), vocab, args.max_height, args.max_tokens, rng=rng)
        print(print_prefix(f))
    return 0


def cmd_plan(args, cfg: RunConfig) -> int:
    m = planner.SemanticMap.load(_shipped(args.map, "_map"))
    f = _formula(args.ltl, args.infix)
    start = time.perf_counter()
    result = planner.plan(m, f)
    _log("plan", "planned", formula=print_prefix(f), seconds=round(time.perf_counter() - start, 3), sat=bool(result))
    if not result:
        print(f"UNSAT: {result.reason}")
        return 0
    if args.json:
        print(json.dumps(result.to_json()))
    else:
        print("PLAN")
        print("prefix: " + " -> ".join(result.prefix))
        print("cycle: " + (" -> ".join(result.cycle) if result.cycle else f"stay at {result.prefix[-1]}"))
    return 0


def cmd_eval(args, cfg: RunConfig) -> int:
    gold = dataset.read_jsonl(args.gold)
    preds = evaluate.read_predictions(args.pred)
    if len(gold) != len(preds):
        raise dataset.DatasetError(f"{len(gold)} gold samples but {len(preds)} predictions")
    report = evaluate.score(list(zip(gold, preds)), args.mode)
    if args.grounding_gold and args.grounding_pred:
        def annotations(path):
            with open(path, encoding="utf-8") as fh:
                return [evaluate.REAnnotation.from_json(json.loads(line)) for line in fh if line.strip()]

        scores = evaluate.rer_reg_scores(annotations(args.grounding_gold), annotations(args.grounding_pred))
        report = evaluate.with_grounding(report, scores)
    out = Path(args.out) if args.out else cfg.out_dir
    report.write(out)
    print(json.dumps({"mode": report.mode, "accuracy": report.accuracy, "errors": report.errors}, sort_keys=True))
    return 0


# --- argument parsing ------------------------------------------------------------------


def _common_options(p: argparse.ArgumentParser, default) -> None:
    """Global options, accepted before or after the subcommand."""

    def d(value):
        return value if default is None else default

    p.add_argument("--seed", type=int, default=d(0), help="random seed (default 0)")
    p.add_argument("--out-dir", default=d("."), help="directory for output files (default: current directory)")
    p.add_argument("--backend-config", default=d(None), help="JSON file with chat/embedding endpoint settings")
    p.add_argument("--token-env", default=d("OPENAI_API_KEY"), help="environment variable holding the API token")
    p.add_argument("-v", "--verbose", action="count", default=d(0), help="more log output on stderr")
    p.add_argument("-q", "--quiet", action="store_true", default=d(False), help="only warnings and errors on stderr")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="groundltl", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _common_options(p, None)
    common = argparse.ArgumentParser(add_help=False)
    _common_options(common, argparse.SUPPRESS)
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    s = sub.add_parser("parse", parents=[common], help="parse a formula and print it")
    s.add_argument("formula")
    s.add_argument("--infix", action="store_true", help="input is infix instead of prefix")
    s.add_argument("--to", choices=("prefix", "infix", "json"), default="infix")
    s.set_defaults(func=cmd_parse)

    s = sub.add_parser("check-equiv", parents=[common], help="decide language equivalence of two formulas")
    s.add_argument("left")
    s.add_argument("right")
    s.add_argument("--infix", action="store_true")
    s.set_defaults(func=cmd_check_equiv)

    s = sub.add_parser("templates", parents=[common], help="write the 47 lifted templates as JSON")
    s.add_argument("--out", help="output path (default: OUT_DIR/templates.json)")
    s.set_defaults(func=cmd_templates)

    s = sub.add_parser("gen-dataset", parents=[common], help="permutation-augment seeds, optionally ground them")
    s.add_argument("--seeds", help="seed JSONL (default: the shipped seed corpus)")
    s.add_argument("--out", help="output JSONL (default: OUT_DIR/corpus.jsonl)")
    s.add_argument("--no-dedup", action="store_true")
    s.add_argument("--cap", type=int, help="maximum permutations per seed")
    s.add_argument("--res", help="JSON map landmark key -> referring expressions; grounds the corpus")
    s.add_argument("--db", help="semantic database restricting the landmarks used for grounding")
    s.add_argument("--sample", type=int, help="ground only this many samples")
    s.set_defaults(func=cmd_gen_dataset)

    s = sub.add_parser("split", parents=[common], help="assign samples to holdout folds")
    s.add_argument("--data", help="corpus JSONL (default: augmented shipped corpus)")
    s.add_argument("--regime", choices=dataset.REGIMES, required=True)
    s.add_argument("--folds", type=int, default=5)
    s.add_argument("--out", help="output JSON (default: OUT_DIR/split_REGIME.json)")
    s.set_defaults(func=cmd_split)

    s = sub.add_parser("stats", parents=[common], help="corpus statistics")
    s.add_argument("--data", help="corpus JSONL (default: augmented shipped corpus)")
    s.set_defaults(func=cmd_stats)

    s = sub.add_parser("ground", parents=[common], help="ground commands to formulas over landmark keys")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--utterance")
    src.add_argument("--commands", help="JSONL with utterance (and optional db) per line")
    s.add_argument("--db", help="semantic database JSON, or a shipped name (env1, env2, city)")
    s.add_argument("--mock", help="recorded backend fixture; no network I/O")
    s.add_argument("--unconstrained", action="store_true", help="parse translations without the decoding mask")
    s.add_argument("--out", help="write result JSONL here instead of stdout")
    s.set_defaults(func=cmd_ground)

    s = sub.add_parser("decode", parents=[common], help="type-constrained decoding")
    s.add_argument("--props", nargs="+", default=["a", "b", "c", "d", "f"])
    s.add_argument("--max-height", type=int, default=8)
    s.add_argument("--max-tokens", type=int, default=80)
    s.add_argument("--fixture", help="file of recorded token streams, one per line, replayed through the mask")
    s.add_argument("--count", type=int, default=1, help="uniform random decodes when no fixture is given")
    s.set_defaults(func=cmd_decode)

    s = sub.add_parser("plan", parents=[common], help="plan on a map, or report UNSAT")
    s.add_argument("--map", required=True, help="map JSON, or a shipped name (env1, env2)")
    s.add_argument("--ltl", required=True)
    s.add_argument("--infix", action="store_true")
    s.add_argument("--json", action="store_true", help="print the plan as JSON")
    s.set_defaults(func=cmd_plan)

    s = sub.add_parser("eval", parents=[common], help="score predictions against gold")
    s.add_argument("--gold", required=True, help="gold corpus JSONL")
    s.add_argument("--pred", required=True, help="JSONL with a prediction field per line")
    s.add_argument("--mode", choices=evaluate.MODES, default="semantic_equivalence")
    s.add_argument("--grounding-gold", help="JSONL with gold res / re_to_key")
    s.add_argument("--grounding-pred", help="JSONL with predicted res / re_to_key")
    s.add_argument("--out", help="report directory (default: OUT_DIR)")
    s.set_defaults(func=cmd_eval)
    return p


DOMAIN_ERRORS = (
    LTLSyntaxError,
    grounding.GroundingError,
    planner.PlannerError,
    dataset.DatasetError,
    patterns.ArityMismatch,
    automaton.FormulaTooLarge,
    DecodeError,
    FileNotFoundError,
    json.JSONDecodeError,
    KeyError,
    ValueError,
)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    _setup_logging(-1 if args.quiet else args.verbose)
    cfg = RunConfig.from_args(args)
    try:
        return args.func(args, cfg)
    except DOMAIN_ERRORS as exc:
        stage = getattr(exc, "stage", None) or cfg.command
        log.error(str(exc), extra={"stage": stage, "fields": {"error": type(exc).__name__}})
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
