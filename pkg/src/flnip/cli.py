"""Command-line entry point: ``flnip {index,train,query,evaluate,synth,bench}``.

Machine-readable results go to stdout; the effective configuration and all
diagnostics go to stderr. Exit codes: 0 success, 2 bad input, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from flnip import datasets, evolver, retrieval
from flnip.errors import FlnipError
from flnip.gaussian import ScaleBank
from flnip.metrics import MetricId
from flnip.patterns import BINS, FeatureRecord, extract_feature, format_value, histogram, pattern_map
from flnip.pixelgrid import decode_pgm

log = logging.getLogger("flnip")

EXIT_INPUT = 2
EXIT_IO = 3


def _int_list(text: str) -> list[int]:
    try:
        values = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values or any(v < 1 for v in values):
        raise argparse.ArgumentTypeError("n-list entries must be positive integers")
    return values


def _bank(text: str) -> ScaleBank:
    try:
        return ScaleBank.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _add_weight_choice(p: argparse.ArgumentParser):
    group = p.add_mutually_exclusive_group()
    group.add_argument("--weights", type=Path, help="FLNIPW weights file")
    group.add_argument("--uniform", action="store_true", help="weight every block 1 (default)")
    group.add_argument("--raw-only", action="store_true", help="use only the raw-image block")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flnip", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("index", help="extract features for an image tree")
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--labeling", choices=datasets.LABELINGS, default="folder")
    p.add_argument("--tile", type=int, default=None)
    p.add_argument("--sigmas", type=_bank, default=ScaleBank())
    p.add_argument("--output", type=Path, required=True)
    p.add_argument("--threads", type=int, default=1)

    p = sub.add_parser("train", help="learn fusion weights with the genetic algorithm")
    p.add_argument("--db", type=Path, required=True)
    p.add_argument("--pop", type=int, default=20)
    p.add_argument("--gens", type=int, default=50)
    p.add_argument("--mutation", type=float, default=0.01)
    p.add_argument("--crossover", type=float, default=0.9)
    p.add_argument("--elite", type=int, default=1)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--exclude-self", action="store_true")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--output", type=Path, required=True)

    p = sub.add_parser("query", help="rank the database against one image")
    p.add_argument("--db", type=Path, required=True)
    p.add_argument("--image", type=Path, required=True)
    _add_weight_choice(p)
    p.add_argument("--metric", default="d1", choices=[m.value for m in MetricId])
    p.add_argument("--top-k", type=int, default=10)

    p = sub.add_parser("evaluate", help="precision/recall/F-score over all queries")
    p.add_argument("--db", type=Path, required=True)
    _add_weight_choice(p)
    p.add_argument("--n-list", type=_int_list, required=True)
    p.add_argument("--metric", default="d1", choices=[m.value for m in MetricId])
    p.add_argument("--exclude-self", action="store_true")
    p.add_argument("--threads", type=int, default=1)

    p = sub.add_parser("synth", help="write a synthetic grating corpus")
    p.add_argument("--classes", type=int, default=10)
    p.add_argument("--samples", type=int, default=20)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--noise", type=float, default=20.0)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--output", type=Path, required=True)

    p = sub.add_parser("bench", help="feature extraction and retrieval timings")
    p.add_argument("--input", type=Path, help="image tree; a synthetic corpus is used if omitted")
    p.add_argument("--labeling", choices=datasets.LABELINGS, default="folder")
    p.add_argument("--sigmas", type=_bank, default=ScaleBank())
    p.add_argument("--classes", type=int, default=10)
    p.add_argument("--samples", type=int, default=20)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--seed", type=int, default=42)
    return parser


def _effective_config(args) -> dict:
    out = {}
    for key, value in sorted(vars(args).items()):
        if isinstance(value, ScaleBank):
            value = list(value.sigmas)
        elif isinstance(value, Path):
            value = str(value)
        out[key] = value
    return out


def _load_db(path: Path) -> retrieval.FeatureDatabase:
    return retrieval.load_db(path.read_bytes())


def _weights(args, n_blocks: int) -> np.ndarray:
    if args.weights is not None:
        w = evolver.parse_weights(args.weights.read_text())
        if len(w) != n_blocks:
            raise FlnipError(f"weights file holds {len(w)} weights, database has {n_blocks} blocks")
        return w
    if args.raw_only:
        return np.eye(n_blocks)[0]
    return np.ones(n_blocks)


def cmd_index(args, out) -> None:
    items = datasets.load_corpus(datasets.CorpusSpec(args.input, args.labeling, args.tile))
    start = time.perf_counter()
    db = retrieval.build_index(items, args.sigmas, threads=args.threads)
    elapsed = time.perf_counter() - start
    args.output.write_bytes(retrieval.save_db(db))
    out.write(f"records\t{len(db)}\n")
    out.write(f"feature_length\t{db.feature_len}\n")
    out.write(f"extraction_time_per_image\t{format_value(elapsed / len(db))}\n")


def cmd_train(args, out) -> None:
    db = _load_db(args.db)
    config = evolver.GAConfig(
        population_size=args.pop,
        generations=args.gens,
        mutation_rate=args.mutation,
        crossover_rate=args.crossover,
        elite_count=args.elite,
        rng_seed=args.seed,
        exclude_self=args.exclude_self,
        threads=args.threads,
    )
    tensor = evolver.precompute_tensor(db)
    best, history = evolver.evolve(tensor, db.labels, config)
    args.output.write_text(evolver.format_weights(best))
    out.write("generation\tbest_fitness\n")
    for gen, fit in enumerate(history):
        out.write(f"{gen}\t{format_value(fit)}\n")


def cmd_query(args, out) -> None:
    db = _load_db(args.db)
    image = decode_pgm(args.image.read_bytes())
    record = extract_feature(image, ScaleBank(db.sigmas), args.image.name, "")
    start = time.perf_counter()
    result = retrieval.query(db, record, _weights(args, db.n_blocks), args.top_k, args.metric)
    log.info("retrieval time %.6f s", time.perf_counter() - start)
    for rank, hit in enumerate(result.ranked, start=1):
        out.write(f"{rank}\t{hit.id}\t{hit.category}\t{format_value(hit.distance)}\n")


def cmd_evaluate(args, out) -> None:
    db = _load_db(args.db)
    report = retrieval.evaluate(
        db,
        _weights(args, db.n_blocks),
        args.n_list,
        metric=args.metric,
        exclude_self=args.exclude_self,
        threads=args.threads,
    )
    out.write(report.to_tsv())


def cmd_synth(args, out) -> None:
    spec = datasets.SynthSpec(args.classes, args.samples, args.size, args.noise, args.seed)
    paths = datasets.write_corpus(datasets.generate_synthetic(spec), args.output)
    out.write(f"images\t{len(paths)}\n")


def _time_per_item(fn, items) -> float:
    start = time.perf_counter()
    for item in items:
        fn(item)
    return (time.perf_counter() - start) / len(items)


def _raw_feature(image) -> np.ndarray:
    return histogram(pattern_map(image, "flnip")).bins


def cmd_bench(args, out) -> None:
    """Per-image extraction and per-query retrieval times, single-scale vs. multi-scale."""
    if args.input is not None:
        items = datasets.load_corpus(datasets.CorpusSpec(args.input, args.labeling))
    else:
        spec = datasets.SynthSpec(args.classes, args.samples, args.size, 20.0, args.seed)
        items = datasets.generate_synthetic(spec)
    images = [img for _, _, img in items]
    bank = args.sigmas

    full_db = retrieval.build_index(items, bank)
    raw_db = retrieval.FeatureDatabase(
        [FeatureRecord(r.id, r.category, r.feature[:BINS]) for r in full_db.records], ()
    )
    rows = [
        ("raw", raw_db, _raw_feature),
        ("multiscale", full_db, lambda img: extract_feature(img, bank).feature),
    ]
    out.write("config\tfeature_length\textraction_time\tretrieval_time\n")
    for name, db, extract in rows:
        extract_time = _time_per_item(extract, images)
        w = np.ones(db.n_blocks)
        retrieval_time = _time_per_item(
            lambda q: retrieval.query(db, q, w, len(db)), [r.feature for r in db.records]
        )
        out.write(f"{name}\t{db.feature_len}\t{format_value(extract_time)}\t{format_value(retrieval_time)}\n")


COMMANDS = {
    "index": cmd_index,
    "train": cmd_train,
    "query": cmd_query,
    "evaluate": cmd_evaluate,
    "synth": cmd_synth,
    "bench": cmd_bench,
}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    print(f"config: {json.dumps(_effective_config(args), sort_keys=True)}", file=sys.stderr)
    try:
        COMMANDS[args.command](args, out)
    except (FlnipError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return 0


if __name__ == "__main__":
    sys.exit(main())
