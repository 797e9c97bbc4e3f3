"""Command-line entry point: ``claysculpt <verb> [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import BackendTransportError, InvalidArgument, PlanningFailure, UnknownShape
from .pipeline import EXIT_CONFIG, EXIT_OK, EXIT_PLANNING, EXIT_TRANSPORT

logger = logging.getLogger("claysculpt")


def _add_run_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML run configuration")
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir")
    p.add_argument("--planner", dest="planner_backend", choices=("template", "llm"))
    p.add_argument("--subgoal", dest="subgoal_backend", choices=("heuristic", "llm"))
    p.add_argument("--action", dest="action_backend", choices=("geometric", "dm", "random"))
    p.add_argument("--checkpoint", help="action-model checkpoint for --action dm")
    p.add_argument("--max-rounds", type=int)
    p.add_argument("--offline", action="store_true", default=None, help="forbid network backends")
    p.add_argument("--no-snapshots", dest="snapshots", action="store_false", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="claysculpt", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("plan", help="plan chunk placements for a prompt")
    p.add_argument("--prompt", required=True)
    p.add_argument("--backend", choices=("template", "llm"), default="template")
    p.add_argument("--config", help="YAML run configuration (llm settings)")
    p.add_argument("--max-iters", type=int, default=50)
    p.add_argument("--out", default="plan.json")
    p.add_argument("--audit", help="JSON-lines audit log path")
    p.add_argument("--offline", action="store_true")

    p = sub.add_parser("run", help="run one sculpting episode")
    p.add_argument("--prompt")
    _add_run_options(p)

    p = sub.add_parser("suite", help="run several prompts with repeats")
    p.add_argument("--prompts", default="X,line,flower,column,pyramid,airplane,chair,pottery")
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--same-seed", action="store_true")
    _add_run_options(p)

    p = sub.add_parser("make-dataset", help="simulate grasp tuples and synthetic pairs")
    p.add_argument("--out", required=True)
    p.add_argument("--tuples", type=int, default=300)
    p.add_argument("--pairs", type=int, default=4000)
    p.add_argument("--seed-shapes", type=int, default=24)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("train-encoder", help="pre-train the encoder on synthetic pairs")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("train-action", help="train the action head")
    p.add_argument("--dataset", required=True)
    p.add_argument("--encoder", help="pre-trained encoder checkpoint (not used for end-to-end)")
    p.add_argument("--mode", choices=("frozen", "unfrozen", "end-to-end"), default="frozen")
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("evaluate", help="compare baselines and training regimes")
    p.add_argument("--dataset", required=True)
    p.add_argument("--encoder", required=True)
    p.add_argument("--out", required=True, help="output directory for table.json / table.csv")
    p.add_argument("--split", default="200,50,50", help="train,val,test tuple counts")
    p.add_argument("--head-epochs", type=int, default=400)
    p.add_argument("--finetune-epochs", type=int, default=20)
    p.add_argument("--rows", help="comma-separated subset of methods")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("metrics", help="distance report between two PLY clouds")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--points", type=int, help="farthest-point sample both clouds to this size")
    p.add_argument("--out")
    return parser


def _run_config(args, **extra):
    from .config import load_config

    overrides = {
        k: getattr(args, k, None)
        for k in (
            "prompt", "seed", "planner_backend", "subgoal_backend", "action_backend",
            "checkpoint", "max_rounds", "offline", "snapshots",
        )
    }
    if getattr(args, "out_dir", None):
        overrides["out_dir"] = args.out_dir
    overrides.update(extra)
    return load_config(args.config, **overrides)


def cmd_plan(args) -> int:
    from .config import load_config
    from .planner import make_suite, plan

    cfg = load_config(args.config, prompt=args.prompt, planner_backend=args.backend, offline=args.offline or None)
    if cfg.planner_backend == "llm":
        suite = make_suite(args.prompt, "llm", cfg.llm_config)
    else:
        suite = make_suite(args.prompt, "template")
    result = plan(args.prompt, suite, max_iters=args.max_iters, audit_path=args.audit)
    result.save(args.out)
    print(f"{len(result)} placements -> {args.out}")
    return EXIT_OK


def cmd_run(args) -> int:
    from .pipeline import run_episode

    report = run_episode(_run_config(args))
    if report.status != "ok":
        print(json.dumps(report.error, sort_keys=True), file=sys.stderr)
    else:
        print(f"initial chamfer {report.initial_chamfer:.4e} -> final {report.final_chamfer:.4e}")
    return report.exit_code


def cmd_suite(args) -> int:
    from .pipeline import run_suite

    cfg = _run_config(args, prompt=args.prompts.split(",")[0])
    prompts = [p.strip() for p in args.prompts.split(",") if p.strip()]
    reports, rows = run_suite(prompts, args.repeats, cfg, same_seed=args.same_seed)
    for row in rows:
        print(f"{row['prompt']:<10} cd={row['cd_mean']} ± {row['cd_std']}  failed={row['failed']}")
    return max((r.exit_code for r in reports), default=EXIT_OK)


def cmd_make_dataset(args) -> int:
    from .model.data import generate_synthetic_pairs, save_dataset, seed_clouds, simulate_tuples
    from .rng import child_seed

    tuples = simulate_tuples(args.tuples, seed=child_seed(args.seed, "tuples"))
    seeds = seed_clouds(args.seed_shapes, seed=child_seed(args.seed, "seed-shapes"))
    pairs = generate_synthetic_pairs(seeds, args.pairs, seed=child_seed(args.seed, "pairs"))
    index = save_dataset(args.out, tuples, pairs)
    print(f"{len(tuples)} tuples, {len(pairs)} pairs -> {index}")
    return EXIT_OK


def cmd_train_encoder(args) -> int:
    from .model.checkpoint import save_checkpoint
    from .model.data import load_dataset
    from .model.train import Hyper, pretrain_encoder

    _, pairs = load_dataset(args.dataset)
    result = pretrain_encoder(pairs, Hyper(epochs=args.epochs, seed=args.seed))
    meta = {"history": result.history, "target_scale": result.target_scale,
            "holdout_before": result.holdout_before, "holdout_after": result.holdout_after}
    save_checkpoint(args.out, "encoder", result.encoder, meta)
    print(f"held-out loss {result.holdout_before:.4f} -> {result.holdout_after:.4f}; saved {args.out}")
    return EXIT_OK


def cmd_train_action(args) -> int:
    from .model.checkpoint import load_checkpoint, save_checkpoint
    from .model.data import load_dataset
    from .model.train import Hyper, train_action_head

    tuples, _ = load_dataset(args.dataset)
    encoder = None
    if args.mode != "end-to-end":
        if not args.encoder:
            raise InvalidArgument(f"--mode {args.mode} needs --encoder")
        encoder, _ = load_checkpoint(args.encoder)
    trained = train_action_head(tuples, encoder, args.mode, Hyper(epochs=args.epochs, seed=args.seed))
    save_checkpoint(args.out, "action-model", trained.model, {"mode": args.mode, "history": trained.history})
    print(f"final train MSE {trained.history[-1]['train_mse']:.4f}; saved {args.out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    from .evaluation import ROWS, EvalSetup, table_one
    from .model.checkpoint import load_checkpoint
    from .model.data import load_dataset, split

    try:
        sizes = [int(v) for v in args.split.split(",")]
    except ValueError as exc:
        raise InvalidArgument(f"--split must be three integers: {exc}") from exc
    if len(sizes) != 3:
        raise InvalidArgument("--split must be three integers")
    tuples, _ = load_dataset(args.dataset)
    if sum(sizes) > len(tuples):
        raise InvalidArgument(f"dataset has {len(tuples)} tuples, split needs {sum(sizes)}")
    train, val, test = split(tuples, sizes, seed=args.seed)
    encoder, _ = load_checkpoint(args.encoder)
    rows = tuple(r.strip() for r in args.rows.split(",")) if args.rows else ROWS
    unknown = set(rows) - set(ROWS)
    if unknown:
        raise InvalidArgument(f"unknown methods {sorted(unknown)}; choose from {ROWS}")
    setup = EvalSetup(
        n_train=sizes[0], n_val=sizes[1], n_test=sizes[2],
        head_epochs=args.head_epochs, finetune_epochs=args.finetune_epochs, seed=args.seed,
    )
    table = table_one(train, val, test, encoder, setup, rows=rows)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "table.json").write_text(table.to_json())
    table.write_csv(out / "table.csv")
    print(table.format())
    return EXIT_OK


def cmd_metrics(args) -> int:
    from .metrics import distance_report
    from .pointcloud import farthest_point_indices, read_ply

    a, b = read_ply(args.a), read_ply(args.b)
    # EMD is a bijection, so unequal clouds are reduced to a common size
    n = args.points or min(len(a), len(b))
    if n > min(len(a), len(b)):
        raise InvalidArgument(f"--points {n} exceeds the smaller cloud ({min(len(a), len(b))})")
    if len(a) != n:
        a = a[farthest_point_indices(a, n)]
    if len(b) != n:
        b = b[farthest_point_indices(b, n)]
    report = distance_report(a, b).to_dict()
    text = json.dumps(report, sort_keys=True, indent=1)
    if args.out:
        Path(args.out).write_text(text)
    print(text)
    return EXIT_OK


COMMANDS = {
    "plan": cmd_plan,
    "run": cmd_run,
    "suite": cmd_suite,
    "make-dataset": cmd_make_dataset,
    "train-encoder": cmd_train_encoder,
    "train-action": cmd_train_action,
    "evaluate": cmd_evaluate,
    "metrics": cmd_metrics,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.verb](args)
    except (UnknownShape, PlanningFailure) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return EXIT_PLANNING
    except BackendTransportError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return EXIT_TRANSPORT
    except (InvalidArgument, FileNotFoundError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
