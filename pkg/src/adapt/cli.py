"""Command-line surface: plan, simulate, embed, compare, score, bridge.

Failures print a structured JSON error to stderr; exit code 2 for validation
and parse problems, 3 when an LLM backend is unreachable.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from .attention import (
    aggregate_blocks,
    aggregate_heads,
    kth_largest,
    token_scores,
)
from .concepts import plan_from_dict
from .embedding import (
    LsmParams,
    PemParams,
    gram_schmidt_combine,
    lsm_combine,
    lsm_orthogonalize,
    pem_combine,
    pem_gate,
    project_out,
)
from .errors import BackendUnavailable, EngineError, FormatError
from .llm import backend_from_spec, map_concepts
from .mock import mock_config_from_dict, run_session
from .scheduler import SessionConfig
from .tensorio import load_tensor, load_vector, save_vector
from .trace import canon_dumps, compare_traces, read_trace, scores_csv, write_trace

EXIT_VALIDATION = 2
EXIT_BACKEND = 3


def _emit(doc, out_path=None):
    text = canon_dumps(doc) + "\n"
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _read_json(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as e:
        raise FormatError(f"cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise FormatError(f"{path} is not valid JSON: {e}") from e


def _csv_ints(text):
    return [int(v) for v in text.split(",") if v.strip() != ""]


# -- subcommands -------------------------------------------------------------


def cmd_plan(args) -> int:
    backend = backend_from_spec(
        args.backend, model=args.model, cache_dir=args.cache_dir
    )
    plan = map_concepts(args.prompt, backend)
    _emit(plan.to_dict(), args.out)
    return 0


def cmd_simulate(args) -> int:
    plan = plan_from_dict(_read_json(args.concept_map))
    n_tokens = len(plan.target_text.split())
    mock_doc = dict(_read_json(args.mock_config))
    mock_doc["T"] = args.steps
    mock_doc["seed"] = args.seed
    cfg = mock_config_from_dict(mock_doc, n_tokens=n_tokens)
    session_config = SessionConfig(
        total_steps=args.steps,
        tau_s=args.tau_s,
        scheduler=args.scheduler,
        transition_order=args.transition_order,
        r2f_levels=tuple(_csv_ints(args.r2f_levels)) if args.r2f_levels else (),
        score_mode=args.score_mode,
        k_scope=args.k_scope,
    )
    pem_params = PemParams(
        lambda_pool=args.lambda_pool, s=args.s, p=args.p, epsilon=args.epsilon
    )
    lsm_params = LsmParams(lambda_attr=args.lambda_attr)
    trace = run_session(cfg, plan, session_config, pem_params, lsm_params)
    write_trace(args.out, trace)
    return 0


def cmd_embed(args) -> int:
    if args.operation == "project":
        result = project_out(load_vector(args.vec_a), load_vector(args.vec_b))
    elif args.operation == "pem":
        params = PemParams(
            lambda_pool=args.lambda_pool, s=args.s, p=args.p, epsilon=args.epsilon
        )
        c_f = load_vector(args.frequent)
        c_r = load_vector(args.rare)
        gamma, delta = pem_gate(c_f, c_r, params)
        result = pem_combine(c_f, c_r, params)
        sys.stdout.write(canon_dumps({"gamma": gamma, "delta": delta}) + "\n")
    elif args.operation == "lsm":
        direction = lsm_orthogonalize(
            load_vector(args.attr), load_vector(args.null)
        )
        result = lsm_combine(
            load_vector(args.base), direction, LsmParams(args.lambda_attr)
        )
    else:  # gram-schmidt
        result = gram_schmidt_combine(
            load_vector(args.target), load_vector(args.prog), args.mix
        )
    save_vector(args.out, result)
    return 0


def cmd_compare(args) -> int:
    trace_a = read_trace(args.trace_a)
    trace_b = read_trace(args.trace_b)
    report = compare_traces(trace_a, trace_b, atol=args.atol)
    _emit(report, args.out)
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write(scores_csv({"A": trace_a, "B": trace_b}))
    return 0


def cmd_score(args) -> int:
    blocks = []
    for path in args.block:
        tensor = load_tensor(path)
        if "head" in tensor.axes:
            tensor = aggregate_heads(tensor)
        blocks.append(tensor)
    aggregated = aggregate_blocks(blocks)
    positions = _csv_ints(args.positions)
    labels = (
        args.labels.split(",") if args.labels else [f"tok{p}" for p in positions]
    )
    scores = token_scores(aggregated, positions, labels)
    doc = {
        "values": list(scores.values),
        "labels": list(scores.token_labels),
    }
    if args.k is not None:
        doc["k"] = args.k
        doc["kth_largest"] = kth_largest(scores, args.k)
        if args.tau_s is not None:
            doc["tau_s"] = args.tau_s
            doc["should_transition"] = bool(doc["kth_largest"] < args.tau_s)
    _emit(doc, args.out)
    return 0


def cmd_bridge(args) -> int:
    from .bridge import serve

    serve()
    return 0


# -- parser ------------------------------------------------------------------


def _add_pem_flags(parser):
    parser.add_argument("--lambda-pool", type=float, default=0.3)
    parser.add_argument("--s", type=float, default=2.0)
    parser.add_argument("--p", type=float, default=100.0)
    parser.add_argument("--epsilon", type=float, default=0.93)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adapt",
        description="Deterministic rare-concept prompt-scheduling engine",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="derive a concept map for a prompt")
    p.add_argument("prompt")
    p.add_argument(
        "--backend",
        default="fixture:./fixtures",
        help="fixture:<dir> or http(s):<url>",
    )
    p.add_argument("--model", default="gpt-4o")
    p.add_argument("--cache-dir", default=None, help="record HTTP replies here")
    p.add_argument("--out", default=None, help="concept-map JSON path (default stdout)")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("simulate", help="run a synthetic session to a trace file")
    p.add_argument("--concept-map", required=True)
    p.add_argument("--mock-config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--tau-s", type=float, default=0.025)
    _add_pem_flags(p)
    p.add_argument("--lambda-attr", type=float, default=0.15)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--scheduler", choices=("aps", "r2f", "none"), default="aps")
    p.add_argument("--r2f-levels", default="", help="comma-separated levels 1..5")
    p.add_argument(
        "--transition-order", choices=("index", "saturation"), default="index"
    )
    p.add_argument(
        "--score-mode", choices=("individual", "mean", "cumulative"),
        default="individual",
    )
    p.add_argument("--k-scope", choices=("all", "untransitioned"), default="all")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("embed", help="file-to-file vector operations")
    embed_sub = p.add_subparsers(dest="operation", required=True)

    e = embed_sub.add_parser("project", help="remove b's component from a")
    e.add_argument("--vec-a", required=True)
    e.add_argument("--vec-b", required=True)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_embed)

    e = embed_sub.add_parser("pem", help="pooled-embedding combination")
    e.add_argument("--frequent", required=True)
    e.add_argument("--rare", required=True)
    e.add_argument("--out", required=True)
    _add_pem_flags(e)
    e.set_defaults(func=cmd_embed)

    e = embed_sub.add_parser("lsm", help="attribute guidance combination")
    e.add_argument("--base", required=True)
    e.add_argument("--attr", required=True)
    e.add_argument("--null", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--lambda-attr", type=float, default=0.15)
    e.set_defaults(func=cmd_embed)

    e = embed_sub.add_parser("gram-schmidt", help="single-embedding ablation mix")
    e.add_argument("--target", required=True)
    e.add_argument("--prog", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--mix", type=float, default=0.5, help="interpolation weight")
    e.set_defaults(func=cmd_embed)

    p = sub.add_parser("compare", help="diff two traces and emit plot data")
    p.add_argument("trace_a")
    p.add_argument("trace_b")
    p.add_argument("--atol", type=float, default=1e-6)
    p.add_argument("--csv", default=None, help="write z(t) curves as CSV here")
    p.add_argument("--out", default=None, help="report path (default stdout)")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("score", help="score token positions in tensor files")
    p.add_argument("--block", action="append", required=True, help="tensor manifest")
    p.add_argument("--positions", required=True, help="comma-separated seq positions")
    p.add_argument("--labels", default=None, help="comma-separated token labels")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--tau-s", type=float, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("bridge", help="serve the stdio protocol for a host pipeline")
    p.set_defaults(func=cmd_bridge)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BackendUnavailable as e:
        _print_error(e)
        return EXIT_BACKEND
    except EngineError as e:
        _print_error(e)
        return EXIT_VALIDATION


def _print_error(e: EngineError):
    sys.stderr.write(
        canon_dumps({"error": {"code": e.code, "message": str(e)}}) + "\n"
    )


if __name__ == "__main__":
    sys.exit(main())
