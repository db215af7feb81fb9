"""Command-line entry point: ``persona-gauge <verb> ...``.

Exit codes: 0 success, 1 task failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path
from urllib.parse import urlparse

from . import __version__
from .adaptability import build_catalog, read_checkins
from .core import RunConfig
from .gateway import API_KEY_ENV, ENDPOINT_ENV, RemoteChatClient, ResponseCache
from .reporting import (
    emit_report,
    load_run,
    summarize_bandit_raw,
    summarize_safety_raw,
    table_to_csv,
)
from .runner import POLICY_TASKS, TASKS, execute_run, load_config
from .selftest import run_selftest

__all__ = ["UsageError", "build_parser", "main"]


class UsageError(Exception):
    pass


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="persona-gauge",
                                description="Decision-making evaluation of role-playing agents.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="verb", metavar="<verb>")
    sub.required = True

    c = sub.add_parser("catalog-build", help="build a POI category catalog from a check-in dump")
    c.add_argument("checkins", type=Path, help="tab-separated check-in file")
    c.add_argument("--top-k", type=_positive, default=30)
    c.add_argument("--output", type=Path, help="write categories here, one per line (default: stdout)")

    r = sub.add_parser("run", help="collect raw data for one task or all tasks")
    r.add_argument("task", choices=TASKS + ("all",))
    r.add_argument("--config", type=Path)
    r.add_argument("--seed", type=_u64)
    r.add_argument("--personas", help="comma-separated MBTI codes (default: all 16)")
    r.add_argument("--parallelism", type=_positive)
    r.add_argument("--out", type=Path, default=Path("runs"), help="runs directory")
    r.add_argument("--backend", choices=("scripted", "remote-chat"))
    r.add_argument("--policy", choices=sorted(POLICY_TASKS), help="scripted policy for the task(s)")
    r.add_argument("--endpoint", help=f"chat-completions URL (default: ${ENDPOINT_ENV})")
    r.add_argument("--model", help="remote model id")
    r.add_argument("--live", action="store_true", help="allow requests to a non-local endpoint")

    for verb, helptext in (("fit-ee", "fit exploration/exploitation coefficients of a run"),
                           ("score-sd3", "score the SD-3 responses of a run"),
                           ("report", "regenerate summaries and charts of a run")):
        sp = sub.add_parser(verb, help=helptext)
        sp.add_argument("run_dir", type=Path)

    sub.add_parser("selftest", help="offline oracle checks")
    return p


def _is_local(url: str) -> bool:
    return urlparse(url).hostname in ("127.0.0.1", "localhost", "::1")


def _config_from(args) -> RunConfig:
    try:
        return _merge_config(args)
    except (ValueError, OSError) as exc:
        raise UsageError(f"bad configuration: {exc}") from exc


def _merge_config(args) -> RunConfig:
    config = load_config(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.personas:
        overrides["personas"] = [s.strip() for s in args.personas.split(",") if s.strip()]
    if args.parallelism is not None:
        overrides["parallelism"] = args.parallelism
    if args.backend is not None:
        overrides["backend"] = args.backend
    if args.model is not None:
        overrides["model_id"] = args.model
    if overrides:
        config = RunConfig.from_dict({**config.to_dict(), **overrides})
    return config


def _client_for(args, config: RunConfig) -> RemoteChatClient | None:
    if config.backend != "remote-chat":
        if args.endpoint or args.live:
            raise UsageError("--endpoint/--live apply to the remote-chat backend only")
        return None
    endpoint = args.endpoint or os.environ.get(ENDPOINT_ENV)
    if not args.live:
        if not endpoint or not _is_local(endpoint):
            raise UsageError("remote-chat needs --live, or a local mock endpoint via --endpoint")
    api_key = os.environ.get(API_KEY_ENV)
    if not api_key and endpoint and _is_local(endpoint):
        api_key = "offline"
    return RemoteChatClient(config.model_id, config.temperature, endpoint, api_key,
                            cache=ResponseCache(args.out / "cache"))


def cmd_run(args) -> int:
    config = _config_from(args)
    tasks = list(TASKS) if args.task == "all" else [args.task]
    if args.policy and config.backend != "scripted":
        raise UsageError("--policy applies to the scripted backend only")
    if args.policy and not POLICY_TASKS[args.policy] & set(tasks):
        raise UsageError(f"policy {args.policy!r} cannot answer any of: {', '.join(tasks)}")
    client = _client_for(args, config)
    try:
        path = execute_run(config, tasks, args.out, client, args.policy)
    finally:
        if client is not None:
            client.close()
    print(path)
    return 0


def _write_tables(run_dir: Path, tables) -> None:
    for name, table in sorted(tables.items()):
        (run_dir / "summary").mkdir(parents=True, exist_ok=True)
        (run_dir / "summary" / f"{name}.csv").write_text(table_to_csv(table), encoding="utf-8")
        sys.stdout.write(f"# {name}\n{table_to_csv(table)}")


def cmd_fit_ee(args) -> int:
    record = load_run(args.run_dir)
    if not any(k.startswith("bandit_") for k in record.raw):
        raise ValueError(f"{args.run_dir} has no bandit data")
    _write_tables(args.run_dir, summarize_bandit_raw(record.raw))
    return 0


def cmd_score_sd3(args) -> int:
    record = load_run(args.run_dir)
    if "safety" not in record.raw:
        raise ValueError(f"{args.run_dir} has no safety data")
    _write_tables(args.run_dir, summarize_safety_raw(record.raw["safety"]))
    return 0


def cmd_report(args) -> int:
    bundle = emit_report(args.run_dir)
    for f in bundle.files:
        print(bundle.directory / f)
    return 0


def cmd_catalog_build(args) -> int:
    catalog = build_catalog(read_checkins(args.checkins), args.top_k)
    text = "".join(c + "\n" for c in catalog.categories)
    if args.output:
        args.output.write_text(text, encoding="utf-8")
        print(f"{len(catalog)} categories -> {args.output}", file=sys.stderr)
    else:
        sys.stdout.write(text)
    return 0


def cmd_selftest(args) -> int:
    results = run_selftest()
    failed = [r.name for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return 1 if failed else 0


COMMANDS = {
    "catalog-build": cmd_catalog_build,
    "run": cmd_run,
    "fit-ee": cmd_fit_ee,
    "score-sd3": cmd_score_sd3,
    "report": cmd_report,
    "selftest": cmd_selftest,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.verb](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"persona-gauge: usage error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"persona-gauge: {args.verb} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
