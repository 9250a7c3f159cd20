"""Command-line entry point.

Subcommands: run, aggregate, serve, brute-force, optimum. Exit codes:
0 success, 2 configuration error, 3 runtime failure, 4 protocol error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import (
    ConfigError,
    ConnectionClosed,
    ProtocolError,
    RemoteError,
    SeqbenchError,
    UnknownProblem,
    UnknownSolver,
)
from .harness import (
    aggregate,
    brute_force,
    collect_records,
    emit_table,
    optimum_report,
    parse_config,
    run_experiment,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_PROTOCOL = 4


def _load_config(path: str):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def _cmd_run(args) -> int:
    config = _load_config(args.config)
    if args.remote:
        config.remote = args.remote
    records = run_experiment(config, out_root=args.out)
    failed = [r for r in records if r.error]
    for record in records:
        if record.error:
            print(f"seed {record.seed}: FAILED ({record.error})")
        else:
            print(
                f"seed {record.seed}: best {record.best_score:.3f} "
                f"in {record.total_calls} calls ({record.duration_ms} ms) "
                f"-> {record.run_dir}"
            )
    return EXIT_RUNTIME if failed else EXIT_OK


def _cmd_aggregate(args) -> int:
    records = collect_records(args.dirs)
    if not records:
        print("no summary.json files found", file=sys.stderr)
        return EXIT_RUNTIME
    table = emit_table(aggregate(records), format=args.format)
    if args.out:
        Path(args.out).write_text(table)
    else:
        print(table, end="")
    return EXIT_OK


def _cmd_serve(args) -> int:
    from .ehrlich import build_oracle
    from .isolation import BlackBoxServer

    config = _load_config(args.config)
    oracle = build_oracle(config.problem_config(), args.seed)
    server = BlackBoxServer(
        oracle, host=args.host, port=args.port,
        forward_observations=args.forward_logs,
        allow_nonlocal=args.allow_nonlocal,
    )
    print(f"serving {oracle.name} (seed {args.seed}) on {server.host}:{server.port}",
          flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.stop()
    return EXIT_OK


def _cmd_brute_force(args) -> int:
    config = _load_config(args.config)
    report = brute_force(config.problem_config(), args.seed, bound=args.bound)
    print(f"sequences enumerated: {report.n_enumerated}")
    print(f"max score: {report.max_score}")
    print(f"optima: {report.argmax_count}")
    print("histogram (20 bins over [0,1]):")
    for lo, hi, count in zip(report.bin_edges[:-1], report.bin_edges[1:],
                             report.histogram):
        print(f"  [{lo:0.2f},{hi:0.2f}): {count}")
    return EXIT_OK


def _cmd_optimum(args) -> int:
    config = _load_config(args.config)
    rendered, score = optimum_report(config.problem_config(), args.seed)
    print(f"optimum: {rendered}")
    print(f"score: {score}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="seqbench")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run seeded replications of one experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None, help="output root directory")
    p.add_argument("--remote", default=None, metavar="HOST:PORT")
    p.set_defaults(fn=_cmd_run)

    p = sub.add_parser("aggregate", help="aggregate run directories into a table")
    p.add_argument("dirs", nargs="+")
    p.add_argument("--format", choices=("csv", "markdown"), default="markdown")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_aggregate)

    p = sub.add_parser("serve", help="serve a black box over a local socket")
    p.add_argument("--config", required=True)
    p.add_argument("--port", type=int, default=0)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--forward-logs", action="store_true")
    p.add_argument("--allow-nonlocal", action="store_true")
    p.set_defaults(fn=_cmd_serve)

    p = sub.add_parser("brute-force", help="exhaustively enumerate a small instance")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bound", type=int, default=10**6)
    p.set_defaults(fn=_cmd_brute_force)

    p = sub.add_parser("optimum", help="print the constructed optimum and its score")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_optimum)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, UnknownProblem, UnknownSolver) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ProtocolError, ConnectionClosed, RemoteError) as exc:
        print(f"protocol error: {exc}", file=sys.stderr)
        return EXIT_PROTOCOL
    except SeqbenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
