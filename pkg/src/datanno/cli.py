"""Command-line entry points.

Three subcommands: ``synth`` writes a synthetic labeled dataset,
``simulate`` replays gold labels under a selection strategy and reports
retrieval BLEU per budget as CSV, and ``serve`` runs the annotation
service over a session archive.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

from .service import ServiceConfig, serve
from .simulate import (
    SIM_RETRAIN_INTERVAL,
    STRATEGIES,
    SimulationConfig,
    make_synthetic_dataset,
    run_simulation,
)


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected comma-separated integers, got {text!r}"
        ) from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="datanno",
        description="Active-learning annotation for structured data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="generate a synthetic labeled dataset")
    synth.add_argument("--n", type=int, default=2000, help="number of records")
    synth.add_argument("--seed", type=int, default=7)
    synth.add_argument("--out", type=Path, help="output file (stdout if omitted)")

    sim = sub.add_parser(
        "simulate",
        help="replay gold labels under a strategy and score retrieval BLEU",
    )
    sim.add_argument("--data", type=Path, required=True, help="labeled corpus file")
    sim.add_argument("--strategy", choices=STRATEGIES, default="sampler")
    sim.add_argument(
        "--budgets", type=_int_list, default=(200, 500, 1000, 2000),
        help="comma-separated ascending label budgets",
    )
    sim.add_argument("--batch-size", type=int, default=20)
    sim.add_argument("--k", type=int, default=5, help="sub-clusters per signature")
    sim.add_argument("--seeds", type=_int_list, default=(1, 2, 3, 4, 5))
    sim.add_argument(
        "--test-data", type=Path,
        help="separate labeled test corpus (default: hold out --test-fraction)",
    )
    sim.add_argument("--test-fraction", type=float, default=0.2)
    sim.add_argument("--retrain-interval", type=int, default=SIM_RETRAIN_INTERVAL)
    sim.add_argument("--out", type=Path, help="CSV output file (stdout if omitted)")

    srv = sub.add_parser("serve", help="run the annotation HTTP service")
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--port", type=int, default=8000)
    srv.add_argument("--session", type=Path, default=Path("session.zip"),
                     help="session archive path (created on first upload)")
    srv.add_argument("--cors", action="append", default=[],
                     help="allowed CORS origin (repeatable)")
    srv.add_argument("--max-request-bytes", type=int, default=10 * 1024 * 1024)

    return parser


def _emit(text: str, out: Optional[Path]) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text, encoding="utf-8")


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "synth":
            _emit(make_synthetic_dataset(args.n, seed=args.seed), args.out)
        elif args.command == "simulate":
            cfg = SimulationConfig(
                data=args.data,
                strategy=args.strategy,
                budgets=args.budgets,
                batch_size=args.batch_size,
                k=args.k,
                seeds=args.seeds,
                test_data=args.test_data,
                test_fraction=args.test_fraction,
                retrain_interval=args.retrain_interval,
            )
            result = run_simulation(cfg)
            _emit(result.to_csv(), args.out)
            for budget in cfg.budgets:
                mean = result.seed_mean(args.strategy, budget)
                print(
                    f"{args.strategy}: budget={budget} seed-mean bleu={mean:.4f}",
                    file=sys.stderr,
                )
        else:
            serve(
                ServiceConfig(
                    host=args.host,
                    port=args.port,
                    session_path=args.session,
                    cors_origins=tuple(args.cors),
                    max_request_bytes=args.max_request_bytes,
                )
            )
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
