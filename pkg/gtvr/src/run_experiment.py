import logging
import os
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import List, Optional

import numpy as np
import pandas as pd

from gtvr.src.config_parser import cmd_args_parser, load_run_config, parse_scalar, qualify_key
from gtvr.src.engine import MetricsTrace, run, speedup_study, summary_row
from gtvr.src.exceptions import DivergenceError, GTVRError, OracleError
from gtvr.src.experiments import RunConfig
from gtvr.src.plotting import plot_csvs
from gtvr.src.utils import build_logger, format_record_table, frame_to_table
from gtvr.src.verify import results_table, run_suites

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DIVERGED = 2
EXIT_ORACLE = 3

SWEEP_COLUMNS = [
    "value",
    "sigma",
    "final_gap",
    "epochs_to_threshold",
    "diverged",
    "status",
    "trace",
]

logger = logging.getLogger("GTVR")


def exit_code_for(error: BaseException) -> int:
    if isinstance(error, DivergenceError):
        return EXIT_DIVERGED
    if isinstance(error, OracleError):
        return EXIT_ORACLE
    return EXIT_CONFIG


def _setup_logging(out_dir: str, name: str, verbose: bool) -> str:
    log_path = os.path.join(out_dir, "logs", f"{name}.log")
    build_logger(logger_name="GTVR", logger_filename=log_path, verbose=verbose)
    return log_path


def _load(args, jobs: Optional[int] = None, extra_overrides=()) -> RunConfig:
    return load_run_config(
        path=args.config,
        overrides=list(args.overrides) + list(extra_overrides),
        seed=args.seed,
        jobs=jobs,
        out=args.out,
    )


def cmd_run(args) -> int:
    config = _load(args, jobs=args.jobs)
    log_path = _setup_logging(config.output.dir, config.output.name, args.verbose)
    logger.info(
        f"🚀 run {config.algorithm.kind} on {config.graph.topology} (n={config.graph.n}), "
        f"trace {config.trace_path}, log {log_path}"
    )
    trace = run(config, verbose=args.verbose)
    logger.info(f"\n{format_record_table(trace.records)}")
    final = trace.last
    logger.info(
        f"✅ k={final.iter} epoch={final.epoch:.2f} gap={final.gap:.3e} "
        f"consensus={final.consensus_err:.3e}"
    )
    return EXIT_OK


def _slug(value) -> str:
    return re.sub(r"[^A-Za-z0-9.+-]+", "_", str(value))


def _sweep_one(payload):
    """Run one sweep member; failures are reported in the row instead of raised."""
    value, config, threshold = payload
    try:
        trace = run(config)
        row = summary_row(value, trace, threshold)
        row["status"] = "ok"
    except GTVRError as e:
        trace = getattr(e, "trace", None)
        if isinstance(trace, MetricsTrace) and len(trace):
            row = summary_row(value, trace, threshold)
        else:
            row = {
                "value": value,
                "sigma": np.nan,
                "final_gap": np.nan,
                "epochs_to_threshold": None,
            }
        row["diverged"] = isinstance(e, DivergenceError)
        row["status"] = f"error ({exit_code_for(e)}): {e}"
    row["trace"] = config.trace_path
    return row


def cmd_sweep(args) -> int:
    axis = ".".join(qualify_key(args.axis))
    base = _load(args)
    members = []
    # Every member is validated before the first one runs.
    for idx, text in enumerate(args.values):
        value = parse_scalar(text)
        config = _load(
            args,
            extra_overrides=[
                f"{axis}={text}",
                f"output.name={base.output.name}_{idx}_{_slug(value)}",
            ],
        )
        members.append((value, config, args.threshold))
    log_path = _setup_logging(base.output.dir, f"{base.output.name}_sweep", args.verbose)
    summary_path = os.path.join(base.output.dir, f"{base.output.name}_sweep.csv")
    logger.info(
        f"🚀 sweep {axis} over {len(members)} values, summary {summary_path}, log {log_path}"
    )
    workers = max(1, args.jobs or 1)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_one, members))
    else:
        rows = [_sweep_one(member) for member in members]
    summary = pd.DataFrame(rows, columns=SWEEP_COLUMNS)
    summary.to_csv(summary_path, index=False, float_format="%.17g")
    logger.info(f"\n{frame_to_table(summary.drop(columns=['trace']))}")
    return EXIT_OK


def cmd_speedup(args) -> int:
    config = _load(args, jobs=args.jobs)
    log_path = _setup_logging(config.output.dir, f"{config.output.name}_speedup", args.verbose)
    summary_path = os.path.join(config.output.dir, f"{config.output.name}_speedup.csv")
    logger.info(f"🚀 speedup over n={args.nodes}, summary {summary_path}, log {log_path}")
    table = speedup_study(config, args.nodes, threshold=args.threshold, verbose=args.verbose)
    os.makedirs(config.output.dir, exist_ok=True)
    table.to_csv(summary_path, index=False, float_format="%.17g")
    logger.info(f"\n{frame_to_table(table)}")
    return EXIT_OK


def cmd_verify(args) -> int:
    out_dir = args.out or "outputs"
    _setup_logging(out_dir, "verify", args.verbose)
    results = run_suites()
    logger.info(f"\n{results_table(results)}")
    failed = [r.name for r in results if not r.passed]
    if failed:
        logger.error(f"❌ Failing properties: {', '.join(failed)}")
        return EXIT_CONFIG
    logger.info(f"✅ {len(results)} suites passed")
    return EXIT_OK


def cmd_plot(args) -> int:
    out_dir = args.out or "figures"
    _setup_logging(out_dir, "plot", args.verbose)
    plot_csvs(args.traces, out_dir, x_axis=args.x_axis, style=args.style)
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "sweep": cmd_sweep,
    "speedup": cmd_speedup,
    "verify": cmd_verify,
    "plot": cmd_plot,
}


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = cmd_args_parser().parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_CONFIG
    try:
        return COMMANDS[args.command](args)
    except GTVRError as e:
        code = exit_code_for(e)
        logger.error(f"{type(e).__name__}: {e}")
        return code


if __name__ == "__main__":
    sys.exit(main())
