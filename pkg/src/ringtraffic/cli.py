"""Command-line entry point: ``ringtraffic run | verify | bench``.

Exit codes: 0 success, 1 usage or parameter error, 2 verification failure,
3 I/O failure. The worker count comes from ``--threads``, else from the
``RINGTRAFFIC_THREADS`` environment variable, else from the parameter file.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io as _stdio
import os
import sys

from . import parallel
from .io import ParamFileError, SpacetimeImage, read_params, write_ascii, write_pgm
from .model import (
    AgentState,
    InvalidParametersError,
    OutputMode,
    SimParams,
    agent_to_grid,
    grid_to_agent,
    init_state,
    measure,
    step_grid_serial,
    step_serial,
)
from .prng import seed_lcg

EXIT_OK, EXIT_USAGE, EXIT_VERIFY, EXIT_IO = 0, 1, 2, 3
THREADS_ENV = "RINGTRAFFIC_THREADS"
DEFAULT_OUT = {OutputMode.ASCII: "trajectory.txt", OutputMode.PGM: "spacetime.pgm"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _nonnegative_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {value}")
    return value


def _threads_list(text: str) -> list[int]:
    try:
        counts = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid thread list {text!r}") from None
    if not counts or min(counts) < 1:
        raise argparse.ArgumentTypeError("thread counts must be >= 1")
    return counts


def fmt_checksum(value: int) -> str:
    return f"0x{value:016x}"


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ringtraffic", description="Reproducible parallel Nagel-Schreckenberg ring road.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_run = sub.add_parser("run", help="simulate and write output")
    p_run.add_argument("--params", required=True, help="parameter file (key = value)")
    p_run.add_argument("--threads", type=_positive_int, help=f"worker count (overrides ${THREADS_ENV} and file)")
    p_run.add_argument("--output", choices=[m.value for m in OutputMode], help="output mode")
    p_run.add_argument("--out", help="output path ('-' for stdout with ascii)")
    p_run.add_argument("--seed", type=_nonnegative_int, help="override seed")
    p_run.add_argument("--steps", type=_nonnegative_int, help="override step count")

    p_verify = sub.add_parser("verify", help="check checksums agree for 1..W workers")
    p_verify.add_argument("--params", required=True)
    p_verify.add_argument("--max-threads", type=_positive_int, required=True)

    p_bench = sub.add_parser("bench", help="strong-scaling timings")
    p_bench.add_argument("--params", required=True)
    p_bench.add_argument("--threads-list", type=_threads_list, default=[1, 2, 4, 8], help="e.g. 1,2,4,8")
    p_bench.add_argument("--repeats", type=_positive_int, default=1, help="timed runs per worker count; minimum is reported")
    p_bench.add_argument("--no-output", action="store_true", help="switch off trajectory output")
    p_bench.add_argument("--csv", help="write the CSV table here instead of stdout")
    p_bench.add_argument("--out", help="output path when output is on")
    return parser


def _load(path: str) -> tuple[SimParams, int]:
    with open(path, encoding="utf-8") as fh:
        return read_params(fh.read())


def _resolve_threads(flag: int | None, from_file: int) -> int:
    if flag is not None:
        return flag
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            value = int(env)
        except ValueError:
            raise UsageError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
        if value < 1:
            raise UsageError(f"{THREADS_ENV} must be >= 1, got {value}")
        return value
    return from_file


def _warn_oversubscription(threads: int) -> None:
    try:
        import psutil

        cores = psutil.cpu_count(logical=False)
    except ImportError:
        cores = None
    if cores and threads > cores:
        print(
            f"warning: {threads} workers exceed {cores} physical cores; timings will be hard to interpret",
            file=sys.stderr,
        )


def _write_output(result: parallel.RunResult, params: SimParams, out: str | None) -> str | None:
    mode = params.output_mode
    if mode is OutputMode.NONE:
        return None
    path = out or DEFAULT_OUT[mode]
    if mode is OutputMode.ASCII:
        if path == "-":
            write_ascii(result.frames, sys.stdout)
        else:
            with open(path, "w", encoding="ascii", newline="\n") as fh:
                write_ascii(result.frames, fh)
    else:
        with open(path, "wb") as fh:
            write_pgm(SpacetimeImage.from_frames(result.frames, params.road_length), fh)
    return path


def cmd_run(args) -> int:
    params, file_threads = _load(args.params)
    overrides = {}
    if args.output is not None:
        overrides["output_mode"] = OutputMode(args.output)
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.steps is not None:
        overrides["steps"] = args.steps
    params = dataclasses.replace(params, **overrides)
    threads = _resolve_threads(args.threads, file_threads)
    _warn_oversubscription(threads)

    result = parallel.run(params, threads)
    path = _write_output(result, params, args.out)
    obs = measure(result.final_state)
    stream = sys.stderr if path == "-" else sys.stdout
    print(
        f"steps={params.steps} workers={threads} mean_velocity={obs.mean_velocity:.6f} "
        f"density={obs.density:.6f} flow={obs.flow:.6f} checksum={fmt_checksum(result.checksum)}"
        + (f" output={path}" if path else ""),
        file=stream,
    )
    return EXIT_OK


def serial_trajectory(params: SimParams, steps: int | None = None):
    """Yield the agent state at steps 0..T of the pure-Python serial path."""
    state, rng = init_state(params), seed_lcg(params.seed)
    yield state
    for _ in range(params.steps if steps is None else steps):
        state, rng = step_serial(state, rng, params)
        yield state


def grid_trajectory(params: SimParams):
    """Yield the grid path's states, converted to agent form, at steps 0..T."""
    grid, rng = agent_to_grid(init_state(params)), seed_lcg(params.seed)
    yield grid_to_agent(grid)
    for _ in range(params.steps):
        grid, rng = step_grid_serial(grid, rng, params)
        yield grid_to_agent(grid)


def _checksum(states) -> int:
    return parallel.checksum_trajectory((s.positions, s.velocities) for s in states)


def _state_at(params: SimParams, step: int, workers: int | None) -> AgentState:
    if workers is None:
        for state in serial_trajectory(params, step):
            pass
        return state
    return parallel.run(params, workers, steps=step, record=False).final_state


def first_divergent_step(params: SimParams, workers: int) -> int:
    """Binary search for the first step whose state differs from the serial path.

    Assumes a divergent trajectory stays divergent once it has split.
    """
    lo, hi = 0, params.steps  # state equal at lo, different at hi
    if _state_at(params, 0, workers) != _state_at(params, 0, None):
        return 0
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _state_at(params, mid, workers) == _state_at(params, mid, None):
            lo = mid
        else:
            hi = mid
    return hi


def cmd_verify(args) -> int:
    params, _ = _load(args.params)
    params = dataclasses.replace(params, output_mode=OutputMode.NONE)
    reference = _checksum(serial_trajectory(params))
    grid = _checksum(grid_trajectory(params))
    print(f"serial agent   {fmt_checksum(reference)}")
    print(f"serial grid    {fmt_checksum(grid)}")
    ok = grid == reference
    if not ok:
        print("FAILED: grid path diverges from agent path", file=sys.stderr)

    divergent = None
    for w in range(1, args.max_threads + 1):
        checksum = parallel.run(params, w).checksum
        match = checksum == reference
        print(f"workers={w:<4d} {fmt_checksum(checksum)} {'ok' if match else 'MISMATCH'}")
        if not match and divergent is None:
            divergent = w
    if divergent is not None:
        step = first_divergent_step(params, divergent)
        print(f"FAILED: workers={divergent} first diverges at step {step}", file=sys.stderr)
        ok = False
    if ok:
        print("verify: all checksums agree")
    return EXIT_OK if ok else EXIT_VERIFY


def bench_rows(params: SimParams, thread_counts: list[int], repeats: int):
    """Time the stepping loop; returns rows and the last run's result."""
    counts = list(dict.fromkeys(thread_counts))
    if 1 not in counts:
        counts.insert(0, 1)
    times, checksums, last = {}, {}, None
    for w in counts:
        best = None
        for _ in range(repeats):
            last = parallel.run(params, w)
            best = last.step_seconds if best is None else min(best, last.step_seconds)
            if checksums.setdefault(w, last.checksum) != last.checksum:
                checksums[w] = None
        times[w] = best
    rows = []
    for w in counts:
        speedup = times[1] / times[w] if times[w] > 0 else float("inf")
        rows.append(
            {
                "workers": str(w),
                "wall_time_s": f"{times[w]:.6f}",
                "speedup": f"{speedup:.4f}",
                "efficiency": f"{speedup / w:.4f}",
                "checksum": fmt_checksum(checksums[w]) if checksums[w] is not None else "inconsistent",
            }
        )
    return rows, last


CSV_FIELDS = ["workers", "wall_time_s", "speedup", "efficiency", "checksum"]


def format_table(rows) -> str:
    widths = {f: max(len(f), *(len(r[f]) for r in rows)) for f in CSV_FIELDS}
    lines = ["  ".join(f.rjust(widths[f]) for f in CSV_FIELDS)]
    lines += ["  ".join(r[f].rjust(widths[f]) for f in CSV_FIELDS) for r in rows]
    return "\n".join(lines)


def format_csv(rows) -> str:
    buf = _stdio.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def cmd_bench(args) -> int:
    params, _ = _load(args.params)
    if args.no_output:
        params = dataclasses.replace(params, output_mode=OutputMode.NONE)
    for w in args.threads_list:
        _warn_oversubscription(w)
    rows, last = bench_rows(params, args.threads_list, args.repeats)
    failed = len({r["checksum"] for r in rows}) != 1 or rows[0]["checksum"] == "inconsistent"

    print(format_table(rows))
    if failed:
        print("FAILED: checksums differ across worker counts")
    text = format_csv(rows)
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        print()
        print(text, end="")
    _write_output(last, params, args.out)
    return EXIT_VERIFY if failed else EXIT_OK


COMMANDS = {"run": cmd_run, "verify": cmd_verify, "bench": cmd_bench}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ParamFileError, InvalidParametersError, UsageError) as exc:
        print(f"ringtraffic: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"ringtraffic: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
