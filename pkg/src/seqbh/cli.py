"""Command-line front end: ``seqbh ladder | simulate | run | bh``.

Exit codes: 0 success, 2 usage/config/input error, 3 numerical error,
4 stream ended before the procedure terminated.
"""
from __future__ import annotations

import argparse
import csv
import sys

from .config import load_json, parse_run_config, parse_simulation_config
from .errors import ConfigError, DomainError, NumericalError, SeqBHError, UsageError
from .procedure import FULL, REJECTIVE, ProcedureRunner
from .simulation import fixed_sample_bh, run_monte_carlo
from .statistics import WaldConfig, fractional_levels, sbh_wald_ladder


EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3
EXIT_INCOMPLETE = 4


class InputError(SeqBHError, ValueError):
    """Malformed line in the streaming input."""


def _emit_table(rows, header, fmt, out):
    if fmt == "md":
        out.write("| " + " | ".join(header) + " |\n")
        out.write("|" + "|".join("---" for _ in header) + "|\n")
        for row in rows:
            out.write("| " + " | ".join(str(c) for c in row) + " |\n")
        return
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)


def _out_format(args):
    return "md" if args.pretty else args.out


# -- ladder -----------------------------------------------------------------


def cmd_ladder(args, out):
    cfg = WaldConfig(args.alpha, args.beta, args.K, args.rho, args.overshoot)
    ladder = sbh_wald_ladder(cfg)
    rows = []
    for s in range(1, cfg.K + 1):
        a_s, b_s = fractional_levels(cfg, s)
        rows.append([s, repr(float(ladder.lower[s - 1])), repr(float(ladder.upper[s - 1])),
                     repr(a_s), repr(b_s)])
    _emit_table(rows, ["s", "A_s", "B_s", "alpha_s", "beta_s"], _out_format(args), out)
    return EXIT_OK


# -- simulate ---------------------------------------------------------------


SIM_HEADER = [
    "Scenario", "K", "K0", "Procedure", "FDR (SE)", "K0*alpha/K",
    "FNR (SE)", "K1*beta/K", "EN (SE)", "Savings", "Notes",
]


def report_rows(rep):
    notes = rep.notes
    if rep.cap_hits:
        notes = (notes + "; " if notes else "") + f"cap_hits={rep.cap_hits}"
    sbh = [
        rep.name, rep.K, rep.K0, "SBH",
        f"{rep.fdr_hat:.4f} ({rep.fdr_se:.4f})", f"{rep.bound_fdr:.3f}",
        f"{rep.fnr_hat:.4f} ({rep.fnr_se:.4f})", f"{rep.bound_fnr:.3f}",
        f"{rep.en_hat:.1f} ({rep.en_se:.1f})", "", notes,
    ]
    rows = [sbh]
    if rep.fbh_total_n is not None:
        rows.append([
            rep.name, rep.K, rep.K0, "FBH",
            f"{rep.fbh_fdr:.4f} ({rep.fbh_fdr_se:.4f})", f"{rep.bound_fdr:.3f}",
            f"{rep.fbh_fnr:.4f} ({rep.fbh_fnr_se:.4f})", f"{rep.bound_fnr:.3f}",
            f"{rep.fbh_total_n}", f"{rep.savings_vs_fbh:.2f}%", notes,
        ])
    return rows


def cmd_simulate(args, out):
    overrides = {
        "replications": args.reps, "seed": args.seed, "rho": args.rho,
        "variant": args.variant, "truncation": args.truncation,
    }
    configs = parse_simulation_config(load_json(args.config), overrides)
    rows = []
    for cfg in configs:
        rows.extend(report_rows(run_monte_carlo(cfg, threads=args.threads)))
    _emit_table(rows, SIM_HEADER, _out_format(args), out)
    return EXIT_OK


# -- run --------------------------------------------------------------------


def parse_line(line, lineno, K):
    parts = line.rstrip("\r\n").split("\t")
    if len(parts) != 3:
        raise InputError(f"line {lineno}: expected 't<TAB>k<TAB>value[,value...]'")
    try:
        t, k = int(parts[0]), int(parts[1])
        values = [float(v) for v in parts[2].split(",")]
    except ValueError:
        raise InputError(f"line {lineno}: cannot parse {line.strip()!r}") from None
    if not 1 <= k <= K:
        raise InputError(f"line {lineno}: stream {k} outside 1..{K}")
    return t, k, values


class StreamRun:
    """Drives a :class:`ProcedureRunner` from time-indexed observations.

    Streams are labelled 1..K in the text formats.
    """

    def __init__(self, cfg, out):
        self.cfg = cfg
        self.out = out
        self.runner = ProcedureRunner(cfg.ladders, cfg.variant, cfg.truncation)
        self.accs = [s.factory() for s in cfg.statistics]
        self.t = 0

    def emit(self, text):
        self.out.write(text + "\n")

    def step(self, t, rows):
        if t != self.t + 1:
            raise InputError(f"time index {t} follows {self.t}; expected {self.t + 1}")
        state = self.runner.state
        for k in sorted(state.active):
            if k + 1 not in rows:
                raise InputError(f"missing value for stream {k + 1} at t={t}")
            width = self.cfg.statistics[k].width
            if len(rows[k + 1]) != width:
                raise InputError(
                    f"stream {k + 1} at t={t}: expected {width} value(s), got {len(rows[k + 1])}"
                )
            self.accs[k].update(rows[k + 1])
        self.t = t
        checkpoint = t % self.cfg.group_size == 0 or (
            self.cfg.variant == REJECTIVE and t >= self.cfg.truncation
        )
        if not checkpoint:
            return
        self.emit(f"SAMPLE stage={state.stage} n={t}")
        stage = state.stage
        before = len(state.decisions)
        self.runner.observe(t, {k: self.accs[k].value for k in state.active})
        for d in state.decisions[before:]:
            self.emit(f"DECISION stage={stage} n={d.sample_size} stream={d.stream + 1} verdict={d.verdict}")
        if self.runner.terminal:
            self.emit(f"TERMINAL accepted={state.accepted_count} rejected={state.rejected_count}")


def cmd_run(args, out, stdin):
    cfg = parse_run_config(
        load_json(args.config),
        {"rho": args.rho, "variant": args.variant, "truncation": args.truncation},
    )
    source = stdin if args.input in (None, "-") else open(args.input, encoding="utf-8")
    run = StreamRun(cfg, out)
    pending_t, rows = None, {}
    try:
        for lineno, line in enumerate(source, start=1):
            if not line.strip():
                continue
            t, k, values = parse_line(line, lineno, cfg.K)
            if pending_t is not None and t != pending_t:
                if t < pending_t:
                    raise InputError(f"line {lineno}: time index {t} goes backwards")
                run.step(pending_t, rows)
                if run.runner.terminal:
                    return EXIT_OK
                rows = {}
            if k in rows:
                raise InputError(f"line {lineno}: duplicate value for stream {k} at t={t}")
            pending_t = t
            rows[k] = values
        if pending_t is not None:
            run.step(pending_t, rows)
            if run.runner.terminal:
                return EXIT_OK
    finally:
        if source is not stdin:
            source.close()
    active = ",".join(str(k + 1) for k in sorted(run.runner.state.active))
    run.emit(f"INCOMPLETE n={run.t} active={active}")
    return EXIT_INCOMPLETE


# -- bh ---------------------------------------------------------------------


def cmd_bh(args, out, stdin):
    values = args.p_values or stdin.read().replace(",", " ").split()
    try:
        p = [float(v) for v in values]
    except ValueError as exc:
        raise UsageError(f"cannot parse p-value: {exc}") from None
    if not p:
        raise UsageError("no p-values given")
    if not 0 < args.alpha < 1:
        raise DomainError(f"alpha must lie in (0, 1), got {args.alpha}")
    try:
        rejected = fixed_sample_bh(p, args.alpha)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    rows = [[i + 1, repr(v), "reject" if i in rejected else "accept"] for i, v in enumerate(p)]
    _emit_table(rows, ["index", "p_value", "decision"], _out_format(args), out)
    return EXIT_OK


# -- entry point ------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(
        prog="seqbh", description="Sequential Benjamini-Hochberg procedures for data streams."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def output_flags(p):
        p.add_argument("--out", choices=["csv", "md"], default="csv")
        p.add_argument("--pretty", action="store_true", help="markdown table (same as --out md)")

    p = sub.add_parser("ladder", help="print Wald critical values A_s, B_s")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--beta", type=float, default=0.2)
    p.add_argument("-K", "--K", type=int, required=True)
    p.add_argument("--rho", type=float, default=0.0)
    p.add_argument("--overshoot", choices=["outward", "inward"], default="outward")
    output_flags(p)

    p = sub.add_parser("simulate", help="Monte Carlo operating characteristics")
    p.add_argument("config", help="JSON config path or bundled name (table1, table2)")
    p.add_argument("--reps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--rho", type=float)
    p.add_argument("--variant", choices=[FULL, REJECTIVE])
    p.add_argument("--truncation", type=int)
    p.add_argument("--threads", type=int, help="defaults to $SEQBH_THREADS")
    output_flags(p)

    p = sub.add_parser("run", help="apply the procedure to streamed observations")
    p.add_argument("config", help="JSON hypothesis config")
    p.add_argument("input", nargs="?", help="TSV input (default: standard input)")
    p.add_argument("--rho", type=float)
    p.add_argument("--variant", choices=[FULL, REJECTIVE])
    p.add_argument("--truncation", type=int)

    p = sub.add_parser("bh", help="fixed-sample BH on a list of p-values")
    p.add_argument("p_values", nargs="*", help="p-values (default: read from standard input)")
    p.add_argument("--alpha", type=float, default=0.05)
    output_flags(p)
    return parser


def main(argv=None, stdin=None, stdout=None, stderr=None):
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        if args.command == "ladder":
            return cmd_ladder(args, stdout)
        if args.command == "simulate":
            return cmd_simulate(args, stdout)
        if args.command == "run":
            return cmd_run(args, stdout, stdin)
        return cmd_bh(args, stdout, stdin)
    except NumericalError as exc:
        stderr.write(f"seqbh: numerical error: {exc}\n")
        return EXIT_NUMERICAL
    except (ConfigError, InputError, UsageError, DomainError, ValueError) as exc:
        stderr.write(f"seqbh: error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
