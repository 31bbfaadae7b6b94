"""Command-line entry point: nsalpha-da <subcommand> [flags].

Exit codes: 0 success, 1 usage, 2 validation, 3 numerical abort, 4 I/O.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time

import numpy as np

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_IO = range(5)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_help(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text):
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text):
    return [int(x) for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--quiet", action="store_true", help="only print warnings and errors")

    p = _Parser(prog="nsalpha-da", description="NS-alpha nudging twin experiments")
    sub = p.add_subparsers(dest="command", metavar="subcommand", parser_class=_Parser)

    r = sub.add_parser("run-twin", parents=[common], help="run a configured twin experiment")
    r.add_argument("--config", required=True, help="experiment config file")
    r.add_argument("--out", help="output directory (overrides output.dir)")
    r.add_argument("--seed", type=int, help="override run.seed")
    r.add_argument("--records-every", type=float, help="record interval in time units")

    c = sub.add_parser("check-conditions", parents=[common], help="print the sufficient-condition report")
    c.add_argument("--config", required=True)
    c.add_argument("--seed", type=int)

    o = sub.add_parser("certify-observers", parents=[common], help="empirically certify interpolant inequalities")
    o.add_argument("kind", nargs="?", default="all", choices=["modes", "volumes", "nodes", "all"])
    o.add_argument("--N", type=int, default=32)
    o.add_argument("--L", type=float, default=2 * np.pi)
    o.add_argument("--cells", type=_ints, default=[2, 4, 8], help="comma-separated cells per dimension")
    o.add_argument("--h", type=_floats, default=[0.5, 0.25, 0.125], help="comma-separated h for modes")
    o.add_argument("--trials", type=int, default=100)
    o.add_argument("--seed", type=int, default=0)

    b = sub.add_parser("bench-nonlinear", parents=[common], help="time the nonlinear term")
    b.add_argument("--N", type=int, default=32)
    b.add_argument("--repeats", type=int, default=10)
    b.add_argument("--seed", type=int, default=0)

    f = sub.add_parser("fit-decay", parents=[common], help="fit an exponential rate to a diagnostics CSV")
    f.add_argument("csv")
    f.add_argument("--t-start", type=float)
    f.add_argument("--t-end", type=float)
    return p


def _cmd_run_twin(args) -> int:
    from nsalpha_da.config import load_config
    from nsalpha_da.experiment import run_experiment

    cfg = load_config(args.config, seed=args.seed, records_every=args.records_every)
    res = run_experiment(cfg, args.out)
    recs = res.run.records
    ratio = recs[-1].err_combined / recs[0].err_combined if recs[0].err_combined > 0 else float("nan")
    print(f"records            {len(recs)}")
    print(f"spin-up ended at   t={res.run.t_spinup:.6g}")
    print(f"err_combined       {recs[0].err_combined:.6e} -> {recs[-1].err_combined:.6e} (ratio {ratio:.3e})")
    if res.fit is not None:
        print(f"decay fit          gamma={res.fit.gamma:.6g} r_squared={res.fit.r_squared:.6f} {res.fit.note}")
    print(f"artifacts in       {res.out_dir}")
    return EXIT_OK


def _cmd_check(args) -> int:
    from nsalpha_da.assimilation import check_conditions
    from nsalpha_da.config import load_config

    cfg = load_config(args.config, seed=args.seed)
    for line in check_conditions(cfg.assimilation).lines():
        print(line)
    return EXIT_OK


def _cmd_certify(args) -> int:
    from nsalpha_da.observers import certify_type1, certify_type2, make_observer, mode_cutoff
    from nsalpha_da.spectral import make_grid

    grid = make_grid(args.L, args.N)
    kinds = ["modes", "volumes", "nodes"] if args.kind == "all" else [args.kind]
    ok = True
    for kind in kinds:
        if kind == "modes":
            for h in args.h:
                spec = make_observer("modes", grid, h=h)
                cert = certify_type1(spec, grid, args.trials, args.seed)
                ok &= cert.passed
                print(
                    f"modes   h={h:<8g} kappa={mode_cutoff(grid, h):<3d} worst={cert.worst_ratio:.12f} "
                    f"bound={cert.bound:.12f} {'PASS' if cert.passed else 'FAIL'}"
                )
        for n in args.cells if kind != "modes" else []:
            spec = make_observer(kind, grid, cells_per_dim=n)
            if kind == "volumes":
                cert = certify_type1(spec, grid, args.trials, args.seed)
                ok &= cert.passed
                print(
                    f"volumes n={n:<6d} worst={cert.worst_ratio:.12f} bound={cert.bound:.12f} "
                    f"{'PASS' if cert.passed else 'FAIL'}"
                )
            else:
                c2 = certify_type2(spec, grid, args.trials, args.seed)
                ok &= c2.passed
                print(
                    f"nodes   n={n:<6d} worst(32,8)={c2.worst_proof:.6f} worst(32,4)={c2.worst_statement:.6f} "
                    f"a={c2.worst_a:.6f} b={c2.worst_b:.6f} {'PASS' if c2.passed else 'FAIL'}"
                )
    return EXIT_OK if ok else EXIT_NUMERICAL


def _cmd_bench(args) -> int:
    from nsalpha_da.dynamics import btilde
    from nsalpha_da.spectral import make_grid, random_field

    grid = make_grid(2 * np.pi, args.N)
    rng = np.random.default_rng(args.seed)
    u, v = random_field(grid, rng), random_field(grid, rng)
    btilde(u, v)
    t0 = time.perf_counter()
    for _ in range(args.repeats):
        btilde(u, v)
    per = (time.perf_counter() - t0) / args.repeats
    print(f"btilde N={args.N}: {per * 1e3:.3f} ms/call, {args.N**3 / per / 1e6:.3f} Mpoints/s")
    return EXIT_OK


def _cmd_fit(args) -> int:
    from nsalpha_da.fitting import fit_decay, read_diagnostics

    recs = read_diagnostics(args.csv)
    window = None
    if args.t_start is not None or args.t_end is not None:
        window = (
            args.t_start if args.t_start is not None else -np.inf,
            args.t_end if args.t_end is not None else np.inf,
        )
    fit = fit_decay(recs, window)
    print(f"gamma      {fit.gamma:.10g}")
    print(f"r_squared  {fit.r_squared:.10f}")
    print(f"window     {fit.window[0]:.10g} {fit.window[1]:.10g} ({fit.n_points} points)")
    if fit.note:
        print(f"note       {fit.note}")
    return EXIT_OK


COMMANDS = {
    "run-twin": _cmd_run_twin,
    "check-conditions": _cmd_check,
    "certify-observers": _cmd_certify,
    "bench-nonlinear": _cmd_bench,
    "fit-decay": _cmd_fit,
}


def main(argv=None) -> int:
    from nsalpha_da.assimilation import TwinAbort
    from nsalpha_da.errors import ConfigurationError, StepError

    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.error("a subcommand is required")
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigurationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (TwinAbort, StepError, FloatingPointError) as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
