"""Command-line interface: ``saacontrol <subcommand> [options]``."""
import argparse
import logging
import os
import sys

from . import persist
from .bounds import BoundInputs, parse_covering, sample_size_bound
from .config import ConfigError, load_config
from .errors import InvalidArgument
from .study import StudyAbort, build_reference, regenerate_report, run_study, solve_nominal

EXIT_CONFIG = 2
EXIT_STUDY_DIR = 3


def _common():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="INI configuration file (defaults: full-size experiment)")
    p.add_argument("--out", default="out", help="output directory (default: ./out)")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                   help="worker threads (results do not depend on this)")
    p.add_argument("--seed", type=int, help="base seed for the i.i.d. replications")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser():
    common = _common()
    parser = argparse.ArgumentParser(prog="saacontrol", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("solve-nominal", parents=[common], help="solve the problem at xi = E[xi]")
    sub.add_parser("solve-reference", parents=[common], help="solve the QMC reference problem")
    sub.add_parser("run-study", parents=[common], help="run the convergence-rate study")
    b = sub.add_parser("bound", help="sample size for a target gap accuracy")
    b.add_argument("--r", type=float, required=True, help="diameter of the feasible set")
    b.add_argument("--tau", type=float, required=True, help="sub-Gaussian constant")
    b.add_argument("--L", type=float, required=True, help="Lipschitz constant")
    b.add_argument("--eps", type=float, required=True, help="target accuracy")
    b.add_argument("--covering", default="const:1", help="const:c or poly:C,s (default const:1)")
    r = sub.add_parser("report", help="regenerate summary tables and plots from raw CSV")
    r.add_argument("dir", nargs="?", help="study directory (default: --out)")
    r.add_argument("--out", default="out")
    return parser


def _prepare(args):
    """Load the configuration and create the output directory with a config echo."""
    cfg, text = load_config(args.config, seed=args.seed, threads=args.threads, output_dir=args.out)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "config.ini"), "w") as fh:
        fh.write(text)
    return cfg


def _manifest(args, cfg, command):
    persist.write_json(os.path.join(args.out, f"manifest_{command}.json"), {
        "command": command,
        "config": cfg.to_dict(),
        "versions": persist.versions(),
    })


def cmd_solve_nominal(args):
    cfg = _prepare(args)
    _, trace = solve_nominal(cfg, args.out)
    _manifest(args, cfg, "solve-nominal")
    print(f"{trace.status}: objective {trace.final_objective:.10g}, gap {trace.final_gap:.3e}, "
          f"{trace.iterations} gap evaluations")
    return 0


def cmd_solve_reference(args):
    cfg = _prepare(args)
    ref = build_reference(cfg)
    mesh = ref.problem.mesh
    ref.trace.to_csv(os.path.join(args.out, "reference_trace.csv"))
    persist.write_control(os.path.join(args.out, "reference_control.csv"), mesh, ref.u)
    persist.plot_control(os.path.join(args.out, "reference_control.svg"), mesh, ref.u,
                         f"reference solution, N_ref={cfg.N_ref}")
    _manifest(args, cfg, "solve-reference")
    print(f"{ref.trace.status}: objective {ref.value:.10g}, gap {ref.trace.final_gap:.3e}")
    return 0


def cmd_run_study(args):
    cfg = _prepare(args)
    report = run_study(cfg)
    for m, fit in report.rates.items():
        print(f"{m}: slope {fit.slope:.3f}" if fit else f"{m}: no fit")
    if not report.valid:
        print("study invalid: more than 20% failed replications at some N", file=sys.stderr)
        return 1
    return 0


def cmd_bound(args):
    inp = BoundInputs(args.r, args.tau, args.L, parse_covering(args.covering))
    print(sample_size_bound(inp, args.eps))
    return 0


def cmd_report(args):
    out = args.dir or args.out
    try:
        regenerate_report(out)
    except (OSError, KeyError, ValueError) as exc:
        print(f"invalid study directory {out}: {exc}", file=sys.stderr)
        return EXIT_STUDY_DIR
    print(f"regenerated report in {out}")
    return 0


COMMANDS = {
    "solve-nominal": cmd_solve_nominal,
    "solve-reference": cmd_solve_reference,
    "run-study": cmd_run_study,
    "bound": cmd_bound,
    "report": cmd_report,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvalidArgument as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StudyAbort as exc:
        print(f"study aborted: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
