"""``bench`` command-line driver.

Examples
--------
::

    bench inflate2d --method ndtns --order 2 --levels 4 --gamma 2 --tau zero --out results.csv
    bench cook2d --method std --levels 3 --format table
    bench pressure_robust --method mcs --levels 2

Exit codes: 0 success, 1 usage error, 2 solver failure (partial report
written).
"""
import argparse
import logging
import sys

from ..solver import NewtonConfig
from .problems import BenchmarkSpec, BenchmarkSpecError, emit_results, run

METHOD_ALIASES = {"ndtns": "ndtns", "std": "std", "mcs": "mcs_small_strain", "mcs_small_strain": "mcs_small_strain"}
EXIT_OK, EXIT_USAGE, EXIT_SOLVER = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser():
    p = _Parser(prog="bench", description="Run an incompressible elasticity benchmark.")
    p.add_argument("problem", choices=["inflate2d", "cook2d", "pressure_robust"])
    p.add_argument("--method", default="ndtns", choices=sorted(METHOD_ALIASES))
    p.add_argument("--order", type=int, default=2, help="polynomial order k (1 or 2)")
    p.add_argument("--levels", type=int, default=None,
                   help="refinement levels (Cook: number of meshes n = 4, 8, ...); default 4 / 3 / 2")
    p.add_argument("--gamma", type=float, default=2.0, help="inflation stretch of the outer radius")
    p.add_argument("--tau", default=None, help="zero | const:c | overh:c | cook (default: zero, cook for cook2d)")
    p.add_argument("--mu", type=float, default=1.0, help="shear modulus")
    p.add_argument("--out", default=None, help="output file (default: stdout)")
    p.add_argument("--format", default="csv", choices=["csv", "table"])
    p.add_argument("--shift", default="false", choices=["false", "true", "auto"],
                   help="eigenvalue shift of the material tangent")
    p.add_argument("--report-dofs", action="store_true", help="print DoF counts per mesh to stderr")
    p.add_argument("--seed-log", action="store_true",
                   help="log the configuration and every load step to stderr")
    return p


def _spec_from_args(args):
    defaults = {"inflate2d": 4, "cook2d": 3, "pressure_robust": 2}
    tau = args.tau or ("cook" if args.problem == "cook2d" else "zero")
    shift = {"false": False, "true": True, "auto": "auto"}[args.shift]
    return BenchmarkSpec(
        problem=args.problem, method=METHOD_ALIASES[args.method], order=args.order,
        levels=args.levels or defaults[args.problem], tau=tau, gamma=args.gamma, mu=args.mu,
        newton=NewtonConfig(use_shift=shift), out=args.out,
    )


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        spec = _spec_from_args(args)
    except (BenchmarkSpecError, ValueError) as exc:
        parser.print_usage(sys.stderr)
        print(f"bench: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logger = None
    if args.seed_log:
        logger = logging.getLogger("ndtns.bench")
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter("%(message)s"))
        logger.handlers = [handler]
        logger.setLevel(logging.INFO)
        logger.propagate = False
        logger.info("# %s", spec)
        logger.info("# step xi dxi n_it residual J0_min J0_max")
    report = run(spec, logger)
    if args.report_dofs:
        for row in report.rows:
            extra = row.get("extra", {}) if isinstance(row, dict) else {}
            if "dofs" in extra:
                print(f"dofs {extra['dofs']}", file=sys.stderr)
    try:
        text = emit_results(report, args.format, spec.out)
    except OSError as exc:
        print(f"bench: cannot write output: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if spec.out is None:
        sys.stdout.write(text)
    return EXIT_SOLVER if report.failed else EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
