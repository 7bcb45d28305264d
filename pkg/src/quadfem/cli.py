"""Command line front end: ``quadfem {mesh,inclusion,project,solve}``."""

import argparse
import sys

from quadfem import linalg, mesh as meshmod, polyspace
from quadfem.fields import PROBLEMS, parse_field
from quadfem.harness import compare_to_fixture, load_fixture
from quadfem.parallel import thread_count
from quadfem.poisson import PoissonError, table_run
from quadfem.projection import ProjectionError, convergence_study
from quadfem.quadrature import ASSEMBLY_ORDER, ERROR_ORDER, MAX_ORDER

EXIT_OK, EXIT_FIXTURE, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2, 3

NUMERICAL_ERRORS = (
    linalg.ConvergenceError,
    linalg.NotPositiveDefinite,
    ProjectionError,
    PoissonError,
    meshmod.MeshError,
)


class UsageError(Exception):
    pass


def _space(text):
    try:
        return polyspace.parse_space(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _positive(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def _quad_order(text):
    q = _positive(text)
    if q > MAX_ORDER:
        raise argparse.ArgumentTypeError(f"quadrature order must be at most {MAX_ORDER}")
    return q


def _mesh_sizes(nmin, nmax):
    for name, n in (("--nmin", nmin), ("--nmax", nmax)):
        if n & (n - 1):
            raise UsageError(f"{name} must be a power of 2, got {n}")
    if nmax < nmin:
        raise UsageError(f"--nmax {nmax} is smaller than --nmin {nmin}")
    ns = [nmin]
    while ns[-1] < nmax:
        ns.append(ns[-1] * 2)
    return ns


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="write the primary output (CSV or mesh file) here instead of stdout")
    common.add_argument("--quad-order", type=_quad_order, help="override the default quadrature order")
    common.add_argument(
        "--deterministic", action="store_true", help="force serial, fixed-order reductions (ignores QUADFEM_THREADS)"
    )

    parser = argparse.ArgumentParser(prog="quadfem", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mesh", parents=[common], help="generate and write a mesh")
    p.add_argument("--family", choices=meshmod.FAMILIES, required=True)
    p.add_argument("--n", type=_positive, required=True)

    p = sub.add_parser("inclusion", parents=[common], help="exact polynomial space inclusion checks")
    p.add_argument("--space", type=_space, required=True, help="KIND:R with KIND in p, q, s, rotated")
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--check", choices=("contains", "equivalence", "identity"), required=True)
    p.add_argument("--inner", type=_space, help="space tested by --check contains (default P_r)")

    p = sub.add_parser("project", parents=[common], help="broken best-approximation convergence study")
    p.add_argument("--space", type=_space, required=True)
    p.add_argument("--family", choices=meshmod.FAMILIES, required=True)
    p.add_argument("--nmin", type=_positive, default=2)
    p.add_argument("--nmax", type=_positive, required=True)
    p.add_argument("--norm", choices=("l2", "h1"), default="l2")
    p.add_argument("--u", default="quartic", help="quartic, peak or monomial:i,j")

    p = sub.add_parser("solve", parents=[common], help="Poisson convergence table with Q2 or S2 elements")
    p.add_argument("--element", choices=("q2", "s2"), required=True)
    p.add_argument("--family", choices=meshmod.FAMILIES, required=True)
    p.add_argument("--problem", choices=sorted(PROBLEMS), required=True)
    p.add_argument("--nmin", type=_positive, default=2)
    p.add_argument("--nmax", type=_positive, required=True)
    p.add_argument("--error-order", type=_quad_order, default=ERROR_ORDER)
    p.add_argument("--gnuplot", help="also write a gnuplot-compatible data file")
    p.add_argument("--fixture", help="compare against a stored reference table (e.g. quartic_s2_trapezoid)")
    p.add_argument("--rate-tol", type=float, default=0.1)
    p.add_argument("--err-tol", type=float, default=0.15)
    return parser


def _emit(text, args, table_text=None):
    """CSV (or mesh text) to --out or stdout; the aligned table to the other stream."""
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        if table_text:
            sys.stdout.write(table_text)
    else:
        sys.stdout.write(text)
        if table_text:
            sys.stderr.write(table_text)


def cmd_mesh(args):
    try:
        m = meshmod.generate(args.family, args.n)
    except meshmod.MeshError as exc:
        raise UsageError(str(exc)) from None
    text = meshmod.write_mesh(m, None)
    _emit(text, args)
    print(f"{len(m.vertices)} vertices, {m.n_elements} quads", file=sys.stderr if not args.out else sys.stdout)
    return EXIT_OK


def cmd_inclusion(args):
    space, r = args.space, args.r
    if r < 0:
        raise UsageError(f"--r must be nonnegative, got {r}")
    if args.check == "contains":
        inner = args.inner or polyspace.make_space("P", r)
        witness = polyspace.missing(space, inner)
        if witness is None:
            line = f"{space.name} contains {inner.name}: true"
        else:
            line = f"{space.name} contains {inner.name}: false (missing {witness!r})"
    elif args.check == "equivalence":
        res = polyspace.qr_equivalence(space, r)
        line = f"{space.name} r={r}: q_side={str(res['q_side']).lower()} p_side={str(res['p_side']).lower()}"
        witness = polyspace.missing(space, polyspace.make_space("Q", r))
        if witness is not None:
            line += f" (Q{r} witness {witness!r}"
            for label, F in (("F_tilde", polyspace.F_TILDE), ("F_bar", polyspace.F_BAR)):
                p = polyspace.mapped_space_witness(space, F, r)
                if p is not None:
                    line += f"; {label} pulls {p!r} outside"
            line += ")"
        if res["q_side"] != res["p_side"]:
            line += " MISMATCH"
    else:
        bad = [s for s in range(r + 1) if not polyspace.verify_identity(r, s)]
        line = f"identity r={r}: " + ("true" if not bad else f"false (fails for s={bad[0]})")
    _emit(line + "\n", args)
    return EXIT_OK


def cmd_project(args):
    ns = _mesh_sizes(args.nmin, args.nmax)
    if args.family != "square" and ns[0] < 2:
        raise UsageError(f"{args.family} meshes need n >= 2")
    try:
        u = parse_field(args.u)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    threads = thread_count(args.deterministic)
    table = convergence_study(args.space, args.family, ns, u, args.norm, args.quad_order, threads)
    _emit(table.to_csv(), args, table.format())
    return EXIT_OK


def cmd_solve(args):
    ns = _mesh_sizes(args.nmin, args.nmax)
    if args.family != "square" and ns[0] < 2:
        raise UsageError(f"{args.family} meshes need n >= 2")
    threads = thread_count(args.deterministic)
    table = table_run(
        args.problem,
        args.element.upper(),
        args.family,
        ns,
        args.quad_order or ASSEMBLY_ORDER,
        args.error_order,
        threads,
    )
    _emit(table.to_csv(), args, table.format())
    if args.gnuplot:
        with open(args.gnuplot, "w") as fh:
            fh.write(table.gnuplot())
    if args.fixture:
        try:
            fixture = load_fixture(args.fixture).restrict(ns)
        except FileNotFoundError:
            raise UsageError(f"no fixture named {args.fixture!r}") from None
        report = compare_to_fixture(table, fixture, args.rate_tol, args.err_tol)
        print(report.summary(), file=sys.stderr)
        if not report.passed:
            return EXIT_FIXTURE
    return EXIT_OK


COMMANDS = {"mesh": cmd_mesh, "inclusion": cmd_inclusion, "project": cmd_project, "solve": cmd_solve}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"quadfem {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NUMERICAL_ERRORS as exc:
        print(f"quadfem {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
