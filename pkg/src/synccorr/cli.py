"""Command-line front end.

Exit status: 0 success or member, 2 certified non-member (or inclusion
violations), 3 inconclusive, 1 usage or validation error. Records go to
stdout one per line.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import records
from .hull import DEFAULT_EPS, INCONCLUSIVE, MEMBER
from .oracle import (
    PROPOSITIONS,
    check_inclusion,
    iterate_reduction,
    reduce_dimension,
    reducible_pair,
    sample_projection_stack,
    _check_ranks,
)
from .matcore import rng_stream, trace_triples_batch
from .oracle import RankedTriple
from .realize import evaluate_correlation, realize_hull_point, verify_realization
from .slices import correlation_tensor, slice_membership, slice_mesh, two_experiment_slice

EXIT_OK, EXIT_USAGE, EXIT_NONMEMBER, EXIT_INCONCLUSIVE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def _floats(n: int):
    def parse(text: str):
        try:
            vals = [float(v) for v in text.split(",")]
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected {n} comma-separated numbers, got {text!r}") from None
        if len(vals) != n or not all(np.isfinite(vals)):
            raise argparse.ArgumentTypeError(f"expected {n} comma-separated finite numbers, got {text!r}")
        return vals
    return parse


def _ints(n: int):
    def parse(text: str):
        try:
            vals = [int(v) for v in text.split(",")]
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected {n} comma-separated integers, got {text!r}") from None
        if len(vals) != n:
            raise argparse.ArgumentTypeError(f"expected {n} comma-separated integers, got {text!r}")
        return vals
    return parse


def _unit_interval(vals, name):
    if any(v < 0 or v > 1 for v in vals):
        raise UsageError(f"{name} entries must lie in [0, 1]")


def build_parser() -> argparse.ArgumentParser:
    top = _Parser(prog="synccorr", description="Slices of the synchronous quantum correlation set C_q^s(3,2).")
    top.add_argument("--human", action="store_true", help="print floats with 6 significant digits")
    sub = top.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    def slice_args(p):
        p.add_argument("-r", type=_floats(3), required=True, help="marginals r1,r2,r3")
        p.add_argument("-p", type=_floats(3), required=True, help="joint-zero probabilities w12,w13,w23")
        p.add_argument("--eps", type=float, default=DEFAULT_EPS)
        p.add_argument("--max-iter", type=int, default=100_000)

    slice_args(sub.add_parser("member", help="hull membership with certificate"))
    p = sub.add_parser("realize", help="membership plus an explicit realization and its verification")
    slice_args(p)
    p.add_argument("--tol", type=float, default=1e-9)

    p = sub.add_parser("sample", help="stream sampled trace triples")
    p.add_argument("-d", type=int, required=True)
    p.add_argument("-n", type=_ints(3), required=True, help="ranks n1,n2,n3")
    p.add_argument("-N", type=int, required=True, help="number of trials")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--mode", choices=("haar", "mixed"), default="haar")
    p.add_argument("--triples", action="store_true", help="emit full ranked_triple records")

    p = sub.add_parser("reduce", help="dimension reduction of a serialized ranked triple")
    p.add_argument("-i", "--input", default="-", help="file with a ranked_triple record ('-' for stdin)")
    p.add_argument("--pair", type=_ints(2), help="experiments a,b (1-based); default: greedy choice")
    p.add_argument("--iterate", action="store_true", help="reduce until no pair qualifies")

    p = sub.add_parser("check", help="sampling check of an inclusion statement")
    p.add_argument("--prop", choices=PROPOSITIONS, required=True)
    for name in ("n", "k", "kp", "d", "n1", "n2"):
        p.add_argument(f"--{name}", type=int)
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--mode", choices=("haar", "mixed"), default="haar")
    p.add_argument("--eps", type=float, default=1e-6)
    p.add_argument("--timing", action="store_true", help="include wall time (output no longer reproducible)")

    p = sub.add_parser("tensor", help="full 36-entry correlation tensor")
    p.add_argument("-r", type=_floats(3), required=True)
    p.add_argument("-p", type=_floats(3), required=True)

    p = sub.add_parser("mesh", help="boundary point cloud of a slice")
    p.add_argument("-r", type=_floats(3), required=True)
    p.add_argument("--res", type=int, default=5000, help="number of directions")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--eps", type=float, default=DEFAULT_EPS)
    p.add_argument("--seed", type=int, default=0, help="recorded in the metadata; directions are deterministic")
    p.add_argument("--verify", action="store_true", help="check every point with slice membership")

    p = sub.add_parser("two-exp", help="interval of w12 for two experiments")
    p.add_argument("-r", type=_floats(2), required=True)
    return top


def _verdict_exit(verdict: str) -> int:
    if verdict == MEMBER:
        return EXIT_OK
    return EXIT_INCONCLUSIVE if verdict == INCONCLUSIVE else EXIT_NONMEMBER


def _cmd_member(args, emit):
    _unit_interval(args.r, "-r")
    cert = slice_membership(args.r, args.p, eps=args.eps, max_iter=args.max_iter)
    emit(records.certificate_record(cert))
    return _verdict_exit(cert.verdict)


def _cmd_realize(args, emit):
    _unit_interval(args.r, "-r")
    cert = slice_membership(args.r, args.p, eps=args.eps, max_iter=args.max_iter)
    emit(records.certificate_record(cert))
    if not cert.is_member:
        return _verdict_exit(cert.verdict)
    real = realize_hull_point(args.r, cert)
    rep = verify_realization(real, args.r, cert.x, args.tol)
    emit(records.realization_record(real))
    emit(records.verification_record(rep))
    return EXIT_OK if rep.passed else EXIT_INCONCLUSIVE


def _cmd_sample(args, emit):
    if args.N < 1:
        raise UsageError("-N must be positive")
    if args.seed < 0:
        raise UsageError("--seed must be non-negative")
    try:
        ranks = _check_ranks(args.d, args.n)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    rng = rng_stream(args.seed, args.d, *ranks)
    chunk = 1000
    for start in range(0, args.N, chunk):
        count = min(chunk, args.N - start)
        stacks = sample_projection_stack(args.d, ranks, count, rng, args.mode)
        w = trace_triples_batch(*stacks)
        for k in range(count):
            if args.triples:
                mats = tuple(0.5 * (s[k] + s[k].conj().T) for s in stacks)
                rec = records.ranked_triple_record(RankedTriple(args.d, ranks, mats))
                rec["trial"] = start + k
                emit(rec)
            else:
                emit({"record": "sample", "trial": start + k, "w": w[k]})
    return EXIT_OK


def _cmd_reduce(args, emit):
    text = sys.stdin.read() if args.input == "-" else Path(args.input).read_text()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise UsageError("no ranked_triple record on input")
    for line in lines:
        try:
            rt = records.ranked_triple_from_record(records.loads(line))
        except (ValueError, KeyError) as exc:
            raise UsageError(f"bad ranked_triple record: {exc}") from None
        if args.iterate:
            for weight, term in iterate_reduction(rt):
                rec = records.ranked_triple_record(term)
                rec["weight"] = weight
                rec["scale"] = term.d / rt.d
                emit(rec)
            continue
        pair = reducible_pair(rt) if args.pair is None else tuple(v - 1 for v in args.pair)
        if pair is None:
            raise UsageError(f"no pair with rank sum below d = {rt.d}")
        try:
            step = reduce_dimension(rt, pair)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        emit(records.reduction_step_record(step))
    return EXIT_OK


_CHECK_PARAMS = {
    "typeI": ("n", "d"), "typeI-swap": ("n", "d"), "typeII": ("n", "k", "d"),
    "typeII-swap": ("n", "k", "d"), "typeIII": ("n", "k", "kp", "d"), "two-exp": ("n1", "n2", "d"),
}


def _cmd_check(args, emit):
    names = _CHECK_PARAMS[args.prop]
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        raise UsageError(f"--prop {args.prop} needs " + ", ".join("--" + n for n in missing))
    if args.trials < 1:
        raise UsageError("--trials must be positive")
    params = {n: getattr(args, n) for n in names}
    try:
        rep = check_inclusion(args.prop, params, args.trials, args.seed, mode=args.mode, eps=args.eps)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    rec = records.inclusion_record(rep)
    if not args.timing:
        rec.pop("wall_time")
    emit(rec)
    if rep.violations:
        return EXIT_NONMEMBER
    return EXIT_INCONCLUSIVE if rep.inconclusive else EXIT_OK


def _cmd_tensor(args, emit):
    t = correlation_tensor(args.r, args.p)
    emit(records.tensor_record(t))
    return EXIT_OK


def write_mesh(mesh, path: Path, eps: float, seed: int):
    lines = [",".join(format(float(v), ".6g") for v in pt) for pt in mesh.points]
    path.write_text("\n".join(lines) + "\n")
    meta = {"record": "mesh", "r": mesh.r, "resolution": mesh.resolution, "eps": eps, "seed": seed,
            "points": len(lines)}
    meta_path = path.with_name(path.name + ".meta.json")
    meta_path.write_text(records.dumps(meta) + "\n")
    return meta_path


def read_mesh(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=2)


def _cmd_mesh(args, emit):
    _unit_interval(args.r, "-r")
    if args.res < 6:
        raise UsageError("--res must be at least 6")
    mesh = slice_mesh(args.r, args.res)
    path = Path(args.output)
    meta_path = write_mesh(mesh, path, args.eps, args.seed)
    rec = {"record": "mesh", "output": str(path), "metadata": str(meta_path), "points": len(mesh.points)}
    status = EXIT_OK
    if args.verify:
        verdicts = [slice_membership(args.r, pt, eps=args.eps).verdict for pt in mesh.points]
        bad = sum(v != MEMBER for v in verdicts)
        rec["rejected"] = bad
        status = EXIT_OK if bad == 0 else EXIT_INCONCLUSIVE
    emit(rec)
    return status


def _cmd_two_exp(args, emit):
    _unit_interval(args.r, "-r")
    emit(list(two_experiment_slice(*args.r)))
    return EXIT_OK


COMMANDS = {
    "member": _cmd_member, "realize": _cmd_realize, "sample": _cmd_sample, "reduce": _cmd_reduce,
    "check": _cmd_check, "tensor": _cmd_tensor, "mesh": _cmd_mesh, "two-exp": _cmd_two_exp,
}


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        stderr.write(str(exc))
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    digits = 6 if args.human else 17

    def emit(rec):
        stdout.write(records.dumps(rec, digits) + "\n")

    try:
        return COMMANDS[args.verb](args, emit)
    except UsageError as exc:
        stderr.write(f"synccorr {args.verb}: {exc}\n")
        return EXIT_USAGE


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
