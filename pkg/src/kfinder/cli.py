"""Command-line front end: generators, identifiers, verifiers and baselines
wired into reproducible runs with file I/O and key=value reports.

Exit codes: 0 success, 1 algorithmic failure (e.g. no guess accepted in the
weight sweep), 2 input/parse errors. Reports are byte-identical across reruns
with the same configuration and seed; wall time goes to stderr only.
"""

import argparse
import hashlib
import os
import sys
import time

import numpy as np

from .baselines import (
    ThreeCoverInstance,
    build_checkntsc_instance,
    check_ntsc_decision_bruteforce,
    elbow_estimate,
    exact_cover_exists,
)
from .convexid import identify_k_convex
from .errors import AlgoError, ParseError
from .generate import parse_generator_spec, sample_gaussian_mixture, sample_sbm
from .linalg import PointSet
from .peeling import AlgoConstants, identify_k, identify_k_with_w0
from .verify import (
    check_ntsc,
    check_separation,
    check_weak_ntsc,
    exhaustive_identify,
)

FLOAT_FMT = "%.17g"


def fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return FLOAT_FMT % float(value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def parse_points(path):
    """CSV of one point per line, comma-separated reals, no header."""
    rows = []
    arity = None
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as e:
        raise ParseError("unreadable-input", str(e)) from None
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        toks = line.split(",")
        if arity is None:
            arity = len(toks)
        elif len(toks) != arity:
            raise ParseError("ragged-row", f"ragged row at line {lineno}")
        try:
            rows.append([float(t) for t in toks])
        except ValueError:
            raise ParseError(
                "bad-number", f"non-numeric token at line {lineno}"
            ) from None
    if not rows:
        raise ParseError("empty-file", f"no points in {path}")
    return PointSet(np.asarray(rows))


def parse_labels(path, n):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    except OSError as e:
        raise ParseError("unreadable-input", str(e)) from None
    try:
        labels = np.asarray([int(ln.strip()) for ln in lines], dtype=np.int64)
    except ValueError:
        raise ParseError("bad-label", "labels must be integers") from None
    if labels.shape[0] != n:
        raise ParseError("bad-label", f"expected {n} labels, got {labels.shape[0]}")
    return labels


def write_points(path, pts):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in pts:
            fh.write(",".join(FLOAT_FMT % x for x in row))
            fh.write("\n")


def file_sha256(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        digest.update(fh.read())
    return digest.hexdigest()


def constants_from_overrides(pairs):
    """--set KEY=VALUE overrides onto AlgoConstants; unknown keys rejected."""
    fields = AlgoConstants.field_names()
    overrides = {}
    for item in pairs or []:
        if "=" not in item:
            raise ParseError("bad-override", f"expected KEY=VALUE, got {item!r}")
        key, val = item.split("=", 1)
        key = key.strip()
        if key not in fields:
            raise ParseError("bad-override", f"unknown constant {key!r}")
        val = val.strip()
        if key in ("tight_floor",):
            overrides[key] = None if val.lower() == "none" else int(val)
        elif key in ("solver_max_iter", "solver_plateau", "solver_restart"):
            overrides[key] = int(val)
        elif key in ("convex_nu_projected",):
            overrides[key] = val.lower() in ("1", "true", "yes")
        elif key in ("w_step",):
            overrides[key] = None if val.lower() == "none" else float(val)
        else:
            overrides[key] = float(val)
    try:
        return AlgoConstants(**overrides), overrides
    except ValueError as e:
        raise ParseError("bad-override", str(e)) from None


class Report:
    """Ordered key=value lines; floats carry 17 significant digits."""

    def __init__(self):
        self.lines = []

    def add(self, key, value):
        self.lines.append(f"{key}={fmt(value)}")

    def add_vector(self, key, vec):
        self.lines.append(f"{key}=" + " ".join(FLOAT_FMT % v for v in vec))

    def render(self):
        return "\n".join(self.lines) + "\n"

    def emit(self, path):
        text = self.render()
        if path:
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)


def _common_header(rep, args, command, extra=()):
    rep.add("command", command)
    if getattr(args, "input", None):
        rep.add("input", args.input)
        rep.add("input_sha256", file_sha256(args.input))
    rep.add("seed", args.seed)
    for key, val in extra:
        rep.add(key, val)


def _add_constants(rep, constants, overrides):
    for name in AlgoConstants.field_names():
        val = getattr(constants, name)
        if val is None:
            rep.add(f"constants.{name}", "default")
        else:
            rep.add(f"constants.{name}", val)
    rep.add("constants.overridden", ",".join(sorted(overrides)) if overrides else "none")


def _identify_report(rep, run):
    rep.add("k_hat", run.k_hat)
    rep.add("subspace_rank", run.subspace_rank)
    rep.add("flags", ",".join(run.flags) if run.flags else "none")
    if run.accepted_w is not None:
        rep.add("accepted_w", run.accepted_w)
    for i, it in enumerate(run.iterations, start=1):
        prefix = f"iter.{i}"
        if hasattr(it, "radius"):
            rep.add(f"{prefix}.seed_size", it.seed.size)
            rep.add(f"{prefix}.seed_sigma", it.seed_sigma)
            rep.add(f"{prefix}.radius", it.radius)
            rep.add(f"{prefix}.peeled", it.peeled.size)
            rep.add(f"{prefix}.peeled_sigma", it.peeled_sigma)
        else:
            rep.add(f"{prefix}.seed_size", it.seed.size)
            rep.add(f"{prefix}.base_objective", it.base_objective)
            rep.add(f"{prefix}.m_star", it.m_star)
            rep.add(f"{prefix}.objective_at_m_star", it.objective_at_m_star)
            rep.add(f"{prefix}.peeled", it.peeled.size)
            rep.add(f"{prefix}.mass_deficit", it.mass_deficit)
    rep.add("residual", run.residual.size)
    for rec in run.w_hat_trace:
        rep.add(
            f"sweep.{FLOAT_FMT % rec.w_hat}",
            f"k_hat:{rec.k_hat};failed:{rec.failed or 'none'}",
        )


def cmd_gen(args, kind):
    with open(args.input, "r", encoding="utf-8") as fh:
        text = fh.read()
    parsed_kind, spec, n, file_seed = parse_generator_spec(text)
    if parsed_kind != kind:
        raise ParseError("bad-spec", f"expected a {kind} spec file")
    seed = args.seed if args.seed is not None else file_seed
    if kind == "gmm":
        sample = sample_gaussian_mixture(spec, n, seed)
    else:
        sample = sample_sbm(spec, seed)
    if not args.output:
        raise ParseError("bad-output", "generators require --output")
    write_points(args.output, sample.points.points)
    labels_path = args.labels or (args.output + ".labels")
    with open(labels_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(str(int(l)) for l in sample.labels) + "\n")
    rep = Report()
    rep.add("command", f"gen-{kind}")
    rep.add("spec", args.input)
    rep.add("spec_sha256", file_sha256(args.input))
    rep.add("seed", seed)
    rep.add("n", sample.points.n)
    rep.add("d", sample.points.d)
    rep.add("k", len(np.unique(sample.labels)))
    rep.add("realized_min_weight", sample.realized_min_weight())
    rep.add("points_file", args.output)
    rep.add("labels_file", labels_path)
    return rep, 0, None  # report to stdout; --output holds the points


def cmd_identify_peel(args):
    ps = parse_points(args.input)
    constants, overrides = constants_from_overrides(args.set)
    rep = Report()
    _common_header(rep, args, "identify-peel")
    _add_constants(rep, constants, overrides)
    if args.w0 is not None:
        rep.add("w0", args.w0)
        run = identify_k_with_w0(ps, args.w0, constants, rng_seed=args.seed)
    else:
        rep.add("w0", "unknown")
        run = identify_k(ps, constants, rng_seed=args.seed)
    _identify_report(rep, run)
    return rep, 0


def cmd_identify_convex(args):
    if args.w0 is None:
        raise ParseError("bad-argument", "identify-convex requires --w0")
    ps = parse_points(args.input)
    constants, overrides = constants_from_overrides(args.set)
    rep = Report()
    _common_header(rep, args, "identify-convex")
    _add_constants(rep, constants, overrides)
    rep.add("w0", args.w0)
    run = identify_k_convex(ps, args.w0, constants, rng_seed=args.seed)
    _identify_report(rep, run)
    return rep, 0


def cmd_identify_exhaustive(args):
    ps = parse_points(args.input)
    constants, overrides = constants_from_overrides(args.set)
    rep = Report()
    _common_header(rep, args, "identify-exhaustive")
    _add_constants(rep, constants, overrides)
    k = exhaustive_identify(ps, constants)
    rep.add("k_hat", k)
    return rep, 0


def cmd_verify(args):
    ps = parse_points(args.input)
    if not args.labels:
        raise ParseError("bad-argument", "verify requires --labels")
    labels = parse_labels(args.labels, ps.n)
    constants, overrides = constants_from_overrides(args.set)
    rep = Report()
    _common_header(rep, args, "verify", extra=(("condition", args.condition),))
    _add_constants(rep, constants, overrides)
    if args.condition == "weak-ntsc":
        out = check_weak_ntsc(
            ps, labels, mode=args.mode, trials=args.trials,
            constants=constants, seed=args.seed,
        )
    elif args.condition == "ntsc":
        out = check_ntsc(
            ps, labels, mode=args.mode, directions=args.directions,
            trials=args.trials, constants=constants, seed=args.seed,
        )
    elif args.condition in ("weak-separation", "strong-separation"):
        kind = "weak" if args.condition == "weak-separation" else "strong"
        out = check_separation(ps, labels, args.gamma, kind)
    else:
        raise ParseError("bad-condition", args.condition)
    rep.add("holds", out.holds)
    rep.add("trials", out.trials)
    if out.witness is not None:
        for key, val in sorted(out.witness.items()):
            if isinstance(val, np.ndarray):
                rep.add_vector(f"witness.{key}", val)
            elif isinstance(val, tuple):
                rep.add(f"witness.{key}", " ".join(str(x) for x in val))
            else:
                rep.add(f"witness.{key}", val)
    return rep, 0


def cmd_bench_elbow(args):
    ps = parse_points(args.input)
    rep = Report()
    _common_header(rep, args, "bench-elbow")
    res = elbow_estimate(ps, args.kmax, restarts=args.restarts, seed=args.seed)
    rep.add("kmax", args.kmax)
    rep.add("restarts", args.restarts)
    for k, cost in res.deltas:
        rep.add(f"delta.{k}", cost)
    for k, r in res.ratios:
        rep.add(f"ratio.{k}", r)
    rep.add("k_star", res.k_star)
    return rep, 0


def parse_three_cover_file(path):
    """First line m, then one line per set: three 1-based elements."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = [ln.strip() for ln in fh.read().splitlines() if ln.strip()]
    except OSError as e:
        raise ParseError("unreadable-input", str(e)) from None
    if not lines:
        raise ParseError("empty-file", path)
    try:
        m = int(lines[0])
        sets = [tuple(int(t) for t in ln.split()) for ln in lines[1:]]
    except ValueError:
        raise ParseError("bad-number", "3-cover file must contain integers") from None
    try:
        return ThreeCoverInstance(m, sets)
    except ValueError as e:
        raise ParseError("malformed-3cover", str(e)) from None


def cmd_gadget(args):
    inst = parse_three_cover_file(args.input)
    rep = Report()
    _common_header(rep, args, "gadget-3cover")
    ps, h = build_checkntsc_instance(inst)
    decision, subset, sig = check_ntsc_decision_bruteforce(ps, h)
    cover = exact_cover_exists(inst)
    rep.add("universe", inst.universe_size)
    rep.add("sets", len(inst.sets))
    rep.add("h", h)
    rep.add("sigma_min", sig)
    rep.add("decision_sigma_le_1", decision)
    rep.add("exact_cover_exists", cover)
    rep.add("agree", decision == cover)
    if subset is not None:
        rep.add_vector("best_subset", subset)
    if args.output_points:
        write_points(args.output_points, ps.points)
        rep.add("points_file", args.output_points)
    return rep, 0


def build_parser():
    p = argparse.ArgumentParser(
        prog="kfinder",
        description="estimate the number of clusters k directly from data",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, needs_input=True):
        if needs_input:
            sp.add_argument("--input", required=True)
        sp.add_argument("--output", default=None)
        sp.add_argument("--labels", default=None)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override an algorithm constant")

    for name in ("gen-gmm", "gen-sbm"):
        sp = sub.add_parser(name, help=f"sample a {name[4:]} spec file")
        common(sp)
        sp.set_defaults(seed=None)

    sp = sub.add_parser("identify-peel", help="peeling identifier (with or without --w0)")
    common(sp)
    sp.add_argument("--w0", type=float, default=None)

    sp = sub.add_parser("identify-convex", help="convex-program identifier")
    common(sp)
    sp.add_argument("--w0", type=float, required=True)

    sp = sub.add_parser("identify-exhaustive", help="exhaustive identifier (tiny n)")
    common(sp)

    sp = sub.add_parser("verify", help="check a cluster condition")
    common(sp)
    sp.add_argument("--condition", required=True,
                    choices=["weak-ntsc", "ntsc", "weak-separation", "strong-separation"])
    sp.add_argument("--mode", choices=["exact", "sampled"], default="sampled")
    sp.add_argument("--trials", type=int, default=1000)
    sp.add_argument("--directions", type=int, default=64)
    sp.add_argument("--gamma", type=float, default=1.0)

    sp = sub.add_parser("bench-elbow", help="elbow-method baseline")
    common(sp)
    sp.add_argument("--kmax", type=int, default=8)
    sp.add_argument("--restarts", type=int, default=5)

    sp = sub.add_parser("gadget-3cover", help="3-cover reduction and decision")
    common(sp)
    sp.add_argument("--output-points", default=None)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    threads = os.environ.get("K_FINDER_THREADS")
    if threads:
        try:
            import numba

            numba.set_num_threads(max(1, int(threads)))
        except (ImportError, ValueError):
            pass
    start = time.perf_counter()
    try:
        if args.command == "gen-gmm":
            rep, code, report_path = cmd_gen(args, "gmm")
        elif args.command == "gen-sbm":
            rep, code, report_path = cmd_gen(args, "sbm")
        else:
            report_path = getattr(args, "output", None)
            if args.command == "identify-peel":
                rep, code = cmd_identify_peel(args)
            elif args.command == "identify-convex":
                rep, code = cmd_identify_convex(args)
            elif args.command == "identify-exhaustive":
                rep, code = cmd_identify_exhaustive(args)
            elif args.command == "verify":
                rep, code = cmd_verify(args)
            elif args.command == "bench-elbow":
                rep, code = cmd_bench_elbow(args)
            elif args.command == "gadget-3cover":
                rep, code = cmd_gadget(args)
            else:  # pragma: no cover
                raise ParseError("bad-command", args.command)
    except ParseError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except AlgoError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    rep.emit(report_path)
    # wall time stays out of the report file so reruns stay byte-identical
    print(f"wall_time_s={time.perf_counter() - start:.3f}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
