"""Command-line entry point.

Exit codes: 0 success, 2 precondition violation, 3 stage failure.
"""

import argparse
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import __version__
from .ap_count import ap_density
from .dense_model import extract_dense_model
from .discrepancy import box_norm_bound, discrepancy_search
from .errors import NoConvergence, PreconditionError, StageError, TransferenceError
from .linear_forms import lfc_exact, lfc_monte_carlo, sweep_patterns
from .pipeline import PipelineConfig, run_pipeline
from .residue import linear_form, make_group
from .weights import GeneratorSpec, generate, load, save

EXIT_OK, EXIT_PRECONDITION, EXIT_STAGE = 0, 2, 3


def _emit(obj, args, name=None):
    text = json.dumps(obj, indent=2)
    if name and args.out_dir:
        Path(args.out_dir).mkdir(parents=True, exist_ok=True)
        (Path(args.out_dir) / name).write_text(text + "\n")
    print(text)


def cmd_gen(args):
    g = make_group(args.N, args.k)
    nu, f = generate(GeneratorSpec(args.kind, args.p, args.delta, args.seed), g)
    out = Path(args.out_dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    ext = "csv" if args.format == "csv" else "json"
    save(nu, out / f"nu.{ext}", args.format)
    save(f, out / f"f.{ext}", args.format)
    _emit({"group": g.to_dict(), "kind": args.kind, "p": args.p, "delta": args.delta,
           "seed": args.seed, "support": int(np.count_nonzero(nu.values)),
           "files": [f"nu.{ext}", f"f.{ext}"]}, args)


def cmd_lfc(args):
    nu = load(args.nu)
    patterns = sweep_patterns(nu.group.k, args.patterns, args.seed)
    if args.exact:
        reports = [lfc_exact(nu, p) for p in patterns]
    else:
        reports = [lfc_monte_carlo(nu, p, args.samples, args.seed, workers=args.threads)
                   for p in patterns]
    _emit([r.to_dict() for r in reports], args, "lfc.json")


def cmd_disc(args):
    g_fn, gt_fn = load(args.g), load(args.gtilde)
    if g_fn.group != gt_fn.group:
        raise PreconditionError("--g and --gtilde live on different groups")
    form = linear_form(g_fn.group, args.j)
    rep = discrepancy_search(g_fn, gt_fn, form, restarts=args.restarts, seed=args.seed)
    _emit(rep.to_dict(include_witness=not args.no_witness), args, "disc.json")


def cmd_boxnorm(args):
    nu = load(args.nu)
    rep = box_norm_bound(nu, linear_form(nu.group, args.j), samples=args.samples, seed=args.seed)
    _emit(rep.to_dict(), args, "boxnorm.json")


def cmd_model(args):
    f, nu = load(args.f), load(args.nu)
    form = linear_form(f.group, args.j)
    status = EXIT_OK
    try:
        result = extract_dense_model(f, nu, form, args.eps, args.restarts, args.max_iters, args.seed)
    except NoConvergence as exc:
        result = exc.result
        status = EXIT_STAGE
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save(result.f_model, out, args.format)
    audit = result.to_dict()
    out.with_name(out.stem + ".audit.json").write_text(json.dumps(audit, indent=2) + "\n")
    _emit(audit, args)
    return status


def cmd_count(args):
    f = load(args.f)
    k = args.k or f.group.k
    _emit(ap_density(f, k, args.method).to_dict(), args, "count.json")


def cmd_pipeline(args):
    cfg = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    for fld in fields(PipelineConfig):
        value = getattr(args, fld.name, None)
        if value is not None:
            setattr(cfg, fld.name, value)
    report = run_pipeline(cfg)
    print(report.to_json(), end="")


def cmd_version(args):
    print(__version__)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--threads", type=int, default=None)
    common.add_argument("--out-dir", dest="out_dir", default=None)
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="transference", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[common], help="generate nu and f")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--kind", default="random_sparse",
                   choices=("uniform", "random_sparse", "planted_subset", "interval_adversary"))
    p.add_argument("--p", type=float, default=1.0)
    p.add_argument("--delta", type=float, default=1.0)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("lfc", parents=[common], help="linear forms condition sweep")
    p.add_argument("--nu", required=True)
    p.add_argument("--patterns", type=int, default=16)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--exact", action="store_true")
    p.set_defaults(func=cmd_lfc)

    p = sub.add_parser("disc", parents=[common], help="distinguisher search for (g, g~)")
    p.add_argument("--g", required=True)
    p.add_argument("--gtilde", required=True)
    p.add_argument("--j", type=int, default=1)
    p.add_argument("--restarts", type=int, default=4)
    p.add_argument("--no-witness", action="store_true")
    p.set_defaults(func=cmd_disc)

    p = sub.add_parser("boxnorm", parents=[common], help="box-norm bound for (nu, 1)")
    p.add_argument("--nu", required=True)
    p.add_argument("--j", type=int, default=1)
    p.add_argument("--samples", type=int, default=200_000)
    p.set_defaults(func=cmd_boxnorm)

    p = sub.add_parser("model", parents=[common], help="extract a dense model")
    p.add_argument("--f", required=True)
    p.add_argument("--nu", required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--j", type=int, default=1)
    p.add_argument("--max-iters", dest="max_iters", type=int, default=500)
    p.add_argument("--restarts", type=int, default=4)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_model)

    p = sub.add_parser("count", parents=[common], help="k-AP density")
    p.add_argument("--f", required=True)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--method", choices=("direct", "fourier"), default="direct")
    p.set_defaults(func=cmd_count)

    p = sub.add_parser("pipeline", parents=[common], help="run the whole chain")
    p.add_argument("--config", default=None, help="PipelineConfig as JSON; flags override it")
    p.add_argument("--N", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--p", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--epsilon", "--eps", dest="epsilon", type=float)
    p.add_argument("--samples", type=int)
    p.add_argument("--restarts", type=int)
    p.add_argument("--max-iters", dest="max_iters", type=int)
    p.add_argument("--generator", choices=("uniform", "random_sparse", "interval_adversary"))
    p.add_argument("--patterns", type=int)
    p.add_argument("--lfc-mode", dest="lfc_mode", choices=("auto", "exact", "monte_carlo"))
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("version", parents=[common], help="print the version")
    p.set_defaults(func=cmd_version)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command != "pipeline":
        if args.seed is None:
            args.seed = 0
        if args.threads is None:
            args.threads = 1
    try:
        return args.func(args) or EXIT_OK
    except PreconditionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION if isinstance(exc.cause, PreconditionError) else EXIT_STAGE
    except TransferenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
