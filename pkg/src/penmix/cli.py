"""Command-line interface: ``penmix {simulate,fit,select,bench,profile}``.

Every command is deterministic given its flags; all randomness derives
from ``--seed``. Output files are written atomically into ``--out-dir``.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import PenmixError
from .harness import Method, default_profile_grid, profile_weight_curve, run_replications
from .init import init_from_kmeans
from .pem import EMConfig, fit_penalized, fit_standard_em
from .penalty import PenaltySpec, free_params_per_component
from .selection import lambda_grid, select_lambda
from .simdata import (
    example1_spec,
    example2_spec,
    generate,
    load_csv,
    make_rng,
    save_csv,
    single_gaussian_spec,
)

EXAMPLES = {1: example1_spec, 2: example2_spec}


def _columns(text):
    try:
        return [int(c) for c in text.split(",") if c.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated column indices, got {text!r}") from None


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="root seed (default 0)")
    common.add_argument("--out-dir", type=Path, default=Path("out"), help="output directory")

    em = argparse.ArgumentParser(add_help=False)
    em.add_argument("--max-iter", type=int, default=2000)
    em.add_argument("--tol", type=float, default=1e-8, help="relative objective change for convergence")
    em.add_argument("--prune-threshold", type=float, default=1e-4)

    pen = argparse.ArgumentParser(add_help=False)
    pen.add_argument("--penalty", choices=["logeps", "scad"], default="logeps")
    pen.add_argument("--epsilon", type=float, default=1e-6)
    pen.add_argument("--a", type=float, default=3.7, help="SCAD shape parameter")
    pen.add_argument("--m-init", type=int, default=10, help="initial number of components")

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--csv", type=Path, required=True, help="input data file")
    data.add_argument("--columns", type=_columns, default=None, help="0-based columns to use, e.g. 0,1")
    data.add_argument("--header", action="store_true", help="skip the first line")

    parser = argparse.ArgumentParser(prog="penmix", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="draw a synthetic data set")
    p.add_argument("--example", type=int, choices=sorted(EXAMPLES), required=True)
    p.add_argument("--n", type=int, default=None, help="sample size (default: the example's)")

    p = sub.add_parser("fit", parents=[common, em, pen, data], help="one penalized fit at a fixed lambda")
    p.add_argument("--lambda", dest="lam", type=float, required=True, help="0 runs classical EM")

    p = sub.add_parser("select", parents=[common, em, pen, data], help="choose lambda by BIC")
    p.add_argument("--grid-count", type=int, default=20)

    p = sub.add_parser("bench", parents=[common, em], help="replicated order-selection experiment")
    p.add_argument("--example", type=int, choices=sorted(EXAMPLES), required=True)
    p.add_argument("--method", choices=[m.value for m in Method], default="logeps")
    p.add_argument("--reps", type=int, default=50)
    p.add_argument("--m-init", type=int, default=10, help="initial components, or largest order for baselines")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--grid-count", type=int, default=20)
    p.add_argument("--epsilon", type=float, default=1e-6)
    p.add_argument("--a", type=float, default=3.7)
    p.add_argument("--workers", type=int, default=1, help="worker processes")

    p = sub.add_parser("profile", parents=[common, em], help="negative log-likelihood against a shrinking weight")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--grid-count", type=int, default=41)
    return parser


def _config(args):
    return EMConfig(max_iter=args.max_iter, rel_tol=args.tol, prune_threshold=args.prune_threshold)


def _load(args):
    return load_csv(args.csv, has_header=args.header, columns=args.columns)


def cmd_simulate(args):
    spec = EXAMPLES[args.example](seed=args.seed)
    if args.n is not None:
        spec = spec.with_n(args.n)
    X = generate(spec)
    stem = f"example{args.example}_n{spec.n}_seed{args.seed}"
    save_csv(args.out_dir / f"{stem}.csv", X)
    spec.truth.save(args.out_dir / f"{stem}_truth.json")
    print(f"wrote {spec.n} rows to {args.out_dir / (stem + '.csv')}")


def cmd_fit(args):
    X = _load(args)
    config = _config(args)
    floor, _ = config.resolve(X)
    init = init_from_kmeans(X, args.m_init, make_rng(args.seed, 0, 1), cov_floor=floor)
    if args.lam == 0:
        model, ll, trace = fit_standard_em(X, init, config, return_trace=True)
    else:
        spec = PenaltySpec.for_dim(X.shape[1], kind=args.penalty, lam=args.lam, epsilon=args.epsilon, a=args.a)
        model, trace = fit_penalized(X, init, spec, config)
    model.save(args.out_dir / "model.json")
    trace.write_csv(args.out_dir / "trace.csv")
    print(f"M={model.n_components} status={trace.status} iterations={trace.n_iter}")


def cmd_select(args):
    X = _load(args)
    n, d = X.shape
    config = _config(args)
    floor, _ = config.resolve(X)
    init = init_from_kmeans(X, args.m_init, make_rng(args.seed, 0, 1), cov_floor=floor)
    template = PenaltySpec.for_dim(d, kind=args.penalty, epsilon=args.epsilon, a=args.a)
    grid = lambda_grid(n, args.m_init, free_params_per_component(d), args.grid_count, kind=args.penalty)
    res = select_lambda(X, args.m_init, template, grid, config, init=init)
    res.write_csv(args.out_dir / "selection.csv")
    res.best_model.save(args.out_dir / "model.json")
    # refit the chosen lambda from the shared start to export its trace
    _, trace = fit_penalized(X, res.init, template.with_lambda(res.best_lambda), config)
    trace.write_csv(args.out_dir / "trace.csv")
    print(f"lambda={res.best_lambda:.6g} M={res.best_model.n_components}")


def cmd_bench(args):
    spec = EXAMPLES[args.example](seed=args.seed)
    if args.n is not None:
        spec = spec.with_n(args.n)
    if args.reps < 1:
        raise ValueError("--reps must be at least 1")
    report = run_replications(
        spec, args.method, args.reps, args.m_init, _config(args),
        grid_count=args.grid_count, workers=args.workers,
        spec_overrides={"epsilon": args.epsilon, "a": args.a},
    )
    report.write(args.out_dir, prefix=f"example{args.example}_{args.method}")
    hist = " ".join(f"{k}:{v}" for k, v in sorted(report.histogram.items()))
    print(f"method={args.method} accuracy={report.accuracy:.3f} histogram {hist} failures={report.failures}")


def cmd_profile(args):
    X = generate(single_gaussian_spec(n=args.n, seed=args.seed))
    curve = profile_weight_curve(
        X, default_profile_grid(args.grid_count), _config(args), rng=make_rng(args.seed, 0, 1)
    )
    curve.write(args.out_dir / "profile.csv")
    try:
        slope, _, r2 = curve.fit()
        print(f"points={curve.pi1.size} slope={slope:.4g} r2={r2:.4f}")
    except ValueError:
        print(f"points={curve.pi1.size}")


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "select": cmd_select,
    "bench": cmd_bench,
    "profile": cmd_profile,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.out_dir.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](args)
    except (PenmixError, OSError, ValueError) as exc:
        print(f"penmix {args.command}: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
