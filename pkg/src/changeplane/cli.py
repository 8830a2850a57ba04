"""Command-line front end.

Subcommands:

* ``test``      -- run WAST or SST on a CSV file,
* ``simulate``  -- Monte-Carlo size study for a scenario,
* ``power``     -- rejection-rate table over a kappa grid.

Exit codes: 0 success, 2 usage/data error, 3 numerical failure.  All
randomness funnels through the master ``--seed``, which is echoed in every
report; emitted numbers are independent of ``--threads``.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import weights
from .data import ColumnSpec, load_csv
from .errors import (ChangePlaneError, DataError, NumericalError,
                     ParameterError, SingularDesignError, ValidationError)
from .families import FamilyKind
from .sim import Scenario, run_power, run_size
from .sst import sst_test
from .wast import wast_test

USAGE_EXIT = 2
NUMERIC_EXIT = 3


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def _family(args) -> FamilyKind:
    return FamilyKind(args.family, tau=getattr(args, "tau", 0.5))


def _weight_spec(args):
    name = getattr(args, "weight", "std_gaussian")
    if name == "std_gaussian":
        return weights.standard_gaussian()
    if name == "gaussian":
        # default prior mu=0, Sigma=I evaluated by Monte-Carlo
        return None  # resolved later once q is known
    if name == "beta":
        return weights.beta_prior(args.beta_lambda1, args.beta_lambda2)
    if name == "uni_gaussian":
        return weights.univariate_gaussian(args.weight_mu, args.weight_sigma2)
    raise ParameterError(f"unknown weight {name!r}")


def _columns(raw: str | None) -> list[str]:
    return [c for c in (raw.split(",") if raw else []) if c]


def cmd_test(args) -> int:
    spec = ColumnSpec(
        response=args.response,
        baseline=_columns(args.baseline),
        diff=_columns(args.diff),
        grouping=_columns(args.grouping),
        add_intercept_baseline=not args.no_intercept_baseline,
        add_intercept_grouping=not args.no_intercept_grouping,
    )
    ds = load_csv(args.data, spec)
    family = _family(args)
    if args.method == "wast":
        wspec = _weight_spec(args)
        if wspec is None:
            wspec = weights.gaussian(np.zeros(ds.q), np.eye(ds.q),
                                     mc_draws=args.mc_draws, seed=args.seed)
        out = wast_test(ds, family, weight=wspec, n_boot=args.boot,
                        seed=args.seed)
        grid_info = ""
    else:
        out = sst_test(ds, family, k_directions=args.grid_k,
                       grid_per_direction=args.grid_per_direction,
                       n_resample=args.boot, seed=args.seed)
        grid_info = (f"grid_k={out.diagnostics['grid_size']} "
                     f"skipped={out.diagnostics['grid_skipped']}")

    decision = "reject" if out.p_value < args.level else "fail-to-reject"
    print(f"# seed={args.seed}")
    print(f"method={out.method} family={out.family} n={ds.n} "
          f"B={out.n_boot} {grid_info}".rstrip())
    print(f"statistic={_fmt(out.statistic)}")
    print(f"p_value={_fmt(out.p_value)}")
    print(f"decision={decision} (level={_fmt(args.level)})")
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write("method,family,n,n_boot,statistic,p_value,level,decision,seed\n")
            fh.write(f"{out.method},{out.family},{ds.n},{out.n_boot},"
                     f"{_fmt(out.statistic)},{_fmt(out.p_value)},"
                     f"{_fmt(args.level)},{decision},{args.seed}\n")
    return 0


def _scenario(args) -> Scenario:
    r, p, q = (int(v) for v in args.dims.split(","))
    return Scenario(
        family=_family(args), dims=(r, p, q), n=args.n, rho=args.rho,
        kappa=args.kappa, theta_rule=args.theta_rule,
        split_quantile=args.split_quantile, z_law=args.z_law,
        error_law=args.error_law, seed=args.seed,
    )


def _sst_kwargs(args) -> dict:
    return {"k_directions": args.grid_k,
            "grid_per_direction": args.grid_per_direction}


def cmd_simulate(args) -> int:
    sc = _scenario(args)
    methods = _columns(args.methods)
    rows = []
    for method in methods:
        print(f"running size study: method={method} family={sc.family.name} "
              f"n={sc.n} reps={args.reps} boot={args.boot}", file=sys.stderr)
        res = run_size(sc, reps=args.reps, n_boot=args.boot, level=args.level,
                       method=method, threads=args.threads,
                       sst_kwargs=_sst_kwargs(args))
        rows.append(res)
        print(f"# seed={args.seed}")
        print(f"method={method} kappa={_fmt(sc.kappa)} n={sc.n} "
              f"rate={_fmt(res['rate'])} stderr={_fmt(res['stderr'])} "
              f"reps={res['reps']}")
    out = args.output or "size.csv"
    with open(out, "w", encoding="utf-8") as fh:
        fh.write("kappa,n,method,rate,reps,stderr\n")
        for res in rows:
            fh.write(f"{_fmt(res['kappa'])},{res['n']},{res['method']},"
                     f"{_fmt(res['rate'])},{res['reps']},{_fmt(res['stderr'])}\n")
    return 0


def cmd_power(args) -> int:
    sc = _scenario(args)
    methods = tuple(_columns(args.methods))
    kappa_grid = [float(v) for v in _columns(args.kappa_grid)]
    print(f"running power study: methods={','.join(methods)} "
          f"kappas={args.kappa_grid} reps={args.reps}", file=sys.stderr)
    table = run_power(sc, kappa_grid, reps=args.reps, n_boot=args.boot,
                      level=args.level, methods=methods, threads=args.threads,
                      sst_kwargs=_sst_kwargs(args))
    print(f"# seed={args.seed}")
    for row in table.rows:
        print(f"kappa={_fmt(row['kappa'])} method={row['method']} "
              f"rate={_fmt(row['rate'])} stderr={_fmt(row['stderr'])}")
    out = args.output or "power.csv"
    with open(out, "w", encoding="utf-8") as fh:
        table.write_csv(fh)
    return 0


def _add_family_args(p):
    p.add_argument("--family", required=True,
                   choices=["gaussian", "binomial", "poisson", "probit",
                            "quantile", "semiparametric"])
    p.add_argument("--tau", type=float, default=0.5,
                   help="quantile level (quantile family only)")


def _add_study_args(p):
    p.add_argument("--dims", default="2,2,3", help="r,p,q")
    p.add_argument("--n", type=int, default=300)
    p.add_argument("--rho", type=float, default=0.0)
    p.add_argument("--kappa", type=float, default=0.0)
    p.add_argument("--theta-rule", default="equispaced",
                   choices=["equispaced", "one_two", "uniform"])
    p.add_argument("--split-quantile", type=float, default=0.65)
    p.add_argument("--z-law", default="std_normal")
    p.add_argument("--error-law", default="std_normal",
                   choices=["std_normal", "t3", "cauchy"])
    p.add_argument("--reps", type=int, default=300)
    p.add_argument("--boot", type=int, default=200)
    p.add_argument("--level", type=float, default=0.05)
    p.add_argument("--methods", default="wast", help="comma list: wast,sst")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--grid-k", type=int, default=1000)
    p.add_argument("--grid-per-direction", type=int, default=1)
    p.add_argument("--output", default=None)
    p.add_argument("--config", default=None,
                   help="key=value file supplying defaults (flags win)")


def _load_config(path: str) -> dict:
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DataError(f"{path}:{lineno}: expected key=value")
            key, val = (s.strip() for s in line.split("=", 1))
            values[key.replace("-", "_")] = val
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="changeplane",
        description="Subgroup / change-plane tests (WAST and SST)")
    sub = parser.add_subparsers(dest="command", required=True)

    p_test = sub.add_parser("test", help="run a hypothesis test on a CSV file")
    p_test.add_argument("data")
    p_test.add_argument("--method", choices=["wast", "sst"], default="wast")
    _add_family_args(p_test)
    p_test.add_argument("--response", required=True)
    p_test.add_argument("--baseline", default="", help="comma list of columns")
    p_test.add_argument("--diff", required=True, help="comma list of columns")
    p_test.add_argument("--grouping", default="", help="comma list of columns")
    p_test.add_argument("--no-intercept-baseline", action="store_true")
    p_test.add_argument("--no-intercept-grouping", action="store_true")
    p_test.add_argument("--weight", default="std_gaussian",
                        choices=["std_gaussian", "gaussian", "beta", "uni_gaussian"])
    p_test.add_argument("--mc-draws", type=int, default=10000)
    p_test.add_argument("--beta-lambda1", type=float, default=1.0)
    p_test.add_argument("--beta-lambda2", type=float, default=1.0)
    p_test.add_argument("--weight-mu", type=float, default=0.0)
    p_test.add_argument("--weight-sigma2", type=float, default=1.0)
    p_test.add_argument("--boot", type=int, default=1000)
    p_test.add_argument("--grid-k", type=int, default=1000)
    p_test.add_argument("--grid-per-direction", type=int, default=1)
    p_test.add_argument("--level", type=float, default=0.05)
    p_test.add_argument("--seed", type=int, default=0)
    p_test.add_argument("--output", default=None)
    p_test.set_defaults(func=cmd_test)

    p_sim = sub.add_parser("simulate", help="Monte-Carlo size study")
    _add_family_args(p_sim)
    _add_study_args(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_pow = sub.add_parser("power", help="rejection rates over a kappa grid")
    _add_family_args(p_pow)
    _add_study_args(p_pow)
    p_pow.add_argument("--kappa-grid", required=True,
                       help="comma list of effect sizes")
    p_pow.set_defaults(func=cmd_power)
    return parser


_TYPED = {"n": int, "reps": int, "boot": int, "threads": int, "seed": int,
          "grid_k": int, "grid_per_direction": int,
          "rho": float, "kappa": float, "level": float, "tau": float,
          "split_quantile": float}


def main(argv=None) -> int:
    parser = build_parser()
    # config file supplies defaults; explicit flags override it
    pre, _ = parser.parse_known_args(argv)
    if getattr(pre, "config", None):
        try:
            cfg = _load_config(pre.config)
        except OSError as exc:
            print(f"error: cannot read config: {exc}", file=sys.stderr)
            return USAGE_EXIT
        typed = {k: _TYPED.get(k, str)(v) for k, v in cfg.items()}
        for p in parser._subparsers._group_actions[0].choices.values():
            known = {a.dest for a in p._actions}
            p.set_defaults(**{k: v for k, v in typed.items() if k in known})
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except (DataError, ValidationError, ParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except (NumericalError, SingularDesignError, np.linalg.LinAlgError,
            ChangePlaneError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return NUMERIC_EXIT


if __name__ == "__main__":
    sys.exit(main())
