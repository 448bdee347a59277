"""Command-line front end.

Exit codes: 0 success (all verdicts PASS), 1 some verdict FAIL, 2 usage or
configuration error. Every option may also come from ``--config FILE`` with
``key=value`` lines (dashes or underscores); command-line flags win.
"""

from __future__ import annotations

import argparse
import sys
from collections.abc import Sequence

import numpy as np

from . import harness
from .dist_core import DistributionError, LatticeDist, ModelParams, parse_pairs
from .evolution import StepLaw, evolve, find_monotonicity_violation
from .hj_reference import (
    beta_limit_cdf,
    extended_limit_cdf,
    hopf_lax_numeric,
    legendre_closed,
    mixture_limit_cdf,
    u_ab_closed,
)
from .montecarlo import TrajectoryConfig, sample_ensemble, sample_particle_system


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _ints(text: str) -> list[int]:
    return [int(float(v)) for v in text.replace(";", ",").split(",") if v.strip()]


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]


def _step(text: str) -> StepLaw:
    pairs = []
    for chunk in text.split(","):
        if chunk.strip():
            site, _, p = chunk.rpartition(":")
            pairs.append((int(site), float(p)))
    return StepLaw(pairs)


def _model(a) -> ModelParams:
    return ModelParams(float(a.m) if not float(a.m).is_integer() else int(float(a.m)), a.q)


def _out(a, text: str) -> None:
    if a.out:
        harness.atomic_write_text(a.out, text)
    else:
        sys.stdout.write(text)


def _pmf_csv(d: LatticeDist) -> str:
    lines = ["site,mass"]
    if d.mass_neg_inf:
        lines.append(f"-inf,{d.mass_neg_inf!r}")
    lines += [f"{k},{p!r}" for k, p in d.items()]
    if d.mass_pos_inf:
        lines.append(f"+inf,{d.mass_pos_inf!r}")
    return "\n".join(lines) + "\n"


def _report(a, reports) -> int:
    for r in reports:
        if a.outdir:
            r.write(a.outdir)
        print(r.summary())
    return 0 if all(r.passed for r in reports) else 1


# subcommands


def cmd_evolve(a) -> int:
    params = _model(a)
    step = _step(a.step) if a.step else None
    _out(a, _pmf_csv(evolve(parse_pairs(a.init), step, params, a.n)))
    return 0


def cmd_simulate(a) -> int:
    params = _model(a)
    cfg = TrajectoryConfig(
        params=params,
        init=parse_pairs(a.init),
        horizon=a.n,
        n_trajectories=a.trajectories,
        seed=a.seed,
        step=_step(a.step) if a.step else None,
    )
    if a.particles:
        d = sample_particle_system(cfg, a.particles)
    else:
        d = sample_ensemble(cfg)
    _out(a, _pmf_csv(d))
    return 0


def cmd_reference(a) -> int:
    params = _model(a)
    kind = a.kind
    if kind == "beta":
        v = beta_limit_cdf(a.x, params)
    elif kind == "extended":
        v = extended_limit_cdf(a.x, a.a, a.b, params)
    elif kind == "uab":
        v = u_ab_closed(a.x, a.t, a.a, a.b, params)
    elif kind == "mixture":
        pi = _floats(a.pi)
        v = mixture_limit_cdf(a.x, len(pi), pi, params)
    elif kind == "legendre":
        v = legendre_closed(a.x, params)
    elif kind == "hopflax":
        u0 = harness.PiecewiseLinearCDF.parse(a.u0)
        v = hopf_lax_numeric(u0, a.x, a.t, params)
    else:  # pragma: no cover - argparse restricts choices
        raise UsageError(f"unknown kind {kind}")
    print(repr(float(v)))
    return 0


def cmd_converge(a) -> int:
    u0 = harness.PiecewiseLinearCDF.parse(a.u0)
    return _report(a, [harness.run_lipschitz_convergence(u0, _model(a), _ints(a.N_list), a.T)])


def cmd_dirac(a) -> int:
    return _report(a, [harness.run_dirac_limit(_model(a), parse_pairs(a.init), _ints(a.n_list), a.tol)])


def cmd_lattice(a) -> int:
    pi = _floats(a.pi)
    g = a.g if a.g is not None else len(pi)
    return _report(a, [harness.run_lattice_limit(_model(a), g, pi, a.n, a.tol)])


def cmd_extended(a) -> int:
    return _report(a, [harness.run_extended_limit(_model(a), a.a, a.b, a.n, tolerance=a.tol)])


def cmd_sandwich(a) -> int:
    init = parse_pairs(a.init) if a.init else None
    return _report(a, [harness.run_sandwich_demo(_model(a), a.eps, a.n, init=init)])


def cmd_lofm(a) -> int:
    return _report(a, [harness.run_l_of_m_exponent(_model(a), a.l, _ints(a.n_list))])


def cmd_suite(a) -> int:
    names = [v.strip() for v in a.only.split(",")] if a.only else None
    return _report(a, harness.run_suite(names, a.workers))


def cmd_counterexample(a) -> int:
    params = _model(a)
    found = find_monotonicity_violation(_step(a.step), params, a.trials, a.seed)
    if found is None:
        print(f"no violation found in {a.trials} trials")
        return 0
    ks = np.arange(found.offset, found.offset + found.lower.size)
    lines = [
        f"source={found.source} site={found.site} gap={found.gap!r}",
        f"image_lower[{found.site}]={found.image_lower!r} > image_upper[{found.site}]={found.image_upper!r}",
        "site,F_lower,F_upper",
    ]
    lines += [f"{k},{float(lo)!r},{float(hi)!r}" for k, lo, hi in zip(ks, found.lower, found.upper)]
    _out(a, "\n".join(lines) + "\n")
    return 0


# parser


def _common(p, m_default=None, q_default=0.5):
    p.add_argument("--m", type=float, default=m_default, help="cooperation exponent (>= 1)")
    p.add_argument("--q", type=float, default=q_default, help="move probability in (0, 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="coopmotion", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="file of key=value lines; flags override it")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("evolve", help="exact law after n steps, as site,mass CSV")
    _common(p, 1)
    p.add_argument("--init", default="0:1", help='site:mass pairs, e.g. "0:0.5,+inf:0.5"')
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--step", help="step law as site:prob pairs (default Bernoulli(q))")
    p.add_argument("--out")
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("simulate", help="Monte Carlo endpoint law as site,mass CSV")
    _common(p, 1)
    p.add_argument("--init", default="0:1")
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--step")
    p.add_argument("--trajectories", type=int, default=10_000)
    p.add_argument("--particles", type=int, help="use the interacting particle system instead")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reference", help="evaluate a reference solution at one point")
    _common(p, 1)
    p.add_argument("--kind", default="beta",
                   choices=["beta", "extended", "uab", "mixture", "legendre", "hopflax"])
    p.add_argument("--x", type=float, default=1.0)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--a", type=float, default=0.0)
    p.add_argument("--b", type=float, default=1.0)
    p.add_argument("--pi", default="1")
    p.add_argument("--u0", default="0:0,1:1", help="piecewise-linear knots x:y")
    p.set_defaults(func=cmd_reference)

    def experiment(name, func, helptext):
        p = sub.add_parser(name, help=helptext)
        _common(p, 1)
        p.add_argument("--outdir", help="write <experiment>.json and .csv here")
        p.set_defaults(func=func)
        return p

    p = experiment("converge", cmd_converge, "Lipschitz-data convergence run")
    p.add_argument("--u0", default="0:0,1:1")
    p.add_argument("--N-list", dest="N_list", default="1000,10000,100000")
    p.add_argument("--T", type=float, default=1.0)

    p = experiment("dirac", cmd_dirac, "Beta-limit run for integer-supported init")
    p.add_argument("--init", default="0:1")
    p.add_argument("--n-list", dest="n_list", default="100,1000,10000")
    p.add_argument("--tol", type=float, default=harness.LIMIT_TOL)

    p = experiment("lattice", cmd_lattice, "Beta-mixture limit for the g-scaled step")
    p.add_argument("--g", type=int)
    p.add_argument("--pi", default="0.5,0.3,0.2")
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--tol", type=float, default=harness.LIMIT_TOL)

    p = experiment("extended", cmd_extended, "limit with atoms at -inf and +inf")
    p.add_argument("--a", type=float, default=0.25)
    p.add_argument("--b", type=float, default=0.75)
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--tol", type=float, default=harness.LIMIT_TOL)

    p = experiment("sandwich", cmd_sandwich, "ordering check against explicit solutions")
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--init")

    p = experiment("lofm", cmd_lofm, "median growth exponent under the l-of-m rule")
    p.set_defaults(m=2)
    p.add_argument("--l", type=int, default=1)
    p.add_argument("--n-list", dest="n_list", default="100,1000,10000,100000")

    p = sub.add_parser("suite", help="run the default experiment set in parallel")
    p.add_argument("--only", help="comma-separated experiment names")
    p.add_argument("--workers", type=int)
    p.add_argument("--outdir")
    p.set_defaults(func=cmd_suite)

    p = sub.add_parser("counterexample", help="search for an order-reversing CDF pair")
    _common(p, 1)
    p.add_argument("--step", required=True, help='step law, e.g. "0:0.5,2:0.5"')
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_counterexample)
    return parser


def read_config(path: str) -> dict[str, str]:
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            values[key.strip().replace("-", "_")] = value.strip()
    return values


def _apply_config(argv: list[str]) -> list[str]:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    if not known.config:
        return argv
    try:
        cfg = read_config(known.config)
    except OSError as exc:
        raise UsageError(f"cannot read config: {exc}") from None
    # config entries become flags placed before the command-line ones, so the
    # latter win
    command = cfg.pop("command", None)
    if rest and not rest[0].startswith("-"):
        command, rest = rest[0], rest[1:]
    if command is None:
        raise UsageError("no subcommand given")
    flags = []
    for key, value in cfg.items():
        flags += [f"--{key.replace('_', '-')}", value]
    return [command, *flags, *rest]


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(_apply_config(argv))
        if args.command is None:
            raise UsageError(parser.format_usage().strip())
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 2
    except (DistributionError, ValueError, OSError) as exc:
        print(f"coopmotion: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
