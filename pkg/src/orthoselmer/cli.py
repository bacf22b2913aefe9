"""Command-line front end.

Every command prints one JSON document (or a CSV table) holding the full
configuration, the seed and the package version next to the result.
Configuration may come from a flat key=value file (--config); flags win.
"""

import argparse
import json
import sys
from fractions import Fraction

import numpy as np

from . import __version__
from . import bklpr, kernelmodel, markov
from .distrib import Distribution, compare_models, dumps, moment
from .modring import Modulus
from .orthogroup import ANY, BOTH, CosetSpec, split_table

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_FAILED = 3


class ValidationError(ValueError):
    pass


def read_config(path):
    """Flat key=value lines; '#' starts a comment; dashes in keys become underscores."""
    cfg = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValidationError(f"{path}:{lineno}: expected key=value")
            k, v = (s.strip() for s in line.split("=", 1))
            cfg[k.replace("-", "_")] = v
    return cfg


def parse_q(text, d, modulus):
    """CosetSpec spinor targets from q (a prime power) or a class vector '3:1,5:0'."""
    if text is None:
        return None
    text = str(text)
    if ":" in text:
        bits = {}
        for item in text.split(","):
            ell, bit = item.split(":")
            if int(bit) not in (0, 1):
                raise ValidationError("square-class bits must be 0 or 1")
            bits[int(ell)] = int(bit)
        odd = {ell for ell in Modulus.of(modulus).primes if ell != 2}
        if set(bits) != odd:
            raise ValidationError(f"class vector must cover the odd primes {sorted(odd)}")
        return CosetSpec.from_classes(bits).spinor
    q = int(text)
    fac = Modulus.of(q).factorization if q > 1 else ()
    if len(fac) != 1:
        raise ValidationError(f"q={q} is not a prime power")
    if np.gcd(q, 2 * Modulus.of(modulus).n) != 1:
        raise ValidationError(f"gcd(q, 2n) must be 1 (q={q}, n={modulus})")
    return CosetSpec.from_height(d, q, modulus).spinor


def make_spec(args, modulus, d):
    """Dickson target defaults to 'both' when q is given and to no condition otherwise."""
    default = "both" if args.q is not None else "any"
    dickson = {"both": BOTH, "any": ANY, "0": 0, "1": 1}[str(args.dickson or default)]
    return CosetSpec(dickson, parse_q(args.q, d, modulus))


def frac_json(x):
    x = Fraction(x)
    return [x.numerator, x.denominator]


# --- commands -------------------------------------------------------------


def cmd_kernel_dist(args):
    if args.n is None:
        raise ValidationError("--n is required")
    if (args.d is None) == (args.m is None):
        raise ValidationError("give exactly one of --d and --m")
    d = args.d if args.d is not None else 1
    spec = make_spec(args, args.n, d)
    p = kernelmodel.KernelDistParams(args.n, m=args.m, d=args.d, coset=spec, mode=args.mode,
                                     samples=args.samples, seed=args.seed,
                                     threads=args.threads, budget=args.budget,
                                     joint=args.joint)
    D = kernelmodel.kernel_distribution(p)
    moms = []
    for j in range(1, args.moments + 1):
        moms.append({"j": j, "value": frac_json(moment(D, j))})
    return {"params": p.to_json(), "mode": p.mode, "distribution": D, "moments": moms}


def cmd_rs_exact(args):
    ell, N = args.ell, args.N
    if ell is None or N is None:
        raise ValidationError("--ell and --N are required")
    vs = [args.v] if args.v is not None else list(range(2 * N + 1))
    rows = [[v, *frac_json(kernelmodel.rudvalis_shinoda_pmf(ell, N, v))] for v in vs]
    out = {"pmf": rows, "total": frac_json(sum(Fraction(r[1], r[2]) for r in rows))}
    if args.v is None:
        out["distribution"] = Distribution.exact(kernelmodel.rudvalis_shinoda_law(ell, N),
                                                 {"ell": ell, "N": N})
    if args.limit:
        out["limit"] = [[v, kernelmodel.rudvalis_shinoda_limit(ell, v, args.depth)] for v in vs]
    return out


def cmd_moments(args):
    if args.ell is None or args.j is None:
        raise ValidationError("--ell and --j are required")
    out = {"M_j": kernelmodel.moments_closed_form(args.ell, args.j)}
    if args.r is not None:
        out["edge"] = {c: kernelmodel.edge_moment(args.ell, args.r, args.j, c)
                       for c in ("H", "O-H")}
    if args.enumerate:
        m = args.r if args.r is not None else args.m
        if m is None:
            raise ValidationError("--enumerate needs --r or --m")
        out["enumerated"] = {sel: frac_json(kernelmodel.enumerated_moment(args.ell, m, args.j, sel))
                             for sel in ("O", "H", "O-H")}
    return out


def cmd_orbit_count(args):
    if args.ell is None or args.m is None:
        raise ValidationError("--ell and --m are required")
    out = {"orbits": kernelmodel.orbit_count_recursive(args.ell, args.m)}
    if args.table:
        out["f"] = kernelmodel.orbit_count_table(args.ell, args.m)
    if args.burnside is not None:
        out["burnside"] = {"rank": 2 * args.burnside, "selector": args.selector,
                           "orbits": kernelmodel.burnside_orbit_count(
                               args.ell, args.burnside, args.m, args.selector)}
    return out


def cmd_coset_pgf(args):
    if args.ell is None or args.r is None:
        raise ValidationError("--ell and --r are required")
    G = kernelmodel.coset_pgf(args.ell, args.r, args.coset)
    out = {"coset": args.coset, "coefficients": [frac_json(c) for c in G.c],
           "is_pgf": G.is_pgf()}
    if args.enumerate:
        E = kernelmodel.enumerated_pgf(args.ell, args.r, args.coset)
        out["enumerated"] = [frac_json(c) for c in E.c]
        out["match"] = E == G
    return out


def cmd_bklpr_sample(args):
    if args.model == "joint":
        if args.n is None:
            raise ValidationError("--n is required")
        D = bklpr.bklpr_joint(args.n, args.m or 10, args.samples, args.seed, args.buffer,
                              args.threads)
        return {"model": "joint", "distribution": D}
    if args.ell is None:
        raise ValidationError("--ell is required")
    if args.model == "alternating":
        if args.r is None:
            raise ValidationError("--r is required")
        D = bklpr.alternating_distribution(args.m or 10, args.r, args.ell, args.e, args.samples,
                                           args.seed, args.buffer, args.threads)
        return {"model": "alternating", "distribution": D}
    D, chains = bklpr.intersection_distribution(args.m or 10, args.ell, args.e, args.samples,
                                                args.seed, args.threads)
    out = {"model": "intersection", "distribution": D,
           "rank": D.pushforward(lambda k: k[0])}
    if args.emit_chains:
        out["chains"] = chains.tolist()
    return out


def cmd_markov_verify(args):
    ell, e = args.ell, args.e
    if ell is None:
        raise ValidationError("--ell is required")
    if e < 2:
        raise ValidationError("--e must be at least 2 to have transitions")
    m = args.m or 2
    if args.source == "enumeration":
        tab = split_table(m, ell, e)
        chains = np.stack([(tab["exps"] >= j).sum(axis=1) for j in range(1, e + 1)], axis=1)
        vals, cnt = np.unique(chains, axis=0, return_counts=True)
        rep = markov.verify_markov(vals, ell, weights=cnt, exact=True, rank=2 * m)
    elif args.source == "intersection":
        exps = bklpr.sample_intersection_exps(m, ell, e, args.samples, args.seed, args.threads)
        chains = np.stack([(exps >= j).sum(axis=1) for j in range(1, e + 1)], axis=1)
        rep = markov.verify_markov(chains, ell, alpha=args.alpha, rank=m)
    else:
        from .orthogroup import sample_coset_invariants
        inv = sample_coset_invariants(m, ell**e, CosetSpec.full(), args.samples, args.seed,
                                      args.threads)
        x = inv["exps"][ell]
        chains = np.stack([(x >= j).sum(axis=1) for j in range(1, e + 1)], axis=1)
        rep = markov.verify_markov(chains, ell, alpha=args.alpha, rank=2 * m)
    return {"source": args.source, "report": rep, "_fail": not rep["pass"]}


def cmd_compare(args):
    if not args.a or not args.b:
        raise ValidationError("--a and --b are required")
    A, B = (_load_distribution(p) for p in (args.a, args.b))
    tol = "auto" if args.tolerance == "auto" else float(args.tolerance)
    rep = compare_models(A, B, tol)
    return {"report": rep, "_fail": not rep["pass"]}


def _load_distribution(path):
    with open(path) as fh:
        obj = json.load(fh)
    if "distribution" in obj:
        obj = obj["distribution"]
    return Distribution.from_json(obj)


COMMANDS = {
    "kernel-dist": cmd_kernel_dist,
    "rs-exact": cmd_rs_exact,
    "moments": cmd_moments,
    "orbit-count": cmd_orbit_count,
    "coset-pgf": cmd_coset_pgf,
    "bklpr-sample": cmd_bklpr_sample,
    "markov-verify": cmd_markov_verify,
    "compare": cmd_compare,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value file; flags override it")
    common.add_argument("--out", help="write here instead of stdout")
    common.add_argument("--format", choices=["json", "csv"], default="json")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=None)

    p = argparse.ArgumentParser(prog="orthoselmer",
                                description="Random kernel and BKLPR model computations.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("kernel-dist", parents=[common], help="law of ker(g - 1)")
    s.add_argument("--n", type=int)
    s.add_argument("--d", type=int)
    s.add_argument("--m", type=int)
    s.add_argument("--q", help="prime power, or per-prime classes like 3:1,5:0")
    s.add_argument("--dickson", choices=["both", "any", "0", "1"])
    s.add_argument("--mode", choices=["exact", "mc", "closed"], default="exact")
    s.add_argument("--samples", type=int, default=0)
    s.add_argument("--budget", type=int, default=10**8)
    s.add_argument("--joint", action="store_true", help="key by (rank bit, class)")
    s.add_argument("--moments", type=int, default=2)

    s = sub.add_parser("rs-exact", parents=[common], help="exact kernel-dimension law")
    s.add_argument("--ell", type=int)
    s.add_argument("--N", type=int)
    s.add_argument("--v", type=int)
    s.add_argument("--limit", action="store_true")
    s.add_argument("--depth", type=int, default=60)

    s = sub.add_parser("moments", parents=[common], help="M_j and edge moments")
    s.add_argument("--ell", type=int)
    s.add_argument("--j", type=int)
    s.add_argument("--r", type=int)
    s.add_argument("--m", type=int)
    s.add_argument("--enumerate", action="store_true")

    s = sub.add_parser("orbit-count", parents=[common], help="orbits on V^m")
    s.add_argument("--ell", type=int)
    s.add_argument("--m", type=int)
    s.add_argument("--table", action="store_true")
    s.add_argument("--burnside", type=int, metavar="HALF_RANK",
                   help="also count by averaging fixed points over this group")
    s.add_argument("--selector", default="O",
                   choices=["O", "SO", "H", "O-H", "Omega", "A", "B", "C", "trivial"])

    s = sub.add_parser("coset-pgf", parents=[common], help="closed-form coset pgf")
    s.add_argument("--ell", type=int)
    s.add_argument("--r", type=int)
    s.add_argument("--coset", default="O",
                   choices=["O", "SO", "H", "O-H", "O-SO", "Omega", "A", "B", "C"])
    s.add_argument("--enumerate", action="store_true")

    s = sub.add_parser("bklpr-sample", parents=[common], help="BKLPR model samples")
    s.add_argument("--model", choices=["joint", "intersection", "alternating"], default="joint")
    s.add_argument("--n", type=int)
    s.add_argument("--ell", type=int)
    s.add_argument("--e", type=int, default=1)
    s.add_argument("--m", type=int)
    s.add_argument("--r", type=int)
    s.add_argument("--buffer", type=int, default=bklpr.BUFFER)
    s.add_argument("--samples", type=int, default=10000)
    s.add_argument("--emit-chains", action="store_true")

    s = sub.add_parser("markov-verify", parents=[common], help="check the corank chain")
    s.add_argument("--source", choices=["enumeration", "kernel-mc", "intersection"],
                   default="enumeration")
    s.add_argument("--ell", type=int)
    s.add_argument("--e", type=int, default=2)
    s.add_argument("--m", type=int)
    s.add_argument("--samples", type=int, default=10000)
    s.add_argument("--alpha", type=float, default=1e-3)

    s = sub.add_parser("compare", parents=[common], help="compare two saved distributions")
    s.add_argument("--a")
    s.add_argument("--b")
    s.add_argument("--tolerance", default="auto")
    return p


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        cfg = read_config(args.config)
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = set(cfg) - known
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        for a in sub._actions:
            if a.dest in cfg and isinstance(a, argparse._StoreTrueAction):
                cfg[a.dest] = cfg[a.dest].lower() in ("1", "true", "yes")
        sub.set_defaults(**cfg)
        args = parser.parse_args(argv)
    return args


def _config_of(args):
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("out", "config")}


def render(args, result):
    if args.format == "csv":
        dist = result.get("distribution")
        if isinstance(dist, Distribution):
            return dist.to_csv()
        raise ValidationError("CSV output is only available for distributions")
    body = {"version": __version__, "command": args.command, "config": _config_of(args),
            "seed": args.seed}
    for k, v in result.items():
        if k.startswith("_"):
            continue
        body[k] = v.to_json() if isinstance(v, Distribution) else v
    return dumps(body) + "\n"


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    try:
        args = parse_args(argv)
        if args.threads is not None and args.threads < 1:
            raise ValidationError("--threads must be positive")
        if getattr(args, "samples", 1) is not None and getattr(args, "samples", 1) < 0:
            raise ValidationError("--samples must be non-negative")
        if getattr(args, "budget", 1) <= 0:
            raise ValidationError("--budget must be positive")
        result = COMMANDS[args.command](args)
        text = render(args, result)
    except (ValidationError, ValueError, TypeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (RuntimeError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_FAILED if result.get("_fail") else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
