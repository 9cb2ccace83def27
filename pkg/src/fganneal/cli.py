"""Batch command line: curves and reports as CSV/JSON, with rendered figures.

Subcommands: growth-rate, annealed, stability, oracle, rs, moments.
Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 budget
exceeded.  Values are nats by default; --bits rescales display output only.
"""

import argparse
import json
import math
import os
import sys
from fractions import Fraction

import numpy as np

from . import __version__
from .bp import SolveOptions, solve_irregular, solve_poisson, solve_regular
from .counting import exact_annealed_finite, exhaustive_E_Z, finite_expected_z
from .ensembles import (FieldSpec, IrregularSpec, PoissonSpec, RandomFieldSpec,
                        RegularSpec, design_rate)
from .errors import BudgetExceeded, DegenerateMessage, Infeasible, NoStationaryPoint, SolverAbort
from .factors import (all_ones_factor, binary_csp_factor, default_alphabet,
                      equality_factor, load_factor_table, not_equal_factor,
                      parity_check_factor)
from .free_energy import (annealed_field, annealed_random_field,
                          annealed_regular, growth_rate_curve, moment_exponent)
from .popdyn import PdOptions, check_annealed_rs_equality, rs_fixed_points
from .stability import binary_csp_stability_fraction, paramagnetic_stability

_LN2 = math.log(2.0)


class ConfigError(ValueError):
    pass


def _fmt(x):
    """12 significant digits, '.' decimal separator."""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return f"{x:.12g}"
    return str(x)


def build_factor(name, r, q=2):
    """Resolve a factor reference: parity, not-equal, equality, ones/f1,
    binary-csp:K, or file:PATH."""
    name = name.strip()
    if name.startswith("file:"):
        return load_factor_table(name[5:])
    alpha = default_alphabet(q)
    if name in ("ones", "f1", "one"):
        if r is None:
            raise ConfigError("factor 'ones' needs an arity from the ensemble spec")
        return all_ones_factor(r, alpha)
    if name == "parity":
        if r is None:
            raise ConfigError("factor 'parity' needs an arity from the ensemble spec")
        return parity_check_factor(r, alpha)
    if name == "not-equal":
        if r not in (None, 2):
            raise ConfigError("factor 'not-equal' has arity 2")
        return not_equal_factor(alpha)
    if name == "equality":
        if r not in (None, 2):
            raise ConfigError("factor 'equality' has arity 2")
        return equality_factor(alpha)
    if name.startswith("binary-csp:"):
        if r is None:
            raise ConfigError("factor 'binary-csp:K' needs an arity from the ensemble spec")
        k = int(name.split(":", 1)[1])
        return binary_csp_factor(r, k)
    raise ConfigError(f"unknown factor reference {name!r}")


def _parse_degree_dist(text):
    out = {}
    for part in text.split(","):
        deg, w = part.split(":")
        out[int(deg)] = float(w)
    return out


def _parse_field(text):
    # "w0,w1,..." in alphabet order
    return FieldSpec(tuple(float(t) for t in text.split(",")))


def _parse_random_field(text):
    # "p@w0,w1;p@w0,w1;..."
    fields, probs = [], []
    for part in text.split(";"):
        p, ws = part.split("@")
        probs.append(float(p))
        fields.append(_parse_field(ws))
    return RandomFieldSpec(tuple(fields), tuple(probs))


def build_ensemble(args, need_regular=False):
    """Ensemble spec from parsed flags; returns (spec, kind)."""
    chosen = [k for k in ("regular", "poisson", "irregular_L") if getattr(args, k, None)]
    if len(chosen) != 1:
        raise ConfigError("specify exactly one of --regular, --poisson, --irregular-L/-R")
    q = getattr(args, "q", 2) or 2
    if args.regular:
        l, r = (int(v) for v in args.regular)
        spec = RegularSpec(l, r, build_factor(args.factor, r, q))
        return spec, "regular"
    if need_regular:
        raise ConfigError("this command needs a regular ensemble (--regular L R)")
    if args.poisson:
        alpha, k = float(args.poisson[0]), int(args.poisson[1])
        spec = PoissonSpec(alpha, k, build_factor(args.factor, k, q))
        return spec, "poisson"
    L = _parse_degree_dist(args.irregular_L)
    if not getattr(args, "irregular_R", None):
        raise ConfigError("--irregular-L needs --irregular-R")
    R = _parse_degree_dist(args.irregular_R)
    factors = {j: build_factor(args.factor, j, q) for j in R}
    spec = IrregularSpec(L, R, factors)
    return spec, "irregular"


def solve_options(args):
    return SolveOptions(
        tol=args.tol, max_iters=args.max_iters,
        damping=args.damping, restarts=args.restarts, rng_seed=args.seed)


def _resolved_config(args):
    skip = {"func"}
    out = {}
    for key, val in sorted(vars(args).items()):
        if key in skip or val is None:
            continue
        out[key] = val if not isinstance(val, list) else list(val)
    return out


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return _fmt(obj)
    if isinstance(obj, (np.floating, np.integer)):
        return _json_safe(obj.item())
    return obj


def _emit_json(payload, args):
    payload = dict(payload)
    payload["config"] = _resolved_config(args)
    text = json.dumps(_json_safe(payload), indent=2, sort_keys=True, default=str)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _maybe_bits(value, args):
    return value / _LN2 if args.bits else value


# -- subcommands ---------------------------------------------------------------

def cmd_growth_rate(args):
    spec, kind = build_ensemble(args, need_regular=True)
    opts = solve_options(args)
    threads = args.threads or (os.cpu_count() or 1)
    if spec.factor.q == 2:
        curve = growth_rate_curve(spec, opts=opts, grid_points=args.grid,
                                  threads=threads)
        rows = []
        for pt in curve:
            value = _maybe_bits(pt.value, args)
            rows.append((float(pt.nu[1]), value, bool(pt.bp_converged),
                         int(pt.iterations), pt.solver))
        lines = ["nu1,value,converged,iterations,solver"]
        for nu1, value, conv, its, solver in rows:
            lines.append(",".join([_fmt(nu1), _fmt(value), _fmt(conv),
                                   str(its), solver]))
    else:
        # one marginal slice per symbol: nu = (1-t) uniform + t delta_x
        from .free_energy import fixed_type_value
        q = spec.factor.q
        rows = []
        lines = ["slice_symbol,t,value,converged,iterations,solver"]
        uniform = np.full(q, 1.0 / q)
        for x in range(q):
            delta = np.zeros(q)
            delta[x] = 1.0
            for i, t in enumerate(np.linspace(0.0, 1.0, args.grid)):
                nu = (1 - t) * uniform + t * delta
                local = SolveOptions(tol=opts.tol, max_iters=opts.max_iters,
                                     damping=opts.damping, restarts=opts.restarts,
                                     rng_seed=(opts.rng_seed * 1_000_003
                                               + x * args.grid + i) % (2 ** 63))
                pt = fixed_type_value(spec, nu, local)
                value = _maybe_bits(pt.value, args)
                rows.append((float(t), value, bool(pt.bp_converged),
                             int(pt.iterations), pt.solver))
                lines.append(",".join([spec.alphabet.labels[x], _fmt(float(t)),
                                       _fmt(value), _fmt(bool(pt.bp_converged)),
                                       str(int(pt.iterations)), pt.solver]))
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    plot_path = args.plot
    if plot_path is None and args.out and not args.no_plot:
        plot_path = os.path.splitext(args.out)[0] + ".png"
    if plot_path:
        from .plots import render_growth_curve
        render_growth_curve(rows, plot_path, bits=args.bits,
                            title=f"growth rate, {args.factor}")
    return 0


def cmd_annealed(args):
    spec, kind = build_ensemble(args)
    opts = solve_options(args)
    payload = {"command": "annealed", "kind": kind, "units": "bits" if args.bits else "nats"}
    if kind == "regular":
        if args.field:
            value = annealed_field(spec, _parse_field(args.field), opts)
            payload.update(value=_maybe_bits(value, args), converged=True,
                           provenance="field iteration")
        elif args.random_field:
            value = annealed_random_field(spec, _parse_random_field(args.random_field), opts)
            payload.update(value=_maybe_bits(value, args), converged=True,
                           provenance="random-field iteration")
        else:
            value, rep = annealed_regular(spec, opts=opts, grid_points=args.grid)
            mp, mrep = solve_regular(spec, opts)
            payload.update(
                value=_maybe_bits(value, args), converged=bool(rep.converged),
                provenance=rep.provenance)
            if mrep.converged and mp is not None:
                payload["stationary_messages"] = {
                    "m_vf": [float(x) for x in mp.m_vf],
                    "m_fv": [float(x) for x in mp.m_fv],
                }
            try:
                payload["design_rate"] = _maybe_bits(design_rate(spec), args)
            except ValueError:
                pass
        if not math.isfinite(payload["value"]):
            _emit_json(payload, args)
            raise NoStationaryPoint("annealed value is not finite")
    elif kind == "poisson":
        state, rep = solve_poisson(spec, opts)
        if not rep.converged:
            raise DegenerateMessage("Poisson iteration did not converge from any start")
        payload.update(value=_maybe_bits(rep.objective, args), converged=True,
                       provenance=rep.provenance, mean_variable_degree=state.e)
    else:
        state, rep = solve_irregular(spec, opts)
        if not rep.converged:
            raise DegenerateMessage("irregular iteration did not converge from any start")
        payload.update(value=_maybe_bits(rep.objective, args), converged=True,
                       provenance=rep.provenance)
    _emit_json(payload, args)
    return 0


def cmd_stability(args):
    payload = {"command": "stability"}
    if args.binary_csp:
        r, k = (int(v) for v in args.binary_csp)
        exact = binary_csp_stability_fraction(r, k)
        value = float(exact)
        payload.update(
            r=r, k=k, value=value, stable=bool(value < 1.0),
            exact=f"{exact.numerator}/{exact.denominator}",
            provenance="closed form, exact binomial arithmetic")
        if (r, k) == (20, 1):
            payload["note"] = (
                "exact value 92378/431910 = 0.213882...; the previously "
                "circulated constant 0.23883 for this case appears to be a "
                "digit transposition; both are < 1 so the stability verdict "
                "is unchanged")
    else:
        if not args.factor or not args.r:
            raise ConfigError("stability needs --binary-csp R K or --factor NAME --r R")
        factor = build_factor(args.factor, args.r, args.q or 2)
        rep = paramagnetic_stability(factor)
        payload.update(
            r=args.r, value=rep.max_nontrivial_abs, stable=bool(rep.stable),
            marginal=bool(rep.marginal),
            trivial_eigenvalue=rep.trivial_eigenvalue,
            eigenvalues=[str(v) for v in rep.eigenvalues],
            provenance="dense linearized operator")
    payload["converged"] = True
    _emit_json(payload, args)
    return 0


def cmd_oracle(args):
    spec, kind = build_ensemble(args, need_regular=True)
    n = args.N
    payload = {"command": "oracle", "N": n, "kind": kind}
    if args.sampled:
        mean, err = exhaustive_E_Z(n, spec, mode="sampled", samples=args.sampled,
                                   seed=args.seed, return_stderr=True)
        payload.update(expected_z=mean, stderr=err,
                       exponent=math.log(mean) / n if mean > 0 else float("-inf"),
                       provenance=f"sampled socket matchings ({args.sampled})")
    else:
        ez = finite_expected_z(n, spec)
        payload.update(expected_z=float(ez),
                       expected_z_exact=f"{ez.numerator}/{ez.denominator}",
                       exponent=exact_annealed_finite(n, spec),
                       provenance="exact type enumeration")
        if args.exact:
            match = exhaustive_E_Z(n, spec, mode="exact")
            if isinstance(match, Fraction):
                payload["matching_route"] = f"{match.numerator}/{match.denominator}"
                payload["routes_equal"] = bool(match == ez)
            else:
                payload["matching_route"] = match
                payload["routes_equal"] = bool(abs(match - float(ez)) <= 1e-9)
    value, _ = annealed_regular(spec, opts=solve_options(args), grid_points=51)
    payload["asymptotic"] = value
    payload["finite_size_gap"] = payload["exponent"] - value
    payload["converged"] = True
    payload["value"] = payload["exponent"]
    _emit_json(payload, args)
    return 0


def cmd_rs(args):
    spec, kind = build_ensemble(args, need_regular=True)
    pd_opts = PdOptions(population=args.pop, sweeps=args.sweeps,
                        samples=args.samples, rng_seed=args.seed)
    payload = {"command": "rs"}
    if args.inits:
        reports = rs_fixed_points(spec, pd_opts, solve_options(args))
        payload["fixed_points"] = [
            {"init": rep.init, "value": rep.value, "stderr": rep.stderr,
             "equilibrated": rep.equilibrated} for rep in reports]
        payload["multiplicity"] = len({round(rep.value, 6) for rep in reports})
        best = reports[0]
        payload.update(value=best.value, stderr=best.stderr, converged=True,
                       provenance=f"best of {len(reports)} initializations")
    else:
        check = check_annealed_rs_equality(spec, pd_opts, solve_options(args))
        payload.update(
            value=check.rs_value, stderr=check.stderr,
            annealed=check.annealed, difference=check.difference,
            within_tolerance=check.within_tolerance,
            equilibrated=check.rs_report.equilibrated,
            converged=True, provenance="delta-initialized population dynamics")
    _emit_json(payload, args)
    return 0


def cmd_moments(args):
    spec, kind = build_ensemble(args, need_regular=True)
    value = moment_exponent(spec, args.n, opts=solve_options(args),
                            grid_points=args.grid)
    payload = {"command": "moments", "n": args.n,
               "value": _maybe_bits(value, args), "converged": True,
               "provenance": "replicated-table maximization"}
    _emit_json(payload, args)
    return 0


# -- parser ----------------------------------------------------------------------

def _add_common(p):
    p.add_argument("--factor", help="parity | not-equal | equality | ones | "
                                    "binary-csp:K | file:PATH")
    p.add_argument("--q", type=int, default=2, help="alphabet size for built-ins")
    p.add_argument("--regular", nargs=2, metavar=("L", "R"))
    p.add_argument("--poisson", nargs=2, metavar=("ALPHA", "K"))
    p.add_argument("--irregular-L", dest="irregular_L",
                   help="variable degree distribution, e.g. 2:0.5,4:0.5")
    p.add_argument("--irregular-R", dest="irregular_R",
                   help="check degree distribution, e.g. 6:1.0")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iters", dest="max_iters", type=int, default=10_000)
    p.add_argument("--damping", type=float, default=0.0)
    p.add_argument("--restarts", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bits", action="store_true", help="display values in bits")
    p.add_argument("--out", help="output file (default stdout)")


def build_parser():
    ap = argparse.ArgumentParser(
        prog="fganneal",
        description="Annealed free energies and growth rates of random sparse "
                    "factor graph ensembles.")
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("--config", help="flat key=value file; flags override it")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("growth-rate", help="fixed-type growth-rate sweep (CSV + figure)")
    _add_common(p)
    p.add_argument("--grid", type=int, default=201)
    p.add_argument("--threads", type=int, default=0, help="0 = available parallelism")
    p.add_argument("--plot", help="figure path (default: next to --out)")
    p.add_argument("--no-plot", dest="no_plot", action="store_true")
    p.set_defaults(func=cmd_growth_rate)

    p = sub.add_parser("annealed", help="annealed exponent of an ensemble (JSON)")
    _add_common(p)
    p.add_argument("--grid", type=int, default=None)
    p.add_argument("--field", help="per-symbol weights, e.g. 2.0,1.0")
    p.add_argument("--random-field", dest="random_field",
                   help="mixture 'p@w0,w1;p@w0,w1'")
    p.set_defaults(func=cmd_annealed)

    p = sub.add_parser("stability", help="stability of the uniform point (JSON)")
    _add_common(p)
    p.add_argument("--binary-csp", dest="binary_csp", nargs=2, metavar=("R", "K"))
    p.add_argument("--r", type=int, help="arity for --factor stability")
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("oracle", help="finite-size expected partition function (JSON)")
    _add_common(p)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--exact", action="store_true",
                   help="also enumerate socket matchings and cross-check")
    p.add_argument("--sampled", type=int, default=0,
                   help="sample this many random matchings instead")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("rs", help="replica-symmetric estimate by population dynamics (JSON)")
    _add_common(p)
    p.add_argument("--pop", type=int, default=10_000)
    p.add_argument("--sweeps", type=int, default=200)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--inits", action="store_true",
                   help="report fixed points from the initialization library")
    p.set_defaults(func=cmd_rs)

    p = sub.add_parser("moments", help="integer-moment exponent via replicas (JSON)")
    _add_common(p)
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--grid", type=int, default=None)
    p.set_defaults(func=cmd_moments)
    return ap


def _apply_config_file(argv):
    """Prepend key=value pairs from --config as flags; explicit flags win."""
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    path = argv[i + 1]
    extra = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, val = line.partition("=")
            key = key.strip().replace("_", "-")
            flag = f"--{key}"
            vals = val.strip().split()
            if vals and vals[0].lower() in ("true", "false"):
                if vals[0].lower() == "true":
                    extra.append(flag)
            else:
                extra.append(flag)
                extra.extend(vals)
    # insert after the subcommand so argparse scopes them correctly
    head = argv[:i] + argv[i + 2:]
    for j, tok in enumerate(head):
        if not tok.startswith("-"):
            return head[:j + 1] + extra + head[j + 1:]
    return head + extra


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        argv = _apply_config_file(argv)
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except BudgetExceeded as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return 4
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DegenerateMessage, Infeasible, NoStationaryPoint, SolverAbort) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
