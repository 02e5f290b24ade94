"""Command-line entry point ``measdisc``.

Exit codes: 0 success, 2 invalid input or usage, 3 convergence warning (the
report is still written) or numerical failure.
"""
from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import adaptive, discrimination, ensembles, io, unambiguous
from .errors import MeasDiscError, ValidationError
from .qmat import FAMILIES, Unitary, kron_power, named_family
from .spectral import OptimizerOptions, upsilon, upsilon_grid_oracle

EXIT_OK, EXIT_INVALID, EXIT_WARNING = 0, 2, 3
SNAP_TOL = 1e-12


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _snap(x: float, lo: float = 0.0, hi: float = 1.0) -> float:
    x = min(max(float(x), lo), hi)
    r = round(x)
    return float(r) if abs(x - r) <= SNAP_TOL else x


def _add_input(p):
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--matrix", type=Path, help="matrix JSON file {d, re, im}")
    g.add_argument("--family", choices=FAMILIES, help="named unitary family")
    p.add_argument("--dim", type=int, default=2, help="dimension for --family")
    p.add_argument("--param", type=float, action="append", default=[],
                   help="family parameter, repeated in order")
    p.add_argument("--save-matrix", type=Path, help="also write the resolved unitary as JSON")


def _add_common(p, seed_required=False):
    p.add_argument("--out", type=Path, help="write the report here instead of stdout")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--seed", type=int, required=seed_required, default=None if seed_required else 0,
                   help="RNG seed" + (" (required)" if seed_required else ""))


def _unitary(args) -> Unitary:
    u = io.read_unitary(args.matrix) if args.matrix else named_family(args.family, args.dim, tuple(args.param))
    if args.save_matrix:
        io.write_matrix(args.save_matrix, u)
    return u


def _shots(p, default=1):
    p.add_argument("--shots", "-N", dest="shots", type=int, default=default, help="number of queries N")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="measdisc", description="Discrimination of von Neumann measurements")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("distance", help="diamond distances and Helstrom probability")
    _add_input(p), _shots(p), _add_common(p)
    p = sub.add_parser("queries", help="queries needed for perfect discrimination")
    _add_input(p), _add_common(p)
    p = sub.add_parser("discriminator", help="optimal parallel input state")
    _add_input(p), _shots(p), _add_common(p)
    p = sub.add_parser("unambiguous", help="unambiguous success probability")
    _add_input(p), _shots(p), _add_common(p)
    p.add_argument("--assisted", action="store_true", help="allow an entangled ancilla")
    p = sub.add_parser("haar-study", help="two-query failure rate over Haar unitaries")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--samples", type=int, default=10_000)
    _add_common(p, seed_required=True)
    p = sub.add_parser("beta-check", help="law of |U_11|^2 for Haar unitaries")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--samples", type=int, default=100_000)
    _add_common(p, seed_required=True)
    p = sub.add_parser("adaptive-check", help="adaptive networks against the parallel bound")
    _add_input(p), _shots(p, 2), _add_common(p, seed_required=True)
    p.add_argument("--network", type=Path, help="network JSON; random networks otherwise")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--search", action="store_true", help="also run the adaptive search")
    p = sub.add_parser("oracle", help="brute-force diamond distance")
    _add_input(p), _shots(p), _add_common(p, seed_required=True)
    p.add_argument("--kind", choices=("measurement_channel", "unitary_channel"), default="measurement_channel")
    p.add_argument("--starts", type=int, default=12)
    p.add_argument("--resolution", type=int, help="also run the phase-grid oracle at this resolution")
    p = sub.add_parser("figure", help="CSV data for figures")
    p.add_argument("--kind", choices=("arc_geometry", "multishot_curve", "haar_histogram"), required=True)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--matrix", type=Path)
    g.add_argument("--family", choices=FAMILIES)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--param", type=float, action="append", default=[])
    p.add_argument("--save-matrix", type=Path)
    p.add_argument("--max-shots", type=int, default=4)
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path)
    return parser


# -- commands: each returns (payload, warning) -----------------------------------

def cmd_distance(args):
    u = _unitary(args)
    rep = discrimination.discrimination_report(u, args.shots, OptimizerOptions(seed=args.seed))
    d = rep.to_dict()
    d["helstrom_probability"] = _snap(d["helstrom_probability"])
    return d, rep.uncertain


def cmd_queries(args):
    u = _unitary(args)
    ups = upsilon(u, OptimizerOptions(seed=args.seed))
    q = discrimination.queries_for_perfect(u, ups)
    return {"queries_for_perfect": q.value if isinstance(q, discrimination.QueryCount) else q,
            "upsilon": ups.upsilon}, not ups.converged


def cmd_discriminator(args):
    u = _unitary(args)
    ups = upsilon(u, OptimizerOptions(seed=args.seed))
    s = discrimination.discriminator_state(u, args.shots, ups)
    v = discrimination.verify_discriminator(u, args.shots, s, ups)
    return {"shots": args.shots, "case": s.case, "construction": s.construction,
            "weights": list(s.weights), "rank": s.rank, "upsilon": ups.upsilon,
            "residual": v.residual, "threshold": v.threshold, "passed": v.passed,
            "state": io.matrix_to_dict(s.state.matrix)}, not (v.passed and ups.converged)


def cmd_unambiguous(args):
    u = _unitary(args)
    r = unambiguous.unambiguous_parallel_result(u, args.shots, args.assisted)
    out = {"probability": _snap(r.probability), "assisted": r.assisted, "shots": args.shots}
    if r.assisted:
        out.update({"gap": r.gap, "converged": r.converged,
                    "unambiguity_residuals": [float(x) for x in r.residuals]})
    else:
        out.update({"gamma": list(r.strategy.gamma), "delta": list(r.strategy.delta)})
    out["optimal_input"] = io.matrix_to_dict(r.optimal_input.matrix)
    return out, not r.converged


def cmd_haar_study(args):
    s = ensembles.two_query_failure_rate(args.dim, args.samples, args.seed)
    if args.format == "csv":
        return ("csv", ["bin_left", "bin_right", "count"], s.histogram), False
    return s.to_dict(), False


def cmd_beta_check(args):
    r = ensembles.u11_beta_check(args.dim, args.samples, args.seed)
    return r.to_dict(), r.insufficient_samples


def cmd_adaptive_check(args):
    u = _unitary(args)
    n = args.shots
    rng = np.random.default_rng(args.seed)
    md = discrimination.multishot_distance(u, n)
    par = unambiguous.unambiguous_parallel(u, n, True)
    fixed = adaptive.load_network(args.network) if args.network else None
    worst_d = worst_u = -math.inf
    violations = 0
    for _ in range(args.trials):
        net = fixed or adaptive.AdaptiveNetwork.random(u.dim, n, rng)
        psi = rng.standard_normal(net.total_dim) + 1j * rng.standard_normal(net.total_dim)
        rho = np.outer(psi, psi.conj()) / np.vdot(psi, psi).real
        val = adaptive.adaptive_value(u, net, rho)
        ub = adaptive.unambiguous_adaptive_bound(u, n, net, rho)
        worst_d, worst_u = max(worst_d, val), max(worst_u, ub)
        violations += (val > md + 1e-8) + (ub > par + 1e-6)
    out = {"seed": args.seed, "shots": n, "trials": args.trials, "multishot_distance": md,
           "max_adaptive_value": worst_d, "parallel_unambiguous": par,
           "max_unambiguous_bound": worst_u, "violations": int(violations)}
    if args.search:
        best, _, _ = adaptive.adaptive_search(u, n, adaptive.SearchOptions(seed=args.seed))
        out["search_value"] = best
        violations += best > md + 1e-6
    return out, violations > 0


def cmd_oracle(args):
    u = _unitary(args)
    val = discrimination.direct_diamond_oracle(u, args.kind, args.shots, args.starts, args.seed)
    if args.kind == "unitary_channel":
        formula = discrimination.unitary_diamond_distance(Unitary(kron_power(u, args.shots)))
    else:
        formula = discrimination.multishot_distance(u, args.shots)
    out = {"seed": args.seed, "kind": args.kind, "shots": args.shots, "oracle_value": val,
           "formula_value": formula, "difference": abs(val - formula)}
    if args.resolution:
        ups = upsilon(u)
        grid = upsilon_grid_oracle(u, args.resolution)
        out.update({"upsilon": ups.upsilon, "grid_upsilon": grid, "grid_step": 2 * math.pi / args.resolution})
    return out, False


def emit_figure_data(kind: str, u: Unitary | None = None, max_shots: int = 4,
                     dim: int = 5, samples: int = 10_000, seed: int | None = None):
    """``(header, rows)`` for one of the figure data sets."""
    if kind == "haar_histogram":
        if seed is None:
            raise ValidationError("haar_histogram needs --seed")
        return ["bin_left", "bin_right", "count"], ensembles.u11_histogram(ensembles.u11_samples(dim, samples, seed))
    if u is None:
        raise ValidationError(f"{kind} needs --matrix or --family")
    ups = upsilon(u)
    if kind == "multishot_curve":
        if max_shots < 1:
            raise ValidationError("--max-shots must be positive")
        return ["N", "distance"], [(n, discrimination.multishot_distance(u, n, ups)) for n in range(1, max_shots + 1)]
    if kind == "arc_geometry":
        y = ups.upsilon
        rows = [("eigenphase", k, float(p)) for k, p in enumerate(np.sort(np.mod(
            np.angle(np.linalg.eigvals(ups.optimal_unitary)), 2 * math.pi)))]
        rows += [("arc_start", 0, ups.extreme_low[0]), ("arc_end", 0, ups.extreme_high[0]),
                 ("upsilon", 0, y), ("chord", 0, discrimination.measurement_diamond_distance(u, ups)),
                 ("p_u_assisted", 0, unambiguous.unambiguous_entassisted_closed(u, ups))]
        return ["quantity", "index", "value"], rows
    raise ValidationError(f"unknown figure kind {kind!r}")


def cmd_figure(args):
    u = None
    if args.matrix or args.family:
        u = io.read_unitary(args.matrix) if args.matrix else named_family(args.family, args.dim, tuple(args.param))
    header, rows = emit_figure_data(args.kind, u, args.max_shots, args.dim, args.samples, args.seed)
    return ("csv", header, rows), False


COMMANDS = {
    "distance": cmd_distance, "queries": cmd_queries, "discriminator": cmd_discriminator,
    "unambiguous": cmd_unambiguous, "haar-study": cmd_haar_study, "beta-check": cmd_beta_check,
    "adaptive-check": cmd_adaptive_check, "oracle": cmd_oracle, "figure": cmd_figure,
}


def _render(payload, fmt: str) -> str:
    if isinstance(payload, tuple) and payload[0] == "csv":
        return io.to_csv(payload[1], payload[2])
    if fmt == "csv":
        scalars = [(k, v) for k, v in payload.items() if not isinstance(v, (dict, list))]
        return io.to_csv([k for k, _ in scalars], [[v for _, v in scalars]])
    return io.dumps(payload)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        payload, warning = COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"measdisc: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except MeasDiscError as exc:
        print(f"measdisc: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_WARNING
    text = _render(payload, getattr(args, "format", "csv"))
    if args.out:
        args.out.write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    if warning:
        print("measdisc: warning: convergence or consistency check did not pass", file=sys.stderr)
        return EXIT_WARNING
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
