"""Command-line entry point: ``nodal-moduli <command> ...``.

Every run prints a JSON ``RunReport``. Exit codes: 0 all invariants pass,
2 usage error, 3 bad input, 4 numeric failure or violated invariant.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import itertools
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from typing import Any, Callable

import numpy as np

from . import gk_moduli as gk
from . import hardy, local_model as lm, plumbing, signature as sig
from .serialization import InputError, dumps, load_file, loads, parse_complex, series_from_dict, series_to_dict

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3, 4
ROTATION_PROBE = 0.37  # angle for the equivariance check in `glue solve`

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib


@dataclass
class RunReport:
    command: list[str]
    inputs_digest: str = ""
    outputs: dict = field(default_factory=dict)
    invariants: list[dict] = field(default_factory=list)
    wall_time: float = 0.0

    def check(self, name: str, passed: bool, **measured) -> bool:
        self.invariants.append({"name": name, "passed": bool(passed), "measured": measured})
        return bool(passed)

    @property
    def passed(self) -> bool:
        return "error" not in self.outputs and all(inv["passed"] for inv in self.invariants)

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "inputs_digest": self.inputs_digest,
            "outputs": self.outputs,
            "invariants": self.invariants,
            "passed": self.passed,
            "wall_time": self.wall_time,
        }


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# -- helpers -----------------------------------------------------------

def _digest(obj: Any) -> str:
    return hashlib.sha256(dumps(obj, indent=0).encode()).hexdigest()[:16]


def load_config(path: str | None, **overrides) -> lm.SolverConfig:
    data: dict = {}
    if path:
        try:
            with open(path, "rb") as fh:
                raw = fh.read()
        except OSError as exc:
            raise InputError(f"cannot read config {path}: {exc}") from exc
        try:
            data = tomllib.loads(raw.decode()) if path.endswith(".toml") else loads(raw.decode())
        except tomllib.TOMLDecodeError as exc:
            raise InputError(f"malformed TOML: {exc}") from exc
        data = data.get("solver", data)
    known = {f.name for f in fields(lm.SolverConfig)}
    unknown = set(data) - known
    if unknown:
        raise InputError(f"unknown config keys: {sorted(unknown)}")
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return lm.SolverConfig(**data)
    except (TypeError, ValueError) as exc:
        raise InputError(f"invalid solver config: {exc}") from exc


def _series_arg(path: str | None, N: int, default: hardy.TruncatedLaurent | None = None) -> hardy.TruncatedLaurent:
    if path is None:
        if default is None:
            raise InputError("missing series input")
        return default
    return series_from_dict(load_file(path)).with_truncation(N)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("NODAL_MODULI_THREADS", "1")))
    except ValueError:
        return 1


def _datum_to_dict(d: lm.GluingDatum) -> dict:
    return {"a": d.a, "b": d.b, "xi": series_to_dict(d.xi), "eta": series_to_dict(d.eta)}


def datum_from_dict(data: dict) -> lm.GluingDatum:
    try:
        return lm.GluingDatum(
            parse_complex(data["a"]), series_from_dict(data["xi"]), series_from_dict(data["eta"]), parse_complex(data["b"])
        )
    except KeyError as exc:
        raise InputError(f"datum JSON lacks {exc}") from exc


# -- signature ---------------------------------------------------------

def cmd_signature(args, rep: RunReport) -> None:
    if args.action == "enumerate":
        if args.g is None or args.n is None:
            raise UsageError("enumerate needs --g and --n")
        rep.inputs_digest = _digest([args.g, args.n])
        graphs = sig.enumerate_stable_signatures(args.g, args.n)
        rep.outputs = {"count": len(graphs), "signatures": [G.to_dict() for G in graphs]}
        if not graphs:
            rep.outputs["diagnostic"] = f"n = {args.n} <= 2 - 2g: no stable signatures"
            return
        keys = [sig.canonical_form(G) for G in graphs]
        rep.check("stable_and_type", all(sig.is_stable(G) and sig.is_type(G, args.g, args.n) for G in graphs))
        rep.check("pairwise_non_isomorphic", len(set(keys)) == len(keys))
        dim = sig.deformation_dim(args.g, args.n)
        rep.check("index_zero_at_full_base", all(sig.fredholm_index(G, dim).index == 0 for G in graphs), dim_base=dim)
        return
    if args.input is None:
        raise UsageError(f"signature {args.action} needs --in")
    data = load_file(args.input)
    try:
        G = sig.SignatureGraph.from_dict(data)
    except sig.SignatureError as exc:
        raise InputError(str(exc)) from exc
    rep.inputs_digest = _digest(data)
    rep.outputs["graph"] = G.to_dict()
    if args.action == "genus":
        rep.outputs.update(genus=sig.arithmetic_genus(G), betti=list(sig.betti_numbers(G)))
    elif args.action == "stable":
        rep.outputs["stable"] = sig.is_stable(G)
    elif args.action == "type":
        if args.g is None or args.n is None:
            raise UsageError("type needs --g and --n")
        rep.outputs["is_type"] = sig.is_type(G, args.g, args.n)
    elif args.action == "index":
        if args.dim_base is None:
            raise UsageError("index needs --dim-base")
        try:
            r = sig.fredholm_index(G, args.dim_base, not args.not_regular)
        except sig.SignatureError as exc:
            raise InputError(str(exc)) from exc
        rep.outputs.update(index=r.index, lower_bound=r.is_lower_bound)
        g = sig.arithmetic_genus(G)
        rep.check("index_formulas_agree", r.index == 3 - 3 * g - G.n_marks + args.dim_base)


# -- hardy -------------------------------------------------------------

def cmd_hardy(args, rep: RunReport) -> None:
    data = load_file(args.input)
    z = series_from_dict(data)
    rep.inputs_digest = _digest([data, args.r, args.s])
    s, r = args.s, args.r
    try:
        hardy.SobolevParams(s, r)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    if args.action == "norm":
        val = hardy.norm(z, s, r)
        iso = hardy.norm(hardy.rescale(z, r), s, 1.0)
        rep.outputs["norm"] = val
        rep.check("rescale_isometry", math.isclose(val, iso, rel_tol=1e-12, abs_tol=1e-300), norm=val, rescaled=iso)
    elif args.action == "split":
        p, m = hardy.split(z)
        rep.outputs.update(plus=series_to_dict(p), minus=series_to_dict(m))
        rep.check("split_reconstructs", (p + m) == z)
    elif args.action == "rescale":
        out = hardy.rescale(z, r)
        rep.outputs["rescaled"] = series_to_dict(out)
        back = hardy.rescale(out, 1 / r)
        rep.check("rescale_inverse", back.allclose(z, atol=1e-12 * max(1.0, float(np.max(np.abs(z.coeffs))))))
    elif args.action == "product":
        if args.input2 is None:
            raise UsageError("product needs --in2")
        w = series_from_dict(load_file(args.input2)).with_truncation(z.N)
        p = hardy.product(z, w, s=s)
        rep.outputs["product"] = series_to_dict(p)
        lhs = hardy.norm(p, s)
        rhs = hardy.product_constant(s) * hardy.norm(z, s) * hardy.norm(w, s)
        rep.check("product_estimate", lhs <= rhs, lhs=lhs, rhs=rhs)


# -- glue --------------------------------------------------------------

def _solve_one(a: complex, xp, ep, cfg: lm.SolverConfig) -> tuple[dict, list[tuple[str, bool, dict]]]:
    sol = lm.solve_gluing(a, xp, ep, cfg)
    d, r = sol.datum, sol.report
    checks = []
    chk = lm.check_datum(d)
    checks.append(("newton_residual", r.residual <= cfg.tol or a == 0, {"residual": r.residual, "iterations": r.iterations}))
    checks.append(("winding_one", chk.winding_xi == 1 and chk.winding_eta == 1, {"xi": chk.winding_xi, "eta": chk.winding_eta}))
    if a != 0:
        checks.append(("ift_step_bound", r.step_norm <= 2 * r.f0_norm * (1 + 1e-9) + 1e-15, {"step": r.step_norm, "f0": r.f0_norm}))
        lhs = r.lam_dev + r.xi_minus_rs + r.eta_minus_rs
        rhs = 2 * cfg.constants.c * d.r * r.input_dist
        checks.append(("continuity_estimate", lhs <= rhs + 1e-15, {"lhs": lhs, "rhs": rhs, "measured_c": r.continuity_constant(d.r)}))
        lhs, rhs = lm.approximate_solution_estimate(d.r, xp, ep, cfg.s)
        checks.append(("approximate_solution_estimate", lhs <= rhs, {"lhs": lhs, "rhs": rhs}))
        # fixed probe direction in the minus spaces
        probe = hardy.TruncatedLaurent.from_modes({0: 1.0, -1: 0.5j, -2: 0.25}, cfg.N)
        lhs, rhs = lm.quadratic_estimate(d.r, d.xi, d.eta, probe, probe, cfg.s)
        checks.append(("quadratic_estimate", lhs <= rhs * (1 + 1e-12), {"lhs": lhs, "rhs": rhs}))
        th = ROTATION_PROBE
        d2 = lm.newton_T(a * complex(math.cos(2 * th), -math.sin(2 * th)), hardy.rotate(xp, th), hardy.rotate(ep, th), cfg)
        dev = max(
            abs(d2.b * complex(math.cos(2 * th), math.sin(2 * th)) - d.b) / abs(a),
            float(np.max(np.abs((d2.xi - hardy.rotate(d.xi, th)).coeffs))),
            float(np.max(np.abs((d2.eta - hardy.rotate(d.eta, th)).coeffs))),
        )
        checks.append(("rotation_equivariance", dev <= 1e-12, {"deviation": dev, "theta": th}))
    else:
        checks.append(("node_exact", chk.node_ok, {}))
    out = {"datum": _datum_to_dict(d), "report": r.as_dict(), "eq_ab_residual": chk.residual}
    return out, checks


def cmd_glue(args, rep: RunReport) -> None:
    cfg = load_config(args.config, N=args.N)
    if args.action == "solve":
        xp = _series_arg(args.xi, cfg.N, hardy.TruncatedLaurent.identity(cfg.N))
        ep = _series_arg(args.eta, cfg.N, hardy.TruncatedLaurent.identity(cfg.N))
        if args.grid:
            a_vals = [parse_complex(x) for x in args.grid.split(";") if x.strip()]
        elif args.a is not None:
            a_vals = [parse_complex(args.a)]
        else:
            raise UsageError("glue solve needs --a or --grid")
        cfg_dict = {f.name: getattr(cfg, f.name) for f in fields(lm.SolverConfig)}
        rep.inputs_digest = _digest([a_vals, series_to_dict(xp), series_to_dict(ep), cfg_dict])
        rep.outputs["config"] = cfg_dict
        rep.outputs["chain_conditions"] = cfg.chain_report()
        with ThreadPoolExecutor(max_workers=_threads()) as pool:
            results = list(pool.map(lambda a: _solve_one(a, xp, ep, cfg), a_vals))
        runs = []
        for a, (out, checks) in zip(a_vals, results):
            runs.append(out)
            for name, ok, meas in checks:
                rep.check(f"{name}[a={a.real:.6g}{a.imag:+.6g}j]", ok, **meas)
        rep.outputs["solves"] = runs if len(runs) > 1 else runs[0]
        return

    # check
    if args.input is None:
        raise UsageError("glue check needs --in")
    data = load_file(args.input)
    d = datum_from_dict(data)
    rep.inputs_digest = _digest(data)
    cfg = load_config(args.config, N=d.N)
    chk = lm.check_datum(d)
    rep.check("eq_ab_residual", chk.residual <= 1e-9, residual=chk.residual)
    rep.check("winding_one", chk.winding_xi == 1 and chk.winding_eta == 1, xi=chk.winding_xi, eta=chk.winding_eta)
    if d.a == 0:
        rep.check("node_exact", chk.node_ok)
        return
    ap = lm.apriori_check(d, cfg)
    rep.check("apriori_estimate", ap.passed, ratio_dev=ap.ratio_dev, xi_dev=ap.xi_dev, eta_dev=ap.eta_dev, bound=ap.c * ap.delta, empirical_c=ap.empirical_c)
    try:
        devs = lm.uniqueness_deviations(d, cfg, n_trials=args.trials, rng=args.seed)
        rep.check("uniqueness", max(devs) <= 1e-8, max_deviation=max(devs))
    except lm.DomainError as exc:
        rep.check("uniqueness", False, error=str(exc))
    xp, _, ep, _ = d.parts()
    h1, h2 = args.h, args.h / 2
    r1 = lm.holomorphy_check_T(d.a, xp, ep, h1, cfg).residual
    r2 = lm.holomorphy_check_T(d.a, xp, ep, h2, cfg).residual
    ratio = r1 / r2 if r2 > 0 else math.inf
    small = max(r1, r2) <= 1e-10
    rep.check("holomorphy_richardson", small or abs(ratio - 4) <= 0.5, residual_h=r1, residual_h2=r2, ratio=ratio)


# -- plumb -------------------------------------------------------------

def cmd_plumb(args, rep: RunReport) -> None:
    if args.action == "annulus":
        if args.a is None:
            raise UsageError("plumb annulus needs --a")
        a = parse_complex(args.a)
        rep.inputs_digest = _digest([a])
        try:
            fib = plumbing.node_fiber(a)
        except ValueError as exc:
            raise InputError(str(exc)) from exc
        if isinstance(fib, plumbing.NodeMarker):
            rep.outputs = {"node": True, "modulus": math.inf, "geodesic_length": 0.0}
        else:
            rep.outputs = {"r": fib.r, "R": fib.R, "modulus": plumbing.modulus(fib), "geodesic_length": plumbing.core_geodesic_length(fib)}
        return
    cfg = load_config(args.config, N=args.N)
    xi0 = _series_arg(args.xi0, cfg.N, hardy.TruncatedLaurent.identity(cfg.N))
    eta0 = _series_arg(args.eta0, cfg.N, hardy.TruncatedLaurent.identity(cfg.N))
    rep.inputs_digest = _digest([series_to_dict(xi0), series_to_dict(eta0)])
    try:
        ext = plumbing.nodal_extend(xi0, eta0, cfg)
    except lm.ExtensionError as exc:
        raise InputError(str(exc)) from exc
    res = ext.residuals()
    rep.outputs = {
        "eps": ext.eps,
        "xi_scale": ext.xi_scale,
        "eta_scale": ext.eta_scale,
        "zeta_normalized": series_to_dict(ext.zeta),
        "zeta_prime": ext.zeta_prime(),
        "residuals": res.__dict__,
    }
    rep.check("product_identity", res.product <= 1e-9, residual=res.product)
    rep.check("axis_restrictions", max(res.xi_axis, res.eta_axis) <= 1e-9, xi=res.xi_axis, eta=res.eta_axis)
    rep.check("zeta_prime_one", res.zeta_prime_dev <= 1e-6, deviation=res.zeta_prime_dev)


# -- degenerate --------------------------------------------------------

def cmd_degenerate(args, rep: RunReport) -> None:
    data = load_file(args.path)
    try:
        path = gk.DegenerationPath.from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, gk.NonGenericPathError):
            raise
        raise InputError(f"malformed path: {exc}") from exc
    rep.inputs_digest = _digest(data)
    tree = gk.limit_signature(path)
    rep.outputs["bubble_tree"] = tree.to_dict()
    G = tree.graph
    rep.check("stable_genus0_tree", sig.is_stable(G) and sig.is_type(G, 0, path.n) and sig.betti_numbers(G)[1] == 0)
    rep.check("reparametrization_invariant", gk.verify_limit_uniqueness(path, [lambda p: p.reparametrize_power(2), lambda p: p.reparametrize_scale(2.5)]))
    rng = np.random.default_rng(args.seed)
    Ms = [gk.Mobius.random(rng) for _ in range(3)]
    rep.check("mobius_invariant", gk.verify_limit_uniqueness(path, [lambda p, M=M: p.apply_mobius(M) for M in Ms]))
    bad = []
    for quad in itertools.combinations(range(path.n), 4):
        lam = gk.cross_ratio_limit(path, quad)
        marks = tuple(i + 1 for i in quad)
        if gk.split_from_limit(lam, marks) != gk.separated_split(tree, marks):
            bad.append(list(marks))
    rep.check("cross_ratio_splits", not bad, mismatched=bad)
    if args.emit_csv:
        ts = np.geomspace(0.5, 1e-6, args.samples)
        rows = gk.degeneration_trace(path, ts)
        quads = list(rows[0]["cross_ratios"]) if rows else []
        with open(args.emit_csv, "w", newline="") as fh:
            wr = csv.writer(fh)
            head = ["t", "separation", "geodesic_proxy"]
            for q in quads:
                tag = "".join(str(i + 1) for i in q)
                head += [f"cr{tag}_re", f"cr{tag}_im"]
            wr.writerow(head)
            for row in rows:
                line = [format(row["t"], ".17g"), format(row["separation"], ".17g"), format(row["geodesic_proxy"], ".17g")]
                for q in quads:
                    lam = row["cross_ratios"][q]
                    lam = complex(lam) if not gk.is_inf(lam) else complex(math.inf, 0)
                    line += [format(lam.real, ".17g"), format(lam.imag, ".17g")]
                wr.writerow(line)
        rep.outputs["trace_csv"] = args.emit_csv


# -- selftest ----------------------------------------------------------

def selftest(quick: bool, seed: int | None) -> list[tuple[str, bool]]:
    out: list[tuple[str, bool]] = []
    T = hardy.TruncatedLaurent
    N = 32
    ident = T.identity(N)
    for r in (0.9, 0.5, 0.1, 0.01):
        out.append((f"F_r(1,id,id)=0 r={r}", hardy.norm(lm.residual_F_r(r, 1.0, ident, ident), 4) == 0.0))
    cfg = lm.SolverConfig(N=N)
    b, xm, em = lm.T_map(0, ident, ident, cfg)
    out.append(("T(0,.,.)=0", b == 0 and not np.any(xm.coeffs) and not np.any(em.coeffs)))
    d = lm.newton_T(0.01, ident, ident, cfg)
    out.append(("T(a,id,id) gives b=a", abs(d.b - 0.01) <= 1e-15))
    out.append(("norm(id)=2^s", hardy.norm(ident, 4, 0.3) == 16.0))
    out.append(("split(1) = (0, 1)", hardy.split(T.constant(1, N))[0] == T.zeros(N)))
    counts = {(0, 3): 1, (0, 4): 4, (1, 1): 2}
    for (g, n), c in counts.items():
        out.append((f"enumerate({g},{n})={c}", len(sig.enumerate_stable_signatures(g, n)) == c))
    out.append(("deformation_dim(2,0)=3", sig.deformation_dim(2, 0) == 3))
    out.append(("cross_ratio(0,1,inf,l)=l", gk.cross_ratio(0, 1, math.inf, 0.3 + 0.2j) == 0.3 + 0.2j))
    out.append(("modulus A(0.1,1)=log 10", math.isclose(plumbing.modulus(plumbing.AnnulusSpec(0.1, 1)), math.log(10))))
    out.append(("geodesic A(0.1,1)", abs(plumbing.core_geodesic_length(plumbing.AnnulusSpec(0.1, 1)) - 8.572629459922314) < 1e-12))
    ex = gk.example_paths()
    out.append(("limit (0,1,inf,t) has 2 vertices", gk.limit_signature(ex["four_point"]).graph.n_vertices == 2))
    out.append(("identity extension", plumbing.nodal_extend(ident, ident, cfg).zeta.allclose(ident, 1e-14)))
    if not quick:
        rng = np.random.default_rng(seed)
        for k in range(5):
            v = T.from_modes({2: complex(*rng.normal(size=2)), 3: complex(*rng.normal(size=2))}, N)
            xp = ident + v * (0.5 * cfg.delta / hardy.norm(v, cfg.s))
            a = 0.5 * rng.uniform() * np.exp(2j * np.pi * rng.uniform())
            d = lm.newton_T(a, xp, ident, cfg)
            out.append((f"random solve {k}", lm.check_datum(d).within(1e-9) and lm.uniqueness_probe(d, cfg, 5, rng)))
    return out


# -- argument parsing --------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="SolverConfig as TOML or JSON")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--out", help="write the report here instead of stdout")
    common.add_argument("--N", type=int, default=None, help="series truncation")

    p = _Parser(prog="nodal-moduli", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("signature", parents=[common])
    s.add_argument("action", choices=["genus", "stable", "type", "enumerate", "index"])
    s.add_argument("--in", dest="input")
    s.add_argument("--g", type=int)
    s.add_argument("--n", type=int)
    s.add_argument("--dim-base", type=int)
    s.add_argument("--not-regular", action="store_true")

    h = sub.add_parser("hardy", parents=[common])
    h.add_argument("action", choices=["norm", "split", "rescale", "product"])
    h.add_argument("--in", dest="input", required=True)
    h.add_argument("--in2", dest="input2")
    h.add_argument("--r", type=float, default=1.0)
    h.add_argument("--s", type=float, default=hardy.DEFAULT_S)

    g = sub.add_parser("glue", parents=[common])
    g.add_argument("action", choices=["solve", "check"])
    g.add_argument("--a", help="re,im")
    g.add_argument("--grid", help="semicolon-separated list of a values, solved in parallel")
    g.add_argument("--xi", help="xi_+ series JSON (default id)")
    g.add_argument("--eta", help="eta_+ series JSON (default id)")
    g.add_argument("--in", dest="input", help="datum JSON for check")
    g.add_argument("--trials", type=int, default=20)
    g.add_argument("--h", type=float, default=0.05)

    pl = sub.add_parser("plumb", parents=[common])
    pl.add_argument("action", choices=["extend", "annulus"])
    pl.add_argument("--xi0")
    pl.add_argument("--eta0")
    pl.add_argument("--a", help="re,im")

    d = sub.add_parser("degenerate", parents=[common])
    d.add_argument("--path", required=True)
    d.add_argument("--emit-csv")
    d.add_argument("--samples", type=int, default=25)

    st = sub.add_parser("selftest", parents=[common])
    st.add_argument("--quick", action="store_true")
    return p


COMMANDS: dict[str, Callable] = {
    "signature": cmd_signature,
    "hardy": cmd_hardy,
    "glue": cmd_glue,
    "plumb": cmd_plumb,
    "degenerate": cmd_degenerate,
}


def dispatch(argv: list[str] | None = None) -> tuple[int, RunReport]:
    argv = list(sys.argv[1:] if argv is None else argv)
    rep = RunReport(command=argv)
    t0 = time.perf_counter()
    args = None
    try:
        args = build_parser().parse_args(argv)
        if args.command == "selftest":
            for name, ok in selftest(args.quick, args.seed):
                rep.check(name, ok)
        else:
            COMMANDS[args.command](args, rep)
        code = EXIT_OK if rep.passed else EXIT_NUMERIC
    except UsageError as exc:
        rep.outputs["error"] = f"usage: {exc}"
        code = EXIT_USAGE
    except (InputError, sig.SignatureError, gk.NonGenericPathError, lm.DomainError) as exc:
        rep.outputs["error"] = f"input: {exc}"
        code = EXIT_INPUT
    except (lm.ConvergenceError, plumbing.EmbeddingError, hardy.TruncationLossError, FloatingPointError) as exc:
        rep.outputs["error"] = f"numeric: {exc}"
        code = EXIT_NUMERIC
    rep.wall_time = time.perf_counter() - t0
    text = dumps(rep.to_dict())
    if args is not None and getattr(args, "out", None):
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return code, rep


def main(argv: list[str] | None = None) -> int:
    return dispatch(argv)[0]


if __name__ == "__main__":
    sys.exit(main())
