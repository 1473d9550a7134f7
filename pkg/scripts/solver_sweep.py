"""Sweep the gluing solver over |a| and the input radius, printing contraction diagnostics.

    python3 scripts/solver_sweep.py --N 64 --trials 20
"""
import argparse

import numpy as np

from nodal_moduli.hardy import TruncatedLaurent, norm
from nodal_moduli.local_model import SolverConfig, solve_gluing


def near_identity(rng, N, radius, s):
    v = np.zeros(2 * N + 1, dtype=complex)
    k = np.arange(2, N + 1)
    v[N + 2:] = (rng.normal(size=k.size) + 1j * rng.normal(size=k.size)) * 0.5**k
    v = TruncatedLaurent(v)
    return TruncatedLaurent.identity(N) + v * (radius / norm(v, s))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--N", type=int, default=64)
    ap.add_argument("--trials", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    cfg = SolverConfig(N=args.N, delta=0.02, eps=0.04)
    print(f"{'|a|':>6} {'radius':>8} {'max it':>6} {'max res':>9} {'max ift':>8} {'max c':>8}")
    for amod in (0.01, 0.1, 0.5, 0.9):
        for radius in (1e-4, 1e-3, 1e-2, 0.019):
            its, res, ift, cont = [], [], [], []
            for _ in range(args.trials):
                a = amod * np.exp(2j * np.pi * rng.uniform())
                xp = near_identity(rng, cfg.N, radius, cfg.s)
                ep = near_identity(rng, cfg.N, radius, cfg.s)
                sol = solve_gluing(a, xp, ep, cfg)
                rep = sol.report
                its.append(rep.iterations)
                res.append(rep.residual)
                ift.append(rep.ift_ratio)
                cont.append(rep.continuity_constant(sol.datum.r))
            print(f"{amod:6.2f} {radius:8.0e} {max(its):6d} {max(res):9.1e} {max(ift):8.3f} {max(cont):8.4f}")
    print(f"explicit constant c = {cfg.constants.c:.4f}")


if __name__ == "__main__":
    main()
