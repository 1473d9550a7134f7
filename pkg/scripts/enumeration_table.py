"""Table of stable signature counts by type (g, n) with boundary-stratum statistics.

    python3 scripts/enumeration_table.py --max-dim 3
"""
import argparse
import time
from collections import Counter

from nodal_moduli.signature import enumerate_stable_signatures, fredholm_index


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--max-dim", type=int, default=3, help="largest 3g-3+n to enumerate")
    args = ap.parse_args(argv)
    print(f"{'g':>2} {'n':>2} {'dim':>4} {'count':>6}  by #nodes              {'time':>7}")
    for dim in range(args.max_dim + 1):
        for g in range(dim // 3 + 2):
            n = dim + 3 - 3 * g
            if n < 0 or 2 * g - 2 + n <= 0:
                continue
            t0 = time.perf_counter()
            sigs = enumerate_stable_signatures(g, n)
            elapsed = time.perf_counter() - t0
            if not sigs:
                continue
            assert all(fredholm_index(G, dim).index == 0 for G in sigs)
            by_nodes = Counter(G.n_edges for G in sigs)
            hist = " ".join(f"{k}:{by_nodes[k]}" for k in sorted(by_nodes))
            print(f"{g:2d} {n:2d} {dim:4d} {len(sigs):6d}  {hist:22s} {elapsed:6.2f}s")


if __name__ == "__main__":
    main()
