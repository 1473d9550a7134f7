"""Bubble trees of the example degeneration paths and the collapsing core geodesic.

    python3 scripts/degeneration_demo.py
"""
import numpy as np

from nodal_moduli.gk_moduli import example_paths, limit_signature
from nodal_moduli.plumbing import core_geodesic_length, node_fiber


def main():
    for name, path in example_paths().items():
        tree = limit_signature(path)
        G = tree.graph
        comps = [sorted(v.marks) for v in G.vertices]
        print(f"{name:13s} components {comps} nodes {list(G.edges)}")
    print()
    print(f"{'t':>10} {'2pi^2/log(1/t)':>16}")
    for t in np.geomspace(0.5, 1e-12, 12):
        print(f"{t:10.1e} {core_geodesic_length(node_fiber(t)):16.6f}")


if __name__ == "__main__":
    main()
