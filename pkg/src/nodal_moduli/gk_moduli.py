"""Genus-zero degenerations: cross-ratios and bubble-tree limits.

A point of the sphere is a complex number or ``math.inf``. Along a
``DegenerationPath`` each marked point is a ratio of polynomials in a real
parameter ``t > 0``, stored homogeneously as ``[num(t) : den(t)]`` so Möbius
maps and reparametrizations act exactly on coefficients.

The limit as ``t -> 0`` is found by sending mark 1 to infinity and clustering
the remaining points by the ``t``-adic valuation of their differences; each
cluster at a finer scale becomes a bubble attached by a node.
"""

from __future__ import annotations

import cmath
import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .signature import SignatureGraph, VertexLabel, is_stable, is_type

INF = math.inf
SERIES_ORDER = 32  # Laurent terms kept per point
TIE_RTOL = 1e-9  # relative tolerance for equal leading coefficients
MAX_DEPTH = 16
EXACT_ZERO_VAL = 10**6  # valuation standing in for an identically zero series


class NonGenericPathError(ValueError):
    """Separation exponents cannot be determined within the working precision."""


def is_inf(p) -> bool:
    return isinstance(p, float) and math.isinf(p) or (isinstance(p, complex) and cmath.isinf(p))


def _homog(p) -> tuple[complex, complex]:
    return (1.0 + 0j, 0j) if is_inf(p) else (complex(p), 1.0 + 0j)


def _det(p, q) -> complex:
    return p[0] * q[1] - p[1] * q[0]


def _dehomog(u: complex, v: complex, rtol: float = 0.0):
    if v == 0 or abs(v) <= rtol * abs(u):
        return INF
    return u / v


# -- cross-ratios and Möbius maps --------------------------------------

def cross_ratio(p, q, r, s):
    """Cross-ratio normalized so that ``(0, 1, inf, lam) -> lam``.

    ``[s, p][q, r] / ([s, r][q, p])`` with ``[.,.]`` the 2x2 determinant of
    homogeneous coordinates. Returns ``math.inf`` when only the denominator
    vanishes.
    """
    hp, hq, hr, hs = map(_homog, (p, q, r, s))
    num = _det(hs, hp) * _det(hq, hr)
    den = _det(hs, hr) * _det(hq, hp)
    if den == 0:
        if num == 0:
            raise ValueError("cross-ratio needs at least three distinct points")
        return INF
    return num / den


@dataclass(frozen=True)
class Mobius:
    a: complex
    b: complex
    c: complex
    d: complex

    def __post_init__(self):
        if self.a * self.d - self.b * self.c == 0:
            raise ValueError("singular Möbius matrix")

    def __call__(self, z):
        u, v = _homog(z)
        return _dehomog(self.a * u + self.b * v, self.c * u + self.d * v)

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]], dtype=complex)

    @classmethod
    def random(cls, rng: np.random.Generator, scale: float = 1.0) -> "Mobius":
        m = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        return cls(*(scale * m).ravel())


@dataclass(frozen=True)
class SphereConfig:
    points: tuple

    def __post_init__(self):
        pts = tuple(INF if is_inf(p) else complex(p) for p in self.points)
        if len(pts) < 3:
            raise ValueError("need at least three points")
        for (i, p), (j, q) in itertools.combinations(enumerate(pts), 2):
            if _det(_homog(p), _homog(q)) == 0:
                raise ValueError(f"points {i + 1} and {j + 1} coincide")
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return len(self.points)

    def cross_ratios(self) -> dict[tuple[int, ...], complex]:
        return {q: cross_ratio(*(self.points[i] for i in q)) for q in itertools.combinations(range(self.n), 4)}


def normalize(config: SphereConfig, i: int, j: int, k: int) -> SphereConfig:
    """Möbius image with ``p_i = 0``, ``p_j = 1``, ``p_k = inf`` (0-based indices)."""
    if len({i, j, k}) < 3:
        raise ValueError("normalization indices must be distinct")
    P = config.points
    out = []
    for m, z in enumerate(P):
        if m == i:
            out.append(0j)
        elif m == j:
            out.append(1 + 0j)
        elif m == k:
            out.append(INF)
        else:
            out.append(cross_ratio(P[i], P[j], P[k], z))
    return SphereConfig(tuple(out))


# -- truncated Laurent series in t -------------------------------------

@dataclass(frozen=True)
class _Series:
    """``sum_k c[k] t^(val + k)``, exact up to (not including) order ``val + len(c)``."""

    val: int
    c: np.ndarray
    scale: float  # magnitude reference for zero tests

    @property
    def prec(self) -> int:
        return self.val + self.c.size

    @classmethod
    def from_poly(cls, coeffs: Sequence[complex], order: int = SERIES_ORDER) -> "_Series":
        c = np.zeros(order, dtype=complex)
        k = min(order, len(coeffs))
        c[:k] = np.asarray(coeffs, dtype=complex)[:k]
        if not np.any(c):
            return cls(EXACT_ZERO_VAL, np.zeros(0, dtype=complex), 0.0)
        return cls(0, c, float(np.max(np.abs(coeffs))))._strip()

    def _strip(self) -> "_Series":
        tol = TIE_RTOL * self.scale
        nz = np.flatnonzero(np.abs(self.c) > tol)
        if nz.size == 0:
            return _Series(self.prec, np.zeros(0, dtype=complex), self.scale)
        k = int(nz[0])
        return _Series(self.val + k, self.c[k:], self.scale)

    @property
    def is_zero(self) -> bool:
        return self.c.size == 0

    @property
    def lead(self) -> complex:
        return complex(self.c[0])

    def _aligned(self, other: "_Series"):
        lo = min(self.val, other.val)
        hi = min(self.prec, other.prec)
        n = max(hi - lo, 0)
        a = np.zeros(n, dtype=complex)
        b = np.zeros(n, dtype=complex)
        ka = min(n, max(self.prec - lo, 0))
        kb = min(n, max(other.prec - lo, 0))
        a[self.val - lo : ka] = self.c[: max(ka - (self.val - lo), 0)]
        b[other.val - lo : kb] = other.c[: max(kb - (other.val - lo), 0)]
        return lo, a, b

    def __sub__(self, other: "_Series") -> "_Series":
        lo, a, b = self._aligned(other)
        return _Series(lo, a - b, max(self.scale, other.scale))._strip()

    def __add__(self, other: "_Series") -> "_Series":
        lo, a, b = self._aligned(other)
        return _Series(lo, a + b, max(self.scale, other.scale))._strip()

    def __mul__(self, other: "_Series") -> "_Series":
        if self.is_zero or other.is_zero:
            return _Series(min(self.prec + other.val, other.prec + self.val), np.zeros(0, dtype=complex), 0.0)
        n = min(self.c.size, other.c.size)
        c = np.convolve(self.c[:n], other.c[:n])[:n]
        return _Series(self.val + other.val, c, self.scale * other.scale)._strip()

    def __truediv__(self, other: "_Series") -> "_Series":
        if other.is_zero:
            raise NonGenericPathError("division by a series that vanishes to working precision")
        n = min(self.c.size, other.c.size)
        q = np.zeros(n, dtype=complex)
        rem = self.c[:n].copy()
        d0 = other.c[0]
        for k in range(n):
            q[k] = rem[k] / d0
            m = min(n - k, other.c.size)
            rem[k : k + m] -= q[k] * other.c[:m]
        sc = self.scale / max(abs(d0), 1e-300)
        return _Series(self.val - other.val, q, sc)._strip()

    def conj(self) -> "_Series":
        return _Series(self.val, np.conj(self.c), self.scale)


# -- degeneration paths ------------------------------------------------

def _poly(x) -> np.ndarray:
    a = np.atleast_1d(np.asarray(x, dtype=complex))
    return a if a.size else np.zeros(1, dtype=complex)


def _polymul(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    return np.convolve(p, q)


def _polyadd(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    n = max(p.size, q.size)
    out = np.zeros(n, dtype=complex)
    out[: p.size] += p
    out[: q.size] += q
    return out


def _polyeval(p: np.ndarray, t: float) -> complex:
    # coefficients in increasing order
    return complex(np.polyval(p[::-1], t))


@dataclass(frozen=True)
class DegenerationPath:
    """Each mark ``i`` moves as ``p_i(t) = num_i(t) / den_i(t)``; coefficient
    arrays are in increasing powers of ``t``."""

    num: tuple
    den: tuple

    def __post_init__(self):
        num = tuple(_poly(p) for p in self.num)
        den = tuple(_poly(p) for p in self.den)
        if len(num) != len(den) or len(num) < 3:
            raise ValueError("need matching numerators/denominators for at least three points")
        for u, v in zip(num, den):
            if not (np.any(u != 0) or np.any(v != 0)):
                raise ValueError("point with zero homogeneous coordinates")
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)
        for i, j in itertools.combinations(range(len(num)), 2):
            d = _polyadd(_polymul(num[i], den[j]), -_polymul(num[j], den[i]))
            if _Series.from_poly(d).is_zero:
                raise NonGenericPathError(f"points {i + 1} and {j + 1} coincide identically")

    @property
    def n(self) -> int:
        return len(self.num)

    @classmethod
    def from_points(cls, points: Iterable) -> "DegenerationPath":
        """Entries are coefficient lists ``[a0, a1, ...]`` of ``p(t) = sum a_k t^k``,
        or ``"inf"`` / ``math.inf`` for the constant point at infinity."""
        num, den = [], []
        for p in points:
            if isinstance(p, str) and p == "inf" or (not isinstance(p, (list, tuple, np.ndarray)) and is_inf(p)):
                num.append([1.0])
                den.append([0.0])
            elif isinstance(p, dict):
                num.append(p["num"])
                den.append(p["den"])
            else:
                num.append(list(np.atleast_1d(p)))
                den.append([1.0])
        return cls(tuple(num), tuple(den))

    def at(self, t: float) -> SphereConfig:
        return SphereConfig(tuple(_dehomog(_polyeval(u, t), _polyeval(v, t)) for u, v in zip(self.num, self.den)))

    def homogeneous_at(self, t: float) -> list[tuple[complex, complex]]:
        return [(_polyeval(u, t), _polyeval(v, t)) for u, v in zip(self.num, self.den)]

    # transformations that must not change the limit

    def reparametrize_power(self, m: int) -> "DegenerationPath":
        """``t -> t^m``."""
        if m < 1:
            raise ValueError("power must be a positive integer")

        def up(p):
            q = np.zeros(m * (p.size - 1) + 1, dtype=complex)
            q[::m] = p
            return q

        return DegenerationPath(tuple(map(up, self.num)), tuple(map(up, self.den)))

    def reparametrize_scale(self, c: float) -> "DegenerationPath":
        """``t -> c t`` for ``c > 0``."""
        if not c > 0:
            raise ValueError("scale must be positive")

        def sc(p):
            return p * c ** np.arange(p.size)

        return DegenerationPath(tuple(map(sc, self.num)), tuple(map(sc, self.den)))

    def apply_mobius(self, M: Mobius) -> "DegenerationPath":
        num = tuple(_polyadd(M.a * u, M.b * v) for u, v in zip(self.num, self.den))
        den = tuple(_polyadd(M.c * u, M.d * v) for u, v in zip(self.num, self.den))
        return DegenerationPath(num, den)

    def permute_marks(self, perm: Sequence[int]) -> "DegenerationPath":
        """New mark ``k`` is old mark ``perm[k]`` (0-based)."""
        return DegenerationPath(tuple(self.num[i] for i in perm), tuple(self.den[i] for i in perm))

    def to_dict(self) -> dict:
        def enc(p):
            return [[float(z.real), float(z.imag)] for z in p]

        return {"points": [{"num": enc(u), "den": enc(v)} for u, v in zip(self.num, self.den)]}

    @classmethod
    def from_dict(cls, data: dict) -> "DegenerationPath":
        def dec(p):
            return [complex(z[0], z[1]) if isinstance(z, (list, tuple)) else complex(z) for z in p]

        pts = []
        for p in data["points"]:
            if isinstance(p, dict):
                pts.append({"num": dec(p["num"]), "den": dec(p.get("den", [1.0]))})
            elif isinstance(p, str):
                pts.append(p)
            else:
                pts.append(dec(p))
        return cls.from_points(pts)


# -- limits ------------------------------------------------------------

@dataclass(frozen=True)
class BubbleTree:
    """Limit signature with, per vertex, limit positions of its special points.

    Position keys are ``"m<k>"`` for mark ``k`` and ``"v<j>"`` for the node
    towards vertex ``j``; the node towards the parent (or mark 1 on the root)
    sits at infinity.
    """

    graph: SignatureGraph
    positions: tuple

    def to_dict(self) -> dict:
        def enc(z):
            return "inf" if is_inf(z) else [float(complex(z).real), float(complex(z).imag)]

        return {
            "graph": self.graph.to_dict(),
            "positions": [{k: enc(v) for k, v in pos.items()} for pos in self.positions],
        }


def _point_series(path: DegenerationPath) -> list[tuple[_Series, _Series]]:
    return [(_Series.from_poly(u), _Series.from_poly(v)) for u, v in zip(path.num, path.den)]


def _affine_chart(path: DegenerationPath, root: int) -> dict[int, _Series]:
    """Send mark ``root`` to infinity with the t-dependent Möbius map
    ``[u : v] -> [conj(u_r) u + conj(v_r) v : v_r u - u_r v]``."""
    S = _point_series(path)
    ur, vr = S[root]
    urc, vrc = ur.conj(), vr.conj()
    out = {}
    for i, (u, v) in enumerate(S):
        if i == root:
            continue
        num = _sum_nonzero(urc * u, vrc * v)
        den = _sum_nonzero(vr * u, _neg(ur * v))
        if den.is_zero:
            raise NonGenericPathError(f"mark {i + 1} collides with mark {root + 1} to working precision")
        out[i] = num / den
    return out


def _neg(s: _Series) -> _Series:
    return _Series(s.val, -s.c, s.scale)


def _sum_nonzero(a: _Series, b: _Series) -> _Series:
    if a.is_zero:
        return b
    if b.is_zero:
        return a
    return a + b


def _close(z: complex, w: complex, scale: float) -> bool:
    return abs(z - w) <= TIE_RTOL * max(scale, abs(z), abs(w))


def limit_signature(path: DegenerationPath, root: int = 0) -> BubbleTree:
    """Bubble tree of the limit ``t -> 0``; mark ``root + 1`` is placed at infinity."""
    w = _affine_chart(path, root)
    vertices: list[VertexLabel] = []
    edges: list[tuple[int, int]] = []
    positions: list[dict] = []

    def build(idx: list[int], parent: int | None, depth: int) -> int:
        if depth > MAX_DEPTH:
            raise NonGenericPathError("clustering depth cap exceeded")
        v = len(vertices)
        vertices.append(None)  # placeholder
        positions.append({})
        if parent is not None:
            edges.append((parent, v))
        # only differences to a base point are compared, so the rescaling
        # (w - w_base) t^-m of the cluster is implicit
        base = w[idx[0]]
        diffs = {i: (w[i] - base) if i != idx[0] else None for i in idx}
        # coarsest separation exponent in this cluster
        vals = [d.val for d in diffs.values() if d is not None and not d.is_zero]
        if len(vals) < len(idx) - 1:
            raise NonGenericPathError("points coincide to working precision")
        m = min(vals)
        leads = {}
        for i, d in diffs.items():
            leads[i] = 0j if d is None or d.val > m else d.lead
        scale = max(abs(z) for z in leads.values())
        groups: list[list[int]] = []
        for i in idx:
            for g in groups:
                if _close(leads[i], leads[g[0]], scale):
                    g.append(i)
                    break
            else:
                groups.append([i])
        if len(groups) < 2:
            raise NonGenericPathError("no separation at the expected exponent")
        marks = set()
        pos = positions[v]
        if parent is None:
            marks.add(root + 1)
            pos[f"m{root + 1}"] = INF
        else:
            pos[f"v{parent}"] = INF
        for g in groups:
            if len(g) == 1:
                marks.add(g[0] + 1)
                pos[f"m{g[0] + 1}"] = leads[g[0]]
            else:
                child = build(g, v, depth + 1)
                pos[f"v{child}"] = leads[g[0]]
        vertices[v] = VertexLabel(0, frozenset(marks))
        return v

    build(sorted(w), None, 0)
    G = SignatureGraph(tuple(vertices), tuple(edges), path.n)
    tree = BubbleTree(G, tuple(positions))
    if not (is_stable(G) and is_type(G, 0, path.n)):
        raise NonGenericPathError("limit is not a stable genus-0 tree")
    return tree


def verify_limit_uniqueness(
    path: DegenerationPath, transforms: Iterable[Callable[[DegenerationPath], DegenerationPath]]
) -> bool:
    from .signature import signatures_isomorphic

    ref = limit_signature(path).graph
    return all(signatures_isomorphic(ref, limit_signature(T(path)).graph) for T in transforms)


def cross_ratio_limit(path: DegenerationPath, quad: Sequence[int]):
    """Limit of ``cross_ratio`` of four marks (0-based) as ``t -> 0``."""
    S = _point_series(path)
    p, q, r, s = (S[i] for i in quad)

    def det(x, y):
        return _sum_nonzero(x[0] * y[1], _neg(x[1] * y[0]))

    num = det(s, p) * det(q, r)
    den = det(s, r) * det(q, p)
    if num.is_zero or den.is_zero:
        raise NonGenericPathError("cross-ratio degenerate to working precision")
    k = num.val - den.val
    if k > 0:
        return 0j
    if k < 0:
        return INF
    return num.lead / den.lead


def separated_split(tree: BubbleTree, quad: Sequence[int]) -> frozenset | None:
    """The ``2+2`` split of four marks (1-based) cut by some edge, if any."""
    G = tree.graph
    quad = set(quad)
    adj = {v: [] for v in range(G.n_vertices)}
    for i, j in G.edges:
        adj[i].append(j)
        adj[j].append(i)
    for a, b in G.edges:
        seen = {b}
        stack = [b]
        while stack:
            x = stack.pop()
            for y in adj[x]:
                if y != a and y not in seen and not (x == b and y == a):
                    seen.add(y)
                    stack.append(y)
        side = {m for v in seen for m in G.vertices[v].marks} & quad
        if len(side) == 2:
            return frozenset({frozenset(side), frozenset(quad - side)})
    return None


def split_from_limit(lam, quad: Sequence[int]) -> frozenset | None:
    """Which split a limit cross-ratio value indicates (marks 1-based, in the
    argument order of ``cross_ratio``)."""
    p, q, r, s = quad
    if is_inf(lam):
        pair = {s, r}
    elif lam == 0:
        pair = {s, p}
    elif lam == 1:
        pair = {s, q}
    else:
        return None
    return frozenset({frozenset(pair), frozenset(set(quad) - pair)})


def separation(config: SphereConfig) -> float:
    """``min`` over 4-subsets of the distance of the cross-ratio from
    ``{0, 1, inf}``; tends to 0 exactly when the configuration degenerates."""
    best = 1.0
    for lam in config.cross_ratios().values():
        if is_inf(lam):
            return 0.0
        best = min(best, abs(lam), abs(lam - 1), 1 / abs(lam))
    return best


def degeneration_trace(path: DegenerationPath, ts: Iterable[float]) -> list[dict]:
    """Per ``t``: all cross-ratios, separation and the proxy ``2 pi^2 / log(1/sep)``."""
    rows = []
    for t in ts:
        cfg = path.at(t)
        sep = separation(cfg)
        proxy = 2 * math.pi**2 / math.log(1 / sep) if 0 < sep < 1 else (0.0 if sep == 0 else INF)
        rows.append({"t": float(t), "cross_ratios": cfg.cross_ratios(), "separation": sep, "geodesic_proxy": proxy})
    return rows


# example paths used by the demo and the tests
def example_paths() -> dict[str, DegenerationPath]:
    return {
        "four_point": DegenerationPath.from_points([[0], [1], "inf", [0, 1]]),
        "constant": DegenerationPath.from_points([[0], [1], "inf", [0.3 + 0.4j]]),
        "two_clusters": DegenerationPath.from_points([[0], [0, 1], [1], [1, 1], "inf"]),
    }
