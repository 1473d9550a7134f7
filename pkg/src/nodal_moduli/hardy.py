"""Truncated Laurent series with weighted Sobolev/Hardy norms.

A :class:`TruncatedLaurent` stores the coefficients ``c_n`` for
``-N <= n <= N`` of a series ``sum c_n z^n`` on (a neighbourhood of) a circle.
The weighted norm is

    ||zeta||_{r,s} = sqrt( sum (1+|n|)^(2s) r^(2n-2) |c_n|^2 )

and ``rescale(zeta, r)`` is the conjugation ``z -> r^-1 zeta(r z)`` which turns
``||.||_{r,s}`` into ``||.||_{1,s}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy.special import zeta as hurwitz_zeta

DEFAULT_S = 4
DEFAULT_N = 64

RESCALE_MIN = 1e-8
RESCALE_MAX = 1e8


class TruncationLossError(ArithmeticError):
    """Raised when a product drops more mass than allowed."""


class WindingError(ValueError):
    pass


class TruncatedLaurent:
    """Finite Laurent series ``sum_{n=-N}^{N} c_n z^n``.

    Instances are immutable; arithmetic returns new objects.
    """

    __slots__ = ("_c",)

    def __init__(self, coeffs: Sequence[complex] | np.ndarray):
        c = np.array(coeffs, dtype=complex)
        if c.ndim != 1 or c.size % 2 != 1 or c.size < 3:
            raise ValueError("coefficient array must have odd length 2N+1 with N >= 1")
        c.setflags(write=False)
        self._c = c

    # -- constructors -------------------------------------------------
    @classmethod
    def zeros(cls, N: int = DEFAULT_N) -> "TruncatedLaurent":
        return cls(np.zeros(2 * N + 1, dtype=complex))

    @classmethod
    def monomial(cls, n: int, N: int = DEFAULT_N, c: complex = 1.0) -> "TruncatedLaurent":
        if abs(n) > N:
            raise ValueError(f"mode {n} outside truncation N={N}")
        arr = np.zeros(2 * N + 1, dtype=complex)
        arr[n + N] = c
        return cls(arr)

    @classmethod
    def identity(cls, N: int = DEFAULT_N) -> "TruncatedLaurent":
        return cls.monomial(1, N)

    @classmethod
    def constant(cls, c: complex, N: int = DEFAULT_N) -> "TruncatedLaurent":
        return cls.monomial(0, N, c)

    @classmethod
    def from_modes(cls, modes: dict[int, complex], N: int = DEFAULT_N) -> "TruncatedLaurent":
        arr = np.zeros(2 * N + 1, dtype=complex)
        for n, c in modes.items():
            if abs(n) > N:
                raise ValueError(f"mode {n} outside truncation N={N}")
            arr[n + N] += c
        return cls(arr)

    # -- accessors ----------------------------------------------------
    @property
    def N(self) -> int:
        return (self._c.size - 1) // 2

    @property
    def coeffs(self) -> np.ndarray:
        """Read-only view, index ``i`` holds mode ``i - N``."""
        return self._c

    @property
    def modes(self) -> np.ndarray:
        return np.arange(-self.N, self.N + 1)

    def __getitem__(self, n: int) -> complex:
        if abs(n) > self.N:
            return 0j
        return complex(self._c[n + self.N])

    def with_truncation(self, N: int) -> "TruncatedLaurent":
        """Pad with zeros or drop modes ``|n| > N``."""
        if N == self.N:
            return self
        out = np.zeros(2 * N + 1, dtype=complex)
        m = min(N, self.N)
        out[N - m:N + m + 1] = self._c[self.N - m:self.N + m + 1]
        return TruncatedLaurent(out)

    # -- arithmetic ---------------------------------------------------
    def _coerce(self, other) -> np.ndarray:
        if isinstance(other, TruncatedLaurent):
            if other.N != self.N:
                raise ValueError(f"truncation mismatch: {self.N} vs {other.N}")
            return other._c
        if np.isscalar(other):
            arr = np.zeros_like(self._c)
            arr[self.N] = other
            return arr
        return NotImplemented

    def __add__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return TruncatedLaurent(self._c + o)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return TruncatedLaurent(self._c - o)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return TruncatedLaurent(o - self._c)

    def __neg__(self):
        return TruncatedLaurent(-self._c)

    def __mul__(self, other):
        if isinstance(other, TruncatedLaurent):
            return product(self, other)
        if np.isscalar(other):
            return TruncatedLaurent(self._c * other)
        return NotImplemented

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, TruncatedLaurent):
            return NotImplemented
        return self.N == other.N and bool(np.array_equal(self._c, other._c))

    def __hash__(self):
        return hash(self._c.tobytes())

    def __call__(self, z):
        return evaluate(self, z)

    def allclose(self, other: "TruncatedLaurent", atol: float = 1e-12) -> bool:
        return self.N == other.N and bool(np.max(np.abs(self._c - other._c), initial=0.0) <= atol)

    def __repr__(self):
        nz = {int(n): complex(c) for n, c in zip(self.modes, self._c) if c != 0}
        if len(nz) > 6:
            return f"TruncatedLaurent(N={self.N}, nnz={len(nz)})"
        return f"TruncatedLaurent(N={self.N}, {nz})"


@dataclass(frozen=True)
class SobolevParams:
    """Weight exponent ``s`` and radius ``r`` of the space ``H^s_r``."""

    s: float = DEFAULT_S
    r: float = 1.0

    def __post_init__(self):
        if not self.s > 0.5:
            raise ValueError(f"s must exceed 1/2, got {self.s}")
        if not 0 < self.r <= 1:
            raise ValueError(f"r must lie in (0, 1], got {self.r}")


# -- norms ------------------------------------------------------------

def _scaled_abs(c: np.ndarray, modes: np.ndarray, r: float) -> np.ndarray:
    """``r^(n-1) |c_n|`` evaluated in the log domain (no overflow)."""
    mag = np.abs(c)
    out = np.zeros_like(mag)
    nz = mag > 0
    if r == 1.0:
        out[nz] = mag[nz]
    else:
        out[nz] = np.exp((modes[nz] - 1) * math.log(r) + np.log(mag[nz]))
    return out


def weighted_terms(zeta: TruncatedLaurent, s: float, r: float = 1.0) -> np.ndarray:
    """``(1+|n|)^s r^(n-1) |c_n|``; the norm is their Euclidean length."""
    n = zeta.modes
    return (1.0 + np.abs(n)) ** s * _scaled_abs(zeta.coeffs, n, r)


def norm(zeta: TruncatedLaurent, s: float = DEFAULT_S, r: float = 1.0) -> float:
    """The norm ``||zeta||_{r,s}``; ``r = 1`` gives ``||zeta||_s``."""
    if not s > 0.5:
        raise ValueError(f"s must exceed 1/2, got {s}")
    if not r > 0:
        raise ValueError(f"r must be positive, got {r}")
    terms = weighted_terms(zeta, s, r)
    top = float(np.max(terms))
    if top == 0.0:
        return 0.0
    # scale before squaring so tiny or huge terms neither underflow nor
    # overflow; fsum in descending order keeps the partials well conditioned
    q = np.sort(terms / top)[::-1]
    return top * math.sqrt(math.fsum(q * q))


def split(zeta: TruncatedLaurent) -> tuple[TruncatedLaurent, TruncatedLaurent]:
    """``(zeta_plus, zeta_minus)`` with modes ``n > 0`` and ``n <= 0``."""
    c = zeta.coeffs
    N = zeta.N
    plus = c.copy()
    plus[: N + 1] = 0
    minus = c.copy()
    minus[N + 1:] = 0
    return TruncatedLaurent(plus), TruncatedLaurent(minus)


def rescale(zeta: TruncatedLaurent, r: float) -> TruncatedLaurent:
    """``zeta_r(z) = r^-1 zeta(r z)``, i.e. ``c_n -> r^(n-1) c_n``."""
    if not RESCALE_MIN <= r <= RESCALE_MAX:
        raise ValueError(f"rescale radius {r} outside [{RESCALE_MIN}, {RESCALE_MAX}]")
    c = zeta.coeffs
    mag = _scaled_abs(c, zeta.modes, r)
    phase = np.ones_like(c)
    nz = c != 0
    phase[nz] = c[nz] / np.abs(c[nz])
    return TruncatedLaurent(mag * phase)


def rotate(zeta: TruncatedLaurent, theta: float) -> TruncatedLaurent:
    """``z -> e^{-i theta} zeta(e^{i theta} z)``."""
    return TruncatedLaurent(zeta.coeffs * np.exp(1j * (zeta.modes - 1) * theta))


def _full_product(xi: TruncatedLaurent, eta: TruncatedLaurent) -> np.ndarray:
    if xi.N != eta.N:
        raise ValueError(f"truncation mismatch: {xi.N} vs {eta.N}")
    return np.convolve(xi.coeffs, eta.coeffs)


def truncation_loss(xi: TruncatedLaurent, eta: TruncatedLaurent, s: float = DEFAULT_S) -> float:
    """Weighted norm of the product modes ``|n| > N`` that ``product`` drops."""
    full = _full_product(xi, eta)
    N = xi.N
    n = np.arange(-2 * N, 2 * N + 1)
    dropped = np.abs(n) > N
    terms = ((1.0 + np.abs(n[dropped])) ** s * np.abs(full[dropped])) ** 2
    return math.sqrt(math.fsum(terms))


def product(
    xi: TruncatedLaurent,
    eta: TruncatedLaurent,
    *,
    loss_tol: float | None = None,
    s: float = DEFAULT_S,
) -> TruncatedLaurent:
    """Cauchy product truncated back to ``|n| <= N``.

    With ``loss_tol`` set, raises :class:`TruncationLossError` if the dropped
    modes have ``||.||_s`` above it.
    """
    full = _full_product(xi, eta)
    N = xi.N
    if loss_tol is not None:
        loss = truncation_loss(xi, eta, s)
        if loss > loss_tol:
            raise TruncationLossError(f"product dropped mass {loss:.3e} > {loss_tol:.3e}")
    return TruncatedLaurent(full[N:3 * N + 1])


def evaluate(zeta: TruncatedLaurent, z):
    """``sum c_n z^n`` by Horner in ``z`` (n >= 0) and ``1/z`` (n < 0)."""
    z_arr = np.asarray(z, dtype=complex)
    N = zeta.N
    c = zeta.coeffs
    pos = c[N:]  # modes 0..N
    neg = c[:N][::-1]  # modes -1..-N
    has_neg = bool(np.any(neg != 0))
    if has_neg and np.any(z_arr == 0):
        raise ZeroDivisionError("evaluation at z=0 of a series with negative modes")
    val = np.polyval(pos[::-1], z_arr)
    if has_neg:
        w = 1.0 / z_arr
        # sum_{k>=1} c_{-k} w^k = w * poly(w)
        val = val + w * np.polyval(neg[::-1], w)
    if np.ndim(z) == 0:
        return complex(val)
    return val


def circle_values(zeta: TruncatedLaurent, M: int, radius: float = 1.0) -> np.ndarray:
    """Values at ``radius * exp(2 pi i k / M)``, ``k = 0..M-1``."""
    theta = 2 * np.pi * np.arange(M) / M
    return evaluate(zeta, radius * np.exp(1j * theta))


# -- explicit constants -----------------------------------------------

def sobolev_constant(s: float) -> float:
    """``sqrt(1 + sum_{n>=1} n^(-2s))``, the sup-bound constant on annuli."""
    if not s > 0.5:
        raise ValueError("s must exceed 1/2")
    return math.sqrt(1.0 + float(hurwitz_zeta(2 * s, 1)))


def circle_sup_constant(s: float) -> float:
    """``sqrt(sum_{n in Z} (1+|n|)^(-2s))``: ``sup_{|z|=1} |zeta| <= this * ||zeta||_s``."""
    return math.sqrt(2.0 * float(hurwitz_zeta(2 * s, 1)) - 1.0)


def _product_sum_tail(K: int, s: float) -> float:
    """Bound on ``S(k)`` valid for every ``k > K``."""
    neg = float(hurwitz_zeta(2 * s, 2))  # n < 0
    half = K // 2
    n = np.arange(0, half + 1, dtype=float)
    mid = math.fsum(((1.0 + K) / (1.0 + K - n)) ** (2 * s) * (1.0 + n) ** (-2 * s))
    far = 2.0 ** (2 * s) * float(hurwitz_zeta(2 * s, half + 2))
    return 2.0 * (neg + mid + far)


@lru_cache(maxsize=None)
def product_constant_bounds(s: float, K: int = 2048, W: int = 256) -> tuple[float, float]:
    """``(lower, upper)`` bracket for the product-estimate constant ``C``.

    ``C^2 = sup_k S(k)``; the lower value is the max over ``|k| <= K`` of the
    windowed sums without tail, the upper one adds rigorous tails and the
    ``k > K`` bound.
    """
    if not s > 0.5:
        raise ValueError("s must exceed 1/2")
    # S(k) = sum_n (1+k)^2s / ((1+|k-n|)^2s (1+|n|)^2s), symmetric in k -> -k
    lower = 0.0
    for k in range(K + 1):
        n = np.arange(-W, k + W + 1, dtype=float)
        t = ((1.0 + k) / ((1.0 + np.abs(k - n)) * (1.0 + np.abs(n)))) ** (2 * s)
        lower = max(lower, math.fsum(t))
    # outside the window the k-ratio is <= 1 on both sides
    window_tail = 2.0 * float(hurwitz_zeta(2 * s, W + 2))
    upper = max(lower + window_tail, _product_sum_tail(K, s))
    return math.sqrt(lower), math.sqrt(upper)


def product_constant(s: float) -> float:
    """Upper bound for the product-estimate constant (safe to use in checks)."""
    return product_constant_bounds(float(s))[1]


# -- checks -----------------------------------------------------------

@dataclass(frozen=True)
class SupBound:
    passed: bool
    sup: float
    bound: float
    constant: float


def sup_annulus_bound_check(
    zeta: TruncatedLaurent, r: float, R: float, s: float = DEFAULT_S, n_samples: int = 4096
) -> SupBound:
    """Sample ``|zeta|`` on both boundary circles of ``r <= |z| <= R`` and
    compare with ``c (r ||zeta_-||_{r,s} + R ||zeta_+||_{R,s})``."""
    if not 0 < r <= R:
        raise ValueError("need 0 < r <= R")
    plus, minus = split(zeta)
    c = sobolev_constant(s)
    bound = c * (r * norm(minus, s, r) + R * norm(plus, s, R))
    sup = max(
        float(np.max(np.abs(circle_values(zeta, n_samples, r)))),
        float(np.max(np.abs(circle_values(zeta, n_samples, R)))),
    )
    # one ulp-scale slack for the sampled sup
    return SupBound(sup <= bound * (1 + 1e-12), sup, bound, c)


def winding_number(samples: Iterable[complex]) -> int:
    """Winding number about 0 of the closed polygon through ``samples``."""
    z = np.asarray(list(samples) if not isinstance(samples, np.ndarray) else samples, dtype=complex)
    if z.size < 3:
        raise WindingError("need at least three samples")
    if np.any(z == 0):
        raise WindingError("loop passes through the origin")
    steps = np.angle(np.roll(z, -1) / z)
    if np.any(np.abs(steps) >= np.pi * (1 - 1e-12)):
        raise WindingError("angular jump >= pi between adjacent samples; refine sampling")
    total = float(np.sum(steps)) / (2 * np.pi)
    k = round(total)
    if abs(total - k) > 1e-6:
        raise WindingError(f"non-integral winding {total}")
    return int(k)
