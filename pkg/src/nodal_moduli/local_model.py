"""Standard-node gluing: solve ``xi(x) eta(a/x) = b`` near the identity.

Given ``a`` in the unit disk and positive-mode germs ``xi_+``, ``eta_+`` close
to ``id``, the map ``T(a, xi_+, eta_+) = (b, xi_-, eta_-)`` produces
nonpositive-mode corrections and the constant ``b``.

Internally the unknowns live in the rescaled coordinates of ``H^s_r``
(``r = sqrt|a|``): with ``X = (xi_-)_r`` and ``Y = (eta_-)_r`` the residual is

    F_r(lam, xi, eta)(z) = xi_r(z) * eta_r(1/z) - lam,      |z| = 1,

and the linearization at ``(1, id, id)`` is the mode shift

    D_r(lam^, xi^, eta^)_k = (xi^_r)_{k+1} + (eta^_r)_{1-k} - lam^ [k == 0],

which is inverted mode by mode. Newton iterates with this frozen operator.
Complex ``a`` is reduced to ``a > 0`` by rotating the inputs.
"""

from __future__ import annotations

import cmath
import logging
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable

import numpy as np

from .hardy import (
    DEFAULT_N,
    DEFAULT_S,
    TruncatedLaurent,
    circle_sup_constant,
    evaluate,
    norm,
    product_constant,
    rescale,
    rotate,
    sobolev_constant,
    split,
    winding_number,
)

log = logging.getLogger(__name__)


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class DomainError(ValueError):
    """Inputs outside the admissible ball around the identity."""


class ExtensionError(ValueError):
    pass


# -- constants ---------------------------------------------------------

@dataclass(frozen=True)
class ModelConstants:
    """Explicit constants for weight ``s``."""

    s: float
    sobolev: float  # sup over annuli
    circle_sup: float  # sup on |z|=1 against the full ||.||_s
    product: float  # C
    approx: float  # 4 sqrt(3) C
    quadratic: float  # C

    @property
    def c(self) -> float:
        """One constant >= 1 serving the sup, approximate-solution and quadratic bounds."""
        return max(1.0, self.sobolev, self.approx, self.quadratic)

    @classmethod
    def for_s(cls, s: float) -> "ModelConstants":
        C = product_constant(float(s))
        return cls(
            s=float(s),
            sobolev=sobolev_constant(s),
            circle_sup=circle_sup_constant(s),
            product=C,
            approx=4 * math.sqrt(3) * C,
            quadratic=C,
        )


def derived_radii(k: ModelConstants) -> tuple[float, float]:
    """Largest ``(delta, eps)`` (times 0.99) meeting the existence and
    uniqueness constraints.

    existence:  3 c eps < 1/2,  c sqrt(2 delta^2 + 3 eps^2) <= 1/2,  2 c delta <= eps/2
    uniqueness: 2 c_sob delta <= 1,  8 C (1 + c_sob) eps < 1
    graph:      4 c delta < eps
    """
    c = k.c
    eps = 0.99 * min(1 / (6 * c), 1 / (8 * k.product * (1 + k.sobolev)))
    d_sq = (0.25 / c**2 - 3 * eps**2) / 2
    delta = 0.99 * min(eps / (4 * c), math.sqrt(d_sq) if d_sq > 0 else 0.0, 1 / (2 * k.sobolev))
    return delta, eps


@dataclass(frozen=True)
class SolverConfig:
    s: float = DEFAULT_S
    N: int = DEFAULT_N
    delta: float | None = None
    eps: float | None = None
    tol: float = 1e-11
    max_iter: int = 50

    def __post_init__(self):
        if not self.s > 0.5:
            raise ValueError("s must exceed 1/2")
        if self.N < 2:
            raise ValueError("truncation N must be >= 2")
        if self.tol <= 0 or self.max_iter < 1:
            raise ValueError("tol must be positive and max_iter >= 1")
        if self.delta is None or self.eps is None:
            d, e = derived_radii(self.constants)
            if self.delta is None:
                object.__setattr__(self, "delta", d)
            if self.eps is None:
                object.__setattr__(self, "eps", e)
        if self.delta <= 0 or self.eps <= 0:
            raise ValueError("delta and eps must be positive")

    @cached_property
    def constants(self) -> ModelConstants:
        return ModelConstants.for_s(self.s)

    def chain_report(self) -> dict[str, bool]:
        """Which of the constant constraints hold for this ``(delta, eps)``."""
        k = self.constants
        c, d, e = k.c, self.delta, self.eps
        rho = math.sqrt(3) * e
        return {
            "3c*eps<1/2": 3 * c * e < 0.5,
            "c*sqrt(2delta^2+rho^2)<=1/2": c * math.sqrt(2 * d**2 + rho**2) <= 0.5,
            "2c*delta<=eps/2": 2 * c * d <= e / 2,
            "2c_sob*delta<=1": 2 * k.sobolev * d <= 1,
            "8C(1+c_sob)eps<1": 8 * k.product * (1 + k.sobolev) * e < 1,
            "4c*delta<eps": 4 * c * d < e,
        }

    def chain_holds(self) -> bool:
        return all(self.chain_report().values())


# -- data --------------------------------------------------------------

@dataclass(frozen=True)
class GluingDatum:
    """Quadruple ``(a, xi, eta, b)`` with ``xi = xi_+ + xi_-`` etc."""

    a: complex
    xi: TruncatedLaurent
    eta: TruncatedLaurent
    b: complex

    @property
    def r(self) -> float:
        return math.sqrt(abs(self.a))

    @property
    def N(self) -> int:
        return self.xi.N

    def parts(self):
        """``(xi_+, xi_-, eta_+, eta_-)``."""
        xp, xm = split(self.xi)
        ep, em = split(self.eta)
        return xp, xm, ep, em

    def xi_at(self, x):
        """``xi(x)`` on ``|a| <= |x| <= 1``; below ``r`` via ``b / eta(a/x)``."""
        return _branch_eval(self.xi, self.eta, self.a, self.b, x)

    def eta_at(self, y):
        return _branch_eval(self.eta, self.xi, self.a, self.b, y)


def _branch_eval(f: TruncatedLaurent, g: TruncatedLaurent, a: complex, b: complex, x):
    x_arr = np.asarray(x, dtype=complex)
    out = np.empty_like(x_arr)
    if a == 0:
        out[...] = evaluate(f, x_arr)
    else:
        r = math.sqrt(abs(a))
        inner = np.abs(x_arr) < r
        if np.any(~inner):
            out[~inner] = evaluate(f, x_arr[~inner])
        if np.any(inner):
            out[inner] = b / evaluate(g, a / x_arr[inner])
    return complex(out) if np.ndim(x) == 0 else out


# -- residual and linearization ----------------------------------------

def _weights(N: int, s: float) -> np.ndarray:
    return (1.0 + np.abs(np.arange(-N, N + 1))) ** s


def _fast_norm(v: np.ndarray, w: np.ndarray) -> float:
    return float(np.sqrt(np.sum((w * np.abs(v)) ** 2)))


def _residual_rescaled(lam: complex, xi_r: np.ndarray, eta_r: np.ndarray) -> np.ndarray:
    N = (xi_r.size - 1) // 2
    f = np.convolve(xi_r, eta_r[::-1])[N:3 * N + 1]
    f[N] -= lam
    return f


def residual_F_r(r: float, lam: complex, xi: TruncatedLaurent, eta: TruncatedLaurent) -> TruncatedLaurent:
    """Coefficients of ``z -> r^-2 xi(rz) eta(r/z) - lam`` on ``|z| = 1``,
    truncated to ``|k| <= N``."""
    if not 0 < r <= 1:
        raise ValueError("r must lie in (0, 1]")
    if xi.N != eta.N:
        raise ValueError("truncation mismatch")
    return TruncatedLaurent(
        _residual_rescaled(lam, rescale(xi, r).coeffs, rescale(eta, r).coeffs)
    )


def linearization_D_r(
    r: float, lhat: complex, xihat: TruncatedLaurent, etahat: TruncatedLaurent
) -> TruncatedLaurent:
    """``D_r(lhat, xihat, etahat)(z) = r^-1 z^-1 xihat(rz) + r^-1 z etahat(r/z) - lhat``."""
    if not 0 < r <= 1:
        raise ValueError("r must lie in (0, 1]")
    N = xihat.N
    X = rescale(xihat, r).coeffs
    Y = rescale(etahat, r).coeffs
    out = np.zeros(2 * N + 1, dtype=complex)
    # mode k receives X_{k+1}: shift X down by one
    out[:-1] += X[1:]
    # mode k receives Y_{1-k}: reverse Y and shift by one
    out[1:] += Y[::-1][:-1]
    out[N] -= lhat
    return TruncatedLaurent(out)


def _solve_D_rescaled(f: np.ndarray) -> tuple[complex, np.ndarray, np.ndarray]:
    N = (f.size - 1) // 2
    X = np.zeros_like(f)
    Y = np.zeros_like(f)
    X[1:N + 1] = f[0:N]  # X_m = f_{m-1}, -N+1 <= m <= 0
    Y[1:N + 1] = f[N + 1:][::-1]  # Y_m = f_{1-m}
    return complex(-f[N]), X, Y


def solve_D_r_on_minus(
    r: float, rhs: TruncatedLaurent
) -> tuple[complex, TruncatedLaurent, TruncatedLaurent]:
    """Invert ``D_r`` on ``C x H^s_{r,-} x H^s_{r,-}``; returns unscaled parts.

    Mode ``-N`` of the corrections is always zero (it would map outside the
    truncation).
    """
    if not 0 < r <= 1:
        raise ValueError("r must lie in (0, 1]")
    lam, X, Y = _solve_D_rescaled(np.array(rhs.coeffs))
    return lam, rescale(TruncatedLaurent(X), 1 / r), rescale(TruncatedLaurent(Y), 1 / r)


def minus_triple_norm(lhat: complex, xim: TruncatedLaurent, etam: TruncatedLaurent, r: float, s: float) -> float:
    return math.sqrt(abs(lhat) ** 2 + norm(xim, s, r) ** 2 + norm(etam, s, r) ** 2)


def approximate_solution_estimate(
    r: float, xi_plus: TruncatedLaurent, eta_plus: TruncatedLaurent, s: float = DEFAULT_S
) -> tuple[float, float]:
    """``(||F_r(xi_1 eta_1, xi_+, eta_+)||_s, c r (||xi_+ - id||_s + ||eta_+ - id||_s))``
    with ``c = 4 sqrt(3) C``."""
    k = ModelConstants.for_s(s)
    lam0 = xi_plus[1] * eta_plus[1]
    idn = TruncatedLaurent.identity(xi_plus.N)
    lhs = norm(residual_F_r(r, lam0, xi_plus, eta_plus), s)
    rhs = k.approx * r * (norm(xi_plus - idn, s) + norm(eta_plus - idn, s))
    return lhs, rhs


def quadratic_estimate(
    r: float,
    xi: TruncatedLaurent,
    eta: TruncatedLaurent,
    xihat: TruncatedLaurent,
    etahat: TruncatedLaurent,
    s: float = DEFAULT_S,
) -> tuple[float, float]:
    """``||(dF_r(lam, xi, eta) - D_r)(lhat, xihat, etahat)||_s`` against
    ``C (||eta - id||_{r,s} ||xihat||_{r,s} + ||xi - id||_{r,s} ||etahat||_{r,s})``.

    The left side does not depend on ``lam`` or ``lhat``.
    """
    k = ModelConstants.for_s(s)
    idn = TruncatedLaurent.identity(xi.N)
    dxi, deta = xi - idn, eta - idn
    Xh, Yh = rescale(xihat, r).coeffs, rescale(etahat, r).coeffs
    dX, dY = rescale(dxi, r).coeffs, rescale(deta, r).coeffs
    N = xi.N
    diff = np.convolve(Xh, dY[::-1])[N:3 * N + 1] + np.convolve(dX, Yh[::-1])[N:3 * N + 1]
    lhs = norm(TruncatedLaurent(diff), s)
    rhs = k.quadratic * (norm(deta, s, r) * norm(xihat, s, r) + norm(dxi, s, r) * norm(etahat, s, r))
    return lhs, rhs


# -- the Newton map ----------------------------------------------------

@dataclass
class SolveReport:
    """Diagnostics of one solve (rescaled, rotated frame)."""

    iterations: int = 0
    residual: float = 0.0
    f0_norm: float = 0.0  # ||f(u0)||_s
    step_norm: float = 0.0  # ||u - u0||_U
    history: list[float] = field(default_factory=list)
    # quantities of the continuity estimate
    lam_dev: float = 0.0  # |b/a - xi_1 eta_1|
    xi_minus_rs: float = 0.0  # ||xi_-||_{r,s}
    eta_minus_rs: float = 0.0
    input_dist: float = 0.0  # ||xi_+ - id||_s + ||eta_+ - id||_s

    @property
    def ift_ratio(self) -> float:
        """``||u - u0|| / ||f(u0)||``; at most 2 when the contraction argument applies."""
        return self.step_norm / self.f0_norm if self.f0_norm > 0 else 0.0

    def continuity_constant(self, r: float) -> float:
        """Measured ``c`` in ``lhs <= 2 c r (||xi_+ - id|| + ||eta_+ - id||)``."""
        denom = 2 * r * self.input_dist
        lhs = self.lam_dev + self.xi_minus_rs + self.eta_minus_rs
        return lhs / denom if denom > 0 else 0.0

    def as_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "residual": self.residual,
            "f0_norm": self.f0_norm,
            "step_norm": self.step_norm,
            "ift_ratio": self.ift_ratio,
            "lam_dev": self.lam_dev,
            "xi_minus_rs": self.xi_minus_rs,
            "eta_minus_rs": self.eta_minus_rs,
            "input_dist": self.input_dist,
        }


@dataclass(frozen=True)
class GluingSolution:
    datum: GluingDatum
    report: SolveReport
    # rotated/rescaled state, reused by probes
    theta: float
    lam: complex
    X: np.ndarray = field(repr=False)
    Y: np.ndarray = field(repr=False)
    P: np.ndarray = field(repr=False)
    Q: np.ndarray = field(repr=False)


def _check_plus(z: TruncatedLaurent, name: str, cfg: SolverConfig) -> TruncatedLaurent:
    if z.N != cfg.N:
        z = z.with_truncation(cfg.N)
    if np.any(z.coeffs[: z.N + 1] != 0):
        raise DomainError(f"{name} must have only positive modes")
    dist = norm(z - TruncatedLaurent.identity(cfg.N), cfg.s)
    if not dist < cfg.delta:
        raise DomainError(f"||{name} - id||_s = {dist:.3e} not below delta = {cfg.delta:.3e}")
    return z


def _iterate(lam, X, Y, P, Q, w, tol, max_iter, report: SolveReport | None = None):
    """Frozen-linearization Newton ``u <- u - D^-1 f(u)`` in rescaled variables."""
    N = (P.size - 1) // 2
    res = math.inf
    for it in range(max_iter + 1):
        f = _residual_rescaled(lam, P + X, Q + Y)
        res = _fast_norm(f, w)
        if report is not None:
            report.history.append(res)
        if res <= tol:
            return lam, X, Y, it, res
        if it == max_iter or not math.isfinite(res):
            break
        lam = lam + f[N]
        X[1:N + 1] -= f[0:N]
        Y[1:N + 1] -= f[N + 1:][::-1]
    raise ConvergenceError(f"no convergence in {max_iter} iterations (residual {res:.3e})", res, max_iter)


def solve_gluing(
    a: complex,
    xi_plus: TruncatedLaurent,
    eta_plus: TruncatedLaurent,
    cfg: SolverConfig | None = None,
) -> GluingSolution:
    """Compute ``T(a, xi_+, eta_+)`` with diagnostics."""
    cfg = cfg or SolverConfig()
    a = complex(a)
    if not abs(a) < 1:
        raise DomainError("|a| must be < 1")
    xp = _check_plus(xi_plus, "xi_+", cfg)
    ep = _check_plus(eta_plus, "eta_+", cfg)
    N = cfg.N
    ident = TruncatedLaurent.identity(N)
    report = SolveReport(input_dist=norm(xp - ident, cfg.s) + norm(ep - ident, cfg.s))
    zero = np.zeros(2 * N + 1, dtype=complex)
    if a == 0:
        datum = GluingDatum(0j, xp, ep, 0j)
        return GluingSolution(datum, report, 0.0, xp[1] * ep[1], zero, zero.copy(), xp.coeffs, ep.coeffs)

    r = math.sqrt(abs(a))
    theta = cmath.phase(a) / 2
    P = rescale(rotate(xp, theta), r).coeffs.copy()
    Q = rescale(rotate(ep, theta), r).coeffs.copy()
    w = _weights(N, cfg.s)

    lam0 = complex(P[N + 1] * Q[N + 1])
    report.f0_norm = _fast_norm(_residual_rescaled(lam0, P, Q), w)
    lam, X, Y, its, res = _iterate(lam0, zero.copy(), zero.copy(), P, Q, w, cfg.tol, cfg.max_iter, report)
    report.iterations = its
    report.residual = res
    Xs, Ys = TruncatedLaurent(X), TruncatedLaurent(Y)
    nX, nY = norm(Xs, cfg.s), norm(Ys, cfg.s)
    report.step_norm = math.sqrt(abs(lam - lam0) ** 2 + nX**2 + nY**2)
    report.lam_dev = float(abs(lam - lam0))
    report.xi_minus_rs = nX
    report.eta_minus_rs = nY

    # back to the unrotated, unscaled frame
    xi_m = rotate(rescale(Xs, 1 / r), -theta)
    eta_m = rotate(rescale(Ys, 1 / r), -theta)
    b = lam * abs(a) * cmath.exp(2j * theta)
    datum = GluingDatum(a, xp + xi_m, ep + eta_m, b)
    return GluingSolution(datum, report, theta, lam, X, Y, P, Q)


def newton_T(a, xi_plus, eta_plus, cfg: SolverConfig | None = None) -> GluingDatum:
    """Solve the gluing equation; ``a = 0`` returns ``(0, xi_+, eta_+, 0)``."""
    return solve_gluing(a, xi_plus, eta_plus, cfg).datum


def T_map(a, xi_plus, eta_plus, cfg: SolverConfig | None = None):
    """``(b, xi_-, eta_-)``."""
    d = newton_T(a, xi_plus, eta_plus, cfg)
    _, xm, _, em = d.parts()
    return d.b, xm, em


def T_norm(b: complex, xi_m: TruncatedLaurent, eta_m: TruncatedLaurent, s: float) -> float:
    return math.sqrt(abs(b) ** 2 + norm(xi_m, s) ** 2 + norm(eta_m, s) ** 2)


# -- datum checks ------------------------------------------------------

def eq_ab_residual(d: GluingDatum, n_samples: int | None = None) -> float:
    """``sup |xi(x) eta(a/x) - b| / |a|`` over ``|x| = sqrt|a|``."""
    if d.a == 0:
        return max(abs(d.b), abs(d.xi[0]), abs(d.eta[0]))
    M = n_samples or 8 * d.N
    r = d.r
    phi = cmath.phase(d.a)
    w = np.exp(2j * np.pi * np.arange(M) / M)
    # xi(r w) = r xi_r(w),  eta(a/(r w)) = r eta_r(e^{i phi}/w)
    xv = evaluate(rescale(d.xi, r), w)
    ev = evaluate(rescale(d.eta, r), np.exp(1j * phi) / w)
    return float(np.max(np.abs(xv * ev - d.b / abs(d.a))))


@dataclass(frozen=True)
class DatumCheck:
    residual: float
    winding_xi: int
    winding_eta: int
    node_ok: bool

    @property
    def passed(self) -> bool:
        return self.winding_xi == 1 and self.winding_eta == 1 and self.node_ok

    def within(self, tol: float) -> bool:
        return self.passed and self.residual <= tol


def check_datum(d: GluingDatum, n_samples: int = 512, tol: float = 1e-9) -> DatumCheck:
    circle = np.exp(2j * np.pi * np.arange(n_samples) / n_samples)
    wx = winding_number(evaluate(d.xi, circle))
    we = winding_number(evaluate(d.eta, circle))
    node_ok = True
    if d.a == 0:
        node_ok = d.b == 0 and abs(d.xi[0]) <= tol and abs(d.eta[0]) <= tol
    return DatumCheck(eq_ab_residual(d), wx, we, node_ok)


@dataclass(frozen=True)
class Extension:
    radii: np.ndarray
    theta: np.ndarray
    values: np.ndarray  # xi on r^2 <= |x| <= r, shape (len(radii), len(theta))
    mismatch: float  # sup |b/eta(a/x) - xi(x)| / r on |x| = r
    nonvanishing: float  # sup |eta(y)/y - 1| on r <= |y| <= 1
    tol: float

    @property
    def continuous(self) -> bool:
        return self.mismatch <= self.tol


def extend_across(d: GluingDatum, n_theta: int = 512, n_radii: int = 9, tol: float = 1e-10) -> Extension:
    """Continue ``xi`` into ``r^2 <= |x| <= r`` by ``xi(x) = b / eta(a/x)``."""
    if d.a == 0:
        raise ExtensionError("no annulus for a = 0")
    r = d.r
    theta = 2 * np.pi * np.arange(n_theta) / n_theta
    ring = np.exp(1j * theta)
    # eta on the band r <= |y| <= 1 must stay away from 0
    ys = np.geomspace(r, 1.0, n_radii)[:, None] * ring
    q = float(np.max(np.abs(evaluate(d.eta, ys) / ys - 1)))
    if not q < 1:
        raise ExtensionError(f"eta may vanish in the band: sup|eta(y)/y - 1| = {q:.3g}")
    radii = np.geomspace(r * r, r, n_radii)
    xs = radii[:, None] * ring
    vals = d.b / evaluate(d.eta, d.a / xs)
    # xi_r(w) evaluated stably on |w| = 1
    laurent = r * evaluate(rescale(d.xi, r), ring)
    mismatch = float(np.max(np.abs(vals[-1] - laurent))) / r
    return Extension(radii, theta, vals, mismatch, q, tol)


# -- a priori estimates ------------------------------------------------

def apriori_constant(delta: float, s: float) -> float:
    """Explicit ``c`` valid for ``||xi - id||_s, ||eta - id||_s <= delta``.

    Uses ``b/a = xi_1 / I`` with ``I = (2 pi i)^-1 oint_{|y|=1} dy / eta(y)``,
    the circle bound ``sup_{|z|=1} |zeta| <= c_inf ||zeta||_s`` and the maximum
    principle on the annulus. Requires ``c_inf delta < 1``.
    """
    ci = circle_sup_constant(s)
    q = ci * delta
    if not q < 1:
        return math.inf
    e = q / (1 - q)  # |1/eta(y) - 1/y| and |y/eta(y) - 1| on |y| = 1
    e_xi1 = delta / 2**s  # |xi_1 - 1|
    if not e < 1:
        return math.inf
    e1 = (e_xi1 + e) / (1 - e)  # |b/a - 1|
    e2 = max(q, (1 + e1) * e + e1)
    return max(e1, e2) / delta


@dataclass(frozen=True)
class AprioriReport:
    ratio_dev: float  # |b/a - 1|
    xi_dev: float  # sup |xi(x)/x - 1|
    eta_dev: float
    delta: float
    c: float
    datum_delta: float  # max(||xi - id||_s, ||eta - id||_s)

    @property
    def in_ball(self) -> bool:
        return self.datum_delta < self.delta

    @property
    def passed(self) -> bool:
        bound = self.c * self.delta
        return self.ratio_dev < bound and self.xi_dev <= bound and self.eta_dev <= bound

    @property
    def empirical_c(self) -> float:
        return max(self.ratio_dev, self.xi_dev, self.eta_dev) / self.datum_delta if self.datum_delta else 0.0


def apriori_check(d: GluingDatum, cfg: SolverConfig | None = None, n_theta: int = 256, n_radii: int = 9) -> AprioriReport:
    cfg = cfg or SolverConfig(N=d.N)
    if d.a == 0:
        raise ValueError("a priori estimates need a != 0")
    ident = TruncatedLaurent.identity(d.N)
    dd = max(norm(d.xi - ident, cfg.s), norm(d.eta - ident, cfg.s))
    ring = np.exp(2j * np.pi * np.arange(n_theta) / n_theta)
    radii = np.geomspace(abs(d.a), 1.0, n_radii)
    xs = (radii[:, None] * ring).ravel()
    xi_dev = float(np.max(np.abs(d.xi_at(xs) / xs - 1)))
    eta_dev = float(np.max(np.abs(d.eta_at(xs) / xs - 1)))
    return AprioriReport(
        ratio_dev=float(abs(d.b / d.a - 1)),
        xi_dev=xi_dev,
        eta_dev=eta_dev,
        delta=cfg.delta,
        c=apriori_constant(cfg.delta, cfg.s),
        datum_delta=dd,
    )


# -- uniqueness --------------------------------------------------------

def _rotated_state(d: GluingDatum, cfg: SolverConfig):
    r = d.r
    theta = cmath.phase(d.a) / 2
    xr = rescale(rotate(d.xi, theta), r).coeffs
    er = rescale(rotate(d.eta, theta), r).coeffs
    N = d.N
    P = xr.copy()
    P[: N + 1] = 0
    Q = er.copy()
    Q[: N + 1] = 0
    X = xr.copy()
    X[N + 1:] = 0
    Y = er.copy()
    Y[N + 1:] = 0
    lam = d.b * cmath.exp(-2j * theta) / abs(d.a)
    return lam, X, Y, P, Q


def _random_minus(rng: np.random.Generator, N: int, decay: float = 0.6) -> np.ndarray:
    v = np.zeros(2 * N + 1, dtype=complex)
    k = np.arange(N)  # modes 0, -1, ..., -(N-1)
    v[N - k] = (rng.standard_normal(N) + 1j * rng.standard_normal(N)) * decay**k
    return v


def uniqueness_deviations(
    d: GluingDatum, cfg: SolverConfig | None = None, n_trials: int = 20, rng=None, fill: float = 0.9
) -> list[float]:
    """Restart the iteration from perturbed ``(b, xi_-, eta_-)`` and return the
    coefficientwise distance of each limit to ``d``.

    Starting points satisfy ``||xi'_-||_{r,s} < eps`` and
    ``sup_{|x|=r} |xi'_-| < r eps`` (likewise for ``eta``).
    """
    cfg = cfg or SolverConfig(N=d.N)
    rng = np.random.default_rng(rng)
    if d.a == 0:
        return [0.0] * n_trials
    N = d.N
    lam, X, Y, P, Q = _rotated_state(d, cfg)
    w = _weights(N, cfg.s)
    ci = circle_sup_constant(cfg.s)
    eps = cfg.eps
    # ||X'|| <= ||X|| + ||p|| and sup|X'| <= ci ||X'||; keep both below fill*eps
    budget_x = fill * eps / ci - _fast_norm(X, w)
    budget_y = fill * eps / ci - _fast_norm(Y, w)
    if budget_x <= 0 or budget_y <= 0:
        raise DomainError("solution corrections already outside the eps-ball")
    devs = []
    for _ in range(n_trials):
        px = _random_minus(rng, N)
        py = _random_minus(rng, N)
        px *= rng.uniform(0.1, 1.0) * budget_x / _fast_norm(px, w)
        py *= rng.uniform(0.1, 1.0) * budget_y / _fast_norm(py, w)
        dl = eps * rng.uniform(0, 1) * cmath.exp(2j * math.pi * rng.uniform())
        try:
            lam2, X2, Y2, _, _ = _iterate(lam + dl, X + px, Y + py, P, Q, w, cfg.tol, cfg.max_iter)
        except ConvergenceError:
            devs.append(math.inf)
            continue
        dev = max(
            abs(lam2 - lam) * abs(d.a),  # deviation of b
            float(np.max(np.abs(X2 - X))) * d.r,  # rescaled coefficients, scale-free bound
            float(np.max(np.abs(Y2 - Y))) * d.r,
        )
        devs.append(dev)
    return devs


def uniqueness_probe(d: GluingDatum, cfg: SolverConfig | None = None, n_trials: int = 20, rng=None, atol: float = 1e-8) -> bool:
    return all(dev <= atol for dev in uniqueness_deviations(d, cfg, n_trials, rng))


# -- holomorphy --------------------------------------------------------

def _T_vector(a, xp, ep, cfg) -> tuple[complex, np.ndarray, np.ndarray]:
    b, xm, em = T_map(a, xp, ep, cfg)
    return b, np.array(xm.coeffs), np.array(em.coeffs)


def _cr_residual(vals, h: float, w: np.ndarray) -> float:
    """``|| (d/dx + i d/dy) T / 2 ||`` from the four-point stencil values."""
    (bp, xp, ep), (bm, xm, em), (bip, xip, eip), (bim, xim, eim) = vals
    db = ((bp - bm) + 1j * (bip - bim)) / (4 * h)
    dx = ((xp - xm) + 1j * (xip - xim)) / (4 * h)
    de = ((ep - em) + 1j * (eip - eim)) / (4 * h)
    return math.sqrt(abs(db) ** 2 + _fast_norm(dx, w) ** 2 + _fast_norm(de, w) ** 2)


@dataclass(frozen=True)
class HolomorphyReport:
    h: float
    cr_a: float  # d-bar residual in the a-direction
    cr_xi: float  # in the xi_+ direction

    @property
    def residual(self) -> float:
        return max(self.cr_a, self.cr_xi)


def holomorphy_check_T(
    a0: complex,
    xi_plus: TruncatedLaurent,
    eta_plus: TruncatedLaurent,
    h: float,
    cfg: SolverConfig | None = None,
    direction: TruncatedLaurent | None = None,
) -> HolomorphyReport:
    """Finite-difference Cauchy-Riemann residual of ``T`` at ``(a0, xi_+, eta_+)``.

    ``direction`` perturbs ``xi_+`` (default ``z^2`` scaled into the ball).
    """
    cfg = cfg or SolverConfig()
    if not abs(a0) + h < 1:
        raise DomainError("stencil leaves the unit disk")
    w = _weights(cfg.N, cfg.s)
    steps = (h, -h, 1j * h, -1j * h)
    vals = [_T_vector(a0 + st, xi_plus, eta_plus, cfg) for st in steps]
    cr_a = _cr_residual(vals, h, w)

    xp = xi_plus.with_truncation(cfg.N)
    if direction is None:
        direction = TruncatedLaurent.monomial(2, cfg.N)
    v = direction.with_truncation(cfg.N)
    # ||v|| = half the remaining room keeps xi_+ + t v in the delta-ball for
    # |t| <= h < 1; the scale must not depend on h or the stencil never shrinks
    room = cfg.delta - norm(xp - TruncatedLaurent.identity(cfg.N), cfg.s)
    nv = norm(v, cfg.s)
    v = v * (0.5 * room / nv if nv > 0 else 0.0)
    vals = [_T_vector(a0, xp + v * st, eta_plus, cfg) for st in steps]
    cr_xi = _cr_residual(vals, h, w)
    return HolomorphyReport(h, cr_a, cr_xi)


def T_growth_constant(xi_plus, eta_plus, cfg: SolverConfig) -> float:
    """Explicit ``c_T`` with ``||T(a, xi_+, eta_+)|| <= c_T |a|``.

    From ``|b| <= |a| (|xi_1 eta_1| + 2 c r E)`` and
    ``||xi_-||_s <= r ||xi_-||_{r,s} <= 2 c |a| E``, ``E`` the input distance.
    """
    ident = TruncatedLaurent.identity(cfg.N)
    xp = xi_plus.with_truncation(cfg.N)
    ep = eta_plus.with_truncation(cfg.N)
    E = norm(xp - ident, cfg.s) + norm(ep - ident, cfg.s)
    return abs(xp[1] * ep[1]) + 6 * cfg.constants.c * E


# -- the glued coordinate map ------------------------------------------

Family = Callable[[complex], tuple[TruncatedLaurent, TruncatedLaurent]]


def glue_map_eval(x: complex, y: complex, family: Family, cfg: SolverConfig | None = None):
    """``Phi(x, y) = (xi_a(x), eta_a(y))`` with ``a = x y`` solved from ``family(a)``."""
    cfg = cfg or SolverConfig()
    x, y = complex(x), complex(y)
    if not (abs(x) < 1 and abs(y) < 1):
        raise DomainError("need |x|, |y| < 1")
    a = x * y
    xp, ep = family(a)
    d = newton_T(a, xp, ep, cfg)
    return d.xi_at(x), d.eta_at(y)


def constant_family(xi_plus: TruncatedLaurent, eta_plus: TruncatedLaurent) -> Family:
    return lambda a: (xi_plus, eta_plus)


def with_config(cfg: SolverConfig, **changes) -> SolverConfig:
    return replace(cfg, **changes)
