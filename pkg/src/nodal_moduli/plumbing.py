"""Node smoothing and annulus invariants.

``nodal_extend`` turns two disk germs ``xi0(x)``, ``eta0(y)`` into a
coordinate change ``Phi = (xi, eta)`` near the node ``xy = 0`` with

    xi(x, 0) = xi0(x),   eta(0, y) = eta0(y),   xi(x, y) eta(x, y) = zeta(xy).

All solving happens in normalized coordinates ``x = eps * xt`` where both
germs are tangent to the identity and lie in the solver's admissible ball.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .hardy import TruncatedLaurent, evaluate, norm, rescale, winding_number
from .local_model import ExtensionError, SolverConfig, newton_T

MAX_DYADIC_STEPS = 60


# -- nodal extension ---------------------------------------------------

@dataclass(frozen=True)
class ExtensionResiduals:
    product: float  # max |xi eta - zeta(xy)| on the grid (normalized coordinates)
    xi_axis: float  # max |xi(x, 0) - xi0(x)|
    eta_axis: float
    zeta_prime_dev: float  # |zeta'(0) - 1|
    n_points: int

    def passed(self, tol: float = 1e-9, deriv_tol: float = 1e-6) -> bool:
        return max(self.product, self.xi_axis, self.eta_axis) <= tol and self.zeta_prime_dev <= deriv_tol


@dataclass(frozen=True)
class NodalExtension:
    """Extension data. ``zeta`` is the fitted series of the normalized
    ``zeta~`` (``zeta~(0) = 0``, ``zeta~'(0) = 1``); ``zeta_at`` gives the
    original-coordinate function."""

    xi0: TruncatedLaurent
    eta0: TruncatedLaurent
    xi_scale: complex  # xi0'(0)
    eta_scale: complex
    eps: float  # dyadic rescaling, original x = eps * xt
    cfg: SolverConfig
    xi_n: TruncatedLaurent  # normalized germs, inside the delta-ball
    eta_n: TruncatedLaurent
    zeta: TruncatedLaurent
    grid_z: np.ndarray = field(repr=False)
    grid_zeta: np.ndarray = field(repr=False)
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def _solve(self, a: complex):
        a = complex(a)
        d = self._cache.get(a)
        if d is None:
            d = newton_T(a, self.xi_n, self.eta_n, self.cfg)
            self._cache[a] = d
        return d

    def zeta_tilde_at(self, zt: complex) -> complex:
        """``zeta~(zt)``, re-solved at ``zt`` (never interpolated)."""
        return self._solve(zt).b

    def phi_normalized(self, xt: complex, yt: complex) -> tuple[complex, complex]:
        xt, yt = complex(xt), complex(yt)
        if not (abs(xt) < 1 and abs(yt) < 1):
            raise ValueError("normalized coordinates must lie in the open unit bidisk")
        d = self._solve(xt * yt)
        return complex(d.xi_at(xt)), complex(d.eta_at(yt))

    def phi(self, x: complex, y: complex) -> tuple[complex, complex]:
        """``Phi(x, y)`` in original coordinates, defined for ``|x|, |y| < eps``."""
        xt, yt = self.phi_normalized(x / self.eps, y / self.eps)
        return self.xi_scale * self.eps * xt, self.eta_scale * self.eps * yt

    def zeta_at(self, z: complex) -> complex:
        """Original-coordinate ``zeta(z) = xi0'(0) eta0'(0) eps^2 zeta~(z / eps^2)``."""
        e2 = self.eps**2
        return self.xi_scale * self.eta_scale * e2 * self.zeta_tilde_at(z / e2)

    def zeta_prime(self, h: float = 1e-3) -> complex:
        """Centered difference of ``zeta~`` at 0."""
        return (self.zeta_tilde_at(h) - self.zeta_tilde_at(-h)) / (2 * h)

    def residuals(self, radii=(0.2, 0.4, 0.6, 0.8), n_angles: int = 8) -> ExtensionResiduals:
        """Check the three identities on the product grid of sample points
        ``xt, yt`` in ``{rho e^{i theta}}``. ``zeta`` is the fitted series, so
        the product check also validates the fit."""
        th = 2 * np.pi * (np.arange(n_angles) + 0.5) / n_angles
        pts = (np.asarray(radii)[:, None] * np.exp(1j * th)[None, :]).ravel()
        worst = 0.0
        for xt in pts:
            for yt in pts:
                u, v = self.phi_normalized(xt, yt)
                worst = max(worst, abs(u * v - evaluate(self.zeta, xt * yt)))
        xi_ax = max(abs(self.phi_normalized(p, 0)[0] - evaluate(self.xi_n, p)) for p in pts)
        eta_ax = max(abs(self.phi_normalized(0, p)[1] - evaluate(self.eta_n, p)) for p in pts)
        return ExtensionResiduals(
            product=float(worst),
            xi_axis=float(xi_ax),
            eta_axis=float(eta_ax),
            zeta_prime_dev=float(abs(self.zeta_prime() - 1)),
            n_points=pts.size**2,
        )


def _normalize_germ(z: TruncatedLaurent, name: str) -> tuple[TruncatedLaurent, complex]:
    c = z.coeffs
    N = z.N
    if np.any(c[: N + 1] != 0):
        raise ExtensionError(f"{name} must vanish at 0 and have no negative modes")
    d1 = complex(c[N + 1])
    if d1 == 0:
        raise ExtensionError(f"{name}'(0) = 0")
    return z * (1 / d1), d1


def dyadic_scale(xi_n: TruncatedLaurent, eta_n: TruncatedLaurent, cfg: SolverConfig) -> float:
    """Largest ``eps = 2^-k`` with both ``eps^-1 f(eps x)`` strictly inside the delta-ball."""
    ident = TruncatedLaurent.identity(cfg.N)
    for k in range(MAX_DYADIC_STEPS + 1):
        eps = 2.0**-k
        if all(norm(rescale(f, eps) - ident, cfg.s) < cfg.delta for f in (xi_n, eta_n)):
            return eps
    raise ExtensionError("germs could not be rescaled into the admissible ball")


def nodal_extend(
    xi0: TruncatedLaurent,
    eta0: TruncatedLaurent,
    cfg: SolverConfig | None = None,
    rho: float = 0.9,
    n_circle: int = 32,
    n_levels: int = 4,
) -> NodalExtension:
    """Build the extension; ``zeta~`` is solved on the radial grid
    ``rho 2^-k e^{2 pi i j / n_circle}`` and fitted from the outer circle."""
    cfg = cfg or SolverConfig()
    xi0 = xi0.with_truncation(cfg.N)
    eta0 = eta0.with_truncation(cfg.N)
    xn, xs = _normalize_germ(xi0, "xi0")
    en, es = _normalize_germ(eta0, "eta0")
    eps = dyadic_scale(xn, en, cfg)
    xi_n, eta_n = rescale(xn, eps), rescale(en, eps)

    th = 2 * np.pi * np.arange(n_circle) / n_circle
    grid = (rho * 2.0 ** -np.arange(n_levels))[:, None] * np.exp(1j * th)[None, :]
    vals = np.array([[newton_T(z, xi_n, eta_n, cfg).b for z in row] for row in grid])

    # Taylor fit from the outer circle: c_k rho^k = FFT / n
    ck = np.fft.fft(vals[0]) / n_circle
    K = n_circle // 2
    coeffs = np.zeros(2 * cfg.N + 1, dtype=complex)
    kmax = min(K - 1, cfg.N)
    coeffs[cfg.N : cfg.N + kmax + 1] = ck[: kmax + 1] / rho ** np.arange(kmax + 1)
    zeta = TruncatedLaurent(coeffs)

    ext = NodalExtension(xi0, eta0, xs, es, eps, cfg, xi_n, eta_n, zeta, grid, vals)
    fit_err = float(np.max(np.abs(evaluate(zeta, grid[1:]) - vals[1:]))) if n_levels > 1 else 0.0
    if fit_err > 1e-9:
        warnings.warn(f"zeta fit mismatch {fit_err:.2e} on inner circles", RuntimeWarning)
    return ext


# -- annuli ------------------------------------------------------------

@dataclass(frozen=True)
class AnnulusSpec:
    r: float
    R: float

    def __post_init__(self):
        if not (0 < self.r < self.R):
            raise ValueError(f"need 0 < r < R, got r={self.r}, R={self.R}")

    def contains(self, z, rtol: float = 1e-12):
        m = np.abs(z)
        return (m >= self.r * (1 - rtol)) & (m <= self.R * (1 + rtol))


@dataclass(frozen=True)
class NodeMarker:
    """Fiber over ``a = 0``: two transverse disks meeting at the node."""

    a: complex = 0j


DEGENERATE_GAP = 1e-3


def node_fiber(a: complex) -> AnnulusSpec | NodeMarker:
    """Fiber of ``xy = a`` in the bidisk, projected to ``x``."""
    a = complex(a)
    if not abs(a) < 1:
        raise ValueError("|a| must be < 1")
    if a == 0:
        return NodeMarker()
    if 1 - abs(a) < DEGENERATE_GAP:
        warnings.warn(f"|a| = {abs(a):.6f} is close to 1: the annulus is nearly degenerate", RuntimeWarning)
    return AnnulusSpec(abs(a), 1.0)


def modulus(A: AnnulusSpec) -> float:
    return math.log(A.R / A.r)


def core_geodesic_length(A: AnnulusSpec) -> float:
    """Hyperbolic length of the core circle, ``2 pi^2 / log(R / r)``."""
    return 2 * math.pi**2 / modulus(A)


class EmbeddingError(ValueError):
    pass


@dataclass(frozen=True)
class EmbeddingReport:
    modulus_1: float
    modulus_2: float
    winding: int
    min_abs_derivative: float

    @property
    def holds(self) -> bool:
        # relative slack only for roundoff in the log of equal ratios
        return self.modulus_1 <= self.modulus_2 * (1 + 1e-12) + 1e-15


def _derivative(f: TruncatedLaurent) -> TruncatedLaurent:
    N = f.N
    n = f.modes
    out = np.zeros_like(f.coeffs)
    out[:-1] = (n * f.coeffs)[1:]  # mode n-1 gets n c_n
    return TruncatedLaurent(out)


def embedding_modulus_check(
    f: TruncatedLaurent,
    A1: AnnulusSpec,
    A2: AnnulusSpec,
    n_samples: int = 1024,
    n_radii: int = 9,
) -> EmbeddingReport:
    """Verify by sampling that ``f`` embeds ``A1`` in ``A2`` with core winding
    ``+-1``, then compare moduli. Raises ``EmbeddingError`` when the sampled
    verification fails."""
    th = 2 * np.pi * np.arange(n_samples) / n_samples
    radii = np.geomspace(A1.r, A1.R, n_radii)
    z = radii[:, None] * np.exp(1j * th)[None, :]
    w = evaluate(f, z)
    if not np.all(A2.contains(w)):
        raise EmbeddingError("sampled image leaves the target annulus")
    core = math.sqrt(A1.r * A1.R) * np.exp(1j * th)
    try:
        wn = winding_number(evaluate(f, core))
    except ValueError as exc:
        raise EmbeddingError(f"core winding undefined: {exc}") from exc
    if abs(wn) != 1:
        raise EmbeddingError(f"core circle winds {wn} times")
    dmin = float(np.min(np.abs(evaluate(_derivative(f), z))))
    if dmin <= 0:
        raise EmbeddingError("derivative vanishes on a sample: not locally injective")
    return EmbeddingReport(modulus(A1), modulus(A2), wn, dmin)
