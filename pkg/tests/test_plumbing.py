import math

import mpmath
import numpy as np
import pytest

from nodal_moduli.hardy import TruncatedLaurent, evaluate
from nodal_moduli.local_model import ExtensionError, SolverConfig
from nodal_moduli.plumbing import (
    AnnulusSpec,
    EmbeddingError,
    NodeMarker,
    core_geodesic_length,
    dyadic_scale,
    embedding_modulus_check,
    modulus,
    nodal_extend,
    node_fiber,
)

T = TruncatedLaurent
N = 32
CFG = SolverConfig(N=N)
ID = T.identity(N)


# -- nodal extension -----------------------------------------------------------

def test_identity_extension_is_exact():
    ext = nodal_extend(ID, ID, CFG)
    assert ext.eps == 1.0
    assert ext.zeta.allclose(ID, 1e-14)
    for x, y in [(0.3, 0.5j), (-0.7, 0.1 + 0.2j), (0.0, 0.4)]:
        u, v = ext.phi(x, y)
        assert abs(u - x) <= 1e-15 and abs(v - y) <= 1e-15
    res = ext.residuals()
    assert res.passed(tol=1e-14, deriv_tol=1e-12)


def test_quadratic_germ():
    xi0 = T.from_modes({1: 1, 2: 0.02}, N)
    ext = nodal_extend(xi0, ID, CFG)
    # the largest dyadic scale putting 0.02 eps x^2 in the small ball
    assert ext.eps == 2.0**-12
    assert abs(ext.zeta_prime() - 1) <= 1e-6
    res = ext.residuals()
    assert res.product <= 1e-9 and res.passed()


def test_extension_recovers_germs_on_axes():
    xi0 = T.from_modes({1: 2.0, 2: 0.5, 3: -0.1j}, N)
    eta0 = T.from_modes({1: 0.5j, 2: 0.2}, N)
    ext = nodal_extend(xi0, eta0, CFG)
    e = ext.eps
    for x in (0.3 * e, -0.5j * e):
        assert ext.phi(x, 0)[0] == pytest.approx(evaluate(xi0, x), rel=1e-12)
        assert ext.phi(0, x)[1] == pytest.approx(evaluate(eta0, x), rel=1e-12)
    # xi eta = zeta(xy) in original coordinates
    x, y = 0.4 * e, (0.2 - 0.3j) * e
    u, v = ext.phi(x, y)
    assert u * v == pytest.approx(ext.zeta_at(x * y), rel=1e-11)


def test_grid_refinement_independence():
    xi0 = T.from_modes({1: 1, 2: 0.3, 3: 0.1}, N)
    eta0 = T.from_modes({1: 1, 2: -0.2j}, N)
    ext = nodal_extend(xi0, eta0, CFG)
    coarse = ext.residuals()
    fine = ext.residuals(radii=(0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8), n_angles=16)
    assert coarse.passed() and fine.passed()
    # refitting zeta from a doubled circle grid gives the same series
    ext2 = nodal_extend(xi0, eta0, CFG, n_circle=64)
    assert np.max(np.abs(ext2.zeta.coeffs[N:N + 12] - ext.zeta.coeffs[N:N + 12])) <= 1e-9


def test_extension_errors():
    with pytest.raises(ExtensionError):
        nodal_extend(T.from_modes({2: 1}, N), ID, CFG)
    with pytest.raises(ExtensionError):
        nodal_extend(T.from_modes({0: 0.1, 1: 1}, N), ID, CFG)
    with pytest.raises(ValueError):
        nodal_extend(ID, ID, CFG).phi_normalized(1.0, 0.0)


def test_dyadic_scale_monotone():
    small = T.from_modes({1: 1, 2: 0.01}, N)
    large = T.from_modes({1: 1, 2: 1.0}, N)
    assert dyadic_scale(small, ID, CFG) >= dyadic_scale(large, ID, CFG)


# -- fibers and annuli ----------------------------------------------------------

def test_node_fiber():
    A = node_fiber(0.1)
    assert A == AnnulusSpec(0.1, 1.0)
    assert node_fiber(-0.3j) == AnnulusSpec(0.3, 1.0)
    assert isinstance(node_fiber(0), NodeMarker)
    with pytest.warns(RuntimeWarning):
        node_fiber(0.9999)
    with pytest.raises(ValueError):
        node_fiber(1.0)


def test_annulus_validation():
    with pytest.raises(ValueError):
        AnnulusSpec(1.0, 0.5)
    with pytest.raises(ValueError):
        AnnulusSpec(0.0, 1.0)


def test_modulus():
    assert modulus(AnnulusSpec(0.1, 1)) == pytest.approx(2.302585092994046, rel=1e-15)
    for c in (0.01, 3.0, 1e4):
        assert modulus(AnnulusSpec(0.2 * c, 0.9 * c)) == pytest.approx(modulus(AnnulusSpec(0.2, 0.9)), rel=1e-14)
    ms = [modulus(AnnulusSpec(r, 1)) for r in np.linspace(0.05, 0.95, 19)]
    assert all(a > b for a, b in zip(ms, ms[1:]))


GEODESIC_LOG10 = float(2 * mpmath.pi**2 / mpmath.log(10))


def test_core_geodesic_length():
    assert core_geodesic_length(AnnulusSpec(0.1, 1)) == pytest.approx(GEODESIC_LOG10, rel=1e-15)
    assert GEODESIC_LOG10 == pytest.approx(8.572629459922314, rel=1e-15)
    A = AnnulusSpec(0.01, 1)  # modulus 2 log 10
    assert core_geodesic_length(A) == pytest.approx(GEODESIC_LOG10 / 2, rel=1e-14)
    lengths = [core_geodesic_length(node_fiber(10.0**-k)) for k in range(1, 12)]
    assert all(a > b for a, b in zip(lengths, lengths[1:]))
    assert lengths[-1] < 1


# -- embeddings --------------------------------------------------------------

def test_embedding_scaling_equality():
    f = T.monomial(1, N, 2.5)
    rep = embedding_modulus_check(f, AnnulusSpec(0.2, 0.8), AnnulusSpec(0.5, 2.0))
    assert rep.holds and rep.winding == 1
    assert rep.modulus_1 == pytest.approx(rep.modulus_2, rel=1e-14)


def test_embedding_inclusion():
    rep = embedding_modulus_check(ID, AnnulusSpec(0.5, 1), AnnulusSpec(0.3, 1))
    assert rep.holds
    assert math.exp(rep.modulus_1) == pytest.approx(2) and math.exp(rep.modulus_2) == pytest.approx(10 / 3)


def test_embedding_inversion_has_winding_minus_one():
    f = T.monomial(-1, N, 0.5)
    rep = embedding_modulus_check(f, AnnulusSpec(0.5, 1), AnnulusSpec(0.5, 1))
    assert rep.winding == -1 and rep.holds


def test_embedding_rejections():
    # image leaves the target
    with pytest.raises(EmbeddingError):
        embedding_modulus_check(ID, AnnulusSpec(0.2, 1), AnnulusSpec(0.3, 1))
    # z^2 winds twice around the core
    with pytest.raises(EmbeddingError):
        embedding_modulus_check(T.monomial(2, N), AnnulusSpec(0.5, 1), AnnulusSpec(0.2, 1))


def test_random_perturbed_embeddings(rng):
    count = 0
    for _ in range(100):
        r = rng.uniform(0.05, 0.8)
        c = rng.uniform(0.5, 2.0) * np.exp(2j * np.pi * rng.uniform())
        eps = rng.uniform(-0.05, 0.05) + 1j * rng.uniform(-0.05, 0.05)
        f = T.from_modes({1: c, 2: c * eps}, N)
        A1 = AnnulusSpec(r, 1.0)
        # target with verified room: min/max of |f| over A1 bound the image
        lo = abs(c) * r * (1 - abs(eps) * r)
        hi = abs(c) * (1 + abs(eps))
        A2 = AnnulusSpec(lo * rng.uniform(0.5, 0.999), hi * rng.uniform(1.001, 2.0))
        rep = embedding_modulus_check(f, A1, A2)
        assert rep.holds
        count += 1
    assert count == 100
