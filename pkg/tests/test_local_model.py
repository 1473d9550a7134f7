import cmath
import math

import numpy as np
import pytest

from nodal_moduli.hardy import TruncatedLaurent, norm, rotate, split
from nodal_moduli.local_model import (
    ConvergenceError,
    DomainError,
    ExtensionError,
    GluingDatum,
    ModelConstants,
    SolverConfig,
    T_growth_constant,
    T_map,
    T_norm,
    apriori_check,
    approximate_solution_estimate,
    check_datum,
    constant_family,
    eq_ab_residual,
    extend_across,
    glue_map_eval,
    holomorphy_check_T,
    linearization_D_r,
    minus_triple_norm,
    newton_T,
    quadratic_estimate,
    residual_F_r,
    solve_D_r_on_minus,
    solve_gluing,
    uniqueness_deviations,
    uniqueness_probe,
)
from gen import random_a, random_minus, random_plus_near_id, random_series
from oracles import fft_residual, gluing_fixed_point

T = TruncatedLaurent
N = 32
ID = T.identity(N)
CFG = SolverConfig(N=N, delta=0.02, eps=0.04)


def inputs(rng, cfg=CFG):
    return (random_plus_near_id(rng, cfg.N, cfg.delta), random_plus_near_id(rng, cfg.N, cfg.delta))


# -- configuration ------------------------------------------------------------

def test_constants_for_s4():
    k = ModelConstants.for_s(4)
    assert k.approx == pytest.approx(4 * math.sqrt(3) * k.product)
    assert k.quadratic == k.product
    assert k.c == pytest.approx(k.approx)
    assert 1.449 < k.product < 1.4495


def test_default_radii_satisfy_chain():
    cfg = SolverConfig()
    assert cfg.chain_holds()
    assert 0 < cfg.delta < cfg.eps


def test_small_delta_chain_report():
    # delta = 0.02 is above the radius the constant chain certifies
    rep = SolverConfig(delta=0.02, eps=0.04).chain_report()
    assert not rep["4c*delta<eps"]
    assert rep["2c_sob*delta<=1"]


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(s=0.5)
    with pytest.raises(ValueError):
        SolverConfig(N=1)
    with pytest.raises(ValueError):
        SolverConfig(delta=-1.0)
    with pytest.raises(ValueError):
        SolverConfig(tol=0)


# -- residual and linearization -----------------------------------------------

@pytest.mark.parametrize("r", [1.0, 0.9, 0.5, 0.1, 0.01])
def test_residual_vanishes_at_identity(r):
    f = residual_F_r(r, 1.0, ID, ID)
    assert not np.any(f.coeffs)


def test_residual_at_lambda_zero():
    assert residual_F_r(1.0, 0.0, ID, ID) == T.constant(1, N)
    with pytest.raises(ValueError):
        residual_F_r(1.5, 1.0, ID, ID)


@pytest.mark.parametrize("r", [1.0, 0.7, 0.4])
def test_residual_matches_fft(rng, r):
    for _ in range(5):
        xi = random_series(rng, N, decay=0.5)
        eta = random_series(rng, N, decay=0.5)
        lam = complex(*rng.standard_normal(2))
        f = residual_F_r(r, lam, xi, eta).coeffs
        # the coefficient formula keeps every product term landing in |k| <= N
        ref = fft_residual(r, lam, xi.coeffs, eta.coeffs)
        assert np.max(np.abs(f - ref)) <= 1e-12 * max(1.0, np.max(np.abs(ref)))


def test_linearization_examples():
    lh = 0.3 - 0.2j
    assert linearization_D_r(0.5, lh, T.zeros(N), T.zeros(N)) == T.constant(-lh, N)
    assert linearization_D_r(1.0, 0, T.constant(1, N), T.zeros(N)) == T.monomial(-1, N)
    assert linearization_D_r(1.0, 0, T.zeros(N), T.constant(1, N)) == T.monomial(1, N)


@pytest.mark.parametrize("r", [1.0, 0.8, 0.5])
def test_linearization_matches_finite_differences(rng, r):
    h = 1e-5
    for _ in range(10):
        lh = complex(*rng.standard_normal(2))
        xh = random_series(rng, N, decay=0.3)
        eh = random_series(rng, N, decay=0.3)
        fp = residual_F_r(r, 1 + h * lh, ID + xh * h, ID + eh * h)
        fm = residual_F_r(r, 1 - h * lh, ID - xh * h, ID - eh * h)
        fd = (fp - fm) * (1 / (2 * h))
        exact = linearization_D_r(r, lh, xh, eh)
        scale = max(1.0, np.max(np.abs(exact.coeffs)))
        assert np.max(np.abs(fd.coeffs - exact.coeffs)) < 1e-9 * scale


@pytest.mark.parametrize("r", [1.0, 0.6, 0.2])
def test_inverse_on_minus(rng, r):
    lam, xm, em = solve_D_r_on_minus(r, T.zeros(N))
    assert lam == 0 and xm == T.zeros(N) and em == T.zeros(N)
    for _ in range(100):
        rhs = random_series(rng, N, decay=rng.uniform(0.3, 0.9))
        # mode -N is outside the range of D_r on truncated minus parts
        rhs = T(np.where(rhs.modes == -N, 0, rhs.coeffs))
        lam, xm, em = solve_D_r_on_minus(r, rhs)
        assert split(xm)[0] == T.zeros(N) and split(em)[0] == T.zeros(N)
        back = linearization_D_r(r, lam, xm, em)
        assert np.max(np.abs(back.coeffs - rhs.coeffs)) <= 1e-12 * np.max(np.abs(rhs.coeffs))
        # inverse bound: the weights only shift down by one on each side
        assert minus_triple_norm(lam, xm, em, r, 4) <= norm(rhs, 4) * (1 + 1e-12)


# -- the solver -------------------------------------------------------------

@pytest.mark.parametrize("a", [0.01, 0.5, -0.3 + 0.4j, 0.9j])
def test_identity_inputs(a):
    d = newton_T(a, ID, ID, CFG)
    assert d.b == pytest.approx(a, abs=1e-15)
    assert d.xi.allclose(ID, 1e-15) and d.eta.allclose(ID, 1e-15)


def test_a_zero_is_exact(rng):
    xp, ep = inputs(rng)
    d = newton_T(0, xp, ep, CFG)
    assert d.a == 0 and d.b == 0 and d.xi == xp and d.eta == ep
    b, xm, em = T_map(0, xp, ep, CFG)
    assert b == 0 and not np.any(xm.coeffs) and not np.any(em.coeffs)
    assert check_datum(d).passed


def test_closed_form_against_fixed_point_oracle():
    # xi_+ = id + 0.03 z^2 sits outside the small ball; a wide ball is fine
    # for this one perturbative example
    e, a, M = 0.03, 0.01, 256
    cfg = SolverConfig(N=M, delta=4.0, eps=1.0)
    xp = T.from_modes({1: 1, 2: e}, M)
    ep = T.identity(M)
    d = newton_T(a, xp, ep, cfg)
    assert abs(d.b / a - 1) <= 10 * e**2 * a
    assert abs(d.eta[0] - (-e * a)) <= 10 * (e * a) ** 2
    K = 48
    xpk = np.zeros(K, dtype=complex)
    xpk[:2] = [1, e]
    epk = np.zeros(K, dtype=complex)
    epk[0] = 1
    b, xm, em, res = gluing_fixed_point(a, xpk, epk)
    assert res < 1e-14
    assert abs(d.b - b) <= 1e-15
    for k in range(6):
        assert abs(d.xi[-k] - xm[k]) <= 1e-14
        assert abs(d.eta[-k] - em[k]) <= 1e-14


def test_random_solves_against_fixed_point_oracle(rng):
    for _ in range(3):
        a = random_a(rng, 0.7)
        xp, ep = inputs(rng)
        d = newton_T(a, xp, ep, CFG)
        b, xm, em, res = gluing_fixed_point(a, xp.coeffs[N + 1:], ep.coeffs[N + 1:], M=512)
        assert res < 1e-13
        assert abs(d.b - b) <= 1e-13
        for k in range(4):
            assert abs(d.xi[-k] - xm[k]) <= 1e-12
            assert abs(d.eta[-k] - em[k]) <= 1e-12


def test_random_solves_contract(rng):
    k = CFG.constants
    for _ in range(25):
        a = random_a(rng)
        xp, ep = inputs(rng)
        sol = solve_gluing(a, xp, ep, CFG)
        rep, d = sol.report, sol.datum
        assert rep.residual <= CFG.tol and rep.iterations <= 25
        assert rep.ift_ratio <= 2
        assert rep.continuity_constant(d.r) <= k.c
        chk = check_datum(d)
        assert chk.within(1e-9)


def test_rotation_equivariance(rng):
    for _ in range(5):
        a = random_a(rng, 0.8)
        th = rng.uniform(0, 2 * math.pi)
        xp, ep = inputs(rng)
        d1 = newton_T(a, xp, ep, CFG)
        d2 = newton_T(cmath.exp(-2j * th) * a, rotate(xp, th), rotate(ep, th), CFG)
        assert abs(d2.b - cmath.exp(-2j * th) * d1.b) <= 1e-12 * abs(a)
        assert d2.xi.allclose(rotate(d1.xi, th), 1e-12)
        assert d2.eta.allclose(rotate(d1.eta, th), 1e-12)


def test_solver_errors(rng):
    with pytest.raises(DomainError):
        newton_T(1.0, ID, ID, CFG)
    with pytest.raises(DomainError):
        newton_T(0.1, ID + T.monomial(2, N, 1.0), ID, CFG)
    with pytest.raises(DomainError):
        newton_T(0.1, ID + T.constant(1e-4, N), ID, CFG)
    xp, ep = inputs(rng)
    with pytest.raises(ConvergenceError) as exc:
        newton_T(0.5, xp, ep, SolverConfig(N=N, delta=0.02, eps=0.04, tol=1e-15, max_iter=1))
    assert exc.value.residual > 0


def test_eq_ab_residual_flags_bad_b(rng):
    xp, ep = inputs(rng)
    d = newton_T(0.2, xp, ep, CFG)
    assert eq_ab_residual(d) <= 1e-12
    bad = GluingDatum(d.a, d.xi, d.eta, d.b * 1.01)
    assert eq_ab_residual(bad) > 1e-3


# -- estimates ----------------------------------------------------------------

def test_approximate_solution_estimate(rng):
    for _ in range(200):
        r = rng.uniform(0.01, 1.0)
        xp, ep = inputs(rng)
        lhs, rhs = approximate_solution_estimate(r, xp, ep)
        assert lhs <= rhs


def test_quadratic_estimate(rng):
    for _ in range(200):
        r = rng.uniform(0.05, 1.0)
        xi = random_plus_near_id(rng, N, 0.5) + random_minus(rng, N, 0.3) * (0.01 * r)
        eta = random_plus_near_id(rng, N, 0.5) + random_minus(rng, N, 0.3) * (0.01 * r)
        xh = random_minus(rng, N, rng.uniform(0.2, 0.8))
        eh = random_minus(rng, N, rng.uniform(0.2, 0.8))
        lhs, rhs = quadratic_estimate(r, xi, eta, xh, eh)
        assert lhs <= rhs * (1 + 1e-12)


def test_quadratic_estimate_is_the_linearization_defect(rng):
    # dF at (lam, xi, eta) minus D_r, applied to a direction, by finite differences
    r, h = 0.6, 1e-6
    xi = random_plus_near_id(rng, N, 0.3) + random_minus(rng, N, 0.3) * 0.01
    eta = random_plus_near_id(rng, N, 0.3) + random_minus(rng, N, 0.3) * 0.01
    xh, eh = random_minus(rng, N, 0.5), random_minus(rng, N, 0.5)
    fp = residual_F_r(r, 1.0, xi + xh * h, eta + eh * h)
    fm = residual_F_r(r, 1.0, xi - xh * h, eta - eh * h)
    defect = (fp - fm) * (1 / (2 * h)) - linearization_D_r(r, 0, xh, eh)
    lhs, _ = quadratic_estimate(r, xi, eta, xh, eh)
    assert norm(defect, 4) == pytest.approx(lhs, rel=1e-6)


# -- datum checks -------------------------------------------------------------

def test_apriori_examples(rng):
    d = GluingDatum(0.3, ID, ID, 0.3)
    rep = apriori_check(d, CFG)
    # zero up to the rounding of x / x on the sample grid
    assert rep.ratio_dev == 0 and max(rep.xi_dev, rep.eta_dev) <= 1e-15 and rep.passed
    for _ in range(50):
        xp, ep = inputs(rng)
        d = newton_T(random_a(rng), xp, ep, CFG)
        rep = apriori_check(d, CFG)
        assert rep.passed and rep.empirical_c <= rep.c
    bad = GluingDatum(d.a, d.xi, d.eta, 2 * d.a)
    rep = apriori_check(bad, CFG)
    assert not rep.passed and rep.ratio_dev >= rep.c * rep.delta
    with pytest.raises(ValueError):
        apriori_check(GluingDatum(0, ID, ID, 0), CFG)


def test_extend_across(rng):
    ext = extend_across(GluingDatum(0.25, ID, ID, 0.25))
    xs = ext.radii[:, None] * np.exp(1j * ext.theta)[None, :]
    assert np.max(np.abs(ext.values - xs)) <= 1e-15
    assert ext.continuous
    xp, ep = inputs(rng)
    d = newton_T(0.3 + 0.2j, xp, ep, CFG)
    assert extend_across(d).mismatch <= 1e-10
    broken = extend_across(GluingDatum(d.a, d.xi, d.eta, d.b * (1 + 1e-6)))
    assert not broken.continuous
    with pytest.raises(ExtensionError):
        extend_across(GluingDatum(0, ID, ID, 0))
    with pytest.raises(ExtensionError):
        extend_across(GluingDatum(0.25, ID, T.from_modes({1: 1, 2: 3}, N), 0.25))


def test_uniqueness(rng):
    d = newton_T(0.2, ID, ID, CFG)
    assert uniqueness_probe(d, CFG, 20, rng)
    xp, ep = inputs(rng)
    d = newton_T(random_a(rng), xp, ep, CFG)
    devs = uniqueness_deviations(d, CFG, 20, rng)
    assert len(devs) == 20 and max(devs) <= 1e-8
    assert uniqueness_deviations(GluingDatum(0, xp, ep, 0), CFG, 3) == [0.0] * 3


# -- holomorphy ---------------------------------------------------------------

def _generic_inputs():
    v1 = T.from_modes({2: 1, 3: 0.3j, 4: 0.05}, N)
    v2 = T.from_modes({2: 1 - 1j, 3: 0.2, 5: 0.01j}, N)
    return ID + v1 * (0.8 * CFG.delta / norm(v1)), ID + v2 * (0.6 * CFG.delta / norm(v2))


def test_holomorphy_identity_exact():
    rep = holomorphy_check_T(0.3, ID, ID, 1e-3, CFG)
    assert rep.residual <= 1e-12


@pytest.mark.parametrize("a0", [0.02, 0.2 + 0.1j, 0.5])
def test_holomorphy_richardson(a0):
    xp, ep = _generic_inputs()
    r1 = holomorphy_check_T(a0, xp, ep, 1e-3, CFG)
    r2 = holomorphy_check_T(a0, xp, ep, 5e-4, CFG)
    assert r1.cr_a / r2.cr_a == pytest.approx(4, abs=0.5)
    # the xi_+ direction enters polynomially; only roundoff remains
    assert max(r1.cr_xi, r2.cr_xi) <= 1e-12


def test_holomorphy_domain():
    with pytest.raises(DomainError):
        holomorphy_check_T(0.95, ID, ID, 0.1, CFG)


def test_growth_near_zero():
    xp, ep = _generic_inputs()
    c = T_growth_constant(xp, ep, CFG)
    for a in (1e-2, 1e-4, 1e-8, 1e-3j):
        b, xm, em = T_map(a, xp, ep, CFG)
        assert T_norm(b, xm, em, 4) <= c * abs(a)


# -- glued coordinates --------------------------------------------------------

def test_glue_map_identity_family():
    fam = constant_family(ID, ID)
    for x, y in [(0.5, 0.3j), (-0.2 + 0.1j, 0.7), (0.4, 0)]:
        u, v = glue_map_eval(x, y, fam, CFG)
        assert u == pytest.approx(x, abs=1e-15) and v == pytest.approx(y, abs=1e-15)


def test_glue_map_axis_and_decay(rng):
    xp, ep = inputs(rng)
    fam = constant_family(xp, ep)
    u, v = glue_map_eval(0.6, 0, fam, CFG)
    assert u == pytest.approx(xp(0.6), abs=1e-15) and v == 0
    c = CFG.constants.c
    for y in (1e-2, 1e-4, 1e-6):
        _, v = glue_map_eval(0.5, y, fam, CFG)
        assert abs(v) <= (c * CFG.delta + 1) * abs(y)
    with pytest.raises(DomainError):
        glue_map_eval(1.0, 0.1, fam, CFG)


def test_glue_map_joint_holomorphy(rng):
    xp, ep = _generic_inputs()
    fam = constant_family(xp, ep)

    def cr(x, y, h):
        # d-bar in x with y fixed, four-point stencil
        vals = [np.array(glue_map_eval(x + s, y, fam, CFG)) for s in (h, -h, 1j * h, -1j * h)]
        return np.max(np.abs((vals[0] - vals[1]) + 1j * (vals[2] - vals[3]))) / (4 * h)

    x, y = 0.5 + 0.1j, 0.4 - 0.2j
    r1, r2 = cr(x, y, 2e-2), cr(x, y, 1e-2)
    assert r1 / r2 == pytest.approx(4, abs=0.5)
