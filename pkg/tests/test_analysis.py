import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate
from scipy.stats import norm

from ris_sm import analysis as an
from ris_sm.constellation import build_constellation

from oracles import MEAN_PRODUCT, VAR_PRODUCT, mgf_norm_sq, upep_cross_reference, upep_same_reference


def test_product_moments_match_rayleigh_algebra():
    assert an.PRODUCT_MEAN == pytest.approx(MEAN_PRODUCT, rel=1e-15)
    assert an.PRODUCT_VAR == pytest.approx(VAR_PRODUCT, rel=1e-14)
    m = an.xi_moments(100)
    assert m.mu_xi == pytest.approx(25 * math.pi)
    with pytest.raises(ValueError):
        an.xi_moments(0)


def test_gcq_nodes():
    np.testing.assert_allclose(an.gcq_nodes(2).nodes, [math.sqrt(0.5), -math.sqrt(0.5)])
    n = an.gcq_nodes(7).nodes
    np.testing.assert_allclose(n, -n[::-1], atol=1e-15)
    g = an.gcq_nodes(4)
    np.testing.assert_allclose(np.sort(g.nodes), np.sort(np.polynomial.chebyshev.chebgauss(4)[0]))
    assert np.all((g.angles > 0) & (g.angles < math.pi / 2))
    with pytest.raises(ValueError):
        an.gcq_nodes(0)


@pytest.mark.parametrize("f,exact", [(lambda t: np.ones_like(t), 0.5), (lambda t: np.sin(t) ** 2, 0.25)])
def test_gcq_rule_integrates_smooth_functions(f, exact):
    # the rule approximates (1/pi) int_0^{pi/2} f(t) dt
    g = an.gcq_nodes(16)
    assert np.sum(f(g.angles)) / (2 * g.Q) == pytest.approx(exact, abs=1e-14)


@pytest.mark.parametrize("L", [10, 80, 100])
def test_xi_square_pdf_normalised(L):
    m = an.xi_moments(L)
    hi = (m.mu_xi + 12 * math.sqrt(m.sigma2_xi)) ** 2
    val, _ = integrate.quad(lambda x: an.xi_square_pdf(x, m), 0, hi, points=[m.mu_xi**2], limit=400, epsabs=1e-12)
    assert val == pytest.approx(1.0, abs=1e-6)


def test_xi_square_pdf_matches_change_of_variables():
    m = an.xi_moments(5)
    x = np.linspace(0.5, 40, 30)
    r = np.sqrt(x)
    sd = math.sqrt(m.sigma2_xi)
    ref = (norm.pdf(r, m.mu_xi, sd) + norm.pdf(-r, m.mu_xi, sd)) / (2 * r)
    np.testing.assert_allclose(an.xi_square_pdf(x, m), ref, rtol=1e-12)
    with pytest.raises(ValueError):
        an.xi_square_pdf(0.0, m)


def test_xi_square_pdf_zero_mean_collapses():
    m = an.XiMoments(0.0, 2.5)
    x = np.linspace(0.1, 20, 25)
    ref = np.exp(-x / (2 * 2.5)) / np.sqrt(2 * math.pi * 2.5 * x)
    np.testing.assert_allclose(an.xi_square_pdf(x, m), ref, rtol=1e-12)


def test_xi_square_pdf_first_moment():
    m = an.xi_moments(100)
    sd = math.sqrt(m.sigma2_xi)
    lo, hi = (m.mu_xi - 12 * sd) ** 2, (m.mu_xi + 12 * sd) ** 2
    val, _ = integrate.quad(lambda x: x * an.xi_square_pdf(x, m), lo, hi, points=[m.mu_xi**2], epsrel=1e-12, limit=200)
    assert val == pytest.approx(m.mu_xi**2 + m.sigma2_xi, rel=1e-5)


def test_xi_square_pdf_large_arguments_finite():
    m = an.xi_moments(1000)
    v = an.xi_square_pdf(np.array([1e-6, 1.0, 1e6, 1e8]), m)
    assert np.all(np.isfinite(v)) and np.all(v >= 0)


def test_phase_diff_pdf():
    val, _ = integrate.quad(an.phase_diff_pdf, -2 * math.pi, 2 * math.pi, points=[0])
    assert val == pytest.approx(1.0, abs=1e-12)
    assert an.phase_diff_pdf(0.0) == pytest.approx(1 / (2 * math.pi))
    assert an.phase_diff_pdf(7.0) == 0.0


@given(st.floats(-30, 30))
def test_error_function_odd_symmetry(x):
    # erf(x) = 1 - 2 Q(sqrt(2) x) must be odd
    erf_pos = 1 - 2 * an.qfunc(math.sqrt(2) * x)
    erf_neg = 1 - 2 * an.qfunc(-math.sqrt(2) * x)
    assert erf_neg == pytest.approx(-erf_pos, abs=1e-15)


def test_qfunc_and_cpep():
    x = np.linspace(-3, 30, 50)
    np.testing.assert_allclose(an.qfunc(x), norm.sf(x), rtol=1e-12)
    assert an.cpep(0.0, 3.0) == 0.5
    assert an.cpep(2.0, 4.0) == pytest.approx(norm.sf(2.0))
    with pytest.raises(ValueError):
        an.cpep(-1.0, 1.0)


# At small L the Gaussian model puts mass on xi < 0, which gives the angular
# integrand a square-root kink at t = 0 and slows the rule to algebraic decay.
@pytest.mark.parametrize("L,rel", [(10, 1e-6), (80, 1e-8), (100, 1e-8), (160, 1e-8)])
@pytest.mark.parametrize("d_sq", [4.0, 2.0, 0.4])
def test_upep_same_antenna_vs_adaptive_quadrature(L, rel, d_sq):
    grid = an.gcq_nodes(200)
    for snr_db in (-40, -30, -20, -10):
        rho = 10 ** (snr_db / 10)
        ref = upep_same_reference(rho, d_sq, L)
        assert an.upep_same_antenna(rho, d_sq, L, grid) == pytest.approx(ref, rel=rel, abs=1e-300)


def test_gcq_default_q_on_linear_rho_grid():
    for L in (80, 100, 160):
        for rho in (1.0, 10.0, 100.0, 1000.0):
            assert abs(an.upep_same_antenna(rho, 4.0, L) - upep_same_reference(rho, 4.0, L)) <= 1e-8
            assert abs(an.upep_cross_antenna(rho, 1, -1, L) - upep_cross_reference(rho, 1, -1, L)) <= 1e-8


@pytest.mark.parametrize("s,s_hat", [(1, 1), (1, -1), (1, 1j), ((1 + 1j) / math.sqrt(2), (-1 + 1j) / math.sqrt(2))])
def test_upep_cross_antenna_vs_adaptive_quadrature(s, s_hat):
    grid = an.gcq_nodes(200)
    for snr_db in (-40, -30, -20, -10):
        rho = 10 ** (snr_db / 10)
        ref = upep_cross_reference(rho, s, s_hat, 100)
        assert an.upep_cross_antenna(rho, s, s_hat, 100, grid) == pytest.approx(ref, rel=1e-8, abs=1e-300)


@given(st.floats(0, 1e3), st.floats(0.01, 4), st.integers(1, 200))
def test_upep_bounds(rho, d_sq, L):
    p = an.upep_same_antenna(rho, d_sq, L)
    assert 0 <= p <= 0.5 + 1e-12
    q = an.upep_cross_antenna(rho, 1, -1, L)
    assert 0 <= q <= 0.5 + 1e-12


def test_upep_zero_snr_and_monotone():
    assert an.upep_same_antenna(0.0, 4.0, 100) == pytest.approx(0.5, abs=1e-15)
    assert an.upep_cross_antenna(0.0, 1, 1, 100) == pytest.approx(0.5, abs=1e-15)
    rho = 10 ** (np.arange(-50, 0, 2.0) / 10)
    for p in (an.upep_same_antenna(rho, 4.0, 50), an.upep_cross_antenna(rho, 1, -1, 50)):
        assert np.all(np.diff(p) <= 0)


def test_gcq_converges_with_q():
    rho = 10 ** (-2.2)
    ref = upep_cross_reference(rho, 1, 1, 100)
    errs = [abs(an.upep_cross_antenna(rho, 1, 1, 100, an.gcq_nodes(Q)) / ref - 1) for Q in (4, 8, 16, 32)]
    assert errs[-1] < 1e-8
    assert errs[0] > errs[-1]


@given(st.floats(-5, 0.01), st.integers(1, 50), st.complex_numbers(max_magnitude=2), st.complex_numbers(min_magnitude=0.1, max_magnitude=2))
def test_log_mgf_matches_eigen_oracle(x, L, s, s_hat):
    gm = an.gamma_moments(s, s_hat, L)
    lam_max = np.linalg.eigvalsh(gm.V)[-1]
    if 1 - 2 * x * lam_max <= 1e-3:
        return
    ref = math.log(mgf_norm_sq(x, gm.mu, gm.V))
    assert an.log_mgf_quadratic(x, gm) == pytest.approx(ref, rel=1e-9, abs=1e-9)


def test_mgf_quadratic_errors_and_vectorisation():
    gm = an.gamma_moments(1, 1, 10)
    xs = np.array([-1.0, -0.1, 0.0])
    np.testing.assert_allclose(an.mgf_quadratic(xs, gm), [an.mgf_quadratic(x, gm) for x in xs])
    assert an.mgf_quadratic(0.0, gm) == 1.0
    with pytest.raises(ValueError, match="positive definite"):
        an.mgf_quadratic(1.0, gm)
    bad = an.GammaMoments(np.zeros(2), np.diag([1.0, 0.0]), np.eye(2))
    with pytest.raises(ValueError, match="positive definite"):
        an.log_mgf_quadratic(-1.0, bad)


def test_gamma_moments_bpsk():
    gm = an.gamma_moments(1, -1, 100)
    np.testing.assert_allclose(gm.mu, [25 * math.pi, 0.0])
    np.testing.assert_allclose(gm.V, [[100 * (16 - math.pi**2) / 16 + 50, 0], [0, 50]])
    np.testing.assert_array_equal(gm.A, np.eye(2))
    assert gm.V[0, 0] == pytest.approx(88.315, abs=1e-3)


def test_gamma_moments_against_definition_sampling(rng):
    # gamma = sum_l beta (alpha s - alpha' e^{-j phi} s_hat), phi a difference of uniform phases
    L, n = 100, 200_000
    s, s_hat = (1 + 1j) / math.sqrt(2), (1 - 1j) / math.sqrt(2)
    gm = an.gamma_moments(s, s_hat, L)
    z = _sample_gamma(rng, s, s_hat, L, n)
    np.testing.assert_allclose(z.mean(0), gm.mu, rtol=0.02)
    np.testing.assert_allclose(np.cov(z.T), gm.V, rtol=0.02, atol=0.02 * gm.V.max())


def _sample_gamma(rng, s, s_hat, L, n):
    out = np.empty((n, 2))
    for i in range(0, n, 10_000):
        m = min(10_000, n - i)
        a = rng.rayleigh(math.sqrt(0.5), (m, L))
        a2 = rng.rayleigh(math.sqrt(0.5), (m, L))
        b = rng.rayleigh(math.sqrt(0.5), (m, L))
        phi = rng.uniform(-math.pi, math.pi, (m, L)) - rng.uniform(-math.pi, math.pi, (m, L))
        g = (b * (a * s - a2 * np.exp(-1j * phi) * s_hat)).sum(1)
        out[i : i + m] = np.c_[g.real, g.imag]
    return out


def test_mgf_against_definition_sampling(rng):
    # Stronger tilts weight the far lower tail of gamma, where the Gaussian model
    # stops describing the true sum; at x = -1e-2 the two differ by about 9x.
    gm = an.gamma_moments(1, -1, 100)
    z = _sample_gamma(rng, 1, -1, 100, 400_000)
    x = -5e-4
    assert an.mgf_quadratic(x, gm) == pytest.approx(np.mean(np.exp(x * (z**2).sum(1))), rel=0.02)


def test_mgf_diagonal_zero_mean_is_chi_square_product():
    gm = an.GammaMoments(np.zeros(2), np.diag([2.0, 3.0]), np.eye(2))
    x = -0.7
    assert an.mgf_quadratic(x, gm) == pytest.approx((1 - 2 * x * 2.0) ** -0.5 * (1 - 2 * x * 3.0) ** -0.5)


def test_no_overflow_at_huge_snr():
    assert np.isfinite(an.log_mgf_quadratic(-1e6 / 2, an.gamma_moments(1, 1j, 100)))
    p = an.upep_cross_antenna(1e6, 1, -1, 100)
    assert 0 <= p < 1e-20  # a 2-D Gaussian has density at the origin, so this decays like 1/rho
    assert np.isfinite(an.abep_union_bound(1e6, 100, 2, build_constellation(4)))


def test_mgf_quadratic_monte_carlo(rng):
    gm = an.gamma_moments(1, -1, 4)
    z = rng.multivariate_normal(gm.mu, gm.V, size=400_000)
    x = -0.05
    assert an.mgf_quadratic(x, gm) == pytest.approx(np.mean(np.exp(x * (z**2).sum(1))), rel=0.01)


def test_union_bound_for_two_antennas_one_point_is_single_pep():
    c = build_constellation(1)
    rho = 10 ** (np.arange(-40, -10, 5.0) / 10)
    np.testing.assert_allclose(an.abep_union_bound(rho, 80, 2, c), an.upep_cross_antenna(rho, 1, 1, 80))


def test_union_bound_shape():
    c = build_constellation(2)
    rho = 10 ** (np.arange(-40, 0, 2.0) / 10)
    b = an.abep_union_bound(rho, 100, 2, c)
    assert b.shape == rho.shape
    assert np.all(np.diff(b) <= 0)
    assert isinstance(an.abep_union_bound(0.01, 100, 2, c), float)
    with pytest.raises(ValueError):
        an.abep_union_bound(1.0, 10, 1, build_constellation(1))
    assert np.all(an.abep_union_bound(rho, 100, 2, build_constellation(4)) > b)


def test_same_antenna_lambda_vs_quadrature():
    m = an.xi_moments(20)
    sd = math.sqrt(m.sigma2_xi)
    for rho in (1e-4, 1e-3, 1e-2):
        f = lambda xi: norm.pdf(xi, m.mu_xi, sd) * math.exp(-rho * 4 * xi**2 / 2)
        ref, _ = integrate.quad(f, m.mu_xi - 15 * sd, m.mu_xi + 15 * sd, epsabs=1e-15)
        assert an.same_antenna_lambda(rho, 4.0, 20) == pytest.approx(ref, rel=1e-8)


@pytest.mark.parametrize("n_tx,M", [(2, 2), (4, 2), (2, 4), (2, 1)])
def test_capacity_limits(n_tx, M):
    c = build_constellation(M)
    assert an.ergodic_capacity(0.0, 100, n_tx, c) == pytest.approx(0.0, abs=1e-12)
    assert an.ergodic_capacity(1e4, 100, n_tx, c) == pytest.approx(math.log2(n_tx * M), abs=1e-9)
    ec = an.ergodic_capacity(10 ** (np.arange(-60, 0, 2.0) / 10), 100, n_tx, c)
    assert np.all(np.diff(ec) >= -1e-12)
    assert np.all((ec >= 0) & (ec <= math.log2(n_tx * M)))


def test_capacity_exclusion_variants():
    c = build_constellation(2)
    both = an.ergodic_capacity(0.0, 100, 2, c, exclusion="both")
    assert both == pytest.approx(1.0)  # pairs sharing an antenna or a symbol are dropped
    with pytest.raises(ValueError):
        an.ergodic_capacity(1.0, 100, 2, c, exclusion="none")


def test_detector_flops_closed_forms():
    assert an.detector_flops("ml", 100, 2, 2) == (1220, 804)
    assert an.detector_flops("tsml", 100, 4, 2) == (305 * 6, 201 * 6)
    assert an.detector_flops("GD", 100, 4, 2) == (8 + 610, 4 + 402)
    with pytest.raises(ValueError):
        an.detector_flops("mmse", 10, 2, 2)
