"""Closed-form error probability, capacity and complexity of RIS-SM.

The cascaded gain of the co-phased antenna, ``xi = sum_l alpha_l beta_l``, is
treated as Gaussian (sum of L i.i.d. double-Rayleigh amplitudes).  Pairwise
error probabilities are written in the Craig form of the Q-function,

    Pe = (1/pi) * int_0^{pi/2} MGF(-rho / (4 sin^2 t)) dt,

and the finite angular integral is evaluated with Gauss-Chebyshev quadrature
of the first kind under the substitution ``cos(2t) = w``, which turns it into
``(1/(2Q)) * sum_q MGF(-rho / (4 sin^2 t_q))`` with ``t_q = arccos(w_q) / 2``.
The integrand is smooth and even in ``t`` about ``pi/2``, so the rule
converges geometrically in ``Q``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import product

import numpy as np
from scipy.special import erfc, logsumexp

from ris_sm.constellation import Constellation, bit_error_table

PI = math.pi
DEFAULT_Q = 128
PRODUCT_MEAN = PI / 4  # E[alpha * beta] for independent unit-power Rayleigh amplitudes
PRODUCT_VAR = (16 - PI**2) / 16


@dataclass(frozen=True)
class XiMoments:
    mu_xi: float
    sigma2_xi: float


@dataclass(frozen=True)
class GammaMoments:
    """Mean and covariance of (Re, Im) of ``G_n s - G_k s_hat`` for antennas n != k."""

    mu: np.ndarray
    V: np.ndarray
    A: np.ndarray


@dataclass(frozen=True)
class GcqGrid:
    Q: int
    nodes: np.ndarray

    @property
    def angles(self) -> np.ndarray:
        return np.arccos(self.nodes) / 2

    @property
    def sin2(self) -> np.ndarray:
        return np.sin(self.angles) ** 2


@lru_cache(maxsize=32)
def gcq_nodes(Q: int = DEFAULT_Q) -> GcqGrid:
    if Q < 1:
        raise ValueError(f"Q must be >= 1, got {Q}")
    q = np.arange(1, Q + 1)
    nodes = np.cos((2 * q - 1) * PI / (2 * Q))
    nodes.setflags(write=False)
    return GcqGrid(Q, nodes)


def xi_moments(L: int) -> XiMoments:
    if L < 1:
        raise ValueError(f"L must be >= 1, got {L}")
    return XiMoments(L * PRODUCT_MEAN, L * PRODUCT_VAR)


def xi_square_pdf(x, m: XiMoments):
    """Density of ``xi**2`` when ``xi ~ N(mu, sigma^2)``, evaluated in the log domain."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("xi_square_pdf is defined for x > 0 only")
    r = np.sqrt(x)
    s2 = m.sigma2_xi
    # exp(-(r - mu)^2 / 2s2) * (1 + exp(-2 mu r / s2)) / (2 sqrt(2 pi s2 x))
    log_f = (
        -((r - m.mu_xi) ** 2) / (2 * s2)
        + np.log1p(np.exp(-2 * m.mu_xi * r / s2))
        - np.log(2 * np.sqrt(2 * PI * s2 * x))
    )
    out = np.exp(log_f)
    return float(out) if out.ndim == 0 else out


def phase_diff_pdf(phi):
    """Triangular density of the difference of two independent U[-pi, pi] phases."""
    phi = np.asarray(phi, dtype=float)
    out = np.where(np.abs(phi) <= 2 * PI, (2 * PI - np.abs(phi)) / (4 * PI**2), 0.0)
    return float(out) if out.ndim == 0 else out


def qfunc(x):
    return 0.5 * erfc(np.asarray(x) / math.sqrt(2))


def cpep(rho: float, diff_sq: float) -> float:
    """Q(sqrt(rho * |G_n s - G_k s_hat|^2 / 2)) for one channel realization."""
    if rho < 0 or diff_sq < 0:
        raise ValueError(f"rho and diff_sq must be non-negative, got {rho}, {diff_sq}")
    return float(qfunc(math.sqrt(rho * diff_sq / 2)))


def _as_rho(rho):
    r = np.asarray(rho, dtype=float)
    if np.any(r < 0):
        raise ValueError("rho must be non-negative")
    return r


def _gcq_mean_of_exp(log_terms: np.ndarray, Q: int):
    # (1/(2Q)) * sum_q exp(log_terms[..., q])
    out = np.exp(logsumexp(log_terms, axis=-1) - math.log(2 * Q))
    return float(out) if out.ndim == 0 else out


def upep_same_antenna(rho, d_sq: float, L: int, grid: GcqGrid | None = None):
    """Unconditional PEP when the antenna is detected correctly and ``|s - s_hat|^2 = d_sq``."""
    if not d_sq > 0:
        raise ValueError(f"d_sq must be positive, got {d_sq}")
    grid = grid or gcq_nodes()
    m = xi_moments(L)
    r = _as_rho(rho)[..., None]
    s2 = grid.sin2
    denom = 2 * s2 + r * m.sigma2_xi * d_sq
    log_terms = 0.5 * np.log(2 * s2 / denom) - r * m.mu_xi**2 * d_sq / (2 * denom)
    return _gcq_mean_of_exp(log_terms, grid.Q)


def gamma_moments(s: complex, s_hat: complex, L: int) -> GammaMoments:
    s, s_hat = complex(s), complex(s_hat)
    mu = L * PRODUCT_MEAN * np.array([s.real, s.imag])
    half = abs(s_hat) ** 2 * L / 2
    v11 = PRODUCT_VAR * s.real**2 * L + half
    v22 = PRODUCT_VAR * s.imag**2 * L + half
    v12 = PRODUCT_VAR * s.real * s.imag * L
    return GammaMoments(mu, np.array([[v11, v12], [v12, v22]]), np.eye(2))


def _check_quadratic_form(gm: GammaMoments):
    eig = np.linalg.eigvalsh(gm.V)
    if eig[0] <= 0:
        raise ValueError(f"covariance V must be positive definite (smallest eigenvalue {eig[0]:.3g})")
    return eig


def log_mgf_quadratic(x, gm: GammaMoments):
    """log E[exp(x * z^T A z)] for Gaussian z with mean ``mu`` and covariance ``V``.

    Uses the identity (I - (I - 2xAV)^{-1}) V^{-1} = -2x (I - 2xAV)^{-1} A, so
    neither V^{-1} nor the MGF itself is formed.
    """
    x = np.asarray(x, dtype=float)
    _check_quadratic_form(gm)
    AV = gm.A @ gm.V
    B = np.eye(2) - 2 * x[..., None, None] * AV
    # A = I and V symmetric make B symmetric; PD iff both eigenvalues are positive
    eig = np.linalg.eigvalsh(0.5 * (B + np.swapaxes(B, -1, -2)))
    if np.any(eig <= 0):
        raise ValueError("I - 2x*A*V must be positive definite; the MGF does not exist at this x")
    logdet = np.sum(np.log(eig), axis=-1)
    Amu = gm.A @ gm.mu
    sol = np.linalg.solve(B, np.broadcast_to(Amu, B.shape[:-1])[..., None])[..., 0]
    quad = x * np.einsum("...i,i->...", sol, gm.mu)
    return -0.5 * logdet + quad


def mgf_quadratic(x, gm: GammaMoments):
    out = np.exp(log_mgf_quadratic(x, gm))
    return float(out) if np.ndim(out) == 0 else out


def upep_cross_antenna(rho, s: complex, s_hat: complex, L: int, grid: GcqGrid | None = None):
    """Unconditional PEP for an antenna error (s_hat may equal s)."""
    grid = grid or gcq_nodes()
    gm = gamma_moments(s, s_hat, L)
    r = _as_rho(rho)[..., None]
    log_terms = log_mgf_quadratic(-r / (4 * grid.sin2), gm)
    return _gcq_mean_of_exp(log_terms, grid.Q)


def abep_union_bound(rho, L: int, n_tx: int, c: Constellation, grid: GcqGrid | None = None):
    """Hamming-weighted union bound on the average bit error probability."""
    K = n_tx * c.order
    if K < 2:
        raise ValueError("need at least two (antenna, symbol) hypotheses")
    grid = grid or gcq_nodes()
    weights = bit_error_table(n_tx, c)
    r = _as_rho(rho)
    same: dict[tuple[int, int], np.ndarray] = {}
    cross: dict[tuple[int, int], np.ndarray] = {}
    total = np.zeros_like(r)
    for (n, m), (k, mh) in product(product(range(n_tx), range(c.order)), repeat=2):
        if (n, m) == (k, mh):
            continue
        w = weights[n * c.order + m, k * c.order + mh]
        if n == k:
            if (m, mh) not in same:
                same[m, mh] = upep_same_antenna(r, abs(c.points[m] - c.points[mh]) ** 2, L, grid)
            total = total + w * same[m, mh]
        else:
            if (m, mh) not in cross:
                cross[m, mh] = upep_cross_antenna(r, c.points[m], c.points[mh], L, grid)
            total = total + w * cross[m, mh]
    out = total / (K * math.log2(K))
    return float(out) if np.ndim(out) == 0 else out


_HERMITE_NODES = 64


def same_antenna_lambda(rho, d_sq: float, L: int):
    """E[exp(-rho * xi^2 * d_sq / 2)] under the Gaussian model of ``xi``.

    Evaluated with Gauss-Hermite quadrature over ``xi``, which is the same as
    integrating against the density of ``xi**2``.
    """
    m = xi_moments(L)
    t, w = np.polynomial.hermite.hermgauss(_HERMITE_NODES)
    xi = m.mu_xi + math.sqrt(2 * m.sigma2_xi) * t
    r = _as_rho(rho)[..., None]
    log_terms = np.log(w) - r * d_sq * xi**2 / 2
    out = np.exp(logsumexp(log_terms, axis=-1)) / math.sqrt(PI)
    return float(out) if np.ndim(out) == 0 else out


def ergodic_capacity(rho, L: int, n_tx: int, c: Constellation, exclusion: str = "joint"):
    """Closed-form ergodic capacity (bits per channel use) for equiprobable inputs.

    ``exclusion="joint"`` sums over every ordered pair of distinct
    (antenna, symbol) hypotheses.  ``exclusion="both"`` keeps only pairs that
    differ in antenna *and* symbol; it does not vanish at zero SNR and is
    provided for comparison only.
    """
    if exclusion not in ("joint", "both"):
        raise ValueError(f"exclusion must be 'joint' or 'both', got {exclusion!r}")
    K = n_tx * c.order
    r = _as_rho(rho)
    total = np.zeros_like(r)
    cache: dict[tuple[bool, int, int], np.ndarray] = {}
    for (n, m), (k, mh) in product(product(range(n_tx), range(c.order)), repeat=2):
        if (n, m) == (k, mh):
            continue
        if exclusion == "both" and (n == k or m == mh):
            continue
        key = (n == k, m, mh)
        if key not in cache:
            if n == k:
                cache[key] = same_antenna_lambda(r, abs(c.points[m] - c.points[mh]) ** 2, L)
            else:
                cache[key] = np.exp(log_mgf_quadratic(-r / 2, gamma_moments(c.points[m], c.points[mh], L)))
        total = total + cache[key]
    ec = 2 * math.log2(K) - np.log2(K + total)
    out = np.clip(ec, 0.0, math.log2(K))
    return float(out) if np.ndim(out) == 0 else out


def detector_flops(kind: str, L: int, n_tx: int, M: int) -> tuple[int, int]:
    """Real (multiplications, additions) per detected symbol."""
    per_metric = (3 * L + 5, 2 * L + 1)
    kind = kind.lower()
    if kind == "ml":
        n = n_tx * M
        return per_metric[0] * n, per_metric[1] * n
    if kind == "tsml":
        n = n_tx + M
        return per_metric[0] * n, per_metric[1] * n
    if kind == "gd":
        return 2 * n_tx + per_metric[0] * M, n_tx + per_metric[1] * M
    raise ValueError(f"unknown detector {kind!r}; expected ml, tsml or gd")
