"""Rayleigh fading for the BS-RIS-UE cascade and RIS phase configuration.

Every channel entry is CN(0, 1), so each amplitude is Rayleigh with unit
second moment.  ``h[l, n]`` is the link from BS antenna ``n`` to element ``l``
and ``g[l]`` the link from element ``l`` to the UE.  The signal reflected by
element ``l`` picks up ``h[l, n] * g[l] * exp(1j * theta[l])``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from ris_sm.constellation import SmSymbol

TWO_PI = 2.0 * np.pi


def complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * np.sqrt(0.5)


@dataclass(frozen=True)
class ChannelRealization:
    h: np.ndarray  # (L, n_tx)
    g: np.ndarray  # (L,)

    @property
    def n_elements(self) -> int:
        return self.h.shape[0]

    @property
    def n_tx(self) -> int:
        return self.h.shape[1]

    @property
    def alpha(self) -> np.ndarray:
        return np.abs(self.h)

    @property
    def beta(self) -> np.ndarray:
        return np.abs(self.g)


class PhaseMode(str, Enum):
    ALIGNED = "aligned"
    RANDOM = "random"
    PERTURBED = "perturbed"


@dataclass(frozen=True)
class RisPhaseConfig:
    """Reflection phases in [0, 2*pi); unit reflection amplitude is implied."""

    theta: np.ndarray
    mode: PhaseMode
    antenna: int | None = None
    k: float | None = None

    def __len__(self) -> int:
        return len(self.theta)


@dataclass(frozen=True)
class NoiseParams:
    P_t: float = 1.0
    N0: float = 1.0

    def __post_init__(self):
        if not self.P_t > 0:
            raise ValueError(f"P_t must be positive, got {self.P_t}")
        if not self.N0 >= 0:
            raise ValueError(f"N0 must be non-negative, got {self.N0}")

    @property
    def rho(self) -> float:
        return self.P_t / self.N0 if self.N0 > 0 else float("inf")

    @classmethod
    def from_snr_db(cls, snr_db: float, P_t: float = 1.0) -> "NoiseParams":
        return cls(P_t, P_t * 10.0 ** (-snr_db / 10.0))


def sample_channel(L: int, n_tx: int, rng: np.random.Generator) -> ChannelRealization:
    if L < 1 or n_tx < 1:
        raise ValueError(f"need L >= 1 and n_tx >= 1, got L={L}, n_tx={n_tx}")
    h = complex_normal(rng, (L, n_tx))
    g = complex_normal(rng, L)
    return ChannelRealization(h, g)


def _check_antenna(ch: ChannelRealization, n: int):
    if not 0 <= n < ch.n_tx:
        raise IndexError(f"antenna index {n} out of range for n_tx={ch.n_tx}")


def align_phases(ch: ChannelRealization, n_t: int) -> RisPhaseConfig:
    """Co-phase every reflected path of antenna ``n_t`` at the UE."""
    _check_antenna(ch, n_t)
    theta = np.mod(-np.angle(ch.h[:, n_t] * ch.g), TWO_PI)
    return RisPhaseConfig(theta, PhaseMode.ALIGNED, antenna=n_t)


def random_phases(L: int, rng: np.random.Generator) -> RisPhaseConfig:
    return RisPhaseConfig(rng.uniform(0.0, TWO_PI, L), PhaseMode.RANDOM)


def perturb_phases(cfg: RisPhaseConfig, k: float, rng: np.random.Generator) -> RisPhaseConfig:
    """Add i.i.d. uniform phase errors on [-pi/k, pi/k]; ``k=inf`` leaves phases untouched."""
    if not k >= 1:
        raise ValueError(f"phase error parameter k must be >= 1, got {k}")
    if np.isinf(k):
        return RisPhaseConfig(cfg.theta.copy(), PhaseMode.PERTURBED, cfg.antenna, k)
    err = rng.uniform(-np.pi / k, np.pi / k, len(cfg.theta))
    return RisPhaseConfig(np.mod(cfg.theta + err, TWO_PI), PhaseMode.PERTURBED, cfg.antenna, k)


def composite_gain(ch: ChannelRealization, cfg: RisPhaseConfig, n_t: int) -> complex:
    """Cascaded gain sum_l alpha_{l,n} beta_l exp(j(theta_l - phi_l - varphi_{l,n}))."""
    _check_antenna(ch, n_t)
    if len(cfg) != ch.n_elements:
        raise ValueError(f"phase config has {len(cfg)} elements, channel has {ch.n_elements}")
    return complex(np.sum(ch.h[:, n_t] * ch.g * np.exp(1j * cfg.theta)))


def transmit(
    ch: ChannelRealization,
    cfg: RisPhaseConfig,
    sym: SmSymbol,
    noise: NoiseParams,
    rng: np.random.Generator | None = None,
) -> complex:
    if sym.s == 0:
        raise ValueError("constellation points are never zero")
    y = np.sqrt(noise.P_t) * composite_gain(ch, cfg, sym.antenna) * sym.s
    if noise.N0 > 0:
        if rng is None:
            raise ValueError("a random generator is required when N0 > 0")
        y += np.sqrt(noise.N0) * complex(complex_normal(rng, ()))
    return complex(y)


def instantaneous_snr(ch: ChannelRealization, cfg: RisPhaseConfig, n_t: int, noise: NoiseParams) -> float:
    if noise.N0 == 0:
        raise ValueError("instantaneous SNR is undefined for N0 = 0")
    return noise.P_t * abs(composite_gain(ch, cfg, n_t)) ** 2 / noise.N0
