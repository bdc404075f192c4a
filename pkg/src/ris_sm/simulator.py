"""Seeded Monte Carlo engine for BER sweeps, received-power profiles and capacity.

Trials are split into blocks of ``block_size``.  Block ``b`` draws all of
its randomness from ``SeedSequence(master_seed, spawn_key=(b,))``, so the
merged integer counts do not depend on how many worker processes ran the
blocks or in which order they finished.  Within a block the same bits,
channels, RIS phases and unit-power noise samples are reused for every SNR
point (common random numbers); only the noise scaling changes.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.special import logsumexp
from scipy.stats import beta as beta_dist

from ris_sm.channel import PhaseMode
from ris_sm.constellation import Constellation, Kind, bit_error_table, build_constellation
from ris_sm.detectors import BATCH_DETECTORS

log = logging.getLogger(__name__)

RECEIVERS = ("nominal", "effective")


@dataclass(frozen=True)
class SweepConfig:
    """One Monte Carlo experiment.

    ``receiver`` selects the hypothesis gains the detectors use: ``"nominal"``
    (each antenna's co-phased gain ``sum_l alpha beta``) or ``"effective"``
    (the cascaded gains through the RIS configuration deployed in the slot).
    ``snr_grid_db`` is ``P_t / N0`` in dB with ``P_t`` fixed; ``inf`` means
    noiseless.
    """

    L: int = 100
    n_tx: int = 2
    M: int = 2
    kind: str = "psk"
    detectors: tuple[str, ...] = ("ml",)
    snr_grid_db: tuple[float, ...] = (0.0,)
    trials_per_point: int = 10_000
    master_seed: int = 0
    phase_mode: str = "aligned"
    perturb_k: float | None = None
    block_size: int = 2000
    receiver: str = "nominal"
    P_t: float = 1.0
    adaptive: bool = False
    target_errors: int = 1000

    def __post_init__(self):
        object.__setattr__(self, "detectors", tuple(self.detectors))
        object.__setattr__(self, "snr_grid_db", tuple(float(s) for s in self.snr_grid_db))
        object.__setattr__(self, "trials_per_point", int(self.trials_per_point))
        self.validate()

    def validate(self):
        if self.L < 1 or self.n_tx < 1:
            raise ValueError(f"need L >= 1 and n_tx >= 1, got L={self.L}, n_tx={self.n_tx}")
        if self.n_tx & (self.n_tx - 1):
            raise ValueError(f"n_tx must be a power of two, got {self.n_tx}")
        self.constellation  # validates M and kind
        if self.n_tx * self.M < 2:
            raise ValueError("need at least one bit per slot (n_tx * M >= 2)")
        if not self.detectors or set(self.detectors) - set(BATCH_DETECTORS):
            raise ValueError(f"detectors must be a non-empty subset of {sorted(BATCH_DETECTORS)}, got {self.detectors}")
        if not self.snr_grid_db:
            raise ValueError("snr grid is empty")
        if self.trials_per_point < 1:
            raise ValueError("trials_per_point must be >= 1")
        if self.block_size < 1:
            raise ValueError("block_size must be >= 1")
        mode = PhaseMode(self.phase_mode)
        if mode is PhaseMode.PERTURBED and not (self.perturb_k is not None and self.perturb_k >= 1):
            raise ValueError("perturbed phase mode needs perturb_k >= 1")
        if self.receiver not in RECEIVERS:
            raise ValueError(f"receiver must be one of {RECEIVERS}, got {self.receiver!r}")
        if not self.P_t > 0:
            raise ValueError("P_t must be positive")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")

    @property
    def constellation(self) -> Constellation:
        return build_constellation(self.M, Kind(self.kind.lower()))

    @property
    def bits_per_slot(self) -> int:
        return int(math.log2(self.n_tx * self.M))

    def block_sizes(self) -> list[int]:
        full, rest = divmod(self.trials_per_point, self.block_size)
        return [self.block_size] * full + ([rest] if rest else [])


@dataclass(frozen=True)
class BerRecord:
    snr_db: float
    detector: str
    bit_errors: int
    bits_sent: int
    ber: float
    trials: int


def block_rng(master_seed: int, block_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(block_index,)))


@dataclass
class _Block:
    tx: np.ndarray  # flat tx index antenna * M + point, (B,)
    y0: np.ndarray  # noiseless received sample without sqrt(P_t), (B,)
    noise: np.ndarray  # unit-power CN(0,1) noise, (B,)
    effective: np.ndarray  # (B, n_tx) cascaded gains through the deployed RIS
    nominal: np.ndarray  # (B, n_tx) co-phased gains sum_l alpha beta


def _draw_block(cfg: SweepConfig, c: Constellation, block_index: int, size: int, aligned_to=None) -> _Block:
    rng = block_rng(cfg.master_seed, block_index)
    kb = c.bits_per_symbol
    bits = rng.integers(0, 2, size=(size, cfg.bits_per_slot))
    weights = 1 << np.arange(cfg.bits_per_slot)[::-1]
    word = bits @ weights
    label, antenna = word >> (cfg.bits_per_slot - kb), word & (cfg.n_tx - 1)
    point = c.index_of_label[label]

    shape = (size, cfg.L, cfg.n_tx)
    h = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * math.sqrt(0.5)
    g = (rng.standard_normal(shape[:2]) + 1j * rng.standard_normal(shape[:2])) * math.sqrt(0.5)
    hg = h * g[:, :, None]
    del h, g

    target = antenna if aligned_to is None else np.full(size, aligned_to)
    mode = PhaseMode(cfg.phase_mode)
    if mode is PhaseMode.RANDOM:
        phasor = np.exp(1j * rng.uniform(0.0, 2 * math.pi, shape[:2]))
    else:
        ref = hg[np.arange(size), :, target]
        phasor = np.conj(ref) / np.abs(ref)
        if mode is PhaseMode.PERTURBED and not math.isinf(cfg.perturb_k):
            k = cfg.perturb_k
            phasor = phasor * np.exp(1j * rng.uniform(-math.pi / k, math.pi / k, shape[:2]))
    effective = np.einsum("bln,bl->bn", hg, phasor)
    nominal = np.abs(hg).sum(axis=1)
    noise = (rng.standard_normal(size) + 1j * rng.standard_normal(size)) * math.sqrt(0.5)
    y0 = effective[np.arange(size), antenna] * c.points[point]
    return _Block(antenna * c.order + point, y0, noise, effective, nominal)


def _noise_power(snr_db: float, P_t: float) -> float:
    return 0.0 if math.isinf(snr_db) and snr_db > 0 else P_t * 10.0 ** (-snr_db / 10.0)


def _ber_block(cfg: SweepConfig, block_index: int, size: int, active: np.ndarray) -> np.ndarray:
    """Bit errors for one block, shape (n_snr, n_detectors); inactive SNR points are left at 0."""
    c = cfg.constellation
    blk = _draw_block(cfg, c, block_index, size)
    table = bit_error_table(cfg.n_tx, c)
    gains = blk.effective if cfg.receiver == "effective" else blk.nominal
    sqrt_pt = math.sqrt(cfg.P_t)
    errors = np.zeros((len(cfg.snr_grid_db), len(cfg.detectors)), dtype=np.int64)
    for i, snr in enumerate(cfg.snr_grid_db):
        if not active[i]:
            continue
        y = sqrt_pt * blk.y0 + math.sqrt(_noise_power(snr, cfg.P_t)) * blk.noise
        for j, name in enumerate(cfg.detectors):
            est = BATCH_DETECTORS[name](y, gains, c.points, cfg.P_t)
            errors[i, j] = table[blk.tx, est].sum()
    return errors


def _ber_block_star(args):
    return _ber_block(*args)


def run_ber_sweep(cfg: SweepConfig, workers: int = 1) -> list[BerRecord]:
    """BER of each configured detector at each SNR point."""
    cfg.validate()
    sizes = cfg.block_sizes()
    n_snr, n_det = len(cfg.snr_grid_db), len(cfg.detectors)
    errors = np.zeros((n_snr, n_det), dtype=np.int64)
    trials = np.zeros(n_snr, dtype=np.int64)
    active = np.ones(n_snr, dtype=bool)

    def consume(results):
        for b, block_errors in enumerate(results):
            errors[active] += block_errors[active]
            trials[active] += sizes[b]
            if cfg.adaptive:
                # stop a point once every detector has seen enough errors
                active[:] &= ~(errors.min(axis=1) >= cfg.target_errors)
                if not active.any():
                    break

    # a fully-active mask is passed so results never depend on scheduling
    jobs = ((cfg, b, size, np.ones(n_snr, dtype=bool)) for b, size in enumerate(sizes))
    if workers <= 1:
        consume(map(_ber_block_star, jobs))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            consume(pool.map(_ber_block_star, jobs))
    bits = trials * cfg.bits_per_slot
    records = []
    for i, snr in enumerate(cfg.snr_grid_db):
        for j, name in enumerate(cfg.detectors):
            e, n = int(errors[i, j]), int(bits[i])
            records.append(BerRecord(snr, name, e, n, e / n, int(trials[i])))
    log.debug("sweep done: %s", asdict(cfg))
    return records


def received_power_profile(cfg: SweepConfig, aligned_antenna: int) -> list[tuple[int, float]]:
    """Mean noiseless received power from every antenna with the RIS co-phased for one of them."""
    if not 0 <= aligned_antenna < cfg.n_tx:
        raise IndexError(f"aligned_antenna {aligned_antenna} out of range for n_tx={cfg.n_tx}")
    c = cfg.constellation
    acc = np.zeros(cfg.n_tx)
    for b, size in enumerate(cfg.block_sizes()):
        blk = _draw_block(cfg, c, b, size, aligned_to=aligned_antenna)
        acc += (np.abs(blk.effective) ** 2).sum(axis=0)
    return [(n, float(cfg.P_t * acc[n] / cfg.trials_per_point)) for n in range(cfg.n_tx)]


def ec_monte_carlo(cfg: SweepConfig) -> list[tuple[float, float]]:
    """Sampled mutual information of the equiprobable (antenna, symbol) input, in bpcu.

    Candidate points are ``sqrt(P_t) * gains[n] * s_m`` with the gains of the
    configured receiver model.
    """
    c = cfg.constellation
    K = cfg.n_tx * c.order
    acc = np.zeros(len(cfg.snr_grid_db))
    for b, size in enumerate(cfg.block_sizes()):
        blk = _draw_block(cfg, c, b, size)
        gains = blk.effective if cfg.receiver == "effective" else blk.nominal
        cand = math.sqrt(cfg.P_t) * (gains[:, :, None] * c.points[None, None, :]).reshape(size, K)
        sent = cand[np.arange(size), blk.tx]
        for i, snr in enumerate(cfg.snr_grid_db):
            N0 = _noise_power(snr, cfg.P_t)
            if N0 == 0:
                continue
            w = math.sqrt(N0) * blk.noise
            y = sent + w
            expo = -(np.abs(y[:, None] - cand) ** 2 - (np.abs(w) ** 2)[:, None]) / N0
            acc[i] += logsumexp(expo, axis=1).sum()
    out = []
    for i, snr in enumerate(cfg.snr_grid_db):
        if _noise_power(snr, cfg.P_t) == 0:
            out.append((snr, math.log2(K)))
        else:
            out.append((snr, float(math.log2(K) - acc[i] / cfg.trials_per_point / math.log(2))))
    return out


def clopper_pearson(k: int, n: int, confidence: float = 0.99) -> tuple[float, float]:
    a = 1 - confidence
    lo = 0.0 if k == 0 else float(beta_dist.ppf(a / 2, k, n - k + 1))
    hi = 1.0 if k == n else float(beta_dist.ppf(1 - a / 2, k + 1, n - k))
    return lo, hi


def binomial_sigma(rec: BerRecord) -> float:
    p = rec.ber
    return math.sqrt(max(p * (1 - p), 0.0) / rec.bits_sent)
