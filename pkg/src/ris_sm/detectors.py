"""Joint ML, two-stage ML and greedy (energy-matching) receivers.

Each detector compares ``y`` against hypotheses ``sqrt(P_t) * gains[n] * s_m``.
Two sources of hypothesis gains are provided:

* :func:`hypothesis_gains` -- ``sum_l alpha_{l,n} beta_l``, the gain antenna
  ``n`` would see if the RIS were co-phased for it (the "nominal" receiver);
* :func:`effective_gains` -- the cascaded gains through the RIS configuration
  actually deployed in the slot (the "effective" receiver), which is the
  receiver the closed-form error analysis describes.

Ties are broken towards the lowest ``(antenna, point)`` pair.  The scalar
detectors optionally charge an :class:`OpCounter` with real multiplications
and additions following the per-metric cost model of the complexity table:
forming ``sqrt(P_t) * sum_l alpha beta s`` and the squared residual costs
``3L + 5`` multiplications and ``2L + 1`` additions.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from ris_sm.channel import ChannelRealization, RisPhaseConfig
from ris_sm.constellation import Constellation


@dataclass(frozen=True)
class HypothesisGains:
    values: np.ndarray  # (n_tx,), real for the nominal receiver, complex for the effective one
    n_elements: int

    @property
    def n_tx(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class DetectionResult:
    antenna: int
    point: int
    metric: float


@dataclass
class OpCounter:
    """Real multiplication/addition tally, split by detector stage."""

    mults: dict[str, int] = field(default_factory=lambda: defaultdict(int))
    adds: dict[str, int] = field(default_factory=lambda: defaultdict(int))

    def charge(self, stage: str, mults: int, adds: int):
        self.mults[stage] += mults
        self.adds[stage] += adds

    def total(self, *stages: str) -> tuple[int, int]:
        keys = stages or tuple(set(self.mults) | set(self.adds))
        return sum(self.mults[k] for k in keys), sum(self.adds[k] for k in keys)


def hypothesis_gains(ch: ChannelRealization) -> HypothesisGains:
    return HypothesisGains(np.abs(ch.h).T @ np.abs(ch.g), ch.n_elements)


def effective_gains(ch: ChannelRealization, cfg: RisPhaseConfig) -> HypothesisGains:
    return HypothesisGains(ch.h.T @ (ch.g * np.exp(1j * cfg.theta)), ch.n_elements)


def _metric_cost(counter: OpCounter | None, stage: str, L: int, count: int):
    if counter is not None:
        counter.charge(stage, (3 * L + 5) * count, (2 * L + 1) * count)


def _symbol_stage(y, gain, c: Constellation, P_t: float) -> tuple[int, float]:
    d = np.abs(y - np.sqrt(P_t) * gain * c.points) ** 2
    m = int(np.argmin(d))
    return m, float(d[m])


def ml_detect(
    y: complex, gains: HypothesisGains, c: Constellation, P_t: float = 1.0, counter: OpCounter | None = None
) -> DetectionResult:
    d = np.abs(y - np.sqrt(P_t) * np.outer(gains.values, c.points)) ** 2
    flat = int(np.argmin(d))
    _metric_cost(counter, "joint", gains.n_elements, d.size)
    n, m = divmod(flat, c.order)
    return DetectionResult(n, m, float(d.flat[flat]))


def tsml_detect(
    y: complex,
    gains: HypothesisGains,
    c: Constellation,
    P_t: float = 1.0,
    s_probe: complex | None = None,
    counter: OpCounter | None = None,
) -> DetectionResult:
    probe = c.points[0] if s_probe is None else s_probe
    d1 = np.abs(y - np.sqrt(P_t) * gains.values * probe) ** 2
    n = int(np.argmin(d1))
    _metric_cost(counter, "spatial", gains.n_elements, gains.n_tx)
    m, metric = _symbol_stage(y, gains.values[n], c, P_t)
    _metric_cost(counter, "symbol", gains.n_elements, c.order)
    return DetectionResult(n, m, metric)


def gd_detect(
    y: complex, gains: HypothesisGains, c: Constellation, P_t: float = 1.0, counter: OpCounter | None = None
) -> DetectionResult:
    """Pick the antenna whose hypothesised received energy is closest to ``|y|^2``."""
    energy = y.real * y.real + y.imag * y.imag
    if counter is not None:
        # the received-energy measurement is shared by every hypothesis
        counter.charge("energy", 2, 1)
    g2 = np.abs(gains.values) ** 2
    # per antenna: P_t * g * g (2 mults, real nominal gains) and one subtraction
    mismatch = np.abs(energy - P_t * g2)
    if counter is not None:
        counter.charge("spatial", 2 * gains.n_tx, gains.n_tx)
    n = int(np.argmin(mismatch))
    m, metric = _symbol_stage(y, gains.values[n], c, P_t)
    _metric_cost(counter, "symbol", gains.n_elements, c.order)
    return DetectionResult(n, m, metric)


DETECTORS = {"ml": ml_detect, "tsml": tsml_detect, "gd": gd_detect}


# Vectorised forms used by the Monte Carlo engine.  ``y`` has shape (B,),
# ``gains`` shape (B, n_tx); they return flat indices ``antenna * M + point``.


def _batch_symbol_stage(y, g_sel, points, sqrt_pt):
    d = np.abs(y[:, None] - sqrt_pt * g_sel[:, None] * points[None, :]) ** 2
    return np.argmin(d, axis=1)


def ml_detect_batch(y, gains, points, P_t=1.0):
    cand = np.sqrt(P_t) * gains[:, :, None] * points[None, None, :]
    d = np.abs(y[:, None, None] - cand) ** 2
    return np.argmin(d.reshape(len(y), -1), axis=1)


def tsml_detect_batch(y, gains, points, P_t=1.0, s_probe=None):
    probe = points[0] if s_probe is None else s_probe
    sqrt_pt = np.sqrt(P_t)
    n = np.argmin(np.abs(y[:, None] - sqrt_pt * gains * probe) ** 2, axis=1)
    g_sel = np.take_along_axis(gains, n[:, None], axis=1)[:, 0]
    return n * len(points) + _batch_symbol_stage(y, g_sel, points, sqrt_pt)


def gd_detect_batch(y, gains, points, P_t=1.0):
    energy = y.real * y.real + y.imag * y.imag
    n = np.argmin(np.abs(energy[:, None] - P_t * np.abs(gains) ** 2), axis=1)
    g_sel = np.take_along_axis(gains, n[:, None], axis=1)[:, 0]
    return n * len(points) + _batch_symbol_stage(y, g_sel, points, np.sqrt(P_t))


BATCH_DETECTORS = {"ml": ml_detect_batch, "tsml": tsml_detect_batch, "gd": gd_detect_batch}
