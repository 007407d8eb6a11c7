"""Monte-Carlo link studies: coded uplink BER, downlink EVM, fault outage.

Frame model: one frame is one coherence block.  The channel is drawn
once, estimated from pilots, the detector is built once (per-realization
cost), and ``coherence_uses`` payload vectors are pushed through it.
Every user transmits an independent zero-terminated convolutional
codeword filling the block exactly.

Random streams are keyed as ``(seed, frame, purpose)`` so the same
channels, payloads, and unit-variance noise are reused across SNR
points (common random numbers) and results do not depend on how frames
are split across workers.  SNR is defined as 1 / N0 with unit-power
transmit symbols and unit-variance channel entries per receive antenna.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional, Sequence, Tuple

import numpy as np

from ..channel import draw_iid_rayleigh, estimate_ls, stream_rng
from ..equalization import apply_precoder, build_uplink_detector, precode
from ..impairments import (CircuitErrorModel, PaModel, evm_db, inject_errors,
                           pa_apply, quantize_adc)
from ..numerics import FxpOverlay
from .coding import ConvCode, conv_encode, viterbi_decode
from .modem import Constellation, demap_hard, demap_soft, map_bits

__all__ = [
    "SimConfig", "BerPoint", "BerResult", "run_uplink_ber",
    "EvmPoint", "run_downlink_evm",
    "OutagePoint", "OutageResult", "run_outage_study", "snr_at_ber",
]

_DETECTORS = ("mr", "zf", "mmse", "chd", "cd", "nsa", "wnsa", "mqrd")
_POLICIES = ("none", "ignore", "exclude")


@dataclass
class SimConfig:
    """Uplink Monte-Carlo configuration; ``validate`` names bad fields."""

    m: int
    k: int
    snr_db: Tuple[float, ...]
    constellation: str = "qpsk"
    detector: str = "zf"
    coded: bool = True
    coherence_uses: int = 512
    frames: int = 50
    pilot_snr_db: float = math.inf
    signal_fraction_bits: Optional[int] = None
    operator_fraction_bits: Optional[int] = None
    adc_bits: Optional[int] = None
    nsa_order: int = 3
    cd_sweeps: int = 3
    c_const: float = 1.0
    victim_fraction: float = 0.0
    victim_mode: str = "stuck_at_max"
    victim_policy: str = "none"
    seed: int = 0

    def validate(self) -> None:
        errs = []
        if self.m < 1:
            errs.append("m: need at least one antenna")
        if self.k < 1:
            errs.append("k: need at least one user")
        if self.k > self.m:
            errs.append(f"k: {self.k} users exceed {self.m} antennas")
        if not self.snr_db:
            errs.append("snr_db: empty grid")
        elif not all(math.isfinite(s) for s in self.snr_db):
            errs.append("snr_db: entries must be finite")
        known_const = self.constellation.lower() in ("qpsk", "16qam",
                                                     "64qam", "256qam")
        if not known_const:
            errs.append(f"constellation: unknown {self.constellation!r}")
        if self.detector.lower() not in _DETECTORS:
            errs.append(f"detector: unknown {self.detector!r}")
        if self.coherence_uses < 1:
            errs.append("coherence_uses: must be positive")
        if self.frames < 1:
            errs.append("frames: must be positive")
        if self.coded and known_const:
            nb = self.coherence_uses * self._bps()
            if nb % 2 or nb // 2 - ConvCode().tail_bits < 1:
                errs.append("coherence_uses: block too short for a "
                            "zero-terminated rate-1/2 codeword")
        for name in ("signal_fraction_bits", "operator_fraction_bits"):
            v = getattr(self, name)
            if v is not None and not 1 <= v <= 24:
                errs.append(f"{name}: {v} outside 1..24")
        if (self.signal_fraction_bits is None) != (self.operator_fraction_bits is None):
            errs.append("signal_fraction_bits/operator_fraction_bits: "
                        "set both or neither")
        if self.adc_bits is not None and self.adc_bits < 1:
            errs.append("adc_bits: must be positive")
        if self.nsa_order < 0 or self.nsa_order > 10:
            errs.append("nsa_order: outside 0..10")
        if self.cd_sweeps < 1:
            errs.append("cd_sweeps: must be positive")
        if not 0.0 <= self.victim_fraction < 1.0:
            errs.append("victim_fraction: outside [0, 1)")
        if self.victim_policy not in _POLICIES:
            errs.append(f"victim_policy: unknown {self.victim_policy!r}")
        if self.victim_fraction > 0.0 and self.victim_policy == "none":
            errs.append("victim_policy: faults injected but no policy chosen")
        if self.victim_policy == "exclude":
            surviving = self.m - int(round(self.victim_fraction * self.m))
            if surviving < self.k:
                errs.append("victim_fraction: exclusion leaves fewer "
                            "antennas than users")
        if errs:
            raise ValueError("; ".join(errs))

    def _bps(self) -> int:
        return {"qpsk": 2, "16qam": 4, "64qam": 6, "256qam": 8}[
            self.constellation.lower()]

    def info_bits_per_stream(self) -> int:
        nb = self.coherence_uses * self._bps()
        return nb // 2 - ConvCode().tail_bits if self.coded else nb

    def overlay(self) -> Optional[FxpOverlay]:
        if self.signal_fraction_bits is None:
            return None
        return FxpOverlay.from_fraction_bits(self.signal_fraction_bits,
                                             self.operator_fraction_bits)


class BerPoint(NamedTuple):
    snr_db: float
    n_bits: int
    n_errors: int
    ber: float
    stderr: float


@dataclass
class BerResult:
    config: SimConfig
    points: Tuple[BerPoint, ...]

    def min_detectable_ber(self) -> float:
        return 0.5 / self.points[0].n_bits


def _frame_data(cfg: SimConfig, frame: int, const: Constellation):
    """Channel, estimate, payload, and unit-variance noise for one frame."""
    g = draw_iid_rayleigh(cfg.m, cfg.k, stream_rng(cfg.seed, frame, 0))
    g_hat = estimate_ls(g, cfg.pilot_snr_db, stream_rng(cfg.seed, frame, 1))
    rng_bits = stream_rng(cfg.seed, frame, 2)
    n_info = cfg.info_bits_per_stream()
    bits = rng_bits.integers(0, 2, size=(cfg.k, n_info)).astype(np.uint8)
    tx_bits = conv_encode(bits) if cfg.coded else bits
    x = map_bits(tx_bits, const)
    rng_noise = stream_rng(cfg.seed, frame, 3)
    w = (rng_noise.standard_normal((cfg.m, cfg.coherence_uses))
         + 1j * rng_noise.standard_normal((cfg.m, cfg.coherence_uses)))
    w *= 1.0 / np.sqrt(2.0)
    return g, g_hat, bits, x, w


def _apply_front_end(cfg: SimConfig, frame: int, y, g_hat):
    """Fault injection, fault policy, and ADC quantization for one frame."""
    if cfg.victim_fraction > 0.0 and cfg.victim_policy != "none":
        model = CircuitErrorModel(victim_fraction=cfg.victim_fraction,
                                  mode=cfg.victim_mode, detected=True)
        y, victims = inject_errors(y, model, stream_rng(cfg.seed, frame, 4))
        if cfg.victim_policy == "exclude":
            y = np.delete(y, victims, axis=0)
            g_hat = np.delete(g_hat, victims, axis=0)
    if cfg.adc_bits is not None:
        y = quantize_adc(y, cfg.adc_bits)
    return y, g_hat


def _simulate_frames(cfg: SimConfig, snr_db: float,
                     frames: Sequence[int]) -> Tuple[int, int]:
    """Bit errors and bit count for a frame range at one SNR point."""
    const = Constellation.from_name(cfg.constellation)
    noise_var = 10.0 ** (-snr_db / 10.0)
    overlay = cfg.overlay()
    n_info = cfg.info_bits_per_stream()
    errors = 0
    llr_rows = [] if cfg.coded else None
    ref_rows = [] if cfg.coded else None
    for frame in frames:
        g, g_hat, bits, x, w = _frame_data(cfg, frame, const)
        y = g @ x + np.sqrt(noise_var) * w
        y, g_eff = _apply_front_end(cfg, frame, y, g_hat)
        det = build_uplink_detector(g_eff, cfg.detector, noise_var,
                                    overlay=overlay, nsa_order=cfg.nsa_order,
                                    cd_sweeps=cfg.cd_sweeps,
                                    c_const=cfg.c_const)
        xhat = det.detect(y)
        if cfg.coded:
            llr_rows.append(demap_soft(xhat, const, noise_var))
            ref_rows.append(bits)
        else:
            hard = demap_hard(xhat, const)
            errors += int(np.count_nonzero(hard != bits))
    if cfg.coded:
        llrs = np.concatenate(llr_rows, axis=0)
        refs = np.concatenate(ref_rows, axis=0)
        decoded = viterbi_decode(llrs, n_info=n_info)
        errors = int(np.count_nonzero(decoded != refs))
    total = len(frames) * cfg.k * n_info
    return errors, total


def run_uplink_ber(cfg: SimConfig, workers: int = 1) -> BerResult:
    """BER versus SNR over ``cfg.frames`` coherence blocks per point."""
    cfg.validate()
    if workers < 1:
        raise ValueError("workers: must be positive")
    chunks = None
    if workers > 1:
        bounds = np.linspace(0, cfg.frames, workers + 1).astype(int)
        chunks = [range(lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:])
                  if hi > lo]
    points = []
    for snr in cfg.snr_db:
        if chunks is None:
            errors, total = _simulate_frames(cfg, snr, range(cfg.frames))
        else:
            errors = total = 0
            with ProcessPoolExecutor(max_workers=len(chunks)) as pool:
                futures = [pool.submit(_simulate_frames, cfg, snr, ch)
                           for ch in chunks]
                for fut in futures:
                    e, t = fut.result()
                    errors += e
                    total += t
        ber = errors / total
        stderr = math.sqrt(max(ber * (1.0 - ber), 0.0) / total)
        points.append(BerPoint(snr_db=float(snr), n_bits=total,
                               n_errors=errors, ber=ber, stderr=stderr))
    return BerResult(config=cfg, points=tuple(points))


class EvmPoint(NamedTuple):
    m: int
    evm_db: float


def _pa_drive_amplitude(pa: PaModel) -> float:
    """RMS envelope that puts the array at the 1 dB compression point."""
    if pa.alpha3 == 0:
        return 1.0
    ratio = (10.0 ** (-1.0 / 20.0) - 1.0) * pa.alpha1 / pa.alpha3
    return float(np.sqrt(abs(ratio)))


def run_downlink_evm(m_list: Sequence[int], k: int, pa: PaModel,
                     trials: int = 20, uses: int = 64,
                     backoff_db: float = 0.0, precoder: str = "zf",
                     constellation: str = "qpsk",
                     m_ref: Optional[int] = None,
                     seed: int = 0) -> Tuple[EvmPoint, ...]:
    """Noiseless post-PA EVM at the users versus array size.

    Total radiated power is held fixed: the per-antenna drive at the
    reference size ``m_ref`` (default: smallest entry of ``m_list``)
    sits ``backoff_db`` below the amplifier 1 dB compression point, and
    scaling to ``m`` antennas divides per-antenna power by ``m / m_ref``.
    EVM ratios are averaged linearly over users and trials.
    """
    if not m_list:
        raise ValueError("m_list: empty")
    if trials < 1:
        raise ValueError("trials: must be positive")
    m_ref = min(m_list) if m_ref is None else m_ref
    const = Constellation.from_name(constellation)
    out = []
    for m in m_list:
        if m < k:
            raise ValueError(f"m_list: {m} antennas for {k} users")
        acc = 0.0
        for trial in range(trials):
            g = draw_iid_rayleigh(m, k, stream_rng(seed, m, trial, 0))
            rng_bits = stream_rng(seed, m, trial, 1)
            bits = rng_bits.integers(0, 2,
                                     size=(k, uses * const.bits_per_symbol))
            x = map_bits(bits, const)
            a = precode(g, precoder, total_power=1.0)
            s = apply_precoder(a, x)
            target = (_pa_drive_amplitude(pa) * 10.0 ** (-backoff_db / 20.0)
                      * np.sqrt(m_ref / m))
            rms = np.sqrt(np.mean(np.abs(s) ** 2))
            s = s * (target / rms)
            y = g.T @ pa_apply(s, pa)
            for user in range(k):
                acc += 10.0 ** (evm_db(x[user], y[user]) / 10.0)
        out.append(EvmPoint(m=m, evm_db=10.0 * math.log10(acc / (trials * k))))
    return tuple(out)


class OutagePoint(NamedTuple):
    fraction: float
    snr_db: float
    penalty_db: float
    status: str         # ok | above_grid | below_grid


@dataclass
class OutageResult:
    target_ber: float
    policy: str
    baseline_snr_db: float
    points: Tuple[OutagePoint, ...]


def snr_at_ber(result: BerResult, target: float) -> Tuple[float, str]:
    """Log-linear interpolation of the SNR reaching ``target`` BER.

    Zero-error points are floored at half an error before taking logs.
    Returns ``(inf, "above_grid")`` when the curve never crosses the
    target inside the grid and ``(-inf, "below_grid")`` when even the
    lowest grid point is already below it.
    """
    if not 0.0 < target < 1.0:
        raise ValueError("target: BER must lie in (0, 1)")
    pts = sorted(result.points, key=lambda p: p.snr_db)
    bers = np.array([max(p.ber, 0.5 / p.n_bits) for p in pts])
    snrs = np.array([p.snr_db for p in pts])
    if bers[0] < target:
        return -math.inf, "below_grid"
    logs = np.log10(bers)
    lt = math.log10(target)
    for i in range(len(pts) - 1):
        if logs[i] >= lt >= logs[i + 1] and logs[i] > logs[i + 1]:
            frac = (logs[i] - lt) / (logs[i] - logs[i + 1])
            return float(snrs[i] + frac * (snrs[i + 1] - snrs[i])), "ok"
    return math.inf, "above_grid"


def run_outage_study(cfg: SimConfig, fractions: Sequence[float],
                     policy: str, target_ber: float,
                     workers: int = 1) -> OutageResult:
    """SNR penalty at a target BER versus faulty-antenna fraction.

    The baseline reruns ``cfg`` with no faults; each fraction reruns it
    with the given handling policy.  Identical random streams across
    runs make the penalty a paired comparison.
    """
    if policy not in ("ignore", "exclude"):
        raise ValueError(f"policy: unknown {policy!r}")
    base_cfg = replace(cfg, victim_fraction=0.0, victim_policy="none")
    base = run_uplink_ber(base_cfg, workers=workers)
    base_snr, base_status = snr_at_ber(base, target_ber)
    if base_status != "ok":
        raise RuntimeError(f"baseline never reaches BER {target_ber:g} "
                           f"inside the SNR grid ({base_status})")
    points = []
    for frac in fractions:
        run_cfg = replace(cfg, victim_fraction=float(frac),
                          victim_policy=policy if frac > 0 else "none")
        run_cfg.validate()
        table = run_uplink_ber(run_cfg, workers=workers)
        snr, status = snr_at_ber(table, target_ber)
        penalty = snr - base_snr if status == "ok" else math.inf
        points.append(OutagePoint(fraction=float(frac), snr_db=snr,
                                  penalty_db=penalty, status=status))
    return OutageResult(target_ber=target_ber, policy=policy,
                        baseline_snr_db=base_snr, points=tuple(points))
