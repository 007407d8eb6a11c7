"""Hardware non-ideality models for the analog and digital front end.

Covers the saturating cubic power amplifier, uniform and one-bit data
converters, non-reciprocal transmit/receive chains with genie-aided
calibration, and digital circuit-error injection with the associated
quality metrics (EVM, SDDR, multi-user interference power).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .channel import RngLike, as_rng
from .numerics import FixedPointFormat

__all__ = [
    "PaModel",
    "pa_apply",
    "evm_db",
    "quantize_adc",
    "FrontEndSet",
    "draw_front_end_set",
    "build_nonreciprocal",
    "calibrate",
    "CircuitErrorModel",
    "inject_errors",
    "sddr_db",
    "per_antenna_sddr_db",
    "exclude_antennas",
    "mui_db",
    "EVM_FLOOR_DB",
    "SDDR_CEILING_DB",
    "SDDR_FLOOR_DB",
    "MUI_FLOOR_DB",
]

EVM_FLOOR_DB = -100.0
SDDR_CEILING_DB = 300.0
SDDR_FLOOR_DB = -300.0
MUI_FLOOR_DB = -300.0


# ---------------------------------------------------------------------------
# power amplifier
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PaModel:
    """Memoryless odd-order baseband amplifier with hard output saturation.

    ``y = alpha1 x + alpha3 x |x|^2`` for drive amplitudes up to
    ``a_in_sat``; above that the input amplitude is held at ``a_in_sat``
    and the output magnitude is clamped to ``a_out_sat``.  Phase is never
    altered by the clamps.
    """

    alpha1: complex = 1.0
    alpha3: complex = 0.0
    a_in_sat: float = np.inf
    a_out_sat: float = np.inf

    def __post_init__(self):
        if not (self.a_in_sat > 0 and self.a_out_sat > 0):
            raise ValueError("saturation amplitudes must be positive")

    @classmethod
    def from_compression_point(cls, a_1db: float, alpha1: complex = 1.0) -> "PaModel":
        """Cubic model pinned by its 1-dB compression amplitude.

        The gain at drive amplitude ``a_1db`` is 1 dB below ``alpha1``,
        which fixes ``alpha3 = (10**(-1/20) - 1) alpha1 / a_1db**2``
        (about ``-0.1087 alpha1`` for unit ``a_1db``).  Input saturation
        defaults to the amplitude where the cubic's gain slope hits zero
        and output saturation to the cubic's value there.
        """
        if a_1db <= 0:
            raise ValueError("compression amplitude must be positive")
        alpha3 = (10.0 ** (-1.0 / 20.0) - 1.0) * alpha1 / a_1db ** 2
        a_in = float(np.sqrt(abs(alpha1) / (3.0 * abs(alpha3))))
        a_out = float(abs(alpha1 * a_in + alpha3 * a_in ** 3))
        return cls(alpha1=alpha1, alpha3=alpha3, a_in_sat=a_in, a_out_sat=a_out)


def pa_apply(x, pa: PaModel):
    """Amplifier response per sample; accepts scalars or arrays."""
    x = np.asarray(x, dtype=complex)
    mag = np.abs(x)
    safe = np.where(mag > 0, mag, 1.0)
    xin = np.where(mag > pa.a_in_sat, x * (pa.a_in_sat / safe), x)
    y = pa.alpha1 * xin + pa.alpha3 * xin * np.abs(xin) ** 2
    ymag = np.abs(y)
    ysafe = np.where(ymag > 0, ymag, 1.0)
    return np.where(ymag > pa.a_out_sat, y * (pa.a_out_sat / ysafe), y)


# ---------------------------------------------------------------------------
# error-vector magnitude
# ---------------------------------------------------------------------------


def evm_db(reference: np.ndarray, received: np.ndarray,
           floor_db: float = EVM_FLOOR_DB) -> float:
    """Error power of ``received`` against ``reference`` after gain fitting.

    The received vector is divided by the least-squares complex gain
    before comparison, so a clean scale or rotation reports the floor.
    """
    ref = np.asarray(reference, dtype=complex).ravel()
    rec = np.asarray(received, dtype=complex).ravel()
    if ref.size == 0 or ref.size != rec.size:
        raise ValueError("need equal-length nonempty vectors")
    denom = np.vdot(ref, ref)
    if denom == 0:
        raise ValueError("reference power is zero")
    gain = np.vdot(ref, rec) / denom
    if gain == 0:
        return float(floor_db)
    err = np.mean(np.abs(rec / gain - ref) ** 2) / np.mean(np.abs(ref) ** 2)
    if err <= 10.0 ** (floor_db / 10.0):
        return float(floor_db)
    return float(10.0 * np.log10(err))


# ---------------------------------------------------------------------------
# data converters
# ---------------------------------------------------------------------------


def quantize_adc(y: np.ndarray, bits: int,
                 agc_scale: Optional[float] = None) -> np.ndarray:
    """Per-axis uniform quantization of a complex signal.

    ``bits = 1`` keeps only the signs, scaled to a fixed level of
    ``1/sqrt(2)`` per axis (unit output power); no gain control is needed
    or used.  For ``bits > 1`` a mid-rise quantizer spans ``+-agc_scale``
    per axis, clipping outside; the default scale is three times the
    per-axis RMS, which clips roughly 0.3% of Gaussian samples.
    """
    if bits < 1:
        raise ValueError("need at least one bit")
    y = np.asarray(y, dtype=complex)
    if bits == 1:
        level = 1.0 / np.sqrt(2.0)
        re = np.where(y.real >= 0, level, -level)
        im = np.where(y.imag >= 0, level, -level)
        return re + 1j * im
    if agc_scale is None:
        axis_rms = np.sqrt(np.mean(y.real ** 2 + y.imag ** 2) / 2.0)
        agc_scale = 3.0 * float(axis_rms)
    if agc_scale <= 0:
        raise ValueError("agc_scale must be positive")
    half = 2 ** (bits - 1)
    step = agc_scale / half

    def axis(u):
        idx = np.clip(np.floor(u / step), -half, half - 1)
        return (idx + 0.5) * step

    return axis(y.real) + 1j * axis(y.imag)


# ---------------------------------------------------------------------------
# reciprocity
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FrontEndSet:
    """Diagonal transmit/receive responses for array and terminals.

    ``r_bs``/``t_bs`` hold the per-antenna receiver and transmitter
    responses of the array (diagonals of M x M matrices); ``r_ue`` and
    ``t_ue`` the per-terminal scalars.  The draw bounds are recorded so
    the set can be checked against its own configuration.
    """

    r_bs: np.ndarray
    t_bs: np.ndarray
    r_ue: np.ndarray
    t_ue: np.ndarray
    gain_bound_db: Optional[float] = None
    phase_bound_deg: Optional[float] = None

    def __post_init__(self):
        for name in ("r_bs", "t_bs", "r_ue", "t_ue"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=complex))
        if self.r_bs.shape != self.t_bs.shape or self.r_ue.shape != self.t_ue.shape:
            raise ValueError("mismatched front-end dimensions")

    @property
    def m(self) -> int:
        return self.r_bs.shape[0]

    @property
    def k(self) -> int:
        return self.r_ue.shape[0]


def _draw_responses(n: int, gain_bound_db: float, phase_bound_deg: float,
                    rng: np.random.Generator) -> np.ndarray:
    gains = 10.0 ** (rng.uniform(-gain_bound_db, gain_bound_db, n) / 20.0)
    phases = np.deg2rad(rng.uniform(-phase_bound_deg, phase_bound_deg, n))
    return gains * np.exp(1j * phases)


def draw_front_end_set(m: int, k: int, gain_bound_db: float = 1.0,
                       phase_bound_deg: float = 5.0,
                       rng: RngLike = 0) -> FrontEndSet:
    """Independent uniform gain/phase mismatch for every chain."""
    r = as_rng(rng)
    return FrontEndSet(
        r_bs=_draw_responses(m, gain_bound_db, phase_bound_deg, r),
        t_bs=_draw_responses(m, gain_bound_db, phase_bound_deg, r),
        r_ue=_draw_responses(k, gain_bound_db, phase_bound_deg, r),
        t_ue=_draw_responses(k, gain_bound_db, phase_bound_deg, r),
        gain_bound_db=gain_bound_db,
        phase_bound_deg=phase_bound_deg,
    )


def build_nonreciprocal(g_tilde: np.ndarray,
                        fe: FrontEndSet) -> Tuple[np.ndarray, np.ndarray]:
    """Uplink and downlink channels seen through the front ends.

    Uplink column k is ``R_bs g~_k t_k``; downlink row k is
    ``r_k g~_k^T T_bs``.  The pair is reciprocal exactly when transmit and
    receive responses agree up to one global scalar on each side.
    """
    g = np.asarray(g_tilde)
    if g.shape != (fe.m, fe.k):
        raise ValueError("channel dimensions do not match front-end set")
    g_ul = fe.r_bs[:, None] * g * fe.t_ue[None, :]
    g_dl = fe.t_bs[:, None] * g * fe.r_ue[None, :]
    return g_ul, g_dl


def calibrate(fe: FrontEndSet, residual_error_db: float = -np.inf,
              rng: Optional[RngLike] = None) -> np.ndarray:
    """Per-antenna weights restoring reciprocity of the array chains.

    The ideal weights are ``t_m / r_m``; multiplying uplink estimates by
    them makes the downlink-effective matrix diagonal again.  A finite
    ``residual_error_db`` perturbs each weight by a complex error of that
    relative power, modeling an imperfect calibration procedure.
    """
    if np.any(fe.r_bs == 0):
        raise ValueError("zero receiver response; calibration undefined")
    weights = fe.t_bs / fe.r_bs
    if residual_error_db == -np.inf:
        return weights
    r = as_rng(rng if rng is not None else 0)
    sigma = 10.0 ** (residual_error_db / 20.0)
    eps = sigma * (r.standard_normal(fe.m) + 1j * r.standard_normal(fe.m)) / np.sqrt(2.0)
    return weights * (1.0 + eps)


def mui_db(effective: np.ndarray, floor_db: float = MUI_FLOOR_DB) -> float:
    """Multi-user interference power of a K x K effective matrix.

    Total off-diagonal power over total diagonal power, in dB; a clean
    diagonal matrix reports the floor.
    """
    e = np.asarray(effective)
    diag_power = float(np.sum(np.abs(np.diag(e)) ** 2))
    if diag_power == 0:
        raise ValueError("effective matrix has zero diagonal power")
    off_power = float(np.sum(np.abs(e) ** 2)) - diag_power
    if off_power <= diag_power * 10.0 ** (floor_db / 10.0):
        return float(floor_db)
    return float(10.0 * np.log10(off_power / diag_power))


# ---------------------------------------------------------------------------
# digital circuit errors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CircuitErrorModel:
    """Population of faulty per-antenna processing elements.

    ``victim_fraction`` of the antennas are drawn as victims once per
    realization.  ``stuck_at_max`` pins their output to the largest
    representable magnitude at 45 degrees; ``stuck_at_value`` to a given
    constant; ``transient`` flips bits of the fixed-point representation
    with probability ``p_error`` per bit.  ``detected`` marks whether the
    receiver is assumed to know the victim set (and may exclude it).
    """

    victim_fraction: float
    mode: str = "stuck_at_max"
    value: complex = 0.0
    p_error: float = 0.0
    detected: bool = False
    full_scale: Optional[float] = None
    word: FixedPointFormat = FixedPointFormat(total_bits=12, fraction_bits=8)

    def __post_init__(self):
        if not 0.0 <= self.victim_fraction <= 1.0:
            raise ValueError("victim_fraction must lie in [0, 1]")
        if self.mode not in ("stuck_at_max", "stuck_at_value", "transient"):
            raise ValueError(f"unknown error mode {self.mode!r}")
        if self.mode == "transient" and not 0.0 <= self.p_error <= 1.0:
            raise ValueError("p_error must lie in [0, 1]")


def draw_victims(m: int, fraction: float, rng: RngLike) -> np.ndarray:
    """Sorted victim indices; count is the rounded fraction of ``m``."""
    count = int(round(fraction * m))
    count = min(max(count, 0), m)
    if count == 0:
        return np.empty(0, dtype=int)
    r = as_rng(rng)
    return np.sort(r.choice(m, size=count, replace=False))


def _flip_bits(values: np.ndarray, fmt: FixedPointFormat, p: float,
               rng: np.random.Generator) -> np.ndarray:
    scale = 2.0 ** fmt.fraction_bits
    span = 2 ** fmt.total_bits
    ints = np.mod(np.round(values * scale).astype(np.int64), span)
    masks = np.zeros(values.shape, dtype=np.int64)
    for bit in range(fmt.total_bits):
        masks |= (rng.random(values.shape) < p).astype(np.int64) << bit
    flipped = np.bitwise_xor(ints, masks)
    signed = np.where(flipped >= span // 2, flipped - span, flipped)
    return signed / scale


def inject_errors(signal: np.ndarray, err: CircuitErrorModel,
                  seed: RngLike) -> Tuple[np.ndarray, np.ndarray]:
    """Corrupt per-antenna samples; returns (corrupted, victim indices).

    ``signal`` is (M,) or (M, N); the victim set is drawn once from
    ``seed`` and every sample of a victim antenna is affected.
    """
    sig = np.asarray(signal, dtype=complex)
    squeeze = sig.ndim == 1
    x = sig[:, None].copy() if squeeze else sig.copy()
    m = x.shape[0]
    r = as_rng(seed)
    victims = draw_victims(m, err.victim_fraction, r)
    if victims.size:
        if err.mode == "stuck_at_max":
            fs = err.full_scale
            if fs is None:
                fs = 3.0 * float(np.sqrt(np.mean(np.abs(sig) ** 2))) or 1.0
            x[victims, :] = fs * (1.0 + 1j) / np.sqrt(2.0)
        elif err.mode == "stuck_at_value":
            x[victims, :] = err.value
        else:
            sub = x[victims, :]
            x[victims, :] = (_flip_bits(sub.real, err.word, err.p_error, r)
                             + 1j * _flip_bits(sub.imag, err.word, err.p_error, r))
    return (x[:, 0] if squeeze else x), victims


def sddr_db(clean: np.ndarray, distorted: np.ndarray,
            ceiling_db: float = SDDR_CEILING_DB) -> float:
    """Signal power over the power of (distorted - clean), in dB."""
    c = np.asarray(clean, dtype=complex).ravel()
    d = np.asarray(distorted, dtype=complex).ravel()
    if c.size == 0 or c.size != d.size:
        raise ValueError("need equal-length nonempty vectors")
    p_sig = float(np.mean(np.abs(c) ** 2))
    p_dist = float(np.mean(np.abs(d - c) ** 2))
    if p_dist <= p_sig * 10.0 ** (-ceiling_db / 10.0):
        return float(ceiling_db)
    return float(10.0 * np.log10(p_sig / p_dist))


def per_antenna_sddr_db(clean: np.ndarray, distorted: np.ndarray,
                        stuck_victims: Optional[Sequence[int]] = None,
                        floor_db: float = SDDR_FLOOR_DB) -> np.ndarray:
    """Row-wise SDDR of an (M, N) block.

    Stuck victims are reported at the floor by definition: a pinned output
    carries no signal component at all, whatever the numeric power ratio
    of the replacement constant happens to be.
    """
    c = np.atleast_2d(np.asarray(clean, dtype=complex))
    d = np.atleast_2d(np.asarray(distorted, dtype=complex))
    if c.shape != d.shape:
        raise ValueError("shape mismatch")
    out = np.empty(c.shape[0])
    for i in range(c.shape[0]):
        out[i] = sddr_db(c[i], d[i])
    out = np.maximum(out, floor_db)
    if stuck_victims is not None:
        out[np.asarray(stuck_victims, dtype=int)] = floor_db
    return out


def exclude_antennas(operator: np.ndarray, victims: Sequence[int],
                     k_min: Optional[int] = None) -> np.ndarray:
    """Remove victim rows from an (M, K) operator.

    Detection or precoding built from the reduced matrix behaves exactly
    like a fresh array with ``M' = M - len(victims)`` antennas; precoder
    power renormalization happens automatically when the precoder is
    rebuilt from the reduced rows.  ``k_min`` (default: the column count)
    guards against excluding below the spatial-multiplexing minimum.
    """
    op = np.asarray(operator)
    victims = np.asarray(victims, dtype=int)
    if victims.size == 0:
        return op.copy()
    if victims.min() < 0 or victims.max() >= op.shape[0]:
        raise ValueError("victim index out of range")
    remaining = op.shape[0] - np.unique(victims).size
    need = op.shape[1] if k_min is None else k_min
    if remaining < need:
        raise ValueError(f"exclusion leaves {remaining} rows for {need} users")
    return np.delete(op, victims, axis=0)
