"""Uplink detectors and downlink precoders, exact and hardware-friendly.

Exact linear processing (MR / ZF / MMSE / RZF) is built directly from the
channel estimate.  The remaining methods avoid the explicit Gram inverse:
truncated and weighted Neumann series, coordinate descent on the
regularized least-squares objective, and Cholesky or modified-QR
factorizations with triangular solves.  All of the approximate paths run
through :class:`~mimodsp.numerics.FxpOverlay` hooks so the same code
serves word-length studies.

Normalization conventions: detectors are unit-gain per user
(``a_k^H g_k = 1``); precoders are scaled to a total transmit power under
unit-power symbols.  The MMSE regularizer is the noise variance ``N0`` for
unit-power symbols; the textbook "+ I" form corresponds to ``N0 = 1``,
i.e. a pre-whitened receive path.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .numerics import (
    FxpOverlay,
    back_substitute,
    cholesky,
    forward_substitute,
    qrd,
)

__all__ = [
    "LinearCombiner",
    "NsaConfig",
    "WnsaConfig",
    "NsaDivergenceWarning",
    "combiner_exact",
    "precode",
    "apply_precoder",
    "post_combining_sinr",
    "nsa_inverse",
    "wnsa_inverse",
    "fit_wnsa_weights",
    "cd_detect",
    "chd_detect",
    "mqrd_detect",
    "MqrdDetection",
    "UplinkDetector",
    "build_uplink_detector",
]

_IDENTITY = FxpOverlay()


class NsaDivergenceWarning(UserWarning):
    """Spectral-radius precondition of the Neumann series failed."""


@dataclass(frozen=True)
class LinearCombiner:
    """Bank of per-user combining or precoding vectors (columns of A)."""

    matrix: np.ndarray
    alpha: np.ndarray
    method: str

    @property
    def k(self) -> int:
        return self.matrix.shape[1]

    def combine(self, y: np.ndarray) -> np.ndarray:
        """Per-user symbol estimates ``A^H y`` for one or many uses."""
        return np.conj(self.matrix.T) @ y


@dataclass(frozen=True)
class NsaConfig:
    """Truncation order for the diagonally preconditioned Neumann series."""

    order: int
    preconditioner: str = "diagonal"

    def __post_init__(self):
        if not 0 <= self.order <= 10:
            raise ValueError("series order must be within 0..10")
        if self.preconditioner != "diagonal":
            raise ValueError(f"unsupported preconditioner {self.preconditioner!r}")


@dataclass(frozen=True)
class WnsaConfig:
    """Weighted series: order plus one real weight per power of B."""

    order: int
    weights: tuple = ()

    def __post_init__(self):
        if not 0 <= self.order <= 10:
            raise ValueError("series order must be within 0..10")
        if len(self.weights) != self.order + 1:
            raise ValueError("need order + 1 weights")


def _validate_channel(g: np.ndarray) -> np.ndarray:
    g = np.asarray(g)
    if g.ndim != 2 or g.shape[1] < 1:
        raise ValueError("channel must be (M, K) with K >= 1")
    return g


# ---------------------------------------------------------------------------
# exact linear processing
# ---------------------------------------------------------------------------


def combiner_exact(g_hat: np.ndarray, method: str,
                   noise_var: float = 0.0) -> LinearCombiner:
    """MR, ZF, or MMSE receive combiner with unit per-user gain.

    MMSE solves ``(G^H G + N0 I)`` with ``N0 = noise_var``; ZF is the
    ``N0 = 0`` special case and requires full column rank.
    """
    g = _validate_channel(g_hat)
    k = g.shape[1]
    method = method.lower()
    if method == "mr":
        raw = g.copy()
    elif method in ("zf", "mmse"):
        nu = 0.0 if method == "zf" else float(noise_var)
        z = np.conj(g.T) @ g + nu * np.eye(k)
        raw = g @ np.linalg.inv(z)
    else:
        raise ValueError(f"unknown combiner method {method!r}")
    gains = np.einsum("mk,mk->k", np.conj(raw), g)
    if np.any(gains.real <= 0):
        raise np.linalg.LinAlgError("combiner gain collapsed; channel rank deficient?")
    alpha = 1.0 / gains.real
    return LinearCombiner(matrix=raw * alpha[None, :], alpha=alpha, method=method)


def precode(g_hat: np.ndarray, method: str, total_power: float = 1.0,
            ridge: float = 0.0) -> LinearCombiner:
    """MR, ZF, or RZF transmit precoder under a sum-power constraint.

    Columns are first normalized to unit downlink gain (``g_k^T a_k = 1``),
    then scaled by a common factor so that ``E||A x||^2 = total_power``
    for unit-power symbols.  With equal per-user gains this radiates equal
    received signal strength to every user.
    """
    g = _validate_channel(g_hat)
    k = g.shape[1]
    method = method.lower()
    if method == "mr":
        raw = np.conj(g)
    elif method in ("zf", "rzf"):
        lam = 0.0 if method == "zf" else float(ridge)
        z = g.T @ np.conj(g) + lam * np.eye(k)
        raw = np.conj(g) @ np.linalg.inv(z)
    else:
        raise ValueError(f"unknown precoder method {method!r}")
    gains = np.einsum("mk,mk->k", g, raw)
    if np.any(gains.real <= 0):
        raise np.linalg.LinAlgError("precoder gain collapsed; channel rank deficient?")
    unit = raw / gains[None, :]
    scale = np.sqrt(total_power) / np.linalg.norm(unit)
    alpha = scale / gains.real
    return LinearCombiner(matrix=unit * scale, alpha=alpha, method=method)


def apply_precoder(precoder: LinearCombiner, x: np.ndarray) -> np.ndarray:
    """Antenna-domain transmit signal ``A x`` for one or many symbol vectors."""
    return precoder.matrix @ x


def post_combining_sinr(combiner: LinearCombiner, g: np.ndarray,
                        noise_var: float) -> np.ndarray:
    """Per-user SINR of a combiner against the true channel."""
    cross = np.conj(combiner.matrix.T) @ g     # (K, K): row k = user k's gains
    sig = np.abs(np.diag(cross)) ** 2
    interf = np.sum(np.abs(cross) ** 2, axis=1) - sig
    noise = noise_var * np.sum(np.abs(combiner.matrix) ** 2, axis=0)
    return sig / (interf + noise)


# ---------------------------------------------------------------------------
# Neumann series
# ---------------------------------------------------------------------------


def _whitened_offdiag(z: np.ndarray):
    zd = np.diag(z).real
    if np.any(zd <= 0):
        raise ValueError("Gram diagonal must be positive")
    dinv_sqrt = 1.0 / np.sqrt(zd)
    b = -(dinv_sqrt[:, None] * (z - np.diag(np.diag(z))) * dinv_sqrt[None, :])
    return zd, dinv_sqrt, b


def _radius_estimate(b: np.ndarray, iters: int = 60) -> float:
    # power iteration on the Hermitian whitened off-diagonal part;
    # deterministic start so repeated calls agree
    k = b.shape[0]
    v = np.ones(k) / np.sqrt(k)
    v = v + 1e-3 * np.cos(np.arange(k))
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = b @ v
        norm = np.linalg.norm(w)
        if norm == 0:
            return 0.0
        lam = norm
        v = w / norm
    return float(lam)


def _check_radius(b: np.ndarray) -> float:
    rho = _radius_estimate(b)
    if rho >= 1.0:
        warnings.warn(
            f"series iteration radius {rho:.3f} >= 1; truncated inverse may diverge",
            NsaDivergenceWarning, stacklevel=3)
    return rho


def nsa_inverse(z: np.ndarray, cfg: NsaConfig | int) -> np.ndarray:
    """Truncated Neumann inverse ``sum_n (I - Zd^-1 Z)^n Zd^-1``.

    ``Zd`` is the diagonal of ``Z``.  The series converges when the
    spectral radius of the iteration matrix is below one, which holds when
    the system is diagonally dominant; a power-iteration estimate is
    checked and :class:`NsaDivergenceWarning` is emitted otherwise (the
    truncated sum is still returned).
    """
    if isinstance(cfg, int):
        cfg = NsaConfig(order=cfg)
    z = np.asarray(z)
    k = z.shape[0]
    zd, _, b = _whitened_offdiag(z)
    _check_radius(b)
    dinv = np.diag(1.0 / zd)
    x = np.eye(k) - dinv @ z
    acc = dinv.astype(complex).copy()
    term = dinv.astype(complex).copy()
    for _ in range(cfg.order):
        term = x @ term
        acc += term
    return acc


def fit_wnsa_weights(z: np.ndarray, order: int, samples: int = 31) -> WnsaConfig:
    """Least-squares weights making the truncated series track ``1/(1-t)``.

    The weighted series replaces ``sum B^n`` by ``sum alpha_n B^n`` in the
    diagonally whitened domain.  On B's spectrum that is a scalar
    polynomial approximation of ``1/(1-t)``, so the weights are fitted on
    uniform samples spanning the realization's eigenvalue range.  Falls
    back to all-ones weights when the range collapses to a point.
    """
    z = np.asarray(z)
    _, _, b = _whitened_offdiag(z)
    ev = np.linalg.eigvalsh(b)
    lo, hi = float(ev.min()), float(ev.max())
    if hi - lo < 1e-12:
        return WnsaConfig(order=order, weights=(1.0,) * (order + 1))
    t = np.linspace(lo, hi, samples)
    if np.any(np.abs(1.0 - t) < 1e-9):
        t = t + 1e-6
    v = np.vander(t, order + 1, increasing=True)
    alpha, *_ = np.linalg.lstsq(v, 1.0 / (1.0 - t), rcond=None)
    return WnsaConfig(order=order, weights=tuple(float(a) for a in alpha))


def wnsa_inverse(z: np.ndarray, cfg: WnsaConfig) -> np.ndarray:
    """Weighted Neumann inverse ``Zd^-1/2 (sum alpha_n B^n) Zd^-1/2``.

    With all weights equal to one this reproduces :func:`nsa_inverse`
    exactly; fitted weights extend the usable load range to Gram matrices
    whose unweighted series diverges.
    """
    z = np.asarray(z)
    k = z.shape[0]
    zd, dinv_sqrt, b = _whitened_offdiag(z)
    _check_radius(b)
    acc = np.zeros((k, k), dtype=complex)
    power = np.eye(k, dtype=complex)
    for alpha in cfg.weights:
        acc += alpha * power
        power = power @ b
    return dinv_sqrt[:, None] * acc * dinv_sqrt[None, :]


# ---------------------------------------------------------------------------
# iterative and factorization-based detectors
# ---------------------------------------------------------------------------


def _ls_objective(g, y, x, noise_var):
    r = y - g @ x
    return np.sum(np.abs(r) ** 2, axis=0) + noise_var * np.sum(np.abs(x) ** 2, axis=0)


def cd_detect(g_hat: np.ndarray, y: np.ndarray, noise_var: float,
              sweeps: int = 3, overlay: Optional[FxpOverlay] = None,
              check_objective: bool = False) -> np.ndarray:
    """Coordinate descent on ``||y - G x||^2 + N0 ||x||^2`` from ``x = 0``.

    Users are updated round-robin; each step sets coordinate i to
    ``g_i^H (y - sum_{j != i} g_j x_j) / (||g_i||^2 + N0)``, the exact
    per-coordinate minimizer, so the objective never increases in double
    precision (asserted when ``check_objective``).  The method never forms
    the Gram matrix: it tracks the antenna-domain residual, which is what
    keeps its per-realization hardware cost at zero.

    Under an overlay, stored quantities are rounded: the channel columns
    and inverse column energies once per realization, the residual (held
    at an automatic-gain scale), the coordinate corrections, and the
    estimates every update.
    """
    if sweeps < 1:
        raise ValueError("need at least one sweep")
    if noise_var <= 0:
        raise ValueError("coordinate descent needs a positive noise variance")
    if check_objective and overlay is not None:
        raise ValueError("objective check applies to the double-precision path")
    g = _validate_channel(g_hat)
    ov = overlay or _IDENTITY
    y = np.asarray(y, dtype=complex)
    squeeze = y.ndim == 1
    yc = y[:, None] if squeeze else y
    m, k = g.shape

    gq = ov.q_operator(g / 4.0) * 4.0
    energy = np.sum(np.abs(gq) ** 2, axis=0) + noise_var
    inv_energy = ov.q_operator(m / energy) / m
    agc = float(np.sqrt(np.mean(np.abs(yc) ** 2))) or 1.0
    rbar = ov.q_signal(yc / agc)
    xhat = np.zeros((k, yc.shape[1]), dtype=complex)
    prev = _ls_objective(g, yc, xhat, noise_var) if check_objective else None
    for _ in range(sweeps):
        for i in range(k):
            corr = np.conj(gq[:, i]) @ rbar * agc - noise_var * xhat[i, :]
            delta = ov.q_signal(corr * inv_energy[i])
            xhat[i, :] = ov.q_signal(xhat[i, :] + delta)
            rbar = ov.q_signal(rbar - np.outer(gq[:, i], delta) / agc)
            if check_objective:
                cur = _ls_objective(g, yc, xhat, noise_var)
                if not np.all(cur <= prev * (1 + 1e-9) + 1e-12):
                    raise AssertionError("objective increased during coordinate descent")
                prev = cur
    return xhat[:, 0] if squeeze else xhat


def _regularized_gram(g, noise_var, ov):
    m = g.shape[0]
    k = g.shape[1]
    zbar = (np.conj(g.T) @ g + noise_var * np.eye(k)) / m
    return ov.q_operator(zbar)


def _matched_filter(g, y, ov):
    return ov.q_signal(np.conj(g.T) @ y / g.shape[0])


def chd_detect(g_hat: np.ndarray, y: np.ndarray, mode: str = "zf",
               noise_var: float = 0.0,
               overlay: Optional[FxpOverlay] = None) -> np.ndarray:
    """Solve the normal equations by Cholesky and two triangular sweeps.

    ``mode`` "zf" solves ``G^H G x = G^H y``; "mmse" adds ``noise_var`` on
    the diagonal.  Internally the system is scaled by 1/M so that the
    factor's entries are O(1), which is the frame the overlay formats
    assume.  Factorization failures propagate from the numerics kernels.
    """
    mode = mode.lower()
    if mode not in ("zf", "mmse"):
        raise ValueError(f"unknown mode {mode!r}")
    g = _validate_channel(g_hat)
    ov = overlay or _IDENTITY
    nu = float(noise_var) if mode == "mmse" else 0.0
    y = np.asarray(y, dtype=complex)
    squeeze = y.ndim == 1
    yc = y[:, None] if squeeze else y
    zbar = _regularized_gram(g, nu, ov)
    low = cholesky(zbar, quantize=ov.q_operator if ov.operator else None)
    s = _matched_filter(g, yc, ov)
    qs = ov.q_signal if ov.signal else None
    t = forward_substitute(low, s, quantize=qs)
    xhat = back_substitute(np.conj(low.T), t, quantize=qs)
    return xhat[:, 0] if squeeze else xhat


class MqrdDetection(NamedTuple):
    xhat: np.ndarray
    reconstruction_error: float


def mqrd_detect(g_hat: np.ndarray, y: np.ndarray, c_const: float = 1.0,
                noise_var: float = 0.0,
                overlay: Optional[FxpOverlay] = None) -> MqrdDetection:
    """Solve the normal equations via the modified QR triangularization.

    The accumulated row transform T triangularizes the (optionally
    regularized) Gram; the estimate solves ``R x = T s`` by back
    substitution.  The decomposition's reconstruction error is reported
    alongside the estimate because the modified rotations are not exactly
    unitary.
    """
    g = _validate_channel(g_hat)
    ov = overlay or _IDENTITY
    y = np.asarray(y, dtype=complex)
    squeeze = y.ndim == 1
    yc = y[:, None] if squeeze else y
    zbar = _regularized_gram(g, float(noise_var), ov)
    res = qrd(zbar, mode="modified", c_const=c_const,
              quantize=ov.q_operator if ov.operator else None)
    t_mat = np.conj(res.q.T)
    s = _matched_filter(g, yc, ov)
    rhs = ov.q_signal(t_mat @ s)
    xhat = back_substitute(res.r, rhs, quantize=ov.q_signal if ov.signal else None)
    out = xhat[:, 0] if squeeze else xhat
    return MqrdDetection(xhat=out, reconstruction_error=res.reconstruction_error)


# ---------------------------------------------------------------------------
# per-coherence-block detector objects for link simulations
# ---------------------------------------------------------------------------


@dataclass
class UplinkDetector:
    """Detector with per-realization state factored out.

    Built once per coherence block and then applied to every channel use
    in it; construction covers the per-realization hardware cost
    (Gram, factorization, inverse) and :meth:`detect` the per-use cost.
    """

    method: str
    g_hat: np.ndarray
    noise_var: float
    overlay: Optional[FxpOverlay] = None
    nsa_order: int = 3
    cd_sweeps: int = 3
    c_const: float = 1.0
    _state: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        g = _validate_channel(self.g_hat)
        ov = self.overlay or _IDENTITY
        m = g.shape[0]
        method = self.method
        if method in ("mr", "zf", "mmse"):
            self._state["combiner"] = combiner_exact(g, method, self.noise_var)
        elif method in ("nsa", "wnsa"):
            zbar = _regularized_gram(g, self.noise_var, ov)
            if method == "nsa":
                inv = _nsa_inverse_quantized(zbar, self.nsa_order, ov)
            else:
                cfg = fit_wnsa_weights(zbar, self.nsa_order)
                inv = _wnsa_inverse_quantized(zbar, cfg, ov)
            self._state["inverse"] = ov.q_operator(inv)
        elif method == "chd":
            zbar = _regularized_gram(g, self.noise_var, ov)
            self._state["low"] = cholesky(
                zbar, quantize=ov.q_operator if ov.operator else None)
        elif method == "mqrd":
            zbar = _regularized_gram(g, self.noise_var, ov)
            res = qrd(zbar, mode="modified", c_const=self.c_const,
                      quantize=ov.q_operator if ov.operator else None)
            self._state["r"] = res.r
            self._state["t"] = np.conj(res.q.T)
        elif method == "cd":
            gq = ov.q_operator(g / 4.0) * 4.0
            energy = np.sum(np.abs(gq) ** 2, axis=0) + self.noise_var
            self._state["gq"] = gq
            self._state["inv_energy"] = ov.q_operator(m / energy) / m
        else:
            raise ValueError(f"unknown detector method {method!r}")

    def detect(self, y: np.ndarray) -> np.ndarray:
        g = self.g_hat
        ov = self.overlay or _IDENTITY
        y = np.asarray(y, dtype=complex)
        squeeze = y.ndim == 1
        yc = y[:, None] if squeeze else y
        method = self.method
        if method in ("mr", "zf", "mmse"):
            xhat = self._state["combiner"].combine(yc)
        elif method in ("nsa", "wnsa"):
            s = _matched_filter(g, yc, ov)
            xhat = ov.q_signal(self._state["inverse"] @ s)
        elif method == "chd":
            s = _matched_filter(g, yc, ov)
            qs = ov.q_signal if ov.signal else None
            t = forward_substitute(self._state["low"], s, quantize=qs)
            xhat = back_substitute(np.conj(self._state["low"].T), t, quantize=qs)
        elif method == "mqrd":
            s = _matched_filter(g, yc, ov)
            rhs = ov.q_signal(self._state["t"] @ s)
            xhat = back_substitute(self._state["r"], rhs,
                                   quantize=ov.q_signal if ov.signal else None)
        else:  # cd
            gq = self._state["gq"]
            inv_energy = self._state["inv_energy"]
            agc = float(np.sqrt(np.mean(np.abs(yc) ** 2))) or 1.0
            rbar = ov.q_signal(yc / agc)
            xhat = np.zeros((g.shape[1], yc.shape[1]), dtype=complex)
            for _ in range(self.cd_sweeps):
                for i in range(g.shape[1]):
                    corr = np.conj(gq[:, i]) @ rbar * agc - self.noise_var * xhat[i, :]
                    delta = ov.q_signal(corr * inv_energy[i])
                    xhat[i, :] = ov.q_signal(xhat[i, :] + delta)
                    rbar = ov.q_signal(rbar - np.outer(gq[:, i], delta) / agc)
        return xhat[:, 0] if squeeze else xhat


def _nsa_inverse_quantized(zbar, order, ov: FxpOverlay):
    k = zbar.shape[0]
    zd = np.diag(zbar).real
    dinv = ov.q_operator(1.0 / zd)
    x = ov.q_operator(np.eye(k) - dinv[:, None] * zbar)
    acc = np.diag(dinv).astype(complex)
    term = np.diag(dinv).astype(complex)
    for _ in range(order):
        term = ov.q_operator(x @ term)
        acc = ov.q_operator(acc + term)
    return acc


def _wnsa_inverse_quantized(zbar, cfg: WnsaConfig, ov: FxpOverlay):
    k = zbar.shape[0]
    zd = np.diag(zbar).real
    dinv_sqrt = 1.0 / np.sqrt(zd)
    b = ov.q_operator(
        -(dinv_sqrt[:, None] * (zbar - np.diag(zd)) * dinv_sqrt[None, :]))
    acc = np.zeros((k, k), dtype=complex)
    power = np.eye(k, dtype=complex)
    for alpha in cfg.weights:
        acc = ov.q_operator(acc + alpha * power)
        power = ov.q_operator(power @ b)
    return dinv_sqrt[:, None] * acc * dinv_sqrt[None, :]


def build_uplink_detector(g_hat: np.ndarray, method: str, noise_var: float,
                          overlay: Optional[FxpOverlay] = None,
                          nsa_order: int = 3, cd_sweeps: int = 3,
                          c_const: float = 1.0) -> UplinkDetector:
    """Factory wrapper so call sites read as one line."""
    return UplinkDetector(method=method, g_hat=np.asarray(g_hat),
                          noise_var=noise_var, overlay=overlay,
                          nsa_order=nsa_order, cd_sweeps=cd_sweeps,
                          c_const=c_const)
