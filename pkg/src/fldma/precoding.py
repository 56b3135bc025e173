"""Linear downlink precoders, pre-equalization and rate evaluation."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import PreconditionError, RankDeficientError


class Normalization(str, enum.Enum):
    """How raw precoder columns are scaled before SINR evaluation.

    ``COLUMNS`` gives every beam unit norm.  ``TOTAL`` scales the whole matrix
    so that ``||W||_F^2 = K`` (the same total power as unit columns, but
    shared unequally between UEs).  ``NONE`` leaves the raw solution alone.
    """

    COLUMNS = "columns"
    TOTAL = "total"
    NONE = "none"


@dataclass
class MuMimoChannel:
    """Stacked single-antenna UE channels; row ``k`` of ``H`` is ``h_k^T``."""

    H: np.ndarray
    snr_linear: float

    def __post_init__(self):
        self.H = np.atleast_2d(np.asarray(self.H, dtype=complex))
        k, m = self.H.shape
        if k > m:
            raise PreconditionError(f"need K <= M for a right inverse, got K={k}, M={m}")
        if not self.snr_linear > 0:
            raise PreconditionError(f"SNR must be positive, got {self.snr_linear}")

    @property
    def num_ues(self) -> int:
        return self.H.shape[0]

    @property
    def num_antennas(self) -> int:
        return self.H.shape[1]

    @property
    def noise_var(self) -> float:
        return 1.0 / self.snr_linear

    def gram_condition(self) -> float:
        """Condition number of ``H H^H``."""
        s = np.linalg.svd(self.H, compute_uv=False)
        return float(s[0] ** 2 / s[-1] ** 2) if s[-1] > 0 else float("inf")


@dataclass
class PrecodeResult:
    W: np.ndarray
    per_ue_sinr: np.ndarray
    sum_rate: float
    condition_number: float = float("nan")
    extras: dict = field(default_factory=dict)


def normalize(W: np.ndarray, how=Normalization.COLUMNS) -> np.ndarray:
    how = Normalization(how)
    if how is Normalization.NONE:
        return W
    if how is Normalization.COLUMNS:
        norms = np.linalg.norm(W, axis=0)
        norms[norms == 0] = 1.0
        return W / norms
    fro = np.linalg.norm(W)
    if fro == 0:
        return W
    return W * (np.sqrt(W.shape[1]) / fro)


def mmse_precoder(ch: MuMimoChannel, normalization=Normalization.COLUMNS) -> np.ndarray:
    """Regularized channel inversion ``H^H (H H^H + I/gamma)^{-1}``.

    Equal power per UE means the regularizer ``K sigma^2 / P`` reduces to
    ``1 / gamma``.  The Hermitian system is solved through its Cholesky
    factor; no inverse is formed.
    """
    H = ch.H
    gram = H @ H.conj().T + ch.noise_var * np.eye(ch.num_ues)
    # (gram^{-1} H)^H = H^H gram^{-1} because gram is Hermitian
    raw = linalg.cho_solve(linalg.cho_factor(gram, lower=True), H).conj().T
    return normalize(raw, normalization)


def zf_precoder(ch: MuMimoChannel, normalization=Normalization.COLUMNS) -> np.ndarray:
    """Minimum-norm right inverse of ``H`` via least squares.

    Rank-deficient channels still return the pseudo-inverse, so collapsed
    geometries show up as low SINR rather than an exception.
    """
    raw = np.linalg.lstsq(ch.H, np.eye(ch.num_ues, dtype=complex), rcond=None)[0]
    return normalize(raw, normalization)


def pre_equalizer(H_actual, H_ideal) -> np.ndarray:
    """Transmit pre-equalizer ``P`` with ``H_actual P = H_ideal``.

    Uses the minimum-norm solution ``H^H (H H^H)^{-1} H_ideal``.  With the
    thin QR factorization ``H^H = Q R`` this equals ``Q R^{-H} H_ideal``, which
    needs a single triangular solve and avoids squaring the condition number.

    Raises
    ------
    RankDeficientError
        If ``H_actual`` does not have numerically full row rank.
    """
    H = np.atleast_2d(np.asarray(H_actual, dtype=complex))
    target = np.atleast_2d(np.asarray(H_ideal, dtype=complex))
    rows, cols = H.shape
    if target.shape[0] != rows:
        raise ValueError(f"H_ideal has {target.shape[0]} rows, H_actual has {rows}")
    if rows > cols:
        raise RankDeficientError(f"H_actual is {rows}x{cols}; full row rank impossible")
    q, r = linalg.qr(H.conj().T, mode="economic")
    sv = np.linalg.svd(r, compute_uv=False)
    cond_gram = float(sv[0] / sv[-1]) ** 2 if sv[-1] > 0 else float("inf")
    if sv[-1] <= sv[0] * max(rows, cols) * np.finfo(float).eps:
        raise RankDeficientError("H_actual is rank deficient", cond_gram)
    return q @ linalg.solve_triangular(r.conj().T, target, lower=True)


def sinr_closed_form(ch: MuMimoChannel) -> np.ndarray:
    """MMSE SINR ``gamma / [(H H^H + I/gamma)^{-1}]_kk - 1``.

    The diagonal of the inverse is read off as squared column norms of
    ``L^{-1}`` where ``L`` is the Cholesky factor.
    """
    gram = ch.H @ ch.H.conj().T + ch.noise_var * np.eye(ch.num_ues)
    chol = linalg.cholesky(gram, lower=True)
    linv = linalg.solve_triangular(chol, np.eye(ch.num_ues), lower=True)
    diag_inv = np.sum(np.abs(linv) ** 2, axis=0)
    return ch.snr_linear / diag_inv - 1.0


def sinr_general(H, W, a=None, sigma2: float = 1.0) -> np.ndarray:
    """Per-UE SINR of a linear precoder.

    ``SINR_k = |a_k h_k^T w_k|^2 / (sum_{i != k} |a_i h_k^T w_i|^2 + sigma2)``
    """
    G = np.atleast_2d(H) @ np.atleast_2d(W)
    k = G.shape[0]
    amp = np.ones(k) if a is None else np.asarray(a, dtype=float)
    power = np.abs(G * amp[None, :]) ** 2
    signal = np.diag(power).copy()
    interference = power.sum(axis=1) - signal
    return signal / (interference + sigma2)


def spectral_efficiency(sinrs, num_subcarriers: int, rho_max: float) -> float:
    """Sum rate with the frequency-offset overhead ``N / (N + rho_max)``."""
    sinrs = np.asarray(sinrs, dtype=float)
    if np.any(sinrs < 0):
        raise ValueError("SINR values must be non-negative")
    if rho_max < 0:
        raise ValueError("rho_max must be non-negative")
    overhead = num_subcarriers / (num_subcarriers + rho_max)
    return float(overhead * np.sum(np.log2(1.0 + sinrs)))


def precode(ch: MuMimoChannel, kind: str = "mmse", sinr_model: str = "total_power", num_subcarriers: int = 512, rho_max: float = 0.0) -> PrecodeResult:
    """Build a precoder and evaluate it.

    ``sinr_model`` is one of ``total_power`` (Frobenius normalization,
    general SINR), ``unit_columns`` (unit beams, general SINR) or
    ``closed_form`` (MMSE only, analytic SINR).
    """
    kind = kind.lower()
    builders = {"mmse": mmse_precoder, "zf": zf_precoder}
    if kind not in builders:
        raise ValueError(f"unknown precoder {kind!r}")
    cond = ch.gram_condition()
    if sinr_model == "closed_form":
        if kind != "mmse":
            raise ValueError("closed-form SINR exists only for MMSE")
        W = mmse_precoder(ch, Normalization.COLUMNS)
        sinr = sinr_closed_form(ch)
    elif sinr_model in ("total_power", "unit_columns"):
        norm = Normalization.TOTAL if sinr_model == "total_power" else Normalization.COLUMNS
        W = builders[kind](ch, norm)
        sinr = sinr_general(ch.H, W, sigma2=ch.noise_var)
    else:
        raise ValueError(f"unknown SINR model {sinr_model!r}")
    sinr = np.maximum(sinr, 0.0)
    return PrecodeResult(W, sinr, spectral_efficiency(sinr, num_subcarriers, rho_max), cond)
