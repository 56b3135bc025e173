"""FDA-MIMO-OFDM waveform: synthesis, CP-retention reception and ICI model.

One OFDM symbol is modeled per frame.  A frame is a complex array of shape
``(N_us, M)`` holding the symbol of subcarrier ``l`` on antenna ``m``.  The
prototype pulse is rectangular with amplitude ``1/sqrt(T_us)`` so that it has
unit energy over the ``[0, T_us)`` integration window.

Paths passed to the synthesis and model functions only need the attributes
``gain``, ``distance``, ``aod`` and ``aoa`` (see :class:`fldma.channel.Path`).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .array import SPEED_OF_LIGHT, OffsetPlan, sa, steering_rx
from .errors import PreconditionError

# Coverage checks allow for rounding in R / c.
_DELAY_RTOL = 1e-12


@dataclass(frozen=True)
class OfdmGrid:
    num_subcarriers: int
    subcarrier_spacing: float
    cp_length: int

    def __post_init__(self):
        if self.num_subcarriers < 1:
            raise ValueError("num_subcarriers must be >= 1")
        if self.subcarrier_spacing <= 0:
            raise ValueError("subcarrier_spacing must be positive")
        if not 0 <= self.cp_length < self.num_subcarriers:
            raise ValueError(f"cp_length must satisfy 0 <= N_cp < N_us, got {self.cp_length}")

    @property
    def symbol_duration(self) -> float:
        return 1.0 / self.subcarrier_spacing

    @property
    def cp_duration(self) -> float:
        return self.cp_length * self.symbol_duration / self.num_subcarriers

    @property
    def sample_interval(self) -> float:
        return self.symbol_duration / self.num_subcarriers

    @property
    def sample_rate(self) -> float:
        return self.num_subcarriers * self.subcarrier_spacing

    @property
    def max_range(self) -> float:
        """Largest propagation distance covered by the cyclic prefix."""
        return SPEED_OF_LIGHT * self.cp_duration

    def transmit_times(self) -> np.ndarray:
        """Sampling instants on ``[-T_cp, T_us)``."""
        n = np.arange(-self.cp_length, self.num_subcarriers)
        return n * self.sample_interval

    def receive_times(self) -> np.ndarray:
        """Sampling instants on ``[0, T_us)``."""
        return np.arange(self.num_subcarriers) * self.sample_interval


def qam_constellation(order: int) -> np.ndarray:
    """Square QAM alphabet scaled to unit average energy."""
    side = int(round(math.sqrt(order)))
    if side * side != order or order < 4:
        raise ValueError(f"QAM order must be a square >= 4, got {order}")
    levels = np.arange(-(side - 1), side, 2, dtype=float)
    points = (levels[:, None] + 1j * levels[None, :]).ravel()
    return points / math.sqrt(np.mean(np.abs(points) ** 2))


def random_frame(grid: OfdmGrid, num_antennas: int, seed, order: int = 16) -> np.ndarray:
    """Random unit-power QAM frame of shape ``(N_us, M)``."""
    rng = np.random.default_rng(seed)
    alphabet = qam_constellation(order)
    return rng.choice(alphabet, size=(grid.num_subcarriers, num_antennas))


def _check_frame(frame: np.ndarray, grid: OfdmGrid, plan: OffsetPlan) -> np.ndarray:
    frame = np.asarray(frame, dtype=complex)
    expected = (grid.num_subcarriers, plan.num_elements)
    if frame.shape != expected:
        raise ValueError(f"frame shape {frame.shape} does not match (N_us, M) = {expected}")
    return frame


def modulate(frame, grid: OfdmGrid, plan: OffsetPlan) -> np.ndarray:
    """Transmit samples of every antenna, cyclic prefix included.

    Returns shape ``(M, N_cp + N_us)``; column ``i`` is the instant
    ``(i - N_cp) * T_us / N_us``.  Antenna ``m`` carries its OFDM signal
    shifted by the offset ``delta_f_m``.
    """
    frame = _check_frame(frame, grid, plan)
    n_us = grid.num_subcarriers
    core = n_us * np.fft.ifft(frame, axis=0)  # sum_l X e^{j 2 pi l i / N}
    idx = np.arange(-grid.cp_length, n_us) % n_us
    t = grid.transmit_times()
    rot = np.exp(2j * np.pi * np.outer(plan.offsets, t))
    return rot * core[idx, :].T / math.sqrt(grid.symbol_duration)


def _check_delays(paths, grid: OfdmGrid):
    limit = grid.cp_duration * (1.0 + _DELAY_RTOL)
    for k, path in enumerate(paths):
        delay = path.distance / SPEED_OF_LIGHT
        if delay < 0 or delay > limit:
            raise PreconditionError(
                f"path {k}: delay {delay:.6e} s exceeds the cyclic prefix {grid.cp_duration:.6e} s "
                f"(distance {path.distance:.1f} m > {grid.max_range:.1f} m)"
            )


def synthesize_received(frame, grid: OfdmGrid, plan: OffsetPlan, paths, rx_antenna: int = 0, num_rx: int = 1) -> np.ndarray:
    """Received samples of one UE antenna on ``[0, T_us)``.

    Each path contributes its complex gain, the receive steering entry of
    ``rx_antenna`` and the transmit signal of every antenna delayed by
    ``R / c`` and weighted by the angular steering phase.  Delays are applied
    as exact phase terms, never rounded to whole samples.
    """
    frame = _check_frame(frame, grid, plan)
    paths = list(paths)
    _check_delays(paths, grid)
    if not 0 <= rx_antenna < num_rx:
        raise ValueError(f"rx_antenna {rx_antenna} outside 0..{num_rx - 1}")
    n_us = grid.num_subcarriers
    m = np.arange(plan.num_elements)
    ell = np.arange(n_us)
    t = grid.receive_times()
    out = np.zeros(n_us, dtype=complex)
    for path in paths:
        if path.gain == 0:
            continue
        tau = path.distance / SPEED_OF_LIGHT
        delayed = frame * np.exp(-2j * np.pi * ell * grid.subcarrier_spacing * tau)[:, None]
        core = n_us * np.fft.ifft(delayed, axis=0)  # (N_us samples, M)
        rot = np.exp(2j * np.pi * np.outer(t - tau, plan.offsets))
        weights = np.exp(1j * np.pi * m * math.sin(path.aod)) / math.sqrt(plan.num_elements)
        b_n = steering_rx(path.aoa, num_rx)[rx_antenna]
        out += path.gain * b_n * ((core * rot) @ weights)
    return out / math.sqrt(grid.symbol_duration)


def matched_filter_demod(samples, grid: OfdmGrid) -> np.ndarray:
    """Bank of subcarrier matched filters ``g(t) exp(j 2 pi l' df t)``.

    The integral over ``[0, T_us)`` is evaluated as the ``N_us``-point sum on
    the sampling lattice.
    """
    samples = np.asarray(samples, dtype=complex)
    if samples.shape != (grid.num_subcarriers,):
        raise ValueError(f"expected {grid.num_subcarriers} samples, got shape {samples.shape}")
    scale = grid.sample_interval / math.sqrt(grid.symbol_duration)
    return scale * np.fft.fft(samples)


def add_noise(symbols, sigma2: float, seed) -> np.ndarray:
    """Add circularly-symmetric complex Gaussian noise of variance ``sigma2``."""
    symbols = np.asarray(symbols, dtype=complex)
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(symbols.shape) + 1j * rng.standard_normal(symbols.shape)
    return symbols + math.sqrt(sigma2 / 2.0) * noise


@dataclass(frozen=True)
class IciCoefficients:
    """Inter-carrier interference coefficients of every antenna.

    ``beta_by_shift[d + N_us - 1, m]`` holds the coefficient for
    ``l - l' = d``; the diagonal ``d = 0`` equals ``alpha``.
    """

    alpha: np.ndarray
    beta_by_shift: np.ndarray

    @property
    def num_subcarriers(self) -> int:
        return (self.beta_by_shift.shape[0] + 1) // 2

    def beta(self, ell: int, ell_prime: int, m: int) -> complex:
        return complex(self.beta_by_shift[ell - ell_prime + self.num_subcarriers - 1, m])

    def matrix(self, m: int) -> np.ndarray:
        """``C[l, l'] = beta_{l, l', m}`` for one antenna (diagonal = alpha)."""
        n = self.num_subcarriers
        ell = np.arange(n)
        return self.beta_by_shift[ell[:, None] - ell[None, :] + n - 1, m]


def ici_coefficients(plan: OffsetPlan, grid: OfdmGrid) -> IciCoefficients:
    n = grid.num_subcarriers
    rho = plan.offsets / grid.subcarrier_spacing
    shifts = np.arange(-(n - 1), n)[:, None] + rho[None, :]
    beta = sa(n, shifts / n) * np.exp(1j * np.pi * shifts * (n - 1) / n)
    beta = np.atleast_2d(beta)
    return IciCoefficients(alpha=beta[n - 1].copy(), beta_by_shift=beta)


def effective_channel(grid: OfdmGrid, plan: OffsetPlan, paths, rx_antenna: int = 0, num_rx: int = 1) -> np.ndarray:
    """Joint space-frequency fading ``h[l, m]`` seen by one UE antenna."""
    ell = np.arange(grid.num_subcarriers)
    m = np.arange(plan.num_elements)
    h = np.zeros((grid.num_subcarriers, plan.num_elements), dtype=complex)
    for path in paths:
        a = np.exp(2j * np.pi * (m * math.sin(path.aod) / 2.0 - plan.offsets * path.distance / SPEED_OF_LIGHT))
        a /= math.sqrt(plan.num_elements)
        b_n = steering_rx(path.aoa, num_rx)[rx_antenna]
        phase = np.exp(-2j * np.pi * ell * grid.subcarrier_spacing * path.distance / SPEED_OF_LIGHT)
        h += path.gain * b_n * np.outer(phase, a)
    return h


def symbol_model(frame, grid: OfdmGrid, plan: OffsetPlan, paths, rx_antenna: int = 0, num_rx: int = 1) -> np.ndarray:
    """Closed-form matched-filter output: desired term via alpha plus ICI via beta."""
    frame = _check_frame(frame, grid, plan)
    coeffs = ici_coefficients(plan, grid)
    weighted = effective_channel(grid, plan, paths, rx_antenna, num_rx) * frame
    out = np.zeros(grid.num_subcarriers, dtype=complex)
    for m in range(plan.num_elements):
        out += coeffs.matrix(m).T @ weighted[:, m]
    return out


def dft_matrix(n: int) -> np.ndarray:
    """Unitary DFT matrix ``F[l, i] = exp(-j 2 pi l i / n) / sqrt(n)``."""
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n) / math.sqrt(n)


def offset_phase_matrix(rho_m: float, n: int) -> np.ndarray:
    """Diagonal ``Xi_m`` of per-sample phase rotations for ratio ``rho_m``."""
    return np.diag(np.exp(2j * np.pi * rho_m * np.arange(n) / n))


def delay_phase_matrix(grid: OfdmGrid, distance: float) -> np.ndarray:
    """Diagonal ``Phi`` of per-subcarrier propagation phases."""
    ell = np.arange(grid.num_subcarriers)
    return np.diag(np.exp(-2j * np.pi * ell * grid.subcarrier_spacing * distance / SPEED_OF_LIGHT))


def slight_offset_error(plan: OffsetPlan, grid: OfdmGrid) -> float:
    """Relative deviation of ``F Xi F^H`` from the identity over all antennas.

    Returns ``sqrt(sum_m ||F Xi_m F^H - I||_F^2 / (M N_us))``.  By unitary
    invariance of the Frobenius norm this equals the deviation of ``Xi_m``
    itself, which is what is evaluated.
    """
    n = grid.num_subcarriers
    i = np.arange(n)
    rho = plan.offsets / grid.subcarrier_spacing
    dev = np.abs(np.exp(2j * np.pi * np.outer(rho, i) / n) - 1.0) ** 2
    return math.sqrt(dev.sum() / (plan.num_elements * n))


def write_golden_csv(path, values) -> None:
    """Store a complex vector as ``index,re,im`` rows (exact round trip)."""
    values = np.asarray(values, dtype=complex).ravel()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "re", "im"])
        for k, v in enumerate(values):
            writer.writerow([k, repr(float(v.real)), repr(float(v.imag))])


def read_golden_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = sorted(reader, key=lambda r: int(r["index"]))
    return np.array([complex(float(r["re"]), float(r["im"])) for r in rows])
