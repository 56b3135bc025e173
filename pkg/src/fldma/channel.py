"""UE placement, Rician multipath and channel operators."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .array import OffsetPlan, PolarLocation, steering_matrix, steering_rx, steering_tx_baseband
from .errors import PreconditionError
from .waveform import OfdmGrid, dft_matrix

# Largest N_us * max(M, N_rx) for which the dense space-frequency matrix is built.
DEFAULT_DENSE_CAP = 2048


@dataclass(frozen=True)
class Path:
    """One propagation ray; ``gain`` already contains the carrier phase."""

    gain: complex
    distance: float
    aod: float
    aoa: float = 0.0


@dataclass(frozen=True)
class UeChannel:
    location: PolarLocation
    paths: tuple
    rician_kappa: float

    @property
    def los(self) -> Path:
        return self.paths[0]


def _check_sector(theta_max: float, r_max: float):
    if not 0 <= theta_max <= math.pi / 2:
        raise ValueError(f"theta_max must lie in [0, pi/2], got {theta_max}")
    if not r_max > 0:
        raise ValueError(f"R_max must be positive, got {r_max}")


def place_ues(num_ues: int, theta_max: float, r_max: float, rng_seed) -> list[PolarLocation]:
    """Drop UEs uniformly in angle on ``[-theta_max, theta_max]`` and in range on ``(0, R_max]``.

    ``theta_max = 0`` puts every UE on the boresight line.
    """
    if num_ues <= 0:
        raise ValueError(f"number of UEs must be positive, got {num_ues}")
    _check_sector(theta_max, r_max)
    rng = np.random.default_rng(rng_seed)
    angles = rng.uniform(-theta_max, theta_max, num_ues)
    distances = r_max * (1.0 - rng.random(num_ues))
    return [PolarLocation(float(r), float(a)) for r, a in zip(distances, angles)]


def generate_multipath(loc: PolarLocation, num_paths: int, kappa: float, theta_max: float, r_max: float, rng_seed) -> UeChannel:
    """One LoS path at ``loc`` plus ``num_paths`` Rayleigh NLoS paths.

    The LoS magnitude is ``sqrt(kappa / (kappa + 1))`` with a uniform random
    phase; NLoS gains are i.i.d. ``CN(0, 1 / ((kappa + 1) P))``.  NLoS AoD and
    AoA are uniform over the sector and NLoS distances uniform on
    ``[R_LoS, R_max]``.  With ``num_paths = 0`` the LoS gain has unit
    magnitude regardless of ``kappa``.
    """
    if num_paths < 0:
        raise ValueError("num_paths must be >= 0")
    if not kappa >= 0:
        raise ValueError(f"Rician factor must be >= 0, got {kappa}")
    _check_sector(theta_max, r_max)
    rng = np.random.default_rng(rng_seed)
    los_phase = np.exp(2j * np.pi * rng.random())
    if num_paths == 0:
        return UeChannel(loc, (Path(complex(los_phase), loc.distance, loc.angle, loc.angle),), kappa)

    if math.isinf(kappa):
        los_amp, nlos_var = 1.0, 0.0
    else:
        los_amp = math.sqrt(kappa / (kappa + 1.0))
        nlos_var = 1.0 / ((kappa + 1.0) * num_paths)
    paths = [Path(complex(los_amp * los_phase), loc.distance, loc.angle, loc.angle)]
    gains = math.sqrt(nlos_var / 2.0) * (rng.standard_normal(num_paths) + 1j * rng.standard_normal(num_paths))
    aods = rng.uniform(-theta_max, theta_max, num_paths)
    aoas = rng.uniform(-theta_max, theta_max, num_paths)
    dists = rng.uniform(loc.distance, max(r_max, loc.distance), num_paths)
    for g, r, d, a in zip(gains, dists, aods, aoas):
        paths.append(Path(complex(g), float(r), float(d), float(a)))
    return UeChannel(loc, tuple(paths), kappa)


def channel_vector(ue: UeChannel, plan: OffsetPlan) -> np.ndarray:
    """Single-antenna UE channel ``h = sum_p gain_p a(R_p, theta_p)``."""
    gains = np.array([p.gain for p in ue.paths])
    vecs = steering_matrix(plan, [p.distance for p in ue.paths], [p.aod for p in ue.paths])
    return gains @ vecs


def channel_matrix(ues, plan: OffsetPlan) -> np.ndarray:
    """Stack :func:`channel_vector` of every UE as the rows of a ``K x M`` matrix."""
    ues = list(ues)
    width = max(len(u.paths) for u in ues)
    gains = np.zeros((len(ues), width), dtype=complex)
    dists = np.zeros((len(ues), width))
    angles = np.zeros((len(ues), width))
    for k, ue in enumerate(ues):
        for p, path in enumerate(ue.paths):
            gains[k, p] = path.gain
            dists[k, p] = path.distance
            angles[k, p] = path.aod
    return np.einsum("kp,kpm->km", gains, steering_matrix(plan, dists, angles))


def _per_antenna_blocks(plan: OffsetPlan, grid: OfdmGrid, distance: float) -> np.ndarray:
    """``F Xi_m F^H Phi`` for every antenna, shape ``(M, N_us, N_us)``."""
    n = grid.num_subcarriers
    f = dft_matrix(n)
    i = np.arange(n)
    rho = plan.offsets / grid.subcarrier_spacing
    xi = np.exp(2j * np.pi * np.outer(rho, i) / n)  # diagonal of Xi_m
    phi = np.exp(-2j * np.pi * i * grid.subcarrier_spacing * distance / 299_792_458.0)
    fh_phi = f.conj().T * phi[None, :]
    return np.einsum("li,mi,ik->mlk", f, xi, fh_phi)


def space_frequency_matrix(ue: UeChannel, plan: OffsetPlan, grid: OfdmGrid, num_rx: int = 1, dense_cap: int = DEFAULT_DENSE_CAP) -> np.ndarray:
    """Dense ``(N_us N_rx) x (N_us M)`` channel acting on a vectorized frame.

    Input index ``m * N_us + l`` and output index ``n * N_us + l'``.
    """
    n = grid.num_subcarriers
    if n * max(plan.num_elements, num_rx) > dense_cap:
        raise PreconditionError(
            f"dense space-frequency matrix too large (N_us*max(M, N_rx) = {n * max(plan.num_elements, num_rx)} "
            f"> {dense_cap}); use the per-subcarrier model instead"
        )
    out = np.zeros((num_rx, n, plan.num_elements, n), dtype=complex)
    for path in ue.paths:
        if path.gain == 0:
            continue
        a = steering_tx_baseband(plan, PolarLocation(path.distance, path.aod))
        b = steering_rx(path.aoa, num_rx)
        blocks = _per_antenna_blocks(plan, grid, path.distance)
        out += path.gain * np.einsum("n,m,mlk->nlmk", b, a, blocks)
    return out.reshape(num_rx * n, plan.num_elements * n)


def ideal_channel(los: Path, plan: OffsetPlan, grid: OfdmGrid, num_rx: int = 1) -> np.ndarray:
    """ICI-free target ``b(phi) a(R, theta)^T kron I_N``."""
    a = steering_tx_baseband(plan, PolarLocation(los.distance, los.aod))
    b = steering_rx(los.aoa, num_rx)
    return np.kron(np.outer(b, a), np.eye(grid.num_subcarriers))


def stacked_space_frequency(ues, plan: OffsetPlan, grid: OfdmGrid, num_rx: int = 1) -> np.ndarray:
    return np.vstack([space_frequency_matrix(u, plan, grid, num_rx) for u in ues])


def stacked_ideal(ues, plan: OffsetPlan, grid: OfdmGrid, num_rx: int = 1) -> np.ndarray:
    return np.vstack([ideal_channel(u.los, plan, grid, num_rx) for u in ues])
