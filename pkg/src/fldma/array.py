"""Frequency-offset plans, steering vectors, beam correlation and beampatterns.

All steering vectors are unit norm.  Element index ``m`` runs from 0 to
``M - 1`` and the half-wavelength spacing makes the angular phase of element
``m`` equal to ``pi * m * sin(theta)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import PreconditionError

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform linear array."""

    num_elements: int
    carrier_freq: float
    element_spacing: float

    def __post_init__(self):
        if int(self.num_elements) != self.num_elements or self.num_elements < 1:
            raise ValueError(f"num_elements must be a positive integer, got {self.num_elements}")
        if self.carrier_freq <= 0 or self.element_spacing <= 0:
            raise ValueError("carrier_freq and element_spacing must be positive")

    @classmethod
    def from_carrier(cls, num_elements: int, carrier_freq: float) -> "ArrayGeometry":
        """Half-wavelength spaced array at ``carrier_freq``."""
        return cls(num_elements, carrier_freq, SPEED_OF_LIGHT / (2.0 * carrier_freq))

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_freq


class OffsetScheme(str, enum.Enum):
    ZERO = "zero"
    UNIFORM = "uniform"
    LOGARITHMIC = "logarithmic"
    RANDOM_PERMUTATION = "random_permutation"
    SYMMETRIC_RANDOM_PERMUTATION = "symmetric_random_permutation"

    @classmethod
    def parse(cls, value) -> "OffsetScheme":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        aliases = {
            "pa": cls.ZERO,
            "none": cls.ZERO,
            "uniform_increasing": cls.UNIFORM,
            "linear": cls.UNIFORM,
            "log": cls.LOGARITHMIC,
            "permutation": cls.RANDOM_PERMUTATION,
            "random": cls.RANDOM_PERMUTATION,
            "symmetric": cls.SYMMETRIC_RANDOM_PERMUTATION,
        }
        if key in aliases:
            return aliases[key]
        try:
            return cls(key)
        except ValueError:
            names = ", ".join(s.value for s in cls)
            raise ValueError(f"unknown offset scheme {value!r} (expected one of {names})") from None


@dataclass(frozen=True, eq=False)
class OffsetPlan:
    """Per-antenna frequency offsets of an FDA.

    ``offsets[m]`` is the offset of antenna ``m`` in Hz.  For the permutation
    schemes ``permutation[m]`` holds the multiplier ``z_m`` so that
    ``offsets == permutation * delta_f``.  ``rho_max`` is the largest
    ``|offset|`` divided by ``subcarrier_spacing``.
    """

    scheme: OffsetScheme
    delta_f: float
    rho_max: float
    offsets: np.ndarray
    permutation: np.ndarray | None = None
    seed: int | None = None
    subcarrier_spacing: float = 15e3

    def __post_init__(self):
        offsets = np.asarray(self.offsets, dtype=float)
        offsets.setflags(write=False)
        object.__setattr__(self, "offsets", offsets)
        if self.permutation is not None:
            perm = np.asarray(self.permutation, dtype=float)
            perm.setflags(write=False)
            object.__setattr__(self, "permutation", perm)

    @property
    def num_elements(self) -> int:
        return self.offsets.shape[0]

    @property
    def ratios(self) -> np.ndarray:
        """Offsets normalized by the subcarrier spacing (``rho_m``)."""
        return self.offsets / self.subcarrier_spacing

    def distance_period(self) -> float:
        """Range period ``c / delta_f`` of the beampattern (inf for PA)."""
        if self.delta_f == 0:
            return math.inf
        return SPEED_OF_LIGHT / self.delta_f

    def nominal_distance_beamwidth(self) -> float:
        """Distance-domain beamwidth ``c / ((M - 1) delta_f)``."""
        if self.delta_f == 0 or self.num_elements < 2:
            return math.inf
        return SPEED_OF_LIGHT / ((self.num_elements - 1) * self.delta_f)

    def __eq__(self, other):
        if not isinstance(other, OffsetPlan):
            return NotImplemented
        same_perm = (self.permutation is None and other.permutation is None) or (
            self.permutation is not None
            and other.permutation is not None
            and np.array_equal(self.permutation, other.permutation)
        )
        return (
            self.scheme == other.scheme
            and self.delta_f == other.delta_f
            and self.rho_max == other.rho_max
            and np.array_equal(self.offsets, other.offsets)
            and same_perm
            and self.seed == other.seed
        )

    __hash__ = None


def zero_plan(num_elements: int, subcarrier_spacing: float = 15e3) -> OffsetPlan:
    """Phased-array plan (all offsets zero)."""
    return generate_offsets(OffsetScheme.ZERO, num_elements, subcarrier_spacing=subcarrier_spacing)


def generate_offsets(
    scheme,
    num_elements: int,
    delta_f: float | None = None,
    rho_max: float | None = None,
    seed: int | None = None,
    subcarrier_spacing: float = 15e3,
) -> OffsetPlan:
    """Build an :class:`OffsetPlan`.

    Parameters
    ----------
    scheme : OffsetScheme or str
        Offset layout.
    num_elements : int
        Number of transmit antennas ``M``.
    delta_f, rho_max : float, optional
        Exactly one must be given for every scheme except ``ZERO``.  When
        ``rho_max`` is given the increment cell is derived from it:
        ``2 rho_max df / (M - 1)`` for the symmetric permutation and
        ``rho_max df / (M - 1)`` otherwise (``df`` is the subcarrier spacing).
    seed : int, optional
        Required for the random permutation schemes.  The permutation is a
        Fisher-Yates shuffle drawn from ``numpy.random.default_rng(seed)``.
    subcarrier_spacing : float
        OFDM subcarrier spacing in Hz.

    Returns
    -------
    OffsetPlan
    """
    scheme = OffsetScheme.parse(scheme)
    m_count = int(num_elements)
    if m_count != num_elements or m_count < 1:
        raise ValueError(f"num_elements must be a positive integer, got {num_elements}")
    if subcarrier_spacing <= 0:
        raise ValueError("subcarrier_spacing must be positive")
    m = np.arange(m_count, dtype=float)

    if scheme is OffsetScheme.ZERO:
        return OffsetPlan(scheme, 0.0, 0.0, np.zeros(m_count), None, seed, subcarrier_spacing)

    if (delta_f is None) == (rho_max is None):
        raise ValueError("exactly one of delta_f and rho_max must be given")
    if delta_f is not None and delta_f < 0:
        raise ValueError("delta_f must be non-negative")
    if rho_max is not None and rho_max < 0:
        raise ValueError("rho_max must be non-negative")

    symmetric = scheme is OffsetScheme.SYMMETRIC_RANDOM_PERMUTATION
    if m_count == 1:
        if symmetric:
            raise PreconditionError("symmetric permutation plan needs at least two antennas")
        if rho_max is not None and rho_max > 0:
            raise PreconditionError("cannot derive delta_f from rho_max with a single antenna")
    if delta_f is None:
        span = 2.0 * rho_max if symmetric else rho_max
        delta_f = span * subcarrier_spacing / (m_count - 1) if m_count > 1 else 0.0

    permutation = None
    if scheme is OffsetScheme.UNIFORM:
        offsets = m * delta_f
    elif scheme is OffsetScheme.LOGARITHMIC:
        if m_count == 1:
            offsets = np.zeros(1)
        else:
            offsets = (m_count - 1) * np.log(m + 1.0) * delta_f / math.log(m_count)
    else:
        if seed is None:
            raise ValueError(f"{scheme.value} plan requires an explicit seed")
        base = m - (m_count - 1) / 2.0 if symmetric else m
        permutation = np.random.default_rng(seed).permutation(base)
        offsets = permutation * delta_f

    rho = float(np.max(np.abs(offsets))) / subcarrier_spacing
    return OffsetPlan(scheme, float(delta_f), rho, offsets, permutation, seed, subcarrier_spacing)


@dataclass(frozen=True)
class PolarLocation:
    """Far-field location relative to the reference element."""

    distance: float
    angle: float = field(default=0.0)

    def __post_init__(self):
        if not self.distance >= 0:
            raise ValueError(f"distance must be >= 0, got {self.distance}")
        if abs(self.angle) > math.pi / 2 + 1e-12:
            raise ValueError(f"angle must lie in [-pi/2, pi/2], got {self.angle}")


def sa(n: int, x):
    """Periodic sinc ``sin(pi n x) / (n sin(pi x))``.

    At integer ``x`` the removable singularity is replaced by its limit
    ``(-1)**((n - 1) x)``.  The argument is reduced to ``[-1/2, 1/2]`` before
    evaluation so values just off an integer keep full relative accuracy.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    x = np.asarray(x, dtype=float)
    k = np.rint(x)
    r = x - k
    sign = np.where(np.mod((n - 1) * k, 2.0) == 0.0, 1.0, -1.0)
    out = sign * np.sinc(n * r) / np.sinc(r)
    return float(out) if out.ndim == 0 else out


def _check_plan_length(plan: OffsetPlan, length: int | None):
    if length is not None and length != plan.num_elements:
        raise ValueError(f"plan has {plan.num_elements} elements, expected {length}")


def steering_tx(plan: OffsetPlan, loc: PolarLocation, t: float, num_elements: int | None = None) -> np.ndarray:
    """Time-varying FDA transmit steering vector ``a(R, theta, t)``."""
    _check_plan_length(plan, num_elements)
    m = np.arange(plan.num_elements)
    turns = m * math.sin(loc.angle) / 2.0 + plan.offsets * (t - loc.distance / SPEED_OF_LIGHT)
    return np.exp(2j * np.pi * turns) / math.sqrt(plan.num_elements)


def steering_tx_baseband(plan: OffsetPlan, loc: PolarLocation, num_elements: int | None = None) -> np.ndarray:
    """Baseband steering vector, i.e. :func:`steering_tx` at ``t = 0``."""
    return steering_tx(plan, loc, 0.0, num_elements)


def steering_matrix(plan: OffsetPlan, distances, angles) -> np.ndarray:
    """Baseband steering vectors for many locations, one per row.

    ``distances`` and ``angles`` broadcast against each other; the result has
    shape ``broadcast_shape + (M,)``.
    """
    distances, angles = np.broadcast_arrays(np.asarray(distances, float), np.asarray(angles, float))
    m = np.arange(plan.num_elements)
    turns = (
        np.sin(angles)[..., None] * m / 2.0
        - distances[..., None] * plan.offsets / SPEED_OF_LIGHT
    )
    return np.exp(2j * np.pi * turns) / math.sqrt(plan.num_elements)


def steering_rx(phi: float, num_elements: int) -> np.ndarray:
    """Phased-array receive steering vector ``b(phi)``."""
    if num_elements < 1:
        raise ValueError("num_elements must be >= 1")
    n = np.arange(num_elements)
    return np.exp(1j * np.pi * n * math.sin(phi)) / math.sqrt(num_elements)


def correlation(a_i: np.ndarray, a_j: np.ndarray) -> complex:
    """Beam correlation ``a_i^H a_j``."""
    a_i = np.asarray(a_i)
    a_j = np.asarray(a_j)
    if a_i.ndim != 1 or a_i.shape != a_j.shape:
        raise ValueError(f"shape mismatch: {a_i.shape} vs {a_j.shape}")
    return complex(np.vdot(a_i, a_j))


def correlation_args(plan: OffsetPlan, loc_i: PolarLocation, loc_j: PolarLocation) -> tuple[float, float]:
    """Angle and distance arguments ``(p, q)`` of a location pair."""
    p = (math.sin(loc_i.angle) - math.sin(loc_j.angle)) / 2.0
    q = plan.delta_f * (loc_i.distance - loc_j.distance) / SPEED_OF_LIGHT
    return p, q


def _require_pair_count(m: int):
    if m < 2:
        raise PreconditionError("correlation statistics need M >= 2")


def correlation_mean(p, q, num_elements: int):
    """Mean of the permutation-ensemble correlation.

    The ensemble variable is ``(1/M) sum_m exp(j 2 pi (m p - z_m q))`` with
    ``z`` a uniformly random permutation of ``0..M-1``.  For two locations
    this is ``correlation(a_j, a_i)`` with ``(p, q)`` from
    :func:`correlation_args`.
    """
    _require_pair_count(num_elements)
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    mean = sa(num_elements, p) * sa(num_elements, q) * np.exp(1j * np.pi * (num_elements - 1) * (p - q))
    return complex(mean) if np.ndim(mean) == 0 else mean


def correlation_sq_approx(p, q, num_elements: int):
    """Second moment ``E|eta|^2`` used as the approximation of ``|eta|^2``."""
    _require_pair_count(num_elements)
    m = num_elements
    sp = np.square(sa(m, p))
    sq = np.square(sa(m, q))
    out = 1.0 / m + m / (m - 1.0) * (sp - 1.0 / m) * (sq - 1.0 / m)
    return float(out) if np.ndim(out) == 0 else out


def correlation_var(p, q, num_elements: int):
    """Variance ``E|eta - E eta|^2`` of the permutation-ensemble correlation."""
    m = num_elements
    sp = np.square(sa(m, p))
    sq = np.square(sa(m, q))
    out = correlation_sq_approx(p, q, m) - sp * sq
    return float(out) if np.ndim(out) == 0 else out


def beampattern(plan: OffsetPlan, focus: PolarLocation, r_grid, theta_grid) -> np.ndarray:
    """Correlation magnitude between the focus and every grid point.

    Returns an array of shape ``(len(r_grid), len(theta_grid))``.
    """
    r_grid = np.atleast_1d(np.asarray(r_grid, dtype=float))
    theta_grid = np.atleast_1d(np.asarray(theta_grid, dtype=float))
    if r_grid.size == 0 or theta_grid.size == 0:
        raise ValueError("beampattern grids must be non-empty")
    a_focus = steering_tx_baseband(plan, focus)
    m = np.arange(plan.num_elements)
    # separable form: a(r, theta)_m = exp(j pi m sin theta) exp(-j 2 pi f_m r / c) / sqrt(M)
    dist = np.exp(-2j * np.pi * np.outer(r_grid, plan.offsets) / SPEED_OF_LIGHT)
    ang = np.exp(1j * np.pi * np.outer(m, np.sin(theta_grid)))
    eta = (dist * np.conj(a_focus)) @ ang / math.sqrt(plan.num_elements)
    return np.minimum(np.abs(eta), 1.0)


def distance_beamwidth(plan: OffsetPlan, focus: PolarLocation, level: float = 1.0 / math.sqrt(2.0)) -> float:
    """Measured full width (meters) of the range mainlobe at ``focus``.

    The cut is taken at the focus angle; the edges are where the correlation
    magnitude first falls to ``level`` (default -3 dB).
    """
    if plan.delta_f == 0 and not np.any(plan.offsets):
        return math.inf
    a_focus = steering_tx_baseband(plan, focus)

    def excess(delta_r):
        # the lower edge may fall below R = 0, so bypass PolarLocation validation
        vec = steering_matrix(plan, focus.distance + delta_r, focus.angle)
        return abs(np.vdot(a_focus, vec)) - level

    step = SPEED_OF_LIGHT / (16.0 * float(np.max(np.abs(plan.offsets))))
    edges = []
    for sign in (1.0, -1.0):
        lo, hi = 0.0, step
        for _ in range(10_000):
            if excess(sign * hi) < 0:
                break
            lo, hi = hi, hi + step
        else:
            return math.inf
        edges.append(brentq(lambda d: excess(sign * d), lo, hi, xtol=1e-9 * step))
    return edges[0] + edges[1]
