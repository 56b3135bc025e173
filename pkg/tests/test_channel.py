import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fldma.array import PolarLocation, generate_offsets, steering_rx, steering_tx_baseband, zero_plan
from fldma.channel import (
    Path,
    UeChannel,
    channel_matrix,
    channel_vector,
    generate_multipath,
    ideal_channel,
    place_ues,
    space_frequency_matrix,
    stacked_ideal,
    stacked_space_frequency,
)
from fldma.errors import PreconditionError
from fldma.waveform import OfdmGrid, delay_phase_matrix, matched_filter_demod, random_frame, synthesize_received


def test_place_ues_boresight_when_theta_zero():
    locs = place_ues(20, 0.0, 3000.0, 1)
    assert all(loc.angle == 0.0 for loc in locs)


def test_place_single_ue_in_bounds():
    (loc,) = place_ues(1, 0.3, 100.0, 4)
    assert 0 < loc.distance <= 100.0 and abs(loc.angle) <= 0.3


def test_place_ues_replay():
    assert place_ues(10, 1.0, 3000.0, 42) == place_ues(10, 1.0, 3000.0, 42)
    assert place_ues(10, 1.0, 3000.0, 42) != place_ues(10, 1.0, 3000.0, 43)


def test_place_ues_errors():
    with pytest.raises(ValueError):
        place_ues(0, 0.1, 10.0, 0)
    with pytest.raises(ValueError):
        place_ues(3, -0.1, 10.0, 0)
    with pytest.raises(ValueError):
        place_ues(3, 0.1, 0.0, 0)


@given(st.integers(1, 50), st.floats(0.0, math.pi / 2), st.floats(1.0, 5000.0), st.integers(0, 2**31), st.integers(0, 8), st.floats(0.0, 100.0))
@settings(max_examples=60, deadline=None)
def test_sector_compliance(k, theta_max, r_max, seed, p, kappa):
    rng = np.random.default_rng(seed)
    for loc in place_ues(k, theta_max, r_max, rng):
        assert 0 < loc.distance <= r_max and abs(loc.angle) <= theta_max
        ue = generate_multipath(loc, p, kappa, theta_max, r_max, rng)
        assert len(ue.paths) == p + 1
        assert ue.los.distance == loc.distance and ue.los.aod == loc.angle
        for path in ue.paths[1:]:
            assert loc.distance <= path.distance <= r_max
            assert abs(path.aod) <= theta_max and abs(path.aoa) <= theta_max


def test_pure_los_has_unit_gain():
    ue = generate_multipath(PolarLocation(10.0, 0.1), 0, 3.0, 0.5, 100.0, 0)
    assert len(ue.paths) == 1 and abs(abs(ue.los.gain) - 1) < 1e-15


def test_rayleigh_limit():
    rng = np.random.default_rng(0)
    gains = np.array([[p.gain for p in generate_multipath(PolarLocation(10.0, 0.0), 4, 0.0, 0.5, 100.0, rng).paths] for _ in range(20000)])
    assert np.all(gains[:, 0] == 0)
    var = np.mean(np.abs(gains[:, 1:]) ** 2, axis=0)
    # each |g|^2 is Exp(1/4), so stderr = 0.25 / sqrt(n); 3.5 sigma covers four simultaneous checks
    assert np.all(np.abs(var - 0.25) < 3.5 * 0.25 / math.sqrt(20000))


def test_los_magnitude_from_kappa():
    ue = generate_multipath(PolarLocation(10.0, 0.0), 3, 4.0, 0.5, 100.0, 1)
    assert abs(ue.los.gain) == pytest.approx(math.sqrt(4 / 5))
    inf = generate_multipath(PolarLocation(10.0, 0.0), 3, math.inf, 0.5, 100.0, 1)
    assert abs(inf.los.gain) == pytest.approx(1.0) and all(p.gain == 0 for p in inf.paths[1:])
    with pytest.raises(ValueError):
        generate_multipath(PolarLocation(10.0, 0.0), 3, -1.0, 0.5, 100.0, 1)


@pytest.mark.parametrize("kappa,p", [(0.0, 4), (1.0, 2), (10.0, 8), (0.5, 1)])
def test_unit_average_power(kappa, p):
    rng = np.random.default_rng(7)
    n = 10_000
    power = np.array(
        [sum(abs(x.gain) ** 2 for x in generate_multipath(PolarLocation(5.0, 0.0), p, kappa, 0.3, 50.0, rng).paths) for _ in range(n)]
    )
    assert abs(power.mean() - 1.0) < 3 * power.std(ddof=1) / math.sqrt(n)


# --- channel vectors -----------------------------------------------------------


def test_channel_vector_single_path_is_steering():
    plan = generate_offsets("random_permutation", 16, delta_f=1e3, seed=0)
    loc = PolarLocation(321.0, -0.2)
    ue = UeChannel(loc, (Path(1.0, loc.distance, loc.angle),), 0.0)
    np.testing.assert_allclose(channel_vector(ue, plan), steering_tx_baseband(plan, loc), atol=1e-15)


def test_channel_vector_linearity():
    plan = generate_offsets("random_permutation", 16, delta_f=1e3, seed=0)
    p = Path(0.3 - 0.2j, 200.0, 0.4)
    single = channel_vector(UeChannel(PolarLocation(200.0, 0.4), (p,), 0.0), plan)
    double = channel_vector(UeChannel(PolarLocation(200.0, 0.4), (p, p), 0.0), plan)
    np.testing.assert_allclose(double, 2 * single, atol=1e-15)


def test_channel_matrix_stacks_vectors():
    plan = generate_offsets("random_permutation", 8, delta_f=2e3, seed=3)
    rng = np.random.default_rng(0)
    ues = [generate_multipath(loc, p, 1.0, 0.5, 1000.0, rng) for loc, p in zip(place_ues(4, 0.5, 1000.0, rng), (0, 2, 1, 3))]
    H = channel_matrix(ues, plan)
    for k, ue in enumerate(ues):
        np.testing.assert_allclose(H[k], channel_vector(ue, plan), atol=1e-14)


def test_single_path_elements_uncorrelated():
    rng = np.random.default_rng(11)
    m, n = 16, 4000
    acc = np.zeros((m, m), dtype=complex)
    for i in range(n):
        plan = generate_offsets("random_permutation", m, rho_max=30.0, seed=int(rng.integers(2**31)))
        (loc,) = place_ues(1, math.radians(60), 3000.0, rng)
        h = channel_vector(generate_multipath(loc, 0, 0.0, math.radians(60), 3000.0, rng), plan)
        acc += np.outer(h, h.conj())
    acc /= n
    np.testing.assert_allclose(np.diag(acc).real, 1 / m, rtol=1e-12)
    off = acc[~np.eye(m, dtype=bool)]
    # M * entry is the mean of n unit phasors; for a zero-mean complex average
    # P(|z| > r) = exp(-n r^2), so the max over M(M-1)/2 pairs stays below
    # sqrt(ln(pairs / 1e-3) / n) with probability 0.999
    pairs = m * (m - 1) / 2
    assert np.max(np.abs(off)) * m < math.sqrt(math.log(pairs / 1e-3) / n)


# --- space-frequency matrices ------------------------------------------------


def _ue(paths):
    return UeChannel(PolarLocation(paths[0].distance, paths[0].aod), tuple(paths), 0.0)


def test_single_antenna_zero_offset_is_phi():
    g = OfdmGrid(8, 15e3, 2)
    ue = _ue([Path(1.0, 1234.0, 0.3)])
    H = space_frequency_matrix(ue, zero_plan(1), g, 1)
    np.testing.assert_allclose(H, delay_phase_matrix(g, 1234.0), atol=1e-13)


def test_zero_plan_is_block_diagonal_per_subcarrier():
    g = OfdmGrid(8, 15e3, 2)
    paths = [Path(0.7 + 0.1j, 500.0, 0.2, 0.1), Path(-0.3j, 900.0, -0.4, 0.3)]
    M, NR, N = 3, 2, 8
    H = space_frequency_matrix(_ue(paths), zero_plan(M), g, NR).reshape(NR, N, M, N)
    ell = np.arange(N)
    expected = np.zeros((NR, N, M, N), dtype=complex)
    for p in paths:
        b = steering_rx(p.aoa, NR)
        a = steering_tx_baseband(zero_plan(M), PolarLocation(p.distance, p.aod))
        phi = np.exp(-2j * np.pi * ell * 15e3 * p.distance / 299792458.0)
        for n in range(NR):
            for m in range(M):
                expected[n, ell, m, ell] += p.gain * b[n] * a[m] * phi
    np.testing.assert_allclose(H, expected, atol=1e-13)


def test_space_frequency_matches_pipeline():
    g = OfdmGrid(8, 15e3, 2)
    rng = np.random.default_rng(5)
    plan = generate_offsets("random_permutation", 2, rho_max=1.7, seed=5)
    paths = [Path(complex(rng.normal(), rng.normal()), float(rng.uniform(0, g.max_range)), float(rng.uniform(-1, 1)), float(rng.uniform(-1, 1))) for _ in range(3)]
    frame = random_frame(g, 2, 5)
    H = space_frequency_matrix(_ue(paths), plan, g, 2)
    y = H @ frame.T.ravel()
    for n in range(2):
        direct = matched_filter_demod(synthesize_received(frame, g, plan, paths, rx_antenna=n, num_rx=2), g)
        assert np.max(np.abs(y[n * 8 : (n + 1) * 8] - direct)) < 1e-9


def test_dense_cap():
    g = OfdmGrid(512, 15e3, 128)
    with pytest.raises(PreconditionError):
        space_frequency_matrix(_ue([Path(1.0, 10.0, 0.0)]), zero_plan(8), g, 1)


def test_ideal_channel_structure():
    g = OfdmGrid(6, 15e3, 1)
    plan = generate_offsets("uniform", 1, delta_f=0.0)
    los = Path(1.0, 250.0, 0.2)
    H = ideal_channel(los, plan, g, 1)
    scalar = steering_rx(0.0, 1)[0] * steering_tx_baseband(plan, PolarLocation(250.0, 0.2))[0]
    np.testing.assert_allclose(H, scalar * np.eye(6))
    plan4 = generate_offsets("random_permutation", 4, delta_f=1e3, seed=0)
    H4 = ideal_channel(Path(1.0, 250.0, 0.2, 0.4), plan4, g, 3)
    assert H4.shape == (18, 24)
    assert np.linalg.matrix_rank(H4) == 6


def test_stacking_helpers():
    g = OfdmGrid(4, 15e3, 1)
    plan = generate_offsets("random_permutation", 3, delta_f=1e3, seed=0)
    ues = [_ue([Path(1.0, 100.0, 0.1)]), _ue([Path(0.5j, 700.0, -0.2)])]
    assert stacked_space_frequency(ues, plan, g).shape == (8, 12)
    assert stacked_ideal(ues, plan, g).shape == (8, 12)
