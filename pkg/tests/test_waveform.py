import math
import pathlib

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fldma.array import SPEED_OF_LIGHT, generate_offsets, zero_plan
from fldma.channel import Path
from fldma.errors import PreconditionError
from fldma.waveform import (
    OfdmGrid,
    add_noise,
    dft_matrix,
    ici_coefficients,
    matched_filter_demod,
    modulate,
    offset_phase_matrix,
    qam_constellation,
    random_frame,
    read_golden_csv,
    slight_offset_error,
    symbol_model,
    synthesize_received,
    write_golden_csv,
)

GOLDEN = pathlib.Path(__file__).parent / "golden"


def test_grid_timing():
    g = OfdmGrid(512, 15e3, 128)
    assert g.symbol_duration == pytest.approx(1 / 15e3)
    assert g.cp_duration == pytest.approx(16.6667e-6, rel=1e-4)
    assert g.sample_rate == pytest.approx(512 * 15e3)
    assert g.sample_interval == pytest.approx(g.symbol_duration / 512)
    assert g.transmit_times()[0] == pytest.approx(-g.cp_duration)
    assert g.transmit_times().size == 640
    with pytest.raises(ValueError):
        OfdmGrid(8, 15e3, 8)


def test_qam_unit_power():
    for order in (4, 16, 64):
        pts = qam_constellation(order)
        assert pts.size == order
        assert np.mean(np.abs(pts) ** 2) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        qam_constellation(8)


def test_random_frame_shape_and_replay():
    g = OfdmGrid(32, 15e3, 8)
    a = random_frame(g, 4, 7)
    assert a.shape == (32, 4)
    np.testing.assert_array_equal(a, random_frame(g, 4, 7))


# --- modulation -----------------------------------------------------------


def test_dc_subcarrier_is_constant():
    g = OfdmGrid(8, 15e3, 2)
    frame = np.zeros((8, 2), dtype=complex)
    frame[0] = [0.5 + 0.5j, -1.0]
    s = modulate(frame, g, zero_plan(2))
    amp = 1 / math.sqrt(g.symbol_duration)
    np.testing.assert_allclose(s[0], np.full(10, (0.5 + 0.5j) * amp))
    np.testing.assert_allclose(s[1], np.full(10, -amp))


def test_single_subcarrier_pattern():
    g = OfdmGrid(8, 15e3, 2)
    frame = np.zeros((8, 1), dtype=complex)
    frame[1, 0] = 1.0
    s = modulate(frame, g, zero_plan(1))[0]
    i = np.arange(-2, 8)
    np.testing.assert_allclose(s, np.exp(2j * np.pi * i / 8) / math.sqrt(g.symbol_duration), atol=1e-9)


def test_modulate_zero_and_shape_errors():
    g = OfdmGrid(8, 15e3, 2)
    plan = generate_offsets("uniform", 3, delta_f=100.0)
    assert not np.any(modulate(np.zeros((8, 3)), g, plan))
    with pytest.raises(ValueError):
        modulate(np.zeros((8, 2)), g, plan)


def test_modulate_applies_offset_rotation():
    g = OfdmGrid(16, 15e3, 4)
    plan = generate_offsets("uniform", 2, delta_f=700.0)
    frame = random_frame(g, 2, 3)
    t = g.transmit_times()
    base = modulate(frame, g, zero_plan(2))
    np.testing.assert_allclose(modulate(frame, g, plan), base * np.exp(2j * np.pi * np.outer(plan.offsets, t)), atol=1e-9)


# --- reception --------------------------------------------------------------


def test_no_delay_reproduces_cp_stripped_signal():
    g = OfdmGrid(16, 15e3, 4)
    frame = random_frame(g, 1, 0)
    rx = synthesize_received(frame, g, zero_plan(1), [Path(1.0, 0.0, 0.3)])
    np.testing.assert_allclose(rx, modulate(frame, g, zero_plan(1))[0, 4:], atol=1e-9)


def test_zero_gain_gives_zero():
    g = OfdmGrid(16, 15e3, 4)
    plan = generate_offsets("uniform", 3, delta_f=100.0)
    frame = random_frame(g, 3, 0)
    assert not np.any(synthesize_received(frame, g, plan, [Path(0.0, 100.0, 0.1), Path(0j, 50.0, -0.2)]))


def test_delay_becomes_per_subcarrier_phase():
    g = OfdmGrid(32, 15e3, 8)
    frame = random_frame(g, 1, 5)
    y = matched_filter_demod(synthesize_received(frame, g, zero_plan(1), [Path(1.0, 1500.0, 0.0)]), g)
    phi = np.exp(-2j * np.pi * np.arange(32) * 15e3 * 1500.0 / SPEED_OF_LIGHT)
    np.testing.assert_allclose(y, phi * frame[:, 0], atol=1e-9)


def test_delay_beyond_cp_rejected():
    g = OfdmGrid(16, 15e3, 4)
    frame = random_frame(g, 1, 0)
    synthesize_received(frame, g, zero_plan(1), [Path(1.0, g.max_range, 0.0)])
    with pytest.raises(PreconditionError):
        synthesize_received(frame, g, zero_plan(1), [Path(1.0, g.max_range * 1.001, 0.0)])


def test_matched_filter_examples():
    g = OfdmGrid(16, 15e3, 4)
    frame = np.zeros((16, 1), dtype=complex)
    frame[5, 0] = 0.3 - 0.7j
    y = matched_filter_demod(modulate(frame, g, zero_plan(1))[0, 4:], g)
    expected = np.zeros(16, dtype=complex)
    expected[5] = 0.3 - 0.7j
    np.testing.assert_allclose(y, expected, atol=1e-12)
    assert not np.any(matched_filter_demod(np.zeros(16), g))
    with pytest.raises(ValueError):
        matched_filter_demod(np.zeros(15), g)


def test_dft_round_trip():
    g = OfdmGrid(64, 15e3, 16)
    frame = random_frame(g, 1, 9)
    y = matched_filter_demod(modulate(frame, g, zero_plan(1))[0, 16:], g)
    np.testing.assert_allclose(y, frame[:, 0], atol=1e-12)


@given(st.floats(0.0, 4900.0), st.floats(0.1, 3.0), st.integers(0, 1000))
@settings(max_examples=30, deadline=None)
def test_energy_preserved_under_cp_retention(distance, gain, seed):
    g = OfdmGrid(32, 15e3, 8)
    frame = random_frame(g, 1, seed)
    rx = synthesize_received(frame, g, zero_plan(1), [Path(gain, distance, 0.0)])
    energy = np.sum(np.abs(rx) ** 2) * g.sample_interval
    assert energy == pytest.approx(gain**2 * np.sum(np.abs(frame) ** 2), rel=1e-9)


def _loop_received(frame, g, plan, paths):
    """Term-by-term evaluation of the received signal (no FFT)."""
    t = g.receive_times()
    ell = np.arange(g.num_subcarriers)
    out = np.zeros(g.num_subcarriers, dtype=complex)
    for p in paths:
        tau = p.distance / SPEED_OF_LIGHT
        for m in range(plan.num_elements):
            w = np.exp(1j * math.pi * m * math.sin(p.aod)) / math.sqrt(plan.num_elements)
            carrier = np.exp(2j * np.pi * np.outer(t - tau, ell) * g.subcarrier_spacing) @ frame[:, m]
            out += p.gain * w * np.exp(2j * np.pi * plan.offsets[m] * (t - tau)) * carrier
    return out / math.sqrt(g.symbol_duration)


@given(st.integers(0, 10_000), st.integers(1, 3), st.floats(0.01, 4.0))
@settings(max_examples=25, deadline=None)
def test_pipeline_matches_loop_oracle_and_symbol_model(seed, num_paths, rho):
    g = OfdmGrid(32, 15e3, 8)
    rng = np.random.default_rng(seed)
    plan = generate_offsets("random_permutation", 3, rho_max=rho, seed=seed)
    frame = random_frame(g, 3, seed)
    paths = [
        Path(complex(rng.normal(), rng.normal()), float(rng.uniform(0, g.max_range)), float(rng.uniform(-1.3, 1.3)))
        for _ in range(num_paths)
    ]
    rx = synthesize_received(frame, g, plan, paths)
    np.testing.assert_allclose(rx, _loop_received(frame, g, plan, paths), atol=1e-9 * np.abs(rx).max())
    y = matched_filter_demod(rx, g)
    assert np.max(np.abs(y - symbol_model(frame, g, plan, paths))) < 1e-9


def test_golden_vectors():
    # frozen by tests/golden/make_golden.py from an explicit loop evaluation
    from golden.make_golden import DF, N_CP, N_US, PATHS, frame_and_plan

    frame, plan = frame_and_plan()
    g = OfdmGrid(N_US, DF, N_CP)
    paths = [Path(gain, dist, aod) for gain, dist, aod in PATHS]
    rx = synthesize_received(frame, g, plan, paths)
    np.testing.assert_allclose(rx, read_golden_csv(GOLDEN / "received_samples.csv"), atol=1e-9)
    gold_y = read_golden_csv(GOLDEN / "demodulated_symbols.csv")
    assert np.max(np.abs(matched_filter_demod(rx, g) - gold_y)) < 1e-9
    assert np.max(np.abs(symbol_model(frame, g, plan, paths) - gold_y)) < 1e-9


def test_golden_csv_round_trip(tmp_path):
    v = np.array([1 / 3 + 2j, -np.pi - 1e-300j, 0j])
    write_golden_csv(tmp_path / "v.csv", v)
    np.testing.assert_array_equal(read_golden_csv(tmp_path / "v.csv"), v)


# --- ICI coefficients -----------------------------------------------------------


def _mp_beta(shift_plus_rho, n):
    """(1/N) sum_i exp(j 2 pi (l - l' + rho) i / N), the sampled matched-filter overlap."""
    mpmath.mp.dps = 30
    x = mpmath.mpf(shift_plus_rho)
    return complex(mpmath.fsum(mpmath.expjpi(2 * x * i / n) for i in range(n)) / n)


@pytest.mark.parametrize("rho", [0.02, 0.37, 1.0, 2.5])
def test_beta_matches_geometric_sum(rho):
    # symmetric M=2 plan gives offsets of +-rho subcarriers, covering both signs
    n = 16
    plan = generate_offsets("symmetric", 2, rho_max=rho, seed=0)
    coeffs = ici_coefficients(plan, OfdmGrid(n, 15e3, 4))
    for m, r in enumerate(plan.ratios):
        for ell in (0, 3, 15):
            for ellp in (0, 7, 15):
                assert abs(coeffs.beta(ell, ellp, m) - _mp_beta(ell - ellp + r, n)) < 1e-12
        assert coeffs.alpha[m] == coeffs.beta(4, 4, m)


def test_ici_zero_offset_is_identity():
    c = ici_coefficients(zero_plan(3), OfdmGrid(8, 15e3, 2))
    np.testing.assert_allclose(c.alpha, 1.0)
    for m in range(3):
        np.testing.assert_allclose(c.matrix(m), np.eye(8), atol=1e-15)


def test_integer_offset_kills_alpha():
    plan = generate_offsets("uniform", 3, delta_f=15e3)  # rho_m = 0, 1, 2
    c = ici_coefficients(plan, OfdmGrid(16, 15e3, 4))
    assert abs(c.alpha[0] - 1) < 1e-15
    assert abs(c.alpha[1]) < 1e-14 and abs(c.alpha[2]) < 1e-14
    # integer offsets move energy to a single neighbouring subcarrier
    assert abs(abs(c.beta(0, 1, 1)) - 1) < 1e-12


def test_small_offset_alpha_magnitude():
    plan = generate_offsets("uniform", 2, delta_f=0.02 * 15e3)
    c = ici_coefficients(plan, OfdmGrid(512, 15e3, 128))
    assert 0.999 <= abs(c.alpha[1]) <= 1.0


def test_slight_offset_error_matches_matrix_form():
    g = OfdmGrid(12, 15e3, 3)
    plan = generate_offsets("random_permutation", 3, rho_max=0.3, seed=1)
    f = dft_matrix(12)
    total = sum(np.linalg.norm(f @ offset_phase_matrix(r, 12) @ f.conj().T - np.eye(12)) ** 2 for r in plan.ratios)
    assert slight_offset_error(plan, g) == pytest.approx(math.sqrt(total / (3 * 12)), rel=1e-12)
    assert slight_offset_error(zero_plan(3), g) == 0.0


def test_slight_offset_error_ordering():
    g = OfdmGrid(512, 15e3, 128)
    errs = [slight_offset_error(generate_offsets("random_permutation", 128, rho_max=r, seed=0), g) for r in (1 / 50, 1 / 20, 1 / 10)]
    assert errs[0] < errs[1] < errs[2]


def test_add_noise_statistics():
    y = add_noise(np.zeros(200_000), 0.5, 3)
    assert np.var(y) == pytest.approx(0.5, rel=0.02)
    assert abs(np.mean(y.real * y.imag)) < 0.01
