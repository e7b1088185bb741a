import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from meadd.circuits import phase_decay_probability
from meadd.gate_algebra import equal_up_to_phase, xrot, zrot
from meadd.noise import (
    BadDistribution,
    InvalidState,
    NoiseConfig,
    apply_decoherence_cycle,
    draw_realization,
    kraus_operators,
    noisy_pauli,
    noisy_x_gate,
    over_rotation_eps,
    sample_counts,
)

from .oracles import X, Y, Z, random_state

rate = st.floats(0.0, 2.0, allow_nan=False)


def test_noiseless_x_gate():
    assert np.allclose(noisy_x_gate((0, 0, 0)), X)


def test_over_rotation_ten_percent():
    assert equal_up_to_phase(noisy_x_gate(over_rotation_eps(0.1)), xrot(1.1 * np.pi))


def test_z_error_prefactor():
    u = noisy_x_gate((0, 0, 0.02))
    assert equal_up_to_phase(u, zrot(0.04) @ X)
    assert np.allclose(u, expm(-0.02j * Z) @ X)


def test_y_pulse_is_phase_shifted_x():
    assert np.allclose(noisy_pauli("Y", (0, 0, 0)), Y)
    assert equal_up_to_phase(noisy_pauli("Y", (0.1, 0, 0)), expm(-0.1j * Y) @ Y)


def test_zero_std_gives_zero_offsets():
    r = draw_realization(NoiseConfig(seed=4), 7)
    assert r.zeta_offset == 0 and r.gamma_offset == 0 and r.sq_phase_offsets == (0, 0)


def test_draws_are_deterministic():
    cfg = NoiseConfig(zeta_drift_std=0.1, gamma_drift_std=0.2, seed=9)
    assert draw_realization(cfg, 3) == draw_realization(cfg, 3)
    assert draw_realization(cfg, (3, 4)) == draw_realization(cfg, (3, 4))
    assert draw_realization(cfg, 3) != draw_realization(cfg, 4)


def test_draw_std():
    cfg = NoiseConfig(zeta_drift_std=0.1, seed=1)
    z = np.array([draw_realization(cfg, i).zeta_offset for i in range(10_000)])
    assert abs(z.std() - 0.1) < 0.003


def test_config_validation():
    with pytest.raises(ValueError):
        NoiseConfig(lambda1=-1)
    with pytest.raises(ValueError):
        NoiseConfig(readout_flip=0.5)
    with pytest.raises(ValueError):
        NoiseConfig(shots=0)


def test_zero_rates_are_identity():
    rho = random_state(np.random.default_rng(0), 4)
    assert np.allclose(apply_decoherence_cycle(rho, 0, 0), rho)


def test_dephasing_of_plus_state():
    plus = np.full((2, 2), 0.5, dtype=complex)
    rho = plus
    for _ in range(40):
        rho = apply_decoherence_cycle(rho, 0.0, 0.01)
    assert np.isclose(2 * rho[1, 0].real, np.exp(-40 * 0.01), atol=1e-12)


def test_excited_population_decay():
    rho = np.diag([0, 1]).astype(complex)
    for _ in range(30):
        rho = apply_decoherence_cycle(rho, 0.02, 0.005)
    assert np.isclose(rho[1, 1].real, np.exp(-30 * 0.02), atol=1e-12)


def test_invalid_state_rejected():
    with pytest.raises(InvalidState):
        apply_decoherence_cycle(np.diag([0.7, 0.7]), 0.1, 0.1)


@settings(max_examples=100, deadline=None)
@given(rate, rate)
def test_kraus_complete_and_positive(l1, l2):
    ks = kraus_operators(l1, l2)
    assert np.allclose(sum(k.conj().T @ k for k in ks), np.eye(2), atol=1e-12)
    # Choi matrix of a CP map is positive semidefinite
    choi = sum(np.outer(k.reshape(-1), k.reshape(-1).conj()) for k in ks)
    assert np.linalg.eigvalsh(choi).min() > -1e-12


@settings(max_examples=50, deadline=None)
@given(rate, rate, st.integers(0, 2**32 - 1))
def test_channel_preserves_trace_and_positivity(l1, l2, seed):
    rho = random_state(np.random.default_rng(seed), 4)
    out = apply_decoherence_cycle(rho, l1, l2)
    assert abs(np.trace(out) - 1) < 1e-12
    assert np.linalg.eigvalsh(out).min() > -1e-12


def test_exact_mode_returns_probabilities():
    p = np.array([0.1, 0.2, 0.3, 0.4])
    assert np.allclose(sample_counts(p, None), p)


def test_certain_outcome():
    counts = sample_counts([1, 0, 0, 0], 500, rng=np.random.default_rng(0))
    assert counts.tolist() == [500, 0, 0, 0]


def test_binomial_frequencies():
    c = sample_counts([0.5, 0.5], 10**6, rng=np.random.default_rng(1))
    assert abs(c[0] / 10**6 - 0.5) < 0.002


def test_readout_flip_is_symmetric():
    assert np.allclose(sample_counts([1, 0], None, readout_flip=0.1), [0.9, 0.1])


def test_bad_distribution_rejected():
    with pytest.raises(BadDistribution):
        sample_counts([0.5, 0.6], None)


def test_finite_shots_need_a_stream():
    with pytest.raises(ValueError):
        sample_counts([0.5, 0.5], 10)


@pytest.mark.parametrize("lambda1, lambda2", [(0.0, 0.002), (0.002, 0.001)])
def test_phase_experiment_matches_closed_form(lambda1, lambda2):
    varphi, m = 0.3, 5000
    rng = np.random.default_rng(12)
    for n in (1, 10, 100, 400):
        for s in (0.0, np.pi / 2):
            p = phase_decay_probability(varphi, n, s, lambda1, lambda2)
            # exact channel: coherence e^{-n(lambda1/2 + lambda2)}
            q = (1 + np.exp(-n * (lambda1 / 2 + lambda2)) * np.cos(n * varphi + s)) / 2
            assert abs(p - q) < 1e-12
            if lambda1 == 0:
                closed = (1 + np.exp(-n * lambda2) * np.cos(n * varphi + s)) / 2
                assert abs(p - closed) < 1e-12
            k = rng.binomial(m, p)
            sigma = np.sqrt(q * (1 - q) / m)
            assert abs(k / m - q) < 3 * sigma + 1e-12
