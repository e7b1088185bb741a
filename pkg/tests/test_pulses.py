import numpy as np
import pytest
from scipy.integrate import quad

from meadd.gate_algebra import equal_up_to_phase, xrot
from meadd.pulses import (
    PulseEnvelope,
    StepTooLarge,
    drag_envelope,
    integrate_three_level,
    leakage_scan,
    perturbative_leakage,
    power_law_exponent,
    propagator,
    shifted_cosine,
    shifted_cosine_derivative,
)

from .oracles import LEAKAGE_DRAG, LEAKAGE_ETA_T, LEAKAGE_PLAIN


def test_envelope_area_and_support():
    assert np.isclose(quad(lambda t: float(shifted_cosine(t)), -0.5, 0.5)[0], 0.5)
    assert shifted_cosine(0.6) == 0 and shifted_cosine_derivative(-0.7) == 0


def test_derivative_matches_finite_difference():
    t, h = 0.13, 1e-6
    fd = (shifted_cosine(t + h) - shifted_cosine(t - h)) / (2 * h)
    assert np.isclose(shifted_cosine_derivative(t), fd, rtol=1e-8)


def test_qubit_block_is_the_target_rotation():
    # without the third level the amplitude mu gives X(mu)
    for mu in (np.pi / 2, np.pi):
        u = propagator(PulseEnvelope(mu), 20.0, 1000, levels=2)
        assert equal_up_to_phase(u, xrot(mu), 1e-10)


def test_leakage_matches_ode_oracle():
    assert np.allclose(leakage_scan(LEAKAGE_ETA_T), LEAKAGE_PLAIN, rtol=1e-6)
    assert np.allclose(leakage_scan(LEAKAGE_ETA_T, drag=True), LEAKAGE_DRAG, rtol=1e-4, atol=1e-10)


def test_step_halving_converges():
    p = PulseEnvelope(np.pi)
    a = integrate_three_level(p, 20.0, 2000).propagator
    b = integrate_three_level(p, 20.0, 4000).propagator
    assert np.abs(a - b).max() < 1e-8


def test_norm_drift_is_rejected(monkeypatch):
    import meadd.pulses as pulses

    exact = pulses._expm_antihermitian
    monkeypatch.setattr(pulses, "_expm_antihermitian", lambda a: (1 + 1e-6) * exact(a))
    with pytest.raises(StepTooLarge):
        integrate_three_level(PulseEnvelope(np.pi), 20.0, 50)


def test_coarse_steps_stay_normalised():
    res = integrate_three_level(PulseEnvelope(np.pi), 400.0, 3)
    assert np.allclose(res.propagator.conj().T @ res.propagator, np.eye(3), atol=1e-12)


def test_bad_parameters():
    with pytest.raises(ValueError):
        PulseEnvelope(1.0, duration=0)
    with pytest.raises(ValueError):
        drag_envelope(PulseEnvelope(1.0), 0)


def test_power_law_exponent_of_plain_pulse():
    assert abs(power_law_exponent(LEAKAGE_ETA_T, leakage_scan(LEAKAGE_ETA_T)) + 3) < 0.3


def test_drag_suppresses_leakage():
    ratio = leakage_scan(LEAKAGE_ETA_T, drag=True) / leakage_scan(LEAKAGE_ETA_T)
    assert ratio.max() < 0.2


@pytest.mark.parametrize("mu", [0.05, 0.1])
def test_perturbative_leakage_for_weak_pulses(mu):
    p = PulseEnvelope(mu)
    exact = integrate_three_level(p, 20.0)
    assert abs(perturbative_leakage(p, 20.0) / exact.leakage_amplitude - 1) < 1e-2
    assert abs(perturbative_leakage(p, 20.0, start=1) / exact.from_excited[2] - 1) < 1e-2


def test_power_law_exponent_helper():
    x = np.array([1.0, 2.0, 4.0])
    assert np.isclose(power_law_exponent(x, 3 * x**-2.5), -2.5)
