import numpy as np
import pytest

from meadd.circuits import (
    OddDepth,
    odd_matrix,
    run_baseline_phase_method,
    run_baseline_unitary_tomography,
    run_cphase_family,
    run_crosstalk_family,
    run_floquet_family,
    run_relative_axis_family,
    run_single_qubit_family,
    run_swap_family,
    two_qubit_cycles,
)
from meadd.estimation import bloch_series, estimate_theta_chi, estimate_theta_tomography, phase_method_rabi
from meadd.gate_algebra import CZ_PARAMS, GateParams, SingleQubitParams, build_single_qubit, extract_params, wrap_angle, zrot
from meadd.noise import NoiseConfig, NoiseRealization

from .oracles import X, Y, gate_oracle, pp, propagate_xy

EXACT = NoiseConfig()
KET0 = np.array([1, 0], dtype=complex)
PLUS = np.array([1, 1], dtype=complex) / np.sqrt(2)


def _random_params(rng, theta_max=np.pi / 2):
    return GateParams(rng.uniform(0, theta_max), *rng.uniform(-np.pi, np.pi, 4))


def _oracle_odd_matrix(p, cycles, reps):
    cols = []
    for prep in (np.kron(KET0, PLUS), np.kron(PLUS, KET0)):
        left, right = propagate_xy(cycles, prep, reps)
        cols.append([right, left])
    return np.array(cols).T


# ------------------------------------------------------------ controlled phase


def test_cphase_ideal_cz_det_is_one():
    rec = run_cphase_family(CZ_PARAMS, EXACT, [1])[0]
    assert np.isclose(np.linalg.det(odd_matrix(rec)), 1, atol=1e-12)


def test_cphase_matches_dense_oracle_random_gates():
    rng = np.random.default_rng(0)
    for _ in range(20):
        p = _random_params(rng)
        w = gate_oracle(*p.as_array())
        for n in (1, 2, 5):
            m = odd_matrix(run_cphase_family(p, EXACT, [n])[0])
            assert np.allclose(m, _oracle_odd_matrix(p, [pp("XX") @ w], 2 * n), atol=1e-12)
            c_odd = (pp("XX") @ w)[1:3, 1:3]
            assert np.allclose(m, np.exp(1j * n * p.phi) * np.linalg.matrix_power(c_odd, 2 * n), atol=1e-12)


def test_cphase_det_builds_up_linearly():
    phi = np.pi - 0.01
    recs = run_cphase_family(GateParams(phi=phi), EXACT, range(2, 15, 2))
    for r in recs:
        assert abs(wrap_angle(np.angle(np.linalg.det(odd_matrix(r))) - 2 * r.depth * phi)) < 1e-12


def test_xy4_layers_need_even_cycle_count():
    with pytest.raises(OddDepth):
        two_qubit_cycles(CZ_PARAMS, EXACT, NoiseRealization(), ("XX", "YY"), 3)


# ------------------------------------------------------------ swap family


def test_identity_gate_stays_in_one_zero():
    for r in run_swap_family(GateParams(), EXACT, [1, 3, 8]):
        assert np.isclose(r.values[("One0", "Zodd")].real, -1)


def test_swap_family_matches_dense_oracle():
    rng = np.random.default_rng(1)
    for axis, dd in (("X", pp("XX")), ("Y", pp("YX"))):
        for _ in range(10):
            p = _random_params(rng)
            c = dd @ gate_oracle(*p.as_array())
            for n in (1, 4):
                psi = np.linalg.matrix_power(c, 2 * n)[:, 2]
                a01, a10 = psi[1], psi[2]
                expect = (2 * (a10 * np.conj(a01)).real, 2 * (a10 * np.conj(a01)).imag, abs(a01) ** 2 - abs(a10) ** 2)
                r = run_swap_family(p, EXACT, [n], axis)[0]
                got = [r.values[("One0", k)].real for k in ("Xodd", "Yodd", "Zodd")]
                assert np.allclose(got, expect, atol=1e-12)
                assert np.isclose(r.parity_postselected_fraction, 1.0)


def test_small_swap_angle_rotates_at_four_theta_cos_chi():
    theta, chi = 0.002, 0.7
    p = GateParams(theta=theta, chi=chi)
    res = estimate_theta_chi(run_swap_family(p, EXACT, range(1, 9)), run_swap_family(p, EXACT, range(1, 9), "Y"))
    assert abs(abs(res.estimates["a_x"]) - 4 * theta * np.cos(chi)) < 1e-8
    assert abs(abs(res.estimates["a_y"]) - 4 * theta * np.sin(chi)) < 1e-8


def test_amplitude_damping_leaks_to_even_parity():
    lam1 = 0.01
    for r in run_swap_family(GateParams(theta=0.05), NoiseConfig(lambda1=lam1), [1, 5, 10]):
        # one excitation over 2n cycles; X(x)X turns leaked |00> into |11>, which can
        # decay back into odd parity, a relative correction of about -n * lambda1
        leak, analytic = 1 - r.parity_postselected_fraction, 1 - np.exp(-2 * r.depth * lam1)
        assert abs(leak / analytic - 1) < 1.1 * r.depth * lam1
    for r in run_swap_family(GateParams(theta=0.05), EXACT, [1, 5]):
        assert r.parity_postselected_fraction == 1.0


# ------------------------------------------------------------ Floquet


def test_floquet_cz_is_identity():
    for r in run_floquet_family(CZ_PARAMS, EXACT, [1, 2, 7]):
        assert np.allclose(odd_matrix(r), np.eye(2), atol=1e-12)


def test_floquet_gamma_slope():
    recs = run_floquet_family(GateParams(gamma=0.05, phi=np.pi), EXACT, range(1, 9))
    angles = np.unwrap([np.angle(np.linalg.det(odd_matrix(r))) for r in recs])
    assert np.allclose(np.diff(angles), -2 * 0.05, atol=1e-12)


def test_floquet_zeta_phases():
    for r in run_floquet_family(GateParams(zeta=0.1), EXACT, [1, 3, 6]):
        n = r.depth
        assert np.allclose(odd_matrix(r), np.diag([np.exp(-1j * n * 0.1), np.exp(1j * n * 0.1)]), atol=1e-12)


def test_floquet_matches_matrix_power():
    rng = np.random.default_rng(2)
    for _ in range(10):
        p = _random_params(rng)
        w = gate_oracle(*p.as_array())
        for n in (1, 3):
            expect = np.exp(-1j * n * p.gamma) * np.linalg.matrix_power(w[1:3, 1:3], n)
            assert np.allclose(odd_matrix(run_floquet_family(p, EXACT, [n])[0]), expect, atol=1e-12)


# ------------------------------------------------------------ single qubit


def _signal(rec):
    return rec.values[("Phi0", "signal")]


def test_ideal_pi_pulse_period_two():
    recs = run_single_qubit_family(SingleQubitParams(np.pi), EXACT, range(1, 7), z_offsets=[0.0])[0.0]
    p0 = [r.values[("Phi0", "P0")].real for r in recs]
    assert np.allclose(p0[::2], p0[0]) and np.allclose(p0[1::2], p0[1])
    assert np.allclose(np.diff([np.angle(_signal(r)) for r in recs]) % (2 * np.pi), np.pi)


def test_identity_gate_keeps_p0_one():
    recs = run_single_qubit_family(SingleQubitParams(0.0), EXACT, range(1, 6), z_offsets=[0.0])[0.0]
    assert np.allclose([r.values[("Phi0", "P0")].real for r in recs], 1.0)


def test_single_qubit_signal_rotates_by_twice_rabi_angle():
    g = SingleQubitParams(1.3, 0.2, 0.4)
    for z in (0.0, 0.7):
        recs = run_single_qubit_family(g, EXACT, range(1, 6), z_offsets=[z])[z]
        s = np.array([_signal(r) for r in recs])
        assert np.allclose(np.abs(s), 1, atol=1e-12)
        omega = np.arccos(np.real(np.trace(zrot(z) @ build_single_qubit(g))) / 2)
        step = np.angle(s[1:] / s[:-1])
        assert np.allclose(np.abs(step), 2 * omega, atol=1e-12) or np.allclose(np.abs(step), 2 * np.pi - 2 * omega, atol=1e-12)


def test_relative_axis_equal_phases_give_flat_signal():
    recs = run_relative_axis_family(SingleQubitParams(np.pi, 0, 0.3), SingleQubitParams(-np.pi / 2, 0, 0.3), EXACT, range(1, 6), z_offsets=[0.0])
    s = np.array([_signal(r) for r in recs[0.0]])
    # composite is X(pi/2) with zeta = 0, so the signal advances by a fixed quarter turn
    assert np.allclose(np.abs(np.angle(s[1:] / s[:-1])), np.pi / 2, atol=1e-12)


# ------------------------------------------------------------ crosstalk


def test_no_crosstalk_no_transfer():
    fam = run_crosstalk_family(0.0, 0.3, EXACT, [10, 50, 100])
    for recs in fam.values():
        assert np.allclose([r.values[("One0", "Zodd")].real for r in recs], -1, atol=1e-12)


def test_crosstalk_oscillation_visible_by_depth_100():
    fam = run_crosstalk_family(4e-3, 0.0, EXACT, range(0, 101, 10))
    _, b = bloch_series(fam["X"])
    # about 1.6 rad of rotation by depth 100
    assert b[0, 2] < -0.999 and b[:, 2].max() > -0.1


# ------------------------------------------------------------ baselines


def test_tomography_recovers_cz():
    p = extract_params(np.pad(odd_matrix(run_baseline_unitary_tomography(CZ_PARAMS, EXACT)), 1))
    assert p.theta == 0
    assert estimate_theta_tomography(run_baseline_unitary_tomography(CZ_PARAMS, EXACT)) == 0


def test_tomography_exact_theta():
    assert abs(estimate_theta_tomography(run_baseline_unitary_tomography(GateParams(theta=0.01), EXACT)) - 0.01) < 1e-12


def test_tomography_shot_noise_matches_binomial_propagation():
    gate = GateParams(theta=0.01, chi=0.3, phi=np.pi)
    shots = 10_000
    est = [estimate_theta_tomography(run_baseline_unitary_tomography(gate, NoiseConfig(shots=shots, seed=3), realization=r)) for r in range(400)]
    # each off-diagonal component pools 4 * shots outcomes; theta-hat averages two independent moduli
    predicted = 1 / np.sqrt(4 * shots) / np.sqrt(2)
    assert abs(np.std(est) / predicted - 1) < 0.15


def test_phase_method_eigenphases_match_dense_oracle():
    rng = np.random.default_rng(4)
    for _ in range(10):
        p = _random_params(rng, theta_max=0.05)
        w = gate_oracle(*p.as_array())
        recs = run_baseline_phase_method(p, EXACT)
        for z, rz in recs.items():
            cycle = (np.kron(zrot(z), np.eye(2)) @ w)[1:3, 1:3]
            lam = np.linalg.eigvals(cycle)
            u = abs(wrap_angle(np.angle(lam[0]) - np.angle(lam[1])))
            assert abs(phase_method_rabi(rz) - u) < 1e-12
