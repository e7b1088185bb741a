import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from meadd.gate_algebra import (
    CZ_PARAMS,
    GateParams,
    NotExcitationPreserving,
    SingleQubitParams,
    build_single_qubit,
    build_two_qubit,
    equal_up_to_phase,
    euler_decompose,
    extract_params,
    fundamental_entangler,
    is_unitary,
    kak_compose,
    kak_decompose,
    parity_decompose,
    pauli_string,
    phased_x,
    rabi_angle,
    wrap_angle,
    zrot,
)

from .oracles import SQRT_ISWAP, X, Z, entangler_oracle, gate_oracle, su2_oracle

angle = st.floats(-np.pi, np.pi, allow_nan=False)
swap_angle = st.floats(0.0, np.pi / 2, allow_nan=False)
params = st.builds(GateParams, theta=swap_angle, zeta=angle, chi=angle, phi=angle, gamma=angle)


def _random_params(rng, theta_min=0.0):
    return GateParams(
        theta=rng.uniform(theta_min, np.pi / 2),
        zeta=rng.uniform(-np.pi, np.pi),
        chi=rng.uniform(-np.pi, np.pi),
        phi=rng.uniform(-np.pi, np.pi),
        gamma=rng.uniform(-np.pi, np.pi),
    )


def _angle_close(a, b, tol):
    return abs(wrap_angle(a - b)) < tol


# ---------------------------------------------------------------- constructors


def test_cz_parameters_build_cz():
    assert np.allclose(build_two_qubit(GateParams(phi=np.pi)), np.diag([1, 1, 1, -1]), atol=1e-12)


def test_zero_parameters_build_identity():
    assert np.allclose(build_two_qubit(GateParams()), np.eye(4), atol=1e-12)


def test_full_swap_angle_gives_antidiagonal_odd_block():
    u = build_two_qubit(GateParams(theta=np.pi / 2))
    assert np.allclose(u[1:3, 1:3], [[0, -1j], [-1j, 0]], atol=1e-12)
    assert np.allclose(np.diag(u)[[0, 3]], [1, 1], atol=1e-12)


def test_build_matches_entrywise_oracle():
    rng = np.random.default_rng(3)
    for _ in range(50):
        p = _random_params(rng)
        assert np.allclose(build_two_qubit(p), gate_oracle(p.theta, p.zeta, p.chi, p.phi, p.gamma), atol=1e-13)


def test_theta_outside_domain_rejected():
    with pytest.raises(ValueError):
        GateParams(theta=2.0)


# ---------------------------------------------------------------- extraction


def test_extract_cz_marks_chi_indefinite():
    p = extract_params(np.diag([1, 1, 1, -1]).astype(complex))
    assert p.theta == 0 and p.chi == 0 and not p.chi_defined
    assert _angle_close(p.phi, np.pi, 1e-12)
    assert abs(p.zeta) < 1e-12 and abs(p.gamma) < 1e-12


def test_extract_identity():
    p = extract_params(np.eye(4, dtype=complex))
    assert np.allclose(p.as_array(), 0, atol=1e-12)


def test_extract_round_trip_100_random():
    rng = np.random.default_rng(11)
    for _ in range(100):
        p = _random_params(rng, theta_min=0.01).canonical()
        q = extract_params(np.exp(1j * rng.uniform(0, 2 * np.pi)) * build_two_qubit(p))
        assert abs(q.theta - p.theta) < 1e-9
        for name in ("zeta", "chi", "phi", "gamma"):
            assert _angle_close(getattr(q, name), getattr(p, name), 1e-9), name


def test_extract_rejects_parity_mixing():
    with pytest.raises(NotExcitationPreserving):
        extract_params(np.kron(np.eye(2), X))


def test_canonical_branch_is_same_gate():
    p = GateParams(theta=0.2, zeta=2.5, chi=0.3, phi=0.4, gamma=0.5)
    c = p.canonical()
    assert -np.pi / 2 < c.zeta <= np.pi / 2
    assert equal_up_to_phase(build_two_qubit(c), build_two_qubit(p))


# ---------------------------------------------------------------- parity blocks


def test_parity_decompose_cz():
    d = parity_decompose(np.diag([1, 1, 1, -1]).astype(complex))
    assert np.isclose(d.even_prefactor_phase, -np.pi / 2)
    assert np.allclose(d.even_block, np.diag([1j, -1j]), atol=1e-12)
    assert np.allclose(d.odd_block, np.eye(2), atol=1e-12)


def test_parity_decompose_identity():
    d = parity_decompose(np.eye(4, dtype=complex))
    assert d.even_prefactor_phase == 0
    assert np.allclose(d.even_block, np.eye(2)) and np.allclose(d.odd_block, np.eye(2))


def test_xx_is_direct_sum_of_x():
    d = parity_decompose(pauli_string("XX"))
    assert equal_up_to_phase(d.even_block, X)
    assert np.allclose(d.odd_block, X, atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(params)
def test_parity_decomposition_reassembles_and_odd_block_is_special(p):
    u = build_two_qubit(p)
    d = parity_decompose(u)
    assert np.linalg.norm(d.reassemble() - u) < 1e-12
    assert abs(np.linalg.det(d.odd_block) - 1) < 1e-12


# ---------------------------------------------------------------- entangler / KAK


def test_entangler_zero_is_identity():
    assert np.allclose(fundamental_entangler(0, 0), np.eye(4), atol=1e-12)


def test_entangler_matches_expm_oracle():
    for t, p in [(0.3, 1.1), (np.pi / 4, 0), (-0.2, 2.5)]:
        assert np.allclose(fundamental_entangler(t, p), entangler_oracle(t, p), atol=1e-12)


def test_entangler_quarter_is_sqrt_iswap():
    assert equal_up_to_phase(fundamental_entangler(np.pi / 4, 0), SQRT_ISWAP)


def test_entangler_with_symmetric_phase_gives_cz():
    u = np.kron(zrot(-np.pi / 2), zrot(-np.pi / 2)) @ fundamental_entangler(0, np.pi)
    assert equal_up_to_phase(u, np.diag([1, 1, 1, -1]).astype(complex))


def test_kak_of_cz():
    f = kak_decompose(CZ_PARAMS)
    assert np.isclose(f.gamma_prime, np.pi / 2)
    assert f.zeta_plus == 0 and f.zeta_minus == 0
    assert np.allclose(f.entangler, (0, np.pi))
    assert equal_up_to_phase(kak_compose(f), build_two_qubit(CZ_PARAMS))


def test_kak_of_identity():
    f = kak_decompose(GateParams())
    assert np.allclose([f.pre_z_left, f.pre_z_right, f.post_z_left, f.post_z_right, *f.entangler], 0)


def test_kak_round_trip_100_random():
    rng = np.random.default_rng(5)
    for i in range(100):
        p = _random_params(rng)
        u = build_two_qubit(p)
        assert equal_up_to_phase(kak_compose(kak_decompose(p, gamma_after=bool(i % 2))), u, 1e-12)


# ---------------------------------------------------------------- single qubit


def test_pi_rotation_is_minus_i_x():
    assert np.allclose(build_single_qubit(SingleQubitParams(np.pi)), -1j * X, atol=1e-12)


def test_single_qubit_matches_oracle():
    rng = np.random.default_rng(2)
    for _ in range(20):
        mu, zeta, chi = rng.uniform(-np.pi, np.pi, 3)
        assert np.allclose(build_single_qubit(SingleQubitParams(mu, zeta, chi)), su2_oracle(mu, zeta, chi), atol=1e-12)


def test_phased_x_is_conjugated_rotation():
    assert equal_up_to_phase(phased_x(0.7, 0.4), build_single_qubit(SingleQubitParams(0.7, 0.0, -0.4)))


def test_ideal_pi_pulse_rabi_angle():
    r = build_single_qubit(SingleQubitParams(np.pi))
    assert np.isclose(np.arccos(np.real(np.trace(r)) / 2), np.pi / 2)


def test_relative_axis_composite():
    chi_half, chi_pi = 0.5, 0.2
    u = build_single_qubit(SingleQubitParams(np.pi, 0, chi_pi)) @ build_single_qubit(SingleQubitParams(-np.pi / 2, 0, chi_half))
    expected = build_single_qubit(SingleQubitParams(np.pi / 2, chi_half - chi_pi, chi_pi))
    assert equal_up_to_phase(u, expected)
    e = euler_decompose(u)
    assert np.isclose(e.mu, np.pi / 2) and np.isclose(e.zeta, chi_half - chi_pi)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.0, np.pi), st.floats(-np.pi / 2 + 1e-3, np.pi / 2), angle)
def test_euler_round_trip(mu, zeta, chi):
    u = build_single_qubit(SingleQubitParams(mu, zeta, chi))
    # chi is dropped below the 1e-9 indefiniteness threshold
    assert equal_up_to_phase(build_single_qubit(euler_decompose(u)), u, 1e-8)


def test_rabi_angle_examples():
    for z in (0.0, 0.5, np.pi):
        assert np.isclose(rabi_angle(0, z), abs(z))
    assert np.isclose(rabi_angle(0.3, 0), 0.3)
    assert np.isclose(rabi_angle(0.3, 0.4), np.arccos(np.cos(0.3) * np.cos(0.4)))


# ---------------------------------------------------------------- invariants


@settings(max_examples=200, deadline=None)
@given(params)
def test_unitary_and_parity_preserving(p):
    u = build_two_qubit(p)
    assert is_unitary(u)
    assert np.all(u[np.ix_((0, 3), (1, 2))] == 0) and np.all(u[np.ix_((1, 2), (0, 3))] == 0)
    assert abs(np.linalg.det(u[1:3, 1:3]) - 1) < 1e-12


@settings(max_examples=200, deadline=None)
@given(params)
def test_two_cycle_even_block_is_trivial(p):
    c = pauli_string("XX") @ build_two_qubit(p)
    even = (c @ c)[np.ix_((0, 3), (0, 3))]
    # trivial up to the phase e^{-i phi} shared with nothing else in the even sector
    assert np.linalg.norm(even - np.exp(-1j * p.phi) * np.eye(2)) < 1e-12


def test_cz_four_cycle_identity():
    c = pauli_string("XX") @ build_two_qubit(CZ_PARAMS)
    assert np.allclose(c @ c, -pauli_string("ZZ"), atol=1e-15)
    assert np.allclose(np.linalg.matrix_power(c, 4), np.eye(4), atol=1e-15)
    assert np.allclose(pauli_string("YY") @ build_two_qubit(CZ_PARAMS), build_two_qubit(CZ_PARAMS) @ pauli_string("XX"))


@settings(max_examples=60, deadline=None)
@given(params, st.lists(st.tuples(st.floats(0, np.pi), angle, angle), min_size=4, max_size=4), angle)
def test_global_chi_shift_leaves_outcomes_unchanged(p, rots, shift):
    def probs(delta):
        psi = np.zeros(4, dtype=complex)
        psi[0] = 1
        w = build_two_qubit(p)
        for k in range(0, 4, 2):
            a = build_single_qubit(SingleQubitParams(rots[k][0], rots[k][1], rots[k][2] + delta))
            b = build_single_qubit(SingleQubitParams(rots[k + 1][0], rots[k + 1][1], rots[k + 1][2] + delta))
            psi = w @ np.kron(a, b) @ psi
        return np.abs(psi) ** 2

    p0, p1 = probs(0.0), probs(shift)
    assert np.allclose(p0, p1, atol=1e-12)
    assert np.argmax(p0 + 1e-9 * np.arange(4)) == np.argmax(p1 + 1e-9 * np.arange(4))


def test_z_rotation_convention():
    assert np.allclose(zrot(0.3), np.diag(np.exp([-0.15j, 0.15j])))
    assert np.allclose(zrot(np.pi), -1j * Z)
