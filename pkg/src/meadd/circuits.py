"""Circuit families of the amplification protocol and its baselines.

Every family is simulated on a dense 1- or 2-qubit density matrix.  A circuit
is a preparation, a repeated cycle and a measurement; records hold per-depth
expectation values estimated either exactly (``shots=None``) or from sampled
counts.

Depth conventions:

* DD-interleaved families (controlled phase, swap, crosstalk): depth ``n``
  means ``2n`` cycles, so every circuit contains whole 2-cycles.
* Floquet, phase-method, single-qubit and decay families: depth ``n`` means
  ``n`` cycles.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .gate_algebra import (
    GateParams,
    SingleQubitParams,
    build_single_qubit,
    build_two_qubit,
    rotation_axis,
    zrot,
    xrot,
)
from .noise import (
    SHOT_STREAM,
    NoiseConfig,
    NoiseRealization,
    draw_realization,
    kraus_operators,
    noisy_pauli,
    sample_counts,
    stream,
)


class OddDepth(ValueError):
    """Cycle count that does not contain whole DD periods."""


H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
SDG = np.diag([1, -1j])
KET0 = np.array([1, 0], dtype=complex)
KET1 = np.array([0, 1], dtype=complex)
KETP = (KET0 + KET1) / np.sqrt(2)

PREPS = {
    "Plus0": np.kron(KETP, KET0),
    "ZeroPlus": np.kron(KET0, KETP),
    "One0": np.kron(KET1, KET0),
    "Zero1": np.kron(KET0, KET1),
}

# basis change applied before a computational-basis readout
_SQ_BASIS = {"X": H, "Y": H @ SDG, "Z": np.eye(2, dtype=complex)}
XY_SETTINGS = ("XX", "XY", "YX", "YY")


def _odd_basis_change(u2: np.ndarray) -> np.ndarray:
    b = np.eye(4, dtype=complex)
    b[np.ix_((1, 2), (1, 2))] = u2
    return b


# odd-parity Bell measurements map |+>_odd, |+i>_odd onto |01>
ODD_BASES = {"Zodd": np.eye(4, dtype=complex), "Xodd": _odd_basis_change(H), "Yodd": _odd_basis_change(H @ SDG)}

ROBUST_DD = ("XX",)
COMPLEMENTARY_DD = ("YX",)
XY4_DD = ("XX", "YY")
XY4_COMPLEMENTARY_DD = ("YX", "XY")


@dataclass
class DepthRecord:
    """Measured quantities for one depth of one circuit family.

    ``values`` maps (preparation, observable) to a complex number: the
    reduced off-diagonal element <X> + i<Y> of one qubit, or a real
    odd-parity Bloch component stored with zero imaginary part.
    """

    depth: int
    values: dict = field(default_factory=dict)
    counts: dict = field(default_factory=dict)
    parity_postselected_fraction: float = 1.0


# --------------------------------------------------------------------- engine


def _superop(u: np.ndarray) -> np.ndarray:
    return np.kron(u, u.conj())


def _channel_superop(nq: int, lambda1: float, lambda2: float) -> np.ndarray:
    k1 = kraus_operators(lambda1, lambda2)
    single = sum(np.kron(k, k.conj()) for k in k1)
    if nq == 1:
        return single
    # vec(rho) for rho on (L, R) is indexed (l, r, l', r'); reorder to kron form
    s = np.kron(single, single).reshape([2] * 8)
    # single (x) single acts on (l, l', r, r') -> permute to (l, r, l', r')
    s = s.transpose(0, 2, 1, 3, 4, 6, 5, 7).reshape(16, 16)
    return s


def evolve(rho: np.ndarray, period: list[np.ndarray], reps: int, lambda1: float = 0.0, lambda2: float = 0.0) -> np.ndarray:
    """Apply ``period`` (cycle unitaries in time order) ``reps`` times.

    With decoherence, the per-qubit channel acts after every cycle.
    """
    d = rho.shape[0]
    if lambda1 == 0 and lambda2 == 0:
        u = np.eye(d, dtype=complex)
        for c in period:
            u = c @ u
        u = np.linalg.matrix_power(u, reps)
        return u @ rho @ u.conj().T
    ch = _channel_superop(int(round(np.log2(d))), lambda1, lambda2)
    s = np.eye(d * d, dtype=complex)
    for c in period:
        s = ch @ _superop(c) @ s
    s = np.linalg.matrix_power(s, reps)
    return (s @ rho.reshape(-1)).reshape(d, d)


def _probs(rho: np.ndarray, basis: np.ndarray) -> np.ndarray:
    p = np.real(np.diag(basis @ rho @ basis.conj().T))
    p = np.clip(p, 0, None)
    return p / p.sum()


def _pure(psi: np.ndarray) -> np.ndarray:
    return np.outer(psi, psi.conj())


def _measure(probs: np.ndarray, noise: NoiseConfig, rng_key: tuple, shots: int | None = None):
    shots = noise.shots if shots is None else shots
    rng = stream(noise.seed, SHOT_STREAM, *rng_key) if shots is not None else None
    out = sample_counts(probs, shots, noise.readout_flip, rng)
    return np.asarray(out, dtype=float)


def _dd_layer(label: str, noise: NoiseConfig) -> np.ndarray:
    return np.kron(noisy_pauli(label[0], noise.mw_error[0]), noisy_pauli(label[1], noise.mw_error[1]))


def _gate_instance(gate: GateParams, real: NoiseRealization) -> GateParams:
    return replace(gate, zeta=gate.zeta + real.zeta_offset, gamma=gate.gamma + real.gamma_offset)


def _drift(real: NoiseRealization) -> np.ndarray:
    a, b = real.sq_phase_offsets
    return np.kron(zrot(a), zrot(b))


def _instance(noise: NoiseConfig, realization: int, depth: int) -> NoiseRealization:
    return draw_realization(noise, (realization, depth))


def two_qubit_cycles(
    gate: GateParams,
    noise: NoiseConfig,
    real: NoiseRealization,
    dd: tuple[str, ...] | None,
    n_cycles: int,
    phase_tracking: float = 0.0,
    pre_z: tuple[float, float] = (0.0, 0.0),
) -> tuple[list[np.ndarray], int]:
    """Cycle unitaries and repetition count for ``n_cycles`` cycles.

    Cycle k is D_k (Z(z_L) x Z(z_R)) Z_drift W_k where W_k carries
    chi + k * phase_tracking.  Without tracking the list is one DD period.
    """
    g = _gate_instance(gate, real)
    zpre = np.kron(zrot(pre_z[0]), zrot(pre_z[1]))
    base = zpre @ _drift(real)
    period = len(dd) if dd else 1
    if n_cycles % period:
        raise OddDepth(f"{n_cycles} cycles is not a multiple of the DD period {period}")
    layers = [_dd_layer(lbl, noise) for lbl in dd] if dd else [np.eye(4, dtype=complex)]
    if phase_tracking:
        cycles = [
            layers[k % period] @ base @ build_two_qubit(replace(g, chi=g.chi + k * phase_tracking))
            for k in range(n_cycles)
        ]
        return cycles, 1
    w = build_two_qubit(g)
    return [layers[k] @ base @ w for k in range(period)], n_cycles // period


def _xy_values(rho: np.ndarray, noise: NoiseConfig, key: tuple, shots: int | None = None, flip: bool = False):
    """Per-qubit <X> + i<Y> from the four XY settings, pooling counts per qubit."""
    tallies = {"left": {"X": np.zeros(2), "Y": np.zeros(2)}, "right": {"X": np.zeros(2), "Y": np.zeros(2)}}
    counts = {}
    pre = np.kron(np.array([[0, 1], [1, 0]]), np.array([[0, 1], [1, 0]])) if flip else np.eye(4)
    for si, setting in enumerate(XY_SETTINGS):
        basis = pre @ np.kron(_SQ_BASIS[setting[0]], _SQ_BASIS[setting[1]])
        c = _measure(_probs(rho, basis), noise, key + (si, int(flip)), shots)
        if flip:
            c = c[::-1]
        counts[setting] = c
        m = c.reshape(2, 2)
        tallies["left"][setting[0]] += m.sum(axis=1)
        tallies["right"][setting[1]] += m.sum(axis=0)
    vals = {}
    for q, t in tallies.items():
        ex = (t["X"][0] - t["X"][1]) / t["X"].sum()
        ey = (t["Y"][0] - t["Y"][1]) / t["Y"].sum()
        vals[q] = ex + 1j * ey
    return vals, counts


def odd_matrix(record: DepthRecord) -> np.ndarray:
    """2x2 odd-block matrix assembled from XY-per-qubit values.

    Column 0 comes from |0+> (drives |01>), column 1 from |+0> (drives |10>);
    the right qubit reports row |01>, the left qubit row |10>.
    """
    v = record.values
    return np.array(
        [
            [v[("ZeroPlus", "right")], v[("Plus0", "right")]],
            [v[("ZeroPlus", "left")], v[("Plus0", "left")]],
        ]
    )


def _xy_family(period_for, noise: NoiseConfig, depths, realization: int, family_id: int, shots=None, flip=False):
    records = []
    for n in depths:
        period, reps = period_for(n)
        rec = DepthRecord(depth=int(n))
        for pi_, prep in enumerate(("ZeroPlus", "Plus0")):
            rho = evolve(_pure(PREPS[prep]), period, reps, noise.lambda1, noise.lambda2)
            key = (family_id, realization, int(n), pi_)
            vals, counts = _xy_values(rho, noise, key, shots, flip)
            for q, val in vals.items():
                rec.values[(prep, q)] = val
            for s, c in counts.items():
                rec.counts[(prep, s)] = c
        records.append(rec)
    return records


# --------------------------------------------------------------- two qubit


def run_cphase_family(
    gate: GateParams,
    noise: NoiseConfig,
    depths,
    dd: tuple[str, ...] = ROBUST_DD,
    realization: int = 0,
) -> list[DepthRecord]:
    """Controlled-phase circuits: |0+> and |+0> through (D W)^{2n}, XY readout.

    ``odd_matrix`` of each record estimates e^{i n phi} C_odd^{2n}.
    """

    def period_for(n):
        real = _instance(noise, realization, n)
        return two_qubit_cycles(gate, noise, real, dd, 2 * int(n))

    return _xy_family(period_for, noise, depths, realization, 1)


def run_floquet_family(gate: GateParams, noise: NoiseConfig, depths, realization: int = 0) -> list[DepthRecord]:
    """Same preparation and readout as the controlled-phase family, without DD.

    ``odd_matrix`` estimates e^{-i n gamma} W_odd^n.
    """

    def period_for(n):
        real = _instance(noise, realization, n)
        return two_qubit_cycles(gate, noise, real, None, int(n))

    return _xy_family(period_for, noise, depths, realization, 2)


def _odd_bloch(rho: np.ndarray, prep: str, noise: NoiseConfig, key: tuple, rec: DepthRecord, shots=None) -> None:
    kept = total = 0.0
    for bi, (name, basis) in enumerate(ODD_BASES.items()):
        c = _measure(_probs(rho, basis), noise, key + (bi,), shots)
        rec.counts[(prep, name)] = c
        odd = c[1] + c[2]
        rec.values[(prep, name)] = complex((c[1] - c[2]) / odd if odd > 0 else 0.0)
        kept += odd
        total += c.sum()
    p = _probs(rho, ODD_BASES["Zodd"])
    rec.values[(prep, "populations")] = p
    rec.parity_postselected_fraction = float(kept / total) if total else 0.0


def _swap_records(gate, noise, depths, dd, realization, family_id, phase_tracking, prep="One0"):
    records = []
    for n in depths:
        real = _instance(noise, realization, n)
        period, reps = two_qubit_cycles(gate, noise, real, dd, 2 * int(n), phase_tracking)
        rho = evolve(_pure(PREPS[prep]), period, reps, noise.lambda1, noise.lambda2)
        rec = DepthRecord(depth=int(n))
        _odd_bloch(rho, prep, noise, (family_id, realization, int(n)), rec)
        records.append(rec)
    return records


def run_swap_family(
    gate: GateParams,
    noise: NoiseConfig,
    depths,
    axis: str = "X",
    realization: int = 0,
    phase_tracking: float = 0.0,
) -> list[DepthRecord]:
    """Swap-angle circuits from |10> with D = X(x)X (``axis="X"``) or Y(x)X (``axis="Y"``).

    Records carry postselected odd-parity Bloch components under the keys
    ("One0", "Xodd" | "Yodd" | "Zodd").  ``phase_tracking`` advances chi by the
    given angle every cycle, emulating a drive frame that follows idle phases.
    """
    dd = {"X": ROBUST_DD, "Y": COMPLEMENTARY_DD}[axis]
    return _swap_records(gate, noise, depths, dd, realization, 3 if axis == "X" else 4, phase_tracking)


def crosstalk_gate(theta_xtalk: float, chi: float = 0.0, idle_zeta: float = 0.0) -> GateParams:
    """Integrated stray exchange coupling over one cycle as a gate."""
    return GateParams(theta=theta_xtalk, zeta=idle_zeta, chi=chi)


def run_crosstalk_family(
    theta_xtalk: float,
    chi: float,
    noise: NoiseConfig,
    depths,
    idle_zeta: float = 0.0,
    realization: int = 0,
    phase_tracking: float = 0.0,
) -> dict[str, list[DepthRecord]]:
    """Stray-coupling circuits with XY4 on both qubits for both axes."""
    gate = crosstalk_gate(theta_xtalk, chi, idle_zeta)
    return {
        "X": _swap_records(gate, noise, depths, XY4_DD, realization, 5, phase_tracking),
        "Y": _swap_records(gate, noise, depths, XY4_COMPLEMENTARY_DD, realization, 6, phase_tracking),
    }


# ------------------------------------------------------------ baselines


def run_baseline_unitary_tomography(
    gate: GateParams, noise: NoiseConfig, realization: int = 0, shots_per_circuit: int | None = None
) -> DepthRecord:
    """Depth-1 odd-block estimate from 8 circuits, each run plain and with flipped readout."""
    shots = shots_per_circuit if shots_per_circuit is not None else noise.shots

    def period_for(n):
        real = _instance(noise, realization, n)
        return two_qubit_cycles(gate, noise, real, None, 1)

    plain = _xy_family(period_for, noise, [1], realization, 7, shots, flip=False)[0]
    flipped = _xy_family(period_for, noise, [1], realization, 7, shots, flip=True)[0]
    rec = DepthRecord(depth=1)
    for k in plain.values:
        rec.values[k] = (plain.values[k] + flipped.values[k]) / 2
    for k in plain.counts:
        rec.counts[k + ("plain",)] = plain.counts[k]
        rec.counts[k + ("flipped",)] = flipped.counts[k]
    return rec


def run_baseline_phase_method(
    gate: GateParams,
    noise: NoiseConfig,
    depths=(1, 2, 4, 8),
    z_phases=(0.0, np.pi),
    realization: int = 0,
    shots_per_circuit: int | None = None,
) -> dict[float, list[DepthRecord]]:
    """Repeated (Z(z) x I) W cycles; odd-block matrices per depth and z phase."""
    shots = shots_per_circuit if shots_per_circuit is not None else noise.shots
    out = {}
    for zi, z in enumerate(z_phases):

        def period_for(n, z=z):
            real = _instance(noise, realization, n)
            return two_qubit_cycles(gate, noise, real, None, int(n), pre_z=(z, 0.0))

        out[float(z)] = _xy_family(period_for, noise, depths, realization, 8 + zi, shots)
    return out


# ------------------------------------------------------------ single qubit


def phi_state(cycle: np.ndarray, tau: float) -> np.ndarray:
    """|Phi(tau)> = (e^{-i tau/2}|s+> + e^{i tau/2}|s->)/sqrt(2) for the cycle's rotation axis.

    Falls back to the Z axis when the cycle is proportional to the identity.
    """
    omega, axis = rotation_axis(cycle)
    if np.sin(omega) < 1e-12:
        axis = np.array([0.0, 0.0, 1.0])
    sig = axis[0] * np.array([[0, 1], [1, 0]]) + axis[1] * np.array([[0, -1j], [1j, 0]]) + axis[2] * np.diag([1, -1])
    w, v = np.linalg.eigh(sig)
    sp, sm = v[:, 1], v[:, 0]
    # fix relative phase so that Phi(0) is a reproducible state
    sp = sp * np.exp(-1j * np.angle(sp[np.argmax(abs(sp))]))
    sm = sm * np.exp(-1j * np.angle(sm[np.argmax(abs(sm))]))
    return (np.exp(-0.5j * tau) * sp + np.exp(0.5j * tau) * sm) / np.sqrt(2)


def _sq_records(cycle_for, reference_for, noise, depths, z_offsets, realization, family_id):
    out = {}
    for zi, z in enumerate(z_offsets):
        ref = reference_for(z)
        phi0, phi90 = phi_state(ref, 0.0), phi_state(ref, np.pi / 2)
        recs = []
        for n in depths:
            real = _instance(noise, realization, n)
            period = cycle_for(z, real)
            rho = evolve(_pure(phi0), period, int(n), noise.lambda1, noise.lambda2)
            rec = DepthRecord(depth=int(n))
            for ti, (name, target) in enumerate((("P0", phi0), ("Ppi2", phi90))):
                # projective measurement onto target vs its orthogonal complement
                perp = np.array([-np.conj(target[1]), np.conj(target[0])])
                basis = np.array([target.conj(), perp.conj()])
                c = _measure(_probs(rho, basis), noise, (family_id, realization, int(n), zi, ti))
                rec.counts[("Phi0", name)] = c
                rec.values[("Phi0", name)] = complex(c[0] / c.sum())
            rec.values[("Phi0", "signal")] = (2 * rec.values[("Phi0", "P0")].real - 1) + 1j * (
                2 * rec.values[("Phi0", "Ppi2")].real - 1
            )
            recs.append(rec)
        out[float(z)] = recs
    return out


DEFAULT_Z_OFFSETS = (0.0, np.pi / 2, np.pi, 3 * np.pi / 2)


def run_single_qubit_family(
    gate: SingleQubitParams,
    noise: NoiseConfig,
    depths,
    z_offsets=DEFAULT_Z_OFFSETS,
    realization: int = 0,
    reference: SingleQubitParams | None = None,
) -> dict[float, list[DepthRecord]]:
    """Repeated Z(z) R(mu, zeta, chi) cycles prepared in |Phi(0)> and read out on |Phi(0)>, |Phi(pi/2)>.

    The eigenbasis used for preparation comes from ``reference`` (defaults to
    the gate itself, i.e. ideal state preparation).
    """
    r = build_single_qubit(gate)
    ref_gate = build_single_qubit(reference) if reference is not None else r

    def cycle_for(z, real):
        return [zrot(z) @ zrot(real.sq_phase_offsets[0]) @ r]

    return _sq_records(cycle_for, lambda z: zrot(z) @ ref_gate, noise, depths, z_offsets, realization, 10)


def relative_axis_cycle(x_pi: SingleQubitParams, x_half: SingleQubitParams, z: float = 0.0, drift: float = 0.0) -> np.ndarray:
    """Z(z) [pad] X_pi [pad] X_half with each padding accumulating a Z(drift) phase."""
    pad = zrot(drift)
    return zrot(z) @ pad @ build_single_qubit(x_pi) @ pad @ build_single_qubit(x_half)


def run_relative_axis_family(
    x_pi: SingleQubitParams,
    x_half: SingleQubitParams,
    noise: NoiseConfig,
    depths,
    z_offsets=DEFAULT_Z_OFFSETS,
    realization: int = 0,
    reference: tuple[SingleQubitParams, SingleQubitParams] | None = None,
) -> dict[float, list[DepthRecord]]:
    """Interleaved X(-pi/2), X(pi) cycles; the composite has zeta = chi_half - chi_pi."""

    def cycle_for(z, real):
        return [relative_axis_cycle(x_pi, x_half, z, real.sq_phase_offsets[0])]

    ref = reference or (x_pi, x_half)
    return _sq_records(cycle_for, lambda z: relative_axis_cycle(*ref, z), noise, depths, z_offsets, realization, 11)


# ------------------------------------------------------------ decay studies


def phase_decay_probability(varphi: float, n: int, s: float, lambda1: float, lambda2: float) -> float:
    """P(+1) for |+>, n phase gates Z(varphi) with decoherence, read out on Z(-s)|+>.

    Equals (1 + e^{-n(lambda1/2 + lambda2)} cos(n varphi + s)) / 2.
    """
    rho = evolve(_pure(KETP), [zrot(varphi)], int(n), lambda1, lambda2)
    v = zrot(-s) @ KETP
    return float(np.real(v.conj() @ rho @ v))


def swap_decay_probabilities(theta: float, n: int, lambda1: float, lambda2: float) -> dict[str, float]:
    """Postselected odd-parity Bloch components after W(theta)^n from |01>, plus survival."""
    w = build_two_qubit(GateParams(theta=theta))
    rho = evolve(_pure(PREPS["Zero1"]), [w], int(n), lambda1, lambda2)
    odd = rho[np.ix_((1, 2), (1, 2))]
    surv = float(np.real(np.trace(odd)))
    return {
        "survival": surv,
        "z": float(np.real(odd[0, 0] - odd[1, 1]) / surv),
        "y": float(2 * np.imag(odd[1, 0]) / surv),
        "x": float(2 * np.real(odd[1, 0]) / surv),
    }
