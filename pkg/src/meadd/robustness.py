"""Adjoint-representation analysis of DD-interleaved gate cycles.

The 15 two-qubit Pauli generators split into the invariant triple
{XX, YY, ZZ} and symmetric / antisymmetric combinations of the pairs
(IX, YZ), (IY, ZX), (IZ, XY) under qubit exchange.  Excitation-preserving
gates composed with X(x)X-type DD layers act block-diagonally on these
sectors, which makes first-order error cancellation a question about
eigenvalues of two 6x6 orthogonal matrices.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.linalg import null_space

from .gate_algebra import GateParams, build_two_qubit, pauli_string
from .noise import noisy_pauli

PAIR_LABELS = ("IX", "YZ", "IY", "ZX", "IZ", "XY")
INVARIANT_LABELS = ("XX", "YY", "ZZ")
_SYM_SIGNS = (1, -1, -1, 1, 1, 1)
_ANTI_SIGNS = (1, -1, -1, 1, 1, -1)
SINGLE_QUBIT_DIRECTIONS = ("IX", "IY", "IZ", "XI", "YI", "ZI")
TRIVIAL_TOL = 1e-9
MAX_CANCEL_CYCLES = 64
DD_LAYERS = {"XX": ("XX",), "YX": ("YX",), "XY4": ("XX", "YY"), "XY4c": ("YX", "XY"), "none": ("II",)}


class Symmetry(str, Enum):
    symmetric = "symmetric"
    antisymmetric = "antisymmetric"
    invariant = "invariant"


@dataclass(frozen=True)
class PauliBasisElement:
    label: str
    symmetry: Symmetry

    @property
    def matrix(self) -> np.ndarray:
        if self.symmetry is Symmetry.invariant:
            return pauli_string(self.label)
        k = PAIR_LABELS.index(self.label)
        swapped = pauli_string(self.label[::-1])
        if self.symmetry is Symmetry.symmetric:
            return _SYM_SIGNS[k] * (pauli_string(self.label) + swapped) / np.sqrt(2)
        return _ANTI_SIGNS[k] * (pauli_string(self.label) - swapped) / np.sqrt(2)


INVARIANT_BASIS = tuple(PauliBasisElement(p, Symmetry.invariant) for p in INVARIANT_LABELS)
SYMMETRIC_BASIS = tuple(PauliBasisElement(p, Symmetry.symmetric) for p in PAIR_LABELS)
ANTISYMMETRIC_BASIS = tuple(PauliBasisElement(p, Symmetry.antisymmetric) for p in PAIR_LABELS)
FULL_BASIS = INVARIANT_BASIS + SYMMETRIC_BASIS + ANTISYMMETRIC_BASIS


def adjoint_matrix(u: np.ndarray, basis=FULL_BASIS) -> np.ndarray:
    """Ad[i, j] = Re Tr(b_i u b_j u^dag) / 4 in the given basis."""
    mats = [b.matrix for b in basis]
    out = np.zeros((len(mats), len(mats)))
    for j, bj in enumerate(mats):
        img = u @ bj @ u.conj().T
        for i, bi in enumerate(mats):
            out[i, j] = np.real(np.trace(bi.conj().T @ img)) / 4
    return out


@dataclass
class AdjointSpectrum:
    block_matrices: dict[str, np.ndarray]
    eigenphases: dict[str, np.ndarray]
    invariant_block: np.ndarray
    off_block_norm: float
    invariant_closed: bool
    min_cancel_cycles: int | str = "never"
    trivial_subspaces: list[tuple[str, str]] = field(default_factory=list)

    @property
    def sector_matrix(self) -> np.ndarray:
        """12x12 block-diagonal action on (symmetric, antisymmetric) coordinates."""
        out = np.zeros((12, 12))
        out[:6, :6] = self.block_matrices["symmetric"]
        out[6:, 6:] = self.block_matrices["antisymmetric"]
        return out


def _pair_name(k: int) -> str:
    i = (k // 2) * 2
    return f"({PAIR_LABELS[i]}, {PAIR_LABELS[i + 1]})"


def direction_vector(label: str) -> np.ndarray:
    """Unit 12-vector in sector coordinates for a Pauli error direction.

    Accepts single-qubit labels (IX ... ZI) and sector elements "S:XY" / "A:IZ".
    """
    v = np.zeros(12)
    if label.startswith(("S:", "A:")):
        k = PAIR_LABELS.index(label[2:])
        v[k if label[0] == "S" else 6 + k] = 1.0
        return v
    if label in PAIR_LABELS:
        k, swapped = PAIR_LABELS.index(label), False
    elif label[::-1] in PAIR_LABELS:
        k, swapped = PAIR_LABELS.index(label[::-1]), True
    else:
        raise ValueError(f"{label!r} is not in the symmetric/antisymmetric sectors")
    # p = (s S + a A) / sqrt2, swap(p) = (s S - a A) / sqrt2
    v[k] = _SYM_SIGNS[k] / np.sqrt(2)
    v[6 + k] = (-1 if swapped else 1) * _ANTI_SIGNS[k] / np.sqrt(2)
    return v


def _trivial_subspaces(blocks: dict[str, np.ndarray]) -> list[tuple[str, str]]:
    found = []
    for sector, m in blocks.items():
        w, v = np.linalg.eig(m)
        for lam, vec in zip(w, v.T):
            if abs(lam - 1) < TRIVIAL_TOL:
                k = int(np.argmax(np.abs(vec)))
                entry = (sector, _pair_name(k))
                if entry not in found:
                    found.append(entry)
    return found


def adjoint_blocks(u: np.ndarray) -> AdjointSpectrum:
    """Restricted adjoint action of ``u`` split by exchange symmetry."""
    full = adjoint_matrix(u)
    inv = full[:3, :3]
    sym = full[3:9, 3:9]
    anti = full[9:, 9:]
    off = full.copy()
    off[:3, :3] = off[3:9, 3:9] = off[9:, 9:] = 0
    blocks = {"symmetric": sym, "antisymmetric": anti}
    phases = {k: np.sort(np.angle(np.linalg.eigvals(m))) for k, m in blocks.items()}
    spec = AdjointSpectrum(
        block_matrices=blocks,
        eigenphases=phases,
        invariant_block=inv,
        off_block_norm=float(np.linalg.norm(off)),
        invariant_closed=bool(np.linalg.norm(full[3:, :3]) < 1e-12 and np.linalg.norm(full[:3, 3:]) < 1e-12),
        trivial_subspaces=_trivial_subspaces(blocks),
    )
    spec.min_cancel_cycles = min_cancel_cycles(spec)
    return spec


def twirl_sum(spectrum: AdjointSpectrum, error_subspace=SINGLE_QUBIT_DIRECTIONS, n: int = 1) -> dict[str, float]:
    """Norm of sum_{j<n} Ad^j applied to each error direction."""
    if n < 1:
        raise ValueError("n must be at least 1")
    ad = spectrum.sector_matrix
    acc = np.eye(12)
    total = np.zeros((12, 12))
    for _ in range(n):
        total += acc
        acc = ad @ acc
    return {lbl: float(np.linalg.norm(total @ direction_vector(lbl))) for lbl in error_subspace}


def min_cancel_cycles(spectrum: AdjointSpectrum, error_subspace=SINGLE_QUBIT_DIRECTIONS, cap: int = MAX_CANCEL_CYCLES):
    for n in range(1, cap + 1):
        if max(twirl_sum(spectrum, error_subspace, n).values()) < TRIVIAL_TOL:
            return n
    return "never"


# ------------------------------------------------------------ verdicts


def dd_unitary(label: str, eps=(0.0, 0.0, 0.0), eps_right=None) -> np.ndarray:
    er = eps if eps_right is None else eps_right
    return np.kron(noisy_pauli(label[0], eps), noisy_pauli(label[1], er))


def cycle_sequence(gate: GateParams | np.ndarray, dd: str = "XX", alternating_idle: bool = False) -> list[np.ndarray]:
    """(gate, DD) pairs of one period, with an idle step between gates if requested."""
    w = build_two_qubit(gate) if isinstance(gate, GateParams) else np.asarray(gate)
    layers = DD_LAYERS[dd]
    gates = [w, np.eye(4, dtype=complex)] if alternating_idle else [w]
    period = np.lcm(len(layers), len(gates))
    return [(gates[k % len(gates)], dd_unitary(layers[k % len(layers)])) for k in range(period)]


def sequence_twirl(pairs, n_cycles: int, error_subspace=SINGLE_QUBIT_DIRECTIONS) -> dict[str, float]:
    """First-order error term for errors placed between each gate and its DD layer.

    Returns the norm of sum_j Ad(P_j)^{-1} E per direction, where P_j is the
    ideal evolution up to and including the j-th gate.
    """
    basis = SYMMETRIC_BASIS + ANTISYMMETRIC_BASIS
    prefix = np.eye(4, dtype=complex)
    total = np.zeros((12, 12))
    for j in range(n_cycles):
        g, d = pairs[j % len(pairs)]
        p = g @ prefix
        total += adjoint_matrix(p.conj().T, basis)
        prefix = d @ p
    return {lbl: float(np.linalg.norm(total @ direction_vector(lbl))) for lbl in error_subspace}


@dataclass
class RobustnessReport:
    gate: str
    dd: str
    alternating_idle: bool
    eigenphases: dict[str, np.ndarray]
    trivial_flags: list[tuple[str, str]]
    min_cancel_cycles: int | str
    robust: bool
    notes: list[str] = field(default_factory=list)

    def lines(self) -> list[str]:
        out = [f"gate={self.gate} dd={self.dd} alternating_idle={self.alternating_idle}"]
        for k, v in self.eigenphases.items():
            out.append(f"{k} eigenphases/pi: " + " ".join(f"{x / np.pi:+.4f}" for x in v))
        out.append(f"trivial subspaces overlapping single-qubit errors: {self.trivial_flags or 'none'}")
        out.append(f"min_cancel_cycles: {self.min_cancel_cycles}")
        out.append(f"verdict: {'robust' if self.robust else 'NOT robust'}")
        out.extend(self.notes)
        return out


def _period_error_map(pairs) -> np.ndarray:
    """First-order error accumulated over one period, as a map on sector coordinates."""
    basis = SYMMETRIC_BASIS + ANTISYMMETRIC_BASIS
    prefix = np.eye(4, dtype=complex)
    total = np.zeros((12, 12))
    for g, d in pairs:
        p = g @ prefix
        total += adjoint_matrix(p.conj().T, basis)
        prefix = d @ p
    return total


def _flags(spectrum: AdjointSpectrum, error_map: np.ndarray, error_subspace) -> list[tuple[str, str]]:
    """+1 eigenspace components of the period adjoint reached by first-order errors.

    Such components add up coherently period after period.
    """
    fixed = null_space(spectrum.sector_matrix - np.eye(12), rcond=TRIVIAL_TOL)
    flags = []
    for lbl in error_subspace:
        comp = fixed @ (fixed.T @ (error_map @ direction_vector(lbl)))
        if np.linalg.norm(comp) > 1e-9:
            k = int(np.argmax(np.abs(comp)))
            entry = ("symmetric" if k < 6 else "antisymmetric", _pair_name(k % 6))
            if entry not in flags:
                flags.append(entry)
    return flags


def robustness_verdict(
    gate: GateParams | np.ndarray,
    dd: str = "XX",
    alternating_idle: bool = False,
    error_subspace=SINGLE_QUBIT_DIRECTIONS,
    name: str = "gate",
) -> RobustnessReport:
    """Eigenphases, trivial-subspace flags and cancellation length of a DD cycle.

    Errors act between each gate and its DD layer.  With ``alternating_idle``
    the gate is applied only in every other cycle, which multiplies the first
    order error by (1 + Ad(D)).
    """
    pairs = cycle_sequence(gate, dd, alternating_idle)
    period_u = np.eye(4, dtype=complex)
    for g, d in pairs:
        period_u = d @ g @ period_u
    spectrum = adjoint_blocks(period_u)
    flags = _flags(spectrum, _period_error_map(pairs), error_subspace)
    n_min: int | str = "never"
    for n in range(1, MAX_CANCEL_CYCLES + 1):
        if max(sequence_twirl(pairs, n, error_subspace).values()) < TRIVIAL_TOL:
            n_min = n
            break
    notes = []
    if spectrum.off_block_norm > 1e-12:
        notes.append(f"sectors mix: off-block norm {spectrum.off_block_norm:.3e}")
    if flags and n_min == "never":
        notes.append("single-qubit errors in flagged subspaces accumulate coherently")
    return RobustnessReport(
        gate=name,
        dd=dd,
        alternating_idle=alternating_idle,
        eigenphases=spectrum.eigenphases,
        trivial_flags=flags,
        min_cancel_cycles=n_min,
        robust=n_min != "never",
        notes=notes,
    )


# ------------------------------------------------------------ numerical check


def phase_aligned_distance(a: np.ndarray, b: np.ndarray) -> float:
    ov = np.vdot(b, a)
    ph = ov / abs(ov) if abs(ov) > 0 else 1.0
    return float(np.linalg.norm(a - ph * b))


def noisy_cycle_unitary(gate: np.ndarray, dd: str, k: int, eps_left, eps_right) -> np.ndarray:
    layers = DD_LAYERS[dd]
    u = np.eye(4, dtype=complex)
    for j in range(k):
        u = dd_unitary(layers[j % len(layers)], eps_left, eps_right) @ gate @ u
    return u


def verify_first_order_cancellation(
    gate: GateParams | np.ndarray,
    dd: str = "XX",
    eps_grid=(1e-4, 1e-3, 1e-2, 1e-1),
    k: int = 4,
    directions: tuple[np.ndarray, np.ndarray] | None = None,
    seed: int = 1,
) -> dict:
    """Deviation of the noisy k-cycle unitary from the ideal one vs error size.

    Microwave error vectors are eps times fixed unit directions (random unless
    given) on each qubit, exponentiated exactly.  Returns the deviations and
    the fitted log-log slope.
    """
    w = build_two_qubit(gate) if isinstance(gate, GateParams) else np.asarray(gate)
    if directions is None:
        rng = np.random.default_rng(seed)
        d1, d2 = rng.normal(size=3), rng.normal(size=3)
        directions = (d1 / np.linalg.norm(d1), d2 / np.linalg.norm(d2))
    ideal = noisy_cycle_unitary(w, dd, k, (0, 0, 0), (0, 0, 0))
    eps = np.asarray(eps_grid, dtype=float)
    dev = np.array([phase_aligned_distance(noisy_cycle_unitary(w, dd, k, e * directions[0], e * directions[1]), ideal) for e in eps])
    pos = dev > 0
    slope = float(np.polyfit(np.log(eps[pos]), np.log(dev[pos]), 1)[0]) if pos.sum() >= 2 else float("nan")
    return {"eps": eps, "deviation": dev, "slope": slope, "k": k}
