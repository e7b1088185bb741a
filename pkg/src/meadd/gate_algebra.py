"""Dense-matrix algebra for excitation-preserving two-qubit gates.

Basis ordering is lexicographic {|00>, |01>, |10>, |11>} with the left qubit
as the most significant bit.  Single-qubit rotations follow

    X(a) = exp(-i a X / 2),    Z(a) = exp(-i a Z / 2).

The two-qubit gate family is

    W = diag(e^{i gamma}, odd block, e^{-i (gamma + phi)})
    odd block = [[e^{-i zeta} cos t, -i e^{i chi} sin t],
                 [-i e^{-i chi} sin t, e^{i zeta} cos t]]

and a single-qubit gate R(mu, zeta, chi) has the same SU(2) structure with
t = mu / 2.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import expm

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = {"I": I2, "X": X, "Y": Y, "Z": Z}

EVEN = (0, 3)
ODD = (1, 2)

UNITARY_TOL = 1e-12
EXTRACT_TOL = 1e-9


class NotExcitationPreserving(ValueError):
    """Raised when a 4x4 matrix couples the even and odd parity sectors."""


def wrap_angle(a):
    """Reduce angles into (-pi, pi]."""
    w = np.mod(np.asarray(a, dtype=float) + np.pi, 2 * np.pi) - np.pi
    w = np.where(w <= -np.pi, w + 2 * np.pi, w)
    return float(w) if np.ndim(w) == 0 else w


def pauli_string(label: str) -> np.ndarray:
    """Kronecker product of single-qubit Paulis, e.g. ``"XY"`` -> X (x) Y."""
    out = np.array([[1.0 + 0j]])
    for ch in label:
        out = np.kron(out, PAULI[ch])
    return out


def is_unitary(u: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    u = np.asarray(u)
    return bool(np.linalg.norm(u @ u.conj().T - np.eye(u.shape[0])) < tol)


def phase_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Frobenius distance between ``a`` and ``b`` after optimal global phase alignment."""
    ov = np.vdot(b, a)
    ph = ov / abs(ov) if abs(ov) > 0 else 1.0
    return float(np.linalg.norm(a - ph * b))


def equal_up_to_phase(a: np.ndarray, b: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    return phase_distance(a, b) < tol


# ---------------------------------------------------------------- single qubit


def zrot(a: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * a), np.exp(0.5j * a)])


def xrot(a: float) -> np.ndarray:
    c, s = np.cos(a / 2), np.sin(a / 2)
    return np.array([[c, -1j * s], [-1j * s, c]])


def yrot(a: float) -> np.ndarray:
    c, s = np.cos(a / 2), np.sin(a / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def phased_x(mu: float, vartheta: float) -> np.ndarray:
    """PhX(mu, vartheta) = Z(vartheta) X(mu) Z(-vartheta)."""
    return zrot(vartheta) @ xrot(mu) @ zrot(-vartheta)


def _su2(t: float, zeta: float, chi: float) -> np.ndarray:
    c, s = np.cos(t), np.sin(t)
    return np.array(
        [
            [np.exp(-1j * zeta) * c, -1j * np.exp(1j * chi) * s],
            [-1j * np.exp(-1j * chi) * s, np.exp(1j * zeta) * c],
        ]
    )


@dataclass(frozen=True)
class SingleQubitParams:
    """Angles of R(mu, zeta, chi) = Z(zeta - chi) X(mu) Z(zeta + chi)."""

    mu: float
    zeta: float = 0.0
    chi: float = 0.0


def build_single_qubit(p: SingleQubitParams) -> np.ndarray:
    return _su2(p.mu / 2, p.zeta, p.chi)


def euler_decompose(u: np.ndarray) -> SingleQubitParams:
    """Recover (mu, zeta, chi) of a 2x2 unitary up to global phase.

    The returned angles satisfy mu in [0, pi] and zeta in (-pi/2, pi/2].
    """
    u = np.asarray(u, dtype=complex)
    v = _canonical_branch(u / np.sqrt(np.linalg.det(u)))
    t, zeta, chi, _ = _split_su2(v)
    return SingleQubitParams(mu=2 * t, zeta=zeta, chi=chi)


def _canonical_branch(v: np.ndarray) -> np.ndarray:
    """Pick between ``v`` and ``-v`` so that zeta = -arg(v00) lies in (-pi/2, pi/2]."""
    if abs(v[0, 0]) > EXTRACT_TOL:
        z = -np.angle(v[0, 0])
        if not (-np.pi / 2 < z <= np.pi / 2):
            return -v
    return v


def _split_su2(v: np.ndarray) -> tuple[float, float, float, bool]:
    """Angles (t, zeta, chi, chi_defined) of an SU(2) matrix already in canonical branch."""
    t = float(np.arctan2(abs(v[0, 1]), abs(v[0, 0])))
    zeta = float(-np.angle(v[0, 0])) if abs(v[0, 0]) > EXTRACT_TOL else 0.0
    chi_defined = bool(np.sin(t) >= EXTRACT_TOL)
    chi = float(np.angle(1j * v[0, 1])) if chi_defined else 0.0
    return t, wrap_angle(zeta), wrap_angle(chi), chi_defined


def rabi_angle(theta: float, zeta: float) -> float:
    """Eigenphase Omega with cos(Omega) = cos(theta) cos(zeta), Omega in [theta, pi - theta]."""
    return float(np.arccos(np.clip(np.cos(theta) * np.cos(zeta), -1.0, 1.0)))


def rotation_axis(v: np.ndarray) -> tuple[float, np.ndarray]:
    """Rabi angle Omega in [0, pi] and unit axis sigma with v = cos(Omega) - i sin(Omega) sigma.

    ``v`` is used as given when it is special unitary, so the SU(2) sign picks
    between (Omega, sigma) and (pi - Omega, -sigma).  Other unitaries are first
    divided by the principal square root of their determinant.
    """
    v = np.asarray(v, dtype=complex)
    d = np.linalg.det(v)
    if abs(d - 1) > 1e-9:
        v = v / np.sqrt(d)
    a0 = float(np.real(np.trace(v)) / 2)
    vec = np.real(1j * np.array([np.trace(P @ v) / 2 for P in (X, Y, Z)]))
    s = float(np.linalg.norm(vec))
    omega = float(np.arctan2(s, a0))
    axis = vec / s if s > 1e-15 else np.array([0.0, 0.0, 1.0])
    return omega, axis


# ------------------------------------------------------------------ two qubit


@dataclass(frozen=True)
class GateParams:
    """Angles (theta, zeta, chi, phi, gamma) of an excitation-preserving gate.

    Phases are reduced into (-pi, pi] on construction.  ``chi_defined`` is
    False when the swap angle vanishes and chi carries no information.
    """

    theta: float = 0.0
    zeta: float = 0.0
    chi: float = 0.0
    phi: float = 0.0
    gamma: float = 0.0
    chi_defined: bool = field(default=True, compare=False)

    def __post_init__(self):
        if not (-1e-12 <= self.theta <= np.pi / 2 + 1e-12):
            raise ValueError(f"theta={self.theta} outside [0, pi/2]")
        object.__setattr__(self, "theta", float(np.clip(self.theta, 0.0, np.pi / 2)))
        for name in ("zeta", "chi", "phi", "gamma"):
            object.__setattr__(self, name, wrap_angle(getattr(self, name)))

    def canonical(self) -> "GateParams":
        """Equivalent parameters (up to global phase) with zeta in (-pi/2, pi/2].

        W(zeta + pi, chi + pi, gamma + pi) = -W(zeta, chi, gamma), so the pair of
        branches describes the same physical gate.
        """
        if -np.pi / 2 < self.zeta <= np.pi / 2:
            return self
        return replace(
            self,
            zeta=self.zeta + np.pi,
            chi=self.chi + np.pi,
            gamma=self.gamma + np.pi,
        )

    def as_array(self) -> np.ndarray:
        return np.array([self.theta, self.zeta, self.chi, self.phi, self.gamma])


CZ_PARAMS = GateParams(phi=np.pi)


def build_two_qubit(params: GateParams) -> np.ndarray:
    p = params
    u = np.zeros((4, 4), dtype=complex)
    u[0, 0] = np.exp(1j * p.gamma)
    u[np.ix_(ODD, ODD)] = _su2(p.theta, p.zeta, p.chi)
    u[3, 3] = np.exp(-1j * (p.gamma + p.phi))
    return u


def check_parity_preserving(u: np.ndarray, tol: float = EXTRACT_TOL) -> None:
    u = np.asarray(u)
    off = np.linalg.norm(u[np.ix_(EVEN, ODD)]) + np.linalg.norm(u[np.ix_(ODD, EVEN)])
    if off > tol:
        raise NotExcitationPreserving(f"parity-mixing mass {off:.3e} exceeds {tol:.1e}")


def check_excitation_preserving(u: np.ndarray, tol: float = EXTRACT_TOL) -> None:
    u = np.asarray(u)
    check_parity_preserving(u, tol)
    off = abs(u[0, 3]) + abs(u[3, 0])
    if off > tol:
        raise NotExcitationPreserving(f"off-block mass {off:.3e} exceeds {tol:.1e}")


def extract_params(u: np.ndarray) -> GateParams:
    """Invert :func:`build_two_qubit` up to global phase.

    The result is canonical (zeta in (-pi/2, pi/2]).  When sin(theta) < 1e-9
    chi is returned as 0 with ``chi_defined=False``.
    """
    u = np.asarray(u, dtype=complex)
    check_excitation_preserving(u)
    g = np.angle(np.linalg.det(u[np.ix_(ODD, ODD)])) / 2
    w = u * np.exp(-1j * g)
    odd = w[np.ix_(ODD, ODD)]
    if _canonical_branch(odd) is not odd:
        w = -w
    t, zeta, chi, chi_defined = _split_su2(w[np.ix_(ODD, ODD)])
    gamma = float(np.angle(w[0, 0]))
    phi = float(-np.angle(w[3, 3]) - gamma)
    return GateParams(t, zeta, chi, phi, gamma, chi_defined=chi_defined)


@dataclass(frozen=True)
class ParityDecomposition:
    """u = (e^{i prefactor} even_block) (+) odd_block on {00, 11} (+) {01, 10}."""

    even_block: np.ndarray
    odd_block: np.ndarray
    even_prefactor_phase: float

    def reassemble(self) -> np.ndarray:
        u = np.zeros((4, 4), dtype=complex)
        u[np.ix_(EVEN, EVEN)] = np.exp(1j * self.even_prefactor_phase) * self.even_block
        u[np.ix_(ODD, ODD)] = self.odd_block
        return u


def parity_decompose(u: np.ndarray) -> ParityDecomposition:
    """Split a parity-preserving ``u`` into blocks with an SU(2)-normalised even block.

    For gates built from :class:`GateParams` the prefactor equals -phi/2 and the
    odd block is W_odd itself.
    """
    u = np.asarray(u, dtype=complex)
    check_parity_preserving(u)
    even = u[np.ix_(EVEN, EVEN)]
    odd = u[np.ix_(ODD, ODD)].copy()
    pref = -wrap_angle(-np.angle(np.linalg.det(even))) / 2
    return ParityDecomposition(even * np.exp(-1j * pref), odd, float(pref))


def fundamental_entangler(theta: float, phi: float) -> np.ndarray:
    """F(theta, phi) = exp(-i theta (XX + YY) / 2 - i phi ZZ / 4)."""
    h = theta * (pauli_string("XX") + pauli_string("YY")) / 2 + phi * pauli_string("ZZ") / 4
    return expm(-1j * h)


@dataclass(frozen=True)
class KakFactors:
    """Local Z rotations around the fundamental entangler.

    The unitary is (Z(post_l) x Z(post_r)) F(theta, phi) (Z(pre_l) x Z(pre_r)).
    """

    pre_z_left: float
    pre_z_right: float
    post_z_left: float
    post_z_right: float
    entangler: tuple[float, float]

    @property
    def gamma_prime(self) -> float:
        return -(self.pre_z_left + self.pre_z_right + self.post_z_left + self.post_z_right) / 2

    @property
    def zeta_plus(self) -> float:
        return (self.pre_z_left - self.pre_z_right) / 2

    @property
    def zeta_minus(self) -> float:
        return (self.post_z_left - self.post_z_right) / 2


def kak_decompose(params: GateParams, gamma_after: bool = False) -> KakFactors:
    """Fundamental-entangler form with differential phases zeta+- = (zeta +- chi)/2.

    The symmetric phase gamma' = gamma + phi/2 sits before the entangler by
    default and after it when ``gamma_after`` is set; both give the same unitary.
    """
    zp = (params.zeta + params.chi) / 2
    zm = (params.zeta - params.chi) / 2
    gp = params.gamma + params.phi / 2
    pre = [zp, -zp]
    post = [zm, -zm]
    target = post if gamma_after else pre
    target[0] -= gp
    target[1] -= gp
    return KakFactors(pre[0], pre[1], post[0], post[1], (params.theta, params.phi))


def kak_compose(f: KakFactors) -> np.ndarray:
    pre = np.kron(zrot(f.pre_z_left), zrot(f.pre_z_right))
    post = np.kron(zrot(f.post_z_left), zrot(f.post_z_right))
    return post @ fundamental_entangler(*f.entangler) @ pre
