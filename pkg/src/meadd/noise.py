"""Error models: quasi-static phase drift, systematic microwave errors,
per-cycle decoherence channels and finite-shot sampling."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .gate_algebra import X, Y, Z, I2, zrot

Eps = tuple[float, float, float]


class InvalidState(ValueError):
    """Density matrix with broken trace or positivity."""


class BadDistribution(ValueError):
    """Probability vector that does not sum to one or has negative entries."""


def noisy_x_gate(eps: Eps) -> np.ndarray:
    """exp(-i (eX X + eY Y + eZ Z)) X with the full exponential."""
    ex, ey, ez = eps
    return expm(-1j * (ex * X + ey * Y + ez * Z)) @ X


def noisy_pauli(label: str, eps: Eps) -> np.ndarray:
    """Imperfect Pauli pulse.  Y pulses are X pulses with the drive phase shifted by pi/2."""
    if label == "I":
        return I2.copy()
    if label == "X":
        return noisy_x_gate(eps)
    if label == "Y":
        s = zrot(np.pi / 2)
        return s @ noisy_x_gate(eps) @ s.conj().T
    raise ValueError(f"unknown pulse {label!r}")


def over_rotation_eps(fraction: float) -> Eps:
    """Error vector for a pi pulse over-rotated by ``fraction`` (0.1 -> 1.1 pi)."""
    return (fraction * np.pi / 2, 0.0, 0.0)


def _as_pair(eps) -> tuple[Eps, Eps]:
    arr = np.asarray(eps, dtype=float)
    if arr.shape == (3,):
        arr = np.stack([arr, arr])
    if arr.shape != (2, 3):
        raise ValueError("mw_error must be a 3-vector or a pair of 3-vectors")
    return tuple(map(tuple, arr))


@dataclass(frozen=True)
class NoiseConfig:
    """Noise and sampling settings for one simulated run.

    ``mw_error`` holds one (eX, eY, eZ) vector per qubit (left, right); a single
    vector is applied to both.  ``shots=None`` selects exact expectations.
    """

    zeta_drift_std: float = 0.0
    gamma_drift_std: float = 0.0
    sq_phase_drift_std: float = 0.0
    mw_error: tuple = ((0.0, 0.0, 0.0), (0.0, 0.0, 0.0))
    lambda1: float = 0.0
    lambda2: float = 0.0
    shots: int | None = None
    readout_flip: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mw_error", _as_pair(self.mw_error))
        for name in ("zeta_drift_std", "gamma_drift_std", "sq_phase_drift_std", "lambda1", "lambda2", "readout_flip"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.readout_flip >= 0.5:
            raise ValueError("readout_flip must be below 0.5")
        if self.shots is not None and self.shots < 1:
            raise ValueError("shots must be at least 1")

    @property
    def exact(self) -> bool:
        return self.shots is None

    @property
    def has_decoherence(self) -> bool:
        return self.lambda1 > 0 or self.lambda2 > 0


@dataclass(frozen=True)
class NoiseRealization:
    """Quasi-static offsets held fixed within one circuit instance."""

    zeta_offset: float = 0.0
    gamma_offset: float = 0.0
    sq_phase_offsets: tuple[float, float] = field(default=(0.0, 0.0))


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for a cell identified by integer ``key``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key)))


DRIFT_STREAM = 0
SHOT_STREAM = 1


def draw_realization(cfg: NoiseConfig, instance_index: int | tuple[int, ...]) -> NoiseRealization:
    """Gaussian drift offsets, deterministic in (seed, instance_index)."""
    key = instance_index if isinstance(instance_index, tuple) else (instance_index,)
    rng = stream(cfg.seed, DRIFT_STREAM, *key)
    z, g, a, b = rng.standard_normal(4)
    return NoiseRealization(
        zeta_offset=cfg.zeta_drift_std * z,
        gamma_offset=cfg.gamma_drift_std * g,
        sq_phase_offsets=(cfg.sq_phase_drift_std * a, cfg.sq_phase_drift_std * b),
    )


# ---------------------------------------------------------------- decoherence


def kraus_operators(lambda1: float, lambda2: float) -> list[np.ndarray]:
    """Single-qubit amplitude damping (p = 1 - e^{-lambda1}) followed by phase
    damping with coherence factor e^{-lambda2}."""
    p = 1 - np.exp(-lambda1)
    amp = [np.array([[1, 0], [0, np.sqrt(1 - p)]]), np.array([[0, np.sqrt(p)], [0, 0]])]
    q = np.exp(-lambda2)
    ph = [np.array([[1, 0], [0, q]]), np.array([[0, 0], [0, np.sqrt(1 - q * q)]])]
    return [b @ a for a in amp for b in ph]


def _check_state(rho: np.ndarray, tol: float = 1e-9) -> None:
    if abs(np.trace(rho) - 1) > tol:
        raise InvalidState(f"trace {np.trace(rho).real:.6g} != 1")
    if np.linalg.norm(rho - rho.conj().T) > tol:
        raise InvalidState("density matrix is not Hermitian")
    if np.linalg.eigvalsh((rho + rho.conj().T) / 2).min() < -tol:
        raise InvalidState("density matrix is not positive semidefinite")


def apply_channel(rho: np.ndarray, kraus: list[np.ndarray]) -> np.ndarray:
    """Apply the same single-qubit channel independently to every qubit of ``rho``."""
    nq = int(round(np.log2(rho.shape[0])))
    for q in range(nq):
        ops = [np.kron(np.kron(np.eye(2**q), k), np.eye(2 ** (nq - q - 1))) for k in kraus]
        rho = sum(k @ rho @ k.conj().T for k in ops)
    return rho


def apply_decoherence_cycle(rho: np.ndarray, lambda1: float, lambda2: float, check: bool = True) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if check:
        _check_state(rho)
    if lambda1 == 0 and lambda2 == 0:
        return rho
    return apply_channel(rho, kraus_operators(lambda1, lambda2))


def qubit_coherence_factor(n: int, lambda1: float, lambda2: float) -> float:
    """Off-diagonal decay of one qubit after n cycles of the channel above."""
    return float(np.exp(-n * (lambda1 / 2 + lambda2)))


# ---------------------------------------------------------------- sampling


def _flip_matrix(nbits: int, flip: float) -> np.ndarray:
    m1 = np.array([[1 - flip, flip], [flip, 1 - flip]])
    m = np.array([[1.0]])
    for _ in range(nbits):
        m = np.kron(m, m1)
    return m


def sample_counts(probabilities, shots: int | None, readout_flip: float = 0.0, rng: np.random.Generator | None = None):
    """Multinomial counts with symmetric per-bit readout flips.

    With ``shots=None`` the exact (flip-adjusted) probabilities are returned.
    """
    p = np.asarray(probabilities, dtype=float)
    if np.any(p < -1e-9) or abs(p.sum() - 1) > 1e-9:
        raise BadDistribution(f"probabilities sum to {p.sum():.12g}")
    p = np.clip(p, 0, None)
    p = p / p.sum()
    if readout_flip:
        nbits = int(round(np.log2(p.size)))
        p = _flip_matrix(nbits, readout_flip) @ p
    if shots is None:
        return p
    if rng is None:
        raise ValueError("finite-shot sampling needs an rng stream")
    return rng.multinomial(shots, p)
