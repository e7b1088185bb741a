"""Three-level driven qubit: shifted-cosine pulses, DRAG and leakage.

Time is measured in units of the pulse length (T = 1) and the anharmonicity
enters only as the product eta*T.  The state is propagated in the frame where
the Hamiltonian is purely off-diagonal,

    H(t) = [[0, W*, 0], [W, 0, sqrt2 W* e^{i eta t}], [0, sqrt2 W e^{-i eta t}, 0]],

with W(t) the complex drive envelope.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

NORM_TOL = 1e-9
DEFAULT_STEPS = 2000
_GAUSS = np.sqrt(3) / 6


class StepTooLarge(RuntimeError):
    """Integration lost normalisation beyond tolerance."""


def shifted_cosine(t, T: float = 1.0):
    """(1 / 2T)(1 + cos(2 pi t / T)) on [-T/2, T/2] and zero outside.

    Its integral over the support is 1/2, so a drive mu*C(t) rotates by mu.
    """
    t = np.asarray(t, dtype=float)
    return np.where(np.abs(t) <= T / 2, (1 + np.cos(2 * np.pi * t / T)) / (2 * T), 0.0)


def shifted_cosine_derivative(t, T: float = 1.0):
    t = np.asarray(t, dtype=float)
    return np.where(np.abs(t) <= T / 2, -np.pi * np.sin(2 * np.pi * t / T) / T**2, 0.0)


def shifted_cosine_second_derivative(t, T: float = 1.0):
    t = np.asarray(t, dtype=float)
    return np.where(np.abs(t) <= T / 2, -2 * np.pi**2 * np.cos(2 * np.pi * t / T) / T**3, 0.0)


@dataclass(frozen=True)
class PulseEnvelope:
    """Drive W(t) = mu e^{i phase} e^{-i detuning t} [C(t) + i drag C'(t)]."""

    amplitude: float
    phase: float = 0.0
    duration: float = 1.0
    detuning: float = 0.0
    drag_coefficient: float = 0.0

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("duration must be positive")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        env = shifted_cosine(t, self.duration) + 1j * self.drag_coefficient * shifted_cosine_derivative(t, self.duration)
        return self.amplitude * np.exp(1j * self.phase - 1j * self.detuning * t) * env


def drag_envelope(pulse: PulseEnvelope, eta: float) -> PulseEnvelope:
    """Mix in the first derivative with weight 1/eta.

    The sign is chosen so the added term cancels the leading leakage of the
    Hamiltonian above: W_DRAG = W + (i / eta) W'.
    """
    if eta <= 0:
        raise ValueError("eta must be positive")
    return replace(pulse, drag_coefficient=1.0 / eta)


def hamiltonian(pulse: PulseEnvelope, eta: float, t: float) -> np.ndarray:
    w = complex(pulse(t))
    h = np.zeros((3, 3), dtype=complex)
    h[1, 0] = w
    h[0, 1] = np.conj(w)
    h[2, 1] = np.sqrt(2) * w * np.exp(-1j * eta * t)
    h[1, 2] = np.conj(h[2, 1])
    return h


def _expm_antihermitian(a: np.ndarray) -> np.ndarray:
    """exp(a) for anti-Hermitian a via the Hermitian eigendecomposition of i a."""
    w, v = np.linalg.eigh(1j * a)
    return (v * np.exp(-1j * w)) @ v.conj().T


def propagator(pulse: PulseEnvelope, eta: float, steps: int = DEFAULT_STEPS, levels: int = 3) -> np.ndarray:
    """Fourth-order Magnus propagator over [-T/2, T/2] with Gauss-Legendre nodes."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    T = pulse.duration
    h = T / steps
    u = np.eye(levels, dtype=complex)
    for k in range(steps):
        t0 = -T / 2 + k * h
        h1 = hamiltonian(pulse, eta, t0 + (0.5 - _GAUSS) * h)[:levels, :levels]
        h2 = hamiltonian(pulse, eta, t0 + (0.5 + _GAUSS) * h)[:levels, :levels]
        omega = -0.5j * h * (h1 + h2) + (np.sqrt(3) / 12) * h * h * (h1 @ h2 - h2 @ h1)
        u = _expm_antihermitian(omega) @ u
    return u


@dataclass
class ThreeLevelResult:
    from_ground: np.ndarray
    from_excited: np.ndarray
    propagator: np.ndarray

    @property
    def leakage_amplitude(self) -> complex:
        """<2|psi(T/2)> starting from |0>."""
        return complex(self.from_ground[2])


def integrate_three_level(pulse: PulseEnvelope, eta: float, steps: int = DEFAULT_STEPS) -> ThreeLevelResult:
    u = propagator(pulse, eta, steps)
    out = ThreeLevelResult(from_ground=u[:, 0].copy(), from_excited=u[:, 1].copy(), propagator=u)
    for psi in (out.from_ground, out.from_excited):
        drift = abs(np.linalg.norm(psi) - 1)
        if drift > NORM_TOL:
            raise StepTooLarge(f"norm drift {drift:.2e} exceeds {NORM_TOL:.0e}; increase steps")
    return out


def leakage_scan(eta_grid, mu: float = np.pi, drag: bool = False, steps: int = DEFAULT_STEPS) -> np.ndarray:
    """|<2|psi>| from |0> over a grid of eta*T values."""
    out = []
    for eta in eta_grid:
        p = PulseEnvelope(amplitude=mu)
        if drag:
            p = drag_envelope(p, eta)
        out.append(abs(integrate_three_level(p, eta, steps).leakage_amplitude))
    return np.array(out)


def power_law_exponent(x, y) -> float:
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def perturbative_leakage(pulse: PulseEnvelope, eta: float, steps: int = DEFAULT_STEPS, start: int = 0) -> complex:
    """First-order leakage: integral of -i sqrt2 W(t) c1(t) e^{-i eta t}.

    c1(t) is the |1> amplitude of the two-level (qubit-only) evolution.
    """
    T = pulse.duration
    h = T / steps
    ts = -T / 2 + h * np.arange(steps + 1)
    c = np.zeros(2, dtype=complex)
    c[start] = 1.0
    c1 = [c[1]]
    for k in range(steps):
        t0 = ts[k]
        h1 = hamiltonian(pulse, eta, t0 + (0.5 - _GAUSS) * h)[:2, :2]
        h2 = hamiltonian(pulse, eta, t0 + (0.5 + _GAUSS) * h)[:2, :2]
        omega = -0.5j * h * (h1 + h2) + (np.sqrt(3) / 12) * h * h * (h1 @ h2 - h2 @ h1)
        c = _expm_antihermitian(omega) @ c
        c1.append(c[1])
    f = -1j * np.sqrt(2) * pulse(ts) * np.array(c1) * np.exp(-1j * eta * ts)
    return complex(np.trapezoid(f, ts) if hasattr(np, "trapezoid") else np.trapz(f, ts))
