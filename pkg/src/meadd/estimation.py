"""Estimators: linear phase fits, controlled phase, swap angle and axis,
Floquet Z phases, single-qubit angles, baselines and variance studies."""

from __future__ import annotations

from dataclasses import dataclass, field
from math import gcd

import numpy as np
from scipy.optimize import least_squares

from .gate_algebra import (
    GateParams,
    SingleQubitParams,
    X,
    Y,
    build_single_qubit,
    build_two_qubit,
    rotation_axis,
    wrap_angle,
    zrot,
)
from .circuits import DepthRecord, odd_matrix

UNWRAP_MARGIN = 0.1 * np.pi
DET_FLOOR = 1e-3


class UnwrapAmbiguity(ValueError):
    """A consecutive phase increment is too close to pi to unwrap reliably."""


class DegenerateMatrix(ValueError):
    """The measured matrix has collapsed below the determinant floor."""


class AmbiguousSign(ValueError):
    """Neither swap family shows a signal above the noise floor."""


@dataclass
class PhaseSeries:
    depths: np.ndarray
    angles: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        self.depths = np.asarray(self.depths, dtype=float)
        self.angles = np.asarray(self.angles, dtype=float)
        if self.depths.shape != self.angles.shape:
            raise ValueError("one angle per depth required")
        if np.any(np.diff(self.depths) <= 0):
            raise ValueError("depths must be strictly increasing")
        if self.weights is not None:
            self.weights = np.asarray(self.weights, dtype=float)


@dataclass
class LinearPhaseFit:
    slope: float
    intercept: float
    stderr: float
    intercept_stderr: float
    residual_rms: float
    unwrapped: np.ndarray
    unwrap_margin: float


@dataclass
class EstimationResult:
    estimates: dict[str, float]
    std_errors: dict[str, float] = field(default_factory=dict)
    fit_residual_rms: float = 0.0
    diagnostics: dict = field(default_factory=dict)


def _depth_step(depths: np.ndarray) -> int:
    steps = np.diff(depths).astype(int)
    g = 0
    for s in steps:
        g = gcd(g, int(s))
    return max(g, 1)


def _coarse_slope(series: PhaseSeries) -> float:
    """Slope modulo 2 pi / step from the circular mean of uniform-step increments."""
    steps = np.diff(series.depths)
    if not np.allclose(steps, steps[0]):
        raise ValueError("automatic carrier needs uniformly spaced depths")
    inc = np.angle(np.sum(np.exp(1j * np.diff(series.angles))))
    return float(inc / steps[0])


def fit_linear_phase(
    series: PhaseSeries,
    margin: float = UNWRAP_MARGIN,
    carrier: float | str | None = None,
    weighted: bool = False,
    sigma: float | None = None,
) -> LinearPhaseFit:
    """Unwrap by minimal jumps and fit angle = slope * depth + intercept.

    ``carrier`` removes a known slope before unwrapping; ``"auto"`` estimates
    it from the circular mean of the increments.  The slope of the returned fit
    includes the carrier.  ``sigma`` gives a known per-point noise level for the
    standard error; otherwise the residual scatter is used.
    """
    n = series.depths
    if n.size < 2:
        raise ValueError("need at least two depths")
    c = _coarse_slope(series) if carrier == "auto" else float(carrier or 0.0)
    base = series.angles - c * n
    inc = wrap_angle(np.diff(base))
    worst = float(np.max(np.abs(inc))) if inc.size else 0.0
    if worst > np.pi - margin:
        raise UnwrapAmbiguity(f"phase increment {worst:.3f} exceeds pi - {margin:.3f}")
    y = np.concatenate([[0.0], np.cumsum(inc)])
    w = series.weights if (weighted and series.weights is not None) else np.ones_like(n)
    sw = w.sum()
    nbar = (w * n).sum() / sw
    ybar = (w * y).sum() / sw
    sxx = (w * (n - nbar) ** 2).sum()
    slope = (w * (n - nbar) * (y - ybar)).sum() / sxx
    icpt = ybar - slope * nbar
    resid = y - (slope * n + icpt)
    dof = max(n.size - 2, 1)
    s2 = sigma**2 if sigma is not None else (w * resid**2).sum() / dof
    se = float(np.sqrt(s2 / sxx))
    ise = float(np.sqrt(s2 * (1 / sw + nbar**2 / sxx)))
    return LinearPhaseFit(
        slope=float(slope + c),
        intercept=float(icpt + base[0]),
        stderr=se,
        intercept_stderr=ise,
        residual_rms=float(np.sqrt(np.mean(resid**2))),
        unwrapped=y + base[0] + c * n,
        unwrap_margin=float(np.pi - worst),
    )


def _nearest_branch(value: float, period: float, prior: float) -> float:
    k = np.round((prior - value) / period)
    return float(value + k * period)


# ---------------------------------------------------------- controlled phase


def cphase_determinants(records: list[DepthRecord]) -> tuple[np.ndarray, np.ndarray]:
    depths = np.array([r.depth for r in records], dtype=float)
    dets = np.array([np.linalg.det(odd_matrix(r)) for r in records])
    return depths, dets


def estimate_phi(
    records: list[DepthRecord],
    prior: float | None = None,
    carrier: float | str | None = "auto",
    det_floor: float = DET_FLOOR,
) -> EstimationResult:
    """Controlled phase from the determinant of e^{i n phi} C_odd^{2n}.

    arg det = 2 n phi, so the fitted slope fixes phi modulo pi / step.  The
    branch closest to ``prior`` is returned; without a prior, the argument of
    the trace at depth 1 (which equals phi while the swap rotation per 2-cycle
    stays below pi/2) is used, and pi otherwise.
    """
    records = sorted(records, key=lambda r: r.depth)
    depths, dets = cphase_determinants(records)
    small = np.abs(dets) < det_floor
    if np.any(small):
        raise DegenerateMatrix(f"|det| below {det_floor} at depths {depths[small].astype(int).tolist()}")
    fit = fit_linear_phase(PhaseSeries(depths, np.angle(dets)), carrier=carrier)
    step = _depth_step(depths)
    if prior is None:
        prior = np.pi
        if depths[0] == 1:
            prior = float(np.angle(np.trace(odd_matrix(records[0]))))
    phi = wrap_angle(_nearest_branch(fit.slope / 2, np.pi / step, prior))
    return EstimationResult(
        estimates={"phi": phi},
        std_errors={"phi": fit.stderr / 2},
        fit_residual_rms=fit.residual_rms,
        diagnostics={
            "slope": fit.slope,
            "intercept": fit.intercept,
            "arg_det": np.angle(dets),
            "abs_det": np.abs(dets),
            "unwrap_margin": fit.unwrap_margin,
        },
    )


# ------------------------------------------------------------ swap angle


def bloch_series(records: list[DepthRecord], prep: str = "One0") -> tuple[np.ndarray, np.ndarray]:
    """Depths and postselected odd-parity Bloch vectors (x, y, z)."""
    records = sorted(records, key=lambda r: r.depth)
    depths = np.array([r.depth for r in records], dtype=float)
    b = np.array([[r.values[(prep, k)].real for k in ("Xodd", "Yodd", "Zodd")] for r in records])
    return depths, b


_PAULI_VEC = (X, Y, np.diag([1.0 + 0j, -1.0]))


def two_cycle_odd(theta: float, zeta: float, chi: float, axis: str) -> np.ndarray:
    """Odd-block 2-cycle D W D W with D = X (X family) or Y (Y family)."""
    w = build_two_qubit(GateParams(theta=abs(theta) % (np.pi / 2 + 1e-15), zeta=zeta, chi=chi))[1:3, 1:3]
    if theta < 0:
        w = build_two_qubit(GateParams(theta=-theta, zeta=zeta, chi=chi + np.pi))[1:3, 1:3]
    d = X if axis == "X" else Y
    return d @ w @ d @ w


def _bloch_of(u: np.ndarray, psi: np.ndarray) -> np.ndarray:
    phi = u @ psi
    return np.array([np.real(np.vdot(phi, p @ phi)) for p in _PAULI_VEC])


def predicted_bloch(theta, zeta, chi, axis, depths) -> np.ndarray:
    c2 = two_cycle_odd(theta, zeta, chi, axis)
    psi0 = np.array([0, 1], dtype=complex)  # |10> is odd-basis state 1
    out = []
    for n in depths:
        out.append(_bloch_of(np.linalg.matrix_power(c2, int(n)), psi0))
    return np.array(out)


def _swing_angle(b: np.ndarray) -> tuple[float, float]:
    """Direction (mod pi) of the xy excursion and its mean radius."""
    xy = b[:, :2]
    m = xy.T @ xy
    w, v = np.linalg.eigh(m)
    e = v[:, -1]
    return float(np.arctan2(e[1], e[0])), float(np.mean(np.linalg.norm(xy, axis=1)))


_AXIS_BASE = {"X": 0.0, "Y": np.pi / 2}


def _canon_zeta(z: float) -> float:
    z = wrap_angle(z)
    if z <= -np.pi / 2:
        z += np.pi
    elif z > np.pi / 2:
        z -= np.pi
    return z


def swap_noise_floor(records: list[DepthRecord], prep: str = "One0") -> float:
    """Twice the single-component shot-noise std, 2/sqrt(shots); tiny for exact records."""
    shots = [float(np.sum(c)) for (p_, _), c in (x for r in records for x in r.counts.items()) if p_ == prep]
    n = min(shots) if shots else 1.0
    return 2 / np.sqrt(n) if n > 1.5 else 1e-12


def _stage_one(depths, bx, by, frame_hint, noise_floor=1e-12):
    swings = {}
    for ax, b in (("X", bx), ("Y", by)):
        if b is not None:
            swings[ax] = _swing_angle(b)
    if frame_hint is not None:
        zeta0 = _canon_zeta(frame_hint)
    else:
        ax = max(swings, key=lambda k: swings[k][1])
        eps, radius = swings[ax]
        if radius < noise_floor:
            raise AmbiguousSign(f"xy excursion {radius:.3g} below noise floor {noise_floor:.3g} in both swap families")
        psi = eps - np.pi / 2
        zeta0 = _canon_zeta(_AXIS_BASE[ax] - psi)
    rates = {}
    fits = {}
    for ax, b in (("X", bx), ("Y", by)):
        if b is None:
            continue
        psi = _AXIS_BASE[ax] - zeta0
        e = np.array([-np.sin(psi), np.cos(psi), 0.0])
        t = np.arctan2(b @ e, -b[:, 2])
        fit = fit_linear_phase(PhaseSeries(depths, t))
        rates[ax] = fit.slope
        fits[ax] = fit
    return zeta0, rates, fits


def invert_swap_rates(a_x: float, a_y: float, branch: str = "exact") -> tuple[float, float]:
    """(theta, chi) from per-2-cycle Bloch angles of the X and Y families.

    Exact: sin(theta) cos(chi) = sin(a_x / 4), sin(theta) sin(chi) = -sin(a_y / 4).
    Small angle: theta cos(chi) = a_x / 4, theta sin(chi) = -a_y / 4.
    """
    if branch == "small":
        cx, sy = a_x / 4, -a_y / 4
        return float(np.hypot(cx, sy)), float(np.arctan2(sy, cx))
    cx, sy = np.sin(a_x / 4), -np.sin(a_y / 4)
    return float(np.arcsin(min(1.0, np.hypot(cx, sy)))), float(np.arctan2(sy, cx))


def estimate_theta_chi(
    records_x: list[DepthRecord],
    records_y: list[DepthRecord],
    branch: str = "exact",
    frame_hint: float | None = None,
    fit_contrast: bool = False,
) -> EstimationResult:
    """Swap angle and axis from the X- and Y-family odd-parity Bloch vectors.

    Stage one projects each trajectory onto its swing plane and fits the
    rotation angle per 2-cycle, then inverts.  With ``branch="exact"`` a joint
    least-squares fit of (theta, chi, zeta) to the exact 2-cycle model refines
    the result.  ``branch="small"`` stops after stage one with the small-angle
    inversion; ``"auto"`` uses the small-angle inversion below 0.1 rad and the
    exact route above.

    Exact records that never leave |10> give theta = 0 with chi flagged
    indefinite.  AmbiguousSign is raised when the xy excursion of both
    families is below twice the shot-noise level.
    """
    dx, bx = bloch_series(records_x)
    dy, by = bloch_series(records_y)
    if not np.array_equal(dx, dy):
        raise ValueError("X and Y families must share depths")
    if max(np.abs(bx[:, :2]).max(), np.abs(by[:, :2]).max(), np.abs(bx[:, 2] + 1).max(), np.abs(by[:, 2] + 1).max()) < 1e-12:
        # never left |10>: no swap, chi carries no information
        return EstimationResult(
            estimates={"theta": 0.0, "chi": 0.0, "zeta": 0.0, "a_x": 0.0, "a_y": 0.0},
            std_errors={"theta": 0.0},
            diagnostics={"chi_defined": False, "branch": branch, "stage_one": (0.0, 0.0, 0.0)},
        )
    floor = max(swap_noise_floor(records_x), swap_noise_floor(records_y))
    zeta0, rates, fits = _stage_one(dx, bx, by, frame_hint, floor)
    a_x, a_y = rates["X"], rates["Y"]
    theta_s, chi_s = invert_swap_rates(a_x, a_y, "small")
    use = branch
    if branch == "auto":
        use = "small" if theta_s <= 0.1 else "exact"
    if use == "small":
        theta, chi, zeta = theta_s, chi_s, zeta0
        resid = np.concatenate([fits["X"].unwrapped, fits["Y"].unwrapped])
        rms = max(fits["X"].residual_rms, fits["Y"].residual_rms)
        se_theta = float(np.hypot(fits["X"].stderr, fits["Y"].stderr) / 4)
        cov = None
    else:
        theta0, chi0 = invert_swap_rates(a_x, a_y, "exact")
        theta, chi, zeta, rms, cov = _joint_fit(dx, bx, by, theta0, chi0, zeta0, frame_hint, fit_contrast)
        se_theta = float(np.sqrt(cov[0, 0])) if cov is not None else 0.0
    if theta < 0:
        theta, chi = -theta, chi + np.pi
    chi_defined = theta > 1e-9
    est = {
        "theta": float(theta),
        "chi": wrap_angle(chi) if chi_defined else 0.0,
        "zeta": _canon_zeta(zeta),
        "a_x": a_x,
        "a_y": a_y,
    }
    se = {"theta": se_theta}
    if cov is not None:
        se["chi"] = float(np.sqrt(cov[1, 1]))
    return EstimationResult(
        estimates=est,
        std_errors=se,
        fit_residual_rms=float(rms),
        diagnostics={"chi_defined": chi_defined, "branch": use, "stage_one": (theta_s, chi_s, zeta0)},
    )


def _joint_fit(depths, bx, by, theta0, chi0, zeta0, frame_hint, fit_contrast):
    fixed_zeta = frame_hint is not None

    def unpack(p):
        theta, chi = p[0], p[1]
        zeta = zeta0 if fixed_zeta else p[2]
        k = 2 if fixed_zeta else 3
        c0, kappa = (p[k], p[k + 1]) if fit_contrast else (1.0, 0.0)
        return theta, chi, zeta, c0, kappa

    def resid(p):
        theta, chi, zeta, c0, kappa = unpack(p)
        scale = (c0 * np.exp(-kappa * depths))[:, None]
        rx = scale * predicted_bloch(theta, zeta, chi, "X", depths) - bx
        ry = scale * predicted_bloch(theta, zeta, chi, "Y", depths) - by
        return np.concatenate([rx.ravel(), ry.ravel()])

    p0 = [theta0, chi0] + ([] if fixed_zeta else [zeta0]) + ([1.0, 0.0] if fit_contrast else [])
    sol = least_squares(resid, p0, xtol=1e-15, ftol=1e-15, gtol=1e-15, method="lm")
    theta, chi, zeta, _, _ = unpack(sol.x)
    r = sol.fun
    dof = max(r.size - len(p0), 1)
    s2 = float(r @ r / dof)
    try:
        cov = np.linalg.inv(sol.jac.T @ sol.jac) * s2
    except np.linalg.LinAlgError:
        cov = None
    return theta, chi, zeta, float(np.sqrt(np.mean(r**2))), cov


# ------------------------------------------------------------ Floquet


def estimate_z_phases(records: list[DepthRecord], theta_hat: float, carrier: float | str | None = "auto") -> EstimationResult:
    """gamma and zeta from the Floquet family M_n = e^{-i n gamma} W_odd^n.

    The unitary factor of each measured matrix is diagonalised in the
    eigenbasis of the shallowest depth; the eigenvalue whose eigenvector leans
    on |01> carries phase -n(gamma + Omega_s) with Omega_s = sgn(zeta) Omega.
    """
    records = sorted(records, key=lambda r: r.depth)
    depths = np.array([r.depth for r in records], dtype=float)
    mats = []
    for r in records:
        u, s, vh = np.linalg.svd(odd_matrix(r))
        mats.append(u @ vh)
    w, v = np.linalg.eig(mats[0])
    order = np.argsort(-np.abs(v[0, :]) ** 2)
    v = v[:, order]
    vinv = np.linalg.inv(v)
    d = np.array([np.diag(vinv @ m @ v) for m in mats])
    ph01 = np.angle(d[:, 0])
    diff = np.angle(d[:, 1] / d[:, 0])
    fit_diff = fit_linear_phase(PhaseSeries(depths, diff), carrier=carrier)
    fit_01 = fit_linear_phase(PhaseSeries(depths, ph01), carrier=carrier)
    fit_det = fit_linear_phase(PhaseSeries(depths, np.angle([np.linalg.det(m) for m in mats])), carrier=carrier)
    omega_s = wrap_angle(fit_diff.slope) / 2
    gamma = wrap_angle(-fit_01.slope - omega_s)
    omega = abs(omega_s)
    ratio = np.cos(omega) / np.cos(theta_hat)
    clamped = ratio >= 1.0
    zeta = 0.0 if clamped else float(np.sign(omega_s) * np.arccos(ratio))
    return EstimationResult(
        estimates={"gamma": gamma, "zeta": zeta, "omega": omega},
        std_errors={"gamma": fit_01.stderr, "omega": fit_diff.stderr / 2},
        fit_residual_rms=max(fit_diff.residual_rms, fit_01.residual_rms),
        diagnostics={"zeta_clamped": bool(clamped), "gamma_from_det": wrap_angle(-fit_det.slope / 2), "omega_signed": omega_s},
    )


# ------------------------------------------------------------ single qubit


def reference_rabi(reference: np.ndarray, z: float) -> float:
    return rotation_axis(zrot(z) @ reference)[0]


def estimate_single_qubit(records_by_z: dict[float, list[DepthRecord]], reference: np.ndarray | SingleQubitParams) -> EstimationResult:
    """mu and zeta from Rabi angles Omega(z) measured over virtual-Z offsets.

    Each offset's signal 2 P0 - 1 + i (2 P_{pi/2} - 1) rotates by 2 Omega(z) per
    cycle; the reference cycle supplies the carrier.  cos Omega(z) is then
    fitted to cos(mu/2) cos(zeta + z/2).
    """
    ref = build_single_qubit(reference) if isinstance(reference, SingleQubitParams) else np.asarray(reference)
    zs, cosw, omegas, ses, rms = [], [], [], [], 0.0
    for z, recs in sorted(records_by_z.items()):
        recs = sorted(recs, key=lambda r: r.depth)
        depths = np.array([r.depth for r in recs], dtype=float)
        sig = np.array([r.values[("Phi0", "signal")] for r in recs])
        fit = fit_linear_phase(PhaseSeries(depths, np.angle(sig)), carrier=2 * reference_rabi(ref, z))
        om = fit.slope / 2
        zs.append(z)
        omegas.append(om)
        cosw.append(np.cos(om))
        ses.append(fit.stderr / 2)
        rms = max(rms, fit.residual_rms)
    zs = np.array(zs)
    a_mat = np.column_stack([np.cos(zs / 2), np.sin(zs / 2)])
    (a, b), *_ = np.linalg.lstsq(a_mat, np.array(cosw), rcond=None)
    amp = float(np.sign(a) * np.hypot(a, b)) if a != 0 else float(np.hypot(a, b))
    # at mu = pi every cos(Omega) vanishes and zeta carries no information
    zeta_defined = bool(np.hypot(a, b) > 1e-9)
    zeta = (float(np.arctan(-b / a)) if a != 0 else np.pi / 2) if zeta_defined else 0.0
    mu = float(2 * np.arccos(np.clip(amp, -1, 1)))
    return EstimationResult(
        estimates={"mu": mu, "zeta": zeta},
        std_errors={"omega": float(np.max(ses))},
        fit_residual_rms=rms,
        diagnostics={"z": zs, "omega": np.array(omegas), "zeta_defined": zeta_defined},
    )


# ------------------------------------------------------------ baselines


def estimate_theta_tomography(record: DepthRecord) -> float:
    m = odd_matrix(record)
    off = (abs(m[0, 1]) + abs(m[1, 0])) / 2
    diag = (abs(m[0, 0]) + abs(m[1, 1])) / 2
    return float(np.arctan2(off, diag))


def _fold(x: float) -> float:
    """Map an eigenphase difference to [0, pi] (sign is not observable)."""
    return abs(wrap_angle(x))


def phase_method_rabi(records: list[DepthRecord]) -> float:
    """Eigenphase difference u = 2 Omega of the repeated cycle, folded into [0, pi].

    Shallow depths select the branch of deeper ones; the deepest depth sets
    the final value.
    """
    records = sorted(records, key=lambda r: r.depth)
    est = None
    for r in records:
        lam = np.linalg.eigvals(odd_matrix(r))
        x = _fold(np.angle(lam[0] / lam[1]))
        d = r.depth
        if est is None:
            est = x / d
            continue
        cands = [(s * x + 2 * np.pi * k) / d for s in (1, -1) for k in range(-1, d + 1)]
        cands = [c for c in cands if -1e-12 <= c <= np.pi + 1e-12]
        est = min(cands, key=lambda c: abs(c - est))
    return float(est)


def estimate_theta_phase_method(records_by_z: dict[float, list[DepthRecord]]) -> float:
    """theta from cos^2(theta) = sum_z cos^2(Omega_z) for z phases 0 and pi."""
    cos2 = 0.0
    for z, recs in sorted(records_by_z.items()):
        cos2 += np.cos(phase_method_rabi(recs) / 2) ** 2
    s2 = 1.0 - cos2
    return float(np.arcsin(np.sqrt(np.clip(s2, 0.0, 1.0))))


# ------------------------------------------------------------ variance studies


def variance_bound(mode: str, lambda1: float, lambda2: float, m: int, n: float) -> tuple[float, float]:
    """Two-quadrature variance bound at depth n and the depth that minimises it."""
    if mode == "single_qubit_phase":
        k = lambda1 + lambda2
        bound = np.exp(2 * n * k) / (m * n**2)
        n_star = 1 / k if k > 0 else np.inf
    elif mode == "two_qubit_swap":
        k = lambda1 + 4 * lambda2
        bound = np.exp(n * k) / (4 * m * n**2)
        n_star = 2 / k if k > 0 else np.inf
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return float(bound), float(n_star)


def phase_estimates_from_counts(k0, k90, m: int, n: int, prior: float) -> np.ndarray:
    """phi from two quadratures: 2p0 - 1 ~ c cos(n phi), 2p90 - 1 ~ -c sin(n phi)."""
    c0 = 2 * np.asarray(k0) / m - 1
    c1 = 2 * np.asarray(k90) / m - 1
    ang = np.arctan2(-c1, c0)
    k = np.round((n * prior - ang) / (2 * np.pi))
    return (ang + 2 * np.pi * k) / n


def simulate_phase_estimator(varphi, lambda1, lambda2, n, m, reps, rng) -> np.ndarray:
    """Monte Carlo single-qubit phase estimates at depth n with m shots per quadrature."""
    from .circuits import phase_decay_probability

    p0 = phase_decay_probability(varphi, n, 0.0, lambda1, lambda2)
    p90 = phase_decay_probability(varphi, n, np.pi / 2, lambda1, lambda2)
    k0 = rng.binomial(m, p0, size=reps)
    k90 = rng.binomial(m, p90, size=reps)
    return phase_estimates_from_counts(k0, k90, m, n, varphi)


def simulate_swap_estimator(theta, lambda1, lambda2, n, m, reps, rng) -> np.ndarray:
    """Monte Carlo swap-angle estimates from |01>, postselected z and y quadratures."""
    from .circuits import swap_decay_probabilities

    p = swap_decay_probabilities(theta, n, lambda1, lambda2)
    keep_z = rng.binomial(m, p["survival"], size=reps)
    keep_y = rng.binomial(m, p["survival"], size=reps)
    kz = rng.binomial(keep_z, (1 + p["z"]) / 2)
    ky = rng.binomial(keep_y, (1 + p["y"]) / 2)
    z = 2 * kz / np.maximum(keep_z, 1) - 1
    y = 2 * ky / np.maximum(keep_y, 1) - 1
    ang = np.arctan2(-y, z)
    k = np.round((2 * n * theta - ang) / (2 * np.pi))
    return (ang + 2 * np.pi * k) / (2 * n)


def variance_minimum(depths, variances, window: int = 3) -> float:
    """Depth minimising log-variance via a parabola through the points around the argmin."""
    depths = np.asarray(depths, dtype=float)
    lv = np.log(np.asarray(variances, dtype=float))
    i = int(np.argmin(lv))
    lo, hi = max(0, i - window), min(len(depths), i + window + 1)
    c2, c1, _ = np.polyfit(depths[lo:hi], lv[lo:hi], 2)
    if c2 <= 0:
        return float(depths[i])
    return float(-c1 / (2 * c2))


def swap_depth_scan(theta, lambda1, lambda2, depths, m: int, reps: int, rng) -> dict:
    """Empirical swap-angle variance per depth and the depth minimising it."""
    depths = np.asarray(depths, dtype=int)
    var = np.array([np.var(simulate_swap_estimator(theta, lambda1, lambda2, int(n), m, reps, rng)) for n in depths])
    return {"depths": depths, "variance": var, "n_min": variance_minimum(depths, var, window=8)}
