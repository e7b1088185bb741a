"""Batch runner: YAML configs, deterministic parallel sweeps and CSV tables.

A config names an experiment kind, a base gate and noise model, a depth list
and an optional grid.  The grid's cartesian product times the realization
count defines independent cells; each cell gets its own seed derived from the
config seed and its grid index, so results do not depend on scheduling.
"""

from __future__ import annotations

import ast
import csv
import hashlib
import io
import itertools
import json
import operator
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .circuits import (
    DEFAULT_Z_OFFSETS,
    relative_axis_cycle,
    run_baseline_phase_method,
    run_baseline_unitary_tomography,
    run_cphase_family,
    run_crosstalk_family,
    run_floquet_family,
    run_relative_axis_family,
    run_single_qubit_family,
    odd_matrix,
    run_swap_family,
)
from .estimation import (
    bloch_series,
    cphase_determinants,
    estimate_phi,
    estimate_single_qubit,
    estimate_theta_chi,
    estimate_theta_phase_method,
    estimate_theta_tomography,
    estimate_z_phases,
    simulate_phase_estimator,
    swap_depth_scan,
    variance_bound,
)
from .gate_algebra import GateParams, SingleQubitParams, fundamental_entangler, wrap_angle
from .noise import NoiseConfig, over_rotation_eps
from .pulses import PulseEnvelope, drag_envelope, integrate_three_level, power_law_exponent
from .robustness import robustness_verdict

KINDS = (
    "cphase",
    "swap",
    "floquet",
    "single_qubit",
    "relative_axis",
    "crosstalk",
    "snr_scan",
    "robustness",
    "drag",
    "variance_bound",
)
PRESETS = ("fig5", "fig6", "appendixF", "robustness-table")
_NEEDS_DEPTHS = {"cphase", "swap", "floquet", "single_qubit", "relative_axis", "crosstalk", "variance_bound"}
_DD_ALIASES = {"XX": ("XX",), "YX": ("YX",), "XY4": ("XX", "YY"), "XY4c": ("YX", "XY")}
_GATE_FIELDS = {f.name for f in fields(GateParams)} - {"chi_defined"}
_NOISE_FIELDS = {f.name for f in fields(NoiseConfig)} - {"seed"}
_EXTRA_KEYS = {
    "cphase": {"over_rotation", "dd", "phi_prior"},
    "swap": {"over_rotation", "phase_tracking", "branch"},
    "floquet": {"over_rotation"},
    "single_qubit": {"mu", "sq_zeta", "sq_chi"},
    "relative_axis": {"chi_pi", "chi_half", "mu_pi", "mu_half"},
    "crosstalk": {"theta_xtalk", "xtalk_chi", "idle_zeta", "phase_tracking"},
    "snr_scan": {"zeta_over_theta", "protocol"},
    "robustness": {"gate_name", "dd", "alternating_idle"},
    "drag": {"eta_T", "mu"},
    "variance_bound": {"mode", "m", "theta", "varphi"},
}


class ConfigError(ValueError):
    """Invalid experiment config; ``errors`` lists field-level problems."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class UnknownKind(ValueError):
    """Plot-data request for a table kind without an emitter."""


class ConfigMismatch(RuntimeError):
    """Existing output was produced by a different config."""


# ------------------------------------------------------------ config


_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv, ast.Pow: operator.pow}


def _eval_number(text: str) -> float:
    """Arithmetic on numbers and ``pi``, e.g. "pi - 0.01"."""

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return node.value
        if isinstance(node, ast.Name) and node.id == "pi":
            return np.pi
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.USub):
            return -ev(node.operand)
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        raise ValueError(f"unsupported expression {text!r}")

    return float(ev(ast.parse(text, mode="eval")))


def _numeric(value):
    if isinstance(value, str):
        try:
            return _eval_number(value)
        except (ValueError, SyntaxError):
            return value
    if isinstance(value, list):
        return [_numeric(v) for v in value]
    if isinstance(value, dict):
        return {k: _numeric(v) for k, v in value.items()}
    return value


@dataclass
class ExperimentConfig:
    name: str
    kind: str
    seed: int = 0
    depths: list[int] = field(default_factory=list)
    realizations: int = 1
    gate: dict = field(default_factory=dict)
    noise: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)
    expect: list = field(default_factory=list)
    output: str = "results"

    def to_dict(self) -> dict:
        return asdict(self)

    def config_hash(self) -> str:
        d = self.to_dict()
        d.pop("output")
        blob = json.dumps(d, sort_keys=True, default=float).encode()
        return hashlib.sha256(blob).hexdigest()


def _expand_depths(spec) -> list:
    """A list, {start, stop, step} (inclusive range) or {start, stop, num, spacing: geometric}."""
    if isinstance(spec, dict):
        try:
            if spec.get("spacing") == "geometric":
                pts = np.geomspace(float(spec["start"]), float(spec["stop"]), int(spec["num"]))
                return sorted({int(round(x)) for x in pts})
            return list(range(int(spec["start"]), int(spec["stop"]) + 1, int(spec.get("step", 1))))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError([f"depths: malformed range ({exc})"]) from exc
    return list(spec or [])


def load_config(source: str | Path | dict) -> ExperimentConfig:
    """Parse and validate a config from a YAML path or an already-loaded mapping."""
    if isinstance(source, dict):
        raw = dict(source)
    else:
        try:
            raw = yaml.safe_load(Path(source).read_text())
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError([f"file: {exc}"]) from exc
    if not isinstance(raw, dict):
        raise ConfigError(["config: top level must be a mapping"])
    errors = []
    allowed = {f.name for f in fields(ExperimentConfig)}
    for key in raw:
        if key not in allowed:
            errors.append(f"{key}: unknown field")
    if errors:
        raise ConfigError(errors)
    raw = _numeric(raw)
    raw["depths"] = _expand_depths(raw.get("depths"))
    raw.setdefault("name", raw.get("kind", "experiment"))
    if "kind" not in raw:
        raise ConfigError(["kind: required"])
    cfg = ExperimentConfig(**raw)
    validate_config(cfg)
    return cfg


def validate_config(cfg: ExperimentConfig) -> None:
    errors = []
    if cfg.kind not in KINDS:
        errors.append(f"kind: {cfg.kind!r} not one of {', '.join(KINDS)}")
    if not isinstance(cfg.seed, int) or cfg.seed < 0:
        errors.append("seed: must be a non-negative integer")
    if cfg.kind in _NEEDS_DEPTHS:
        if not cfg.depths:
            errors.append("depths: must be a non-empty list")
        elif any((not float(d).is_integer()) or d < 1 for d in cfg.depths):
            errors.append("depths: entries must be positive integers")
        else:
            cfg.depths = [int(d) for d in cfg.depths]
    if not isinstance(cfg.realizations, int) or cfg.realizations < 1:
        errors.append("realizations: must be a positive integer")
    for k in cfg.gate:
        if k not in _GATE_FIELDS | _EXTRA_KEYS.get(cfg.kind, set()):
            errors.append(f"gate.{k}: unknown parameter")
    for k in cfg.noise:
        if k not in _NOISE_FIELDS:
            errors.append(f"noise.{k}: unknown parameter")
    allowed_grid = _GATE_FIELDS | _NOISE_FIELDS | _EXTRA_KEYS.get(cfg.kind, set())
    for k, v in cfg.grid.items():
        if k not in allowed_grid:
            errors.append(f"grid.{k}: not a valid sweep parameter for {cfg.kind}")
        if not isinstance(v, list) or not v:
            errors.append(f"grid.{k}: must be a non-empty list")
    for i, e in enumerate(cfg.expect):
        if not isinstance(e, dict) or "metric" not in e or not ({"min", "max"} & set(e)):
            errors.append(f"expect[{i}]: needs 'metric' and 'min' and/or 'max'")
    if not errors:
        try:
            _noise_for(cfg, {}, 0)
        except (TypeError, ValueError) as exc:
            errors.append(f"noise: {exc}")
    if errors:
        raise ConfigError(errors)


def preset_path(name: str) -> Path:
    if name not in PRESETS:
        raise ConfigError([f"preset: {name!r} not one of {', '.join(PRESETS)}"])
    return Path(str(resources.files("meadd") / "presets" / f"{name}.yaml"))


# ------------------------------------------------------------ cells


def grid_points(cfg: ExperimentConfig) -> list[dict]:
    keys = list(cfg.grid)
    return [dict(zip(keys, combo)) for combo in itertools.product(*(cfg.grid[k] for k in keys))]


def _cell_seed(seed: int, point_index: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=(point_index,)).generate_state(1)[0])


def _merged(cfg: ExperimentConfig, point: dict) -> dict:
    out = dict(cfg.gate)
    out.update(cfg.noise)
    out.update(point)
    return out


def _gate_for(cfg: ExperimentConfig, point: dict) -> GateParams:
    m = _merged(cfg, point)
    return GateParams(**{k: float(m[k]) for k in _GATE_FIELDS if k in m})


def _noise_for(cfg: ExperimentConfig, point: dict, point_index: int) -> NoiseConfig:
    m = _merged(cfg, point)
    kw = {k: m[k] for k in _NOISE_FIELDS if k in m}
    if "over_rotation" in m:
        eps = over_rotation_eps(float(m["over_rotation"]))
        which = cfg.options.get("over_rotation_qubit", "right")
        zero = (0.0, 0.0, 0.0)
        kw["mw_error"] = {"left": (eps, zero), "right": (zero, eps), "both": (eps, eps)}[which]
    if "mw_error" in kw:
        kw["mw_error"] = tuple(kw["mw_error"]) if np.ndim(kw["mw_error"]) == 1 else tuple(map(tuple, kw["mw_error"]))
    return NoiseConfig(seed=_cell_seed(cfg.seed, point_index), **kw)


def _depth_rows(base: dict, depths, **cols) -> list[dict]:
    rows = []
    for i, n in enumerate(depths):
        row = dict(base, depth=int(n))
        for k, v in cols.items():
            row[k] = float(v[i])
        rows.append(row)
    return rows


def _cell_cphase(cfg, point, pidx, r):
    m = _merged(cfg, point)
    gate, noise = _gate_for(cfg, point), _noise_for(cfg, point, pidx)
    dd = _DD_ALIASES[m.get("dd", "XX")]
    recs = run_cphase_family(gate, noise, cfg.depths, dd=dd, realization=r)
    depths, dets = cphase_determinants(recs)
    est = estimate_phi(recs, prior=float(m.get("phi_prior", np.pi)))
    arg = est.diagnostics["arg_det"]
    base = dict(point, realization=r)
    rows = _depth_rows(base, depths, arg_det=arg, abs_det=np.abs(dets))
    summary = dict(
        base,
        phi=gate.phi,
        phi_hat=est.estimates["phi"],
        phi_abs_err=abs(wrap_angle(est.estimates["phi"] - gate.phi)),
        phi_stderr=est.std_errors["phi"],
        residual_rms=est.fit_residual_rms,
    )
    return rows, [summary]


def _swap_pair(gate, noise, depths, r, tracking=0.0):
    rx = run_swap_family(gate, noise, depths, "X", realization=r, phase_tracking=tracking)
    ry = run_swap_family(gate, noise, depths, "Y", realization=r, phase_tracking=tracking)
    return rx, ry


def _bloch_rows(base, rx, ry):
    d, bx = bloch_series(rx)
    _, by = bloch_series(ry)
    return _depth_rows(base, d, x_X=bx[:, 0], y_X=bx[:, 1], z_X=bx[:, 2], x_Y=by[:, 0], y_Y=by[:, 1], z_Y=by[:, 2])


def _cell_swap(cfg, point, pidx, r):
    m = _merged(cfg, point)
    gate, noise = _gate_for(cfg, point), _noise_for(cfg, point, pidx)
    rx, ry = _swap_pair(gate, noise, cfg.depths, r, float(m.get("phase_tracking", 0.0)))
    est = estimate_theta_chi(rx, ry, branch=m.get("branch", "exact"))
    base = dict(point, realization=r)
    e = est.estimates
    summary = dict(
        base,
        theta=gate.theta,
        theta_hat=e["theta"],
        theta_abs_err=abs(e["theta"] - gate.theta),
        chi_hat=e["chi"],
        zeta_hat=e["zeta"],
        a_x=e["a_x"],
        a_y=e["a_y"],
        theta_stderr=est.std_errors.get("theta", 0.0),
    )
    return _bloch_rows(base, rx, ry), [summary]


def _cell_floquet(cfg, point, pidx, r):
    gate, noise = _gate_for(cfg, point), _noise_for(cfg, point, pidx)
    rx, ry = _swap_pair(gate, noise, cfg.depths, r)
    sw = estimate_theta_chi(rx, ry)
    recs = run_floquet_family(gate, noise, cfg.depths, realization=r)
    est = estimate_z_phases(recs, sw.estimates["theta"])
    base = dict(point, realization=r)
    canon = gate.canonical()
    summary = dict(
        base,
        theta_hat=sw.estimates["theta"],
        gamma=canon.gamma,
        gamma_hat=est.estimates["gamma"],
        gamma_abs_err=abs(wrap_angle(est.estimates["gamma"] - canon.gamma)),
        zeta=canon.zeta,
        zeta_hat=est.estimates["zeta"],
        zeta_abs_err=abs(est.estimates["zeta"] - canon.zeta),
    )
    dets = [np.linalg.det(odd_matrix(rr)) for rr in recs]
    rows = _depth_rows(base, cfg.depths, arg_det=np.angle(dets), abs_det=np.abs(dets))
    return rows, [summary]


def _sq_summary(base, est, truth_mu, truth_zeta):
    return dict(
        base,
        mu=truth_mu,
        mu_hat=est.estimates["mu"],
        mu_abs_err=abs(est.estimates["mu"] - truth_mu),
        zeta=truth_zeta,
        zeta_hat=est.estimates["zeta"],
        zeta_abs_err=abs(est.estimates["zeta"] - truth_zeta),
    )


def _sq_rows(base, recs_by_z):
    rows = []
    for z, recs in recs_by_z.items():
        for rec in recs:
            s = rec.values[("Phi0", "signal")]
            rows.append(dict(base, z=float(z), depth=rec.depth, signal_re=float(s.real), signal_im=float(s.imag)))
    return rows


def _cell_single_qubit(cfg, point, pidx, r):
    m = _merged(cfg, point)
    sq = SingleQubitParams(mu=float(m.get("mu", np.pi)), zeta=float(m.get("sq_zeta", 0.0)), chi=float(m.get("sq_chi", 0.0)))
    noise = _noise_for(cfg, point, pidx)
    zs = cfg.options.get("z_offsets", list(DEFAULT_Z_OFFSETS))
    recs = run_single_qubit_family(sq, noise, cfg.depths, z_offsets=zs, realization=r)
    est = estimate_single_qubit(recs, sq)
    base = dict(point, realization=r)
    return _sq_rows(base, recs), [_sq_summary(base, est, sq.mu, sq.zeta)]


def _cell_relative_axis(cfg, point, pidx, r):
    m = _merged(cfg, point)
    x_pi = SingleQubitParams(mu=float(m.get("mu_pi", np.pi)), chi=float(m.get("chi_pi", 0.0)))
    x_half = SingleQubitParams(mu=float(m.get("mu_half", -np.pi / 2)), chi=float(m.get("chi_half", 0.0)))
    noise = _noise_for(cfg, point, pidx)
    zs = cfg.options.get("z_offsets", list(DEFAULT_Z_OFFSETS))
    recs = run_relative_axis_family(x_pi, x_half, noise, cfg.depths, z_offsets=zs, realization=r)
    est = estimate_single_qubit(recs, relative_axis_cycle(x_pi, x_half))
    base = dict(point, realization=r)
    truth = wrap_angle(x_half.chi - x_pi.chi)
    return _sq_rows(base, recs), [_sq_summary(base, est, np.pi / 2, truth)]


def _cell_crosstalk(cfg, point, pidx, r):
    m = _merged(cfg, point)
    noise = _noise_for(cfg, point, pidx)
    th = float(m.get("theta_xtalk", 0.42e-3))
    fam = run_crosstalk_family(
        th, float(m.get("xtalk_chi", 0.0)), noise, cfg.depths, idle_zeta=float(m.get("idle_zeta", 0.0)),
        realization=r, phase_tracking=float(m.get("phase_tracking", 0.0)),
    )
    est = estimate_theta_chi(fam["X"], fam["Y"])
    base = dict(point, realization=r)
    summary = dict(base, theta_xtalk=th, theta_hat=est.estimates["theta"], theta_abs_err=abs(est.estimates["theta"] - th), chi_hat=est.estimates["chi"])
    return _bloch_rows(base, fam["X"], fam["Y"]), [summary]


SNR_SHOTS = {"meadd": 1333, "phase_method": 2500, "tomography": 10000}


def _cell_snr(cfg, point, pidx, r):
    m = _merged(cfg, point)
    theta = float(m.get("theta", 0.01))
    zeta = float(m.get("zeta_over_theta", 0.0)) * theta
    gate = GateParams(theta=theta, zeta=zeta, chi=float(m.get("chi", 0.3)), phi=float(m.get("phi", np.pi)), gamma=float(m.get("gamma", 0.0)))
    protocol = m.get("protocol", "meadd")
    shots = dict(SNR_SHOTS, **cfg.options.get("shots", {}))[protocol]
    noise = NoiseConfig(seed=_cell_seed(cfg.seed, pidx), shots=int(shots), readout_flip=float(m.get("readout_flip", 0.0)))
    if protocol == "meadd":
        depths = cfg.options.get("meadd_depths", list(range(1, 9)))
        rx, ry = _swap_pair(gate, noise, depths, r)
        est = estimate_theta_chi(rx, ry).estimates["theta"]
    elif protocol == "phase_method":
        recs = run_baseline_phase_method(
            gate, noise, depths=cfg.options.get("pm_depths", [1, 2, 4, 8]),
            z_phases=cfg.options.get("pm_z_phases", [0.0, float(np.pi)]), realization=r,
        )
        est = estimate_theta_phase_method(recs)
    elif protocol == "tomography":
        est = estimate_theta_tomography(run_baseline_unitary_tomography(gate, noise, realization=r))
    else:
        raise ConfigError([f"grid.protocol: unknown protocol {protocol!r}"])
    row = dict(point, realization=r, theta_hat=float(est))
    return [row], []


_NAMED_GATES = {
    "CZ": lambda: np.diag([1, 1, 1, -1]).astype(complex),
    "sqrt_iSWAP": lambda: fundamental_entangler(np.pi / 4, 0.0),
    "iSWAP": lambda: fundamental_entangler(np.pi / 2, 0.0),
}


def named_gate(name: str) -> np.ndarray:
    """CZ, sqrt_iSWAP, iSWAP, or F(theta, phi) written as "F:theta,phi"."""
    if name in _NAMED_GATES:
        return _NAMED_GATES[name]()
    if name.startswith("F:"):
        t, p = (_eval_number(x) for x in name[2:].split(","))
        return fundamental_entangler(t, p)
    raise ConfigError([f"gate: unknown gate {name!r}"])


def _cell_robustness(cfg, point, pidx, r):
    m = _merged(cfg, point)
    name = m.get("gate_name", "CZ")
    rep = robustness_verdict(named_gate(name), m.get("dd", "XX"), bool(m.get("alternating_idle", False)), name=name)
    row = dict(
        point,
        min_cancel_cycles=str(rep.min_cancel_cycles),
        robust=int(rep.robust),
        flags=";".join(f"{s}{p}" for s, p in rep.trivial_flags) or "none",
        sym_phases_over_pi=" ".join(f"{x / np.pi:+.4f}" for x in rep.eigenphases["symmetric"]),
        anti_phases_over_pi=" ".join(f"{x / np.pi:+.4f}" for x in rep.eigenphases["antisymmetric"]),
    )
    return [row], [dict(point, robust=int(rep.robust), min_cancel_cycles=str(rep.min_cancel_cycles))]


def _cell_drag(cfg, point, pidx, r):
    m = _merged(cfg, point)
    eta = float(m.get("eta_T", 20.0))
    steps = int(cfg.options.get("steps", 2000))
    p = PulseEnvelope(amplitude=float(m.get("mu", np.pi)))
    plain = abs(integrate_three_level(p, eta, steps).leakage_amplitude)
    drag = abs(integrate_three_level(drag_envelope(p, eta), eta, steps).leakage_amplitude)
    row = dict(point, leakage_plain=plain, leakage_drag=drag, ratio=drag / plain)
    return [row], []


def _cell_variance(cfg, point, pidx, r):
    m = _merged(cfg, point)
    mode = m.get("mode", "single_qubit_phase")
    l1, l2 = float(m.get("lambda1", 0.0)), float(m.get("lambda2", 0.0))
    shots = int(m.get("m", 1000))
    reps = int(cfg.options.get("reps", 2000))
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(pidx, r)))
    base = dict(point, realization=r)
    if mode == "two_qubit_swap":
        scan = swap_depth_scan(float(m.get("theta", 0.01)), l1, l2, cfg.depths, shots, reps, rng)
        _, n_star = variance_bound(mode, l1, l2, shots, 1)
        rows = _depth_rows(base, scan["depths"], variance=scan["variance"])
        return rows, [dict(base, n_star=n_star, n_min=scan["n_min"], rel_dev=scan["n_min"] / n_star - 1)]
    varphi = float(m.get("varphi", 0.3))
    rows = []
    for n in cfg.depths:
        est = simulate_phase_estimator(varphi, l1, l2, int(n), shots, reps, rng)
        bound, n_star = variance_bound(mode, l1, l2, shots, n)
        rows.append(dict(base, depth=int(n), std=float(np.std(est)), bound_std=float(np.sqrt(bound))))
    i = int(np.argmin(np.abs(np.array(cfg.depths) - n_star)))
    at = rows[i]
    return rows, [dict(base, n_star=n_star, depth_near_n_star=at["depth"], std_over_bound=at["std"] / at["bound_std"])]


CELLS = {
    "cphase": _cell_cphase,
    "swap": _cell_swap,
    "floquet": _cell_floquet,
    "single_qubit": _cell_single_qubit,
    "relative_axis": _cell_relative_axis,
    "crosstalk": _cell_crosstalk,
    "snr_scan": _cell_snr,
    "robustness": _cell_robustness,
    "drag": _cell_drag,
    "variance_bound": _cell_variance,
}


def _run_cell(args):
    cfg, point, pidx, r = args
    return CELLS[cfg.kind](cfg, point, pidx, r)


# ------------------------------------------------------------ summaries


def _group_key(row: dict, keys) -> tuple:
    return tuple(row[k] for k in keys)


def _snr_summary(cfg, rows):
    keys = list(cfg.grid)
    groups: dict = {}
    for row in rows:
        groups.setdefault(_group_key(row, keys), []).append(row["theta_hat"])
    out = []
    for key, vals in groups.items():
        point = dict(zip(keys, key))
        theta = float(_merged(cfg, point).get("theta", 0.01))
        std = float(np.std(vals))
        out.append(dict(point, mean=float(np.mean(vals)), std=std, snr=abs(theta) / std if std > 0 else float("inf")))
    return out


def _drag_summary(cfg, rows):
    etas = np.array([r["eta_T"] for r in rows])
    plain = np.array([r["leakage_plain"] for r in rows])
    ratio = np.array([r["ratio"] for r in rows])
    if len(rows) < 2:
        return [dict(max_ratio=float(ratio.max()))]
    return [dict(plain_exponent=power_law_exponent(etas, plain), max_ratio=float(ratio.max()))]


SUMMARIZERS = {"snr_scan": _snr_summary, "drag": _drag_summary}


# ------------------------------------------------------------ tables


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def table_text(rows: list[dict], meta: dict) -> str:
    buf = io.StringIO()
    for k, v in meta.items():
        buf.write(f"# {k}: {v}\n")
    cols: list[str] = []
    for row in rows:
        for k in row:
            if k not in cols:
                cols.append(k)
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for row in rows:
        w.writerow([_fmt(row.get(c, "")) for c in cols])
    return buf.getvalue()


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_table(path: str | Path) -> tuple[dict, list[dict]]:
    meta, body = {}, []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.startswith("# "):
            k, _, v = line[2:].partition(": ")
            meta[k] = v
        else:
            body.append(line)
    rows = []
    for row in csv.DictReader(body):
        rows.append({k: _parse_cell(v) for k, v in row.items()})
    return meta, rows


def _parse_cell(v: str):
    try:
        return int(v)
    except ValueError:
        pass
    try:
        return float(v)
    except ValueError:
        return v


# ------------------------------------------------------------ run


@dataclass
class RunResult:
    config: ExperimentConfig
    rows: list[dict]
    summary: list[dict]
    checks: list[tuple[str, bool, str]]
    paths: list[Path]

    @property
    def passed(self) -> bool:
        return all(ok for _, ok, _ in self.checks)


def _select(rows, where: dict, where_min: dict | None = None) -> list[dict]:
    out = [r for r in rows if all(_close_eq(r.get(k), v) for k, v in where.items())]
    for k, v in (where_min or {}).items():
        out = [r for r in out if isinstance(r.get(k), (int, float)) and r[k] >= v - 1e-12]
    return out


def _expectation_values(e: dict, summary: list[dict]) -> list[float]:
    metric = e["metric"]
    rows = _select(summary, e.get("where", {}), e.get("where_min"))
    per = list(e.get("per", []))
    if "ratio" in e:
        spec = e["ratio"]
        per = list(spec.get("per", per))
        num = {_group_key(r, per): float(r[metric]) for r in _select(rows, spec["num"])}
        den = {_group_key(r, per): float(r[metric]) for r in _select(rows, spec["den"])}
        return [num[k] / den[k] for k in num if k in den]
    vals_by: dict = {}
    for r in rows:
        if metric in r:
            vals_by.setdefault(_group_key(r, per), []).append(float(r[metric]))
    if e.get("aggregate") == "ratio_max_min":
        return [max(v) / min(v) for v in vals_by.values()]
    return [v for vs in vals_by.values() for v in vs]


def evaluate_expectations(cfg: ExperimentConfig, summary: list[dict]) -> list[tuple[str, bool, str]]:
    """Check summary metrics against the config's declared bounds.

    Each expectation selects rows with ``where`` (equality) and ``where_min``
    (lower bounds), optionally reduces them (``aggregate: ratio_max_min`` per
    ``per`` group, or a ``ratio`` of ``num`` over ``den`` rows matched on
    ``per`` keys) and requires every value to respect ``min`` / ``max``.
    """
    out = []
    for e in cfg.expect:
        label = e.get("name", e["metric"])
        vals = _expectation_values(e, summary)
        if not vals:
            out.append((label, False, "no matching summary rows"))
            continue
        ok = True
        if "max" in e:
            ok &= all(v <= e["max"] for v in vals)
        if "min" in e:
            ok &= all(v >= e["min"] for v in vals)
        out.append((label, bool(ok), "values " + ", ".join(f"{v:.4g}" for v in vals)))
    return out


def _close_eq(a, b) -> bool:
    if isinstance(a, (int, float)) and isinstance(b, (int, float)):
        return abs(a - b) <= 1e-12 * max(1.0, abs(b))
    return a == b


def run_experiment(cfg: ExperimentConfig, jobs: int | None = 1, out_dir: str | Path | None = None, force: bool = False) -> RunResult:
    """Run every (grid point, realization) cell and write result and summary tables."""
    validate_config(cfg)
    points = grid_points(cfg)
    tasks = [(cfg, p, i, r) for i, p in enumerate(points) for r in range(cfg.realizations)]
    if jobs == 1 or len(tasks) == 1:
        parts = [_run_cell(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_run_cell, tasks, chunksize=max(1, len(tasks) // (8 * (jobs or os.cpu_count() or 1)))))
    rows = [row for part in parts for row in part[0]]
    summary = [row for part in parts for row in part[1]]
    if cfg.kind in SUMMARIZERS:
        summary = SUMMARIZERS[cfg.kind](cfg, rows)
    checks = evaluate_expectations(cfg, summary)
    meta = {"tool": f"meadd {__version__}", "kind": cfg.kind, "name": cfg.name, "config_hash": cfg.config_hash(), "seed": cfg.seed}
    out = Path(out_dir if out_dir is not None else cfg.output)
    paths = [out / f"{cfg.name}.csv", out / f"{cfg.name}_summary.csv"]
    if not force:
        for p in paths:
            if p.exists():
                old = read_table(p)[0].get("config_hash")
                if old and old != meta["config_hash"]:
                    raise ConfigMismatch(f"{p} was written by config {old[:12]}; rerun with --force to replace it")
    write_atomic(paths[0], table_text(rows, meta))
    write_atomic(paths[1], table_text(summary, meta))
    return RunResult(cfg, rows, summary, checks, paths)


# ------------------------------------------------------------ plot data


def _series_files(meta, rows, split_keys, x, y, out: Path, stem: str) -> list[Path]:
    groups: dict = {}
    for row in rows:
        groups.setdefault(tuple(row.get(k) for k in split_keys), []).append(row)
    paths = []
    for key, grp in groups.items():
        tag = "_".join(f"{k}={v}" for k, v in zip(split_keys, key))
        text = f"# source_config_hash: {meta.get('config_hash', '')}\n# series: {tag}\n{x} {y}\n"
        text += "".join(f"{_fmt(r[x])} {_fmt(r[y])}\n" for r in sorted(grp, key=lambda r: r[x]))
        p = out / f"{stem}_{tag}.dat"
        write_atomic(p, text)
        paths.append(p)
    return paths


def emit_plot_data(table: str | Path, kind: str, out_dir: str | Path | None = None) -> list[Path]:
    """Whitespace-separated x/y series files for a result or summary table."""
    meta, rows = read_table(table)
    out = Path(out_dir) if out_dir is not None else Path(table).parent / "plot"
    if kind == "fig6":
        rows = [dict(r, n=r["depth"]) for r in rows if "arg_det" in r]
        keys = [k for k in ("dd", "over_rotation") if rows and k in rows[0]]
        return _series_files(meta, rows, keys, "n", "arg_det", out, "fig6")
    if kind == "fig5":
        rows = [dict(r, zeta=r["zeta_over_theta"] * r["theta"]) for r in rows if "snr" in r]
        return _series_files(meta, rows, ["theta", "protocol"], "zeta", "snr", out, "fig5")
    if kind == "drag":
        rows = [r for r in rows if "leakage_plain" in r]
        return _series_files(meta, rows, [], "eta_T", "leakage_plain", out, "drag_plain") + _series_files(
            meta, rows, [], "eta_T", "leakage_drag", out, "drag_drag"
        )
    if kind == "variance":
        rows = [r for r in rows if "variance" in r or "std" in r]
        y = "variance" if rows and "variance" in rows[0] else "std"
        keys = [k for k in ("mode", "lambda1", "lambda2") if rows and k in rows[0]]
        return _series_files(meta, rows, keys, "depth", y, out, "variance")
    raise UnknownKind(f"no plot-data emitter for kind {kind!r}; known: fig5, fig6, drag, variance")
