"""McLachlan metric/vector computation and the imaginary-/real-time drivers.

Flow conventions, fixed once by requiring energy descent (imaginary time)
and reproduction of exact single-generator evolution (real time) with the
metric normalized as the real part of the quantum geometric tensor:

    imaginary time:  M theta_dot = -(1/2) dE/dtheta
    real time:       M theta_dot = +(1/2) V_real
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import model as model_mod
from . import oracle
from .ansatz import Circuit, chain_circuit, plaquette_circuit, random_initial_params
from .config import RunConfig
from .core import QuditRegister, basis_state, entanglement_entropy, lift_diagonal
from .model import HamiltonianSpec, materialize


@dataclass(frozen=True)
class EomQuantities:
    """Metric, flow vector, and spectral diagnostics of the metric."""

    m: np.ndarray
    v: np.ndarray
    eig_min: float
    eig_max: float


@dataclass(frozen=True)
class SolveInfo:
    eig_min: float
    eig_max: float
    rank: int
    retained_cond: float


@dataclass(frozen=True)
class TrajectoryRecord:
    step: int
    time: float
    theta: np.ndarray
    energy: float
    fidelity: float
    entropy: float
    site_numbers: np.ndarray
    grad_norm: float
    m_cond: float


def _tangent_overlaps(circuit: Circuit, theta, psi0: QuditRegister):
    psi, tang = circuit.tangents(theta, psi0)
    ip = tang.conj().T @ psi.amplitudes  # <d_mu psi | psi>
    return psi, tang, ip


def metric_tensor(circuit: Circuit, theta, psi0: QuditRegister) -> np.ndarray:
    """Real part of the quantum geometric tensor on the variational manifold."""
    _, tang, ip = _tangent_overlaps(circuit, theta, psi0)
    gram = tang.conj().T @ tang
    m = gram.real - (ip[:, None] * ip.conj()[None, :]).real
    return (m + m.T) / 2.0


def energy_gradient(circuit: Circuit, theta, ham: np.ndarray, psi0: QuditRegister) -> np.ndarray:
    """dE/dtheta = 2 Re <d_mu psi | H | psi>."""
    psi, tang, _ = _tangent_overlaps(circuit, theta, psi0)
    if ham.shape[0] != psi.dim:
        raise ValueError("Hamiltonian dimension does not match the register")
    hpsi = ham @ psi.amplitudes
    return 2.0 * (tang.conj().T @ hpsi).real


def real_time_vector(circuit: Circuit, theta, ham: np.ndarray, psi0: QuditRegister) -> np.ndarray:
    """Flow vector for real-time evolution, including the global-phase correction."""
    psi, tang, ip = _tangent_overlaps(circuit, theta, psi0)
    if ham.shape[0] != psi.dim:
        raise ValueError("Hamiltonian dimension does not match the register")
    hpsi = ham @ psi.amplitudes
    energy = float(np.vdot(psi.amplitudes, hpsi).real)
    return 2.0 * (tang.conj().T @ hpsi).imag + 2.0 * energy * np.conj(ip).imag


def exact_eom(circuit: Circuit, theta, ham: np.ndarray, psi0: QuditRegister, kind: str) -> EomQuantities:
    """Exact-path metric and flow vector with spectral diagnostics."""
    psi, tang, ip = _tangent_overlaps(circuit, theta, psi0)
    gram = tang.conj().T @ tang
    m = gram.real - (ip[:, None] * ip.conj()[None, :]).real
    m = (m + m.T) / 2.0
    hpsi = ham @ psi.amplitudes
    if kind == "imag":
        v = 2.0 * (tang.conj().T @ hpsi).real
    elif kind == "real":
        energy = float(np.vdot(psi.amplitudes, hpsi).real)
        v = 2.0 * (tang.conj().T @ hpsi).imag + 2.0 * energy * np.conj(ip).imag
    else:
        raise ValueError(f"kind must be 'imag' or 'real', got {kind!r}")
    w = np.linalg.eigvalsh(m)
    return EomQuantities(m, v, float(w[0]), float(w[-1]))


def solve_flow(
    m: np.ndarray,
    v: np.ndarray,
    cutoff: float = 1e-8,
    tikhonov: float = 0.0,
) -> tuple[np.ndarray, SolveInfo]:
    """Least-squares solve of M theta_dot = v by spectral pseudo-inversion.

    Eigendirections below ``cutoff`` times the largest eigenvalue are
    discarded; an optional Tikhonov shift is applied first.
    """
    m = np.asarray(m, dtype=float)
    v = np.asarray(v, dtype=float)
    if m.shape != (v.size, v.size):
        raise ValueError(f"shape mismatch: M is {m.shape}, v has {v.size} entries")
    scale = max(1.0, float(np.max(np.abs(m))))
    asym = np.max(np.abs(m - m.T))
    if asym > 1e-8 * scale:
        raise ValueError(f"metric is not symmetric: max asymmetry {asym:.3e}")
    sym = (m + m.T) / 2.0
    if tikhonov > 0.0:
        sym = sym + tikhonov * np.eye(v.size)
    w, q = np.linalg.eigh(sym)
    eig_min, eig_max = float(w[0]), float(w[-1])
    keep = w >= cutoff * max(eig_max, 0.0)
    if eig_max <= 0.0:
        keep = np.zeros_like(w, dtype=bool)
    inv = np.where(keep, 1.0 / np.where(keep, w, 1.0), 0.0)
    theta_dot = q @ (inv * (q.T @ v))
    kept = w[keep]
    cond = float(kept[-1] / kept[0]) if kept.size else float("inf")
    return theta_dot, SolveInfo(eig_min, eig_max, int(keep.sum()), cond)


def integrate_step(
    theta: np.ndarray,
    deriv: Callable[[np.ndarray], np.ndarray],
    dt: float,
    method: str = "euler",
    k1: np.ndarray | None = None,
) -> np.ndarray:
    """One explicit step of the parameter flow."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if method == "euler":
        if k1 is None:
            k1 = deriv(theta)
        return theta + dt * k1
    if method == "rk4":
        if k1 is None:
            k1 = deriv(theta)
        k2 = deriv(theta + 0.5 * dt * k1)
        k3 = deriv(theta + 0.5 * dt * k2)
        k4 = deriv(theta + dt * k3)
        return theta + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    raise ValueError(f"unknown integrator {method!r}")


def build_hamiltonian(cfg: RunConfig) -> HamiltonianSpec:
    m = cfg.model
    if m.dimension == 1:
        return model_mod.chain_hamiltonian(
            m.num_links, m.g, m.mass, m.electric_offset, m.link_amplitude, m.hopping_scale, m.boundary
        )
    return model_mod.plaquette_hamiltonian(
        m.g, m.mass, m.electric_offset, m.link_amplitude, m.hopping_scale, m.boundary
    )


def build_circuit(cfg: RunConfig) -> Circuit:
    a = cfg.ansatz
    mode = "imag" if cfg.evolution.mode == "vite" else "real"
    if a.family == "chain":
        return chain_circuit(cfg.model.num_links, a.layers, mode, cfg.model.local_dim)
    return plaquette_circuit(
        a.layers,
        mode,
        a.include_plaquette_gate,
        cfg.model.electric_offset,
        cfg.model.link_amplitude,
        cfg.model.boundary,
    )


def entropy_cut(cfg: RunConfig) -> tuple[int, ...]:
    if cfg.model.dimension == 1:
        return tuple(range(cfg.model.num_links // 2))
    return (0, 1)


def designated_site(cfg: RunConfig) -> int:
    """Site whose occupation is tracked in quench runs."""
    if cfg.model.dimension == 1:
        return (cfg.model.num_links + 1) // 2
    return 0  # bottom-left corner


@dataclass
class RunContext:
    """Everything a driver reuses across steps."""

    ham_spec: HamiltonianSpec
    ham: np.ndarray
    spectrum: oracle.Spectrum
    circuit: Circuit
    psi0: QuditRegister
    n_diags: np.ndarray  # (num_sites, dim) real
    cut: tuple[int, ...]

    @classmethod
    def from_config(cls, cfg: RunConfig) -> "RunContext":
        ham_spec = build_hamiltonian(cfg)
        ham = materialize(ham_spec)
        spectrum = oracle.eigendecompose(ham)
        circuit = build_circuit(cfg)
        n = ham_spec.num_qudits
        psi0 = basis_state(n, cfg.model.local_dim, [1] * n)
        ops = model_mod.fermion_number_ops(ham_spec.lattice, cfg.model.electric_offset)
        n_diags = np.stack([lift_diagonal(op, n).real for op in ops])
        return cls(ham_spec, ham, spectrum, circuit, psi0, n_diags, entropy_cut(cfg))


def _make_estimator(cfg: RunConfig, ctx: RunContext):
    mode = cfg.estimator.mode
    if mode == "exact":
        def est(theta, kind):
            return exact_eom(ctx.circuit, theta, ctx.ham, ctx.psi0, kind)

        return est
    from . import measure  # deferred: measure depends on model/ansatz only

    return measure.make_estimator(cfg.estimator, ctx)


def snapshot(
    ctx: RunContext,
    theta: np.ndarray,
    step: int,
    time: float,
    reference: np.ndarray,
    eom: EomQuantities,
    cond: float,
) -> TrajectoryRecord:
    psi = ctx.circuit.state(theta, ctx.psi0)
    amp = psi.amplitudes
    energy = float(np.vdot(amp, ctx.ham @ amp).real)
    fid = float(min(abs(np.vdot(reference, amp)) ** 2, 1.0 + 1e-10))
    ent = entanglement_entropy(psi, ctx.cut)
    probs = np.abs(amp) ** 2
    numbers = ctx.n_diags @ probs
    return TrajectoryRecord(
        step, time, theta.copy(), energy, fid, ent, numbers, float(np.linalg.norm(eom.v)), cond
    )


def run_ground_search(cfg: RunConfig, ctx: RunContext | None = None):
    """Imaginary-time flow from a random start; records one row per step."""
    if cfg.evolution.mode != "vite":
        raise ValueError("ground search runs in vite mode")
    ctx = ctx or RunContext.from_config(cfg)
    est = _make_estimator(cfg, ctx)
    ev = cfg.evolution
    theta = random_initial_params(ctx.circuit, cfg.ansatz.init_seed, cfg.ansatz.init_range)

    ground = ctx.spectrum
    if ground.ground_multiplicity() > 1:
        reference = None  # fidelity from the projector instead
    else:
        reference = ground.ground_vector

    def deriv(th):
        eom = est(th, "imag")
        dot, _ = solve_flow(eom.m, -0.5 * eom.v, ev.cutoff, ev.tikhonov)
        return dot

    def energy_of(th):
        amp = ctx.circuit.state(th, ctx.psi0).amplitudes
        return float(np.vdot(amp, ctx.ham @ amp).real)

    records: list[TrajectoryRecord] = []
    tau = 0.0
    for k in range(ev.steps + 1):
        eom = est(theta, "imag")
        dot, info = solve_flow(eom.m, -0.5 * eom.v, ev.cutoff, ev.tikhonov)
        if reference is None:
            psi = ctx.circuit.state(theta, ctx.psi0)
            rec = snapshot(ctx, theta, k, tau, psi.amplitudes, eom, info.retained_cond)
            rec = TrajectoryRecord(
                rec.step,
                rec.time,
                rec.theta,
                rec.energy,
                ground.ground_projector_overlap(psi.amplitudes),
                rec.entropy,
                rec.site_numbers,
                rec.grad_norm,
                rec.m_cond,
            )
        else:
            rec = snapshot(ctx, theta, k, tau, reference, eom, info.retained_cond)
        records.append(rec)
        if k == ev.steps or rec.grad_norm < ev.grad_tolerance:
            break
        # The continuous flow can only lower the energy, so a candidate step
        # that raises it has overshot: halve the step until it descends.
        dt = ev.dt
        for _ in range(40):
            candidate = integrate_step(theta, deriv, dt, ev.integrator, k1=dot)
            if energy_of(candidate) <= rec.energy + 1e-9:
                break
            dt /= 2.0
        theta = candidate
        tau += dt
    return records, ctx


def run_quench(cfg: RunConfig, ctx: RunContext | None = None):
    """Real-time flow from theta = 0; returns records plus the exact reference series."""
    if cfg.evolution.mode != "vrte":
        raise ValueError("quench runs in vrte mode")
    ctx = ctx or RunContext.from_config(cfg)
    est = _make_estimator(cfg, ctx)
    ev = cfg.evolution
    theta = np.zeros(ctx.circuit.num_params)

    def deriv(th):
        eom = est(th, "real")
        dot, _ = solve_flow(eom.m, 0.5 * eom.v, ev.cutoff, ev.tikhonov)
        return dot

    records: list[TrajectoryRecord] = []
    exact_rows: list[dict] = []
    for k in range(ev.steps + 1):
        t = k * ev.dt
        ref = oracle.evolve_real(ctx.spectrum, ctx.psi0.amplitudes, t)
        eom = est(theta, "real")
        dot, info = solve_flow(eom.m, 0.5 * eom.v, ev.cutoff, ev.tikhonov)
        records.append(snapshot(ctx, theta, k, t, ref, eom, info.retained_cond))
        probs = np.abs(ref) ** 2
        ref_state = QuditRegister(ctx.psi0.num_qudits, ctx.psi0.local_dim, ref)
        exact_rows.append(
            {
                "time": t,
                "numbers": ctx.n_diags @ probs,
                "entropy": entanglement_entropy(ref_state, ctx.cut),
            }
        )
        if k == ev.steps:
            break
        theta = integrate_step(theta, deriv, ev.dt, ev.integrator, k1=dot)
    return records, exact_rows, ctx


def oscillation_period(times: Sequence[float], values: Sequence[float]) -> float:
    """Peak-to-peak spacing of a sampled oscillating series."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    peaks = [
        i
        for i in range(1, len(v) - 1)
        if v[i] >= v[i - 1] and v[i] > v[i + 1]
    ]
    if len(peaks) < 2:
        raise ValueError("fewer than two maxima in the series")
    gaps = np.diff(t[peaks])
    return float(np.mean(gaps))
