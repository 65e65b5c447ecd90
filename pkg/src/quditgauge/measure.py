"""Emulation of the hardware measurement routes for the metric and flow vectors.

Three routes are provided besides exact linear algebra:

* overlap/parameter-shift: circuit observables are finite Fourier sums in a
  parameter shift; sampling them on a full-rank point set and solving the
  linear system gives analytical derivatives at zero shift.
* ancilla Hadamard tests: matrix and vector elements are (anti-)commutator
  expectations of Heisenberg-conjugated generators, assembled from four
  tests per unitary pair (phase 0 for anticommutators, pi/2 for commutators).
* global random unitaries: the connected anticommutator from second and
  third moments of Haar-random expectation values.

All estimators accept an optional shot count; with shots set, every
elementary probability is replaced by a binomial draw and every energy
readout by sampling the Hamiltonian spectrum.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .ansatz import Circuit
from .core import (
    LocalOperator,
    QuditRegister,
    apply,
    apply_controlled,
    attach_ancilla,
    lift_operator,
)
from .model import hamiltonian_unitary_pieces, unitary_split
from .oracle import Spectrum

MAX_PLAN_TRIES = 64
RANK_COND_LIMIT = 1e8


@dataclass(frozen=True)
class ShiftPlan:
    """Frequencies, evaluation points, and the design matrix exp(i a_l w_r)."""

    frequencies: np.ndarray
    points: np.ndarray
    design: np.ndarray


def _shifted(theta: np.ndarray, mu: int, a: float) -> np.ndarray:
    out = np.asarray(theta, dtype=float).copy()
    out[mu] += a
    return out


def _maybe_binomial(p: float, shots: int | None, rng) -> float:
    p = min(max(p, 0.0), 1.0)
    if shots is None:
        return p
    return rng.binomial(shots, p) / shots


def shift_overlap(
    circuit: Circuit,
    theta,
    mu: int,
    a: float,
    psi0: QuditRegister,
    shots: int | None = None,
    rng=None,
) -> float:
    """p_mu(a) = |<psi(theta + a e_mu)|psi(theta)>|^2."""
    base = circuit.state(theta, psi0)
    moved = circuit.state(_shifted(theta, mu, a), psi0)
    p = abs(np.vdot(moved.amplitudes, base.amplitudes)) ** 2
    return _maybe_binomial(p, shots, rng)


def shift_overlap_pair(
    circuit: Circuit,
    theta,
    mu: int,
    nu: int,
    a: float,
    psi0: QuditRegister,
    shots: int | None = None,
    rng=None,
) -> float:
    """f_{mu nu}(a) = |<psi(theta + a e_mu)|psi(theta + a e_nu)>|^2."""
    left = circuit.state(_shifted(theta, mu, a), psi0)
    right = circuit.state(_shifted(theta, nu, a), psi0)
    p = abs(np.vdot(left.amplitudes, right.amplitudes)) ** 2
    return _maybe_binomial(p, shots, rng)


def _dedupe(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values)
    vals = values[order]
    keep = [vals[0]]
    for v in vals[1:]:
        if v - keep[-1] > 1e-12:
            keep.append(v)
    return np.array(keep)


def _slot_shift_sums(circuit: Circuit, mu: int) -> np.ndarray:
    """All eigenvalues of the combined shift generator of one slot.

    A shift of slot mu multiplies one exponential per gate position, so the
    reachable phase slopes are Minkowski sums of the per-gate generator
    spectra.
    """
    sums = np.zeros(1)
    for pos in circuit.slot_positions(mu):
        spec = np.linalg.eigvalsh(circuit.gates[pos].generator.matrix)
        sums = _dedupe((sums[:, None] + spec[None, :]).ravel())
    return sums


def plan_shifts(circuit: Circuit, slots: Sequence[int], seed: int = 0) -> ShiftPlan:
    """Frequency set and full-rank evaluation points for one overlap function."""
    slots = tuple(slots)
    if len(slots) == 1:
        amp = _slot_shift_sums(circuit, slots[0])
    elif len(slots) == 2:
        a = _slot_shift_sums(circuit, slots[0])
        b = _slot_shift_sums(circuit, slots[1])
        amp = _dedupe((b[:, None] - a[None, :]).ravel())
    else:
        raise ValueError("plans cover one slot (p, v) or a slot pair (f)")
    freqs = _dedupe((amp[:, None] - amp[None, :]).ravel())
    r = len(freqs)
    if r == 1:
        points = np.zeros(1)
        return ShiftPlan(freqs, points, np.ones((1, 1), dtype=complex))
    wmax = float(np.max(np.abs(freqs)))
    # The window must resolve the smallest frequency gap, not just the
    # largest frequency: a grid scaled by 1/wmax alone goes rank-deficient
    # as soon as the spectrum is finer than unit spacing.
    gap = float(np.min(np.diff(freqs)))
    rng = np.random.default_rng(seed)
    grid = (np.arange(r) + 0.5) / r * 2.0 * np.pi - np.pi
    candidates = [grid / wmax, grid / gap]
    for attempt in range(MAX_PLAN_TRIES):
        if attempt < len(candidates):
            points = candidates[attempt]
        else:
            points = np.sort(rng.uniform(-np.pi, np.pi, r)) / gap
        design = np.exp(1.0j * points[:, None] * freqs[None, :])
        if np.linalg.cond(design) < RANK_COND_LIMIT:
            return ShiftPlan(freqs, points, design)
    raise RuntimeError(f"no full-rank shift design after {MAX_PLAN_TRIES} draws")


def fit_fourier(plan: ShiftPlan, values: Sequence[float]) -> np.ndarray:
    """Solve the linear system for the Fourier coefficients."""
    values = np.asarray(values, dtype=float)
    if values.shape != plan.points.shape:
        raise ValueError("one sample per evaluation point is required")
    if plan.design.shape[0] == plan.design.shape[1]:
        return np.linalg.solve(plan.design, values.astype(complex))
    coeffs, *_ = np.linalg.lstsq(plan.design, values.astype(complex), rcond=None)
    return coeffs


def fourier_value(plan: ShiftPlan, coeffs: np.ndarray, a: float) -> float:
    return float(np.real(np.sum(coeffs * np.exp(1.0j * a * plan.frequencies))))


def fourier_derivative(plan: ShiftPlan, coeffs: np.ndarray, order: int = 1) -> float:
    """Analytical derivative of the fitted sum at zero shift."""
    return float(np.real(np.sum(coeffs * (1.0j * plan.frequencies) ** order)))


def _fit_p_curvature(circuit, theta, mu, psi0, shots, rng, seed) -> float:
    plan = plan_shifts(circuit, (mu,), seed=seed)
    vals = [shift_overlap(circuit, theta, mu, a, psi0, shots, rng) for a in plan.points]
    return fourier_derivative(plan, fit_fourier(plan, vals), 2)


def metric_from_shifts(
    circuit: Circuit,
    theta,
    mu: int,
    nu: int,
    psi0: QuditRegister,
    shots: int | None = None,
    seed: int = 0,
) -> float:
    """One metric element from overlap curvatures.

    Diagonal: M = -p''(0)/2.  Off-diagonal: M = [f'' - p_mu'' - p_nu'']/4.
    The signs are pinned to the exact metric convention.
    """
    rng = np.random.default_rng(seed) if shots is not None else None
    d2p_mu = _fit_p_curvature(circuit, theta, mu, psi0, shots, rng, seed)
    if mu == nu:
        return -0.5 * d2p_mu
    d2p_nu = _fit_p_curvature(circuit, theta, nu, psi0, shots, rng, seed)
    plan = plan_shifts(circuit, (mu, nu), seed=seed)
    vals = [shift_overlap_pair(circuit, theta, mu, nu, a, psi0, shots, rng) for a in plan.points]
    d2f = fourier_derivative(plan, fit_fourier(plan, vals), 2)
    return 0.25 * (d2f - d2p_mu - d2p_nu)


def metric_matrix_from_shifts(
    circuit: Circuit,
    theta,
    psi0: QuditRegister,
    shots: int | None = None,
    seed: int = 0,
) -> np.ndarray:
    npar = circuit.num_params
    rng = np.random.default_rng(seed) if shots is not None else None
    d2p = np.array([_fit_p_curvature(circuit, theta, mu, psi0, shots, rng, seed) for mu in range(npar)])
    m = np.diag(-0.5 * d2p)
    for mu in range(npar):
        for nu in range(mu + 1, npar):
            plan = plan_shifts(circuit, (mu, nu), seed=seed)
            vals = [
                shift_overlap_pair(circuit, theta, mu, nu, a, psi0, shots, rng) for a in plan.points
            ]
            d2f = fourier_derivative(plan, fit_fourier(plan, vals), 2)
            m[mu, nu] = m[nu, mu] = 0.25 * (d2f - d2p[mu] - d2p[nu])
    return m


def _energy_readout(psi: QuditRegister, spectrum: Spectrum, shots, rng) -> float:
    weights = np.abs(spectrum.eigenvectors.conj().T @ psi.amplitudes) ** 2
    if shots is None:
        return float(np.sum(spectrum.eigenvalues * weights))
    weights = weights / weights.sum()
    draws = rng.choice(spectrum.eigenvalues, size=shots, p=weights)
    return float(np.mean(draws))


def gradient_from_shifts(
    circuit: Circuit,
    theta,
    mu: int,
    spectrum: Spectrum,
    psi0: QuditRegister,
    shots: int | None = None,
    seed: int = 0,
) -> float:
    """dE/dtheta_mu as the first derivative of the fitted energy curve."""
    rng = np.random.default_rng(seed) if shots is not None else None
    plan = plan_shifts(circuit, (mu,), seed=seed)
    vals = []
    for a in plan.points:
        psi = circuit.state(_shifted(np.asarray(theta, float), mu, a), psi0)
        vals.append(_energy_readout(psi, spectrum, shots, rng))
    return fourier_derivative(plan, fit_fourier(plan, vals), 1)


def hadamard_test(
    psi0: QuditRegister,
    steps: Sequence[tuple[LocalOperator, bool]],
    alpha: float = 0.0,
    shots: int | None = None,
    rng=None,
) -> float:
    """P(+) of the ancilla after the given (optionally controlled) word.

    The ancilla starts in (|0> + e^{i alpha} |1>)/sqrt(2); for a word W the
    outcome is P(+) = (1 + Re(e^{i alpha} <W>))/2.
    """
    state = attach_ancilla(psi0, alpha)
    for op, controlled in steps:
        if controlled:
            if not op.is_unitary(1e-10):
                raise ValueError("controlled operations must be unitary")
            state = apply_controlled(state, op)
        else:
            state = apply(state, op)
    half = state.local_dim**state.num_qudits
    plus = (state.amplitudes[:half] + state.amplitudes[half:]) / np.sqrt(2.0)
    p = float(np.linalg.norm(plus) ** 2)
    return _maybe_binomial(p, shots, rng)


def _word_steps(circuit: Circuit, theta, insertions):
    """Step list realizing <O1~ O2~ ...> with each O conjugated up to its position.

    ``insertions`` is a list of (op, position) in operator order (leftmost
    first); position p means conjugation by the first p gates.  The word is
    evaluated right to left: run forward to the rightmost insertion, then
    walk the circuit forward or backward between control points.
    """
    theta = np.asarray(theta, dtype=float)
    d = circuit.local_dim
    gate_mats = [g.matrix(theta[g.slot], d) for g in circuit.gates]
    steps: list[tuple[LocalOperator, bool]] = []
    ordered = list(reversed(insertions))  # rightmost factor acts first
    cursor = 0
    for op, pos in ordered:
        if pos > cursor:
            steps.extend((gate_mats[g], False) for g in range(cursor, pos))
        elif pos < cursor:
            steps.extend((gate_mats[g].dagger(), False) for g in range(cursor - 1, pos - 1, -1))
        steps.append((op, True))
        cursor = pos
    return steps


def _word_component(circuit, theta, psi0, insertions, alpha, shots, rng) -> float:
    p = hadamard_test(psi0, _word_steps(circuit, theta, insertions), alpha, shots, rng)
    if alpha == 0.0:
        return 2.0 * p - 1.0  # Re<W>
    return 1.0 - 2.0 * p  # Im<W>


def slot_unitary_pieces(circuit: Circuit, mu: int) -> list[tuple[float, LocalOperator, int]]:
    """Weighted unitaries (with insertion positions) summing to the slot generator."""
    pieces = []
    for pos in circuit.slot_positions(mu):
        gen = circuit.gates[pos].generator
        split = unitary_split(gen)
        pieces.append((split.norm / 2.0, split.unitary, pos + 1))
        pieces.append((split.norm / 2.0, split.unitary.dagger(), pos + 1))
    return pieces


def _single_expectation(circuit, theta, psi0, pieces, shots, rng) -> float:
    total = 0.0
    for coef, op, pos in pieces:
        total += coef * _word_component(circuit, theta, psi0, [(op, pos)], 0.0, shots, rng)
    return total


def element_from_hadamard(
    kind: str,
    circuit: Circuit,
    theta,
    mu: int,
    nu: int | None = None,
    ham_pieces: Sequence[tuple[float, LocalOperator]] | None = None,
    psi0: QuditRegister | None = None,
    shots: int | None = None,
    seed: int = 0,
) -> float:
    """Assemble one matrix or vector element from Hadamard tests.

    kind 'M':  (1/2) <{G~_mu, G~_nu}>_0 - <G~_mu>_0 <G~_nu>_0
    kind 'VI': i <[G~_mu, H~]>_0
    kind 'VR': <{G~_mu, H~}>_0 - 2 <G~_mu>_0 <H~>_0
    """
    rng = np.random.default_rng(seed) if shots is not None else None
    left = slot_unitary_pieces(circuit, mu)
    end = len(circuit.gates)
    if kind == "M":
        if nu is None:
            raise ValueError("metric elements need two slot indices")
        right = slot_unitary_pieces(circuit, nu)
    elif kind in ("VI", "VR"):
        if ham_pieces is None:
            raise ValueError("vector elements need the Hamiltonian as unitaries")
        right = [(coef, op, end) for coef, op in ham_pieces]
    else:
        raise ValueError(f"unknown element kind {kind!r}")

    alpha = np.pi / 2.0 if kind == "VI" else 0.0
    pair_sum = 0.0
    for c1, u1, p1 in left:
        for c2, u2, p2 in right:
            pair_sum += c1 * c2 * _word_component(
                circuit, theta, psi0, [(u1, p1), (u2, p2)], alpha, shots, rng
            )
    if kind == "VI":
        return -2.0 * pair_sum
    if kind == "M":
        return pair_sum - _single_expectation(circuit, theta, psi0, left, shots, rng) * (
            _single_expectation(circuit, theta, psi0, right, shots, rng)
        )
    single_mu = _single_expectation(circuit, theta, psi0, left, shots, rng)
    single_h = _single_expectation(circuit, theta, psi0, right, shots, rng)
    return 2.0 * pair_sum - 2.0 * single_mu * single_h


def haar_unitary(dim: int, rng) -> np.ndarray:
    """Haar-distributed unitary via phase-corrected QR of a Ginibre matrix."""
    z = (rng.standard_normal((dim, dim)) + 1.0j * rng.standard_normal((dim, dim))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    phases = np.diag(r) / np.abs(np.diag(r))
    return q * phases


def randomized_connected_anticommutator(
    a: np.ndarray,
    b: np.ndarray,
    psi0: np.ndarray,
    samples: int,
    rng,
) -> float:
    """Connected anticommutator <{A, B}>_0 - 2<A>_0<B>_0 from global random unitaries.

    Averages <A>_u <B>_u [(N+2) <rho_0>_u - 1] over Haar draws; the trace
    terms and the connected correction are subtracted exactly.
    """
    dim = a.shape[0]
    if dim > 81:
        raise ValueError("randomized estimation is limited to dimension <= 81")
    if samples < 1:
        raise ValueError("samples must be >= 1")
    acc = 0.0
    for _ in range(samples):
        u = haar_unitary(dim, rng)
        phi = u @ psi0
        ea = float(np.vdot(phi, a @ phi).real)
        eb = float(np.vdot(phi, b @ phi).real)
        r0 = float(abs(np.vdot(psi0, phi)) ** 2)
        acc += ea * eb * ((dim + 2.0) * r0 - 1.0)
    bracket = dim * (dim + 1.0) * acc / samples
    ea0 = float(np.vdot(psi0, a @ psi0).real)
    eb0 = float(np.vdot(psi0, b @ psi0).real)
    bracket -= float(np.trace(a).real) * eb0 + float(np.trace(b).real) * ea0
    return bracket - 2.0 * ea0 * eb0


def heisenberg_slot_generator(circuit: Circuit, theta, mu: int) -> np.ndarray:
    """Dense sum over slot positions of U_{1:p}^dag G_p U_{1:p}."""
    theta = np.asarray(theta, dtype=float)
    n, d = circuit.num_qudits, circuit.local_dim
    dim = d**n
    prefix = np.eye(dim, dtype=complex)
    prefixes = {}
    positions = set(circuit.slot_positions(mu))
    for p, g in enumerate(circuit.gates):
        prefix = lift_operator(g.matrix(theta[g.slot], d), n) @ prefix
        if p in positions:
            prefixes[p] = prefix.copy()
    total = np.zeros((dim, dim), dtype=complex)
    for p in positions:
        gen = lift_operator(circuit.gates[p].generator, n)
        total += prefixes[p].conj().T @ gen @ prefixes[p]
    return total


def circuit_unitary(circuit: Circuit, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    n, d = circuit.num_qudits, circuit.local_dim
    mat = np.eye(d**n, dtype=complex)
    for g in circuit.gates:
        mat = lift_operator(g.matrix(theta[g.slot], d), n) @ mat
    return mat


def make_estimator(est_cfg, ctx):
    """Driver hook: (theta, kind) -> EomQuantities through the selected route."""
    from .varsim import EomQuantities  # deferred to avoid an import cycle

    circuit, psi0 = ctx.circuit, ctx.psi0
    counter = {"step": 0}

    def _seed() -> int:
        counter["step"] += 1
        return int(np.random.SeedSequence([est_cfg.seed, counter["step"]]).generate_state(1)[0])

    def _pack(m, v):
        w = np.linalg.eigvalsh(m)
        return EomQuantities(m, v, float(w[0]), float(w[-1]))

    if est_cfg.mode == "shift":
        def est(theta, kind):
            if kind != "imag":
                raise ValueError("the shift route provides the metric and dE/dtheta only")
            seed = _seed() if est_cfg.shots is not None else 0
            m = metric_matrix_from_shifts(circuit, theta, psi0, est_cfg.shots, seed)
            v = np.array(
                [
                    gradient_from_shifts(circuit, theta, mu, ctx.spectrum, psi0, est_cfg.shots, seed)
                    for mu in range(circuit.num_params)
                ]
            )
            return _pack(m, v)

        return est

    if est_cfg.mode == "hadamard":
        pieces = hamiltonian_unitary_pieces(ctx.ham_spec)

        def est(theta, kind):
            seed = _seed() if est_cfg.shots is not None else 0
            npar = circuit.num_params
            m = np.zeros((npar, npar))
            for mu in range(npar):
                for nu in range(mu, npar):
                    m[mu, nu] = m[nu, mu] = element_from_hadamard(
                        "M", circuit, theta, mu, nu, None, psi0, est_cfg.shots, seed
                    )
            label = "VI" if kind == "imag" else "VR"
            v = np.array(
                [
                    element_from_hadamard(
                        label, circuit, theta, mu, None, pieces, psi0, est_cfg.shots, seed
                    )
                    for mu in range(npar)
                ]
            )
            return _pack(m, v)

        return est

    if est_cfg.mode == "randomized":
        def est(theta, kind):
            if kind != "real":
                raise ValueError("the randomized route only provides anticommutators")
            rng = np.random.default_rng(_seed())
            npar = circuit.num_params
            gens = [heisenberg_slot_generator(circuit, theta, mu) for mu in range(npar)]
            u = circuit_unitary(circuit, theta)
            h_tilde = u.conj().T @ ctx.ham @ u
            amps = psi0.amplitudes
            m = np.zeros((npar, npar))
            for mu in range(npar):
                for nu in range(mu, npar):
                    m[mu, nu] = m[nu, mu] = 0.5 * randomized_connected_anticommutator(
                        gens[mu], gens[nu], amps, est_cfg.samples, rng
                    )
            v = np.array(
                [
                    randomized_connected_anticommutator(gens[mu], h_tilde, amps, est_cfg.samples, rng)
                    for mu in range(npar)
                ]
            )
            return _pack(m, v)

        return est

    raise ValueError(f"unknown estimator mode {est_cfg.mode!r}")
