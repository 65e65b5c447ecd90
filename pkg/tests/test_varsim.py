"""Metric/vector computation, flow solving, and the evolution drivers."""
import dataclasses

import numpy as np
import pytest

from quditgauge.ansatz import Circuit, Gate, chain_circuit, plaquette_circuit
from quditgauge.config import AnsatzConfig, EvolutionConfig, ModelConfig, RunConfig
from quditgauge.core import LocalOperator, basis_state, embedded_pauli
from quditgauge.model import chain_hamiltonian, materialize
from quditgauge.oracle import finite_difference
from quditgauge.varsim import (
    RunContext,
    energy_gradient,
    exact_eom,
    integrate_step,
    metric_tensor,
    oscillation_period,
    real_time_vector,
    run_ground_search,
    run_quench,
    solve_flow,
)

from helpers import kron_lift, random_state


def vacuum(n):
    return basis_state(n, 3, [1] * n)


def single_gate_circuit(generator: LocalOperator, n: int) -> Circuit:
    gate = Gate("rotation", generator.targets, 0, generator, (1, 2), 0.0)
    # kind 'rotation' with levels (1,2), phi=0 has generator sigma_X^{12}/2
    return Circuit((gate,), 1, n, 3, 1, "toy")


class TestMetricExact:
    def test_single_parameter_variance_formula(self):
        # one gate exp(-i theta G): M = <G^2> - <G>^2 in the input state
        n = 1
        gen = LocalOperator(3, (0,), embedded_pauli(3, 1, 2, "X").matrix / 2.0, hermitian=True)
        circ = single_gate_circuit(gen, n)
        rng = np.random.default_rng(2)
        psi = random_state(3, rng)
        reg = basis_state(n, 3, [0]).__class__(n, 3, psi)
        theta = np.array([0.37])
        m = metric_tensor(circ, theta, reg)
        g = gen.matrix
        want = np.vdot(psi, g @ g @ psi).real - np.vdot(psi, g @ psi).real ** 2
        assert m[0, 0] == pytest.approx(want, abs=1e-12)

    def test_zero_tangents_zero_metric(self):
        # the 1,2 rotation annihilates nothing generally, so use a state the
        # generator kills: the sigma^{1,2} block acts trivially on |0>
        gen = LocalOperator(3, (0,), embedded_pauli(3, 1, 2, "X").matrix / 2.0, hermitian=True)
        circ = single_gate_circuit(gen, 1)
        reg = basis_state(1, 3, [0])
        m = metric_tensor(circ, np.array([0.9]), reg)
        assert abs(m[0, 0]) < 1e-14

    def test_matches_mixed_overlap_curvature(self):
        # M_{mu nu} = (1/2) d^2/da db |<psi(theta+a e_mu)|psi(theta+b e_nu)>|^2
        circ = chain_circuit(3, 1, "imag")
        psi0 = vacuum(3)
        rng = np.random.default_rng(4)
        theta = rng.uniform(-np.pi, np.pi, circ.num_params)
        m = metric_tensor(circ, theta, psi0)
        h = 1e-4

        def overlap(a, b, mu, nu):
            ta, tb = theta.copy(), theta.copy()
            ta[mu] += a
            tb[nu] += b
            return (
                abs(
                    np.vdot(
                        circ.state(ta, psi0).amplitudes, circ.state(tb, psi0).amplitudes
                    )
                )
                ** 2
            )

        for mu in range(0, circ.num_params, 3):
            for nu in range(0, circ.num_params, 4):
                mixed = (
                    overlap(h, h, mu, nu)
                    - overlap(h, -h, mu, nu)
                    - overlap(-h, h, mu, nu)
                    + overlap(-h, -h, mu, nu)
                ) / (4 * h * h)
                assert 0.5 * mixed == pytest.approx(m[mu, nu], abs=1e-6)

    def test_symmetric_psd(self):
        circ = plaquette_circuit(1, "imag")
        rng = np.random.default_rng(8)
        theta = rng.uniform(-np.pi, np.pi, circ.num_params)
        m = metric_tensor(circ, theta, vacuum(4))
        assert np.max(np.abs(m - m.T)) < 1e-10
        assert np.min(np.linalg.eigvalsh(m)) > -1e-9


FAMILIES = [
    ("chain imag", lambda: chain_circuit(3, 1, "imag"), 3),
    ("chain real", lambda: chain_circuit(3, 1, "real"), 3),
    ("plaquette imag", lambda: plaquette_circuit(1, "imag"), 4),
    ("plaquette gate", lambda: plaquette_circuit(1, "real", include_plaquette_gate=True), 4),
]


class TestGradients:
    @pytest.mark.parametrize("name,make,n", FAMILIES, ids=[f[0] for f in FAMILIES])
    def test_energy_gradient_matches_fd(self, name, make, n):
        circ = make()
        ham = materialize(chain_hamiltonian(n, 1.0, 0.1)) if n == 3 else None
        if ham is None:
            from quditgauge.model import plaquette_hamiltonian

            ham = materialize(plaquette_hamiltonian(1.0, 0.1))
        psi0 = vacuum(n)
        rng = np.random.default_rng(31)

        def energy(th):
            psi = circ.state(th, psi0)
            return float(np.vdot(psi.amplitudes, ham @ psi.amplitudes).real)

        for _ in range(2):
            theta = rng.uniform(-np.pi, np.pi, circ.num_params)
            grad = energy_gradient(circ, theta, ham, psi0)
            for mu in range(circ.num_params):
                fd = finite_difference(energy, theta, mu, order=1, h=1e-5)
                assert grad[mu] == pytest.approx(fd, abs=1e-7), (name, mu)

    def test_gradient_zero_for_identity_hamiltonian(self):
        circ = chain_circuit(3, 1, "imag")
        psi0 = vacuum(3)
        theta = np.random.default_rng(1).uniform(-1, 1, circ.num_params)
        grad = energy_gradient(circ, theta, np.eye(27, dtype=complex), psi0)
        assert np.max(np.abs(grad)) < 1e-12

    def test_gradient_zero_at_reachable_eigenstate(self):
        # theta = 0 leaves the vacuum invariant; use a Hamiltonian whose
        # eigenstate it is (the electric term alone)
        circ = chain_circuit(3, 1, "imag")
        psi0 = vacuum(3)
        ham = materialize(chain_hamiltonian(3, 1.0, 0.0, hopping_scale=0.0))
        grad = energy_gradient(circ, np.zeros(circ.num_params), ham, psi0)
        assert np.max(np.abs(grad)) < 1e-12


class TestRealTimeVector:
    def test_identity_hamiltonian(self):
        circ = chain_circuit(3, 1, "real")
        theta = np.random.default_rng(3).uniform(-1, 1, circ.num_params)
        v = real_time_vector(circ, theta, np.eye(27, dtype=complex), vacuum(3))
        assert np.max(np.abs(v)) < 1e-10

    def test_consistency_identity(self):
        # V^R = 2 Im<d_mu psi|H|psi> + 2 Im<psi|d_mu psi> <H>
        circ = chain_circuit(3, 1, "imag")
        psi0 = vacuum(3)
        ham = materialize(chain_hamiltonian(3, 1.0, 0.1))
        theta = np.random.default_rng(5).uniform(-np.pi, np.pi, circ.num_params)
        v = real_time_vector(circ, theta, ham, psi0)
        psi, tang = circ.tangents(theta, psi0)
        hpsi = ham @ psi.amplitudes
        energy = np.vdot(psi.amplitudes, hpsi).real
        for mu in range(circ.num_params):
            w = np.vdot(tang[:, mu], hpsi)
            z = np.vdot(psi.amplitudes, tang[:, mu])
            want = 2 * w.imag + 2 * energy * z.imag
            assert v[mu] == pytest.approx(want, abs=1e-11)

    def test_matches_connected_anticommutator_oracle(self):
        # dense Heisenberg-picture evaluation through lifted gate products
        circ = chain_circuit(3, 1, "imag")
        psi0 = vacuum(3)
        ham = materialize(chain_hamiltonian(3, 1.0, 0.1))
        rng = np.random.default_rng(6)
        theta = rng.uniform(-np.pi, np.pi, circ.num_params)
        v = real_time_vector(circ, theta, ham, psi0)
        full = np.eye(27, dtype=complex)
        prefixes = []
        for g in circ.gates:
            full = kron_lift(g.raw_matrix(theta[g.slot], 3), g.targets, 3, 3) @ full
            prefixes.append(full.copy())
        h_tilde = full.conj().T @ ham @ full
        amps = psi0.amplitudes
        for mu in range(circ.num_params):
            g_tilde = np.zeros((27, 27), dtype=complex)
            for pos in circ.slot_positions(mu):
                gen = kron_lift(circ.gates[pos].generator.matrix, circ.gates[pos].targets, 3, 3)
                g_tilde += prefixes[pos].conj().T @ gen @ prefixes[pos]
            anti = amps.conj() @ (g_tilde @ h_tilde + h_tilde @ g_tilde) @ amps
            conn = anti.real - 2 * (amps.conj() @ g_tilde @ amps).real * (
                amps.conj() @ h_tilde @ amps
            ).real
            assert v[mu] == pytest.approx(conn, abs=1e-10), mu


class TestSolveFlow:
    def test_identity_metric(self):
        v = np.array([1.0, -2.0, 3.0])
        dot, info = solve_flow(np.eye(3), v)
        assert np.allclose(dot, v)
        assert info.rank == 3

    def test_singular_in_range(self):
        m = np.diag([1.0, 0.0, 2.0])
        v = np.array([3.0, 0.0, 4.0])
        dot, _ = solve_flow(m, v)
        assert np.max(np.abs(m @ dot - v)) < 1e-10
        assert dot[1] == 0.0  # minimum norm

    def test_zero_everything(self):
        dot, info = solve_flow(np.zeros((2, 2)), np.zeros(2))
        assert np.allclose(dot, 0)
        assert info.rank == 0

    def test_asymmetric_rejected(self):
        with pytest.raises(ValueError):
            solve_flow(np.array([[1.0, 1.0], [0.0, 1.0]]), np.zeros(2))

    def test_tikhonov_shift(self):
        m = np.diag([1.0, 1e-12])
        v = np.array([1.0, 1.0])
        dot, _ = solve_flow(m, v, cutoff=0.0, tikhonov=1e-3)
        assert abs(dot[1]) < 1e3  # shift bounds the blowup


class TestIntegrateStep:
    def test_zero_derivative(self):
        theta = np.array([1.0, 2.0])
        for method in ("euler", "rk4"):
            out = integrate_step(theta, lambda t: np.zeros(2), 0.1, method)
            assert np.array_equal(out, theta)

    def test_constant_derivative_agreement(self):
        theta = np.zeros(2)
        k = np.array([1.0, -1.0])
        a = integrate_step(theta, lambda t: k, 0.2, "euler")
        b = integrate_step(theta, lambda t: k, 0.2, "rk4")
        assert np.allclose(a, b)

    def test_rk4_fourth_order_on_linear_system(self):
        # theta' = -theta, exact solution exp(-t)
        def run(dt, method):
            theta = np.array([1.0])
            t = 0.0
            while t < 1.0 - 1e-12:
                theta = integrate_step(theta, lambda x: -x, dt, method)
                t += dt
            return theta[0]

        errs = [abs(run(dt, "rk4") - np.exp(-1.0)) for dt in (0.1, 0.05, 0.025)]
        rates = [np.log2(errs[i] / errs[i + 1]) for i in range(2)]
        assert all(r > 3.7 for r in rates)
        errs_e = [abs(run(dt, "euler") - np.exp(-1.0)) for dt in (0.1, 0.05)]
        assert 0.8 < np.log2(errs_e[0] / errs_e[1]) < 1.2


def small_vite_config(**kw):
    defaults = dict(
        model=ModelConfig(dimension=1, num_links=3),
        ansatz=AnsatzConfig(family="chain", layers=2, init_seed=2),
        evolution=EvolutionConfig(mode="vite", dt=0.02, steps=800),
    )
    defaults.update(kw)
    return RunConfig(**defaults)


class TestGroundSearch:
    def test_energy_monotone(self):
        recs, _ = run_ground_search(small_vite_config())
        energies = np.array([r.energy for r in recs])
        assert np.all(np.diff(energies) < 1e-8)

    def test_small_chain_converges(self):
        cfg = small_vite_config()
        recs, ctx = run_ground_search(cfg)
        assert recs[-1].fidelity > 0.99
        assert abs(recs[-1].energy - ctx.spectrum.ground_energy) < 0.01

    def test_records_well_formed(self):
        recs, _ = run_ground_search(small_vite_config(evolution=EvolutionConfig(mode="vite", dt=0.05, steps=20)))
        for r in recs:
            assert 0.0 <= r.fidelity <= 1.0 + 1e-10
            assert r.site_numbers.shape == (4,)
            assert np.isfinite(r.energy)


class TestQuench:
    def test_initial_row(self):
        cfg = RunConfig(
            model=ModelConfig(dimension=1, num_links=3),
            ansatz=AnsatzConfig(family="chain", layers=2),
            evolution=EvolutionConfig(mode="vrte", dt=0.05, steps=5, integrator="rk4"),
        )
        recs, exact_rows, _ = run_quench(cfg)
        assert recs[0].fidelity == pytest.approx(1.0, abs=1e-12)
        assert recs[0].entropy == pytest.approx(0.0, abs=1e-12)
        assert exact_rows[0]["entropy"] == pytest.approx(0.0, abs=1e-12)

    def test_single_generator_ansatz_reproduces_exact_flow(self):
        # H equals the gate generator, so theta(t) = t is the exact solution
        gen = LocalOperator(3, (0,), embedded_pauli(3, 1, 2, "X").matrix / 2.0, hermitian=True)
        circ = single_gate_circuit(gen, 1)
        rng = np.random.default_rng(12)
        psi = random_state(3, rng)
        reg = basis_state(1, 3, [0]).__class__(1, 3, psi)
        ham = gen.matrix.copy()
        theta = np.zeros(1)
        dt = 0.01
        from quditgauge.varsim import solve_flow as sf

        def deriv(th):
            eom = exact_eom(circ, th, ham, reg, "real")
            dot, _ = sf(eom.m, 0.5 * eom.v)
            return dot

        for _ in range(100):
            theta = integrate_step(theta, deriv, dt, "rk4")
        assert theta[0] == pytest.approx(1.0, abs=1e-8)

    def test_energy_conservation_improves_with_dt(self):
        # the continuous flow conserves <H> when the ansatz tracks it; the
        # residual step drift must shrink with the step size
        def drift(dt, steps):
            cfg = RunConfig(
                model=ModelConfig(dimension=1, num_links=3),
                ansatz=AnsatzConfig(family="chain", layers=2),
                evolution=EvolutionConfig(mode="vrte", dt=dt, steps=steps, integrator="euler"),
            )
            recs, _, _ = run_quench(cfg)
            return abs(recs[-1].energy - recs[0].energy)

        d1 = drift(0.04, 25)
        d2 = drift(0.02, 50)
        assert d2 < 0.6 * d1  # at least first-order improvement to fixed time


class TestOscillationPeriod:
    def test_plain_cosine(self):
        t = np.linspace(0, 20, 2001)
        v = np.cos(2 * np.pi * t / 5.0)
        assert oscillation_period(t, v) == pytest.approx(5.0, abs=0.05)

    def test_needs_two_peaks(self):
        t = np.linspace(0, 1, 100)
        with pytest.raises(ValueError):
            oscillation_period(t, t)
