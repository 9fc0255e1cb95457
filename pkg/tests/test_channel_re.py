import numpy as np
import pytest

from qabcert import (
    ChannelObjective,
    ChannelPair,
    MixtureFamily,
    OracleInapplicableError,
    QabOptions,
    SupportViolationError,
    bell_diagonal_oracle,
    brute_force_oracle,
    choi_from_kraus,
    dephasing_choi,
    depolarizing_choi,
    objective_value,
    omega,
    omega1,
    solve_energy_constrained,
    solve_unconstrained,
)
from qabcert.quantum import PAULI_Z, random_density, relative_entropy, sandwich

from conftest import random_state


def paper_pair(p=0.05):
    return ChannelPair(dephasing_choi(0.4), depolarizing_choi(p))


def closed_form(p, p_deph=0.4):
    # Bell weights: dephasing (p_deph, 1-p_deph, 0, 0); depolarizing
    # (1-3p/4, p/4, p/4, p/4).
    return p_deph * np.log(p_deph / (1 - 0.75 * p)) + (1 - p_deph) * np.log(
        (1 - p_deph) / (0.25 * p)
    )


def amplitude_damping_pair(g=0.3):
    k0 = np.array([[1, 0], [0, np.sqrt(1 - g)]], dtype=complex)
    k1 = np.array([[0, np.sqrt(g)], [0, 0]], dtype=complex)
    ad = choi_from_kraus([k0, k1])
    return ChannelPair(ad, depolarizing_choi(0.3))


class TestOmega:
    def test_equal_channels_zero(self, rng):
        pair = ChannelPair(dephasing_choi(0.4), dephasing_choi(0.4))
        assert np.max(np.abs(omega1(random_state(rng, 2), pair))) < 1e-12

    def test_weighted_trace_equals_objective(self, rng):
        # Tr[rho omega1(rho)] reproduces -D(S_N || S_M) on random states.
        pair = paper_pair()
        for _ in range(20):
            rho = random_state(rng, 2)
            lhs = np.trace(rho @ omega1(rho, pair)).real
            assert lhs == pytest.approx(objective_value(rho, pair), abs=1e-8)

    def test_uniform_input_gives_bell_value(self):
        pair = paper_pair(0.05)
        lhs = np.trace((np.eye(2) / 2) @ omega1(np.eye(2) / 2, pair)).real
        assert lhs == pytest.approx(-closed_form(0.05), abs=1e-10)

    def test_hermitized_form(self, rng):
        pair = paper_pair()
        rho = random_state(rng, 2)
        om = omega(rho, pair)
        assert np.max(np.abs(om - np.conj(om.T))) < 1e-14
        assert np.trace(rho @ om).real == pytest.approx(
            np.trace(rho @ omega1(rho, pair)).real, abs=1e-10
        )

    def test_support_violation_raises(self, rng):
        pair = ChannelPair(dephasing_choi(0.4), depolarizing_choi(0.0))
        with pytest.raises(SupportViolationError):
            omega1(random_state(rng, 2), pair)

    def test_batched_matches_loop(self, rng):
        pair = paper_pair()
        stack = np.stack([random_state(rng, 2) for _ in range(4)])
        batched = omega(stack, pair)
        for i in range(4):
            assert np.allclose(batched[i], omega(stack[i], pair), atol=1e-12)


class TestObjectiveValue:
    def test_equal_channels_zero(self, rng):
        pair = ChannelPair(depolarizing_choi(0.2), depolarizing_choi(0.2))
        assert objective_value(random_state(rng, 2), pair) == pytest.approx(0.0, abs=1e-10)

    def test_two_route_agreement_pure_input(self):
        pair = paper_pair()
        rho = np.diag([1.0 - 1e-12, 1e-12])  # full rank for the omega route
        direct = objective_value(rho, pair)
        via_omega = np.trace(rho @ omega1(rho, pair)).real
        assert direct == pytest.approx(via_omega, abs=1e-6)

    def test_convexity_spot_check(self, rng):
        pair = paper_pair()
        for _ in range(10):
            r1, r2 = random_state(rng, 2), random_state(rng, 2)
            lam = rng.uniform()
            mix = objective_value(lam * r1 + (1 - lam) * r2, pair)
            assert mix <= lam * objective_value(r1, pair) + (1 - lam) * objective_value(
                r2, pair
            ) + 1e-9

    def test_support_violation_gives_minus_inf(self, rng):
        pair = ChannelPair(dephasing_choi(0.4), depolarizing_choi(0.0))
        assert objective_value(random_state(rng, 2), pair) == -np.inf

    def test_channel_objective_scale(self, rng):
        # The solver objective is the per-Choi-state divergence: 1/dim_a of
        # the full-scale objective, with the identity preserved.
        pair = paper_pair()
        obj = ChannelObjective(pair)
        rho = random_state(rng, 2)
        assert obj.value(rho) == pytest.approx(objective_value(rho, pair) / 2, abs=1e-12)
        assert np.allclose(obj.omega(rho), omega(rho, pair) / 2, atol=1e-12)
        assert obj.value(rho) == pytest.approx(
            np.trace(rho @ obj.omega(rho)).real, abs=1e-8
        )


class TestBellDiagonalOracle:
    def test_equal_channels_zero(self):
        assert bell_diagonal_oracle(ChannelPair(dephasing_choi(0.3), dephasing_choi(0.3))) == 0.0

    def test_closed_form(self):
        for p in (0.01, 0.05, 0.1):
            assert bell_diagonal_oracle(paper_pair(p)) == pytest.approx(
                closed_form(p), abs=1e-12
            )

    def test_identity_limit_infinite(self):
        assert bell_diagonal_oracle(paper_pair(0.0)) == np.inf

    def test_non_bell_diagonal_rejected(self):
        with pytest.raises(OracleInapplicableError):
            bell_diagonal_oracle(amplitude_damping_pair())

    def test_equals_divergence_at_maximally_entangled_input(self):
        # The oracle value is the sandwich divergence at rho = I/2.
        pair = paper_pair(0.07)
        s_n = sandwich(np.eye(2) / 2, pair.choi_n)
        s_m = sandwich(np.eye(2) / 2, pair.choi_m)
        assert bell_diagonal_oracle(pair) == pytest.approx(
            relative_entropy(s_n, s_m), abs=1e-10
        )


class TestBruteForceOracle:
    def test_equal_channels_zero(self):
        pair = ChannelPair(depolarizing_choi(0.3), depolarizing_choi(0.3))
        value, argmin = brute_force_oracle(pair, 5)
        assert value == pytest.approx(0.0, abs=1e-10)

    def test_agrees_with_bell_oracle(self):
        pair = paper_pair(0.05)
        value, argmin = brute_force_oracle(pair, 41)
        # Grid restriction: minimum within O(grid spacing) of the true one.
        assert -value == pytest.approx(closed_form(0.05), abs=5e-2)
        assert -value <= closed_form(0.05) + 1e-12

    def test_never_beats_solver(self):
        pair = paper_pair(0.05)
        opts = QabOptions(initial=random_density(2, 3), divergence_stop=1e-10)
        result = solve_unconstrained(pair, opts, n_samples=50)
        value, _ = brute_force_oracle(pair, 31)
        assert -value <= result.value + 1e-6

    def test_non_qubit_rejected(self):
        qutrit = choi_from_kraus([np.eye(3)])
        with pytest.raises(OracleInapplicableError):
            brute_force_oracle(ChannelPair(qutrit, qutrit), 5)


class TestSolveUnconstrained:
    def test_equal_channels_certified_zero(self, rng):
        pair = ChannelPair(dephasing_choi(0.4), dephasing_choi(0.4))
        opts = QabOptions(initial=random_state(rng, 2), divergence_stop=1e-10)
        result = solve_unconstrained(pair, opts, n_samples=50)
        assert result.value == pytest.approx(0.0, abs=1e-12)
        assert result.report.certified

    def test_paper_instance_value(self):
        opts = QabOptions(initial=random_density(2, 5), max_iters=100, divergence_stop=1e-10)
        result = solve_unconstrained(paper_pair(0.05), opts, n_samples=200)
        assert result.value == pytest.approx(1.9715, abs=1e-3)
        assert result.value == pytest.approx(closed_form(0.05), abs=1e-3)

    def test_sweep_monotone_decreasing_in_p(self):
        values = []
        for i, p in enumerate((0.02, 0.05, 0.08)):
            opts = QabOptions(initial=random_density(2, [9, i]), divergence_stop=1e-10)
            values.append(solve_unconstrained(paper_pair(p), opts, n_samples=50).value)
        assert values[0] > values[1] > values[2]


class TestSolveEnergyConstrained:
    def test_empty_constraints_match_unconstrained(self, rng):
        pair = paper_pair()
        fam = MixtureFamily(observables=(), targets=())
        initial = random_density(2, 8)
        opts = QabOptions(initial=initial, divergence_stop=1e-10)
        res_c = solve_energy_constrained(pair, fam, opts, n_samples=50, cert_seed=1)
        res_u = solve_unconstrained(pair, opts, n_samples=50, cert_seed=1)
        assert res_c.value == res_u.value
        assert res_c.report == res_u.report

    def test_paper_energy_run(self):
        # Constraint Tr(rho sigma_z) = -0.25, dephasing(0.4) vs depolarizing(0.05).
        pair = paper_pair()
        fam = MixtureFamily(observables=(PAULI_Z,), targets=(-0.25,))
        opts = QabOptions(initial=random_density(2, 12), max_iters=200, divergence_stop=1e-10)
        result = solve_energy_constrained(pair, fam, opts, n_samples=50)
        traj = result.trajectory
        for state in traj.states:
            assert abs(np.trace(state @ PAULI_Z).real + 0.25) <= 1e-8
        assert np.all(np.diff(traj.values) <= 1e-9)
        assert result.value < solve_unconstrained(pair, opts, n_samples=50).value

    def test_constraint_matching_unconstrained_optimum(self):
        # The unconstrained optimum I/2 has Bloch z = 0, so constraining
        # Tr(rho sigma_z) = 0 must not change the value.
        pair = paper_pair()
        fam = MixtureFamily(observables=(PAULI_Z,), targets=(0.0,))
        opts = QabOptions(initial=random_density(2, 4), max_iters=150, divergence_stop=1e-10)
        res_c = solve_energy_constrained(pair, fam, opts, n_samples=50)
        res_u = solve_unconstrained(pair, opts, n_samples=50)
        assert res_c.value == pytest.approx(res_u.value, abs=1e-6)

    def test_infeasible_initial_gets_projected(self):
        pair = paper_pair()
        fam = MixtureFamily(observables=(PAULI_Z,), targets=(-0.25,))
        initial = np.diag([0.9, 0.1])  # violates the constraint
        opts = QabOptions(initial=initial, max_iters=100, divergence_stop=1e-10)
        result = solve_energy_constrained(pair, fam, opts, n_samples=50)
        assert abs(np.trace(result.trajectory.states[0] @ PAULI_Z).real + 0.25) <= 1e-8


class TestChannelPair:
    def test_dimension_mismatch(self):
        qutrit = choi_from_kraus([np.eye(3)])
        with pytest.raises(ValueError):
            ChannelPair(dephasing_choi(0.4), qutrit)
