import itertools

import numpy as np
import pytest

from gamelab.game_classes import mpd_distance
from gamelab.games import NormalFormGame, uniform_profile
from gamelab.metrics import external_regret_series
from gamelab.potential import (
    CertificateViolation,
    NearPotentialSpec,
    PotentialGame,
    concave_rate_check,
    concavity_midpoint_check,
    md_rate_certificate,
    near_potential_run,
    omwu_potential_eta,
    omwu_potential_run,
    potential_from_utilities,
    random_potential_game,
    run_md_potential,
)
from gamelab.regularizers import EUCLIDEAN, NEGATIVE_ENTROPY, Regularizer

EUCLID = Regularizer(EUCLIDEAN)
ENTROPY = Regularizer(NEGATIVE_ENTROPY)


def coordination_potential():
    """Battle-of-the-sexes flavored 2x2 potential game with identity weights."""
    phi = np.array([[0.4, -0.2], [-0.3, 0.3]])
    return potential_from_utilities(phi, np.ones(2), [np.array([0.1, -0.1]), np.array([0.0, 0.2])])


class TestConstruction:
    def test_alignment_checked_exhaustively(self):
        game = coordination_potential()
        assert game.alignment_error() < 1e-12
        broken = game.game.utilities[0].copy()
        broken[0, 0] += 0.05
        with pytest.raises(ValueError, match="not a weighted potential game"):
            PotentialGame(NormalFormGame([broken, game.game.utilities[1]]), game.phi, game.weights)

    def test_weighted_alignment(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            pgame = random_potential_game(rng, n_players=3, max_actions=4)
            assert pgame.alignment_error() < 1e-12

    def test_smoothness_constant_formula(self):
        phi = np.array([[1.0, 0.0], [0.0, 1.0]])
        game = potential_from_utilities(phi, np.ones(2) * 2.0,
                                        [np.zeros(2), np.zeros(2)])
        # phi_max = 1, |A_1| + |A_2| = 4 -> L = 2
        assert game.smoothness == pytest.approx(2.0)

    def test_smoothness_constant_three_players(self):
        rng = np.random.default_rng(1)
        phi = 0.5 * rng.choice([-1.0, 1.0], size=(2, 3, 4))
        weights = np.ones(3) * 2.0
        terms = [rng.uniform(-0.2, 0.2, (3, 4)), rng.uniform(-0.2, 0.2, (2, 4)),
                 rng.uniform(-0.2, 0.2, (2, 3))]
        game = potential_from_utilities(phi, weights, terms)
        assert game.phi_max == pytest.approx(0.5)
        assert game.smoothness == pytest.approx(0.5 * 0.5 * 9) == pytest.approx(2.25)

    def test_one_sided_smoothness_sampled(self):
        rng = np.random.default_rng(2)
        pgame = random_potential_game(rng, n_players=2, max_actions=3)
        L = pgame.smoothness
        from gamelab.games import random_profile

        for _ in range(10_000):
            x = random_profile(pgame.game.action_counts, rng)
            y = random_profile(pgame.game.action_counts, rng)
            gap = pgame.mixed_potential(y) - pgame.mixed_potential(x)
            grads = pgame.mixed_potential_gradient(x)
            linear = sum(g @ (yi - xi) for g, yi, xi in zip(grads, y, x))
            dist = sum(((yi - xi) ** 2).sum() for yi, xi in zip(y, x))
            assert gap <= linear + L * dist + 1e-9
            assert -gap <= -linear + L * dist + 1e-9


class TestMixedPotential:
    def test_pure_profile_reads_table(self):
        game = coordination_potential()
        pure = [np.array([0.0, 1.0]), np.array([1.0, 0.0])]
        assert game.mixed_potential(pure) == pytest.approx(game.phi[1, 0])

    def test_gradient_matches_weighted_utilities_up_to_shift(self):
        # grad_i Phi - w_i u_i(., x_-i) is constant across actions (the
        # opponent-dependent dummy terms drop out of every deviation and of
        # the prox steps); with no dummy terms the identity is exact
        rng = np.random.default_rng(3)
        pgame = random_potential_game(rng, n_players=3, max_actions=3)
        from gamelab.games import random_profile

        for _ in range(20):
            x = random_profile(pgame.game.action_counts, rng)
            grads = pgame.mixed_potential_gradient(x)
            for i, g in enumerate(grads):
                expected = pgame.weights[i] * pgame.game.utility_vector(i, x)
                assert np.ptp(g - expected) < 1e-10

    def test_gradient_exact_without_dummy_terms(self):
        rng = np.random.default_rng(30)
        phi = rng.uniform(-0.5, 0.5, size=(3, 2))
        pgame = potential_from_utilities(phi, np.ones(2), [np.zeros(2), np.zeros(3)])
        from gamelab.games import random_profile

        for _ in range(10):
            x = random_profile(pgame.game.action_counts, rng)
            grads = pgame.mixed_potential_gradient(x)
            for i, g in enumerate(grads):
                assert np.abs(g - pgame.game.utility_vector(i, x)).max() < 1e-12

    def test_gradient_matches_central_differences(self):
        rng = np.random.default_rng(4)
        pgame = random_potential_game(rng, n_players=2, max_actions=3)
        from gamelab.games import random_profile

        h = 1e-5
        for _ in range(10):
            x = random_profile(pgame.game.action_counts, rng)
            grads = pgame.mixed_potential_gradient(x)
            for i in range(2):
                for a in range(pgame.game.action_counts[i]):
                    up = [xi.copy() for xi in x]
                    dn = [xi.copy() for xi in x]
                    up[i][a] += h
                    dn[i][a] -= h
                    # profiles off the simplex: the multilinear form still extends
                    fd = (pgame._raw_potential(up) - pgame._raw_potential(dn)) / (2 * h)
                    assert fd == pytest.approx(grads[i][a], abs=1e-6)


class TestMdRuns:
    def test_pure_ne_start_is_stationary(self):
        game = coordination_potential()
        # (0, 0) maximizes phi: a strict NE of the potential game
        init = [np.array([1.0, 0.0]), np.array([1.0, 0.0])]
        plog = run_md_potential(game, EUCLID, 50, init=init)
        assert np.abs(np.diff(plog.phi_series)).max() < 1e-14
        for xi in plog.run.x:
            assert np.abs(xi - xi[0]).max() < 1e-14

    def test_potential_strictly_increases_from_uniform(self):
        game = coordination_potential()
        plog = run_md_potential(game, EUCLID, 300)
        diffs = np.diff(plog.phi_series)
        assert plog.step_slacks().min() >= -1e-9
        # strictly increasing until the dynamics settle near equilibrium
        moving = diffs > 1e-12
        settled = np.nonzero(~moving)[0]
        first_settle = settled[0] if settled.size else len(diffs)
        assert first_settle > 5
        gap_at_settle = plog.run.game.nash_gap([xi[first_settle] for xi in plog.run.x])
        assert gap_at_settle < 0.05

    def test_heterogeneous_regularizers_certified(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            pgame = random_potential_game(rng, n_players=2, max_actions=4)
            regs = [EUCLID, ENTROPY]
            plog = run_md_potential(pgame, regs, 200)
            assert plog.step_slacks().min() >= -1e-9
            assert plog.cumulative_bound_slack() >= -1e-9

    def test_certificate_violation_aborts_with_dump(self):
        # overriding the certified step size voids the guarantee; this
        # seeded instance overshoots immediately
        rng = np.random.default_rng(4)
        pgame = random_potential_game(rng, n_players=2, max_actions=3, weighted=False)
        with pytest.raises(CertificateViolation) as err:
            run_md_potential(pgame, EUCLID, 150, eta=20.0 * pgame.md_eta)
        assert "t" in err.value.dump


class TestRateCertificate:
    def test_stationary_start_certifies_immediately(self):
        game = coordination_potential()
        init = [np.array([1.0, 0.0]), np.array([1.0, 0.0])]
        plog = run_md_potential(game, EUCLID, 20, init=init)
        out = md_rate_certificate(plog, 0.01)
        assert out["iterate"] == 0

    def test_found_within_budget_on_random_games(self):
        rng = np.random.default_rng(6)
        for _ in range(10):
            pgame = random_potential_game(rng, n_players=2, max_actions=4, weighted=False)
            budget = int(np.ceil(4 * pgame.md_eta * pgame.phi_max / 0.01**2)) + 1
            plog = run_md_potential(pgame, EUCLID, budget)
            out = md_rate_certificate(plog, 0.01)
            assert out["iterate"] + 1 <= out["budget"]

    def test_reported_gap_upper_bounds_measured(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            pgame = random_potential_game(rng, n_players=2, max_actions=3, weighted=False)
            budget = int(np.ceil(4 * pgame.md_eta * pgame.phi_max / 0.02**2)) + 1
            plog = run_md_potential(pgame, EUCLID, budget)
            out = md_rate_certificate(plog, 0.02)
            assert out["nash_gap"] <= out["implied_gap"] + 1e-9


class TestOptimisticPotential:
    def test_eta_formula(self):
        game = coordination_potential()
        eta = omwu_potential_eta(game)
        bound = min(1.0 / (2 * game.smoothness), 1.0 / (2 * np.sqrt(2)), 1.0 / (4 * np.sqrt(2)))
        assert eta == pytest.approx(bound)

    def test_stationary_certificate_trivial(self):
        game = coordination_potential()
        log, cert = omwu_potential_run(game, 50)
        assert cert["path_total"] <= cert["path_bound"] + 1e-9

    def test_regret_below_logged_constant_all_prefixes(self):
        rng = np.random.default_rng(8)
        pgame = random_potential_game(rng, n_players=2, max_actions=2, weighted=False)
        log, cert = omwu_potential_run(pgame, 100_000)
        for i in range(2):
            series = external_regret_series(log.x[i], log.u[i])
            assert series.max() <= cert["regret_constants"][i] + 1e-9

    def test_path_monotone_and_bounded(self):
        rng = np.random.default_rng(9)
        pgame = random_potential_game(rng, n_players=3, max_actions=3, weighted=False)
        log, cert = omwu_potential_run(pgame, 2000)
        assert cert["path_total"] <= 16.0 * cert["eta"] * pgame.phi_max + 1e-9

    def test_weighted_games_rejected(self):
        rng = np.random.default_rng(10)
        pgame = random_potential_game(rng, n_players=2, weighted=True)
        if np.allclose(pgame.weights, 1.0):  # exceedingly unlikely
            pytest.skip("sampled identity weights")
        with pytest.raises(ValueError):
            omwu_potential_run(pgame, 10)


class TestNearPotential:
    def test_zero_delta_reduces_to_plain_monotonicity(self):
        game = coordination_potential()
        spec = NearPotentialSpec.build(game.game, game)
        assert spec.delta == 0.0
        assert spec.gradient_error == pytest.approx(0.0, abs=1e-12)
        log, out = near_potential_run(spec, 100)
        assert out["threshold"] == pytest.approx(0.0)
        assert np.diff(out["phi_series"]).min() >= -1e-9

    def test_small_perturbation_certified(self):
        base = coordination_potential()
        perturbed = [u.copy() for u in base.game.utilities]
        perturbed[0][0, 1] += 0.05
        game = NormalFormGame(perturbed)
        spec = NearPotentialSpec.build(game, base)
        assert spec.delta == pytest.approx(0.05)
        log, out = near_potential_run(spec, 300)
        assert out["active_steps"] >= 0  # certificate held wherever active

    def test_large_perturbation_runs_without_assertion(self):
        rng = np.random.default_rng(11)
        base = coordination_potential()
        perturbed = [np.clip(u + rng.uniform(-0.4, 0.4, u.shape), -1, 1)
                     for u in base.game.utilities]
        game = NormalFormGame(perturbed)
        spec = NearPotentialSpec.build(game, base)
        near_potential_run(spec, 300)  # may cycle; must not raise


class TestConcaveRate:
    def test_linear_potential_equality_family(self):
        # phi(a) = f(a_1) + g(a_2) gives a multilinear-but-concave mixed phi
        f = np.array([0.3, -0.1])
        g = np.array([0.05, 0.2])
        phi = f[:, None] + g[None, :]
        pgame = potential_from_utilities(phi, np.ones(2), [np.zeros(2), np.zeros(2)])
        rng = np.random.default_rng(12)
        assert concavity_midpoint_check(pgame, rng, samples=500)
        plog = run_md_potential(pgame, EUCLID, 200)
        # independent optimum: separable, so per-player argmax vertex
        x_star = [np.eye(2)[np.argmax(f)], np.eye(2)[np.argmax(g)]]
        slack = concave_rate_check(plog, x_star)
        assert slack.min() >= -1e-8

    def test_generic_multilinear_potential_fails_midpoint(self):
        phi = np.array([[1.0, -1.0], [-1.0, 1.0]]) * 0.4
        pgame = potential_from_utilities(phi, np.ones(2), [np.zeros(2), np.zeros(2)])
        rng = np.random.default_rng(13)
        assert not concavity_midpoint_check(pgame, rng, samples=2000)


def test_sqrt_t_regret_chain_for_md():
    # Reg_i^T <= Omega_i/eta + sqrt(|A_i|) sqrt(4 eta phi_max T): the
    # bounded-path chain gives O(sqrt(T)) regret under the constant step
    rng = np.random.default_rng(21)
    for _ in range(5):
        pgame = random_potential_game(rng, n_players=2, max_actions=4, weighted=False)
        T = 400
        plog = run_md_potential(pgame, EUCLID, T + 1)
        eta = plog.eta
        for i in range(2):
            d = pgame.game.action_counts[i]
            series = external_regret_series(plog.run.x[i], plog.run.u[i])
            x1 = plog.run.x[i][0]
            omega = max(0.5 * ((np.eye(d)[a] - x1) ** 2).sum() for a in range(d))
            u_norm = np.sqrt(d)  # utilities normalized to [-1, 1]
            for horizon in (10, 100, T):
                bound = omega / eta + u_norm * np.sqrt(4.0 * eta * pgame.phi_max * horizon)
                assert series[horizon - 1] <= bound + 1e-9


def test_mpd_consistency_with_spec_builder():
    base = coordination_potential()
    perturbed = [u.copy() for u in base.game.utilities]
    perturbed[1][1, 1] -= 0.08
    game = NormalFormGame(perturbed)
    assert mpd_distance(game, base.game) == pytest.approx(0.08)
