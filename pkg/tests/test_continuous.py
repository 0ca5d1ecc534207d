import numpy as np
import pytest

from gamelab.continuous import (
    CONVERGE,
    DIVERGE,
    INCONCLUSIVE,
    BilinearGame,
    HgdMethod,
    OneVsManyGame,
    adversarial_game_for,
    characteristic_polynomial,
    characteristic_root_magnitudes,
    eigenvalues_small,
    inefficiency_demo,
    inefficiency_game,
    measure_linear_rate,
    ogd_method,
    robustness_game,
    simulate_hgd,
    simulate_ogd,
    simulate_ogd_one_vs_many,
    spectral_predict,
)


class TestEigenvalues:
    def test_char_poly_matches_numpy(self):
        rng = np.random.default_rng(0)
        for d in (2, 3, 5, 8):
            m = rng.standard_normal((d, d))
            mine = np.sort_complex(np.roots(characteristic_polynomial(m)))
            ref = np.sort_complex(np.linalg.eigvals(m))
            assert np.abs(mine - ref).max() < 1e-8

    def test_small_matrix_eigs(self):
        rng = np.random.default_rng(1)
        for d in (1, 2, 3, 6):
            m = rng.standard_normal((d, d))
            mine = np.sort_complex(eigenvalues_small(m))
            ref = np.sort_complex(np.linalg.eigvals(m))
            assert np.abs(mine - ref).max() < 1e-8

    def test_dimension_cap(self):
        with pytest.raises(ValueError):
            eigenvalues_small(np.eye(9))


class TestCharacteristicRoots:
    def test_half_magnitude_at_the_boundary(self):
        zp, zm = characteristic_root_magnitudes(1.0, 0.5)
        assert zp**2 == pytest.approx(0.5)
        assert zm**2 == pytest.approx(0.5)
        zp, zm = characteristic_root_magnitudes(2.0, 1.0 / (2.0 * np.sqrt(2.0)))
        assert zp**2 == pytest.approx(0.5)

    def test_small_eta_limit_approaches_one(self):
        zp, _ = characteristic_root_magnitudes(1.0, 1e-6)
        assert 1.0 - zp < 1e-5
        assert zp < 1.0

    def test_complex_branch_rejected(self):
        with pytest.raises(ValueError, match="complex branch"):
            characteristic_root_magnitudes(4.0, 0.5)


class TestSpectralPredict:
    def test_inefficiency_game_spectrum(self):
        game = inefficiency_game()
        assert np.allclose(game.interaction_matrix(), [[0.0, 2.0], [-1.0, -3.0]])
        v = spectral_predict(game, 0.2)
        assert v.verdict == CONVERGE
        assert sorted(np.round(v.eigenvalues.real, 9)) == [-2.0, -1.0]
        assert v.eta_bound == pytest.approx(1.0 / (2.0 * np.sqrt(2.0)))

    def test_robustness_game_diverges_with_witness(self):
        game = robustness_game(0.05)
        v = spectral_predict(game, 0.2)
        assert v.verdict == DIVERGE
        assert v.witness.real == pytest.approx(0.05**2 / 4.0)

    def test_zero_sum_full_rank_converges(self):
        rng = np.random.default_rng(2)
        a = rng.standard_normal((3, 3)) + 3.0 * np.eye(3)
        game = BilinearGame(a, -a)
        rho = max(np.abs(np.linalg.eigvals(a.T @ a)))
        v = spectral_predict(game, 0.9 / (2.0 * np.sqrt(rho)))
        assert v.verdict == CONVERGE

    def test_eta_above_bound_inconclusive(self):
        game = inefficiency_game()
        v = spectral_predict(game, 0.9)
        assert v.verdict == INCONCLUSIVE

    def test_complex_spectrum_inconclusive(self):
        a = np.eye(2)
        b = np.array([[0.0, -1.0], [1.0, 0.0]])  # A^T B rotation: complex eigs
        v = spectral_predict(BilinearGame(a, b), 0.05)
        assert v.verdict == INCONCLUSIVE


class TestSimulation:
    def test_zero_matrices_keep_iterates_constant(self):
        game = BilinearGame(np.zeros((2, 2)), np.zeros((2, 2)))
        log = simulate_ogd(game, 0.1, 50, x0=np.array([1.0, 2.0]), y0=np.array([0.5, -0.5]))
        assert np.allclose(log.states[0], log.states[-1])

    def test_zero_sum_identity_norms_decrease(self):
        game = BilinearGame(np.eye(2), -np.eye(2))
        log = simulate_ogd(game, 0.1, 4000, x0=np.array([1.0, 1.0]), y0=np.array([1.0, 1.0]))
        assert not log.diverged
        # monotone decrease after the two-step burn-in
        tail = log.norms[2:]
        assert np.all(np.diff(tail) <= 1e-12)
        assert tail[-1] < 1e-6

    def test_robustness_game_simulation_blows_up(self):
        game = robustness_game(0.05)
        log = simulate_ogd(game, 0.5, 1000, x0=np.full(2, 5.0), y0=np.full(2, 5.0))
        assert log.norms.max() > 1e6

    def test_divergence_halts_and_flags(self):
        game, lam = adversarial_game_for(ogd_method(0.1), eps=1.0)
        log = simulate_hgd(game, ogd_method(0.1), 5000, x0=np.array([0.1, 0.1]), y0=np.array([0.1, -0.1]))
        assert log.diverged
        assert log.halted_at is not None
        assert log.norms[-1] > 1e12

    def test_prediction_simulation_agreement(self):
        # converge verdicts are confirmed by plateau, diverge by blow-up
        rng = np.random.default_rng(3)
        checked = 0
        for _ in range(200):
            d = int(rng.integers(2, 5))
            lams = rng.uniform(0.3, 2.0, d)
            q = np.linalg.qr(rng.standard_normal((d, d)))[0]
            sign = 1.0 if rng.uniform() < 0.8 else -1.0  # mostly stable instances
            m = q @ np.diag(-sign * lams) @ q.T
            a = np.linalg.qr(rng.standard_normal((d, d)))[0]
            game = BilinearGame(a, np.linalg.solve(a.T, m))
            eta = 0.45 / np.sqrt(lams.max())
            v = spectral_predict(game, eta)
            if v.verdict == INCONCLUSIVE:
                continue
            log = simulate_ogd(game, eta, 6000,
                               x0=rng.standard_normal(d), y0=rng.standard_normal(d))
            if v.verdict == CONVERGE:
                assert log.plateau_reached() or log.norms[-1] < 1e-9
            else:
                assert log.norms.max() > 1e6
            checked += 1
        assert checked >= 150

    def test_measured_rate_within_ten_percent(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            d = int(rng.integers(2, 5))
            lams = rng.uniform(0.3, 2.0, d)
            q = np.linalg.qr(rng.standard_normal((d, d)))[0]
            m = q @ np.diag(-lams) @ q.T
            a = np.linalg.qr(rng.standard_normal((d, d)))[0]
            game = BilinearGame(a, np.linalg.solve(a.T, m))
            eta = 0.45 / np.sqrt(lams.max())
            v = spectral_predict(game, eta)
            assert v.verdict == CONVERGE
            log = simulate_ogd(game, eta, 5000,
                               x0=rng.standard_normal(d), y0=rng.standard_normal(d))
            rate, points = measure_linear_rate(log)
            assert rate is not None and points >= 10
            assert abs(rate - v.rate) <= 0.10 * v.rate


class TestOneVsMany:
    def test_negative_spectrum_converges(self):
        rng = np.random.default_rng(5)
        blocks = [rng.standard_normal((2, 2)) for _ in range(3)]
        game = OneVsManyGame(blocks, [-b.T for b in blocks])
        m = game.interaction_matrix()
        eig = eigenvalues_small(m)
        assert np.all(eig.real < 0)
        rho = np.abs(eig.real).max()
        out = simulate_ogd_one_vs_many(game, 0.9 / (2 * np.sqrt(rho)), 6000, rng=rng)
        assert not out["diverged"]
        # iterates settle and the limit satisfies the equilibrium conditions
        tail = out["states"][-100:]
        assert np.abs(tail - tail[-1]).max() < 1e-8
        limit = out["states"][-1]
        g1 = sum(blk @ limit[j + 1] for j, blk in enumerate(blocks))
        assert np.linalg.norm(g1) < 1e-6
        for j, blk in enumerate(blocks):
            assert np.linalg.norm(-blk.T @ limit[0]) < 1e-6

    def test_positive_block_diverges(self):
        game = OneVsManyGame([np.eye(2)], [4.0 * np.eye(2)])
        out = simulate_ogd_one_vs_many(game, 0.3, 2000)
        assert out["diverged"]


class TestHgdMethods:
    def test_ogd_polynomials(self):
        m = ogd_method(0.1)
        assert m.s_at(1.0) == pytest.approx(1.0)
        assert m.g_at(1.0) == pytest.approx(0.1)
        assert m.g_at(2.0) == pytest.approx(0.2 - 0.05)
        assert m.is_regular()

    def test_irregular_method_detected(self):
        assert not HgdMethod((0.5,), (0.1,)).is_regular()  # S(1) != 1
        assert not HgdMethod((1.0,), (0.1, -0.1)).is_regular()  # G(1) = 0

    def test_adversarial_lambda_for_ogd(self):
        game, lam = adversarial_game_for(ogd_method(0.1), eps=1.0)
        assert lam == pytest.approx((1.0 / 0.15) ** 2)
        assert np.allclose(game.A, np.eye(2))
        assert np.allclose(game.B, lam * np.eye(2))
        # never zero-sum: the synthesized second matrix is +lam I, not -A
        assert not np.allclose(game.B, -game.A)

    @pytest.mark.parametrize("method", [
        ogd_method(0.1),
        HgdMethod((1.0,), (0.1,), "gd"),
        HgdMethod((1.5, -0.5), (0.1,), "momentum"),
        HgdMethod((1.0,), (0.05, 0.025, 0.025), "averaged"),
    ])
    def test_adversarial_game_diverges_from_random_inits(self, method):
        assert method.is_regular()
        game, lam = adversarial_game_for(method, eps=1.0)
        assert lam > 0
        rng = np.random.default_rng(6)
        for _ in range(5):
            log = simulate_hgd(game, method, 2000,
                               x0=rng.standard_normal(2), y0=rng.standard_normal(2))
            assert log.norms.max() > 1e6


class TestInefficiency:
    def test_demo_reports_zero_versus_2r2(self):
        out = inefficiency_demo(radius=10.0)
        assert out["limits_at_origin"]
        assert out["equilibrium_check"]
        assert out["welfare_at_limit"] == 0.0
        assert out["welfare_alternative"] == pytest.approx(200.0)

    def test_different_radii(self):
        # the transient of these seeds peaks near l1 norm 6.6, so radius 8
        # keeps the ball constraint inactive along the whole run
        out = inefficiency_demo(radius=8.0)
        assert out["welfare_alternative"] == pytest.approx(128.0)

    def test_small_radius_activates_projection(self):
        game = inefficiency_game()
        constrained = BilinearGame(game.A, game.B, radius=0.05)
        log = simulate_ogd(constrained, 0.2, 200, x0=np.array([1.0, 1.0]), y0=np.array([1.0, 1.0]))
        assert log.projection_active
