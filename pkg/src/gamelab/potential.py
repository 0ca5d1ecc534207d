"""Weighted and near-potential games under mirror-descent play.

The central object is a pure-strategy potential table whose unilateral
differences match each player's weighted utility differences.  Along
mirror-descent orbits at eta = 1/(2L) the mixed extension of the potential
must increase by at least the squared step length over 2 eta; runs certify
this inequality at every step and abort if it ever fails, since a failure
indicates a bug rather than noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from gamelab.games import MixedProfile, NormalFormGame
from gamelab.learners import MD, LearnerConfig, RunLog, run_dynamics
from gamelab.regularizers import EUCLIDEAN, Regularizer

CERT_TOL = 1e-9


class CertificateViolation(RuntimeError):
    """A theorem-backed runtime inequality failed; carries the step dump."""

    def __init__(self, message: str, dump: dict | None = None):
        super().__init__(message)
        self.dump = dump or {}


@dataclass
class PotentialGame:
    """A normal-form game together with its exact weighted potential.

    On construction the alignment Phi(a) - Phi(a_i', a_-i) =
    w_i (u_i(a) - u_i(a_i', a_-i)) is checked exhaustively for every
    unilateral deviation.
    """

    game: NormalFormGame
    phi: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.phi = np.asarray(self.phi, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        if self.phi.shape != self.game.action_counts:
            raise ValueError("potential table shape must match the action counts")
        if self.weights.shape != (self.game.num_players,) or np.any(self.weights <= 0):
            raise ValueError("one positive weight per player required")
        err = self.alignment_error()
        if err > 1e-9:
            raise ValueError(f"not a weighted potential game: worst deviation mismatch {err:.3e}")

    def alignment_error(self) -> float:
        worst = 0.0
        for i in range(self.game.num_players):
            p = np.moveaxis(self.phi, i, -1)
            u = np.moveaxis(self.game.utilities[i], i, -1)
            dp = p[..., :, None] - p[..., None, :]
            du = u[..., :, None] - u[..., None, :]
            worst = max(worst, float(np.abs(dp - self.weights[i] * du).max()))
        return worst

    @property
    def phi_max(self) -> float:
        return float(np.abs(self.phi).max())

    @property
    def smoothness(self) -> float:
        """One-sided smoothness constant L = phi_max * sum_i |A_i| / 2."""
        return 0.5 * self.phi_max * sum(self.game.action_counts)

    @property
    def md_eta(self) -> float:
        return 1.0 / (2.0 * self.smoothness)

    # -- mixed extension ---------------------------------------------------

    def mixed_potential(self, x) -> float:
        t = self.phi
        for xi in MixedProfile(list(x)):
            t = np.tensordot(xi, t, axes=(0, 0))
        return float(t)

    def _raw_potential(self, vectors) -> float:
        """Multilinear form at arbitrary vectors (finite-difference probes)."""
        t = self.phi
        for v in vectors:
            t = np.tensordot(np.asarray(v, dtype=float), t, axes=(0, 0))
        return float(t)

    def mixed_potential_gradient(self, x) -> list[np.ndarray]:
        """Component (i, a_i) is E_{a_-i ~ x_-i} Phi(a_i, a_-i); equals w_i u_i(a_i, x_-i)."""
        x = MixedProfile(list(x))
        grads = []
        for i in range(self.game.num_players):
            t = np.moveaxis(self.phi, i, 0)
            for j in range(self.game.num_players):
                if j != i:
                    t = np.tensordot(t, x[j], axes=(1, 0))
            grads.append(t)
        return grads


def potential_from_utilities(phi, weights, opponents_terms) -> PotentialGame:
    """Assemble u_i = phi / w_i + c_i(a_-i); phi differences then match exactly."""
    phi = np.asarray(phi, dtype=float)
    weights = np.asarray(weights, dtype=float)
    tensors = []
    n = phi.ndim
    for i in range(n):
        c = np.asarray(opponents_terms[i], dtype=float)
        shape = list(phi.shape)
        shape[i] = 1
        tensors.append(phi / weights[i] + c.reshape(shape))
    game = NormalFormGame(tensors, rescale="error")
    return PotentialGame(game, phi, weights)


def random_potential_game(rng: np.random.Generator, n_players: int = 2,
                          max_actions: int = 4, weighted: bool = True) -> PotentialGame:
    """Random weighted potential game with utilities already inside [-1, 1]."""
    counts = tuple(int(rng.integers(2, max_actions + 1)) for _ in range(n_players))
    weights = rng.uniform(0.6, 1.8, size=n_players) if weighted else np.ones(n_players)
    # |u_i| <= |phi|/w_i + |c_i| must stay within 1
    phi_mag = 0.45 * weights.min()
    phi = rng.uniform(-phi_mag, phi_mag, size=counts)
    terms = []
    for i in range(n_players):
        shape = counts[:i] + counts[i + 1:]
        terms.append(rng.uniform(-0.45, 0.45, size=shape))
    return potential_from_utilities(phi, weights, terms)


# -- mirror-descent play with certificates --------------------------------------


@dataclass
class PotentialRunLog:
    run: RunLog
    potential: PotentialGame
    phi_series: np.ndarray  # (T+1,), Phi(x(t))
    eta: float

    def step_slacks(self) -> np.ndarray:
        """Phi increase minus (1/2 eta) * squared step, per step; certified >= -1e-9."""
        step_sq = np.zeros(self.phi_series.size - 1)
        for xi in self.run.x:
            step_sq += ((xi[1:] - xi[:-1]) ** 2).sum(axis=1)
        return np.diff(self.phi_series) - step_sq / (2.0 * self.eta)

    def cumulative_bound_slack(self) -> float:
        """Slack of (1/2 eta) sum_t ||dx||^2 <= 2 phi_max at the full horizon."""
        step_sq = sum(((xi[1:] - xi[:-1]) ** 2).sum(axis=1) for xi in self.run.x)
        return 2.0 * self.potential.phi_max - float(step_sq.sum()) / (2.0 * self.eta)


def run_md_potential(pgame: PotentialGame, regularizers, T: int,
                     eta: float | None = None, init=None) -> PotentialRunLog:
    """All players run mirror descent on the potential gradient feedback.

    Feedback is w_i * u_i(., x_-i), i.e. the i-block of grad Phi; the
    per-step potential-increase certificate is checked for every t and a
    violation aborts with the offending step attached.
    """
    n = pgame.game.num_players
    if isinstance(regularizers, Regularizer):
        regularizers = [regularizers] * n
    eta = pgame.md_eta if eta is None else eta
    configs = [LearnerConfig(MD, eta, reg) for reg in regularizers]
    log = run_dynamics(pgame.game, configs, T, init=init, utility_scale=pgame.weights)
    phi = np.array([pgame.mixed_potential([xi[t] for xi in log.x])
                    for t in range(T + 1)])
    out = PotentialRunLog(log, pgame, phi, eta)
    slacks = out.step_slacks()
    if slacks.min() < -CERT_TOL:
        t = int(np.argmin(slacks)) + 1
        raise CertificateViolation(
            f"potential-increase certificate failed at step {t} by {slacks.min():.3e}",
            dump={"t": t, "x_prev": [xi[t - 1] for xi in log.x], "x_next": [xi[t] for xi in log.x],
                  "phi_prev": phi[t - 1], "phi_next": phi[t], "eta": eta},
        )
    return out


def md_rate_certificate(plog: PotentialRunLog, epsilon: float, grad_smoothness: float | None = None):
    """First iterate with joint step norm <= epsilon, with its implied Nash-gap bound.

    The bounded-path certificate forces such an iterate within
    ceil(4 eta phi_max / eps^2) + 1 steps; not finding one is a bug.
    The implied gap eps (G Omega / eta + sqrt(|A|)) needs a G-smooth
    regularizer; with entropy players G is infinite and only the
    existence half is certified.
    """
    eta = plog.eta
    budget = int(np.ceil(4.0 * eta * plog.potential.phi_max / epsilon**2)) + 1
    step = np.sqrt(sum(((xi[1:] - xi[:-1]) ** 2).sum(axis=1) for xi in plog.run.x))
    hits = np.nonzero(step <= epsilon)[0]
    if hits.size == 0 or hits[0] + 1 > budget:
        raise CertificateViolation(
            f"no iterate with step <= {epsilon} within the {budget}-step budget",
            dump={"budget": budget, "min_step": float(step.min())},
        )
    t = int(hits[0])  # x(t) -> x(t+1) is the small step; x(t) is the certified iterate
    if grad_smoothness is None:
        grad_smoothness = max(cfg.regularizer.grad_smoothness for cfg in plog.run.configs)
    omega = Regularizer.l2_diameter(max(plog.run.game.action_counts))
    implied_gap = epsilon * (grad_smoothness * omega / eta + np.sqrt(max(plog.run.game.action_counts)))
    profile = [xi[t] for xi in plog.run.x]
    return {
        "iterate": t,
        "budget": budget,
        "step_norm": float(step[t]),
        "implied_gap": float(implied_gap),
        "nash_gap": plog.run.game.nash_gap(profile),
    }


# -- optimistic play -------------------------------------------------------------


def omwu_potential_eta(pgame: PotentialGame) -> float:
    """min over the three admissibility constraints for the optimistic path bound."""
    n = pgame.game.num_players
    counts = np.array(pgame.game.action_counts, dtype=float)
    roots = np.sqrt(counts)
    bounds = [1.0 / (2.0 * pgame.smoothness)]
    for i in range(n):
        bounds.append(1.0 / (2.0 * roots[i] * max(n - 1, 1)))
        others = roots.sum() - roots[i]
        if others > 0:
            bounds.append(1.0 / (4.0 * others))
    return float(min(bounds))


def omwu_potential_run(pgame: PotentialGame, T: int, eta: float | None = None):
    """OMWU for every player, with the optimistic path-length certificate.

    Certifies sum_t sum_i ||x_i(t+1) - x_i(t)||_2^2 <= 16 eta phi_max and logs
    the constant that bounds every player's regret at every prefix.
    """
    if not np.allclose(pgame.weights, 1.0):
        raise ValueError("optimistic regret certificates assume identity weights")
    eta = omwu_potential_eta(pgame) if eta is None else eta
    from gamelab.learners import omwu_config

    log = run_dynamics(pgame.game, omwu_config(eta=eta), T)
    # OMWU holds x(1) = x(0); the telescoping starts at the first real move.
    path_sq = sum(((xi[1:] - xi[:-1]) ** 2).sum(axis=1) for xi in log.x)
    path_total = float(path_sq.sum())
    bound = 16.0 * eta * pgame.phi_max
    if path_total > bound + CERT_TOL:
        raise CertificateViolation(
            f"optimistic path certificate failed: {path_total:.6f} > {bound:.6f}",
            dump={"path_total": path_total, "bound": bound, "eta": eta},
        )
    n = pgame.game.num_players
    regret_constants = []
    for i, d in enumerate(pgame.game.action_counts):
        omega = Regularizer("negative_entropy").anchored_diameter(d)
        max_other = max(dj for j, dj in enumerate(pgame.game.action_counts) if j != i) if n > 1 else 0
        regret_constants.append(omega / eta + 16.0 * eta**2 * (n - 1) * max_other * pgame.phi_max)
    return log, {"eta": eta, "path_total": path_total, "path_bound": bound,
                 "regret_constants": regret_constants}


# -- near-potential games ----------------------------------------------------------


@dataclass
class NearPotentialSpec:
    """A game paired with a reference potential game within MPD distance delta."""

    game: NormalFormGame
    reference: PotentialGame
    delta: float
    gradient_error: float  # measured max_i,a |grad_i Phi(a) - u_i(a)|

    @classmethod
    def build(cls, game: NormalFormGame, reference: PotentialGame) -> "NearPotentialSpec":
        from gamelab.game_classes import mpd_distance

        delta = mpd_distance(game, reference.game)
        err = 0.0
        for i in range(game.num_players):
            # pure-profile gradient of the reference potential is w_i * u_ref_i
            g = reference.weights[i] * reference.game.utilities[i]
            err = max(err, float(np.abs(g - game.utilities[i]).max()))
        return cls(game, reference, delta, err)


def near_potential_run(spec: NearPotentialSpec, T: int, eta: float | None = None):
    """MD on the perturbed game; Phi must increase while steps stay above threshold.

    Whenever ||x(t+1) - x(t)||_2 >= 2 sqrt(eta n E) (E the measured gradient
    error bound standing in for C delta), asserts
    Phi(t+1) - Phi(t) >= (1/2 eta) ||dx||^2 - 2 n E.  Outside the threshold
    region the dynamics may cycle and nothing is asserted.
    """
    pgame = spec.reference
    eta = pgame.md_eta if eta is None else eta
    configs = [LearnerConfig(MD, eta, Regularizer(EUCLIDEAN)) for _ in range(spec.game.num_players)]
    log = run_dynamics(spec.game, configs, T)
    phi = np.array([pgame.mixed_potential([xi[t] for xi in log.x]) for t in range(T + 1)])
    step_sq = sum(((xi[1:] - xi[:-1]) ** 2).sum(axis=1) for xi in log.x)
    n = spec.game.num_players
    e_bound = spec.gradient_error
    threshold = 2.0 * np.sqrt(eta * n * e_bound)
    active = np.sqrt(step_sq) >= threshold
    slack = np.diff(phi) - (step_sq / (2.0 * eta) - 2.0 * n * e_bound)
    bad = active & (slack < -CERT_TOL)
    if np.any(bad):
        t = int(np.argmax(bad)) + 1
        raise CertificateViolation(
            f"near-potential increase certificate failed at step {t}",
            dump={"t": t, "slack": float(slack[t - 1])},
        )
    return log, {
        "phi_series": phi,
        "threshold": float(threshold),
        "active_steps": int(active.sum()),
        "delta": spec.delta,
        "gradient_error": e_bound,
    }


# -- concave-potential rate -----------------------------------------------------------


def concavity_midpoint_check(pgame: PotentialGame, rng: np.random.Generator,
                             samples: int = 10_000, tol: float = 1e-9) -> bool:
    """Randomized midpoint test of concavity of the mixed potential."""
    from gamelab.games import random_profile

    for _ in range(samples):
        x = random_profile(pgame.game.action_counts, rng)
        y = random_profile(pgame.game.action_counts, rng)
        mid = [(xi + yi) / 2.0 for xi, yi in zip(x, y)]
        if pgame.mixed_potential(mid) < 0.5 * (pgame.mixed_potential(x) + pgame.mixed_potential(y)) - tol:
            return False
    return True


def concave_rate_check(plog: PotentialRunLog, x_star, bregmans=None) -> np.ndarray:
    """Per-T slack of Phi(x*) - Phi(x(T+1)) <= (2L/T) sum_i D_i(x_i*, x_i(1)).

    ``x_star`` comes from an independent oracle (grid search or a long run);
    returns the slack series, nonnegative when the potential is concave.
    """
    pgame = plog.potential
    if bregmans is None:
        bregmans = [cfg.regularizer for cfg in plog.run.configs]
    phi_star = pgame.mixed_potential(x_star)
    d_init = sum(reg.bregman(xs, xi[1]) for reg, xs, xi in zip(bregmans, x_star, plog.run.x))
    T = np.arange(1, plog.phi_series.size - 1)
    lhs = phi_star - plog.phi_series[2:]  # Phi(x(T+1)) for T = 1..
    rhs = 2.0 * pgame.smoothness * d_init / T
    return rhs - lhs
