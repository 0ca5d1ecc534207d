"""Per-player online learners and the multi-player runner.

Timing convention: at t = 0 every player plays the argmin of their
regularizer (uniform for both DGFs) and receives the utility vector of
that joint profile; this defines u(0).  For t >= 1 the iterate x(t) is
produced from the feedback up to u(t-1), after which u(t) is revealed.
Regret is accumulated over t = 1..T; u(0) exists only to seed predictions.

Learners keep O(1) state: a short utility window sized by the prediction
mechanism, the OFTRL running sum, and the OMD secondary iterate.  Full
histories live in the RunLog only.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from gamelab.games import NormalFormGame, MixedProfile, random_profile
from gamelab.regularizers import EUCLIDEAN, NEGATIVE_ENTROPY, Regularizer

ONE_STEP = "one_step"
H_STEP = "h_step"
DISCOUNTED = "discounted"
H_ORDER = "h_order"

H_ORDER_COEFFS = {
    1: (1.0,),
    2: (2.0, -1.0),
    3: (3.0, -3.0, 1.0),
    4: (4.0, -6.0, 4.0, -1.0),
}

OMD = "omd"
OFTRL = "oftrl"
OMWU = "omwu"
MD = "md"

IDENTITY = "identity"
LOG_SHIFT = "log_shift"


class RunError(RuntimeError):
    """A step failed; carries the iteration index at which it happened."""

    def __init__(self, iteration: int, message: str):
        super().__init__(f"iteration {iteration}: {message}")
        self.iteration = iteration


@dataclass(frozen=True)
class PredictionMechanism:
    """How the prediction m(t) is formed from past utilities.

    - one_step: m(t) = u(t-1).
    - h_step: the average of the last H utilities.
    - discounted: geometrically discounted average with ratio delta, most
      recent weighted highest.
    - h_order: finite-difference extrapolation of order H in {1..4}.

    Entries before t = 0 are backfilled with u(0).
    """

    kind: str = ONE_STEP
    window: int = 1
    discount: float = 0.5
    order: int = 1

    def __post_init__(self):
        if self.kind not in (ONE_STEP, H_STEP, DISCOUNTED, H_ORDER):
            raise ValueError(f"unknown prediction kind: {self.kind!r}")
        if self.kind == H_STEP and self.window < 1:
            raise ValueError("h_step needs window >= 1")
        if self.kind == DISCOUNTED and not (0.0 < self.discount < 1.0):
            raise ValueError("discount must lie in (0, 1)")
        if self.kind == H_ORDER:
            if self.order not in H_ORDER_COEFFS:
                raise ValueError("h_order supports orders 1..4")
            assert abs(sum(H_ORDER_COEFFS[self.order]) - 1.0) < 1e-12

    @property
    def depth(self) -> int:
        """How many past utility vectors the learner must retain."""
        if self.kind == H_STEP:
            return self.window
        if self.kind == H_ORDER:
            return self.order
        return 1


def one_step() -> PredictionMechanism:
    return PredictionMechanism(ONE_STEP)


def h_step(window: int) -> PredictionMechanism:
    return PredictionMechanism(H_STEP, window=window)


def discounted(delta: float) -> PredictionMechanism:
    return PredictionMechanism(DISCOUNTED, discount=delta)


def h_order(order: int) -> PredictionMechanism:
    return PredictionMechanism(H_ORDER, order=order)


@dataclass(frozen=True)
class LearnerConfig:
    algorithm: str
    eta: float
    regularizer: Regularizer = Regularizer(EUCLIDEAN)
    prediction: PredictionMechanism = field(default_factory=one_step)
    transform: str = IDENTITY

    def __post_init__(self):
        if self.algorithm not in (OMD, OFTRL, OMWU, MD):
            raise ValueError(f"unknown algorithm: {self.algorithm!r}")
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        if self.algorithm == OMWU and self.regularizer.kind != NEGATIVE_ENTROPY:
            raise ValueError("omwu is the entropy instantiation; use the negative_entropy regularizer")
        if self.transform not in (IDENTITY, LOG_SHIFT):
            raise ValueError(f"unknown transform: {self.transform!r}")
        if self.transform == LOG_SHIFT and self.algorithm != MD:
            raise ValueError("log_shift is a mirror-descent transform (market dynamics)")

    def rvu_declaration(self, d: int):
        """Declared (alpha, beta, gamma) under the (l1, linf) norm pair.

        OFTRL: (Omega/eta, eta, 1/(4 eta)); with H-step predictions beta
        becomes eta H^2, with discounted predictions eta/(1-delta)^3.
        OMD and OMWU: (Omega/eta, eta, 1/(8 eta)).  Plain MD is not an
        optimistic method and declares nothing.
        """
        from gamelab.metrics import RvuParams  # local import: metrics depends on learners

        if self.algorithm == MD:
            return None
        omega = self.regularizer.anchored_diameter(d)
        alpha = omega / self.eta
        beta = self.eta
        gamma = 1.0 / (8.0 * self.eta)
        if self.algorithm == OFTRL:
            gamma = 1.0 / (4.0 * self.eta)
        if self.prediction.kind == H_STEP:
            beta = self.eta * self.prediction.window**2
        elif self.prediction.kind == DISCOUNTED:
            beta = self.eta / (1.0 - self.prediction.discount) ** 3
        return RvuParams(alpha=alpha, beta=beta, gamma=gamma, norms="l1_linf")


def default_eta(n_players: int) -> float:
    """Learning rate sufficient for the bounded-path-length regime in NFGs."""
    return 1.0 / (4.0 * max(n_players - 1, 1))


def omd_config(eta: float | None = None, n_players: int = 2, dgf: str = EUCLIDEAN,
               prediction: PredictionMechanism | None = None) -> LearnerConfig:
    return LearnerConfig(
        OMD,
        eta if eta is not None else default_eta(n_players),
        Regularizer(dgf),
        prediction or one_step(),
    )


def oftrl_config(eta: float | None = None, n_players: int = 2, dgf: str = EUCLIDEAN,
                 prediction: PredictionMechanism | None = None) -> LearnerConfig:
    return LearnerConfig(
        OFTRL,
        eta if eta is not None else default_eta(n_players),
        Regularizer(dgf),
        prediction or one_step(),
    )


def omwu_config(eta: float | None = None, n_players: int = 2) -> LearnerConfig:
    return LearnerConfig(
        OMWU,
        eta if eta is not None else default_eta(n_players),
        Regularizer(NEGATIVE_ENTROPY),
    )


def md_config(eta: float, dgf: str = EUCLIDEAN, transform: str = IDENTITY) -> LearnerConfig:
    return LearnerConfig(MD, eta, Regularizer(dgf), transform=transform)


def apply_transform(transform: str, u: np.ndarray) -> np.ndarray:
    if transform == IDENTITY:
        return u
    if np.any(u <= 0):
        raise ValueError("log_shift requires strictly positive utilities")
    return np.log(u) - 1.0


class Learner:
    """State machine for one player; ``update(u)`` consumes the newest utility and returns the next iterate."""

    def __init__(self, config: LearnerConfig, d: int, x0: np.ndarray | None = None):
        self.config = config
        self.reg = config.regularizer
        self.eta = config.eta
        self.d = d
        self.x = self.reg.argmin_point(d) if x0 is None else np.asarray(x0, dtype=float)
        self.x_hat = self.x.copy() if config.algorithm == OMD else None
        self._window: deque[np.ndarray] = deque(maxlen=config.prediction.depth)
        self._u0: np.ndarray | None = None
        self._cum = np.zeros(d)  # OFTRL: sum of u(1..t); u(0) feeds predictions only
        self._disc_num = np.zeros(d)
        self._disc_den = 0.0
        self._prev_u: np.ndarray | None = None  # OMWU
        self._steps = 0

    # -- predictions --------------------------------------------------------

    def _predict(self) -> np.ndarray:
        mech = self.config.prediction
        if mech.kind == ONE_STEP:
            return self._window[-1]
        if mech.kind == H_STEP:
            H = mech.window
            have = list(self._window)
            missing = H - len(have)
            m = np.sum(have, axis=0)
            if missing > 0:
                m = m + missing * self._u0
            return m / H
        if mech.kind == DISCOUNTED:
            return self._disc_num / self._disc_den
        coeffs = H_ORDER_COEFFS[mech.order]
        have = list(self._window)  # oldest first
        m = np.zeros(self.d)
        for k, c in enumerate(coeffs):  # k steps back from the latest
            idx = len(have) - 1 - k
            m += c * (have[idx] if idx >= 0 else self._u0)
        return m

    def _record(self, u: np.ndarray):
        if self._u0 is None:
            self._u0 = u.copy()
        self._window.append(u)
        delta = self.config.prediction.discount
        self._disc_num = u + delta * self._disc_num
        self._disc_den = 1.0 + delta * self._disc_den

    # -- updates -------------------------------------------------------------
    #
    # Timing: ``observe(u(t))`` ingests the newest utility (advancing the OMD
    # secondary iterate for t >= 1; u(0) only seeds predictions), and
    # ``propose()`` then emits the next primary iterate.  ``update`` chains
    # the two: x(t) = update(u(t-1)).

    def observe(self, u: np.ndarray):
        u = np.asarray(u, dtype=float)
        algo = self.config.algorithm
        if algo == OMD and self._steps > 0:
            self.x_hat = self.reg.prox_step(self.x_hat, u, self.eta)
        elif algo == OFTRL and self._steps > 0:
            self._cum += u
        self._record(u)
        self._steps += 1

    def propose(self) -> np.ndarray:
        algo = self.config.algorithm
        if algo == OMD:
            m = self._predict()
            self.x = self.reg.prox_step(self.x_hat, m, self.eta)
        elif algo == OFTRL:
            m = self._predict()
            self.x = self.reg.ftrl_step(self._cum + m, self.eta)
        elif algo == OMWU:
            if self._steps >= 2:
                u_last, u_prev = self._window[-1], self._prev_u
                z = self.eta * (2.0 * u_last - u_prev)
                w = self.x * np.exp(z - z.max())
                self.x = w / w.sum()
            self._prev_u = self._window[-1].copy()
        else:  # MD
            g = apply_transform(self.config.transform, self._window[-1])
            self.x = self.reg.prox_step(self.x, g, self.eta)
        return self.x

    def update(self, u: np.ndarray) -> np.ndarray:
        self.observe(u)
        return self.propose()


@dataclass
class RunLog:
    """Full per-iteration record of a dynamics run on a normal-form game.

    ``x[i]`` and ``u[i]`` have shape (T+1, d_i), indexed by t = 0..T.
    ``x_hat[i]`` is present for OMD players only.
    """

    game: NormalFormGame
    configs: list[LearnerConfig]
    x: list[np.ndarray]
    u: list[np.ndarray]
    x_hat: list[np.ndarray | None]
    seed: int | None = None

    @property
    def num_iterations(self) -> int:
        return self.x[0].shape[0] - 1

    @property
    def num_players(self) -> int:
        return len(self.x)

    def nash_gap_series(self) -> np.ndarray:
        gaps = [np.max(ui, axis=1) - np.einsum("td,td->t", xi, ui) for xi, ui in zip(self.x, self.u)]
        return np.max(gaps, axis=0)

    def welfare_series(self) -> np.ndarray:
        return np.sum([np.einsum("td,td->t", xi, ui) for xi, ui in zip(self.x, self.u)], axis=0)

    def proximal_residual_series(self) -> np.ndarray:
        """sqrt of sum_i (||x_i(t)-xh_i(t)||^2 + ||x_i(t)-xh_i(t-1)||^2), t = 1..T.

        Only defined when every player runs OMD (needs the secondary iterate).
        """
        if any(xh is None for xh in self.x_hat):
            raise ValueError("proximal residual needs OMD secondary iterates for every player")
        total = None
        for xi, xhi in zip(self.x, self.x_hat):
            a = np.sum((xi[1:] - xhi[1:]) ** 2, axis=1)
            b = np.sum((xi[1:] - xhi[:-1]) ** 2, axis=1)
            total = a + b if total is None else total + a + b
        return np.sqrt(total)


def _utility_vectors(game: NormalFormGame, strategies: list[np.ndarray]) -> list[np.ndarray]:
    profile = MixedProfile(strategies)
    return [game.utility_vector(i, profile) for i in range(game.num_players)]


def run_dynamics(
    game: NormalFormGame,
    configs,
    T: int,
    seed: int | None = None,
    random_init: bool = False,
    init=None,
    utility_scale: np.ndarray | None = None,
) -> RunLog:
    """Run heterogeneous learners against each other for T iterations.

    Deterministic given the seed; the seed is only consulted when
    ``random_init`` asks for a random starting profile (``init`` passes an
    explicit one instead).  ``utility_scale`` multiplies each player's
    observed utility vector (used to fold weighted potential
    transformations into the feedback) and is recorded in the log.
    """
    if T < 1:
        raise ValueError("T must be at least 1")
    if isinstance(configs, LearnerConfig):
        configs = [configs] * game.num_players
    configs = list(configs)
    if len(configs) != game.num_players:
        raise ValueError("one learner config per player required")
    scale = np.ones(game.num_players) if utility_scale is None else np.asarray(utility_scale, float)

    if init is None:
        fast = _batched_runner(game, configs, T, seed, random_init, scale)
        if fast is not None:
            return fast

    n = game.num_players
    if init is not None:
        x0 = [np.asarray(xi, dtype=float) for xi in init]
    elif random_init:
        rng = np.random.default_rng(seed)
        x0 = list(random_profile(game.action_counts, rng))
    else:
        x0 = [cfg.regularizer.argmin_point(d) for cfg, d in zip(configs, game.action_counts)]
    learners = [Learner(cfg, d, xi) for cfg, d, xi in zip(configs, game.action_counts, x0)]

    x_log = [np.empty((T + 1, d)) for d in game.action_counts]
    u_log = [np.empty((T + 1, d)) for d in game.action_counts]
    xh_log = [np.empty((T + 1, d)) if cfg.algorithm == OMD else None
              for cfg, d in zip(configs, game.action_counts)]

    current = [lr.x for lr in learners]
    utils = _utility_vectors(game, current)
    for i in range(n):
        x_log[i][0] = current[i]
        u_log[i][0] = scale[i] * utils[i]
        if xh_log[i] is not None:
            xh_log[i][0] = learners[i].x_hat

    for t in range(1, T + 1):
        try:
            current = [lr.update(u_log[i][t - 1]) for i, lr in enumerate(learners)]
        except Exception as exc:  # noqa: BLE001 - re-raised with the iteration index
            raise RunError(t, str(exc)) from exc
        utils = _utility_vectors(game, current)
        for i in range(n):
            x_log[i][t] = current[i]
            u_log[i][t] = scale[i] * utils[i]
            if xh_log[i] is not None:
                # after update(u(t-1)) the learner holds xh(t-1)
                xh_log[i][t - 1] = learners[i].x_hat
    for i, lr in enumerate(learners):
        if xh_log[i] is not None:
            lr.observe(u_log[i][T])  # finalize xh(T)
            xh_log[i][T] = lr.x_hat

    log = RunLog(game, configs, x_log, u_log, xh_log, seed)
    _check_simplex_invariant(log)
    return log


def _check_simplex_invariant(log: RunLog, tol: float = 1e-10):
    for i, xi in enumerate(log.x):
        err = np.abs(xi.sum(axis=1) - 1.0).max()
        if err > tol or xi.min() < -tol:
            raise RunError(int(np.argmax(np.abs(xi.sum(axis=1) - 1.0))),
                           f"player {i} left the simplex by {err:.2e}")


# -- batched fast path ---------------------------------------------------------
#
# The long zero-sum benchmark runs (T = 1e5) are two-player games where both
# players share the same one-step OMD/OFTRL/OMWU configuration.  Stepping the
# players as rows of one (2k, d) array (k lockstep games) keeps the
# per-iteration numpy call count flat; the general object path above produces
# identical trajectories (tested) and handles everything else.


def _batchable(game: NormalFormGame, configs: list[LearnerConfig]) -> bool:
    if game.num_players != 2 or len(set(game.action_counts)) != 1:
        return False
    c0 = configs[0]
    if any(cfg != c0 for cfg in configs[1:]):
        return False
    return (
        c0.algorithm in (OMD, OFTRL, OMWU)
        and c0.prediction.kind == ONE_STEP
        and c0.transform == IDENTITY
    )


def _batched_runner(game, configs, T, seed, random_init, scale):
    if not _batchable(game, configs) or random_init or np.any(scale != 1.0):
        return None
    return _run_lockstep([game], configs[0], T, seed)[0]


def run_dynamics_many(games, config: LearnerConfig, T: int, seed: int | None = None) -> list[RunLog]:
    """Run the same two-player configuration on several equal-shape games in lockstep.

    Trajectories are identical to per-game ``run_dynamics`` calls; stepping
    the games together just amortizes interpreter overhead on long runs.
    """
    games = list(games)
    d = games[0].action_counts[0]
    for g in games:
        if not _batchable(g, [config, config]) or g.action_counts[0] != d:
            return [run_dynamics(g, config, T, seed) for g in games]
    return _run_lockstep(games, config, T, seed)


def _run_lockstep(games, cfg, T, seed):
    k = len(games)
    d = games[0].action_counts[0]
    eta = cfg.eta
    entropy = cfg.regularizer.kind == NEGATIVE_ENTROPY
    # rows 2i, 2i+1 hold game i's players; u_row = M[row] @ x[partner(row)]
    M = np.empty((2 * k, d, d))
    for i, g in enumerate(games):
        M[2 * i] = g.utilities[0]
        M[2 * i + 1] = g.utilities[1].T
    partner = np.arange(2 * k).reshape(k, 2)[:, ::-1].ravel()
    ind = np.arange(1, d + 1, dtype=float)

    X = np.full((2 * k, d), 1.0 / d)
    x_log = np.empty((T + 1, 2 * k, d))
    u_log = np.empty((T + 1, 2 * k, d))
    x_log[0] = X
    U = np.matmul(M, X[partner][:, :, None])[:, :, 0]
    u_log[0] = U
    xh_log = None

    def prox_rows(anchor, G):
        if entropy:
            Z = eta * G
            W = anchor * np.exp(Z - Z.max(axis=1, keepdims=True))
            return W / W.sum(axis=1, keepdims=True)
        V = anchor + eta * G
        c = (np.cumsum(np.sort(V, axis=1)[:, ::-1], axis=1) - 1.0) / ind
        return np.maximum(V - c.max(axis=1)[:, None], 0.0)

    mm = np.matmul
    if cfg.algorithm == OMD:
        XH = X.copy()
        xh_log = np.empty((T + 1, 2 * k, d))
        xh_log[0] = XH
        for t in range(1, T + 1):
            X = prox_rows(XH, U)  # x(t) = prox(xh(t-1), m(t) = u(t-1))
            U = mm(M, X[partner][:, :, None])[:, :, 0]
            XH = prox_rows(XH, U)  # xh(t) = prox(xh(t-1), u(t))
            x_log[t] = X
            xh_log[t] = XH
            u_log[t] = U
    elif cfg.algorithm == OFTRL:
        cum = np.zeros((2 * k, d))
        first = True
        for t in range(1, T + 1):
            if not first:
                cum += U
            first = False
            score = eta * (cum + U)
            if entropy:
                W = np.exp(score - score.max(axis=1, keepdims=True))
                X = W / W.sum(axis=1, keepdims=True)
            else:
                c = (np.cumsum(np.sort(score, axis=1)[:, ::-1], axis=1) - 1.0) / ind
                X = np.maximum(score - c.max(axis=1)[:, None], 0.0)
            U = mm(M, X[partner][:, :, None])[:, :, 0]
            x_log[t] = X
            u_log[t] = U
    else:  # OMWU
        prev_U = U.copy()
        x_log[1] = X  # x(1) stays uniform
        U = mm(M, X[partner][:, :, None])[:, :, 0]
        u_log[1] = U
        for t in range(2, T + 1):
            Z = eta * (2.0 * U - prev_U)
            W = X * np.exp(Z - Z.max(axis=1, keepdims=True))
            X = W / W.sum(axis=1, keepdims=True)
            prev_U = U
            U = mm(M, X[partner][:, :, None])[:, :, 0]
            x_log[t] = X
            u_log[t] = U

    logs = []
    for i, g in enumerate(games):
        rows = (2 * i, 2 * i + 1)
        xh = [xh_log[:, r] if xh_log is not None else None for r in rows]
        log = RunLog(g, [cfg, cfg], [x_log[:, r] for r in rows], [u_log[:, r] for r in rows], xh, seed)
        _check_simplex_invariant(log)
        logs.append(log)
    return logs
