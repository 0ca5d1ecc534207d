"""Regret, path-length, RVU-audit, saddle-gap, and welfare metrics.

Everything here is pure post-processing over logged trajectories.  The
histories passed in include the t = 0 profile; regrets and path lengths
accumulate over t = 1..T.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from gamelab.games import NormalFormGame, SmoothnessParams
from gamelab.learners import RunLog

AUDIT_TOL = 1e-9


# -- regret ---------------------------------------------------------------


def external_regret_series(x_hist: np.ndarray, u_hist: np.ndarray) -> np.ndarray:
    """Prefix regrets Reg^T for T = 1..len-1 against the best fixed action.

    Pure comparators suffice by linearity of the expected utility.
    """
    cum_u = np.cumsum(u_hist[1:], axis=0)
    earned = np.cumsum(np.einsum("td,td->t", x_hist[1:], u_hist[1:]))
    return cum_u.max(axis=1) - earned


@dataclass
class RegretReport:
    per_player: list[np.ndarray]  # each (T,), prefix regrets
    best_action: list[int]  # hindsight-best pure action at horizon T
    total: np.ndarray  # (T,), signed sum over players

    @property
    def horizon(self) -> int:
        return self.total.shape[0]

    def max_regret(self) -> float:
        return max(float(r.max()) for r in self.per_player)


def regret_report(log: RunLog) -> RegretReport:
    series = [external_regret_series(xi, ui) for xi, ui in zip(log.x, log.u)]
    best = [int(np.argmax(ui[1:].sum(axis=0))) for ui in log.u]
    total = np.sum(series, axis=0)
    for i, (r, ui) in enumerate(zip(series, log.u)):
        T = np.arange(1, r.size + 1)
        if np.any(r < -2.0 * T - 1e-9):
            raise AssertionError(f"player {i}: regret below the -2T floor, utilities unnormalized?")
    return RegretReport(series, best, total)


# -- path lengths ----------------------------------------------------------


def path_length_sq_series(x_hist: np.ndarray, norm: str = "l1") -> np.ndarray:
    """Prefix sums of ||x(t) - x(t-1)||^2 for t = 1..T; nondecreasing in T."""
    diffs = x_hist[1:] - x_hist[:-1]
    if norm == "l1":
        step = np.abs(diffs).sum(axis=1) ** 2
    elif norm == "l2":
        step = (diffs**2).sum(axis=1)
    else:
        raise ValueError(f"unknown norm: {norm!r}")
    return np.cumsum(step)


def total_path_length_sq(log: RunLog, norm: str = "l1") -> float:
    return float(sum(path_length_sq_series(xi, norm)[-1] for xi in log.x))


def utility_variation_bound_slack(log: RunLog) -> float:
    """min over i, t of sum_{j != i} ||x_j(t)-x_j(t-1)||_1 - ||u_i(t)-u_i(t-1)||_inf.

    Nonnegative (up to float error) for any normal-form game with utilities
    in [-1, 1]: the utility swing is dominated by the opponents' total
    variation.
    """
    dx = [np.abs(xi[1:] - xi[:-1]).sum(axis=1) for xi in log.x]
    total_dx = np.sum(dx, axis=0)
    worst = np.inf
    for i, ui in enumerate(log.u):
        du = np.abs(ui[1:] - ui[:-1]).max(axis=1)
        slack = (total_dx - dx[i]) - du
        worst = min(worst, float(slack.min()))
    return worst


# -- RVU audit ---------------------------------------------------------------


@dataclass(frozen=True)
class RvuParams:
    """Declared (alpha, beta, gamma) of a regret-bounded-by-variation bound."""

    alpha: float
    beta: float
    gamma: float
    norms: str = "l1_linf"  # or "l2_l2"

    def __post_init__(self):
        if min(self.alpha, self.beta, self.gamma) <= 0:
            raise ValueError("RVU parameters must be positive")
        if self.norms not in ("l1_linf", "l2_l2"):
            raise ValueError(f"unknown norm pair: {self.norms!r}")

    def trajectory_condition(self, n_players: int, betas=None) -> bool:
        """gamma_i >= 2 (n-1) sum_{j != i} beta_j, the bounded-path premise."""
        if betas is None:
            betas = [self.beta] * n_players
        others = sum(betas) - self.beta
        return self.gamma >= 2.0 * (n_players - 1) * others


def rvu_audit(u_hist: np.ndarray, x_hist: np.ndarray, params: RvuParams, tol: float = AUDIT_TOL):
    """Check Reg^T <= alpha + beta * sum ||du||_*^2 - gamma * sum ||dx||^2 at every prefix.

    Returns {pass, worst_slack, worst_prefix}; slack is RHS - Reg^T.
    """
    reg = external_regret_series(x_hist, u_hist)
    du = u_hist[1:] - u_hist[:-1]
    dx = x_hist[1:] - x_hist[:-1]
    if params.norms == "l1_linf":
        du_sq = np.abs(du).max(axis=1) ** 2
        dx_sq = np.abs(dx).sum(axis=1) ** 2
    else:
        du_sq = (du**2).sum(axis=1)
        dx_sq = (dx**2).sum(axis=1)
    rhs = params.alpha + params.beta * np.cumsum(du_sq) - params.gamma * np.cumsum(dx_sq)
    slack = rhs - reg
    worst = int(np.argmin(slack))
    return {
        "pass": bool(slack[worst] >= -tol),
        "worst_slack": float(slack[worst]),
        "worst_prefix": worst + 1,
    }


def rvu_audit_run(log: RunLog, tol: float = AUDIT_TOL):
    """Audit every player of a run against their declared RVU parameters."""
    results = []
    for i, cfg in enumerate(log.configs):
        params = cfg.rvu_declaration(log.game.action_counts[i])
        if params is None:
            results.append(None)
            continue
        results.append(rvu_audit(log.u[i], log.x[i], params, tol))
    return results


def cor33_regret_bound(n_players: int, params: RvuParams) -> float:
    """alpha + 2 n (n-1) alpha beta / gamma: the O(1) individual regret constant."""
    return params.alpha + 2.0 * n_players * (n_players - 1) * params.alpha * params.beta / params.gamma


# -- saddle-point gap ----------------------------------------------------------


def saddle_point_gap(A: np.ndarray, x: np.ndarray, y: np.ndarray, x_domain=None, y_domain=None) -> float:
    """max_{y'} x^T A y' - min_{x'} x'^T A y for the problem min_x max_y x^T A y.

    Domains default to probability simplexes; anything with a
    ``best_response(gradient) -> (vertex, value)`` oracle works (treeplexes
    included).
    """
    A = np.asarray(A, dtype=float)
    gy = A.T @ x
    gx = A @ y
    best_y = float(gy.max()) if y_domain is None else y_domain.best_response(gy)[1]
    worst_x = float(gx.min()) if x_domain is None else -x_domain.best_response(-gx)[1]
    gap = best_y - worst_x
    return float(gap)


# -- welfare ---------------------------------------------------------------------


def smooth_welfare_lower_bound_slack(
    game: NormalFormGame, log: RunLog, params: SmoothnessParams
) -> np.ndarray:
    """Slack of avg welfare >= rho * opt - (1/((1+mu) T)) sum_i Reg_i^T at every prefix."""
    opt = game.optimal_welfare()
    welfare = log.welfare_series()[1:]
    avg_w = np.cumsum(welfare) / np.arange(1, welfare.size + 1)
    total_reg = regret_report(log).total
    T = np.arange(1, welfare.size + 1)
    rhs = params.robust_poa * opt - total_reg / ((1.0 + params.mu) * T)
    return avg_w - rhs


def welfare_dichotomy_check(
    game: NormalFormGame,
    log: RunLog,
    params: SmoothnessParams,
    gamma: float,
    eta: float,
):
    """Either some iterate is near-stationary (branch 1) or the average welfare
    beats the robust price of anarchy by gamma^2/(16 eta (1+mu)) (branch 2).

    Branch 1 triggers on the proximal residual sum_i(||x-xh||^2 + ||x-xh_prev||^2)
    dropping to gamma^2.  Requires an all-OMD run of length at least
    16 sum_i Omega_i / gamma^2 (Omega_i the pairwise Bregman diameter).
    """
    omegas = [cfg.regularizer.bregman_diameter(d) for cfg, d in zip(log.configs, game.action_counts)]
    T_required = int(np.ceil(16.0 * sum(omegas) / gamma**2))
    T = log.num_iterations
    if T < T_required:
        raise ValueError(f"need T >= {T_required} iterations for gamma={gamma}, got {T}")
    residual_sq = log.proximal_residual_series() ** 2
    branch1_hits = np.nonzero(residual_sq <= gamma**2)[0]
    gap_constant = _branch1_gap_constant(log, gamma, eta)
    if branch1_hits.size:
        t = int(branch1_hits[0]) + 1
        profile = [xi[t] for xi in log.x]
        return {
            "branch": 1,
            "iterate": t,
            "nash_gap": game.nash_gap(profile),
            "gap_bound": gap_constant,
            "residual": float(np.sqrt(residual_sq[t - 1])),
        }
    opt = game.optimal_welfare()
    avg_w = float(log.welfare_series()[1:].mean())
    bound = params.robust_poa * opt + gamma**2 / (16.0 * eta * (1.0 + params.mu))
    return {
        "branch": 2,
        "avg_welfare": avg_w,
        "welfare_bound": bound,
        "slack": avg_w - bound,
        "holds": bool(avg_w >= bound - AUDIT_TOL),
    }


def _branch1_gap_constant(log: RunLog, gamma: float, eta: float) -> float:
    """gamma (C* + 2 max_i G_i Omega'_i / eta) for the l2 norm-pair instantiation.

    C* = sqrt(d) is the tight linf-to-l2 constant on R^d; entropy players
    have no finite smoothness constant, which renders the bound infinite
    (reported, not certified).
    """
    c_star = max(np.sqrt(d) for d in log.game.action_counts)
    worst = max(
        cfg.regularizer.grad_smoothness * cfg.regularizer.l2_diameter(d)
        for cfg, d in zip(log.configs, log.game.action_counts)
    )
    return gamma * (c_star + 2.0 * worst / eta)
