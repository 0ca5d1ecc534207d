"""Linear Fisher markets, proportional response, and the spending potential.

Spending vectors live on scaled simplexes (row i sums to the budget B_i);
prices and allocations are derived, so the market clears by construction.
The objective Phi(b) = sum_ij b_ij log(u_ij / p_j) is concave and
proportional response is exactly mirror descent on it under the entropy
DGF with the log-shift transform and unit step, which gives the O(1/T)
convergence handle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from gamelab.regularizers import ENTROPY_FLOOR, kl_divergence

RATE_SMOOTHNESS = 1.0  # relative (KL) smoothness constant of the spending objective


@dataclass
class FisherMarket:
    """n buyers with budgets, m divisible goods in unit supply, linear utilities u_ij > 0."""

    utilities: np.ndarray
    budgets: np.ndarray | None = None

    def __post_init__(self):
        self.utilities = np.asarray(self.utilities, dtype=float)
        if self.utilities.ndim != 2:
            raise ValueError("utilities must be an n x m matrix")
        if np.any(self.utilities <= 0):
            raise ValueError("linear Fisher markets here require u_ij > 0 (log transform)")
        n, m = self.utilities.shape
        if self.budgets is None:
            self.budgets = np.ones(n)
        else:
            self.budgets = np.asarray(self.budgets, dtype=float)
            if self.budgets.shape != (n,) or np.any(self.budgets <= 0):
                raise ValueError("budgets must be positive, one per buyer")

    @property
    def num_buyers(self) -> int:
        return self.utilities.shape[0]

    @property
    def num_goods(self) -> int:
        return self.utilities.shape[1]

    def uniform_spending(self) -> np.ndarray:
        n, m = self.utilities.shape
        return np.tile(self.budgets[:, None] / m, (1, m))

    def check_feasible(self, b: np.ndarray, tol: float = 1e-9):
        b = np.asarray(b, dtype=float)
        if b.shape != self.utilities.shape:
            raise ValueError("spending matrix has the wrong shape")
        if np.any(b < -tol):
            raise ValueError("negative spending")
        if np.abs(b.sum(axis=1) - self.budgets).max() > tol:
            raise ValueError("budgets not conserved")
        return b

    def prices(self, b: np.ndarray) -> np.ndarray:
        return np.asarray(b, dtype=float).sum(axis=0)

    def allocation(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        p = np.maximum(self.prices(b), ENTROPY_FLOOR)
        return b / p[None, :]

    def to_json_dict(self) -> dict:
        return {"utilities": self.utilities.tolist(), "budgets": self.budgets.tolist()}

    @classmethod
    def from_json_dict(cls, data: dict) -> "FisherMarket":
        return cls(np.asarray(data["utilities"], float),
                   np.asarray(data["budgets"], float) if "budgets" in data else None)


def shmyrev_objective(market: FisherMarket, b: np.ndarray) -> float:
    """Phi(b) = sum_ij b_ij log(u_ij / p_j), with 0 log(.) = 0 for unspent pairs."""
    b = market.check_feasible(b)
    p = market.prices(b)
    val = 0.0
    mask = b > 0
    ratios = market.utilities / np.maximum(p, ENTROPY_FLOOR)[None, :]
    val = float(np.sum(b[mask] * np.log(ratios[mask])))
    return val


def pr_step(market: FisherMarket, b: np.ndarray) -> np.ndarray:
    """Proportional response: b'_ij = B_i * u_ij x_ij / sum_k u_ik x_ik."""
    b = market.check_feasible(b)
    bang = market.utilities * market.allocation(b)  # u_ij x_ij
    totals = bang.sum(axis=1, keepdims=True)
    if np.any(totals <= 0):
        raise ValueError("a buyer received zero utility; impossible with u > 0 and positive budget")
    return market.budgets[:, None] * bang / totals


def entropy_md_step(market: FisherMarket, b: np.ndarray, eta: float = 1.0) -> np.ndarray:
    """Mirror descent on the per-dollar utility with entropy DGF and g(x) = log x - 1.

    At eta = 1 this reproduces pr_step exactly (the invariant the tests pin
    to 1e-12): the feedback is g(u_ij x_ij / b_ij) and the multiplicative
    update collapses to the proportional response ratios.
    """
    b = market.check_feasible(b)
    x = market.allocation(b)
    per_dollar = market.utilities * x / np.maximum(b, ENTROPY_FLOOR)
    g = np.log(np.maximum(per_dollar, ENTROPY_FLOOR)) - 1.0
    w = np.maximum(b, ENTROPY_FLOOR) * np.exp(eta * (g - g.max(axis=1, keepdims=True)))
    return market.budgets[:, None] * w / w.sum(axis=1, keepdims=True)


def equilibrium_residual(market: FisherMarket, b: np.ndarray) -> float:
    """max over buyers of (best bang-per-buck) - (achieved bang-per-buck).

    Bang-per-buck of good j for buyer i is u_ij / p_j; the achieved value is
    utility earned per dollar spent.  Zero exactly at market equilibrium.
    """
    b = market.check_feasible(b)
    p = np.maximum(market.prices(b), ENTROPY_FLOOR)
    bang = market.utilities / p[None, :]
    achieved = (b * bang).sum(axis=1) / market.budgets
    return float((bang.max(axis=1) - achieved).max())


@dataclass
class FisherRunLog:
    market: FisherMarket
    spending: np.ndarray  # (T+1, n, m)
    phi: np.ndarray  # (T+1,)
    residual: np.ndarray  # (T+1,)

    @property
    def num_iterations(self) -> int:
        return self.spending.shape[0] - 1

    def monotonicity_slack(self) -> float:
        return float(np.diff(self.phi).min())


def run_pr(market: FisherMarket, T: int, b0: np.ndarray | None = None) -> FisherRunLog:
    """Iterate proportional response from b0 (uniform by default), logging every step."""
    b = market.uniform_spending() if b0 is None else market.check_feasible(b0).copy()
    spend = np.empty((T + 1,) + b.shape)
    spend[0] = b
    for t in range(1, T + 1):
        b = pr_step(market, b)
        spend[t] = b
    phi = np.array([shmyrev_objective(market, spend[t]) for t in range(T + 1)])
    residual = np.array([equilibrium_residual(market, spend[t]) for t in range(T + 1)])
    return FisherRunLog(market, spend, phi, residual)


def pr_oracle(market: FisherMarket, iterations: int = 1_000_000,
              b0: np.ndarray | None = None) -> np.ndarray:
    """Long-run PR fixed point, used as the independent b* oracle."""
    b = market.uniform_spending() if b0 is None else market.check_feasible(b0).copy()
    u = market.utilities
    budgets = market.budgets[:, None]
    for _ in range(iterations):
        p = b.sum(axis=0)
        bang = u * (b / np.maximum(p, ENTROPY_FLOOR)[None, :])
        b = budgets * bang / bang.sum(axis=1, keepdims=True)
    return b


def pr_rate_certificate(market: FisherMarket, log: FisherRunLog,
                        b_star: np.ndarray, oracle_residual_tol: float = 1e-6):
    """Per-T slack of Phi(b*) - Phi(b(T+1)) <= (2 L / T) sum_i KL(b_i*, b_i(1)), L = 1.

    Also reports the empirical max of the LHS/RHS ratio (how loose the
    imported KL-relative-smoothness constant is on this run).
    """
    res_star = equilibrium_residual(market, b_star)
    if res_star > oracle_residual_tol:
        raise ValueError(f"b* oracle not converged: residual {res_star:.2e}")
    phi_star = shmyrev_objective(market, b_star)
    # 1-based convention: b(1) is the starting point, so Phi(b(T+1)) = phi[T]
    d_init = sum(kl_divergence(b_star[i], log.spending[0][i]) for i in range(market.num_buyers))
    T = np.arange(1, log.num_iterations + 1)
    lhs = phi_star - log.phi[1:]
    rhs = 2.0 * RATE_SMOOTHNESS * d_init / T
    slack = rhs - lhs
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(rhs > 0, lhs / rhs, 0.0)
    return {
        "slack": slack,
        "min_slack": float(slack.min()),
        "max_ratio": float(ratio.max()),
        "phi_star": phi_star,
        "kl_init": float(d_init),
    }


def random_market(n: int, m: int, rng: np.random.Generator,
                  low: float = 0.2, high: float = 2.0) -> FisherMarket:
    return FisherMarket(rng.uniform(low, high, size=(n, m)))
