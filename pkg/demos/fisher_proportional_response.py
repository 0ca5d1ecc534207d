"""Proportional response as mirror descent on the spending objective.

A random linear Fisher market runs PR for ten thousand rounds.  The
spending objective never decreases, the market clears at every iterate by
construction, and the optimality gap closes at the O(1/T) rate certified
against a long-run oracle.
"""

import numpy as np

from gamelab.fisher import (
    entropy_md_step,
    pr_oracle,
    pr_rate_certificate,
    pr_step,
    random_market,
    run_pr,
)

rng = np.random.default_rng(3)
market = random_market(3, 4, rng)
print("buyer x good utilities:")
print(market.utilities.round(3))

log = run_pr(market, 10_000)
print(f"\nphi: {log.phi[0]:+.5f} -> {log.phi[-1]:+.5f}   "
      f"(worst per-step change {log.monotonicity_slack():.1e})")
print(f"equilibrium residual: {log.residual[0]:.3f} -> {log.residual[-1]:.2e}")

b = log.spending[100]
print(f"\nPR == entropy mirror descent with log transform: "
      f"max deviation {np.abs(pr_step(market, b) - entropy_md_step(market, b)).max():.1e}")

b_star = pr_oracle(market, 300_000)
cert = pr_rate_certificate(market, log, b_star)
print(f"\nO(1/T) envelope phi* - phi(T+1) <= 2 KL(b*, b(1)) / T:")
print(f"  min slack over all T: {cert['min_slack']:.2e}")
print(f"  empirical max LHS/RHS ratio: {cert['max_ratio']:.3f}  (1.0 would saturate L = 1)")
print(f"\nfinal spending:\n{log.spending[-1].round(4)}")
