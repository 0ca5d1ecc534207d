"""Stability, inefficiency, and fragility of optimistic gradient descent.

Three episodes on bilinear games:
1. a game with negative real interaction spectrum converges at exactly the
   rate the characteristic roots predict, but parks at a zero-welfare
   equilibrium while a 2R^2-welfare equilibrium exists;
2. an eps-perturbation of a zero-sum game flips the verdict to divergence;
3. any regular first-order method gets a synthesized game that defeats it.
"""

import numpy as np

from gamelab.continuous import (
    HgdMethod,
    adversarial_game_for,
    inefficiency_demo,
    inefficiency_game,
    measure_linear_rate,
    ogd_method,
    robustness_game,
    simulate_hgd,
    simulate_ogd,
    spectral_predict,
)

print("== inefficiency ==")
game = inefficiency_game()
verdict = spectral_predict(game, eta=0.2)
print(f"A^T B eigenvalues: {np.sort(verdict.eigenvalues.real)}  -> {verdict.verdict}")
log = simulate_ogd(game, 0.2, 3000, x0=np.array([1.0, 0.4]), y0=np.array([-0.6, 0.8]))
rate, _ = measure_linear_rate(log)
print(f"predicted rate {verdict.rate:.5f}, measured {rate:.5f}")
out = inefficiency_demo(radius=10.0)
print(f"limit at origin: {out['limits_at_origin']}; welfare 0 vs alternative "
      f"equilibrium welfare {out['welfare_alternative']:.0f}")

print("\n== robustness ==")
pert = robustness_game(0.05)
print(f"||A + B||_F = {np.linalg.norm(pert.A + pert.B):.3f}")
print(f"(A, -A) at eta=0.5: {spectral_predict(type(pert)(pert.A, -pert.A), 0.5).verdict}")
v = spectral_predict(pert, 0.5)
print(f"(A, B):  {v.verdict} (witness eigenvalue {v.witness.real:.2e} = eps^2/4)")
log = simulate_ogd(pert, 0.5, 1000, x0=np.full(2, 5.0), y0=np.full(2, 5.0))
print(f"norm after 1000 steps: {log.norms.max():.2e}")

print("\n== impossibility for regular methods ==")
for method in (ogd_method(0.1), HgdMethod((1.5, -0.5), (0.1,), "momentum")):
    game, lam = adversarial_game_for(method, eps=1.0)
    log = simulate_hgd(game, method, 2000, x0=np.array([0.3, -0.2]), y0=np.array([0.1, 0.4]))
    print(f"{method.name}: adversarial eigenvalue {lam:.2f}, diverged: {log.diverged}")
