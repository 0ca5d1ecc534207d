"""Learning dynamics in games, with runtime certificates for the bounds they obey.

The package is organised around desk-scale experiments:

- ``games``: normal-form games, expected utilities, Nash gaps, welfare,
  smoothness verification.
- ``regularizers``: distance-generating functions (Euclidean, negative
  entropy) with Bregman divergences and exact prox steps on the simplex.
- ``learners``: optimistic mirror descent / FTRL / multiplicative weights
  and plain mirror descent, with pluggable prediction mechanisms and a
  heterogeneous multi-player runner.
- ``metrics``: regret, second-order path lengths, RVU audits, saddle-point
  gaps, welfare bounds.
- ``game_classes``: polymatrix and strategically-zero-sum constructors and
  verifiers, distance between games.
- ``potential``: weighted and near-potential games, potential-increase and
  rate certificates for mirror-descent play.
- ``fisher``: linear Fisher markets, proportional response dynamics, and
  their convex-program potential.
- ``continuous``: unconstrained bilinear games, optimistic gradient descent,
  spectral stability predictions, historical gradient methods.
- ``bspp``: bilinear saddle-point problems over simplexes and treeplexes
  (Kuhn poker), with best-response oracles and Euclidean projections.
- ``cli``: batch experiment driver emitting deterministic CSV/JSON artifacts.
"""

from gamelab.games import MixedProfile, NormalFormGame, SmoothnessParams
from gamelab.regularizers import Regularizer, project_simplex

__all__ = [
    "MixedProfile",
    "NormalFormGame",
    "Regularizer",
    "SmoothnessParams",
    "project_simplex",
]

__version__ = "0.1.0"
