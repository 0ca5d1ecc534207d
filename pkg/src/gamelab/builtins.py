"""Builtin benchmark instances: the experiment matrices plus Kuhn poker.

The zero-sum and strategically zero-sum matrices are cost matrices for the
row player as printed in the experimental appendix; ingestion negates them
into utility orientation.  ``szs_decompositions`` records the printed
affine relations B_j = -scale * A_j + 1 v_b^T used by the verifier tests.
"""

from __future__ import annotations

import numpy as np

from gamelab.continuous import BilinearGame, inefficiency_game, robustness_game
from gamelab.games import NormalFormGame, zero_sum_from_cost

ZERO_SUM_COSTS = {
    "zero_sum_1": np.array([
        [1.0, -1.0, -1.0],
        [-1.0, -1.0, 0.0],
        [-0.5, 0.0, -1.0],
    ]),
    "zero_sum_2": np.array([
        [1.0, -2.0, -1.0],
        [-1.0, 1.0, 0.0],
        [-0.5, 1.0, -1.0],
    ]),
    "zero_sum_3": np.array([
        [-1.0, 1.0, -1.0],
        [0.0, 0.5, -1.0],
        [0.3, -0.5, -0.5],
    ]),
}

# The strategically zero-sum companions are defined by their affine
# relations B_j = -scale * A_j + 1 v_b^T (cost orientation); szs_3 is the
# strictly competitive member (constant v_b).
SZS_DECOMPOSITIONS = {
    "szs_1": (0.5, np.array([-0.5, 0.0, 0.5])),
    "szs_2": (0.5, np.array([-0.2, 0.5, -0.2])),
    "szs_3": (0.2, np.array([0.5, 0.5, 0.5])),
}

SZS_COLUMN_COSTS = {
    name: -scale * ZERO_SUM_COSTS[f"zero_sum_{name[-1]}"] + np.outer(np.ones(3), v_b)
    for name, (scale, v_b) in SZS_DECOMPOSITIONS.items()
}


def builtin_nfg(name: str) -> NormalFormGame:
    if name in ZERO_SUM_COSTS:
        return zero_sum_from_cost(ZERO_SUM_COSTS[name])
    if name in SZS_COLUMN_COSTS:
        idx = name[-1]
        row_cost = ZERO_SUM_COSTS[f"zero_sum_{idx}"]
        col_cost = SZS_COLUMN_COSTS[name]
        return NormalFormGame([row_cost, col_cost], orientation="minimize", rescale="joint")
    raise KeyError(f"unknown builtin normal-form game: {name!r}")


def builtin_continuous(name: str) -> BilinearGame:
    if name == "inefficiency":
        return inefficiency_game()
    if name == "robustness":
        return robustness_game(0.05)
    raise KeyError(f"unknown builtin continuous game: {name!r}")


def builtin_bspp(name: str):
    if name == "kuhn":
        from gamelab.bspp import build_kuhn

        return build_kuhn()
    raise KeyError(f"unknown builtin saddle-point problem: {name!r}")


NFG_NAMES = tuple(ZERO_SUM_COSTS) + tuple(SZS_COLUMN_COSTS)
CONTINUOUS_NAMES = ("inefficiency", "robustness")
BSPP_NAMES = ("kuhn",)
