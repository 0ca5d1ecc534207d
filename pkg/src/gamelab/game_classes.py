"""Constructors and verifiers for the game classes with nonnegative regret sums.

Covers polymatrix games (zero-sum edges or constant total), strategically
zero-sum bimatrix games in the Moulin-Vial sense, and the maximum pairwise
difference distance used to define near-potential games.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from gamelab.games import (
    DEFAULT_ENUMERATION_CAP,
    EnumerationCapExceeded,
    NormalFormGame,
)

SZS_DEFAULT_TOL = 1e-8


@dataclass
class PolymatrixGame:
    """Graph game: player i's utility is the sum of bimatrix payoffs over incident edges.

    ``edges[(i, j)]`` with i < j holds ``(A_ij, A_ji)``: ``A_ij`` is i's
    payoff matrix indexed (a_i, a_j) and ``A_ji`` is j's, indexed (a_j, a_i).
    """

    action_counts: tuple[int, ...]
    edges: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]]

    def __post_init__(self):
        self.action_counts = tuple(int(d) for d in self.action_counts)
        clean = {}
        n = len(self.action_counts)
        for (i, j), (a_ij, a_ji) in self.edges.items():
            if not (0 <= i < j < n):
                raise ValueError(f"edge ({i}, {j}) must satisfy 0 <= i < j < n")
            a_ij = np.asarray(a_ij, dtype=float)
            a_ji = np.asarray(a_ji, dtype=float)
            want_ij = (self.action_counts[i], self.action_counts[j])
            if a_ij.shape != want_ij or a_ji.shape != want_ij[::-1]:
                raise ValueError(f"edge ({i}, {j}): matrix shapes {a_ij.shape}/{a_ji.shape} do not match action counts")
            clean[(i, j)] = (a_ij, a_ji)
        self.edges = clean

    @property
    def num_players(self) -> int:
        return len(self.action_counts)

    def neighbors(self, i: int):
        for (a, b) in self.edges:
            if a == i:
                yield b
            elif b == i:
                yield a

    def utility_matrix(self, i: int, j: int) -> np.ndarray:
        """Payoff matrix of i against j, indexed (a_i, a_j)."""
        if i < j:
            return self.edges[(i, j)][0]
        return self.edges[(j, i)][1]

    def has_zero_sum_edges(self, tol: float = 1e-12) -> bool:
        return all(
            np.abs(a_ij + a_ji.T).max() <= tol for a_ij, a_ji in self.edges.values()
        )

    def to_json_dict(self) -> dict:
        return {
            "nodes": self.num_players,
            "action_counts": list(self.action_counts),
            "edges": [
                {"i": i, "j": j, "A_ij": a.tolist(), "A_ji": b.tolist()}
                for (i, j), (a, b) in sorted(self.edges.items())
            ],
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "PolymatrixGame":
        edges = {
            (e["i"], e["j"]): (np.asarray(e["A_ij"], float), np.asarray(e["A_ji"], float))
            for e in data["edges"]
        }
        return cls(tuple(data["action_counts"]), edges)


def polymatrix_to_nfg(pg: PolymatrixGame, cap: int = DEFAULT_ENUMERATION_CAP) -> NormalFormGame:
    """Materialize the dense utility tensors (joint rescale keeps edge structure meaningful)."""
    n = pg.num_players
    size = int(np.prod(pg.action_counts))
    if size > cap:
        raise EnumerationCapExceeded(f"{size} pure profiles exceed the cap of {cap}")
    tensors = [np.zeros(pg.action_counts) for _ in range(n)]
    for (i, j), (a_ij, a_ji) in pg.edges.items():
        shape_ij = [1] * n
        shape_ij[i] = pg.action_counts[i]
        shape_ij[j] = pg.action_counts[j]
        tensors[i] = tensors[i] + a_ij.reshape(shape_ij)
        tensors[j] = tensors[j] + a_ji.T.reshape(shape_ij)
    return NormalFormGame(tensors, rescale="joint")


def verify_constant_sum(game: NormalFormGame, tol: float = 1e-9, cap: int = DEFAULT_ENUMERATION_CAP):
    """Check sum_i u_i(a) = c over every pure profile.

    Returns {constant_sum, c} on success, otherwise the worst violating
    profile as a witness.  Values refer to the stored (possibly rescaled)
    utilities.
    """
    if game.num_pure_profiles() > cap:
        raise EnumerationCapExceeded("too many pure profiles")
    w = game.welfare_tensor()
    c = float(w.mean())
    dev = np.abs(w - c)
    if dev.max() <= tol:
        return {"constant_sum": True, "c": c}
    idx = np.unravel_index(np.argmax(dev), w.shape)
    return {"constant_sum": False, "c": None, "witness": tuple(int(v) for v in idx),
            "witness_sum": float(w[idx]), "mean_sum": c}


# -- strategically zero-sum ---------------------------------------------------


@dataclass
class SzsDecomposition:
    """Moulin-Vial style decomposition A = C + v_a 1^T, B = -scale * C + 1 v_b^T.

    The gauge puts the unit scale on the A side (C absorbs A up to row
    offsets, with the separable grand mean assigned to v_b), so ``scale``
    is the ratio of the two players' Moulin scales.  ``scale == 1`` is the
    equal-scale subclass for which the plain regret sum is nonnegative;
    other ratios need the (1, 1/scale)-weighted sum.
    """

    scale: float
    core: np.ndarray
    v_a: np.ndarray
    v_b: np.ndarray
    residual: float
    ok: bool
    singular: bool = False

    @property
    def equal_scale(self) -> bool:
        return abs(self.scale - 1.0) <= 1e-9

    def regret_weights(self) -> tuple[float, float]:
        return 1.0, 1.0 / self.scale


def make_strategically_zero_sum(scale: float, core: np.ndarray, v_a: np.ndarray, v_b: np.ndarray):
    """(A, B) with A = scale*C + v_a 1^T and B = -scale*C + 1 v_b^T (equal Moulin scales)."""
    if scale <= 0:
        raise ValueError("scale must be positive")
    core = np.asarray(core, dtype=float)
    v_a = np.asarray(v_a, dtype=float)
    v_b = np.asarray(v_b, dtype=float)
    a = scale * core + v_a[:, None]
    b = -scale * core + v_b[None, :]
    return a, b


def verify_strategically_zero_sum(a: np.ndarray, b: np.ndarray, tol: float = SZS_DEFAULT_TOL) -> SzsDecomposition:
    """Fit B ~ -scale * A + (separable offsets) by least squares.

    The separable part v_a 1^T + 1 v_b^T never affects best responses, so
    the fit double-centers both matrices and regresses one on the other;
    a zero centered core means every strategy pair is payoff-equivalent
    (trivial game) and the fit is flagged singular.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError("payoff matrices must share a shape")

    def center(m):
        return m - m.mean(axis=1, keepdims=True) - m.mean(axis=0, keepdims=True) + m.mean()

    a_c, b_c = center(a), center(b)
    denom = float((a_c * a_c).sum())
    if denom < 1e-14:
        return SzsDecomposition(np.nan, a.copy(), np.zeros(a.shape[0]), np.zeros(a.shape[1]),
                                np.inf, ok=False, singular=True)
    scale = -float((a_c * b_c).sum()) / denom
    sep = b + scale * a  # exactly separable iff the game is SZS
    grand = float(sep.mean())
    row = sep.mean(axis=1) - grand
    col = sep.mean(axis=0)
    residual = float(np.abs(sep - row[:, None] - col[None, :]).max())
    if scale <= 0:
        return SzsDecomposition(scale, a.copy(), np.zeros(a.shape[0]), col, residual, ok=False)
    v_a = row / scale
    core = a - v_a[:, None]
    return SzsDecomposition(scale, core, v_a, col, residual, ok=residual <= tol)


# -- distance between games -----------------------------------------------------


def mpd_distance(game: NormalFormGame, other: NormalFormGame, cap: int = DEFAULT_ENUMERATION_CAP) -> float:
    """Maximum pairwise difference: worst discrepancy in unilateral-deviation payoffs.

    sup over players i, profiles a, and deviations a_i' of
    |(u_i(a) - u_i(a_i', a_-i)) - (u'_i(a) - u'_i(a_i', a_-i))|.
    Invariant to per-player constants added to either game.
    """
    if game.action_counts != other.action_counts or game.num_players != other.num_players:
        raise ValueError("games must share players and action sets")
    if game.num_pure_profiles() > cap:
        raise EnumerationCapExceeded("too many pure profiles")
    worst = 0.0
    for i in range(game.num_players):
        diff = np.moveaxis(game.utilities[i] - other.utilities[i], i, -1)
        spread = diff.max(axis=-1) - diff.min(axis=-1)
        worst = max(worst, float(spread.max()))
    return worst


# -- random instance generators (for verification corpora) ----------------------


def random_zero_sum_polymatrix(n_players: int, d: int, rng: np.random.Generator,
                               magnitude: float = 0.4) -> PolymatrixGame:
    """Complete graph, every edge an independent zero-sum bimatrix game."""
    edges = {}
    for i in range(n_players):
        for j in range(i + 1, n_players):
            a = rng.uniform(-magnitude, magnitude, size=(d, d))
            edges[(i, j)] = (a, -a.T)
    return PolymatrixGame((d,) * n_players, edges)


def random_szs_game(d: int, rng: np.random.Generator) -> NormalFormGame:
    """Random equal-scale strategically zero-sum bimatrix game, entries in [-1, 1]."""
    core = rng.uniform(-0.5, 0.5, size=(d, d))
    core -= core.mean(axis=1, keepdims=True)  # rows sum to zero: fixes the offset gauge
    v_a = rng.uniform(-0.25, 0.25, size=d)
    v_b = rng.uniform(-0.25, 0.25, size=d)
    scale = rng.uniform(0.3, 1.0)
    a, b = make_strategically_zero_sum(scale, core, v_a, v_b)
    return NormalFormGame([a, b], rescale="error")


def random_szs_polymatrix(n_players: int, d: int, rng: np.random.Generator) -> PolymatrixGame:
    """Complete graph with an equal-scale strategically zero-sum game on every edge."""
    edges = {}
    for i in range(n_players):
        for j in range(i + 1, n_players):
            core = rng.uniform(-0.3, 0.3, size=(d, d))
            v_a = rng.uniform(-0.1, 0.1, size=d)
            v_b = rng.uniform(-0.1, 0.1, size=d)
            scale = rng.uniform(0.3, 1.0)
            a_ij, b_ij = make_strategically_zero_sum(scale, core, v_a, v_b)
            edges[(i, j)] = (a_ij, b_ij.T)
    return PolymatrixGame((d,) * n_players, edges)
