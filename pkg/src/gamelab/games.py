"""Normal-form games with dense utility tensors.

Utilities are stored in maximization orientation and normalized to
[-1, 1].  Cost-matrix inputs are negated at ingestion and the orientation
recorded; out-of-range utilities are rescaled (per player by default, or
jointly when a game-class property such as constant-sum must survive
ingestion) and the scale factors kept on the instance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

PROFILE_TOL = 1e-12
DEFAULT_ENUMERATION_CAP = 10**7

MAXIMIZE = "maximize"
MINIMIZE = "minimize"


class EnumerationCapExceeded(RuntimeError):
    """Raised when an exhaustive check would visit too many pure profiles."""


@dataclass
class MixedProfile:
    """Per-player probability vectors over the action sets."""

    strategies: list[np.ndarray]

    def __post_init__(self):
        self.strategies = [np.asarray(x, dtype=float) for x in self.strategies]
        for i, x in enumerate(self.strategies):
            if np.any(x < -PROFILE_TOL):
                raise ValueError(f"player {i}: negative probability in profile")
            if abs(x.sum() - 1.0) > PROFILE_TOL:
                raise ValueError(f"player {i}: probabilities sum to {x.sum()!r}, not 1")

    def __iter__(self):
        return iter(self.strategies)

    def __getitem__(self, i):
        return self.strategies[i]

    def __len__(self):
        return len(self.strategies)


def uniform_profile(action_counts) -> MixedProfile:
    return MixedProfile([np.full(d, 1.0 / d) for d in action_counts])


def random_profile(action_counts, rng: np.random.Generator) -> MixedProfile:
    return MixedProfile([rng.dirichlet(np.ones(d)) for d in action_counts])


@dataclass(frozen=True)
class SmoothnessParams:
    """(lambda, mu) pair of the smooth-game inequality; both positive."""

    lam: float
    mu: float

    def __post_init__(self):
        if self.lam <= 0 or self.mu <= 0:
            raise ValueError("smoothness parameters must be positive")

    @property
    def robust_poa(self) -> float:
        return self.lam / (1.0 + self.mu)


class NormalFormGame:
    """An n-player game as one dense tensor of utilities per player.

    Parameters
    ----------
    utilities : sequence of arrays
        ``utilities[i]`` has shape ``action_counts`` and holds player i's
        payoff for every pure profile.
    orientation : "maximize" or "minimize"
        Minimize-oriented (cost) inputs are negated on ingestion.
    rescale : "per_player", "joint", or "error"
        What to do when some ``|u_i| > 1``.  Joint rescaling divides every
        player by the same factor, which preserves constant-sum and
        equal-scale structure; per-player does not.
    """

    def __init__(self, utilities, orientation: str = MAXIMIZE, rescale: str = "per_player"):
        if orientation not in (MAXIMIZE, MINIMIZE):
            raise ValueError(f"unknown orientation: {orientation!r}")
        tensors = [np.asarray(u, dtype=float) for u in utilities]
        if not tensors:
            raise ValueError("a game needs at least one player")
        shape = tensors[0].shape
        for i, u in enumerate(tensors):
            if u.shape != shape:
                raise ValueError(f"player {i}: tensor shape {u.shape} != action counts {shape}")
            if not np.all(np.isfinite(u)):
                raise ValueError(f"player {i}: non-finite utilities")
        if len(shape) != len(tensors):
            raise ValueError(f"{len(tensors)} players but tensors have {len(shape)} axes")
        if orientation == MINIMIZE:
            tensors = [-u for u in tensors]

        scales = np.ones(len(tensors))
        maxima = np.array([np.abs(u).max() if u.size else 0.0 for u in tensors])
        if np.any(maxima > 1.0 + 1e-15):
            if rescale == "error":
                raise ValueError("utilities outside [-1, 1]")
            if rescale == "joint":
                s = maxima.max()
                scales[:] = s
                tensors = [u / s for u in tensors]
            elif rescale == "per_player":
                for i, m in enumerate(maxima):
                    if m > 1.0:
                        scales[i] = m
                        tensors[i] = tensors[i] / m
            else:
                raise ValueError(f"unknown rescale mode: {rescale!r}")

        self.utilities = tensors
        self.num_players = len(tensors)
        self.action_counts = tuple(shape)
        self.orientation = orientation
        self.scales = scales  # original magnitude / stored magnitude, per player

    # -- basic evaluation --------------------------------------------------

    def _check_profile(self, x) -> MixedProfile:
        if not isinstance(x, MixedProfile):
            x = MixedProfile(list(x))
        if len(x) != self.num_players:
            raise ValueError("profile has wrong number of players")
        for i, xi in enumerate(x):
            if xi.shape != (self.action_counts[i],):
                raise ValueError(f"player {i}: strategy has dimension {xi.shape}, expected {self.action_counts[i]}")
        return x

    def expected_utility(self, i: int, x) -> float:
        """Multilinear expectation of player i's utility under profile x."""
        x = self._check_profile(x)
        t = self.utilities[i]
        for xj in x:
            t = np.tensordot(xj, t, axes=(0, 0))
        return float(t)

    def utility_vector(self, i: int, x) -> np.ndarray:
        """Vector over A_i with entries u_i(a_i, x_{-i}); <x_i, result> is the expected utility."""
        x = self._check_profile(x)
        t = np.moveaxis(self.utilities[i], i, 0)
        for j in range(self.num_players):
            if j == i:
                continue
            # after moveaxis, opponent axes keep their relative order at positions 1..n-1
            t = np.tensordot(t, x[j], axes=(1, 0))
        return t

    def nash_gap(self, x) -> float:
        """Largest unilateral improvement at x; zero exactly at a Nash equilibrium.

        Best deviations are pure by linearity, so the max runs over actions.
        """
        x = self._check_profile(x)
        gap = 0.0
        for i in range(self.num_players):
            ui = self.utility_vector(i, x)
            gap = max(gap, float(ui.max() - x[i] @ ui))
        return gap

    def social_welfare(self, x) -> float:
        x = self._check_profile(x)
        return sum(self.expected_utility(i, x) for i in range(self.num_players))

    def welfare_tensor(self) -> np.ndarray:
        return sum(self.utilities)

    def num_pure_profiles(self) -> int:
        return int(np.prod(self.action_counts))

    def optimal_welfare(self, cap: int = DEFAULT_ENUMERATION_CAP) -> float:
        """Maximum welfare over pure profiles, by exhaustive enumeration."""
        if self.num_pure_profiles() > cap:
            raise EnumerationCapExceeded(
                f"{self.num_pure_profiles()} pure profiles exceed the cap of {cap}"
            )
        return float(self.welfare_tensor().max())

    # -- smoothness ---------------------------------------------------------

    def verify_smoothness(self, params: SmoothnessParams, cap: int = DEFAULT_ENUMERATION_CAP):
        """Check sum_i u_i(a*_i, a_{-i}) >= lam*sw(a*) - mu*sw(a) on all pure pairs.

        Returns a dict with ``holds``, the worst ``slack`` (min over pairs of
        LHS - RHS), and the worst violating pair of profiles when it fails.
        """
        n_prof = self.num_pure_profiles()
        if n_prof * n_prof > cap:
            raise EnumerationCapExceeded(
                f"{n_prof}^2 profile pairs exceed the cap of {cap}"
            )
        n = self.num_players
        sw = self.welfare_tensor()
        # lhs[a, a*] = sum_i u_i(a*_i, a_{-i}): broadcast each player's tensor
        # with its own axis replaced by the deviation axis.
        lhs = np.zeros(self.action_counts + self.action_counts)
        for i in range(n):
            ui = self.utilities[i]
            # place u_i(a*_i, a_{-i}): axis i comes from the a* block
            src = np.moveaxis(ui, i, -1)  # (a_{-i}..., a_i*)
            expand = list(self.action_counts[:i]) + [1] + list(self.action_counts[i + 1:])
            dev_shape = [1] * n
            dev_shape[i] = self.action_counts[i]
            lhs = lhs + src.reshape(tuple(expand) + tuple(dev_shape))
        rhs = params.lam * sw.reshape((1,) * n + self.action_counts) - params.mu * sw.reshape(
            self.action_counts + (1,) * n
        )
        slack = lhs - rhs
        worst = float(slack.min())
        result = {"holds": worst >= -1e-12, "slack": worst, "witness": None}
        if not result["holds"]:
            idx = np.unravel_index(np.argmin(slack), slack.shape)
            result["witness"] = (tuple(idx[:n]), tuple(idx[n:]))
        return result

    # -- (de)serialization ---------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "players": self.num_players,
            "action_counts": list(self.action_counts),
            "utilities": [u.tolist() for u in self.utilities],
            "orientation": MAXIMIZE,
        }

    @classmethod
    def from_json_dict(cls, data: dict, rescale: str = "per_player") -> "NormalFormGame":
        utils = data["utilities"]
        if isinstance(utils, dict):
            raise ValueError("polymatrix games load through gamelab.game_classes.PolymatrixGame")
        game = cls(utils, orientation=data.get("orientation", MAXIMIZE), rescale=rescale)
        counts = data.get("action_counts")
        if counts is not None and tuple(counts) != game.action_counts:
            raise ValueError("action_counts field disagrees with utility tensor shape")
        players = data.get("players")
        if players is not None and players != game.num_players:
            raise ValueError("players field disagrees with number of utility tensors")
        return game


def bimatrix(a, b, orientation: str = MAXIMIZE, rescale: str = "per_player") -> NormalFormGame:
    """Two-player game from payoff (or cost) matrices for the row and column player."""
    return NormalFormGame([np.asarray(a, float), np.asarray(b, float)], orientation, rescale)


def zero_sum_from_cost(a) -> NormalFormGame:
    """Two-player zero-sum game from the row player's cost matrix.

    The row player pays A[i, j] to the column player, so stored utilities
    are (-A, +A).
    """
    a = np.asarray(a, dtype=float)
    return NormalFormGame([-a, a], orientation=MAXIMIZE, rescale="joint")


def matching_pennies() -> NormalFormGame:
    a = np.array([[1.0, -1.0], [-1.0, 1.0]])
    return NormalFormGame([a, -a])
