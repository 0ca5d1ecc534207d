"""Distance-generating functions on the probability simplex.

Two regularizers are supported: the squared Euclidean norm and negative
entropy.  Both are 1-strongly convex on the simplex (Euclidean w.r.t. the
l2 norm, entropy w.r.t. the l1 norm by Pinsker), which is all the learning
dynamics in this package rely on.  Entropy is not smooth: its gradient
blows up at the boundary, so rate certificates that need a Lipschitz
gradient are only issued for the Euclidean case.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Floor applied to entropy iterates before taking logs. Keeps the prox
# closed forms finite; anything this small is numerically zero anyway.
ENTROPY_FLOOR = 1e-300

EUCLIDEAN = "euclidean"
NEGATIVE_ENTROPY = "negative_entropy"


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection of ``v`` onto the probability simplex.

    Sort-and-threshold scheme: with u the coordinates of ``v`` sorted in
    decreasing order and c_k = (u_1 + ... + u_k - 1)/k, the optimal
    threshold is tau = max_k c_k and the projection is max(v - tau, 0).
    The cumulative rule resolves ties deterministically.
    """
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError("cannot project a vector with non-finite entries")
    u = np.sort(v)[::-1]
    c = (np.cumsum(u) - 1.0) / np.arange(1, v.size + 1)
    tau = c.max()
    return np.maximum(v - tau, 0.0)


def project_simplex_rows(V: np.ndarray, total: float = 1.0) -> np.ndarray:
    """Row-wise simplex projection; rows sum to ``total`` afterwards."""
    V = np.asarray(V, dtype=float)
    U = -np.sort(-V, axis=1)
    c = (np.cumsum(U, axis=1) - total) / np.arange(1, V.shape[1] + 1)
    tau = c.max(axis=1)
    return np.maximum(V - tau[:, None], 0.0)


def project_l1_ball(v: np.ndarray, radius: float) -> np.ndarray:
    """Euclidean projection onto the l1 ball of the given radius.

    Standard reduction: if ``v`` is inside, return it; otherwise project
    |v| onto the scaled simplex and restore the signs.
    """
    v = np.asarray(v, dtype=float)
    if np.abs(v).sum() <= radius:
        return v.copy()
    w = project_simplex_rows(np.abs(v)[None, :], total=radius)[0]
    return np.sign(v) * w


@dataclass(frozen=True)
class Regularizer:
    """A 1-strongly convex DGF together with its simplex constants.

    ``grad_smoothness`` is the Lipschitz constant of the gradient (1 for
    Euclidean, infinite for entropy, which is flagged non-smooth).
    """

    kind: str

    def __post_init__(self):
        if self.kind not in (EUCLIDEAN, NEGATIVE_ENTROPY):
            raise ValueError(f"unknown regularizer kind: {self.kind!r}")

    # -- scalar constants ------------------------------------------------

    @property
    def strong_convexity_norm(self) -> str:
        return "l2" if self.kind == EUCLIDEAN else "l1"

    @property
    def grad_smoothness(self) -> float:
        return 1.0 if self.kind == EUCLIDEAN else np.inf

    def anchored_diameter(self, d: int) -> float:
        """sup_x D(x, argmin R) over the d-simplex (the RVU alpha constant).

        Coincides with sup R - inf R for both DGFs on the simplex.
        """
        if self.kind == EUCLIDEAN:
            return 0.5 * (1.0 - 1.0 / d)
        return float(np.log(d))

    def bregman_diameter(self, d: int) -> float:
        """sup_{x,y} D(x, y) over the d-simplex.

        For entropy the pairwise supremum is infinite; the anchored value
        log(d) is returned instead and callers that need the pairwise
        diameter must check ``grad_smoothness`` first.
        """
        if self.kind == EUCLIDEAN:
            return 1.0
        return float(np.log(d))

    @staticmethod
    def l2_diameter(d: int) -> float:
        """sup_{x,y} ||x - y||_2 over the d-simplex."""
        return float(np.sqrt(2.0)) if d > 1 else 0.0

    # -- pointwise quantities --------------------------------------------

    def value(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        if self.kind == EUCLIDEAN:
            return 0.5 * float(x @ x)
        xs = np.maximum(x, ENTROPY_FLOOR)
        return float(np.sum(x * (np.log(xs) - 1.0)))

    def grad(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == EUCLIDEAN:
            return x.copy()
        return np.log(np.maximum(x, ENTROPY_FLOOR))

    def bregman(self, x: np.ndarray, y: np.ndarray) -> float:
        """D(x, y) = R(x) - R(y) - <grad R(y), x - y>.

        Euclidean: half squared l2 distance.  Entropy: generalized KL,
        sum x log(x/y) - sum x + sum y, with the 0 log 0 = 0 convention.
        Entropy requires y strictly positive wherever x is.
        """
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.shape != y.shape:
            raise ValueError("bregman: shape mismatch")
        if self.kind == EUCLIDEAN:
            diff = x - y
            return 0.5 * float(diff @ diff)
        if np.any((y <= 0) & (x > 0)):
            raise ValueError("entropy bregman undefined: zero coordinate in y under the support of x")
        pos = x > 0
        val = float(np.sum(x[pos] * np.log(x[pos] / y[pos]))) - float(x.sum()) + float(y.sum())
        return val

    # -- prox machinery ---------------------------------------------------

    def argmin_point(self, d: int) -> np.ndarray:
        """argmin of R over the simplex: uniform for both DGFs."""
        return np.full(d, 1.0 / d)

    def prox_step(self, anchor: np.ndarray, g: np.ndarray, eta: float) -> np.ndarray:
        """argmax_{x in simplex} <x, g> - (1/eta) D(x, anchor).

        Euclidean: simplex projection of anchor + eta*g.  Entropy: the
        multiplicative closed form x_i proportional to anchor_i exp(eta g_i),
        computed with max-subtraction.
        """
        if eta <= 0:
            raise ValueError("prox_step requires eta > 0")
        g = np.asarray(g, dtype=float)
        if not np.all(np.isfinite(g)):
            raise ValueError("prox_step received non-finite utility direction")
        anchor = np.asarray(anchor, dtype=float)
        if self.kind == EUCLIDEAN:
            return project_simplex(anchor + eta * g)
        z = eta * g
        w = np.maximum(anchor, ENTROPY_FLOOR) * np.exp(z - z.max())
        return w / w.sum()

    def ftrl_step(self, score: np.ndarray, eta: float) -> np.ndarray:
        """argmax_{x in simplex} <x, score> - (1/eta) R(x).

        Euclidean: projection of eta*score.  Entropy: softmax of eta*score.
        """
        if eta <= 0:
            raise ValueError("ftrl_step requires eta > 0")
        score = np.asarray(score, dtype=float)
        if self.kind == EUCLIDEAN:
            return project_simplex(eta * score)
        z = eta * score
        w = np.exp(z - z.max())
        return w / w.sum()


def kl_divergence(x: np.ndarray, y: np.ndarray) -> float:
    """Generalized KL divergence with clamping of zero entries in y."""
    x = np.asarray(x, dtype=float)
    y = np.maximum(np.asarray(y, dtype=float), ENTROPY_FLOOR)
    pos = x > 0
    return float(np.sum(x[pos] * np.log(x[pos] / y[pos]))) - float(x.sum()) + float(y.sum())
