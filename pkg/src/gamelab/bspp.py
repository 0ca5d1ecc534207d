"""Bilinear saddle-point problems min_x max_y x^T A y over prox-friendly domains.

Domains expose Euclidean projection and an exact linear best-response
oracle; simplexes, boxes, and sequence-form treeplexes are provided.  The
treeplex projection runs Dykstra's alternating projections between the
flow-conservation affine subspace (the per-infoset equalities plus the
unit root) and the nonnegative orthant.  Kuhn poker is built once in
sequence form as the benchmark instance.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from gamelab.regularizers import project_simplex

DYKSTRA_TOL = 1e-10
DYKSTRA_CAP = 100_000


# -- domains --------------------------------------------------------------------


class SimplexDomain:
    def __init__(self, d: int):
        self.dim = d

    def project(self, v: np.ndarray) -> np.ndarray:
        return project_simplex(v)

    def best_response(self, g: np.ndarray):
        idx = int(np.argmax(g))
        vertex = np.zeros(self.dim)
        vertex[idx] = 1.0
        return vertex, float(g[idx])

    def contains(self, x: np.ndarray, tol: float = 1e-8) -> bool:
        return bool(x.min() >= -tol and abs(x.sum() - 1.0) <= tol)

    def center(self) -> np.ndarray:
        return np.full(self.dim, 1.0 / self.dim)

    def bregman_diameter(self) -> float:
        """sup over pairs of half squared Euclidean distance."""
        return 1.0

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return rng.dirichlet(np.ones(self.dim))


class BoxDomain:
    def __init__(self, lo, hi):
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        self.dim = self.lo.size

    def project(self, v: np.ndarray) -> np.ndarray:
        return np.clip(v, self.lo, self.hi)

    def best_response(self, g: np.ndarray):
        vertex = np.where(g >= 0, self.hi, self.lo)
        return vertex, float(vertex @ g)

    def contains(self, x, tol=1e-8) -> bool:
        return bool(np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol))

    def center(self) -> np.ndarray:
        return (self.lo + self.hi) / 2.0

    def bregman_diameter(self) -> float:
        return 0.5 * float(((self.hi - self.lo) ** 2).sum())

    def sample(self, rng):
        return rng.uniform(self.lo, self.hi)


# -- treeplex --------------------------------------------------------------------


@dataclass(frozen=True)
class Infoset:
    key: str
    parent_seq: int
    seqs: tuple[int, ...]  # the sequences that extend parent_seq here


class Treeplex:
    """Sequence-form strategy polytope of a perfect-recall decision process.

    Sequence 0 is the empty sequence, fixed to value 1.  Every infoset
    splits its parent sequence's value among its child sequences (flow
    conservation); all values are nonnegative.  Infosets must be listed
    parents-before-children.
    """

    def __init__(self, num_seqs: int, infosets: list[Infoset]):
        self.num_seqs = num_seqs
        self.infosets = list(infosets)
        seen = {0}
        for iset in self.infosets:
            if iset.parent_seq not in seen:
                raise ValueError(f"infoset {iset.key}: parent sequence listed after its children")
            seen.update(iset.seqs)
        if seen != set(range(num_seqs)):
            raise ValueError("sequence indices must cover 0..num_seqs-1 exactly")
        self._children: dict[int, list[int]] = {}
        for idx, iset in enumerate(self.infosets):
            self._children.setdefault(iset.parent_seq, []).append(idx)
        self._E, self._e = self._constraints()
        EET = self._E @ self._E.T
        self._affine_gain = self._E.T @ np.linalg.inv(EET)
        self._product_of_simplexes = all(iset.parent_seq == 0 for iset in self.infosets)

    @property
    def dim(self) -> int:
        return self.num_seqs

    def _constraints(self):
        rows = [np.zeros(self.num_seqs)]
        rows[0][0] = 1.0
        rhs = [1.0]
        for iset in self.infosets:
            r = np.zeros(self.num_seqs)
            r[list(iset.seqs)] = 1.0
            r[iset.parent_seq] -= 1.0  # root row never collides: seqs exclude 0
            rows.append(r)
            rhs.append(0.0)
        return np.array(rows), np.array(rhs)

    # -- feasibility / sampling ---------------------------------------------

    def contains(self, x: np.ndarray, tol: float = 1e-8) -> bool:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.num_seqs,):
            return False
        if abs(x[0] - 1.0) > tol or x.min() < -tol:
            return False
        return bool(np.abs(self._E @ x - self._e).max() <= tol)

    def center(self) -> np.ndarray:
        """Uniform behavioral strategy in sequence form."""
        x = np.zeros(self.num_seqs)
        x[0] = 1.0
        for iset in self.infosets:
            share = x[iset.parent_seq] / len(iset.seqs)
            for s in iset.seqs:
                x[s] = share
        return x

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        """Random feasible point: Dirichlet behavioral strategies, pushed top-down."""
        x = np.zeros(self.num_seqs)
        x[0] = 1.0
        for iset in self.infosets:
            probs = rng.dirichlet(np.ones(len(iset.seqs)))
            for s, p in zip(iset.seqs, probs):
                x[s] = x[iset.parent_seq] * p
        return x

    def vertices(self) -> np.ndarray:
        """Deterministic strategies, deduplicated (unreached infosets collapse)."""
        choices = [range(len(iset.seqs)) for iset in self.infosets]
        seen = {}
        for combo in itertools.product(*choices):
            x = np.zeros(self.num_seqs)
            x[0] = 1.0
            for iset, pick in zip(self.infosets, combo):
                x[iset.seqs[pick]] = x[iset.parent_seq]
            seen[x.tobytes()] = x
        return np.array(list(seen.values()))

    # -- oracles ----------------------------------------------------------------

    def best_response(self, g: np.ndarray):
        """Exact argmax of <x, g> over the treeplex by bottom-up dynamic programming."""
        g = np.asarray(g, dtype=float)
        val = g.astype(float).copy()
        pick: dict[int, int] = {}
        for idx in range(len(self.infosets) - 1, -1, -1):
            iset = self.infosets[idx]
            best = int(np.argmax([val[s] for s in iset.seqs]))
            pick[idx] = best
            val[iset.parent_seq] += val[iset.seqs[best]]
        x = np.zeros(self.num_seqs)
        x[0] = 1.0
        for idx, iset in enumerate(self.infosets):
            if x[iset.parent_seq] > 0:
                x[iset.seqs[pick[idx]]] = x[iset.parent_seq]
        return x, float(val[0])

    def project(self, v: np.ndarray, tol: float = DYKSTRA_TOL, cap: int = DYKSTRA_CAP):
        """Euclidean projection via Dykstra between the flow subspace and the orthant.

        The per-infoset equalities (and the unit root) are assembled into one
        affine subspace with a precomputed projector; Dykstra alternates it
        with the nonnegative orthant until successive iterates move less
        than ``tol`` (sup norm).  Hitting the iteration cap reports the
        residual instead of failing silently.
        """
        v = np.asarray(v, dtype=float)
        if not np.all(np.isfinite(v)):
            raise ValueError("cannot project a non-finite point")
        if self._product_of_simplexes:
            return self._project_product(v)
        x = v.copy()
        p = np.zeros_like(v)
        q = np.zeros_like(v)
        for _ in range(cap):
            y = self._affine_project(x + p)
            p = x + p - y
            x_new = np.maximum(y + q, 0.0)
            q = y + q - x_new
            move = np.abs(x_new - x).max()
            x = x_new
            if move < tol:
                break
        else:
            raise RuntimeError(f"Dykstra hit the {cap}-iteration cap; last move {move:.3e}")
        return x

    def _affine_project(self, x: np.ndarray) -> np.ndarray:
        return x - self._affine_gain @ (self._E @ x - self._e)

    def _project_product(self, v: np.ndarray) -> np.ndarray:
        # all infosets hang off the root: independent simplex projections
        x = np.zeros_like(v)
        x[0] = 1.0
        for iset in self.infosets:
            idx = list(iset.seqs)
            x[idx] = project_simplex(v[idx])
        return x

    def bregman_diameter(self) -> float:
        verts = self.vertices()
        diff = verts[:, None, :] - verts[None, :, :]
        return 0.5 * float((diff**2).sum(axis=2).max())

    def to_json_dict(self) -> dict:
        return {
            "num_seqs": self.num_seqs,
            "infosets": [{"key": i.key, "parent_seq": i.parent_seq, "seqs": list(i.seqs)}
                         for i in self.infosets],
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "Treeplex":
        infosets = [Infoset(i["key"], int(i["parent_seq"]), tuple(int(s) for s in i["seqs"]))
                    for i in data["infosets"]]
        return cls(int(data["num_seqs"]), infosets)


class TreeplexDomain:
    """Domain adapter so treeplexes plug into the same OMD machinery as simplexes."""

    def __init__(self, tp: Treeplex):
        self.tp = tp
        self.dim = tp.dim

    def project(self, v):
        return self.tp.project(v)

    def best_response(self, g):
        return self.tp.best_response(g)

    def contains(self, x, tol=1e-8):
        return self.tp.contains(x, tol)

    def center(self):
        return self.tp.center()

    def bregman_diameter(self):
        return self.tp.bregman_diameter()

    def sample(self, rng):
        return self.tp.sample(rng)


# -- spectral norm -----------------------------------------------------------------


def spectral_norm(A: np.ndarray, tol: float = 1e-9, max_iter: int = 10_000) -> float:
    """Largest singular value by power iteration on A^T A.

    Runs from two deterministic starts (a ramp and an alternating vector)
    and takes the larger estimate, so a start lying in the null space of a
    structured matrix cannot fake a zero norm.
    """
    A = np.asarray(A, dtype=float)
    m = A.shape[1]
    starts = [np.arange(1.0, m + 1.0), (-1.0) ** np.arange(m)]
    best = 0.0
    for v in starts:
        v = v / np.linalg.norm(v)
        sigma = 0.0
        for _ in range(max_iter):
            w = A.T @ (A @ v)
            norm = np.linalg.norm(w)
            if norm == 0.0:
                sigma = 0.0
                break
            v = w / norm
            sigma_new = np.sqrt(norm)
            if abs(sigma_new - sigma) <= tol * max(sigma_new, 1.0):
                sigma = sigma_new
                break
            sigma = sigma_new
        best = max(best, float(sigma))
    return best


# -- the problem object ---------------------------------------------------------------


@dataclass
class Bspp:
    """min_x max_y x^T A y with prox/best-response oracles for both domains."""

    A: np.ndarray
    domain_x: object
    domain_y: object
    name: str = "bspp"

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float)
        if self.A.shape != (self.domain_x.dim, self.domain_y.dim):
            raise ValueError("payoff shape must match the domain dimensions")
        self.norm = spectral_norm(self.A)

    def default_eta(self) -> float:
        return 1.0 / (4.0 * self.norm)

    def gap(self, x: np.ndarray, y: np.ndarray) -> float:
        best_y = self.domain_y.best_response(self.A.T @ x)[1]
        worst_x = -self.domain_x.best_response(-(self.A @ y))[1]
        return float(best_y - worst_x)


def matrix_game_bspp(A: np.ndarray, name: str = "matrix") -> Bspp:
    A = np.asarray(A, dtype=float)
    return Bspp(A, SimplexDomain(A.shape[0]), SimplexDomain(A.shape[1]), name)


# -- OMD on a BSPP ----------------------------------------------------------------------


@dataclass
class BsppRunLog:
    problem: Bspp
    eta: float
    x: np.ndarray  # (T+1, dx)
    y: np.ndarray
    x_hat: np.ndarray
    y_hat: np.ndarray
    last_gap: np.ndarray  # (T+1,)
    avg_gap: np.ndarray  # (T+1,)

    @property
    def num_iterations(self) -> int:
        return self.x.shape[0] - 1

    def path_length_sq(self) -> float:
        return float(((self.x[1:] - self.x[:-1]) ** 2).sum() + ((self.y[1:] - self.y[:-1]) ** 2).sum())

    def path_bound(self) -> float:
        return 16.0 * (self.problem.domain_x.bregman_diameter() + self.problem.domain_y.bregman_diameter())

    def min_last_gap_series(self) -> np.ndarray:
        return np.minimum.accumulate(self.last_gap)


def bspp_omd_run(problem: Bspp, T: int, eta: float | None = None) -> BsppRunLog:
    """Both players run Euclidean OMD with one-step predictions over their domains.

    Gradients: the minimizer sees -A y, the maximizer A^T x.  Logged per
    iteration: the saddle-point gap of the current iterates and of the
    running averages.  The path-length certificate
    sum_t ||dx||^2 + ||dy||^2 <= 16 (Omega_x + Omega_y) is checked by the
    caller via ``path_length_sq`` / ``path_bound``.
    """
    eta = problem.default_eta() if eta is None else eta
    A = problem.A
    dx, dy = problem.domain_x, problem.domain_y
    x = dx.center()
    y = dy.center()
    xh, yh = x.copy(), y.copy()
    ux = -(A @ y)
    uy = A.T @ x

    xs = np.empty((T + 1, dx.dim))
    ys = np.empty((T + 1, dy.dim))
    xhs = np.empty_like(xs)
    yhs = np.empty_like(ys)
    last_gap = np.empty(T + 1)
    avg_gap = np.empty(T + 1)
    xs[0], ys[0], xhs[0], yhs[0] = x, y, xh, yh
    last_gap[0] = avg_gap[0] = problem.gap(x, y)
    x_sum = np.zeros(dx.dim)
    y_sum = np.zeros(dy.dim)

    for t in range(1, T + 1):
        xh = dx.project(xh + eta * ux)
        yh = dy.project(yh + eta * uy)
        x = dx.project(xh + eta * ux)  # one-step prediction
        y = dy.project(yh + eta * uy)
        ux = -(A @ y)
        uy = A.T @ x
        x_sum += x
        y_sum += y
        xs[t], ys[t], xhs[t], yhs[t] = x, y, xh, yh
        last_gap[t] = problem.gap(x, y)
        avg_gap[t] = problem.gap(x_sum / t, y_sum / t)
    return BsppRunLog(problem, eta, xs, ys, xhs, yhs, last_gap, avg_gap)


# -- smooth convex-concave play via linearization -------------------------------------------


def convex_concave_run(grad_x, grad_y, domain_x, domain_y, smoothness: float, T: int,
                       eta: float | None = None) -> dict:
    """OMD on the tangent-plane utilities of a smooth convex-concave objective.

    x minimizes, y maximizes; each player feeds the linearized utility
    (-grad_x f and +grad_y f) into Euclidean OMD at eta = 1/(8 L).  Returns
    the trajectories, the path-length certificate, and the sum of
    linearized regrets (nonnegative for convex-concave objectives).
    """
    eta = 1.0 / (8.0 * smoothness) if eta is None else eta
    x, y = domain_x.center(), domain_y.center()
    xh, yh = x.copy(), y.copy()
    ux, uy = -grad_x(x, y), grad_y(x, y)
    xs = np.empty((T + 1, domain_x.dim))
    ys = np.empty((T + 1, domain_y.dim))
    uxs = np.empty_like(xs)
    uys = np.empty_like(ys)
    xs[0], ys[0], uxs[0], uys[0] = x, y, ux, uy
    for t in range(1, T + 1):
        if not (np.all(np.isfinite(ux)) and np.all(np.isfinite(uy))):
            raise FloatingPointError(f"gradient oracle returned non-finite values at step {t}")
        xh = domain_x.project(xh + eta * ux)
        yh = domain_y.project(yh + eta * uy)
        x = domain_x.project(xh + eta * ux)
        y = domain_y.project(yh + eta * uy)
        ux, uy = -grad_x(x, y), grad_y(x, y)
        xs[t], ys[t], uxs[t], uys[t] = x, y, ux, uy
    path = float(((xs[1:] - xs[:-1]) ** 2).sum() + ((ys[1:] - ys[:-1]) ** 2).sum())
    bound = 16.0 * (domain_x.bregman_diameter() + domain_y.bregman_diameter())
    reg_x = domain_x.best_response(uxs[1:].sum(axis=0))[1] - float(np.einsum("td,td->", xs[1:], uxs[1:]))
    reg_y = domain_y.best_response(uys[1:].sum(axis=0))[1] - float(np.einsum("td,td->", ys[1:], uys[1:]))
    return {
        "x": xs, "y": ys, "eta": eta,
        "path_length_sq": path, "path_bound": bound,
        "linearized_regret_sum": reg_x + reg_y,
    }


# -- Kuhn poker -------------------------------------------------------------------------


def build_kuhn() -> Bspp:
    """Kuhn poker in sequence form: 13 sequences per player, payoffs averaged over deals.

    Three cards, one ante each, bet size one.  Player 1 sequences per card:
    check, bet, and after check-bet: fold, call.  Player 2 sequences per
    card: check/bet after a check, fold/call after a bet.  A holds the
    column player's expected payoff (the row player minimizes), so the
    value of min max x^T A y is +1/18: player 1 loses 1/18 per hand.
    """
    cards = ["J", "Q", "K"]
    # player 1 sequence ids
    x_idx = {"root": 0}
    infosets_x = []
    for c, card in enumerate(cards):
        chk, bet = 1 + 4 * c, 2 + 4 * c
        fold, call = 3 + 4 * c, 4 + 4 * c
        x_idx[f"{card}:check"], x_idx[f"{card}:bet"] = chk, bet
        x_idx[f"{card}:fold"], x_idx[f"{card}:call"] = fold, call
        infosets_x.append(Infoset(f"P1:{card}:open", 0, (chk, bet)))
    for c, card in enumerate(cards):
        chk = 1 + 4 * c
        fold, call = 3 + 4 * c, 4 + 4 * c
        infosets_x.append(Infoset(f"P1:{card}:facing-bet", chk, (fold, call)))
    tp_x = Treeplex(13, infosets_x)

    y_idx = {"root": 0}
    infosets_y = []
    for c, card in enumerate(cards):
        chk, bet = 1 + 4 * c, 2 + 4 * c  # after P1 checks
        fold, call = 3 + 4 * c, 4 + 4 * c  # after P1 bets
        y_idx[f"{card}:check"], y_idx[f"{card}:bet"] = chk, bet
        y_idx[f"{card}:fold"], y_idx[f"{card}:call"] = fold, call
        infosets_y.append(Infoset(f"P2:{card}:after-check", 0, (chk, bet)))
        infosets_y.append(Infoset(f"P2:{card}:after-bet", 0, (fold, call)))
    tp_y = Treeplex(13, infosets_y)

    A = np.zeros((13, 13))
    prob = 1.0 / 6.0
    for c1, c2 in itertools.permutations(range(3), 2):
        k1, k2 = cards[c1], cards[c2]
        sign = 1.0 if c1 > c2 else -1.0  # showdown payoff sign for player 1
        # terminal: (p1 seq, p2 seq, p1 payoff)
        terminals = [
            (f"{k1}:check", f"{k2}:check", sign * 1.0),
            (f"{k1}:fold", f"{k2}:bet", -1.0),
            (f"{k1}:call", f"{k2}:bet", sign * 2.0),
            (f"{k1}:bet", f"{k2}:fold", 1.0),
            (f"{k1}:bet", f"{k2}:call", sign * 2.0),
        ]
        for sx, sy, payoff1 in terminals:
            A[x_idx[sx], y_idx[sy]] += prob * (-payoff1)  # A holds P2's payoff
    return Bspp(A, TreeplexDomain(tp_x), TreeplexDomain(tp_y), name="kuhn")
