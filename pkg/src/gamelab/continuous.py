"""Unconstrained and ball-constrained bilinear games under first-order dynamics.

Optimistic gradient descent is a linear dynamical system here; its
characteristic equation factors through the eigenvalues of A^T B, so
stability can be predicted from the spectrum and cross-checked against
simulation.  The generic first-order family (historical gradient descent)
is described by its coefficient polynomials, and for any regular member an
adversarial game with a real positive eigenvalue can be synthesized that
makes it diverge.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from gamelab.regularizers import project_l1_ball

DIVERGENCE_THRESHOLD = 1e12
DIVERGENCE_FLAG = 1e6
PLATEAU_WINDOW = 100
PLATEAU_TOL = 1e-9
REAL_EIG_TOL = 1e-9

CONVERGE = "converge"
DIVERGE = "diverge"
INCONCLUSIVE = "inconclusive"


# -- eigenvalues via the characteristic polynomial -------------------------------


def characteristic_polynomial(M: np.ndarray) -> np.ndarray:
    """Coefficients of det(z I - M), leading 1 first (Faddeev-LeVerrier)."""
    M = np.asarray(M, dtype=float)
    d = M.shape[0]
    coeffs = np.empty(d + 1)
    coeffs[0] = 1.0
    N = np.zeros_like(M)
    for k in range(1, d + 1):
        N = M @ N + coeffs[k - 1] * np.eye(d)
        coeffs[k] = -np.trace(M @ N) / k
    return coeffs


def eigenvalues_small(M: np.ndarray) -> np.ndarray:
    """Eigenvalues of a small dense matrix via companion-matrix root finding.

    2x2 uses the closed-form quadratic; larger matrices (d <= 8) go through
    the characteristic polynomial.
    """
    M = np.asarray(M, dtype=float)
    d = M.shape[0]
    if M.shape != (d, d):
        raise ValueError("matrix must be square")
    if d > 8:
        raise ValueError("companion-matrix route is for d <= 8")
    if d == 1:
        return M[0, :1].astype(complex)
    if d == 2:
        tr = M[0, 0] + M[1, 1]
        det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
        disc = complex(tr * tr - 4.0 * det) ** 0.5
        return np.array([(tr + disc) / 2.0, (tr - disc) / 2.0])
    return np.roots(characteristic_polynomial(M))


def is_real(values: np.ndarray, tol: float = REAL_EIG_TOL) -> np.ndarray:
    values = np.asarray(values, dtype=complex)
    return np.abs(values.imag) <= tol * (1.0 + np.abs(values.real))


# -- game and method descriptions --------------------------------------------------


@dataclass
class BilinearGame:
    """Two-player continuous game with utilities x^T A y and x^T B y.

    ``radius`` switches on l1-ball constraints of that radius for both
    players (used by the inefficiency construction); None means
    unconstrained play on R^d.
    """

    A: np.ndarray
    B: np.ndarray
    radius: float | None = None

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float)
        self.B = np.asarray(self.B, dtype=float)
        if self.A.shape != self.B.shape or self.A.shape[0] != self.A.shape[1]:
            raise ValueError("A and B must be square matrices of equal size")

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    def interaction_matrix(self) -> np.ndarray:
        return self.A.T @ self.B

    def is_full_rank(self, tol: float = 1e-10) -> bool:
        sa = np.linalg.svd(self.A, compute_uv=False)
        sb = np.linalg.svd(self.B, compute_uv=False)
        return bool(sa.min() > tol and sb.min() > tol)

    def welfare(self, x: np.ndarray, y: np.ndarray) -> float:
        return float(x @ self.A @ y + x @ self.B @ y)


@dataclass
class OneVsManyGame:
    """Player 1 against players 2..n; utilities are bilinear through A_1j, A_j1."""

    A_1j: list[np.ndarray]
    A_j1: list[np.ndarray]

    def __post_init__(self):
        self.A_1j = [np.asarray(m, float) for m in self.A_1j]
        self.A_j1 = [np.asarray(m, float) for m in self.A_j1]
        if len(self.A_1j) != len(self.A_j1) or not self.A_1j:
            raise ValueError("need matching A_1j / A_j1 lists")
        d = self.A_1j[0].shape[0]
        for m in self.A_1j + self.A_j1:
            if m.shape != (d, d):
                raise ValueError("all blocks must be d x d")

    @property
    def dim(self) -> int:
        return self.A_1j[0].shape[0]

    def interaction_matrix(self) -> np.ndarray:
        return sum(a @ b for a, b in zip(self.A_1j, self.A_j1))


@dataclass(frozen=True)
class HgdMethod:
    """First-order method x(t+1) = sum_tau a(tau) x(t-tau) + sum_tau b(tau) grad(t-tau).

    Described by the polynomials S(z) = sum a(tau) z^-tau and
    G(z) = sum b(tau) z^-tau.  Regular means S(1) = 1 and G(1) != 0, which
    guarantees that fixed points of the iteration are equilibria.
    """

    a_coeffs: tuple[float, ...]
    b_coeffs: tuple[float, ...]
    name: str = "hgd"

    def s_at(self, z: complex) -> complex:
        return sum(a * z ** (-k) for k, a in enumerate(self.a_coeffs))

    def g_at(self, z: complex) -> complex:
        return sum(b * z ** (-k) for k, b in enumerate(self.b_coeffs))

    @property
    def depth(self) -> int:
        return max(len(self.a_coeffs), len(self.b_coeffs))

    def is_regular(self, tol: float = 1e-12) -> bool:
        return abs(self.s_at(1.0) - 1.0) <= tol and abs(self.g_at(1.0)) > tol

    def shares_roots(self, tol: float = 1e-7) -> bool:
        """Numerical check of the gcd condition between G(z) and S(z) - z."""
        depth = self.depth
        g_poly = np.zeros(depth)
        g_poly[: len(self.b_coeffs)] = self.b_coeffs  # G(z) z^{depth-1}, descending powers
        s_poly = np.zeros(depth + 1)
        s_poly[0] = -1.0  # -z * z^{depth-1}
        s_poly[1: len(self.a_coeffs) + 1] += self.a_coeffs
        g_roots = np.roots(np.trim_zeros(g_poly, "f")) if np.any(g_poly) else np.array([])
        s_roots = np.roots(np.trim_zeros(s_poly, "f"))
        for gr in g_roots:
            if np.any(np.abs(s_roots - gr) < tol):
                return True
        return False


def ogd_method(eta: float) -> HgdMethod:
    return HgdMethod((1.0,), (2.0 * eta, -eta), name=f"ogd(eta={eta})")


# -- simulation ---------------------------------------------------------------------


@dataclass
class ContinuousRunLog:
    states: np.ndarray  # (T+1, 2, d): players' iterates
    norms: np.ndarray  # (T+1,)
    diverged: bool
    halted_at: int | None = None
    projection_active: bool = False

    def final(self) -> tuple[np.ndarray, np.ndarray]:
        return self.states[-1, 0], self.states[-1, 1]

    def plateau_reached(self, window: int = PLATEAU_WINDOW, tol: float = PLATEAU_TOL) -> bool:
        if self.diverged or self.norms.size <= window:
            return False
        tail = self.states[-window:]
        return float(np.abs(tail - tail[-1]).max()) < tol


def simulate_hgd(game: BilinearGame, method: HgdMethod, T: int,
                 x0: np.ndarray | None = None, y0: np.ndarray | None = None,
                 rng: np.random.Generator | None = None) -> ContinuousRunLog:
    """Run a (possibly ball-constrained) HGD method on a bilinear game.

    Pre-history is filled with the initial point; a state norm above 1e12
    halts the run and classifies it as diverged.
    """
    d = game.dim
    if x0 is None or y0 is None:
        rng = rng or np.random.default_rng(0)
        x0 = rng.standard_normal(d) if x0 is None else x0
        y0 = rng.standard_normal(d) if y0 is None else y0
    x0 = np.asarray(x0, float)
    y0 = np.asarray(y0, float)
    depth = method.depth
    a = np.asarray(method.a_coeffs)
    b = np.asarray(method.b_coeffs)

    xs = [x0.copy() for _ in range(depth)]  # most recent last
    ys = [y0.copy() for _ in range(depth)]
    gx = [game.A @ y0 for _ in range(depth)]
    gy = [game.B.T @ x0 for _ in range(depth)]

    states = np.empty((T + 1, 2, d))
    states[0] = (x0, y0)
    norms = np.empty(T + 1)
    norms[0] = np.hypot(np.linalg.norm(x0), np.linalg.norm(y0))
    projection_active = False

    for t in range(1, T + 1):
        x_new = sum(a[k] * xs[-1 - k] for k in range(len(a)))
        x_new = x_new + sum(b[k] * gx[-1 - k] for k in range(len(b)))
        y_new = sum(a[k] * ys[-1 - k] for k in range(len(a)))
        y_new = y_new + sum(b[k] * gy[-1 - k] for k in range(len(b)))
        if game.radius is not None:
            px = project_l1_ball(x_new, game.radius)
            py = project_l1_ball(y_new, game.radius)
            if not (np.allclose(px, x_new) and np.allclose(py, y_new)):
                projection_active = True
            x_new, y_new = px, py
        xs.append(x_new)
        ys.append(y_new)
        gx.append(game.A @ y_new)
        gy.append(game.B.T @ x_new)
        if len(xs) > depth:
            xs.pop(0), ys.pop(0), gx.pop(0), gy.pop(0)
        states[t] = (x_new, y_new)
        norms[t] = np.hypot(np.linalg.norm(x_new), np.linalg.norm(y_new))
        if norms[t] > DIVERGENCE_THRESHOLD:
            return ContinuousRunLog(states[: t + 1], norms[: t + 1], True, t, projection_active)
    return ContinuousRunLog(states, norms, False, None, projection_active)


def simulate_ogd(game: BilinearGame, eta: float, T: int, **kw) -> ContinuousRunLog:
    return simulate_hgd(game, ogd_method(eta), T, **kw)


def simulate_ogd_one_vs_many(game: OneVsManyGame, eta: float, T: int,
                             rng: np.random.Generator | None = None) -> dict:
    """OGD for player 1 against each of the others; returns the state log."""
    rng = rng or np.random.default_rng(0)
    d = game.dim
    n = len(game.A_1j) + 1
    cur = [rng.standard_normal(d) for _ in range(n)]
    prev = [c.copy() for c in cur]

    def grads(profile):
        g1 = sum(m @ profile[j + 1] for j, m in enumerate(game.A_1j))
        rest = [m @ profile[0] for m in game.A_j1]
        return [g1] + rest

    g_prev = grads(prev)
    states = np.empty((T + 1, n, d))
    states[0] = cur
    diverged = False
    halted = None
    for t in range(1, T + 1):
        g_cur = grads(cur)
        nxt = [cur[i] + 2.0 * eta * g_cur[i] - eta * g_prev[i] for i in range(n)]
        prev, cur, g_prev = cur, nxt, g_cur
        states[t] = cur
        if max(np.linalg.norm(c) for c in cur) > DIVERGENCE_THRESHOLD:
            diverged, halted = True, t
            states = states[: t + 1]
            break
    norms = np.linalg.norm(states.reshape(states.shape[0], -1), axis=1)
    return {"states": states, "norms": norms, "diverged": diverged, "halted_at": halted}


# -- spectral prediction --------------------------------------------------------------


def characteristic_root_magnitudes(lam: float, eta: float) -> tuple[float, float]:
    """|z+|, |z-| for an eigenvalue -lam of A^T B under OGD with step eta.

    |z+-|^2 = (1 +- sqrt(1 - 4 eta^2 lam)) / 2, valid for eta <= 1/(2 sqrt(lam)).
    """
    if lam <= 0:
        raise ValueError("lam is the magnitude of a negative eigenvalue; must be positive")
    disc = 1.0 - 4.0 * eta**2 * lam
    if disc < 0:
        raise ValueError("eta > 1/(2 sqrt(lam)): complex branch, outside the stability regime")
    root = np.sqrt(disc)
    return float(np.sqrt((1.0 + root) / 2.0)), float(np.sqrt((1.0 - root) / 2.0))


@dataclass
class SpectralVerdict:
    verdict: str
    eigenvalues: np.ndarray
    rate: float | None = None  # max |z| over stable roots when converging
    witness: complex | None = None  # offending eigenvalue when diverging
    eta_bound: float | None = None
    reason: str = ""


def spectral_predict(game, eta: float, method: HgdMethod | None = None) -> SpectralVerdict:
    """Stability verdict for OGD (or a regular HGD method) from the spectrum of A^T B.

    All eigenvalues real negative with eta <= 1/(2 sqrt(rho)): converge,
    with the linear rate max |z+-|.  Any real positive eigenvalue: diverge
    (for OGD the unstable root is explicit; for other methods the
    characteristic roots are checked).  Complex eigenvalues, or too large a
    step, fall outside the theory: inconclusive.
    """
    M = game.interaction_matrix()
    eig = eigenvalues_small(M)
    real = is_real(eig)
    positive = real & (eig.real > REAL_EIG_TOL)
    if np.any(positive):
        lam = eig[positive][np.argmax(eig[positive].real)]
        if method is None or method.a_coeffs == (1.0,):
            return SpectralVerdict(DIVERGE, eig, witness=complex(lam),
                                   reason="real positive eigenvalue: OGD root outside the unit circle")
        mags = _hgd_root_magnitudes(method, complex(lam))
        if mags.max() > 1.0 + 1e-9:
            return SpectralVerdict(DIVERGE, eig, witness=complex(lam),
                                   reason="characteristic root outside the unit circle")
        return SpectralVerdict(INCONCLUSIVE, eig, reason="positive eigenvalue but no unstable root found")
    if np.all(real) and np.all(eig.real < -REAL_EIG_TOL):
        rho = float(np.max(-eig.real))
        eta_bound = 1.0 / (2.0 * np.sqrt(rho))
        if eta <= eta_bound + 1e-15:
            rate = max(characteristic_root_magnitudes(float(-ev.real), eta)[0] for ev in eig)
            return SpectralVerdict(CONVERGE, eig, rate=rate, eta_bound=eta_bound)
        return SpectralVerdict(INCONCLUSIVE, eig, eta_bound=eta_bound,
                               reason=f"eta {eta} above the certified bound {eta_bound:.6g}")
    return SpectralVerdict(INCONCLUSIVE, eig, reason="complex or near-zero eigenvalues: theory is silent")


def _hgd_root_magnitudes(method: HgdMethod, lam: complex) -> np.ndarray:
    """Magnitudes of the roots of (z - S(z))^2 = lam G(z)^2, cleared of denominators."""
    depth = method.depth
    # P(z) = z^depth - sum a_k z^{depth-1-k}; Q(z) = sum b_k z^{depth-1-k}
    p = np.zeros(depth + 1, dtype=complex)
    p[0] = 1.0
    for k, a in enumerate(method.a_coeffs):
        p[k + 1] -= a
    q = np.zeros(depth, dtype=complex)
    for k, b in enumerate(method.b_coeffs):
        q[k] = b
    poly = np.polymul(p, p) - lam * np.pad(np.polymul(q, q), (2, 0))
    roots = np.roots(np.trim_zeros(poly, "f"))
    roots = roots[np.abs(roots) > 1e-12]  # z = 0 padding artifacts
    return np.abs(roots)


def measure_linear_rate(log: ContinuousRunLog, floor: float = 1e-11, ceil: float = 1e-2):
    """Log-linear fit of the norm decay over the window where it is clean.

    Returns (rate, points_used); None when fewer than 10 usable points.
    """
    norms = log.norms
    scale = norms[0] if norms[0] > 0 else 1.0
    rel = norms / scale
    usable = np.nonzero((rel < ceil) & (rel > floor))[0]
    if usable.size < 10:
        return None, 0
    t = usable.astype(float)
    y = np.log(norms[usable])
    slope = np.polyfit(t, y, 1)[0]
    return float(np.exp(slope)), int(usable.size)


# -- adversarial construction -----------------------------------------------------------


def adversarial_game_for(method: HgdMethod, eps: float = 1.0, dim: int = 2,
                         max_halvings: int = 40) -> tuple[BilinearGame, float]:
    """A game (I, lam I) on which the given regular method provably diverges.

    lam = ((1 + eps - S(1 + eps)) / G(1 + eps))^2 puts z = 1 + eps on the
    characteristic equation, outside the unit circle.  Degenerate eps
    (G(1+eps) = 0 or S(1+eps) = 1+eps) retries with eps/2.
    """
    if not method.is_regular():
        raise ValueError("adversarial construction needs a regular method")
    if method.shares_roots():
        raise ValueError("G(z) and S(z) - z share a root; construction assumptions violated")
    for _ in range(max_halvings):
        g = method.g_at(1.0 + eps)
        s = method.s_at(1.0 + eps)
        if abs(g) > 1e-12 and abs((1.0 + eps) - s) > 1e-12:
            lam = float(abs(((1.0 + eps - s) / g)) ** 2)
            game = BilinearGame(np.eye(dim), lam * np.eye(dim))
            return game, lam
        eps /= 2.0
    raise RuntimeError("could not find a non-degenerate eps")


# -- inefficiency construction ------------------------------------------------------------


def inefficiency_game() -> BilinearGame:
    """Coordination-flavored game whose OGD limit earns zero welfare."""
    a = np.array([[1.0, -2.0], [-1.0, 1.0]])
    b = np.array([[1.0, 1.0], [1.0, -1.0]])
    return BilinearGame(a, b)


def robustness_game(eps: float = 0.05) -> BilinearGame:
    """||A + B||_F = eps perturbation of a zero-sum game that destabilizes OGD."""
    a = np.array([[1.0, 0.0], [0.0, eps / 2.0]])
    b = np.array([[-1.0, 0.0], [0.0, eps / 2.0]])
    return BilinearGame(a, b)


def inefficiency_demo(radius: float = 10.0, eta: float = 0.2, T: int = 4000,
                      inits: int = 3, seed: int = 0) -> dict:
    """Run OGD on the inefficiency game inside l1 balls of the given radius.

    Verifies: the limit is (0, 0) (to 1e-6) from every initialization, the
    ball projection never activates, and ((R,0),(R,0)) is an equilibrium by
    the Hoelder bound max_x x^T A y* <= R ||A y*||_inf = R^2.  Reports the
    welfare pair {0, 2 R^2}.
    """
    game = inefficiency_game()
    constrained = BilinearGame(game.A, game.B, radius=radius)
    rng = np.random.default_rng(seed)
    limits = []
    for _ in range(inits):
        x0 = rng.uniform(-1.0, 1.0, size=2)
        y0 = rng.uniform(-1.0, 1.0, size=2)
        log = simulate_hgd(constrained, ogd_method(eta), T, x0=x0, y0=y0)
        if log.projection_active:
            raise RuntimeError("ball projection activated; enlarge the radius")
        limits.append(log.final())
    worst = max(max(np.abs(x).max(), np.abs(y).max()) for x, y in limits)
    x_star = np.array([radius, 0.0])
    y_star = np.array([radius, 0.0])
    br_x = radius * np.abs(game.A @ y_star).max()  # Hoelder: best x response value
    br_y = radius * np.abs(game.B.T @ x_star).max()
    eq_value = float(x_star @ game.A @ y_star)
    return {
        "limit_deviation": float(worst),
        "limits_at_origin": bool(worst <= 1e-6),
        "equilibrium_check": bool(abs(br_x - eq_value) <= 1e-9 and abs(br_y - eq_value) <= 1e-9),
        "welfare_at_limit": 0.0,
        "welfare_alternative": float(game.welfare(x_star, y_star)),
    }
