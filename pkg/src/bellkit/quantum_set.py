"""Outer approximations of the quantum set and device-independent randomness.

Moment-matrix feasibility maximizes the smallest eigenvalue of M(u) over the
unobserved entries u. Since λ_min(M(u)) is concave, the maximum over a box is
found reliably by one-dimensional bracket refinement: a concave function's
maximum always lies within one grid cell of the best grid point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .core_stats import Behavior, CorrelatorVector, WrongScenario
from .errors import NoConvergence, SuperQuantumS
from .quantum_bell import horodecki_max_chsh
from .quantum_kernel import DensityMatrix, bloch_behavior, psi_theta
from .rng import stream

TSIRELSON = 2.0 * np.sqrt(2.0)


@dataclass(frozen=True)
class MomentMatrix:
    """Symmetric matrix with fixed entries in ``base`` and free slots ``free``.

    ``bounds[k]`` is the box (lo, hi) for the free slot ``free[k]``.
    """

    base: np.ndarray
    free: tuple[tuple[int, int], ...]
    bounds: tuple[tuple[float, float], ...]
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        base = np.array(self.base, dtype=float)
        if base.ndim != 2 or base.shape[0] != base.shape[1]:
            raise ValueError("moment matrix must be square")
        base = (base + base.T) / 2
        for i, j in self.free:
            base[i, j] = base[j, i] = 0.0
        base.setflags(write=False)
        object.__setattr__(self, "base", base)
        if len(self.bounds) != len(self.free):
            raise ValueError("every free slot needs bounds")

    @property
    def size(self) -> int:
        return self.base.shape[0]

    def matrix(self, u) -> np.ndarray:
        return self.batch(np.asarray(u, dtype=float)[None])[0]

    def batch(self, U: np.ndarray) -> np.ndarray:
        """Matrices for a batch of assignments U with shape (..., n_free)."""
        U = np.asarray(U, dtype=float)
        out = np.broadcast_to(self.base, U.shape[:-1] + self.base.shape).copy()
        for k, (i, j) in enumerate(self.free):
            out[..., i, j] = U[..., k]
            out[..., j, i] = U[..., k]
        return out

    def min_eig(self, U: np.ndarray) -> np.ndarray:
        return np.linalg.eigvalsh(self.batch(U))[..., 0]

    def to_dict(self) -> dict:
        return {
            "size": self.size,
            "fixed": self.base.tolist(),
            "free": [list(p) for p in self.free],
            "bounds": [list(b) for b in self.bounds],
            "labels": list(self.labels),
        }


@dataclass(frozen=True)
class FeasibilityResult:
    feasible: bool
    best_min_eigenvalue: float
    witness_assignment: np.ndarray

    def to_dict(self) -> dict:
        return {
            "feasible": self.feasible,
            "best_min_eigenvalue": self.best_min_eigenvalue,
            "witness_assignment": np.asarray(self.witness_assignment).tolist(),
        }


def correlator_moment_matrix(c: CorrelatorVector) -> MomentMatrix:
    """Rows (A0, A1, B0, B1); u1 = <A0A1> and u2 = <B0B1> are free in [-1, 1]."""
    if c.values.shape != (2, 2):
        raise WrongScenario("the correlator moment matrix needs two settings per side")
    E = c.values
    base = np.eye(4)
    base[:2, 2:] = E
    base[2:, :2] = E.T
    return MomentMatrix(base, ((0, 1), (2, 3)), ((-1.0, 1.0), (-1.0, 1.0)), ("A0", "A1", "B0", "B1"))


# ---------------------------------------------------------------------------
# Concave maximization over a box

_GRID = 9
_XTOL = 1e-10


def _refine(f, lo: np.ndarray, hi: np.ndarray):
    """Maximize a batch of concave 1-D functions.

    ``f`` maps an array X of shape (B, K) to values of the same shape.
    Returns (argmax, max) arrays of shape (B,).
    """
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    t = np.linspace(0.0, 1.0, _GRID)
    while True:
        X = lo[:, None] + (hi - lo)[:, None] * t[None, :]
        V = f(X)
        i = np.argmax(V, axis=1)
        rows = np.arange(len(lo))
        best_x, best_v = X[rows, i], V[rows, i]
        if np.all(hi - lo <= _XTOL):
            return best_x, best_v
        new_lo = X[rows, np.maximum(i - 1, 0)]
        new_hi = X[rows, np.minimum(i + 1, _GRID - 1)]
        lo, hi = new_lo, new_hi


def _maximize_nested(mm: MomentMatrix):
    """Exact for one or two free entries: nested bracket refinement."""
    (lo1, hi1), *rest = mm.bounds
    if not rest:
        def f1(X):
            return mm.min_eig(X[..., None])
        x, v = _refine(f1, [lo1], [hi1])
        return np.array([x[0]]), float(v[0])
    lo2, hi2 = rest[0]

    def outer(X):  # X: (1, K) values of u1
        u1 = X[0]
        K = u1.size

        def inner(Y):  # Y: (K, K') values of u2 for each u1
            U = np.stack([np.broadcast_to(u1[:, None], Y.shape), Y], axis=-1)
            return mm.min_eig(U)

        _, v = _refine(inner, np.full(K, lo2), np.full(K, hi2))
        return v[None, :]

    x1, _ = _refine(outer, [lo1], [hi1])
    y, v = _refine(lambda Y: mm.min_eig(np.stack([np.full(Y.shape, x1[0]), Y], axis=-1)), [lo2], [hi2])
    return np.array([x1[0], y[0]]), float(v[0])


_CLUSTER_WIDTHS = tuple(10.0 ** -k for k in range(1, 10))


def _project_simplex(w: np.ndarray) -> np.ndarray:
    """Euclidean projection of a vector onto the probability simplex."""
    srt = np.sort(w)[::-1]
    css = np.cumsum(srt) - 1.0
    k = np.nonzero(srt - css / np.arange(1, w.size + 1) > 0)[0][-1]
    return np.maximum(w - css[k] / (k + 1), 0.0)


def _clip_to_cone(g: np.ndarray, u: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    g = g.copy()
    g[(u <= lo) & (g < 0)] = 0.0
    g[(u >= hi) & (g > 0)] = 0.0
    return g


def _steepest_directions(mm: MomentMatrix, u: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> list:
    """Ascent directions of λ_min that also work where it is degenerate.

    For the eigenvectors V of all eigenvalues within ε of the smallest, the
    directional derivative along d is about λ_min(Σ_l d_l G_l) with
    G_l = VᵀE_lV. The best unit d is the normalized minimum-norm element
    Π(g(Z)), with g_l(Z) = <G_l, Z> and Π dropping components that leave
    the box, over density matrices Z. Projected gradient solves that small
    problem; one direction is returned per distinct cluster size.
    """
    w, v = np.linalg.eigh(mm.matrix(u))
    rows = [i for i, _ in mm.free]
    cols = [j for _, j in mm.free]
    out, seen = [], set()
    for eps in _CLUSTER_WIDTHS:
        k = int(np.count_nonzero(w - w[0] <= eps))
        if k in seen:
            continue
        seen.add(k)
        V = v[:, :k]
        G = np.einsum("la,lb->lab", V[rows], V[cols])
        G = G + G.transpose(0, 2, 1)
        step = 0.5 / max(float(np.sum(G * G)), 1e-300)
        Z = np.eye(k) / k
        for _ in range(200 if k > 1 else 1):
            g = _clip_to_cone(np.einsum("lab,ab->l", G, Z), u, lo, hi)
            Z = Z - step * 2.0 * np.einsum("l,lab->ab", g, G)
            zw, zv = np.linalg.eigh((Z + Z.T) / 2)
            Z = (zv * _project_simplex(zw)) @ zv.T
        d = _clip_to_cone(np.einsum("lab,ab->l", G, Z), u, lo, hi)
        norm = np.linalg.norm(d)
        if norm > 1e-12:
            out.append(d / norm)
    return out


def _ascend(mm: MomentMatrix, u: np.ndarray, lo: np.ndarray, hi: np.ndarray, rng, max_iter: int, tol: float):
    """Line-search ascent along steepest, pattern, coordinate and random directions."""
    n = lo.size
    val = float(mm.min_eig(u[None])[0])
    stalled = 0
    start = u.copy()
    for _ in range(max_iter):
        prev = val
        directions = [np.eye(n)[k] for k in range(n)]
        directions += [d / np.linalg.norm(d) for d in rng.standard_normal((n, n))]
        directions = _steepest_directions(mm, u, lo, hi) + directions
        # Pattern move along the net displacement of the previous sweep.
        step = u - start
        if np.linalg.norm(step) > 1e-14:
            directions.insert(0, step / np.linalg.norm(step))
        start = u.copy()
        for d in directions:
            # Feasible step range keeping u + t d inside the box.
            with np.errstate(divide="ignore", invalid="ignore"):
                t1 = np.where(d != 0, (lo - u) / d, -np.inf)
                t2 = np.where(d != 0, (hi - u) / d, np.inf)
            tmin = np.max(np.minimum(t1, t2))
            tmax = np.min(np.maximum(t1, t2))
            if tmax - tmin <= 1e-15:
                continue
            t, v = _refine(lambda T: mm.min_eig(u + T[..., None] * d), [tmin], [tmax])
            if v[0] > val:
                u = np.clip(u + t[0] * d, lo, hi)
                val = float(v[0])
        if val - prev <= tol:
            stalled += 1
            if stalled >= 3:
                return u, val
        else:
            stalled = 0
    raise NoConvergence("ascent hit its iteration cap")


_SMOOTHING = tuple(10.0 ** -k for k in range(2, 10))


def _polish_smoothed(mm: MomentMatrix, u: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Follow curved ridges of λ_min through the soft minimum -μ log Σ exp(-λ_i/μ).

    Straight-line searches stall where two eigenvalues stay equal along a
    curved path. The soft minimum is smooth, concave and within μ log n of
    λ_min, so L-BFGS-B with μ decreasing to 1e-9 tracks the ridge.
    """
    rows = [i for i, _ in mm.free]
    cols = [j for _, j in mm.free]
    bounds = list(zip(lo, hi))
    for mu in _SMOOTHING:
        def negative(x, mu=mu):
            w, v = np.linalg.eigh(mm.matrix(x))
            z = np.exp(-(w - w[0]) / mu)
            total = z.sum()
            grad = 2.0 * np.einsum("k,ik,ik->i", z / total, v[rows], v[cols])
            return -(w[0] - mu * np.log(total)), -grad

        res = optimize.minimize(negative, u, jac=True, method="L-BFGS-B", bounds=bounds,
                                options={"ftol": 1e-15, "gtol": 1e-13, "maxiter": 2000})
        u = np.clip(res.x, lo, hi)
    return u


def _maximize_ascent(mm: MomentMatrix, starts: int, seed: int, max_iter: int, tol: float):
    """Multi-start ascent; the best start is polished on the smoothed objective
    and ascended once more."""
    lo = np.array([b[0] for b in mm.bounds])
    hi = np.array([b[1] for b in mm.bounds])
    rng = stream(seed, 0)
    best_u, best_v = None, -np.inf
    for s in range(starts):
        u0 = (lo + hi) / 2 if s == 0 else rng.uniform(lo, hi)
        u, val = _ascend(mm, u0, lo, hi, rng, max_iter, tol)
        if val > best_v:
            best_u, best_v = u, val
    u, val = _ascend(mm, _polish_smoothed(mm, best_u, lo, hi), lo, hi, rng, max_iter, tol)
    if val > best_v:
        best_u, best_v = u, val
    return best_u, best_v


def q1_feasibility(mm: MomentMatrix, tol: float = 1e-9, starts: int = 8, seed: int = 0,
                   max_iter: int = 10_000) -> FeasibilityResult:
    """Is there an assignment of the free entries making M positive semidefinite?

    One or two free entries are handled by nested bracket refinement, which is
    exact for concave objectives. More entries use multi-start line-search
    ascent followed by a smoothed polish of the best start.
    """
    n = len(mm.free)
    if n == 0:
        u = np.zeros(0)
        v = float(np.linalg.eigvalsh(mm.base)[0])
    elif n <= 2:
        u, v = _maximize_nested(mm)
    else:
        u, v = _maximize_ascent(mm, starts, seed, max_iter, 1e-10)
    return FeasibilityResult(bool(v >= -tol), float(v), np.asarray(u))


@dataclass(frozen=True)
class ArcsinResult:
    lhs: float
    satisfied: bool


def arcsin_criterion(c: CorrelatorVector) -> ArcsinResult:
    """max over the placement of the minus sign of |ΣA ± A| with A = arcsin E.

    The placement E00 + E01 + E10 − E11 is one of the four; taking all of
    them makes the criterion invariant under relabeling of settings.
    """
    if c.values.shape != (2, 2):
        raise WrongScenario("the arcsin criterion needs two settings per side")
    A = np.arcsin(np.clip(c.values, -1.0, 1.0)).ravel()
    total = A.sum()
    lhs = float(max(abs(total - 2 * A[k]) for k in range(4)))
    return ArcsinResult(lhs, lhs <= np.pi + 1e-12)


def npa_q1_matrix(b: Behavior) -> MomentMatrix:
    """Projector-row moment matrix for a (2,2;2,2) behavior.

    Rows are (1, Π_A(0|0), Π_A(0|1), Π_B(0|0), Π_B(0|1)); the two same-party
    products are free.
    """
    if b.scenario.shape != (2, 2, 2, 2):
        raise WrongScenario("projector-row Q1 is implemented for (2,2;2,2)")
    pa = b.table[:, :, 0, :].sum(axis=2).mean(axis=1)
    pb = b.table[:, :, :, 0].sum(axis=2).mean(axis=0)
    p = np.concatenate([[1.0], pa, pb])
    base = np.zeros((5, 5))
    base[0] = base[:, 0] = p
    for i in range(1, 5):
        base[i, i] = p[i]
    base[1:3, 3:5] = b.table[:, :, 0, 0]
    base[3:5, 1:3] = b.table[:, :, 0, 0].T
    free = ((1, 2), (3, 4))
    bounds = tuple((-np.sqrt(p[i] * p[j]), np.sqrt(p[i] * p[j])) for i, j in free)
    return MomentMatrix(base, free, bounds, ("1", "A0", "A1", "B0", "B1"))


# ---------------------------------------------------------------------------
# Randomness


def randomness_bound(s_obs: float) -> float:
    """Largest P(a|x) compatible with an observed CHSH value s_obs."""
    if s_obs > TSIRELSON + 1e-9:
        raise SuperQuantumS(f"S = {s_obs} exceeds 2√2")
    if s_obs <= 2.0:
        return 1.0
    s = min(s_obs, TSIRELSON)
    return float(0.5 * (1.0 + np.sqrt(max(2.0 - (s / 2.0) ** 2, 0.0))))


@dataclass(frozen=True)
class CurvePoint:
    s: float
    p_marginal: float
    on_curve: bool


def randomness_curve_achievability(theta: float) -> CurvePoint:
    """CHSH and P(a=+1|x=0) of cos θ|00> + sin θ|11> at its optimal settings.

    S comes from the closed form 2√(1 + sin²2θ) and the marginal from the
    Born rule at the optimal settings. Near 2√2 the bound has unbounded slope,
    so a Born-rule S carrying one rounding error would not do here.
    """
    rho = DensityMatrix.pure(psi_theta(theta))
    settings = horodecki_max_chsh(rho).settings
    b = bloch_behavior(rho, settings.alice, settings.bob)
    s = float(2.0 * np.sqrt(1.0 + np.sin(2 * theta) ** 2))
    p = float(b.alice_marginals()[0, 0])
    return CurvePoint(s, p, abs(p - randomness_bound(min(s, TSIRELSON))) <= 1e-9)


def _chsh_grid(t: float, phi: float, n: int = 12):
    """Best of a coarse grid over (α1, β0, β1) for a0 at angle φ in the x–z plane."""
    ang = np.linspace(0, 2 * np.pi, n, endpoint=False)
    al, b0, b1 = np.meshgrid(ang, ang, ang, indexing="ij")
    vals = _chsh_angles(t, phi, al, b0, b1)
    k = np.unravel_index(np.argmax(vals), vals.shape)
    return np.array([ang[k[0]], ang[k[1]], ang[k[2]]])


def _chsh_angles(t, phi, al, b0, b1):
    # Correlation of x–z plane directions on cos θ|00> + sin θ|11>:
    # E = t a_x b_x + a_z b_z with t = sin 2θ.
    def E(p, q):
        return t * np.sin(p) * np.sin(q) + np.cos(p) * np.cos(q)

    return E(phi, b0) + E(phi, b1) + E(al, b0) - E(al, b1)


def _max_chsh(theta: float, phi: float) -> float:
    t = np.sin(2 * theta)

    def neg(x):
        return -_chsh_angles(t, phi, *x)

    def grad(x):
        al, b0, b1 = x

        def dE_dp(p, q):
            return t * np.cos(p) * np.sin(q) - np.sin(p) * np.cos(q)

        return -np.array([
            dE_dp(al, b0) - dE_dp(al, b1),
            dE_dp(b0, phi) + dE_dp(b0, al),
            dE_dp(b1, phi) - dE_dp(b1, al),
        ])

    x0 = _chsh_grid(t, phi)
    res = optimize.minimize(neg, x0, jac=grad, method="BFGS", options={"gtol": 1e-13})
    return float(max(-res.fun, -neg(x0)))


def block_optimize_marginal(s_target: float) -> float:
    """Numerical search for the largest P(a=+1|x=0) at CHSH = s_target.

    Scans pure states cos θ|00> + sin θ|11> and real projective settings, with
    Alice's first direction at angle φ from ẑ. For each φ a bisection finds the
    least entangled θ whose best CHSH reaches the target; the marginal
    ½(1 + cos 2θ cos φ) is then maximized over φ by grid plus golden section.
    """
    if s_target > TSIRELSON + 1e-9:
        raise SuperQuantumS(f"S = {s_target} exceeds 2√2")
    target = min(s_target, TSIRELSON) - 1e-12

    def marginal(phi: float) -> float:
        if _max_chsh(np.pi / 4, phi) < target:
            return -np.inf
        lo, hi = 0.0, np.pi / 4
        if _max_chsh(0.0, phi) >= target:
            hi = 0.0
        while hi - lo > 1e-12:
            mid = 0.5 * (lo + hi)
            if _max_chsh(mid, phi) >= target:
                hi = mid
            else:
                lo = mid
        return 0.5 * (1.0 + np.cos(2 * hi) * np.cos(phi))

    grid = np.linspace(0.0, np.pi / 2, 7)
    vals = [marginal(p) for p in grid]
    k = int(np.argmax(vals))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
    res = optimize.minimize_scalar(lambda p: -marginal(p), bounds=(lo, hi), method="bounded",
                                   options={"xatol": 1e-6})
    return float(max(vals[k], -res.fun))


# ---------------------------------------------------------------------------
# Macroscopic locality


def macroscopic_covariance(b: Behavior) -> MomentMatrix:
    """Covariance matrix of the outcome-count fluctuations of many copies.

    Rows are (a|x) for Alice and (b|y) for Bob with the last outcome of each
    setting dropped, since the counts of a setting sum to a constant. Entries
    between different settings of the same party are free, bounded by the
    Cauchy–Schwarz box |Γ_ij| <= sqrt(Γ_ii Γ_jj).
    """
    s = b.scenario
    t = b.table
    pa = t.sum(axis=3).mean(axis=1)  # [x, a]
    pb = t.sum(axis=2).mean(axis=0)  # [y, b]
    rows = [("A", x, a) for x in range(s.ma_inputs) for a in range(s.ma_outputs - 1)]
    rows += [("B", y, o) for y in range(s.mb_inputs) for o in range(s.mb_outputs - 1)]
    n = len(rows)
    base = np.zeros((n, n))
    free = []
    for i, (pi, si, oi) in enumerate(rows):
        for j, (pj, sj, oj) in enumerate(rows):
            if j < i:
                continue
            if pi == pj:
                p = pa if pi == "A" else pb
                if si == sj:
                    base[i, j] = (p[si, oi] if oi == oj else 0.0) - p[si, oi] * p[sj, oj]
                else:
                    free.append((i, j))
            else:
                base[i, j] = t[si, sj, oi, oj] - pa[si, oi] * pb[sj, oj]
            base[j, i] = base[i, j]
    diag = np.diag(base)
    bounds = tuple((-np.sqrt(diag[i] * diag[j]), np.sqrt(diag[i] * diag[j])) for i, j in free)
    labels = tuple(f"{p}{x}:{o}" for p, x, o in rows)
    return MomentMatrix(base, tuple(free), bounds, labels)


def ml_feasibility(b: Behavior, tol: float = 1e-9) -> FeasibilityResult:
    return q1_feasibility(macroscopic_covariance(b), tol)
