"""Quantum CHSH: Tsirelson bound, two-qubit optimum, pure-state embeddings,
Werner statistics, the GHZ conditional violation and a 2x2x3 marginal example.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core_stats import Behavior, Scenario, behavior_from_table, chsh_value, correlators
from .errors import BadAlpha, BadNormalization, BadVector, BadW, DimensionMismatch
from .quantum_kernel import (
    I2,
    PHI_PLUS,
    SX,
    DensityMatrix,
    DichotomicObservable,
    TwoQubitState,
    bloch_behavior,
    bloch_operator,
    born_behavior,
    ket,
    partial_trace,
    two_qubit_decompose,
)

X_HAT = np.array([1.0, 0.0, 0.0])
Y_HAT = np.array([0.0, 1.0, 0.0])
Z_HAT = np.array([0.0, 0.0, 1.0])


def _unit(v, name: str = "vector") -> np.ndarray:
    v = np.asarray(v, dtype=float).reshape(3)
    n = np.linalg.norm(v)
    if abs(n - 1) > 1e-10:
        raise BadVector(f"{name} must be a unit vector (norm {n:.12g})")
    return v


@dataclass(frozen=True)
class ChshSettings:
    a0: np.ndarray
    a1: np.ndarray
    b0: np.ndarray
    b1: np.ndarray

    def __post_init__(self):
        for name in ("a0", "a1", "b0", "b1"):
            object.__setattr__(self, name, _unit(getattr(self, name), name))

    @property
    def alice(self) -> list[np.ndarray]:
        return [self.a0, self.a1]

    @property
    def bob(self) -> list[np.ndarray]:
        return [self.b0, self.b1]

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in ("a0", "a1", "b0", "b1")}

    @classmethod
    def from_dict(cls, d: dict) -> "ChshSettings":
        return cls(d["a0"], d["a1"], d["b0"], d["b1"])


PAULI_OPTIMAL = ChshSettings(Z_HAT, X_HAT, (Z_HAT + X_HAT) / np.sqrt(2), (Z_HAT - X_HAT) / np.sqrt(2))


def chsh_operator(A0, A1, B0, B1) -> np.ndarray:
    """A0⊗(B0+B1) + A1⊗(B0−B1)."""
    mats = [o.matrix if isinstance(o, DichotomicObservable) else np.asarray(o) for o in (A0, A1, B0, B1)]
    a0, a1, b0, b1 = mats
    if a0.shape != a1.shape or b0.shape != b1.shape:
        raise DimensionMismatch("each party's observables must share a dimension")
    return np.kron(a0, b0 + b1) + np.kron(a1, b0 - b1)


def tsirelson_norm(A0, A1, B0, B1) -> float:
    """Operator norm of the CHSH operator."""
    S = chsh_operator(A0, A1, B0, B1)
    w = np.linalg.eigvalsh((S + S.conj().T) / 2)
    return float(np.max(np.abs(w)))


def born_chsh(rho: DensityMatrix, settings: ChshSettings) -> float:
    """CHSH of projective Bloch measurements on a two-qubit state."""
    return chsh_value(correlators(bloch_behavior(rho, settings.alice, settings.bob)))


# ---------------------------------------------------------------------------
# Two-qubit optimum

_PREFERENCE = (Z_HAT, X_HAT, Y_HAT)


def _pick(space: np.ndarray, order) -> np.ndarray:
    """Deterministic unit vector from the span of ``space``'s columns.

    Projects the axes in ``order`` onto the span and keeps the largest
    projection, earlier axes winning ties.
    """
    best, best_norm = None, -1.0
    for axis in order:
        p = space @ (space.T @ axis)
        n = np.linalg.norm(p)
        if n > 1e-12 and n > best_norm + 1e-9:
            best, best_norm = p / n, n
    return best


def _top_directions(T: np.ndarray) -> tuple[np.ndarray, np.ndarray, float, float]:
    w, v = np.linalg.eigh(T.T @ T)
    w = np.clip(w, 0.0, None)
    tol = 1e-9 * max(1.0, w[-1])
    top = v[:, np.abs(w - w[-1]) <= tol]
    c = _pick(top, _PREFERENCE)
    # Second direction: inside the top eigenspace if degenerate, otherwise
    # in the eigenspace of the second eigenvalue.
    lam2 = w[-2] if top.shape[1] == 1 else w[-1]
    space = v[:, np.abs(w - lam2) <= tol]
    space = space - np.outer(c, c @ space)
    u, sv, _ = np.linalg.svd(space, full_matrices=False)
    cp = _pick(u[:, sv > 1e-9], (X_HAT, Y_HAT, Z_HAT))
    return c, cp, float(w[-1]), float(lam2)


def _orthogonal_to(v: np.ndarray) -> np.ndarray:
    axis = X_HAT if abs(v[0]) < 0.9 else Y_HAT
    u = axis - (axis @ v) * v
    return u / np.linalg.norm(u)


@dataclass(frozen=True)
class HorodeckiResult:
    s_max: float
    settings: ChshSettings

    def to_dict(self) -> dict:
        return {"s_max": self.s_max, "settings": self.settings.to_dict()}


def horodecki_max_chsh(st: TwoQubitState | DensityMatrix) -> HorodeckiResult:
    """Maximal correlator CHSH 2√(λ1+λ2) of TᵀT together with optimal settings.

    Degenerate spectra are resolved deterministically, preferring ẑ then x̂
    for the first direction and x̂ then ŷ for the second.
    """
    if isinstance(st, DensityMatrix):
        st = two_qubit_decompose(st)
    T = st.T
    c, cp, lam1, lam2 = _top_directions(T)
    s_max = 2.0 * np.sqrt(lam1 + lam2)
    tc, tcp = T @ c, T @ cp
    n1, n2 = np.linalg.norm(tc), np.linalg.norm(tcp)
    if n1 <= 1e-12:
        # T = 0: every setting gives zero correlators.
        return HorodeckiResult(0.0, ChshSettings(Z_HAT, X_HAT, Z_HAT, X_HAT))
    a0 = tc / n1
    a1 = tcp / n2 if n2 > 1e-12 else _orthogonal_to(a0)
    cos_chi = n1 / np.hypot(n1, n2)
    sin_chi = n2 / np.hypot(n1, n2)
    b0 = cos_chi * c + sin_chi * cp
    b1 = cos_chi * c - sin_chi * cp
    return HorodeckiResult(float(s_max), ChshSettings(a0, a1, b0 / np.linalg.norm(b0), b1 / np.linalg.norm(b1)))


def pure_state_max_chsh(theta: float) -> float:
    """2√(1 + sin²2θ) for cos θ|00> + sin θ|11>."""
    return float(2.0 * np.sqrt(1.0 + np.sin(2 * theta) ** 2))


# ---------------------------------------------------------------------------
# Embedding a pure state of any dimension


@dataclass(frozen=True)
class SchmidtCoeffs:
    c: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).ravel()
        if c.size < 2:
            raise BadNormalization("need at least two Schmidt coefficients")
        if np.any(c < 0) or np.any(np.diff(c) > 1e-15):
            raise BadNormalization("Schmidt coefficients must be nonnegative and descending")
        if abs(np.sum(c**2) - 1) > 1e-10:
            raise BadNormalization("Schmidt coefficients must satisfy Σc² = 1")
        c.setflags(write=False)
        object.__setattr__(self, "c", c)

    @property
    def dim(self) -> int:
        return self.c.size

    def state(self) -> np.ndarray:
        d = self.dim
        psi = np.zeros(d * d, dtype=complex)
        for k, ck in enumerate(self.c):
            psi[k * d + k] = ck
        return psi


@dataclass(frozen=True)
class GisinResult:
    alice: tuple[DichotomicObservable, DichotomicObservable]
    bob: tuple[DichotomicObservable, DichotomicObservable]
    theta: float
    s_value: float  # closed form
    s_born: float  # Born rule on the full state


def _embed(n, d: int) -> DichotomicObservable:
    m = np.eye(d, dtype=complex)
    m[:2, :2] = bloch_operator(n)
    return DichotomicObservable(m)


def gisin_embedding(c: SchmidtCoeffs) -> GisinResult:
    """Qubit-optimal settings on span(|0>,|1>), identity on the rest."""
    if not isinstance(c, SchmidtCoeffs):
        c = SchmidtCoeffs(c)
    d = c.dim
    c0, c1 = c.c[0], c.c[1]
    w2 = c0**2 + c1**2
    theta = float(np.arccos(c0 / np.sqrt(w2)))
    qubit = DensityMatrix.pure(np.cos(theta) * ket(0, 0) + np.sin(theta) * ket(1, 1))
    settings = horodecki_max_chsh(qubit).settings
    alice = (_embed(settings.a0, d), _embed(settings.a1, d))
    bob = (_embed(settings.b0, d), _embed(settings.b1, d))
    s_formula = w2 * pure_state_max_chsh(theta) + (1 - w2) * 2.0
    b = born_behavior(DensityMatrix.pure(c.state()), list(alice), list(bob))
    return GisinResult(alice, bob, theta, float(s_formula), chsh_value(correlators(b)))


# ---------------------------------------------------------------------------
# Werner and singlet statistics


def werner_behavior(W: float, alice_dirs, bob_dirs) -> Behavior:
    """¼(1 − W ab â·b̂) for Bloch directions â (Alice) and b̂ (Bob)."""
    if not 0.0 <= W <= 1.0:
        raise BadW(f"W must lie in [0, 1], got {W}")
    A = np.array([_unit(a, "alice direction") for a in alice_dirs])
    B = np.array([_unit(b, "bob direction") for b in bob_dirs])
    dots = A @ B.T
    sign = np.array([[1.0, -1.0], [-1.0, 1.0]])
    table = 0.25 * (1.0 - W * dots[:, :, None, None] * sign[None, None])
    return behavior_from_table(Scenario(len(A), 2, len(B), 2), table)


def singlet_behavior(alice_dirs, bob_dirs) -> Behavior:
    return werner_behavior(1.0, alice_dirs, bob_dirs)


# ---------------------------------------------------------------------------
# GHZ conditional violation


@dataclass(frozen=True)
class GhzConditional:
    probabilities: dict[int, float]
    behaviors: dict[int, Behavior]
    s_values: dict[int, float]
    unconditioned: Behavior
    settings: ChshSettings


def ghz_conditional_chsh() -> GhzConditional:
    """Charlie measures σx on (|000>+|111>)/√2; Alice and Bob use Φ+-optimal settings."""
    ghz = (ket(0, 0, 0) + ket(1, 1, 1)) / np.sqrt(2)
    rho = np.outer(ghz, ghz.conj())
    settings = horodecki_max_chsh(DensityMatrix.pure(PHI_PLUS)).settings
    probs, behaviors, s_values = {}, {}, {}
    for c in (+1, -1):
        proj = np.kron(np.eye(4), (I2 + c * SX) / 2)
        sub = proj @ rho @ proj
        p = float(np.trace(sub).real)
        rho_ab = partial_trace(sub / p, [0, 1], [2, 2, 2])
        probs[c] = p
        behaviors[c] = bloch_behavior(rho_ab, settings.alice, settings.bob)
        s_values[c] = chsh_value(correlators(behaviors[c]))
    uncond = partial_trace(DensityMatrix(rho), [0, 1], [2, 2, 2])
    return GhzConditional(probs, behaviors, s_values, bloch_behavior(uncond, settings.alice, settings.bob), settings)


# ---------------------------------------------------------------------------
# 2 ⊗ 2 ⊗ 3 example with fixed two-party marginals


@dataclass(frozen=True)
class TripartiteResult:
    psi: np.ndarray
    residual_ac: float
    residual_bc: float
    s_ab: float


def tripartite_target(alpha: float) -> np.ndarray:
    """½|ψ1><ψ1| + ½|ψ2><ψ2| on qubit ⊗ qutrit."""
    dims = [2, 3]
    psi1 = np.sin(alpha) * ket(0, 0, dims=dims) + np.cos(alpha) * ket(1, 2, dims=dims)
    psi2 = np.sin(alpha) * ket(1, 1, dims=dims) + np.cos(alpha) * ket(0, 2, dims=dims)
    return 0.5 * np.outer(psi1, psi1.conj()) + 0.5 * np.outer(psi2, psi2.conj())


def tripartite_unique_state(alpha: float) -> TripartiteResult:
    if not 0.0 < alpha < np.pi / 2:
        raise BadAlpha("alpha must lie strictly between 0 and π/2")
    dims = [2, 2, 3]
    psi = np.cos(alpha) * (ket(0, 1, 2, dims=dims) + ket(1, 0, 2, dims=dims)) / np.sqrt(2) + np.sin(alpha) * (
        ket(0, 0, 0, dims=dims) + ket(1, 1, 1, dims=dims)
    ) / np.sqrt(2)
    rho = DensityMatrix.pure(psi)
    target = tripartite_target(alpha)
    r_ac = float(np.max(np.abs(partial_trace(rho, [0, 2], dims).matrix - target)))
    r_bc = float(np.max(np.abs(partial_trace(rho, [1, 2], dims).matrix - target)))
    s_ab = horodecki_max_chsh(partial_trace(rho, [0, 1], dims)).s_max
    return TripartiteResult(psi, r_ac, r_bc, s_ab)
