"""Small dense quantum linear algebra.

Matrices are plain complex numpy arrays. The validated wrappers
(:class:`DensityMatrix`, :class:`DichotomicObservable`, :class:`TwoQubitState`)
check their invariants once on construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core_stats import Behavior, Scenario, behavior_from_table
from .errors import (
    BadFactorization,
    DimensionMismatch,
    InvalidPovm,
    InvalidState,
    NotDichotomic,
)

MAX_DIM = 256

I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (SX, SY, SZ)


def as_matrix(m) -> np.ndarray:
    arr = np.asarray(m, dtype=complex)
    if arr.ndim != 2:
        raise DimensionMismatch("expected a 2-D matrix")
    return arr


def is_hermitian(m, tol: float = 1e-10) -> bool:
    m = as_matrix(m)
    return m.shape[0] == m.shape[1] and np.max(np.abs(m - m.conj().T), initial=0.0) <= tol


def is_unitary(m, tol: float = 1e-10) -> bool:
    m = as_matrix(m)
    return m.shape[0] == m.shape[1] and np.max(np.abs(m @ m.conj().T - np.eye(m.shape[0])), initial=0.0) <= tol


def is_psd(m, tol: float = 1e-10) -> bool:
    m = as_matrix(m)
    if not is_hermitian(m, max(tol, 1e-10)):
        return False
    return bool(np.linalg.eigvalsh((m + m.conj().T) / 2).min() >= -tol)


def matrix_to_json(m) -> list:
    m = as_matrix(m)
    return [[[float(v.real), float(v.imag)] for v in row] for row in m]


def matrix_from_json(data) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.ndim == 3 and arr.shape[-1] == 2:
        return arr[..., 0] + 1j * arr[..., 1]
    return arr.astype(complex)


def bloch_operator(n) -> np.ndarray:
    """n·σ for a real 3-vector n."""
    n = np.asarray(n, dtype=float)
    return n[0] * SX + n[1] * SY + n[2] * SZ


def kron(*ops) -> np.ndarray:
    out = np.array([[1.0 + 0j]])
    for op in ops:
        out = np.kron(out, op)
    return out


@dataclass(frozen=True)
class DensityMatrix:
    matrix: np.ndarray

    def __post_init__(self):
        m = as_matrix(self.matrix)
        if m.shape[0] != m.shape[1] or m.shape[0] > MAX_DIM:
            raise InvalidState(f"density matrix must be square with dim <= {MAX_DIM}")
        if not is_hermitian(m, 1e-10):
            raise InvalidState("density matrix is not Hermitian")
        if abs(np.trace(m) - 1) > 1e-10:
            raise InvalidState(f"trace is {np.trace(m).real:.12g}, not 1")
        m = (m + m.conj().T) / 2
        if np.linalg.eigvalsh(m).min() < -1e-10:
            raise InvalidState("density matrix has a negative eigenvalue")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def pure(cls, psi) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex).ravel()
        norm = np.linalg.norm(psi)
        if abs(norm - 1) > 1e-10:
            raise InvalidState(f"state vector has norm {norm:.12g}")
        return cls(np.outer(psi, psi.conj()))

    def expectation(self, op) -> float:
        return float(np.real(np.trace(self.matrix @ as_matrix(op))))

    def to_dict(self) -> dict:
        return {"dim": self.dim, "matrix": matrix_to_json(self.matrix)}

    @classmethod
    def from_dict(cls, d: dict) -> "DensityMatrix":
        return cls(matrix_from_json(d["matrix"]))


@dataclass(frozen=True)
class DichotomicObservable:
    """Hermitian matrix with eigenvalues ±1."""

    matrix: np.ndarray

    def __post_init__(self):
        m = as_matrix(self.matrix)
        if not is_hermitian(m, 1e-9):
            raise NotDichotomic("observable is not Hermitian")
        if np.max(np.abs(m @ m - np.eye(m.shape[0])), initial=0.0) > 1e-9:
            raise NotDichotomic("observable does not square to the identity")
        m = (m + m.conj().T) / 2
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def bloch(cls, n) -> "DichotomicObservable":
        n = np.asarray(n, dtype=float)
        return cls(bloch_operator(n / np.linalg.norm(n)))

    def projectors(self) -> list[np.ndarray]:
        """[Π(+1), Π(-1)], matching outcome indices 0 and 1."""
        eye = np.eye(self.dim)
        return [(eye + self.matrix) / 2, (eye - self.matrix) / 2]


def _check_povms(povms, dim: int, who: str) -> list[list[np.ndarray]]:
    out = []
    n_out = None
    for x, setting in enumerate(povms):
        if isinstance(setting, DichotomicObservable):
            setting = setting.projectors()
        elems = [as_matrix(e) for e in setting]
        if n_out is None:
            n_out = len(elems)
        elif len(elems) != n_out:
            raise InvalidPovm(f"{who}: every setting needs the same number of outcomes")
        for e in elems:
            if e.shape != (dim, dim):
                raise DimensionMismatch(f"{who}: POVM element has shape {e.shape}, expected {(dim, dim)}")
            if not is_psd(e, 1e-9):
                raise InvalidPovm(f"{who}: POVM element for setting {x} is not positive")
        if np.max(np.abs(sum(elems) - np.eye(dim))) > 1e-9:
            raise InvalidPovm(f"{who}: POVM elements of setting {x} do not sum to identity")
        out.append(elems)
    if not out:
        raise InvalidPovm(f"{who}: no settings given")
    return out


def born_behavior(rho: DensityMatrix, alice_povms, bob_povms, dims: tuple[int, int] | None = None) -> Behavior:
    """P(a,b|x,y) = Tr(ρ E_a^x ⊗ F_b^y).

    Each party's measurements are a list over settings of POVM element lists
    (or :class:`DichotomicObservable`, read as its two projectors).
    """
    def first_dim(povms):
        s = povms[0]
        return s.dim if isinstance(s, DichotomicObservable) else as_matrix(s[0]).shape[0]

    da, db = dims if dims is not None else (first_dim(alice_povms), first_dim(bob_povms))
    if da * db != rho.dim:
        raise DimensionMismatch(f"local dimensions {da}x{db} do not match state dimension {rho.dim}")
    A = np.array(_check_povms(alice_povms, da, "alice"))  # [x, a, i, j]
    B = np.array(_check_povms(bob_povms, db, "bob"))  # [y, b, k, l]
    r = rho.matrix.reshape(da, db, da, db)
    table = np.real(np.einsum("ikjl,xaji,yblk->xyab", r, A, B, optimize=True))
    s = Scenario(A.shape[0], A.shape[1], B.shape[0], B.shape[1])
    return behavior_from_table(s, table)


def bloch_behavior(rho: DensityMatrix, alice_dirs, bob_dirs) -> Behavior:
    """Born behavior for projective qubit measurements along Bloch directions."""
    alice = [DichotomicObservable.bloch(a) for a in alice_dirs]
    bob = [DichotomicObservable.bloch(b) for b in bob_dirs]
    return born_behavior(rho, alice, bob)


# ---------------------------------------------------------------------------
# Two-qubit states


@dataclass(frozen=True)
class TwoQubitState:
    """ρ = ¼(1⊗1 + r·σ⊗1 + 1⊗s·σ + Σ T_ij σ_i⊗σ_j)."""

    r: np.ndarray
    s: np.ndarray
    T: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float).reshape(3)
        s = np.asarray(self.s, dtype=float).reshape(3)
        T = np.asarray(self.T, dtype=float).reshape(3, 3)
        if np.linalg.norm(r) > 1 + 1e-9 or np.linalg.norm(s) > 1 + 1e-9:
            raise InvalidState("Bloch vectors must have norm <= 1")
        if np.linalg.svd(T, compute_uv=False).max() > 1 + 1e-9:
            raise InvalidState("correlation matrix has a singular value above 1")
        for arr in (r, s, T):
            arr.setflags(write=False)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "T", T)
        m = self._matrix()
        if np.linalg.eigvalsh(m).min() < -1e-9:
            raise InvalidState("(r, s, T) does not describe a positive operator")

    def _matrix(self) -> np.ndarray:
        m = np.kron(I2, I2).astype(complex)
        for i in range(3):
            m += self.r[i] * np.kron(PAULIS[i], I2) + self.s[i] * np.kron(I2, PAULIS[i])
            for j in range(3):
                m += self.T[i, j] * np.kron(PAULIS[i], PAULIS[j])
        return m / 4

    def compose(self) -> DensityMatrix:
        m = self._matrix()
        w, v = np.linalg.eigh(m)
        if w.min() < 0:
            m = (v * np.maximum(w, 0)) @ v.conj().T
            m /= np.trace(m).real
        return DensityMatrix(m)

    def to_dict(self) -> dict:
        return {"r": self.r.tolist(), "s": self.s.tolist(), "T": self.T.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "TwoQubitState":
        return cls(d["r"], d["s"], d["T"])


def two_qubit_decompose(rho: DensityMatrix) -> TwoQubitState:
    if rho.dim != 4:
        raise InvalidState("two-qubit decomposition needs a 4x4 density matrix")
    m = rho.matrix
    r = [np.real(np.trace(m @ np.kron(p, I2))) for p in PAULIS]
    s = [np.real(np.trace(m @ np.kron(I2, p))) for p in PAULIS]
    T = [[np.real(np.trace(m @ np.kron(p, q))) for q in PAULIS] for p in PAULIS]
    return TwoQubitState(np.array(r), np.array(s), np.array(T))


def two_qubit_compose(st: TwoQubitState) -> DensityMatrix:
    return st.compose()


# ---------------------------------------------------------------------------
# Partial operations


def _check_dims(dim: int, dims) -> list[int]:
    dims = [int(d) for d in dims]
    if any(d < 1 for d in dims) or int(np.prod(dims)) != dim:
        raise BadFactorization(f"factors {dims} do not multiply to {dim}")
    return dims


def partial_transpose(rho, subsystem: int = 1, dims=(2, 2)) -> np.ndarray:
    m = rho.matrix if isinstance(rho, DensityMatrix) else as_matrix(rho)
    dims = _check_dims(m.shape[0], dims)
    n = len(dims)
    if not 0 <= subsystem < n:
        raise BadFactorization(f"subsystem {subsystem} out of range")
    t = m.reshape(dims + dims)
    axes = list(range(2 * n))
    axes[subsystem], axes[n + subsystem] = axes[n + subsystem], axes[subsystem]
    return t.transpose(axes).reshape(m.shape)


def is_ppt(rho, dims=(2, 2), tol: float = 1e-10) -> bool:
    pt = partial_transpose(rho, 1, dims)
    return bool(np.linalg.eigvalsh((pt + pt.conj().T) / 2).min() >= -tol)


def partial_trace(rho, keep, dims) -> DensityMatrix:
    """Reduce to the subsystems listed in ``keep`` (kept in increasing order)."""
    m = rho.matrix if isinstance(rho, DensityMatrix) else as_matrix(rho)
    dims = _check_dims(m.shape[0], dims)
    n = len(dims)
    keep = sorted(set(int(k) for k in keep))
    if any(not 0 <= k < n for k in keep):
        raise BadFactorization(f"keep list {keep} out of range")
    letters = "abcdefghijklmnopqrstuvwxyz"
    rows = list(letters[:n])
    cols = list(letters[n:2 * n])
    for k in range(n):
        if k not in keep:
            cols[k] = rows[k]
    out = "".join(rows[k] for k in keep) + "".join(cols[k] for k in keep)
    reduced = np.einsum("".join(rows) + "".join(cols) + "->" + out, m.reshape(dims + dims))
    d = int(np.prod([dims[k] for k in keep]))
    return DensityMatrix(reduced.reshape(d, d))


# ---------------------------------------------------------------------------
# Jordan blocks


@dataclass(frozen=True)
class JordanBlock:
    indices: tuple[int, ...]  # columns of the basis spanning the block
    omega: complex  # eigenvalue of A0·A1 on the first basis vector


@dataclass(frozen=True)
class JordanDecomposition:
    basis: np.ndarray  # unitary U, columns are the new basis
    blocks: tuple[JordanBlock, ...]

    def block_matrices(self, A) -> np.ndarray:
        A = A.matrix if isinstance(A, DichotomicObservable) else as_matrix(A)
        return self.basis.conj().T @ A @ self.basis

    def block_dims(self) -> list[int]:
        return [len(b.indices) for b in self.blocks]


def jordan_blocks(A0: DichotomicObservable, A1: DichotomicObservable, tol: float = 1e-8) -> JordanDecomposition:
    """Common block diagonalization of two ±1 observables into blocks of size <= 2.

    K = A0A1 + A1A0 commutes with both observables, so each of its eigenspaces
    is invariant. Where K = ±2 the observables commute up to sign and split
    into 1x1 blocks. Elsewhere the Hermitian part i(A1A0 - A0A1)/2 separates
    the eigenvalues ω and ω* of U = A0A1; each eigenvector |α,0> for the
    eigenvalue with positive imaginary part pairs with |α,1> = A0|α,0>.
    In that basis A0 = σx and A1 = Re(ω)σx + Im(ω)σy.
    """
    if not isinstance(A0, DichotomicObservable) or not isinstance(A1, DichotomicObservable):
        raise NotDichotomic("jordan_blocks needs DichotomicObservable inputs")
    if A0.dim != A1.dim:
        raise DimensionMismatch("observables act on different dimensions")
    a0, a1 = A0.matrix, A1.matrix
    U = a0 @ a1
    K = U + U.conj().T
    G = (U - U.conj().T) / 2j
    kw, kv = np.linalg.eigh((K + K.conj().T) / 2)

    # Cluster eigenvalues of K.
    clusters = []
    start = 0
    for i in range(1, len(kw) + 1):
        if i == len(kw) or kw[i] - kw[i - 1] > tol:
            clusters.append((kw[start:i].mean(), kv[:, start:i]))
            start = i

    cols = []
    blocks = []
    for kappa, V in clusters:
        if abs(abs(kappa) - 2) <= 1e-6:
            sub = V.conj().T @ a0 @ V
            w, v = np.linalg.eigh((sub + sub.conj().T) / 2)
            omega = 1.0 if kappa > 0 else -1.0
            for j in range(V.shape[1]):
                cols.append(V @ v[:, j])
                blocks.append(JordanBlock((len(cols) - 1,), complex(omega)))
            continue
        sub = V.conj().T @ G @ V
        w, v = np.linalg.eigh((sub + sub.conj().T) / 2)
        pos = v[:, w > 0]
        if 2 * pos.shape[1] != V.shape[1]:
            raise NotDichotomic("eigenspaces of A0A1 do not pair up; inputs are not dichotomic")
        for j in range(pos.shape[1]):
            e0 = V @ pos[:, j]
            e1 = a0 @ e0
            omega = complex(np.vdot(e0, U @ e0))
            cols.extend([e0, e1])
            blocks.append(JordanBlock((len(cols) - 2, len(cols) - 1), omega))
    basis = np.column_stack(cols)
    return JordanDecomposition(basis, tuple(blocks))


# ---------------------------------------------------------------------------
# Named states and random generators


def ket(*digits: int, dims=None) -> np.ndarray:
    dims = dims or [2] * len(digits)
    idx = int(np.ravel_multi_index(digits, dims))
    v = np.zeros(int(np.prod(dims)), dtype=complex)
    v[idx] = 1.0
    return v


PHI_PLUS = (ket(0, 0) + ket(1, 1)) / np.sqrt(2)
PHI_MINUS = (ket(0, 0) - ket(1, 1)) / np.sqrt(2)
PSI_PLUS = (ket(0, 1) + ket(1, 0)) / np.sqrt(2)
SINGLET = (ket(0, 1) - ket(1, 0)) / np.sqrt(2)


def psi_theta(theta: float) -> np.ndarray:
    """cos θ|00> + sin θ|11>."""
    return np.cos(theta) * ket(0, 0) + np.sin(theta) * ket(1, 1)


def werner_state(W: float) -> DensityMatrix:
    """W |Ψ-><Ψ-| + (1 - W) 1/4."""
    return DensityMatrix(W * np.outer(SINGLET, SINGLET.conj()) + (1 - W) * np.eye(4) / 4)


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_density_matrix(d: int, rng: np.random.Generator, rank: int | None = None) -> DensityMatrix:
    k = rank or d
    g = rng.standard_normal((d, k)) + 1j * rng.standard_normal((d, k))
    m = g @ g.conj().T
    return DensityMatrix(m / np.trace(m).real)


def random_dichotomic(d: int, rng: np.random.Generator) -> DichotomicObservable:
    u = random_unitary(d, rng)
    signs = rng.choice([-1.0, 1.0], size=d)
    return DichotomicObservable(u @ np.diag(signs) @ u.conj().T)


def random_unit_vector(rng: np.random.Generator) -> np.ndarray:
    cos_t = rng.uniform(-1, 1)
    phi = rng.uniform(0, 2 * np.pi)
    sin_t = np.sqrt(1 - cos_t**2)
    return np.array([sin_t * np.cos(phi), sin_t * np.sin(phi), cos_t])
