"""Self-testing: Mayers–Yao conditions and the swap-isometry extraction circuit.

The extraction appends a qubit ancilla on each side, A' before A and B' after
B, and runs H, controlled-Z, H, controlled-X with the ancilla as control. For
a state that is locally equivalent to |Φ+> with matching observables, the
ancillas end up in |Φ+> and the original systems in a junk state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadNormalization, DimensionMismatch, InvalidState, MissingDb
from .quantum_kernel import PHI_PLUS, SX, SZ, DensityMatrix, DichotomicObservable, as_matrix

MAX_SIDE_DIM = 8
_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_P0 = np.diag([1.0, 0.0]).astype(complex)
_P1 = np.diag([0.0, 1.0]).astype(complex)
_PAULI_BY_LABEL = {"1": np.eye(2, dtype=complex), "x": SX, "z": SZ}


@dataclass(frozen=True)
class SelfTestInstance:
    """State on A⊗B (vector or density matrix) with the observables under test."""

    psi: np.ndarray
    za: DichotomicObservable
    xa: DichotomicObservable
    zb: DichotomicObservable
    xb: DichotomicObservable
    db: DichotomicObservable | None = None

    def __post_init__(self):
        da, db = self.za.dim, self.zb.dim
        if self.xa.dim != da or self.xb.dim != db or (self.db is not None and self.db.dim != db):
            raise DimensionMismatch("observables of one party must share a dimension")
        if max(da, db) > MAX_SIDE_DIM:
            raise DimensionMismatch(f"local dimension is capped at {MAX_SIDE_DIM}")
        psi = np.asarray(self.psi, dtype=complex)
        if psi.ndim == 1:
            if psi.size != da * db:
                raise DimensionMismatch(f"state has {psi.size} amplitudes, expected {da * db}")
            if abs(np.linalg.norm(psi) - 1) > 1e-10:
                raise InvalidState("state vector is not normalized")
        else:
            psi = DensityMatrix(psi).matrix.copy()
            if psi.shape[0] != da * db:
                raise DimensionMismatch(f"state has dimension {psi.shape[0]}, expected {da * db}")
        psi.setflags(write=False)
        object.__setattr__(self, "psi", psi)

    @property
    def dims(self) -> tuple[int, int]:
        return self.za.dim, self.zb.dim

    @property
    def is_pure(self) -> bool:
        return self.psi.ndim == 1

    def expectation(self, op) -> float:
        op = as_matrix(op)
        if self.is_pure:
            return float(np.real(np.vdot(self.psi, op @ self.psi)))
        return float(np.real(np.trace(self.psi @ op)))

    def rotated(self, ua, ub) -> "SelfTestInstance":
        """The same instance seen through local unitaries ua ⊗ ub."""
        ua, ub = as_matrix(ua), as_matrix(ub)
        u = np.kron(ua, ub)
        psi = u @ self.psi if self.is_pure else u @ self.psi @ u.conj().T

        def conj(o, w):
            return None if o is None else DichotomicObservable(w @ o.matrix @ w.conj().T)

        return SelfTestInstance(psi, conj(self.za, ua), conj(self.xa, ua), conj(self.zb, ub),
                                conj(self.xb, ub), conj(self.db, ub))


@dataclass(frozen=True)
class MayersYaoResiduals:
    r1: float
    r2: float
    r3: float

    def to_dict(self) -> dict:
        return {"r1": self.r1, "r2": self.r2, "r3": self.r3}


def mayers_yao_residuals(inst: SelfTestInstance) -> MayersYaoResiduals:
    """Deviations from <ZZ> = <XX> = 1, <XZ> = <ZX> = 0 and <ZD> = <XD> = 1/√2."""
    if inst.db is None:
        raise MissingDb("the Mayers–Yao test needs Bob's third observable")

    def e(a, b):
        return inst.expectation(np.kron(a.matrix, b.matrix))

    r = 1 / np.sqrt(2)
    return MayersYaoResiduals(
        float(max(abs(e(inst.za, inst.zb) - 1), abs(e(inst.xa, inst.xb) - 1))),
        float(max(abs(e(inst.xa, inst.zb)), abs(e(inst.za, inst.xb)))),
        float(max(abs(e(inst.za, inst.db) - r), abs(e(inst.xa, inst.db) - r))),
    )


def anticommutator_residual(inst: SelfTestInstance) -> float:
    """‖(Z_A X_A + X_A Z_A) ⊗ 1 |ψ>‖ for a pure instance."""
    if not inst.is_pure:
        raise InvalidState("anticommutation on the state needs a pure instance")
    z, x = inst.za.matrix, inst.xa.matrix
    op = np.kron(z @ x + x @ z, np.eye(inst.dims[1]))
    return float(np.linalg.norm(op @ inst.psi))


def _controlled(m: np.ndarray) -> np.ndarray:
    """|0><0| ⊗ 1 + |1><1| ⊗ M with the control qubit first."""
    return np.kron(_P0, np.eye(m.shape[0])) + np.kron(_P1, m)


def _side_isometry(z: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Map from a d-dim system to ancilla ⊗ system, ancilla starting in |0>."""
    d = z.shape[0]
    h = np.kron(_H, np.eye(d))
    u = _controlled(x) @ h @ _controlled(z) @ h
    return u[:, :d]  # columns with the ancilla in |0>


def swap_matrix(inst: SelfTestInstance) -> np.ndarray:
    """The full isometry from A⊗B to A'⊗A⊗B⊗B'."""
    da, db = inst.dims
    va = _side_isometry(inst.za.matrix, inst.xa.matrix)  # (A', A) x A
    vb = _side_isometry(inst.zb.matrix, inst.xb.matrix)  # (B', B) x B
    vb = vb.reshape(2, db, db).transpose(1, 0, 2).reshape(2 * db, db)  # (B, B') x B
    return np.kron(va, vb)


@dataclass(frozen=True)
class ExtractionResult:
    reduced: DensityMatrix
    fidelity: float
    junk_norm: float
    output_norm: float
    target: np.ndarray
    junk: np.ndarray | None = None

    def to_dict(self) -> dict:
        return {
            "reduced_AprimeBprime": self.reduced.to_dict(),
            "fidelity_phi_plus": self.fidelity,
            "junk_norm": self.junk_norm,
            "output_norm": self.output_norm,
        }


def _operator(inst: SelfTestInstance, label: str, party: str) -> np.ndarray:
    d = inst.dims[0 if party == "A" else 1]
    if label == "1":
        return np.eye(d, dtype=complex)
    table = {("A", "z"): inst.za, ("A", "x"): inst.xa, ("B", "z"): inst.zb, ("B", "x"): inst.xb}
    return table[(party, label)].matrix


def swap_isometry(inst: SelfTestInstance, operator_pair: tuple[str, str] | None = None) -> ExtractionResult:
    """Run the extraction circuit and compare A'B' with the expected two-qubit state.

    ``operator_pair`` = (m, n) with labels in {'1', 'x', 'z'} first applies
    M_A ⊗ N_B from the instance; the target then becomes σ_m ⊗ σ_n |Φ+>.
    """
    da, db = inst.dims
    m, n = operator_pair if operator_pair is not None else ("1", "1")
    for label in (m, n):
        if label not in _PAULI_BY_LABEL:
            raise ValueError(f"unknown operator label {label!r}; use '1', 'x' or 'z'")
    target = np.kron(_PAULI_BY_LABEL[m], _PAULI_BY_LABEL[n]) @ PHI_PLUS
    pre = np.kron(_operator(inst, m, "A"), _operator(inst, n, "B"))
    v = swap_matrix(inst)
    # Output index order: A', A, B, B'.
    if inst.is_pure:
        out = (v @ (pre @ inst.psi)).reshape(2, da, db, 2)
        norm = float(np.linalg.norm(out))
        rho = np.einsum("iabj,kabl->ijkl", out, out.conj()).reshape(4, 4)
        t = target.reshape(2, 2)
        junk = np.einsum("ij,iabj->ab", t.conj(), out).ravel()
        junk_norm = float(np.linalg.norm(junk))
    else:
        r = v @ pre @ inst.psi @ pre.conj().T @ v.conj().T
        norm = float(np.sqrt(abs(np.trace(r))))
        r = r.reshape(2, da, db, 2, 2, da, db, 2)
        rho = np.einsum("iabjkabl->ijkl", r).reshape(4, 4)
        junk = None
        junk_norm = float(np.sqrt(max(np.real(np.vdot(target, rho @ target)), 0.0)))
    fidelity = float(np.clip(np.real(np.vdot(target, rho @ target)), 0.0, 1.0))
    rho = (rho + rho.conj().T) / 2
    return ExtractionResult(DensityMatrix(rho / np.trace(rho).real), fidelity, junk_norm, norm, target, junk)


def direct_sum_singlet_state(c) -> SelfTestInstance:
    """Σ_k c_k (|2k,2k> + |2k+1,2k+1>)/√2 with block-diagonal Pauli observables."""
    c = np.asarray(c, dtype=complex).ravel()
    if c.size < 1 or c.size > MAX_SIDE_DIM // 2:
        raise DimensionMismatch(f"between 1 and {MAX_SIDE_DIM // 2} blocks are supported")
    if abs(np.vdot(c, c).real - 1) > 1e-10:
        raise BadNormalization("block amplitudes must have unit norm")
    k = c.size
    d = 2 * k
    psi = np.zeros((d, d), dtype=complex)
    for j, cj in enumerate(c):
        psi[2 * j, 2 * j] = psi[2 * j + 1, 2 * j + 1] = cj / np.sqrt(2)
    z = np.kron(np.eye(k), SZ)
    x = np.kron(np.eye(k), SX)
    dmat = (z + x) / np.sqrt(2)
    obs = DichotomicObservable
    return SelfTestInstance(psi.ravel(), obs(z), obs(x), obs(z), obs(x), obs(dmat))


@dataclass(frozen=True)
class ProbeResult:
    s_value: float
    fidelity: float

    def to_dict(self) -> dict:
        return {"s_value": self.s_value, "fidelity": self.fidelity}


def chsh_self_test_probe(inst: SelfTestInstance) -> ProbeResult:
    """CHSH with A0 = Z_A, A1 = X_A, B0,1 = (Z_B ± X_B)/√2, paired with the
    extraction fidelity. The pair is reported without asserting any bound."""
    za, xa = inst.za.matrix, inst.xa.matrix
    b0 = (inst.zb.matrix + inst.xb.matrix) / np.sqrt(2)
    b1 = (inst.zb.matrix - inst.xb.matrix) / np.sqrt(2)
    op = np.kron(za, b0) + np.kron(za, b1) + np.kron(xa, b0) - np.kron(xa, b1)
    return ProbeResult(inst.expectation(op), swap_isometry(inst).fidelity)


def instance_to_dict(inst: SelfTestInstance) -> dict:
    """A pure state is stored under "psi" as [re, im] pairs, a mixed one under "rho"."""
    from .quantum_kernel import matrix_to_json

    out = {}
    if inst.is_pure:
        out["psi"] = [[float(v.real), float(v.imag)] for v in inst.psi]
    else:
        out["rho"] = matrix_to_json(inst.psi)
    for k in ("za", "xa", "zb", "xb", "db"):
        if getattr(inst, k) is not None:
            out[k] = matrix_to_json(getattr(inst, k).matrix)
    return out


def instance_from_dict(d: dict) -> SelfTestInstance:
    """Inverse of :func:`instance_to_dict`; "psi" may also be a plain list of reals."""
    from .quantum_kernel import matrix_from_json

    if "rho" in d:
        state = matrix_from_json(d["rho"])
    else:
        arr = np.asarray(d["psi"], dtype=float)
        if arr.ndim == 2 and arr.shape[1] == 2:
            state = arr[:, 0] + 1j * arr[:, 1]
        elif arr.ndim == 1:
            state = arr.astype(complex)
        else:
            raise InvalidState('"psi" must be a list of amplitudes or [re, im] pairs')
    obs = {k: DichotomicObservable(matrix_from_json(d[k])) for k in ("za", "xa", "zb", "xb")}
    db = DichotomicObservable(matrix_from_json(d["db"])) if d.get("db") is not None else None
    return SelfTestInstance(state, db=db, **obs)
