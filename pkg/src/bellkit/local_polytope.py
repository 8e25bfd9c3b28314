"""Deterministic strategies, LV membership and facets of small polytopes."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import simplex
from .core_stats import (
    BellInequality,
    Behavior,
    Scenario,
    behavior_from_table,
    bell_value,
)
from .errors import (
    DegenerateVertexSet,
    DimensionTooLarge,
    LpNumericalFailure,
    NonBinaryOutcomes,
    TooLarge,
)

DEFAULT_CAP = 10**7
MAX_FACET_DIM = 8


@dataclass(frozen=True)
class DeterministicStrategy:
    """Outcome index for every input: ``a_assign[x]`` and ``b_assign[y]``."""

    a_assign: tuple[int, ...]
    b_assign: tuple[int, ...]

    def to_dict(self) -> dict:
        return {"a_assign": list(self.a_assign), "b_assign": list(self.b_assign)}


@dataclass(frozen=True)
class LvDecomposition:
    weights: dict[int, float]
    strategies: dict[int, DeterministicStrategy]
    max_error: float

    def to_dict(self) -> dict:
        return {
            "weights": [
                {"index": k, "weight": w, **self.strategies[k].to_dict()} for k, w in self.weights.items()
            ],
            "max_error": self.max_error,
        }


@dataclass(frozen=True)
class MembershipVerdict:
    inside: bool
    distance: float
    decomposition: LvDecomposition | None = None
    separating: BellInequality | None = None
    separating_value: float | None = None
    chsh_type: bool = False

    def to_dict(self) -> dict:
        out = {"inside": self.inside, "distance": self.distance}
        if self.decomposition is not None:
            out["decomposition"] = self.decomposition.to_dict()
        if self.separating is not None:
            out["separating"] = {
                **self.separating.to_dict(),
                "value": self.separating_value,
                "chsh_type": self.chsh_type,
            }
        return out


def _check_cap(s: Scenario, cap: int) -> int:
    n = s.deterministic_count()
    if n > cap:
        raise TooLarge(f"{n} deterministic strategies exceed the cap of {cap}")
    return n


def enumerate_deterministic(s: Scenario, cap: int = DEFAULT_CAP) -> list[DeterministicStrategy]:
    """All strategies in lexicographic order of (a_0, ..., b_0, ...)."""
    _check_cap(s, cap)
    ranges = [range(s.ma_outputs)] * s.ma_inputs + [range(s.mb_outputs)] * s.mb_inputs
    return [
        DeterministicStrategy(tuple(t[: s.ma_inputs]), tuple(t[s.ma_inputs:]))
        for t in itertools.product(*ranges)
    ]


def strategy_table(d: DeterministicStrategy, s: Scenario) -> np.ndarray:
    table = np.zeros(s.shape)
    for x, a in enumerate(d.a_assign):
        for y, b in enumerate(d.b_assign):
            table[x, y, a, b] = 1.0
    return table


def strategy_behavior(d: DeterministicStrategy, s: Scenario) -> Behavior:
    if len(d.a_assign) != s.ma_inputs or len(d.b_assign) != s.mb_inputs:
        raise ValueError("strategy does not match the scenario's input counts")
    if max(d.a_assign) >= s.ma_outputs or max(d.b_assign) >= s.mb_outputs:
        raise ValueError("strategy assigns an outcome outside the scenario")
    return behavior_from_table(s, strategy_table(d, s))


def deterministic_matrix(s: Scenario, cap: int = DEFAULT_CAP) -> np.ndarray:
    """Row j is the flattened table of the j-th deterministic strategy."""
    n = _check_cap(s, cap)
    ma, mb = s.ma_inputs, s.mb_inputs
    # Digits of j in mixed radix give the outcome assignment, last input fastest.
    idx = np.arange(n)
    digits = np.empty((n, ma + mb), dtype=np.int64)
    rem = idx.copy()
    for k in range(ma + mb - 1, -1, -1):
        base = s.mb_outputs if k >= ma else s.ma_outputs
        digits[:, k] = rem % base
        rem //= base
    a_onehot = np.eye(s.ma_outputs)[digits[:, :ma]]  # [j, x, a]
    b_onehot = np.eye(s.mb_outputs)[digits[:, ma:]]  # [j, y, b]
    tables = np.einsum("jxa,jyb->jxyab", a_onehot, b_onehot)
    return tables.reshape(n, -1)


def local_bound(ineq: BellInequality, s: Scenario, cap: int = DEFAULT_CAP) -> float:
    """Maximum of a probability-form inequality over deterministic strategies."""
    D = deterministic_matrix(s, cap)
    return float(np.max(D @ ineq.coefficients.ravel()))


def chsh_liftings(s: Scenario) -> list[BellInequality]:
    """Probability-form CHSH variants on every pair of settings of a binary scenario.

    For each pair (x, x') and (y, y') this yields the eight relabelings whose
    correlator form is ±E ± E ± E ± E with an odd number of minus signs.
    """
    if not s.is_binary:
        return []
    ab = np.array([[1.0, -1.0], [-1.0, 1.0]])
    out = []
    for x0, x1 in itertools.combinations(range(s.ma_inputs), 2):
        for y0, y1 in itertools.combinations(range(s.mb_inputs), 2):
            for signs in itertools.product((1.0, -1.0), repeat=4):
                if np.prod(signs) > 0:
                    continue
                coeff = np.zeros(s.shape)
                for (x, y), sg in zip(((x0, y0), (x0, y1), (x1, y0), (x1, y1)), signs):
                    coeff[x, y] = sg * ab
                out.append(BellInequality(coeff, 2.0, 4.0, "probability"))
    return out


def _decompose(P: np.ndarray, D: np.ndarray) -> simplex.LpResult:
    """min t such that |D^T w - P|_inf <= t, w >= 0, sum w = 1."""
    n, R = D.shape
    ones = np.ones((R, 1))
    A_ub = np.vstack([np.hstack([D.T, -ones]), np.hstack([-D.T, -ones])])
    b_ub = np.concatenate([P, -P])
    A_eq = np.concatenate([np.ones(n), [0.0]])[None, :]
    c = np.zeros(n + 1)
    c[-1] = 1.0
    return simplex.linprog(c, A_ub, b_ub, A_eq, [1.0])


def _dual_certificate(P: np.ndarray, D: np.ndarray) -> np.ndarray:
    """max c·P - max_j c·D_j over |c|_1 <= 1; returns c."""
    n, R = D.shape
    # Variables: c+ (R), c- (R), s+, s-.
    A_ub = np.zeros((n + 1, 2 * R + 2))
    A_ub[:n, :R] = D
    A_ub[:n, R:2 * R] = -D
    A_ub[:n, 2 * R] = -1.0
    A_ub[:n, 2 * R + 1] = 1.0
    A_ub[n, :2 * R] = 1.0
    b_ub = np.zeros(n + 1)
    b_ub[n] = 1.0
    cost = np.concatenate([-P, P, [1.0, -1.0]])
    res = simplex.linprog(cost, A_ub, b_ub)
    if res.status != "optimal":
        raise LpNumericalFailure(f"certificate LP ended as {res.status}")
    return res.x[:R] - res.x[R:2 * R]


def lv_membership(b: Behavior, tol: float = 1e-9, cap: int = DEFAULT_CAP) -> MembershipVerdict:
    """Decide whether ``b`` is a mixture of deterministic strategies.

    ``tol`` bounds the sup-norm distance between ``b`` and the reconstructed
    mixture. Outside points come with a separating inequality normalized to
    max |coefficient| = 1; CHSH-type liftings are preferred when one of them
    already separates.
    """
    s = b.scenario
    D = deterministic_matrix(s, cap)
    P = b.table.ravel()
    res = _decompose(P, D)
    if res.status != "optimal":
        raise LpNumericalFailure(f"membership LP ended as {res.status}")
    w = res.x[:-1]
    w = np.where(w > 1e-15, w, 0.0)
    w = w / w.sum()
    err = float(np.max(np.abs(D.T @ w - P)))
    if err <= tol:
        strategies = enumerate_deterministic(s, cap) if D.shape[0] <= 4096 else None
        nz = np.nonzero(w)[0]
        if strategies is None:
            strategies = {int(j): _strategy_from_index(s, int(j)) for j in nz}
        else:
            strategies = {int(j): strategies[j] for j in nz}
        decomposition = LvDecomposition({int(j): float(w[j]) for j in nz}, strategies, err)
        return MembershipVerdict(True, err, decomposition=decomposition)

    best = None
    for ineq in chsh_liftings(s):
        excess = bell_value(ineq, b) - ineq.local_bound
        if excess > tol and (best is None or excess > best[0]):
            best = (excess, ineq)
    if best is not None:
        ineq = best[1]
        return MembershipVerdict(False, err, separating=ineq, separating_value=bell_value(ineq, b), chsh_type=True)

    coeff = _dual_certificate(P, D)
    coeff = coeff / np.max(np.abs(coeff))
    bound = float(np.max(D @ coeff))
    value = float(coeff @ P)
    if value - bound <= tol:
        raise LpNumericalFailure("dual certificate does not separate the behavior")
    alg = float(np.sum(np.max(coeff.reshape(s.ma_inputs, s.mb_inputs, -1), axis=2)))
    ineq = BellInequality(coeff.reshape(s.shape), bound, max(alg, bound), "probability")
    return MembershipVerdict(False, err, separating=ineq, separating_value=value)


def _strategy_from_index(s: Scenario, j: int) -> DeterministicStrategy:
    digits = []
    bases = [s.ma_outputs] * s.ma_inputs + [s.mb_outputs] * s.mb_inputs
    for base in reversed(bases):
        digits.append(j % base)
        j //= base
    digits.reverse()
    return DeterministicStrategy(tuple(digits[: s.ma_inputs]), tuple(digits[s.ma_inputs:]))


# ---------------------------------------------------------------------------
# Facets


@dataclass(frozen=True)
class Facet:
    """Facet ``normal · u <= bound``; integral when the vertices are."""

    normal: tuple
    bound: float
    trivial: bool

    def to_dict(self) -> dict:
        return {"normal": list(self.normal), "bound": self.bound, "trivial": self.trivial}

    def as_inequality(self, ma_inputs: int, mb_inputs: int) -> BellInequality:
        """Correlator-form inequality for a correlator-polytope facet."""
        coeff = np.asarray(self.normal, dtype=float).reshape(ma_inputs, mb_inputs)
        return BellInequality(coeff, float(self.bound), float(np.abs(coeff).sum()), "correlator")


def correlator_polytope_vertices(s: Scenario) -> list[tuple[int, ...]]:
    """Distinct vectors (a_x b_y) over deterministic strategies, in first-seen order."""
    if not s.is_binary:
        raise NonBinaryOutcomes("correlator polytope needs binary outcomes")
    seen = {}
    for d in enumerate_deterministic(s):
        a = [1 - 2 * v for v in d.a_assign]
        b = [1 - 2 * v for v in d.b_assign]
        vec = tuple(ax * by for ax in a for by in b)
        seen.setdefault(vec, None)
    return list(seen)


def _solve_exact(rows: list[list[int]]) -> list[Fraction] | None:
    """Solve rows · n = 1 exactly; None when singular."""
    d = len(rows)
    M = [[Fraction(v) for v in r] + [Fraction(1)] for r in rows]
    for col in range(d):
        piv = next((r for r in range(col, d) if M[r][col] != 0), None)
        if piv is None:
            return None
        M[col], M[piv] = M[piv], M[col]
        inv = 1 / M[col][col]
        M[col] = [v * inv for v in M[col]]
        for r in range(d):
            if r != col and M[r][col] != 0:
                f = M[r][col]
                M[r] = [a - f * b for a, b in zip(M[r], M[col])]
    return [M[r][d] for r in range(d)]


def _origin_interior(V: np.ndarray) -> bool:
    """True when a strictly positive combination of the vertices is zero."""
    n, dim = V.shape
    if np.linalg.matrix_rank(V) < dim:
        return False
    # max t s.t. sum l_i v_i = 0, sum l_i = 1, l_i >= t  (l_i = t + m_i, m_i >= 0).
    A_eq = np.zeros((dim + 1, n + 1))
    A_eq[:dim, :n] = V.T
    A_eq[:dim, n] = V.sum(axis=0)
    A_eq[dim, :n] = 1.0
    A_eq[dim, n] = n
    b_eq = np.zeros(dim + 1)
    b_eq[dim] = 1.0
    c = np.zeros(n + 1)
    c[n] = -1.0
    res = simplex.linprog(c, A_eq=A_eq, b_eq=b_eq)
    return res.status == "optimal" and res.x[n] > 1e-9


def facet_enumeration(vertices, dim: int, max_subsets: int = 5_000_000) -> list[Facet]:
    """All facets of conv(vertices), which must contain the origin in its interior.

    Every ``dim``-subset of linearly independent vertices defines a candidate
    hyperplane n·u = 1; it is a facet when no vertex lies beyond it. A float
    pass screens the candidates and integer vertex sets are then confirmed in
    exact rational arithmetic.
    """
    if dim > MAX_FACET_DIM:
        raise DimensionTooLarge(f"facet enumeration supports dim <= {MAX_FACET_DIM}")
    V = np.asarray(vertices, dtype=float)
    if V.ndim != 2 or V.shape[1] != dim:
        raise ValueError("vertices must be a list of dim-vectors")
    V = np.unique(V, axis=0)
    n = V.shape[0]
    if not _origin_interior(V):
        raise DegenerateVertexSet("origin is not strictly inside the convex hull")
    if math.comb(n, dim) > max_subsets:
        raise TooLarge(f"{math.comb(n, dim)} vertex subsets exceed the limit {max_subsets}")
    integral = np.all(V == np.round(V))
    Vint = V.astype(np.int64).tolist() if integral else None

    found: dict[tuple, Facet] = {}
    screened: set[tuple] = set()
    combos = itertools.combinations(range(n), dim)
    while True:
        chunk = np.array(list(itertools.islice(combos, 50_000)), dtype=np.int64)
        if chunk.size == 0:
            break
        mats = V[chunk]  # [k, dim, dim]
        dets = np.linalg.det(mats)
        ok = np.abs(dets) > 1e-9
        if not ok.any():
            continue
        sel = chunk[ok]
        normals = np.linalg.solve(mats[ok], np.ones((sel.shape[0], dim, 1)))[..., 0]
        values = normals @ V.T  # [k, n]
        good = np.all(values <= 1 + 1e-9, axis=1)
        for subset, nrm in zip(sel[good], normals[good]):
            fkey = tuple(np.round(nrm, 7))
            if fkey in screened:
                continue
            screened.add(fkey)
            if integral:
                exact = _solve_exact([Vint[i] for i in subset])
                if exact is None:
                    continue
                if any(sum(e * v for e, v in zip(exact, Vint[j])) > 1 for j in range(n)):
                    continue
                lcm = math.lcm(*(e.denominator for e in exact))
                ints = [int(e * lcm) for e in exact]
                g = math.gcd(*ints, lcm)
                key = tuple(v // g for v in ints) + (lcm // g,)
                if key not in found:
                    normal = key[:-1]
                    found[key] = Facet(normal, key[-1], sum(1 for v in normal if v != 0) == 1)
            else:
                scale = np.max(np.abs(nrm))
                normal = nrm / scale
                key = tuple(np.round(normal, 9)) + (round(1 / scale, 9),)
                if key not in found:
                    found[key] = Facet(tuple(normal.tolist()), float(1 / scale),
                                       int(np.sum(np.abs(normal) > 1e-10)) == 1)
    return sorted(found.values(), key=lambda f: (not f.trivial, f.normal))


def chsh_facets() -> list[Facet]:
    """The sixteen facets of the (2,2;2,2) correlator polytope."""
    return facet_enumeration(correlator_polytope_vertices(Scenario(2, 2, 2, 2)), 4)


def ns_coordinates(table: np.ndarray) -> np.ndarray:
    """No-signaling coordinates of a (2,2;2,2) table.

    (P_A(0|0), P_A(0|1), P_B(0|0), P_B(0|1), P(00|00), P(00|01), P(00|10), P(00|11)).
    """
    t = np.asarray(table)
    pa = t[:, 0, 0, :].sum(axis=1)
    pb = t[0, :, :, 0].sum(axis=1)
    return np.concatenate([pa, pb, t[:, :, 0, 0].ravel()])


def full_chsh_polytope_facets() -> list[Facet]:
    """Facets of the full (2,2;2,2) local polytope in no-signaling coordinates.

    The sixteen deterministic points are shifted to put white noise at the
    origin and scaled by 4 so that coordinates stay integral.
    """
    s = Scenario(2, 2, 2, 2)
    pts = np.array([ns_coordinates(strategy_table(d, s)) for d in enumerate_deterministic(s)])
    center = ns_coordinates(np.full(s.shape, 0.25))
    return facet_enumeration(np.round(4 * (pts - center)).astype(int), 8)
