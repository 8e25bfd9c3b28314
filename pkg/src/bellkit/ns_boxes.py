"""No-signaling boxes and the games built on them.

Outcome and input indices double as bit values, so the PR box reads
a ⊕ b = x·y directly on table indices.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Literal

import numpy as np

from .core_stats import (
    CHSH_SCENARIO,
    Behavior,
    Scenario,
    behavior_from_table,
    no_signaling_residual,
)
from .errors import BadBounds, NonBinaryOutcomes, SignalingInput, WrongScenario
from .lv_simulators import RunConfig
from .quantum_kernel import PHI_PLUS, DensityMatrix, bloch_behavior
from .rng import chunks, parallel_map, stream


def pr_box() -> Behavior:
    t = np.zeros(CHSH_SCENARIO.shape)
    for x, y, a in itertools.product(range(2), repeat=3):
        t[x, y, a, a ^ (x * y)] = 0.5
    return behavior_from_table(CHSH_SCENARIO, t)


def d_points() -> list[Behavior]:
    """The four deterministic signaling points whose correlators are (1, 1, 1, -1).

    Each answers (a, b) = (s, s) on the first three setting pairs and a pair
    with a ≠ b on (1, 1).
    """
    out = []
    for s, last in ((0, (0, 1)), (0, (1, 0)), (1, (0, 1)), (1, (1, 0))):
        t = np.zeros(CHSH_SCENARIO.shape)
        for x, y in itertools.product(range(2), repeat=2):
            if (x, y) == (1, 1):
                t[x, y, last[0], last[1]] = 1.0
            else:
                t[x, y, s, s] = 1.0
        out.append(behavior_from_table(CHSH_SCENARIO, t))
    return out


def _ns_functionals(s: Scenario) -> list[np.ndarray]:
    """Linear maps on tables whose vanishing is the no-signaling condition."""
    rows = []
    for x in range(s.ma_inputs):
        for y in range(1, s.mb_inputs):
            for a in range(s.ma_outputs):
                f = np.zeros(s.shape)
                f[x, y, a, :] = 1
                f[x, 0, a, :] -= 1
                rows.append(f)
    for y in range(s.mb_inputs):
        for x in range(1, s.ma_inputs):
            for b in range(s.mb_outputs):
                f = np.zeros(s.shape)
                f[x, y, :, b] = 1
                f[0, y, :, b] -= 1
                rows.append(f)
    return rows


def _rref(rows: list[list[Fraction]]) -> tuple[list[list[Fraction]], list[int]]:
    """Reduced row echelon form over the rationals, with pivot columns."""
    m = [list(r) for r in rows]
    n = len(m[0])
    rank = 0
    pivots = []
    for col in range(n):
        piv = next((i for i in range(rank, len(m)) if m[i][col] != 0), None)
        if piv is None:
            continue
        m[rank], m[piv] = m[piv], m[rank]
        p = m[rank][col]
        m[rank] = [v / p for v in m[rank]]
        for i in range(len(m)):
            if i != rank and m[i][col] != 0:
                f = m[i][col]
                m[i] = [vi - f * vr for vi, vr in zip(m[i], m[rank])]
        pivots.append(col)
        rank += 1
    return m[:rank], pivots


def _affine_solutions(rows, rhs):
    """Particular solution and null-space basis of rows·w = rhs, or None if inconsistent."""
    n = len(rows[0])
    red, pivots = _rref([list(r) + [v] for r, v in zip(rows, rhs)])
    if n in pivots:
        return None
    particular = [Fraction(0)] * n
    for i, col in enumerate(pivots):
        particular[col] = red[i][-1]
    basis = []
    for free in (c for c in range(n) if c not in pivots):
        v = [Fraction(0)] * n
        v[free] = Fraction(1)
        for i, col in enumerate(pivots):
            v[col] = -red[i][free]
        basis.append(v)
    return particular, basis


@dataclass(frozen=True)
class PrUniqueness:
    particular: tuple[Fraction, ...]
    null_directions: tuple[tuple[Fraction, ...], ...]
    null_directions_move_table: bool
    mixture_is_pr: bool
    grid_points: int
    grid_zero_points: int
    grid_zero_tables_are_pr: bool

    @property
    def unique(self) -> bool:
        return self.mixture_is_pr and not self.null_directions_move_table and self.grid_zero_tables_are_pr

    def to_dict(self) -> dict:
        return {
            "unique": self.unique,
            "particular_weights": [str(w) for w in self.particular],
            "null_directions": [[str(w) for w in v] for v in self.null_directions],
            "null_directions_move_table": self.null_directions_move_table,
            "mixture_is_pr": self.mixture_is_pr,
            "grid_points": self.grid_points,
            "grid_zero_points": self.grid_zero_points,
            "grid_zero_tables_are_pr": self.grid_zero_tables_are_pr,
        }


def pr_uniqueness_check(grid: int = 40) -> PrUniqueness:
    """Show that every no-signaling mixture of D1..D4 is the PR box.

    The weights themselves are not unique: D1 + D4 and D2 + D3 produce the
    same table, so (1, -1, -1, 1) moves the weights without moving the
    behavior. The exact rational solve of (no-signaling, weights sum to 1)
    returns the solution set; the check confirms that its null directions
    leave the table unchanged and that it contains the PR box. A grid over the
    3-simplex with step 1/grid cross-checks numerically.
    """
    pts = d_points()
    tables = [[Fraction(int(v)) for v in p.table.ravel()] for p in pts]
    funcs = _ns_functionals(CHSH_SCENARIO)
    rows = [[Fraction(int(round(float(np.sum(f * p.table))))) for p in pts] for f in funcs]
    rows.append([Fraction(1)] * 4)
    rhs = [Fraction(0)] * len(funcs) + [Fraction(1)]
    sol = _affine_solutions(rows, rhs)
    if sol is None:
        return PrUniqueness((), (), False, False, 0, 0, False)
    particular, basis = sol

    def table_of(w):
        return [sum(wi * t[k] for wi, t in zip(w, tables)) for k in range(len(tables[0]))]

    moves = any(any(v != 0 for v in table_of(d)) for d in basis)
    pr = [Fraction(int(round(2 * v)), 2) for v in pr_box().table.ravel()]
    is_pr = table_of(particular) == pr

    zeros, all_pr, n = 0, True, 0
    for i, j, k in itertools.product(range(grid + 1), repeat=3):
        if i + j + k > grid:
            continue
        n += 1
        w = np.array([i, j, k, grid - i - j - k]) / grid
        t = sum(wi * p.table for wi, p in zip(w, pts))
        if no_signaling_residual(behavior_from_table(CHSH_SCENARIO, t)) < 1e-12:
            zeros += 1
            all_pr &= bool(np.max(np.abs(t - pr_box().table)) < 1e-12)
    return PrUniqueness(tuple(particular), tuple(tuple(d) for d in basis), moves, is_pr, n, zeros, all_pr)


# ---------------------------------------------------------------------------
# Random access code


def _zero_input(*_args) -> int:
    return 0


@dataclass(frozen=True)
class RacStrategy:
    """One-bit random access code assisted by a shared (2,2;2,2) box.

    Alice sees (x0, x1), Bob sees y and must output x_y. Both share λ drawn
    with ``lambda_weights`` and one use of ``box``: Alice feeds
    ``alice_box_input(x0, x1, λ)`` and gets a, Bob feeds ``bob_box_input(y, λ)``
    and gets b. The message ``alice_message(x0, x1, λ, a)`` is one bit and
    Bob answers ``bob_guess(m, y, λ, b)``. Without a box, a = b = 0.
    """

    alice_message: Callable[[int, int, int, int], int]
    bob_guess: Callable[[int, int, int, int], int]
    alice_box_input: Callable[[int, int, int], int] = _zero_input
    bob_box_input: Callable[[int, int], int] = _zero_input
    box: Behavior | None = None
    lambda_weights: tuple[float, ...] = (1.0,)
    name: str = "custom"


def rac_play(strategy: RacStrategy, exhaustive: bool = True, cfg: RunConfig | None = None) -> float:
    """Success probability of the game with uniform x0, x1, y.

    ``exhaustive`` averages exactly over inputs, λ and box outcomes;
    otherwise ``cfg.shots`` rounds are sampled.
    """
    if strategy.box is not None and strategy.box.scenario.shape != (2, 2, 2, 2):
        raise WrongScenario("the shared box must be a (2,2;2,2) behavior")
    box = strategy.box.table if strategy.box is not None else None
    lam_w = np.asarray(strategy.lambda_weights, dtype=float)
    lam_w = lam_w / lam_w.sum()

    def outcome_dist(x0, x1, y, lam):
        if box is None:
            return {(0, 0): 1.0}
        xa = strategy.alice_box_input(x0, x1, lam)
        yb = strategy.bob_box_input(y, lam)
        return {(a, b): box[xa, yb, a, b] for a in range(2) for b in range(2) if box[xa, yb, a, b] > 0}

    def wins(x0, x1, y, lam, a, b):
        m = strategy.alice_message(x0, x1, lam, a)
        if m not in (0, 1):
            raise ValueError("the message must be a single bit")
        return strategy.bob_guess(m, y, lam, b) == (x0, x1)[y]

    if exhaustive:
        total = 0.0
        for x0, x1, y in itertools.product(range(2), repeat=3):
            for lam, wl in enumerate(lam_w):
                for (a, b), p in outcome_dist(x0, x1, y, lam).items():
                    if wins(x0, x1, y, lam, a, b):
                        total += wl * p
        return float(total / 8.0)
    cfg = cfg or RunConfig(100_000)
    rng = stream(cfg.seed, 0)
    hits = 0
    for _ in range(int(cfg.shots)):
        x0, x1, y = (int(v) for v in rng.integers(0, 2, 3))
        lam = int(rng.choice(len(lam_w), p=lam_w))
        dist = outcome_dist(x0, x1, y, lam)
        keys = list(dist)
        a, b = keys[int(rng.choice(len(keys), p=np.array([dist[k] for k in keys])))]
        hits += wins(x0, x1, y, lam, a, b)
    return hits / int(cfg.shots)


def pr_rac_strategy() -> RacStrategy:
    """Alice inputs x0 ⊕ x1 and sends x0 ⊕ a; Bob inputs y and outputs m ⊕ b."""
    return RacStrategy(
        alice_message=lambda x0, x1, lam, a: x0 ^ a,
        bob_guess=lambda m, y, lam, b: m ^ b,
        alice_box_input=lambda x0, x1, lam: x0 ^ x1,
        bob_box_input=lambda y, lam: y,
        box=pr_box(),
        name="pr",
    )


def encode_x0_strategy() -> RacStrategy:
    return RacStrategy(lambda x0, x1, lam, a: x0, lambda m, y, lam, b: m, name="encode-x0")


@dataclass(frozen=True)
class RacBruteForce:
    best: float
    optimal_pairs: int
    pairs: int

    def to_dict(self) -> dict:
        return {"best": self.best, "optimal_pairs": self.optimal_pairs, "pairs": self.pairs}


def rac_classical_bruteforce() -> RacBruteForce:
    """Best deterministic one-bit code over all message and guess functions.

    Shared randomness only mixes deterministic strategies, so the best
    deterministic value is the best classical value.
    """
    inputs = list(itertools.product(range(2), repeat=2))
    best, count, n = -1.0, 0, 0
    for msg in itertools.product(range(2), repeat=4):
        for guess in itertools.product(range(2), repeat=4):
            n += 1
            strat = RacStrategy(
                lambda x0, x1, lam, a, msg=msg: msg[2 * x0 + x1],
                lambda m, y, lam, b, guess=guess: guess[2 * m + y],
            )
            v = rac_play(strat)
            if v > best + 1e-15:
                best, count = v, 1
            elif abs(v - best) <= 1e-15:
                count += 1
    return RacBruteForce(float(best), count, n)


# ---------------------------------------------------------------------------
# Majority-vote coarse graining


@dataclass(frozen=True)
class CoarseGrainResult:
    behavior: Behavior
    stderr: np.ndarray
    runs: int
    n_per_run: int
    ties: int = 0
    counts: np.ndarray = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "behavior": self.behavior.to_dict(),
            "stderr": self.stderr.tolist(),
            "runs": self.runs,
            "n_per_run": self.n_per_run,
            "ties": self.ties,
        }


def majority_vote_coarse_grain(b: Behavior, n_per_run: int, cfg: RunConfig) -> CoarseGrainResult:
    """Each macroscopic run draws N independent pairs and each party reports
    the majority of its outcomes. Ties (possible for even N) go to outcome 0."""
    s = b.scenario
    if not s.is_binary:
        raise NonBinaryOutcomes("majority vote needs two outcomes per setting")
    n = int(n_per_run)
    if n < 1:
        raise ValueError("n_per_run must be at least 1")
    pairs = [(x, y) for x in range(s.ma_inputs) for y in range(s.mb_inputs)]
    tasks = [(p, k, size) for p in range(len(pairs)) for k, size in enumerate(chunks(int(cfg.shots)))]

    def work(task):
        p, k, size = task
        x, y = pairs[p]
        rng = stream(cfg.seed, p, k)
        c = rng.multinomial(n, b.table[x, y].ravel(), size=size)  # columns 00, 01, 10, 11
        a0 = c[:, 0] + c[:, 1]
        b0 = c[:, 0] + c[:, 2]
        alpha = (2 * a0 < n).astype(int)
        beta = (2 * b0 < n).astype(int)
        ties = int(np.sum(2 * a0 == n) + np.sum(2 * b0 == n))
        hist = np.bincount(2 * alpha + beta, minlength=4)
        return hist, ties

    results = parallel_map(work, tasks, cfg.threads)
    counts = np.zeros((len(pairs), 4), dtype=np.int64)
    ties = 0
    for (p, _, _), (hist, t) in zip(tasks, results):
        counts[p] += hist
        ties += t
    runs = int(cfg.shots)
    freq = counts / runs
    table = freq.reshape(s.ma_inputs, s.mb_inputs, 2, 2)
    se = np.sqrt(freq * (1 - freq) / runs).reshape(table.shape)
    return CoarseGrainResult(behavior_from_table(s, table), se, runs, n, ties, counts)


# ---------------------------------------------------------------------------
# Chained inequality


@dataclass(frozen=True)
class ChainedSpec:
    m: int

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 2:
            raise ValueError("the chained inequality needs m >= 2 settings")

    @property
    def local_bound(self) -> int:
        return 2 * self.m - 1

    @property
    def algebraic_bound(self) -> int:
        return 2 * self.m


ChainedForm = Literal["C", "C_prime", "C_dprime"]


def _p_equal(t: np.ndarray, x: int, y: int) -> float:
    return float(t[x, y, 0, 0] + t[x, y, 1, 1])


def chained_value(b: Behavior, spec: ChainedSpec, form: ChainedForm = "C") -> float:
    """Chain of 2M probabilities linking a_1, b_1, a_2, ..., b_M and back to a_1.

    C sums P(a_j = b_j), P(b_j = a_{j+1}) and P(b_M ≠ a_1) (local bound 2M-1);
    C' = 2C - 2M is the correlator form and C'' = 2M - C the inverted form.
    """
    M = spec.m
    if b.scenario.shape != (M, M, 2, 2):
        raise WrongScenario(f"the chained inequality needs scenario ({M},2;{M},2)")
    t = b.table
    c = sum(_p_equal(t, j, j) for j in range(M))
    c += sum(_p_equal(t, j + 1, j) for j in range(M - 1))
    c += 1.0 - _p_equal(t, 0, M - 1)
    if form == "C":
        return c
    if form == "C_prime":
        return 2 * c - 2 * M
    if form == "C_dprime":
        return 2 * M - c
    raise ValueError(f"unknown chained form {form!r}")


def chained_correlator_value(b: Behavior, spec: ChainedSpec) -> float:
    """C' evaluated directly from correlators E_jj + E_{j+1,j} - E_{1M}."""
    M = spec.m
    if b.scenario.shape != (M, M, 2, 2):
        raise WrongScenario(f"the chained inequality needs scenario ({M},2;{M},2)")
    t = b.table
    E = t[:, :, 0, 0] + t[:, :, 1, 1] - t[:, :, 0, 1] - t[:, :, 1, 0]
    return float(sum(E[j, j] for j in range(M)) + sum(E[j + 1, j] for j in range(M - 1)) - E[0, M - 1])


def chained_quantum_settings(m: int, state: Literal["phi_plus", "singlet"] = "phi_plus"):
    """x–z plane directions a_j at angle θ_{2j-1} and b_j at θ_{2j}, θ_k = kπ/2M.

    They are optimal on |Φ+>. The singlet version flips Bob's directions,
    which turns its anticorrelations into correlations.
    """
    ChainedSpec(m)
    theta = np.arange(2 * m + 1) * np.pi / (2 * m)

    def vec(t):
        return np.array([np.sin(t), 0.0, np.cos(t)])

    alice = [vec(theta[2 * j - 1]) for j in range(1, m + 1)]
    bob = [vec(theta[2 * j]) for j in range(1, m + 1)]
    if state == "singlet":
        bob = [-v for v in bob]
    elif state != "phi_plus":
        raise ValueError(f"unknown state {state!r}")
    return alice, bob


def chained_quantum_behavior(m: int) -> Behavior:
    """Born-rule behavior of |Φ+> at the chained settings."""
    alice, bob = chained_quantum_settings(m)
    return bloch_behavior(DensityMatrix.pure(PHI_PLUS), alice, bob)


def chained_quantum_value(m: int) -> float:
    return float(m * (1 + np.cos(np.pi / (2 * m))))


# ---------------------------------------------------------------------------
# Local fraction and the marginal bound


def local_fraction_bound(i_obs: float, i_local: float, i_alg: float) -> float:
    """Upper bound (I_alg - I_obs)/(I_alg - I_L) on the weight of any local part."""
    if not i_alg > i_local:
        raise BadBounds("the algebraic bound must exceed the local bound")
    if i_obs > i_alg + 1e-12:
        raise BadBounds("the observed value exceeds the algebraic bound")
    return float(np.clip((i_alg - i_obs) / (i_alg - i_local), 0.0, 1.0))


@dataclass(frozen=True)
class LeggettResult:
    c_dprime: float
    marginal_bias: float
    bound_holds: bool

    def to_dict(self) -> dict:
        return {"c_dprime": self.c_dprime, "marginal_bias": self.marginal_bias, "bound_holds": self.bound_holds}


def leggett_marginal_bound(b_lambda: Behavior, spec: ChainedSpec) -> LeggettResult:
    """For a no-signaling behavior, the bias of Alice's first marginal,
    |P(0|x) - ½| + |P(1|x) - ½|, cannot exceed C''."""
    if no_signaling_residual(b_lambda) > 1e-9:
        raise SignalingInput("the marginal bound needs a no-signaling behavior")
    c2 = chained_value(b_lambda, spec, "C_dprime")
    p = b_lambda.alice_marginals()[0]
    bias = float(abs(p[0] - 0.5) + abs(p[1] - 0.5))
    return LeggettResult(c2, bias, bias <= c2 + 1e-9)


def random_ns_behavior(scenario: Scenario, rng: np.random.Generator) -> Behavior:
    """Random binary no-signaling behavior.

    Marginals are uniform on [0, 1] and each P(0,0|x,y) is uniform on the
    interval that keeps the table non-negative, so no draw is ever rejected.
    """
    if not scenario.is_binary:
        raise NonBinaryOutcomes("random no-signaling sampling covers binary outcomes")
    pa = rng.uniform(0, 1, scenario.ma_inputs)[:, None]
    pb = rng.uniform(0, 1, scenario.mb_inputs)[None, :]
    lo = np.maximum(0.0, pa + pb - 1)
    hi = np.minimum(pa, pb)
    p00 = lo + (hi - lo) * rng.uniform(0, 1, (scenario.ma_inputs, scenario.mb_inputs))
    t = np.empty(scenario.shape)
    t[..., 0, 0] = p00
    t[..., 0, 1] = pa - p00
    t[..., 1, 0] = pb - p00
    t[..., 1, 1] = 1 - pa - pb + p00
    return behavior_from_table(scenario, np.clip(t, 0.0, 1.0))
