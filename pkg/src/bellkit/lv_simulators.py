"""Monte-Carlo local-variable models.

Covers the single-spin model, the exact four-strategy anticorrelation model,
the local model of Werner statistics at W = 1/2, the one-bit communication
model of the singlet, a detection-loophole cheat and adaptive strategies
with memory.

All samplers draw from :func:`bellkit.rng.stream` keyed by (seed, setting
index, chunk index), so a report depends only on the seed and the inputs.
Outcome index 0 means +1 and index 1 means -1. Ties sign(0) resolve to +1
except where a model states otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps

from .core_stats import Behavior, Scenario, behavior_from_table
from .errors import BadVector, NegativeWeight, ShapeMismatch
from .local_polytope import DeterministicStrategy, strategy_table
from .rng import DEFAULT_SEED, chunks, parallel_map, sphere, stream


@dataclass(frozen=True)
class RunConfig:
    shots: int
    seed: int = DEFAULT_SEED
    settings: tuple = ()
    threads: int | None = None

    def __post_init__(self):
        if int(self.shots) < 1:
            raise ValueError("shots must be at least 1")


@dataclass(frozen=True)
class SettingStats:
    index: int
    alice: tuple | None
    bob: tuple | None
    shots: int
    counts: np.ndarray
    estimates: dict
    stderr: dict

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "alice": self.alice,
            "bob": self.bob,
            "shots": self.shots,
            "counts": self.counts.tolist(),
            "estimates": self.estimates,
            "stderr": self.stderr,
        }


@dataclass(frozen=True)
class SimulationReport:
    model: str
    seed: int
    shots: int
    settings: tuple[SettingStats, ...]
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "seed": self.seed,
            "shots": self.shots,
            "settings": [s.to_dict() for s in self.settings],
            "extras": _jsonable(self.extras),
        }

    def csv_rows(self) -> list[dict]:
        rows = []
        for s in self.settings:
            row = {"index": s.index}
            row.update(s.estimates)
            row.update({f"se_{k}": v for k, v in s.stderr.items()})
            rows.append(row)
        return rows

    def behavior(self, ma_inputs: int, mb_inputs: int) -> Behavior:
        """Estimated behavior when the settings list is the row-major grid of
        ``ma_inputs`` Alice directions times ``mb_inputs`` Bob directions."""
        if len(self.settings) != ma_inputs * mb_inputs:
            raise ShapeMismatch("settings do not form the requested grid")
        table = np.array([s.counts / s.shots for s in self.settings], dtype=float)
        return behavior_from_table(Scenario(ma_inputs, 2, mb_inputs, 2), table.reshape(ma_inputs, mb_inputs, 2, 2))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def _unit(v, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=float).reshape(3)
    if abs(np.linalg.norm(v) - 1) > 1e-9:
        raise BadVector(f"{name} must be a unit vector")
    return v


def _pm_stats(mean: float, n: int) -> float:
    """Standard error of the mean of n values in {-1, +1}."""
    return float(np.sqrt(max(1.0 - mean * mean, 0.0) / n))


def pair_stats(index: int, alice, bob, counts: np.ndarray) -> SettingStats:
    counts = np.asarray(counts, dtype=np.int64).reshape(2, 2)
    n = int(counts.sum())
    p = counts / n
    mean_a = p[0].sum() - p[1].sum()
    mean_b = p[:, 0].sum() - p[:, 1].sum()
    mean_ab = p[0, 0] + p[1, 1] - p[0, 1] - p[1, 0]
    estimates = {"mean_a": float(mean_a), "mean_b": float(mean_b), "mean_ab": float(mean_ab)}
    stderr = {"mean_a": _pm_stats(mean_a, n), "mean_b": _pm_stats(mean_b, n), "mean_ab": _pm_stats(mean_ab, n)}
    for a in range(2):
        for b in range(2):
            estimates[f"p{a}{b}"] = float(p[a, b])
            stderr[f"p{a}{b}"] = float(np.sqrt(p[a, b] * (1 - p[a, b]) / n))
    return SettingStats(index, _tuple(alice), _tuple(bob), n, counts, estimates, stderr)


def _tuple(v):
    if v is None:
        return None
    if np.ndim(v) == 0:
        return int(v)
    return tuple(float(x) for x in np.ravel(v))


def _run_pairs(kernel, pairs, cfg: RunConfig):
    """Apply ``kernel(a, b, n, rng) -> (counts, extra)`` to every chunk of every pair."""
    tasks = [(p, k, n) for p in range(len(pairs)) for k, n in enumerate(chunks(int(cfg.shots)))]

    def work(task):
        p, k, n = task
        a, b = pairs[p]
        return kernel(a, b, n, stream(cfg.seed, p, k))

    results = parallel_map(work, tasks, cfg.threads)
    merged = {}
    for (p, _, _), (counts, extra) in zip(tasks, results):
        c, e = merged.get(p, (0, None))
        merged[p] = (c + counts, extra if e is None else e + extra)
    return [merged[p] for p in range(len(pairs))]


# ---------------------------------------------------------------------------
# Single spin


def simulate_single_qubit_lv(m, directions, cfg: RunConfig) -> SimulationReport:
    """a = sign((m − λ)·â) with λ uniform on the sphere; ⟨a⟩ = m·â."""
    m = np.asarray(m, dtype=float).reshape(3)
    if np.linalg.norm(m) > 1 + 1e-12:
        raise BadVector("|m| must not exceed 1")
    dirs = [_unit(d, "direction") for d in directions]

    def kernel(a, _b, n, rng):
        lam = sphere(rng, n)
        plus = int(np.count_nonzero((m - lam) @ a >= 0))
        return np.array([plus, n - plus]), None

    out = []
    for i, (counts, _) in enumerate(_run_pairs(kernel, [(d, None) for d in dirs], cfg)):
        n = int(counts.sum())
        mean = (counts[0] - counts[1]) / n
        out.append(SettingStats(i, _tuple(dirs[i]), None, n, counts, {"mean_a": float(mean)},
                                {"mean_a": _pm_stats(mean, n)}))
    return SimulationReport("single-qubit", int(cfg.seed), int(cfg.shots), tuple(out), {"m": m.tolist()})


# ---------------------------------------------------------------------------
# Four-strategy anticorrelation model (exact)


def anticorrelation_weights(u, v) -> np.ndarray:
    u, v = _unit(u, "u"), _unit(v, "v")
    q1 = 0.25 * (1 + u @ v)
    q2 = 0.5 - q1
    if q1 < -1e-12 or q2 < -1e-12:
        raise NegativeWeight("mixture weights must be nonnegative")
    return np.clip(np.array([q1, q2, q2, q1]), 0.0, None)


# λ1..λ4 as (a_u, a_v; b_u, b_v) in outcome indices (0 = +1).
_ANTI_STRATEGIES = (
    DeterministicStrategy((0, 0), (1, 1)),
    DeterministicStrategy((0, 1), (1, 0)),
    DeterministicStrategy((1, 0), (0, 1)),
    DeterministicStrategy((1, 1), (0, 0)),
)


def simulate_anticorrelation_lv(u, v) -> Behavior:
    """Exact behavior of the four-strategy model for settings {u, v} on both sides."""
    q = anticorrelation_weights(u, v)
    s = Scenario(2, 2, 2, 2)
    table = sum(w * strategy_table(d, s) for w, d in zip(q, _ANTI_STRATEGIES))
    return behavior_from_table(s, table)


# ---------------------------------------------------------------------------
# Werner statistics at W = 1/2


def _werner_kernel(a, b, n, rng):
    lam = sphere(rng, n)
    u = rng.uniform(0.0, 1.0, n)
    A = np.where(u < 0.5 * (1.0 + lam @ a), 0, 1)
    B = np.where(lam @ b <= 0, 0, 1)
    return np.bincount(2 * A + B, minlength=4).reshape(2, 2), None


def simulate_werner_half(setting_pairs, cfg: RunConfig) -> SimulationReport:
    """Alice answers like a spin along λ, Bob outputs b = −sign(b̂·λ).

    Bob's tie b̂·λ = 0 gives b = +1.
    """
    pairs = [(_unit(a, "alice"), _unit(b, "bob")) for a, b in setting_pairs]
    out = [pair_stats(i, *pairs[i], counts) for i, (counts, _) in enumerate(_run_pairs(_werner_kernel, pairs, cfg))]
    return SimulationReport("werner-half", int(cfg.seed), int(cfg.shots), tuple(out))


def werner_half_expected(a, b) -> np.ndarray:
    sign = np.array([[1.0, -1.0], [-1.0, 1.0]])
    return 0.25 * (1.0 - 0.5 * float(np.dot(a, b)) * sign)


# ---------------------------------------------------------------------------
# One bit of communication for the singlet

TB_BINS = 100


def _tb_kernel(a, b, n, rng):
    l0 = sphere(rng, n)
    l1 = sphere(rng, n)
    d0, d1 = l0 @ a, l1 @ a
    first = np.abs(d0) >= np.abs(d1)
    lam = np.where(first[:, None], l0, l1)
    t = np.where(first, d0, d1)
    A = np.where(t >= 0, 0, 1)
    B = np.where(lam @ b >= 0, 1, 0)
    counts = np.bincount(2 * A + B, minlength=4).reshape(2, 2)
    hist = np.histogram(t, bins=TB_BINS, range=(-1.0, 1.0))[0]
    return counts, hist


def abs_density_bin_probs(bins: int = TB_BINS) -> np.ndarray:
    """Bin probabilities of the density |t| on [-1, 1]."""
    edges = np.linspace(-1.0, 1.0, bins + 1)
    cdf = 0.5 * (1.0 + edges * np.abs(edges))
    return np.diff(cdf)


def simulate_toner_bacon(setting_pairs, cfg: RunConfig) -> SimulationReport:
    """Alice keeps whichever of two uniform vectors λ0, λ1 is more aligned
    with â, outputs a = sign(â·λ) and tells Bob which one she kept; Bob
    outputs b = −sign(b̂·λ).

    ``extras["density"]`` holds, per pair, the histogram of â·λ and the χ²
    p-value against the density |â·λ|/2π.
    """
    pairs = [(_unit(a, "alice"), _unit(b, "bob")) for a, b in setting_pairs]
    results = _run_pairs(_tb_kernel, pairs, cfg)
    expected = abs_density_bin_probs()
    out, density = [], []
    for i, (counts, hist) in enumerate(results):
        out.append(pair_stats(i, *pairs[i], counts))
        chi = sps.chisquare(hist, expected * hist.sum())
        density.append({"histogram": hist.tolist(), "chi2": float(chi.statistic), "p_value": float(chi.pvalue)})
    return SimulationReport("toner-bacon", int(cfg.seed), int(cfg.shots), tuple(out), {"density": density})


# ---------------------------------------------------------------------------
# Detection loophole

# λ ranges over the deterministic points v1, v2, v3 and −v4 of the CHSH
# correlator polytope. Each one is wrong on exactly one setting pair, and
# Alice withholds her answer on that pair's x.
_CHEAT_A = np.array([[1, 1], [1, -1], [1, 1], [1, -1]])
_CHEAT_B = np.array([[1, 1], [1, 1], [1, -1], [-1, 1]])
_CHEAT_REFUSE = np.array([1, 1, 0, 0])
_CHSH_SIGNS = np.array([[1.0, 1.0], [1.0, -1.0]])


def _chsh_from_sums(sums: np.ndarray, counts: np.ndarray) -> tuple[float, float]:
    E = sums / counts
    S = float(np.sum(_CHSH_SIGNS * E))
    se = float(np.sqrt(np.sum((1.0 - E**2) / counts)))
    return S, se


@dataclass(frozen=True)
class CheatReport:
    post_selected_S: float
    post_selected_se: float
    full_sample_S: float
    full_sample_se: float
    reply_rate: float
    reply_rate_by_setting: tuple[float, float]
    runs: int
    counts: np.ndarray  # attempted runs per (x, y)
    replies: np.ndarray  # runs with Alice's answer per (x, y)

    def to_dict(self) -> dict:
        return _jsonable({k: getattr(self, k) for k in self.__dataclass_fields__})


def detection_cheat(cfg: RunConfig) -> CheatReport:
    """Post-selection on Alice's replies turns an LV model into S = 4."""
    sums_post = np.zeros((2, 2))
    sums_full = np.zeros((2, 2))
    tried = np.zeros((2, 2))
    replied = np.zeros((2, 2))
    for k, n in enumerate(chunks(int(cfg.shots))):
        rng = stream(cfg.seed, 0, k)
        lam = rng.integers(0, 4, n)
        x = rng.integers(0, 2, n)
        y = rng.integers(0, 2, n)
        a = _CHEAT_A[lam, x]
        b = _CHEAT_B[lam, y]
        reply = x != _CHEAT_REFUSE[lam]
        a_full = np.where(reply, a, 1)
        idx = 2 * x + y
        tried += np.bincount(idx, minlength=4).reshape(2, 2)
        replied += np.bincount(idx[reply], minlength=4).reshape(2, 2)
        sums_post += np.bincount(idx[reply], weights=(a * b)[reply], minlength=4).reshape(2, 2)
        sums_full += np.bincount(idx, weights=a_full * b, minlength=4).reshape(2, 2)
    s_post, se_post = _chsh_from_sums(sums_post, replied)
    s_full, se_full = _chsh_from_sums(sums_full, tried)
    by_x = tuple(float(replied[x].sum() / tried[x].sum()) for x in range(2))
    return CheatReport(s_post, se_post, s_full, se_full, float(replied.sum() / tried.sum()), by_x,
                       int(cfg.shots), tried.astype(np.int64), replied.astype(np.int64))


# ---------------------------------------------------------------------------
# Memory


class History:
    """What an adaptive strategy may look at: every past run's (x, y, a, b)."""

    def __init__(self):
        self.runs = 0
        self.last: tuple[int, int, int, int] | None = None
        self.pair_counts = [[0, 0], [0, 0]]

    def record(self, x: int, y: int, a: int, b: int) -> None:
        self.runs += 1
        self.last = (x, y, a, b)
        self.pair_counts[x][y] += 1


def _strategy(a, b) -> DeterministicStrategy:
    return DeterministicStrategy(tuple(0 if v > 0 else 1 for v in a), tuple(0 if v > 0 else 1 for v in b))


# CHSH-saturating deterministic strategies, keyed by the one pair they lose.
LOSING_PAIR_STRATEGY = {
    (1, 1): _strategy((1, 1), (1, 1)),
    (1, 0): _strategy((1, -1), (1, 1)),
    (0, 1): _strategy((1, 1), (1, -1)),
    (0, 0): _strategy((1, -1), (-1, 1)),
}
_PAIRS = ((0, 0), (0, 1), (1, 0), (1, 1))


class MemoryStrategy:
    """Plug-in interface: return the deterministic strategy for the next run.

    ``upcoming`` is only passed when the run leaks the settings in advance.
    """

    name = "strategy"

    def reset(self) -> None:
        pass

    def __call__(self, history: History, upcoming: tuple[int, int] | None = None) -> DeterministicStrategy:
        raise NotImplementedError


class ConstantStrategy(MemoryStrategy):
    name = "constant"

    def __init__(self, strategy: DeterministicStrategy = LOSING_PAIR_STRATEGY[(1, 1)]):
        self.strategy = strategy

    def __call__(self, history, upcoming=None):
        return self.strategy


class GreedyAvoidLastLoss(MemoryStrategy):
    """After a lost run, move the losing pair away from the pair just asked."""

    name = "greedy"

    def reset(self):
        self.losing = (1, 1)

    def __init__(self):
        self.reset()

    def __call__(self, history, upcoming=None):
        if history.last is not None:
            x, y, _, _ = history.last
            if (x, y) == self.losing:
                self.losing = _PAIRS[(_PAIRS.index(self.losing) + 1) % 4]
        return LOSING_PAIR_STRATEGY[self.losing]


class MajorityHistory(MemoryStrategy):
    """Lose on the pair that has been asked least often so far."""

    name = "majority"

    def __call__(self, history, upcoming=None):
        pc = history.pair_counts
        pair = min(_PAIRS, key=lambda p: (pc[p[0]][p[1]], p))
        return LOSING_PAIR_STRATEGY[pair]


class RoundRobin(MemoryStrategy):
    name = "round-robin"

    def __call__(self, history, upcoming=None):
        return LOSING_PAIR_STRATEGY[_PAIRS[history.runs % 4]]


class LeakedSettings(MemoryStrategy):
    """Negative control: knows the coming settings and never loses."""

    name = "leaked"

    def __call__(self, history, upcoming=None):
        if upcoming is None:
            return LOSING_PAIR_STRATEGY[(1, 1)]
        lose = next(p for p in _PAIRS if p != tuple(upcoming))
        return LOSING_PAIR_STRATEGY[lose]


BUILTIN_STRATEGIES = {"greedy": GreedyAvoidLastLoss, "majority": MajorityHistory, "round-robin": RoundRobin}


@dataclass(frozen=True)
class MemoryReport:
    strategy: str
    runs: int
    S: float
    se: float
    correlators: np.ndarray
    counts: np.ndarray

    def to_dict(self) -> dict:
        return _jsonable({k: getattr(self, k) for k in self.__dataclass_fields__})


def memory_lv_run(strategy: MemoryStrategy, cfg: RunConfig, leak: bool = False) -> MemoryReport:
    """Sequential runs with fresh uniform settings and a history-dependent
    local strategy; returns the CHSH value of the conditional statistics.

    With ``leak=True`` the strategy sees each run's settings beforehand,
    which breaks measurement independence.
    """
    n = int(cfg.shots)
    rng = stream(cfg.seed, 0)
    xs = rng.integers(0, 2, n).tolist()
    ys = rng.integers(0, 2, n).tolist()
    strategy.reset()
    history = History()
    sums = [[0, 0], [0, 0]]
    for x, y in zip(xs, ys):
        d = strategy(history, (x, y) if leak else None)
        a = d.a_assign[x]
        b = d.b_assign[y]
        sums[x][y] += 1 if a == b else -1
        history.record(x, y, a, b)
    counts = np.array(history.pair_counts, dtype=float)
    S, se = _chsh_from_sums(np.array(sums, dtype=float), counts)
    return MemoryReport(getattr(strategy, "name", type(strategy).__name__), n, S, se,
                        np.array(sums) / counts, counts.astype(np.int64))
