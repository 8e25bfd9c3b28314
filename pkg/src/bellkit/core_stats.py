"""Scenarios, behaviors and the bookkeeping around them.

A behavior is the table of conditional probabilities P(a,b|x,y). It is stored
as a read-only numpy array indexed ``table[x, y, a, b]``, the same layout used
by the JSON schema. For binary outcomes, index 0 stands for the value +1 and
index 1 for -1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .errors import (
    NonBinaryOutcomes,
    NormalizationError,
    ShapeMismatch,
    TooLarge,
    WrongScenario,
)

NORMALIZATION_TOL = 1e-9
CLAMP_BAND = 1e-12


@dataclass(frozen=True)
class Scenario:
    """Input/output cardinalities (M_A, m_A; M_B, m_B) of a bipartite test."""

    ma_inputs: int
    ma_outputs: int
    mb_inputs: int
    mb_outputs: int

    def __post_init__(self):
        for name in ("ma_inputs", "ma_outputs", "mb_inputs", "mb_outputs"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        if self.deterministic_count() >= 2**63:
            raise TooLarge("deterministic-point count overflows a 64-bit count")

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return (self.ma_inputs, self.mb_inputs, self.ma_outputs, self.mb_outputs)

    @property
    def is_binary(self) -> bool:
        return self.ma_outputs == 2 and self.mb_outputs == 2

    def deterministic_count(self) -> int:
        return self.ma_outputs**self.ma_inputs * self.mb_outputs**self.mb_inputs

    def to_dict(self) -> dict:
        return {
            "ma_inputs": self.ma_inputs,
            "ma_outputs": self.ma_outputs,
            "mb_inputs": self.mb_inputs,
            "mb_outputs": self.mb_outputs,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        return cls(int(d["ma_inputs"]), int(d["ma_outputs"]), int(d["mb_inputs"]), int(d["mb_outputs"]))

    @classmethod
    def parse(cls, text: str) -> "Scenario":
        """Parse ``"MA,mA,MB,mB"``."""
        parts = [int(p) for p in text.split(",")]
        if len(parts) != 4:
            raise ValueError("scenario must be four comma-separated integers MA,mA,MB,mB")
        return cls(*parts)


CHSH_SCENARIO = Scenario(2, 2, 2, 2)


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Behavior:
    """P(a,b|x,y) for a scenario. Build it with :func:`behavior_from_table`."""

    scenario: Scenario
    table: np.ndarray
    normalization_residual: float = field(default=0.0, compare=False)

    def alice_marginals(self) -> np.ndarray:
        """P(a|x) computed from y = 0, shape (M_A, m_A)."""
        return self.table[:, 0].sum(axis=2)

    def bob_marginals(self) -> np.ndarray:
        """P(b|y) computed from x = 0, shape (M_B, m_B)."""
        return self.table[0].sum(axis=1)

    def mix(self, other: "Behavior", weight: float) -> "Behavior":
        """Return (1 - weight)·self + weight·other."""
        if other.scenario != self.scenario:
            raise ShapeMismatch("cannot mix behaviors from different scenarios")
        return behavior_from_table(self.scenario, (1 - weight) * self.table + weight * other.table)

    def to_dict(self) -> dict:
        return {"scenario": self.scenario.to_dict(), "table": self.table.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Behavior":
        return behavior_from_table(Scenario.from_dict(d["scenario"]), np.asarray(d["table"], dtype=float))


def behavior_from_table(scenario: Scenario, raw) -> Behavior:
    """Validate, clamp and renormalize a raw probability table.

    ``raw`` is indexed ``[x, y, a, b]``. Entries may sit up to 1e-12 outside
    [0, 1]; each (x, y) block must sum to 1 within 1e-9.
    """
    arr = np.asarray(raw, dtype=float)
    if arr.shape != scenario.shape:
        raise ShapeMismatch(f"table shape {arr.shape} does not match scenario shape {scenario.shape}")
    if not np.all(np.isfinite(arr)):
        raise NormalizationError("table contains non-finite entries")
    if arr.min() < -CLAMP_BAND or arr.max() > 1 + CLAMP_BAND:
        raise NormalizationError("table entries must lie in [0, 1]")
    sums = arr.sum(axis=(2, 3))
    residual = float(np.max(np.abs(sums - 1.0)))
    if residual > NORMALIZATION_TOL:
        raise NormalizationError(f"a setting pair sums to {sums.flat[np.argmax(np.abs(sums - 1))]:.12g}, not 1")
    arr = np.clip(arr, 0.0, 1.0)
    arr = arr / arr.sum(axis=(2, 3), keepdims=True)
    return Behavior(scenario, _readonly(arr), residual)


def white_noise(scenario: Scenario) -> Behavior:
    n = scenario.ma_outputs * scenario.mb_outputs
    return behavior_from_table(scenario, np.full(scenario.shape, 1.0 / n))


def no_signaling_residual(b: Behavior) -> float:
    """Largest change of one party's marginal when the other party's setting changes."""
    pa = b.table.sum(axis=3)  # [x, y, a]
    pb = b.table.sum(axis=2)  # [x, y, b]
    ra = np.max(np.abs(pa - pa[:, :1, :])) if pa.size else 0.0
    rb = np.max(np.abs(pb - pb[:1, :, :])) if pb.size else 0.0
    return float(max(ra, rb))


@dataclass(frozen=True)
class CorrelatorVector:
    """Correlation coefficients E_xy, stored as an (M_A, M_B) array."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.atleast_2d(np.asarray(self.values, dtype=float))
        if np.any(np.abs(vals) > 1 + CLAMP_BAND):
            raise ValueError("correlators must satisfy |E| <= 1")
        object.__setattr__(self, "values", _readonly(np.clip(vals, -1.0, 1.0)))

    @property
    def ma_inputs(self) -> int:
        return self.values.shape[0]

    @property
    def mb_inputs(self) -> int:
        return self.values.shape[1]

    def flat(self) -> np.ndarray:
        """Row-major vector (E_00, E_01, ..., E_10, ...)."""
        return self.values.ravel()

    @classmethod
    def from_flat(cls, values, ma_inputs: int = 2, mb_inputs: int = 2) -> "CorrelatorVector":
        return cls(np.asarray(values, dtype=float).reshape(ma_inputs, mb_inputs))

    def to_dict(self) -> dict:
        return {"ma_inputs": self.ma_inputs, "mb_inputs": self.mb_inputs, "values": self.flat().tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "CorrelatorVector":
        return cls.from_flat(d["values"], int(d["ma_inputs"]), int(d["mb_inputs"]))


def correlators(b: Behavior) -> CorrelatorVector:
    """E_xy = P(a=b|x,y) - P(a!=b|x,y) with outcome 0 as +1 and 1 as -1."""
    if not b.scenario.is_binary:
        raise NonBinaryOutcomes("correlators need two outcomes per party")
    t = b.table
    same = t[:, :, 0, 0] + t[:, :, 1, 1]
    return CorrelatorVector(2.0 * same - 1.0)


def behavior_from_correlators(c: CorrelatorVector) -> Behavior:
    """Binary behavior with unbiased marginals and the given correlators."""
    sign = np.array([[1.0, -1.0], [-1.0, 1.0]])
    table = 0.25 * (1.0 + c.values[:, :, None, None] * sign[None, None])
    return behavior_from_table(Scenario(c.ma_inputs, 2, c.mb_inputs, 2), table)


def chsh_value(c: CorrelatorVector) -> float:
    """E00 + E01 + E10 - E11."""
    if c.values.shape != (2, 2):
        raise WrongScenario("CHSH needs two settings per side")
    e = c.values
    return float(e[0, 0] + e[0, 1] + e[1, 0] - e[1, 1])


def ns_dimension(s: Scenario) -> int:
    """Number of free parameters of a no-signaling behavior."""
    return (
        s.ma_inputs * s.mb_inputs * (s.ma_outputs - 1) * (s.mb_outputs - 1)
        + s.ma_inputs * (s.ma_outputs - 1)
        + s.mb_inputs * (s.mb_outputs - 1)
    )


@dataclass(frozen=True)
class BellInequality:
    """Linear functional ``coefficients · behavior <= local_bound``."""

    coefficients: np.ndarray
    local_bound: float
    algebraic_bound: float
    form: Literal["probability", "correlator"] = "probability"

    def __post_init__(self):
        object.__setattr__(self, "coefficients", _readonly(self.coefficients))
        if self.algebraic_bound < self.local_bound - 1e-12:
            raise ValueError("algebraic bound must not be below the local bound")
        if self.form not in ("probability", "correlator"):
            raise ValueError(f"unknown form {self.form!r}")

    def to_dict(self) -> dict:
        return {
            "form": self.form,
            "coefficients": self.coefficients.tolist(),
            "local_bound": self.local_bound,
            "algebraic_bound": self.algebraic_bound,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BellInequality":
        return cls(np.asarray(d["coefficients"], dtype=float), float(d["local_bound"]),
                   float(d["algebraic_bound"]), d.get("form", "probability"))


def bell_value(ineq: BellInequality, b: Behavior) -> float:
    if ineq.form == "correlator":
        c = correlators(b).values
        if ineq.coefficients.shape != c.shape:
            raise ShapeMismatch("correlator coefficients do not match the scenario")
        return float(np.sum(ineq.coefficients * c))
    if ineq.coefficients.shape != b.table.shape:
        raise ShapeMismatch("coefficients do not match the behavior table")
    return float(np.sum(ineq.coefficients * b.table))


def chsh_inequality(form: Literal["probability", "correlator"] = "correlator") -> BellInequality:
    """CHSH with local bound 2 and algebraic bound 4."""
    signs = np.array([[1.0, 1.0], [1.0, -1.0]])
    if form == "correlator":
        return BellInequality(signs, 2.0, 4.0, "correlator")
    ab = np.array([[1.0, -1.0], [-1.0, 1.0]])
    return BellInequality(signs[:, :, None, None] * ab[None, None], 2.0, 4.0, "probability")
