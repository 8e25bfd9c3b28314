"""Command-line entry point: ``bellkit <subcommand> [options]``.

Exit codes: 0 on success, 1 on a domain error (the payload names the error
kind), 2 on a usage error. Bare invocations use a fixed default seed, so
repeated runs print identical output.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import re
import sys
import time
from importlib import resources
from pathlib import Path

import numpy as np

from . import local_polytope, lv_simulators, ns_boxes, quantum_bell, quantum_set, self_testing
from .core_stats import Behavior, Scenario, chsh_value, correlators
from .errors import BellkitError, DimensionTooLarge, NonBinaryOutcomes, UnknownCurve
from .quantum_kernel import DensityMatrix, TwoQubitState
from .rng import DEFAULT_SEED

FIXTURES = ("prbox", "singlet-chsh-optimal", "werner-0.5", "white-noise")


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# Input helpers


def load_json(ref: str):
    """Read JSON from a path, or from a shipped fixture given by name."""
    p = Path(ref)
    if p.is_file():
        return json.loads(p.read_text())
    name = p.name[:-5] if p.name.endswith(".json") else p.name
    if name in FIXTURES:
        return json.loads(resources.files("bellkit").joinpath(f"fixtures/{name}.json").read_text())
    raise UsageError(f"no such file or fixture: {ref}")


def load_behavior(ref: str) -> Behavior:
    return Behavior.from_dict(load_json(ref))


def _number(text: str) -> float:
    """Float with optional 'pi' and 'sqrt(k)' factors, e.g. 'pi/4' or '2*sqrt(2)'."""
    expr = text.strip().replace(" ", "")
    if not re.fullmatch(r"[0-9.eE+\-*/()pisqrt]+", expr):
        raise UsageError(f"not a number: {text!r}")
    try:
        value = eval(expr, {"__builtins__": {}}, {"pi": np.pi, "sqrt": np.sqrt})
    except Exception as exc:
        raise UsageError(f"not a number: {text!r}") from exc
    return float(value)


def parse_grid(spec: str) -> np.ndarray:
    """'start:stop:n' with both ends included."""
    parts = spec.split(":")
    if len(parts) != 3:
        raise UsageError("grid must look like start:stop:n")
    n = int(parts[2])
    if n < 1:
        raise UsageError("grid needs at least one point")
    return np.linspace(_number(parts[0]), _number(parts[1]), n)


# ---------------------------------------------------------------------------
# Output helpers


def _g(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _flatten(obj, prefix: str = "") -> list[tuple[str, object]]:
    if isinstance(obj, dict):
        out = []
        for k, v in obj.items():
            out += _flatten(v, f"{prefix}.{k}" if prefix else str(k))
        return out
    if isinstance(obj, (list, tuple)):
        out = []
        for i, v in enumerate(obj):
            out += _flatten(v, f"{prefix}[{i}]")
        return out
    return [(prefix, obj)]


def to_csv(payload, rows: list[dict] | None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if rows:
        header = list(rows[0])
        w.writerow(header)
        for r in rows:
            w.writerow([_g(r.get(h, "")) for h in header])
    else:
        w.writerow(["key", "value"])
        for k, v in _flatten(payload):
            w.writerow([k, _g(v)])
    return buf.getvalue()


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


# ---------------------------------------------------------------------------
# Subcommands. Each returns (payload, csv_rows or None).


def cmd_facets(args):
    s = Scenario.parse(args.scenario)
    if args.full:
        if s.shape != (2, 2, 2, 2):
            raise DimensionTooLarge("the full-polytope facet list is available for 2,2,2,2 only")
        facets = local_polytope.full_chsh_polytope_facets()
    else:
        if not s.is_binary:
            raise NonBinaryOutcomes("correlator facets need two outcomes per setting")
        verts = local_polytope.correlator_polytope_vertices(s)
        facets = local_polytope.facet_enumeration(verts, s.ma_inputs * s.mb_inputs)
    items = [f.to_dict() for f in facets]
    payload = {"scenario": s.to_dict(), "count": len(items), "facets": items}
    rows = [{"index": i, "bound": f["bound"], "trivial": f["trivial"],
             **{f"n{k}": v for k, v in enumerate(f["normal"])}} for i, f in enumerate(items)]
    return payload, rows


def cmd_lv_check(args):
    b = load_behavior(args.behavior)
    verdict = local_polytope.lv_membership(b, tol=args.tol)
    d = verdict.to_dict()
    if verdict.separating is not None:
        d["separating_type"] = "CHSH" if verdict.chsh_type else "LP-dual"
    return d, None


def _load_state(ref: str) -> DensityMatrix:
    data = load_json(ref)
    if "T" in data:
        return TwoQubitState.from_dict(data).compose()
    return DensityMatrix.from_dict(data)


def cmd_chsh_max(args):
    res = quantum_bell.horodecki_max_chsh(_load_state(args.state))
    return res.to_dict(), None


CURVES = ("pure-chsh", "randomness", "chained-quantum", "local-fraction-chained")


def curve_rows(op: str, grid: np.ndarray) -> list[dict]:
    if op == "pure-chsh":
        return [{"theta": float(t), "S": quantum_bell.pure_state_max_chsh(float(t))} for t in grid]
    if op == "randomness":
        return [{"S": float(s), "P_star": quantum_set.randomness_bound(float(s))} for s in grid]
    if op == "chained-quantum":
        ms = sorted({int(round(m)) for m in grid})
        return [{"M": m, "C": ns_boxes.chained_quantum_value(m)} for m in ms]
    if op == "local-fraction-chained":
        ms = sorted({int(round(m)) for m in grid})
        return [{"M": m, "p_local_bound": ns_boxes.local_fraction_bound(ns_boxes.chained_quantum_value(m),
                                                                        2 * m - 1, 2 * m)} for m in ms]
    raise UnknownCurve(f"unknown curve {op!r}; choose from {', '.join(CURVES)}")


def cmd_curve(args):
    rows = curve_rows(args.op, parse_grid(args.grid))
    return {"op": args.op, "rows": rows}, rows


def cmd_randomness(args):
    if args.curve or args.s is None:
        rows = curve_rows("randomness", parse_grid(args.grid))
        return {"op": "randomness", "rows": rows}, rows
    s = _number(args.s)
    return {"s_obs": s, "p_star": quantum_set.randomness_bound(s)}, None


def _settings_json(args):
    if args.settings is None:
        return None
    try:
        return json.loads(args.settings)
    except json.JSONDecodeError:
        return load_json(args.settings)


DEFAULT_PAIRS = [
    [[0, 0, 1], [0, 0, 1]],
    [[0, 0, 1], [1, 0, 0]],
    [[1, 0, 0], [0.6, 0, 0.8]],
    [[0, 1, 0], [0, 0.6, 0.8]],
]


def cmd_simulate(args):
    cfg = lv_simulators.RunConfig(args.shots, args.seed, threads=args.threads)
    spec = _settings_json(args)
    model = args.model
    if model == "single-qubit":
        spec = spec or {"m": [0, 0, 0.5], "directions": [[0, 0, 1], [1, 0, 0]]}
        rep = lv_simulators.simulate_single_qubit_lv(spec["m"], spec["directions"], cfg)
        return rep.to_dict(), rep.csv_rows()
    if model in ("werner-half", "toner-bacon"):
        pairs = spec if spec is not None else DEFAULT_PAIRS
        fn = lv_simulators.simulate_werner_half if model == "werner-half" else lv_simulators.simulate_toner_bacon
        rep = fn(pairs, cfg)
        return rep.to_dict(), rep.csv_rows()
    if model == "detection-cheat":
        rep = lv_simulators.detection_cheat(cfg)
        return rep.to_dict(), None
    if model == "memory":
        name = (spec or {}).get("strategy", "greedy")
        if name not in lv_simulators.BUILTIN_STRATEGIES:
            raise UsageError(f"unknown memory strategy {name!r}")
        rep = lv_simulators.memory_lv_run(lv_simulators.BUILTIN_STRATEGIES[name](), cfg,
                                          leak=bool((spec or {}).get("leak", False)))
        return rep.to_dict(), None
    raise UsageError(f"unknown model {model!r}")


def cmd_q1(args):
    b = load_behavior(args.behavior)
    out = {}
    if b.scenario.shape == (2, 2, 2, 2):
        mm = quantum_set.npa_q1_matrix(b)
        out["npa_q1"] = quantum_set.q1_feasibility(mm, args.tol).to_dict()
        c = correlators(b)
        out["correlator_q1"] = quantum_set.q1_feasibility(quantum_set.correlator_moment_matrix(c), args.tol).to_dict()
        a = quantum_set.arcsin_criterion(c)
        out["arcsin"] = {"lhs": a.lhs, "satisfied": a.satisfied}
        out["chsh"] = chsh_value(c)
    out["macroscopic"] = quantum_set.ml_feasibility(b, args.tol).to_dict()
    return out, None


def cmd_macro_locality(args):
    b = load_behavior(args.behavior)
    mm = quantum_set.macroscopic_covariance(b)
    res = quantum_set.q1_feasibility(mm, args.tol)
    return {"feasible": res.feasible, "result": res.to_dict(), "covariance": mm.to_dict()}, None


def cmd_selftest(args):
    inst = self_testing.instance_from_dict(load_json(args.instance))
    out = {}
    if inst.db is not None:
        out["residuals"] = self_testing.mayers_yao_residuals(inst).to_dict()
    pair = tuple(args.operator.split(",")) if args.operator else None
    if pair is not None and len(pair) != 2:
        raise UsageError("--operator takes two labels such as x,z")
    ext = self_testing.swap_isometry(inst, pair)
    out["fidelity"] = ext.fidelity
    out["extraction"] = ext.to_dict()
    out["probe"] = self_testing.chsh_self_test_probe(inst).to_dict()
    return out, None


def cmd_chained(args):
    spec = ns_boxes.ChainedSpec(args.m)
    if args.behavior:
        b = load_behavior(args.behavior)
        source = "behavior"
    else:
        b = ns_boxes.chained_quantum_behavior(args.m)
        source = "quantum"
    vals = {f: ns_boxes.chained_value(b, spec, f) for f in ("C", "C_prime", "C_dprime")}
    out = {
        "m": args.m,
        "source": source,
        **vals,
        "local_bound": spec.local_bound,
        "algebraic_bound": spec.algebraic_bound,
        "local_fraction_bound": ns_boxes.local_fraction_bound(min(vals["C"], spec.algebraic_bound),
                                                               spec.local_bound, spec.algebraic_bound),
    }
    if source == "quantum":
        out["closed_form"] = ns_boxes.chained_quantum_value(args.m)
    return out, None


def cmd_rac(args):
    if args.strategy == "pr":
        return {"strategy": "pr", "success": ns_boxes.rac_play(ns_boxes.pr_rac_strategy())}, None
    if args.strategy == "classical-best":
        return {"strategy": "encode-x0", "success": ns_boxes.rac_play(ns_boxes.encode_x0_strategy())}, None
    res = ns_boxes.rac_classical_bruteforce()
    return {"strategy": "bruteforce", **res.to_dict()}, None


def cmd_macro_vote(args):
    b = load_behavior(args.behavior)
    cfg = lv_simulators.RunConfig(args.runs, args.seed, threads=args.threads)
    res = ns_boxes.majority_vote_coarse_grain(b, args.n, cfg)
    out = res.to_dict()
    if b.scenario.shape == (2, 2, 2, 2):
        out["chsh"] = chsh_value(correlators(res.behavior))
    return out, None


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("json", "csv"), default="json", help="output format (default json)")
    common.add_argument("--csv", action="store_const", const="csv", dest="format", help="shorthand for --format csv")
    common.add_argument("--output", "-o", help="write to this file instead of stdout")
    common.add_argument("--seed", type=int, default=DEFAULT_SEED, help=f"random seed (default {DEFAULT_SEED})")
    common.add_argument("--verbose", "-v", action="store_true", help="print progress to stderr")

    p = argparse.ArgumentParser(prog="bellkit", description="Bell nonlocality toolkit.",
                                epilog="Set BELLKIT_THREADS to cap the worker count of simulations.")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, fn, help_text):
        sp = sub.add_parser(name, parents=[common], help=help_text, description=help_text)
        sp.set_defaults(func=fn)
        return sp

    sp = add("facets", cmd_facets, "Facets of the correlator local polytope.")
    sp.add_argument("--scenario", default="2,2,2,2", help="MA,mA,MB,mB (default 2,2,2,2)")
    sp.add_argument("--full", action="store_true", help="full (2,2;2,2) polytope in no-signaling coordinates")

    sp = add("lv-check", cmd_lv_check, "Local-variable membership with a certificate.")
    sp.add_argument("--behavior", required=True, help="behavior JSON file or fixture name")
    sp.add_argument("--tol", type=float, default=1e-9)

    sp = add("chsh-max", cmd_chsh_max, "Maximal CHSH value of a two-qubit state.")
    sp.add_argument("--state", required=True, help="density-matrix or (r, s, T) JSON")

    sp = add("curve", cmd_curve, f"Tabulate an analytic curve ({', '.join(CURVES)}).")
    sp.add_argument("--op", required=True, help="curve name")
    sp.add_argument("--grid", default="0:pi/4:11", help="start:stop:n, ends included; 'pi' and 'sqrt(k)' allowed")

    sp = add("randomness", cmd_randomness, "Largest guessing probability P* at an observed CHSH value.")
    sp.add_argument("--s", help="observed CHSH value")
    sp.add_argument("--curve", action="store_true", help="tabulate S,P* on --grid")
    sp.add_argument("--grid", default="2:2*sqrt(2):11")

    sp = add("simulate", cmd_simulate, "Monte-Carlo local-variable models.")
    sp.add_argument("--model", required=True,
                    choices=("single-qubit", "werner-half", "toner-bacon", "detection-cheat", "memory"))
    sp.add_argument("--shots", type=int, default=100_000)
    sp.add_argument("--settings", help="inline JSON or file: setting pairs, {m, directions} or {strategy, leak}")
    sp.add_argument("--threads", type=int, default=None)

    sp = add("q1", cmd_q1, "Moment-matrix (Q1) feasibility of a behavior.")
    sp.add_argument("--behavior", required=True)
    sp.add_argument("--tol", type=float, default=1e-9)

    sp = add("macro-locality", cmd_macro_locality, "Macroscopic-locality covariance test.")
    sp.add_argument("--behavior", required=True)
    sp.add_argument("--tol", type=float, default=1e-9)

    sp = add("selftest", cmd_selftest, "Mayers–Yao residuals and swap-circuit fidelity.")
    sp.add_argument("--instance", required=True, help="instance JSON: psi (amplitudes or [re, im] pairs) or rho, with za, xa, zb, xb[, db]")
    sp.add_argument("--operator", help="operator pair applied before extraction, e.g. x,z")

    sp = add("chained", cmd_chained, "Chained inequality values.")
    sp.add_argument("--m", type=int, required=True)
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--quantum", action="store_true", help="optimal quantum behavior (default)")
    g.add_argument("--behavior", help="behavior JSON with scenario (M,2;M,2)")

    sp = add("rac", cmd_rac, "One-bit random access code.")
    sp.add_argument("--strategy", required=True, choices=("pr", "classical-best", "bruteforce"))

    sp = add("macro-vote", cmd_macro_vote, "Majority-vote coarse graining of a behavior.")
    sp.add_argument("--behavior", required=True)
    sp.add_argument("--n", type=int, default=101, help="pairs per macroscopic run (default 101)")
    sp.add_argument("--runs", type=int, default=100_000)
    sp.add_argument("--threads", type=int, default=None)
    return p


def run(argv=None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    start = time.perf_counter()
    if args.verbose:
        print(f"bellkit: running {args.command}", file=sys.stderr)
    try:
        payload, rows = args.func(args)
        code = 0
        if args.verbose:
            print(f"bellkit: {args.command} done in {time.perf_counter() - start:.2f} s", file=sys.stderr)
    except UsageError as exc:
        print(f"bellkit: {exc}", file=sys.stderr)
        return 2
    except (BellkitError, ValueError) as exc:
        kind = exc.kind if isinstance(exc, BellkitError) else "InvalidInput"
        payload, rows, code = {"error": kind, "message": str(exc)}, None, 1
        args.format = "json"
    payload = _plain(payload)
    text = to_csv(payload, _plain(rows)) if args.format == "csv" else json.dumps(payload, indent=2) + "\n"
    if args.output and code == 0:
        Path(args.output).write_text(text)
    else:
        stdout.write(text)
    return code


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
