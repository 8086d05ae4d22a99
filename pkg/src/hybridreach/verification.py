"""Numerical checks of the quantitative estimates on concrete instances.

Every check returns plain records with a verdict:

* ``pass`` / ``fail`` -- the inequality was evaluated; ``fail`` means
  ``rhs - lhs < -tol`` with ``tol = 1e-6 (1 + |rhs|)``;
* ``inconclusive`` -- a hypothesis could only be tested after the fact and
  did not hold (a trajectory missed ``A``, hit counts differ, no valid band).

The estimates use the constants from :func:`~hybridreach.model.estimate_constants`:
``C = 1/xi0``, ``F`` (speed), ``L`` (flow Lipschitz), ``G`` (jump
Lipschitz) and ``P = F C (1 + G) + G``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ModelViolation
from .geometry import Box, sample_boundary
from .model import EPS_EVENT, ConstantsEstimate, HybridSystem, estimate_constants
from .solver import OUTSIDE, Grid, PolicyTable, ValueField, _Scheme, extract_policy, value_bound
from .trajectory import (
    ControlPolicy,
    ControlSchedule,
    Reach,
    evaluate_cost,
    integrate_arc,
    simulate,
)

__all__ = [
    "PASS",
    "FAIL",
    "INCONCLUSIVE",
    "BoundCheckRecord",
    "tol_bound",
    "check_lemma1",
    "check_first_hit_bounds",
    "check_iterated_bounds",
    "measure_hit_count_separation",
    "HitCountReport",
    "bound_suite",
    "SuiteReport",
    "DPPResult",
    "policy_bundle",
    "check_dpp",
    "dpp_sample",
    "check_value_bound",
    "HolderSummary",
    "estimate_holder",
    "UniquenessResult",
    "check_uniqueness",
    "operator_properties",
]

PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"


def tol_bound(rhs: float) -> float:
    return 1e-6 * (1.0 + abs(rhs))


@dataclass
class BoundCheckRecord:
    name: str
    lhs: float
    rhs: float
    inputs: dict = field(default_factory=dict)
    verdict: str = PASS
    detail: str = ""

    @classmethod
    def evaluate(cls, name: str, lhs: float, rhs: float, **inputs) -> "BoundCheckRecord":
        ok = rhs - lhs >= -tol_bound(rhs)
        return cls(name, float(lhs), float(rhs), inputs, PASS if ok else FAIL)

    @classmethod
    def inconclusive(cls, name: str, detail: str, **inputs) -> "BoundCheckRecord":
        return cls(name, math.nan, math.nan, inputs, INCONCLUSIVE, detail)

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    @property
    def passed(self) -> bool:
        return self.verdict == PASS

    def to_dict(self) -> dict:
        def clean(v):
            if isinstance(v, np.ndarray):
                return v.tolist()
            if isinstance(v, float) and not math.isfinite(v):
                return None
            return v

        return {
            "name": self.name,
            "lhs": clean(self.lhs),
            "rhs": clean(self.rhs),
            "margin": clean(self.margin),
            "verdict": self.verdict,
            "detail": self.detail,
            "inputs": {k: clean(v) for k, v in self.inputs.items()},
        }


def _consts(system: HybridSystem, consts: ConstantsEstimate | None) -> ConstantsEstimate:
    return consts if consts is not None else estimate_constants(system)


def _as_schedule(u, system: HybridSystem) -> ControlSchedule:
    if isinstance(u, ControlSchedule):
        return u
    return ControlSchedule.constant(np.atleast_1d(np.asarray(u, dtype=float)).reshape(system.control_dim))


def _random_control(system: HybridSystem, q: int, rng: np.random.Generator) -> np.ndarray:
    ctrl = system.modes[q].dynamics.controls
    if hasattr(ctrl, "points"):
        return ctrl.points[rng.integers(len(ctrl.points))]
    return rng.uniform(ctrl.lo, ctrl.hi)


# --------------------------------------------------------------------------- hitting-time bounds


def check_lemma1(
    system: HybridSystem,
    samples: int = 1000,
    seed: int = 0,
    dt: float = 0.01,
    consts: ConstantsEstimate | None = None,
    max_halvings: int = 30,
) -> list[BoundCheckRecord]:
    """First hitting time against ``C d(x)`` for points in a band outside ``A``.

    The band starts at width ``beta/2`` and is halved until every sampled
    ``(x, u)`` pair satisfies ``f . grad d < -xi0``. Samples are spread over
    the modes that have an autonomous-jump set.
    """
    consts = _consts(system, consts)
    C, xi0 = consts.C, consts.xi0
    rng = np.random.default_rng(seed)
    modes = [q for q, m in enumerate(system.modes) if m.A is not None]
    records: list[BoundCheckRecord] = []
    for k, q in enumerate(modes):
        n = samples // len(modes) + (1 if k < samples % len(modes) else 0)
        mode = system.modes[q]
        width = system.beta / 2
        for _ in range(max_halvings):
            xs, us = _band_samples(system, q, width, n, rng)
            if len(xs) == 0:
                width /= 2
                continue
            slope = np.einsum("ij,ij->i", mode.dynamics(xs, us), mode.A.normal(xs))
            if np.all(slope < -xi0):
                break
            width /= 2
        else:
            records.append(BoundCheckRecord.inconclusive("lemma1", "no band with f.grad d < -xi0 found", mode=q))
            continue
        for x, u in zip(xs, us):
            d = float(mode.A.sdf(x))
            arc, reason = integrate_arc(system, x, q, u, 2.0 * C * d + 10 * dt, dt, detect=("A",), on_exit="stop")
            if reason != "hit-A":
                records.append(BoundCheckRecord.inconclusive("lemma1", f"trajectory stopped by {reason}", x=x, u=u, mode=q, seed=seed))
                continue
            records.append(BoundCheckRecord.evaluate("lemma1", arc.t_end, C * d, x=x, u=u, mode=q, d=d, band=width, seed=seed))
    return records


def _band_samples(system: HybridSystem, q: int, width: float, n: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Points at signed distance in (0, width] from ``A_q`` inside the domain, with random controls."""
    mode = system.modes[q]
    base = sample_boundary(mode.A, rng, 4 * n, within=mode.domain)
    if len(base) == 0:
        return np.empty((0, mode.dim)), np.empty((0, system.control_dim))
    base = base[rng.permutation(len(base))]
    s = rng.uniform(0.0, width, size=len(base))
    pts = base + s[:, None] * mode.A.normal(base)
    d = mode.A.sdf(pts)
    keep = (d > 0) & (d <= width) & (mode.domain.sdf(pts) <= 0)
    if q == system.target_mode:
        keep &= system.target.sdf(pts) > 0
    pts = pts[keep][:n]
    us = np.array([_random_control(system, q, rng) for _ in range(len(pts))]).reshape(len(pts), system.control_dim)
    return pts, us


def _first_hit(system, x, q, u, T_max, dt):
    arc, reason = integrate_arc(system, x, q, u, T_max, dt, detect=("A",), on_exit="stop")
    return (arc.t_end, arc.x_end) if reason == "hit-A" else (math.inf, None)


def check_first_hit_bounds(
    system: HybridSystem,
    x,
    z,
    u,
    q: int = 0,
    T_max: float = 20.0,
    dt: float = 0.01,
    consts: ConstantsEstimate | None = None,
) -> tuple[BoundCheckRecord, BoundCheckRecord]:
    """First-hit time and point perturbation bounds for two starts under one control."""
    consts = _consts(system, consts)
    x, z = np.asarray(x, dtype=float), np.asarray(z, dtype=float)
    u = _as_schedule(u, system)
    sep = float(np.linalg.norm(x - z))
    tau, x1 = _first_hit(system, x, q, u, T_max, dt)
    lam_, z1 = _first_hit(system, z, q, u, T_max, dt)
    inputs = dict(x=x, z=z, mode=q, separation=sep)
    if x1 is None or z1 is None:
        why = "a trajectory does not reach A"
        return (BoundCheckRecord.inconclusive("first_hit_time", why, **inputs),
                BoundCheckRecord.inconclusive("first_hit_point", why, **inputs))
    grow = math.exp(consts.L * max(tau, lam_))
    C, F = consts.C, consts.F
    return (
        BoundCheckRecord.evaluate("first_hit_time", abs(tau - lam_), C * grow * sep, tau=tau, lam=lam_, **inputs),
        BoundCheckRecord.evaluate("first_hit_point", float(np.linalg.norm(x1 - z1)), (1 + F * C) * grow * sep, **inputs),
    )


def check_iterated_bounds(
    system: HybridSystem,
    x,
    z,
    u,
    q: int = 0,
    v=(),
    i_max: int | None = None,
    T_max: float = 20.0,
    dt: float = 0.01,
    consts: ConstantsEstimate | None = None,
) -> list[BoundCheckRecord]:
    """Bounds on every ``i``-th hitting time/point and on the reach time/point.

    Both trajectories follow the open-loop control ``u`` and consume the same
    discrete controls ``v``. A differing number of hits before reaching the
    target gives a single inconclusive ``equal_hit_count`` record.
    """
    return _iterated(system, x, z, u, q, v, i_max, T_max, dt, _consts(system, consts))[0]


def _iterated(system, x, z, u, q, v, i_max, T_max, dt, consts):
    """Iterated-bound records plus the two hit counts (``None`` when a run does not reach)."""
    x, z = np.asarray(x, dtype=float), np.asarray(z, dtype=float)
    policy = ControlPolicy(_as_schedule(u, system), v)
    sep = float(np.linalg.norm(x - z))
    inputs = dict(x=x, z=z, mode=q, separation=sep)
    try:
        tx = simulate(system, x, q, policy, T_max, dt)
        tz = simulate(system, z, q, policy, T_max, dt)
    except ModelViolation as exc:
        return [BoundCheckRecord.inconclusive("iterated", f"simulation left the model: {exc}", **inputs)], None
    if not (tx.reached and tz.reached):
        return [BoundCheckRecord.inconclusive("reach", "a trajectory does not reach the target", **inputs)], None
    hx, hz = tx.hits, tz.hits
    counts = (len(hx), len(hz))
    if len(hx) != len(hz):
        return [BoundCheckRecord.inconclusive("equal_hit_count", f"hit counts {len(hx)} and {len(hz)} differ", **inputs)], counts
    C, F, L, P = consts.C, consts.F, consts.L, consts.P
    records = []
    n = len(hx)
    for i, (a, b) in enumerate(zip(hx, hz), start=1):
        if i_max is not None and i > i_max:
            break
        grow = math.exp(L * max(a.t, b.t)) * P ** (i - 1)
        records.append(BoundCheckRecord.evaluate("iterated_time", abs(a.t - b.t), C * grow * sep, i=i, **inputs))
        records.append(BoundCheckRecord.evaluate("iterated_point", float(np.linalg.norm(a.x - b.x)), (F * C + 1) * grow * sep, i=i, **inputs))
    ex, ez = tx.final, tz.final
    grow = math.exp(L * max(ex.t, ez.t)) * P**n
    records.append(BoundCheckRecord.evaluate("reach_time", abs(ex.t - ez.t), C * grow * sep, n=n, **inputs))
    records.append(BoundCheckRecord.evaluate("reach_point", float(np.linalg.norm(ex.x - ez.x)), (F * C + 1) * grow * sep, n=n, **inputs))
    return records, counts


def _hit_count(system, x, q, policy, T_max, dt) -> int | None:
    try:
        tr = simulate(system, x, q, policy, T_max, dt)
    except ModelViolation:
        return None
    return len(tr.hits) if tr.reached else None


@dataclass
class HitCountReport:
    """Separations of sampled pairs and whether their hit counts agreed.

    ``delta_bar`` is the smallest separation at which counts differed (``inf``
    when they never did), so every sampled pair closer than it agreed.
    """

    separations: np.ndarray
    equal: np.ndarray
    delta_bar: float
    largest_violation: float

    @property
    def n_below(self) -> int:
        return int(np.sum(self.separations < self.delta_bar))

    @property
    def verdict(self) -> str:
        if len(self.separations) == 0:
            return INCONCLUSIVE
        return PASS if self.delta_bar > 0 and self.n_below > 0 else FAIL

    def to_dict(self) -> dict:
        return {
            "pairs": int(len(self.separations)),
            "delta_bar": None if math.isinf(self.delta_bar) else self.delta_bar,
            "largest_violation": self.largest_violation,
            "pairs_below_delta_bar": self.n_below,
            "verdict": self.verdict,
        }


def measure_hit_count_separation(
    system: HybridSystem, pairs, q: int, policy: ControlPolicy, T_max: float = 20.0, dt: float = 0.01
) -> HitCountReport:
    results = []
    for x, z in pairs:
        nx = _hit_count(system, x, q, policy, T_max, dt)
        nz = _hit_count(system, z, q, policy, T_max, dt)
        if nx is not None and nz is not None:
            results.append((float(np.linalg.norm(np.asarray(x) - np.asarray(z))), nx == nz))
    return _hit_report(results)


def _hit_report(results: list[tuple[float, bool]]) -> HitCountReport:
    seps = np.array([r[0] for r in results], dtype=float)
    equal = np.array([r[1] for r in results], dtype=bool)
    bad = seps[~equal]
    return HitCountReport(seps, equal, float(bad.min()) if len(bad) else math.inf, float(bad.max()) if len(bad) else 0.0)


# --------------------------------------------------------------------------- the sampled suite


@dataclass
class SuiteReport:
    records: list[BoundCheckRecord]
    hit_count: list[HitCountReport]
    seed: int

    def counts(self, name: str | None = None) -> dict[str, int]:
        recs = [r for r in self.records if name is None or r.name == name]
        return {v: sum(r.verdict == v for r in recs) for v in (PASS, FAIL, INCONCLUSIVE)}

    @property
    def failures(self) -> list[BoundCheckRecord]:
        return [r for r in self.records if r.verdict == FAIL]

    @property
    def passed(self) -> bool:
        return not self.failures and all(h.verdict != FAIL for h in self.hit_count)

    def to_dict(self, include_records: bool = True) -> dict:
        names = sorted({r.name for r in self.records})
        out = {
            "seed": self.seed,
            "counts": {n: self.counts(n) for n in names},
            "hit_count": [h.to_dict() for h in self.hit_count],
            "passed": self.passed,
        }
        if include_records:
            out["records"] = [r.to_dict() for r in sorted(self.records, key=lambda r: r.name)]
        return out


def _start_points(system: HybridSystem, q: int, n: int, rng) -> np.ndarray:
    mode = system.modes[q]
    pts = rng.uniform(mode.domain.lo, mode.domain.hi, size=(8 * n, mode.dim))
    keep = mode.A.sdf(pts) > EPS_EVENT if mode.A is not None else np.ones(len(pts), dtype=bool)
    if q == system.target_mode:
        keep &= system.target.sdf(pts) > EPS_EVENT
    return pts[keep][:n]


def bound_suite(
    system: HybridSystem,
    samples: int = 1000,
    seed: int = 0,
    dt: float = 0.05,
    T_max: float = 20.0,
    max_sep: float | None = None,
    consts: ConstantsEstimate | None = None,
) -> SuiteReport:
    """Band hitting-time, first-hit and iterated bounds on ``samples`` seeded draws each.

    Pairs ``(x, z)`` start in a mode with an autonomous-jump set, ``z`` at a
    log-uniform separation up to ``max_sep`` (default ``beta/4``), and share a
    random constant control and random discrete controls.
    """
    consts = _consts(system, consts)
    rng = np.random.default_rng(seed)
    max_sep = system.beta / 4 if max_sep is None else max_sep
    records = check_lemma1(system, samples, seed, dt, consts)
    hit_reports = []
    modes = [q for q, m in enumerate(system.modes) if m.A is not None]
    for k, q in enumerate(modes):
        n = samples // len(modes) + (1 if k < samples % len(modes) else 0)
        xs = _start_points(system, q, n, rng)
        mode = system.modes[q]
        counted = []
        for x in xs:
            for _ in range(20):
                direction = rng.standard_normal(mode.dim)
                direction /= np.linalg.norm(direction)
                z = x + math.exp(rng.uniform(math.log(1e-4), math.log(max_sep))) * direction
                if mode.domain.sdf(z) <= 0 and (mode.A.sdf(z) > EPS_EVENT) and (
                    q != system.target_mode or system.target.sdf(z) > EPS_EVENT
                ):
                    break
            else:
                continue
            u = _random_control(system, q, rng)
            vs = tuple(
                int(rng.choice([j.v for j in system.jumps_from(p)] or [0]))
                for p in _mode_walk(system, q, max(1, len(system.jumps)))
            )
            records.extend(check_first_hit_bounds(system, x, z, u, q, T_max, dt, consts))
            recs, counts = _iterated(system, x, z, u, q, vs, None, T_max, dt, consts)
            records.extend(recs)
            if counts is not None:
                counted.append((float(np.linalg.norm(x - z)), counts[0] == counts[1]))
        hit_reports.append(_hit_report(counted))
    return SuiteReport(records, hit_reports, seed)


def _mode_walk(system: HybridSystem, q: int, n: int) -> list[int]:
    """Modes visited by following the lowest discrete control from ``q`` (for drawing ``v``)."""
    walk = []
    for _ in range(n):
        walk.append(q)
        js = system.jumps_from(q)
        if not js:
            break
        q = js[0].target
    return walk


# --------------------------------------------------------------------------- dynamic programming


@dataclass
class DPPResult:
    residual: float
    value: float
    best: float
    best_policy: str
    x: np.ndarray
    q: int
    T: float

    def to_dict(self) -> dict:
        return {"residual": self.residual, "value": self.value, "best": self.best, "best_policy": self.best_policy,
                "x": self.x.tolist(), "q": self.q, "T": self.T}


def policy_bundle(
    system: HybridSystem, table: PolicyTable | None, rng: np.random.Generator, n_random: int = 4, horizon: float = 2.0
) -> list[tuple[str, ControlPolicy]]:
    """Greedy feedback from the field, constant controls and random piecewise-constant schedules."""
    bundle = []
    if table is not None:
        bundle.append(("greedy", table.as_policy()))
    us = system.modes[0].dynamics.controls.discretize(3)
    for k, u in enumerate(us):
        bundle.append((f"constant[{k}]", ControlPolicy.constant(u)))
    for k in range(n_random):
        n_pieces = int(rng.integers(2, 6))
        breaks = np.sort(rng.uniform(0, horizon, size=n_pieces - 1))
        values = us[rng.integers(len(us), size=n_pieces)]
        vs = tuple(int(v) for v in rng.integers(0, 1 + max((j.v for j in system.jumps), default=0), size=8))
        bundle.append((f"random[{k}]", ControlPolicy(ControlSchedule(breaks, values), vs)))
    return bundle


def check_dpp(
    system: HybridSystem,
    field: ValueField,
    x,
    q: int,
    T: float,
    bundle: list[tuple[str, ControlPolicy]],
    dt: float = 0.005,
) -> DPPResult:
    """``|V(x,q) - min over the bundle of (cost on [0, T^t_x] + e^{-lam (T^t_x)} V(stop))|``."""
    x = np.asarray(x, dtype=float)
    value = field(x, q) if system.sdf("Gamma", q, x) > 0 else float(system.terminal_cost(x))
    best, best_name = math.inf, ""
    for name, policy in bundle:
        try:
            traj = simulate(system, x, q, policy, T, dt)
        except ModelViolation:
            continue
        cost = evaluate_cost(system, traj, policy)
        end = traj.final
        if isinstance(end, Reach):
            total = cost.value
        else:
            stop = end.x
            if system.sdf("Gamma", end.q, stop) <= 0:
                tail = float(system.terminal_cost(stop))
            else:
                tail = field(stop, end.q)
            total = cost.running + cost.autonomous + cost.controlled + math.exp(-system.lam * end.t) * tail
        if total < best:
            best, best_name = total, name
    return DPPResult(abs(value - best), value, best, best_name, x, q, T)


def dpp_sample(
    system: HybridSystem,
    field: ValueField,
    dt: float,
    n: int = 100,
    seed: int = 0,
    T_range: tuple[float, float] = (0.05, 1.0),
    n_random: int = 4,
    threads: int = 1,
) -> list[DPPResult]:
    """DPP residuals at ``n`` random ``(x, q, T)``.

    Sample ``k`` draws from its own generator seeded with ``(seed, k)``, so the
    results do not depend on ``threads``.
    """
    table = extract_policy(system, field, dt)

    def one(k: int) -> DPPResult:
        rng = np.random.default_rng([seed, k])
        q = int(rng.integers(system.n_modes))
        box = system.modes[q].domain
        x = rng.uniform(box.lo, box.hi)
        T = float(rng.uniform(*T_range))
        return check_dpp(system, field, x, q, T, policy_bundle(system, table, rng, n_random, horizon=T), dt)

    if threads <= 1:
        return [one(k) for k in range(n)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, range(n)))


# --------------------------------------------------------------------------- boundedness and regularity


def check_value_bound(system: HybridSystem, field: ValueField, consts: ConstantsEstimate | None = None) -> BoundCheckRecord:
    """Largest nodal value inside the domains against the bound with ``tau_1 = 0``."""
    consts = consts if consts is not None else estimate_constants(system, require_transversality=False)
    vmax = max(float(v[g.classes != OUTSIDE].max()) for v, g in zip(field.values, field.grid.modes))
    return BoundCheckRecord.evaluate("value_bound", vmax, consts.value_bound(0.0))


@dataclass
class HolderSummary:
    exponent: float
    r2: float
    n_pairs: int
    verdict: str
    distances: np.ndarray = field(repr=False, default=None)
    differences: np.ndarray = field(repr=False, default=None)

    def to_dict(self) -> dict:
        return {"exponent": None if math.isnan(self.exponent) else self.exponent,
                "r2": None if math.isnan(self.r2) else self.r2, "pairs": self.n_pairs, "verdict": self.verdict}


def estimate_holder(
    system: HybridSystem,
    field: ValueField,
    q: int,
    region: Box,
    pairs: int = 200,
    seed: int = 0,
    window: tuple[float, float] | None = None,
    flat_tol: float = 1e-12,
) -> HolderSummary:
    """Log-log fit of ``|V(x) - V(z)|`` against ``|x - z|`` for separations in ``window``.

    The window defaults to ``[dx, 10 dx]``. Points closer than ``beta/2`` to
    the target are discarded. Only a positive exponent is asserted.
    """
    rng = np.random.default_rng(seed)
    dx = field.grid.dx
    lo_w, hi_w = window if window is not None else (dx, 10 * dx)
    d = region.dim
    xs = rng.uniform(region.lo, region.hi, size=(4 * pairs, d))
    direction = rng.standard_normal((4 * pairs, d))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    r = np.exp(rng.uniform(math.log(lo_w), math.log(hi_w), size=4 * pairs))
    zs = xs + r[:, None] * direction
    keep = region.sdf(zs) <= 0
    if q == system.target_mode:
        keep &= (system.target.sdf(xs) >= system.beta / 2) & (system.target.sdf(zs) >= system.beta / 2)
    xs, zs, r = xs[keep][:pairs], zs[keep][:pairs], r[keep][:pairs]
    dv = np.abs(field(xs, q) - field(zs, q))
    live = dv > flat_tol
    if live.sum() < 3:
        return HolderSummary(math.nan, math.nan, int(len(r)), "flat", r, dv)
    lx, ly = np.log(r[live]), np.log(dv[live])
    slope, icpt = np.polyfit(lx, ly, 1)
    pred = slope * lx + icpt
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum((ly - pred) ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return HolderSummary(float(slope), r2, int(len(r)), PASS if slope > 0 else FAIL, r, dv)


# --------------------------------------------------------------------------- uniqueness and operator properties


@dataclass
class UniquenessResult:
    gap: float
    gaps: list[float]
    iterations: int
    converged: bool
    contraction_ok: bool
    verdict: str

    def to_dict(self) -> dict:
        return {"gap": self.gap, "iterations": self.iterations, "converged": self.converged,
                "contraction_ok": self.contraction_ok, "verdict": self.verdict}


def check_uniqueness(
    system: HybridSystem,
    grid: Grid,
    dt: float,
    tol: float = 1e-8,
    max_iter: int = 200_000,
    gap_factor: float = 10.0,
) -> UniquenessResult:
    """Iterate from ``+B_V`` and ``-B_V`` in lockstep and compare the limits.

    Also checks the gap sequence against ``g_n <= e^{-lam dt n} g_0`` (with a
    round-off allowance) at every iteration.
    """
    consts = estimate_constants(system, require_transversality=False)
    scheme = _Scheme(system, grid, dt, consts)
    B = value_bound(consts)
    up = [np.full(g.size, B) for g in grid.modes]
    dn = [np.full(g.size, -B) for g in grid.modes]

    def dist(a, b):
        return max(float(np.max(np.abs(x - y))) for x, y in zip(a, b))

    gaps = [dist(up, dn)]
    ok = True
    done_up = done_dn = False
    it = 0
    for it in range(1, max_iter + 1):
        nu, nd = scheme.apply(up), scheme.apply(dn)
        done_up, done_dn = dist(nu, up) <= tol, dist(nd, dn) <= tol
        up, dn = nu, nd
        gaps.append(dist(up, dn))
        if gaps[-1] > scheme.rho**it * gaps[0] + 1e-12 * it * (1 + B):
            ok = False
        if done_up and done_dn:
            break
    converged = done_up and done_dn
    gap = gaps[-1]
    if not converged:
        verdict = INCONCLUSIVE
    else:
        verdict = PASS if gap <= gap_factor * tol and ok else FAIL
    return UniquenessResult(gap, gaps, it, converged, ok, verdict)


@dataclass
class OperatorReport:
    pairs: int
    contraction_violations: int
    monotonicity_violations: int
    worst_ratio: float
    rho: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def operator_properties(system: HybridSystem, grid: Grid, dt: float, pairs: int = 100, seed: int = 0) -> OperatorReport:
    """Sup-norm contraction by ``e^{-lam dt}`` and monotonicity of one sweep on random field pairs.

    Half of the pairs are ordered (``V2 = V1 + nonnegative``) to exercise
    monotonicity; all pairs are checked for contraction.
    """
    consts = estimate_constants(system, require_transversality=False)
    scheme = _Scheme(system, grid, dt, consts)
    B = value_bound(consts)
    rng = np.random.default_rng(seed)
    c_bad = m_bad = 0
    worst = 0.0
    for k in range(pairs):
        v1 = [rng.uniform(-B, B, size=g.size) for g in grid.modes]
        if k % 2:
            v2 = [a + rng.uniform(0, B, size=a.size) * (rng.random(a.size) < 0.5) for a in v1]
        else:
            v2 = [rng.uniform(-B, B, size=g.size) for g in grid.modes]
        s1, s2 = scheme.apply(v1), scheme.apply(v2)
        before = max(float(np.max(np.abs(a - b))) for a, b in zip(v1, v2))
        after = max(float(np.max(np.abs(a - b))) for a, b in zip(s1, s2))
        if before > 0:
            worst = max(worst, after / before)
        if after > scheme.rho * before + 1e-12:
            c_bad += 1
        if k % 2 and any(np.any(b < a - 1e-12) for a, b in zip(s1, s2)):
            m_bad += 1
    return OperatorReport(pairs, c_bad, m_bad, worst, scheme.rho)
