"""Simulation of hybrid trajectories and evaluation of the discounted cost.

Arcs are integrated with fixed-step classical Runge-Kutta. After each step
the signed distances to ``A``, ``C`` and ``Gamma`` are checked; a sign change
is localized by bisection on the step length to ``EPS_EVENT``. Steps are cut
at control breakpoints so that the control is constant on every step.

Trajectories are left-continuous at jumps; every jump event stores both the
pre- and post-jump state.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import InputError, ModelViolation, ZenoError
from .model import EPS_EVENT, HybridSystem, estimate_constants

__all__ = [
    "ControlSchedule",
    "PlannedJump",
    "ControlPolicy",
    "Arc",
    "AutonomousHit",
    "ControlledJump",
    "SkippedJump",
    "Reach",
    "Truncated",
    "Trajectory",
    "CostBreakdown",
    "integrate_arc",
    "first_hitting_time",
    "apply_autonomous_jump",
    "simulate",
    "evaluate_cost",
    "write_trajectory_csv",
    "policy_from_dict",
]

N_ZENO = 10


# --------------------------------------------------------------------------- policies


@dataclass(frozen=True, eq=False)
class ControlSchedule:
    """Piecewise-constant control: ``values[k]`` holds on ``[breaks[k-1], breaks[k])``."""

    breaks: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        b = np.array(self.breaks, dtype=float).reshape(-1)
        v = np.array(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if len(v) != len(b) + 1:
            raise InputError("a schedule needs one more value than breakpoints")
        if np.any(np.diff(b) <= 0):
            raise InputError("schedule breakpoints must be strictly increasing")
        b.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "breaks", b)
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, u) -> "ControlSchedule":
        return cls(np.empty(0), np.atleast_1d(np.asarray(u, dtype=float))[None, :])

    def __call__(self, t: float) -> np.ndarray:
        return self.values[np.searchsorted(self.breaks, t, side="right")]

    def next_break(self, t: float) -> float:
        k = np.searchsorted(self.breaks, t, side="right")
        return float(self.breaks[k]) if k < len(self.breaks) else math.inf

    def to_dict(self) -> dict:
        return {"breaks": self.breaks.tolist(), "values": self.values.tolist()}


@dataclass(frozen=True)
class PlannedJump:
    """A controlled jump at ``time`` (or on entry to C when ``time`` is None)."""

    dest: tuple[float, ...]
    mode: int
    time: float | None = None


@dataclass(frozen=True, eq=False)
class ControlPolicy:
    """Open-loop continuous control plus discrete jump decisions.

    ``u`` is a :class:`ControlSchedule` or a feedback ``u(x, q, t)`` held over
    each integration step. ``v`` is either the sequence of discrete controls
    consumed in hit order (``default_v`` once exhausted) or ``v(x, q)``.
    ``jump_rule(x, q, t)`` may return ``(dest, mode)`` to jump while in C.
    """

    u: ControlSchedule | Callable
    v: Sequence[int] | Callable = ()
    jumps: tuple[PlannedJump, ...] = ()
    jump_rule: Callable | None = None
    default_v: int = 0

    def __post_init__(self):
        if not callable(self.v):
            object.__setattr__(self, "v", tuple(int(k) for k in self.v))
        timed = [j.time for j in self.jumps if j.time is not None]
        if any(b <= a for a, b in zip(timed, timed[1:])):
            raise InputError("scheduled controlled jumps must have increasing times")
        object.__setattr__(self, "jumps", tuple(self.jumps))

    def control(self, x, q: int, t: float) -> np.ndarray:
        if isinstance(self.u, ControlSchedule):
            return self.u(t)
        return np.atleast_1d(np.asarray(self.u(x, q, t), dtype=float))

    def next_break(self, t: float) -> float:
        return self.u.next_break(t) if isinstance(self.u, ControlSchedule) else math.inf

    def choose_v(self, k: int, x, q: int) -> int:
        if callable(self.v):
            return int(self.v(x, q))
        return self.v[k] if k < len(self.v) else self.default_v

    @classmethod
    def constant(cls, u, v: Sequence[int] = ()) -> "ControlPolicy":
        return cls(ControlSchedule.constant(u), v)


def policy_from_dict(entry: dict, control_dim: int) -> ControlPolicy:
    """Build a policy from the ``policy`` sub-tree of an instance file."""
    u = entry.get("u", {"breaks": [], "values": [[0.0] * control_dim]})
    sched = ControlSchedule(u.get("breaks", []), u["values"])
    if sched.values.shape[1] != control_dim:
        raise InputError("policy control values have the wrong dimension")
    jumps = tuple(
        PlannedJump(tuple(float(c) for c in jp["dest"]), int(jp["mode"]), jp.get("time"))
        for jp in entry.get("controlled", [])
    )
    return ControlPolicy(sched, tuple(entry.get("v", ())), jumps, default_v=int(entry.get("default_v", 0)))


# --------------------------------------------------------------------------- records


@dataclass
class Arc:
    """Continuous evolution in one mode.

    ``times``/``states`` interleave step endpoints and step midpoints, so step
    ``k`` spans samples ``2k, 2k+1, 2k+2``; ``controls[k]`` is its control.
    """

    q: int
    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray

    @property
    def t_start(self) -> float:
        return float(self.times[0])

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    @property
    def x_end(self) -> np.ndarray:
        return self.states[-1]

    @property
    def n_steps(self) -> int:
        return len(self.controls)


@dataclass(frozen=True)
class AutonomousHit:
    t: float
    x: np.ndarray
    q: int
    v: int
    x_post: np.ndarray
    q_post: int
    tag = "autonomous"


@dataclass(frozen=True)
class ControlledJump:
    t: float
    x: np.ndarray
    q: int
    x_post: np.ndarray
    q_post: int
    tag = "controlled"


@dataclass(frozen=True)
class SkippedJump:
    t: float
    x: np.ndarray
    q: int
    tag = "skipped"


@dataclass(frozen=True)
class Reach:
    t: float
    x: np.ndarray
    q: int
    tag = "reach"


@dataclass(frozen=True)
class Truncated:
    t: float
    x: np.ndarray
    q: int
    tag = "truncated"


@dataclass
class Trajectory:
    arcs: list[Arc] = field(default_factory=list)
    events: list = field(default_factory=list)
    policy: ControlPolicy | None = None
    dwell_violations: int = 0

    @property
    def hits(self) -> list[AutonomousHit]:
        return [e for e in self.events if isinstance(e, AutonomousHit)]

    @property
    def controlled_jumps(self) -> list[ControlledJump]:
        return [e for e in self.events if isinstance(e, ControlledJump)]

    @property
    def reached(self) -> bool:
        return bool(self.events) and isinstance(self.events[-1], Reach)

    @property
    def reach_time(self) -> float:
        """Reach time ``t_x``; ``inf`` for truncated runs."""
        return self.events[-1].t if self.reached else math.inf

    @property
    def final(self):
        return self.events[-1]


# --------------------------------------------------------------------------- integration


def _rk4(f: Callable, x: np.ndarray, h: float) -> np.ndarray:
    k1 = f(x)
    k2 = f(x + 0.5 * h * k1)
    k3 = f(x + 0.5 * h * k2)
    k4 = f(x + h * k3)
    return x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def _affine_rk4(A: np.ndarray, b: np.ndarray) -> Callable:
    """Classical RK4 step for ``f(y) = A y + b``.

    For an affine field the four stages collapse to
    ``x + h (r + h/2 A r + h^2/6 A^2 r + h^3/24 A^3 r)`` with ``r = A x + b``,
    which is the same update with three matrix-vector products.
    """
    if not A.any():
        return lambda x, h: x + h * b

    def step(x, h):
        r = A @ x + b
        ar = A @ r
        a2r = A @ ar
        return x + h * (r + (h / 2) * ar + (h * h / 6) * a2r + (h**3 / 24) * (A @ a2r))

    return step


def _localize(step: Callable, x, h, sdf, eps) -> float:
    """Smallest step length ``s <= h`` (to within ``eps``) with ``sdf(step(x, s)) <= 0``."""
    lo, hi = 0.0, h
    while hi - lo > eps:
        mid = 0.5 * (lo + hi)
        if sdf(step(x, mid)) <= 0:
            hi = mid
        else:
            lo = mid
    return hi


def integrate_arc(
    system: HybridSystem,
    x0,
    q: int,
    u,
    t_end: float,
    dt: float,
    t0: float = 0.0,
    detect: Sequence[str] = ("A", "C", "Gamma"),
    on_exit: str = "raise",
    eps: float = EPS_EVENT,
) -> tuple[Arc, str]:
    """Integrate mode ``q`` from ``(t0, x0)`` until an event or ``t_end``.

    ``u`` is a :class:`ControlSchedule`, a :class:`ControlPolicy` or a constant
    control vector. Returns the arc and a stop reason among ``hit-A``,
    ``entered-C``, ``hit-Gamma``, ``time-out`` and (with ``on_exit="stop"``)
    ``exit-domain``.
    """
    if dt <= 0:
        raise InputError("dt must be positive")
    if not isinstance(u, (ControlSchedule, ControlPolicy)):
        u = ControlSchedule.constant(u)
    policy = u if isinstance(u, ControlPolicy) else ControlPolicy(u)
    mode = system.modes[q]
    x = np.array(x0, dtype=float)
    if x.shape != (mode.dim,):
        raise InputError(f"state has shape {x.shape}, mode {q} has dimension {mode.dim}")
    if mode.domain.sdf(x) > eps:
        raise InputError(f"initial state {x} lies outside the domain of mode {q}")

    regions = {k: system.region(k, q) for k in detect if system.region(k, q) is not None}
    times, states, controls = [t0], [x.copy()], []

    def arc():
        return Arc(q, np.array(times), np.array(states), np.array(controls).reshape(len(controls), system.control_dim))

    if "Gamma" in regions and regions["Gamma"].sdf(x) <= 0:
        return arc(), "hit-Gamma"
    if "A" in regions and regions["A"].sdf(x) <= eps:
        return arc(), "hit-A"
    prev = {k: r.sdf(x) for k, r in regions.items()}

    dyn = mode.dynamics
    t = t0
    while t < t_end - 1e-14:
        h = min(dt, t_end - t, policy.next_break(t) - t)
        uk = policy.control(x, q, t)
        step = _affine_rk4(dyn.A, dyn.B @ uk + dyn.c)
        x_new = step(x, h)
        new = {k: r.sdf(x_new) for k, r in regions.items()}
        crossed = [k for k in regions if prev[k] > 0 and new[k] <= 0]
        if crossed:
            # Gamma wins ties so the run stops rather than jumping
            order = {"Gamma": 0, "A": 1, "C": 2}
            best_k, best_s = None, math.inf
            for k in sorted(crossed, key=order.get):
                s = _localize(step, x, h, regions[k].sdf, eps)
                if s < best_s - eps:
                    best_k, best_s = k, s
            times += [t + 0.5 * best_s, t + best_s]
            states += [step(x, 0.5 * best_s), step(x, best_s)]
            controls.append(uk)
            reason = {"A": "hit-A", "C": "entered-C", "Gamma": "hit-Gamma"}[best_k]
            return arc(), reason
        if mode.domain.sdf(x_new) > eps:
            if on_exit == "stop":
                return arc(), "exit-domain"
            raise ModelViolation(f"trajectory left the domain of mode {q} at t={t + h:.6g}, x={x_new}")
        times += [t + 0.5 * h, t + h]
        states += [step(x, 0.5 * h), x_new]
        controls.append(uk)
        x, t, prev = x_new, t + h, new
    return arc(), "time-out"


def first_hitting_time(system: HybridSystem, x, q: int, u, T_max: float, dt: float = 0.01) -> float:
    """First time the mode-``q`` flow from ``x`` reaches ``A_q``; ``inf`` if not within ``T_max``."""
    if system.modes[q].A is None:
        return math.inf
    arc, reason = integrate_arc(system, x, q, u, T_max, dt, detect=("A",), on_exit="stop")
    return arc.t_end if reason == "hit-A" else math.inf


def apply_autonomous_jump(system: HybridSystem, x, q: int, v: int, eps: float = 1e-7) -> tuple[np.ndarray, int]:
    """Apply the transition map at a hit point of ``A_q``."""
    x = np.asarray(x, dtype=float)
    if system.sdf("A", q, x) > eps:
        raise InputError(f"state {x} is not in the autonomous jump set of mode {q}")
    jump = system.jump(q, v)
    y = jump(x)
    dest = system.modes[jump.target].D
    if dest is None or dest.sdf(y) > eps:
        raise ModelViolation(f"transition map sends {x} to {y}, outside D of mode {jump.target}")
    return y, jump.target


# --------------------------------------------------------------------------- simulation


def simulate(
    system: HybridSystem,
    x0,
    q0: int,
    policy: ControlPolicy,
    T_max: float,
    dt: float = 0.01,
    eps: float = EPS_EVENT,
) -> Trajectory:
    """Run the hybrid system from ``(x0, q0)`` under ``policy`` until reach or ``T_max``."""
    x = np.array(x0, dtype=float)
    q = int(q0)
    traj = Trajectory(policy=policy)
    if system.sdf("Gamma", q, x) <= 0:
        traj.events.append(Reach(0.0, x, q))
        return traj

    F = max(m.dynamics.speed_bound(m.domain) for m in system.modes)
    min_dwell = system.beta / F - 2 * eps if F > 0 else math.inf

    planned = list(policy.jumps)
    t = 0.0
    n_hits = 0
    last_event = -math.inf
    last_hit = -math.inf
    zeno = 0

    def note_event(te):
        nonlocal last_event, zeno
        if te - last_event < eps:
            zeno += 1
            if zeno > N_ZENO:
                raise ZenoError(f"more than {N_ZENO} events within {eps} of each other")
        last_event = te

    while True:
        if t >= T_max - 1e-14:
            traj.events.append(Truncated(T_max, x, q))
            break
        head = planned[0] if planned else None
        if head is not None and head.time is not None and head.time < t - eps:
            raise InputError(f"scheduled jump at t={head.time} lies in the past")
        t_stop = T_max
        if head is not None and head.time is not None:
            t_stop = min(T_max, head.time)
        watch_C = (head is not None and head.time is None) or policy.jump_rule is not None
        in_C = system.sdf("C", q, x) <= eps

        if policy.jump_rule is not None and in_C:
            choice = policy.jump_rule(x, q, t)
            if choice is not None:
                x, q = _controlled_jump(system, traj, t, x, q, *choice)
                note_event(t)
                continue
            # stay inside C one step at a time so the rule is consulted again
            t_stop = min(t_stop, t + dt)

        detect = ("A", "C", "Gamma") if watch_C else ("A", "Gamma")
        arc, reason = integrate_arc(system, x, q, policy, t_stop, dt, t0=t, detect=detect, eps=eps)
        if arc.n_steps:
            traj.arcs.append(arc)
        x, t = arc.x_end.copy(), arc.t_end

        if reason == "hit-Gamma":
            traj.events.append(Reach(t, x, q))
            break
        if reason == "hit-A":
            v = policy.choose_v(n_hits, x, q)
            x_post, q_post = apply_autonomous_jump(system, x, q, v)
            traj.events.append(AutonomousHit(t, x, q, v, x_post, q_post))
            if t - last_hit < min_dwell:
                traj.dwell_violations += 1
                warnings.warn(f"autonomous hits {t - last_hit:.3g} apart, below beta/F", RuntimeWarning)
            last_hit = t
            note_event(t)
            n_hits += 1
            x, q = x_post, q_post
            continue
        if reason == "entered-C":
            if head is not None and head.time is None:
                planned.pop(0)
                x, q = _controlled_jump(system, traj, t, x, q, head.dest, head.mode)
                note_event(t)
            elif policy.jump_rule is not None:
                choice = policy.jump_rule(x, q, t)
                if choice is not None:
                    x, q = _controlled_jump(system, traj, t, x, q, *choice)
                    note_event(t)
            continue
        # time-out: either a scheduled jump time or T_max
        if head is not None and head.time is not None and t >= head.time - 1e-12:
            planned.pop(0)
            if system.sdf("C", q, x) <= eps:
                x, q = _controlled_jump(system, traj, t, x, q, head.dest, head.mode)
                note_event(t)
            else:
                traj.events.append(SkippedJump(t, x.copy(), q))
    return traj


def _controlled_jump(system, traj, t, x, q, dest, mode):
    y = np.array(dest, dtype=float)
    mode = int(mode)
    D = system.modes[mode].D
    if D is None or y.shape != (system.modes[mode].dim,) or D.sdf(y) > EPS_EVENT:
        raise ModelViolation(f"controlled jump destination {y} is not in D of mode {mode}")
    if not np.isfinite(system.controlled_cost(x, q, y, mode)):
        raise ModelViolation(f"no controlled jump cost from mode {q} to mode {mode}")
    traj.events.append(ControlledJump(t, x.copy(), q, y, mode))
    return y, mode


# --------------------------------------------------------------------------- cost


@dataclass(frozen=True)
class CostBreakdown:
    running: float
    autonomous: float
    controlled: float
    terminal: float
    truncation_bound: float = 0.0

    @property
    def value(self) -> float:
        return self.running + self.autonomous + self.controlled + self.terminal

    def __float__(self) -> float:
        return self.value


def running_cost_integral(system: HybridSystem, arc: Arc) -> float:
    """Composite Simpson rule for the discounted running cost over one arc."""
    if arc.n_steps == 0:
        return 0.0
    t = arc.times
    # each panel uses its own control at all three nodes: K may jump at a control break
    g = np.empty((arc.n_steps, 3))
    for k in range(arc.n_steps):
        sl = slice(2 * k, 2 * k + 3)
        g[k] = system.running_cost(arc.states[sl], arc.q, arc.controls[k]) * np.exp(-system.lam * t[sl])
    h = t[2::2] - t[0:-2:2]
    return float(np.sum(h / 6.0 * (g[:, 0] + 4 * g[:, 1] + g[:, 2])))


def evaluate_cost(system: HybridSystem, trajectory: Trajectory, policy: ControlPolicy) -> CostBreakdown:
    """Discounted total cost of a simulated run.

    Truncated runs return the partial sum and report
    ``e^{-lam T}(K0/lam + C0/(1 - e^{-lam beta/F}) + H)`` as ``truncation_bound``.
    """
    if trajectory.policy is not policy:
        raise InputError("trajectory was not produced by this policy")
    lam = system.lam
    running = sum(running_cost_integral(system, arc) for arc in trajectory.arcs)
    auto = sum(system.autonomous_cost(e.x, e.q, e.v) * math.exp(-lam * e.t) for e in trajectory.hits)
    ctrl = sum(
        system.controlled_cost(e.x, e.q, e.x_post, e.q_post) * math.exp(-lam * e.t)
        for e in trajectory.controlled_jumps
    )
    terminal = 0.0
    bound = 0.0
    end = trajectory.final
    if isinstance(end, Reach):
        terminal = float(system.terminal_cost(end.x)) * math.exp(-lam * end.t)
    else:
        consts = estimate_constants(system, require_transversality=False)
        bound = math.exp(-lam * end.t) * consts.value_bound(0.0)
    return CostBreakdown(float(running), float(auto), float(ctrl), terminal, bound)


# --------------------------------------------------------------------------- export


def write_trajectory_csv(trajectory: Trajectory, path) -> None:
    """One row per sample (``event`` empty) plus one row per event, in time order."""
    dims = [a.states.shape[1] for a in trajectory.arcs] + [len(np.atleast_1d(e.x)) for e in trajectory.events]
    d = max(dims, default=1)
    # arcs are keyed by their end time so an arc precedes the event that stops it
    blocks = [((a.t_end, 0), a) for a in trajectory.arcs] + [((e.t, 1), e) for e in trajectory.events]
    blocks.sort(key=lambda b: b[0])
    rows = []
    for _, item in blocks:
        if isinstance(item, Arc):
            rows += [(t, item.q, list(x), "") for t, x in zip(item.times, item.states)]
        else:
            rows.append((item.t, item.q, list(np.atleast_1d(item.x)), item.tag))
            if hasattr(item, "x_post"):
                rows.append((item.t, item.q_post, list(item.x_post), item.tag + "-post"))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "mode"] + [f"x{i}" for i in range(d)] + ["event"])
        for t, q, x, tag in rows:
            w.writerow([repr(float(t)), q] + [repr(float(v)) for v in x] + [""] * (d - len(x)) + [tag])
