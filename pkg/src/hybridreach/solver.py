"""Semi-Lagrangian value iteration for the reach-time quasi-variational inequality.

One sweep of :func:`bellman_step` updates every grid node according to its
class:

* target nodes take the terminal cost ``h``;
* flow nodes (interior and controlled-jump nodes) take the continuation value
  ``min_u K(x,u) (1 - e^{-lam dt})/lam + e^{-lam dt} V(x + dt f(x,u))``;
* controlled-jump nodes then take ``min(continuation, N V)``;
* autonomous-jump nodes take ``M V = min_v V(g(x,v)) + C_a(x,v)``.

The jump operators read the continuation values computed earlier in the same
sweep. Transition maps land in ``D``, which is separated from ``A`` and
``Gamma``, so every new value is either a constant or a discounted function
of the previous field and the sweep is a sup-norm contraction with factor
``e^{-lam dt}``.

In Hamiltonian form the interior equation is ``V + H(x, q, DV) = 0`` with
``H = sup_u (-K - f.p)/lam``, equivalently ``lam V + sup_u(-K - f.p) = 0``.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError, InputError, ModelViolation
from .model import EPS_EVENT, ConstantsEstimate, HybridSystem, estimate_constants
from .trajectory import ControlPolicy

logger = logging.getLogger(__name__)

__all__ = [
    "INTERIOR",
    "IN_A",
    "IN_C",
    "IN_GAMMA",
    "OUTSIDE",
    "ModeGrid",
    "Grid",
    "ValueField",
    "SolveReport",
    "PolicyTable",
    "hamiltonian",
    "M_operator",
    "N_operator",
    "bellman_step",
    "solve_qvi",
    "extract_policy",
    "value_bound",
    "write_value_csv",
    "read_value_csv",
]

INTERIOR, IN_A, IN_C, IN_GAMMA, OUTSIDE = 0, 1, 2, 3, 4
CLASS_NAMES = {INTERIOR: "interior", IN_A: "in-A", IN_C: "in-C", IN_GAMMA: "in-Gamma", OUTSIDE: "outside"}


# --------------------------------------------------------------------------- grids


@dataclass(frozen=True, eq=False)
class ModeGrid:
    """Tensor lattice over one mode's domain box, nodes stored in C order."""

    lo: np.ndarray
    hi: np.ndarray
    shape: tuple[int, ...]
    points: np.ndarray
    classes: np.ndarray
    in_D: np.ndarray

    @property
    def spacing(self) -> np.ndarray:
        return (self.hi - self.lo) / (np.array(self.shape) - 1)

    @property
    def axes(self) -> list[np.ndarray]:
        return [np.linspace(a, b, n) for a, b, n in zip(self.lo, self.hi, self.shape)]

    @property
    def size(self) -> int:
        return len(self.points)

    @property
    def dim(self) -> int:
        return len(self.shape)

    def clip(self, pts: np.ndarray) -> np.ndarray:
        return np.clip(pts, self.lo, self.hi)

    def stencil(self, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Node indices and multilinear weights, shape ``(n, 2**d)``, for points clamped to the box."""
        pts = self.clip(np.atleast_2d(pts))
        h = self.spacing
        n = np.array(self.shape)
        rel = (pts - self.lo) / h
        cell = np.clip(np.floor(rel).astype(int), 0, n - 2)
        frac = np.clip(rel - cell, 0.0, 1.0)
        strides = np.array([int(np.prod(self.shape[k + 1:])) for k in range(self.dim)])
        corners = np.array(np.meshgrid(*([[0, 1]] * self.dim), indexing="ij")).reshape(self.dim, -1).T
        idx = (cell[:, None, :] + corners[None, :, :]) @ strides
        w = np.prod(np.where(corners[None, :, :] == 1, frac[:, None, :], 1.0 - frac[:, None, :]), axis=2)
        return idx, w

    def interpolation_matrix(self, pts: np.ndarray) -> sp.csr_matrix:
        idx, w = self.stencil(pts)
        rows = np.repeat(np.arange(len(idx)), idx.shape[1])
        return sp.csr_matrix((w.ravel(), (rows, idx.ravel())), shape=(len(idx), self.size))

    def contains(self, pts, tol: float = EPS_EVENT) -> np.ndarray:
        pts = np.atleast_2d(pts)
        return np.all((pts >= self.lo - tol) & (pts <= self.hi + tol), axis=1)

    def lattice(self, refine: int = 1) -> np.ndarray:
        axes = [np.linspace(a, b, (m - 1) * refine + 1) for a, b, m in zip(self.lo, self.hi, self.shape)]
        return np.array(np.meshgrid(*axes, indexing="ij")).reshape(self.dim, -1).T


@dataclass(frozen=True, eq=False)
class Grid:
    modes: tuple[ModeGrid, ...]
    dx: float

    @classmethod
    def build(cls, system: HybridSystem, dx: float, eps: float = EPS_EVENT) -> "Grid":
        """Lattice with spacing at most ``dx`` on every mode domain, nodes classified by signed distance."""
        if dx <= 0:
            raise ConfigurationError("grid spacing must be positive")
        grids = []
        for q, mode in enumerate(system.modes):
            lo, hi = np.array(mode.domain.lo), np.array(mode.domain.hi)
            shape = tuple(max(2, int(math.ceil((b - a) / dx - 1e-9)) + 1) for a, b in zip(lo, hi))
            axes = [np.linspace(a, b, n) for a, b, n in zip(lo, hi, shape)]
            pts = np.array(np.meshgrid(*axes, indexing="ij")).reshape(len(shape), -1).T
            classes = np.full(len(pts), INTERIOR, dtype=np.int8)
            # lowest priority first; later assignments win
            if mode.C is not None:
                classes[mode.C.sdf(pts) <= eps] = IN_C
            if mode.A is not None:
                classes[mode.A.sdf(pts) <= eps] = IN_A
            if q == system.target_mode:
                classes[system.target.sdf(pts) <= eps] = IN_GAMMA
            classes[mode.domain.sdf(pts) > eps] = OUTSIDE
            in_D = mode.D.sdf(pts) <= eps if mode.D is not None else np.zeros(len(pts), dtype=bool)
            for arr in (pts, classes, in_D):
                arr.setflags(write=False)
            grids.append(ModeGrid(lo, hi, shape, pts, classes, in_D))
        return cls(tuple(grids), float(dx))

    @property
    def size(self) -> int:
        return sum(g.size for g in self.modes)


@dataclass(eq=False)
class ValueField:
    """Nodal values per mode with multilinear interpolation clamped at the box faces."""

    grid: Grid
    values: list[np.ndarray]

    @classmethod
    def constant(cls, grid: Grid, c: float) -> "ValueField":
        return cls(grid, [np.full(g.size, float(c)) for g in grid.modes])

    def __call__(self, x, q: int):
        g = self.grid.modes[q]
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        idx, w = g.stencil(x)
        out = np.sum(self.values[q][idx] * w, axis=1)
        return float(out[0]) if single else out

    def copy(self) -> "ValueField":
        return ValueField(self.grid, [v.copy() for v in self.values])

    def sup_distance(self, other: "ValueField") -> float:
        return max(float(np.max(np.abs(a - b))) for a, b in zip(self.values, other.values))

    def max(self) -> float:
        return max(float(v.max()) for v in self.values)

    def min(self) -> float:
        return min(float(v.min()) for v in self.values)

    def nodes(self, q: int) -> np.ndarray:
        return self.grid.modes[q].points


def value_bound(consts: ConstantsEstimate) -> float:
    """``B_V``: the value bound with ``tau_1 = 0`` plus one."""
    return consts.value_bound(0.0) + 1.0


# --------------------------------------------------------------------------- pointwise operators


def hamiltonian(system: HybridSystem, x, q: int, p, levels: int = 3) -> float:
    """``sup_u (-K(x,q,u) - f(x,q,u).p) / lam`` over the discretized control set.

    Exact for affine ``f`` and running costs affine in ``u`` (extremes at
    vertices) or with a norm kink at a lattice point.
    """
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    us = system.modes[q].dynamics.controls.discretize(levels)
    vals = [(-system.running_cost(x, q, u) - float(system.f(x, q, u) @ p)) / system.lam for u in us]
    return float(max(vals))


def _check_hull(grid: ModeGrid, pts: np.ndarray, what: str) -> None:
    if not np.all(grid.contains(pts)):
        bad = pts[~grid.contains(pts)][0]
        raise ModelViolation(f"{what} at {bad} lies outside the target mode's grid")


def M_operator(system: HybridSystem, field: ValueField, x, q: int) -> float:
    """``min_v field(g(x, q, v), q') + C_a(x, q, v)`` over the discrete controls of mode ``q``."""
    x = np.asarray(x, dtype=float)
    best = math.inf
    for jump in system.jumps_from(q):
        y = jump(x)
        _check_hull(field.grid.modes[jump.target], y[None, :], "jump image")
        best = min(best, field(y, jump.target) + float(system.autonomous_cost(x, q, jump.v)))
    return best


def destination_lattice(system: HybridSystem, grid: Grid, q2: int, refine: int = 1) -> np.ndarray:
    """Points of ``D_{q2}`` on the mode lattice refined ``refine`` times."""
    D = system.modes[q2].D
    if D is None:
        return np.empty((0, system.modes[q2].dim))
    pts = grid.modes[q2].lattice(refine)
    return pts[D.sdf(pts) <= EPS_EVENT]


def N_operator(system: HybridSystem, field: ValueField, x, q: int, refine: int = 1) -> float:
    """``min over (x', q') in D x I of field(x', q') + C_c(x, q, x', q')`` on a destination lattice."""
    x = np.asarray(x, dtype=float)
    best = math.inf
    n_dest = 0
    for q2 in range(system.n_modes):
        if (q, q2) not in system.C_c:
            continue
        dest = destination_lattice(system, field.grid, q2, refine)
        n_dest += len(dest)
        if len(dest):
            vals = field(dest, q2) + system.controlled_cost(x, q, dest, q2)
            best = min(best, float(np.min(vals)))
    if n_dest == 0:
        raise ConfigurationError(f"no destination lattice points reachable from mode {q}")
    return best


# --------------------------------------------------------------------------- the discrete scheme


@dataclass
class _ModeOps:
    flow: np.ndarray
    flow_W: list
    flow_cost: np.ndarray
    c_pos: np.ndarray
    c_nodes: np.ndarray
    c_dest: list
    a_nodes: np.ndarray
    a_jumps: list
    gamma_nodes: np.ndarray
    gamma_vals: np.ndarray
    outside: np.ndarray


class _Scheme:
    """Precompiled sparse form of one sweep; all foot points are fixed for a given ``dt``."""

    def __init__(self, system: HybridSystem, grid: Grid, dt: float, consts: ConstantsEstimate, levels: int = 3):
        F = consts.F
        min_dx = min(float(g.spacing.min()) for g in grid.modes)
        if dt <= 0:
            raise ConfigurationError("dt must be positive")
        if F > 0 and dt > min_dx / F * (1 + 1e-12):
            raise ConfigurationError(f"dt={dt} exceeds dx/F={min_dx / F:.6g}")
        if F > 0 and dt >= system.beta / F:
            raise ConfigurationError(f"dt={dt} must be below beta/F={system.beta / F:.6g}")
        self.system, self.grid, self.dt = system, grid, dt
        self.rho = math.exp(-system.lam * dt)
        self.B_V = value_bound(consts)
        self.warnings: list[str] = []
        weight = -math.expm1(-system.lam * dt) / system.lam
        self.ops: list[_ModeOps] = []
        self.controls = []
        for q, g in enumerate(grid.modes):
            mode = system.modes[q]
            pts, cls = g.points, g.classes
            flow = np.flatnonzero((cls == INTERIOR) | (cls == IN_C))
            us = mode.dynamics.controls.discretize(levels)
            self.controls.append(us)
            W, cost = [], []
            for u in us:
                foot = pts[flow] + dt * mode.dynamics(pts[flow], u)
                W.append(g.interpolation_matrix(foot))
                cost.append(weight * system.running_cost(pts[flow], q, u))
            c_nodes = np.flatnonzero(cls == IN_C)
            c_pos = np.searchsorted(flow, c_nodes)
            c_dest = []
            for q2 in range(system.n_modes):
                if (q, q2) not in system.C_c or not len(c_nodes):
                    continue
                dest = destination_lattice(system, grid, q2)
                if len(dest):
                    c_dest.append((q2, dest, grid.modes[q2].interpolation_matrix(dest),
                                   np.asarray(system.controlled_cost(pts[c_nodes][:, None, :], q, dest[None, :, :], q2))))
                    self._check_stencil(q2, dest, "controlled-jump destination")
            if len(c_nodes) and not c_dest:
                raise ConfigurationError(f"mode {q} has controlled-jump nodes but no destination lattice")
            a_nodes = np.flatnonzero(cls == IN_A)
            a_jumps = []
            for jump in system.jumps_from(q):
                if not len(a_nodes):
                    continue
                y = jump(pts[a_nodes])
                _check_hull(grid.modes[jump.target], y, "jump image")
                a_jumps.append((jump.v, jump.target, grid.modes[jump.target].interpolation_matrix(y),
                                np.broadcast_to(system.autonomous_cost(pts[a_nodes], q, jump.v), (len(a_nodes),)).copy(), y))
                self._check_stencil(jump.target, y, "jump image")
            gamma_nodes = np.flatnonzero(cls == IN_GAMMA)
            gamma_vals = np.asarray(system.terminal_cost(pts[gamma_nodes]), dtype=float).reshape(-1)
            self.ops.append(_ModeOps(flow, W, np.array(cost).reshape(len(us), len(flow)), c_pos, c_nodes, c_dest,
                                     a_nodes, a_jumps, gamma_nodes, gamma_vals, np.flatnonzero(cls == OUTSIDE)))

    def _check_stencil(self, q2: int, pts: np.ndarray, what: str) -> None:
        idx, w = self.grid.modes[q2].stencil(pts)
        touched = self.grid.modes[q2].classes[idx[w > 0]]
        if np.any(touched == IN_A):
            msg = f"{what} interpolation in mode {q2} touches autonomous-jump nodes; refine the grid"
            self.warnings.append(msg)
            logger.warning(msg)

    def apply(self, values: list[np.ndarray], want_policy: bool = False):
        new = [np.empty_like(v) for v in values]
        policy = [dict() for _ in values] if want_policy else None
        # phase 1: continuation values, terminal values, padding
        for q, op in enumerate(self.ops):
            cand = op.flow_cost + self.rho * np.vstack([W @ values[q] for W in op.flow_W])
            k = np.argmin(cand, axis=0)
            new[q][op.flow] = cand[k, np.arange(len(op.flow))]
            new[q][op.gamma_nodes] = op.gamma_vals
            new[q][op.outside] = self.B_V
            if want_policy:
                policy[q]["u_index"] = k
        # phase 2: controlled jumps read the continuation values
        cont = [v.copy() for v in new]
        for q, op in enumerate(self.ops):
            if not op.c_dest:
                continue
            nv = np.full(len(op.c_nodes), np.inf)
            best_mode = np.full(len(op.c_nodes), -1)
            best_idx = np.zeros(len(op.c_nodes), dtype=int)
            for q2, dest, Wd, cost in op.c_dest:
                tot = cost + (Wd @ cont[q2])[None, :]
                j = np.argmin(tot, axis=1)
                val = tot[np.arange(len(j)), j]
                better = val < nv
                nv = np.where(better, val, nv)
                best_mode = np.where(better, q2, best_mode)
                best_idx = np.where(better, j, best_idx)
            c_cont = new[q][op.c_nodes]
            jump = nv < c_cont
            new[q][op.c_nodes] = np.where(jump, nv, c_cont)
            if want_policy:
                policy[q]["jump"] = jump
                policy[q]["dest_mode"] = best_mode
                policy[q]["dest"] = [op.c_dest[[d[0] for d in op.c_dest].index(m)][1][i] if m >= 0 else None
                                     for m, i in zip(best_mode, best_idx)]
        # phase 3: autonomous jumps read the updated flow and jump-node values
        stage = [v.copy() for v in new]
        for q, op in enumerate(self.ops):
            if not len(op.a_nodes):
                continue
            cand = np.vstack([Wa @ stage[tq] + ca for _, tq, Wa, ca, _ in op.a_jumps])
            k = np.argmin(cand, axis=0)
            new[q][op.a_nodes] = cand[k, np.arange(len(op.a_nodes))]
            if want_policy:
                policy[q]["v"] = np.array([op.a_jumps[i][0] for i in k])
        return (new, policy) if want_policy else new


def _constants(system: HybridSystem) -> ConstantsEstimate:
    return estimate_constants(system, require_transversality=False)


def bellman_step(system: HybridSystem, field: ValueField, dt: float, levels: int = 3) -> ValueField:
    """One sweep of the discrete QVI operator applied to ``field``."""
    scheme = _Scheme(system, field.grid, dt, _constants(system), levels)
    return ValueField(field.grid, scheme.apply(field.values))


# --------------------------------------------------------------------------- solve


@dataclass
class SolveReport:
    iterations: int
    residual: float
    contraction_factor: float
    wall_time: float
    converged: bool
    B_V: float
    residuals: list[float] = field(default_factory=list, repr=False)
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "residual": self.residual,
            "contraction_factor": self.contraction_factor,
            "converged": self.converged,
            "B_V": self.B_V,
            "warnings": self.warnings,
        }


def solve_qvi(
    system: HybridSystem,
    grid: Grid,
    dt: float,
    tol: float = 1e-8,
    max_iter: int = 200_000,
    init: str | float | ValueField = "upper",
    levels: int = 3,
    burn_in: int = 10,
) -> tuple[ValueField, SolveReport]:
    """Iterate the sweep from ``init`` until the sup-norm change is at most ``tol``.

    ``init`` is ``"upper"`` (``+B_V``, the default), ``"lower"`` (``-B_V``), a
    constant or a field. A run that hits ``max_iter`` is returned with
    ``converged=False``.
    """
    if tol <= 0:
        raise ConfigurationError("tol must be positive")
    consts = _constants(system)
    t0 = time.perf_counter()
    scheme = _Scheme(system, grid, dt, consts, levels)
    B_V = scheme.B_V
    if isinstance(init, ValueField):
        values = [v.copy() for v in init.values]
    elif init == "upper":
        values = [np.full(g.size, B_V) for g in grid.modes]
    elif init == "lower":
        values = [np.full(g.size, -B_V) for g in grid.modes]
    else:
        values = [np.full(g.size, float(init)) for g in grid.modes]

    residuals = []
    warnings = list(scheme.warnings)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        new = scheme.apply(values)
        res = max(float(np.max(np.abs(a - b))) for a, b in zip(new, values))
        residuals.append(res)
        values = new
        if it > burn_in and res > residuals[-2] * (1 + 1e-9) + 1e-15:
            if not any(w.startswith("residual increased") for w in warnings):
                warnings.append(f"residual increased at iteration {it}")
        if res <= tol:
            converged = True
            break
    if not converged:
        logger.warning("value iteration stopped after %d iterations with residual %.3g", it, residuals[-1])
    report = SolveReport(
        iterations=it,
        residual=residuals[-1] if residuals else 0.0,
        contraction_factor=scheme.rho,
        wall_time=time.perf_counter() - t0,
        converged=converged,
        B_V=B_V,
        residuals=residuals,
        warnings=warnings,
    )
    return ValueField(grid, values), report


# --------------------------------------------------------------------------- policies


@dataclass
class PolicyTable:
    """Per-node minimizers of the converged sweep.

    ``kind`` holds node classes; ``u`` the minimizing control on flow nodes
    (NaN elsewhere); ``v`` the minimizing discrete control on ``A`` nodes
    (-1 elsewhere); ``jump`` flags controlled-jump nodes where jumping beats
    continuing, with ``dest_mode``/``dest`` the chosen destination.
    Target nodes carry the terminal marker ``kind == IN_GAMMA``.
    """

    grid: Grid
    kind: list[np.ndarray]
    u: list[np.ndarray]
    v: list[np.ndarray]
    jump: list[np.ndarray]
    dest_mode: list[np.ndarray]
    dest: list[list]
    system: HybridSystem = None
    field: ValueField = None
    dt: float = 0.0
    levels: int = 3

    def is_terminal(self, q: int) -> np.ndarray:
        return self.kind[q] == IN_GAMMA

    def nearest(self, x, q: int) -> int:
        g = self.grid.modes[q]
        x = g.clip(np.asarray(x, dtype=float))
        idx = np.rint((x - g.lo) / g.spacing).astype(int)
        return int(np.ravel_multi_index(tuple(idx), g.shape))

    def greedy_control(self, x, q: int) -> np.ndarray:
        """Minimizer of the continuation value at an arbitrary state."""
        sys_, f = self.system, self.field
        x = np.asarray(x, dtype=float)
        us = sys_.modes[q].dynamics.controls.discretize(self.levels)
        rho = math.exp(-sys_.lam * self.dt)
        w = -math.expm1(-sys_.lam * self.dt) / sys_.lam
        feet = x + self.dt * sys_.modes[q].dynamics(np.tile(x, (len(us), 1)), us)
        vals = w * sys_.running_cost(np.tile(x, (len(us), 1)), q, us) + rho * f(feet, q)
        return us[int(np.argmin(vals))]

    def greedy_v(self, x, q: int) -> int:
        sys_, f = self.system, self.field
        best, best_v = math.inf, 0
        for jump in sys_.jumps_from(q):
            val = f(jump(x), jump.target) + float(sys_.autonomous_cost(x, q, jump.v))
            if val < best:
                best, best_v = val, jump.v
        return best_v

    def greedy_jump(self, x, q: int, t: float = 0.0):
        """``(dest, mode)`` when jumping beats continuing at ``x``, else ``None``."""
        sys_, f = self.system, self.field
        if sys_.sdf("C", q, x) > EPS_EVENT:
            return None
        u = self.greedy_control(x, q)
        rho = math.exp(-sys_.lam * self.dt)
        w = -math.expm1(-sys_.lam * self.dt) / sys_.lam
        cont = w * float(sys_.running_cost(x, q, u)) + rho * f(x + self.dt * sys_.f(x, q, u), q)
        best, choice = math.inf, None
        for q2 in range(sys_.n_modes):
            if (q, q2) not in sys_.C_c:
                continue
            dest = destination_lattice(sys_, self.grid, q2)
            if len(dest):
                vals = f(dest, q2) + sys_.controlled_cost(x, q, dest, q2)
                j = int(np.argmin(vals))
                if vals[j] < best:
                    best, choice = float(vals[j]), (dest[j], q2)
        return choice if best < cont else None

    def as_policy(self) -> ControlPolicy:
        """Feedback policy that re-evaluates the minimizers along the trajectory."""
        return ControlPolicy(
            u=lambda x, q, t: self.greedy_control(x, q),
            v=lambda x, q: self.greedy_v(x, q),
            jump_rule=self.greedy_jump if self.system.has_controlled_jumps() else None,
        )


def extract_policy(system: HybridSystem, field: ValueField, dt: float, levels: int = 3) -> PolicyTable:
    """Per-node argmins of the sweep at ``field`` (ties go to the lowest index)."""
    scheme = _Scheme(system, field.grid, dt, _constants(system), levels)
    _, pol = scheme.apply(field.values, want_policy=True)
    kinds, us, vs, jumps, dmodes, dests = [], [], [], [], [], []
    for q, g in enumerate(field.grid.modes):
        op = scheme.ops[q]
        m = system.control_dim
        u = np.full((g.size, m), np.nan)
        u[op.flow] = scheme.controls[q][pol[q]["u_index"]]
        v = np.full(g.size, -1)
        if "v" in pol[q]:
            v[op.a_nodes] = pol[q]["v"]
        jump = np.zeros(g.size, dtype=bool)
        dmode = np.full(g.size, -1)
        dest = [None] * g.size
        if "jump" in pol[q]:
            jump[op.c_nodes] = pol[q]["jump"]
            dmode[op.c_nodes] = np.where(pol[q]["jump"], pol[q]["dest_mode"], -1)
            for node, j, d in zip(op.c_nodes, pol[q]["jump"], pol[q]["dest"]):
                dest[node] = d if j else None
        kinds.append(np.array(g.classes))
        us.append(u)
        vs.append(v)
        jumps.append(jump)
        dmodes.append(dmode)
        dests.append(dest)
    return PolicyTable(field.grid, kinds, us, vs, jumps, dmodes, dests, system, field, dt, levels)


# --------------------------------------------------------------------------- files


def write_value_csv(field: ValueField, out_dir, stem: str = "value") -> list[Path]:
    """One CSV per mode: node coordinates then value, floats written round-trip exact."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for q, g in enumerate(field.grid.modes):
        path = out_dir / f"{stem}_mode{q}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"x{i}" for i in range(g.dim)] + ["value"])
            for x, val in zip(g.points, field.values[q]):
                w.writerow([repr(float(c)) for c in x] + [repr(float(val))])
        paths.append(path)
    return paths


def read_value_csv(grid: Grid, out_dir, stem: str = "value") -> ValueField:
    """Read fields written by :func:`write_value_csv` back onto ``grid``."""
    out_dir = Path(out_dir)
    values = []
    for q, g in enumerate(grid.modes):
        with open(out_dir / f"{stem}_mode{q}.csv", newline="") as fh:
            rows = list(csv.reader(fh))[1:]
        arr = np.array([[float(c) for c in r] for r in rows])
        if arr.shape != (g.size, g.dim + 1) or not np.array_equal(arr[:, :-1], g.points):
            raise InputError(f"value file for mode {q} does not match the grid")
        values.append(arr[:, -1])
    return ValueField(grid, values)


def write_policy_csv(table: PolicyTable, path) -> None:
    m = table.u[0].shape[1]
    dmax = max(g.dim for g in table.grid.modes)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["mode"] + [f"x{i}" for i in range(dmax)] + ["class"] + [f"u{i}" for i in range(m)]
                   + ["v", "jump", "dest_mode"] + [f"dest{i}" for i in range(dmax)])
        for q, g in enumerate(table.grid.modes):
            for k, x in enumerate(g.points):
                pad = [""] * (dmax - g.dim)
                u = ["" if np.isnan(c) else repr(float(c)) for c in table.u[q][k]]
                d = table.dest[q][k]
                dcols = [repr(float(c)) for c in d] + [""] * (dmax - len(d)) if d is not None else [""] * dmax
                w.writerow([q] + [repr(float(c)) for c in x] + pad + [CLASS_NAMES[int(table.kind[q][k])]] + u
                           + [int(table.v[q][k]), int(table.jump[q][k]), int(table.dest_mode[q][k])] + dcols)


def write_report_json(report: SolveReport, consts: ConstantsEstimate, path, extra: dict | None = None) -> None:
    payload = {"solve": report.to_dict(), "constants": _finite(consts.to_dict())}
    if extra:
        payload.update(extra)
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _finite(d: dict) -> dict:
    return {k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in d.items()}
