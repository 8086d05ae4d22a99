"""Hybrid control systems with autonomous and controlled jumps and a target set.

A :class:`HybridSystem` is a finite collection of modes. Each mode carries a
box domain, affine dynamics ``f(x, u) = A x + B u + c`` with a box or finite
control set, and optional closed regions ``A`` (autonomous jump set), ``C``
(controlled jump set) and ``D`` (jump destinations). One mode additionally
holds the target set ``Gamma`` on which the run stops and the terminal cost
``h`` is paid.

:func:`validate_assumptions` checks the standing assumptions by sampling and
direct geometric computation, and :func:`estimate_constants` returns the
constants (speed bound, Lipschitz constants, transversality margin, ...) used
by the hitting-time estimates.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AssumptionViolation, InputError
from .geometry import Box, Region, sample_boundary, set_distance, signed_distance

__all__ = [
    "BoxControls",
    "FiniteControls",
    "AffineDynamics",
    "AffineExpr",
    "Jump",
    "ControlledJumpCost",
    "Mode",
    "HybridSystem",
    "ConstantsEstimate",
    "AssumptionCheck",
    "ValidationReport",
    "validate_assumptions",
    "estimate_constants",
]

# membership tie radius shared with event localization
EPS_EVENT = 1e-9
TRIANGLE_TOL = 1e-9


def _arr(a, ndim: int) -> np.ndarray:
    out = np.array(a, dtype=float)
    if out.ndim != ndim:
        raise InputError(f"expected a {ndim}-d array, got shape {out.shape}")
    out.setflags(write=False)
    return out


# --------------------------------------------------------------------------- controls


@dataclass(frozen=True, eq=False)
class BoxControls:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lo", _arr(self.lo, 1))
        object.__setattr__(self, "hi", _arr(self.hi, 1))
        if self.lo.shape != self.hi.shape or np.any(self.hi < self.lo):
            raise InputError("control box needs lo <= hi")

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    def vertices(self) -> np.ndarray:
        return np.array(list(itertools.product(*zip(self.lo, self.hi))), dtype=float)

    def discretize(self, levels: int = 3) -> np.ndarray:
        """Tensor lattice with ``levels`` points per axis (3 = vertices plus midpoints)."""
        axes = [np.linspace(lo, hi, levels) if hi > lo else np.array([lo]) for lo, hi in zip(self.lo, self.hi)]
        return np.array(list(itertools.product(*axes)), dtype=float)

    def contains(self, u, tol: float = 1e-12) -> bool:
        u = np.asarray(u, dtype=float)
        return bool(np.all(u >= self.lo - tol) and np.all(u <= self.hi + tol))

    def to_dict(self):
        return {"type": "box", "lo": self.lo.tolist(), "hi": self.hi.tolist()}


@dataclass(frozen=True, eq=False)
class FiniteControls:
    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or len(pts) == 0:
            raise InputError("finite control set needs a non-empty (k, m) array")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def vertices(self) -> np.ndarray:
        return np.array(self.points)

    def discretize(self, levels: int = 3) -> np.ndarray:
        return np.array(self.points)

    def contains(self, u, tol: float = 1e-12) -> bool:
        u = np.asarray(u, dtype=float)
        return bool(np.any(np.all(np.abs(self.points - u) <= tol, axis=1)))

    def to_dict(self):
        return {"type": "finite", "points": self.points.tolist()}


ControlSet = BoxControls | FiniteControls


@dataclass(frozen=True, eq=False)
class AffineDynamics:
    """``f(x, u) = A x + B u + c``."""

    A: np.ndarray
    B: np.ndarray
    c: np.ndarray
    controls: ControlSet

    def __post_init__(self):
        object.__setattr__(self, "A", _arr(self.A, 2))
        object.__setattr__(self, "B", _arr(self.B, 2))
        object.__setattr__(self, "c", _arr(self.c, 1))
        d = self.A.shape[0]
        if self.A.shape != (d, d) or self.B.shape[0] != d or self.c.shape != (d,):
            raise InputError("dynamics matrices have inconsistent shapes")
        if self.B.shape[1] != self.controls.dim:
            raise InputError("B columns must match the control dimension")

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    def __call__(self, x, u) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        return x @ self.A.T + u @ self.B.T + self.c

    def lipschitz(self) -> float:
        return float(np.linalg.norm(self.A, 2))

    def speed_bound(self, domain: Box) -> float:
        # |f| is convex in (x, u); its sup over a product of polytopes sits at a vertex pair
        xs = domain.vertices()
        us = self.controls.vertices()
        vals = xs[:, None, :] @ self.A.T + (us @ self.B.T)[None, :, :] + self.c
        return float(np.linalg.norm(vals, axis=2).max())


@dataclass(frozen=True, eq=False)
class AffineExpr:
    """``const + a.x + b.u + alpha |x| + beta |u|`` optionally clamped to ``[-clamp, clamp]``."""

    const: float = 0.0
    x: np.ndarray | None = None
    u: np.ndarray | None = None
    x_norm: float = 0.0
    u_norm: float = 0.0
    clamp: float | None = None

    def __post_init__(self):
        if self.x is not None:
            object.__setattr__(self, "x", _arr(self.x, 1))
        if self.u is not None:
            object.__setattr__(self, "u", _arr(self.u, 1))

    def __call__(self, x, u=None):
        x = np.asarray(x, dtype=float)
        val = np.full(x.shape[:-1], float(self.const))
        if self.x is not None:
            val = val + x @ self.x
        if self.x_norm:
            val = val + self.x_norm * np.linalg.norm(x, axis=-1)
        if u is not None:
            u = np.asarray(u, dtype=float)
            if self.u is not None:
                val = val + u @ self.u
            if self.u_norm:
                val = val + self.u_norm * np.linalg.norm(u, axis=-1)
        if self.clamp is not None:
            val = np.clip(val, -self.clamp, self.clamp)
        return float(val) if val.ndim == 0 else val

    def lipschitz_x(self) -> float:
        lin = 0.0 if self.x is None else float(np.linalg.norm(self.x))
        return lin + abs(self.x_norm)

    def to_dict(self):
        out = {"const": self.const}
        if self.x is not None:
            out["x"] = self.x.tolist()
        if self.u is not None:
            out["u"] = self.u.tolist()
        if self.x_norm:
            out["x_norm"] = self.x_norm
        if self.u_norm:
            out["u_norm"] = self.u_norm
        return out


@dataclass(frozen=True, eq=False)
class Jump:
    """Affine transition ``x -> G x + b`` from ``A_mode`` into ``D_target`` under discrete control ``v``."""

    mode: int
    v: int
    target: int
    G: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "G", _arr(self.G, 2))
        object.__setattr__(self, "b", _arr(self.b, 1))
        if self.G.shape[0] != self.b.shape[0]:
            raise InputError("jump map G and b disagree on the target dimension")

    def __call__(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float) @ self.G.T + self.b

    def lipschitz(self) -> float:
        return float(np.linalg.norm(self.G, 2))


@dataclass(frozen=True)
class ControlledJumpCost:
    """``const + dist * |y - x|``; the distance term only applies between equal dimensions."""

    const: float
    dist: float = 0.0

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.dist and x.shape[-1] == y.shape[-1]:
            return self.const + self.dist * np.linalg.norm(y - x, axis=-1)
        shape = np.broadcast_shapes(x.shape[:-1], y.shape[:-1])
        return np.full(shape, self.const) if shape else self.const


@dataclass(frozen=True, eq=False)
class Mode:
    domain: Box
    dynamics: AffineDynamics
    K: AffineExpr
    A: Region | None = None
    C: Region | None = None
    D: Region | None = None

    def __post_init__(self):
        d = self.domain.dim
        if self.dynamics.dim != d:
            raise InputError("dynamics dimension differs from domain dimension")
        for name in ("A", "C", "D"):
            reg = getattr(self, name)
            if reg is not None and reg.dim != d:
                raise InputError(f"region {name} has dimension {reg.dim}, mode has {d}")

    @property
    def dim(self) -> int:
        return self.domain.dim


@dataclass(frozen=True, eq=False)
class HybridSystem:
    modes: tuple[Mode, ...]
    jumps: tuple[Jump, ...]
    target_mode: int
    target: Region
    h: AffineExpr
    lam: float
    beta: float
    C_a: dict = field(default_factory=dict)
    C_c: dict = field(default_factory=dict)
    K0: float | None = None
    C0: float | None = None
    H: float | None = None
    name: str = "system"

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))
        object.__setattr__(self, "jumps", tuple(sorted(self.jumps, key=lambda j: (j.mode, j.v))))
        n = len(self.modes)
        if n == 0:
            raise InputError("a system needs at least one mode")
        if not 0 <= self.target_mode < n:
            raise InputError("target mode out of range")
        if self.target.dim != self.modes[self.target_mode].dim:
            raise InputError("target region dimension differs from its mode")
        if self.lam <= 0:
            raise InputError("discount rate lambda must be positive")
        if self.beta <= 0:
            raise InputError("declared beta must be positive")
        ctrl_dims = {m.dynamics.controls.dim for m in self.modes}
        if len(ctrl_dims) != 1:
            raise InputError("all modes must share one control dimension")
        seen = set()
        for j in self.jumps:
            if not (0 <= j.mode < n and 0 <= j.target < n):
                raise InputError(f"jump ({j.mode}, v={j.v}) refers to a missing mode")
            if (j.mode, j.v) in seen:
                raise InputError(f"duplicate jump for mode {j.mode}, v={j.v}")
            seen.add((j.mode, j.v))
            if j.G.shape != (self.modes[j.target].dim, self.modes[j.mode].dim):
                raise InputError(f"jump ({j.mode}, v={j.v}) map has wrong shape {j.G.shape}")
            if self.modes[j.mode].A is None:
                raise InputError(f"mode {j.mode} has a transition map but no autonomous jump set")
        for q, m in enumerate(self.modes):
            if m.A is not None and not self.jumps_from(q):
                raise InputError(f"mode {q} has an autonomous jump set but no transition map")
        object.__setattr__(self, "C_a", dict(self.C_a))
        object.__setattr__(self, "C_c", dict(self.C_c))

    # ------------------------------------------------------------------ structure

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    @property
    def control_dim(self) -> int:
        return self.modes[0].dynamics.controls.dim

    def jumps_from(self, q: int) -> list[Jump]:
        return [j for j in self.jumps if j.mode == q]

    def jump(self, q: int, v: int) -> Jump:
        for j in self.jumps:
            if j.mode == q and j.v == v:
                return j
        raise InputError(f"mode {q} has no discrete control v={v}")

    def region(self, kind: str, q: int) -> Region | None:
        if kind == "Gamma":
            return self.target if q == self.target_mode else None
        return getattr(self.modes[q], kind)

    def sdf(self, kind: str, q: int, x):
        return signed_distance(self.region(kind, q), x)

    def f(self, x, q: int, u):
        return self.modes[q].dynamics(x, u)

    # ------------------------------------------------------------------ costs

    def running_cost(self, x, q: int, u):
        K = self.modes[q].K
        if self.K0 is not None and K.clamp is None:
            val = K(x, u)
            return np.clip(val, -self.K0, self.K0) if np.ndim(val) else float(np.clip(val, -self.K0, self.K0))
        return K(x, u)

    def autonomous_cost(self, x, q: int, v: int):
        expr = self.C_a.get((q, v))
        if expr is None:
            x = np.asarray(x, dtype=float)
            return 0.0 if x.ndim == 1 else np.zeros(x.shape[0])
        return expr(x)

    def controlled_cost(self, x, q: int, y, q2: int):
        """Cost of a controlled jump; ``inf`` for destination modes without a cost entry."""
        cost = self.C_c.get((q, q2))
        if cost is None:
            return np.inf
        return cost(x, y)

    def terminal_cost(self, x):
        return self.h(x)

    def has_jumps(self) -> bool:
        return bool(self.jumps)

    def has_controlled_jumps(self) -> bool:
        return any(m.C is not None for m in self.modes) and bool(self.C_c)


# --------------------------------------------------------------------------- constants


@dataclass(frozen=True)
class ConstantsEstimate:
    F: float
    L: float
    G: float
    K0: float
    K1: float
    C0: float
    C1: float
    H: float
    xi0: float
    beta: float
    lam: float
    C: float
    P: float

    def __post_init__(self):
        if not math.isnan(self.P) and self.P != self.F * self.C * (1 + self.G) + self.G:
            raise ValueError("P must equal F*C*(1+G)+G")

    def value_bound(self, tau1: float = 0.0) -> float:
        """Upper bound on the value function: running + autonomous jump series + terminal."""
        jump_term = 0.0
        if self.C0 > 0:
            jump_term = self.C0 * math.exp(-self.lam * tau1) / (1.0 - math.exp(-self.lam * self.beta / self.F))
        return self.K0 / self.lam + jump_term + self.H

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _sample_in(region: Region | None, box: Box, rng: np.random.Generator, n: int) -> np.ndarray:
    """Points of ``region`` inside ``box``: interior draws, boundary draws and box vertices."""
    if region is None:
        return np.empty((0, box.dim))
    pts = rng.uniform(box.lo, box.hi, size=(n, box.dim))
    chunks = [pts[region.sdf(pts) <= 0], sample_boundary(region, rng, n, box), box.vertices()]
    for prim in region.primitives():
        if isinstance(prim, Box):
            clipped_lo = np.maximum(prim.lo, box.lo)
            clipped_hi = np.minimum(prim.hi, box.hi)
            if np.all(clipped_lo <= clipped_hi):
                chunks.append(Box(clipped_lo, clipped_hi).vertices())
    allpts = np.vstack(chunks)
    keep = (region.sdf(allpts) <= EPS_EVENT) & (box.sdf(allpts) <= EPS_EVENT)
    return allpts[keep]


def _crossing_boundary(region: Region | None, domain: Box, rng, n: int) -> np.ndarray:
    """Boundary points of ``region`` that trajectories can reach from inside the domain.

    Points on a domain face are excluded: the domain boundary is absorbing.
    """
    if region is None:
        return np.empty((0, domain.dim))
    pts = sample_boundary(region, rng, n, domain)
    if len(pts) == 0:
        return pts
    return pts[domain.sdf(pts) < -EPS_EVENT]


def transversality_margin(system: HybridSystem, kind: str, samples: int = 200, seed: int = 0) -> float:
    """``min -f(x0, u) . eta(x0)`` over sampled crossing points of ``kind`` and discretized controls.

    Returns ``inf`` when no crossing boundary exists.
    """
    rng = np.random.default_rng(seed)
    best = np.inf
    for q, mode in enumerate(system.modes):
        pts = _crossing_boundary(system.region(kind, q), mode.domain, rng, samples)
        if len(pts) == 0:
            continue
        eta = system.region(kind, q).normal(pts)
        us = mode.dynamics.controls.discretize()
        for u in us:
            vals = -np.sum(mode.dynamics(pts, u) * eta, axis=1)
            best = min(best, float(vals.min()))
    return best


def estimate_constants(
    system: HybridSystem, samples: int = 200, seed: int = 0, require_transversality: bool = True
) -> ConstantsEstimate:
    """Constants of the standing assumptions for ``system``.

    ``F`` and ``L`` are exact for affine dynamics on box domains; ``xi0`` is half
    the sampled transversality margin over the crossing boundaries of ``A`` and
    ``Gamma``. With ``require_transversality=False`` a non-positive margin gives
    ``nan`` for ``xi0``, ``C`` and ``P`` instead of raising.
    """
    rng = np.random.default_rng(seed)
    F = max(m.dynamics.speed_bound(m.domain) for m in system.modes)
    L = max(m.dynamics.lipschitz() for m in system.modes)
    G = max((j.lipschitz() for j in system.jumps), default=0.0)

    margin = min(
        transversality_margin(system, "A", samples, seed),
        transversality_margin(system, "Gamma", samples, seed),
    )
    if margin <= 0 or not math.isfinite(margin):
        if require_transversality:
            raise AssumptionViolation(f"transversality margin {margin:.6g} is not positive")
        xi0 = C = P = math.nan
    else:
        xi0 = margin / 2.0
        C = 1.0 / xi0
        P = F * C * (1 + G) + G

    if system.K0 is not None:
        K0 = float(system.K0)
    else:
        K0 = 0.0
        for q, m in enumerate(system.modes):
            xs = np.vstack([m.domain.vertices(), rng.uniform(m.domain.lo, m.domain.hi, (samples, m.dim))])
            for u in m.dynamics.controls.discretize():
                K0 = max(K0, float(np.abs(system.running_cost(xs, q, u)).max()))
    K1 = max(m.K.lipschitz_x() for m in system.modes)

    if system.C0 is not None:
        C0 = float(system.C0)
    else:
        C0 = 0.0
        for j in system.jumps:
            pts = _sample_in(system.modes[j.mode].A, system.modes[j.mode].domain, rng, samples)
            if len(pts):
                C0 = max(C0, float(np.abs(system.autonomous_cost(pts, j.mode, j.v)).max()))
    C1 = max((e.lipschitz_x() for e in system.C_a.values()), default=0.0)

    if system.H is not None:
        H = float(system.H)
    else:
        tm = system.modes[system.target_mode]
        pts = _sample_in(system.target, tm.domain, rng, samples)
        H = float(np.abs(system.terminal_cost(pts)).max()) if len(pts) else 0.0

    return ConstantsEstimate(
        F=F, L=L, G=G, K0=K0, K1=K1, C0=C0, C1=C1, H=H, xi0=xi0, beta=system.beta, lam=system.lam, C=C, P=P
    )


# --------------------------------------------------------------------------- validation


@dataclass(frozen=True)
class AssumptionCheck:
    name: str
    passed: bool
    witness: float
    threshold: float
    detail: str = ""
    hard: bool = True

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "witness": _jsonable(self.witness),
            "threshold": _jsonable(self.threshold),
            "detail": self.detail,
            "hard": self.hard,
        }


def _jsonable(v: float):
    if isinstance(v, float) and not math.isfinite(v):
        return None if math.isnan(v) else ("inf" if v > 0 else "-inf")
    return v


@dataclass
class ValidationReport:
    checks: list[AssumptionCheck] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if c.hard)

    def failures(self) -> list[AssumptionCheck]:
        return [c for c in self.checks if c.hard and not c.passed]

    def __getitem__(self, name: str) -> AssumptionCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def names(self) -> list[str]:
        return [c.name for c in self.checks]

    def to_dict(self) -> dict:
        return {"passed": self.passed, "checks": [c.to_dict() for c in self.checks]}


def validate_assumptions(system: HybridSystem, samples: int = 200, seed: int = 0) -> ValidationReport:
    """Check the standing assumptions on ``system``; failures are report entries."""
    rng = np.random.default_rng(seed)
    report = ValidationReport()
    add = report.checks.append
    beta = system.beta
    j = system.target_mode

    # domain exits outside A and Gamma (soft: absorbing faces are clamped by the solver)
    worst_exit = -np.inf
    for q, m in enumerate(system.modes):
        pts = m.domain.sample_boundary(rng, samples)
        free = np.ones(len(pts), dtype=bool)
        for kind in ("A", "Gamma"):
            free &= ~(np.asarray(system.sdf(kind, q, pts)) <= EPS_EVENT)
        pts = pts[free]
        if len(pts) == 0:
            continue
        n_out = m.domain.normal(pts)
        for u in m.dynamics.controls.discretize():
            worst_exit = max(worst_exit, float(np.sum(m.dynamics(pts, u) * n_out, axis=1).max()))
    add(AssumptionCheck("A2_domain_exit", worst_exit <= 1e-12, worst_exit, 0.0,
                        "max outward speed on domain faces outside A and Gamma", hard=False))

    # transition maps land in D
    worst = -np.inf
    for jp in system.jumps:
        src = system.modes[jp.mode]
        pts = _sample_in(src.A, src.domain, rng, samples)
        dest = system.modes[jp.target].D
        if dest is None:
            worst = np.inf
            continue
        if len(pts):
            worst = max(worst, float(np.max(dest.sdf(jp(pts)))))
    add(AssumptionCheck("A3_jump_into_D", worst <= EPS_EVENT, worst, EPS_EVENT,
                        "max signed distance of g(A) to D of the target mode"))

    consts = estimate_constants(system, samples, seed, require_transversality=False)
    add(AssumptionCheck("A4_speed_bound", math.isfinite(consts.F), consts.F, math.inf,
                        f"F={consts.F:.6g}, L={consts.L:.6g}"))

    m_a = transversality_margin(system, "A", samples, seed)
    add(AssumptionCheck("A5_transversality", m_a > 0, m_a, 0.0,
                        "min -f.eta over crossing points of dA (must exceed 2*xi0 > 0)"))

    sep = np.inf
    for q, m in enumerate(system.modes):
        sep = min(sep, set_distance(m.A, m.C, m.domain), set_distance(m.A, m.D, m.domain))
    add(AssumptionCheck("A6_separation", sep >= beta, sep, beta, "min d(A_i, C_i), d(A_i, D_i)"))

    tm = system.modes[j]
    tsep = min(
        set_distance(system.target, tm.D, tm.domain),
        set_distance(system.target, tm.A, tm.domain),
        set_distance(system.target, tm.C, tm.domain),
    )
    add(AssumptionCheck("A8_target_separation", tsep >= beta, tsep, beta, "min d(Gamma, D_j), d(Gamma, A_j), d(Gamma, C_j)"))

    m_g = transversality_margin(system, "Gamma", samples, seed)
    add(AssumptionCheck("A9_target_transversality", m_g > 0, m_g, 0.0, "min -f.eta over crossing points of dGamma"))

    gpts = _sample_in(system.target, tm.domain, rng, samples)
    hvals = system.terminal_cost(gpts) if len(gpts) else np.zeros(1)
    add(AssumptionCheck("A10_h_nonnegative", float(np.min(hvals)) >= 0, float(np.min(hvals)), 0.0))
    add(AssumptionCheck("A10_h_bound", float(np.max(np.abs(hvals))) <= consts.H + 1e-12,
                        float(np.max(np.abs(hvals))), consts.H))

    kmax = 0.0
    for q, m in enumerate(system.modes):
        xs = np.vstack([m.domain.vertices(), rng.uniform(m.domain.lo, m.domain.hi, (samples, m.dim))])
        for u in m.dynamics.controls.discretize():
            kmax = max(kmax, float(np.abs(system.running_cost(xs, q, u)).max()))
    add(AssumptionCheck("A11_K_bound", kmax <= consts.K0 + 1e-12, kmax, consts.K0))

    camax = 0.0
    for jp in system.jumps:
        src = system.modes[jp.mode]
        pts = _sample_in(src.A, src.domain, rng, samples)
        if len(pts):
            camax = max(camax, float(np.abs(system.autonomous_cost(pts, jp.mode, jp.v)).max()))
    add(AssumptionCheck("A12_Ca_bound", camax <= consts.C0 + 1e-12, camax, consts.C0))

    cc_min, tri_worst = _controlled_cost_checks(system, rng, samples)
    add(AssumptionCheck("A12_Cc_lower_bound", math.isfinite(cc_min) or cc_min == np.inf, cc_min, -math.inf,
                        "sampled minimum of C_c"))
    add(AssumptionCheck("A12_Cc_triangle", tri_worst <= TRIANGLE_TOL, tri_worst, TRIANGLE_TOL,
                        "max of C_c(x,q,y,q') - C_c(x,q,z,q'') - C_c(z,q'',y,q') over sampled triples"))
    return report


def _controlled_cost_checks(system: HybridSystem, rng, samples: int) -> tuple[float, float]:
    n = max(8, int(round(samples ** 0.5)))
    C_pts = {q: _sample_in(m.C, m.domain, rng, n)[:n] for q, m in enumerate(system.modes)}
    D_pts = {q: _sample_in(m.D, m.domain, rng, n)[:n] for q, m in enumerate(system.modes)}
    DC_pts = {q: D_pts[q][system.modes[q].C.sdf(D_pts[q]) <= EPS_EVENT] if system.modes[q].C is not None and len(D_pts[q]) else np.empty((0, system.modes[q].dim))
              for q in range(system.n_modes)}
    cc_min = np.inf
    tri_worst = -np.inf
    for (q, q1), cost in system.C_c.items():
        X, Y = C_pts[q], D_pts[q1]
        if len(X) and len(Y):
            cc_min = min(cc_min, float(np.min(cost(X[:, None, :], Y[None, :, :]))))
        for q2 in range(system.n_modes):
            Z = DC_pts[q2]
            if not (len(X) and len(Y) and len(Z)):
                continue
            c_xz = system.C_c.get((q, q2))
            c_zy = system.C_c.get((q2, q1))
            if c_xz is None or c_zy is None:
                continue
            direct = cost(X[:, None, None, :], Y[None, None, :, :])
            via = c_xz(X[:, None, None, :], Z[None, :, None, :]) + c_zy(Z[None, :, None, :], Y[None, None, :, :])
            tri_worst = max(tri_worst, float(np.max(direct - via)))
    return cc_min, tri_worst
