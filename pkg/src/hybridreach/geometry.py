"""Closed regions with exact signed distances.

Every region is a closed subset of R^d built from balls, axis-aligned boxes
and half-spaces, or a finite union of those. The signed distance is negative
in the interior, zero on the boundary and positive outside. For unions the
member distances are min-combined, which is exact outside the union and on
its boundary.

Functions accept a single point of shape ``(d,)`` or a batch ``(n, d)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError

__all__ = [
    "Region",
    "Ball",
    "Box",
    "HalfSpace",
    "Union",
    "signed_distance",
    "set_distance",
    "region_from_dict",
]


def _frozen(a, ndim=1) -> np.ndarray:
    arr = np.array(a, dtype=float)
    if arr.ndim != ndim:
        arr = arr.reshape((-1,) if ndim == 1 else arr.shape)
    arr.setflags(write=False)
    return arr


class Region:
    """Base class; subclasses implement ``_sdf`` and ``_grad`` on (n, d) batches."""

    dim: int

    def sdf(self, x) -> np.ndarray | float:
        pts, single = self._points(x)
        out = self._sdf(pts)
        return float(out[0]) if single else out

    def normal(self, x) -> np.ndarray:
        """Unit outward normal of the nearest boundary point (gradient of sdf)."""
        pts, single = self._points(x)
        g = self._grad(pts)
        return g[0] if single else g

    def contains(self, x, tol: float = 0.0):
        d = self.sdf(x)
        return d <= tol

    def primitives(self) -> list["Region"]:
        return [self]

    def sample_boundary(self, rng: np.random.Generator, n: int) -> np.ndarray:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    def _points(self, x) -> tuple[np.ndarray, bool]:
        pts = np.asarray(x, dtype=float)
        single = pts.ndim == 1
        if single:
            pts = pts[None, :]
        if pts.ndim != 2 or pts.shape[1] != self.dim:
            raise InputError(
                f"point dimension {pts.shape[-1] if pts.ndim else 0} does not match region dimension {self.dim}"
            )
        return pts, single

    def _sdf(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _grad(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class Ball(Region):
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", _frozen(self.center))
        if self.radius <= 0:
            raise InputError("ball radius must be positive")

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    def _sdf(self, pts):
        return np.linalg.norm(pts - self.center, axis=1) - self.radius

    def _grad(self, pts):
        diff = pts - self.center
        r = np.linalg.norm(diff, axis=1, keepdims=True)
        e1 = np.zeros_like(diff)
        e1[:, 0] = 1.0
        return np.where(r > 0, diff / np.where(r > 0, r, 1.0), e1)

    def sample_boundary(self, rng, n):
        g = rng.standard_normal((n, self.dim))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        return self.center + self.radius * g

    def to_dict(self):
        return {"type": "ball", "center": self.center.tolist(), "radius": self.radius}


@dataclass(frozen=True, eq=False)
class Box(Region):
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lo", _frozen(self.lo))
        object.__setattr__(self, "hi", _frozen(self.hi))
        if self.lo.shape != self.hi.shape or np.any(self.hi < self.lo):
            raise InputError("box needs lo <= hi with matching shapes")

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    @property
    def half(self) -> np.ndarray:
        return 0.5 * (self.hi - self.lo)

    def vertices(self) -> np.ndarray:
        corners = np.array(np.meshgrid(*zip(self.lo, self.hi), indexing="ij"))
        return np.unique(corners.reshape(self.dim, -1).T, axis=0)

    def _sdf(self, pts):
        q = np.abs(pts - self.center) - self.half
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=1)
        inside = np.minimum(q.max(axis=1), 0.0)
        return outside + inside

    def _grad(self, pts):
        rel = pts - self.center
        q = np.abs(rel) - self.half
        sgn = np.where(rel >= 0, 1.0, -1.0)
        out = np.maximum(q, 0.0)
        norm = np.linalg.norm(out, axis=1, keepdims=True)
        g_out = sgn * out / np.where(norm > 0, norm, 1.0)
        g_in = np.zeros_like(pts)
        k = q.argmax(axis=1)
        g_in[np.arange(len(pts)), k] = sgn[np.arange(len(pts)), k]
        return np.where(norm > 0, g_out, g_in)

    def sample_boundary(self, rng, n):
        pts = rng.uniform(self.lo, self.hi, size=(n, self.dim))
        axis = rng.integers(0, self.dim, size=n)
        side = rng.integers(0, 2, size=n)
        pts[np.arange(n), axis] = np.where(side == 1, self.hi[axis], self.lo[axis])
        return np.vstack([pts, self.vertices()])

    def to_dict(self):
        return {"type": "box", "lo": self.lo.tolist(), "hi": self.hi.tolist()}


@dataclass(frozen=True, eq=False)
class HalfSpace(Region):
    """The closed set ``{x : normal . x <= offset}``."""

    normal_vec: np.ndarray
    offset: float

    def __post_init__(self):
        n = _frozen(self.normal_vec)
        norm = np.linalg.norm(n)
        if norm == 0:
            raise InputError("half-space normal must be nonzero")
        object.__setattr__(self, "normal_vec", _frozen(n / norm))
        object.__setattr__(self, "offset", float(self.offset) / norm)

    @property
    def dim(self) -> int:
        return self.normal_vec.shape[0]

    def _sdf(self, pts):
        return pts @ self.normal_vec - self.offset

    def _grad(self, pts):
        return np.broadcast_to(self.normal_vec, pts.shape).copy()

    def sample_boundary(self, rng, n, around: Box | None = None):
        if around is None:
            around = Box(-np.ones(self.dim), np.ones(self.dim))
        pts = rng.uniform(around.lo, around.hi, size=(n, self.dim))
        return pts - np.outer(self._sdf(pts), self.normal_vec)

    def to_dict(self):
        return {"type": "halfspace", "normal": self.normal_vec.tolist(), "offset": self.offset}


@dataclass(frozen=True, eq=False)
class Union(Region):
    members: tuple[Region, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))
        if not self.members:
            raise InputError("union needs at least one member")
        dims = {m.dim for m in self.members}
        if len(dims) != 1:
            raise InputError("union members must share a dimension")

    @property
    def dim(self) -> int:
        return self.members[0].dim

    def primitives(self):
        return [p for m in self.members for p in m.primitives()]

    def _sdf(self, pts):
        return np.min([m._sdf(pts) for m in self.members], axis=0)

    def _grad(self, pts):
        vals = np.array([m._sdf(pts) for m in self.members])
        which = vals.argmin(axis=0)
        grads = np.array([m._grad(pts) for m in self.members])
        return grads[which, np.arange(len(pts))]

    def sample_boundary(self, rng, n, around: Box | None = None):
        per = max(1, n // len(self.members))
        chunks = []
        for m in self.members:
            if isinstance(m, (HalfSpace, Union)):
                pts = m.sample_boundary(rng, per, around=around)
            else:
                pts = m.sample_boundary(rng, per)
            # keep only points on the boundary of the union itself
            chunks.append(pts[np.abs(self._sdf(pts)) <= 1e-12])
        return np.vstack(chunks)

    def to_dict(self):
        return {"type": "union", "members": [m.to_dict() for m in self.members]}


def signed_distance(region: Region | None, x) -> np.ndarray | float:
    """Signed distance of ``x`` to ``region``; an absent region is infinitely far."""
    if region is None:
        pts = np.asarray(x, dtype=float)
        return np.inf if pts.ndim == 1 else np.full(pts.shape[0], np.inf)
    return region.sdf(x)


def sample_boundary(region: Region, rng: np.random.Generator, n: int, within: Box) -> np.ndarray:
    """Boundary points of ``region`` that fall inside the box ``within``."""
    if isinstance(region, (HalfSpace, Union)):
        pts = region.sample_boundary(rng, n, around=within)
    else:
        pts = region.sample_boundary(rng, n)
    return pts[within.sdf(pts) <= 1e-12] if len(pts) else pts


_TOUCH_TOL = 1e-7


def _cvx_constraints(region: Region, var):
    import cvxpy as cp

    if isinstance(region, Ball):
        return [cp.norm(var - region.center, 2) <= region.radius]
    if isinstance(region, Box):
        return [var >= region.lo, var <= region.hi]
    if isinstance(region, HalfSpace):
        return [region.normal_vec @ var <= region.offset]
    raise TypeError(f"not a primitive region: {type(region).__name__}")


def set_distance(a: Region | None, b: Region | None, within: Box | None = None) -> float:
    """Euclidean distance between two closed regions, optionally clipped to a box.

    Unions are handled member by member; every pair of primitives is a small
    convex program. Returns ``inf`` when either set (or its clipped part) is
    empty.
    """
    import cvxpy as cp

    if a is None or b is None:
        return np.inf
    best = np.inf
    for pa in a.primitives():
        for pb in b.primitives():
            x = cp.Variable(pa.dim)
            y = cp.Variable(pb.dim)
            cons = _cvx_constraints(pa, x) + _cvx_constraints(pb, y)
            if within is not None:
                cons += _cvx_constraints(within, x) + _cvx_constraints(within, y)
            prob = cp.Problem(cp.Minimize(cp.norm(x - y, 2)), cons)
            prob.solve(solver=cp.CLARABEL)
            if prob.status in ("optimal", "optimal_inaccurate"):
                best = min(best, max(float(prob.value), 0.0))
    # interior-point solutions of touching sets come back as ~1e-9
    return 0.0 if best < _TOUCH_TOL else best


def region_from_dict(entry: dict | None) -> Region | None:
    if entry is None:
        return None
    kind = entry["type"]
    if kind == "ball":
        return Ball(entry["center"], float(entry["radius"]))
    if kind == "box":
        return Box(entry["lo"], entry["hi"])
    if kind == "halfspace":
        return HalfSpace(entry["normal"], float(entry["offset"]))
    if kind == "union":
        return Union(tuple(region_from_dict(m) for m in entry["members"]))
    raise InputError(f"unknown region type {kind!r}")
