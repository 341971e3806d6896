"""Exact metric projections onto simple convex sets in R^d.

Every set in the catalogue (half-space, hyperplane, ball, box, affine
subspace) has a closed-form projection. All projections are vectorised over
leading axes: ``project(s, X)`` accepts an array of shape ``(..., d)``.

The module also hosts :class:`ProblemInstance` (the feasibility problem
``C = C_1 ∩ ... ∩ C_N`` with a known point ``z`` and starting point ``x0``),
the feasibility residual ``f(x) = max_i ||x - P_i x||`` and a reference
oracle for the projection onto the whole intersection.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

FEAS_TOL = 1e-9


class GeometryError(ValueError):
    """Invalid set description or incompatible input."""


class DimensionError(GeometryError):
    pass


def as_vector(x, dim: int | None = None) -> np.ndarray:
    """Convert ``x`` to a finite 1-D float array, optionally checking its size."""
    v = np.asarray(x, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise DimensionError(f"expected a nonempty 1-D vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise GeometryError("vector has non-finite coordinates")
    if dim is not None and v.size != dim:
        raise DimensionError(f"dimension mismatch: expected {dim}, got {v.size}")
    return v


def _points(X, dim: int) -> np.ndarray:
    P = np.asarray(X, dtype=float)
    if P.ndim == 0 or P.shape[-1] != dim:
        raise DimensionError(f"dimension mismatch: set lives in R^{dim}, got shape {P.shape}")
    return P


def _readonly(v: np.ndarray) -> np.ndarray:
    v = np.array(v, dtype=float)
    v.setflags(write=False)
    return v


class ConvexSet:
    """Base class for closed convex sets with an exact projection."""

    kind: str = ""

    @property
    def dim(self) -> int:
        raise NotImplementedError

    def project(self, X) -> np.ndarray:
        raise NotImplementedError

    def dist(self, X) -> np.ndarray | float:
        P = _points(X, self.dim)
        d = np.linalg.norm(P - self.project(P), axis=-1)
        return float(d) if d.ndim == 0 else d

    def contains(self, x, tol: float = FEAS_TOL) -> bool:
        return bool(self.dist(as_vector(x, self.dim)) <= tol)

    def to_dict(self) -> dict:
        raise NotImplementedError

    def constraints(self):
        """Linear description ``(A, beta, is_equality)`` or ``None`` if not polyhedral."""
        return None


@dataclass(frozen=True, eq=False)
class HalfSpace(ConvexSet):
    """``{x : <a, x> <= beta}``."""

    a: np.ndarray
    beta: float
    kind = "halfspace"

    def __post_init__(self):
        a = as_vector(self.a)
        if np.linalg.norm(a) == 0:
            raise GeometryError("half-space normal must be nonzero")
        object.__setattr__(self, "a", _readonly(a))
        object.__setattr__(self, "beta", float(self.beta))

    @property
    def dim(self):
        return self.a.size

    def project(self, X):
        P = _points(X, self.dim)
        excess = np.maximum(P @ self.a - self.beta, 0.0)
        return P - (excess / (self.a @ self.a))[..., None] * self.a

    def to_dict(self):
        return {"type": self.kind, "a": self.a.tolist(), "beta": self.beta}

    def constraints(self):
        return self.a[None, :], np.array([self.beta]), np.array([False])


@dataclass(frozen=True, eq=False)
class Hyperplane(ConvexSet):
    """``{x : <a, x> = beta}``."""

    a: np.ndarray
    beta: float
    kind = "hyperplane"

    def __post_init__(self):
        a = as_vector(self.a)
        if np.linalg.norm(a) == 0:
            raise GeometryError("hyperplane normal must be nonzero")
        object.__setattr__(self, "a", _readonly(a))
        object.__setattr__(self, "beta", float(self.beta))

    @property
    def dim(self):
        return self.a.size

    def project(self, X):
        P = _points(X, self.dim)
        gap = P @ self.a - self.beta
        return P - (gap / (self.a @ self.a))[..., None] * self.a

    def to_dict(self):
        return {"type": self.kind, "a": self.a.tolist(), "beta": self.beta}

    def constraints(self):
        return self.a[None, :], np.array([self.beta]), np.array([True])


@dataclass(frozen=True, eq=False)
class Ball(ConvexSet):
    """Closed Euclidean ball."""

    center: np.ndarray
    radius: float
    kind = "ball"

    def __post_init__(self):
        object.__setattr__(self, "center", _readonly(as_vector(self.center)))
        r = float(self.radius)
        if not (r > 0 and math.isfinite(r)):
            raise GeometryError(f"ball radius must be positive, got {self.radius}")
        object.__setattr__(self, "radius", r)

    @property
    def dim(self):
        return self.center.size

    def project(self, X):
        P = _points(X, self.dim)
        D = P - self.center
        norm = np.linalg.norm(D, axis=-1)
        scale = np.where(norm > self.radius, self.radius / np.maximum(norm, 1e-300), 1.0)
        return self.center + D * scale[..., None]

    def to_dict(self):
        return {"type": self.kind, "center": self.center.tolist(), "radius": self.radius}


@dataclass(frozen=True, eq=False)
class Box(ConvexSet):
    """Axis-aligned box ``lo <= x <= hi``."""

    lo: np.ndarray
    hi: np.ndarray
    kind = "box"

    def __post_init__(self):
        lo = as_vector(self.lo)
        hi = as_vector(self.hi, lo.size)
        if np.any(lo > hi):
            raise GeometryError("box requires lo <= hi coordinatewise")
        object.__setattr__(self, "lo", _readonly(lo))
        object.__setattr__(self, "hi", _readonly(hi))

    @property
    def dim(self):
        return self.lo.size

    def project(self, X):
        return np.clip(_points(X, self.dim), self.lo, self.hi)

    def to_dict(self):
        return {"type": self.kind, "lo": self.lo.tolist(), "hi": self.hi.tolist()}

    def constraints(self):
        eye = np.eye(self.dim)
        A = np.vstack([eye, -eye])
        beta = np.concatenate([self.hi, -self.lo])
        return A, beta, np.zeros(2 * self.dim, dtype=bool)


@dataclass(frozen=True, eq=False)
class AffineSubspace(ConvexSet):
    """``offset + span(basis)``; the basis is orthonormalised at construction.

    ``basis`` is given as a list of spanning vectors (rows). An empty basis
    describes the single point ``offset``.
    """

    basis: np.ndarray
    offset: np.ndarray
    kind = "affine"
    _q: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        offset = as_vector(self.offset)
        B = np.asarray(self.basis, dtype=float).reshape(-1, offset.size)
        if not np.all(np.isfinite(B)):
            raise GeometryError("affine basis has non-finite entries")
        if B.shape[0] > offset.size:
            raise GeometryError("affine basis has more vectors than the dimension")
        if B.shape[0]:
            Q, R = np.linalg.qr(B.T)
            if np.min(np.abs(np.diag(R))) <= 1e-12 * max(1.0, np.abs(R).max()):
                raise GeometryError("affine basis vectors are linearly dependent")
        else:
            Q = np.zeros((offset.size, 0))
        object.__setattr__(self, "basis", _readonly(B))
        object.__setattr__(self, "offset", _readonly(offset))
        object.__setattr__(self, "_q", _readonly(Q))

    @property
    def dim(self):
        return self.offset.size

    def project(self, X):
        P = _points(X, self.dim) - self.offset
        return self.offset + (P @ self._q) @ self._q.T

    def to_dict(self):
        return {"type": self.kind, "basis": self.basis.tolist(), "offset": self.offset.tolist()}

    def constraints(self):
        # rows spanning the orthogonal complement of the subspace
        full = np.linalg.svd(self._q, full_matrices=True)[0] if self._q.shape[1] else np.eye(self.dim)
        comp = full[:, self._q.shape[1]:].T
        return comp, comp @ self.offset, np.ones(comp.shape[0], dtype=bool)


_SET_TYPES = {
    "halfspace": lambda d: HalfSpace(d["a"], d["beta"]),
    "hyperplane": lambda d: Hyperplane(d["a"], d["beta"]),
    "ball": lambda d: Ball(d["center"], d["radius"]),
    "box": lambda d: Box(d["lo"], d["hi"]),
    "affine": lambda d: AffineSubspace(d.get("basis", []), d["offset"]),
}


def set_from_dict(d: dict) -> ConvexSet:
    try:
        make = _SET_TYPES[d["type"]]
    except KeyError:
        raise GeometryError(f"unknown set type {d.get('type')!r}") from None
    try:
        return make(d)
    except KeyError as e:
        raise GeometryError(f"set of type {d['type']!r} is missing field {e}") from None


def project(s: ConvexSet, x) -> np.ndarray:
    """Nearest point of ``s`` to ``x`` (vectorised over leading axes)."""
    return s.project(x)


def dist(s: ConvexSet, x):
    """Euclidean distance from ``x`` to ``s``."""
    return s.dist(x)


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """A convex feasibility problem with a certified point ``z`` of ``C``.

    ``b`` is a natural number with ``||z - x0|| <= b``; every Dykstra iterate
    started at ``x0`` stays in the closed ball of radius ``b`` around ``z``.
    """

    sets: tuple
    x0: np.ndarray
    z: np.ndarray
    b: int
    name: str = ""

    def __post_init__(self):
        sets = tuple(self.sets)
        if not sets:
            raise GeometryError("instance needs at least one set")
        d = sets[0].dim
        for s in sets:
            if s.dim != d:
                raise DimensionError("all sets must live in the same dimension")
        x0 = as_vector(self.x0, d)
        z = as_vector(self.z, d)
        for i, s in enumerate(sets):
            if s.dist(z) > FEAS_TOL:
                raise GeometryError(f"z is not in set {i} (dist {s.dist(z):.3e})")
        b = int(self.b)
        if b != self.b or b < 1 or b < math.ceil(np.linalg.norm(z - x0) - 1e-12):
            raise GeometryError(f"b must be a natural number >= max(1, ceil(||z - x0||)), got {self.b}")
        object.__setattr__(self, "sets", sets)
        object.__setattr__(self, "x0", _readonly(x0))
        object.__setattr__(self, "z", _readonly(z))
        object.__setattr__(self, "b", b)

    @property
    def dim(self) -> int:
        return self.sets[0].dim

    @property
    def N(self) -> int:
        return len(self.sets)

    def with_x0(self, x0, b: int | None = None) -> "ProblemInstance":
        x0 = as_vector(x0, self.dim)
        if b is None:
            b = max(1, math.ceil(np.linalg.norm(self.z - x0)))
        return ProblemInstance(self.sets, x0, self.z, b, self.name)

    def to_dict(self) -> dict:
        d = {
            "sets": [s.to_dict() for s in self.sets],
            "x0": self.x0.tolist(),
            "z": self.z.tolist(),
            "b": self.b,
        }
        if self.name:
            d["name"] = self.name
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ProblemInstance":
        try:
            return cls(
                tuple(set_from_dict(s) for s in d["sets"]),
                d["x0"], d["z"], d["b"], d.get("name", ""),
            )
        except KeyError as e:
            raise GeometryError(f"instance is missing field {e}") from None

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ProblemInstance":
        return cls.from_dict(json.loads(text))


def residual_f(instance: ProblemInstance, x):
    """Feasibility residual ``max_i dist(C_i, x)`` (vectorised)."""
    P = _points(x, instance.dim)
    r = np.max(np.stack([s.dist(P) for s in instance.sets], axis=0), axis=0)
    return float(r) if np.ndim(r) == 0 else r


# ---------------------------------------------------------------------------
# Reference projection onto the intersection C


def _box_bounds(sets: Sequence[ConvexSet]):
    """Combined ``(lo, hi)`` if every set is axis aligned, else ``None``."""
    d = sets[0].dim
    lo, hi = np.full(d, -np.inf), np.full(d, np.inf)
    for s in sets:
        if isinstance(s, Box):
            lo, hi = np.maximum(lo, s.lo), np.minimum(hi, s.hi)
            continue
        if not isinstance(s, (HalfSpace, Hyperplane)):
            return None
        nz = np.flatnonzero(s.a)
        if nz.size != 1:
            return None
        i = nz[0]
        bound = s.beta / s.a[i]
        if isinstance(s, Hyperplane):
            lo[i], hi[i] = max(lo[i], bound), min(hi[i], bound)
        elif s.a[i] > 0:
            hi[i] = min(hi[i], bound)
        else:
            lo[i] = max(lo[i], bound)
    if np.any(lo > hi + FEAS_TOL):
        raise GeometryError("intersection is empty")
    return lo, np.maximum(hi, lo)


def _polyhedron(sets):
    parts = [s.constraints() for s in sets]
    if any(p is None for p in parts):
        return None
    A = np.vstack([p[0] for p in parts])
    beta = np.concatenate([p[1] for p in parts])
    eq = np.concatenate([p[2] for p in parts])
    return A, beta, eq


def _active_set_projection(A, beta, eq, P):
    """Exact projection onto ``{A x <= beta (ineq), A x = beta (eq)}`` by enumeration.

    Every candidate is the projection onto the affine hull of one choice of
    active constraints; the nearest feasible candidate is the projection.
    """
    ineq = np.flatnonzero(~eq)
    eqi = np.flatnonzero(eq)
    tol = FEAS_TOL * (1.0 + np.abs(beta))
    best = np.full(P.shape[0], np.inf)
    out = np.full_like(P, np.nan)
    for r in range(ineq.size + 1):
        for combo in itertools.combinations(ineq, r):
            idx = np.concatenate([eqi, np.array(combo, dtype=int)])
            if idx.size == 0:
                Y = P.copy()
            else:
                As = A[idx]
                gap = P @ As.T - beta[idx]
                Y = P - (gap @ np.linalg.pinv(As @ As.T)) @ As
            val = Y @ A.T - beta
            feas = np.all(val[:, ~eq] <= tol[~eq], axis=1) & np.all(np.abs(val[:, eq]) <= tol[eq], axis=1)
            d = np.linalg.norm(Y - P, axis=1)
            take = feas & (d < best)
            best[take] = d[take]
            out[take] = Y[take]
    if np.any(~np.isfinite(best)):
        raise GeometryError("intersection is empty")
    return out


def _dykstra_reference(sets, P, tol, max_iter):
    # batched plain Dykstra, kept separate from the iteration engine it audits
    X = P.copy()
    Q = [np.zeros_like(P) for _ in sets]
    for _ in range(max_iter):
        X_prev = X
        for i, s in enumerate(sets):
            Y = X + Q[i]
            X = s.project(Y)
            Q[i] = Y - X
        if np.max(np.linalg.norm(X - X_prev, axis=-1), initial=0.0) <= tol:
            res = np.max(np.stack([s.dist(X) for s in sets]), axis=0)
            if np.max(res, initial=0.0) <= tol:
                break
    return X


def project_intersection(sets, X, tol: float = 1e-12, max_iter: int = 200_000):
    """Reference projection onto ``C = ∩ sets``.

    Returns ``(P, method)`` where ``method`` names the oracle used:
    ``"single"`` (one set), ``"box"`` (axis-aligned constraints, clamping),
    ``"polyhedral"`` (exact active-set enumeration) or ``"dykstra"``
    (long batched Dykstra run to tolerance ``tol``).
    """
    if isinstance(sets, ProblemInstance):
        sets = sets.sets
    sets = tuple(sets)
    P = _points(X, sets[0].dim)
    shape = P.shape
    P = P.reshape(-1, shape[-1])
    if len(sets) == 1:
        Y, method = sets[0].project(P), "single"
    elif (bounds := _box_bounds(sets)) is not None:
        Y, method = np.clip(P, *bounds), "box"
    elif (poly := _polyhedron(sets)) is not None and np.count_nonzero(~poly[2]) <= 12:
        Y, method = _active_set_projection(*poly, P), "polyhedral"
    else:
        Y, method = _dykstra_reference(sets, P, tol, max_iter), "dykstra"
    return Y.reshape(shape), method


def dist_intersection(sets, X):
    """Distance to ``C = ∩ sets`` through :func:`project_intersection`."""
    P = np.asarray(X, dtype=float)
    Y, _ = project_intersection(sets, P)
    d = np.linalg.norm(P - Y, axis=-1)
    return float(d) if d.ndim == 0 else d
