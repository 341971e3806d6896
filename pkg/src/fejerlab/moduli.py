"""Moduli as first-class memoised functions on the naturals.

A :class:`Modulus` wraps a total function ``N -> N``; :class:`Modulus2` and
:class:`Modulus3` do the same for two and three arguments. Memo tables are
safe under concurrent reads; insertion is serialised by a lock, so a modulus
may be shared between worker threads.

Besides the closed-form constructors, this module holds the two
instance-driven tools for moduli of regularity: :func:`discover_regularity`
(grid certification with a Lipschitz margin) and :func:`falsify_regularity`
(random and adversarial search for counterexamples).
"""

from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from . import geometry
from ._random import as_rng


class ModulusError(ValueError):
    pass


class ModulusRangeError(ModulusError):
    """A table-backed modulus was queried outside its validity range."""


class CoarseGridError(ModulusError):
    """The discovery grid cannot certify the requested precision."""

    def __init__(self, k: int, reason: str):
        super().__init__(f"grid too coarse to certify precision k={k}: {reason}")
        self.k = k


def _nat(k) -> int:
    if isinstance(k, (bool, np.bool_)) or int(k) != k or k < 0:
        raise ModulusError(f"moduli take natural-number arguments, got {k!r}")
    return int(k)


class _Memo:
    def __init__(self, fn):
        self._fn = fn
        self._memo: dict = {}
        self._lock = threading.Lock()

    def get(self, key):
        try:
            return self._memo[key]
        except KeyError:
            pass
        value = self._fn(*key)
        if isinstance(value, float):
            if not value.is_integer():
                raise ModulusError(f"modulus produced a non-integer value {value}")
        value = int(value)
        if value < 0:
            raise ModulusError(f"modulus produced a negative value {value}")
        with self._lock:
            return self._memo.setdefault(key, value)


class Modulus:
    """Memoised function ``N -> N`` with a name.

    Parameters
    ----------
    fn : callable
        The raw function; must return a natural number.
    name : str
        Label used in reports and certificates.
    max_arg : int, optional
        Largest argument the modulus is valid for. Queries beyond it raise
        :class:`ModulusRangeError`.
    """

    def __init__(self, fn: Callable[[int], int], name: str, max_arg: int | None = None):
        self._memo = _Memo(fn)
        self.name = name
        self.max_arg = max_arg

    def __call__(self, k) -> int:
        k = _nat(k)
        if self.max_arg is not None and k > self.max_arg:
            raise ModulusRangeError(f"{self.name} is valid for k <= {self.max_arg}, queried at {k}")
        return self._memo.get((k,))

    def table(self, k_max: int) -> list[int]:
        return [self(k) for k in range(k_max + 1)]

    def is_monotone(self, k_max: int) -> bool:
        vals = self.table(k_max)
        return all(a <= b for a, b in zip(vals, vals[1:]))

    def __repr__(self):
        return f"Modulus({self.name!r})"


class TableModulus(Modulus):
    """Modulus backed by an explicit table ``values[0..K]``.

    With ``tail`` given, arguments past the table are answered by ``tail``
    (the table's own range stays recorded in ``verified_max``); without it,
    such queries raise :class:`ModulusRangeError`.
    """

    def __init__(self, values: Sequence[int], name: str = "table", tail=None, tail_name: str = "",
                 info: dict | None = None):
        self.values = [int(v) for v in values]
        if not self.values:
            raise ModulusError("table modulus needs at least one value")
        if any(v < 0 for v in self.values):
            raise ModulusError("table entries must be natural numbers")
        self.verified_max = len(self.values) - 1
        self.tail = tail
        self.tail_name = tail_name
        self.info = dict(info or {})

        def fn(k):
            if k <= self.verified_max:
                return self.values[k]
            return tail(k)

        super().__init__(fn, name, None if tail is not None else self.verified_max)

    def to_json(self) -> str:
        return json.dumps(self.values)

    def to_dict(self) -> dict:
        d = {"name": self.name, "values": self.values, "verified_max": self.verified_max}
        if self.tail is not None:
            d["tail"] = self.tail_name
        d.update(self.info)
        return d

    @classmethod
    def from_json(cls, text: str, name: str = "table") -> "TableModulus":
        values = json.loads(text)
        if not isinstance(values, list):
            raise ModulusError("table modulus JSON must be an array of naturals")
        return cls(values, name)


class Modulus2:
    """Memoised function ``N x N -> N``."""

    def __init__(self, fn: Callable[[int, int], int], name: str):
        self._memo = _Memo(fn)
        self.name = name

    def __call__(self, k, n) -> int:
        return self._memo.get((_nat(k), _nat(n)))

    def __repr__(self):
        return f"Modulus2({self.name!r})"


class Modulus3:
    """Memoised function ``N x N x N -> N``.

    ``monotone`` declares the function nondecreasing in every argument; the
    metastability recursion uses it to skip running maxima.
    """

    def __init__(self, fn: Callable[[int, int, int], int], name: str, monotone: bool = False):
        self._memo = _Memo(fn)
        self.name = name
        self.monotone = monotone

    def __call__(self, n, m, r) -> int:
        return self._memo.get((_nat(n), _nat(m), _nat(r)))

    def __repr__(self):
        return f"Modulus3({self.name!r})"


# ---------------------------------------------------------------------------
# Elementary constructors


def identity(name: str = "identity") -> Modulus:
    return Modulus(lambda k: k, name)


def constant(c: int, name: str | None = None) -> Modulus:
    c = _nat(c)
    return Modulus(lambda k: c, name or f"const({c})")


def affine(a: int, c: int = 0, name: str | None = None) -> Modulus:
    """``k -> a*k + c``."""
    a, c = _nat(a), _nat(c)
    return Modulus(lambda k: a * k + c, name or f"{a}k+{c}")


def ceil_sqrt(k: int) -> int:
    r = math.isqrt(k)
    return r if r * r == k else r + 1


def truncated_sub(a: int, b: int) -> int:
    """``a ∸ b`` on the naturals."""
    return a - b if a > b else 0


@dataclass(frozen=True)
class GHPair:
    """Functions ``G``, ``H`` on ``(0, inf)`` with their moduli.

    ``alpha_g`` guarantees ``a <= 1/(alpha_g(k)+1) => G(a) <= 1/(k+1)`` and
    ``beta_h`` guarantees ``H(a) <= 1/(beta_h(k)+1) => a <= 1/(k+1)``.
    ``G`` and ``H`` must accept numpy arrays.
    """

    G: Callable
    H: Callable
    alpha_g: Modulus
    beta_h: Modulus
    name: str = ""

    def check_soundness(self, k_max: int, a_grid: np.ndarray) -> tuple[int, float] | None:
        """Return a violating ``(k, a)`` for either implication, or ``None``."""
        a_grid = np.asarray(a_grid, dtype=float)
        Ha = self.H(a_grid)
        for k in range(k_max + 1):
            target = 1.0 / (k + 1)
            a_edge = 1.0 / (self.alpha_g(k) + 1)
            pts = np.append(a_grid[a_grid <= a_edge], a_edge)
            bad = self.G(pts) > target
            if bad.any():
                return k, float(pts[bad][0])
            bad = (Ha <= 1.0 / (self.beta_h(k) + 1)) & (a_grid > target)
            if bad.any():
                return k, float(a_grid[bad][0])
        return None


def gh_identity() -> GHPair:
    """``G = H = id`` with ``alpha_g = beta_h = id``."""
    return GHPair(lambda a: a, lambda a: a, identity("alphaG=id"), identity("betaH=id"), "identity")


def _square(a):
    return np.square(a) if isinstance(a, np.ndarray) else a * a


def gh_square() -> GHPair:
    """``G(a) = H(a) = a^2`` with ``alpha_g(k) = ceil(sqrt k)``, ``beta_h(k) = k^2``."""
    return GHPair(
        _square, _square,
        Modulus(ceil_sqrt, "alphaG=ceil(sqrt k)"),
        Modulus(lambda k: k * k, "betaH=k^2"),
        "square",
    )


def gh_square_sound() -> GHPair:
    """``G(a) = H(a) = a^2`` with ``beta_h(k) = (k+1)^2 - 1``.

    :func:`gh_square` pairs ``H(a) = a^2`` with ``beta_h(k) = k^2``, which
    fails the ``beta_h`` implication for every ``k >= 1`` (``k = 1``,
    ``a = 0.6``: ``a^2 <= 1/2`` but ``a > 1/2``). This variant keeps
    ``alpha_g`` and uses the least ``beta_h`` that is sound.
    """
    return GHPair(
        _square, _square,
        Modulus(ceil_sqrt, "alphaG=ceil(sqrt k)"),
        Modulus(lambda k: k * k + 2 * k, "betaH=(k+1)^2-1"),
        "square-sound",
    )


def dykstra_rho_uniform(b: int) -> Modulus:
    """``rho(r) = 8b(r+1) - 1``: uniform modulus for Dykstra's iterates."""
    b = _positive(b)
    return Modulus(lambda r: 8 * b * (r + 1) - 1, f"rho=8*{b}(r+1)-1")


def dykstra_rho_chi_approx(b: int) -> tuple[Modulus, Modulus3]:
    """Moduli ``(rho, chi)`` for Dykstra w.r.t. approximate points.

    ``rho(r) = 4(2b+1)(r+1) - 1`` and ``chi(n, m, r) = 8b(n+m)(r+1) ∸ 1``.
    """
    b = _positive(b)
    rho = Modulus(lambda r: 4 * (2 * b + 1) * (r + 1) - 1, f"rho=4(2*{b}+1)(r+1)-1")
    chi = Modulus3(lambda n, m, r: truncated_sub(8 * b * (n + m) * (r + 1), 1),
                   f"chi=8*{b}(n+m)(r+1)-1", monotone=True)
    return rho, chi


def _positive(b) -> int:
    b = _nat(b)
    if b == 0:
        raise ModulusError("b must be a positive natural number")
    return b


def _cells(width: Fraction, k: int, d: int) -> int:
    # least n >= 1 with n >= width*(k+1)*sqrt(d), computed exactly
    target = width * width * (k + 1) * (k + 1) * d
    n = math.isqrt(target.numerator // target.denominator)
    while n * n < target:
        n += 1
    return max(n, 1)


def box_total_boundedness(lo, hi) -> Modulus:
    """Pigeonhole modulus of total boundedness for a box.

    ``gamma(k) = prod_i max(1, ceil((hi_i - lo_i)(k+1) sqrt(d)))``: the box
    splits into ``gamma(k)`` closed cells of diameter at most ``1/(k+1)``, so
    among any ``gamma(k) + 1`` points two lie within ``1/(k+1)``.
    """
    lo = geometry.as_vector(lo)
    hi = geometry.as_vector(hi, lo.size)
    if np.any(lo > hi):
        raise ModulusError("box requires lo <= hi coordinatewise")
    widths = [Fraction(float(h)) - Fraction(float(l)) for l, h in zip(lo, hi)]
    d = lo.size

    def gamma(k):
        out = 1
        for w in widths:
            out *= _cells(w, k, d)
        return out

    return Modulus(gamma, f"gamma=box(d={d})")


def coincidence_tau(scheme: str) -> Modulus2:
    """Modulus of coincidence: ``2n(k+1)`` for Ishikawa, ``n(k+1)`` otherwise."""
    if scheme == "ishikawa":
        return Modulus2(lambda k, n: 2 * n * (k + 1), "tau=2n(k+1)")
    if scheme in ("picard", "km", "halpern"):
        return Modulus2(lambda k, n: n * (k + 1), "tau=n(k+1)")
    raise ModulusError(f"no coincidence modulus for scheme {scheme!r}")


# ---------------------------------------------------------------------------
# Monotonisation


def monotonize_A(A: Callable[[int, int], bool]) -> Callable[[int, int], bool]:
    """``A~(n, k) = A(n, 0) and ... and A(n, k)``, antitone in ``k``."""
    first_fail: dict[int, int] = {}
    scanned: dict[int, int] = {}
    lock = threading.Lock()

    def A_tilde(n, k):
        n, k = _nat(n), _nat(k)
        if n in first_fail:
            return k < first_fail[n]
        start = scanned.get(n, -1) + 1
        for i in range(start, k + 1):
            if not A(n, i):
                with lock:
                    first_fail[n] = i
                return k < i
        with lock:
            scanned[n] = max(scanned.get(n, -1), k)
        return True

    A_tilde.__name__ = f"monotonized({getattr(A, '__name__', 'A')})"
    return A_tilde


def monotone_envelope(phi, name: str | None = None) -> Modulus:
    """Running maximum ``phi^M(k) = max(phi(0), ..., phi(k))``.

    ``phi`` may be a callable (including a :class:`Modulus`) or a finite
    sequence; in the latter case the envelope is valid on its index range.
    """
    if isinstance(phi, (list, tuple, np.ndarray)):
        vals = np.maximum.accumulate(np.asarray([int(v) for v in phi], dtype=object))
        return TableModulus(list(vals), name or "envelope")

    running: list[int] = []
    lock = threading.Lock()

    def env(k):
        with lock:
            while len(running) <= k:
                i = len(running)
                v = int(phi(i))
                running.append(v if not running else max(running[-1], v))
            return running[k]

    return Modulus(env, name or f"envelope({getattr(phi, 'name', 'phi')})")


# ---------------------------------------------------------------------------
# Moduli of regularity for the feasibility residual


def _grid(center: np.ndarray, radius: float, step: float, max_points: int) -> np.ndarray:
    d = center.size
    cover = step * math.sqrt(d) / 2
    n = int(math.ceil((radius + cover) / step))
    if (2 * n + 1) ** d > max_points:
        raise ModulusError(f"grid of {(2 * n + 1) ** d} points exceeds max_points={max_points}")
    axis = np.arange(-n, n + 1) * step
    mesh = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)
    keep = np.linalg.norm(mesh, axis=1) <= radius + cover
    return center + mesh[keep]


def _mu_for_threshold(t: float) -> int:
    # least m >= 0 with 1/(m+1) <= t
    m = max(0, math.ceil(1.0 / t) - 1)
    while m > 0 and 1.0 / m <= t:
        m -= 1
    while 1.0 / (m + 1) > t:
        m += 1
    return m


def discover_regularity(instance: geometry.ProblemInstance, ball_radius: float, grid_step: float,
                        k_max: int, center=None, tail: str | None = None,
                        max_points: int = 4_000_000) -> TableModulus:
    """Certify a modulus of regularity for ``residual_f`` on a ball by grid search.

    The grid of spacing ``h`` covers the ball with covering radius
    ``delta = h*sqrt(d)/2``. Both the residual and the distance to ``C`` are
    1-Lipschitz, so for every point ``x`` of the ball with
    ``dist(x, C) >= 1/(k+1)`` some grid point ``y`` has
    ``dist(y, C) >= 1/(k+1) - delta`` and ``f(x) >= f(y) - delta``. The table
    entry is the least ``mu(k)`` with ``1/(mu(k)+1)`` below that bound, which
    makes it valid on the whole ball, not only on the grid. Distances to
    ``C`` come from :func:`geometry.project_intersection`.

    Parameters
    ----------
    tail : {None, "linear"}
        ``None`` rejects queries beyond ``k_max``. ``"linear"`` answers them
        with ``ceil(kappa*(k+1)) - 1``, ``kappa = max_k (mu(k)+1)/(k+1)`` over
        the certified table; the extension is an extrapolation and is marked
        as such in the returned modulus.

    Raises
    ------
    CoarseGridError
        When ``delta`` is too large to resolve some ``k <= k_max``.
    """
    if grid_step <= 0:
        raise ModulusError("grid_step must be positive")
    k_max = _nat(k_max)
    c = instance.z if center is None else geometry.as_vector(center, instance.dim)
    pts = _grid(c, float(ball_radius), float(grid_step), max_points)
    f = np.empty(len(pts))
    dC = np.empty(len(pts))
    for s in range(0, len(pts), 250_000):
        chunk = pts[s:s + 250_000]
        f[s:s + 250_000] = geometry.residual_f(instance, chunk)
        dC[s:s + 250_000] = geometry.dist_intersection(instance.sets, chunk)
    delta = grid_step * math.sqrt(instance.dim) / 2

    order = np.argsort(-dC, kind="stable")
    d_sorted = dC[order]
    f_prefix_min = np.minimum.accumulate(f[order])

    values = []
    for k in range(k_max + 1):
        thr = 1.0 / (k + 1) - delta
        if thr <= 0:
            raise CoarseGridError(k, f"covering radius {delta:.3g} exceeds 1/(k+1)")
        count = int(np.searchsorted(-d_sorted, -thr, side="right"))
        if count == 0:
            values.append(0)
            continue
        t = float(f_prefix_min[count - 1]) - delta
        if t <= 0:
            raise CoarseGridError(k, "residual does not separate far points from C at this spacing")
        values.append(_mu_for_threshold(t))
    values = list(np.maximum.accumulate(values))

    info = {"grid_step": grid_step, "ball_radius": float(ball_radius), "margin": delta,
            "grid_points": int(len(pts))}
    if tail is None:
        return TableModulus(values, "mu-discovered", info=info)
    if tail != "linear":
        raise ModulusError(f"unknown tail rule {tail!r}")
    kappa = max(Fraction(v + 1, k + 1) for k, v in enumerate(values))
    last = values[-1]

    def linear_tail(k):
        q = kappa * (k + 1)
        return max(last, -((-q.numerator) // q.denominator) - 1)

    info["kappa"] = str(kappa)
    return TableModulus(values, "mu-discovered", tail=linear_tail,
                        tail_name=f"linear(kappa={kappa})", info=info)


@dataclass
class FalsifyResult:
    passed: bool
    samples: int
    witness: dict | None = None
    ks: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "samples": self.samples, "witness": self.witness,
                "ks": [int(k) for k in self.ks]}


def falsify_regularity(instance: geometry.ProblemInstance, mu: Modulus, ball_radius: float,
                       samples: int, k_max: int = 20, ks=None, center=None, rng=None) -> FalsifyResult:
    """Search for ``x`` in the ball and ``k`` with ``f(x) < 1/(mu(k)+1)`` but ``dist(x, C) >= 1/(k+1)``.

    A quarter of the budget goes to uniform points of the ball, tested at
    every ``k``. The rest is adversarial: for each ``k``, points of ``C`` are
    pushed outward along normal directions to distance exactly
    ``(1 + 1e-6)/(k+1)``, where the residual is as small as it can get among
    points that are too far from ``C``.
    """
    if samples < 1:
        raise ModulusError("samples must be >= 1")
    rng = as_rng(rng, "falsify-regularity")
    ks = list(range(_nat(k_max) + 1)) if ks is None else sorted({_nat(k) for k in ks})
    c = instance.z if center is None else geometry.as_vector(center, instance.dim)
    R = float(ball_radius)
    d = instance.dim
    thresholds = {k: 1.0 / (mu(k) + 1) for k in ks}

    def in_ball(n):
        u = rng.normal(size=(n, d))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        return c + u * (R * rng.random(n) ** (1.0 / d))[:, None]

    witness = None

    def record(x, k, fx, dx):
        nonlocal witness
        if witness is None:
            witness = {"x": [float(v) for v in x], "k": int(k), "residual": float(fx),
                       "dist": float(dx), "mu_k": int(mu(k)), "threshold": thresholds[k]}

    n_uniform = max(1, samples // 4)
    X = in_ball(n_uniform)
    fX = geometry.residual_f(instance, X)
    dX = geometry.dist_intersection(instance.sets, X)
    for k in ks:
        bad = (fX < thresholds[k]) & (dX >= (1 + 1e-9) / (k + 1))
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            record(X[i], k, fX[i], dX[i])
            return FalsifyResult(False, samples, witness, ks)

    per_k = max(1, (samples - n_uniform) // len(ks))
    for k in ks:
        # seed points at mixed scales around C, then rescale their offsets
        scales = R * 10.0 ** rng.uniform(-4, 0, per_k)
        base = in_ball(per_k)
        base_proj, _ = geometry.project_intersection(instance.sets, base)
        u = rng.normal(size=(per_k, d))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        Y = base_proj + u * scales[:, None]
        P, _ = geometry.project_intersection(instance.sets, Y)
        off = Y - P
        norm = np.linalg.norm(off, axis=1)
        ok = norm > 1e-14
        target = (1 + 1e-6) / (k + 1)
        Xk = P[ok] + off[ok] / norm[ok, None] * target
        Xk = Xk[np.linalg.norm(Xk - c, axis=1) <= R]
        if not len(Xk):
            continue
        fk = geometry.residual_f(instance, Xk)
        bad = fk < thresholds[k]
        if bad.any():
            i = int(np.argmin(fk))
            record(Xk[i], k, fk[i], target)
            return FalsifyResult(False, samples, witness, ks)
    return FalsifyResult(True, samples, None, ks)


# ---------------------------------------------------------------------------
# Name-addressable constructors


def parse_spec(text: str) -> tuple[str, dict]:
    """Split ``"name:key=val,key=val"``; values may be bracketed lists."""
    name, _, rest = text.partition(":")
    params: dict = {}
    depth, cur, parts = 0, "", []
    for ch in rest:
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append(cur)
            cur = ""
        else:
            cur += ch
    if cur:
        parts.append(cur)
    for part in parts:
        key, eq, val = part.partition("=")
        if not eq:
            raise ModulusError(f"malformed parameter {part!r} in {text!r}")
        params[key.strip()] = _parse_value(val.strip())
    return name.strip(), params


def _parse_value(val: str):
    if val.startswith("["):
        return json.loads(val)
    for conv in (int, float):
        try:
            return conv(val)
        except ValueError:
            pass
    return val


MODULUS_NAMES = {
    "identity": "k -> k",
    "zero": "k -> 0",
    "const": "k -> c (param c)",
    "affine": "k -> a*k + c (params a, c)",
    "sqrt-ceil": "k -> ceil(sqrt k)",
    "square": "k -> k^2",
    "dykstra-uniform": "r -> 8b(r+1)-1 (param b, default instance b)",
    "dykstra-approx-rho": "r -> 4(2b+1)(r+1)-1 (param b)",
    "box": "pigeonhole gamma for box (params lo, hi)",
    "box-ball": "pigeonhole gamma for the cube around z of half-width b",
    "table": "JSON array file (param file)",
}
MODULUS3_NAMES = {
    "dykstra-approx-chi": "(n,m,r) -> 8b(n+m)(r+1) - 1, truncated (param b)",
    "chi-r": "(n,m,r) -> r",
    "chi-zero": "(n,m,r) -> 0",
}
MODULUS2_NAMES = {
    "coincidence": "tau for scheme (param scheme)",
    "tau-linear": "(k,n) -> c*n(k+1) (param c)",
}


def build_modulus(text: str, instance: geometry.ProblemInstance | None = None) -> Modulus:
    """Build a one-argument modulus from a name such as ``dykstra-uniform:b=2``."""
    name, p = parse_spec(text)

    def b():
        if "b" in p:
            return p["b"]
        if instance is None:
            raise ModulusError(f"{name} needs parameter b (or an instance)")
        return instance.b

    if name == "identity":
        return identity()
    if name == "zero":
        return constant(0, "zero")
    if name == "const":
        return constant(p.get("c", 0))
    if name == "affine":
        return affine(p.get("a", 1), p.get("c", 0))
    if name == "sqrt-ceil":
        return Modulus(ceil_sqrt, "ceil(sqrt k)")
    if name == "square":
        return Modulus(lambda k: k * k, "k^2")
    if name == "dykstra-uniform":
        return dykstra_rho_uniform(b())
    if name == "dykstra-approx-rho":
        return dykstra_rho_chi_approx(b())[0]
    if name == "box":
        return box_total_boundedness(p["lo"], p["hi"])
    if name == "box-ball":
        if instance is None:
            raise ModulusError("box-ball needs an instance")
        return box_total_boundedness(instance.z - instance.b, instance.z + instance.b)
    if name == "table":
        with open(p["file"]) as fh:
            return TableModulus.from_json(fh.read(), name=f"table({p['file']})")
    raise ModulusError(f"unknown modulus {name!r}; known: {', '.join(sorted(MODULUS_NAMES))}")


def build_modulus3(text: str, instance: geometry.ProblemInstance | None = None) -> Modulus3:
    name, p = parse_spec(text)
    if name == "dykstra-approx-chi":
        bb = p.get("b", instance.b if instance is not None else None)
        if bb is None:
            raise ModulusError("dykstra-approx-chi needs parameter b")
        return dykstra_rho_chi_approx(bb)[1]
    if name == "chi-r":
        return Modulus3(lambda n, m, r: r, "chi=r", monotone=True)
    if name == "chi-zero":
        return Modulus3(lambda n, m, r: 0, "chi=0", monotone=True)
    raise ModulusError(f"unknown 3-argument modulus {name!r}; known: {', '.join(sorted(MODULUS3_NAMES))}")


def build_modulus2(text: str, scheme: str | None = None) -> Modulus2:
    name, p = parse_spec(text)
    if name == "coincidence":
        return coincidence_tau(p.get("scheme", scheme))
    if name == "tau-linear":
        c = _nat(p.get("c", 1))
        return Modulus2(lambda k, n: c * n * (k + 1), f"tau={c}n(k+1)")
    raise ModulusError(f"unknown 2-argument modulus {name!r}; known: {', '.join(sorted(MODULUS2_NAMES))}")


def build_gh(text: str) -> GHPair:
    if text == "identity":
        return gh_identity()
    if text == "square":
        return gh_square()
    if text == "square-sound":
        return gh_square_sound()
    raise ModulusError(f"unknown G/H pair {text!r}; known: identity, square, square-sound")
