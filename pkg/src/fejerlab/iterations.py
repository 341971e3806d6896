"""Iteration engines and empirical checkers for relativised Fejér monotonicity.

Dykstra's cyclic projection algorithm is run in the form

    x_n = P_[n](x_{n-1} + q_{n-N}),   q_n = x_{n-1} + q_{n-N} - x_n,

with ``[n] = ((n-1) mod N) + 1`` and ``q_k = 0`` for ``k <= 0``. The window
sums ``sum_{k=n-N+1}^n q_k`` then telescope to ``x_0 - x_n``, which the
trace invariants check.

The classical fixed-point schemes (Picard, Krasnoselskii-Mann, Ishikawa,
Halpern) run over an operator ``T`` that composes projections.

Checkers quantify over sampled points ``p`` rather than all of ``C``; each
verdict keeps its sample set and the number of premise instances that were
actually exercised.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import geometry
from .moduli import GHPair, Modulus, Modulus3, monotone_envelope
from ._random import as_rng

SLACK = 1e-9


class IterationError(RuntimeError):
    pass


class HorizonError(ValueError):
    """The trace is too short to answer a query."""

    def __init__(self, k: int, message: str):
        super().__init__(message)
        self.k = k


# ---------------------------------------------------------------------------
# Scheme descriptions


@dataclass(frozen=True)
class ParamSequence:
    """Parameter sequence in ``[0, 1]``: ``constant`` (value c) or ``harmonic`` (``1/(n+s)``)."""

    kind: str = "constant"
    value: float = 0.5

    def __post_init__(self):
        if self.kind == "constant":
            if not 0.0 <= self.value <= 1.0:
                raise ValueError(f"constant parameter must lie in [0, 1], got {self.value}")
        elif self.kind == "harmonic":
            if self.value < 1:
                raise ValueError("harmonic shift must be >= 1 so that 1/(n+s) <= 1")
        else:
            raise ValueError(f"unknown parameter sequence kind {self.kind!r}")

    def __call__(self, n: int) -> float:
        if self.kind == "constant":
            return self.value
        return 1.0 / (n + self.value)

    def to_json(self):
        return self.value if self.kind == "constant" else {"harmonic": self.value}

    @classmethod
    def from_json(cls, obj) -> "ParamSequence":
        if isinstance(obj, (int, float)):
            return cls("constant", float(obj))
        if isinstance(obj, dict) and "harmonic" in obj:
            return cls("harmonic", float(obj["harmonic"]))
        raise ValueError(f"cannot read parameter sequence from {obj!r}")


SCHEMES = ("dykstra", "picard", "km", "ishikawa", "halpern")


@dataclass(frozen=True)
class SchemeDescriptor:
    """An iteration scheme ``x_{n+1} = I(n, x_n)``.

    ``operator`` lists the sets whose projections compose ``T`` (applied in
    the listed order). ``anchor`` is Halpern's ``u``; ``None`` means ``x_0``.
    """

    kind: str
    operator: tuple = ()
    alpha: ParamSequence = ParamSequence("constant", 0.5)
    beta: ParamSequence = ParamSequence("constant", 0.5)
    anchor: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in SCHEMES:
            raise ValueError(f"unknown scheme {self.kind!r}; known: {', '.join(SCHEMES)}")
        object.__setattr__(self, "operator", tuple(self.operator))
        if self.kind != "dykstra" and not self.operator:
            raise ValueError(f"scheme {self.kind!r} needs a nonempty operator")

    @property
    def dim(self) -> int:
        return self.operator[0].dim

    def T(self, x):
        for s in self.operator:
            x = s.project(x)
        return x

    def fixed_point_residual(self, x):
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x - self.T(x), axis=-1)
        return float(r) if r.ndim == 0 else r

    def step(self, n: int, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        Tx = self.T(x)
        if self.kind == "picard":
            return Tx
        # written as base + (1 - a)(target - base) so that fixed points stay exactly fixed
        a = self.alpha(n)
        if self.kind == "km":
            return x + (1 - a) * (Tx - x)
        if self.kind == "ishikawa":
            y = x + (1 - self.beta(n)) * (Tx - x)
            return x + (1 - a) * (self.T(y) - x)
        if self.kind == "halpern":
            return u + (1 - a) * (Tx - u)
        raise ValueError("dykstra has no one-step map; use run_dykstra")

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind != "dykstra":
            d["operator"] = [s.to_dict() for s in self.operator]
            d["alpha"] = self.alpha.to_json()
            d["beta"] = self.beta.to_json()
            if self.anchor is not None:
                d["anchor"] = [float(v) for v in self.anchor]
        return d

    @classmethod
    def from_dict(cls, d: dict, instance: geometry.ProblemInstance | None = None) -> "SchemeDescriptor":
        kind = d["kind"]
        if "operator" in d:
            op = tuple(geometry.set_from_dict(s) for s in d["operator"])
        elif instance is not None:
            op = instance.sets
        else:
            op = ()
        anchor = d.get("anchor")
        return cls(
            kind, op,
            ParamSequence.from_json(d.get("alpha", 0.5)),
            ParamSequence.from_json(d.get("beta", 0.5)),
            None if anchor is None else geometry.as_vector(anchor),
        )


# ---------------------------------------------------------------------------
# Traces


@dataclass(frozen=True, eq=False)
class IterationTrace:
    """Record of a run: iterates, residuals and (Dykstra only) corrections.

    ``corrections`` has one row per index ``1-N .. T``; use
    :meth:`correction` to address it by ``k``. ``a_values[n]`` is the window
    sum ``sum_{k=n-N+1}^n <x_k - x_n, q_k>``.
    """

    points: np.ndarray
    residuals: np.ndarray
    scheme: SchemeDescriptor | None
    instance: geometry.ProblemInstance | None = None
    corrections: np.ndarray | None = None
    a_values: np.ndarray | None = None

    @property
    def T(self) -> int:
        return len(self.points) - 1

    @property
    def kind(self) -> str:
        return "dykstra" if self.scheme is None else self.scheme.kind

    @property
    def is_dykstra(self) -> bool:
        return self.corrections is not None

    def correction(self, k: int) -> np.ndarray:
        if not self.is_dykstra:
            raise TypeError("only Dykstra traces carry corrections")
        N = self.instance.N
        if k <= 0:
            return np.zeros(self.points.shape[1])
        return self.corrections[k + N - 1]

    def telescoping_error(self) -> np.ndarray:
        """``||sum_{k=n-N+1}^n q_k - (x_0 - x_n)||`` for every ``n``."""
        N = self.instance.N
        window = np.zeros_like(self.points)
        for j in range(N):
            # row n of the window sum picks q_{n-j} = corrections[n - j + N - 1]
            window += self.corrections[N - 1 - j:N - 1 - j + len(self.points)]
        return np.linalg.norm(window - (self.points[0] - self.points), axis=1)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        d = self.points.shape[1]
        w.writerow(["n", *[f"x{i}" for i in range(d)], "residual", "a_value"])
        for n, x in enumerate(self.points):
            a = "" if self.a_values is None else repr(float(self.a_values[n]))
            w.writerow([n, *[repr(float(v)) for v in x], repr(float(self.residuals[n])), a])
        return buf.getvalue()

    def to_dict(self) -> dict:
        d = {
            "scheme": "dykstra" if self.scheme is None else self.scheme.to_dict(),
            "points": self.points.tolist(),
            "residuals": self.residuals.tolist(),
        }
        if self.instance is not None:
            d["instance"] = self.instance.to_dict()
        if self.is_dykstra:
            d["corrections"] = self.corrections.tolist()
            d["a_values"] = self.a_values.tolist()
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def summary(self) -> dict:
        return {
            "kind": self.kind,
            "T": self.T,
            "x_T": [float(v) for v in self.points[-1]],
            "residual_T": float(self.residuals[-1]),
            "max_residual": float(self.residuals.max()),
        }


def _finite_or_raise(x, n):
    if not np.all(np.isfinite(x)):
        raise IterationError(f"non-finite iterate at n={n}: {x}")


def run_dykstra(instance: geometry.ProblemInstance, T: int) -> IterationTrace:
    """Run ``T`` steps of Dykstra's cyclic projections from ``instance.x0``."""
    if T < 1:
        raise ValueError("T must be >= 1")
    N, d = instance.N, instance.dim
    xs = np.empty((T + 1, d))
    qs = np.zeros((T + N, d))  # row k + N - 1 holds q_k
    xs[0] = instance.x0
    for n in range(1, T + 1):
        s = instance.sets[(n - 1) % N]
        y = xs[n - 1] + qs[n - 1]  # q_{n-N} sits at row n - 1
        x = s.project(y)
        _finite_or_raise(x, n)
        xs[n] = x
        qs[n + N - 1] = y - x
    residuals = geometry.residual_f(instance, xs)
    a = np.zeros(T + 1)
    for j in range(N):
        Q = qs[N - 1 - j:N - 1 - j + T + 1]  # q_{n-j} for each n
        Xk = np.vstack([np.zeros((j, d)), xs[:T + 1 - j]]) if j else xs  # x_{n-j}
        a += np.einsum("ij,ij->i", Xk - xs, Q)
    return IterationTrace(xs, residuals, None, instance, qs, a)


def run_scheme(desc: SchemeDescriptor, x0, T: int) -> IterationTrace:
    """Run a fixed-point scheme; residuals are ``||x_n - T x_n||``."""
    if desc.kind == "dykstra":
        raise ValueError("use run_dykstra for Dykstra's algorithm")
    if T < 1:
        raise ValueError("T must be >= 1")
    x = geometry.as_vector(x0, desc.dim)
    u = x if desc.anchor is None else desc.anchor
    xs = np.empty((T + 1, x.size))
    xs[0] = x
    for n in range(T):
        x = desc.step(n, x, u)
        _finite_or_raise(x, n + 1)
        xs[n + 1] = x
    return IterationTrace(xs, desc.fixed_point_residual(xs), desc)


def run(desc: SchemeDescriptor, instance: geometry.ProblemInstance, T: int) -> IterationTrace:
    if desc.kind == "dykstra":
        return run_dykstra(instance, T)
    tr = run_scheme(desc, instance.x0, T)
    return IterationTrace(tr.points, tr.residuals, desc, instance)


# ---------------------------------------------------------------------------
# A-properties


class ThresholdProperty:
    """``A(n, k) := values[n] < 1/(k+1)``; antitone in ``k`` by construction."""

    def __init__(self, values: np.ndarray, name: str):
        self.values = np.asarray(values, dtype=float)
        self.name = name

    def __call__(self, n: int, k: int) -> bool:
        return bool(self.values[n] < 1.0 / (k + 1))

    def mask(self, k: int) -> np.ndarray:
        return self.values < 1.0 / (k + 1)


def dykstra_property(trace: IterationTrace) -> ThresholdProperty:
    if not trace.is_dykstra:
        raise TypeError("the Dykstra property needs a Dykstra trace; use trivial_property")
    return ThresholdProperty(trace.a_values, "dykstra")


def trivial_property(trace: IterationTrace) -> ThresholdProperty:
    """The constantly true property."""
    return ThresholdProperty(np.full(trace.T + 1, -np.inf), "trivial")


def _mask(A, trace: IterationTrace, k: int) -> np.ndarray:
    if isinstance(A, ThresholdProperty):
        return A.mask(k)
    return np.array([bool(A(n, k)) for n in range(trace.T + 1)])


def a_holds(trace: IterationTrace, n: int, r: int) -> bool:
    """Dykstra property ``sum_{k=n-N+1}^n <x_k - x_n, q_k> < 1/(r+1)``."""
    if not trace.is_dykstra:
        raise TypeError("a_holds is defined for Dykstra traces only")
    if not 0 <= n <= trace.T:
        raise IndexError(f"n={n} outside trace 0..{trace.T}")
    return bool(trace.a_values[n] < 1.0 / (r + 1))


def empirical_phi(trace: IterationTrace, A, k_max: int | None = None) -> Modulus:
    """Least-index approximate point bound measured on a trace.

    ``Phi(k)`` is the least ``n`` with ``residual(x_n) < 1/(k+1)`` and
    ``A(n, k)``, put through the running-max envelope. The returned modulus
    answers any ``k`` the trace can resolve; ``k <= k_max`` is validated
    eagerly. A ``k`` the trace cannot resolve raises :class:`HorizonError`.
    """
    res = trace.residuals

    if isinstance(A, ThresholdProperty):
        # both conditions are thresholds, so the least index is already monotone in k
        best = np.minimum.accumulate(np.maximum(res, A.values))

        def phi(k):
            n = int(np.searchsorted(-best, -1.0 / (k + 1), side="right"))
            if n > trace.T:
                raise HorizonError(k, f"no n <= {trace.T} is a {k}-approximate point with A(n, {k})")
            return n

        mod = Modulus(phi, f"phi-empirical({A.name})")
    else:
        def raw(k):
            for n in range(trace.T + 1):
                if res[n] < 1.0 / (k + 1) and A(n, k):
                    return n
            raise HorizonError(k, f"no n <= {trace.T} is a {k}-approximate point with A(n, {k})")

        mod = monotone_envelope(raw, f"phi-empirical({getattr(A, 'name', 'A')})")
    if k_max is not None:
        for k in range(k_max + 1):
            mod(k)
    return mod


# ---------------------------------------------------------------------------
# Verdicts and checkers


@dataclass
class Verdict:
    check: str
    passed: bool
    witness: dict | None = None
    exercised: int = 0
    samples: list = field(default_factory=list)
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "check": self.check,
            "passed": self.passed,
            "witness": self.witness,
            "exercised": int(self.exercised),
            "params": self.params,
            "samples": [[float(v) for v in p] for p in self.samples],
        }


def _suffix_max(M: np.ndarray) -> np.ndarray:
    return np.maximum.accumulate(M[..., ::-1], axis=-1)[..., ::-1]


def check_fejer_local(trace: IterationTrace, ghp: GHPair, A, p, r: int, m: int) -> Verdict:
    """Check the local implication for one ``p`` and one pair ``(r, m)``.

    For every ``n`` with ``d(x_n, p) < 1/(m+1)`` and ``A(n, m)``, all ``l``
    must satisfy ``H(d(x_{n+l}, p)) <= G(d(x_n, p)) + 1/(r+1)``.
    """
    p = geometry.as_vector(p, trace.points.shape[1])
    D = np.linalg.norm(trace.points - p, axis=1)
    prem = (D < 1.0 / (m + 1)) & _mask(A, trace, m)
    Hs = _suffix_max(ghp.H(D))
    viol = prem & (Hs > ghp.G(D) + 1.0 / (r + 1) + SLACK)
    witness = None
    if viol.any():
        n = int(np.flatnonzero(viol)[0])
        l = int(np.argmax(ghp.H(D[n:])))
        witness = {"n": n, "l": l, "p": p.tolist(), "r": r, "m": m,
                   "lhs": float(ghp.H(D[n + l])), "rhs": float(ghp.G(D[n]) + 1.0 / (r + 1))}
    return Verdict("fejer-local", witness is None, witness, int(prem.sum()), [p], {"r": r, "m": m})


def check_fejer_uniform(trace: IterationTrace, ghp: GHPair, A, rho: Modulus, p_samples,
                        r_max: int, rs: Sequence[int] | None = None) -> Verdict:
    """Uniform check with modulus ``rho`` over sampled ``p`` and ``r <= r_max``.

    ``rs`` overrides the list of precisions (used to audit specific ones).
    """
    P = np.atleast_2d(np.asarray(p_samples, dtype=float))
    D = np.linalg.norm(trace.points[None, :, :] - P[:, None, :], axis=2)
    HD, GD = ghp.H(D), ghp.G(D)
    Hs = _suffix_max(HD)
    exercised = 0
    rs = range(r_max + 1) if rs is None else rs
    for r in rs:
        m = rho(r)
        prem = (D < 1.0 / (m + 1)) & _mask(A, trace, m)[None, :]
        exercised += int(prem.sum())
        viol = prem & (Hs > GD + 1.0 / (r + 1) + SLACK)
        if viol.any():
            i, n = (int(v) for v in np.argwhere(viol)[0])
            l = int(np.argmax(HD[i, n:]))
            witness = {"p": P[i].tolist(), "n": n, "l": l, "r": int(r), "rho_r": m,
                       "lhs": float(HD[i, n + l]), "rhs": float(GD[i, n] + 1.0 / (r + 1))}
            return Verdict("fejer-uniform", False, witness, exercised, list(P), {"r_max": r_max, "rho": rho.name})
    return Verdict("fejer-uniform", True, None, exercised, list(P), {"r_max": r_max, "rho": rho.name})


def check_fejer_uniform_approx(trace: IterationTrace, ghp: GHPair, A, rho: Modulus, chi: Modulus3,
                               p_samples, r_max: int, m_max: int,
                               instance: geometry.ProblemInstance | None = None) -> Verdict:
    """Check uniform monotonicity w.r.t. approximate points.

    ``p`` need not lie in ``C``: the premise asks ``f(p) <= 1/(chi(n,m,r)+1)``
    together with ``d(x_n, p) < 1/(rho(r)+1)`` and ``A(n, rho(r))``; the
    conclusion covers ``l <= m`` (as far as the trace reaches).
    """
    instance = instance or trace.instance
    P = np.atleast_2d(np.asarray(p_samples, dtype=float))
    fP = geometry.residual_f(instance, P)
    D = np.linalg.norm(trace.points[None, :, :] - P[:, None, :], axis=2)
    HD, GD = ghp.H(D), ghp.G(D)
    T = trace.T
    ns = np.arange(T + 1)
    exercised = 0
    params = {"r_max": r_max, "m_max": m_max, "rho": rho.name, "chi": chi.name}
    for m in range(m_max + 1):
        # windowed max of H over l <= m, truncated at the end of the trace
        Hw = HD.copy()
        for l in range(1, m + 1):
            Hw[:, :T + 1 - l] = np.maximum(Hw[:, :T + 1 - l], HD[:, l:])
        for r in range(r_max + 1):
            rr = rho(r)
            chis = np.array([chi(int(n), m, r) for n in ns], dtype=float)
            in_af = fP[:, None] <= 1.0 / (chis[None, :] + 1)
            prem = in_af & (D < 1.0 / (rr + 1)) & _mask(A, trace, rr)[None, :]
            exercised += int(prem.sum())
            viol = prem & (Hw > GD + 1.0 / (r + 1) + SLACK)
            if viol.any():
                i, n = (int(v) for v in np.argwhere(viol)[0])
                l = int(np.argmax(HD[i, n:n + m + 1]))
                witness = {"p": P[i].tolist(), "residual_p": float(fP[i]), "n": n, "l": l,
                           "m": m, "r": r, "rho_r": rr, "chi": int(chis[n]),
                           "lhs": float(HD[i, n + l]), "rhs": float(GD[i, n] + 1.0 / (r + 1))}
                return Verdict("fejer-approx", False, witness, exercised, list(P), params)
    return Verdict("fejer-approx", True, None, exercised, list(P), params)


def find_non_fejer_witness(trace: IterationTrace, p_samples) -> Verdict:
    """Look for ``p`` and ``n`` with ``||x_{n+1} - p|| > ||x_n - p|| + 1e-9``.

    ``passed`` is True when a witness is found, i.e. when the trace is shown
    not to be Fejér monotone in the ordinary sense.
    """
    P = np.atleast_2d(np.asarray(p_samples, dtype=float))
    D = np.linalg.norm(trace.points[None, :, :] - P[:, None, :], axis=2)
    inc = np.diff(D, axis=1)
    if inc.size and inc.max() > SLACK:
        i, n = (int(v) for v in np.unravel_index(np.argmax(inc), inc.shape))
        witness = {"p": P[i].tolist(), "n": n, "dist_n": float(D[i, n]), "dist_n_plus_1": float(D[i, n + 1]),
                   "increase": float(inc[i, n])}
        return Verdict("non-fejer-witness", True, witness, P.shape[0], list(P))
    return Verdict("non-fejer-witness", False, None, P.shape[0], list(P))


def check_coincidence(desc: SchemeDescriptor, tau, x0_samples, k_max: int, n_max: int) -> Verdict:
    """Check ``f(x_0) < 1/(tau(k,n)+1) => ||x_n - x_0|| < 1/(k+1)`` with ``f(x) = ||x - T x||``."""
    X0 = np.atleast_2d(np.asarray(x0_samples, dtype=float))
    exercised = 0
    for x0 in X0:
        tr = run_scheme(desc, x0, n_max)
        f0 = tr.residuals[0]
        drift = np.linalg.norm(tr.points - x0, axis=1)
        for n in range(n_max + 1):
            for k in range(k_max + 1):
                if f0 < 1.0 / (tau(k, n) + 1):
                    exercised += 1
                    if drift[n] >= 1.0 / (k + 1) + SLACK:
                        witness = {"x0": x0.tolist(), "k": k, "n": n, "residual_x0": float(f0),
                                   "drift": float(drift[n]), "tau": int(tau(k, n))}
                        return Verdict("coincidence", False, witness, exercised, list(X0),
                                       {"scheme": desc.kind, "tau": tau.name})
    return Verdict("coincidence", True, None, exercised, list(X0), {"scheme": desc.kind, "tau": tau.name})


# ---------------------------------------------------------------------------
# Sample generators


def _unit(rng, n, d):
    u = rng.normal(size=(n, d))
    return u / np.linalg.norm(u, axis=1, keepdims=True)


def sample_points_in_C(instance: geometry.ProblemInstance, trace: IterationTrace | None, count: int,
                       rng=None, scales: Sequence[float] = (1e-1, 1e-2, 1e-3, 1e-4)) -> np.ndarray:
    """Points of ``C``: ``z``, projections of iterates and projected perturbations at several scales.

    Perturbations around the projected iterates are what make the local
    premises ``d(x_n, p) < 1/(rho(r)+1)`` fire.
    """
    rng = as_rng(rng, "samples-in-C")
    d = instance.dim
    seeds = [instance.z[None, :]]
    if trace is not None:
        seeds.append(trace.points[np.linspace(0, trace.T, min(trace.T + 1, 12)).astype(int)])
    base, _ = geometry.project_intersection(instance.sets, np.vstack(seeds))
    out = [base]
    remaining = max(0, count - len(base))
    if remaining:
        idx = rng.integers(0, len(base), remaining)
        sc = np.asarray(scales)[rng.integers(0, len(scales), remaining)]
        Y = base[idx] + _unit(rng, remaining, d) * (sc * rng.random(remaining))[:, None]
        P, _ = geometry.project_intersection(instance.sets, Y)
        out.append(P)
    P = np.vstack(out)
    keep = np.linalg.norm(P - instance.z, axis=1) <= instance.b + 1e-12
    return P[keep][:max(count, 1)]


def sample_approx_points(instance: geometry.ProblemInstance, trace: IterationTrace, count: int,
                         rng=None, scales: Sequence[float] = (1e-1, 1e-2, 1e-3, 1e-4, 1e-6)) -> np.ndarray:
    """Points near the iterates and near ``C`` that are generally *not* in ``C``."""
    rng = as_rng(rng, "samples-approx")
    d = instance.dim
    pts_in_C = sample_points_in_C(instance, trace, max(count // 3, 1), rng)
    anchors = np.vstack([trace.points, pts_in_C])
    n = max(count - len(pts_in_C), 0)
    idx = rng.integers(0, len(anchors), n)
    sc = np.asarray(scales)[rng.integers(0, len(scales), n)]
    Y = anchors[idx] + _unit(rng, n, d) * (sc * rng.random(n))[:, None]
    return np.vstack([pts_in_C, Y])


def sample_near_fixed_points(desc: SchemeDescriptor, count: int, rng=None, center=None, radius: float = 1.0,
                             scales=(1e-6, 1e0)) -> np.ndarray:
    """Starting points at log-uniform distances from ``Fix T = ∩ operator sets``."""
    rng = as_rng(rng, "samples-near-fix")
    d = desc.dim
    c = np.zeros(d) if center is None else np.asarray(center, dtype=float)
    X = c + _unit(rng, count, d) * (radius * rng.random(count))[:, None]
    F, _ = geometry.project_intersection(desc.operator, X)
    lo, hi = np.log10(scales[0]), np.log10(scales[1])
    return F + _unit(rng, count, d) * (10.0 ** rng.uniform(lo, hi, count))[:, None]
