"""Rates of convergence and metastability, and their certification on traces.

All rate arithmetic is done in Python integers, so the compositions never
wrap around. The metastability recursion is guarded by a ceiling (default
``10**18``): exceeding it yields a ``bound-overflow`` verdict.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.spatial.distance import pdist

from . import geometry, iterations
from .iterations import SLACK, HorizonError, IterationTrace
from .moduli import (FalsifyResult, GHPair, Modulus, Modulus2, Modulus3, ModulusError, TableModulus,
                     falsify_regularity)
from ._random import as_rng

DEFAULT_CEILING = 10 ** 18


class BoundOverflow(ArithmeticError):
    def __init__(self, message: str, depth: int = 0, required_horizon: int | None = None):
        super().__init__(message)
        self.depth = depth
        self.required_horizon = required_horizon


# ---------------------------------------------------------------------------
# Counterfunctions


@dataclass(frozen=True)
class Counterfunction:
    """Closed-form or tabulated ``g : N -> N`` for metastability."""

    fn: Callable[[int], int]
    description: str
    monotone: bool = True

    def __call__(self, n: int) -> int:
        return int(self.fn(int(n)))

    @classmethod
    def constant(cls, c: int):
        return cls(lambda n: c, str(c))

    @classmethod
    def shift(cls, c: int):
        return cls(lambda n: n + c, f"n+{c}")

    @classmethod
    def scale(cls, c: int):
        return cls(lambda n: c * n, "n" if c == 1 else f"{c}n")

    @classmethod
    def table(cls, values: Sequence[int]):
        vals = [int(v) for v in values]
        if any(v < 0 for v in vals):
            raise ValueError("counterfunction values must be natural numbers")

        def fn(n):
            if n >= len(vals):
                raise ModulusError(f"counterfunction table covers n <= {len(vals) - 1}, queried at {n}")
            return vals[n]

        return cls(fn, f"table{vals}", all(a <= b for a, b in zip(vals, vals[1:])))

    @classmethod
    def parse(cls, text) -> "Counterfunction":
        """Accept ``"5"``, ``"n"``, ``"3n"``, ``"n+10"``, ``"2n+1"`` or a list."""
        if isinstance(text, list):
            return cls.table(text)
        s = str(text).replace(" ", "")
        m = re.fullmatch(r"(\d*)n(?:\+(\d+))?|(\d+)", s)
        if not m:
            raise ValueError(f"cannot parse counterfunction {text!r}")
        if m.group(3) is not None:
            return cls.constant(int(m.group(3)))
        a = int(m.group(1)) if m.group(1) else 1
        c = int(m.group(2)) if m.group(2) else 0
        return cls(lambda n: a * n + c, s, True)


# ---------------------------------------------------------------------------
# Certificates


@dataclass
class RateCertificate:
    kind: str
    k: int
    bound: int | None
    inputs: dict
    verdict: str
    witness: dict | None = None
    details: dict = field(default_factory=dict)

    @property
    def certified(self) -> bool:
        return self.verdict == "certified"

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "k": self.k,
            "bound": None if self.bound is None else str(self.bound),
            "inputs": self.inputs,
            "verdict": self.verdict,
            "witness": self.witness,
            "details": self.details,
        }


@dataclass
class RateInputs:
    """The moduli a rate is composed of; unused fields may stay ``None``."""

    phi: Modulus
    rho: Modulus
    alpha_g: Modulus
    beta_h: Modulus
    mu: Modulus | None = None
    chi: Modulus3 | None = None
    gamma: Modulus | None = None

    def names(self) -> dict:
        return {k: v.name for k, v in vars(self).items() if v is not None}


# ---------------------------------------------------------------------------
# Cauchy rate


def psi_cauchy(phi: Modulus, rho: Modulus, mu: Modulus, alpha_g: Modulus, beta_h: Modulus, k: int) -> int:
    """``Phi(max{rho(j), mu(max{alpha_g(j), rho(j)})})`` with ``j = 2*beta_h(k) + 1``."""
    j = 2 * beta_h(k) + 1
    return phi(max(rho(j), mu(max(alpha_g(j), rho(j)))))


def regularity_arguments(inputs: RateInputs, k: int) -> int:
    """Argument at which the rate consults ``mu``."""
    j = 2 * inputs.beta_h(k) + 1
    return max(inputs.alpha_g(j), inputs.rho(j))


def _diameter(X: np.ndarray) -> float:
    if len(X) < 2:
        return 0.0
    return float(pdist(X).max())


def _tail_diameters(points: np.ndarray, max_exact: int = 2500) -> np.ndarray:
    """``diam{x_m : m >= N}`` for every ``N`` (exact up to ``max_exact`` points)."""
    T = len(points) - 1
    if T + 1 > max_exact:
        raise ValueError(f"trace of length {T + 1} exceeds max_exact={max_exact}")
    from scipy.spatial.distance import squareform
    D = squareform(pdist(points)) if T else np.zeros((1, 1))
    # diam of tail N = max over i, j >= N of D[i, j]
    out = np.zeros(T + 1)
    running = 0.0
    for N in range(T, -1, -1):
        running = max(running, float(D[N, N:].max()))
        out[N] = running
    return out


def _first_good(tail_diam: np.ndarray, eps: float) -> int | None:
    ok = np.flatnonzero(tail_diam <= eps + SLACK)
    return int(ok[0]) if ok.size else None


def certify_cauchy(trace: IterationTrace, limit_oracle, inputs: RateInputs, k_max: int,
                   instance: geometry.ProblemInstance | None = None, ghp: GHPair | None = None, A=None,
                   audit: bool = True, audit_samples: int = 20_000, rng=None) -> RateCertificate:
    """Check the Cauchy rate ``Psi(2k+1)`` and its companion statements for ``k <= k_max``.

    For every ``k`` three statements are checked on the trace:

    * ``cauchy``: ``||x_m - x_m'|| <= 1/(k+1)`` for ``m, m' >= Psi(2k+1)``;
    * ``distance``: ``dist(x_n, C) <= 1/(k+1)`` for ``n >= Psi(k)``, with the
      distance from the exact intersection oracle when an instance is given,
      otherwise bounded through ``limit_oracle``;
    * ``convergence``: ``||x_m - limit|| <= 1/(k+1)`` for ``m >= Psi(2k+1)``.

    With ``audit`` on, the hypotheses the rate rests on are tested where the
    rate consults them: ``mu`` by :func:`falsify_regularity` at its queried
    arguments, ``rho`` by the uniform Fejér check at its queried precisions,
    and ``Phi`` by re-reading the trace.
    """
    instance = instance or trace.instance
    limit = None if limit_oracle is None else geometry.as_vector(limit_oracle, trace.points.shape[1])
    T = trace.T
    names = inputs.names()
    rows = []
    witness = None
    overflow = None

    tails = _tail_diameters(trace.points)
    if instance is not None:
        dist_C = geometry.dist_intersection(instance.sets, trace.points)
        dist_path = "projection"
    else:
        dist_C = np.linalg.norm(trace.points - limit, axis=1)
        dist_path = "limit-oracle"
    to_limit = None if limit is None else np.linalg.norm(trace.points - limit, axis=1)

    for k in range(k_max + 1):
        eps = 1.0 / (k + 1)
        try:
            psi_k = psi_cauchy(inputs.phi, inputs.rho, inputs.mu, inputs.alpha_g, inputs.beta_h, k)
            psi_2k = psi_cauchy(inputs.phi, inputs.rho, inputs.mu, inputs.alpha_g, inputs.beta_h, 2 * k + 1)
        except HorizonError as e:
            overflow = {"k": k, "reason": str(e)}
            break
        row = {"k": k, "psi_k": psi_k, "psi_2k_plus_1": psi_2k, "first_good": _first_good(tails, eps)}
        rows.append(row)
        if psi_2k > T or psi_k > T:
            overflow = {"k": k, "required_horizon": max(psi_k, psi_2k)}
            break
        if tails[psi_2k] > eps + SLACK and witness is None:
            sub = trace.points[psi_2k:]
            D = pdist(sub)
            from scipy.spatial.distance import squareform
            i, j = np.unravel_index(np.argmax(squareform(D)), (len(sub), len(sub)))
            witness = {"statement": "cauchy", "k": k, "m": psi_2k + int(i), "m_tilde": psi_2k + int(j),
                       "distance": float(tails[psi_2k]), "bound": psi_2k}
        bad = np.flatnonzero(dist_C[psi_k:] > eps + SLACK)
        if bad.size and witness is None:
            n = psi_k + int(bad[0])
            witness = {"statement": "distance", "k": k, "n": n, "dist": float(dist_C[n]), "bound": psi_k,
                       "path": dist_path}
        if to_limit is not None:
            bad = np.flatnonzero(to_limit[psi_2k:] > eps + SLACK)
            if bad.size and witness is None:
                n = psi_2k + int(bad[0])
                witness = {"statement": "convergence", "k": k, "n": n, "to_limit": float(to_limit[n]),
                           "bound": psi_2k}

    audits = {}
    if audit and overflow is None and instance is not None:
        audits = _audit_cauchy(trace, instance, inputs, k_max, ghp, A, audit_samples, rng)
        if witness is None:
            for name, res in audits.items():
                if not res["passed"]:
                    witness = {"statement": f"hypothesis:{name}", **res["witness"]}
                    break

    if overflow is not None:
        verdict = "bound-overflow"
    else:
        verdict = "certified" if witness is None else "violated"
    bound = rows[-1]["psi_2k_plus_1"] if rows else None
    details = {"rows": rows, "dist_path": dist_path, "audits": audits, "horizon": T}
    if overflow is not None:
        details["overflow"] = overflow
    return RateCertificate("cauchy", k_max, bound, names, verdict, witness, details)


def _audit_cauchy(trace, instance, inputs: RateInputs, k_max, ghp, A, samples, rng) -> dict:
    rng = as_rng(rng, "audit-cauchy")
    ks = sorted({k for k0 in range(k_max + 1) for k in (k0, 2 * k0 + 1)})
    out = {}

    mu_args = sorted({regularity_arguments(inputs, k) for k in ks})
    res: FalsifyResult = falsify_regularity(instance, inputs.mu, instance.b, samples, ks=mu_args,
                                            center=instance.z, rng=rng)
    out["mu"] = {"passed": res.passed, "witness": res.witness, "arguments": mu_args}

    if ghp is not None and A is not None:
        rs = sorted({2 * inputs.beta_h(k) + 1 for k in ks})
        P = iterations.sample_points_in_C(instance, trace, 64, rng)
        v = iterations.check_fejer_uniform(trace, ghp, A, inputs.rho, P, 0, rs=rs)
        out["rho"] = {"passed": v.passed, "witness": v.witness, "exercised": v.exercised, "precisions": rs}

        phi_args = sorted({max(inputs.rho(j), inputs.mu(max(inputs.alpha_g(j), inputs.rho(j))))
                           for j in (2 * inputs.beta_h(k) + 1 for k in ks)})
        bad = None
        for j in phi_args:
            n_max = inputs.phi(j)
            ok = any(trace.residuals[n] < 1.0 / (j + 1) and A(n, j) for n in range(min(n_max, trace.T) + 1))
            if not ok:
                bad = {"argument": j, "phi": n_max}
                break
        out["phi"] = {"passed": bad is None, "witness": bad, "arguments": [str(j) for j in phi_args]}
    return out


# ---------------------------------------------------------------------------
# Metastability


@dataclass
class MetastabilityBound:
    bound: int
    P: int
    index: int  # 2*beta_h(2k+1) + 1
    candidates: list
    stabilized_at: int | None

    def to_dict(self) -> dict:
        return {"bound": str(self.bound), "P": str(self.P), "index": self.index,
                "candidates": [int(c) for c in self.candidates], "stabilized_at": self.stabilized_at}


def _chi_running_max(chi: Modulus3, g: Counterfunction, r: int, max_steps: int):
    cache: list[int] = []

    def chi_M(n):
        if chi.monotone and g.monotone:
            return chi(n, g(n), r)
        if n > max_steps:
            raise BoundOverflow(f"running max of chi_g needs {n} evaluations (> {max_steps})")
        while len(cache) <= n:
            i = len(cache)
            v = chi(i, g(i), r)
            cache.append(v if not cache else max(cache[-1], v))
        return cache[n]

    return chi_M


def psi_metastable_trace(k: int, g: Counterfunction, phi: Modulus, rho: Modulus, alpha_g: Modulus,
                         beta_h: Modulus, gamma: Modulus, chi: Modulus3, ceiling: int = DEFAULT_CEILING,
                         max_steps: int = 1_000_000) -> MetastabilityBound:
    """Evaluate the metastability recursion and keep its intermediate values.

    With ``j = 2*beta_h(2k+1) + 1`` and ``P = gamma(max{alpha_g(j), rho(j)})``:
    ``Psi0(0) = Phi(rho(j))``, ``Psi0(n+1) = Phi(max{chi^M_g(Psi0(n), j), rho(j)})``,
    result ``Psi0(P-1)``. Because ``Psi0(n+1)`` depends on ``Psi0(n)`` only,
    the recursion is constant once two consecutive values agree; the
    evaluation stops there and records the step in ``stabilized_at``.
    """
    j = 2 * beta_h(2 * k + 1) + 1
    rho_j = rho(j)
    P = gamma(max(alpha_g(j), rho_j))
    if P < 1:
        raise ModulusError("gamma must be positive for the recursion to be defined")
    chi_M = _chi_running_max(chi, g, j, max_steps)
    value = phi(rho_j)
    candidates = [value]
    stabilized = None
    for n in range(P - 1):
        if value > ceiling:
            raise BoundOverflow(f"Psi0({n}) = {value} exceeds ceiling {ceiling}", depth=n)
        if n >= max_steps:
            raise BoundOverflow(f"recursion did not stabilise within {max_steps} steps", depth=n)
        nxt = phi(max(chi_M(value), rho_j))
        if nxt == value:
            stabilized = n + 1
            break
        value = nxt
        candidates.append(value)
    if value > ceiling:
        raise BoundOverflow(f"bound {value} exceeds ceiling {ceiling}", depth=len(candidates))
    return MetastabilityBound(value, P, j, candidates, stabilized)


def psi_metastable(k: int, g: Counterfunction, phi: Modulus, rho: Modulus, alpha_g: Modulus,
                   beta_h: Modulus, gamma: Modulus, chi: Modulus3, ceiling: int = DEFAULT_CEILING) -> int:
    """Rate of metastability ``Psi0(P-1)``; see :func:`psi_metastable_trace`."""
    return psi_metastable_trace(k, g, phi, rho, alpha_g, beta_h, gamma, chi, ceiling).bound


def certify_metastability(trace: IterationTrace, k: int, g: Counterfunction, inputs: RateInputs,
                          ceiling: int = DEFAULT_CEILING) -> RateCertificate:
    """Find ``N <= bound`` with ``d(x_i, x_j) <= 1/(k+1)`` on ``[N, N + g(N)]``.

    The reported witness is the least such ``N``. Separately, the recursion's
    own candidates ``n_0, n_1, ...`` are tried, and the first stable one is
    recorded as ``candidate_witness``.
    """
    names = inputs.names()
    names["g"] = g.description
    try:
        meta = psi_metastable_trace(k, g, inputs.phi, inputs.rho, inputs.alpha_g, inputs.beta_h,
                                    inputs.gamma, inputs.chi, ceiling)
    except HorizonError as e:
        return RateCertificate("metastability", k, None, names, "bound-overflow", None,
                               {"reason": str(e), "horizon": trace.T})
    except BoundOverflow as e:
        return RateCertificate("metastability", k, None, names, "bound-overflow", None,
                               {"reason": str(e), "depth": e.depth, "horizon": trace.T})
    eps = 1.0 / (k + 1)
    T = trace.T
    need = None

    def stable(N):
        nonlocal need
        end = N + g(N)
        if end > T:
            need = end if need is None else min(need, end)
            return None
        return _diameter(trace.points[N:end + 1]) <= eps + SLACK

    candidate_witness = next((c for c in dict.fromkeys(meta.candidates) if stable(c)), None)
    witness_N = None
    for N in range(min(meta.bound, T) + 1):
        if stable(N):
            witness_N = N
            break
    details = {"recursion": meta.to_dict(), "candidate_witness": candidate_witness, "horizon": T}
    if witness_N is not None:
        return RateCertificate("metastability", k, meta.bound, names, "certified",
                               {"N": witness_N, "interval": [witness_N, witness_N + g(witness_N)]}, details)
    if need is not None:
        details["required_horizon"] = need
        return RateCertificate("metastability", k, meta.bound, names, "bound-overflow", None, details)
    return RateCertificate("metastability", k, meta.bound, names, "violated",
                           {"checked_N": [0, min(meta.bound, T)]}, details)


# ---------------------------------------------------------------------------
# Reversal: a common rate of convergence yields a modulus of regularity


def reversal_regularity(tau: Modulus2, psi: Modulus) -> Modulus:
    """``mu(k) = tau(2k+1, Psi(2k+1))``."""
    return Modulus(lambda k: tau(2 * k + 1, psi(2 * k + 1)), f"reversal({tau.name}, {psi.name})")


def scheme_limit(desc: iterations.SchemeDescriptor, x0, tol: float = 1e-14, max_iter: int = 100_000):
    """Limit of a fixed-point scheme, by running it until the steps fall below ``tol``."""
    x = geometry.as_vector(x0, desc.dim)
    u = x if desc.anchor is None else desc.anchor
    for n in range(max_iter):
        nxt = desc.step(n, x, u)
        if np.linalg.norm(nxt - x) <= tol:
            return nxt
        x = nxt
    raise HorizonError(0, f"scheme did not settle within {max_iter} steps")


def measure_common_rate(desc: iterations.SchemeDescriptor, starts, k_max: int, horizon: int) -> TableModulus:
    """Empirical common rate of convergence over a set of starting points.

    For each start, the least ``N`` with ``||x_n - limit|| <= 1/(k+1)`` for
    all ``N <= n <= horizon``; the table takes the maximum over starts.
    """
    starts = np.atleast_2d(np.asarray(starts, dtype=float))
    table = np.zeros(k_max + 1, dtype=int)
    eps = 1.0 / (np.arange(k_max + 1) + 1)
    for x0 in starts:
        tr = iterations.run_scheme(desc, x0, horizon)
        err = np.linalg.norm(tr.points - scheme_limit(desc, x0), axis=1)
        tail_max = np.maximum.accumulate(err[::-1])[::-1]
        for k in range(k_max + 1):
            ok = np.flatnonzero(tail_max <= eps[k])
            if not ok.size or tail_max[-1] > eps[k]:
                raise HorizonError(k, f"horizon {horizon} too short for precision {k}")
            table[k] = max(table[k], ok[0])
    return TableModulus(table.tolist(), "psi-measured", info={"starts": len(starts), "horizon": horizon})
