"""Reference computations written independently of the package code paths.

Each oracle uses the plainest available method: scalar loops for Dykstra,
a general-purpose constrained optimiser for projections, and closed forms
worked out by hand for the orthant and wedge instances.
"""

import math

import numpy as np
from scipy.optimize import minimize


def dykstra_loop(sets, x0, T):
    """Dykstra's cyclic projections with an explicit dict of corrections."""
    N = len(sets)
    x = [np.asarray(x0, dtype=float)]
    q = {}
    for n in range(1, T + 1):
        prev_q = q.get(n - N, np.zeros_like(x[0]))
        y = x[n - 1] + prev_q
        xn = sets[(n - 1) % N].project(y)
        x.append(xn)
        q[n] = y - xn
    return np.array(x), q


def a_value(x, q, n, N):
    total = 0.0
    for k in range(n - N + 1, n + 1):
        if k >= 1:
            total += float(np.dot(x[k] - x[n], q[k]))
    return total


def constraint_dicts(sets):
    """Inequality constraints ``c(y) >= 0`` / equalities for SLSQP."""
    cons = []
    for s in sets:
        kind = s.to_dict()["type"]
        if kind == "halfspace":
            cons.append({"type": "ineq", "fun": lambda y, s=s: s.beta - s.a @ y})
        elif kind == "hyperplane":
            cons.append({"type": "eq", "fun": lambda y, s=s: s.a @ y - s.beta})
        elif kind == "ball":
            cons.append({"type": "ineq", "fun": lambda y, s=s: s.radius ** 2 - np.sum((y - s.center) ** 2)})
        elif kind == "box":
            cons.append({"type": "ineq", "fun": lambda y, s=s: np.concatenate([y - s.lo, s.hi - y])})
        else:
            raise NotImplementedError(kind)
    return cons


def project_slsqp(sets, x, start=None):
    x = np.asarray(x, dtype=float)
    res = minimize(lambda y: 0.5 * np.sum((y - x) ** 2), x if start is None else start,
                   jac=lambda y: y - x, constraints=constraint_dicts(sets), method="SLSQP",
                   options={"ftol": 1e-14, "maxiter": 500})
    return res.x


def orthant_projection(x):
    return np.minimum(np.asarray(x, dtype=float), 0.0)


def orthant_mu(k):
    """On the negative orthant, dist <= sqrt(2) * f, so this mu is sound."""
    return math.ceil(math.sqrt(2) * (k + 1)) - 1


def gamma_formula(lo, hi, k):
    d = len(lo)
    out = 1
    for a, b in zip(lo, hi):
        out *= max(1, math.ceil((b - a) * (k + 1) * math.sqrt(d) - 1e-12))
    return out


def greedy_packing(lo, hi, sep, rng, candidates=4000):
    """Random greedy set of box points that are pairwise more than ``sep`` apart."""
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    C = lo + (hi - lo) * rng.random((candidates, len(lo)))
    # corners first: they are the hardest points to cover
    corners = np.array(np.meshgrid(*zip(lo, hi))).reshape(len(lo), -1).T
    C = np.vstack([corners, C])
    chosen = []
    for c in C:
        if all(np.linalg.norm(c - p) > sep for p in chosen):
            chosen.append(c)
    return np.array(chosen)
