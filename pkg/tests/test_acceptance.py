"""Acceptance criteria, one test each; every test prints a PASS/FAIL line.

The lines are also collected into the pytest terminal summary. Run this file
directly (``python3 tests/test_acceptance.py``) to see them in isolation.
"""

import json
import sys

import numpy as np
import pytest

from fejerlab import geometry, harness, iterations, moduli, rates
from fejerlab.geometry import Ball
from fejerlab.iterations import ParamSequence, SchemeDescriptor
from fejerlab.rates import Counterfunction, RateInputs

import oracles
from conftest import ACCEPTANCE_LINES, orthant2_instance

SEED = 20240101


def report(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    return ok


@pytest.fixture(scope="module")
def orthant():
    inst = orthant2_instance()
    return inst, iterations.run_dykstra(inst, 200)


def test_criterion_1_dykstra_correctness(orthant):
    inst, tr = orthant
    err = float(np.linalg.norm(tr.points[-1] - oracles.orthant_projection(inst.x0)))
    tele = tr.telescoping_error() / (1 + np.arange(tr.T + 1))
    ok = err < 1e-6 and tele.max() <= 1e-8
    assert report(1, ok, f"||x_200 - P_C(x0)|| = {err:.2e}, max telescoping error/(1+n) = {tele.max():.2e}")


def test_criterion_2_non_fejer_witness():
    rep = harness.run_experiment(harness.bundled_config_path("nonfejer"))
    check = rep.checks["non-fejer-witness"]
    w = check["witness"] or {}
    ok = check["status"] == "certified"
    if ok:
        # re-verify with the scalar Dykstra oracle
        inst = geometry.ProblemInstance.from_dict(rep.config["instance"])
        xs, _ = oracles.dykstra_loop(inst.sets, inst.x0, w["n"] + 1)
        p = np.array(w["p"])
        ok = (geometry.residual_f(inst, p) <= geometry.FEAS_TOL
              and np.linalg.norm(xs[w["n"] + 1] - p) > np.linalg.norm(xs[w["n"]] - p) + 1e-9)
    assert report(2, ok, f"n = {w.get('n')}, p = {w.get('p')}, increase = {w.get('increase', 0):.3f}")


def test_criterion_3_uniform_definition(orthant):
    inst, tr = orthant
    P = iterations.sample_points_in_C(inst, tr, 64, SEED)
    v = iterations.check_fejer_uniform(tr, moduli.gh_square(), iterations.dykstra_property(tr),
                                       moduli.dykstra_rho_uniform(inst.b), P, 10)
    ok = v.passed and len(P) >= 50
    assert report(3, ok, f"{len(P)} points of C, r <= 10, {v.exercised} premise instances, witness {v.witness}")


def test_criterion_4_approximate_point_definition(orthant):
    inst, tr = orthant
    rho, chi = moduli.dykstra_rho_chi_approx(inst.b)
    P = iterations.sample_approx_points(inst, tr, 64, SEED)
    P = P[np.linalg.norm(P - inst.z, axis=1) <= inst.b]
    outside = int((geometry.residual_f(inst, P) > geometry.FEAS_TOL).sum())
    v = iterations.check_fejer_uniform_approx(tr, moduli.gh_square(), iterations.dykstra_property(tr), rho, chi,
                                              P, 8, 8, inst)
    ok = v.passed and len(P) >= 50 and outside > 0
    assert report(4, ok, f"{len(P)} points ({outside} outside C), r, m <= 8, {v.exercised} premise instances")


def test_criterion_5_cauchy_rate(orthant):
    inst, tr = orthant
    ghp = moduli.gh_square()
    A = iterations.dykstra_property(tr)
    mu = moduli.discover_regularity(inst, inst.b, 0.01, 10, tail="linear")
    inputs = RateInputs(phi=iterations.empirical_phi(tr, A, 10), rho=moduli.dykstra_rho_uniform(inst.b),
                        alpha_g=ghp.alpha_g, beta_h=ghp.beta_h, mu=mu)
    good = rates.certify_cauchy(tr, [0, 0], inputs, 10, inst, ghp=ghp, A=A, rng=SEED)
    inputs.mu = moduli.constant(0, "zero")
    bad = rates.certify_cauchy(tr, [0, 0], inputs, 10, inst, ghp=ghp, A=A, rng=SEED)
    ok = good.verdict == "certified" and bad.verdict == "violated" and bad.witness is not None
    assert report(5, ok, f"discovered mu -> {good.verdict} (Psi(21) = {good.bound}); "
                         f"mu = 0 -> {bad.verdict} ({(bad.witness or {}).get('statement')})")


def test_criterion_6_metastability(orthant):
    inst, tr = orthant
    ghp = moduli.gh_square()
    A = iterations.dykstra_property(tr)
    rho, chi = moduli.dykstra_rho_chi_approx(inst.b)
    inputs = RateInputs(phi=iterations.empirical_phi(tr, A, 10), rho=rho, alpha_g=ghp.alpha_g,
                        beta_h=ghp.beta_h, chi=chi, gamma=moduli.box_total_boundedness(inst.z - inst.b, inst.z + inst.b))
    failures, bounds = [], []
    for g in ("n", "2n", "n+10"):
        for k in range(6):
            cert = rates.certify_metastability(tr, k, Counterfunction.parse(g), inputs)
            bounds.append(cert.bound)
            ok = (cert.verdict == "certified" and cert.witness["N"] <= cert.bound
                  and cert.details["candidate_witness"] is not None)
            if ok:
                N, end = cert.witness["interval"]
                seg = tr.points[N:end + 1]
                ok = max(np.linalg.norm(a - b) for a in seg for b in seg) <= 1 / (k + 1)
            if not ok:
                failures.append((g, k, cert.verdict))
    assert report(6, not failures, f"18 (g, k) pairs, bounds in [{min(bounds)}, {max(bounds)}], failures {failures}")


@pytest.mark.parametrize("kind", ["km", "ishikawa"])
def test_criterion_7_reversal(kind):
    ball = Ball([0.0, 0.0], 1.0)
    desc = SchemeDescriptor(kind, (ball,), ParamSequence("constant", 0.5), ParamSequence("constant", 0.5))
    rng = np.random.default_rng(SEED)
    u = rng.normal(size=(300, 2))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    starts = u * np.where(np.arange(300) % 2 == 0, 3.0, 3.0 * rng.random(300))[:, None]
    psi = rates.measure_common_rate(desc, starts, 21, 400)
    mu = rates.reversal_regularity(moduli.coincidence_tau(kind), psi)
    inst = geometry.ProblemInstance((ball,), [0, 0], [0, 0], 3)
    res = moduli.falsify_regularity(inst, mu, 3.0, 100_000, k_max=10, rng=SEED)
    assert report(7, res.passed, f"{kind}: tau = {moduli.coincidence_tau(kind).name}, "
                                        f"mu(0..3) = {[mu(k) for k in range(4)]}, 1e5 samples, witness {res.witness}")


def test_criterion_8_coincidence():
    sets = (Ball([0.0, 0.0], 1.0), geometry.HalfSpace([1.0, 1.0], 0.2))
    outcome = {}
    for kind in ("picard", "km", "halpern", "ishikawa"):
        desc = SchemeDescriptor(kind, sets, ParamSequence("constant", 0.5), ParamSequence("constant", 0.5))
        X0 = iterations.sample_near_fixed_points(desc, 1000, np.random.default_rng(SEED), radius=2.0)
        v = iterations.check_coincidence(desc, moduli.coincidence_tau(kind), X0, 20, 20)
        outcome[kind] = (v.passed, v.exercised)
    ok = all(p for p, _ in outcome.values())
    assert report(8, ok, "; ".join(f"{k}: {'ok' if p else 'violated'} ({e} premises)" for k, (p, e) in outcome.items()))


def test_criterion_9_moduli_algebra():
    parts = {}
    rho_a, chi = moduli.dykstra_rho_chi_approx(2)
    mods = [moduli.gh_square().alpha_g, moduli.gh_square().beta_h, moduli.dykstra_rho_uniform(2), rho_a,
            moduli.box_total_boundedness([-2, -2], [2, 2]), moduli.gh_identity().alpha_g]
    parts["monotone"] = all(m.is_monotone(10_000) for m in mods)

    log_grid = np.logspace(-9, 0, 4000)
    bad = moduli.gh_square().check_soundness(10_000, log_grid)
    parts["gh_square sound"] = bad is None

    rng = np.random.default_rng(SEED)
    anti = True
    for _ in range(200):
        table = rng.random((6, 15)) < 0.7
        At = moduli.monotonize_A(lambda n, k, t=table: bool(t[n, k]))
        anti &= all(At(n, k) >= At(n, k + 1) for n in range(6) for k in range(14))
    parts["monotonize antitone"] = anti

    box = ([0.0, 0.0], [1.0, 1.0])
    gamma = moduli.box_total_boundedness(*box)
    packing_ok = True
    for k in range(21):
        for _ in range(10 if k > 5 else 40):
            if len(oracles.greedy_packing(*box, 1.0 / (k + 1), rng, candidates=800)) > gamma(k):
                packing_ok = False
    parts["pigeonhole"] = packing_ok
    detail = ", ".join(f"{k}: {'ok' if v else 'FAILS'}" for k, v in parts.items())
    if bad is not None:
        detail += f" (H(a) = a^2 <= 1/(beta_H({bad[0]}) + 1) at a = {bad[1]:.4f} > 1/{bad[0] + 1})"
    assert report(9, all(parts.values()), detail)


def test_criterion_10_determinism():
    mismatched = []
    for name in harness.bundled_configs():
        raw = json.loads(harness.bundled_config_path(name).read_text())
        a = harness.run_experiment(raw).to_json()
        b = harness.run_experiment(raw).to_json()
        if a != b:
            mismatched.append(name)
    assert report(10, not mismatched, f"{len(harness.bundled_configs())} bundled configs, mismatches {mismatched}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s", "-p", "no:cacheprovider"]))
