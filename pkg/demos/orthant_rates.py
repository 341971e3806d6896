"""Dykstra on the orthant pair, from trace to certified rates.

Two half-planes {x1 <= 0} and {x2 <= 0} meet in the closed negative orthant.
Starting at (1, 1), Dykstra's recursion lands on the corner after one cycle, so
every rate bound can be compared with what the trace actually does.

    python3 demos/orthant_rates.py
"""

import numpy as np

from fejerlab import iterations, moduli, rates
from fejerlab.geometry import HalfSpace, ProblemInstance
from fejerlab.rates import Counterfunction, RateInputs

inst = ProblemInstance((HalfSpace([1, 0], 0), HalfSpace([0, 1], 0)), x0=[1.0, 1.0], z=[0.0, 0.0], b=2.0)
trace = iterations.run_dykstra(inst, 200)
print("first iterates:", trace.points[:4].tolist())
print("telescoping error, worst:", trace.telescoping_error().max())

# regularity of the residual around the solution, read off a grid
mu = moduli.discover_regularity(inst, inst.b, 0.01, 10, tail="linear")
print("discovered mu(0..10):", mu.values, "tail", mu.tail_name)

ghp = moduli.gh_square()
A = iterations.dykstra_property(trace)
phi = iterations.empirical_phi(trace, A, 10)
inputs = RateInputs(phi=phi, rho=moduli.dykstra_rho_uniform(inst.b), alpha_g=ghp.alpha_g,
                    beta_h=ghp.beta_h, mu=mu)
cert = rates.certify_cauchy(trace, [0.0, 0.0], inputs, 10, inst, ghp=ghp, A=A, rng=0)
print(f"\nCauchy rate: {cert.verdict}")
for row in cert.details["rows"][:5]:
    print(f"  k={row['k']:2d}  Psi(k)={row['psi_k']}  Psi(2k+1)={row['psi_2k_plus_1']}  observed={row['first_good']}")

# an obviously wrong regularity modulus is caught by the audit, not silently accepted
inputs.mu = moduli.constant(0, "zero")
bad = rates.certify_cauchy(trace, [0.0, 0.0], inputs, 10, inst, ghp=ghp, A=A, rng=0)
print(f"with mu = 0: {bad.verdict}, witness {bad.witness}")

# metastability needs no regularity at all, only total boundedness of the ball
rho, chi = moduli.dykstra_rho_chi_approx(inst.b)
inputs = RateInputs(phi=phi, rho=rho, alpha_g=ghp.alpha_g, beta_h=ghp.beta_h, chi=chi,
                    gamma=moduli.box_total_boundedness(inst.z - inst.b, inst.z + inst.b))
print("\nmetastability bounds (k = 3):")
for g in ("n", "2n", "n+10"):
    m = rates.certify_metastability(trace, 3, Counterfunction.parse(g), inputs)
    print(f"  g={g:5s} bound={m.bound}  least witness N={m.witness['N']}  {m.verdict}")

print("\nfinal point:", np.round(trace.points[-1], 12))
