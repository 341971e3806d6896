"""Reading a regularity modulus back off a measured convergence rate.

Krasnoselskii-Mann with step 1/2 over the unit-ball projection converges at a
rate common to all starts in a ball. Composing that rate with the coincidence
modulus tau yields a candidate regularity modulus, which is then attacked by
random sampling.

    python3 demos/km_reversal.py
"""

import numpy as np

from fejerlab import moduli, rates
from fejerlab.geometry import Ball, ProblemInstance
from fejerlab.iterations import ParamSequence, SchemeDescriptor

ball = Ball([0.0, 0.0], 1.0)
half = ParamSequence("constant", 0.5)
rng = np.random.default_rng(7)
u = rng.normal(size=(200, 2))
starts = 3.0 * u / np.linalg.norm(u, axis=1, keepdims=True)

for kind in ("km", "ishikawa"):
    desc = SchemeDescriptor(kind, (ball,), half, half)
    psi = rates.measure_common_rate(desc, starts, 21, 400)
    tau = moduli.coincidence_tau(kind)
    mu = rates.reversal_regularity(tau, psi)
    res = moduli.falsify_regularity(ProblemInstance((ball,), [0, 0], [0, 0], 3), mu, 3.0, 20_000, k_max=10, rng=1)
    print(f"{kind:9s} Psi(0..6)={[psi(k) for k in range(7)]}  {tau.name}")
    print(f"{'':9s} mu(0..6)={[mu(k) for k in range(7)]}  survives 20000 samples: {res.passed}")
