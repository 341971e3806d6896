"""How regularity degrades as two half-planes close in on each other.

The wedge between {x2 <= 0} and a half-plane at angle theta gets thinner as theta
shrinks, and the residual max_i dist(C_i, x) says less about dist(C, x). The
discovered modulus mu should grow roughly like 1 / sin(theta / 2), the
constant of the error bound for a wedge of opening theta.

    python3 demos/wedge_regularity.py
"""

import math

from fejerlab import harness

for name, theta in (("wedge_pi2", math.pi / 2), ("wedge_pi8", math.pi / 8), ("wedge_pi32", math.pi / 32)):
    report = harness.run_experiment(harness.bundled_config_path(name))
    mu = report.checks["regularity-discovery"]["mu"]["values"]
    falsify = report.checks["regularity-falsify"]
    ratio = (mu[-1] + 1) / len(mu)
    print(f"{name:11s} 1/sin(theta/2)={1 / math.sin(theta / 2):6.2f}  (mu(k)+1)/(k+1) at top={ratio:5.2f}  "
          f"mu={mu}  falsification {falsify['status']} over {falsify['samples']} samples")
