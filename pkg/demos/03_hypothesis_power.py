"""Profile chi-square tests: size at the null and power at shifted nulls.

For each hypothesized value the profile statistic re-minimizes the
quadratic objective with that coordinate pinned and refers the scaled
objective gap to chi-square(1). Auxiliary information sharpens the
objective around the truth, which shows up directly as test power.
"""

import time

import qifaux as qa
from qifaux.simulation import Hypothesis

design = qa.SimulationDesign(
    n=300, rho_x=0.5, rho_y=0.5, seed=777, replications=200
)

hypotheses = [
    Hypothesis("beta1 = 0.50 (true)", (0,), (0.50,)),
    Hypothesis("beta1 = 0.55", (0,), (0.55,)),
    Hypothesis("beta1 = 0.60", (0,), (0.60,)),
    Hypothesis("beta2 = -0.50 (true)", (1,), (-0.50,)),
    Hypothesis("beta2 = -0.55", (1,), (-0.55,)),
    Hypothesis("beta2 = -0.60", (1,), (-0.60,)),
]

t0 = time.time()
summaries = qa.run_monte_carlo(
    design, ["qif", "gmmai2", "gmmai4"], hypotheses=hypotheses
)
print(f"{design.replications} replications in {time.time() - t0:.1f}s\n")

header = f"{'hypothesis':<24}" + "".join(f"{m:>10}" for m in summaries)
print(header)
print("-" * len(header))
for hyp in hypotheses:
    row = f"{hyp.label:<24}"
    for summary in summaries.values():
        row += f"{summary.power[hyp.label]:>10.3f}"
    print(row)

print("\nrejection rates at the true values estimate the test size (0.05);")
print("rates at shifted values estimate power, largest for the four-group fit.")
