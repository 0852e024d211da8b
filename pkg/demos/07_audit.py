"""Run the randomized inequality audit and print the slack table.

Each check draws seeded random domains and measures the worst margin of
one structural inequality (monotonicity, duality, projection, spectral
stability, ...). Nonnegative slack means the bound held on every draw.
"""

from fracshape import bounds_audit

for result in bounds_audit(seed=0):
    status = "pass" if result.passed else "FAIL"
    print(f"{result.name:26s} {status}  slack {result.worst_slack:+.3e}  "
          f"{result.detail}")
