"""
The statistic and its quadrature check
======================================

The closed form is compared with a direct numerical integral of the
weighted distance between the empirical and the normal characteristic
function.
"""

import numpy as np

from bhep_mcar import bhep_oracle, bhep_statistic, kernel_h

rng = np.random.default_rng(1)

# a normal sample and a skewed one of the same size
normal = rng.standard_normal((50, 2))
skewed = rng.exponential(size=(50, 2))

for name, x in [("normal", normal), ("exponential", skewed)]:
    closed = bhep_statistic(x).statistic
    integral = bhep_oracle(x, quad_order=40)
    print(f"{name:12s} closed form {closed:.6f}  quadrature {integral:.6f}  diff {abs(closed - integral):.1e}")

# the statistic only sees standardized data, so any affine map leaves it alone
a = np.array([[2.0, 0.3], [-1.0, 0.5]])
moved = normal @ a.T + [10.0, -4.0]
print("after an affine map:", bhep_statistic(moved).statistic)

# the kernel at the center of a standard normal
print("h(0, 0; 0, I2) =", float(kernel_h(np.zeros(2), np.zeros(2), np.zeros(2), np.eye(2))))
