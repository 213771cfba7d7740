"""
Deleting values and filling them back in
========================================

Values are removed completely at random, then the sample is either cut
down to its complete rows or imputed.
"""

import numpy as np

from bhep_mcar import IncompleteMatrix, Knn, Mean, Median, PerColumn, RngStream, ampute_mcar, complete_cases, impute

gen = RngStream(7).generator()
x = gen.standard_normal((12, 2))

# each entry is observed with probability 0.8
data = ampute_mcar(x, PerColumn((0.8, 0.8)), gen)
print("observed per column:", data.observed_counts())

cc = complete_cases(data)
print(f"complete rows: {cc.n_hat} of {data.n}")

# imputation changes only the missing entries
for method in (Mean(), Median(), Knn(3)):
    filled = impute(data, method)
    changed = ~np.isclose(filled, x)
    print(f"{method.label:7s} changed {changed.sum()} entries, all of them missing: {bool(np.all(~data.mask[changed]))}")

# missing cells may hold anything; the mask decides
poisoned = IncompleteMatrix(np.where(data.mask, x, 1e9), data.mask)
print("same fill with junk in missing cells:", np.array_equal(impute(poisoned, Mean()), impute(data, Mean())))
