"""
A small power study
===================

A grid is a product of distributions, sample sizes, missingness levels
and approaches.  Every approach sees the same simulated samples, and the
results do not depend on how many worker processes run them.
"""

import tempfile

from bhep_mcar import emit_figure_data, load_grid, results_to_csv, run_grid

grid = load_grid(
    {
        "figure": "demo",
        "distributions": [{"type": "t", "dof": 5, "d": 2}],
        "ns": [30, 60],
        "missingness": [{"type": "per-column", "q": 0.9}],
        "approaches": ["complete-case", "mean", "median", "knn3", "knn6"],
        "N": 60,
        "B": 60,
        "seed": 5,
    }
)
results = run_grid(grid.configs, parallelism=2)
print(results_to_csv(results))

out = tempfile.mkdtemp()
emit_figure_data(results, grid.figure, out)
print("figure written to", out)
