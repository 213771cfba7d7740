"""Parametric bootstrap p-values for incomplete (MCAR) samples.

The null model ``N(mu~, Sigma~)`` is fitted from the incomplete sample
(covariance from complete cases, location from the imputed data), every
bootstrap sample is drawn from it, amputed with the estimated missingness
probabilities, treated exactly like the observed sample, and the observed
statistic is compared with the bootstrap distribution.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Union

import numpy as np
from scipy.optimize import brentq

from .bhep import SIGMA_CENTERS, BhepValue, bhep_complete_case, bhep_on_imputed, bhep_statistic
from .dataset import IncompleteMatrix, MissingnessSpec, PerColumn, RowThenValue, ampute_mcar
from .errors import (
    DegenerateBootstrap,
    EmptyColumn,
    NoDonor,
    NotPositiveDefinite,
    TooFewRows,
)
from .imputation import ImputationMethod, Knn, Mean, Median, impute, parse_method
from .numerics import RngStream, cholesky

MECHANISMS = ("per-column", "row-value")

# errors that make a single bootstrap sample unusable
CYCLE_ERRORS = (NotPositiveDefinite, TooFewRows, EmptyColumn, NoDonor)


@dataclass(frozen=True)
class CompleteCase:
    label = "complete-case"


Approach = Union[CompleteCase, Mean, Median, Knn]


def parse_approach(name: str, knn_aggregate: str = "mean") -> Approach:
    """``complete-case`` or any imputation method name (``mean``, ``knn6``...)."""
    if name.strip().lower() in ("complete-case", "cc"):
        return CompleteCase()
    return parse_method(name, knn_aggregate=knn_aggregate)


def approach_label(method: Approach) -> str:
    return method.label


def compute_statistic(
    data: IncompleteMatrix, method: Approach, sigma_center: str = "complete-case"
) -> BhepValue:
    empty = np.flatnonzero(data.observed_counts() == 0)
    if empty.size:
        raise EmptyColumn(f"column(s) {empty.tolist()} have no observed values")
    if isinstance(method, CompleteCase):
        return bhep_complete_case(data)
    return bhep_on_imputed(data, method, sigma_center)


@dataclass(frozen=True)
class BootstrapConfig:
    """Settings of one bootstrap test.

    Attributes
    ----------
    B : int
        Number of bootstrap cycles.
    alpha : float
        Significance level, in (0, 1].
    master_seed : int
        Seed used when no explicit stream is passed.
    method : Approach
        ``CompleteCase()`` or an imputation method.
    mechanism : str
        MCAR family used to re-ampute bootstrap samples, ``"per-column"``
        or ``"row-value"``.
    sigma_center : str
        Mean subtracted in the complete-case covariance.
    max_attempts : int
        Redraws of a failing bootstrap sample before counting it as failed.
    max_failure_fraction : float
        Above this fraction of failed cycles the test is abandoned.
    """

    B: int = 1000
    alpha: float = 0.05
    master_seed: int = 0
    method: Approach = field(default_factory=CompleteCase)
    mechanism: str = "per-column"
    sigma_center: str = "complete-case"
    max_attempts: int = 3
    max_failure_fraction: float = 0.10

    def __post_init__(self):
        if self.B < 1:
            raise ValueError("B must be at least 1")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")
        if self.mechanism not in MECHANISMS:
            raise ValueError(f"mechanism must be one of {MECHANISMS}")
        if self.sigma_center not in SIGMA_CENTERS:
            raise ValueError(f"sigma_center must be one of {SIGMA_CENTERS}")
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be at least 1")

    def to_dict(self) -> dict:
        return {
            "B": self.B,
            "alpha": self.alpha,
            "master_seed": self.master_seed,
            "method": approach_label(self.method),
            "mechanism": self.mechanism,
            "sigma_center": self.sigma_center,
            "max_attempts": self.max_attempts,
            "max_failure_fraction": self.max_failure_fraction,
        }


@dataclass
class TestOutcome:
    """Result of a test on one sample."""

    statistic: float
    p_value: float
    reject: bool
    n: int
    n_hat: int
    method: str
    B: int
    B_used: int
    failures: int
    alpha: float
    critical_value: float
    config: dict = field(default_factory=dict)

    __test__ = False  # keep pytest from collecting this class

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _row_value_from_rates(incomplete_rate: float, missing_rate: float, d: int) -> RowThenValue:
    # match P(row incomplete) = p_row (1 - (1 - p_value)^d) and
    # P(entry missing) = p_row p_value
    if incomplete_rate <= 0.0 or missing_rate <= 0.0:
        return RowThenValue(0.0, 0.0)
    ratio = missing_rate / incomplete_rate

    def excess(p):
        return p / (1.0 - (1.0 - p) ** d) - ratio

    if ratio >= 1.0:
        return RowThenValue(incomplete_rate, 1.0)
    if ratio <= 1.0 / d + 1e-12:
        return RowThenValue(1.0, missing_rate)
    p_value = brentq(excess, 1e-12, 1.0, xtol=1e-14)
    p_row = missing_rate / p_value
    if p_row > 1.0:
        return RowThenValue(1.0, missing_rate)
    return RowThenValue(p_row, p_value)


def estimate_missingness(mask: np.ndarray, mechanism: str = "per-column") -> MissingnessSpec:
    """Estimate MCAR probabilities from response indicators.

    ``per-column`` returns the column observation rates.  ``row-value``
    returns the two-stage parameters whose implied fraction of incomplete
    rows and fraction of missing entries equal the observed ones.
    """
    mask = np.asarray(mask, dtype=bool)
    if mechanism == "per-column":
        return PerColumn(tuple(mask.mean(axis=0)))
    if mechanism == "row-value":
        incomplete = ~mask.all(axis=1)
        return _row_value_from_rates(float(incomplete.mean()), float((~mask).mean()), mask.shape[1])
    raise ValueError(f"mechanism must be one of {MECHANISMS}")


def _critical_value(draws: np.ndarray, alpha: float) -> float:
    # order statistic ceil((1 - alpha) B), at least the minimum
    b = draws.size
    rank = max(1, math.ceil(round((1.0 - alpha) * b, 9)))
    return float(np.sort(draws)[rank - 1])


def bootstrap_draws(
    data: IncompleteMatrix,
    cfg: BootstrapConfig,
    rng: RngStream,
    fitted: BhepValue | None = None,
) -> tuple[np.ndarray, int]:
    """Bootstrapped statistics and the number of failed cycles.

    Cycle ``b``, attempt ``a`` draws from ``rng.child(b, a)``: first the
    normal sample, then the mask, so a zero missing rate reproduces the
    complete-data parametric bootstrap draw for draw.
    """
    if fitted is None:
        fitted = compute_statistic(data, cfg.method, cfg.sigma_center)
    n, d = data.n, data.d
    mean = fitted.mean
    chol = cholesky(fitted.cov)
    spec = estimate_missingness(data.mask, cfg.mechanism)
    draws = np.empty(cfg.B)
    used = 0
    failures = 0
    for b in range(cfg.B):
        for attempt in range(cfg.max_attempts):
            gen = rng.child(b, attempt).generator()
            x = mean + gen.standard_normal((n, d)) @ chol.T
            sample = ampute_mcar(x, spec, gen)
            try:
                draws[used] = compute_statistic(sample, cfg.method, cfg.sigma_center).statistic
            except CYCLE_ERRORS:
                continue
            used += 1
            break
        else:
            failures += 1
    return draws[:used], failures


def bootstrap_test(
    data: IncompleteMatrix, cfg: BootstrapConfig, rng: RngStream | None = None
) -> TestOutcome:
    """Bootstrap test of multivariate normality for an incomplete sample.

    Rejects when the observed statistic exceeds the order statistic
    ``ceil((1 - alpha) B)`` of the bootstrap draws.  The reported p-value
    is ``(1 + #{T*_b >= T}) / (B + 1)``; on ties it can disagree with
    ``reject``.

    Raises
    ------
    DegenerateBootstrap
        If more than ``cfg.max_failure_fraction`` of the cycles fail.
    """
    if rng is None:
        rng = RngStream(cfg.master_seed)
    observed = compute_statistic(data, cfg.method, cfg.sigma_center)
    draws, failures = bootstrap_draws(data, cfg, rng, fitted=observed)
    if failures > cfg.max_failure_fraction * cfg.B or draws.size == 0:
        raise DegenerateBootstrap(f"{failures} of {cfg.B} bootstrap cycles failed")
    t = observed.statistic
    crit = _critical_value(draws, cfg.alpha)
    p_value = (1.0 + np.count_nonzero(draws >= t)) / (draws.size + 1.0)
    return TestOutcome(
        statistic=t,
        p_value=float(p_value),
        reject=bool(t > crit),
        n=data.n,
        n_hat=int(data.mask.all(axis=1).sum()),
        method=approach_label(cfg.method),
        B=cfg.B,
        B_used=int(draws.size),
        failures=failures,
        alpha=cfg.alpha,
        critical_value=crit,
        config=cfg.to_dict(),
    )


def bootstrap_test_complete_case(
    data: IncompleteMatrix, cfg: BootstrapConfig, rng: RngStream | None = None
) -> TestOutcome:
    """:func:`bootstrap_test` with the complete-case statistic."""
    if not isinstance(cfg.method, CompleteCase):
        cfg = replace(cfg, method=CompleteCase())
    return bootstrap_test(data, cfg, rng)


def naive_test(
    data: IncompleteMatrix,
    method: ImputationMethod,
    null_draws: np.ndarray,
    alpha: float = 0.05,
) -> TestOutcome:
    """Impute, then test as if the sample were complete.

    This is the common misuse: the imputed sample is compared against the
    Monte Carlo null distribution of the complete-data statistic.  Its size
    is not controlled.
    """
    filled = impute(data, method)
    t = bhep_statistic(filled).statistic
    null_draws = np.asarray(null_draws)
    crit = float(np.quantile(null_draws, 1.0 - alpha))
    p_value = (1.0 + np.count_nonzero(null_draws >= t)) / (null_draws.size + 1.0)
    return TestOutcome(
        statistic=t,
        p_value=float(p_value),
        reject=bool(t > crit),
        n=data.n,
        n_hat=int(data.mask.all(axis=1).sum()),
        method="naive-" + method.label,
        B=int(null_draws.size),
        B_used=int(null_draws.size),
        failures=0,
        alpha=alpha,
        critical_value=crit,
        config={"method": "naive-" + method.label, "alpha": alpha, "M": int(null_draws.size)},
    )
