"""Linear algebra, random sampling and quadrature primitives."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial.hermite_e import hermegauss

from .errors import NotPositiveDefinite, UnsupportedDimension

# Appendix covariance/scale matrices used in the simulation study.
SIGMA1 = np.array([[1.0, 0.5], [0.5, 1.0]])
SIGMA2 = np.array([[1.0, 0.5, 0.5], [0.5, 1.0, 0.5], [0.5, 0.5, 1.0]])


@dataclass(frozen=True)
class GaussianParams:
    """Mean vector and covariance matrix of a d-variate normal law.

    Parameters
    ----------
    mu : array_like, shape (d,)
    sigma : array_like, shape (d, d)
        Symmetric positive definite.
    """

    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        mu = np.array(self.mu, dtype=float).reshape(-1)
        sigma = np.array(self.sigma, dtype=float)
        d = mu.shape[0]
        if sigma.shape != (d, d):
            raise ValueError(f"sigma must be {d}x{d}, got {sigma.shape}")
        scale = max(np.abs(sigma).max(), np.finfo(float).tiny)
        if np.abs(sigma - sigma.T).max() > 1e-12 * scale:
            raise NotPositiveDefinite("sigma is not symmetric")
        cholesky(sigma)
        mu.flags.writeable = False
        sigma.flags.writeable = False
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)

    @property
    def dim(self) -> int:
        return self.mu.shape[0]

    @classmethod
    def standard(cls, d: int) -> "GaussianParams":
        return cls(np.zeros(d), np.eye(d))


@dataclass(frozen=True)
class RngStream:
    """Seedable, splittable random stream.

    A stream is identified by a master seed and a tuple of integer keys.
    Identical identifiers always reproduce identical draws; distinct keys
    give independent streams (via :class:`numpy.random.SeedSequence`
    spawn keys), so work items can be scheduled in any order.

    Examples
    --------
    >>> s = RngStream(1234)
    >>> a = s.child(7).generator().standard_normal(3)
    >>> b = RngStream(1234, (7,)).generator().standard_normal(3)
    >>> bool((a == b).all())
    True
    """

    seed: int
    key: tuple[int, ...] = field(default=())

    def child(self, *index: int) -> "RngStream":
        return RngStream(self.seed, self.key + tuple(int(i) for i in index))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=self.key)
        return np.random.Generator(np.random.PCG64(ss))


def cholesky(sigma) -> np.ndarray:
    """Lower-triangular factor ``L`` with ``L @ L.T == sigma``."""
    sigma = np.asarray(sigma, dtype=float)
    try:
        return np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None


def inv_sqrt_sym(sigma) -> np.ndarray:
    """Symmetric inverse square root of an SPD matrix.

    Computed from the eigendecomposition ``sigma = V diag(w) V'`` as
    ``V diag(w**-0.5) V'``.  Eigenvalues at or below
    ``d * eps * max(w)`` are treated as zero and raise
    :class:`NotPositiveDefinite` instead of being regularized.
    """
    sigma = np.asarray(sigma, dtype=float)
    d = sigma.shape[0]
    if not np.all(np.isfinite(sigma)):
        raise NotPositiveDefinite("matrix has non-finite entries")
    w, v = np.linalg.eigh(sigma)
    wmax = w[-1]
    if wmax <= 0 or w[0] <= d * np.finfo(float).eps * wmax:
        raise NotPositiveDefinite(f"smallest eigenvalue {w[0]:.3g} is not positive")
    return (v * w ** -0.5) @ v.T


def sample_mvn(params: GaussianParams, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` IID rows from ``N_d(mu, sigma)``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    chol = cholesky(params.sigma)
    z = rng.standard_normal((n, params.dim))
    return params.mu + z @ chol.T


def sample_mvt(dof: float, scale, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` rows from a centered multivariate t distribution.

    Each row is ``L z sqrt(dof / w)`` with ``z`` standard normal, ``L`` the
    Cholesky factor of ``scale`` and ``w ~ chi2(dof)``.  The covariance is
    ``dof / (dof - 2) * scale`` for ``dof > 2``.
    """
    if dof < 1:
        raise ValueError("dof must be at least 1")
    if n < 1:
        raise ValueError("n must be at least 1")
    scale = np.asarray(scale, dtype=float)
    chol = cholesky(scale)
    z = rng.standard_normal((n, scale.shape[0]))
    w = rng.chisquare(dof, size=n)
    return (z @ chol.T) * np.sqrt(dof / w)[:, None]


@lru_cache(maxsize=32)
def _hermite_1d(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = hermegauss(order)
    return x, w / np.sqrt(2.0 * np.pi)


def gauss_hermite_nodes(order: int, d: int) -> tuple[np.ndarray, np.ndarray]:
    """Tensor-product Gauss-Hermite rule against the standard normal density.

    Returns ``(nodes, weights)`` with ``nodes`` of shape ``(order**d, d)``
    such that ``weights @ f(nodes)`` approximates ``E f(Z)`` for
    ``Z ~ N_d(0, I)``.  The rule is exact for polynomials of total degree
    below ``2 * order``.
    """
    if not 1 <= d <= 3:
        raise UnsupportedDimension(f"quadrature grid supports d in 1..3, got {d}")
    if not 2 <= order <= 64:
        raise ValueError(f"order must be in [2, 64], got {order}")
    x, w = _hermite_1d(order)
    grids = np.meshgrid(*([x] * d), indexing="ij")
    wgrids = np.meshgrid(*([w] * d), indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=1)
    weights = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
    return nodes, weights
