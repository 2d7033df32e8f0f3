"""Sparse random interaction matrices and their spectral diagnostics.

The realized matrix is M = (pattern mask * Gaussian weights) / (alpha * sqrt(d)).
Raw weights are kept separate from the scale so an alpha sweep can reuse a
single Gaussian draw.  Spectral quantities (largest singular value, full
singular spectrum at small n) operate on the unscaled matrix B = mask*A/sqrt(d)
by default, which is the object the kappa = 22 norm envelope refers to.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .patterns import AdjacencyPattern

__all__ = [
    "InteractionMatrix",
    "SpectralReport",
    "assemble",
    "matvec",
    "spectral_norm",
    "singular_gap",
    "NORM_ENVELOPE",
    "DENSE_SPECTRUM_LIMIT",
]

# Envelope constant for ||mask*A/sqrt(d)||: violated with vanishing probability.
NORM_ENVELOPE = 22.0

# Largest n for which dense singular spectra are computed.
DENSE_SPECTRUM_LIMIT = 512


@dataclass
class InteractionMatrix:
    """Scaled sparse Gaussian matrix M = (pattern * weights) / (alpha*sqrt(d)).

    ``weights[i, j]`` is the standard-Gaussian draw at position
    (i, pattern.row_cols[i, j]); drawing is counter-based in canonical
    row-major order, so the weight vector depends only on the seed.
    """

    pattern: AdjacencyPattern
    weights: np.ndarray  # shape (n, d), float64
    alpha: float
    seed: int | None = None
    _csr: sp.csr_matrix | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        w = np.asarray(self.weights, dtype=np.float64)
        if w.shape != (self.pattern.n, self.pattern.d):
            raise ValueError(
                f"weights shape {w.shape} != ({self.pattern.n}, {self.pattern.d})"
            )
        self.weights = w

    @property
    def n(self) -> int:
        return self.pattern.n

    @property
    def d(self) -> int:
        return self.pattern.d

    @property
    def scale(self) -> float:
        return 1.0 / (self.alpha * math.sqrt(self.d))

    def with_alpha(self, alpha: float) -> "InteractionMatrix":
        """Same Gaussian draw, different interaction strength."""
        return InteractionMatrix(self.pattern, self.weights, alpha, self.seed)

    def _unscaled_csr(self) -> sp.csr_matrix:
        # CSR of mask*A (raw weights, no normalization); built once.
        if self._csr is None:
            n, d = self.n, self.d
            indptr = np.arange(0, n * d + 1, d, dtype=np.int64)
            self._csr = sp.csr_matrix(
                (self.weights.ravel().copy(), self.pattern.row_cols.ravel().copy(), indptr),
                shape=(n, n),
            )
        return self._csr

    def matvec(self, v: np.ndarray) -> np.ndarray:
        """Sparse product M @ v."""
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (self.n,):
            raise ValueError(f"vector has shape {v.shape}, expected ({self.n},)")
        return self.scale * (self._unscaled_csr() @ v)

    def rmatvec(self, v: np.ndarray) -> np.ndarray:
        """Sparse product M.T @ v."""
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (self.n,):
            raise ValueError(f"vector has shape {v.shape}, expected ({self.n},)")
        return self.scale * (self._unscaled_csr().T @ v)

    def row_sums_unscaled(self) -> np.ndarray:
        """Row sums of mask*A / sqrt(d); these are the first-order Gaussian
        terms of the equilibrium decomposition."""
        return self.weights.sum(axis=1) / math.sqrt(self.d)

    def dense(self, unscaled: bool = False) -> np.ndarray:
        """Dense expansion (intended for small n).  ``unscaled`` gives
        mask*A/sqrt(d) instead of M."""
        out = self._unscaled_csr().toarray()
        factor = 1.0 / math.sqrt(self.d) if unscaled else self.scale
        return factor * out


@dataclass(frozen=True)
class SpectralReport:
    spectral_norm: float
    min_gap: float
    norm_bound_holds: bool
    iterations: int
    tolerance_achieved: float
    converged: bool = True
    singular_values: np.ndarray | None = None

    def to_json(self) -> str:
        return json.dumps(
            {
                "spectral_norm": self.spectral_norm,
                "min_gap": self.min_gap,
                "norm_bound_holds": self.norm_bound_holds,
                "iterations": self.iterations,
                "tolerance_achieved": self.tolerance_achieved,
            }
        )


def assemble(p: AdjacencyPattern, alpha: float, seed: int) -> InteractionMatrix:
    """Draw one standard-Gaussian weight per pattern position.

    The Philox counter-based generator is keyed by the seed and consumed in
    canonical row-major position order, so the draw is independent of
    iteration order and thread scheduling, and identical (bitwise) across
    repeated calls with the same arguments.
    """
    rng = np.random.Generator(np.random.Philox(key=seed))
    weights = rng.standard_normal(p.n * p.d).reshape(p.n, p.d)
    return InteractionMatrix(pattern=p, weights=weights, alpha=alpha, seed=seed)


def matvec(M: InteractionMatrix, v: np.ndarray) -> np.ndarray:
    return M.matvec(v)


def _power_iteration_sigma(
    mv, rmv, n: int, start: np.ndarray, tol: float, max_iter: int
) -> tuple[float, int, float]:
    # Largest singular value via power iteration on B^T B; the relative
    # change of the sigma estimate is the stopping quantity.
    v = start / np.linalg.norm(start)
    sigma = 0.0
    achieved = math.inf
    for it in range(1, max_iter + 1):
        u = mv(v)
        w = rmv(u)
        norm_w = np.linalg.norm(w)
        if norm_w == 0.0:
            return 0.0, it, 0.0
        sigma_new = math.sqrt(float(v @ w))
        achieved = abs(sigma_new - sigma) / max(sigma_new, 1e-300)
        v = w / norm_w
        sigma = sigma_new
        if achieved < tol:
            return sigma, it, achieved
    return sigma, max_iter, achieved


def spectral_norm(
    M: InteractionMatrix,
    unscaled: bool = True,
    tol: float = 1e-10,
    max_iter: int = 10_000,
    full_spectrum: bool | None = None,
) -> SpectralReport:
    """Largest singular value by power iteration on the hermitization
    (alternating multiply by the matrix and its transpose).

    With ``unscaled=True`` (default) the norm of mask*A/sqrt(d) is computed,
    which is what the kappa = 22 envelope refers to; otherwise the norm of M.
    Starts from the normalized all-ones vector, with one seeded random
    restart if that run stalls short of ``tol``.  Non-convergence is
    reported (``converged=False``), not raised.  For n within the dense
    limit the full singular spectrum (and hence ``min_gap``) can also be
    computed; by default it is when n <= DENSE_SPECTRUM_LIMIT.
    """
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    n = M.n
    csr = M._unscaled_csr()
    factor = 1.0 / math.sqrt(M.d) if unscaled else M.scale
    mv = lambda v: factor * (csr @ v)
    rmv = lambda v: factor * (csr.T @ v)

    start = np.ones(n)
    sigma, iters, achieved = _power_iteration_sigma(mv, rmv, n, start, tol, max_iter)
    if achieved >= tol:
        # Stagnation: one deterministic random restart, keep the better run.
        restart = np.random.default_rng(0).standard_normal(n)
        sigma2, iters2, achieved2 = _power_iteration_sigma(
            mv, rmv, n, restart, tol, max_iter
        )
        iters += iters2
        sigma = max(sigma, sigma2)
        achieved = min(achieved, achieved2)

    unscaled_norm = sigma if unscaled else sigma * M.alpha
    svals = None
    min_gap = math.nan
    if full_spectrum is None:
        full_spectrum = n <= DENSE_SPECTRUM_LIMIT
    if full_spectrum and n <= DENSE_SPECTRUM_LIMIT:
        svals = np.linalg.svd(factor * csr.toarray(), compute_uv=False)
        min_gap = math.inf if n == 1 else float(np.min(-np.diff(svals)))
        sigma = max(sigma, float(svals[0]))
        unscaled_norm = sigma if unscaled else sigma * M.alpha
    return SpectralReport(
        spectral_norm=float(sigma),
        min_gap=min_gap,
        norm_bound_holds=bool(unscaled_norm < NORM_ENVELOPE),
        iterations=iters,
        tolerance_achieved=float(achieved),
        converged=bool(achieved < tol),
        singular_values=svals,
    )


def singular_gap(M: InteractionMatrix, dense_limit: int = DENSE_SPECTRUM_LIMIT) -> float:
    """Smallest consecutive difference of the singular values of the raw
    masked matrix mask*A (no normalization); these are almost surely all
    distinct.  Refused above the dense-spectrum limit."""
    if M.n > dense_limit:
        raise ValueError(f"n={M.n} exceeds dense spectrum limit {dense_limit}")
    if M.n == 1:
        return math.inf
    svals = np.linalg.svd(M._unscaled_csr().toarray(), compute_uv=False)
    return float(np.min(-np.diff(svals)))
