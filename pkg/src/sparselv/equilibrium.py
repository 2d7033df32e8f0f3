"""Feasibility solves and nonnegative saturated equilibria.

The linear equilibrium x = 1 + Mx is solved by Neumann fixed-point
iteration (geometric convergence for ||M|| < 1) and decomposed as
x = 1 + Z/alpha + R/alpha^2, where Z collects the first-order Gaussian
terms (i.i.d. N(0,1) by construction) and R the higher Neumann orders.
The nonnegative saturated equilibrium of the complementarity system is
found either by support pivoting or as the long-time ODE limit.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .interaction import InteractionMatrix

__all__ = [
    "DivergenceError",
    "EquilibriumError",
    "EquilibriumReport",
    "GumbelConstants",
    "SaturatedEquilibrium",
    "solve_feasibility",
    "neumann_summand",
    "gumbel_constants",
    "extreme_value_stat",
    "saturated_equilibrium",
]

# Species below this abundance after ODE quiescence are treated as extinct.
ODE_EXTINCTION_CUTOFF = 1e-6


class DivergenceError(RuntimeError):
    """Neumann iteration diverged; the spectral norm of M is >= 1."""


class EquilibriumError(RuntimeError):
    """Saturated-equilibrium solve failed its complementarity/KKT checks."""


@dataclass
class EquilibriumReport:
    """Solution of x = 1 + Mx with its Gaussian/remainder decomposition."""

    x: np.ndarray
    feasible: bool
    min_x: float
    argmin: int
    Z: np.ndarray
    R: np.ndarray
    min_Z: float
    residual_inf: float
    solver_iterations: int
    converged: bool
    alpha: float
    n: int
    d: int
    seed: int | None

    SCALAR_FIELDS = (
        "feasible",
        "min_x",
        "argmin",
        "min_Z",
        "residual_inf",
        "alpha",
        "n",
        "d",
        "seed",
    )

    def scalar_dict(self) -> dict:
        return {
            "feasible": self.feasible,
            "min_x": self.min_x,
            "argmin": self.argmin,
            "min_Z": self.min_Z,
            "residual_inf": self.residual_inf,
            "alpha": self.alpha,
            "n": self.n,
            "d": self.d,
            "seed": self.seed,
        }

    def to_json(self, full_state: bool = False) -> str:
        payload = self.scalar_dict()
        if full_state:
            payload = {"x": self.x.tolist(), **payload}
        return json.dumps(payload)


@dataclass(frozen=True)
class GumbelConstants:
    """Normalizing constants for the minimum of n i.i.d. standard normals."""

    n: int
    alpha_star: float
    beta_star: float


@dataclass
class SaturatedEquilibrium:
    """Nonnegative equilibrium with surviving/vanished species partition."""

    x: np.ndarray
    survivors: np.ndarray  # sorted indices with x_k > 0
    complementarity_residual: float
    kkt_violation: float
    method: str


def solve_feasibility(
    M: InteractionMatrix,
    tol: float = 1e-12,
    max_iter: int = 10_000,
) -> EquilibriumReport:
    """Neumann iteration x <- 1 + Mx from x = 1 until the sup-norm
    residual ||x - 1 - Mx|| drops below ``tol``.

    Raises :class:`DivergenceError` when the residual grows for 20
    consecutive iterations (signals ||M|| >= 1).  If ``tol`` is not
    reached within ``max_iter`` the report is returned with
    ``converged=False``.
    """
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    n = M.n
    ones = np.ones(n)
    x = ones.copy()
    residual = math.inf
    growth_streak = 0
    iterations = 0
    converged = False
    for iterations in range(1, max_iter + 1):
        x_next = ones + M.matvec(x)
        residual_new = float(np.max(np.abs(x_next - x)))
        if residual_new > residual:
            growth_streak += 1
            if growth_streak >= 20:
                raise DivergenceError(
                    f"residual grew for {growth_streak} consecutive iterations "
                    f"(last {residual_new:.3e}); spectral norm of M is >= 1"
                )
        else:
            growth_streak = 0
        x = x_next
        residual = residual_new
        if residual <= tol:
            converged = True
            break

    Z = M.row_sums_unscaled()
    alpha = M.alpha
    R = alpha * alpha * (x - 1.0 - Z / alpha)
    argmin = int(np.argmin(x))
    min_x = float(x[argmin])
    return EquilibriumReport(
        x=x,
        feasible=bool(min_x > 0.0),
        min_x=min_x,
        argmin=argmin,
        Z=Z,
        R=R,
        min_Z=float(Z.min()),
        residual_inf=float(np.max(np.abs(x - ones - M.matvec(x)))),
        solver_iterations=iterations,
        converged=converged,
        alpha=alpha,
        n=n,
        d=M.d,
        seed=M.seed,
    )


def neumann_summand(M: InteractionMatrix, k: int, l: int) -> float:
    """Order-l Neumann term rho_{k,l} = e_k^T (B/alpha)^(l-2) B^2 1 / d^(l/2)
    with B the raw masked matrix; the partial sums over l >= 2 converge to
    R_k.  Diagnostic only; computed by l successive sparse products."""
    if l < 2:
        raise ValueError(f"order must be >= 2, got {l}")
    if not (0 <= k < M.n):
        raise ValueError(f"index {k} out of range [0, {M.n})")
    csr = M._unscaled_csr()
    inv_sqrt_d = 1.0 / math.sqrt(M.d)
    v = np.ones(M.n)
    for _ in range(l):
        v = inv_sqrt_d * (csr @ v)
    return float(v[k]) / M.alpha ** (l - 2)


def gumbel_constants(n: int) -> GumbelConstants:
    """Centering/scaling sequences for the minimum of n i.i.d. N(0,1):
    alpha_star = sqrt(2 log n), beta_star = alpha_star -
    log(4 pi log n) / (2 alpha_star)."""
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    log_n = math.log(n)
    alpha_star = math.sqrt(2.0 * log_n)
    beta_star = alpha_star - math.log(4.0 * math.pi * log_n) / (2.0 * alpha_star)
    return GumbelConstants(n=n, alpha_star=alpha_star, beta_star=beta_star)


def extreme_value_stat(Z: np.ndarray, g: GumbelConstants) -> float:
    """Normalized minimum alpha_star * (min Z + beta_star); its limit law
    has survival function G(x) = exp(-exp(-x))."""
    Z = np.asarray(Z, dtype=np.float64)
    if Z.shape != (g.n,):
        raise ValueError(f"Z has shape {Z.shape}, expected ({g.n},)")
    return float(g.alpha_star * (Z.min() + g.beta_star))


def _checked_saturated(
    x: np.ndarray, M_dense: np.ndarray, tol: float, method: str
) -> SaturatedEquilibrium:
    growth = 1.0 - x + M_dense @ x
    comp = float(np.max(np.abs(x * growth)))
    extinct = x == 0.0
    if extinct.any():
        kkt = float(np.maximum(0.0, 1.0 + (M_dense @ x)[extinct]).max())
    else:
        kkt = 0.0
    if comp > tol or kkt > tol:
        raise EquilibriumError(
            f"saturated equilibrium checks failed (method={method}): "
            f"complementarity {comp:.3e}, kkt {kkt:.3e}, tol {tol:.1e}"
        )
    return SaturatedEquilibrium(
        x=x,
        survivors=np.flatnonzero(x > 0.0),
        complementarity_residual=comp,
        kkt_violation=kkt,
        method=method,
    )


def _refine_support(
    M_dense: np.ndarray, support: np.ndarray, max_rounds: int = 200
) -> tuple[np.ndarray, np.ndarray] | None:
    """Principal pivoting on the survivor support: solve the linear system
    on the current support, drop every species with a nonpositive value,
    then re-admit extinct species whose invasion rate 1 + (Mx)_k is
    positive.  Returns (indices, x) at a consistent support, or None when
    the support empties or the round budget is exhausted."""
    n = M_dense.shape[0]
    support = support.copy()
    for _ in range(max_rounds):
        idx = np.flatnonzero(support)
        if idx.size == 0:
            return None
        sub = np.eye(idx.size) - M_dense[np.ix_(idx, idx)]
        x_sub = np.linalg.solve(sub, np.ones(idx.size))
        bad = x_sub <= 0.0
        if bad.any():
            support[idx[bad]] = False
            continue
        x = np.zeros(n)
        x[idx] = x_sub
        invade = ~support & (1.0 + M_dense @ x > 0.0)
        if not invade.any():
            return idx, x
        support |= invade
    return None


def _ode_limit_support(
    M: InteractionMatrix, tol: float, t_max: float = 500.0
) -> np.ndarray:
    from .dynamics import integrate_lv, lv_field

    quiescence = max(tol, 1e-10)
    x0 = np.full(M.n, 0.5)
    t = 0.0
    chunk = 50.0
    while t < t_max:
        tr = integrate_lv(M, x0, chunk, rel_tol=1e-8, abs_tol=1e-10, sample_count=2)
        x0 = tr.final_state
        t += chunk
        if np.max(np.abs(lv_field(M, x0))) < quiescence:
            break
    return np.flatnonzero(x0 >= ODE_EXTINCTION_CUTOFF)


def saturated_equilibrium(
    M: InteractionMatrix,
    tol: float = 1e-10,
    method: str = "pivoting",
) -> SaturatedEquilibrium:
    """Unique nonnegative equilibrium of the complementarity system
    x_k (1 - x_k + (Mx)_k) = 0, x >= 0.

    ``method="pivoting"`` refines the survivor support directly;
    ``method="ode_limit"`` integrates the dynamics from the all-1/2 state
    until quiescence and reads the support off the limit (species below
    the extinction cutoff are dropped), then polishes the abundances by a
    linear solve on that support.  Both routes verify the complementarity
    residual and the invasion (KKT) condition for extinct species, and
    raise :class:`EquilibriumError` on failure.
    """
    if method not in ("pivoting", "ode_limit"):
        raise ValueError(f"unknown method {method!r}")
    M_dense = M.dense()
    if method == "pivoting":
        start = np.ones(M.n, dtype=bool)
        refined = _refine_support(M_dense, start)
        if refined is None:
            warnings.warn(
                "pivoting failed to settle a support; falling back to ode_limit",
                RuntimeWarning,
            )
            method = "ode_limit"
    if method == "ode_limit":
        start = np.zeros(M.n, dtype=bool)
        start[_ode_limit_support(M, tol)] = True
        refined = _refine_support(M_dense, start)
    if refined is None:
        raise EquilibriumError(
            f"support refinement did not converge (method={method})"
        )
    idx, x = refined
    return _checked_saturated(x, M_dense, tol, method)
