"""Null calibration for the trace tests: influence samples, weight matrices,
and weighted chi-square upper quantiles.

Under conditional independence of the candidate given the working set, n
times the trace gain converges to a weighted sum of independent 1-df
chi-squares.  The weights are eigenvalues of the covariance of a stacked
influence vector; this module evaluates that vector at every sample with
all population quantities replaced by their full-sample estimates, so the
estimated weight matrix is an exact empirical outer product (and hence PSD,
with influence columns averaging to zero up to float roundoff).

Per-coordinate signs of the stacked influence vector do not affect the
weights: flipping signs conjugates the outer product by a diagonal
orthogonal matrix, which preserves eigenvalues.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import gammainccinv

from .data import Dataset, IndexSet, MomentStats, SliceAssignment, compute_moments
from .errors import DegenerateDistributionError, NumericalFailureError
from .kernels import (
    AuxiliaryStats,
    Method,
    ResidualStats,
    auxiliary_stats,
    residualize,
    sigma_ops,
    trace_diff,
)

# Clamp window for trailing eigenvalues of the estimated weight matrix; more
# negative values indicate a bug since the matrix is an outer product.
NEGATIVE_WEIGHT_TOLERANCE = 1e-10


@dataclass(frozen=True)
class InfluenceSample:
    """Per-sample stacked influence vectors (n rows, one column per weight)."""

    method: Method
    ell_star: np.ndarray


@dataclass(frozen=True)
class NullDistribution:
    """Estimated weight matrix and its eigenvalue weights, nonincreasing."""

    method: Method
    omega: np.ndarray
    weights: np.ndarray
    dim: int


def influence_dim(method: Method, f_size: int, h_count: int) -> int:
    """Column count of the stacked influence vector for each method."""
    if method is Method.SIR:
        return h_count
    if method is Method.SAVE:
        return (f_size + 1) * h_count
    if method is Method.DR:
        return 2 * h_count + 1 + f_size * (h_count + 1)
    raise ValueError(f"unknown method {method!r}")


def influence_samples(
    method: Method,
    d: Dataset,
    s: SliceAssignment,
    m: MomentStats,
    r: ResidualStats,
    aux: AuxiliaryStats | None = None,
) -> InfluenceSample:
    """Evaluate the method's stacked influence vector at every sample.

    All population symbols in the first-order expansions are replaced by
    their full-sample estimates; each resulting column has exactly zero
    sample mean (up to roundoff) by the normal equations and the exactness
    of slice averages.
    """
    n = d.n
    h = s.h_count
    k = m.size
    p_hat = np.asarray(s.proportions)
    sqrt_p = np.sqrt(p_hat)

    gamma = r.gamma_per_sample
    g_h = r.gamma_by_slice
    z_h = r.zeta_by_slice
    sigma = np.sqrt(r.sigma2_jf)

    # indic[i, h] = 1{sample i in slice h} / p_hat[h]
    indic = np.zeros((n, h))
    for idx, rows in enumerate(s.rows):
        indic[rows, idx] = 1.0 / p_hat[idx]

    if k > 0:
        ops = sigma_ops(m)
        # theta_star rows: delta of the regression coefficient at sample i,
        # Sigma^{-1} X_i times the unstandardized residual.
        theta_star = (m.xc @ ops.inverse) * (sigma * gamma)[:, None]
        proj = (theta_star @ m.u.T) / sigma  # (n, H): theta*_i' u_h / sigma
    else:
        theta_star = np.empty((n, 0))
        proj = np.zeros((n, h))

    # gamma*_(i,h): slice-mean influence of the standardized residual.
    g_star = (gamma[:, None] - g_h[None, :]) * indic - gamma[:, None] - proj

    if method is Method.SIR:
        return InfluenceSample(method=method, ell_star=g_star * sqrt_p[None, :])

    if aux is None:
        aux = auxiliary_stats(m, r)
    cross = aux.cross_by_slice  # (H, k) slice means of xc * gamma

    # zeta*_(i,h): slice-mean influence of the squared standardized residual.
    z_star = (
        (gamma[:, None] ** 2 - z_h[None, :]) * indic
        - 2.0 * gamma[:, None] * g_h[None, :]
        - gamma[:, None] ** 2
        + 1.0
    )
    if k > 0:
        z_star -= 2.0 * (theta_star @ cross.T) / sigma

    if k > 0:
        isr = sigma_ops(m).inverse_sqrt
        iu = m.u @ isr  # (H, k) whitened slice means
        nu_star = np.empty((h, n, k))
        for idx in range(h):
            a = (m.xc * gamma[:, None] - cross[idx][None, :]) * indic[:, idx][:, None]
            a -= gamma[:, None] * m.u[idx][None, :]
            a -= g_h[idx] * m.xc
            a -= (theta_star @ m.v[idx]) / sigma
            nu_star[idx] = a @ isr
        iota_star = g_star.T[:, :, None] * iu[:, None, :]  # (H, n, k)
        phi_star = iota_star - nu_star
    else:
        nu_star = np.empty((h, n, 0))
        iota_star = np.empty((h, n, 0))
        phi_star = np.empty((h, n, 0))

    if method is Method.SAVE:
        blocks = [z_star * sqrt_p[None, :]]
        for idx in range(h):
            blocks.append(np.sqrt(2.0) * sqrt_p[idx] * phi_star[idx])
        return InfluenceSample(method=method, ell_star=np.hstack(blocks))

    if method is Method.DR:
        blocks = [-np.sqrt(2.0) * z_star * sqrt_p[None, :]]
        for idx in range(h):
            blocks.append(2.0 * sqrt_p[idx] * nu_star[idx])
        blocks.append(np.zeros((n, 1)))  # identically-zero component, kept
        blocks.append(2.0 * np.einsum("h,hnk->nk", p_hat, iota_star))
        blocks.append(2.0 * np.sqrt(aux.kappa * p_hat)[None, :] * g_star)
        return InfluenceSample(method=method, ell_star=np.hstack(blocks))

    raise ValueError(f"unknown method {method!r}")


def omega_hat(samples: InfluenceSample) -> NullDistribution:
    """Empirical outer product of the influence samples and its eigenvalues."""
    ell = samples.ell_star
    if not np.all(np.isfinite(ell)):
        raise NumericalFailureError("influence samples contain non-finite entries")
    n, dim = ell.shape
    if n <= dim:
        warnings.warn(
            f"estimating a {dim}-dimensional weight matrix from only {n} samples",
            RuntimeWarning,
            stacklevel=2,
        )
    omega = (ell.T @ ell) / n
    omega = 0.5 * (omega + omega.T)
    weights = np.linalg.eigvalsh(omega)[::-1].copy()
    scale = max(weights[0], 1.0) if weights.size else 1.0
    if weights.size and weights[-1] < -NEGATIVE_WEIGHT_TOLERANCE * scale:
        raise NumericalFailureError(
            f"weight matrix has eigenvalue {weights[-1]:.3e} below the clamp window"
        )
    np.clip(weights, 0.0, None, out=weights)
    return NullDistribution(method=samples.method, omega=omega, weights=weights, dim=dim)


def weighted_chisq_upper_quantile(weights: np.ndarray, alpha: float) -> float:
    """Two-moment (scaled chi-square) upper quantile of sum_k w_k chi2_1.

    Matches the mean and variance with a * chi2_d, a = sum(w^2)/sum(w) and
    d = sum(w)^2/sum(w^2); exact for a single weight and for equal weights,
    and exactly scale-equivariant in the weights.
    """
    w = np.asarray(weights, dtype=np.float64).ravel()
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0,1), got {alpha}")
    if w.size == 0 or np.all(w <= 0.0):
        raise DegenerateDistributionError("no positive weights")
    if np.any(w < 0.0):
        raise ValueError("weights must be nonnegative")
    sw = float(w.sum())
    sw2 = float(w @ w)
    scale = sw2 / sw
    dof = sw**2 / sw2
    return scale * 2.0 * float(gammainccinv(dof / 2.0, alpha))


def weighted_chisq_quantile_mc(
    weights: np.ndarray,
    alpha: float,
    n_draws: int = 100_000,
    seed: int = 0,
) -> float:
    """Monte Carlo upper quantile of the weighted chi-square (diagnostics)."""
    w = np.asarray(weights, dtype=np.float64).ravel()
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0,1), got {alpha}")
    if w.size == 0 or np.all(w <= 0.0):
        raise DegenerateDistributionError("no positive weights")
    rng = np.random.default_rng(seed)
    pos = w[w > 0.0]
    draws = rng.chisquare(1.0, size=(n_draws, pos.size)) @ pos
    return float(np.quantile(draws, 1.0 - alpha))


@dataclass(frozen=True)
class TraceTestResult:
    """Outcome of one conditional-independence trace test."""

    method: Method
    f: IndexSet
    j: int
    alpha: float
    statistic: float
    threshold: float
    reject: bool
    weights: np.ndarray


def statistic_and_threshold(
    method: Method,
    d: Dataset,
    s: SliceAssignment,
    m: MomentStats,
    r: ResidualStats,
    aux: AuxiliaryStats | None,
    alpha: float,
    quantile: str = "two-moment",
    mc_draws: int = 100_000,
    seed: int = 0,
) -> tuple[float, float, np.ndarray]:
    """Test statistic, its calibrated threshold, and the estimated weights."""
    if method is not Method.SIR and aux is None:
        aux = auxiliary_stats(m, r)
    statistic = d.n * trace_diff(method, m, r, aux)
    null = omega_hat(influence_samples(method, d, s, m, r, aux))
    if quantile == "two-moment":
        threshold = weighted_chisq_upper_quantile(null.weights, alpha)
    elif quantile == "monte-carlo":
        threshold = weighted_chisq_quantile_mc(null.weights, alpha, mc_draws, seed)
    else:
        raise ValueError(f"unknown quantile scheme {quantile!r}")
    return statistic, threshold, null.weights


def trace_test(
    method: Method,
    d: Dataset,
    s: SliceAssignment,
    f: IndexSet,
    j: int,
    alpha: float,
    quantile: str = "two-moment",
    mc_draws: int = 100_000,
    seed: int = 0,
) -> TraceTestResult:
    """Test whether candidate ``j`` adds information beyond working set ``f``.

    The statistic is n times the closed-form trace gain; the threshold is the
    upper-alpha quantile of the estimated weighted chi-square null law.
    """
    m = compute_moments(d, s, f)
    r = residualize(d, s, m, j)
    aux = None if method is Method.SIR else auxiliary_stats(m, r)
    statistic, threshold, weights = statistic_and_threshold(
        method, d, s, m, r, aux, alpha, quantile, mc_draws, seed
    )
    return TraceTestResult(
        method=method,
        f=m.f,
        j=int(j),
        alpha=float(alpha),
        statistic=statistic,
        threshold=threshold,
        reject=bool(statistic > threshold),
        weights=weights,
    )
