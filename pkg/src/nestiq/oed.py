"""Expected-information-gain estimation for Bayesian experiment design.

The information gain of an experiment splits into a closed-form entropy term
of the observation noise and the expectation of the log marginal likelihood;
the latter is a nested integral (outer: parameters and noise, inner: the
marginalization over parameters) estimated by the double-loop machinery, in
plain form or with Laplace-based importance sampling for the inner integral.
A single-loop Laplace-only estimator and a conjugate closed form for
linear-Gaussian models round out the family.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .estimators import (
    EstimatorResult,
    NestedProblem,
    SamplerKind,
    _as_sampler,
    _inner_blocks,
    _make_result,
    _outer_points,
    _outer_values,
    default_sobol_params,
    dlmc_estimate,
    rdlqmc_estimate,
)
from .lds import RandomizationKey, owen_scramble, sobol_sequence
from .models import ForwardModel
from .stats import (
    PriorSpec,
    TruncationSetting,
    inv_norm_cdf,
    truncated_inv_norm_cdf,
)

__all__ = [
    "OEDProblem",
    "LaplaceFit",
    "MapConvergenceError",
    "LaplaceFitError",
    "log_likelihood",
    "closed_form_entropy_term",
    "simulate_data",
    "map_estimate",
    "laplace_covariance",
    "eig_nested",
    "eig_importance_sampled",
    "eig_laplace_only",
    "eig_conjugate_oracle",
    "eig_quadrature",
]

_LOG_2PI = math.log(2.0 * math.pi)


class MapConvergenceError(ArithmeticError):
    """Posterior-mode search did not converge; carries the last iterate."""

    def __init__(self, message, theta_last=None, grad_norm=None, index=None):
        super().__init__(message)
        self.theta_last = theta_last
        self.grad_norm = grad_norm
        self.index = index


class LaplaceFitError(ArithmeticError):
    """Non-positive-definite posterior precision; carries the sample index."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


@dataclass(frozen=True)
class OEDProblem:
    """Forward model, design, prior, and noise description of one experiment.

    The outer integration dimension is d_theta + n_experiments * d_y (the
    parameters plus every noise coordinate); the inner dimension is d_theta.
    """

    model: ForwardModel
    xi: np.ndarray
    prior: PriorSpec
    noise_variances: np.ndarray
    n_experiments: int = 1
    truncation: TruncationSetting = field(default_factory=TruncationSetting)
    h: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "xi", np.asarray(self.xi, dtype=np.float64))
        nv = np.atleast_1d(np.asarray(self.noise_variances, dtype=np.float64))
        if np.any(nv <= 0):
            raise ValueError("noise variances must be positive")
        if self.n_experiments < 1:
            raise ValueError("n_experiments must be >= 1")
        object.__setattr__(self, "noise_variances", nv)

    @property
    def d_y(self) -> int:
        return self.noise_variances.size

    @property
    def d_theta(self) -> int:
        return self.prior.dimension

    @property
    def d_outer(self) -> int:
        return self.d_theta + self.n_experiments * self.d_y

    @property
    def d_inner(self) -> int:
        return self.d_theta


@dataclass(frozen=True)
class LaplaceFit:
    """Gaussian posterior surrogate: mode, covariance, and its log-determinant."""

    theta_hat: np.ndarray
    covariance: np.ndarray
    log_det_cov: float
    mode: str = "optimized-map"


# ---------------------------------------------------------------------------
# Likelihood and data simulation
# ---------------------------------------------------------------------------


def closed_form_entropy_term(n_experiments: int, noise_variances) -> float:
    """Exact value of the log-likelihood expectation term: the noise entropy
    with flipped sign, -(N_e/2) * sum_j (log(2 pi sigma_j^2) + 1)."""
    nv = np.atleast_1d(np.asarray(noise_variances, dtype=np.float64))
    if np.any(nv <= 0):
        raise ValueError("noise variances must be positive")
    return float(-(n_experiments / 2.0) * np.sum(np.log(2.0 * math.pi * nv) + 1.0))


def _loglik_const(problem: OEDProblem) -> float:
    return float(
        -(problem.n_experiments / 2.0)
        * np.sum(np.log(2.0 * math.pi * problem.noise_variances))
    )


def _batch_loglik(problem: OEDProblem, y_data: np.ndarray, g_inner: np.ndarray) -> np.ndarray:
    """Log-likelihood of data batches against candidate model outputs.

    y_data: (B, N_e, d_y); g_inner: (B, K, d_y) -> (B, K).
    """
    inv_s2 = 1.0 / problem.noise_variances
    r = y_data[:, None, :, :] - g_inner[:, :, None, :]
    quad = np.einsum("bkij,j->bk", r * r, inv_s2)
    return _loglik_const(problem) - 0.5 * quad


def log_likelihood(y_data, theta, problem: OEDProblem) -> float:
    """Gaussian log-likelihood of (d_y, N_e) data at one parameter vector."""
    y = np.asarray(y_data, dtype=np.float64)
    if y.ndim == 1:
        y = y[:, None]
    if y.shape != (problem.d_y, problem.n_experiments):
        raise ValueError(
            f"data must be (d_y={problem.d_y}, N_e={problem.n_experiments})"
        )
    theta = np.asarray(theta, dtype=np.float64)
    g = problem.model.evaluate(theta[None, :], problem.xi, problem.h)
    if not np.all(np.isfinite(g)):
        raise ValueError("model output is not finite")
    ll = _batch_loglik(problem, y.T[None, :, :], g[:, None, :])
    return float(ll[0, 0])


def _noise_values(problem: OEDProblem, u: np.ndarray) -> np.ndarray:
    """Noise coordinates from unit-cube rows: (B, n_e*d_y) -> (B, N_e, d_y)."""
    if problem.truncation.enabled:
        z = truncated_inv_norm_cdf(u, problem.truncation.radius)
    else:
        z = inv_norm_cdf(u)
    z = z.reshape(u.shape[0], problem.n_experiments, problem.d_y)
    return z * np.sqrt(problem.noise_variances)[None, None, :]


def simulate_data(theta, problem: OEDProblem, noise_draw) -> np.ndarray:
    """Observations G(theta, xi) + sigma * draw, shaped (d_y, N_e).

    ``noise_draw`` is a (d_y, N_e) array of standard-normal (or truncated)
    draws, or a RandomizationKey from which the draw is generated (truncated
    when the problem says so).
    """
    theta = np.asarray(theta, dtype=np.float64)
    if isinstance(noise_draw, RandomizationKey):
        u = noise_draw.uniforms((problem.n_experiments * problem.d_y,), salt="data")
        if problem.truncation.enabled:
            z = truncated_inv_norm_cdf(u, problem.truncation.radius)
        else:
            z = inv_norm_cdf(u)
        draw = z.reshape(problem.n_experiments, problem.d_y).T  # (d_y, N_e)
    else:
        draw = np.asarray(noise_draw, dtype=np.float64)
        if draw.ndim == 1:
            draw = draw[:, None]
    g = problem.model.evaluate(theta[None, :], problem.xi, problem.h)[0]
    sigma = np.sqrt(problem.noise_variances)
    return g[:, None] + sigma[:, None] * draw


# ---------------------------------------------------------------------------
# Posterior mode and Laplace surrogate
# ---------------------------------------------------------------------------


def _neg_log_post(problem, theta, y_data, h):
    g = problem.model.evaluate(theta, problem.xi, h)
    r = y_data - g[:, None, :]
    quad = np.einsum("bij,j->b", r * r, 1.0 / problem.noise_variances)
    return 0.5 * quad - problem.prior.logpdf(theta)


def _map_batch(problem, y_data, init, h=None, max_iter=100, grad_tol=1e-10):
    """Damped Gauss-Newton posterior-mode search, vectorized over samples.

    y_data: (B, N_e, d_y); init: (B, d_theta).  Returns (theta_hat, iters).
    """
    theta = np.array(init, dtype=np.float64)
    b = theta.shape[0]
    inv_s2 = 1.0 / problem.noise_variances
    lower = problem.prior.support_lower()
    upper = problem.prior.support_upper()
    lam = np.full(b, 1e-8)
    obj = _neg_log_post(problem, theta, y_data, h)
    converged = np.zeros(b, dtype=bool)
    iters = np.zeros(b, dtype=np.int64)

    for it in range(max_iter):
        g = problem.model.evaluate(theta, problem.xi, h)
        jac = problem.model.jacobian(theta, problem.xi, h)
        rsum = (y_data - g[:, None, :]).sum(axis=1)
        a = jac * inv_s2[None, :, None]
        grad = -np.einsum("bij,bi->bj", a, rsum) - problem.prior.grad_logpdf(theta)
        gnorm = np.max(np.abs(grad), axis=1)
        converged |= gnorm < grad_tol
        iters[~converged] = it + 1
        if converged.all():
            break
        hess = problem.n_experiments * np.einsum("bij,bik->bjk", a, jac)
        hd = -problem.prior.hess_diag_logpdf(theta)
        hess[:, np.arange(problem.d_theta), np.arange(problem.d_theta)] += hd
        eye = np.eye(problem.d_theta)[None, :, :]
        for _ in range(8):
            active = ~converged
            if not active.any():
                break
            try:
                step = np.linalg.solve(
                    hess + lam[:, None, None] * eye, -grad[..., None]
                )[..., 0]
            except np.linalg.LinAlgError:
                lam = lam * 10.0
                continue
            # a near-undamped Newton step below machine precision in theta is
            # numerical stationarity even when ill scaling keeps the absolute
            # gradient above tolerance
            tiny = np.all(np.abs(step) <= 1e-14 * (1.0 + np.abs(theta)), axis=1)
            converged |= tiny & active & (lam <= 1e-3)
            trial = theta + np.where(active[:, None], step, 0.0)
            inside = np.all((trial > lower) & (trial < upper), axis=1)
            safe = np.where(inside[:, None], trial, theta)
            trial_obj = np.where(inside, _neg_log_post(problem, safe, y_data, h), np.inf)
            slack = 1e-12 * (1.0 + np.abs(obj))
            better = inside & (trial_obj <= obj + slack) & active
            theta = np.where(better[:, None], trial, theta)
            obj = np.where(better, np.minimum(trial_obj, obj), obj)
            lam = np.where(
                better, np.maximum(lam * 0.3, 1e-12), np.minimum(lam * 10.0, 1e12)
            )
            if (better | converged).all():
                break
    else:
        g = problem.model.evaluate(theta, problem.xi, h)
        jac = problem.model.jacobian(theta, problem.xi, h)
        rsum = (y_data - g[:, None, :]).sum(axis=1)
        a = jac * inv_s2[None, :, None]
        grad = -np.einsum("bij,bi->bj", a, rsum) - problem.prior.grad_logpdf(theta)
        gnorm = np.max(np.abs(grad), axis=1)
        converged |= gnorm < grad_tol
        if not converged.all():
            bad = int(np.nonzero(~converged)[0][0])
            raise MapConvergenceError(
                f"posterior-mode search failed at sample {bad}: "
                f"|grad| = {gnorm[bad]:.3e} after {max_iter} iterations",
                theta_last=theta[bad],
                grad_norm=float(gnorm[bad]),
                index=bad,
            )
    return theta, iters


def map_estimate(y_data, problem: OEDProblem, init=None) -> np.ndarray:
    """Posterior mode for one (d_y, N_e) data set."""
    y = np.asarray(y_data, dtype=np.float64)
    if y.ndim == 1:
        y = y[:, None]
    init = problem.prior.median() if init is None else np.asarray(init, dtype=np.float64)
    theta, _ = _map_batch(problem, y.T[None, :, :], init[None, :], h=problem.h)
    return theta[0]


def _precision_batch(problem, theta_hat, h=None):
    jac = problem.model.jacobian(theta_hat, problem.xi, h)
    a = jac * (1.0 / problem.noise_variances)[None, :, None]
    prec = problem.n_experiments * np.einsum("bij,bik->bjk", a, jac)
    hd = -problem.prior.hess_diag_logpdf(theta_hat)
    prec[:, np.arange(problem.d_theta), np.arange(problem.d_theta)] += hd
    return 0.5 * (prec + np.swapaxes(prec, 1, 2))


def _laplace_batch(problem, theta_hat, h=None):
    """Cholesky pieces of the Laplace surrogate for a batch of modes.

    Returns (chol_cov, log_det_cov) with chol_cov lower-triangular factors
    of the covariance.
    """
    prec = _precision_batch(problem, theta_hat, h)
    try:
        l_prec = np.linalg.cholesky(prec)
    except np.linalg.LinAlgError:
        eig = np.linalg.eigvalsh(prec)
        bad = int(np.nonzero(eig[:, 0] <= 0)[0][0])
        raise LaplaceFitError(
            f"posterior precision not positive definite at sample {bad}", index=bad
        ) from None
    d = problem.d_theta
    eye = np.broadcast_to(np.eye(d), prec.shape)
    l_inv = np.linalg.solve(l_prec, eye.copy())  # L^-1 with prec = L L^T
    cov_chol = np.swapaxes(l_inv, 1, 2)  # covariance = (L^-1)^T (L^-1)
    log_det_cov = -2.0 * np.sum(
        np.log(np.diagonal(l_prec, axis1=1, axis2=2)), axis=1
    )
    return cov_chol, log_det_cov


def laplace_covariance(theta_hat, problem: OEDProblem) -> np.ndarray:
    """Covariance of the Gaussian posterior surrogate at the given mode."""
    theta_hat = np.asarray(theta_hat, dtype=np.float64)
    prec = _precision_batch(problem, theta_hat[None, :], problem.h)[0]
    try:
        np.linalg.cholesky(prec)
    except np.linalg.LinAlgError:
        raise LaplaceFitError("posterior precision not positive definite") from None
    return np.linalg.inv(prec)


# ---------------------------------------------------------------------------
# Nested EIG estimators
# ---------------------------------------------------------------------------


def _check_sampler_prior(problem: OEDProblem, family: str):
    if family == "is" and any(k == "uniform" for k in problem.prior.kinds):
        raise ValueError(
            "importance sampling with a uniform prior creates discontinuous "
            "weights; use the plain nested estimator instead"
        )


def build_nested_problem(
    problem: OEDProblem,
    family: str = "plain",
    laplace_mode: str = "optimized-map",
    h: float | None = None,
) -> NestedProblem:
    """Unit-cube nested problem whose outer map is log and whose inner
    integrand is the (importance-weighted) likelihood in log form."""
    if family not in ("plain", "is"):
        raise ValueError("family must be 'plain' or 'is'")
    if laplace_mode not in ("optimized-map", "data-generating-theta"):
        raise ValueError("laplace_mode must be 'optimized-map' or 'data-generating-theta'")
    _check_sampler_prior(problem, family)
    d_theta = problem.d_theta
    h = problem.h if h is None else h

    def inner_log(y, x, h_level):
        theta = problem.prior.transform(y[:, :d_theta])
        noise = _noise_values(problem, y[:, d_theta:])
        g_true = problem.model.evaluate(theta, problem.xi, h_level)
        y_data = g_true[:, None, :] + noise  # (B, N_e, d_y)
        b, k = x.shape[0], x.shape[1]
        if family == "plain":
            vartheta = problem.prior.transform(x.reshape(b * k, d_theta))
            g_in = problem.model.evaluate(vartheta, problem.xi, h_level)
            return _batch_loglik(problem, y_data, g_in.reshape(b, k, -1))
        if laplace_mode == "optimized-map":
            theta_hat, _ = _map_batch(problem, y_data, theta, h=h_level)
        else:
            theta_hat = theta
        cov_chol, log_det_cov = _laplace_batch(problem, theta_hat, h=h_level)
        z = inv_norm_cdf(x)  # (B, K, d_theta)
        vartheta = theta_hat[:, None, :] + np.einsum("bij,bkj->bki", cov_chol, z)
        g_in = problem.model.evaluate(
            vartheta.reshape(b * k, d_theta), problem.xi, h_level
        ).reshape(b, k, -1)
        ll = _batch_loglik(problem, y_data, g_in)
        log_prior = problem.prior.logpdf(vartheta)
        log_proposal = (
            -0.5 * (d_theta * _LOG_2PI + log_det_cov)[:, None]
            - 0.5 * np.einsum("bkj,bkj->bk", z, z)
        )
        return ll + log_prior - log_proposal

    gamma = getattr(problem.model, "gamma", 0.0)
    eta = getattr(problem.model, "eta", 0.0)
    return NestedProblem(
        d1=problem.d_outer,
        d2=problem.d_inner,
        inner=inner_log,
        outer_map="log",
        inner_is_log=True,
        h=h,
        eta=eta if eta else 1.0,
        gamma=gamma,
        name=f"eig-{family}",
    )


def _assemble_eig(problem: OEDProblem, term: EstimatorResult) -> EstimatorResult:
    entropy = closed_form_entropy_term(problem.n_experiments, problem.noise_variances)
    values = entropy - term.replicate_values
    return EstimatorResult(
        estimate=float(entropy - term.estimate),
        replicate_values=values,
        variance_of_mean=term.variance_of_mean,
        stderr=term.stderr,
        counts=term.counts,
        seed=term.seed,
        work=term.work,
        extras=dict(term.extras),
    )


def _run_nested(nested, N, M, S, R, sampler, key):
    sampler = _as_sampler(sampler)
    if sampler.kind == "mc" and S == 1 and R == 1:
        term = dlmc_estimate(nested, N, M, key)
        # fold the N per-sample values into a single replicate mean but keep
        # the sample-variance-based stderr
        term = EstimatorResult(
            estimate=term.estimate,
            replicate_values=np.array([term.estimate]),
            variance_of_mean=term.variance_of_mean,
            stderr=term.stderr,
            counts={"N": N, "M": M, "S": 1, "R": 1},
            seed=term.seed,
            work=term.work,
            extras=term.extras,
        )
        return term
    return rdlqmc_estimate(nested, N, M, S, R, key, sampler=sampler)


def eig_nested(
    problem: OEDProblem,
    N: int,
    M: int,
    S: int = 1,
    R: int = 1,
    sampler="rqmc-sobol-owen",
    key: RandomizationKey | None = None,
) -> EstimatorResult:
    """Double-loop EIG estimate: entropy term minus the nested log-marginal."""
    key = key or RandomizationKey(0)
    nested = build_nested_problem(problem, family="plain")
    term = _run_nested(nested, N, M, S, R, sampler, key)
    return _assemble_eig(problem, term)


def eig_importance_sampled(
    problem: OEDProblem,
    N: int,
    M: int,
    S: int = 1,
    R: int = 1,
    sampler="rqmc-sobol-owen",
    laplace_mode: str = "optimized-map",
    key: RandomizationKey | None = None,
) -> EstimatorResult:
    """Nested EIG with the inner integral importance-sampled from the
    per-datum Laplace surrogate."""
    key = key or RandomizationKey(0)
    nested = build_nested_problem(problem, family="is", laplace_mode=laplace_mode)
    term = _run_nested(nested, N, M, S, R, sampler, key)
    return _assemble_eig(problem, term)


def inner_replicate_spread(
    problem: OEDProblem,
    N: int,
    M: int,
    R: int,
    laplace_mode: str = "optimized-map",
    key: RandomizationKey | None = None,
) -> float:
    """Max over outer samples of the spread of R inner-rescramble estimates.

    Diagnostic for importance-sampling exactness: with an exact Gaussian
    posterior the weighted inner integrand is constant and the spread
    vanishes at any M.
    """
    key = key or RandomizationKey(0)
    nested = build_nested_problem(problem, family="is", laplace_mode=laplace_mode)
    params = default_sobol_params()
    sampler = _as_sampler("rqmc-sobol-owen")
    y = _outer_points(nested, N, 0, key, sampler, params)
    blocks = _inner_blocks(nested, 0, N, M, R, 0, key, sampler, params)
    blocks = blocks.reshape(N, R, M, nested.d2)
    per_rep = np.stack(
        [_outer_values(nested, y, blocks[:, j]) for j in range(R)], axis=1
    )  # (N, R)
    return float(np.max(per_rep.max(axis=1) - per_rep.min(axis=1)))


def eig_laplace_only(
    problem: OEDProblem,
    N: int,
    sampler="mc",
    key: RandomizationKey | None = None,
    s_replicates: int = 8,
) -> EstimatorResult:
    """Single-loop Laplace EIG: prior cross-entropy minus the Gaussian
    posterior entropy at prior samples (no inner loop).

    The posterior covariance is evaluated at each sampled parameter vector
    in place of an optimized mode.
    """
    key = key or RandomizationKey(0)
    sampler = _as_sampler(sampler)
    d = problem.d_theta

    def integrand(u):
        theta = problem.prior.transform(u)
        prec = _precision_batch(problem, theta, problem.h)
        try:
            l_prec = np.linalg.cholesky(prec)
        except np.linalg.LinAlgError:
            eig = np.linalg.eigvalsh(prec)
            bad = int(np.nonzero(eig[:, 0] <= 0)[0][0])
            raise LaplaceFitError(
                f"posterior precision not positive definite at sample {bad}",
                index=bad,
            ) from None
        log_det_prec = 2.0 * np.sum(
            np.log(np.diagonal(l_prec, axis1=1, axis2=2)), axis=1
        )
        return (
            0.5 * log_det_prec
            - 0.5 * d * _LOG_2PI
            - 0.5 * d
            - problem.prior.logpdf(theta)
        )

    work_factor = 1.0
    if problem.h is not None and getattr(problem.model, "gamma", 0.0) > 0:
        work_factor = problem.h ** (-problem.model.gamma)

    if sampler.kind == "mc":
        u = key.uniforms((N, d), salt="laplace")
        values = integrand(u)
        res = _make_result(values, {"N": N}, key, work=N * work_factor, divisor=N)
        return res
    if (N & (N - 1)) != 0:
        raise ValueError("N must be a power of two for the QMC sampler")
    params = default_sobol_params()
    base = sobol_sequence(params, d, int(math.log2(N)))
    means = []
    for s in range(s_replicates):
        pts = owen_scramble(base, key.child("laplace", s)).values
        means.append(float(np.mean(integrand(pts))))
    return _make_result(
        means, {"N": N, "S": s_replicates}, key, work=N * s_replicates * work_factor
    )


def eig_conjugate_oracle(prior_variances, noise_variances, jacobian, n_experiments: int) -> float:
    """Closed-form EIG for the linear-Gaussian model:
    0.5 * log det(I + N_e * Sigma_p J^T Sigma_eps^-1 J)."""
    sp = np.atleast_1d(np.asarray(prior_variances, dtype=np.float64))
    se = np.atleast_1d(np.asarray(noise_variances, dtype=np.float64))
    j = np.atleast_2d(np.asarray(jacobian, dtype=np.float64))
    if np.any(sp <= 0) or np.any(se <= 0):
        raise ValueError("variances must be positive")
    a = np.eye(sp.size) + n_experiments * np.diag(sp) @ (j.T / se) @ j
    sign, logdet = np.linalg.slogdet(a)
    if sign <= 0:
        raise ValueError("singular information matrix")
    return float(0.5 * logdet)


# ---------------------------------------------------------------------------
# Quadrature reference for small problems
# ---------------------------------------------------------------------------


def _prior_quadrature_axes(prior: PriorSpec, order: int):
    """Per-component nodes/weights integrating against the prior density."""
    axes = []
    gh_t, gh_w = np.polynomial.hermite.hermgauss(order)
    gl_t, gl_w = np.polynomial.legendre.leggauss(order)
    for comp in prior.components:
        if comp.kind == "uniform":
            nodes = comp.a + (comp.b - comp.a) * 0.5 * (gl_t + 1.0)
            weights = 0.5 * gl_w
        elif comp.kind == "normal":
            nodes = comp.a + comp.b * math.sqrt(2.0) * gh_t
            weights = gh_w / math.sqrt(math.pi)
        else:
            nodes = np.exp(comp.a + comp.b * math.sqrt(2.0) * gh_t)
            weights = gh_w / math.sqrt(math.pi)
        axes.append((nodes, weights))
    return axes


def _grid_from_axes(axes):
    node_grids = np.meshgrid(*[a[0] for a in axes], indexing="ij")
    weight_grids = np.meshgrid(*[a[1] for a in axes], indexing="ij")
    nodes = np.stack([g.ravel() for g in node_grids], axis=1)
    weights = np.stack([g.ravel() for g in weight_grids], axis=1).prod(axis=1)
    return nodes, weights


def eig_quadrature(
    problem: OEDProblem,
    order_theta: int = 24,
    order_noise: int = 32,
    order_inner: int = 64,
) -> float:
    """Deterministic tensor-quadrature EIG for small problems.

    Parameters integrate against the prior (Gauss-Hermite for normal and
    lognormal components, Gauss-Legendre for uniform); untruncated noise
    uses Gauss-Hermite while truncated noise maps Gauss-Legendre nodes
    through the truncated inverse CDF.  Limited to d_theta <= 2 and
    n_experiments * d_y <= 2.
    """
    if problem.d_theta > 2 or problem.n_experiments * problem.d_y > 2:
        raise ValueError("quadrature EIG limited to tiny problems")
    theta_nodes, theta_w = _grid_from_axes(
        _prior_quadrature_axes(problem.prior, order_theta)
    )
    sigma = np.sqrt(
        np.tile(problem.noise_variances, problem.n_experiments)
    )  # per noise coordinate
    if problem.truncation.enabled:
        # integrate the normalized truncated normal directly on [-c, c]
        from .stats import norm_cdf

        c = problem.truncation.radius
        z_norm = 2.0 * norm_cdf(c) - 1.0
        gl_t, gl_w = np.polynomial.legendre.leggauss(order_noise)
        z = c * gl_t
        dens = np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
        w = gl_w * c * dens / z_norm
        axes = [(z * s, w) for s in sigma]
    else:
        gh_t, gh_w = np.polynomial.hermite.hermgauss(order_noise)
        axes = [(math.sqrt(2.0) * s * gh_t, gh_w / math.sqrt(math.pi)) for s in sigma]
    noise_nodes, noise_w = _grid_from_axes(axes)

    inner_nodes, inner_w = _grid_from_axes(
        _prior_quadrature_axes(problem.prior, order_inner)
    )
    g_inner = problem.model.evaluate(inner_nodes, problem.xi, problem.h)
    log_w_inner = np.log(inner_w)

    entropy = closed_form_entropy_term(problem.n_experiments, problem.noise_variances)
    inv_s2 = 1.0 / problem.noise_variances
    const = _loglik_const(problem)
    total = 0.0
    ne, dy = problem.n_experiments, problem.d_y
    for t_idx in range(theta_nodes.shape[0]):
        g_t = problem.model.evaluate(theta_nodes[t_idx][None, :], problem.xi, problem.h)[0]
        y_data = g_t[None, None, :] + noise_nodes.reshape(-1, ne, dy)
        r = y_data[:, None, :, :] - g_inner[None, :, None, :]
        ll = const - 0.5 * np.einsum("bkij,j->bk", r * r, inv_s2)
        log_marg = _lse(ll + log_w_inner[None, :])
        total += theta_w[t_idx] * float(noise_w @ log_marg)
    return entropy - total


def _lse(a):
    m = a.max(axis=1, keepdims=True)
    return (m + np.log(np.sum(np.exp(a - m), axis=1, keepdims=True)))[:, 0]
