"""Single-loop and nested (double-loop) estimators.

The nested estimators average an outer map f of an inner-integral estimate:
plain Monte Carlo uses iid points for both loops; the randomized
quasi-Monte Carlo variant scrambles one digital sequence per outer
randomization s and draws an independent inner scramble for every
(outer sample, inner replicate) pair, which is what keeps the inner error
from correlating across outer samples.

Replicate semantics: replicate_values always hold the S outer-randomization
means (or the per-sample values for unreplicated MC estimators); inner
randomizations R reduce inner bias and variance but never enter the
replicate variance.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .lds import (
    DigitalSequence,
    RandomizationKey,
    SobolParams,
    _owen_lanes,
    _scramble_values,
    fold_index_array,
    lattice_points,
    load_direction_numbers,
    owen_scramble,
    random_shift,
    sobol_sequence,
)
from .stats import log_sum_exp, replicate_variance

__all__ = [
    "SamplerKind",
    "NestedProblem",
    "EstimatorResult",
    "InnerUnderflowError",
    "AccuracyWarning",
    "mc_estimate",
    "rqmc_estimate",
    "dlmc_estimate",
    "rdlqmc_estimate",
    "tensor_quadrature_reference",
]

_SAMPLER_KINDS = ("mc", "rqmc-sobol-owen", "rqmc-lattice-shift")
_CHUNK = 4096

_default_sobol: SobolParams | None = None


def default_sobol_params() -> SobolParams:
    global _default_sobol
    if _default_sobol is None:
        _default_sobol = load_direction_numbers()
    return _default_sobol


def thread_count() -> int:
    """Worker cap from NESTIQ_THREADS (default 1)."""
    try:
        return max(1, int(os.environ.get("NESTIQ_THREADS", "1")))
    except ValueError:
        return 1


def _map_ordered(fn, items):
    """Apply fn to items, possibly in parallel, always reducing in order."""
    items = list(items)
    n = thread_count()
    if n <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=min(n, len(items))) as ex:
        return list(ex.map(fn, items))


class InnerUnderflowError(ArithmeticError):
    """Inner mean was nonpositive in linear form; supply the integrand in log form."""


class AccuracyWarning(UserWarning):
    pass


@dataclass
class SamplerKind:
    """Point-set family for an estimator loop.

    ``generating_vectors`` maps dimension -> vector for the lattice sampler
    (generating vectors are user-supplied; no construction is performed).
    """

    kind: str = "rqmc-sobol-owen"
    generating_vectors: dict | None = None

    def __post_init__(self):
        if self.kind not in _SAMPLER_KINDS:
            raise ValueError(f"unknown sampler kind {self.kind!r}")

    @property
    def is_randomized_qmc(self) -> bool:
        return self.kind != "mc"

    def vector_for(self, dim: int) -> np.ndarray:
        if not self.generating_vectors or dim not in self.generating_vectors:
            raise ValueError(
                f"lattice sampler needs a generating vector for dimension {dim}"
            )
        return np.asarray(self.generating_vectors[dim], dtype=np.float64)


def _as_sampler(sampler) -> SamplerKind:
    return sampler if isinstance(sampler, SamplerKind) else SamplerKind(str(sampler))


@dataclass
class NestedProblem:
    """Outer map f of an inner integral of g over the unit cube.

    ``inner(y, x, h)`` takes outer rows y of shape (B, d1) and inner blocks x
    of shape (B, K, d2) and returns (B, K) values; ``inner_is_log`` marks the
    return value as log g.  ``eta``/``gamma`` describe the discretization
    order and evaluation-cost exponent when g is approximated at level h.
    """

    d1: int
    d2: int
    inner: callable
    outer_map: object = "identity"  # "identity" | "log" | callable
    inner_is_log: bool = False
    inner_linear: callable | None = None
    h: float | None = None
    eta: float = 1.0
    gamma: float = 0.0
    name: str = ""

    def __post_init__(self):
        if self.d1 < 1 or self.d2 < 1:
            raise ValueError("dimensions must be positive")
        if isinstance(self.outer_map, str) and self.outer_map not in ("identity", "log"):
            raise ValueError("outer_map must be 'identity', 'log', or a callable")
        if self.h is not None and self.h <= 0:
            raise ValueError("discretization level h must be positive")
        if self.inner_linear is not None:
            if not self.inner_is_log:
                raise ValueError("inner_linear only accompanies a log-form inner")
            self._probe_log_consistency()

    def _probe_log_consistency(self):
        """Both supplied forms must agree, exp(log g) = g, on a probe grid."""
        probe = RandomizationKey(0, tag="log-form-probe")
        y = probe.uniforms((4, self.d1), salt="y")
        x = probe.uniforms((4, 4, self.d2), salt="x")
        log_vals = np.asarray(self.inner(y, x, self.h), dtype=np.float64)
        lin_vals = np.asarray(self.inner_linear(y, x, self.h), dtype=np.float64)
        scale = np.maximum(np.abs(lin_vals), 1e-300)
        if np.max(np.abs(np.exp(log_vals) - lin_vals) / scale) > 1e-10:
            raise ValueError("log-form and linear-form inner integrands disagree")

    def work_factor(self) -> float:
        return 1.0 if self.h is None else float(self.h) ** (-self.gamma)

    def apply_outer(self, values: np.ndarray) -> np.ndarray:
        if self.outer_map == "identity":
            return values
        if self.outer_map == "log":
            return np.log(values)
        return self.outer_map(values)


@dataclass
class EstimatorResult:
    """Estimate with replicate values, variance of the mean, and work."""

    estimate: float
    replicate_values: np.ndarray
    variance_of_mean: float | None
    stderr: float | None
    counts: dict
    seed: int
    work: float
    extras: dict = field(default_factory=dict)


def _make_result(values, counts, key: RandomizationKey, work, divisor=None, extras=None):
    """Assemble a result; variance of the mean needs >= 2 replicate values."""
    values = np.asarray(values, dtype=np.float64)
    estimate = float(values.mean())
    var = None
    if values.size >= 2:
        var = replicate_variance(values) if divisor is None else float(
            np.var(values, ddof=1) / divisor
        )
    stderr = math.sqrt(var) if var is not None else None
    return EstimatorResult(
        estimate=estimate,
        replicate_values=values,
        variance_of_mean=var,
        stderr=stderr,
        counts=dict(counts),
        seed=key.seed,
        work=float(work),
        extras=extras or {},
    )


def _check_pow2(value: int, name: str):
    if value < 1 or (value & (value - 1)) != 0:
        raise ValueError(f"{name} must be a power of two, got {value}")


# ---------------------------------------------------------------------------
# Single-loop estimators
# ---------------------------------------------------------------------------


def mc_estimate(integrand, dim: int, M: int, key: RandomizationKey) -> EstimatorResult:
    """Plain Monte Carlo mean of a vectorized integrand over (0,1)^dim."""
    if M < 1:
        raise ValueError("M must be >= 1")
    points = key.uniforms((M, dim), salt="mc")
    values = np.asarray(integrand(points), dtype=np.float64)
    return _make_result(values, {"M": M}, key, work=M, divisor=M)


def _replicate_points(dim, M, r, key, sampler: SamplerKind, params):
    if sampler.kind == "mc":
        return key.child("rep", r).uniforms((M, dim), salt="mc")
    if sampler.kind == "rqmc-sobol-owen":
        base = sobol_sequence(params, dim, int(math.log2(M)))
        return owen_scramble(base, key.child("rep", r)).values
    base = lattice_points(sampler.vector_for(dim), M)
    return random_shift(base, key.child("rep", r)).values


def rqmc_estimate(
    integrand,
    dim: int,
    M: int,
    R: int,
    key: RandomizationKey,
    sampler="rqmc-sobol-owen",
    params: SobolParams | None = None,
) -> EstimatorResult:
    """Randomized QMC mean over R independent randomizations of one point set."""
    sampler = _as_sampler(sampler)
    if R < 1:
        raise ValueError("R must be >= 1")
    if sampler.kind == "rqmc-sobol-owen":
        _check_pow2(M, "M")
        params = params or default_sobol_params()
    means = [
        float(np.mean(integrand(_replicate_points(dim, M, r, key, sampler, params))))
        for r in range(R)
    ]
    return _make_result(means, {"M": M, "R": R}, key, work=M * R)


# ---------------------------------------------------------------------------
# Nested estimators
# ---------------------------------------------------------------------------


def _outer_values(problem: NestedProblem, y: np.ndarray, x: np.ndarray) -> np.ndarray:
    """f of the inner-block mean for each outer row; x is (B, K, d2)."""
    raw = np.asarray(problem.inner(y, x, problem.h), dtype=np.float64)
    k = x.shape[1]
    if problem.inner_is_log:
        log_mean = log_sum_exp(raw, axis=1) - math.log(k)
        if problem.outer_map == "log":
            return log_mean
        return problem.apply_outer(np.exp(log_mean))
    mean = raw.mean(axis=1)
    if problem.outer_map == "log" and np.any(mean <= 0.0):
        raise InnerUnderflowError(
            "inner mean <= 0 under outer log; supply the inner integrand in log "
            "form (inner_is_log=True) to average in log space"
        )
    return problem.apply_outer(mean)


def dlmc_estimate(problem: NestedProblem, N: int, M: int, key: RandomizationKey) -> EstimatorResult:
    """Double-loop Monte Carlo with iid uniform points in both loops."""
    if N < 1 or M < 1:
        raise ValueError("N and M must be >= 1")

    def run_chunk(bounds):
        lo, hi = bounds
        y = key.child("outer", 0).uniforms((hi - lo, problem.d1), salt=f"y{lo}")
        x = key.child("inner", 0).uniforms((hi - lo, M, problem.d2), salt=f"x{lo}")
        return _outer_values(problem, y, x)

    bounds = [(lo, min(lo + _CHUNK, N)) for lo in range(0, N, _CHUNK)]
    values = np.concatenate(_map_ordered(run_chunk, bounds))
    work = N * M * problem.work_factor()
    return _make_result(values, {"N": N, "M": M}, key, work=work, divisor=N)


def _outer_points(problem, N, s, key, sampler: SamplerKind, params):
    if sampler.kind == "mc":
        return key.child("outer", s).uniforms((N, problem.d1), salt="y")
    if sampler.kind == "rqmc-sobol-owen":
        base = sobol_sequence(params, problem.d1, int(math.log2(N)))
        return owen_scramble(base, key.child("outer", s)).values
    base = lattice_points(sampler.vector_for(problem.d1), N)
    return random_shift(base, key.child("outer", s)).values


def _inner_blocks(problem, n_lo, n_hi, M, R, s, key, sampler: SamplerKind, params):
    """Inner points for outer samples [n_lo, n_hi): shape (B, R*M, d2).

    Each (s, n, r) triple gets an independent randomization of the same base
    point set.
    """
    b = n_hi - n_lo
    if sampler.kind == "mc":
        u = key.child("inner-mc", s).uniforms((b, R * M, problem.d2), salt=f"x{n_lo}")
        return u
    n_idx = np.arange(n_lo, n_hi, dtype=np.uint64)[:, None]
    r_idx = np.arange(R, dtype=np.uint64)[None, :]
    roots = fold_index_array(fold_index_array(key.subroot("inner", s), n_idx), r_idx)
    if sampler.kind == "rqmc-sobol-owen":
        base = sobol_sequence(params, problem.d2, int(math.log2(M)))
        tree, fill = _owen_lanes(roots, problem.d2)
        pts = _scramble_values(base.values, tree, fill)  # (B, R, M, d2)
    else:
        base = lattice_points(sampler.vector_for(problem.d2), M).values
        shift_bits = fold_index_array(
            roots[..., None, None],
            np.arange(problem.d2, dtype=np.uint64)[None, None, None, :],
        )
        shifts = (shift_bits >> np.uint64(11)).astype(np.float64) * 2.0**-53
        pts = np.mod(base[None, None, :, :] + shifts, 1.0)
        pts = np.clip(pts, 2.0**-64, float(np.nextafter(1.0, 0.0)))
    return pts.reshape(b, R * M, problem.d2)


def rdlqmc_estimate(
    problem: NestedProblem,
    N: int,
    M: int,
    S: int,
    R: int,
    key: RandomizationKey,
    sampler="rqmc-sobol-owen",
    params: SobolParams | None = None,
) -> EstimatorResult:
    """Nested estimator with S outer and R-per-sample inner randomizations.

    With S = R = 1 this is the single-randomization production estimator;
    replicate_values are the S outer-randomization means.
    """
    sampler = _as_sampler(sampler)
    if S < 1 or R < 1:
        raise ValueError("S and R must be >= 1")
    if sampler.kind == "rqmc-sobol-owen":
        _check_pow2(N, "N")
        _check_pow2(M, "M")
        params = params or default_sobol_params()
        if max(problem.d1, problem.d2) > params.dimension:
            raise ValueError("Sobol parameter table has too few dimensions")

    def run_chunk(task):
        s, lo, hi = task
        y = _outer_points(problem, N, s, key, sampler, params)[lo:hi]
        x = _inner_blocks(problem, lo, hi, M, R, s, key, sampler, params)
        return s, _outer_values(problem, y, x)

    tasks = [
        (s, lo, min(lo + _CHUNK, N))
        for s in range(S)
        for lo in range(0, N, _CHUNK)
    ]
    chunks = _map_ordered(run_chunk, tasks)
    sums = np.zeros(S)
    for s, vals in chunks:
        sums[s] += vals.sum()
    replicate_means = sums / N
    work = N * M * S * R * problem.work_factor()
    return _make_result(
        replicate_means, {"N": N, "M": M, "S": S, "R": R}, key, work=work
    )


# ---------------------------------------------------------------------------
# Quadrature oracle
# ---------------------------------------------------------------------------


def _unit_gauss_legendre(order: int):
    t, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (t + 1.0), 0.5 * w


def _tensor_grid(order: int, dim: int):
    x, w = _unit_gauss_legendre(order)
    nodes = np.stack(
        [g.ravel() for g in np.meshgrid(*([x] * dim), indexing="ij")], axis=1
    )
    weights = np.stack(
        [g.ravel() for g in np.meshgrid(*([w] * dim), indexing="ij")], axis=1
    ).prod(axis=1)
    return nodes, weights


def _quadrature_value(problem: NestedProblem, order_outer: int, order_inner: int) -> float:
    y_nodes, y_w = _tensor_grid(order_outer, problem.d1)
    x_nodes, x_w = _tensor_grid(order_inner, problem.d2)
    k = x_nodes.shape[0]
    total = 0.0
    for lo in range(0, y_nodes.shape[0], _CHUNK):
        hi = min(lo + _CHUNK, y_nodes.shape[0])
        y = y_nodes[lo:hi]
        x = np.broadcast_to(x_nodes, (hi - lo, k, problem.d2))
        raw = np.asarray(problem.inner(y, x, problem.h), dtype=np.float64)
        if problem.inner_is_log:
            log_inner = log_sum_exp(raw + np.log(x_w)[None, :], axis=1)
            fv = log_inner if problem.outer_map == "log" else problem.apply_outer(
                np.exp(log_inner)
            )
        else:
            fv = problem.apply_outer(raw @ x_w)
        total += float(fv @ y_w[lo:hi])
    return total


def tensor_quadrature_reference(
    problem: NestedProblem, order_outer: int, order_inner: int
) -> float:
    """Nested tensor Gauss-Legendre oracle for small problems (d1, d2 <= 3).

    Evaluates at the given orders and at doubled orders; warns if the two
    differ by 1e-10 or more, and returns the doubled-order value.
    """
    if problem.d1 > 3 or problem.d2 > 3:
        raise ValueError("quadrature oracle limited to d1 <= 3 and d2 <= 3")
    if not (1 <= order_outer <= 64 and 1 <= order_inner <= 64):
        raise ValueError("orders must be in [1, 64]")
    coarse = _quadrature_value(problem, order_outer, order_inner)
    fine = _quadrature_value(problem, 2 * order_outer, 2 * order_inner)
    if abs(fine - coarse) >= 1e-10:
        warnings.warn(
            f"quadrature not converged: |change on order doubling| = "
            f"{abs(fine - coarse):.3e}",
            AccuracyWarning,
            stacklevel=2,
        )
    return fine
