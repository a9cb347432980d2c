"""Numerical kernels: CG, Lanczos quadrature, trace estimation, dense Gaussian oracle.

All stochastic kernels are pure functions of their inputs and the seed;
per-probe generators are derived by seed-sequence spawning so results do
not depend on evaluation order.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .validation import check_node_index_set, check_vector, complement_index_set

_LANCZOS_BREAKDOWN_TOL = 1e-12


class ConvergenceError(RuntimeError):
    """An iterative solver failed to reach its tolerance within budget."""


class LinearOperator:
    """Symmetric linear action ``v -> M v`` of dimension ``dim``.

    The caller supplies the action; symmetry is assumed, not enforced
    (see ``hutchinson_trace(validate=True)`` for a spot check).
    """

    def __init__(self, dim, matvec):
        if dim < 1:
            raise ValueError("operator dimension must be positive")
        self.dim = int(dim)
        self._matvec = matvec

    def apply(self, v):
        v = check_vector(v, self.dim)
        out = np.asarray(self._matvec(v), dtype=float)
        if out.shape != (self.dim,):
            raise ValueError("operator action returned a wrong-shaped vector")
        return out

    def __call__(self, v):
        return self.apply(v)


def aslinearoperator(m):
    """Wrap a dense array, sparse matrix, or LinearOperator."""
    if isinstance(m, LinearOperator):
        return m
    if sp.issparse(m):
        return LinearOperator(m.shape[0], lambda v: m @ v)
    arr = np.asarray(m, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError("expected a square matrix")
    return LinearOperator(arr.shape[0], lambda v: arr @ v)


@dataclass
class CgConfig:
    rel_tolerance: float = 1e-10
    max_iterations: int | None = None  # None -> 10 * dimension

    def __post_init__(self):
        if self.rel_tolerance <= 0:
            raise ValueError("rel_tolerance must be positive")


@dataclass
class SlqConfig:
    num_probes: int = 32
    lanczos_steps: int = 40
    seed: int = 0

    def __post_init__(self):
        if self.num_probes < 1:
            raise ValueError("num_probes must be at least 1")
        if self.lanczos_steps < 1:
            raise ValueError("lanczos_steps must be at least 1")


def probe_generators(seed, count):
    """Independent per-probe generators; stable under any evaluation order."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(count)]


def rademacher(rng, size):
    return rng.integers(0, 2, size=size).astype(float) * 2.0 - 1.0


def conjugate_gradient(op, b, cfg=None):
    """Solve ``M x = b`` for symmetric positive definite ``M``.

    Terminates when ``||M x - b|| <= rel_tolerance * ||b||``; raises
    ConvergenceError (reporting the final relative residual) if the
    iteration budget runs out first.
    """
    op = aslinearoperator(op)
    cfg = cfg or CgConfig()
    b = check_vector(b, op.dim, "b")
    b_norm = np.linalg.norm(b)
    if b_norm == 0.0:
        return np.zeros(op.dim)
    max_iterations = cfg.max_iterations or 10 * op.dim
    x = np.zeros(op.dim)
    r = b.copy()
    p = r.copy()
    rs = r @ r
    threshold = cfg.rel_tolerance * b_norm
    for _ in range(max_iterations):
        if np.sqrt(rs) <= threshold:
            return x
        mp = op(p)
        alpha = rs / (p @ mp)
        x += alpha * p
        r -= alpha * mp
        rs_next = r @ r
        p = r + (rs_next / rs) * p
        rs = rs_next
    if np.sqrt(rs) <= threshold:
        return x
    raise ConvergenceError(
        f"CG did not converge in {max_iterations} iterations "
        f"(relative residual {np.sqrt(rs) / b_norm:.3e})"
    )


def lanczos_tridiagonal(op, start, steps):
    """Lanczos tridiagonalization without reorthogonalization.

    Returns ``(alphas, betas)``: the diagonal and off-diagonal of the
    tridiagonal matrix. Stops early if an off-diagonal coefficient drops
    below the breakdown tolerance (an invariant subspace was found).
    """
    op = aslinearoperator(op)
    q = check_vector(start, op.dim, "start").copy()
    norm = np.linalg.norm(q)
    if norm == 0.0:
        raise ValueError("Lanczos start vector must be nonzero")
    q /= norm
    q_prev = np.zeros(op.dim)
    alphas, betas = [], []
    beta = 0.0
    for _ in range(min(steps, op.dim)):
        w = op(q) - beta * q_prev
        alpha = q @ w
        w -= alpha * q
        alphas.append(alpha)
        beta = np.linalg.norm(w)
        if beta < _LANCZOS_BREAKDOWN_TOL:
            break
        betas.append(beta)
        q_prev, q = q, w / beta
    return np.array(alphas), np.array(betas[: len(alphas) - 1])


def slq_logdet_samples(op, cfg=None):
    """Per-probe log-determinant estimates via Lanczos quadrature.

    Each Rademacher probe ``z`` contributes ``n * sum_i tau_i^2 log(theta_i)``
    where ``(theta, tau)`` are Ritz values of the probe's tridiagonal matrix
    and the first components of its eigenvectors.
    """
    op = aslinearoperator(op)
    cfg = cfg or SlqConfig()
    samples = np.empty(cfg.num_probes)
    for k, rng in enumerate(probe_generators(cfg.seed, cfg.num_probes)):
        z = rademacher(rng, op.dim)
        alphas, betas = lanczos_tridiagonal(op, z, cfg.lanczos_steps)
        theta, vecs = scipy.linalg.eigh_tridiagonal(alphas, betas)
        if np.any(theta <= 0):
            raise ValueError("operator is not positive definite (nonpositive Ritz value)")
        tau_sq = vecs[0, :] ** 2
        samples[k] = op.dim * float(tau_sq @ np.log(theta))
    return samples


def slq_logdet(op, cfg=None):
    """Stochastic Lanczos quadrature estimate of ``log det M`` for SPD ``M``."""
    return float(np.mean(slq_logdet_samples(op, cfg)))


def hutchinson_trace(op, cfg=None, validate=False):
    """Rademacher trace estimate ``mean_z z^T M z``.

    With ``validate=True`` the operator's symmetry is spot-checked on
    random vector pairs before estimating.
    """
    op = aslinearoperator(op)
    cfg = cfg or SlqConfig()
    if validate:
        rng = np.random.default_rng(np.random.SeedSequence(cfg.seed).spawn(1)[0])
        for _ in range(3):
            u = rng.standard_normal(op.dim)
            v = rng.standard_normal(op.dim)
            left, right = u @ op(v), v @ op(u)
            if abs(left - right) > 1e-8 * max(1.0, abs(left), abs(right)):
                raise ValueError("operator failed the symmetry check")
    total = 0.0
    for rng in probe_generators(cfg.seed, cfg.num_probes):
        z = rademacher(rng, op.dim)
        total += z @ op(z)
    return total / cfg.num_probes


def cholesky_logdet(m):
    """Exact ``log det`` of a dense SPD matrix via Cholesky."""
    chol = scipy.linalg.cholesky(np.asarray(m, dtype=float), lower=True)
    return 2.0 * float(np.sum(np.log(np.diag(chol))))


def dense_conditional_gaussian(mean, precision, observed_idx, observed_vals):
    """Condition a Gaussian given in precision form on observed coordinates.

    For the partition into unobserved ``P`` and observed ``Q``, returns the
    conditional mean ``mean_P - Gamma_PP^{-1} Gamma_PQ (vals - mean_Q)`` and
    covariance ``Gamma_PP^{-1}``. With nothing observed this is the joint
    mean and full covariance.
    """
    prec = np.asarray(precision, dtype=float)
    if prec.ndim != 2 or prec.shape[0] != prec.shape[1]:
        raise ValueError("precision must be a square matrix")
    dim = prec.shape[0]
    mean = check_vector(mean, dim, "mean")
    obs = check_node_index_set(observed_idx, dim, "observed_idx")
    vals = check_vector(observed_vals, obs.size, "observed_vals")
    free = complement_index_set(obs, dim)
    gamma_pp = prec[np.ix_(free, free)]
    try:
        factor = scipy.linalg.cho_factor(gamma_pp)
    except scipy.linalg.LinAlgError as exc:
        raise ValueError("conditional precision block is singular or indefinite") from exc
    cond_cov = scipy.linalg.cho_solve(factor, np.eye(free.size))
    cond_cov = (cond_cov + cond_cov.T) / 2.0
    if obs.size:
        gamma_pq = prec[np.ix_(free, obs)]
        shift = scipy.linalg.cho_solve(factor, gamma_pq @ (vals - mean[obs]))
        cond_mean = mean[free] - shift
    else:
        cond_mean = mean[free].copy()
    return cond_mean, cond_cov
