"""Gaussian Markov random field over node attributes.

Attributes (feature columns plus an outcome column) are modeled as a joint
zero-mean Gaussian whose precision couples attributes on the same node
through an SPD matrix and penalizes non-smoothness of each attribute over
the graph through a positive per-attribute strength times the normalized
Laplacian:

    precision = coupling (x) I_n  +  diag(homophily) (x) N

acting on the attribute-major vectorization (node u, attribute i) -> i*n + u.

Likelihood evaluation offers three routes:

* ``dense``      -- explicit precision matrix and Cholesky (small problems),
* ``spectral``   -- eigenbasis of N turns the precision into n independent
                    (p+1)x(p+1) blocks; exact and fast at moderate n,
* ``stochastic`` -- Lanczos quadrature for the log-determinant and
                    Hutchinson probes with CG solves for trace terms.
"""

import json
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import linalg
from .graph import AttributeMatrix, apply_normalized_laplacian, normalized_laplacian_dense
from .validation import check_finite, check_matrix, check_vector

# Problems with total dimension n(p+1) at or below this use exact dense paths.
DENSE_LIMIT = 2000
# Spectral (eigenbasis) paths are preferred up to this node count.
SPECTRAL_LIMIT = 4000


class FitError(RuntimeError):
    """Raised when every fitting restart diverged."""


class GmrfParams:
    """Model parameters: attribute coupling matrix and homophily strengths.

    Parameters
    ----------
    coupling : (p+1, p+1) symmetric positive definite array
        Precision among attributes on a single node.
    homophily : (p+1,) positive array
        Smoothness strength of each attribute over the graph.
    """

    def __init__(self, coupling, homophily):
        coupling = check_matrix(coupling, name="coupling")
        if coupling.shape[0] != coupling.shape[1]:
            raise ValueError("coupling must be square")
        scale = max(1.0, np.abs(coupling).max())
        if np.abs(coupling - coupling.T).max() > 1e-12 * scale:
            raise ValueError("coupling must be symmetric")
        coupling = (coupling + coupling.T) / 2.0
        eigs = np.linalg.eigvalsh(coupling)
        if eigs[0] <= 0:
            raise ValueError(f"coupling must be positive definite (min eigenvalue {eigs[0]:.3e})")
        homophily = check_vector(homophily, coupling.shape[0], "homophily")
        if np.any(homophily <= 0):
            raise ValueError("homophily strengths must be strictly positive")
        check_finite(coupling, "coupling")
        check_finite(homophily, "homophily")
        self.coupling = coupling
        self.homophily = homophily

    @classmethod
    def from_scalars(cls, coupling, homophily):
        """Single-attribute (outcome only) parameters."""
        return cls(np.array([[float(coupling)]]), np.array([float(homophily)]))

    @property
    def p(self):
        """Number of feature attributes."""
        return self.coupling.shape[0] - 1

    @property
    def num_attributes(self):
        return self.coupling.shape[0]

    @property
    def omega(self):
        """Optimal smoothing strength for the outcome column."""
        return self.homophily[-1] / self.coupling[-1, -1]

    @property
    def beta(self):
        """Regression coefficients implied by the outcome row of the coupling."""
        return -self.coupling[:-1, -1] / self.coupling[-1, -1]

    def to_dict(self):
        return {
            "H": [[float(x) for x in row] for row in self.coupling],
            "h": [float(x) for x in self.homophily],
            "p": self.p,
        }

    @classmethod
    def from_dict(cls, data):
        params = cls(np.array(data["H"], dtype=float), np.array(data["h"], dtype=float))
        if "p" in data and int(data["p"]) != params.p:
            raise ValueError("declared p is inconsistent with the coupling shape")
        return params

    def __repr__(self):
        return f"GmrfParams(p={self.p}, omega={self.omega:.4g})"


def params_to_json(params):
    """Value-exact JSON serialization (floats printed at full precision)."""
    return json.dumps(params.to_dict(), sort_keys=True, indent=2)


def params_from_json(text):
    return GmrfParams.from_dict(json.loads(text))


def _check_shapes(params, g, attrs):
    if attrs.shape != (g.n, params.num_attributes):
        raise ValueError(
            f"attribute values must have shape {(g.n, params.num_attributes)}, got {attrs.shape}"
        )


def _attribute_values(attrs):
    if isinstance(attrs, AttributeMatrix):
        return attrs.values
    return check_matrix(attrs, name="attributes")


def precision_matvec(params, g, v):
    """Apply the joint precision to an attribute-major vector of length n(p+1)."""
    dim = g.n * params.num_attributes
    v = check_vector(v, dim)
    a = v.reshape((g.n, params.num_attributes), order="F")
    out = a @ params.coupling + apply_normalized_laplacian(g, a) * params.homophily[None, :]
    return out.reshape(-1, order="F")


def precision_operator(params, g):
    return linalg.LinearOperator(
        g.n * params.num_attributes, lambda v: precision_matvec(params, g, v)
    )


def precision_dense(params, g):
    """Explicit joint precision matrix; desk-scale sizes only."""
    n_mat = normalized_laplacian_dense(g)
    return np.kron(params.coupling, np.eye(g.n)) + np.kron(np.diag(params.homophily), n_mat)


def log_potential(params, g, attrs):
    """Quadratic energy of an attribute assignment under the model.

    Equals half the on-node coupling energy plus half the per-attribute
    graph smoothness energy, i.e. half the precision quadratic form.
    """
    a = _attribute_values(attrs)
    _check_shapes(params, g, a)
    on_node = float(np.sum((a @ params.coupling) * a))
    smooth = float(params.homophily @ np.einsum("ui,ui->i", a, apply_normalized_laplacian(g, a)))
    return 0.5 * (on_node + smooth)


def laplacian_spectrum(g):
    """Eigendecomposition ``(eigenvalues, eigenvectors)`` of the normalized Laplacian."""
    lam, vecs = np.linalg.eigh(normalized_laplacian_dense(g))
    return np.clip(lam, 0.0, None), vecs


def _spectral_blocks(params, lam):
    # One (p+1)x(p+1) precision block per Laplacian eigenvalue.
    return params.coupling[None, :, :] + lam[:, None, None] * np.diag(params.homophily)[None, :, :]


def sample(params, g, seed, method="auto"):
    """Draw one attribute matrix from the joint model; deterministic given seed.

    Columns are not re-centered: the model is already zero-mean. The dense
    route factorizes the full precision; the spectral route draws one small
    block per Laplacian eigenvalue. Both produce the same distribution.
    """
    dim = g.n * params.num_attributes
    if method == "auto":
        method = "dense" if dim <= DENSE_LIMIT else "spectral"
    rng = np.random.default_rng(seed)
    if method == "dense":
        gamma = precision_dense(params, g)
        chol = scipy.linalg.cholesky(gamma, lower=True)
        z = rng.standard_normal(dim)
        vec = scipy.linalg.solve_triangular(chol.T, z, lower=False)
        values = vec.reshape((g.n, params.num_attributes), order="F")
    elif method == "spectral":
        lam, vecs = laplacian_spectrum(g)
        blocks = _spectral_blocks(params, lam)
        chols = np.linalg.cholesky(blocks)
        z = rng.standard_normal((g.n, params.num_attributes))
        w = np.linalg.solve(np.transpose(chols, (0, 2, 1)), z[:, :, None])[:, :, 0]
        values = vecs @ w
    else:
        raise ValueError(f"unknown sampling method {method!r}")
    return AttributeMatrix(values)


def sample_conditional(params, g, observed_columns, observed_values, seed):
    """Draw unobserved attribute columns given fully observed ones.

    ``observed_columns`` lists attribute indices; ``observed_values`` holds
    the corresponding n-row columns. Dense-only (the conditional is formed
    explicitly).
    """
    dim = g.n * params.num_attributes
    if dim > DENSE_LIMIT:
        raise ValueError(f"conditional sampling is dense-only (dimension {dim} > {DENSE_LIMIT})")
    obs_cols = sorted(set(int(c) for c in observed_columns))
    if obs_cols and (obs_cols[0] < 0 or obs_cols[-1] >= params.num_attributes):
        raise ValueError("observed column index out of range")
    obs_vals = check_matrix(observed_values, g.n, len(obs_cols), "observed_values")
    values = np.empty((g.n, params.num_attributes))
    values[:, obs_cols] = obs_vals
    free_cols = [i for i in range(params.num_attributes) if i not in obs_cols]
    if not free_cols:
        return AttributeMatrix(values)
    gamma = precision_dense(params, g)
    obs_idx = np.concatenate([i * g.n + np.arange(g.n) for i in obs_cols]) if obs_cols else np.array([], dtype=int)
    obs_idx = np.sort(obs_idx)
    cond_mean, cond_cov = linalg.dense_conditional_gaussian(
        np.zeros(dim), gamma, obs_idx, obs_vals.reshape(-1, order="F")
    )
    rng = np.random.default_rng(seed)
    chol = np.linalg.cholesky(cond_cov + 1e-14 * np.eye(cond_cov.shape[0]))
    draw = cond_mean + chol @ rng.standard_normal(cond_mean.size)
    values[:, free_cols] = draw.reshape((g.n, len(free_cols)), order="F")
    return AttributeMatrix(values)


def _quadratic_stats(g, a):
    # Data-dependent pieces of the likelihood; constant during optimization.
    gram = a.T @ a
    smooth = np.einsum("ui,ui->i", a, apply_normalized_laplacian(g, a))
    return gram, smooth


_LOG_2PI = np.log(2.0 * np.pi)


def nll(params, g, attrs, method="auto"):
    """Negative log-likelihood of an attribute matrix.

    Dense and spectral routes are exact and include the ``n(p+1) log(2 pi)``
    constant; the stochastic route estimates the log-determinant with
    Lanczos quadrature and omits the constant.
    """
    a = _attribute_values(attrs)
    _check_shapes(params, g, a)
    dim = g.n * params.num_attributes
    if method == "auto":
        method = "dense" if dim <= DENSE_LIMIT else "spectral"
    gram, smooth = _quadratic_stats(g, a)
    quad = float(np.sum(params.coupling * gram) + params.homophily @ smooth)
    if method == "dense":
        logdet = linalg.cholesky_logdet(precision_dense(params, g))
        return 0.5 * (quad - logdet + dim * _LOG_2PI)
    if method == "spectral":
        lam, _ = laplacian_spectrum(g)
        _, logdets = np.linalg.slogdet(_spectral_blocks(params, lam))
        return 0.5 * (quad - float(logdets.sum()) + dim * _LOG_2PI)
    if method == "stochastic":
        logdet = linalg.slq_logdet(precision_operator(params, g))
        return 0.5 * (quad - logdet)
    raise ValueError(f"unknown likelihood method {method!r}")


def nll_gradient(params, g, attrs, method="auto", slq_config=None, cg_config=None):
    """Gradient of :func:`nll` with respect to the parameters.

    Returns ``(d_coupling, d_homophily)``. Off-diagonal entries of
    ``d_coupling`` accumulate the derivative over the symmetric (i, j) and
    (j, i) pair, matching a perturbation that keeps the coupling symmetric;
    diagonal entries are plain partials.
    """
    a = _attribute_values(attrs)
    _check_shapes(params, g, a)
    dim = g.n * params.num_attributes
    if method == "auto":
        method = "dense" if dim <= DENSE_LIMIT else "spectral"
    gram, smooth = _quadratic_stats(g, a)
    k = params.num_attributes
    if method == "dense":
        gamma = precision_dense(params, g)
        factor = scipy.linalg.cho_factor(gamma)
        inv = scipy.linalg.cho_solve(factor, np.eye(dim))
        blocks = inv.reshape(k, g.n, k, g.n)
        trace_coupling = np.einsum("iuju->ij", blocks)
        n_mat = normalized_laplacian_dense(g)
        trace_homophily = np.einsum("iuiv,uv->i", blocks, n_mat)
    elif method == "spectral":
        lam, _ = laplacian_spectrum(g)
        inv_blocks = np.linalg.inv(_spectral_blocks(params, lam))
        trace_coupling = inv_blocks.sum(axis=0)
        trace_homophily = np.einsum("k,kii->i", lam, inv_blocks)
    elif method == "stochastic":
        slq_config = slq_config or linalg.SlqConfig()
        cg_config = cg_config or linalg.CgConfig(rel_tolerance=1e-8)
        op = precision_operator(params, g)
        trace_coupling = np.zeros((k, k))
        trace_homophily = np.zeros(k)
        for rng in linalg.probe_generators(slq_config.seed, slq_config.num_probes):
            z = linalg.rademacher(rng, dim)
            w = linalg.conjugate_gradient(op, z, cg_config)
            z_mat = z.reshape((g.n, k), order="F")
            w_mat = w.reshape((g.n, k), order="F")
            trace_coupling += w_mat.T @ z_mat
            trace_homophily += np.einsum(
                "ui,ui->i", w_mat, apply_normalized_laplacian(g, z_mat)
            )
        trace_coupling /= slq_config.num_probes
        trace_homophily /= slq_config.num_probes
    else:
        raise ValueError(f"unknown likelihood method {method!r}")
    d_independent = 0.5 * (gram - trace_coupling)
    d_coupling = d_independent + d_independent.T - np.diag(np.diag(d_independent))
    d_homophily = 0.5 * (smooth - trace_homophily)
    return d_coupling, d_homophily


@dataclass
class FitConfig:
    restarts: int = 32
    steps: int = 3000
    learning_rate: float = 1e-3
    weight_decay: float = 2.5e-4
    seed: int = 0
    optimizer: str = "adamw"  # "adamw" | "gd" (backtracking descent, monotone)
    init_log_diag_range: float = 1.0
    init_offdiag_scale: float = 0.5
    init_log_homophily_range: float = field(default=float(np.log(10.0)))

    def __post_init__(self):
        if self.restarts < 1 or self.steps < 1:
            raise ValueError("restarts and steps must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be nonnegative")
        if self.optimizer not in ("adamw", "gd"):
            raise ValueError("optimizer must be 'adamw' or 'gd'")


@dataclass
class FitResult:
    params: "GmrfParams"
    nll: float
    objective_trace: np.ndarray  # best restart's objective per step
    restart_objectives: np.ndarray  # final objective per restart (NaN = diverged)
    best_restart: int


class _SpectralWorkspace:
    """Precomputed pieces for repeated likelihood evaluation on fixed data.

    Objective is the proportional likelihood 0.5 * (quadratic - logdet);
    constants are added back when reporting the final value.
    """

    def __init__(self, g, a):
        self.n = g.n
        self.k = a.shape[1]
        self.gram, self.smooth = _quadratic_stats(g, a)
        self.lam, _ = laplacian_spectrum(g)

    def objective_batch(self, couplings, homophilies):
        # couplings: (R, k, k); homophilies: (R, k)
        blocks = couplings[:, None, :, :] + (
            self.lam[None, :, None, None] * homophilies[:, None, None, :] * np.eye(self.k)
        )
        sign, logdets = np.linalg.slogdet(blocks)
        bad = np.any(sign <= 0, axis=1)
        quad = np.einsum("rij,ij->r", couplings, self.gram) + homophilies @ self.smooth
        obj = 0.5 * (quad - logdets.sum(axis=1))
        obj[bad] = np.nan
        return obj

    def objective_and_gradient_batch(self, couplings, homophilies):
        blocks = couplings[:, None, :, :] + (
            self.lam[None, :, None, None] * homophilies[:, None, None, :] * np.eye(self.k)
        )
        sign, logdets = np.linalg.slogdet(blocks)
        bad = np.any(sign <= 0, axis=1)
        blocks[bad] = np.eye(self.k)  # keep inv() defined; entries masked below
        inv_blocks = np.linalg.inv(blocks)
        quad = np.einsum("rij,ij->r", couplings, self.gram) + homophilies @ self.smooth
        obj = 0.5 * (quad - logdets.sum(axis=1))
        d_coupling = 0.5 * (self.gram[None, :, :] - inv_blocks.sum(axis=1))
        d_homophily = 0.5 * (
            self.smooth[None, :] - np.einsum("k,rkii->ri", self.lam, inv_blocks)
        )
        obj[bad] = np.nan
        d_coupling[bad] = np.nan
        d_homophily[bad] = np.nan
        return obj, d_coupling, d_homophily


class _Parameterization:
    """Unconstrained coordinates: lower-triangular factor of the coupling with
    log-diagonal, and log homophily strengths."""

    def __init__(self, k):
        self.k = k
        self.tril_rows, self.tril_cols = np.tril_indices(k, k=-1)
        self.num_tril = len(self.tril_rows)
        self.dim = self.num_tril + 2 * k

    def random_init(self, rng, cfg, restarts):
        theta = np.empty((restarts, self.dim))
        theta[:, : self.num_tril] = rng.normal(0.0, cfg.init_offdiag_scale, (restarts, self.num_tril))
        theta[:, self.num_tril : self.num_tril + self.k] = rng.uniform(
            -cfg.init_log_diag_range, cfg.init_log_diag_range, (restarts, self.k)
        )
        theta[:, self.num_tril + self.k :] = rng.uniform(
            -cfg.init_log_homophily_range, cfg.init_log_homophily_range, (restarts, self.k)
        )
        return theta

    def unpack(self, theta):
        # theta: (R, dim) -> factors (R, k, k), couplings, homophilies
        restarts = theta.shape[0]
        factors = np.zeros((restarts, self.k, self.k))
        factors[:, self.tril_rows, self.tril_cols] = theta[:, : self.num_tril]
        diag = np.exp(theta[:, self.num_tril : self.num_tril + self.k])
        factors[:, np.arange(self.k), np.arange(self.k)] = diag
        couplings = factors @ np.transpose(factors, (0, 2, 1))
        homophilies = np.exp(theta[:, self.num_tril + self.k :])
        return factors, couplings, homophilies

    def gradient(self, theta, factors, homophilies, d_coupling, d_homophily):
        # Chain rule through coupling = C C^T and the log parameterizations.
        d_factor = 2.0 * d_coupling @ factors
        grad = np.empty_like(theta)
        grad[:, : self.num_tril] = d_factor[:, self.tril_rows, self.tril_cols]
        diag_idx = np.arange(self.k)
        grad[:, self.num_tril : self.num_tril + self.k] = (
            d_factor[:, diag_idx, diag_idx] * factors[:, diag_idx, diag_idx]
        )
        grad[:, self.num_tril + self.k :] = d_homophily * homophilies
        return grad


def fit(g, attrs, cfg=None):
    """Maximum-likelihood parameters by multi-restart first-order optimization.

    Optimizes the unconstrained parameterization with decoupled weight
    decay (AdamW by default; a monotone backtracking descent mode is
    available) and returns the restart with the lowest likelihood
    objective, ties broken by restart index. Raises FitError if every
    restart diverged.
    """
    cfg = cfg or FitConfig()
    a = _attribute_values(attrs)
    if a.ndim != 2 or a.shape[0] != g.n:
        raise ValueError("attribute values must have one row per node")
    work = _SpectralWorkspace(g, a)
    param = _Parameterization(a.shape[1])
    rng = np.random.default_rng(cfg.seed)
    theta = param.random_init(rng, cfg, cfg.restarts)
    if cfg.optimizer == "adamw":
        trace = _optimize_adamw(work, param, theta, cfg)
    else:
        trace = _optimize_backtracking(work, param, theta, cfg)
    finals = trace[-1]
    if np.all(np.isnan(finals)):
        raise FitError(
            f"all {cfg.restarts} restarts diverged "
            f"(seed {cfg.seed}, {cfg.steps} steps, lr {cfg.learning_rate})"
        )
    best = int(np.nanargmin(finals))
    _, couplings, homophilies = param.unpack(theta[best : best + 1])
    params = GmrfParams(couplings[0], homophilies[0])
    value = nll(params, g, a, method="spectral" if g.n * a.shape[1] > DENSE_LIMIT else "dense")
    return FitResult(
        params=params,
        nll=value,
        objective_trace=trace[:, best].copy(),
        restart_objectives=finals.copy(),
        best_restart=best,
    )


def _optimize_adamw(work, param, theta, cfg):
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    trace = np.empty((cfg.steps, theta.shape[0]))
    alive = np.ones(theta.shape[0], dtype=bool)
    for step in range(1, cfg.steps + 1):
        factors, couplings, homophilies = param.unpack(theta)
        obj, d_coupling, d_homophily = work.objective_and_gradient_batch(couplings, homophilies)
        grad = param.gradient(theta, factors, homophilies, d_coupling, d_homophily)
        newly_dead = alive & (np.isnan(obj) | np.isnan(grad).any(axis=1))
        alive &= ~newly_dead
        trace[step - 1] = np.where(alive, obj, np.nan)
        grad = np.where(alive[:, None], grad, 0.0)
        m = beta1 * m + (1 - beta1) * grad
        v = beta2 * v + (1 - beta2) * grad**2
        m_hat = m / (1 - beta1**step)
        v_hat = v / (1 - beta2**step)
        update = cfg.learning_rate * (m_hat / (np.sqrt(v_hat) + eps) + cfg.weight_decay * theta)
        theta -= np.where(alive[:, None], update, 0.0)
    return trace


def _optimize_backtracking(work, param, theta, cfg):
    # Plain gradient descent with per-restart step halving; accepted steps
    # never increase the objective.
    trace = np.empty((cfg.steps, theta.shape[0]))
    for r in range(theta.shape[0]):
        th = theta[r : r + 1]
        step_size = cfg.learning_rate
        factors, couplings, homophilies = param.unpack(th)
        obj, d_coupling, d_homophily = work.objective_and_gradient_batch(couplings, homophilies)
        current = obj[0]
        if np.isnan(current):
            trace[:, r] = np.nan
            continue
        for step in range(cfg.steps):
            grad = param.gradient(th, factors, homophilies, d_coupling, d_homophily)
            if cfg.weight_decay:
                grad = grad + cfg.weight_decay * th
            accepted = False
            for _ in range(40):
                candidate = th - step_size * grad
                factors_c, couplings_c, homophilies_c = param.unpack(candidate)
                obj_c, d_coupling_c, d_homophily_c = work.objective_and_gradient_batch(
                    couplings_c, homophilies_c
                )
                if not np.isnan(obj_c[0]) and obj_c[0] <= current:
                    th = candidate
                    current = obj_c[0]
                    factors, couplings, homophilies = factors_c, couplings_c, homophilies_c
                    d_coupling, d_homophily = d_coupling_c, d_homophily_c
                    accepted = True
                    step_size *= 1.5
                    break
                step_size *= 0.5
            trace[step, r] = current
            if not accepted:
                trace[step:, r] = current
                break
        theta[r] = th[0]
    return trace


def synthetic_params(p, base_homophily, seed):
    """Random parameters following the synthetic-data recipe.

    The coupling is the inverse of a slightly regularized Gram matrix of
    p+1 standard normal vectors; each homophily strength is the base value
    scaled by ten to a uniform power in [-0.5, 0.5).
    """
    if p < 0:
        raise ValueError("p must be nonnegative")
    if base_homophily <= 0:
        raise ValueError("base_homophily must be positive")
    rng = np.random.default_rng(seed)
    k = p + 1
    z = rng.standard_normal((k, k))
    gram = z @ z.T
    coupling = np.linalg.inv(gram + 0.01 * np.eye(k))
    exponents = rng.uniform(-0.5, 0.5, size=k)
    homophily = base_homophily * 10.0**exponents
    return GmrfParams(coupling, homophily)


class GaussianMarkovRandomField:
    """Estimator-style wrapper around maximum-likelihood fitting.

    Follows the fit/score/sample pattern: ``fit(graph, attributes)`` learns
    ``params_``; ``score`` returns the negative log-likelihood of held
    data; ``sample`` draws new attribute matrices from the learned model.
    """

    def __init__(
        self,
        restarts=32,
        steps=3000,
        learning_rate=1e-3,
        weight_decay=2.5e-4,
        seed=0,
        optimizer="adamw",
    ):
        self.restarts = restarts
        self.steps = steps
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.seed = seed
        self.optimizer = optimizer

    def get_params(self, deep=True):
        return {
            "restarts": self.restarts,
            "steps": self.steps,
            "learning_rate": self.learning_rate,
            "weight_decay": self.weight_decay,
            "seed": self.seed,
            "optimizer": self.optimizer,
        }

    def set_params(self, **kwargs):
        for key, value in kwargs.items():
            if not hasattr(self, key):
                raise ValueError(f"unknown parameter {key!r}")
            setattr(self, key, value)
        return self

    def fit(self, graph, attributes):
        cfg = FitConfig(
            restarts=self.restarts,
            steps=self.steps,
            learning_rate=self.learning_rate,
            weight_decay=self.weight_decay,
            seed=self.seed,
            optimizer=self.optimizer,
        )
        result = fit(graph, attributes, cfg)
        self.graph_ = graph
        self.params_ = result.params
        self.result_ = result
        return self

    def score(self, attributes, method="auto"):
        """Negative log-likelihood of attributes under the fitted parameters."""
        return nll(self.params_, self.graph_, attributes, method=method)

    def sample(self, seed, method="auto"):
        return sample(self.params_, self.graph_, seed, method=method)


def marginal_precision_dense(params, g):
    """Outcome-block precision after eliminating all feature variables.

    Forms the Schur complement of the feature block in the joint precision;
    generally dense, so only useful at small scale or as an oracle.
    """
    dim = g.n * params.num_attributes
    gamma = precision_dense(params, g)
    q = np.arange(params.p * g.n)
    p_idx = np.arange(params.p * g.n, dim)
    if params.p == 0:
        return gamma
    gamma_qq = gamma[np.ix_(q, q)]
    gamma_pq = gamma[np.ix_(p_idx, q)]
    try:
        factor = scipy.linalg.cho_factor(gamma_qq)
    except scipy.linalg.LinAlgError as exc:
        raise ValueError("feature-block precision is singular") from exc
    return gamma[np.ix_(p_idx, p_idx)] - gamma_pq @ scipy.linalg.cho_solve(factor, gamma_pq.T)
