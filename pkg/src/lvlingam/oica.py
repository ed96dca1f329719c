"""Overcomplete ICA with known mixture-of-gaussians sources, fitted by EM.

Conditioning on which mixture component each source drew from makes the
observation a finite gaussian mixture, so the marginal likelihood is exact
once all component configurations are enumerated. At desk scale the
configuration count stays tiny, so no variational approximation is needed.
The mixing matrix is the only free parameter (plus, optionally, the sensor
noise variance); source distributions are known and fixed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from itertools import product

import numpy as np

from .dists import DisturbanceDist
from .errors import ConfigBudgetError, FitError
from .mixing import MixingBasis, align_columns, apply_alignment
from .model import DataMatrix
from .util import child_seed, make_rng, parallel_map

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class MogSource:
    """Zero-mean, unit-variance gaussian mixture for one independent source."""

    weights: tuple[float, ...]
    means: tuple[float, ...]
    variances: tuple[float, ...]

    def __post_init__(self):
        if not (len(self.weights) == len(self.means) == len(self.variances)):
            raise ValueError("weights, means, variances must have equal length")
        w = np.asarray(self.weights)
        m = np.asarray(self.means)
        v = np.asarray(self.variances)
        if len(w) < 1 or np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("weights must be positive and sum to 1")
        if np.any(v <= 0):
            raise ValueError("variances must be positive")
        if abs(float(w @ m)) > 1e-9:
            raise ValueError("source mean must be zero")
        var = float(w @ (m * m + v))
        if abs(var - 1.0) > 1e-6:
            raise ValueError("source variance must be 1 (unit-variance convention)")

    @property
    def n_components(self) -> int:
        return len(self.weights)

    @classmethod
    def standardized(cls, weights, means, variances) -> "MogSource":
        """Shift and scale an arbitrary mixture to zero mean, unit variance."""
        w = np.asarray(weights, dtype=float)
        m = np.asarray(means, dtype=float)
        v = np.asarray(variances, dtype=float)
        w = w / w.sum()
        m = m - float(w @ m)
        sd = math.sqrt(float(w @ (m * m + v)))
        return cls(tuple(w), tuple(m / sd), tuple(v / sd**2))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        idx = rng.choice(self.n_components, size=n, p=self.weights)
        m = np.asarray(self.means)[idx]
        sd = np.sqrt(np.asarray(self.variances)[idx])
        return rng.normal(m, sd)

    def to_json_obj(self) -> dict:
        return {
            "weights": list(self.weights),
            "means": list(self.means),
            "variances": list(self.variances),
        }


def _mog_arrays(dist: DisturbanceDist) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if dist.family == "gaussmix":
        p = np.asarray(dist.params).reshape(-1, 3)
        return p[:, 0], p[:, 1], p[:, 2]
    if dist.family == "sum":
        w = np.ones(1)
        m = np.zeros(1)
        v = np.zeros(1)
        for coeff, part in dist.components:
            pw, pm, pv = _mog_arrays(part)
            w = np.outer(w, pw).ravel()
            m = (m[:, None] + coeff * pm[None, :]).ravel()
            v = (v[:, None] + coeff**2 * pv[None, :]).ravel()
        return w, m, v
    raise ValueError(
        f"{dist.family!r} disturbance has no exact mixture-of-gaussians form"
    )


def mog_from_disturbance(dist: DisturbanceDist) -> MogSource:
    """Standardized mixture form of a gaussian-mixture-based disturbance."""
    w, m, v = _mog_arrays(dist)
    return MogSource.standardized(w, m, v)


@dataclass(frozen=True)
class OicaConfig:
    sensor_var: float = 1e-2
    update_sensor_var: bool = True
    sensor_var_floor: float = 1e-6
    max_iter: int = 500
    tol: float = 1e-7  # convergence threshold on per-sample log-likelihood change
    restarts: int = 10
    seed: int = 0
    max_configs: int = 1024

    def __post_init__(self):
        if self.sensor_var <= 0:
            raise ValueError("sensor noise variance must be positive")


@dataclass(eq=False)
class FitResult:
    basis: MixingBasis
    loglik: float
    loglik_path: tuple[float, ...]
    means: np.ndarray
    sensor_var: float
    converged: bool
    n_iter: int
    restart: int


def _config_table(
    sources: list[MogSource], max_configs: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-configuration (log weight, source means, source variances)."""
    total = math.prod(s.n_components for s in sources)
    if total > max_configs:
        raise ConfigBudgetError(
            f"{total} mixture configurations exceed the budget of {max_configs}"
        )
    logw, means, variances = [], [], []
    for combo in product(*(range(s.n_components) for s in sources)):
        logw.append(sum(math.log(s.weights[c]) for s, c in zip(sources, combo)))
        means.append([s.means[c] for s, c in zip(sources, combo)])
        variances.append([s.variances[c] for s, c in zip(sources, combo)])
    return np.array(logw), np.array(means), np.array(variances)


def _logsumexp(a: np.ndarray, axis: int) -> np.ndarray:
    m = np.max(a, axis=axis, keepdims=True)
    out = m + np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True))
    return np.squeeze(out, axis=axis)


def _log_marginals(
    x: np.ndarray,
    a: np.ndarray,
    logw: np.ndarray,
    mq: np.ndarray,
    vq: np.ndarray,
    sensor_var: float,
) -> np.ndarray:
    """Log joint density of each sample under each configuration, (n, Q)."""
    n, d = x.shape
    out = np.empty((n, len(logw)))
    chunk = max(1, 2_000_000 // max(n * d, 1))  # bound the (q, n, d) buffer
    for lo in range(0, len(logw), chunk):
        hi = min(len(logw), lo + chunk)
        cov = np.einsum("dk,qk,ek->qde", a, vq[lo:hi], a)
        cov += sensor_var * np.eye(d)[None, :, :]
        sign, logdet = np.linalg.slogdet(cov)
        if np.any(sign <= 0) or not np.all(np.isfinite(logdet)):
            raise np.linalg.LinAlgError("configuration covariance not SPD")
        ci = np.linalg.inv(cov)
        diff = x[None, :, :] - (mq[lo:hi] @ a.T)[:, None, :]
        quad = ((diff @ ci) * diff).sum(axis=-1)
        out[:, lo:hi] = (
            logw[lo:hi][:, None] - 0.5 * (d * LOG_2PI + logdet[:, None] + quad)
        ).T
    return out


def loglik(
    basis: MixingBasis,
    sources: list[MogSource],
    data: DataMatrix,
    sensor_var: float,
    max_configs: int = 1024,
) -> float:
    """Exact marginal log-likelihood of the data under x = A e + noise."""
    if len(sources) != basis.shape[1]:
        raise ValueError("need one source distribution per basis column")
    if data.columns != basis.row_ids:
        raise ValueError("data columns do not match basis rows")
    logw, mq, vq = _config_table(sources, max_configs)
    lm = _log_marginals(data.values, basis.matrix, logw, mq, vq, sensor_var)
    return float(_logsumexp(lm, axis=1).sum())


def _em_once(
    x: np.ndarray,
    a0: np.ndarray,
    logw: np.ndarray,
    mq: np.ndarray,
    vq: np.ndarray,
    config: OicaConfig,
) -> tuple[np.ndarray, float, float, list[float], bool, int]:
    n, d = x.shape
    k = a0.shape[1]
    a = a0.copy()
    s2 = config.sensor_var
    path: list[float] = []
    sum_xx = float(np.sum(x * x))
    converged = False

    for it in range(config.max_iter):
        lm = _log_marginals(x, a, logw, mq, vq, s2)
        ll_n = _logsumexp(lm, axis=1)
        ll = float(ll_n.sum())
        if not np.isfinite(ll):
            raise np.linalg.LinAlgError("log-likelihood diverged")
        path.append(ll)
        if len(path) > 1 and ll - path[-2] < config.tol * n:
            converged = True
            break
        resp = np.exp(lm - ll_n[:, None])

        # posterior source moments, batched over configurations
        vinv = 1.0 / vq  # (Q, K)
        prec = (a.T @ a / s2)[None, :, :] + vinv[:, :, None] * np.eye(k)[None, :, :]
        s_q = np.linalg.inv(prec)  # (Q, K, K)
        g_q = s_q @ (a.T / s2)[None, :, :]  # (Q, K, d)
        h_q = np.einsum("qij,qj->qi", s_q, vinv * mq)  # (Q, K)

        n_q = resp.sum(axis=0)  # (Q,)
        s1 = x.T @ resp  # (d, Q)
        sx2 = x.T[None, :, :] @ (resp.T[:, :, None] * x[None, :, :])  # (Q, d, d)
        gs1 = np.einsum("qkd,dq->qk", g_q, s1)  # (Q, K)

        c1 = np.einsum("dq,qk->dk", s1, h_q) + np.einsum("qde,qke->dk", sx2, g_q)
        c2 = (
            np.einsum("q,qij->ij", n_q, s_q)
            + np.einsum("q,qi,qj->ij", n_q, h_q, h_q)
            + np.einsum("qi,qj->ij", h_q, gs1)
            + np.einsum("qi,qj->ij", gs1, h_q)
            + np.einsum("qkd,qde,qme->km", g_q, sx2, g_q)
        )
        a = np.linalg.solve(c2, c1.T).T
        if config.update_sensor_var:
            s2 = (sum_xx - float(np.trace(a @ c1.T))) / (n * d)
            s2 = max(s2, config.sensor_var_floor)
    return a, s2, path[-1], path, converged, len(path)


def fit(
    data: DataMatrix,
    sources: list[MogSource],
    config: OicaConfig,
    init: "MixingBasis | None" = None,
) -> FitResult:
    """Estimate the mixing matrix by multi-restart EM; keeps the best run.

    Data is centered internally; the subtracted means are reported in the
    result. When `init` is given, restart 0 starts from it and any remaining
    restarts stay random.
    """
    n, d = data.values.shape
    k = len(sources)
    xbar = data.values.mean(axis=0)
    x = data.values - xbar[None, :]
    logw, mq, vq = _config_table(sources, config.max_configs)
    init_scale = math.sqrt(float(np.var(x, axis=0).sum()) / (d * k)) or 1.0

    def one_restart(r: int):
        rng = make_rng(child_seed(config.seed, 0, r))
        if r == 0 and init is not None:
            a0 = init.matrix.copy()
        else:
            a0 = rng.normal(0.0, init_scale, size=(d, k))
        try:
            return _em_once(x, a0, logw, mq, vq, config)
        except np.linalg.LinAlgError:
            return None

    results = parallel_map(one_restart, list(range(config.restarts)))
    best_r, best = -1, None
    for r, res in enumerate(results):
        if res is not None and (best is None or res[2] > best[2]):
            best_r, best = r, res
    if best is None:
        raise FitError("all EM restarts hit degenerate posteriors")
    a, s2, ll, path, converged, n_iter = best
    return FitResult(
        basis=MixingBasis(data.columns, a),
        loglik=ll,
        loglik_path=tuple(path),
        means=xbar,
        sensor_var=s2,
        converged=converged,
        n_iter=n_iter,
        restart=best_r,
    )


def bootstrap_fit(
    data: DataMatrix,
    sources: list[MogSource],
    config: OicaConfig,
    k: int,
    full_fit: "FitResult | None" = None,
):
    """Row-resampled refits, warm-started from and aligned to the full-data fit."""
    from .estimate import BasisEnsemble  # deferred: estimate builds on mixing

    if k < 2:
        raise ValueError("k must be >= 2")
    if full_fit is None:
        full_fit = fit(data, sources, config)
    n = data.n

    def one_member(i: int):
        rng = make_rng(child_seed(config.seed, 1, i))
        idx = rng.integers(0, n, size=n)
        resampled = DataMatrix(data.columns, data.values[idx])
        member_seed = int(child_seed(config.seed, 2, i).generate_state(1)[0])
        cfg = replace(config, restarts=1, seed=member_seed)
        try:
            res = fit(resampled, sources, cfg, init=full_fit.basis)
        except FitError:
            # warm start failed; one random-restart attempt before giving up
            cfg = replace(cfg, restarts=2)
            try:
                res = fit(resampled, sources, cfg)
            except FitError:
                return None
        return apply_alignment(res.basis, align_columns(full_fit.basis, res.basis))

    members = [m for m in parallel_map(one_member, list(range(k))) if m is not None]
    if len(members) < 2:
        raise FitError("fewer than two bootstrap members converged")
    return BasisEnsemble(tuple(members), 0)
