"""Shared fixtures and independent oracles used across the test suite."""

from __future__ import annotations

from itertools import permutations

import numpy as np
import pytest

import lvlingam as lv
from lvlingam import dists


# ---------------------------------------------------------------------------
# model fixtures


def mediated_latent_model() -> lv.LvModel:
    """Eight-variable fixture with three latents, two of them irrelevant.

    x6 only mediates x2/x4 onto x8 and x7 is a childless latent; x4 is a
    genuine confounder. Canonicalization must keep exactly x4.
    """
    observed = {1, 2, 3, 5, 8}
    variables = tuple(lv.Variable(i, i in observed) for i in range(1, 9))
    edges = (
        lv.Edge(2, 6, 2.0),
        lv.Edge(4, 6, 4.0),
        lv.Edge(4, 1, 2.0),
        lv.Edge(5, 1, 3.0),
        lv.Edge(6, 8, 3.0),
        lv.Edge(4, 3, -8.0),
        lv.Edge(1, 3, -5.0),
        lv.Edge(1, 7, -7.0),
    )
    noise = {i: dists.laplace(1.0) for i in range(1, 9)}
    return lv.LvModel(variables, edges, noise)


def reduced_mediated_model() -> lv.LvModel:
    """The hand-reduced form of mediated_latent_model (what canonicalize must hit)."""
    observed = {1, 2, 3, 5, 8}
    ids = (1, 2, 3, 4, 5, 8)
    variables = tuple(lv.Variable(i, i in observed) for i in ids)
    edges = (
        lv.Edge(4, 1, 2.0),
        lv.Edge(5, 1, 3.0),
        lv.Edge(4, 3, -8.0),
        lv.Edge(1, 3, -5.0),
        lv.Edge(2, 8, 6.0),
        lv.Edge(4, 8, 12.0),
    )
    noise = {i: dists.laplace(1.0) for i in ids}
    noise[8] = dists.weighted_sum(
        [(3.0, dists.laplace(1.0)), (1.0, dists.laplace(1.0))]
    )
    return lv.LvModel(variables, edges, noise)


def simple_confounder_model() -> lv.LvModel:
    """x1 = h + e1, x2 = 0.8 x1 + h + e2, unit variances."""
    return lv.LvModel(
        (lv.Variable(1, True), lv.Variable(2, True), lv.Variable(3, False)),
        (lv.Edge(3, 1, 1.0), lv.Edge(3, 2, 1.0), lv.Edge(1, 2, 0.8)),
        {i: dists.laplace(1.0) for i in (1, 2, 3)},
    )


@pytest.fixture
def fig_model() -> lv.LvModel:
    return mediated_latent_model()


def random_valid_model(seed: int, n_obs=(3, 6), n_hid=(0, 2)) -> lv.LvModel:
    rng = np.random.Generator(np.random.Philox(seed))
    n_observed = int(rng.integers(n_obs[0], n_obs[1] + 1))
    n_hidden = int(rng.integers(n_hid[0], n_hid[1] + 1))
    # confounders need >= 2 observed descendants each; keep graphs dense
    # enough that regeneration terminates even at the smallest sizes
    lo = 0.5 if n_hidden * 2 >= n_observed else 0.3
    config = lv.GenerationConfig(
        n_observed=n_observed,
        n_hidden=n_hidden,
        edge_prob=float(rng.uniform(lo, 0.8)),
        max_retries=3000,
    )
    return lv.random_model(config, seed)


# ---------------------------------------------------------------------------
# oracles


def path_effect_oracle(model: lv.LvModel, src: int, dst: int) -> float:
    """Total effect as an explicit sum over all directed paths (DFS)."""
    if src == dst:
        return 1.0
    nbrs: dict[int, list[tuple[int, float]]] = {v: [] for v in model.ids}
    for e in model.edges:
        nbrs[e.src].append((e.dst, e.weight))
    total = 0.0

    def walk(v: int, prod: float) -> None:
        nonlocal total
        for w, wt in nbrs[v]:
            if w == dst:
                total += prod * wt
            walk(w, prod * wt)

    walk(src, 1.0)
    return total


def brute_lower_triangular(pattern: np.ndarray) -> bool:
    """Literal search over all row and column permutations (small n only)."""
    p = np.asarray(pattern, dtype=bool)
    n = p.shape[0]
    idx = np.arange(n)
    for rp in permutations(range(n)):
        pm = p[list(rp), :]
        for cp in permutations(range(n)):
            pc = pm[:, list(cp)]
            if np.all(pc[idx, idx]) and not np.any(np.triu(pc, 1)):
                return True
    return False


def rowperm_lower_triangular(pattern: np.ndarray) -> bool:
    """Exhaustive over row orders; column positions are then forced.

    With rows fixed, a column sitting at position j needs zeros above j and a
    nonzero at j, so its position must be its first nonzero row; feasibility
    is that map being a bijection.
    """
    p = np.asarray(pattern, dtype=bool)
    n = p.shape[0]
    target = np.arange(n)
    for rp in permutations(range(n)):
        pm = p[list(rp), :]
        if not pm.any(axis=0).all():
            return False  # an all-zero column can never host a diagonal
        firsts = pm.argmax(axis=0)
        if np.array_equal(np.sort(firsts), target):
            return True
    return False


def mog_logpdf(source: lv.MogSource, x: np.ndarray) -> np.ndarray:
    w = np.asarray(source.weights)
    m = np.asarray(source.means)
    v = np.asarray(source.variances)
    comp = (
        np.log(w)[None, :]
        - 0.5 * np.log(2 * np.pi * v)[None, :]
        - 0.5 * (x[:, None] - m[None, :]) ** 2 / v[None, :]
    )
    mx = comp.max(axis=1, keepdims=True)
    return (mx + np.log(np.exp(comp - mx).sum(axis=1, keepdims=True))).ravel()


def quadrature_loglik(
    basis: lv.MixingBasis,
    sources: list[lv.MogSource],
    data: lv.DataMatrix,
    sensor_var: float,
    nodes: int = 80,
    span: float = 9.0,
) -> float:
    """Marginal log-likelihood by tensor-product Gauss-Legendre quadrature.

    Integrates the sensor-noise gaussian against the product source density
    on [-span, span]^k directly; independent of the configuration-sum path.
    """
    from numpy.polynomial.legendre import leggauss

    a = basis.matrix
    d, k = a.shape
    pts, wts = leggauss(nodes)
    pts = pts * span
    logw1 = np.log(wts * span)

    sgrids = np.meshgrid(*([pts] * k), indexing="ij")
    wgrids = np.meshgrid(*([logw1] * k), indexing="ij")
    s = np.stack([g.ravel() for g in sgrids], axis=1)  # (G, k)
    logw = sum(w.ravel() for w in wgrids)
    for i in range(k):
        logw = logw + mog_logpdf(sources[i], s[:, i])

    mean = s @ a.T  # (G, d)
    const = -0.5 * d * np.log(2 * np.pi * sensor_var)
    total = 0.0
    for row in data.values:
        quad = ((row[None, :] - mean) ** 2).sum(axis=1) / sensor_var
        contrib = logw + const - 0.5 * quad
        mx = contrib.max()
        total += mx + np.log(np.exp(contrib - mx).sum())
    return float(total)
