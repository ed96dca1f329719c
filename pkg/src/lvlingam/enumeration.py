"""Enumeration of every canonical model compatible with an exact-zero basis.

Given an overcomplete mixing basis whose structural zeros are marked, each
way of designating columns as hidden sources is tried in turn: the basis is
augmented with the latent identity block, tested for lower-triangular
permutability, normalized, and inverted into a candidate direct-effect
matrix, which is kept only if it is stable (pattern and path structure
agree) and canonical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .canonical import (
    CanonicalModel,
    causally_equivalent,
    is_canonical,
    observationally_equivalent,
)
from .dists import unspecified
from .errors import EmptyResultError
from .mixing import MixingBasis, ZeroPattern, can_permute_lower_triangular
from .model import Edge, LvModel, Variable, validate

STRUCT_TOL = 1e-9
DEDUP_TOL = 1e-9
# diagonal entries smaller than this make a classification numerically unusable
DIAG_EPS = 1e-12


@dataclass(frozen=True)
class EquivalenceSet:
    """Canonical models compatible with one basis, with their classifications.

    classifications[k] holds the input-basis column indices designated as
    hidden sources for models[k].
    """

    models: tuple[CanonicalModel, ...]
    classifications: tuple[tuple[int, ...], ...]

    def __len__(self) -> int:
        return len(self.models)


def classification_count(n_observed: int, n_hidden: int) -> int:
    """Number of hidden-vs-observed column designations to try."""
    if n_observed < 1 or n_hidden < 0:
        raise ValueError("need n_observed >= 1 and n_hidden >= 0")
    if n_observed + n_hidden > 20:
        raise ValueError("refusing more than 20 sources (count would overflow sanity)")
    return math.comb(n_observed + n_hidden, n_hidden)


def _path_closure(support: np.ndarray) -> np.ndarray:
    """Transitive closure: entry (i, j) true iff a path j -> i exists."""
    reach = support.copy()
    while True:
        nxt = reach | (reach @ support)
        if np.array_equal(nxt, reach):
            return reach
        reach = nxt


def _try_classification(
    a: np.ndarray,
    nonzero: np.ndarray,
    row_ids: tuple[int, ...],
    mu: np.ndarray,
    hidden_cols: tuple[int, ...],
    struct_tol: float,
) -> "LvModel | None":
    n_rows, n_cols = a.shape
    n_h = len(hidden_cols)
    m = n_h + n_rows  # total variables; equals n_cols

    obs_cols = [j for j in range(n_cols) if j not in hidden_cols]
    col_order = list(hidden_cols) + obs_cols

    # augment with the latent top block: identity over hidden columns, zeros
    aug = np.zeros((m, n_cols))
    aug[:n_h, :n_h] = np.eye(n_h)
    aug[n_h:, :] = a[:, col_order]
    aug_nz = np.zeros((m, n_cols), dtype=bool)
    aug_nz[:n_h, :n_h] = np.eye(n_h, dtype=bool)
    aug_nz[n_h:, :] = nonzero[:, col_order]

    ok, rperm, cperm = can_permute_lower_triangular(aug_nz)
    if not ok:
        return None

    # The triangular matching assigns each column to the variable (row) whose
    # disturbance it carries; the matching is unique when it exists.
    col_of_var = {rperm[k]: cperm[k] for k in range(m)}

    divisors = np.empty(m)
    norm = np.empty_like(aug)
    for v in range(m):
        col = col_of_var[v]
        d = aug[v, col]
        if abs(d) < DIAG_EPS:
            return None
        divisors[v] = d
        norm[:, col] = aug[:, col] / d

    mmat = norm[:, [col_of_var[v] for v in range(m)]]
    try:
        b = np.eye(m) - np.linalg.inv(mmat)
    except np.linalg.LinAlgError:
        return None
    b[np.abs(b) < struct_tol] = 0.0
    np.fill_diagonal(b, 0.0)

    # stability: the source of variable j reaches variable i (per the zero
    # pattern) exactly when a directed path j -> i exists, or i == j
    patt = aug_nz[:, [col_of_var[v] for v in range(m)]]
    expected = _path_closure(b != 0.0) | np.eye(m, dtype=bool)
    if not np.array_equal(patt, expected):
        return None

    # hidden sign convention: largest-magnitude child weight positive
    for h in range(n_h):
        col = b[:, h]
        nz = np.nonzero(col)[0]
        if nz.size and col[nz[np.argmax(np.abs(col[nz]))]] < 0:
            b[:, h] = -col

    hid_base = max(row_ids) + 1
    var_ids = [hid_base + k for k in range(n_h)] + list(row_ids)

    obs_slice = slice(n_h, m)
    b_oo = b[obs_slice, obs_slice]
    consts = (np.eye(n_rows) - b_oo) @ mu

    variables = tuple(
        Variable(var_ids[v], False, 0.0) for v in range(n_h)
    ) + tuple(
        Variable(var_ids[n_h + k], True, float(consts[k])) for k in range(n_rows)
    )
    edges = tuple(
        Edge(var_ids[j], var_ids[i], float(b[i, j]))
        for i, j in zip(*np.nonzero(b))
    )
    disturbances = {
        var_ids[v]: unspecified(1.0 if v < n_h else float(divisors[v] ** 2))
        for v in range(m)
    }
    model = LvModel(variables, edges, disturbances)
    if validate(model):
        return None
    ok, _ = is_canonical(model)
    if not ok:
        return None
    return model


def enumerate_models(
    basis: MixingBasis,
    zero: ZeroPattern,
    means: dict[int, float],
    struct_tol: float = STRUCT_TOL,
    dedup_tol: float = DEDUP_TOL,
) -> EquivalenceSet:
    """All observationally equivalent canonical models compatible with `basis`.

    Classifications are iterated in lexicographic order of the hidden column
    index sets; accepted models that duplicate (are causally and
    observationally equivalent to) an earlier one are dropped.

    Raises EmptyResultError when no classification yields a stable canonical
    model, which signals an inconsistent basis or corrupted zero pattern.
    """
    if zero.mask.shape != basis.matrix.shape:
        raise ValueError("zero pattern shape does not match basis")
    n_rows, n_cols = basis.matrix.shape
    if n_cols < n_rows:
        raise ValueError("basis cannot have fewer columns than rows")
    missing = [vid for vid in basis.row_ids if vid not in means]
    if missing:
        raise ValueError(f"means missing for variables {missing}")
    classification_count(n_rows, n_cols - n_rows)  # size guard

    a = np.where(zero.mask, 0.0, basis.matrix)
    nonzero = ~zero.mask
    mu = np.array([means[vid] for vid in basis.row_ids], dtype=float)

    accepted: list[tuple[CanonicalModel, tuple[int, ...]]] = []
    for hidden_cols in combinations(range(n_cols), n_cols - n_rows):
        model = _try_classification(
            a, nonzero, basis.row_ids, mu, hidden_cols, struct_tol
        )
        if model is None:
            continue
        cm = CanonicalModel(model, certified=True)
        duplicate = any(
            causally_equivalent(cm, prev, dedup_tol)
            and observationally_equivalent(cm, prev, dedup_tol)
            for prev, _ in accepted
        )
        if not duplicate:
            accepted.append((cm, hidden_cols))

    if not accepted:
        raise EmptyResultError(
            "no stable canonical model is compatible with this basis"
        )
    return EquivalenceSet(
        tuple(m for m, _ in accepted), tuple(c for _, c in accepted)
    )
