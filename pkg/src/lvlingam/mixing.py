"""Mixing matrices: model <-> ICA-basis bridging and pattern machinery.

Bases follow the unit-variance-source column convention: every column is the
influence of one unit-variance independent source, so hidden columns equal
the connection strengths of canonical latents and disturbance columns carry
the disturbance standard deviation.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .canonical import CanonicalModel
from .errors import SchemaError
from .model import causal_order, total_effects
from .util import make_rng


class AmbiguousAlignmentWarning(UserWarning):
    """Two column pairings were nearly equally good."""


@dataclass(eq=False)
class MixingBasis:
    """Real matrix with labeled rows; columns are unit-variance sources."""

    row_ids: tuple[int, ...]
    matrix: np.ndarray
    col_tags: "tuple[str, ...] | None" = None

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=float)
        self.row_ids = tuple(int(r) for r in self.row_ids)
        if self.matrix.ndim != 2 or self.matrix.shape[0] != len(self.row_ids):
            raise ValueError("matrix shape does not match row_ids")

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def to_json_obj(self) -> dict:
        obj = {
            "row_ids": list(self.row_ids),
            "matrix": [[float(x) for x in row] for row in self.matrix],
        }
        if self.col_tags is not None:
            obj["col_tags"] = list(self.col_tags)
        return obj

    @classmethod
    def from_json_obj(cls, obj: dict) -> "MixingBasis":
        try:
            tags = obj.get("col_tags")
            return cls(
                tuple(int(r) for r in obj["row_ids"]),
                np.array(obj["matrix"], dtype=float),
                None if tags is None else tuple(str(t) for t in tags),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"bad basis JSON: {exc}") from exc


@dataclass(eq=False)
class ZeroPattern:
    """Boolean mask over a basis; True marks a structurally zero entry."""

    mask: np.ndarray

    def __post_init__(self):
        self.mask = np.asarray(self.mask, dtype=bool)

    def to_json_obj(self) -> dict:
        return {"mask": [[bool(x) for x in row] for row in self.mask]}

    @classmethod
    def from_json_obj(cls, obj: dict) -> "ZeroPattern":
        try:
            return cls(np.array(obj["mask"], dtype=bool))
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"bad zero-pattern JSON: {exc}") from exc


def full_mixing(canonical: CanonicalModel) -> MixingBasis:
    """Square source-to-variable matrix, latents first then observed in causal order.

    The top (latent) block is an identity next to zeros; columns are scaled
    by the standard deviation of their source so all sources have unit
    variance.
    """
    model = canonical.model
    hidden = list(model.hidden_ids)
    obs_causal = [v for v in causal_order(model) if model.variable(v).observed]
    order = hidden + obs_causal
    pos = model.index()
    idx = [pos[v] for v in order]
    a = total_effects(model)[np.ix_(idx, idx)]
    sds = np.array([math.sqrt(model.disturbances[v].variance) for v in order])
    tags = tuple(
        f"hidden:{v}" if not model.variable(v).observed else f"disturbance:{v}"
        for v in order
    )
    return MixingBasis(tuple(order), a * sds[None, :], tags)


def observed_basis(canonical: CanonicalModel) -> MixingBasis:
    """Observed rows of the full mixing matrix (overcomplete when latents exist)."""
    full = full_mixing(canonical)
    n_h = len(canonical.model.hidden_ids)
    return MixingBasis(full.row_ids[n_h:], full.matrix[n_h:], full.col_tags)


def scramble(basis: MixingBasis, seed) -> MixingBasis:
    """Random column order and signs plus random row order.

    Emulates the permutation/sign indeterminacy of an estimated ICA basis;
    column tags are erased since an estimator cannot know them.
    """
    rng = make_rng(seed)
    n_rows, n_cols = basis.matrix.shape
    col_perm = rng.permutation(n_cols)
    signs = rng.integers(0, 2, size=n_cols) * 2 - 1
    row_perm = rng.permutation(n_rows)
    mat = (basis.matrix * signs[None, :])[:, col_perm][row_perm, :]
    row_ids = tuple(basis.row_ids[i] for i in row_perm)
    return MixingBasis(row_ids, mat, None)


def can_permute_lower_triangular(
    pattern: np.ndarray,
) -> "tuple[bool, tuple[int, ...] | None, tuple[int, ...] | None]":
    """Whether independent row/column permutations make the pattern lower
    triangular with an all-nonzero diagonal.

    Greedy: a remaining row with exactly one remaining nonzero must take the
    next diagonal slot (its single nonzero is forced to be its diagonal in
    any valid arrangement), so repeatedly extracting such rows is complete.
    Returns (ok, row_perm, col_perm) where position k of each permutation
    holds the original row/column index placed at triangular position k.
    """
    p = np.asarray(pattern, dtype=bool)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise ValueError("pattern must be square")
    n = p.shape[0]
    rows_left = list(range(n))
    cols_left = list(range(n))
    row_perm: list[int] = []
    col_perm: list[int] = []
    for _ in range(n):
        pick = None
        for r in rows_left:
            nz = [c for c in cols_left if p[r, c]]
            if len(nz) == 1:
                pick = (r, nz[0])
                break
        if pick is None:
            return (False, None, None)
        r, c = pick
        row_perm.append(r)
        col_perm.append(c)
        rows_left.remove(r)
        cols_left.remove(c)
    return (True, tuple(row_perm), tuple(col_perm))


@dataclass(frozen=True)
class AlignmentResult:
    """perm[i], signs[i]: column of `other` matched to reference column i."""

    perm: tuple[int, ...]
    signs: tuple[int, ...]
    total_similarity: float


def align_columns(
    reference: MixingBasis, other: MixingBasis, align_tol: float = 1e-6
) -> AlignmentResult:
    """Greedy maximal matching of columns by absolute cosine similarity."""
    if reference.shape != other.shape:
        raise ValueError("bases must have the same shape")
    if reference.row_ids != other.row_ids:
        raise ValueError("bases must have the same row ids")

    def unit(mat):
        norms = np.linalg.norm(mat, axis=0)
        safe = np.where(norms == 0, 1.0, norms)
        return mat / safe

    cos = unit(reference.matrix).T @ unit(other.matrix)
    score = np.abs(cos)
    k = score.shape[0]
    perm = [-1] * k
    signs = [1] * k
    total = 0.0
    open_rows = set(range(k))
    open_cols = set(range(k))
    for _ in range(k):
        cells = [(score[i, j], i, j) for i in open_rows for j in open_cols]
        cells.sort(key=lambda t: (-t[0], t[1], t[2]))
        best, i, j = cells[0]
        # a pairing is ambiguous only if a near-equal competitor contests
        # the same reference column or the same candidate column
        rivals = [s for s, ri, rj in cells[1:] if ri == i or rj == j]
        if rivals and best - rivals[0] < align_tol:
            warnings.warn(
                f"nearly ambiguous column match (gap {best - rivals[0]:.2e})",
                AmbiguousAlignmentWarning,
                stacklevel=2,
            )
        perm[i] = j
        signs[i] = 1 if cos[i, j] >= 0 else -1
        total += best
        open_rows.remove(i)
        open_cols.remove(j)
    return AlignmentResult(tuple(perm), tuple(signs), total)


def apply_alignment(other: MixingBasis, alignment: AlignmentResult) -> MixingBasis:
    """Reorder/flip the columns of `other` into the reference's layout."""
    mat = other.matrix[:, list(alignment.perm)] * np.array(alignment.signs)[None, :]
    return MixingBasis(other.row_ids, mat, None)
