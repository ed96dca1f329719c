"""Resampled-basis pipeline: zero testing, per-estimate enumeration, pruning.

An ensemble of basis estimates stands in for the sampling uncertainty of one
estimated mixing matrix. Entries whose mean/sd ratio across the ensemble is
small are declared structural zeros; enumeration then runs per member with
the shared pattern, results are grouped by classification, and direct
effects that are not significantly nonzero across the group are pruned.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .canonical import CanonicalModel
from .enumeration import enumerate_models
from .errors import EmptyResultError, SchemaError
from .mixing import MixingBasis, ZeroPattern, align_columns, apply_alignment
from .util import make_rng

Classification = tuple[int, ...]


@dataclass(eq=False)
class BasisEnsemble:
    """Same-shape basis estimates of one mixing matrix."""

    members: tuple[MixingBasis, ...]
    reference: int = 0

    def __post_init__(self):
        self.members = tuple(self.members)
        if len(self.members) < 2:
            raise ValueError("an ensemble needs at least two members")
        shape = self.members[0].shape
        row_ids = self.members[0].row_ids
        for m in self.members[1:]:
            if m.shape != shape or m.row_ids != row_ids:
                raise ValueError("ensemble members differ in shape or row ids")
        if not 0 <= self.reference < len(self.members):
            raise ValueError("reference index out of range")

    def __len__(self) -> int:
        return len(self.members)

    def to_json_obj(self) -> dict:
        return {"bases": [m.to_json_obj() for m in self.members]}

    @classmethod
    def from_json_obj(cls, obj: dict) -> "BasisEnsemble":
        try:
            bases = tuple(MixingBasis.from_json_obj(b) for b in obj["bases"])
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"bad ensemble JSON: {exc}") from exc
        return cls(bases)


@dataclass(eq=False)
class ModelEnsemble:
    """Per-classification lists of models estimated across ensemble members."""

    n_members: int
    groups: dict[Classification, list[tuple[int, CanonicalModel]]]

    def classifications(self) -> list[Classification]:
        return sorted(self.groups)


@dataclass(eq=False)
class DiscoverySummary:
    """Aggregated estimate for one surviving classification."""

    classification: Classification
    support: int
    n_members: int
    variable_ids: tuple[int, ...]
    observed_ids: tuple[int, ...]
    hidden_ids: tuple[int, ...]
    b_mean: np.ndarray
    b_sd: np.ndarray
    b_pruned: np.ndarray
    constants: np.ndarray  # aligned with observed_ids

    def _obs_idx(self) -> list[int]:
        return [self.variable_ids.index(v) for v in self.observed_ids]

    def b_observed(self) -> np.ndarray:
        """Pruned direct effects among observed variables (ascending id)."""
        idx = self._obs_idx()
        return self.b_pruned[np.ix_(idx, idx)]

    def hidden_weights(self) -> dict[int, dict[int, float]]:
        """Pruned latent-to-observed weights, per hidden variable."""
        idx = self._obs_idx()
        out: dict[int, dict[int, float]] = {}
        for h in self.hidden_ids:
            col = self.b_pruned[idx, self.variable_ids.index(h)]
            out[h] = {
                obs: float(wt)
                for obs, wt in zip(self.observed_ids, col)
                if wt != 0.0
            }
        return out

    def to_json_obj(self) -> dict:
        return {
            "classification": list(self.classification),
            "support": self.support,
            "n_members": self.n_members,
            "variable_ids": list(self.variable_ids),
            "observed_ids": list(self.observed_ids),
            "hidden_ids": list(self.hidden_ids),
            "b_mean": [[float(x) for x in row] for row in self.b_mean],
            "b_sd": [[float(x) for x in row] for row in self.b_sd],
            "b_pruned": [[float(x) for x in row] for row in self.b_pruned],
            "structure": [
                [bool(x) for x in row] for row in self.b_pruned != 0.0
            ],
            "constants": {
                str(vid): float(c)
                for vid, c in zip(self.observed_ids, self.constants)
            },
            "hidden_weights": {
                str(h): {str(j): w for j, w in col.items()}
                for h, col in self.hidden_weights().items()
            },
        }


def align_ensemble(ensemble: BasisEnsemble) -> BasisEnsemble:
    """Align every member's columns (order and sign) to the reference member."""
    ref = ensemble.members[ensemble.reference]
    aligned = tuple(
        apply_alignment(m, align_columns(ref, m)) for m in ensemble.members
    )
    return BasisEnsemble(aligned, ensemble.reference)


def test_zeros(ensemble: BasisEnsemble, z_threshold: float = 3.0) -> ZeroPattern:
    """Mark entries whose |mean|/sd across members does not exceed z_threshold.

    The sd is the unbiased estimator. A degenerate entry (sd = 0) is nonzero
    exactly when its common value is nonzero. The ensemble must already be
    aligned to its reference member.
    """
    if len(ensemble) < 2:
        raise ValueError("zero testing needs at least two ensemble members")
    stack = np.stack([m.matrix for m in ensemble.members])
    mean = stack.mean(axis=0)
    sd = stack.std(axis=0, ddof=1)
    nonzero = np.abs(mean) > z_threshold * sd  # sd=0 cases fall out correctly
    return ZeroPattern(~nonzero)


def perturb_ensemble(
    basis: MixingBasis, k: int, sigma: float, seed
) -> BasisEnsemble:
    """k copies of a basis with i.i.d. gaussian noise of sd sigma * max|A|."""
    if k < 2:
        raise ValueError("k must be >= 2")
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    rng = make_rng(seed)
    scale = sigma * float(np.max(np.abs(basis.matrix)))
    members = tuple(
        MixingBasis(
            basis.row_ids,
            basis.matrix + rng.normal(0.0, scale, size=basis.matrix.shape),
            None,
        )
        for _ in range(k)
    )
    return BasisEnsemble(members)


def collect_model_ensemble(
    aligned: BasisEnsemble,
    zero: ZeroPattern,
    means: dict[int, float],
    struct_tol: float = 1e-9,
) -> ModelEnsemble:
    """Run enumeration per member with the shared pattern; group by classification."""
    groups: dict[Classification, list[tuple[int, CanonicalModel]]] = {}
    for idx, member in enumerate(aligned.members):
        try:
            eq = enumerate_models(member, zero, means, struct_tol=struct_tol)
        except EmptyResultError:
            continue
        for model, cls in zip(eq.models, eq.classifications):
            groups.setdefault(cls, []).append((idx, model))
    return ModelEnsemble(len(aligned), groups)


def discover(
    ensemble: BasisEnsemble,
    means: dict[int, float],
    zero_z: float = 3.0,
    effect_z: float = 2.0,
    quorum: float = 0.5,
    struct_tol: float = 1e-9,
) -> list[DiscoverySummary]:
    """Full resampling pipeline: align, test zeros, enumerate, aggregate, prune.

    Classifications must succeed on more than `quorum` of the members to
    survive. Within a surviving group, every direct effect whose |mean|/sd
    across the group does not exceed effect_z is pruned to zero.

    Raises EmptyResultError when no classification reaches the quorum.
    """
    aligned = align_ensemble(ensemble)
    zero = test_zeros(aligned, zero_z)
    collected = collect_model_ensemble(aligned, zero, means, struct_tol)

    k = len(ensemble)
    summaries: list[DiscoverySummary] = []
    for cls in collected.classifications():
        group = collected.groups[cls]
        if len(group) <= quorum * k:
            continue
        first = group[0][1].model
        var_ids = first.ids
        obs_ids = first.observed_ids
        hid_ids = first.hidden_ids
        pos = {vid: i for i, vid in enumerate(var_ids)}

        mats = []
        ref_b = group[0][1].model.b_matrix()
        for _, cm in group:
            b = cm.model.b_matrix()
            # per-member sign canonicalization of latent columns can disagree
            # near ties; re-align each latent column to the first member
            for h in hid_ids:
                j = pos[h]
                if float(b[:, j] @ ref_b[:, j]) < 0:
                    b[:, j] = -b[:, j]
            mats.append(b)
        stack = np.stack(mats)
        b_mean = stack.mean(axis=0)
        b_sd = stack.std(axis=0, ddof=1) if len(mats) > 1 else np.zeros_like(b_mean)
        keep = np.abs(b_mean) > effect_z * b_sd
        b_pruned = np.where(keep, b_mean, 0.0)

        const_stack = np.stack(
            [
                [cm.model.variable(vid).constant for vid in obs_ids]
                for _, cm in group
            ]
        )
        summaries.append(
            DiscoverySummary(
                classification=cls,
                support=len(group),
                n_members=k,
                variable_ids=var_ids,
                observed_ids=obs_ids,
                hidden_ids=hid_ids,
                b_mean=b_mean,
                b_sd=b_sd,
                b_pruned=b_pruned,
                constants=const_stack.mean(axis=0),
            )
        )
    if not summaries:
        raise EmptyResultError(
            "no classification survived the quorum across the ensemble"
        )
    return summaries
