"""Reduction of latent-variable models to canonical form, plus equivalence tests.

A canonical model has every latent variable as a parentless, zero-mean,
unit-variance root with at least two children, and no two latents with
exactly proportional child-weight vectors. Every model reduces to an
observationally and causally equivalent canonical one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import permutations

import numpy as np

from . import dists
from .model import (
    Edge,
    LvModel,
    Variable,
    causal_order,
    observed_means,
    total_effects,
    validate,
)

PROP_TOL = 1e-9
STD_TOL = 1e-9
# Aggregated bypass weights below this are treated as exact cancellations.
WEIGHT_EPS = 1e-15


@dataclass(frozen=True)
class CanonicalModel:
    model: LvModel
    certified: bool = True


class _Work:
    """Mutable scratch representation used only inside canonicalize."""

    def __init__(self, model: LvModel):
        self.observed = {v.id: v.observed for v in model.variables}
        self.const = {v.id: v.constant for v in model.variables}
        self.dist = dict(model.disturbances)
        self.weight = {(e.src, e.dst): e.weight for e in model.edges}

    def ids(self) -> list[int]:
        return sorted(self.observed)

    def hidden(self) -> list[int]:
        return sorted(v for v, obs in self.observed.items() if not obs)

    def children(self, v: int) -> list[int]:
        return sorted(d for (s, d) in self.weight if s == v)

    def parents(self, v: int) -> list[int]:
        return sorted(s for (s, d) in self.weight if d == v)

    def drop(self, v: int) -> None:
        for key in [k for k in self.weight if v in k]:
            del self.weight[key]
        del self.observed[v]
        del self.const[v]
        del self.dist[v]

    def to_model(self) -> LvModel:
        variables = tuple(
            Variable(v, self.observed[v], self.const[v]) for v in self.ids()
        )
        edges = tuple(
            Edge(s, d, w) for (s, d), w in sorted(self.weight.items())
        )
        return LvModel(variables, edges, dict(self.dist))


def _proportional(wa: list[float], wb: list[float], tol: float) -> bool:
    """Exact proportionality of two nonzero weight vectors, cross-ratio test."""
    k = max(range(len(wa)), key=lambda i: abs(wa[i]))
    for i in range(len(wa)):
        cross = wa[i] * wb[k] - wb[i] * wa[k]
        scale = max(abs(wa[i] * wb[k]), abs(wb[i] * wa[k]))
        if scale == 0.0 or abs(cross) > tol * scale:
            return False
    return True


def canonicalize(model: LvModel, prop_tol: float = PROP_TOL) -> CanonicalModel:
    """Observationally and causally equivalent canonical model.

    Transformation steps, each run to fixpoint before the next:
    1. drop latents without children;
    2. bypass every connection into a latent, folding products of strengths
       into direct connections to its children;
    3. absorb single-child latents into the child's disturbance and constant;
    4. merge latent pairs with exactly proportional child weights;
    5. standardize latents to zero mean / unit variance, pushing the scale
       and mean into the children, then fix each latent's sign so its
       largest-magnitude child weight is positive.
    """
    bad = validate(model)
    if bad:
        raise ValueError(f"model does not validate: {bad[0]}")
    w = _Work(model)

    # step 1
    changed = True
    while changed:
        changed = False
        for h in w.hidden():
            if not w.children(h):
                w.drop(h)
                changed = True

    # step 2: visiting latents in causal order guarantees a single pass
    # never reintroduces an edge into an already-cleared latent.
    while any(not w.observed[d] for (_, d) in w.weight):
        order_pos = {v: k for k, v in enumerate(causal_order(w.to_model()))}
        for d in sorted(w.hidden(), key=order_pos.__getitem__):
            for s in w.parents(d):
                w_sd = w.weight.pop((s, d))
                for z in w.children(d):
                    combined = w.weight.get((s, z), 0.0) + w_sd * w.weight[(d, z)]
                    if abs(combined) <= WEIGHT_EPS:
                        w.weight.pop((s, z), None)
                    else:
                        w.weight[(s, z)] = combined

    # step 3
    changed = True
    while changed:
        changed = False
        for h in w.hidden():
            ch = w.children(h)
            if len(ch) == 1:
                z = ch[0]
                edge_w = w.weight[(h, z)]
                w.const[z] += edge_w * w.const[h]
                w.dist[z] = dists.weighted_sum(
                    [(edge_w, w.dist[h]), (1.0, w.dist[z])]
                )
                w.drop(h)
                changed = True

    # step 4
    changed = True
    while changed:
        changed = False
        hs = w.hidden()
        for a in range(len(hs)):
            for b in range(a + 1, len(hs)):
                g, h = hs[a], hs[b]
                ch = w.children(g)
                if ch != w.children(h) or not ch:
                    continue
                wg = [w.weight[(g, z)] for z in ch]
                wh = [w.weight[(h, z)] for z in ch]
                if not _proportional(wg, wh, prop_tol):
                    continue
                k = max(range(len(ch)), key=lambda i: abs(wg[i]))
                rho = wh[k] / wg[k]
                w.dist[g] = dists.weighted_sum([(1.0, w.dist[g]), (rho, w.dist[h])])
                w.const[g] += rho * w.const[h]
                w.drop(h)
                changed = True
                break
            if changed:
                break

    # step 5
    for h in w.hidden():
        ch = w.children(h)
        sd = math.sqrt(w.dist[h].variance)
        for z in ch:
            w.const[z] += w.weight[(h, z)] * w.const[h]
            w.weight[(h, z)] *= sd
        w.const[h] = 0.0
        w.dist[h] = w.dist[h].scaled(1.0 / sd)
        anchor = min(ch, key=lambda z: (-abs(w.weight[(h, z)]), z))
        if w.weight[(h, anchor)] < 0:
            for z in ch:
                w.weight[(h, z)] = -w.weight[(h, z)]
            w.dist[h] = w.dist[h].negated()

    out = w.to_model()
    ok, _ = is_canonical(out, prop_tol=prop_tol)
    return CanonicalModel(out, certified=ok)


def is_canonical(
    model: LvModel, prop_tol: float = PROP_TOL, std_tol: float = STD_TOL
) -> tuple[bool, list[str]]:
    """Check the four canonical-model clauses; returns (ok, violations)."""
    violations: list[str] = []
    hidden = model.hidden_ids
    for h in hidden:
        if model.parents(h):
            violations.append(f"latent {h} has parents")
        if len(model.children(h)) < 2:
            violations.append(f"latent {h} has fewer than two children")
        v = model.variable(h)
        if abs(v.constant) > std_tol:
            violations.append(f"latent {h} has nonzero constant")
        if abs(model.disturbances[h].variance - 1.0) > std_tol:
            violations.append(f"latent {h} does not have unit variance")
    for a in range(len(hidden)):
        for b in range(a + 1, len(hidden)):
            g, h = hidden[a], hidden[b]
            ch = model.children(g)
            if ch != model.children(h) or not ch:
                continue
            wg = [model.weight(g, z) for z in ch]
            wh = [model.weight(h, z) for z in ch]
            if _proportional(wg, wh, prop_tol):
                violations.append(
                    f"latents {g} and {h} have proportional child weights"
                )
    return (not violations, violations)


def _match_columns_upto_sign(
    cols_a: list[np.ndarray], cols_b: list[np.ndarray], tol: float
) -> "list[int] | None":
    """Signs that pair column multisets up to permutation; None if impossible.

    Returns, for the first matching permutation, the per-a-column sign applied
    to the matched b column (+1/-1), encoded as perm-with-signs; only the
    existence and signs matter to callers.
    """
    n = len(cols_a)
    if n != len(cols_b):
        return None
    if n == 0:
        return []
    for perm in permutations(range(n)):
        signs: list[int] = []
        ok = True
        for i, j in enumerate(perm):
            a, b = cols_a[i], cols_b[j]
            k = int(np.argmax(np.abs(a)))
            if a[k] == 0.0 or b[k] == 0.0:
                sign = 1
            else:
                sign = 1 if a[k] * b[k] > 0 else -1
            if np.max(np.abs(a - sign * b)) > tol:
                ok = False
                break
            signs.append(sign * (j + 1))  # sign-tagged match of a[i] -> b[j]
        if ok:
            return signs
    return None


def _kuhn_matching(n: int, compat: list[list[int]]) -> bool:
    """Whether the bipartite compatibility lists admit a perfect matching."""
    match_of_b = [-1] * n

    def try_assign(i: int, seen: list[bool]) -> bool:
        for j in compat[i]:
            if seen[j]:
                continue
            seen[j] = True
            if match_of_b[j] < 0 or try_assign(match_of_b[j], seen):
                match_of_b[j] = i
                return True
        return False

    return all(try_assign(i, [False] * n) for i in range(n))


def observationally_equivalent(
    m1: CanonicalModel, m2: CanonicalModel, tol: float = 1e-9
) -> bool:
    """Structural sufficient test for identical observed-data distributions.

    The observed-row mixing matrices must agree up to a permutation of
    columns and per-column sign flips, with matched source distributions
    equal on their known standardized cumulants (scale on disturbance
    columns is already absorbed by the unit-variance column convention),
    and the observed means must agree. The permutation is unrestricted: a
    latent column of one model may play a disturbance column's role in the
    other, which is exactly the ambiguity a basis cannot resolve.
    """
    from . import mixing  # deferred: mixing depends on this module's types

    a, b = m1.model, m2.model
    if a.observed_ids != b.observed_ids:
        raise ValueError("models have different observed variable sets")
    if len(a.hidden_ids) != len(b.hidden_ids):
        return False

    mu_a, mu_b = observed_means(a), observed_means(b)
    if any(abs(mu_a[j] - mu_b[j]) > tol for j in a.observed_ids):
        return False

    def labeled_columns(cm: CanonicalModel):
        basis = mixing.observed_basis(cm)
        mat = basis.matrix[np.argsort(basis.row_ids)]
        out = []
        for k, tag in enumerate(basis.col_tags):
            vid = int(tag.split(":")[1])
            out.append((mat[:, k], cm.model.disturbances[vid]))
        return out

    cols_a = labeled_columns(m1)
    cols_b = labeled_columns(m2)
    n = len(cols_a)

    def compatible(col_a, dist_a, col_b, dist_b) -> bool:
        k = int(np.argmax(np.abs(col_a)))
        if col_a[k] == 0.0 or col_b[k] == 0.0:
            return False
        sign = 1.0 if col_a[k] * col_b[k] > 0 else -1.0
        if np.max(np.abs(col_a - sign * col_b)) > tol:
            return False
        flipped = dist_b if sign > 0 else dist_b.negated()
        return dists.dists_close(dist_a, flipped, tol)

    compat = [
        [j for j in range(n) if compatible(*cols_a[i], *cols_b[j])]
        for i in range(n)
    ]
    return _kuhn_matching(n, compat)


def causally_equivalent(
    m1: CanonicalModel, m2: CanonicalModel, tol: float = 1e-9
) -> bool:
    """Structural test for identical observed-on-observed causal effects.

    Direct effects among observed variables must agree entrywise, and the
    latent child-weight columns must agree as multisets up to permutation
    and sign.
    """
    a, b = m1.model, m2.model
    if a.observed_ids != b.observed_ids:
        raise ValueError("models have different observed variable sets")
    if len(a.hidden_ids) != len(b.hidden_ids):
        return False

    obs = a.observed_ids
    boo_a = np.array([[a.weight(src, dst) for src in obs] for dst in obs])
    boo_b = np.array([[b.weight(src, dst) for src in obs] for dst in obs])
    if boo_a.size and np.max(np.abs(boo_a - boo_b)) > tol:
        return False

    cols_a = [np.array([a.weight(h, j) for j in obs]) for h in a.hidden_ids]
    cols_b = [np.array([b.weight(h, j) for j in obs]) for h in b.hidden_ids]
    return _match_columns_upto_sign(cols_a, cols_b, tol) is not None
