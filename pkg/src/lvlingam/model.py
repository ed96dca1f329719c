"""Latent-variable linear acyclic models: validation, simulation, generation.

A model is a DAG over observed and hidden variables. Every variable is a
linear function of its parents plus an independent non-gaussian disturbance
and an optional constant. Matrices derived from a model index rows and
columns by ascending variable id, with rows = effects and columns = causes.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from . import dists
from .dists import DisturbanceDist
from .errors import CycleError, GenerationError, SchemaError
from .util import make_rng

FAITHFUL_TOL = 1e-9


@dataclass(frozen=True)
class Variable:
    id: int
    observed: bool
    constant: float = 0.0


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    weight: float


@dataclass(frozen=True)
class LvModel:
    """Immutable latent-variable model; treat all fields as read-only."""

    variables: tuple[Variable, ...]
    edges: tuple[Edge, ...]
    disturbances: dict[int, DisturbanceDist]

    @property
    def ids(self) -> tuple[int, ...]:
        return tuple(sorted(v.id for v in self.variables))

    @property
    def observed_ids(self) -> tuple[int, ...]:
        return tuple(sorted(v.id for v in self.variables if v.observed))

    @property
    def hidden_ids(self) -> tuple[int, ...]:
        return tuple(sorted(v.id for v in self.variables if not v.observed))

    def variable(self, vid: int) -> Variable:
        for v in self.variables:
            if v.id == vid:
                return v
        raise KeyError(vid)

    def index(self) -> dict[int, int]:
        """Variable id -> row/column position (ascending id order)."""
        return {vid: k for k, vid in enumerate(self.ids)}

    def b_matrix(self) -> np.ndarray:
        """Direct-effect matrix: entry (i, j) is the weight of edge j -> i."""
        pos = self.index()
        b = np.zeros((len(pos), len(pos)))
        for e in self.edges:
            b[pos[e.dst], pos[e.src]] = e.weight
        return b

    def constants_vector(self) -> np.ndarray:
        return np.array([self.variable(vid).constant for vid in self.ids])

    def parents(self, vid: int) -> list[int]:
        return sorted(e.src for e in self.edges if e.dst == vid)

    def children(self, vid: int) -> list[int]:
        return sorted(e.dst for e in self.edges if e.src == vid)

    def weight(self, src: int, dst: int) -> float:
        for e in self.edges:
            if e.src == src and e.dst == dst:
                return e.weight
        return 0.0

    def to_json_obj(self) -> dict:
        return {
            "variables": [
                {"id": v.id, "observed": v.observed, "constant": v.constant}
                for v in sorted(self.variables, key=lambda v: v.id)
            ],
            "edges": [
                {"from": e.src, "to": e.dst, "weight": e.weight}
                for e in sorted(self.edges, key=lambda e: (e.dst, e.src))
            ],
            "disturbances": [
                {"id": vid, **self.disturbances[vid].to_json_obj()}
                for vid in self.ids
            ],
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "LvModel":
        try:
            variables = tuple(
                Variable(int(v["id"]), bool(v["observed"]), float(v.get("constant", 0.0)))
                for v in obj["variables"]
            )
            edges = tuple(
                Edge(int(e["from"]), int(e["to"]), float(e["weight"]))
                for e in obj["edges"]
            )
            disturbances = {
                int(d["id"]): DisturbanceDist.from_json_obj(d)
                for d in obj["disturbances"]
            }
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"bad model JSON: {exc}") from exc
        return cls(variables, edges, disturbances)


@dataclass
class DataMatrix:
    """Samples of the observed variables; one column per observed id."""

    columns: tuple[int, ...]
    values: np.ndarray

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def column(self, vid: int) -> np.ndarray:
        return self.values[:, self.columns.index(vid)]

    def sample_means(self) -> dict[int, float]:
        mu = self.values.mean(axis=0)
        return {vid: float(mu[k]) for k, vid in enumerate(self.columns)}

    def to_csv(self) -> str:
        lines = [",".join(str(c) for c in self.columns)]
        for row in self.values:
            lines.append(",".join(repr(float(x)) for x in row))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "DataMatrix":
        lines = [ln for ln in text.strip().splitlines() if ln.strip()]
        if not lines:
            raise SchemaError("empty data CSV")
        try:
            columns = tuple(int(c) for c in lines[0].split(","))
            values = np.array(
                [[float(x) for x in ln.split(",")] for ln in lines[1:]]
            )
        except ValueError as exc:
            raise SchemaError(f"bad data CSV: {exc}") from exc
        if values.ndim != 2 or values.shape[1] != len(columns):
            raise SchemaError("data CSV is not rectangular")
        return cls(columns, values)


def validate(model: LvModel, faithful_tol: float = FAITHFUL_TOL) -> list[str]:
    """All invariant violations, as human-readable strings (empty = valid)."""
    violations: list[str] = []
    ids = [v.id for v in model.variables]
    id_set = set(ids)
    if len(ids) != len(id_set):
        violations.append("duplicate variable ids")
    if any(vid < 0 for vid in ids):
        violations.append("negative variable id")

    seen_pairs = set()
    structure_ok = len(ids) == len(id_set)
    for e in model.edges:
        if e.src not in id_set or e.dst not in id_set:
            violations.append(f"edge {e.src}->{e.dst} references unknown variable")
            structure_ok = False
            continue
        if e.src == e.dst:
            violations.append(f"self-edge on variable {e.src}")
            structure_ok = False
        if (e.src, e.dst) in seen_pairs:
            violations.append(f"duplicate edge {e.src}->{e.dst}")
            structure_ok = False
        seen_pairs.add((e.src, e.dst))
        if e.weight == 0.0:
            violations.append(f"zero-weight edge {e.src}->{e.dst}")

    for vid in sorted(id_set):
        if vid not in model.disturbances:
            violations.append(f"variable {vid} has no disturbance")
            structure_ok = False
    for vid in sorted(model.disturbances):
        if vid not in id_set:
            violations.append(f"disturbance for unknown variable {vid}")
    for vid, dist in sorted(model.disturbances.items()):
        if vid not in id_set:
            continue
        if dist.variance <= 0:
            violations.append(f"disturbance of {vid} has non-positive variance")
        if dist.gaussian:
            violations.append(f"disturbance of {vid} is exactly gaussian")

    if not structure_ok:
        return violations

    try:
        causal_order(model)
    except CycleError:
        violations.append("edge set contains a directed cycle")
        return violations

    # Faithfulness: every directed path must leave a nonzero net effect.
    reach = reachability(model)
    effects = total_effects(model)
    pos = model.index()
    for i_vid in model.ids:
        for j_vid in model.ids:
            i, j = pos[i_vid], pos[j_vid]
            if reach[i, j] and abs(effects[i, j]) <= faithful_tol:
                violations.append(
                    f"path {j_vid}->{i_vid} exists but its total effect vanishes"
                )
    return violations


def causal_order(model: LvModel) -> list[int]:
    """Topological order of the DAG, ties broken by ascending id."""
    in_deg = {vid: 0 for vid in model.ids}
    children: dict[int, list[int]] = {vid: [] for vid in model.ids}
    for e in model.edges:
        in_deg[e.dst] += 1
        children[e.src].append(e.dst)
    ready = [vid for vid, d in sorted(in_deg.items()) if d == 0]
    heapq.heapify(ready)
    order: list[int] = []
    while ready:
        vid = heapq.heappop(ready)
        order.append(vid)
        for c in children[vid]:
            in_deg[c] -= 1
            if in_deg[c] == 0:
                heapq.heappush(ready, c)
    if len(order) != len(model.ids):
        raise CycleError("edge set contains a directed cycle")
    return order


def reachability(model: LvModel) -> np.ndarray:
    """Boolean matrix: entry (i, j) true iff a directed path j -> i exists."""
    pos = model.index()
    m = len(pos)
    adj = np.zeros((m, m), dtype=bool)
    for e in model.edges:
        adj[pos[e.dst], pos[e.src]] = True
    reach = adj.copy()
    while True:
        nxt = reach | (reach @ adj)
        if np.array_equal(nxt, reach):
            return reach
        reach = nxt


def total_effects(model: LvModel) -> np.ndarray:
    """(I - B)^-1 by forward substitution along a causal order.

    Entry (i, j) sums edge-weight products over all directed paths j -> i,
    plus 1 on the diagonal. Structural zeros come out as exact 0.0.
    """
    order = causal_order(model)
    pos = model.index()
    b = model.b_matrix()
    m = len(pos)
    t = np.zeros((m, m))
    for vid in order:
        i = pos[vid]
        row = np.zeros(m)
        row[i] = 1.0
        for p in model.parents(vid):
            row += b[i, pos[p]] * t[pos[p]]
        t[i] = row
    return t


def observed_means(model: LvModel) -> dict[int, float]:
    """Population means of the observed variables implied by the constants."""
    mu = total_effects(model) @ model.constants_vector()
    pos = model.index()
    return {vid: float(mu[pos[vid]]) for vid in model.observed_ids}


def simulate(model: LvModel, n: int, seed) -> DataMatrix:
    """Draw n samples of the observed variables; deterministic given seed."""
    if n < 1:
        raise ValueError("n must be >= 1")
    bad = validate(model)
    if bad:
        raise ValueError(f"model does not validate: {bad[0]}")
    rng = make_rng(seed)
    noise = {vid: model.disturbances[vid].sample(rng, n) for vid in model.ids}
    values: dict[int, np.ndarray] = {}
    for vid in causal_order(model):
        x = noise[vid] + model.variable(vid).constant
        for p in model.parents(vid):
            x = x + model.weight(p, vid) * values[p]
        values[vid] = x
    observed = model.observed_ids
    return DataMatrix(observed, np.column_stack([values[vid] for vid in observed]))


@dataclass(frozen=True)
class GenerationConfig:
    """Knobs for random model generation."""

    n_observed: int
    n_hidden: int = 0
    edge_prob: float = 0.4
    weight_range: tuple[float, float] = (0.5, 1.5)
    constant_range: tuple[float, float] = (-1.0, 1.0)
    variance_range: tuple[float, float] = (0.5, 2.0)
    families: tuple[str, ...] = ("laplace", "uniform", "gengauss", "gaussmix")
    max_retries: int = 500


def _random_dist(rng: np.random.Generator, family: str, variance: float) -> DisturbanceDist:
    if family == "laplace":
        return dists.laplace(variance)
    if family == "uniform":
        return dists.uniform(variance)
    if family == "gengauss":
        if rng.random() < 0.5:
            shape = float(rng.uniform(0.55, 1.2))
        else:
            shape = float(rng.uniform(3.0, 6.0))
        return dists.gengauss(shape, variance)
    if family == "gaussmix":
        w1 = float(rng.uniform(0.25, 0.75))
        m1 = float(rng.uniform(0.4, 1.2))
        m2 = -w1 * m1 / (1.0 - w1)
        v1, v2 = (float(rng.uniform(0.2, 1.0)) for _ in range(2))
        raw = dists.gaussmix((w1, 1.0 - w1), (m1, m2), (v1, v2))
        return raw.scaled(np.sqrt(variance / raw.variance))
    raise ValueError(f"unknown family {family!r}")


def random_model(config: GenerationConfig, seed) -> LvModel:
    """A random valid model whose canonical form keeps the requested counts.

    Regenerates until the canonicalized model has exactly n_hidden latent
    variables (each then necessarily with >= 2 observed children) and both
    the raw and canonical models validate, including faithfulness.
    """
    from .canonical import canonicalize  # deferred: canonical builds on model

    if config.n_observed < 2:
        raise ValueError("need at least two observed variables")
    if config.n_hidden < 0:
        raise ValueError("n_hidden must be >= 0")
    rng = make_rng(seed)
    m = config.n_observed + config.n_hidden
    w_lo, w_hi = config.weight_range
    if not 0.0 < w_lo <= w_hi:
        raise ValueError("weight range must satisfy 0 < w_min <= w_max")

    for _ in range(config.max_retries):
        order = rng.permutation(m)
        hidden = set(rng.choice(m, size=config.n_hidden, replace=False).tolist())
        edges = []
        for a in range(m):
            for b in range(a + 1, m):
                if rng.random() < config.edge_prob:
                    w = float(rng.uniform(w_lo, w_hi))
                    if rng.random() < 0.5:
                        w = -w
                    edges.append(Edge(int(order[a]), int(order[b]), w))
        variables = tuple(
            Variable(vid, vid not in hidden, float(rng.uniform(*config.constant_range)))
            for vid in range(m)
        )
        disturbances = {
            vid: _random_dist(
                rng,
                config.families[int(rng.integers(len(config.families)))],
                float(rng.uniform(*config.variance_range)),
            )
            for vid in range(m)
        }
        model = LvModel(variables, tuple(edges), disturbances)
        if validate(model):
            continue
        canonical = canonicalize(model)
        if len(canonical.model.hidden_ids) != config.n_hidden:
            continue
        if validate(canonical.model):
            continue
        return model
    raise GenerationError(
        f"no admissible model found in {config.max_retries} attempts"
    )
