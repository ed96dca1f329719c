"""Model core: validation, ordering, total effects, simulation, generation."""

import numpy as np
import pytest

import lvlingam as lv
from lvlingam import dists
from lvlingam.errors import CycleError, GenerationError

from conftest import mediated_latent_model, path_effect_oracle, random_valid_model


def single_var_model(constant=0.0, dist=None):
    return lv.LvModel(
        (lv.Variable(0, True, constant),),
        (),
        {0: dist or dists.uniform(1.0)},
    )


def test_validate_vacuous_dag():
    assert lv.validate(single_var_model()) == []


def test_validate_two_cycle():
    m = lv.LvModel(
        (lv.Variable(1, True), lv.Variable(2, True)),
        (lv.Edge(1, 2, 1.0), lv.Edge(2, 1, 1.0)),
        {1: dists.laplace(1.0), 2: dists.laplace(1.0)},
    )
    violations = lv.validate(m)
    assert any("cycle" in v for v in violations)


def test_validate_fixture_model(fig_model):
    assert lv.validate(fig_model) == []


def test_validate_catches_structural_problems():
    base = single_var_model()
    m = lv.LvModel(base.variables, (lv.Edge(0, 0, 1.0),), dict(base.disturbances))
    assert any("self-edge" in v for v in lv.validate(m))
    m = lv.LvModel(base.variables, (lv.Edge(0, 9, 1.0),), dict(base.disturbances))
    assert any("unknown" in v for v in lv.validate(m))
    m = lv.LvModel(base.variables, (), {})
    assert any("no disturbance" in v for v in lv.validate(m))
    m = single_var_model(dist=dists.gaussmix((1.0,), (0.0,), (1.0,)))
    assert any("gaussian" in v for v in lv.validate(m))


def test_validate_faithfulness():
    # two paths 0 -> 2 that cancel exactly: direct 1.0, via 1: 2.0 * -0.5
    m = lv.LvModel(
        tuple(lv.Variable(i, True) for i in range(3)),
        (lv.Edge(0, 2, 1.0), lv.Edge(0, 1, 2.0), lv.Edge(1, 2, -0.5)),
        {i: dists.laplace(1.0) for i in range(3)},
    )
    assert any("vanishes" in v for v in lv.validate(m))


def test_causal_order_ties_and_chain():
    m = lv.LvModel(
        tuple(lv.Variable(i, True) for i in (0, 1, 2)),
        (),
        {i: dists.laplace(1.0) for i in (0, 1, 2)},
    )
    assert lv.causal_order(m) == [0, 1, 2]
    chain = lv.LvModel(
        tuple(lv.Variable(i, True) for i in (0, 1, 2)),
        (lv.Edge(2, 1, 1.0), lv.Edge(1, 0, 1.0)),
        {i: dists.laplace(1.0) for i in (0, 1, 2)},
    )
    assert lv.causal_order(chain) == [2, 1, 0]


def test_causal_order_fixture_is_topological(fig_model):
    order = lv.causal_order(fig_model)
    pos = {v: k for k, v in enumerate(order)}
    for e in fig_model.edges:
        assert pos[e.src] < pos[e.dst]


def test_causal_order_cycle_raises():
    m = lv.LvModel(
        (lv.Variable(0, True), lv.Variable(1, True)),
        (lv.Edge(0, 1, 1.0), lv.Edge(1, 0, 1.0)),
        {0: dists.laplace(1.0), 1: dists.laplace(1.0)},
    )
    with pytest.raises(CycleError):
        lv.causal_order(m)


def test_total_effects_trivial_cases():
    empty = lv.LvModel(
        tuple(lv.Variable(i, True) for i in range(3)),
        (),
        {i: dists.laplace(1.0) for i in range(3)},
    )
    assert np.array_equal(lv.total_effects(empty), np.eye(3))
    one_edge = lv.LvModel(
        (lv.Variable(0, True), lv.Variable(1, True)),
        (lv.Edge(0, 1, 3.0),),
        {0: dists.laplace(1.0), 1: dists.laplace(1.0)},
    )
    t = lv.total_effects(one_edge)
    assert t[1, 0] == 3.0 and t[0, 0] == t[1, 1] == 1.0


def test_total_effects_fixture_values(fig_model):
    t = lv.total_effects(fig_model)
    pos = fig_model.index()
    assert t[pos[3], pos[4]] == pytest.approx(-18.0)
    assert t[pos[8], pos[4]] == pytest.approx(12.0)


def test_total_effects_against_path_enumeration():
    for seed in range(100):
        m = random_valid_model(seed, n_obs=(2, 6), n_hid=(0, 2))
        t = lv.total_effects(m)
        pos = m.index()
        rng = np.random.Generator(np.random.Philox([7, seed]))
        pairs = [(i, j) for i in m.ids for j in m.ids]
        for i, j in [pairs[k] for k in rng.choice(len(pairs), 5)]:
            assert t[pos[i], pos[j]] == pytest.approx(
                path_effect_oracle(m, j, i), abs=1e-10
            )


def test_total_effects_inverse_identity():
    for seed in range(100):
        m = random_valid_model(seed)
        t = lv.total_effects(m)
        i_minus_b = np.eye(len(m.ids)) - m.b_matrix()
        assert np.max(np.abs(t @ i_minus_b - np.eye(len(m.ids)))) < 1e-10


def test_causal_order_triangularizes_b():
    for seed in range(25):
        m = random_valid_model(seed)
        order = lv.causal_order(m)
        pos = m.index()
        b = m.b_matrix()
        idx = [pos[v] for v in order]
        assert not np.any(np.triu(b[np.ix_(idx, idx)], 0))


def test_simulate_rejects_bad_n():
    with pytest.raises(ValueError):
        lv.simulate(single_var_model(), 0, 1)
    assert lv.simulate(single_var_model(), 1, 1).values.shape == (1, 1)


def test_simulate_mean_matches_constant():
    m = single_var_model(constant=5.0)
    data = lv.simulate(m, 100_000, seed=3)
    se = data.values.std() / np.sqrt(data.n)
    assert abs(data.values.mean() - 5.0) < 3 * se


def test_simulate_covariance_identity():
    m = mediated_latent_model()
    n = 100_000
    data = lv.simulate(m, n, seed=12)
    t = lv.total_effects(m)
    var = np.array([m.disturbances[v].variance for v in m.ids])
    full_cov = t @ np.diag(var) @ t.T
    pos = m.index()
    obs_idx = [pos[v] for v in m.observed_ids]
    expected = full_cov[np.ix_(obs_idx, obs_idx)]
    x = data.values - data.values.mean(axis=0)
    sample = (x.T @ x) / n
    for i in range(len(obs_idx)):
        for j in range(len(obs_idx)):
            se = np.sqrt(
                max(np.mean(x[:, i] ** 2 * x[:, j] ** 2) - sample[i, j] ** 2, 1e-12)
                / n
            )
            assert abs(sample[i, j] - expected[i, j]) < 3 * se


def test_simulate_bit_reproducible():
    m = mediated_latent_model()
    a = lv.simulate(m, 500, seed=77)
    b = lv.simulate(m, 500, seed=77)
    assert np.array_equal(a.values, b.values)
    assert a.columns == b.columns


def test_observed_means_match_simulation():
    m = lv.LvModel(
        (lv.Variable(0, True, 1.5), lv.Variable(1, True, -2.0)),
        (lv.Edge(0, 1, 2.0),),
        {0: dists.uniform(1.0), 1: dists.laplace(1.0)},
    )
    mu = lv.observed_means(m)
    assert mu[0] == pytest.approx(1.5)
    assert mu[1] == pytest.approx(2.0 * 1.5 - 2.0)
    data = lv.simulate(m, 200_000, seed=5)
    assert data.sample_means()[1] == pytest.approx(mu[1], abs=0.05)


def test_random_model_empty_graph():
    m = lv.random_model(lv.GenerationConfig(n_observed=3, edge_prob=0.0), 0)
    assert m.edges == ()
    assert len(m.observed_ids) == 3


def test_random_model_full_edges_with_hidden():
    config = lv.GenerationConfig(n_observed=3, n_hidden=1, edge_prob=1.0)
    m = lv.random_model(config, 4)
    assert lv.validate(m) == []
    can = lv.canonicalize(m)
    assert len(can.model.hidden_ids) == 1
    h = can.model.hidden_ids[0]
    assert len(can.model.children(h)) >= 2


def test_random_model_deterministic():
    config = lv.GenerationConfig(n_observed=4, n_hidden=1)
    assert lv.random_model(config, 9) == lv.random_model(config, 9)


def test_random_model_gives_up():
    config = lv.GenerationConfig(
        n_observed=2, n_hidden=1, edge_prob=0.0, max_retries=10
    )
    with pytest.raises(GenerationError):
        lv.random_model(config, 0)


def test_model_json_round_trip():
    for seed in range(20):
        m = random_valid_model(seed)
        again = lv.LvModel.from_json_obj(m.to_json_obj())
        assert again.to_json_obj() == m.to_json_obj()
        assert set(again.edges) == set(m.edges)
        assert again.disturbances == m.disturbances


def test_data_csv_round_trip():
    m = mediated_latent_model()
    data = lv.simulate(m, 50, seed=2)
    again = lv.DataMatrix.from_csv(data.to_csv())
    assert again.columns == data.columns
    assert np.array_equal(again.values, data.values)
