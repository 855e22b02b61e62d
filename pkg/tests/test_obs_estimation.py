import numpy as np
import pytest

from causalbandits.admg import Admg, latent_projection, reduce_graph
from causalbandits.cbn import OBSERVE, Arm, Cbn, Cpt, arms_of, exact_reward, sample_batch
from causalbandits.instances import gen_experiment3
from causalbandits.obs_estimation import (
    CLONE,
    build_conditioning,
    effective_parents,
    estimate_all_rewards,
    estimate_arm_reward,
    learn_surrogate,
    surrogate_reward_exact,
    surrogate_reward_sampled,
)


def chain_admg():
    # 0 -> 1 -> 2 with 0 <-> 2
    return Admg(
        n_nodes=3,
        directed=frozenset({(0, 1), (1, 2)}),
        bidirected=frozenset({(0, 2)}),
        intervenable=frozenset({0, 1}),
        reward=2,
    )


def test_effective_parents_markovian_is_parents():
    g = Admg(
        n_nodes=3,
        directed=frozenset({(0, 1), (0, 2), (1, 2)}),
        bidirected=frozenset(),
        intervenable=frozenset({0, 1}),
        reward=2,
    )
    assert effective_parents(g, 0) == ()
    assert effective_parents(g, 1) == (0,)
    assert effective_parents(g, 2) == (0, 1)


def test_effective_parents_confounded_chain():
    g = chain_admg()
    # c-component {0, 2}: node 2 conditions on everything before it
    assert effective_parents(g, 0) == ()
    assert effective_parents(g, 1) == (0,)
    assert effective_parents(g, 2) == (0, 1)


def test_build_conditioning_inserts_clone():
    g = chain_admg()
    cond = build_conditioning(g, 0)
    # node 1 is outside {0,2}'s c-component, so its factor sees the clone
    assert cond[1] == (CLONE,)
    assert cond[0] == ()
    assert cond[2] == (0, 1)


def _semi_markov_fixture():
    """5 observables + 1 hidden confounder of nodes 1 and 3; reward 3."""
    g = Admg(
        n_nodes=5,
        directed=frozenset({(0, 1), (1, 2), (2, 3), (4, 1), (4, 3), (0, 3)}),
        bidirected=frozenset(),
        intervenable=frozenset({0, 1, 2}),
        reward=3,
        hidden=frozenset({4}),
    )
    rng = np.random.default_rng(7)
    cpts = []
    for v in range(5):
        ps = tuple(sorted(u for (u, w) in g.directed if w == v))
        table = tuple(float(p) for p in rng.uniform(0.15, 0.85, size=1 << len(ps)))
        cpts.append(Cpt(owner=v, parent_order=ps, table=table))
    return Cbn(graph=g, cpts=tuple(cpts))


def test_pipeline_converges_to_exact_on_confounded_instance():
    cbn = _semi_markov_fixture()
    proj = latent_projection(cbn.graph)
    rng = np.random.default_rng(11)
    samples, rewards = sample_batch(cbn, OBSERVE, 300_000, rng)
    est = estimate_all_rewards(proj, samples, rewards)
    for arm in arms_of(proj):
        truth = exact_reward(cbn, arm)
        assert est[arm] == pytest.approx(truth, abs=0.01)


def test_pipeline_exact_on_markovian_instance():
    cbn = gen_experiment3()
    rng = np.random.default_rng(3)
    samples, rewards = sample_batch(cbn, OBSERVE, 200_000, rng)
    est = estimate_all_rewards(cbn.graph, samples, rewards)
    for arm in arms_of(cbn.graph):
        assert est[arm] == pytest.approx(exact_reward(cbn, arm), abs=0.01)


def test_smoothing_threshold_forces_half():
    cbn = gen_experiment3()
    rng = np.random.default_rng(5)
    samples, _ = sample_batch(cbn, OBSERVE, 50, rng)
    # with a huge threshold every cell outside the arm's c-component is 1/2
    v = estimate_arm_reward(cbn.graph, 1, 1, samples, smoothing_threshold=10**9)
    assert v == pytest.approx(0.5, abs=1e-12)


def test_exact_and_sampled_surrogates_agree():
    cbn = _semi_markov_fixture()
    proj = latent_projection(cbn.graph)
    rng = np.random.default_rng(13)
    samples, _ = sample_batch(cbn, OBSERVE, 20_000, rng)
    h, node_map = reduce_graph(proj, 1)
    d = learn_surrogate(h, node_map, node_map.index(1), 1, samples)
    exact = surrogate_reward_exact(d)
    sampled = surrogate_reward_sampled(d, 400_000, np.random.default_rng(17))
    assert sampled == pytest.approx(exact, abs=0.005)


def test_estimate_all_rewards_rejects_hidden_nodes():
    cbn = _semi_markov_fixture()
    with pytest.raises(Exception):
        estimate_all_rewards(cbn.graph, np.zeros((4, 5), dtype=np.uint8), np.zeros(4))


def test_observational_arm_is_empirical_mean():
    cbn = gen_experiment3()
    rng = np.random.default_rng(19)
    samples, rewards = sample_batch(cbn, OBSERVE, 1000, rng)
    est = estimate_all_rewards(cbn.graph, samples, rewards)
    assert est[Arm(None, 0)] == pytest.approx(float(rewards.mean()), abs=1e-12)
