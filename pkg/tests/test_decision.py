import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from magrid.core import GridPos, Rng
from magrid.decision import (
    LossWeights,
    apply_entity_mask,
    compute_losses,
    count_balance,
    count_balance_relaxed,
    decision_step,
    featurize,
    ground,
    ground_cells,
    init_params,
    load_checkpoint,
    opponent_nll,
    policy_heads,
    sample_subgoal_mask,
    save_checkpoint,
    selection_kl,
    subgoal_logits,
    travel_cost,
    travel_cost_relaxed,
    uniform_nll,
)
from magrid.decision.autodiff import Tensor
from magrid.episode import Episode, EntityView, Observation
from magrid.manuals import vocabulary

VOCAB = vocabulary("rtfm", "train")


def rtfm_obs(seed=7, stage="S1"):
    return Episode("rtfm", stage, "train", seed).observe(0)


def fresh_params(seed=0, zero=False, n_agents=2):
    return init_params(VOCAB, Rng(seed).split("init"), n_agents=n_agents, zero=zero)


# --- grounding ---------------------------------------------------------------


def test_ground_zero_params_gives_zero():
    obs = rtfm_obs()
    params = fresh_params(zero=True)
    feats = featurize(obs, params.index)
    x = ground(feats, params)
    assert x.shape == (8, 8, 16)
    assert np.all(x.data == 0.0)


def test_ground_shape_contract():
    obs = rtfm_obs()
    params = fresh_params()
    feats = featurize(obs, params.index)
    assert ground(feats, params).shape == (8, 8, 16)


def test_ground_invariant_to_manual_order():
    obs = rtfm_obs()
    params = fresh_params()
    shuffled = Observation(
        env=obs.env,
        self_id=obs.self_id,
        height=obs.height,
        width=obs.width,
        grid=obs.grid,
        agents=obs.agents,
        has_message=obs.has_message,
        inventory=obs.inventory,
        entities=obs.entities,
        document=tuple(reversed(obs.document)),
        goal=obs.goal,
    )
    a = ground(featurize(obs, params.index), params)
    b = ground(featurize(shuffled, params.index), params)
    assert np.array_equal(a.data, b.data)


def test_unknown_token_rejected():
    obs = rtfm_obs()
    params = fresh_params()
    bad = Observation(
        env=obs.env,
        self_id=obs.self_id,
        height=obs.height,
        width=obs.width,
        grid=obs.grid,
        agents=obs.agents,
        has_message=obs.has_message,
        inventory=obs.inventory,
        entities=obs.entities,
        document=("the flibbertigibbet beats everything.",),
        goal=obs.goal,
    )
    with pytest.raises(ValueError, match="unknown token"):
        featurize(bad, params.index)


# --- subgoal logits ----------------------------------------------------------


def test_subgoal_logits_zero_everything():
    obs = rtfm_obs()
    params = fresh_params(zero=True)
    feats = featurize(obs, params.index)
    x = ground_cells(feats, params)
    logits = subgoal_logits(x, x, feats, params)
    assert logits.shape == (len(obs.entities), 2)
    assert np.all(logits.data == 0.0)


def _obs_with_twin_entities():
    # two entities with identical tokens at different cells: swapping their
    # positions must permute the logit pairs and nothing else
    base = rtfm_obs()
    e0 = base.entities[0]
    twin_tokens = e0.tokens
    ents = (
        EntityView(uid=0, row=1, col=2, tokens=twin_tokens),
        EntityView(uid=1, row=5, col=6, tokens=twin_tokens),
    )
    swapped = (
        EntityView(uid=0, row=5, col=6, tokens=twin_tokens),
        EntityView(uid=1, row=1, col=2, tokens=twin_tokens),
    )
    def build(entities):
        grid = [[[] for _ in range(8)] for _ in range(8)]
        for e in entities:
            grid[e.row][e.col].append(" ".join(e.tokens))
        return Observation(
            env="rtfm",
            self_id=0,
            height=8,
            width=8,
            grid=tuple(tuple(tuple(c) for c in row) for row in grid),
            agents=base.agents,
            has_message=base.has_message,
            inventory=None,
            entities=entities,
            document=base.document,
            goal=base.goal,
        )
    return build(ents), build(swapped)


def test_subgoal_logits_follow_entity_cells():
    obs, swapped = _obs_with_twin_entities()
    params = fresh_params(seed=3)

    def logits_of(o):
        feats = featurize(o, params.index)
        x_self = ground_cells(feats, params, extra_channel=feats.pos_self)
        x_oth = ground_cells(feats, params, extra_channel=feats.pos_others)
        return subgoal_logits(x_self, x_oth, feats, params).data

    a = logits_of(obs)
    b = logits_of(swapped)
    assert np.allclose(a[0], b[1]) and np.allclose(a[1], b[0])
    assert not np.allclose(a[0], a[1])  # the readout is genuinely positional


def test_subgoal_logit_gradients_match_fd():
    obs = rtfm_obs()
    params = fresh_params(seed=5)

    def scalar_of(p):
        feats = featurize(obs, p.index)
        x_self = ground_cells(feats, p, extra_channel=feats.pos_self)
        x_oth = ground_cells(feats, p, extra_channel=feats.pos_others)
        logits = subgoal_logits(x_self, x_oth, feats, p)
        return (logits * Tensor(np.arange(logits.data.size).reshape(logits.shape))).sum()

    params.zero_grads()
    scalar_of(params).backward()
    grads = params.grads()
    flat = np.concatenate([grads[k].ravel() for k in sorted(grads)])
    theta = params.flat()
    rng = np.random.default_rng(0)
    for _ in range(5):
        v = rng.normal(size=theta.size)
        v /= np.linalg.norm(v)
        eps = 1e-5
        params.load_flat(theta + eps * v)
        up = scalar_of(params).item()
        params.load_flat(theta - eps * v)
        down = scalar_of(params).item()
        params.load_flat(theta)
        fd = (up - down) / (2 * eps)
        assert abs(fd - float(flat @ v)) / max(1.0, abs(fd)) < 1e-6


# --- gumbel mask -------------------------------------------------------------


def test_gumbel_pinned_noise_symmetric():
    logits = Tensor(np.zeros((1, 2)))
    state = sample_subgoal_mask(logits, tau=1.0, noise=np.zeros((1, 2)))
    assert np.allclose(state.relaxed.data, [[0.5, 0.5]])


def test_gumbel_low_temperature_is_one_hot():
    logits = Tensor(np.array([[0.3, -0.2], [-1.0, 0.5]]))
    noise = np.array([[0.1, 0.0], [0.0, 0.2]])
    state = sample_subgoal_mask(logits, tau=1e-6, noise=noise)
    hard = np.argmax(logits.data + noise, axis=1)
    expect = np.stack([(hard == 0).astype(float), (hard == 1).astype(float)], axis=1)
    assert np.allclose(state.relaxed.data, expect, atol=1e-9)


def test_gumbel_marginal_matches_sigmoid():
    rng = Rng(3)
    draws = 100_000
    for margin in (-2.0, 0.0, 2.0):
        logits = Tensor(np.tile([margin, 0.0], (draws, 1)))
        state = sample_subgoal_mask(logits, tau=1.0, rng=rng.split(f"m{margin}"))
        want = 1.0 / (1.0 + math.exp(-margin))
        assert abs(state.mask.mean() - want) <= 0.01


def test_gumbel_requires_positive_temperature():
    with pytest.raises(ValueError):
        sample_subgoal_mask(Tensor(np.zeros((1, 2))), tau=0.0, noise=np.zeros((1, 2)))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 9))
def test_mask_partitions_entities(seed, n_entities):
    rng = Rng(seed)
    logits = Tensor(rng.normal((n_entities, 2)))
    state = sample_subgoal_mask(logits, tau=0.7, rng=rng.split("g"))
    assert set(np.unique(state.mask)) <= {0, 1}
    assert np.array_equal(state.mask + state.complement, np.ones(n_entities, dtype=int))
    assert np.all((state.probs.data > 0) & (state.probs.data < 1))
    assert np.allclose(state.relaxed.data.sum(axis=1), 1.0)
    assert np.all((state.relaxed.data >= 0) & (state.relaxed.data <= 1))


def test_apply_entity_mask_partition():
    obs = rtfm_obs()
    mask = np.array([1, 0, 1, 0])
    own, others = apply_entity_mask(obs, mask)
    own_uids = {e.uid for e in own.entities}
    other_uids = {e.uid for e in others.entities}
    assert own_uids | other_uids == {e.uid for e in obs.entities}
    assert not (own_uids & other_uids)
    assert own.agents == obs.agents and others.agents == obs.agents


# --- losses ------------------------------------------------------------------


def test_selection_kl_examples():
    assert selection_kl(Tensor(np.full(4, 0.5)), 2).item() == 0.0
    eps = 1e-9
    val = selection_kl(Tensor(np.full(4, 1.0 - eps)), 2).item()
    assert abs(val - 4 * math.log(2)) < 1e-6
    with pytest.raises(ValueError):
        selection_kl(Tensor(np.array([0.0, 0.5])), 2)


def test_selection_kl_gradient():
    p0 = np.array([0.2, 0.6, 0.9])
    t = Tensor(p0, requires_grad=True)
    selection_kl(t, 2).backward()
    eps = 1e-6
    for i in range(3):
        up, down = p0.copy(), p0.copy()
        up[i] += eps
        down[i] -= eps
        fd = (selection_kl(Tensor(up), 2).item() - selection_kl(Tensor(down), 2).item()) / (2 * eps)
        assert abs(fd - t.grad[i]) / max(1.0, abs(fd)) < 1e-6


def test_count_balance_examples():
    assert count_balance(np.ones(3), np.ones(3), 2) == 0.0
    assert count_balance(np.ones(4), np.ones(2), 2) == 2.0
    assert count_balance(np.ones(2), np.ones(4), 3) == 0.0
    with pytest.raises(ValueError):
        count_balance(np.ones(2), np.ones(2), 1)


def test_count_balance_relaxed_matches_hard_on_binary():
    probs = np.array([1.0, 1.0, 0.0, 0.0, 1.0])
    relaxed = count_balance_relaxed(Tensor(probs), 2).item()
    hard = count_balance(probs, 1 - probs, 2)
    assert relaxed == hard


def test_travel_cost_examples():
    val = travel_cost(
        np.array([1, 0]),
        np.array([0, 1]),
        [GridPos(1, 2), GridPos(3, 4)],
        GridPos(0, 0),
        [GridPos(3, 3)],
    )
    assert val == 3.0 + 1.0
    assert (
        travel_cost(np.array([1]), np.array([0]), [GridPos(2, 2)], GridPos(2, 2), [GridPos(0, 0)])
        == 0.0
    )
    base = travel_cost(np.array([1]), np.array([0]), [GridPos(1, 1)], GridPos(0, 0), [GridPos(5, 5)])
    moved = travel_cost(np.array([1]), np.array([0]), [GridPos(1, 2)], GridPos(0, 0), [GridPos(5, 5)])
    assert moved - base == 1.0
    with pytest.raises(ValueError):
        travel_cost(np.array([1]), np.array([0]), [GridPos(0, 0)], GridPos(0, 0), [])


def test_opponent_nll_examples():
    uniform = Tensor(np.full(5, 0.2))
    val, floored = opponent_nll([uniform], [3])
    assert abs(val.item() - 1.6094379124341003) < 1e-12
    assert not floored
    onehot = Tensor(np.array([0.0, 0.0, 1.0, 0.0, 0.0]))
    val, floored = opponent_nll([onehot], [2])
    assert val.item() == 0.0
    val, _ = opponent_nll([uniform, uniform], [0, 4])
    assert abs(val.item() - 2 * 1.6094379124341003) < 1e-12
    assert abs(uniform_nll(5, 1) - 1.6094379124341003) < 1e-12


def test_opponent_nll_floors_zero_probability():
    bad = Tensor(np.array([1.0, 0.0, 0.0, 0.0, 0.0]))
    val, floored = opponent_nll([bad], [1])
    assert floored
    assert np.isfinite(val.item())


# --- pipeline ----------------------------------------------------------------


def test_decision_step_shapes_two_agents():
    obs = rtfm_obs()
    out = decision_step(obs, fresh_params(), tau=1.0, rng=Rng(0))
    assert out.pi_logits.shape == (5,)
    assert len(out.others_probs) == 1


def test_decision_step_three_agents():
    ep = Episode("rtfm", "S1", "train", 13, n_agents=3)
    params = init_params(VOCAB, Rng(1).split("init"), n_agents=3)
    out = decision_step(ep.observe(1), params, tau=1.0, rng=Rng(2))
    assert len(out.others_probs) == 2
    for dist in out.others_probs:
        assert np.allclose(dist.data.sum(), 1.0)


def test_decision_step_deterministic():
    obs = rtfm_obs()
    params = fresh_params(seed=4)
    a = decision_step(obs, params, tau=1.0, rng=Rng(9))
    b = decision_step(obs, params, tau=1.0, rng=Rng(9))
    assert np.array_equal(a.pi_logits.data, b.pi_logits.data)
    assert np.array_equal(a.subgoal.mask, b.subgoal.mask)
    for x, y in zip(a.others_probs, b.others_probs):
        assert np.array_equal(x.data, y.data)


def test_messenger_decision_step():
    ep = Episode("messenger", "S1", "train", 3)
    vocab = vocabulary("messenger", "train")
    params = init_params(vocab, Rng(5).split("init"), n_agents=2)
    out = decision_step(ep.observe(0), params, tau=1.0, rng=Rng(6))
    assert out.pi_logits.shape == (5,)
    assert len(out.subgoal.mask) == 5


def _perturb_entity(obs, uid, new_tokens):
    ents = []
    for e in obs.entities:
        if e.uid == uid:
            ents.append(EntityView(uid=e.uid, row=e.row, col=e.col, tokens=tuple(new_tokens)))
        else:
            ents.append(e)
    return Observation(
        env=obs.env,
        self_id=obs.self_id,
        height=obs.height,
        width=obs.width,
        grid=obs.grid,
        agents=obs.agents,
        has_message=obs.has_message,
        inventory=obs.inventory,
        entities=tuple(ents),
        document=obs.document,
        goal=obs.goal,
    )


def test_masked_out_entity_cannot_leak():
    obs = rtfm_obs()
    params = fresh_params(seed=8)
    out = decision_step(obs, params, tau=1.0, rng=Rng(11))
    hidden = [u for u, m in zip(sorted(e.uid for e in obs.entities), out.subgoal.mask) if m == 0]
    if not hidden:
        pytest.skip("sampled mask hid nothing")
    select = out.subgoal.select
    base_pi, _ = policy_heads(out.feats, params, select)
    perturbed = _perturb_entity(obs, hidden[0], ("blessed", "katana"))
    feats2 = featurize(perturbed, params.index)
    new_pi, _ = policy_heads(feats2, params, select)
    assert np.array_equal(base_pi.data, new_pi.data)  # bit-identical


def test_zero_mask_means_agent_only_features():
    obs = rtfm_obs()
    params = fresh_params(seed=8)
    feats = featurize(obs, params.index)
    zero_sel = Tensor(np.zeros(len(obs.entities)))
    base_pi, _ = policy_heads(feats, params, zero_sel)
    for e in obs.entities:
        perturbed = _perturb_entity(obs, e.uid, ("arcane", "spear"))
        pi, _ = policy_heads(featurize(perturbed, params.index), params, zero_sel)
        assert np.array_equal(base_pi.data, pi.data)


def test_full_loss_gradients_match_fd():
    obs = rtfm_obs()
    params = fresh_params(seed=12)
    noise = Rng(77).split("noise").gumbel((len(obs.entities), 2))

    def report(p, reg):
        out = decision_step(obs, p, tau=1.0, hard=False, noise=noise)
        return compute_losses(
            out, own_action=1, episode_return=0.7, others_actions=[2], params=p, reg_kind=reg
        )

    theta = params.flat()
    rng = np.random.default_rng(5)
    for reg in ("num", "dis"):
        rep = report(params, reg)
        flat = np.concatenate([rep.grads[k].ravel() for k in sorted(rep.grads)])
        for _ in range(5):
            v = rng.normal(size=theta.size)
            v /= np.linalg.norm(v)
            eps = 1e-5
            params.load_flat(theta + eps * v)
            up = report(params, reg).total
            params.load_flat(theta - eps * v)
            down = report(params, reg).total
            params.load_flat(theta)
            fd = (up - down) / (2 * eps)
            assert abs(fd - float(flat @ v)) / max(1.0, abs(fd), abs(float(flat @ v))) < 1e-6


def test_loss_report_lines_and_weights():
    obs = rtfm_obs()
    params = fresh_params(seed=2)
    out = decision_step(obs, params, tau=1.0, rng=Rng(1))
    weights = LossWeights(policy=0.5, opponent=2.0, kl=0.3, reg=0.0)
    rep = compute_losses(
        out, own_action=0, episode_return=-0.5, others_actions=[4], params=params, weights=weights
    )
    lines = rep.to_lines()
    assert any(line.startswith("opponent_nll=") for line in lines)
    expected = (
        0.5 * rep.policy_loss + 2.0 * rep.opponent_nll + 0.3 * rep.kl + 0.0 * rep.reg_relaxed
    )
    assert abs(rep.total - expected) < 1e-12


def test_checkpoint_round_trip(tmp_path):
    params = fresh_params(seed=6)
    path = tmp_path / "params.bin"
    save_checkpoint(params, str(path))
    loaded = load_checkpoint(str(path))
    assert loaded.vocab == params.vocab
    assert loaded.n_agents == params.n_agents
    for name, t in params.tensors.items():
        assert np.array_equal(loaded.tensors[name].data, t.data)
    # identical forward pass after reload
    obs = rtfm_obs()
    a = decision_step(obs, params, tau=1.0, rng=Rng(3))
    b = decision_step(obs, loaded, tau=1.0, rng=Rng(3))
    assert np.array_equal(a.pi_logits.data, b.pi_logits.data)
