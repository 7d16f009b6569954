"""Episodic REINFORCE over the wire protocol, with the full decision-core
loss stack: policy gradient on the action head, supervised opponent
modeling, and the division regularizers.

One independent model is trained per agent.  Collection and update are two
passes over each episode: featurization and Gumbel noise are cached during
collection, so the update pass replays the exact same stochastic decisions
with gradients attached.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from magrid.core import Rng
from magrid.decision import (
    DecisionParams,
    LossWeights,
    compute_losses,
    decision_step,
    featurize,
    init_params,
    save_checkpoint,
)
from magrid.decision.autodiff import log_softmax, softmax
from magrid.manuals import vocabulary

from .client import EnvClient

ACTIONS = ("up", "down", "left", "right", "stay")


@dataclass(frozen=True)
class TrainConfig:
    env: str = "rtfm"
    stage: str = "S1"
    split: str = "train"
    n_agents: int = 2
    total_steps: int = 50_000
    episode_cap: int = 150
    lr: float = 0.05
    gamma: float = 0.99
    weights: LossWeights = LossWeights(policy=1.0, opponent=1.0, kl=0.1, reg=0.1)
    reg_kind: str = "dis"
    tau_start: float = 1.0
    tau_end: float = 0.5
    entropy_weight: float = 0.01
    grad_clip: float = 5.0
    baseline_decay: float = 0.95
    init_scale: float = 0.3
    head_lr_mult: float = 1.0  # optional faster action/opponent heads
    explore_eps: float = 0.2  # behavior policy mixes in uniform actions
    batch_episodes: int = 4  # episodes accumulated per parameter update
    seed: int = 0
    eval_every: int = 10_000
    eval_episodes: int = 30

    def tau_at(self, step: int) -> float:
        frac = min(1.0, step / max(1, self.total_steps))
        return self.tau_start + (self.tau_end - self.tau_start) * frac


@dataclass
class EpisodeStats:
    index: int
    env_steps: int
    steps: int
    win: bool
    returns: list[float]
    nll: float
    kl: float
    reg_hard: float
    mask_fraction: float
    conflict_fraction: float
    total_loss: float


@dataclass
class CurvePoint:
    env_steps: int
    episodes: int
    train_win_rate: float
    eval_win_rate: float
    nll: float
    tau: float

    def to_line(self) -> str:
        return (
            f"step={self.env_steps} episodes={self.episodes}"
            f" train_win_rate={self.train_win_rate:.4f}"
            f" eval_win_rate={self.eval_win_rate:.4f}"
            f" opponent_nll={self.nll:.4f} tau={self.tau:.3f}"
        )


@dataclass
class TrainResult:
    config: TrainConfig
    curve: list[CurvePoint]
    episodes: list[EpisodeStats]
    params: list[DecisionParams]
    final_eval_win_rate: float
    wall_seconds: float

    def episode_nll_series(self) -> list[float]:
        return [e.nll for e in self.episodes]

    def smoothed_nll_blocks(self, window: int = 100) -> list[float]:
        series = self.episode_nll_series()
        blocks = []
        for start in range(0, len(series) - window + 1, window):
            blocks.append(float(np.mean(series[start : start + window])))
        if not blocks and series:
            blocks = [float(np.mean(series))]
        return blocks

    def mean_mask_fraction(self) -> float:
        return float(np.mean([e.mask_fraction for e in self.episodes]))

    def mean_conflict_fraction(self) -> float:
        return float(np.mean([e.conflict_fraction for e in self.episodes]))

    def curve_text(self) -> str:
        return "\n".join(p.to_line() for p in self.curve) + "\n"


class _AgentModel:
    def __init__(self, params: DecisionParams, config: TrainConfig):
        self.params = params
        self.config = config
        # Per-timestep return baseline: with a constant step penalty the
        # discounted return rises toward zero over the episode, so a scalar
        # baseline systematically credits late (idle) steps; indexing the
        # baseline by t removes that bias.
        self.baseline = np.zeros(config.episode_cap)
        self.seen = np.zeros(config.episode_cap, dtype=bool)
        self.var = 1.0

    def advantage(self, g: float, t: int) -> float:
        if not self.seen[t]:
            self.baseline[t] = g
            self.seen[t] = True
        adv = g - self.baseline[t]
        decay = self.config.baseline_decay
        self.baseline[t] = decay * self.baseline[t] + (1 - decay) * g
        self.var = decay * self.var + (1 - decay) * adv * adv
        return float(np.clip(adv / max(1.0, float(np.sqrt(self.var))), -3.0, 3.0))

    def apply_grads(self, grads: dict[str, np.ndarray], scale: float) -> None:
        norm = np.sqrt(sum(float((g * g).sum()) for g in grads.values())) * scale
        clip = self.config.grad_clip
        factor = scale * (clip / norm if norm > clip else 1.0)
        mult = self.config.head_lr_mult
        for name, g in grads.items():
            lr = self.config.lr * (mult if name.startswith(("w_self", "b_self", "w_oth", "b_oth")) else 1.0)
            self.params.tensors[name].data -= lr * factor * g


def _sample_action(logits: np.ndarray, rng: Rng, eps: float = 0.0) -> int:
    z = logits - logits.max()
    p = np.exp(z)
    p /= p.sum()
    if eps:
        p = (1.0 - eps) * p + eps / len(p)
    u = rng.uniform()
    return int(np.searchsorted(np.cumsum(p), u, side="right").clip(0, len(p) - 1))


def _discounted_returns(rewards: list[float], gamma: float) -> list[float]:
    out = [0.0] * len(rewards)
    acc = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        acc = rewards[t] + gamma * acc
        out[t] = acc
    return out


def _collect_episode(
    client: EnvClient,
    models: list[_AgentModel],
    config: TrainConfig,
    seed: int,
    rng: Rng,
    tau: float,
):
    reset = client.reset(
        config.env, config.stage, seed, split=config.split, n_agents=config.n_agents
    )
    observations = reset.observations
    steps = []
    rewards_per_agent: list[list[float]] = [[] for _ in models]
    win = False
    for t in range(config.episode_cap):
        feats, noises, actions = [], [], []
        for i, model in enumerate(models):
            f = featurize(observations[i], model.params.index)
            noise = rng.split(f"noise/{t}/{i}").gumbel((f.n_entities, 2))
            out = decision_step(f, model.params, tau=tau, noise=noise, hard=True)
            a = _sample_action(out.pi_logits.data, rng.split(f"act/{t}/{i}"), config.explore_eps)
            feats.append(f)
            noises.append(noise)
            actions.append(a)
        reply = client.step([ACTIONS[a] for a in actions])
        steps.append((feats, noises, actions))
        for i in range(len(models)):
            rewards_per_agent[i].append(reply.rewards[i])
        observations = reply.observations
        if reply.done:
            win = reply.win
            break
    return steps, rewards_per_agent, win


def _update_from_episode(
    models: list[_AgentModel],
    steps,
    rewards_per_agent,
    config: TrainConfig,
    tau: float,
):
    n_steps = len(steps)
    stats = {
        "nll": 0.0,
        "kl": 0.0,
        "reg_hard": 0.0,
        "mask": 0.0,
        "conflict": 0.0,
        "total": 0.0,
    }
    returns = [
        _discounted_returns(rewards_per_agent[i], config.gamma) for i in range(len(models))
    ]
    masks_per_step: list[list[np.ndarray]] = []
    for t, (feats, noises, actions) in enumerate(steps):
        step_masks = []
        for i, model in enumerate(models):
            out = decision_step(feats[i], model.params, tau=tau, noise=noises[i], hard=True)
            adv = model.advantage(returns[i][t], t)
            others = [actions[j] for j in range(len(models)) if j != i]
            report = compute_losses(
                out,
                own_action=actions[i],
                episode_return=adv,
                others_actions=others,
                params=model.params,
                weights=config.weights,
                reg_kind=config.reg_kind,
                accumulate=True,
            )
            if config.entropy_weight:
                p = softmax(out.pi_logits)
                logp = log_softmax(out.pi_logits)
                ((p * logp).sum() * config.entropy_weight).backward()
            stats["nll"] += report.opponent_nll
            stats["kl"] += report.kl
            stats["reg_hard"] += report.reg_hard
            stats["total"] += report.total
            stats["mask"] += float(out.subgoal.mask.mean()) if len(out.subgoal.mask) else 0.0
            step_masks.append(out.subgoal.mask)
        masks_per_step.append(step_masks)
        if len(models) == 2 and len(step_masks[0]):
            both = np.logical_and(step_masks[0] == 1, step_masks[1] == 1)
            stats["conflict"] += float(both.mean())
    denom = max(1, n_steps * len(models))
    return {
        "nll": stats["nll"] / denom,
        "kl": stats["kl"] / denom,
        "reg_hard": stats["reg_hard"] / denom,
        "total": stats["total"] / denom,
        "mask": stats["mask"] / denom,
        "conflict": stats["conflict"] / max(1, n_steps),
    }


def greedy_eval(
    client: EnvClient,
    models: list[_AgentModel],
    config: TrainConfig,
    episodes: int,
    seed_rng: Rng,
    tau: float,
    sample: bool = True,
) -> float:
    """Win rate of the current policy; sampled actions by default (the
    trained object is a stochastic policy), argmax with sample=False."""
    wins = 0
    for e in range(episodes):
        er = seed_rng.split(f"eval{e}")
        seed = er.integers(2**31)
        reset = client.reset(
            config.env, config.stage, seed, split=config.split, n_agents=config.n_agents
        )
        observations = reset.observations
        for t in range(config.episode_cap):
            actions = []
            for i, model in enumerate(models):
                f = featurize(observations[i], model.params.index)
                noise = er.split(f"noise/{t}/{i}").gumbel((f.n_entities, 2))
                out = decision_step(f, model.params, tau=tau, noise=noise, hard=True)
                if sample:
                    actions.append(_sample_action(out.pi_logits.data, er.split(f"act/{t}/{i}")))
                else:
                    actions.append(out.greedy_action())
            reply = client.step([ACTIONS[a] for a in actions])
            observations = reply.observations
            if reply.done:
                wins += 1 if reply.win else 0
                break
    return wins / max(1, episodes)


def train(
    config: TrainConfig,
    host: str,
    port: int,
    checkpoint_path: str | None = None,
    log_every: int = 0,
) -> TrainResult:
    start = time.time()
    vocab = vocabulary(config.env, config.split, n_agents=max(3, config.n_agents))
    root = Rng(config.seed)
    models = [
        _AgentModel(
            init_params(
                vocab,
                root.split(f"init{i}"),
                n_agents=config.n_agents,
                scale=config.init_scale,
            ),
            config,
        )
        for i in range(config.n_agents)
    ]
    curve: list[CurvePoint] = []
    episodes: list[EpisodeStats] = []
    env_steps = 0
    episode_index = 0
    next_eval = config.eval_every
    recent_wins: list[bool] = []

    batch_count = 0
    with EnvClient(host, port) as client, EnvClient(host, port) as eval_client:
        for model in models:
            model.params.zero_grads()
        while env_steps < config.total_steps:
            tau = config.tau_at(env_steps)
            ep_rng = root.split(f"ep{episode_index}")
            seed = ep_rng.integers(2**31)
            steps, rewards, win = _collect_episode(
                client, models, config, seed, ep_rng, tau
            )
            if not steps:
                episode_index += 1
                continue
            metrics = _update_from_episode(models, steps, rewards, config, tau)
            batch_count += 1
            if batch_count >= config.batch_episodes:
                for model in models:
                    model.apply_grads(
                        model.params.grads(), scale=1.0 / max(1, batch_count * len(steps))
                    )
                    model.params.zero_grads()
                batch_count = 0
            env_steps += len(steps)
            episode_index += 1
            recent_wins.append(win)
            episodes.append(
                EpisodeStats(
                    index=episode_index,
                    env_steps=env_steps,
                    steps=len(steps),
                    win=win,
                    returns=[sum(r) for r in rewards],
                    nll=metrics["nll"],
                    kl=metrics["kl"],
                    reg_hard=metrics["reg_hard"],
                    mask_fraction=metrics["mask"],
                    conflict_fraction=metrics["conflict"],
                    total_loss=metrics["total"],
                )
            )
            if env_steps >= next_eval or env_steps >= config.total_steps:
                eval_rate = greedy_eval(
                    eval_client,
                    models,
                    config,
                    config.eval_episodes,
                    root.split(f"evalpt{len(curve)}"),
                    tau,
                )
                window = recent_wins[-100:]
                point = CurvePoint(
                    env_steps=env_steps,
                    episodes=episode_index,
                    train_win_rate=sum(window) / len(window),
                    eval_win_rate=eval_rate,
                    nll=float(np.mean([e.nll for e in episodes[-100:]])),
                    tau=tau,
                )
                curve.append(point)
                if log_every:
                    print(point.to_line(), flush=True)
                next_eval += config.eval_every

        final_eval = curve[-1].eval_win_rate if curve else greedy_eval(
            eval_client, models, config, config.eval_episodes, root.split("finaleval"), config.tau_at(env_steps)
        )

    if checkpoint_path:
        save_checkpoint(models[0].params, checkpoint_path)
    return TrainResult(
        config=config,
        curve=curve,
        episodes=episodes,
        params=[m.params for m in models],
        final_eval_win_rate=final_eval,
        wall_seconds=time.time() - start,
    )


@dataclass
class AblationReport:
    mode: str
    base_win_rate: float
    ablated_win_rate: float
    base_mask_fraction: float
    ablated_mask_fraction: float
    base_conflict_fraction: float
    ablated_conflict_fraction: float

    def to_lines(self) -> list[str]:
        return [
            f"mode={self.mode}",
            f"base_win_rate={self.base_win_rate:.4f}",
            f"ablated_win_rate={self.ablated_win_rate:.4f}",
            f"base_mask_fraction={self.base_mask_fraction:.4f}",
            f"ablated_mask_fraction={self.ablated_mask_fraction:.4f}",
            f"base_conflict_fraction={self.base_conflict_fraction:.4f}",
            f"ablated_conflict_fraction={self.ablated_conflict_fraction:.4f}",
        ]


ABLATION_MODES = ("no_opponent", "no_regularizer")


def ablate(config: TrainConfig, host: str, port: int, mode: str) -> AblationReport:
    """Train twice, with and without the named loss, and compare."""
    if mode not in ABLATION_MODES:
        raise ValueError(f"unknown ablation mode {mode!r}")
    if mode == "no_opponent":
        ablated_weights = replace(config.weights, opponent=0.0)
    else:
        ablated_weights = replace(config.weights, kl=0.0, reg=0.0)
    base = train(config, host, port)
    ablated = train(replace(config, weights=ablated_weights), host, port)
    return AblationReport(
        mode=mode,
        base_win_rate=base.final_eval_win_rate,
        ablated_win_rate=ablated.final_eval_win_rate,
        base_mask_fraction=base.mean_mask_fraction(),
        ablated_mask_fraction=ablated.mean_mask_fraction(),
        base_conflict_fraction=base.mean_conflict_fraction(),
        ablated_conflict_fraction=ablated.mean_conflict_fraction(),
    )
