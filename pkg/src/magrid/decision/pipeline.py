"""End-to-end decision pass for one agent: featurize, ground twice with
positional channels, divide entities, ground the masked views, pool, and
run the action and opponent heads.  Pure given (inputs, params, noise)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core import GridPos, Rng
from ..episode import Observation
from .autodiff import Tensor, log_softmax, softmax
from .features import ObsFeatures, featurize
from .autodiff import concat_cols
from .grounding import direction_features, ground_cells
from .losses import (
    count_balance,
    count_balance_relaxed,
    opponent_nll,
    selection_kl,
    travel_cost,
    travel_cost_relaxed,
)
from .params import DecisionParams
from .subgoal import SubgoalState, sample_subgoal_mask, subgoal_logits


@dataclass
class DecisionOutput:
    pi_logits: Tensor  # (5,) action logits for this agent
    others_probs: list[Tensor]  # one 5-way distribution per other agent
    subgoal: SubgoalState
    feats: ObsFeatures

    def greedy_action(self) -> int:
        return int(np.argmax(self.pi_logits.data))

    def action_probs(self) -> np.ndarray:
        return softmax(self.pi_logits).data


@dataclass(frozen=True)
class LossWeights:
    policy: float = 1.0
    opponent: float = 1.0
    kl: float = 0.1
    reg: float = 0.1


@dataclass
class LossReport:
    """Values and parameter gradients from one decision step."""

    policy_loss: float
    opponent_nll: float
    kl: float
    reg_kind: str
    reg_relaxed: float
    reg_hard: float
    total: float
    prob_floored: bool
    grads: dict[str, np.ndarray] = field(default_factory=dict)

    def to_lines(self) -> list[str]:
        return [
            f"policy_loss={self.policy_loss}",
            f"opponent_nll={self.opponent_nll}",
            f"kl={self.kl}",
            f"reg_kind={self.reg_kind}",
            f"reg_relaxed={self.reg_relaxed}",
            f"reg_hard={self.reg_hard}",
            f"total={self.total}",
            f"prob_floored={int(self.prob_floored)}",
        ]


def policy_heads(
    feats: ObsFeatures, params: DecisionParams, select: Tensor
) -> tuple[Tensor, list[Tensor]]:
    """Action logits and opponent distributions from a fixed entity split.

    ``select`` scales each entity's contribution in the own view; its
    complement feeds the others' view.  With a hard straight-through select,
    masked-out entities contribute exactly zero.  The pooled feature vector
    per view is the spatial max of the grounded map concatenated with the
    potential-field direction aggregates.
    """
    d = params.feat_dim

    def pooled(scale: Tensor) -> Tensor:
        x = ground_cells(feats, params, entity_scale=scale)
        flat = x.max_over_rows().reshape(1, d)
        dirs = direction_features(feats, params, entity_scale=scale).reshape(1, 64)
        return concat_cols(flat, dirs)

    f_self = pooled(select)
    f_others = pooled(1.0 - select)
    pi = (f_self @ params["w_self"] + params["b_self"]).reshape(params.tensors["b_self"].shape[0])
    others = []
    for k in range(params.n_agents - 1):
        logits_k = f_others @ params[f"w_oth{k}"] + params[f"b_oth{k}"]
        others.append(softmax(logits_k.reshape(logits_k.shape[1])))
    return pi, others


def decision_step(
    obs: Observation | ObsFeatures,
    params: DecisionParams,
    tau: float = 1.0,
    rng: Rng | None = None,
    hard: bool = True,
    noise: np.ndarray | None = None,
) -> DecisionOutput:
    if isinstance(obs, ObsFeatures):
        feats = obs
    else:
        if len(obs.agents) != params.n_agents:
            raise ValueError(
                f"observation has {len(obs.agents)} agents, parameters expect {params.n_agents}"
            )
        feats = featurize(obs, params.index)
    if len(feats.other_pos) + 1 != params.n_agents:
        raise ValueError("agent count mismatch between features and parameters")
    x_goal_self = ground_cells(feats, params, extra_channel=feats.pos_self)
    x_goal_others = ground_cells(
        feats,
        params,
        extra_channel=feats.pos_others if feats.pos_others is not None else feats.pos_self,
    )
    logits = subgoal_logits(x_goal_self, x_goal_others, feats, params)
    subgoal = sample_subgoal_mask(logits, tau, rng=rng, noise=noise, hard=hard)
    pi, others = policy_heads(feats, params, subgoal.select)
    return DecisionOutput(pi_logits=pi, others_probs=others, subgoal=subgoal, feats=feats)


def compute_losses(
    output: DecisionOutput,
    own_action: int,
    episode_return: float,
    others_actions: list[int],
    params: DecisionParams,
    weights: LossWeights = LossWeights(),
    reg_kind: str = "dis",
    accumulate: bool = False,
) -> LossReport:
    """Weighted training loss for one step, with gradients for every
    parameter.  The policy term is the score-function surrogate
    -log pi(a) * return; pass the centered return for a baselined update."""
    if reg_kind not in ("num", "dis"):
        raise ValueError(f"unknown regularizer kind {reg_kind!r}")
    feats = output.feats
    n = params.n_agents
    sg = output.subgoal

    logp = log_softmax(output.pi_logits)[own_action]
    policy_term = -logp * float(episode_return)
    nll, floored = opponent_nll(output.others_probs, others_actions)
    kl = selection_kl(sg.probs, n)
    entity_pos = [
        GridPos(r // feats.width, r % feats.width) for r in feats.entity_cells
    ]
    if reg_kind == "num":
        reg_relaxed = count_balance_relaxed(sg.probs, n)
        reg_hard = count_balance(sg.mask, sg.complement, n)
    else:
        reg_relaxed = travel_cost_relaxed(
            sg.probs, entity_pos, feats.self_pos, list(feats.other_pos)
        )
        reg_hard = travel_cost(
            sg.mask, sg.complement, entity_pos, feats.self_pos, list(feats.other_pos)
        )

    total = (
        policy_term * weights.policy
        + nll * weights.opponent
        + kl * weights.kl
        + reg_relaxed * weights.reg
    )
    if not accumulate:
        params.zero_grads()
    total.backward()
    report = LossReport(
        policy_loss=policy_term.item(),
        opponent_nll=nll.item(),
        kl=kl.item(),
        reg_kind=reg_kind,
        reg_relaxed=reg_relaxed.item(),
        reg_hard=float(reg_hard),
        total=total.item(),
        prob_floored=floored,
        grads=params.grads(),
    )
    if not np.isfinite(report.total):
        raise FloatingPointError("non-finite decision loss")
    return report
