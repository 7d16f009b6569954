"""Losses regularizing the subgoal division and the opponent heads.

Hard-mask variants report exact values; relaxed variants weight by the
selection probabilities so the objectives stay differentiable.
"""

from __future__ import annotations

import math

import numpy as np

from ..core import GridPos, manhattan
from .autodiff import Tensor, stack_rows

PROB_FLOOR = 1e-12


def selection_kl(probs: Tensor, n_agents: int) -> Tensor:
    """Sum over entities of KL(Bernoulli(p) || Bernoulli(1/n)).

    Zero exactly when every selection probability equals 1/n, which gives
    the division an expected size of n_entities / n_agents.
    """
    p = probs.data
    if np.any(p <= 0.0) or np.any(p >= 1.0):
        raise ValueError("selection probabilities must lie strictly inside (0, 1)")
    q = 1.0 / n_agents
    one = 1.0
    term = probs * (probs / q).log() + (one - probs) * ((one - probs) / (one - q)).log()
    return term.sum()


def count_balance(mask_self: np.ndarray, mask_others: np.ndarray, n_agents: int) -> float:
    """| |own entities| - |others' entities| / (n-1) | on hard masks."""
    if n_agents < 2:
        raise ValueError("count balance needs at least two agents")
    return abs(float(np.sum(mask_self)) - float(np.sum(mask_others)) / (n_agents - 1))


def count_balance_relaxed(probs: Tensor, n_agents: int) -> Tensor:
    if n_agents < 2:
        raise ValueError("count balance needs at least two agents")
    own = probs.sum()
    others = (1.0 - probs).sum()
    return (own - others * (1.0 / (n_agents - 1))).abs()


def _entity_distances(
    entity_pos: list[GridPos], agent_pos: GridPos, other_agent_pos: list[GridPos]
) -> tuple[np.ndarray, np.ndarray]:
    if not other_agent_pos:
        raise ValueError("travel cost needs at least one other agent")
    d_self = np.array([manhattan(e, agent_pos) for e in entity_pos], dtype=np.float64)
    d_other = np.array(
        [min(manhattan(e, o) for o in other_agent_pos) for e in entity_pos], dtype=np.float64
    )
    return d_self, d_other


def travel_cost(
    mask_self: np.ndarray,
    mask_others: np.ndarray,
    entity_pos: list[GridPos],
    agent_pos: GridPos,
    other_agent_pos: list[GridPos],
) -> float:
    """Total Manhattan distance to reach the divided entities: own entities
    from this agent, the rest from their closest other agent."""
    d_self, d_other = _entity_distances(entity_pos, agent_pos, other_agent_pos)
    return float(np.sum(mask_self * d_self) + np.sum(mask_others * d_other))


def travel_cost_relaxed(
    probs: Tensor,
    entity_pos: list[GridPos],
    agent_pos: GridPos,
    other_agent_pos: list[GridPos],
) -> Tensor:
    d_self, d_other = _entity_distances(entity_pos, agent_pos, other_agent_pos)
    return (probs * Tensor(d_self) + (1.0 - probs) * Tensor(d_other)).sum()


def opponent_nll(pred_dists: list[Tensor], actual_actions: list[int]) -> tuple[Tensor, bool]:
    """Summed negative log-likelihood of the other agents' actual actions.

    Probabilities are floored at 1e-12 to keep the value finite; the second
    return flags whether the floor was hit.
    """
    if len(pred_dists) != len(actual_actions):
        raise ValueError("one predicted distribution per other agent is required")
    floored = False
    terms = []
    for dist, action in zip(pred_dists, actual_actions):
        if not 0 <= action < dist.shape[0]:
            raise ValueError(f"action index {action} out of range")
        p = dist[action]
        if p.data <= PROB_FLOOR:
            floored = True
        terms.append(-(p.clamp_min(PROB_FLOOR).log()))
    return stack_rows(terms).sum(), floored


def uniform_nll(n_actions: int, n_others: int) -> float:
    """Reference value: NLL of uniform heads, n_others * ln(n_actions)."""
    return n_others * math.log(n_actions)
