"""Entity-level subgoal division: per-entity selection with relaxed binary
sampling and a straight-through hard mask.

Column 0 of each logit pair means "mine", column 1 "left to the others".
The hard mask is the argmax of the noise-perturbed logits, which makes the
marginal selection probability exactly sigmoid(logit margin) at any
temperature; gradients flow through the temperature-relaxed sample.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import Rng
from ..episode import Observation
from .autodiff import Tensor, concat_cols, const_matmul, softmax, straight_through
from .features import ObsFeatures
from .params import DecisionParams


@dataclass
class SubgoalState:
    logits: Tensor  # (E, 2)
    probs: Tensor  # (E,) selection probabilities, in (0, 1)
    relaxed: Tensor  # (E, 2) Gumbel-Softmax sample, rows on the simplex
    mask: np.ndarray  # (E,) hard binary selection
    select: Tensor  # (E,) selection column: straight-through or relaxed
    tau: float
    noise: np.ndarray  # (E, 2) the Gumbel draws, kept for replay

    @property
    def complement(self) -> np.ndarray:
        return 1 - self.mask


def subgoal_logits(
    x_self: Tensor, x_others: Tensor, feats: ObsFeatures, params: DecisionParams
) -> Tensor:
    """One 2-way logit pair per live entity, read from the mixture map at the
    entity's cell."""
    if x_self.shape != x_others.shape:
        raise ValueError("goal representations disagree on shape")
    mixture = concat_cols(x_self, x_others) @ params["w_mix"] + params["b_mix"]
    if feats.n_entities == 0:
        return Tensor(np.zeros((0, 2)))
    gather = np.zeros((feats.n_entities, feats.n_cells))
    for j, cell in enumerate(feats.entity_cells):
        gather[j, cell] = 1.0
    return const_matmul(gather, mixture)


def sample_subgoal_mask(
    logits: Tensor,
    tau: float,
    rng: Rng | None = None,
    noise: np.ndarray | None = None,
    hard: bool = True,
) -> SubgoalState:
    """Per-entity two-way Gumbel-Softmax at temperature tau.

    ``hard`` keeps the forward pass binary (straight-through); pass
    ``hard=False`` for the fully relaxed pathway used in gradient checks.
    Noise can be pinned explicitly for tests; otherwise it is drawn from rng.
    """
    if tau <= 0:
        raise ValueError("temperature must be positive")
    n = logits.shape[0]
    if noise is None:
        if rng is None:
            raise ValueError("need an rng when noise is not pinned")
        noise = rng.split("gumbel").gumbel((n, 2))
    noise = np.asarray(noise, dtype=np.float64)
    if noise.shape != (n, 2):
        raise ValueError(f"noise shape {noise.shape} != {(n, 2)}")

    relaxed = softmax((logits + Tensor(noise)) * (1.0 / tau), axis=-1)
    margin = logits[:, 0] - logits[:, 1]
    probs = margin.sigmoid()
    hard_mask = (np.argmax(logits.data + noise, axis=1) == 0).astype(np.int64)
    if hard:
        select = straight_through(hard_mask.astype(np.float64), relaxed[:, 0])
    else:
        select = relaxed[:, 0]
    return SubgoalState(
        logits=logits,
        probs=probs,
        relaxed=relaxed,
        mask=hard_mask,
        select=select,
        tau=float(tau),
        noise=noise,
    )


def apply_entity_mask(obs: Observation, mask: np.ndarray) -> tuple[Observation, Observation]:
    """Split an observation into (own view, others' view).

    The own view keeps entities with mask 1, the others' view those with
    mask 0; agents are never masked.  Mask order follows entity uid order.
    """
    ents = sorted(obs.entities, key=lambda e: e.uid)
    if len(mask) != len(ents):
        raise ValueError("mask does not cover the live entities")

    def rebuild(keep: list) -> Observation:
        grid = [[[] for _ in range(obs.width)] for _ in range(obs.height)]
        for e in keep:
            token = e.tokens[0] if obs.env == "messenger" else " ".join(e.tokens)
            value = int(token[3:]) if obs.env == "messenger" else token
            grid[e.row][e.col].append(value)
        if obs.env == "messenger":
            from ..messenger import AGENT_MESSAGE_OFFSET, AGENT_SYMBOL_BASE

            for i, (r, c) in enumerate(obs.agents):
                sym = AGENT_SYMBOL_BASE + i + (AGENT_MESSAGE_OFFSET if obs.has_message[i] else 0)
                grid[r][c].append(sym)
        return Observation(
            env=obs.env,
            self_id=obs.self_id,
            height=obs.height,
            width=obs.width,
            grid=tuple(tuple(tuple(cell) for cell in row) for row in grid),
            agents=obs.agents,
            has_message=obs.has_message,
            inventory=obs.inventory,
            entities=tuple(keep),
            document=obs.document,
            goal=obs.goal,
        )

    own = [e for e, m in zip(ents, mask) if m == 1]
    others = [e for e, m in zip(ents, mask) if m == 0]
    return rebuild(own), rebuild(others)
