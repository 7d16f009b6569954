"""Observation featurization: token-count matrices consumed by grounding.

Everything here is plain numpy (no gradients); the split between the static
channel (agents, the observer's inventory) and per-entity rows is what lets
entity masks scale their contributions differentiably downstream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import GridPos, joint_positional_feature, positional_feature
from ..episode import Observation
from ..manuals import tokenize


@dataclass(frozen=True)
class ObsFeatures:
    height: int
    width: int
    self_id: int
    self_pos: GridPos
    other_pos: tuple[GridPos, ...]
    entity_uids: tuple[int, ...]
    entity_cells: tuple[int, ...]  # flattened cell index per entity
    static_counts: np.ndarray  # (cells, V) agent + inventory tokens
    entity_counts: np.ndarray  # (E, V) token counts per entity
    cell_of_entity: np.ndarray  # (cells, E) one-hot placement
    manual_counts: np.ndarray  # (V,) bag over document sentences
    goal_counts: np.ndarray  # (V,)
    # sentence co-occurrence chains, one value per entity: how many manual
    # sentences mention both the entity and (a) the observer's inventory,
    # (b) the goal sentence's words
    inv_chain: np.ndarray  # (E,)
    goal_chain: np.ndarray  # (E,)
    pos_self: np.ndarray  # (cells,) normalized distances from the observer
    pos_others: np.ndarray | None  # (cells,) joint distances, None when alone
    delta_row: np.ndarray  # (cells,) normalized row offset from the observer
    delta_col: np.ndarray
    # direction kernels from the observer's cell: four inverse-square
    # attraction fields (up/down/left/right) and four adjacent-cell
    # indicators, used for potential-field style pooled features
    dir_kernels: np.ndarray  # (8, cells)
    agent_presence: np.ndarray  # (cells,) other agents' cells

    @property
    def n_cells(self) -> int:
        return self.height * self.width

    @property
    def n_entities(self) -> int:
        return len(self.entity_uids)


_STOPWORDS = frozenset(
    "the a an of to is it and for with in on that all no by as its be may us you".split()
)


def _count_into(vec: np.ndarray, tokens, index: dict[str, int]) -> None:
    for tok in tokens:
        idx = index.get(tok)
        if idx is None:
            raise ValueError(f"unknown token {tok!r}: vocabulary is closed per split")
        vec[idx] += 1.0


def featurize(obs: Observation, index: dict[str, int]) -> ObsFeatures:
    h, w = obs.height, obs.width
    cells = h * w
    v = len(index)

    static = np.zeros((cells, v))
    for i, (r, c) in enumerate(obs.agents):
        tok = f"agent{i}m" if obs.has_message[i] else f"agent{i}"
        _count_into(static[r * w + c], [tok], index)
    if obs.inventory:
        r, c = obs.agents[obs.self_id]
        _count_into(static[r * w + c], tokenize(obs.inventory), index)

    ents = sorted(obs.entities, key=lambda e: e.uid)
    entity_counts = np.zeros((len(ents), v))
    placement = np.zeros((cells, len(ents)))
    entity_cells = []
    for j, e in enumerate(ents):
        _count_into(entity_counts[j], e.tokens, index)
        cell = e.row * w + e.col
        placement[cell, j] = 1.0
        entity_cells.append(cell)

    manual_counts = np.zeros(v)
    sentence_tokens: list[set[str]] = []
    for sentence in obs.document:
        toks = tokenize(sentence)
        _count_into(manual_counts, toks, index)
        sentence_tokens.append(set(toks))
    goal_counts = np.zeros(v)
    goal_tokens = tokenize(obs.goal)
    _count_into(goal_counts, goal_tokens, index)

    inv_tokens = set(tokenize(obs.inventory)) if obs.inventory else set()
    goal_set = set(goal_tokens) - _STOPWORDS
    inv_chain = np.zeros(len(ents))
    goal_chain = np.zeros(len(ents))
    for j, e in enumerate(ents):
        ent_set = set(e.tokens)
        for s in sentence_tokens:
            if ent_set & s:
                if inv_tokens & s:
                    inv_chain[j] += 1.0
                if goal_set & s:
                    goal_chain[j] += 1.0

    self_pos = GridPos(*obs.agents[obs.self_id])
    others = [GridPos(*p) for i, p in enumerate(obs.agents) if i != obs.self_id]
    norm = float(h + w)
    pos_self = positional_feature(self_pos, h, w).reshape(-1) / norm
    pos_others = (
        joint_positional_feature(others, h, w).reshape(-1) / norm if others else None
    )
    rows = np.repeat(np.arange(h), w)
    cols = np.tile(np.arange(w), h)
    delta_row = (rows - self_pos.row) / norm
    delta_col = (cols - self_pos.col) / norm

    raw_dr = rows - self_pos.row
    raw_dc = cols - self_pos.col
    dist = np.abs(raw_dr) + np.abs(raw_dc)
    inv_sq = np.zeros(cells)
    np.divide(1.0, dist.astype(float) ** 2, out=inv_sq, where=dist > 0)
    kernels = np.zeros((8, cells))
    kernels[0] = np.maximum(-raw_dr, 0) * inv_sq  # up
    kernels[1] = np.maximum(raw_dr, 0) * inv_sq  # down
    kernels[2] = np.maximum(-raw_dc, 0) * inv_sq  # left
    kernels[3] = np.maximum(raw_dc, 0) * inv_sq  # right
    for k, (dr, dc) in enumerate(((-1, 0), (1, 0), (0, -1), (0, 1))):
        r, c = self_pos.row + dr, self_pos.col + dc
        if 0 <= r < h and 0 <= c < w:
            kernels[4 + k, r * w + c] = 1.0
    agent_presence = np.zeros(cells)
    for i, (r, c) in enumerate(obs.agents):
        if i != obs.self_id:
            agent_presence[r * w + c] += 1.0

    return ObsFeatures(
        height=h,
        width=w,
        self_id=obs.self_id,
        self_pos=self_pos,
        other_pos=tuple(others),
        entity_uids=tuple(e.uid for e in ents),
        entity_cells=tuple(entity_cells),
        static_counts=static,
        entity_counts=entity_counts,
        cell_of_entity=placement,
        manual_counts=manual_counts,
        goal_counts=goal_counts,
        inv_chain=inv_chain,
        goal_chain=goal_chain,
        pos_self=pos_self,
        pos_others=pos_others,
        delta_row=delta_row,
        delta_col=delta_col,
        dir_kernels=kernels,
        agent_presence=agent_presence,
    )
