"""Toy language grounding: per-cell features tying the grid to the manual.

Each cell's feature vector is linear in the parameters and combines its
token embeddings, manual/goal token-overlap scores, products with the cell's
offset from the observing agent (so pooled features stay direction-aware),
a pooled manual-bag context, and an optional extra positional channel.
Entity contributions can be scaled per entity, which is how masks enter.
"""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor, concat_cols, const_matmul, scale_rows
from .features import ObsFeatures
from .params import DecisionParams


def ground_cells(
    feats: ObsFeatures,
    params: DecisionParams,
    entity_scale: Tensor | None = None,
    extra_channel: np.ndarray | None = None,
) -> Tensor:
    """(cells, d) grounded representation; pure in (inputs, params)."""
    emb = params["emb"]
    ent = Tensor(feats.entity_counts)
    if entity_scale is not None:
        if entity_scale.shape != (feats.n_entities,):
            raise ValueError(
                f"entity scale shape {entity_scale.shape} != ({feats.n_entities},)"
            )
        ent = scale_rows(feats.entity_counts, entity_scale)

    ent_emb = ent @ emb  # (E, de)
    cell_emb = const_matmul(feats.static_counts, emb) + const_matmul(
        feats.cell_of_entity, ent_emb
    )  # (cells, de)

    man_vec = feats.manual_counts[:, None]  # (V, 1)
    goal_vec = feats.goal_counts[:, None]
    # overlap = counts @ manual_counts, split into static (constant) and
    # entity (mask-scaled) contributions
    static_man = feats.static_counts @ feats.manual_counts  # (cells,)
    static_goal = feats.static_counts @ feats.goal_counts
    ent_man = const_matmul(feats.cell_of_entity, ent @ Tensor(man_vec))  # (cells, 1)
    ent_goal = const_matmul(feats.cell_of_entity, ent @ Tensor(goal_vec))
    overlap_man = ent_man + Tensor(static_man[:, None])
    overlap_goal = ent_goal + Tensor(static_goal[:, None])

    x = cell_emb @ params["w_cell"]
    x = x + (Tensor(feats.delta_row[:, None]) * cell_emb) @ params["w_drow"]
    x = x + (Tensor(feats.delta_col[:, None]) * cell_emb) @ params["w_dcol"]
    x = x + overlap_man @ params["v_man"]
    x = x + overlap_goal @ params["v_goal"]

    # manual-chain channels: sentence co-occurrence of each entity with the
    # observer's inventory and with the goal words, with offset products so
    # pooled features keep the direction toward chained entities
    for vec, stem in ((feats.inv_chain, "inv"), (feats.goal_chain, "goal")):
        chain = vec[:, None]  # (E, 1)
        if entity_scale is not None:
            cells_chain = const_matmul(feats.cell_of_entity, scale_rows(chain, entity_scale))
        else:
            cells_chain = Tensor(feats.cell_of_entity @ chain)
        x = x + cells_chain @ params[f"v_{stem}_chain"]
        x = x + (Tensor(feats.delta_row[:, None]) * cells_chain) @ params[f"v_{stem}_chain_r"]
        x = x + (Tensor(feats.delta_col[:, None]) * cells_chain) @ params[f"v_{stem}_chain_c"]

    total = max(1.0, float(feats.manual_counts.sum()))
    bag = Tensor(feats.manual_counts[None, :] / total) @ emb  # (1, de)
    x = x + bag @ params["w_bag"]

    if extra_channel is not None:
        extra = np.asarray(extra_channel, dtype=np.float64).reshape(-1)
        if extra.shape[0] != feats.n_cells:
            raise ValueError("extra channel does not cover the grid")
        x = x + Tensor(extra[:, None]) @ params["v_pos"]
    return x


def ground(
    feats: ObsFeatures,
    params: DecisionParams,
    entity_scale: Tensor | None = None,
    extra_channel: np.ndarray | None = None,
) -> Tensor:
    """(h, w, d) grounded representation."""
    x = ground_cells(feats, params, entity_scale, extra_channel)
    return x.reshape(feats.height, feats.width, params.feat_dim)


N_SCALAR_CHANNELS = 8  # inv/goal chains, manual overlap, agents, 4 learned


def direction_features(
    feats: ObsFeatures, params: DecisionParams, entity_scale: Tensor | None = None
) -> Tensor:
    """Potential-field aggregates: each per-cell scalar channel summed under
    the eight direction kernels (inverse-square attraction + adjacency).

    Nearby entities dominate the four attraction fields, so a linear head
    can read these as a compass toward the nearest chained/overlapping
    entity.  Entity-borne channels scale with the mask exactly like the
    grounded map does.
    """
    emb = params["emb"]
    ent = Tensor(feats.entity_counts)
    if entity_scale is not None:
        ent = scale_rows(feats.entity_counts, entity_scale)

    # chains carry no parameters; scale them by the mask explicitly
    chain_inv = (
        scale_rows(feats.inv_chain[:, None], entity_scale)
        if entity_scale is not None
        else Tensor(feats.inv_chain[:, None])
    )
    chain_goal = (
        scale_rows(feats.goal_chain[:, None], entity_scale)
        if entity_scale is not None
        else Tensor(feats.goal_chain[:, None])
    )
    overlap = ent @ Tensor(feats.manual_counts[:, None])
    proj = ent @ (emb @ params["w_sc"])  # (E, 4) learned scalar projections

    ent_channels = concat_cols(concat_cols(chain_inv, chain_goal), concat_cols(overlap, proj))
    cell_channels = const_matmul(feats.cell_of_entity, ent_channels)  # (cells, 7)
    cell_channels = concat_cols(cell_channels, Tensor(feats.agent_presence[:, None]))
    return const_matmul(feats.dir_kernels, cell_channels).reshape(
        8 * N_SCALAR_CHANNELS
    )
