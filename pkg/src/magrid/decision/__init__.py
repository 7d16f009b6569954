"""Entity-division decision core: toy grounding, subgoal masks, exact
gradients for the opponent-modeling and regularizer losses."""

from .autodiff import Tensor, parameter
from .features import ObsFeatures, featurize
from .grounding import ground, ground_cells
from .losses import (
    count_balance,
    count_balance_relaxed,
    opponent_nll,
    selection_kl,
    travel_cost,
    travel_cost_relaxed,
    uniform_nll,
)
from .params import DecisionParams, init_params, load_checkpoint, save_checkpoint
from .pipeline import (
    DecisionOutput,
    LossReport,
    LossWeights,
    compute_losses,
    decision_step,
    policy_heads,
)
from .subgoal import SubgoalState, apply_entity_mask, sample_subgoal_mask, subgoal_logits

__all__ = [
    "DecisionOutput",
    "DecisionParams",
    "LossReport",
    "LossWeights",
    "ObsFeatures",
    "SubgoalState",
    "Tensor",
    "apply_entity_mask",
    "compute_losses",
    "count_balance",
    "count_balance_relaxed",
    "decision_step",
    "featurize",
    "ground",
    "ground_cells",
    "init_params",
    "load_checkpoint",
    "opponent_nll",
    "parameter",
    "policy_heads",
    "sample_subgoal_mask",
    "save_checkpoint",
    "selection_kl",
    "subgoal_logits",
    "travel_cost",
    "travel_cost_relaxed",
    "uniform_nll",
]
