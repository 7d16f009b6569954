"""Invariant suites behind the ``check`` CLI subcommand.

These are fast smoke-sized versions of the acceptance criteria (the full
suite lives in tests/test_acceptance.py); each check prints one PASS/FAIL
line so a broken engine is diagnosable from the terminal.
"""

from __future__ import annotations

import math

import numpy as np

from .agents import evaluate, replay_transcript, run_episode, random_policy
from .core import GridPos, Rng
from .episode import Episode
from .manuals import default_splits, load_corpus
from .decision import (
    count_balance,
    init_params,
    sample_subgoal_mask,
    selection_kl,
    travel_cost,
)
from .decision.autodiff import Tensor
from .manuals import vocabulary
from .rtfm import monster_direction


def check_determinism(episodes: int = 10) -> bool:
    root = Rng(99)
    for i in range(episodes):
        env = "rtfm" if i % 2 == 0 else "messenger"
        stage = ("S1", "S2", "S3")[i % 3]
        seed = root.split(f"d{i}").integers(2**31)
        first = Episode(env, stage, "train", seed)
        run_episode(first, random_policy(first, Rng(seed).split("pol")), max_steps=60)
        replayed = replay_transcript(first.transcript)
        if first.transcript.to_text() != replayed.to_text():
            return False
    return True


def check_corpus_counts() -> bool:
    corpus = load_corpus()
    ok = (
        len(corpus.rtfm.goal) == 12
        and len(corpus.rtfm.team) == 10
        and len(corpus.rtfm.modifier) == 10
        and len(corpus.messenger.templates) == 82
        and corpus.messenger.description_count() == 2214
    )
    return ok


def check_split_disjointness() -> bool:
    spec = default_splits()
    if spec.rtfm_train & spec.rtfm_eval:
        return False
    if (spec.rtfm_train | spec.rtfm_eval) & spec.rtfm_eval_new:
        return False
    if spec.messenger_train_combos & spec.messenger_eval_combos:
        return False
    if set(spec.messenger_train_templates) & set(spec.messenger_eval_templates):
        return False
    return True


def check_reward_arithmetic() -> bool:
    ep = Episode("rtfm", "S1", "train", 5)
    for _ in range(25):
        ep.step(["stay", "stay"])
    if any(r != -0.02 * 25 for r in ep.returns()):
        return False
    return True


def check_chase_mixture(draws: int = 20000, tol: float = 0.02) -> bool:
    rng = Rng(7).split("chase")
    hits = 0
    for _ in range(draws):
        move = monster_direction(GridPos(4, 4), [GridPos(4, 0)], rng, 8, 8)
        hits += move == "left"
    return abs(hits / draws - 0.7) < tol


def check_gumbel_marginal(draws: int = 20000, tol: float = 0.02) -> bool:
    rng = Rng(11)
    for logit in (-1.0, 0.0, 1.0):
        logits = Tensor(np.tile([logit, 0.0], (draws, 1)))
        state = sample_subgoal_mask(logits, tau=0.7, rng=rng.split(f"g{logit}"))
        want = 1.0 / (1.0 + math.exp(-logit))
        if abs(state.mask.mean() - want) > tol:
            return False
    return True


def check_regularizer_values() -> bool:
    ok = count_balance(np.ones(3), np.ones(3), 2) == 0.0
    ok &= count_balance(np.ones(4), np.ones(2), 2) == 2.0
    ok &= (
        travel_cost(
            np.array([1, 0]),
            np.array([0, 1]),
            [GridPos(1, 2), GridPos(3, 4)],
            GridPos(0, 0),
            [GridPos(3, 3)],
        )
        == 4.0
    )
    probs = Tensor(np.full(4, 0.5))
    ok &= abs(selection_kl(probs, 2).item()) < 1e-15
    return bool(ok)


def check_oracle_smoke(episodes: int = 50) -> bool:
    rtfm = evaluate("oracle", "rtfm", "S1", episodes=episodes, seed=3)
    msg = evaluate("oracle", "messenger", "S1", episodes=episodes, seed=3)
    return rtfm.win_rate >= 0.98 and msg.win_rate >= 0.98


CHECKS = [
    ("determinism", check_determinism),
    ("corpus_counts", check_corpus_counts),
    ("split_disjointness", check_split_disjointness),
    ("reward_arithmetic", check_reward_arithmetic),
    ("chase_mixture", check_chase_mixture),
    ("gumbel_marginal", check_gumbel_marginal),
    ("regularizer_values", check_regularizer_values),
    ("oracle_smoke", check_oracle_smoke),
]


def run_checks() -> int:
    failures = 0
    for name, fn in CHECKS:
        try:
            ok = fn()
        except Exception as exc:  # keep going; report the wreckage
            print(f"FAIL {name} ({type(exc).__name__}: {exc})")
            failures += 1
            continue
        print(("PASS" if ok else "FAIL") + f" {name}")
        failures += 0 if ok else 1
    return failures


def vocabulary_sizes() -> dict[str, int]:
    return {
        "rtfm/train": len(vocabulary("rtfm", "train")),
        "rtfm/eval_new": len(vocabulary("rtfm", "eval_new")),
        "messenger/train": len(vocabulary("messenger", "train")),
        "messenger/eval": len(vocabulary("messenger", "eval")),
    }
