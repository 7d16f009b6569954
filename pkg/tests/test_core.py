import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from magrid.core import (
    GridPos,
    Rng,
    Transcript,
    joint_positional_feature,
    manhattan,
    positional_feature,
)


def test_manhattan_examples():
    assert manhattan(GridPos(0, 0), GridPos(0, 0)) == 0
    assert manhattan(GridPos(0, 0), GridPos(2, 3)) == 5
    assert manhattan(GridPos(7, 0), GridPos(0, 7)) == 14


def test_positional_feature_examples():
    assert positional_feature(GridPos(0, 0), 2, 2).tolist() == [[0, 1], [1, 2]]
    assert positional_feature(GridPos(1, 1), 3, 3).tolist() == [[2, 1, 2], [1, 0, 1], [2, 1, 2]]
    assert positional_feature(GridPos(0, 2), 1, 3).tolist() == [[2, 1, 0]]


def test_positional_feature_off_grid():
    with pytest.raises(ValueError):
        positional_feature(GridPos(5, 0), 3, 3)


def test_joint_positional_feature_examples():
    assert joint_positional_feature([GridPos(0, 0)], 2, 2).tolist() == [[0, 1], [1, 2]]
    assert joint_positional_feature([GridPos(0, 0), GridPos(1, 1)], 2, 2).tolist() == [
        [0, 1],
        [1, 0],
    ]
    assert joint_positional_feature([GridPos(0, 0), GridPos(0, 1)], 1, 2).tolist() == [[0, 0]]


def test_joint_positional_feature_empty():
    with pytest.raises(ValueError):
        joint_positional_feature([], 2, 2)


@given(st.integers(0, 7), st.integers(0, 7))
def test_positional_feature_reflection_symmetry(r, c):
    # reflecting the grid about the row through pos fixes the map
    m = positional_feature(GridPos(r, c), 8, 8)
    assert np.array_equal(m, positional_feature(GridPos(7 - r, c), 8, 8)[::-1, :])
    assert np.array_equal(m, positional_feature(GridPos(r, 7 - c), 8, 8)[:, ::-1])


def test_rng_identical_children():
    a = Rng(123).split("x")
    b = Rng(123).split("x")
    assert [a.integers(1000) for _ in range(5)] == [b.integers(1000) for _ in range(5)]


@given(st.integers(0, 2**32), st.integers(1, 50))
def test_rng_stream_independence(seed, k):
    fresh = Rng(seed).split("b")
    expected = [fresh.uniform() for _ in range(3)]
    rng = Rng(seed)
    a = rng.split("a")
    for _ in range(k):
        a.uniform()
    b = rng.split("b")
    assert [b.uniform() for _ in range(3)] == expected


def test_rng_split_is_pure():
    rng = Rng(5)
    first = rng.split("child").uniform()
    rng.split("other").uniform()
    assert Rng(5).split("child").uniform() == first


def test_moved_clamps_at_edges():
    assert GridPos(0, 0).moved("up", 8, 8) == GridPos(0, 0)
    assert GridPos(0, 0).moved("down", 8, 8) == GridPos(1, 0)
    assert GridPos(7, 7).moved("right", 8, 8) == GridPos(7, 7)


def test_transcript_round_trip():
    tr = Transcript(
        env="rtfm", stage="S1", split="train", seed=7, n_agents=2, assignment_digest="ab" * 8
    )
    tr.append(["up", "stay"], _result((-0.02, 0.98), True, True, ("kill:1:m3", "win")))
    text = tr.to_text()
    back = Transcript.from_text(text)
    assert back.to_text() == text
    assert back.steps[0].rewards == (-0.02, 0.98)
    assert back.steps[0].events == ("kill:1:m3", "win")


def _result(rewards, done, win, events):
    from magrid.core import StepResult

    return StepResult(rewards=tuple(rewards), done=done, win=win, events=tuple(events))
