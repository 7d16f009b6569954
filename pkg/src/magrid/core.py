"""Shared domain types: grid geometry, labeled RNG streams, episode transcripts.

Everything stochastic in the engine draws from an explicit :class:`Rng`.
Streams are derived from ``(seed, label path)`` alone, so adding draws to one
subsystem never perturbs another and regression transcripts stay stable.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

ACTIONS = ("up", "down", "left", "right", "stay")

MOVE_DELTAS = {
    "up": (-1, 0),
    "down": (1, 0),
    "left": (0, -1),
    "right": (0, 1),
    "stay": (0, 0),
}


@dataclass(frozen=True, order=True)
class GridPos:
    row: int
    col: int

    def moved(self, action: str, height: int, width: int) -> "GridPos":
        """Apply a move; off-grid moves resolve to stay."""
        dr, dc = MOVE_DELTAS[action]
        r, c = self.row + dr, self.col + dc
        if 0 <= r < height and 0 <= c < width:
            return GridPos(r, c)
        return self


def manhattan(a: GridPos, b: GridPos) -> int:
    return abs(a.row - b.row) + abs(a.col - b.col)


def positional_feature(pos: GridPos, h: int, w: int) -> np.ndarray:
    """h x w map of Manhattan distances from every cell to ``pos``."""
    if not (0 <= pos.row < h and 0 <= pos.col < w):
        raise ValueError(f"position {pos} not on a {h}x{w} grid")
    rows = np.abs(np.arange(h) - pos.row)
    cols = np.abs(np.arange(w) - pos.col)
    return rows[:, None] + cols[None, :]


def joint_positional_feature(others: Sequence[GridPos], h: int, w: int) -> np.ndarray:
    """Cellwise minimum Manhattan distance to the closest of ``others``."""
    if not others:
        raise ValueError("no other agents")
    maps = [positional_feature(p, h, w) for p in others]
    return np.minimum.reduce(maps)


def _stream_key(seed: int, path: tuple[str, ...]) -> np.ndarray:
    raw = repr((int(seed), path)).encode("utf-8")
    digest = hashlib.sha256(raw).digest()
    return np.frombuffer(digest[:16], dtype="<u8")


class Rng:
    """Seeded random stream with pure, label-addressed splitting.

    ``split(label)`` derives a child stream from ``(seed, path + (label,))``
    only; it neither consumes from nor is affected by draws on the parent or
    any sibling.  The underlying generator is counter-based (Philox), so
    identical construction gives identical draw sequences on any platform.
    """

    __slots__ = ("seed", "path", "_gen")

    def __init__(self, seed: int, path: tuple[str, ...] = ()):
        self.seed = int(seed)
        self.path = tuple(path)
        self._gen = np.random.Generator(np.random.Philox(key=_stream_key(self.seed, self.path)))

    def split(self, label: str) -> "Rng":
        return Rng(self.seed, self.path + (str(label),))

    def uniform(self) -> float:
        return float(self._gen.random())

    def integers(self, n: int) -> int:
        """Uniform integer in [0, n)."""
        return int(self._gen.integers(n))

    def choice(self, seq: Sequence):
        return seq[self.integers(len(seq))]

    def sample(self, seq: Sequence, k: int) -> list:
        """k distinct elements, order randomized."""
        if k > len(seq):
            raise ValueError(f"cannot sample {k} from {len(seq)} items")
        idx = self._gen.permutation(len(seq))[:k]
        return [seq[int(i)] for i in idx]

    def shuffled(self, seq: Iterable) -> list:
        items = list(seq)
        idx = self._gen.permutation(len(items))
        return [items[int(i)] for i in idx]

    def gumbel(self, shape) -> np.ndarray:
        return self._gen.gumbel(size=shape)

    def normal(self, shape, scale: float = 1.0) -> np.ndarray:
        return self._gen.normal(scale=scale, size=shape)

    def __repr__(self) -> str:  # pragma: no cover - debug aid
        return f"Rng(seed={self.seed}, path={self.path})"


@dataclass
class Entity:
    """One object on the grid.

    ``attributes`` carries role-specific tags (team/element/modifier, or
    role/movement), always drawn from the active stage vocabulary.
    """

    uid: int
    symbol: int
    name: str
    attributes: dict
    pos: GridPos
    alive: bool = True


@dataclass
class AgentState:
    id: int
    pos: GridPos
    inventory: int | None = None  # uid of the held item; at most one
    has_message: bool = False
    alive: bool = True


@dataclass(frozen=True)
class StepResult:
    rewards: tuple[float, ...]
    done: bool
    win: bool
    events: tuple[str, ...]


def _fmt_float(x: float) -> str:
    return repr(float(x))


@dataclass(frozen=True)
class StepRecord:
    t: int
    actions: tuple[str, ...]
    rewards: tuple[float, ...]
    events: tuple[str, ...]
    done: bool
    win: bool

    def to_line(self) -> str:
        ev = ",".join(self.events) if self.events else "-"
        return (
            f"step t={self.t}"
            f" actions={','.join(self.actions)}"
            f" rewards={','.join(_fmt_float(r) for r in self.rewards)}"
            f" events={ev}"
            f" done={int(self.done)} win={int(self.win)}"
        )


@dataclass
class Transcript:
    """Line-oriented record of one episode.

    Format (UTF-8, one record per line, fixed field order):

        episode env=<kind> stage=<S*> split=<split> seed=<int> agents=<int> assignment=<hex16>
        step t=<int> actions=<a0,..> rewards=<r0,..> events=<e0,..|-> done=<0|1> win=<0|1>

    Rewards use ``repr`` of 64-bit floats, so serialization round-trips
    bit-exactly.  Replaying the header seed with the recorded actions through
    the engine reproduces the file byte-for-byte.
    """

    env: str
    stage: str
    split: str
    seed: int
    n_agents: int
    assignment_digest: str
    steps: list[StepRecord] = field(default_factory=list)

    def header_line(self) -> str:
        return (
            f"episode env={self.env} stage={self.stage} split={self.split}"
            f" seed={self.seed} agents={self.n_agents} assignment={self.assignment_digest}"
        )

    def append(self, actions: Sequence[str], result: StepResult) -> None:
        self.steps.append(
            StepRecord(
                t=len(self.steps) + 1,
                actions=tuple(actions),
                rewards=result.rewards,
                events=result.events,
                done=result.done,
                win=result.win,
            )
        )

    def to_text(self) -> str:
        lines = [self.header_line()]
        lines.extend(rec.to_line() for rec in self.steps)
        return "\n".join(lines) + "\n"

    @staticmethod
    def _parse_fields(body: str) -> dict:
        out = {}
        for token in body.split(" "):
            key, _, value = token.partition("=")
            out[key] = value
        return out

    @classmethod
    def from_text(cls, text: str) -> "Transcript":
        lines = [ln for ln in text.split("\n") if ln]
        if not lines or not lines[0].startswith("episode "):
            raise ValueError("transcript missing episode header")
        head = cls._parse_fields(lines[0][len("episode "):])
        tr = cls(
            env=head["env"],
            stage=head["stage"],
            split=head["split"],
            seed=int(head["seed"]),
            n_agents=int(head["agents"]),
            assignment_digest=head["assignment"],
        )
        for ln in lines[1:]:
            if not ln.startswith("step "):
                raise ValueError(f"unexpected transcript line: {ln!r}")
            f = cls._parse_fields(ln[len("step "):])
            events = tuple(f["events"].split(",")) if f["events"] != "-" else ()
            tr.steps.append(
                StepRecord(
                    t=int(f["t"]),
                    actions=tuple(f["actions"].split(",")),
                    rewards=tuple(float(r) for r in f["rewards"].split(",")),
                    events=events,
                    done=f["done"] == "1",
                    win=f["win"] == "1",
                )
            )
        return tr


def digest_of(payload: str) -> str:
    """Stable 16-hex-character digest used to fingerprint assignments."""
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]
