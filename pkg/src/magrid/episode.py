"""Episode wrapper: one seeded world plus its manual and running transcript.

RNG streams are derived once from the episode seed ("gen", "manual",
"dynamics"), so generation, manual surface forms, and in-episode stochastics
never perturb each other.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import messenger, rtfm
from .core import GridPos, Rng, StepResult, Transcript
from .manuals import Manual, render_messenger_manual, render_rtfm_manual

ENV_KINDS = ("rtfm", "messenger")


@dataclass(frozen=True)
class EntityView:
    uid: int
    row: int
    col: int
    tokens: tuple[str, ...]

    def to_payload(self) -> dict:
        return {"uid": self.uid, "row": self.row, "col": self.col, "tokens": list(self.tokens)}

    @classmethod
    def from_payload(cls, d: dict) -> "EntityView":
        return cls(uid=d["uid"], row=d["row"], col=d["col"], tokens=tuple(d["tokens"]))


@dataclass(frozen=True)
class Observation:
    """Per-agent view: the rendered grid, the agent roster, the live entity
    list (a convenience re-indexing of the grid), own inventory, and the
    episode's document and goal text."""

    env: str
    self_id: int
    height: int
    width: int
    grid: tuple  # h x w cells; each cell a tuple of phrases (rtfm) or symbol ints (messenger)
    agents: tuple[tuple[int, int], ...]
    has_message: tuple[bool, ...]
    inventory: str | None
    entities: tuple[EntityView, ...]
    document: tuple[str, ...]
    goal: str

    def to_payload(self) -> dict:
        return {
            "env": self.env,
            "self": self.self_id,
            "height": self.height,
            "width": self.width,
            "grid": [[list(cell) for cell in row] for row in self.grid],
            "agents": [list(p) for p in self.agents],
            "has_message": list(self.has_message),
            "inventory": self.inventory,
            "entities": [e.to_payload() for e in self.entities],
            "document": list(self.document),
            "goal": self.goal,
        }

    @classmethod
    def from_payload(cls, d: dict) -> "Observation":
        return cls(
            env=d["env"],
            self_id=d["self"],
            height=d["height"],
            width=d["width"],
            grid=tuple(tuple(tuple(cell) for cell in row) for row in d["grid"]),
            agents=tuple(tuple(p) for p in d["agents"]),
            has_message=tuple(d["has_message"]),
            inventory=d["inventory"],
            entities=tuple(EntityView.from_payload(e) for e in d["entities"]),
            document=tuple(d["document"]),
            goal=d["goal"],
        )


class Episode:
    """One live game instance; exactly one caller advances it at a time."""

    def __init__(self, env: str, stage: str, split: str, seed: int, n_agents: int = 2,
                 grid: int | None = None):
        if env not in ENV_KINDS:
            raise ValueError(f"unknown env {env!r}")
        self.env = env
        self.seed = int(seed)
        root = Rng(self.seed)
        gen_rng = root.split("gen")
        manual_rng = root.split("manual")
        self._dyn_rng = root.split("dynamics")
        if env == "rtfm":
            self.config = rtfm.RtfmConfig(
                stage=stage, split=split, n_agents=n_agents, grid=grid or 8
            )
            self.state, self.assignment = rtfm.generate_rtfm(self.config, gen_rng)
            self.manual: Manual = render_rtfm_manual(self.assignment, stage, manual_rng, split)
        else:
            self.config = messenger.MessengerConfig(stage=stage, split=split, n_agents=n_agents)
            self.state, self.assignment = messenger.generate_messenger(self.config, gen_rng)
            self.manual = render_messenger_manual(self.assignment, manual_rng, split)
        self.transcript = Transcript(
            env=env,
            stage=stage,
            split=split,
            seed=self.seed,
            n_agents=n_agents,
            assignment_digest=self.assignment.digest(),
        )

    @property
    def stage(self) -> str:
        return self.config.stage

    @property
    def n_agents(self) -> int:
        return self.config.n_agents

    @property
    def done(self) -> bool:
        return self.state.done

    @property
    def win(self) -> bool:
        return self.state.win

    @property
    def steps(self) -> int:
        return self.state.step

    def step(self, joint_action: list[str]) -> StepResult:
        if self.env == "rtfm":
            result = rtfm.step_rtfm(self.state, joint_action, self._dyn_rng)
        else:
            result = messenger.step_messenger(self.state, joint_action, self._dyn_rng)
        self.transcript.append(joint_action, result)
        return result

    def returns(self) -> list[float]:
        return [self.state.episode_return(i) for i in range(self.n_agents)]

    def observe(self, agent_id: int) -> Observation:
        if not 0 <= agent_id < self.n_agents:
            raise ValueError(f"no agent {agent_id}")
        st = self.state
        if self.env == "rtfm":
            grid = tuple(tuple(tuple(cell) for cell in row) for row in st.phrase_grid())
            inv = None
            if st.agents[agent_id].inventory is not None:
                inv = rtfm.entity_phrase(st.entity(st.agents[agent_id].inventory))
            entities = tuple(
                EntityView(
                    uid=e.uid,
                    row=e.pos.row,
                    col=e.pos.col,
                    tokens=tuple(rtfm.entity_phrase(e).split()),
                )
                for e in sorted(st.live_entities(), key=lambda e: e.uid)
            )
            has_message = tuple(False for _ in st.agents)
        else:
            grid = tuple(tuple(tuple(cell) for cell in row) for row in st.symbol_grid())
            inv = None
            entities = tuple(
                EntityView(uid=e.uid, row=e.pos.row, col=e.pos.col, tokens=(f"sym{e.symbol}",))
                for e in sorted(st.live_entities(), key=lambda e: e.uid)
            )
            has_message = tuple(a.has_message for a in st.agents)
        return Observation(
            env=self.env,
            self_id=agent_id,
            height=self.config.grid,
            width=self.config.grid,
            grid=grid,
            agents=tuple((a.pos.row, a.pos.col) for a in st.agents),
            has_message=has_message,
            inventory=inv,
            entities=entities,
            document=tuple(self.manual.document),
            goal=self.manual.goal_text,
        )

    def observe_all(self) -> list[Observation]:
        return [self.observe(i) for i in range(self.n_agents)]

    def render_text(self) -> str:
        st = self.state
        size = self.config.grid
        rows = []
        if self.env == "rtfm":
            cells = st.phrase_grid()
            short = [["" for _ in range(size)] for _ in range(size)]
            for r in range(size):
                for c in range(size):
                    names = ["".join(w[0] for w in phrase.split()) for phrase in cells[r][c]]
                    short[r][c] = "+".join(names)
            for a in st.agents:
                tag = f"A{a.id}"
                prev = short[a.pos.row][a.pos.col]
                short[a.pos.row][a.pos.col] = f"{prev}+{tag}" if prev else tag
            width = max(3, max(len(s) for row in short for s in row))
            for r in range(size):
                rows.append(" ".join((short[r][c] or ".").rjust(width) for c in range(size)))
        else:
            cells = st.symbol_grid()
            for r in range(size):
                rows.append(
                    " ".join(
                        ("+".join(str(s) for s in cells[r][c]) or ".").rjust(5)
                        for c in range(size)
                    )
                )
        rows.append(f"step={st.step} done={st.done} win={st.win}")
        return "\n".join(rows)

    def agent_positions(self) -> list[GridPos]:
        return [a.pos for a in self.state.agents]
