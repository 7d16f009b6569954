"""Multi-agent monster-hunting grid game with a text manual (stages S1-S5).

One step resolves in a fixed, documented order so transcripts replay exactly:
agent moves, pickups, combat, monster moves (S3+), step penalty, terminal
checks.  Loss beats win beats timeout when several trigger at once.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .core import ACTIONS, AgentState, Entity, GridPos, Rng, StepResult, digest_of, manhattan
from .manuals import GenerationError, default_splits, rtfm_vocab_words

RTFM_STAGES = ("S1", "S2", "S3", "S4", "S5")

STEP_PENALTY = -0.02
MAX_STEPS = 1000
CHASE_PROB = 0.6


@dataclass(frozen=True)
class RtfmConfig:
    stage: str
    n_agents: int = 2
    grid: int = 8
    max_steps: int = MAX_STEPS
    step_penalty: float = STEP_PENALTY
    chase_prob: float = CHASE_PROB
    split: str = "train"

    def __post_init__(self):
        if self.stage not in RTFM_STAGES:
            raise ValueError(f"unknown rtfm stage {self.stage!r}")
        if self.grid not in (8, 10):
            raise ValueError("rtfm grid must be 8 or 10")
        if self.grid == 10 and self.split != "eval":
            raise ValueError("the 10x10 grid is reserved for the eval split")
        if self.split not in ("train", "eval", "eval_new"):
            raise ValueError(f"unknown split {self.split!r}")
        if self.n_agents < 1:
            raise ValueError("need at least one agent")

    @property
    def has_distractors(self) -> bool:
        return self.stage != "S1"

    @property
    def monsters_move(self) -> bool:
        return self.stage in ("S3", "S4", "S5")

    @property
    def one_to_one(self) -> bool:
        return self.stage in ("S1", "S2", "S3")


@dataclass(frozen=True)
class TargetSlot:
    monster: str
    element: str
    modifier: str
    weapon: str


@dataclass(frozen=True)
class RtfmAssignment:
    """Sampled dynamics of one episode.

    ``team_facts`` / ``modifier_facts`` are exactly the statements the manual
    renders; under many-to-one assignments they also cover monsters and
    modifiers that are not placed on the grid.
    """

    target_team: str
    targets: tuple[TargetSlot, ...]
    distractor_monster: tuple[str, str, str] | None  # (monster, element, team)
    distractor_item: tuple[str, str] | None  # (modifier, weapon)
    team_facts: tuple[tuple[str, str], ...]
    modifier_facts: tuple[tuple[str, str], ...]
    one_to_one: bool

    def digest(self) -> str:
        return digest_of(repr(self))

    def quads(self) -> set[tuple[str, str, str, str]]:
        """The placed-entity assignment tuples (the unit of split disjointness)."""
        out = {(t.monster, self.target_team, t.modifier, t.element) for t in self.targets}
        if self.distractor_monster is not None:
            monster, element, team_name = self.distractor_monster
            modifier, _ = self.distractor_item
            out.add((monster, team_name, modifier, element))
        return out


@dataclass
class RtfmState:
    config: RtfmConfig
    assignment: RtfmAssignment
    entities: list[Entity]
    agents: list[AgentState]
    step: int = 0
    done: bool = False
    win: bool = False
    kills: list[int] = field(default_factory=list)
    caused_loss: list[bool] = field(default_factory=list)

    def live_entities(self) -> list[Entity]:
        return [e for e in self.entities if e.alive]

    def entity(self, uid: int) -> Entity:
        for e in self.entities:
            if e.uid == uid:
                return e
        raise KeyError(uid)

    def episode_return(self, agent_id: int) -> float:
        """Exact accounting: kills - losses + step_penalty * steps."""
        return (
            1.0 * self.kills[agent_id]
            + (-1.0 if self.caused_loss[agent_id] else 0.0)
            + self.config.step_penalty * self.step
        )

    def phrase_grid(self) -> list[list[list[str]]]:
        h = w = self.config.grid
        grid: list[list[list[str]]] = [[[] for _ in range(w)] for _ in range(h)]
        for e in self.live_entities():
            grid[e.pos.row][e.pos.col].append(entity_phrase(e))
        return grid


def entity_phrase(e: Entity) -> str:
    if e.attributes["kind"] == "monster":
        return f"{e.attributes['element']} {e.name}"
    return f"{e.attributes['modifier']} {e.name}"


def _sample_assignment(config: RtfmConfig, rng: Rng) -> RtfmAssignment:
    spec = default_splits()
    allowed = spec.rtfm_quads(config.split)
    words = rtfm_vocab_words(config.split)
    n = config.n_agents
    by_team: dict[str, list] = {}
    for quad in allowed:
        by_team.setdefault(quad[1], []).append(quad)

    for _ in range(1000):
        team_name = rng.choice(sorted(by_team))
        pool = sorted(by_team[team_name])
        if len({q[0] for q in pool}) < n:
            continue
        picked: list[tuple[str, str, str, str]] = []
        monsters_used: set[str] = set()
        mod_to_elem: dict[str, str] = {}
        for quad in rng.shuffled(pool):
            monster, _, modifier, element = quad
            if monster in monsters_used:
                continue
            if config.one_to_one:
                # strict one-to-one: fresh modifier and element per slot
                if modifier in mod_to_elem or element in mod_to_elem.values():
                    continue
            elif modifier in mod_to_elem and mod_to_elem[modifier] != element:
                continue
            picked.append(quad)
            monsters_used.add(monster)
            mod_to_elem[modifier] = element
            if len(picked) == n:
                break
        if len(picked) < n:
            continue

        weapons_needed = n + (1 if config.has_distractors else 0)
        if len(words["weapons"]) < weapons_needed:
            raise GenerationError("weapon vocabulary too small")
        weapons = rng.sample(words["weapons"], weapons_needed)
        targets = tuple(
            TargetSlot(monster=q[0], element=q[3], modifier=q[2], weapon=weapons[i])
            for i, q in enumerate(picked)
        )
        target_elements = {t.element for t in targets}
        target_modifiers = {t.modifier for t in targets}

        team_facts = [(t.monster, team_name) for t in targets]
        modifier_facts = sorted({(t.modifier, t.element) for t in targets})
        distractor_monster = None
        distractor_item = None
        if config.has_distractors:
            candidates = [
                q
                for q in sorted(allowed)
                if q[1] != team_name
                and q[0] not in monsters_used
                and q[3] not in target_elements
                and q[2] not in target_modifiers
                and q[2] not in mod_to_elem
            ]
            if not candidates:
                continue
            monster, d_team, modifier, element = rng.choice(candidates)
            distractor_monster = (monster, element, d_team)
            distractor_item = (modifier, weapons[n])
            team_facts.append((monster, d_team))
            modifier_facts.append((modifier, element))
            monsters_used.add(monster)
            mod_to_elem[modifier] = element

        if not config.one_to_one:
            # Many-to-one: describe one or two extra monsters per described
            # team and an extra effectiveness fact, none of them placed.
            extra_monsters = [m for m in words["monsters"] if m not in monsters_used]
            teams_described = sorted({t for _, t in team_facts})
            for team_extra in teams_described:
                for m in rng.sample(extra_monsters, min(1 + rng.integers(2), len(extra_monsters))):
                    team_facts.append((m, team_extra))
                    extra_monsters.remove(m)
            spare_mods = [m for m in words["modifiers"] if m not in mod_to_elem]
            if spare_mods:
                modifier = rng.choice(spare_mods)
                element = rng.choice(words["elements"])
                modifier_facts.append((modifier, element))

        return RtfmAssignment(
            target_team=team_name,
            targets=targets,
            distractor_monster=distractor_monster,
            distractor_item=distractor_item,
            team_facts=tuple(team_facts),
            modifier_facts=tuple(modifier_facts),
            one_to_one=config.one_to_one,
        )
    raise GenerationError(f"could not sample a {config.split} assignment for {config.stage}")


def generate_rtfm(config: RtfmConfig, rng: Rng) -> tuple[RtfmState, RtfmAssignment]:
    """Build the initial world: n correct items and n target monsters, plus
    one distractor item and one distractor monster from S2 on.  All spawn
    cells are distinct."""
    assignment = _sample_assignment(config, rng.split("assignment"))
    h = w = config.grid
    n = config.n_agents

    entities: list[Entity] = []
    uid = 0
    for slot in assignment.targets:
        entities.append(
            Entity(
                uid=uid,
                symbol=uid,
                name=slot.weapon,
                attributes={"kind": "item", "modifier": slot.modifier, "distractor": False},
                pos=GridPos(0, 0),
            )
        )
        uid += 1
    for slot in assignment.targets:
        entities.append(
            Entity(
                uid=uid,
                symbol=uid,
                name=slot.monster,
                attributes={
                    "kind": "monster",
                    "element": slot.element,
                    "team": assignment.target_team,
                    "target": True,
                    "distractor": False,
                },
                pos=GridPos(0, 0),
            )
        )
        uid += 1
    if config.has_distractors:
        monster, element, d_team = assignment.distractor_monster
        modifier, weapon = assignment.distractor_item
        entities.append(
            Entity(
                uid=uid,
                symbol=uid,
                name=weapon,
                attributes={"kind": "item", "modifier": modifier, "distractor": True},
                pos=GridPos(0, 0),
            )
        )
        uid += 1
        entities.append(
            Entity(
                uid=uid,
                symbol=uid,
                name=monster,
                attributes={
                    "kind": "monster",
                    "element": element,
                    "team": d_team,
                    "target": False,
                    "distractor": True,
                },
                pos=GridPos(0, 0),
            )
        )
        uid += 1

    spawn = rng.split("spawn")
    cells = [GridPos(r, c) for r in range(h) for c in range(w)]
    chosen = spawn.sample(cells, len(entities) + n)
    for e, pos in zip(entities, chosen[: len(entities)]):
        e.pos = pos
    agents = [AgentState(id=i, pos=chosen[len(entities) + i]) for i in range(n)]

    state = RtfmState(
        config=config,
        assignment=assignment,
        entities=entities,
        agents=agents,
        kills=[0] * n,
        caused_loss=[False] * n,
    )
    return state, assignment


def _beats(state: RtfmState, agent: AgentState, monster: Entity) -> bool:
    if agent.inventory is None:
        return False
    item = state.entity(agent.inventory)
    facts = dict(state.assignment.modifier_facts)
    return facts.get(item.attributes["modifier"]) == monster.attributes["element"]


def monster_direction(
    monster: GridPos,
    agents: list[GridPos],
    rng: Rng,
    h: int,
    w: int,
    chase_prob: float = CHASE_PROB,
) -> str:
    """Chase the nearest agent with ``chase_prob``, else move uniformly.

    The greedy step reduces the axis with the larger remaining distance,
    preferring rows on ties; a co-located agent means the greedy step is stay.
    """
    if not agents:
        raise ValueError("at least one alive agent required")
    if rng.uniform() < chase_prob:
        return greedy_step_toward(monster, agents)
    return rng.choice(("up", "down", "left", "right"))


def greedy_step_toward(src: GridPos, agents: list[GridPos]) -> str:
    target = min(agents, key=lambda p: (manhattan(src, p), p.row, p.col))
    dr = target.row - src.row
    dc = target.col - src.col
    if dr == 0 and dc == 0:
        return "stay"
    if abs(dr) >= abs(dc) and dr != 0:
        return "down" if dr > 0 else "up"
    return "right" if dc > 0 else "left"


def step_rtfm(state: RtfmState, joint_action: list[str], rng: Rng) -> StepResult:
    if state.done:
        raise ValueError("episode already finished")
    n = state.config.n_agents
    if len(joint_action) != n:
        raise ValueError(f"expected {n} actions, got {len(joint_action)}")
    for a in joint_action:
        if a not in ACTIONS:
            raise ValueError(f"unknown action {a!r}")

    h = w = state.config.grid
    events: list[str] = []
    kill_delta = [0] * n
    loss_delta = [0] * n

    # 1. agent moves (off-grid resolves to stay; agents may share cells)
    for agent, action in zip(state.agents, joint_action):
        agent.pos = agent.pos.moved(action, h, w)

    # 2. pickups, in agent order; picking up drops (removes) any held weapon
    for agent in state.agents:
        for e in sorted(state.live_entities(), key=lambda e: e.uid):
            if e.attributes["kind"] == "item" and e.pos == agent.pos:
                if agent.inventory is not None:
                    old = state.entity(agent.inventory)
                    events.append(f"drop:{agent.id}:i{old.uid}")
                agent.inventory = e.uid
                e.alive = False  # carried; no longer on the grid
                events.append(f"pickup:{agent.id}:i{e.uid}")
                break

    # 3. combat, in agent order then monster uid order; a loss ends the episode
    lost = False
    for agent in state.agents:
        if lost:
            break
        for monster in sorted(state.live_entities(), key=lambda e: e.uid):
            if monster.attributes["kind"] != "monster" or monster.pos != agent.pos:
                continue
            if monster.attributes["distractor"]:
                loss_delta[agent.id] -= 1
                state.caused_loss[agent.id] = True
                events.append(f"loss:{agent.id}:distractor")
                lost = True
                break
            if monster.attributes["target"] and _beats(state, agent, monster):
                monster.alive = False
                kill_delta[agent.id] += 1
                state.kills[agent.id] += 1
                events.append(f"kill:{agent.id}:m{monster.uid}")
            else:
                loss_delta[agent.id] -= 1
                state.caused_loss[agent.id] = True
                events.append(f"loss:{agent.id}:ineffective:m{monster.uid}")
                lost = True
                break

    # 4. monster moves (S3+), uid order, one draw stream per step
    if state.config.monsters_move and not lost:
        alive_agent_pos = [a.pos for a in state.agents if a.alive]
        for monster in sorted(state.live_entities(), key=lambda e: e.uid):
            if monster.attributes["kind"] != "monster":
                continue
            move = monster_direction(
                monster.pos, alive_agent_pos, rng, h, w, state.config.chase_prob
            )
            monster.pos = monster.pos.moved(move, h, w)

    # 5. step penalty
    state.step += 1
    rewards = tuple(
        state.config.step_penalty + kill_delta[i] + loss_delta[i] for i in range(n)
    )

    # 6. terminal checks: loss > win > timeout
    targets_alive = [
        e for e in state.live_entities() if e.attributes["kind"] == "monster" and e.attributes["target"]
    ]
    if lost:
        state.done = True
        state.win = False
    elif not targets_alive:
        state.done = True
        state.win = True
        events.append("win")
    elif state.step >= state.config.max_steps:
        state.done = True
        state.win = False
        events.append("timeout")

    return StepResult(rewards=rewards, done=state.done, win=state.win, events=tuple(events))
