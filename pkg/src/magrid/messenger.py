"""Multi-agent message-delivery grid game on symbols (stages S1-S3).

The observation carries opaque entity symbols only; the manual is the sole
channel binding names to roles.  Step order: agent moves, interactions on
co-location (enemy resolving first), win check, entity moves, step-limit
check.  Rewards are shared, except the per-agent message bonus at S3.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .core import ACTIONS, AgentState, Entity, GridPos, Rng, StepResult, digest_of, manhattan
from .manuals import GenerationError, default_splits, load_corpus, symbol_of
from .rtfm import greedy_step_toward

MESSENGER_STAGES = ("S1", "S2", "S3")
STEP_LIMITS = {"S1": 4, "S2": 32, "S3": 64}
MESSAGE_BONUS = 0.2
START_WITHOUT_MESSAGE_PROB = 0.8

# Entity spawn candidates: a ring of five cells, each within four moves of
# every agent start cell, so stage S1 is winnable inside its 4-step limit.
SPAWN_CANDIDATES = (GridPos(2, 4), GridPos(4, 7), GridPos(7, 5), GridPos(5, 2), GridPos(3, 3))
AGENT_STARTS = (GridPos(4, 4), GridPos(5, 5), GridPos(4, 5), GridPos(5, 4))

# Agent observation symbols; +10 marks a carried message.
AGENT_SYMBOL_BASE = 20
AGENT_MESSAGE_OFFSET = 10


@dataclass(frozen=True)
class MessengerConfig:
    stage: str
    n_agents: int = 2
    grid: int = 10
    split: str = "train"

    def __post_init__(self):
        if self.stage not in MESSENGER_STAGES:
            raise ValueError(f"unknown messenger stage {self.stage!r}")
        if self.grid != 10:
            raise ValueError("messenger runs on a 10x10 grid")
        if self.split not in ("train", "eval"):
            raise ValueError(f"unknown messenger split {self.split!r}")
        if not 1 <= self.n_agents <= 2:
            raise ValueError("role layout (2 messages, 2 goals) supports at most 2 agents")

    @property
    def step_limit(self) -> int:
        return STEP_LIMITS[self.stage]


@dataclass(frozen=True)
class RoleAssignment:
    """Entity names mapped to roles and movement types, plus the fixed
    symbol binding.  Names appear only in the manual, never on the grid."""

    roles: tuple[tuple[str, str], ...]  # (entity name, role); 1 enemy, 2 messages, 2 goals
    movements: tuple[tuple[str, str], ...]
    symbols: tuple[tuple[str, int], ...]
    start_with_messages: bool

    def role_of(self, name: str) -> str:
        return dict(self.roles)[name]

    def movement_of(self, name: str) -> str:
        return dict(self.movements)[name]

    def digest(self) -> str:
        return digest_of(repr(self))


@dataclass
class MessengerState:
    config: MessengerConfig
    assignment: RoleAssignment
    entities: list[Entity]
    agents: list[AgentState]
    step: int = 0
    done: bool = False
    win: bool = False
    # per-agent progress: uid of the claimed message / delivered-to goal
    claimed_message: list[int | None] = field(default_factory=list)
    claimed_goal: list[int | None] = field(default_factory=list)
    message_bonuses: list[int] = field(default_factory=list)
    outcome_reward: int = 0  # +1 on win, -1 on loss, 0 while running

    def live_entities(self) -> list[Entity]:
        return [e for e in self.entities if e.alive]

    def episode_return(self, agent_id: int) -> float:
        return MESSAGE_BONUS * self.message_bonuses[agent_id] + 1.0 * self.outcome_reward

    def symbol_grid(self) -> list[list[list[int]]]:
        h = w = self.config.grid
        grid: list[list[list[int]]] = [[[] for _ in range(w)] for _ in range(h)]
        for e in self.live_entities():
            grid[e.pos.row][e.pos.col].append(e.symbol)
        for a in self.agents:
            sym = AGENT_SYMBOL_BASE + a.id + (AGENT_MESSAGE_OFFSET if a.has_message else 0)
            grid[a.pos.row][a.pos.col].append(sym)
        return grid


def generate_messenger(config: MessengerConfig, rng: Rng) -> tuple[MessengerState, RoleAssignment]:
    """Place five entities (1 enemy, 2 messages, 2 goals) on distinct
    candidate cells; agents start in the center block."""
    corpus = load_corpus().messenger
    spec = default_splits()
    combos = spec.messenger_combos(config.split)
    pick = rng.split("assignment")

    def entities_for(role: str) -> list[str]:
        return sorted(name for name, r in combos if r == role)

    enemy_pool = entities_for("enemy")
    message_pool = entities_for("message")
    goal_pool = entities_for("goal")
    if not enemy_pool or len(message_pool) < 2 or len(goal_pool) < 2:
        raise GenerationError(f"split {config.split} cannot fill the messenger roles")

    for _ in range(100):
        enemy = pick.choice(enemy_pool)
        messages = pick.sample([m for m in message_pool if m != enemy], 2)
        goals = pick.sample([g for g in goal_pool if g != enemy and g not in messages], 2)
        names = [enemy, *messages, *goals]
        if len(set(names)) == 5:
            break
    else:
        raise GenerationError("could not choose five distinct entities")

    roles = tuple(
        [(enemy, "enemy")] + [(m, "message") for m in messages] + [(g, "goal") for g in goals]
    )
    if config.stage == "S1":
        movements = tuple((name, "stationary") for name in names)
    elif config.stage == "S2":
        movements = tuple((name, "random") for name in names)
    else:
        move_pick = rng.split("movement")
        movements = tuple(
            (name, move_pick.choice(("stationary", "chasing", "fleeing"))) for name in names
        )

    if config.stage == "S3":
        start_with = False
    else:
        start_with = rng.split("start").uniform() >= START_WITHOUT_MESSAGE_PROB

    assignment = RoleAssignment(
        roles=roles,
        movements=movements,
        symbols=tuple((name, symbol_of(name)) for name in sorted(names)),
        start_with_messages=start_with,
    )

    if len(SPAWN_CANDIDATES) < 5:
        raise GenerationError("fewer than five candidate spawn locations")
    spawn = rng.split("spawn")
    cells = spawn.sample(list(SPAWN_CANDIDATES), 5)
    entities = [
        Entity(
            uid=i,
            symbol=symbol_of(name),
            name=name,
            attributes={
                "role": assignment.role_of(name),
                "movement": assignment.movement_of(name),
            },
            pos=cells[i],
        )
        for i, name in enumerate(names)
    ]
    agents = [
        AgentState(id=i, pos=AGENT_STARTS[i], has_message=start_with)
        for i in range(config.n_agents)
    ]
    state = MessengerState(
        config=config,
        assignment=assignment,
        entities=entities,
        agents=agents,
        claimed_message=[None] * config.n_agents,
        claimed_goal=[None] * config.n_agents,
        message_bonuses=[0] * config.n_agents,
    )
    return state, assignment


def movement_step(pos: GridPos, movement: str, agent_positions: list[GridPos],
                  rng: Rng | None, h: int, w: int) -> str:
    """One move under a movement type.

    random: uniform over the four directions (off-grid resolves to stay);
    chasing: greedy step toward the nearest agent; fleeing: the legal move
    (including stay) maximizing distance to the nearest agent, ties broken
    in up/down/left/right/stay order.
    """
    if movement == "stationary":
        return "stay"
    if movement == "random":
        return rng.choice(("up", "down", "left", "right"))
    if movement == "chasing":
        return greedy_step_toward(pos, agent_positions)
    if movement == "fleeing":
        best_action = "stay"
        best_dist = -1
        for action in ("up", "down", "left", "right", "stay"):
            nxt = pos.moved(action, h, w)
            if action != "stay" and nxt == pos:
                continue  # off-grid moves are not legal flee choices
            dist = min(manhattan(nxt, p) for p in agent_positions)
            if dist > best_dist:
                best_dist = dist
                best_action = action
        return best_action
    raise ValueError(f"unknown movement {movement!r}")


def entity_move(entity: Entity, agent_positions: list[GridPos], rng: Rng | None,
                h: int, w: int) -> str:
    return movement_step(entity.pos, entity.attributes["movement"], agent_positions, rng, h, w)


def _all_satisfied(state: MessengerState) -> bool:
    if state.config.stage == "S3" or state.assignment.start_with_messages:
        return all(uid is not None for uid in state.claimed_goal)
    return all(uid is not None for uid in state.claimed_message)


def step_messenger(state: MessengerState, joint_action: list[str], rng: Rng) -> StepResult:
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
    bonus = [0.0] * n
    lost = False

    for agent, action in zip(state.agents, joint_action):
        agent.pos = agent.pos.moved(action, h, w)

    # interactions on co-location, agent order; enemy outranks everything
    for agent in state.agents:
        if lost:
            break
        here = [e for e in state.live_entities() if e.pos == agent.pos]
        here.sort(key=lambda e: (e.attributes["role"] != "enemy", e.uid))
        for e in here:
            role = e.attributes["role"]
            if role == "enemy":
                lost = True
                events.append(f"enemy:{agent.id}:e{e.uid}")
                break
            if role == "goal":
                if not agent.has_message:
                    lost = True
                    events.append(f"goal_without_message:{agent.id}:e{e.uid}")
                    break
                needs_goal = state.config.stage == "S3" or state.assignment.start_with_messages
                if needs_goal and state.claimed_goal[agent.id] is None and e.uid not in state.claimed_goal:
                    state.claimed_goal[agent.id] = e.uid
                    events.append(f"delivery:{agent.id}:e{e.uid}")
            elif role == "message":
                unclaimed = e.uid not in state.claimed_message
                if state.claimed_message[agent.id] is None and unclaimed:
                    claimable = state.config.stage == "S3" or not state.assignment.start_with_messages
                    if claimable:
                        state.claimed_message[agent.id] = e.uid
                        agent.has_message = True
                        events.append(f"message:{agent.id}:e{e.uid}")
                        if state.config.stage == "S3":
                            bonus[agent.id] += MESSAGE_BONUS
                            state.message_bonuses[agent.id] += 1

    won = not lost and _all_satisfied(state)

    # entity moves happen while the episode is still undecided
    if not lost and not won:
        agent_positions = [a.pos for a in state.agents if a.alive]
        for e in sorted(state.live_entities(), key=lambda e: e.uid):
            move = entity_move(e, agent_positions, rng, h, w)
            e.pos = e.pos.moved(move, h, w)

    state.step += 1
    shared = 0.0
    if lost:
        state.done = True
        state.win = False
        state.outcome_reward = -1
        shared = -1.0
    elif won:
        state.done = True
        state.win = True
        state.outcome_reward = 1
        shared = 1.0
        events.append("win")
    elif state.step >= state.config.step_limit:
        state.done = True
        state.win = False
        state.outcome_reward = -1
        shared = -1.0
        events.append("timeout")

    rewards = tuple(bonus[i] + shared for i in range(n))
    return StepResult(rewards=rewards, done=state.done, win=state.win, events=tuple(events))
