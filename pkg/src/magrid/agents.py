"""Scripted oracle planners, random baseline, and the evaluation harness.

Oracles see the ground-truth assignment (a privilege real learners never
get); they exist to certify that generated episodes are solvable and to
drive regression transcripts.  Paths are recomputed every step with a
hazard-aware Dijkstra; grids are small enough that this is free.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass
from typing import Callable

from .core import ACTIONS, GridPos, Rng, Transcript, manhattan
from .episode import Episode
from .messenger import entity_move, movement_step
from .rtfm import greedy_step_toward

BLOCKED = float("inf")
SOFT_BLOCK = 1000.0
NEAR_HAZARD = 10.0
NEAR_DISTRACTOR = 8.0


def plan_route(
    start: GridPos,
    goals: set[GridPos],
    enter_cost: Callable[[GridPos], float],
    h: int,
    w: int,
) -> list[str] | None:
    """Cheapest action sequence from start into ``goals``; deterministic
    tie-breaking by (cost, row, col).  Returns None when unreachable."""
    if start in goals:
        return []
    dist: dict[GridPos, float] = {start: 0.0}
    prev: dict[GridPos, tuple[GridPos, str]] = {}
    heap: list[tuple[float, int, int]] = [(0.0, start.row, start.col)]
    while heap:
        d, r, c = heapq.heappop(heap)
        pos = GridPos(r, c)
        if d > dist.get(pos, BLOCKED):
            continue
        if pos in goals:
            moves: list[str] = []
            cur = pos
            while cur != start:
                cur, action = prev[cur]
                moves.append(action)
            moves.reverse()
            return moves
        for action in ("up", "down", "left", "right"):
            nxt = pos.moved(action, h, w)
            if nxt == pos:
                continue
            step_cost = enter_cost(nxt)
            if step_cost == BLOCKED:
                continue
            nd = d + 1.0 + step_cost
            if nd < dist.get(nxt, BLOCKED):
                dist[nxt] = nd
                prev[nxt] = (pos, action)
                heapq.heappush(heap, (nd, nxt.row, nxt.col))
    return None


def _evade(pos: GridPos, hazards: list[GridPos], blocked: Callable[[GridPos], bool],
           h: int, w: int) -> str:
    """Legal move maximizing the distance to the closest hazard."""
    best_action = "stay"
    best = min((manhattan(pos, hz) for hz in hazards), default=99)
    for action in ("up", "down", "left", "right"):
        nxt = pos.moved(action, h, w)
        if nxt == pos or blocked(nxt):
            continue
        d = min((manhattan(nxt, hz) for hz in hazards), default=99)
        if d > best:
            best = d
            best_action = action
    return best_action


# --- rtfm oracle -------------------------------------------------------------


def _rtfm_slots(state, assignment):
    """(item entity | None, monster entity | None) per target slot; items are
    looked up by their unique weapon word."""
    slots = []
    for slot in assignment.targets:
        item = next(
            (e for e in state.entities
             if e.attributes["kind"] == "item" and not e.attributes["distractor"]
             and e.name == slot.weapon),
            None,
        )
        monster = next(
            (e for e in state.entities
             if e.attributes["kind"] == "monster" and e.attributes["target"]
             and e.name == slot.monster and e.alive),
            None,
        )
        slots.append((slot, item, monster))
    return slots


def _item_beats(state, item_uid: int | None, monster) -> bool:
    if item_uid is None:
        return False
    item = state.entity(item_uid)
    facts = dict(state.assignment.modifier_facts)
    return facts.get(item.attributes["modifier"]) == monster.attributes["element"]


def oracle_rtfm(state, assignment) -> list[str]:
    """Greedy-matched planner: each agent fetches the item of its slot, then
    hunts a target monster its weapon beats, avoiding the distractor and any
    monster it cannot kill."""
    h = w = state.config.grid
    n = state.config.n_agents
    alive_targets = [
        e for e in state.live_entities()
        if e.attributes["kind"] == "monster" and e.attributes["target"]
    ]
    if not alive_targets:
        return ["stay"] * n

    slots = _rtfm_slots(state, assignment)
    held_weapon = {}
    for agent in state.agents:
        held_weapon[agent.id] = (
            state.entity(agent.inventory).name if agent.inventory is not None else None
        )

    committed: dict[int, int] = {}  # agent id -> slot index
    for agent in state.agents:
        for k, (slot, _item, _monster) in enumerate(slots):
            if held_weapon[agent.id] == slot.weapon:
                committed[agent.id] = k

    open_slots = [
        k for k, (_slot, item, monster) in enumerate(slots)
        if monster is not None and item is not None and k not in committed.values()
    ]
    free_agents = [a.id for a in state.agents if a.id not in committed]
    assigned: dict[int, int] = {}
    if free_agents and open_slots:
        k_use = min(len(free_agents), len(open_slots))
        best = None
        for agent_combo in itertools.permutations(free_agents, k_use):
            for slot_combo in itertools.combinations(open_slots, k_use):
                cost = 0
                for aid, k in zip(agent_combo, slot_combo):
                    _slot, item, monster = slots[k]
                    apos = state.agents[aid].pos
                    cost += manhattan(apos, item.pos) + manhattan(item.pos, monster.pos)
                key = (cost, agent_combo, slot_combo)
                if best is None or key < best:
                    best = key
        _, agent_combo, slot_combo = best
        assigned = dict(zip(agent_combo, slot_combo))

    distractor = next(
        (e for e in state.live_entities()
         if e.attributes["kind"] == "monster" and e.attributes["distractor"]),
        None,
    )
    monsters_move = state.config.monsters_move
    joint: list[str] = []
    for agent in state.agents:
        inv = agent.inventory
        # decide the waypoint and which item cell (if any) we intend to enter
        waypoint: GridPos | None = None
        wanted_item_uid: int | None = None
        if agent.id in committed:
            beatable = [m for m in alive_targets if _item_beats(state, inv, m)]
            if beatable:
                target = min(beatable, key=lambda m: (manhattan(agent.pos, m.pos), m.uid))
                waypoint = target.pos
        elif agent.id in assigned:
            _slot, item, _monster = slots[assigned[agent.id]]
            waypoint = item.pos
            wanted_item_uid = item.uid

        facts = dict(state.assignment.modifier_facts)
        inv_modifier = (
            state.entity(inv).attributes["modifier"] if inv is not None else None
        )
        hazards = [
            e
            for e in state.live_entities()
            if e.attributes["kind"] == "monster"
            and (e.attributes["distractor"] or not _item_beats(state, inv, e))
        ]

        def enter_cost(pos: GridPos, inv_modifier=inv_modifier,
                       wanted_item_uid=wanted_item_uid, hazards=hazards) -> float:
            # Entering a cell resolves pickup before combat, so safety is
            # judged with the weapon held after any swap on that cell.
            cost = 0.0
            items_here = [
                e for e in state.live_entities()
                if e.attributes["kind"] == "item" and e.pos == pos
            ]
            monsters_here = [
                e for e in state.live_entities()
                if e.attributes["kind"] == "monster" and e.pos == pos
            ]
            modifier_after = (
                items_here[0].attributes["modifier"] if items_here else inv_modifier
            )
            for m in monsters_here:
                if m.attributes["distractor"] or not m.attributes["target"]:
                    return BLOCKED
                if facts.get(modifier_after) != m.attributes["element"]:
                    return BLOCKED
            if any(e.uid != wanted_item_uid for e in items_here):
                cost += SOFT_BLOCK  # unwanted weapon swap
            if distractor is not None and manhattan(pos, distractor.pos) == 1:
                cost += NEAR_DISTRACTOR
            if monsters_move:
                for e in hazards:
                    if manhattan(pos, e.pos) == 1:
                        cost += NEAR_HAZARD
            return cost

        if waypoint is None:
            hazard_pos = [e.pos for e in hazards]
            near = [p for p in hazard_pos if manhattan(agent.pos, p) <= 2]
            joint.append(
                _evade(agent.pos, near, lambda p: enter_cost(p) >= SOFT_BLOCK, h, w)
                if near
                else "stay"
            )
            continue

        route = plan_route(agent.pos, {waypoint}, enter_cost, h, w)
        if route is None or not route:
            hazard_pos = [e.pos for e in hazards if manhattan(agent.pos, e.pos) <= 2]
            joint.append(
                _evade(agent.pos, hazard_pos, lambda p: enter_cost(p) >= SOFT_BLOCK, h, w)
                if hazard_pos
                else "stay"
            )
        else:
            joint.append(route[0])
    return joint


# --- messenger oracle --------------------------------------------------------


def oracle_messenger(state, assignment) -> list[str]:
    """Distinct message/goal targets per agent via exhaustive matching;
    the enemy cell is never entered and its surroundings are penalized."""
    h = w = state.config.grid
    n = state.config.n_agents
    enemy = next((e for e in state.live_entities() if e.attributes["role"] == "enemy"), None)
    messages = [e for e in state.live_entities() if e.attributes["role"] == "message"]
    goals = [e for e in state.live_entities() if e.attributes["role"] == "goal"]

    need_message = [False] * n
    need_goal = [False] * n
    for agent in state.agents:
        if state.config.stage == "S3":
            need_message[agent.id] = state.claimed_message[agent.id] is None
            need_goal[agent.id] = (
                not need_message[agent.id] and state.claimed_goal[agent.id] is None
            )
        elif assignment.start_with_messages:
            need_goal[agent.id] = state.claimed_goal[agent.id] is None
        else:
            need_message[agent.id] = state.claimed_message[agent.id] is None

    agent_positions = [a.pos for a in state.agents]

    def target_cells(e) -> set[GridPos]:
        # Chasers come to us: cover their current and next cell.  Fleeing
        # prey reacts to our own moves, so predicting it feeds a dither
        # loop; trail its current cell and let the pincer close.
        if e.attributes["movement"] == "chasing":
            move = movement_step(e.pos, "chasing", agent_positions, None, h, w)
            return {e.pos, e.pos.moved(move, h, w)}
        return {e.pos}

    def match(agent_ids: list[int], entities) -> dict[int, object]:
        free = [e for e in entities if e.uid not in state.claimed_message
                and e.uid not in state.claimed_goal]
        if not agent_ids or not free:
            return {}
        k_use = min(len(agent_ids), len(free))
        best = None
        for agent_combo in itertools.permutations(agent_ids, k_use):
            for ent_combo in itertools.combinations(range(len(free)), k_use):
                cost = sum(
                    manhattan(state.agents[a].pos, free[e].pos)
                    for a, e in zip(agent_combo, ent_combo)
                )
                key = (cost, agent_combo, ent_combo)
                if best is None or key < best:
                    best = key
        _, agent_combo, ent_combo = best
        return {a: free[e] for a, e in zip(agent_combo, ent_combo)}

    quarry: dict[int, object] = {}
    quarry.update(match([i for i in range(n) if need_message[i]], messages))
    quarry.update(match([i for i in range(n) if need_goal[i]], goals))
    waypoints: dict[int, set[GridPos]] = {a: target_cells(e) for a, e in quarry.items()}

    # Fleeing prey cannot be cornered by one equal-speed pursuer; enlist
    # agents without their own quarry as herders on the far side.
    def mirror_cell(prey_pos: GridPos, chaser_pos: GridPos) -> set[GridPos]:
        return {
            GridPos(
                min(max(2 * prey_pos.row - chaser_pos.row, 0), h - 1),
                min(max(2 * prey_pos.col - chaser_pos.col, 0), w - 1),
            )
        }

    chasers = [a for a, e in quarry.items() if e.attributes["movement"] == "fleeing"]
    pursuit = set(chasers)  # agents whose target jitters: steer greedily
    idle = [i for i in range(n) if i not in waypoints]
    for chaser_id, herder_id in zip(chasers, idle):
        waypoints[herder_id] = mirror_cell(quarry[chaser_id].pos, state.agents[chaser_id].pos)
        pursuit.add(herder_id)
    if len(chasers) == n and n > 1:
        # everyone is stuck on fleeing prey: gang up on the nearest one
        lead = min(chasers, key=lambda a: manhattan(state.agents[a].pos, quarry[a].pos))
        for other in chasers:
            if other != lead:
                waypoints[other] = mirror_cell(quarry[lead].pos, state.agents[lead].pos)

    joint: list[str] = []
    for agent in state.agents:
        has_msg = agent.has_message

        def enter_cost(pos: GridPos, has_msg=has_msg) -> float:
            # A moving agent can safely brush past chasers (contact only
            # counts at the interaction phase, right after its own move), so
            # adjacency carries only a mild cost; the lethal cells are the
            # enemy itself and, without a message, any goal.
            cost = 0.0
            if enemy is not None:
                if pos == enemy.pos:
                    return BLOCKED
                if manhattan(pos, enemy.pos) == 1:
                    cost += 1.0
            if not has_msg:
                for g in goals:
                    if g.pos == pos:
                        return BLOCKED  # touching a goal without a message loses
            return cost

        cells = waypoints.get(agent.id)
        action = "stay"
        if cells:
            if agent.id in pursuit:
                # moving targets jitter; a greedy step is immune to the
                # equal-cost path flip-flop a shortest-path planner shows
                target = min(cells)
                action = greedy_step_toward(agent.pos, [target])
                if enter_cost(agent.pos.moved(action, h, w)) >= SOFT_BLOCK:
                    route = plan_route(agent.pos, cells, enter_cost, h, w)
                    action = route[0] if route else "stay"
            else:
                route = plan_route(agent.pos, cells, enter_cost, h, w)
                if route:
                    action = route[0]
        # Never finish a step co-located with a lethal entity: chasers park
        # on an agent's cell between steps, so "stay" can be fatal.
        if enter_cost(agent.pos.moved(action, h, w)) == BLOCKED:
            escapes = [
                a for a in ACTIONS
                if enter_cost(agent.pos.moved(a, h, w)) < BLOCKED
                and agent.pos.moved(a, h, w) != agent.pos.moved(action, h, w)
            ]
            if escapes:
                action = max(
                    escapes,
                    key=lambda a: (
                        min(
                            manhattan(agent.pos.moved(a, h, w), hz)
                            for hz in ([enemy.pos] if enemy is not None else [agent.pos])
                        ),
                        a,
                    ),
                )
        joint.append(action)
    return joint


# --- policies and evaluation -------------------------------------------------


def oracle_policy(ep: Episode, rng: Rng) -> Callable[[Episode], list[str]]:
    if ep.env == "rtfm":
        return lambda e: oracle_rtfm(e.state, e.assignment)
    return lambda e: oracle_messenger(e.state, e.assignment)


def random_policy(ep: Episode, rng: Rng) -> Callable[[Episode], list[str]]:
    def act(e: Episode) -> list[str]:
        return [rng.choice(ACTIONS) for _ in range(e.n_agents)]

    return act


POLICIES = {"oracle": oracle_policy, "random": random_policy}


def run_episode(ep: Episode, act: Callable[[Episode], list[str]],
                max_steps: int | None = None) -> Transcript:
    while not ep.done:
        if max_steps is not None and ep.steps >= max_steps:
            break
        ep.step(act(ep))
    return ep.transcript


def replay_transcript(transcript: Transcript, grid: int | None = None) -> Transcript:
    """Regenerate the episode from the header and re-apply recorded actions."""
    ep = Episode(
        transcript.env,
        transcript.stage,
        transcript.split,
        transcript.seed,
        n_agents=transcript.n_agents,
        grid=grid,
    )
    for rec in transcript.steps:
        ep.step(list(rec.actions))
    return ep.transcript


@dataclass(frozen=True)
class EvalStats:
    episodes: int
    wins: int
    win_rate: float
    mean_return: float
    mean_length: float

    def to_lines(self) -> list[str]:
        return [
            f"episodes={self.episodes}",
            f"wins={self.wins}",
            f"win_rate={self.win_rate}",
            f"mean_return={self.mean_return}",
            f"mean_length={self.mean_length}",
        ]


def evaluate(
    policy: str | Callable,
    env: str,
    stage: str,
    split: str = "train",
    episodes: int = 100,
    seed: int = 0,
    n_agents: int = 2,
    grid: int | None = None,
    max_steps: int | None = None,
) -> EvalStats:
    """Aggregate win rate / return / length over seeded episodes.  Pure
    function of (policy, configuration, seed)."""
    factory = POLICIES[policy] if isinstance(policy, str) else policy
    root = Rng(seed)
    wins = 0
    total_return = 0.0
    total_len = 0
    for i in range(episodes):
        er = root.split(f"ep{i}")
        ep_seed = er.integers(2**31)
        ep = Episode(env, stage, split, ep_seed, n_agents=n_agents, grid=grid)
        act = factory(ep, er.split("policy"))
        run_episode(ep, act, max_steps=max_steps)
        wins += 1 if ep.win else 0
        total_return += sum(ep.returns()) / ep.n_agents
        total_len += ep.steps
    return EvalStats(
        episodes=episodes,
        wins=wins,
        win_rate=wins / episodes,
        mean_return=total_return / episodes,
        mean_length=total_len / episodes,
    )
