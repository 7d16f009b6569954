"""Command-line interface: gen | play | eval | serve | check | corpus."""

from __future__ import annotations

import argparse
import json
import pathlib
import sys

from . import agents
from .agents import POLICIES, evaluate, run_episode
from .checks import run_checks
from .core import ACTIONS, Rng
from .episode import Episode
from .manuals import default_splits, load_corpus
from .server import serve

KEY_ACTIONS = {"w": "up", "s": "down", "a": "left", "d": "right", ".": "stay"}


def _add_episode_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--env", choices=("rtfm", "messenger"), required=True)
    p.add_argument("--stage", default="S1")
    p.add_argument("--split", default="train", choices=("train", "eval", "eval_new"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--agents", type=int, default=2, dest="n_agents")
    p.add_argument("--grid", type=int, default=None, choices=(8, 10))


def _make_episode(args, seed: int) -> Episode:
    return Episode(
        args.env, args.stage, args.split, seed, n_agents=args.n_agents, grid=args.grid
    )


def cmd_gen(args) -> int:
    out_dir = pathlib.Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    root = Rng(args.seed)
    for i in range(args.episodes):
        ep_rng = root.split(f"ep{i}")
        ep = _make_episode(args, ep_rng.integers(2**31))
        policy = POLICIES[args.policy](ep, ep_rng.split("policy"))
        run_episode(ep, policy, max_steps=args.max_steps)
        base = out_dir / f"{args.env}_{args.stage}_{args.split}_{ep.seed}"
        base.with_suffix(".transcript.txt").write_text(
            ep.transcript.to_text(), encoding="utf-8"
        )
        manual_text = "\n".join([ep.manual.goal_text, *ep.manual.document]) + "\n"
        base.with_suffix(".manual.txt").write_text(manual_text, encoding="utf-8")
        print(f"wrote {base}.{{transcript,manual}}.txt win={ep.win} steps={ep.steps}")
    return 0


def cmd_play(args) -> int:
    ep = _make_episode(args, args.seed)
    print(ep.manual.goal_text)
    for line in ep.manual.document:
        print(" ", line)
    policy = None
    if args.policy != "keys":
        policy = POLICIES[args.policy](ep, Rng(args.seed).split("policy"))
    while not ep.done:
        print(ep.render_text())
        if policy is not None:
            actions = policy(ep)
        else:
            actions = []
            for i in range(ep.n_agents):
                raw = input(f"agent {i} move [w/a/s/d/. or quit]: ").strip().lower()
                if raw in ("q", "quit"):
                    return 0
                actions.append(KEY_ACTIONS.get(raw, "stay"))
        result = ep.step(actions)
        print(f"actions={actions} rewards={list(result.rewards)} events={list(result.events)}")
        if args.max_steps and ep.steps >= args.max_steps:
            break
    print(ep.render_text())
    print(f"win={ep.win} returns={ep.returns()}")
    return 0


def cmd_eval(args) -> int:
    stats = evaluate(
        args.policy,
        args.env,
        args.stage,
        split=args.split,
        episodes=args.episodes,
        seed=args.seed,
        n_agents=args.n_agents,
        grid=args.grid,
        max_steps=args.max_steps,
    )
    for line in stats.to_lines():
        print(line)
    print(json.dumps(stats.__dict__))
    return 0


def cmd_serve(args) -> int:
    serve(args.host, args.port)
    return 0


def cmd_check(args) -> int:
    failures = run_checks()
    print(f"failures={failures}")
    return 1 if failures else 0


def cmd_corpus(args) -> int:
    corpus = load_corpus()
    spec = default_splits()
    rtfm = corpus.rtfm
    msg = corpus.messenger
    print(f"rtfm_goal_templates={len(rtfm.goal)}")
    print(f"rtfm_team_templates={len(rtfm.team)}")
    print(f"rtfm_modifier_templates={len(rtfm.modifier)}")
    print(f"messenger_templates={len(msg.templates)}")
    print("messenger_fillings_per_assignment=27")
    print(f"messenger_descriptions={msg.description_count()}")
    print(f"split_digest={spec.digest()}")
    if args.verify:
        ok = (
            (len(rtfm.goal), len(rtfm.team), len(rtfm.modifier)) == (12, 10, 10)
            and len(msg.templates) == 82
            and msg.description_count() == 2214
            and not (spec.rtfm_train & spec.rtfm_eval)
        )
        print("verified=" + ("true" if ok else "false"))
        return 0 if ok else 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="magrid", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate episodes and manuals to files")
    _add_episode_flags(p)
    p.add_argument("--episodes", type=int, default=1)
    p.add_argument("--policy", default="oracle", choices=("oracle", "random"))
    p.add_argument("--max-steps", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_gen)

    p = sub.add_parser("play", help="step an episode in the terminal")
    _add_episode_flags(p)
    p.add_argument("--policy", default="keys", choices=("keys", "oracle", "random"))
    p.add_argument("--max-steps", type=int, default=None)
    p.set_defaults(fn=cmd_play)

    p = sub.add_parser("eval", help="run the evaluation harness")
    _add_episode_flags(p)
    p.add_argument("--policy", default="oracle", choices=("oracle", "random"))
    p.add_argument("--episodes", type=int, default=100)
    p.add_argument("--max-steps", type=int, default=None)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("serve", help="run the line-delimited protocol server")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=5858)
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("check", help="run the invariant smoke suites")
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("corpus", help="report corpus counts and split digest")
    p.add_argument("--verify", action="store_true")
    p.set_defaults(fn=cmd_corpus)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
