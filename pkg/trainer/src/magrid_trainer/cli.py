"""Trainer CLI: train | ablate against a running protocol server."""

from __future__ import annotations

import argparse
import pathlib

from magrid.decision import LossWeights

from .train import ABLATION_MODES, TrainConfig, ablate, train


def _config_from(args) -> TrainConfig:
    return TrainConfig(
        env=args.env,
        stage=args.stage,
        split=args.split,
        total_steps=args.steps,
        episode_cap=args.episode_cap,
        lr=args.lr,
        weights=LossWeights(
            policy=args.w_policy, opponent=args.w_opponent, kl=args.w_kl, reg=args.w_reg
        ),
        reg_kind=args.reg,
        seed=args.seed,
        eval_every=args.eval_every,
        eval_episodes=args.eval_episodes,
    )


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="magrid-trainer", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("train", "ablate"):
        p = sub.add_parser(name)
        p.add_argument("--host", default="127.0.0.1")
        p.add_argument("--port", type=int, default=5858)
        p.add_argument("--env", default="rtfm", choices=("rtfm", "messenger"))
        p.add_argument("--stage", default="S1")
        p.add_argument("--split", default="train")
        p.add_argument("--steps", type=int, default=50_000)
        p.add_argument("--episode-cap", type=int, default=80)
        p.add_argument("--lr", type=float, default=0.05)
        p.add_argument("--w-policy", type=float, default=1.0)
        p.add_argument("--w-opponent", type=float, default=1.0)
        p.add_argument("--w-kl", type=float, default=0.1)
        p.add_argument("--w-reg", type=float, default=0.1)
        p.add_argument("--reg", default="dis", choices=("num", "dis"))
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--eval-every", type=int, default=10_000)
        p.add_argument("--eval-episodes", type=int, default=30)
        if name == "train":
            p.add_argument("--out", default="train_curve.txt")
            p.add_argument("--checkpoint", default=None)
        else:
            p.add_argument("--mode", required=True, choices=ABLATION_MODES)
            p.add_argument("--out", default="ablation.txt")
    args = parser.parse_args(argv)
    config = _config_from(args)
    if args.command == "train":
        result = train(config, args.host, args.port, checkpoint_path=args.checkpoint, log_every=1)
        pathlib.Path(args.out).write_text(result.curve_text(), encoding="utf-8")
        print(f"final_eval_win_rate={result.final_eval_win_rate:.4f}")
        print(f"wall_seconds={result.wall_seconds:.1f}")
        return 0
    report = ablate(config, args.host, args.port, args.mode)
    text = "\n".join(report.to_lines()) + "\n"
    pathlib.Path(args.out).write_text(text, encoding="utf-8")
    print(text, end="")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
