"""Client for the line-delimited environment protocol.

One TCP connection per client; requests are JSON objects, one per line, and
every call raises ProtocolError on an error response.
"""

from __future__ import annotations

import json
import socket
from dataclasses import dataclass

from magrid.episode import Observation


class ProtocolError(RuntimeError):
    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code


@dataclass
class StepReply:
    observations: list[Observation]
    rewards: list[float]
    done: bool
    win: bool
    events: list[str]
    returns: list[float]


@dataclass
class ResetReply:
    observations: list[Observation]
    document: list[str]
    goal: str
    config: dict


class EnvClient:
    def __init__(self, host: str, port: int, timeout: float = 30.0):
        self._sock = socket.create_connection((host, port), timeout=timeout)
        self._file = self._sock.makefile("rw", encoding="utf-8")

    def close(self) -> None:
        try:
            self._call({"cmd": "close"})
        except (OSError, ProtocolError):
            pass
        self._sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _call(self, request: dict) -> dict:
        self._file.write(json.dumps(request) + "\n")
        self._file.flush()
        line = self._file.readline()
        if not line:
            raise ConnectionError("server closed the connection")
        reply = json.loads(line)
        if not reply.get("ok"):
            err = reply.get("error", {})
            raise ProtocolError(err.get("code", "unknown"), err.get("message", ""))
        return reply

    def reset(
        self,
        env: str,
        stage: str,
        seed: int,
        split: str = "train",
        n_agents: int = 2,
        grid: int | None = None,
    ) -> ResetReply:
        req = {
            "cmd": "reset",
            "env": env,
            "stage": stage,
            "split": split,
            "seed": seed,
            "n_agents": n_agents,
        }
        if grid is not None:
            req["grid"] = grid
        reply = self._call(req)
        return ResetReply(
            observations=[Observation.from_payload(o) for o in reply["obs"]],
            document=reply["manual"]["document"],
            goal=reply["manual"]["goal"],
            config=reply["config"],
        )

    def step(self, actions: list[str]) -> StepReply:
        reply = self._call({"cmd": "step", "actions": actions})
        return StepReply(
            observations=[Observation.from_payload(o) for o in reply["obs"]],
            rewards=reply["rewards"],
            done=reply["done"],
            win=reply["win"],
            events=reply["events"],
            returns=reply["returns"],
        )

    def info(self) -> dict:
        return self._call({"cmd": "info"})

    def render(self) -> str:
        return self._call({"cmd": "render"})["text"]

    def transcript(self) -> str:
        return self._call({"cmd": "transcript"})["text"]
