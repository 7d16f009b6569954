"""Line-delimited control protocol for external learners.

One TCP connection carries one session.  Requests and responses are single
UTF-8 JSON objects, one per line.  Commands:

    {"cmd": "reset", "env": .., "stage": .., "split": .., "seed": ..,
     "n_agents": .., "grid": ..}      -> {"ok": true, "obs": [..], "manual": {..}}
    {"cmd": "step", "actions": [..]}  -> {"ok": true, "obs": [..], "rewards": [..],
                                          "done": .., "win": .., "events": [..],
                                          "returns": [..]}
    {"cmd": "render"}                 -> {"ok": true, "text": ..}
    {"cmd": "info"}                   -> {"ok": true, ..config echo..}
    {"cmd": "transcript"}             -> {"ok": true, "text": ..}
    {"cmd": "close"}                  -> {"ok": true, "closed": true}

Errors come back as {"ok": false, "error": {"code": .., "message": ..}} and
never change session state.  Codes: bad_json, unknown_cmd, bad_args,
no_episode, episode_done, bad_actions, internal.
"""

from __future__ import annotations

import json
import socketserver
import threading

from .core import ACTIONS
from .episode import Episode


def _error(code: str, message: str) -> dict:
    return {"ok": False, "error": {"code": code, "message": message}}


class Session:
    """Holds at most one live episode; commands are serialized per session."""

    def __init__(self):
        self.episode: Episode | None = None
        self.lock = threading.Lock()

    def handle(self, request: dict) -> dict:
        with self.lock:
            return self._dispatch(request)

    def _dispatch(self, request: dict) -> dict:
        if not isinstance(request, dict) or "cmd" not in request:
            return _error("bad_args", "request must be an object with a cmd field")
        cmd = request["cmd"]
        handler = getattr(self, f"_cmd_{cmd}", None)
        if handler is None:
            return _error("unknown_cmd", f"unknown command {cmd!r}")
        try:
            return handler(request)
        except (ValueError, KeyError, TypeError) as exc:
            return _error("bad_args", str(exc))
        except Exception as exc:  # pragma: no cover - defensive
            return _error("internal", f"{type(exc).__name__}: {exc}")

    def _cmd_reset(self, req: dict) -> dict:
        for key in ("env", "stage", "seed"):
            if key not in req:
                return _error("bad_args", f"reset requires {key!r}")
        episode = Episode(
            env=req["env"],
            stage=req["stage"],
            split=req.get("split", "train"),
            seed=int(req["seed"]),
            n_agents=int(req.get("n_agents", 2)),
            grid=req.get("grid"),
        )
        self.episode = episode
        return {
            "ok": True,
            "obs": [o.to_payload() for o in episode.observe_all()],
            "manual": {
                "document": list(episode.manual.document),
                "goal": episode.manual.goal_text,
            },
            "config": self._config_echo(),
        }

    def _cmd_step(self, req: dict) -> dict:
        ep = self.episode
        if ep is None:
            return _error("no_episode", "reset a session before stepping")
        if ep.done:
            return _error("episode_done", "episode already finished; reset to continue")
        actions = req.get("actions")
        if (
            not isinstance(actions, list)
            or len(actions) != ep.n_agents
            or any(a not in ACTIONS for a in actions)
        ):
            return _error(
                "bad_actions",
                f"actions must be a list of {ep.n_agents} moves from {list(ACTIONS)}",
            )
        result = ep.step(list(actions))
        return {
            "ok": True,
            "obs": [o.to_payload() for o in ep.observe_all()],
            "rewards": list(result.rewards),
            "done": result.done,
            "win": result.win,
            "events": list(result.events),
            "returns": ep.returns(),
        }

    def _cmd_render(self, req: dict) -> dict:
        if self.episode is None:
            return _error("no_episode", "nothing to render")
        return {"ok": True, "text": self.episode.render_text()}

    def _cmd_info(self, req: dict) -> dict:
        if self.episode is None:
            return _error("no_episode", "no live episode")
        return {"ok": True, **self._config_echo()}

    def _cmd_transcript(self, req: dict) -> dict:
        if self.episode is None:
            return _error("no_episode", "no live episode")
        return {"ok": True, "text": self.episode.transcript.to_text()}

    def _cmd_close(self, req: dict) -> dict:
        self.episode = None
        return {"ok": True, "closed": True}

    def _config_echo(self) -> dict:
        ep = self.episode
        return {
            "env": ep.env,
            "stage": ep.stage,
            "split": ep.transcript.split,
            "seed": ep.seed,
            "n_agents": ep.n_agents,
            "grid": ep.config.grid,
            "step": ep.steps,
            "done": ep.done,
            "win": ep.win,
        }


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        session = Session()
        for raw in self.rfile:
            line = raw.decode("utf-8", errors="replace").strip()
            if not line:
                continue
            try:
                request = json.loads(line)
            except json.JSONDecodeError as exc:
                response = _error("bad_json", f"invalid JSON: {exc}")
            else:
                response = session.handle(request)
            payload = json.dumps(response, separators=(",", ":")) + "\n"
            try:
                self.wfile.write(payload.encode("utf-8"))
                self.wfile.flush()
            except BrokenPipeError:
                break
            if response.get("closed"):
                break


class ProtocolServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True


def make_server(host: str = "127.0.0.1", port: int = 0) -> ProtocolServer:
    return ProtocolServer((host, port), _Handler)


def serve(host: str = "127.0.0.1", port: int = 5858) -> None:
    """Run the protocol loop until interrupted."""
    with make_server(host, port) as server:
        addr = server.server_address
        print(f"listening on {addr[0]}:{addr[1]}", flush=True)
        try:
            server.serve_forever()
        except KeyboardInterrupt:  # pragma: no cover - interactive
            pass
