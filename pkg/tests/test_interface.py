import json
import socket
import threading

import pytest

from magrid.agents import oracle_rtfm, run_episode, oracle_policy
from magrid.cli import main
from magrid.core import Rng
from magrid.episode import Episode, Observation
from magrid.server import Session, make_server


class Client:
    def __init__(self, port):
        self.sock = socket.create_connection(("127.0.0.1", port))
        self.file = self.sock.makefile("rw", encoding="utf-8")

    def send(self, obj):
        self.file.write(json.dumps(obj) + "\n")
        self.file.flush()
        return json.loads(self.file.readline())

    def send_raw(self, text):
        self.file.write(text + "\n")
        self.file.flush()
        return json.loads(self.file.readline())

    def close(self):
        self.sock.close()


@pytest.fixture()
def server():
    srv = make_server()
    thread = threading.Thread(target=srv.serve_forever, daemon=True)
    thread.start()
    yield srv.server_address[1]
    srv.shutdown()
    srv.server_close()


def test_reset_is_reproducible(server):
    a, b = Client(server), Client(server)
    req = {"cmd": "reset", "env": "rtfm", "stage": "S1", "split": "train", "seed": 7}
    ra, rb = a.send(req), b.send(req)
    assert ra == rb
    a.close()
    b.close()


def test_error_paths_preserve_session(server):
    c = Client(server)
    r = c.send({"cmd": "step", "actions": ["stay", "stay"]})
    assert not r["ok"] and r["error"]["code"] == "no_episode"
    r = c.send({"cmd": "reset", "env": "rtfm", "stage": "S1", "seed": 3})
    assert r["ok"]
    before = c.send({"cmd": "info"})
    r = c.send({"cmd": "step", "actions": ["stay"]})
    assert r["error"]["code"] == "bad_actions"
    r = c.send_raw("this is not json")
    assert r["error"]["code"] == "bad_json"
    r = c.send({"cmd": "warp"})
    assert r["error"]["code"] == "unknown_cmd"
    after = c.send({"cmd": "info"})
    assert before == after  # failed commands never mutate the session
    c.close()


def test_protocol_round_trip_equals_in_process(server):
    seed = 21
    local = Episode("rtfm", "S1", "train", seed)
    policy = oracle_policy(local, Rng(0))
    c = Client(server)
    r = c.send({"cmd": "reset", "env": "rtfm", "stage": "S1", "split": "train", "seed": seed})
    assert r["ok"]
    done = False
    while not done:
        joint = policy(local)
        remote = c.send({"cmd": "step", "actions": joint})
        result = local.step(joint)
        assert remote["rewards"] == list(result.rewards)
        assert remote["done"] == result.done and remote["win"] == result.win
        done = result.done
    assert local.win
    remote_tr = c.send({"cmd": "transcript"})["text"]
    assert remote_tr == local.transcript.to_text()
    c.close()


def test_observation_payload_round_trip(server):
    c = Client(server)
    r = c.send({"cmd": "reset", "env": "messenger", "stage": "S1", "seed": 4})
    obs = Observation.from_payload(r["obs"][0])
    local = Episode("messenger", "S1", "train", 4).observe(0)
    assert obs == local
    c.close()


def test_render_and_close(server):
    c = Client(server)
    c.send({"cmd": "reset", "env": "messenger", "stage": "S2", "seed": 2})
    r = c.send({"cmd": "render"})
    assert r["ok"] and "step=" in r["text"]
    r = c.send({"cmd": "close"})
    assert r["ok"] and r["closed"]
    c.close()


def test_session_object_directly():
    s = Session()
    r = s.handle({"cmd": "reset", "env": "rtfm", "stage": "S2", "seed": 10})
    assert r["ok"]
    r = s.handle({"cmd": "step", "actions": ["up", "up"]})
    assert r["ok"] and len(r["rewards"]) == 2
    r = s.handle({"bogus": 1})
    assert r["error"]["code"] == "bad_args"


# --- cli ----------------------------------------------------------------------


def test_cli_gen_writes_files(tmp_path, capsys):
    rc = main(
        [
            "gen",
            "--env",
            "rtfm",
            "--stage",
            "S5",
            "--seed",
            "1",
            "--episodes",
            "3",
            "--out",
            str(tmp_path),
        ]
    )
    assert rc == 0
    transcripts = list(tmp_path.glob("*.transcript.txt"))
    manuals = list(tmp_path.glob("*.manual.txt"))
    assert len(transcripts) == 3 and len(manuals) == 3
    text = transcripts[0].read_text()
    assert text.startswith("episode env=rtfm stage=S5")


def test_cli_eval_reports(capsys):
    rc = main(
        [
            "eval",
            "--env",
            "messenger",
            "--stage",
            "S1",
            "--policy",
            "oracle",
            "--episodes",
            "20",
            "--seed",
            "5",
        ]
    )
    out = capsys.readouterr().out
    assert rc == 0
    assert "win_rate=1.0" in out
    assert json.loads(out.strip().splitlines()[-1])["episodes"] == 20


def test_cli_corpus_verify(capsys):
    rc = main(["corpus", "--verify"])
    out = capsys.readouterr().out
    assert rc == 0
    assert "rtfm_goal_templates=12" in out
    assert "messenger_descriptions=2214" in out
    assert "verified=true" in out


def test_cli_play_oracle(capsys):
    rc = main(
        [
            "play",
            "--env",
            "rtfm",
            "--stage",
            "S1",
            "--seed",
            "7",
            "--policy",
            "oracle",
            "--max-steps",
            "40",
        ]
    )
    out = capsys.readouterr().out
    assert rc == 0
    assert "win=True" in out


def test_cli_rejects_conflicting_flags(capsys):
    rc = main(
        ["eval", "--env", "rtfm", "--stage", "S1", "--grid", "10", "--split", "train"]
    )
    assert rc == 2
