"""Parameter set for the decision core, with a binary checkpoint format.

Checkpoint layout (little-endian):

    magic   8 bytes  b"MAGRIDP1"
    u32     vocab blob length; then the vocab, newline-joined UTF-8
    u32     number of arrays
    per array:
        u16     name length, then the name (UTF-8)
        u8      ndim, then ndim x u64 dims
        float64 data, C order

Everything the client side needs to mirror featurization travels in the
file: the closed vocabulary plus every weight.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from ..core import Rng
from .autodiff import Tensor, parameter

MAGIC = b"MAGRIDP1"
N_ACTIONS = 5


@dataclass
class DecisionParams:
    vocab: tuple[str, ...]
    n_agents: int
    emb_dim: int
    feat_dim: int
    tensors: dict[str, Tensor] = field(default_factory=dict)

    def __post_init__(self):
        self.index = {w: i for i, w in enumerate(self.vocab)}

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def zero_grads(self) -> None:
        for t in self.tensors.values():
            t.zero_grad()

    def grads(self) -> dict[str, np.ndarray]:
        return {
            name: (t.grad.copy() if t.grad is not None else np.zeros_like(t.data))
            for name, t in self.tensors.items()
        }

    def flat(self) -> np.ndarray:
        return np.concatenate([t.data.ravel() for t in sorted_items(self.tensors)])

    def load_flat(self, values: np.ndarray) -> None:
        i = 0
        for t in sorted_items(self.tensors):
            n = t.data.size
            t.data = values[i : i + n].reshape(t.data.shape).copy()
            i += n
        if i != values.size:
            raise ValueError("flat parameter vector has the wrong length")


def sorted_items(tensors: dict[str, Tensor]) -> list[Tensor]:
    return [tensors[k] for k in sorted(tensors)]


def init_params(
    vocab: tuple[str, ...],
    rng: Rng,
    n_agents: int = 2,
    emb_dim: int = 8,
    feat_dim: int = 16,
    scale: float = 0.1,
    zero: bool = False,
) -> DecisionParams:
    v = len(vocab)
    de, d = emb_dim, feat_dim

    def make(shape):
        if zero:
            return parameter(np.zeros(shape))
        return parameter(rng.normal(shape, scale=scale))

    tensors = {
        "emb": make((v, de)),
        "w_cell": make((de, d)),
        "w_drow": make((de, d)),
        "w_dcol": make((de, d)),
        "w_bag": make((de, d)),
        "v_man": make((1, d)),
        "v_goal": make((1, d)),
        "v_pos": make((1, d)),
        "v_inv_chain": make((1, d)),
        "v_inv_chain_r": make((1, d)),
        "v_inv_chain_c": make((1, d)),
        "v_goal_chain": make((1, d)),
        "v_goal_chain_r": make((1, d)),
        "v_goal_chain_c": make((1, d)),
        "w_sc": make((de, 4)),
        "w_mix": make((2 * d, 2)),
        "b_mix": make((2,)),
        "w_self": make((d + 64, N_ACTIONS)),
        "b_self": make((N_ACTIONS,)),
    }
    for k in range(n_agents - 1):
        tensors[f"w_oth{k}"] = make((d + 64, N_ACTIONS))
        tensors[f"b_oth{k}"] = make((N_ACTIONS,))
    return DecisionParams(
        vocab=tuple(vocab), n_agents=n_agents, emb_dim=de, feat_dim=d, tensors=tensors
    )


def save_checkpoint(params: DecisionParams, path: str) -> None:
    blob = bytearray()
    blob += MAGIC
    vocab_bytes = "\n".join(params.vocab).encode("utf-8")
    blob += struct.pack("<I", len(vocab_bytes))
    blob += vocab_bytes
    blob += struct.pack("<I", len(params.tensors))
    for name in sorted(params.tensors):
        t = params.tensors[name]
        nb = name.encode("utf-8")
        blob += struct.pack("<H", len(nb)) + nb
        blob += struct.pack("<B", t.data.ndim)
        for dim in t.data.shape:
            blob += struct.pack("<Q", dim)
        blob += np.ascontiguousarray(t.data, dtype="<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(bytes(blob))


def load_checkpoint(path: str) -> DecisionParams:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:8] != MAGIC:
        raise ValueError("not a decision checkpoint")
    off = 8
    (vlen,) = struct.unpack_from("<I", raw, off)
    off += 4
    vocab = tuple(raw[off : off + vlen].decode("utf-8").split("\n"))
    off += vlen
    (count,) = struct.unpack_from("<I", raw, off)
    off += 4
    tensors: dict[str, Tensor] = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", raw, off)
        off += 2
        name = raw[off : off + nlen].decode("utf-8")
        off += nlen
        (ndim,) = struct.unpack_from("<B", raw, off)
        off += 1
        shape = struct.unpack_from(f"<{ndim}Q", raw, off)
        off += 8 * ndim
        size = int(np.prod(shape)) if shape else 1
        data = np.frombuffer(raw, dtype="<f8", count=size, offset=off).reshape(shape)
        off += 8 * size
        tensors[name] = parameter(data.copy())
    n_heads = sum(1 for n in tensors if n.startswith("w_oth"))
    emb = tensors["emb"]
    return DecisionParams(
        vocab=vocab,
        n_agents=n_heads + 1,
        emb_dim=emb.data.shape[1],
        feat_dim=tensors["w_cell"].data.shape[1],
        tensors=tensors,
    )
