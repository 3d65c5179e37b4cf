"""Shared branching recurrent Q-network written directly in numpy.

Topology for a query agent i at one time step::

    enc_k   = relu(W2 relu(W1 obs_k + b1) + b2)          for every agent k
    joint   = [enc_i, onehot(i), last_action_i, enc_k for k != i in camera order]
    x       = relu(W3 joint + b3)
    h'      = GRU(x, h)
    q       = three 3-way heads on h'  (translate, rotate, zoom)

One parameter set serves all agents. Everything is batched as
(time, episode, query agent, ...) so a single unroll covers a whole batch of
episodes for every agent, and ``backward`` runs exact BPTT over it.
"""
from __future__ import annotations

import copy
import json
import struct
import zlib
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

LAST_ACTION_SIZE = 9
N_BRANCHES = 3
BRANCH_SIZE = 3


@dataclass(frozen=True)
class Topology:
    n_agents: int
    feature_size: int
    enc1: int = 64
    enc2: int = 64
    trunk: int = 128
    hidden: int = 128

    @property
    def trunk_input(self) -> int:
        return self.n_agents * self.enc2 + self.n_agents + LAST_ACTION_SIZE

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        H = self.hidden
        return {
            "fc1_W": (self.enc1, self.feature_size), "fc1_b": (self.enc1,),
            "fc2_W": (self.enc2, self.enc1), "fc2_b": (self.enc2,),
            "fc3_W": (self.trunk, self.trunk_input), "fc3_b": (self.trunk,),
            # GRU gates stacked in order update, reset, candidate
            "gru_Wx": (3 * H, self.trunk), "gru_Uzr": (2 * H, H), "gru_Un": (H, H),
            "gru_b": (3 * H,),
            "head_m_W": (BRANCH_SIZE, H), "head_m_b": (BRANCH_SIZE,),
            "head_r_W": (BRANCH_SIZE, H), "head_r_b": (BRANCH_SIZE,),
            "head_z_W": (BRANCH_SIZE, H), "head_z_b": (BRANCH_SIZE,),
        }


@dataclass
class NetworkParams:
    topology: Topology
    arrays: dict[str, np.ndarray]

    def copy(self) -> "NetworkParams":
        return NetworkParams(self.topology, {k: v.copy() for k, v in self.arrays.items()})

    def __getitem__(self, key: str) -> np.ndarray:
        return self.arrays[key]

    def equals(self, other: "NetworkParams") -> bool:
        return (self.topology == other.topology
                and all(np.array_equal(v, other.arrays[k]) for k, v in self.arrays.items()))

    @property
    def n_params(self) -> int:
        return sum(v.size for v in self.arrays.values())


_RELU_LAYERS = ("fc1_W", "fc2_W", "fc3_W")


def init_params(topology: Topology, seed: int, dtype=np.float64) -> NetworkParams:
    """Fan-in scaled uniform weights, zero biases."""
    rng = np.random.Generator(np.random.PCG64(seed))
    arrays = {}
    for name, shape in topology.param_shapes().items():
        if name.endswith("_b"):
            arrays[name] = np.zeros(shape)
            continue
        fan_in = shape[1]
        gain = 6.0 if name in _RELU_LAYERS else 3.0
        limit = np.sqrt(gain / fan_in)
        arrays[name] = rng.uniform(-limit, limit, size=shape)
    return NetworkParams(topology, {k: v.astype(dtype) for k, v in arrays.items()})


def copy_params(src: NetworkParams) -> NetworkParams:
    return src.copy()


def zeros_like_params(params: NetworkParams) -> dict[str, np.ndarray]:
    return {k: np.zeros_like(v) for k, v in params.arrays.items()}


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _dense(x: np.ndarray, W: np.ndarray, b: np.ndarray | None = None) -> np.ndarray:
    """x (..., in) @ W.T (+ b) computed as a single 2-D matmul."""
    out = x.reshape(-1, x.shape[-1]) @ W.T
    if b is not None:
        out += b
    return out.reshape(x.shape[:-1] + (W.shape[0],))


def _orders(n: int, agents: np.ndarray) -> np.ndarray:
    return np.array([[i] + [j for j in range(n) if j != i] for i in agents], dtype=int)


@dataclass
class ForwardTrace:
    agents: np.ndarray
    order: np.ndarray
    obs: np.ndarray
    z1: np.ndarray
    a1: np.ndarray
    z2: np.ndarray
    xin: np.ndarray
    z3: np.ndarray
    a3: np.ndarray
    h_prev: np.ndarray
    z: np.ndarray
    r: np.ndarray
    rh: np.ndarray
    n: np.ndarray
    hs: np.ndarray
    shape: tuple[int, ...] = field(default=())


def forward_sequence(params: NetworkParams, obs: np.ndarray, last_actions: np.ndarray,
                     h0: np.ndarray | None = None, agents: Sequence[int] | None = None,
                     keep_trace: bool = True):
    """Unroll the network.

    obs:          (T, E, n, feature_size)
    last_actions: (T, E, n, 9) one-hot previous action of each agent
    h0:           (E, Q, hidden) or None for zeros
    agents:       query agents, default all n

    Returns q (T, E, Q, 3, 3), the final hidden state (E, Q, hidden) and a
    ForwardTrace (None when ``keep_trace`` is False).
    """
    p = params.arrays
    topo = params.topology
    T, E, n, F = obs.shape
    if n != topo.n_agents or F != topo.feature_size:
        raise ValueError(f"observation shape {obs.shape} does not fit topology {topo}")
    if last_actions.shape != (T, E, n, LAST_ACTION_SIZE):
        raise ValueError(f"last_actions shape {last_actions.shape} != {(T, E, n, LAST_ACTION_SIZE)}")
    dtype = p["fc1_W"].dtype
    obs = np.asarray(obs, dtype=dtype)
    last_actions = np.asarray(last_actions, dtype=dtype)
    agents = np.arange(n) if agents is None else np.asarray(agents, dtype=int)
    Q = len(agents)
    H = topo.hidden
    if h0 is None:
        h0 = np.zeros((E, Q, H), dtype=dtype)
    if h0.shape != (E, Q, H):
        raise ValueError(f"hidden state shape {h0.shape} != {(E, Q, H)}")

    # 2-D matmuls throughout: stacked ND matmul is far slower for these shapes
    z1 = _dense(obs, p["fc1_W"], p["fc1_b"])
    a1 = np.maximum(z1, 0.0)
    z2 = _dense(a1, p["fc2_W"], p["fc2_b"])
    enc = np.maximum(z2, 0.0)

    order = _orders(n, agents)
    g = enc[:, :, order, :]  # (T, E, Q, n, enc2)
    ident = np.broadcast_to(np.eye(n, dtype=dtype)[agents], (T, E, Q, n))
    xin = np.concatenate([g[..., 0, :], ident, last_actions[:, :, agents, :],
                          g[..., 1:, :].reshape(T, E, Q, (n - 1) * topo.enc2)], axis=-1)
    z3 = _dense(xin, p["fc3_W"], p["fc3_b"])
    a3 = np.maximum(z3, 0.0)

    xg = _dense(a3, p["gru_Wx"], p["gru_b"])
    Uzr, Un = p["gru_Uzr"], p["gru_Un"]
    hs = np.empty((T, E, Q, H), dtype=dtype)
    if keep_trace:
        h_prev = np.empty_like(hs)
        zs = np.empty_like(hs)
        rs = np.empty_like(hs)
        rhs = np.empty_like(hs)
        ns = np.empty_like(hs)
    h = h0
    for t in range(T):
        hzr = _dense(h, Uzr)
        z = _sigmoid(xg[t, ..., :H] + hzr[..., :H])
        r = _sigmoid(xg[t, ..., H:2 * H] + hzr[..., H:])
        rh = r * h
        cand = np.tanh(xg[t, ..., 2 * H:] + _dense(rh, Un))
        h_new = (1.0 - z) * cand + z * h
        if keep_trace:
            h_prev[t], zs[t], rs[t], rhs[t], ns[t] = h, z, r, rh, cand
        hs[t] = h_new
        h = h_new

    W_head = np.concatenate([p["head_m_W"], p["head_r_W"], p["head_z_W"]])
    b_head = np.concatenate([p["head_m_b"], p["head_r_b"], p["head_z_b"]])
    q = _dense(hs, W_head, b_head).reshape(T, E, Q, N_BRANCHES, BRANCH_SIZE)
    if not keep_trace:
        return q, h, None
    trace = ForwardTrace(agents, order, obs, z1, a1, z2, xin, z3, a3,
                         h_prev, zs, rs, rhs, ns, hs, (T, E, n, Q))
    return q, h, trace


def backward(params: NetworkParams, trace: ForwardTrace, dq: np.ndarray,
             dh_final: np.ndarray | None = None) -> dict[str, np.ndarray]:
    """Exact gradients of a scalar loss given dL/dq of shape (T, E, Q, 3, 3)."""
    p = params.arrays
    topo = params.topology
    T, E, n, Q = trace.shape
    H = topo.hidden
    grads: dict[str, np.ndarray] = {}

    dtype = p["fc1_W"].dtype
    dq9 = np.asarray(dq, dtype=dtype).reshape(T, E, Q, N_BRANCHES * BRANCH_SIZE)
    hs_flat = trace.hs.reshape(-1, H)
    dq_flat = dq9.reshape(-1, N_BRANCHES * BRANCH_SIZE)
    dW_head = dq_flat.T @ hs_flat
    db_head = dq_flat.sum(axis=0)
    for k, name in enumerate(("m", "r", "z")):
        grads[f"head_{name}_W"] = dW_head[3 * k:3 * k + 3]
        grads[f"head_{name}_b"] = db_head[3 * k:3 * k + 3]
    W_head = np.concatenate([p["head_m_W"], p["head_r_W"], p["head_z_W"]])
    dhs = (dq_flat @ W_head).reshape(T, E, Q, H)

    Uzr, Un = p["gru_Uzr"], p["gru_Un"]
    dxg = np.empty((T, E, Q, 3 * H), dtype=dtype)
    dUzr = np.zeros_like(Uzr)
    dUn = np.zeros_like(Un)
    dh = np.zeros((E, Q, H), dtype=dtype) if dh_final is None else dh_final.astype(dtype)
    for t in range(T - 1, -1, -1):
        dh = dh + dhs[t]
        hp, z, r, rh, cand = trace.h_prev[t], trace.z[t], trace.r[t], trace.rh[t], trace.n[t]
        dcand = dh * (1.0 - z)
        dz = dh * (hp - cand)
        dhp = dh * z
        dan = dcand * (1.0 - cand * cand)
        drh = (dan.reshape(-1, H) @ Un).reshape(dan.shape)
        dUn += dan.reshape(-1, H).T @ rh.reshape(-1, H)
        dr = drh * hp
        dhp += drh * r
        daz = dz * z * (1.0 - z)
        dar = dr * r * (1.0 - r)
        dzr = np.concatenate([daz, dar], axis=-1)
        dUzr += dzr.reshape(-1, 2 * H).T @ hp.reshape(-1, H)
        dhp += (dzr.reshape(-1, 2 * H) @ Uzr).reshape(dhp.shape)
        dxg[t, ..., :2 * H] = dzr
        dxg[t, ..., 2 * H:] = dan
        dh = dhp
    grads["gru_Uzr"] = dUzr
    grads["gru_Un"] = dUn

    a3 = trace.a3.reshape(-1, topo.trunk)
    dxg_flat = dxg.reshape(-1, 3 * H)
    grads["gru_Wx"] = dxg_flat.T @ a3
    grads["gru_b"] = dxg_flat.sum(axis=0)
    dz3 = (dxg_flat @ p["gru_Wx"]) * (trace.z3.reshape(-1, topo.trunk) > 0)
    grads["fc3_W"] = dz3.T @ trace.xin.reshape(-1, topo.trunk_input)
    grads["fc3_b"] = dz3.sum(axis=0)
    dxin = (dz3 @ p["fc3_W"]).reshape(T, E, Q, topo.trunk_input)

    e2 = topo.enc2
    dg = np.concatenate([dxin[..., None, :e2],
                         dxin[..., e2 + n + LAST_ACTION_SIZE:].reshape(T, E, Q, n - 1, e2)],
                        axis=-2)
    denc = np.zeros((T, E, n, e2), dtype=dtype)
    for k in range(Q):
        denc[:, :, trace.order[k], :] += dg[:, :, k]

    dz2 = (denc * (trace.z2 > 0)).reshape(-1, e2)
    grads["fc2_W"] = dz2.T @ trace.a1.reshape(-1, topo.enc1)
    grads["fc2_b"] = dz2.sum(axis=0)
    dz1 = (dz2 @ p["fc2_W"]) * (trace.z1.reshape(-1, topo.enc1) > 0)
    grads["fc1_W"] = dz1.T @ trace.obs.reshape(-1, topo.feature_size)
    grads["fc1_b"] = dz1.sum(axis=0)
    return {k: grads[k] for k in params.arrays}


def forward(params: NetworkParams, blocks, agent_index: int, hidden_in: np.ndarray | None = None):
    """Single-step Q-values of one agent.

    ``blocks`` is a sequence of per-agent EncodedInput (or anything with
    ``features`` and ``last_action``). Returns (q (3, 3), hidden_out, trace).
    """
    feats = np.stack([b.features for b in blocks])[None, None]
    last = np.stack([b.last_action for b in blocks])[None, None]
    h0 = None if hidden_in is None else np.asarray(hidden_in, dtype=float).reshape(1, 1, -1)
    q, h, trace = forward_sequence(params, feats, last, h0, agents=[agent_index])
    return q[0, 0, 0], h[0, 0], trace


def clip_gradients(grads: dict[str, np.ndarray], max_norm: float) -> tuple[dict[str, np.ndarray], float]:
    norm = float(np.sqrt(sum(float((g * g).sum()) for g in grads.values())))
    if max_norm > 0 and norm > max_norm:
        scale = max_norm / (norm + 1e-12)
        return {k: g * scale for k, g in grads.items()}, norm
    return grads, norm


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: NetworkParams, beta1: float = 0.9, beta2: float = 0.999,
                   eps: float = 1e-8) -> "AdamState":
        return cls(zeros_like_params(params), zeros_like_params(params), 0, beta1, beta2, eps)

    def copy(self) -> "AdamState":
        return copy.deepcopy(self)


def optimizer_step(params: NetworkParams, grads: dict[str, np.ndarray], state: AdamState,
                   lr: float) -> NetworkParams:
    """Adam update, applied in place; returns ``params`` for chaining."""
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for k, g in grads.items():
        m = state.m[k]
        v = state.v[k]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        params.arrays[k] -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params


# -- checkpoint container --------------------------------------------------

MAGIC = b"CAMQNET\x00"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


class TopologyMismatch(CheckpointError):
    def __init__(self, expected: Topology, found: Topology):
        super().__init__(f"checkpoint topology {asdict(found)} does not match expected {asdict(expected)}")
        self.expected = expected
        self.found = found


def encode_checkpoint(topology: Topology, arrays: dict[str, np.ndarray], meta: dict | None = None) -> bytes:
    """Binary layout (all little-endian)::

        magic(8) | version u32 | header_len u32 | header JSON | float64 payload | crc32 u32

    The header records the topology, the array manifest (name, shape) in
    payload order, and free-form metadata.
    """
    manifest = [[name, list(a.shape)] for name, a in arrays.items()]
    header = json.dumps({"topology": asdict(topology), "arrays": manifest, "meta": meta or {}},
                        sort_keys=True, separators=(",", ":")).encode()
    body = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in arrays.values())
    blob = MAGIC + struct.pack("<II", FORMAT_VERSION, len(header)) + header + body
    return blob + struct.pack("<I", zlib.crc32(blob))


def decode_checkpoint(blob: bytes, expected: Topology | None = None):
    """Inverse of ``encode_checkpoint``; returns (topology, arrays, meta)."""
    if len(blob) < 20 or blob[:8] != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    (crc,) = struct.unpack("<I", blob[-4:])
    if zlib.crc32(blob[:-4]) != crc:
        raise CheckpointError("checkpoint is corrupt (checksum mismatch)")
    version, hlen = struct.unpack("<II", blob[8:16])
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    try:
        header = json.loads(blob[16:16 + hlen])
        topology = Topology(**header["topology"])
    except (ValueError, TypeError, KeyError) as exc:
        raise CheckpointError(f"unreadable checkpoint header: {exc}") from exc
    if expected is not None and topology != expected:
        raise TopologyMismatch(expected, topology)
    arrays = {}
    offset = 16 + hlen
    for name, shape in header["arrays"]:
        count = int(np.prod(shape)) if shape else 1
        end = offset + 8 * count
        if end > len(blob) - 4:
            raise CheckpointError("checkpoint payload truncated")
        arrays[name] = np.frombuffer(blob[offset:end], dtype="<f8").astype(float).reshape(shape)
        offset = end
    if offset != len(blob) - 4:
        raise CheckpointError("checkpoint payload has trailing bytes")
    return topology, arrays, header["meta"]


def save_params(path: str | Path, params: NetworkParams, meta: dict | None = None) -> None:
    Path(path).write_bytes(encode_checkpoint(params.topology, params.arrays, meta))


def load_params(path: str | Path, expected: Topology | None = None) -> NetworkParams:
    topology, arrays, _ = decode_checkpoint(Path(path).read_bytes(), expected)
    names = topology.param_shapes()
    missing = set(names) - set(arrays)
    if missing:
        raise CheckpointError(f"checkpoint lacks network arrays {sorted(missing)}")
    return NetworkParams(topology, {k: arrays[k] for k in names})
