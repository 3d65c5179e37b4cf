"""Central finite-difference check of ``neuralnet.backward``."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .neuralnet import NetworkParams, Topology, backward, forward_sequence, init_params


@dataclass
class GradCheckResult:
    topology: Topology
    max_rel_error: float
    worst_param: str


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Norm-wise relative error ||a - n|| / max(||a|| + ||n||, 1e-10)."""
    denom = max(float(np.linalg.norm(analytic) + np.linalg.norm(numeric)), 1e-10)
    return float(np.linalg.norm(analytic - numeric)) / denom


def random_topology(rng: np.random.Generator) -> Topology:
    return Topology(
        n_agents=int(rng.integers(1, 4)),
        feature_size=int(rng.integers(2, 7)),
        enc1=int(rng.integers(2, 6)),
        enc2=int(rng.integers(2, 5)),
        trunk=int(rng.integers(2, 6)),
        hidden=int(rng.integers(2, 6)),
    )


def check_instance(params: NetworkParams, rng: np.random.Generator, T: int = 3, E: int = 2,
                   step: float = 1e-5,
                   corrupt: Callable[[dict], dict] | None = None) -> GradCheckResult:
    """Compare analytic and numeric gradients of L = sum(C * q) + sum(D * h_T)."""
    topo = params.topology
    n = topo.n_agents
    obs = rng.uniform(-1, 1, size=(T, E, n, topo.feature_size))
    last = np.zeros((T, E, n, 9))
    for idx in np.ndindex(T, E, n):
        for b in range(3):
            last[idx + (3 * b + rng.integers(3),)] = 1.0
    h0 = rng.uniform(-0.5, 0.5, size=(E, n, topo.hidden))
    C = rng.normal(size=(T, E, n, 3, 3))
    D = rng.normal(size=(E, n, topo.hidden))

    def loss() -> float:
        q, h, _ = forward_sequence(params, obs, last, h0, keep_trace=False)
        return float((C * q).sum() + (D * h).sum())

    _, _, trace = forward_sequence(params, obs, last, h0)
    grads = backward(params, trace, C, dh_final=D)
    if corrupt is not None:
        grads = corrupt(grads)
    worst, worst_name = 0.0, ""
    for name, arr in params.arrays.items():
        numeric = np.zeros_like(arr)
        for i in np.ndindex(arr.shape):
            old = arr[i]
            arr[i] = old + step
            up = loss()
            arr[i] = old - step
            down = loss()
            arr[i] = old
            numeric[i] = (up - down) / (2 * step)
        err = relative_error(grads[name], numeric)
        if err > worst:
            worst, worst_name = err, name
    return GradCheckResult(topo, worst, worst_name)


def run_gradcheck(seed: int, trials: int,
                  corrupt: Callable[[dict], dict] | None = None) -> list[GradCheckResult]:
    rng = np.random.Generator(np.random.PCG64(seed))
    results = []
    for _ in range(trials):
        topo = random_topology(rng)
        params = init_params(topo, int(rng.integers(2**31)))
        # non-zero biases so every code path carries gradient
        for k, v in params.arrays.items():
            if k.endswith("_b"):
                v[...] = rng.uniform(-0.3, 0.3, size=v.shape)
        results.append(check_instance(params, rng, corrupt=corrupt))
    return results
