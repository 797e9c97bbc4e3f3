"""Retrieval and random baselines acting in the frozen encoder's latent space."""

from __future__ import annotations

import numpy as np
import torch

from ..errors import InvalidState
from ..sim import ACTION_BOUNDS, ActionBounds, GraspAction
from .networks import PointNetEncoder, pair_embedding


def embed_pairs(encoder: PointNetEncoder, states, goals, batch: int = 64) -> np.ndarray:
    """Pooled pair embeddings ``[g_state, g_goal - g_state]`` as float64 rows."""
    dtype = next(encoder.parameters()).dtype
    out = []
    with torch.no_grad():
        for i in range(0, len(states), batch):
            s = torch.as_tensor(np.stack(states[i : i + batch]), dtype=dtype)
            g = torch.as_tensor(np.stack(goals[i : i + batch]), dtype=dtype)
            out.append(pair_embedding(encoder(s)[1], encoder(g)[1]).double().numpy())
    return np.concatenate(out, axis=0) if out else np.zeros((0, 0))


class LatentMemory:
    """Training tuples indexed by their pair embedding."""

    def __init__(self, encoder: PointNetEncoder, tuples):
        if not tuples:
            raise InvalidState("nearest-neighbour baselines need a non-empty training set")
        self.encoder = encoder
        self.actions = np.stack([np.asarray(t.action, dtype=float) for t in tuples])
        self.keys = embed_pairs(encoder, [t.state for t in tuples], [t.next for t in tuples])

    def distances(self, state, goal) -> np.ndarray:
        q = embed_pairs(self.encoder, [np.asarray(state)], [np.asarray(goal)])[0]
        return np.linalg.norm(self.keys - q[None, :], axis=1)

    def nn_greedy(self, state, goal) -> np.ndarray:
        return self.actions[int(np.argmin(self.distances(state, goal)))].copy()

    def vinn_weights(self, dist: np.ndarray, k: int):
        k = min(k, len(dist))
        idx = np.argsort(dist, kind="stable")[:k]
        w = np.exp(-(dist[idx] - dist[idx].min()))
        return idx, w / w.sum()

    def vinn(self, state, goal, k: int = 5) -> np.ndarray:
        idx, w = self.vinn_weights(self.distances(state, goal), k)
        return w @ self.actions[idx]


def baseline_nn_greedy(train_set, encoder, state, goal) -> GraspAction:
    if not train_set:
        raise InvalidState("nearest-neighbour baselines need a non-empty training set")
    return GraspAction.from_normalized(LatentMemory(encoder, train_set).nn_greedy(state, goal))


def baseline_vinn(train_set, encoder, state, goal, k: int = 5) -> GraspAction:
    if not train_set:
        raise InvalidState("nearest-neighbour baselines need a non-empty training set")
    return GraspAction.from_normalized(LatentMemory(encoder, train_set).vinn(state, goal, k))


def random_normalized(rng: np.random.Generator, n: int | None = None) -> np.ndarray:
    size = (5,) if n is None else (n, 5)
    return rng.uniform(-1.0, 1.0, size=size)


def baseline_random(bounds: ActionBounds = ACTION_BOUNDS, seed: int = 0) -> GraspAction:
    rng = np.random.default_rng(seed)
    a = rng.uniform(bounds.lo_arr, bounds.hi_arr)
    return GraspAction.from_array(a)
