"""
Training data for the action model.

Two sources: synthetic (state, modified state) pairs with a mixed
Chamfer/EMD target for encoder pre-training, and simulated
(state, action, next state) tuples from random grasps on clay shapes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from ..errors import InvalidArgument
from ..metrics import mix_distance
from ..planner.templates import TEMPLATES
from ..planner.core import validate_and_order
from ..planner.grid import OccupancyGrid
from ..pointcloud import ClusteredCloud, cluster, read_ply, resample_indices, write_ply
from ..rng import child_seed, substream
from ..sim import ACTION_BOUNDS, GraspAction, apply_grasp, build_body, finger_band, observe
from ..subgoal import flatten, lengthen, shorten, thin

N_POINTS = 256
N_CLUSTERS = 10
GAMMA_MIX = 0.5
N_SYNTHETIC = 4000


@dataclass
class TrainingPair:
    state: np.ndarray
    next: np.ndarray
    target: float


@dataclass
class ActionTuple:
    state: np.ndarray
    next: np.ndarray
    action: np.ndarray  # normalized to [-1, 1]^5

    @property
    def grasp(self) -> GraspAction:
        return GraspAction.from_normalized(self.action)


# --------------------------------------------------------------------------- #
# shapes
# --------------------------------------------------------------------------- #
def random_shape_cells(rng: np.random.Generator, dims=(5, 5, 5)) -> list:
    """A random supported cell set: a few adjacent columns of random height."""
    n_cols = int(rng.integers(3, 9))
    start = (int(rng.integers(1, dims[0] - 1)), int(rng.integers(1, dims[1] - 1)))
    cols = [start]
    while len(cols) < n_cols:
        i, j = cols[int(rng.integers(len(cols)))]
        di, dj = [(1, 0), (-1, 0), (0, 1), (0, -1)][int(rng.integers(4))]
        nxt = (i + di, j + dj)
        if 0 <= nxt[0] < dims[0] and 0 <= nxt[1] < dims[1] and nxt not in cols:
            cols.append(nxt)
    cells = []
    for i, j in cols:
        h = int(rng.choice([1, 1, 1, 2, 2, 3]))
        cells.extend((i, j, k) for k in range(h))
    return cells


def shape_body(cells, seed: int):
    grid = OccupancyGrid.from_cells(cells)
    plan = validate_and_order(grid, list(cells))
    return build_body(plan.placements, seed=seed)


def seed_clouds(count: int, seed: int, k: int = N_CLUSTERS) -> list:
    """Clustered observations of simulated shapes, templates first."""
    names = sorted(TEMPLATES)
    out = []
    for n in range(count):
        rng = substream(seed, "seed-shape", n)
        if n < len(names):
            cells = sorted(TEMPLATES[names[n]].cells)
        else:
            cells = random_shape_cells(rng)
        body = shape_body(cells, child_seed(seed, "chunks", n))
        out.append(cluster(observe(body), k, seed=child_seed(seed, "kmeans", n)))
    return out


# --------------------------------------------------------------------------- #
# synthetic pre-training pairs
# --------------------------------------------------------------------------- #
def _random_unit(rng, horizontal=False) -> np.ndarray:
    if horizontal:
        a = rng.uniform(-math.pi, math.pi)
        return np.array([math.cos(a), math.sin(a), 0.0])
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


def random_modification(points: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    kind = ("lengthen", "shorten", "flatten", "thin")[int(rng.integers(4))]
    w = float(rng.random())
    if kind == "lengthen":
        return lengthen(points, _random_unit(rng), w)
    if kind == "shorten":
        return shorten(points, _random_unit(rng), w)
    if kind == "thin":
        return thin(points, _random_unit(rng, horizontal=True), w)
    return flatten(points, w)


def generate_synthetic_pairs(
    seeds: list,
    count: int = N_SYNTHETIC,
    seed: int = 0,
    n_points: int = N_POINTS,
    gamma: float = GAMMA_MIX,
    max_chain: int = 3,
) -> list:
    """Sample (cluster, modification chain) pairs from ``seeds``.

    Each pair applies 1 to ``max_chain`` random modifications to one
    cluster; the target is ``gamma * CD + (1 - gamma) * EMD``.
    """
    if not seeds:
        raise InvalidArgument("need at least one seed cloud")
    rng = substream(seed, "synthetic-pairs")
    pairs = []
    for n in range(count):
        cloud: ClusteredCloud = seeds[int(rng.integers(len(seeds)))]
        src = cloud[int(rng.integers(len(cloud)))]
        idx = resample_indices(src.points, n_points, seed=int(rng.integers(2**31)))
        state = src.points[idx]
        nxt = state
        for _ in range(int(rng.integers(1, max_chain + 1))):
            nxt = random_modification(nxt, rng)
        pairs.append(TrainingPair(state, nxt, mix_distance(state, nxt, gamma)))
    return pairs


# --------------------------------------------------------------------------- #
# simulated grasp tuples
# --------------------------------------------------------------------------- #
def random_grasp(points: np.ndarray, target: np.ndarray, rng: np.random.Generator, bounds=ACTION_BOUNDS) -> GraspAction:
    """A grasp centred near ``target`` that squeezes the clay it catches."""
    cx, cy, cz = target + rng.normal(scale=0.002, size=3)
    rot = float(rng.uniform(bounds.lo[3], bounds.hi[3]))
    probe = GraspAction(cx, cy, cz, rot, bounds.hi[4]).clipped(bounds)
    s, _, _, band = finger_band(points, probe)
    width = float(s[band].max() - s[band].min()) if band.sum() > 1 else bounds.hi[4]
    aperture = width * float(rng.uniform(0.4, 0.9))
    return GraspAction(cx, cy, cz, rot, aperture).clipped(bounds)


def nearest_cluster(cloud: ClusteredCloud, point) -> int:
    d = [np.linalg.norm(c.centroid - np.asarray(point)) for c in cloud.clusters]
    return int(np.argmin(d))


def simulate_tuples(
    count: int,
    seed: int = 0,
    grasps_per_shape: int = 5,
    n_points: int = N_POINTS,
    k: int = N_CLUSTERS,
    noise_sigma: float = 0.0,
) -> list:
    """Random grasps on randomized shapes, paired with the affected cluster.

    The cluster paired with a grasp is the one whose centroid is nearest the
    grasp centre; its next state is the same particles after the grasp.
    """
    names = sorted(TEMPLATES)
    out = []
    shape_no = 0
    while len(out) < count:
        rng = substream(seed, "rollout-shape", shape_no)
        if rng.random() < 0.5:
            cells = sorted(TEMPLATES[names[int(rng.integers(len(names)))]].cells)
        else:
            cells = random_shape_cells(rng)
        body = shape_body(cells, child_seed(seed, "rollout-chunks", shape_no))
        for g in range(grasps_per_shape):
            if len(out) >= count:
                break
            obs = observe(body, noise_sigma, seed=child_seed(seed, "rollout-noise", shape_no, g))
            clustered = cluster(obs, k, seed=child_seed(seed, "rollout-kmeans", shape_no, g))
            target = clustered[int(rng.integers(len(clustered)))].centroid
            action = random_grasp(body.particles, target, rng)
            after = apply_grasp(body, action)
            obs_after = observe(after, noise_sigma, seed=child_seed(seed, "rollout-noise-after", shape_no, g))
            chosen = clustered[nearest_cluster(clustered, action.as_array()[:3])]
            sel = resample_indices(chosen.points, n_points, seed=int(rng.integers(2**31)))
            particles = chosen.indices[sel]
            out.append(
                ActionTuple(
                    obs[particles],
                    obs_after[particles],
                    action.normalized(),
                )
            )
            body = after
        shape_no += 1
    return out


# --------------------------------------------------------------------------- #
# dataset files
# --------------------------------------------------------------------------- #
def save_dataset(directory, tuples=(), pairs=()) -> Path:
    """Write JSON-lines index plus one PLY per cluster."""
    directory = Path(directory)
    (directory / "clouds").mkdir(parents=True, exist_ok=True)
    index = directory / "dataset.jsonl"
    with index.open("w") as fh:
        for n, item in enumerate(list(tuples) + list(pairs)):
            state_ply = write_ply(directory / "clouds" / f"{n:05d}_state.ply", item.state)
            next_ply = write_ply(directory / "clouds" / f"{n:05d}_next.ply", item.next)
            rec = {
                "state_ply": str(state_ply.relative_to(directory)),
                "next_ply": str(next_ply.relative_to(directory)),
                "action": [float(v) for v in item.action] if isinstance(item, ActionTuple) else None,
                "target_distance": float(item.target) if isinstance(item, TrainingPair) else None,
            }
            fh.write(json.dumps(rec) + "\n")
    return index


def load_dataset(path):
    """Return ``(tuples, pairs)`` read from a dataset index."""
    path = Path(path)
    if path.is_dir():
        path = path / "dataset.jsonl"
    tuples, pairs = [], []
    for line in path.read_text().splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        state = read_ply(path.parent / rec["state_ply"])
        nxt = read_ply(path.parent / rec["next_ply"])
        if rec.get("action") is not None:
            tuples.append(ActionTuple(state, nxt, np.asarray(rec["action"], dtype=float)))
        if rec.get("target_distance") is not None:
            pairs.append(TrainingPair(state, nxt, float(rec["target_distance"])))
    return tuples, pairs


def split(items: list, sizes, seed: int = 0) -> list:
    order = substream(seed, "split").permutation(len(items))
    out, start = [], 0
    for size in sizes:
        out.append([items[i] for i in order[start : start + size]])
        start += size
    return out
