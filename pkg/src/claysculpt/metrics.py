"""
Shape-similarity metrics between point clouds.

Conventions: Chamfer uses squared Euclidean distances, mean-normalized on
both sides. EMD and Hausdorff use plain Euclidean distances.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial import cKDTree

from .errors import InvalidArgument
from .pointcloud import as_cloud

EMD_MAX_POINTS = 512


def _nn_dists(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Distance from each point of ``src`` to its nearest point in ``dst``."""
    d, _ = cKDTree(dst).query(src, k=1)
    return d


def chamfer(a, b) -> float:
    a, b = as_cloud(a), as_cloud(b)
    return float(np.mean(_nn_dists(a, b) ** 2) + np.mean(_nn_dists(b, a) ** 2))


def hausdorff(a, b) -> float:
    a, b = as_cloud(a), as_cloud(b)
    return float(max(np.max(_nn_dists(a, b)), np.max(_nn_dists(b, a))))


def emd(a, b) -> float:
    """Exact Earth Mover's distance between equal-size clouds.

    Mean matched distance under the optimal one-to-one assignment.
    """
    a, b = as_cloud(a), as_cloud(b)
    if len(a) != len(b):
        raise InvalidArgument(f"emd needs equal-size clouds, got {len(a)} and {len(b)}")
    if len(a) > EMD_MAX_POINTS:
        raise InvalidArgument(f"emd limited to {EMD_MAX_POINTS} points, got {len(a)}")
    cost = np.sqrt(np.sum((a[:, None, :] - b[None, :, :]) ** 2, axis=-1))
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].mean())


def mix_distance(a, b, gamma: float = 0.5) -> float:
    """Pre-training target: ``gamma * chamfer + (1 - gamma) * emd``."""
    if not 0.0 <= gamma <= 1.0:
        raise InvalidArgument("gamma must lie in [0, 1]")
    return gamma * chamfer(a, b) + (1.0 - gamma) * emd(a, b)


def action_mse(pred, target) -> float:
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    return float(np.mean((pred - target) ** 2))


@dataclass
class DistanceReport:
    cd: float
    emd: float
    hd: float

    def to_dict(self):
        return asdict(self)


def distance_report(a, b) -> DistanceReport:
    return DistanceReport(chamfer(a, b), emd(a, b), hausdorff(a, b))


class Scorer:
    """Plug-in seam for text/shape similarity scorers (e.g. CLIP-style).

    Subclasses map a point cloud (or rendered image) and a text prompt to a
    real score. No scorer ships with the package.
    """

    def score(self, cloud, prompt: str) -> float:
        raise NotImplementedError
