"""
Point-cloud containers and the perception pipeline: cropping, regional
clustering, farthest-point downsampling and bottom-to-top cluster ordering.

Point clouds are plain ``(N, 3)`` float arrays in meters (z up).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidArgument, NoClayObserved

Z_TIE_TOL = 1e-3  # clusters whose centroid z differ by less are one layer
KMEANS_MAX_ITER = 100
KMEANS_TOL = 1e-6


def as_cloud(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1 and pts.size == 3:
        pts = pts.reshape(1, 3)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise InvalidArgument(f"expected an (N, 3) point array, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise InvalidArgument("point cloud contains NaN or Inf")
    return pts


@dataclass(frozen=True)
class WorkspaceBounds:
    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        if lo.shape != (3,) or hi.shape != (3,) or not np.all(lo < hi):
            raise InvalidArgument(f"workspace bounds need lo < hi componentwise, got {self.lo}, {self.hi}")
        object.__setattr__(self, "lo", tuple(float(v) for v in lo))
        object.__setattr__(self, "hi", tuple(float(v) for v in hi))

    def contains(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return np.all((pts >= self.lo) & (pts <= self.hi), axis=1)


@dataclass
class Cluster:
    """One regional patch. ``indices`` point back into the source cloud."""

    id: int
    points: np.ndarray
    indices: Optional[np.ndarray] = None

    def __post_init__(self):
        self.points = as_cloud(self.points)
        if self.indices is not None:
            self.indices = np.asarray(self.indices, dtype=np.int64)
            if self.indices.shape != (len(self.points),):
                raise InvalidArgument("cluster indices must match point count")

    @cached_property
    def centroid(self) -> np.ndarray:
        return self.points.mean(axis=0)

    def __len__(self):
        return len(self.points)

    def with_points(self, points: np.ndarray) -> "Cluster":
        return Cluster(self.id, points, self.indices)


@dataclass
class ClusteredCloud:
    clusters: list = field(default_factory=list)

    def __len__(self):
        return len(self.clusters)

    def __getitem__(self, i) -> Cluster:
        return self.clusters[i]

    @property
    def points(self) -> np.ndarray:
        return np.concatenate([c.points for c in self.clusters], axis=0)

    def replace(self, cluster: Cluster) -> "ClusteredCloud":
        out = list(self.clusters)
        out[cluster.id] = cluster
        return ClusteredCloud(out)

    def to_json(self) -> dict:
        return {
            "clusters": [
                {
                    "id": int(c.id),
                    "centroid": [float(v) for v in c.centroid],
                    "points": c.points.tolist(),
                }
                for c in self.clusters
            ]
        }

    @classmethod
    def from_json(cls, data: dict) -> "ClusteredCloud":
        return cls([Cluster(int(c["id"]), np.asarray(c["points"], dtype=float)) for c in data["clusters"]])


# --------------------------------------------------------------------------- #
# operations
# --------------------------------------------------------------------------- #
def crop(cloud, bounds: WorkspaceBounds) -> np.ndarray:
    """Keep the points inside the closed box ``bounds``."""
    pts = as_cloud(cloud) if len(cloud) else np.zeros((0, 3))
    kept = pts[bounds.contains(pts)]
    if len(kept) == 0:
        raise NoClayObserved("no clay observed inside workspace bounds")
    return kept


def _kmeans_pp_init(pts: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    centers = np.empty((k, 3))
    centers[0] = pts[rng.integers(len(pts))]
    d2 = np.sum((pts - centers[0]) ** 2, axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            idx = rng.integers(len(pts))
        else:
            idx = rng.choice(len(pts), p=d2 / total)
        centers[i] = pts[idx]
        d2 = np.minimum(d2, np.sum((pts - centers[i]) ** 2, axis=1))
    return centers


def _sq_dists(pts: np.ndarray, centers: np.ndarray) -> np.ndarray:
    return (
        np.sum(pts**2, axis=1)[:, None]
        - 2.0 * pts @ centers.T
        + np.sum(centers**2, axis=1)[None, :]
    )


def kmeans(points, k: int, seed: int = 0, max_iter: int = KMEANS_MAX_ITER, tol: float = KMEANS_TOL):
    """Lloyd's algorithm with k-means++ seeding.

    Returns ``(labels, centers)``. Stops when no center moves more than
    ``tol`` meters or after ``max_iter`` iterations.
    """
    pts = as_cloud(points)
    if k < 1 or len(pts) < k:
        raise InvalidArgument(f"cannot split {len(pts)} points into {k} clusters")
    rng = np.random.default_rng(seed)
    centers = _kmeans_pp_init(pts, k, rng)
    labels = np.zeros(len(pts), dtype=np.int64)
    for _ in range(max_iter):
        labels = np.argmin(_sq_dists(pts, centers), axis=1)
        new = np.empty_like(centers)
        for j in range(k):
            members = pts[labels == j]
            if len(members):
                new[j] = members.mean(axis=0)
            else:
                # steal the point worst served by its current center
                far = np.argmax(np.min(_sq_dists(pts, centers), axis=1))
                new[j] = pts[far]
                labels[far] = j
        shift = np.max(np.linalg.norm(new - centers, axis=1))
        centers = new
        if shift <= tol:
            break
    labels = np.argmin(_sq_dists(pts, centers), axis=1)
    return labels, centers


def cluster(cloud, k: int = 10, seed: int = 0) -> ClusteredCloud:
    """Partition ``cloud`` into ``k`` regional patches, ordered bottom to top."""
    pts = as_cloud(cloud)
    if len(pts) < k:
        raise InvalidArgument(f"cloud has {len(pts)} points, fewer than k={k}")
    labels, _ = kmeans(pts, k, seed=seed)
    clusters = []
    for j in range(k):
        idx = np.flatnonzero(labels == j)
        if len(idx) == 0:
            continue
        clusters.append(Cluster(j, pts[idx], idx))
    return order_clusters(clusters)


def order_clusters(clusters: Sequence[Cluster], z_tol: float = Z_TIE_TOL) -> ClusteredCloud:
    """Sort by centroid z, then x, then y; z within ``z_tol`` counts as equal.

    Layers are formed by chaining: a centroid joins the current layer when
    it is within ``z_tol`` of the layer's lowest centroid.
    """
    items = sorted(clusters, key=lambda c: float(c.centroid[2]))
    layers: list = []
    for c in items:
        if layers and c.centroid[2] - layers[-1][0].centroid[2] <= z_tol:
            layers[-1].append(c)
        else:
            layers.append([c])
    ordered = []
    for layer in layers:
        ordered.extend(sorted(layer, key=lambda c: (float(c.centroid[0]), float(c.centroid[1]))))
    return ClusteredCloud([Cluster(i, c.points, c.indices) for i, c in enumerate(ordered)])


def farthest_point_indices(points, n: int, seed: int = 0) -> np.ndarray:
    """Indices of ``n`` points chosen by farthest-point sampling.

    The seed picks a random anchor; sampling starts from the point farthest
    from that anchor, so the start is always on the hull of the set.
    """
    pts = as_cloud(points)
    if n < 1 or len(pts) < n:
        raise InvalidArgument(f"cannot take {n} of {len(pts)} points")
    if n == len(pts):
        return np.arange(len(pts))
    rng = np.random.default_rng(seed)
    anchor = pts[rng.integers(len(pts))]
    chosen = np.empty(n, dtype=np.int64)
    chosen[0] = int(np.argmax(np.sum((pts - anchor) ** 2, axis=1)))
    dist = np.sum((pts - pts[chosen[0]]) ** 2, axis=1)
    for i in range(1, n):
        nxt = int(np.argmax(dist))
        chosen[i] = nxt
        dist = np.minimum(dist, np.sum((pts - pts[nxt]) ** 2, axis=1))
    return chosen


def downsample(cluster: Cluster, n: int, seed: int = 0) -> Cluster:
    if len(cluster) < n:
        raise InvalidArgument(f"cluster {cluster.id} has {len(cluster)} points, need at least {n}")
    idx = farthest_point_indices(cluster.points, n, seed)
    src = cluster.indices[idx] if cluster.indices is not None else None
    return Cluster(cluster.id, cluster.points[idx], src)


def resample_indices(points, n: int, seed: int = 0) -> np.ndarray:
    """Like :func:`farthest_point_indices` but pads small sets by repetition.

    Padding draws duplicates of existing points, which leaves max-pooled
    features untouched.
    """
    pts = as_cloud(points)
    if len(pts) >= n:
        return farthest_point_indices(pts, n, seed)
    rng = np.random.default_rng(seed)
    extra = rng.integers(0, len(pts), size=n - len(pts))
    return np.concatenate([np.arange(len(pts)), np.sort(extra)])


def resample(cluster: Cluster, n: int, seed: int = 0) -> Cluster:
    idx = resample_indices(cluster.points, n, seed)
    src = cluster.indices[idx] if cluster.indices is not None else None
    return Cluster(cluster.id, cluster.points[idx], src)


# --------------------------------------------------------------------------- #
# file formats
# --------------------------------------------------------------------------- #
def write_ply(path, points) -> Path:
    pts = as_cloud(points)
    path = Path(path)
    lines = [
        "ply",
        "format ascii 1.0",
        f"element vertex {len(pts)}",
        "property float x",
        "property float y",
        "property float z",
        "end_header",
    ]
    lines.extend(f"{x:.9g} {y:.9g} {z:.9g}" for x, y, z in pts)
    path.write_text("\n".join(lines) + "\n", encoding="ascii")
    return path


def read_ply(path) -> np.ndarray:
    """Read an ASCII PLY; x, y, z are taken from the vertex properties."""
    with open(path, "r", encoding="ascii") as fh:
        if fh.readline().strip() != "ply":
            raise InvalidArgument(f"{path}: not a PLY file")
        n_vertex = None
        props: list = []
        in_vertex = False
        for line in fh:
            tok = line.split()
            if not tok:
                continue
            if tok[0] == "format" and tok[1] != "ascii":
                raise InvalidArgument(f"{path}: only ASCII PLY is supported")
            if tok[0] == "element":
                in_vertex = tok[1] == "vertex"
                if in_vertex:
                    n_vertex = int(tok[2])
            elif tok[0] == "property" and in_vertex:
                props.append(tok[-1])
            elif tok[0] == "end_header":
                break
        if n_vertex is None:
            raise InvalidArgument(f"{path}: no vertex element")
        cols = [props.index(a) for a in ("x", "y", "z")]
        rows = [fh.readline().split() for _ in range(n_vertex)]
    if n_vertex == 0:
        return np.zeros((0, 3))
    data = np.asarray(rows, dtype=float)
    return as_cloud(data[:, cols])


def save_clustered(path, clustered: ClusteredCloud) -> None:
    Path(path).write_text(json.dumps(clustered.to_json()))


def load_clustered(path) -> ClusteredCloud:
    return ClusteredCloud.from_json(json.loads(Path(path).read_text()))
