"""
Point-cloud modification functions used to express refinement sub-goals,
their text serialization for language-model prompting, and the backends
that choose one modification per refinement round.

Every modification is an affine map applied to one cluster; the weight
``w`` in [0, 1] scales how strong it is, and ``w = 0`` is the identity.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from .errors import InvalidArgument
from .llm import ChatClient, LLMConfig, ask_json, fill, load_prompt
from .pointcloud import Cluster, ClusteredCloud, downsample, order_clusters

logger = logging.getLogger(__name__)

KAPPA_LENGTHEN = 0.5
KAPPA_SHORTEN = 0.5
KINDS = ("lengthen", "shorten", "flatten", "thin")
LLM_POINTS_PER_CLUSTER = 50
WEIGHT_GRID = (0.1, 0.3, 0.5, 0.7, 0.9)
AXES = {"x": np.array([1.0, 0.0, 0.0]), "y": np.array([0.0, 1.0, 0.0]), "z": np.array([0.0, 0.0, 1.0])}
_R2 = np.sqrt(0.5)
HORIZONTAL = (AXES["x"], AXES["y"], np.array([_R2, _R2, 0.0]), np.array([_R2, -_R2, 0.0]))
DOWN = np.array([0.0, 0.0, -1.0])


def _check_weight(w):
    if not (0.0 <= w <= 1.0):
        raise InvalidArgument(f"weight must lie in [0, 1], got {w}")


def _unit(d, horizontal=False) -> np.ndarray:
    d = np.asarray(d, dtype=float).ravel()
    if horizontal and d.shape == (2,):
        d = np.array([d[0], d[1], 0.0])
    if d.shape != (3,):
        raise InvalidArgument(f"direction must be a 3-vector, got {d}")
    if horizontal and d[2] != 0.0:
        raise InvalidArgument("thin direction must be horizontal")
    if abs(np.linalg.norm(d) - 1.0) > 1e-9:
        raise InvalidArgument(f"direction must be a unit vector, got norm {np.linalg.norm(d)}")
    return d


def _pts(cluster) -> np.ndarray:
    pts = cluster.points if isinstance(cluster, Cluster) else np.asarray(cluster, dtype=float)
    if len(pts) == 0:
        raise InvalidArgument("cannot modify an empty cluster")
    return pts


def _wrap(cluster, pts):
    return cluster.with_points(pts) if isinstance(cluster, Cluster) else pts


def lengthen(cluster, d, w, kappa: float = KAPPA_LENGTHEN):
    """Stretch about the centroid along ``d`` by a factor ``1 + w * kappa``."""
    _check_weight(w)
    d = _unit(d)
    pts = _pts(cluster)
    c = pts.mean(axis=0)
    along = (pts - c) @ d
    return _wrap(cluster, pts + (w * kappa) * along[:, None] * d[None, :])


def shorten(cluster, d, w, kappa: float = KAPPA_SHORTEN):
    """Compress about the centroid along ``d`` by a factor ``1 - w * kappa``."""
    _check_weight(w)
    if not 0.0 <= kappa <= 1.0:
        raise InvalidArgument("shorten gain must lie in [0, 1]")
    d = _unit(d)
    pts = _pts(cluster)
    c = pts.mean(axis=0)
    along = (pts - c) @ d
    return _wrap(cluster, pts - (w * kappa) * along[:, None] * d[None, :])


def flatten(cluster, w):
    """Pull z toward the cluster's lowest z; x and y are untouched."""
    _check_weight(w)
    pts = _pts(cluster).copy()
    if w == 0.0:
        return _wrap(cluster, pts)
    z_min = pts[:, 2].min()
    pts[:, 2] = z_min + (1.0 - w) * (pts[:, 2] - z_min)
    return _wrap(cluster, pts)


def thin(cluster, d_xy, w, kappa: float = KAPPA_SHORTEN):
    """Compress horizontally, perpendicular to the horizontal direction ``d_xy``."""
    _check_weight(w)
    d = _unit(d_xy, horizontal=True)
    n = np.array([-d[1], d[0], 0.0])
    pts = _pts(cluster)
    c = pts.mean(axis=0)
    across = (pts - c) @ n
    return _wrap(cluster, pts - (w * kappa) * across[:, None] * n[None, :])


@dataclass(frozen=True)
class Modification:
    kind: str
    cluster_id: int
    direction: tuple
    weight: float

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidArgument(f"unknown modification {self.kind!r}")
        _check_weight(self.weight)
        _unit(self.direction, horizontal=(self.kind == "thin"))
        if self.cluster_id < 0:
            raise InvalidArgument("cluster id must be non-negative")

    def apply(self, cluster):
        d = np.asarray(self.direction, dtype=float)
        if self.kind == "lengthen":
            return lengthen(cluster, d, self.weight)
        if self.kind == "shorten":
            return shorten(cluster, d, self.weight)
        if self.kind == "thin":
            return thin(cluster, d, self.weight)
        return flatten(cluster, self.weight)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "cluster": int(self.cluster_id),
            "direction": [float(v) for v in self.direction],
            "weight": float(self.weight),
        }


@dataclass
class SubGoal:
    modification: Modification
    target_cluster: Cluster
    source_cluster: Cluster

    def goal_cloud(self, cloud: ClusteredCloud) -> ClusteredCloud:
        return cloud.replace(self.target_cluster)


# --------------------------------------------------------------------------- #
# text form
# --------------------------------------------------------------------------- #
def serialize_for_llm(cloud: ClusteredCloud, n: int = LLM_POINTS_PER_CLUSTER, seed: int = 0) -> str:
    """One ``cluster <id>: point at (x, y, z)`` line per point, in meters.

    Clusters are relabelled bottom to top and each is reduced to ``n``
    points (or kept whole if smaller).
    """
    ordered = order_clusters(cloud.clusters)
    lines = []
    for c in ordered.clusters:
        small = downsample(c, min(n, len(c)), seed=seed)
        lines.extend(f"cluster {c.id}: point at ({x:.3f}, {y:.3f}, {z:.3f})" for x, y, z in small.points)
    return "\n".join(lines)


# --------------------------------------------------------------------------- #
# backends
# --------------------------------------------------------------------------- #
def candidate_modifications(n_clusters: int, weights=WEIGHT_GRID):
    """Coarse search grid over cluster, function, direction and weight.

    Directions are the axes plus the two horizontal diagonals.
    """
    for cid in range(n_clusters):
        for w in weights:
            for d in HORIZONTAL + (AXES["z"],):
                yield Modification("lengthen", cid, tuple(d), w)
                yield Modification("shorten", cid, tuple(d), w)
            for d in HORIZONTAL:
                yield Modification("thin", cid, tuple(d), w)
            yield Modification("flatten", cid, tuple(DOWN), w)


class HeuristicBackend:
    """Pick the modification whose result is closest to a template shape.

    The residual is the symmetric Chamfer distance between the whole
    modified cloud and dense samples of the template surface. Returns no
    modification when none beats the unmodified cloud.

    With a ``realize`` callback, the ``top_k`` best-ranked modifications are
    re-scored by what executing them would actually produce:
    ``realize(cloud, modification)`` returns the predicted whole cloud after
    acting on that sub-goal, or ``None`` if it cannot be acted on.
    """

    name = "heuristic"

    def __init__(self, template_points: np.ndarray, weights=WEIGHT_GRID, realize=None, top_k: int = 8):
        self.template = np.asarray(template_points, dtype=float)
        self.weights = tuple(weights)
        self.realize = realize
        self.top_k = top_k
        self._tree = cKDTree(self.template)

    @classmethod
    def for_prompt(cls, prompt: str, n_samples: int = 2000, seed: int = 0, **kw) -> "HeuristicBackend":
        from .planner.templates import lookup

        rng = np.random.default_rng(seed)
        return cls(lookup(prompt).grid().sample_surface(n_samples, rng), **kw)

    def residual(self, points: np.ndarray) -> float:
        a = self._tree.query(points)[0]
        b = cKDTree(points).query(self.template)[0]
        return float(np.mean(a**2) + np.mean(b**2))

    def score_all(self, cloud: ClusteredCloud):
        """Yield ``(modification, residual)`` for every candidate."""
        all_pts = cloud.points
        n_total = len(all_pts)
        to_tmpl = self._tree.query(all_pts)[0] ** 2
        offsets = np.cumsum([0] + [len(c) for c in cloud.clusters])
        by_cluster = {}
        for mod in candidate_modifications(len(cloud), self.weights):
            by_cluster.setdefault(mod.cluster_id, []).append(mod)
        for cid, mods in by_cluster.items():
            lo, hi = offsets[cid], offsets[cid + 1]
            others = np.concatenate([all_pts[:lo], all_pts[hi:]])
            rest_sum = to_tmpl[:lo].sum() + to_tmpl[hi:].sum()
            tmpl_to_rest = cKDTree(others).query(self.template)[0] ** 2 if len(others) else None
            for mod in mods:
                moved = mod.apply(cloud[cid].points)
                a = (rest_sum + np.sum(self._tree.query(moved)[0] ** 2)) / n_total
                tmpl_to_mod = cKDTree(moved).query(self.template)[0] ** 2
                if tmpl_to_rest is not None:
                    tmpl_to_mod = np.minimum(tmpl_to_mod, tmpl_to_rest)
                yield mod, float(a + tmpl_to_mod.mean())

    def propose(self, cloud: ClusteredCloud, prompt: str):
        current = self.residual(cloud.points)
        ranked = sorted(
            ((score, n, mod) for n, (mod, score) in enumerate(self.score_all(cloud)) if score < current),
            key=lambda r: (r[0], r[1]),
        )
        info = {"residual_before": current}
        if self.realize is None:
            best = ranked[0][2] if ranked else None
            info["residual_after"] = ranked[0][0] if ranked else current
            return best, info
        best, best_score = None, current
        tried = []
        for score, _, mod in ranked[: self.top_k]:
            outcome = self.realize(cloud, mod)
            realized = None if outcome is None else self.residual(outcome)
            tried.append({"modification": mod.to_dict(), "residual": score, "realized": realized})
            if realized is not None and realized < best_score:
                best, best_score = mod, realized
        info.update(residual_after=best_score, lookahead=tried)
        return best, info


def parse_modification(obj, n_clusters: int) -> Modification:
    """Validate a decoded LLM reply; raises ValueError to trigger a retry."""
    if not isinstance(obj, dict):
        raise ValueError("reply must be a JSON object")
    kind = obj["kind"]
    if kind not in KINDS:
        raise ValueError(f"unknown kind {kind!r}")
    cid = obj["cluster"]
    if isinstance(cid, bool) or not isinstance(cid, int) or not 0 <= cid < n_clusters:
        raise ValueError(f"cluster must be an integer in [0, {n_clusters - 1}], got {cid!r}")
    w = float(obj["weight"])
    if not 0.0 <= w <= 1.0:
        raise ValueError(f"weight must lie in [0, 1], got {w}")
    if kind == "flatten":
        d = DOWN
    else:
        d = np.asarray(obj["direction"], dtype=float).ravel()
        if d.shape == (2,):
            d = np.array([d[0], d[1], 0.0])
        if d.shape != (3,) or not np.all(np.isfinite(d)):
            raise ValueError("direction must be three numbers")
        if kind == "thin":
            d = np.array([d[0], d[1], 0.0])
        norm = np.linalg.norm(d)
        if norm == 0.0:
            raise ValueError("direction must be non-zero" + (" in x, y" if kind == "thin" else ""))
        d = d / norm
    return Modification(kind, cid, tuple(float(v) for v in d), w)


class LLMBackend:
    name = "llm"

    def __init__(self, config: LLMConfig, transport=None, client: Optional[ChatClient] = None, seed: int = 0):
        self.config = config
        self.client = client or ChatClient(config, transport)
        self.template = load_prompt("subgoal_v1.txt")
        self.seed = seed

    def propose(self, cloud: ClusteredCloud, prompt: str):
        text = fill(self.template, PROMPT=prompt, POINTS=serialize_for_llm(cloud, seed=self.seed))
        messages = [{"role": "user", "content": text}]
        reply = ask_json(self.client, messages, lambda o: parse_modification(o, len(cloud)), self.config.retries)
        info = {"raw": reply.raw, "retries": reply.retries, "parsed": reply.ok}
        if not reply.ok:
            info["errors"] = reply.errors
        return reply.value, info


def propose_subgoal(cloud: ClusteredCloud, prompt: str, backend, audit: Optional[list] = None) -> Optional[SubGoal]:
    """Ask ``backend`` for one modification and apply it.

    Returns ``None`` when the backend gives up or finds nothing to improve;
    the refinement loop then skips the round.
    """
    ordered = order_clusters(cloud.clusters)
    mod, info = backend.propose(ordered, prompt)
    record = {"backend": getattr(backend, "name", type(backend).__name__), **info}
    goal = None
    if mod is not None:
        source = ordered[mod.cluster_id]
        goal = SubGoal(mod, mod.apply(source), source)
        record["modification"] = mod.to_dict()
    else:
        record["modification"] = None
    if audit is not None:
        audit.append(record)
    return goal
