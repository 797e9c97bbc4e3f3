"""
Particle stand-in for clay: chunks are dropped into grid cells and
parallel-jaw grasps squeeze particles kinematically.

No dynamics are simulated. A grasp projects the particles caught between
the closing fingers onto the finger planes and widens the squeezed slab
within the finger plane so that part of the lost volume is kept, which
gives the indentation and extrusion the action model must learn.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidArgument, InvalidState

CELL_SIZE = 0.015
GRID_DIMS = (5, 5, 5)
GRID_ORIGIN = (0.0, 0.0, 0.0)
FLOOR_Z = 0.0

N_CHUNK = 200
R_CHUNK = 0.0075
DELTA_MERGE = 0.001

FINGER_WIDTH = 0.02
FINGER_HEIGHT = 0.02
FINGER_REACH = 0.04  # half the open stroke: fingers start at +-4 cm
BULGE = 0.5


@dataclass(frozen=True)
class SimParams:
    n_chunk: int = N_CHUNK
    r_chunk: float = R_CHUNK
    delta_merge: float = DELTA_MERGE
    finger_width: float = FINGER_WIDTH
    finger_height: float = FINGER_HEIGHT
    finger_reach: float = FINGER_REACH
    bulge: float = BULGE
    cell_size: float = CELL_SIZE
    grid_dims: tuple = GRID_DIMS
    origin: tuple = GRID_ORIGIN
    floor_z: float = FLOOR_Z


@dataclass(frozen=True)
class ActionBounds:
    """Per-dimension bounds of the 5D grasp (x, y, z, rot_z, aperture)."""

    lo: tuple = (0.0, 0.0, 0.0, -math.pi / 2, 0.004)
    hi: tuple = (0.075, 0.075, 0.06, math.pi / 2, 0.04)

    @property
    def lo_arr(self):
        return np.asarray(self.lo, dtype=float)

    @property
    def hi_arr(self):
        return np.asarray(self.hi, dtype=float)

    def normalize(self, vec) -> np.ndarray:
        v = np.asarray(vec, dtype=float)
        return 2.0 * (v - self.lo_arr) / (self.hi_arr - self.lo_arr) - 1.0

    def denormalize(self, vec) -> np.ndarray:
        v = np.asarray(vec, dtype=float)
        return self.lo_arr + (v + 1.0) * 0.5 * (self.hi_arr - self.lo_arr)

    def contains(self, vec) -> bool:
        v = np.asarray(vec, dtype=float)
        return bool(np.all(v >= self.lo_arr) and np.all(v <= self.hi_arr) and v[3] < self.hi[3])


ACTION_BOUNDS = ActionBounds()


def wrap_rotation(rot: float) -> float:
    """Map an angle onto [-pi/2, pi/2); a parallel jaw is symmetric under pi."""
    return float((rot + math.pi / 2) % math.pi - math.pi / 2)


@dataclass(frozen=True)
class GraspAction:
    x: float
    y: float
    z: float
    rot_z: float
    aperture: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z, self.rot_z, self.aperture], dtype=float)

    @classmethod
    def from_array(cls, vec) -> "GraspAction":
        v = [float(a) for a in np.asarray(vec, dtype=float).ravel()]
        return cls(*v)

    def normalized(self, bounds: ActionBounds = ACTION_BOUNDS) -> np.ndarray:
        return bounds.normalize(self.as_array())

    @classmethod
    def from_normalized(cls, vec, bounds: ActionBounds = ACTION_BOUNDS) -> "GraspAction":
        v = np.clip(np.asarray(vec, dtype=float), -1.0, 1.0)
        a = bounds.denormalize(v)
        # the rotation interval is half-open
        if a[3] >= bounds.hi[3]:
            a[3] = bounds.lo[3]
        return cls.from_array(a)

    def clipped(self, bounds: ActionBounds = ACTION_BOUNDS) -> "GraspAction":
        a = self.as_array()
        a[3] = wrap_rotation(a[3])
        a = np.clip(a, bounds.lo_arr, bounds.hi_arr)
        if a[3] >= bounds.hi[3]:
            a[3] = bounds.lo[3]
        return GraspAction.from_array(a)


@dataclass(frozen=True)
class ChunkPlacement:
    cell: tuple
    world_center: tuple

    @classmethod
    def at(cls, cell, params: SimParams = SimParams()) -> "ChunkPlacement":
        return cls(tuple(int(c) for c in cell), tuple(cell_center(cell, params)))


def cell_center(cell, params: SimParams = SimParams()) -> np.ndarray:
    cell = np.asarray(cell, dtype=float)
    return np.asarray(params.origin) + (cell + 0.5) * params.cell_size


@dataclass
class ClayBody:
    particles: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    cells: tuple = ()
    params: SimParams = SimParams()

    @property
    def particle_volume(self) -> float:
        p = self.params
        return (4.0 / 3.0) * math.pi * p.r_chunk**3 / p.n_chunk

    def __len__(self):
        return len(self.particles)


def _sample_ball(rng: np.random.Generator, n: int, radius: float) -> np.ndarray:
    direction = rng.normal(size=(n, 3))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    r = radius * rng.random(n) ** (1.0 / 3.0)
    return direction * r[:, None]


def resting_height(existing: np.ndarray, center_xy, params: SimParams = SimParams()) -> float:
    """Center height of a ball dropped at ``center_xy`` onto floor and clay."""
    r = params.r_chunk
    z = params.floor_z + r
    if len(existing):
        h2 = np.sum((existing[:, :2] - np.asarray(center_xy)[None, :]) ** 2, axis=1)
        under = h2 < r * r
        if np.any(under):
            contact = existing[under, 2] + np.sqrt(r * r - h2[under])
            z = max(z, float(np.max(contact)) - params.delta_merge)
    return z


def place_chunk(body: ClayBody, placement: ChunkPlacement, seed: int = 0) -> ClayBody:
    """Drop one clay ball into ``placement.cell``; returns a new body."""
    p = body.params
    cell = tuple(int(c) for c in placement.cell)
    if any(c < 0 or c >= d for c, d in zip(cell, p.grid_dims)):
        raise InvalidArgument(f"cell {cell} outside grid {p.grid_dims}")
    if cell in body.cells:
        raise InvalidArgument(f"cell {cell} already occupied")
    rng = np.random.default_rng(seed)
    center = np.asarray(placement.world_center, dtype=float).copy()
    center[2] = resting_height(body.particles, center[:2], p)
    ball = center + _sample_ball(rng, p.n_chunk, p.r_chunk)
    ball[:, 2] = np.maximum(ball[:, 2], p.floor_z)
    return ClayBody(np.concatenate([body.particles, ball], axis=0), body.cells + (cell,), p)


def grasp_frame(action: GraspAction):
    u = np.array([math.cos(action.rot_z), math.sin(action.rot_z), 0.0])
    v = np.array([-math.sin(action.rot_z), math.cos(action.rot_z), 0.0])
    return u, v


def finger_band(points: np.ndarray, action: GraspAction, params: SimParams = SimParams()):
    """Return (s, t, dz, in_band) in the grasp frame for every point.

    ``s`` runs along the closing direction, ``t`` along the finger width.
    The band is the volume the fingers sweep while closing from full reach.
    """
    u, v = grasp_frame(action)
    rel = points - np.array([action.x, action.y, action.z])
    s = rel @ u
    t = rel @ v
    dz = rel[:, 2]
    band = (
        (np.abs(t) <= params.finger_width / 2)
        & (np.abs(dz) <= params.finger_height / 2)
        & (np.abs(s) <= params.finger_reach)
    )
    return s, t, dz, band


def bulge_scale(half_width: float, half_aperture: float, bulge: float = BULGE) -> float:
    """Linear growth of the finger-plane cross-section after a squeeze.

    Closing a slab of half-width ``half_width`` to ``half_aperture`` removes
    a fraction of its width; a fraction ``bulge`` of that volume reappears
    as extra cross-section, so the area grows by
    ``1 + bulge * (half_width / half_aperture - 1)``.
    """
    if half_width <= half_aperture:
        return 1.0
    return math.sqrt(1.0 + bulge * (half_width / half_aperture - 1.0))


def apply_grasp(body: ClayBody, action: GraspAction) -> ClayBody:
    """Squeeze the clay between the fingers; returns a new body.

    Band particles beyond ``aperture / 2`` are projected onto the finger
    planes, then every band particle is pushed radially outward within the
    finger plane (about the grasp axis) by the ``bulge_scale`` factor.
    """
    p = body.params
    pts = body.particles.copy()
    if len(pts) == 0:
        return ClayBody(pts, body.cells, p)
    half = action.aperture / 2.0
    s, t, dz, band = finger_band(pts, action, p)
    squeezed = band & (np.abs(s) > half)
    if not np.any(squeezed):
        return ClayBody(pts, body.cells, p)
    u, v = grasp_frame(action)
    sq = np.flatnonzero(squeezed)
    pts[sq] -= ((s[sq] - np.sign(s[sq]) * half)[:, None]) * u[None, :]

    idx = np.flatnonzero(band)
    grow = bulge_scale(float(np.abs(s[idx]).max()), half, p.bulge) - 1.0
    pts[idx] += (grow * t[idx])[:, None] * v[None, :]
    pts[idx, 2] += grow * dz[idx]
    pts[:, 2] = np.maximum(pts[:, 2], p.floor_z)
    return ClayBody(pts, body.cells, p)


def observe(body: ClayBody, noise_sigma: float = 0.0, seed: int = 0) -> np.ndarray:
    if len(body.particles) == 0:
        raise InvalidState("cannot observe an empty clay body")
    if noise_sigma == 0.0:
        return body.particles.copy()
    rng = np.random.default_rng(seed)
    return body.particles + rng.normal(scale=noise_sigma, size=body.particles.shape)


class EpisodeLog:
    """JSON-lines record of every placement and grasp, clouds saved as PLY."""

    def __init__(self, path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text("")
        self.step = 0

    def record(self, kind: str, params: dict, pre_cloud_file, post_cloud_file) -> dict:
        rec = {
            "step": self.step,
            "kind": kind,
            "params": params,
            "pre_cloud_file": None if pre_cloud_file is None else str(pre_cloud_file),
            "post_cloud_file": str(post_cloud_file),
        }
        with self.path.open("a") as fh:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
        self.step += 1
        return rec


def build_body(placements, seed: int = 0, params: SimParams = SimParams()) -> ClayBody:
    """Place every chunk of a plan in order, one seeded draw per chunk."""
    body = ClayBody(params=params)
    for n, placement in enumerate(placements):
        if not isinstance(placement, ChunkPlacement):
            placement = ChunkPlacement.at(placement, params)
        body = place_chunk(body, placement, seed=int(np.random.SeedSequence([seed, n]).generate_state(1)[0]))
    return body
