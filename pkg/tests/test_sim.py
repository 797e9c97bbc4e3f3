import math

import numpy as np
import pytest

from claysculpt.errors import InvalidArgument, InvalidState
from claysculpt.sim import (
    ACTION_BOUNDS,
    ChunkPlacement,
    ClayBody,
    EpisodeLog,
    GraspAction,
    apply_grasp,
    build_body,
    bulge_scale,
    cell_center,
    finger_band,
    observe,
    place_chunk,
    wrap_rotation,
)


def test_cell_center_and_placement_grid():
    assert np.allclose(cell_center((0, 0, 0)), [0.0075, 0.0075, 0.0075])
    assert np.allclose(cell_center((4, 2, 1)), [0.0675, 0.0375, 0.0225])


def test_place_chunk_rests_on_floor_then_on_clay():
    body = place_chunk(ClayBody(), ChunkPlacement.at((2, 2, 0)), seed=0)
    assert len(body) == 200
    assert body.particles[:, 2].min() >= 0.0
    assert np.linalg.norm(body.particles.mean(axis=0)[:2] - [0.0375, 0.0375]) < 0.002

    stacked = place_chunk(body, ChunkPlacement.at((2, 2, 1)), seed=1)
    top = stacked.particles[200:]
    # the new ball sits on the first one, within the merge allowance
    assert top[:, 2].mean() > body.particles[:, 2].mean() + 0.01
    assert top[:, 2].min() < body.particles[:, 2].max()


def test_place_chunk_rejects_bad_cells():
    body = place_chunk(ClayBody(), ChunkPlacement.at((0, 0, 0)))
    with pytest.raises(InvalidArgument):
        place_chunk(body, ChunkPlacement.at((0, 0, 0)))
    with pytest.raises(InvalidArgument):
        place_chunk(body, ChunkPlacement.at((5, 0, 0)))


def test_place_chunk_is_deterministic():
    a = build_body([ChunkPlacement.at((1, 1, 0)), ChunkPlacement.at((1, 1, 1))], seed=3)
    b = build_body([ChunkPlacement.at((1, 1, 0)), ChunkPlacement.at((1, 1, 1))], seed=3)
    assert np.array_equal(a.particles, b.particles)


def test_action_normalization_round_trip(rng):
    for _ in range(50):
        vec = rng.uniform(-1, 1, size=5)
        action = GraspAction.from_normalized(vec)
        assert ACTION_BOUNDS.contains(action.as_array())
        assert np.allclose(action.normalized(), vec)


def test_rotation_wraps_into_half_open_interval():
    assert wrap_rotation(math.pi / 2) == pytest.approx(-math.pi / 2)
    assert wrap_rotation(math.pi) == pytest.approx(0.0)
    clipped = GraspAction(0.1, -0.1, 0.01, 3.0, 1.0).clipped()
    assert ACTION_BOUNDS.contains(clipped.as_array())


def test_bulge_scale_conserves_the_configured_volume_share():
    assert bulge_scale(0.005, 0.01) == 1.0
    # half-width 2a: removed width fraction 1/2, half of it reappears
    k = bulge_scale(0.02, 0.01, bulge=0.5)
    assert k**2 == pytest.approx(1.5)
    assert bulge_scale(0.02, 0.01, bulge=0.0) == 1.0


def _ball():
    return place_chunk(ClayBody(), ChunkPlacement.at((2, 2, 0)), seed=4)


def test_grasp_squeezes_to_the_aperture():
    body = _ball()
    action = GraspAction(0.0375, 0.0375, 0.0075, 0.0, 0.008)
    after = apply_grasp(body, action)
    s, t, dz, band = finger_band(body.particles, action)
    moved = after.particles[band]
    assert np.abs(moved[:, 0] - 0.0375).max() <= 0.004 + 1e-12
    # squeezed clay grows along the finger plane
    assert np.ptp(moved[:, 1]) > np.ptp(body.particles[band, 1])
    # particles outside the band are untouched
    assert np.array_equal(after.particles[~band], body.particles[~band])
    assert after.particles[:, 2].min() >= 0.0


def test_grasp_wider_than_clay_is_a_no_op():
    body = _ball()
    after = apply_grasp(body, GraspAction(0.0375, 0.0375, 0.0075, 0.3, 0.04))
    assert np.array_equal(after.particles, body.particles)
    empty = apply_grasp(ClayBody(), GraspAction(0, 0, 0, 0, 0.01))
    assert len(empty) == 0


def test_rotated_grasp_squeezes_along_its_own_axis():
    body = _ball()
    action = GraspAction(0.0375, 0.0375, 0.0075, math.pi / 4, 0.006)
    after = apply_grasp(body, action)
    s, _, _, band = finger_band(after.particles, action)
    assert np.abs(s[band]).max() <= 0.003 + 1e-9 or not band.any()


def test_observe_adds_seeded_noise():
    body = _ball()
    assert np.array_equal(observe(body), body.particles)
    a = observe(body, 0.001, seed=1)
    assert np.array_equal(a, observe(body, 0.001, seed=1))
    assert 0.0005 < np.std(a - body.particles) < 0.002
    with pytest.raises(InvalidState):
        observe(ClayBody())


def test_episode_log_records_steps(tmp_path):
    log = EpisodeLog(tmp_path / "episode.jsonl")
    log.record("place", {"cell": [0, 0, 0]}, None, "step_0000.ply")
    log.record("grasp", {"action": [0, 0, 0, 0, 0.01]}, "step_0000.ply", "step_0001.ply")
    lines = (tmp_path / "episode.jsonl").read_text().splitlines()
    assert len(lines) == 2 and '"step": 1' in lines[1] and '"pre_cloud_file": null' in lines[0]
