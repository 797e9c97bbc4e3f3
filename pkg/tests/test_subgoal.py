import math

import numpy as np
import pytest

from claysculpt.errors import InvalidArgument
from claysculpt.pointcloud import Cluster, cluster
from claysculpt.subgoal import (
    HeuristicBackend,
    Modification,
    candidate_modifications,
    flatten,
    lengthen,
    parse_modification,
    propose_subgoal,
    serialize_for_llm,
    shorten,
    thin,
)


@pytest.fixture
def blob(rng):
    return rng.normal(scale=0.005, size=(120, 3)) + [0.03, 0.03, 0.01]


def test_lengthen_scales_along_direction_about_centroid(blob):
    out = lengthen(blob, (1, 0, 0), 1.0)
    c = blob.mean(axis=0)
    assert np.allclose(out[:, 0] - c[0], 1.5 * (blob[:, 0] - c[0]))
    assert np.array_equal(out[:, 1:], blob[:, 1:])
    assert np.allclose(out.mean(axis=0), c)


def test_shorten_and_thin_compress(blob):
    d = np.array([math.sqrt(0.5), math.sqrt(0.5), 0.0])
    short = shorten(blob, d, 1.0)
    c = blob.mean(axis=0)
    assert np.allclose((short - c) @ d, 0.5 * ((blob - c) @ d))
    n = np.array([-d[1], d[0], 0.0])
    thinned = thin(blob, d, 1.0)
    assert np.allclose((thinned - c) @ n, 0.5 * ((blob - c) @ n))
    assert np.allclose((thinned - c) @ d, (blob - c) @ d)


def test_flatten_collapses_onto_lowest_point(blob):
    flat = flatten(blob, 1.0)
    assert np.all(flat[:, 2] == blob[:, 2].min())


def test_modifications_validate_arguments(blob):
    with pytest.raises(InvalidArgument):
        lengthen(blob, (1, 0, 0), 1.5)
    with pytest.raises(InvalidArgument):
        lengthen(blob, (2, 0, 0), 0.5)
    with pytest.raises(InvalidArgument):
        thin(blob, (0, 0, 1), 0.5)
    with pytest.raises(InvalidArgument):
        flatten(np.zeros((0, 3)), 0.5)
    with pytest.raises(InvalidArgument):
        Modification("twist", 0, (1, 0, 0), 0.5)


def test_modification_keeps_cluster_identity(blob):
    c = Cluster(3, blob, np.arange(len(blob)))
    out = Modification("shorten", 3, (0.0, 0.0, 1.0), 0.5).apply(c)
    assert out.id == 3 and np.array_equal(out.indices, c.indices)


def test_parse_modification_normalizes_and_rejects():
    mod = parse_modification({"kind": "lengthen", "cluster": 2, "direction": [2, 0, 0], "weight": 0.4}, 5)
    assert mod.direction == (1.0, 0.0, 0.0)
    mod = parse_modification({"kind": "thin", "cluster": 0, "direction": [0, 3], "weight": 1}, 5)
    assert mod.direction == (0.0, 1.0, 0.0)
    mod = parse_modification({"kind": "flatten", "cluster": 0, "weight": 0.2}, 5)
    assert mod.direction == (0.0, 0.0, -1.0)
    for bad in (
        [],
        {"kind": "bend", "cluster": 0, "direction": [1, 0, 0], "weight": 0.5},
        {"kind": "lengthen", "cluster": 7, "direction": [1, 0, 0], "weight": 0.5},
        {"kind": "lengthen", "cluster": True, "direction": [1, 0, 0], "weight": 0.5},
        {"kind": "lengthen", "cluster": 0, "direction": [0, 0, 0], "weight": 0.5},
        {"kind": "lengthen", "cluster": 0, "direction": [1, 0, 0], "weight": 2},
        {"kind": "lengthen", "cluster": 0, "weight": 0.5},
    ):
        with pytest.raises((ValueError, KeyError, TypeError)):
            parse_modification(bad, 5)


def test_serialization_lists_points_per_cluster(rng):
    cloud = cluster(rng.uniform(0, 0.05, size=(400, 3)), k=4)
    text = serialize_for_llm(cloud, n=10)
    lines = text.splitlines()
    assert len(lines) == 40
    assert lines[0].startswith("cluster 0: point at (")


def test_candidates_cover_every_cluster_and_kind():
    mods = list(candidate_modifications(3, weights=(0.5,)))
    assert {m.cluster_id for m in mods} == {0, 1, 2}
    assert {m.kind for m in mods} == {"lengthen", "shorten", "thin", "flatten"}


def _line_cloud(rng):
    # a compact blob whose template is a long bar along x
    pts = rng.normal(scale=(0.006, 0.006, 0.004), size=(600, 3)) + [0.0375, 0.0075, 0.008]
    return cluster(pts, k=4, seed=0)


def test_heuristic_scores_match_full_residual(rng):
    cloud = _line_cloud(rng)
    backend = HeuristicBackend.for_prompt("line", n_samples=500)
    for mod, score in list(backend.score_all(cloud))[::37]:
        goal = cloud.replace(mod.apply(cloud[mod.cluster_id]))
        assert score == pytest.approx(backend.residual(goal.points), rel=1e-9)


def test_heuristic_proposes_an_improving_modification(rng):
    cloud = _line_cloud(rng)
    backend = HeuristicBackend.for_prompt("line", n_samples=500)
    audit = []
    goal = propose_subgoal(cloud, "line", backend, audit=audit)
    assert goal is not None
    assert audit[0]["residual_after"] < audit[0]["residual_before"]


def test_heuristic_says_done_on_the_template_itself(rng):
    backend = HeuristicBackend.for_prompt("line", n_samples=500)
    cloud = cluster(backend.template.copy(), k=4)
    mod, info = backend.propose(cloud, "line")
    # nothing beats a cloud that already is the template samples
    assert mod is None and info["residual_before"] == 0.0


def test_lookahead_uses_realized_outcomes(rng):
    cloud = _line_cloud(rng)
    seen = []

    def never(c, mod):
        seen.append(mod)
        return None

    backend = HeuristicBackend.for_prompt("line", n_samples=500, realize=never, top_k=3)
    mod, info = backend.propose(cloud, "line")
    assert mod is None and len(seen) == 3 and len(info["lookahead"]) == 3

    def exact(c, mod):
        return c.replace(mod.apply(c[mod.cluster_id])).points

    backend.realize = exact
    mod, info = backend.propose(cloud, "line")
    assert mod is not None and info["residual_after"] < info["residual_before"]
