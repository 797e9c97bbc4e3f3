import numpy as np
import pytest
import torch

from claysculpt.errors import InvalidArgument, InvalidState
from claysculpt.metrics import mix_distance
from claysculpt.model.baselines import LatentMemory, baseline_nn_greedy, baseline_random, baseline_vinn
from claysculpt.model.checkpoint import load_checkpoint, save_checkpoint
from claysculpt.model.data import (
    ActionTuple,
    generate_synthetic_pairs,
    load_dataset,
    random_shape_cells,
    save_dataset,
    seed_clouds,
    simulate_tuples,
    split,
)
from claysculpt.model.networks import ActionModel, PointNetEncoder
from claysculpt.model.train import Hyper, encoder_bytes, predict_action, pretrain_encoder, train_action_head
from claysculpt.planner import OccupancyGrid
from claysculpt.sim import ACTION_BOUNDS, GraspAction


@pytest.fixture(scope="module")
def tuples():
    return simulate_tuples(24, seed=3, n_points=64)


@pytest.fixture(scope="module")
def pairs():
    return generate_synthetic_pairs(seed_clouds(3, seed=1), 40, seed=2, n_points=64)


def test_random_shapes_are_supported(rng):
    for _ in range(20):
        cells = random_shape_cells(rng)
        assert OccupancyGrid.from_cells(cells).unsupported() == []


def test_synthetic_pairs_carry_mixed_distance(pairs):
    assert len(pairs) == 40
    for p in pairs[:5]:
        assert p.state.shape == p.next.shape == (64, 3)
        assert p.target == pytest.approx(mix_distance(p.state, p.next))


def test_simulated_tuples_are_normalized_and_deterministic(tuples):
    assert len(tuples) == 24
    acts = np.stack([t.action for t in tuples])
    assert np.all(np.abs(acts) <= 1.0 + 1e-12)
    again = simulate_tuples(3, seed=3, n_points=64)
    for a, b in zip(tuples[:3], again):
        assert np.array_equal(a.state, b.state) and np.array_equal(a.action, b.action)
    # most grasps actually move the clay they are paired with
    moved = sum(not np.allclose(t.state, t.next) for t in tuples)
    assert moved >= len(tuples) // 2


def test_split_is_disjoint_and_seeded(tuples):
    a = split(tuples, (10, 5, 5), seed=0)
    b = split(tuples, (10, 5, 5), seed=0)
    assert [len(x) for x in a] == [10, 5, 5]
    ids = [id(t) for part in a for t in part]
    assert len(set(ids)) == 20
    assert [id(t) for t in a[0]] == [id(t) for t in b[0]]


def test_dataset_files_round_trip(tmp_path, tuples, pairs):
    save_dataset(tmp_path / "ds", tuples[:3], pairs[:2])
    t, p = load_dataset(tmp_path / "ds")
    assert len(t) == 3 and len(p) == 2
    assert np.allclose(t[0].state, tuples[0].state, atol=1e-9)
    assert np.allclose(t[1].action, tuples[1].action)
    assert p[1].target == pytest.approx(pairs[1].target)


def test_pretraining_lowers_held_out_loss(pairs):
    result = pretrain_encoder(pairs, Hyper(epochs=4, seed=0, batch_size=8))
    assert len(result.history) == 4
    assert result.holdout_after < result.holdout_before
    with pytest.raises(InvalidArgument):
        pretrain_encoder([])


def test_frozen_training_leaves_encoder_bits_alone(tuples):
    torch.manual_seed(0)
    enc = PointNetEncoder()
    before = encoder_bytes(enc)
    trained = train_action_head(tuples, enc, "frozen", Hyper(epochs=3, batch_size=8))
    assert encoder_bytes(enc) == before
    assert trained.history[-1]["train_mse"] < trained.history[0]["train_mse"] * 1.5
    assert all(p.requires_grad for p in enc.parameters())


def test_unfrozen_training_updates_a_copy(tuples):
    torch.manual_seed(0)
    enc = PointNetEncoder()
    before = encoder_bytes(enc)
    trained = train_action_head(tuples, enc, "unfrozen", Hyper(epochs=2, batch_size=8))
    assert encoder_bytes(enc) == before
    assert encoder_bytes(trained.model.encoder) != before


def test_training_mode_checks(tuples):
    enc = PointNetEncoder()
    with pytest.raises(InvalidArgument):
        train_action_head(tuples, enc, "end-to-end")
    with pytest.raises(InvalidArgument):
        train_action_head(tuples, None, "frozen")
    with pytest.raises(InvalidArgument):
        train_action_head(tuples, enc, "sideways")
    bad = [ActionTuple(tuples[0].state, tuples[0].next, np.full(5, 2.0))]
    with pytest.raises(InvalidArgument):
        train_action_head(bad, enc, "frozen")
    trained = train_action_head(tuples, None, "end-to-end", Hyper(epochs=1, batch_size=8))
    action = trained.predict(tuples[0].state, tuples[0].next)
    assert ACTION_BOUNDS.contains(action.as_array())


def test_predict_action_rejects_empty_clusters():
    with pytest.raises(InvalidArgument):
        predict_action(ActionModel(), np.zeros((0, 3)), np.zeros((4, 3)))


def test_nearest_neighbour_recovers_training_actions(tuples):
    torch.manual_seed(0)
    enc = PointNetEncoder()
    memory = LatentMemory(enc, tuples)
    for t in tuples[:5]:
        assert np.array_equal(memory.nn_greedy(t.state, t.next), t.action)
    greedy = baseline_nn_greedy(tuples, enc, tuples[2].state, tuples[2].next)
    assert np.allclose(greedy.normalized(), tuples[2].action)


def test_vinn_is_a_convex_combination(tuples):
    enc = PointNetEncoder()
    memory = LatentMemory(enc, tuples)
    dist = memory.distances(tuples[0].state, tuples[0].next)
    idx, w = memory.vinn_weights(dist, 5)
    assert len(idx) == 5 and w.sum() == pytest.approx(1.0) and np.all(w > 0)
    assert np.all(np.diff(w) <= 1e-12)
    action = baseline_vinn(tuples, enc, tuples[0].state, tuples[0].next)
    assert isinstance(action, GraspAction)


def test_baselines_need_training_data():
    with pytest.raises(InvalidState):
        LatentMemory(PointNetEncoder(), [])
    with pytest.raises(InvalidState):
        baseline_nn_greedy([], PointNetEncoder(), np.zeros((4, 3)), np.zeros((4, 3)))
    a = baseline_random(seed=4)
    assert ACTION_BOUNDS.contains(a.as_array())
    assert a == baseline_random(seed=4)


def test_checkpoint_round_trip(tmp_path, tuples):
    torch.manual_seed(0)
    model = ActionModel()
    save_checkpoint(tmp_path / "m.json", "action-model", model, {"mode": "frozen"})
    back, header = load_checkpoint(tmp_path / "m.json")
    assert header["kind"] == "action-model" and header["meta"]["mode"] == "frozen"
    s = torch.as_tensor(np.stack([tuples[0].state]), dtype=torch.float32)
    g = torch.as_tensor(np.stack([tuples[0].next]), dtype=torch.float32)
    with torch.no_grad():
        assert torch.equal(model(s, g), back(s, g))
    with pytest.raises(FileNotFoundError):
        load_checkpoint(tmp_path / "missing.json")
    (tmp_path / "bad.json").write_text('{"format": "other"}')
    with pytest.raises(InvalidArgument):
        load_checkpoint(tmp_path / "bad.json")
