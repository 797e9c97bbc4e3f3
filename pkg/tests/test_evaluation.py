import json
import math

import numpy as np
import pytest
import torch

from claysculpt.evaluation import COLUMNS, ROWS, EvalSetup, Table, rollout_distances, score, table_one
from claysculpt.model.data import simulate_tuples, split
from claysculpt.model.networks import PointNetEncoder


@pytest.fixture(scope="module")
def small():
    tuples = simulate_tuples(16, seed=5, n_points=48)
    return split(tuples, (10, 3, 3), seed=0)


def test_rollout_of_the_true_action_reproduces_the_next_state(small):
    train, _, _ = small
    # tuples pair one cluster with the whole-body grasp, so replaying the
    # grasp on the isolated cluster is close to, not equal to, the next state
    t = train[0]
    cd, emd, hd = rollout_distances(t.state, t.next, t.action)
    assert cd >= 0 and emd >= 0 and hd >= 0
    assert emd <= float(np.linalg.norm(t.state - t.next, axis=1).mean()) + 0.01


def test_score_of_a_perfect_predictor_has_zero_mse(small):
    train, val, test = small
    lookup = {id(t.state): t.action for t in val + test}

    def oracle(states, goals):
        return np.stack([lookup[id(s)] for s in states])

    row = score(oracle, val, test)
    assert row["val_mse"] == (0.0, 0.0) and row["test_mse"] == (0.0, 0.0)
    assert set(row) == set(COLUMNS)


def test_table_one_runs_every_method(small, tmp_path):
    train, val, test = small
    torch.manual_seed(0)
    setup = EvalSetup(head_epochs=2, finetune_epochs=1)
    seen = []
    table = table_one(train, val, test, PointNetEncoder(), setup, progress=lambda n, r: seen.append(n))
    assert list(table.rows) == list(ROWS) == seen
    for row in table.rows.values():
        assert all(len(row[c]) == 2 and not math.isnan(row[c][0]) for c in COLUMNS)
    data = json.loads(table.to_json())
    assert data["methods"] == list(ROWS) and data["meta"]["n_train"] == 10
    lines = table.write_csv(tmp_path / "t.csv").read_text().splitlines()
    assert len(lines) == 1 + len(ROWS) and lines[0].split(",")[1] == "val_mse_mean"
    assert "DM end-to-end" in table.format()
    with pytest.raises(ValueError):
        table_one(train, val, test, PointNetEncoder(), setup, rows=("Oracle",))


def test_empty_table_serializes():
    assert json.loads(Table().to_json())["rows"] == {}
