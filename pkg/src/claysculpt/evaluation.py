"""
Action-model comparison on simulated grasp data: retrieval baselines, the
three training regimes and a random policy, scored by normalized action MSE
and by rolling the predicted grasp out in the simulator.
"""

from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .metrics import chamfer, emd, hausdorff
from .rng import child_seed, substream
from .sim import ClayBody, GraspAction, apply_grasp

logger = logging.getLogger(__name__)

ROWS = ("VINN", "NN-greedy", "DM frozen", "DM unfrozen", "DM end-to-end", "Random")
COLUMNS = ("val_mse", "test_mse", "cd", "emd", "hd")


@dataclass
class EvalSetup:
    n_train: int = 200
    n_val: int = 50
    n_test: int = 50
    n_pairs: int = 4000
    n_seed_shapes: int = 24
    pretrain_epochs: int = 10
    head_epochs: int = 400
    finetune_epochs: int = 20
    vinn_k: int = 5
    seed: int = 0

    def to_dict(self):
        return asdict(self)


@dataclass
class Table:
    """Rows of ``{column: (mean, std)}``; NaN marks a column not computed."""

    rows: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "columns": list(COLUMNS),
            "methods": list(self.rows),
            "rows": {name: {c: list(v) for c, v in row.items()} for name, row in self.rows.items()},
            "meta": self.meta,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    def write_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            header = ["method"]
            for c in COLUMNS:
                header += [f"{c}_mean", f"{c}_std"]
            writer.writerow(header)
            for name, row in self.rows.items():
                line = [name]
                for c in COLUMNS:
                    line += [repr(float(row[c][0])), repr(float(row[c][1]))]
                writer.writerow(line)
        return path

    def format(self) -> str:
        lines = [f"{'method':<15}" + "".join(f"{c:>24}" for c in COLUMNS)]
        for name, row in self.rows.items():
            cells = "".join(f"{row[c][0]:>12.4e} ±{row[c][1]:>10.3e}" for c in COLUMNS)
            lines.append(f"{name:<15}{cells}")
        return "\n".join(lines)


# --------------------------------------------------------------------------- #
# data
# --------------------------------------------------------------------------- #
def build_datasets(setup: EvalSetup):
    """Simulated tuples split into train/val/test, plus synthetic pairs."""
    from .model.data import generate_synthetic_pairs, seed_clouds, simulate_tuples, split

    n = setup.n_train + setup.n_val + setup.n_test
    tuples = simulate_tuples(n, seed=child_seed(setup.seed, "tuples"))
    train, val, test = split(tuples, (setup.n_train, setup.n_val, setup.n_test), seed=setup.seed)
    seeds = seed_clouds(setup.n_seed_shapes, seed=child_seed(setup.seed, "seed-shapes"))
    pairs = generate_synthetic_pairs(seeds, setup.n_pairs, seed=child_seed(setup.seed, "pairs"))
    return train, val, test, pairs


def pretrain(setup: EvalSetup, pairs: list):
    """Pre-train the shared encoder on the synthetic pairs."""
    from .model.train import Hyper, pretrain_encoder

    hyper = Hyper(epochs=setup.pretrain_epochs, seed=child_seed(setup.seed, "pretrain"))
    return pretrain_encoder(pairs, hyper)


# --------------------------------------------------------------------------- #
# scoring
# --------------------------------------------------------------------------- #
def rollout_distances(state: np.ndarray, goal: np.ndarray, normalized_action) -> tuple:
    """Apply the grasp to the state cluster and compare with the goal cluster."""
    after = apply_grasp(ClayBody(np.asarray(state, dtype=float)), GraspAction.from_normalized(normalized_action))
    return chamfer(after.particles, goal), emd(after.particles, goal), hausdorff(after.particles, goal)


def _mean_std(values) -> tuple:
    arr = np.asarray(values, dtype=float)
    return float(arr.mean()), float(arr.std())


def score(predict: Callable, val: list, test: list) -> dict:
    """``predict(states, goals) -> [n, 5]`` normalized actions."""
    row = {}
    for name, items in (("val_mse", val), ("test_mse", test)):
        pred = predict([t.state for t in items], [t.next for t in items])
        target = np.stack([t.action for t in items])
        per_item = np.mean((np.asarray(pred) - target) ** 2, axis=1)
        row[name] = _mean_std(per_item)
        if name == "test_mse":
            dist = np.array([rollout_distances(t.state, t.next, a) for t, a in zip(items, pred)])
            row["cd"] = _mean_std(dist[:, 0])
            row["emd"] = _mean_std(dist[:, 1])
            row["hd"] = _mean_std(dist[:, 2])
    return row


def _memory_predictor(memory, method: str, k: int):
    def predict(states, goals):
        if method == "vinn":
            return np.stack([memory.vinn(s, g, k) for s, g in zip(states, goals)])
        return np.stack([memory.nn_greedy(s, g) for s, g in zip(states, goals)])

    return predict


def _model_predictor(model):
    from .model.train import predict_normalized

    def predict(states, goals):
        return predict_normalized(model, states, goals)

    return predict


def _random_predictor(seed: int):
    rng = substream(seed, "random-baseline")

    def predict(states, goals):
        return rng.uniform(-1.0, 1.0, size=(len(states), 5))

    return predict


def table_one(
    train: list,
    val: list,
    test: list,
    encoder,
    setup: EvalSetup = EvalSetup(),
    rows=ROWS,
    progress: Optional[Callable] = None,
) -> Table:
    """Fit every requested method on ``train`` and score it on val/test.

    ``encoder`` is the pre-trained encoder shared by the retrieval baselines
    and the frozen/unfrozen regimes.
    """
    from .model.baselines import LatentMemory
    from .model.train import Hyper, train_action_head

    table = Table(meta={"setup": setup.to_dict(), "n_train": len(train), "n_val": len(val), "n_test": len(test)})
    memory = None
    for name in rows:
        started = time.perf_counter()
        if name in ("VINN", "NN-greedy"):
            memory = memory or LatentMemory(encoder, train)
            predict = _memory_predictor(memory, "vinn" if name == "VINN" else "greedy", setup.vinn_k)
        elif name == "DM frozen":
            hyper = Hyper(epochs=setup.head_epochs, seed=child_seed(setup.seed, "frozen"))
            predict = _model_predictor(train_action_head(train, encoder, "frozen", hyper).model)
        elif name == "DM unfrozen":
            hyper = Hyper(epochs=setup.finetune_epochs, seed=child_seed(setup.seed, "unfrozen"))
            predict = _model_predictor(train_action_head(train, encoder, "unfrozen", hyper).model)
        elif name == "DM end-to-end":
            hyper = Hyper(epochs=setup.finetune_epochs, seed=child_seed(setup.seed, "end-to-end"))
            predict = _model_predictor(train_action_head(train, None, "end-to-end", hyper).model)
        elif name == "Random":
            predict = _random_predictor(setup.seed)
        else:
            raise ValueError(f"unknown method {name!r}")
        table.rows[name] = score(predict, val, test)
        logger.info("%s scored in %.1fs", name, time.perf_counter() - started)
        if progress:
            progress(name, table.rows[name])
    return table
