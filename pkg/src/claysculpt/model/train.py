"""
Two-stage training: distance-regression pre-training of the encoder, then
action-head training with the encoder frozen, fine-tuned, or trained from
scratch.
"""

from __future__ import annotations

import copy
import logging
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
import torch
from torch.nn import functional as F

from ..errors import InvalidArgument
from ..pointcloud import Cluster
from ..sim import ACTION_BOUNDS, GraspAction
from .networks import ActionHead, ActionModel, DistanceModel, PointNetEncoder

logger = logging.getLogger(__name__)

MODES = ("frozen", "unfrozen", "end-to-end")


@dataclass
class Hyper:
    lr: float = 1e-3
    momentum: float = 0.9
    batch_size: int = 32
    epochs: int = 10
    seed: int = 0
    dtype: str = "float32"

    @property
    def torch_dtype(self):
        return getattr(torch, self.dtype)

    def to_dict(self):
        return asdict(self)


def _tensor(arrays, dtype) -> torch.Tensor:
    return torch.as_tensor(np.stack([np.asarray(a, dtype=float) for a in arrays]), dtype=dtype)


def _batches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]


def new_encoder(seed: int, dtype=torch.float32) -> PointNetEncoder:
    torch.manual_seed(seed)
    return PointNetEncoder().to(dtype)


# --------------------------------------------------------------------------- #
# stage 1: synthetic pre-training
# --------------------------------------------------------------------------- #
@dataclass
class PretrainResult:
    encoder: PointNetEncoder
    head: torch.nn.Module
    target_scale: float
    history: list
    holdout_before: float
    holdout_after: float


def distance_loss(model: DistanceModel, a, b, target) -> torch.Tensor:
    return F.mse_loss(model(a, b), target)


def pretrain_encoder(
    pairs: list,
    hyper: Hyper = Hyper(),
    holdout_fraction: float = 0.1,
    encoder: Optional[PointNetEncoder] = None,
) -> PretrainResult:
    """Fit encoder + scalar head to the pairs' distance targets.

    Targets are divided by their standard deviation before fitting. A
    held-out split reports the loss before and after training; the
    regression head is returned for inspection but is not part of the
    encoder weights.
    """
    if not pairs:
        raise InvalidArgument("pre-training needs a non-empty dataset")
    dtype = hyper.torch_dtype
    rng = np.random.default_rng(hyper.seed)
    torch.manual_seed(hyper.seed)
    model = DistanceModel(encoder or PointNetEncoder()).to(dtype)

    targets = np.array([p.target for p in pairs], dtype=float)
    scale = float(targets.std()) or 1.0
    a = _tensor([p.state for p in pairs], dtype)
    b = _tensor([p.next for p in pairs], dtype)
    y = torch.as_tensor(targets / scale, dtype=dtype)

    order = rng.permutation(len(pairs))
    n_hold = int(round(holdout_fraction * len(pairs))) if len(pairs) > 1 else 0
    hold, train = order[:n_hold], order[n_hold:]

    def holdout_loss():
        if n_hold == 0:
            return float("nan")
        with torch.no_grad():
            return float(distance_loss(model, a[hold], b[hold], y[hold]))

    before = holdout_loss()
    opt = torch.optim.SGD(model.parameters(), lr=hyper.lr, momentum=hyper.momentum)
    history = []
    for epoch in range(hyper.epochs):
        total = 0.0
        for batch in _batches(len(train), hyper.batch_size, rng):
            idx = train[batch]
            opt.zero_grad()
            loss = distance_loss(model, a[idx], b[idx], y[idx])
            loss.backward()
            opt.step()
            total += float(loss.detach()) * len(idx)
        history.append({"epoch": epoch, "train_loss": total / max(len(train), 1), "holdout_loss": holdout_loss()})
        logger.info("pretrain epoch %d: %s", epoch, history[-1])
    return PretrainResult(model.encoder, model.head, scale, history, before, holdout_loss())


# --------------------------------------------------------------------------- #
# stage 2: action training
# --------------------------------------------------------------------------- #
@dataclass
class TrainedActionModel:
    model: ActionModel
    mode: str
    history: list

    def predict(self, state, goal) -> GraspAction:
        return predict_action(self.model, state, goal)


def encoder_bytes(encoder: PointNetEncoder) -> bytes:
    return b"".join(t.detach().cpu().numpy().tobytes() for t in encoder.state_dict().values())


def action_loss(model: ActionModel, s, g, a) -> torch.Tensor:
    return F.mse_loss(model(s, g), a)


def train_action_head(
    tuples: list,
    encoder: Optional[PointNetEncoder],
    mode: str = "frozen",
    hyper: Hyper = Hyper(epochs=200),
    pretrained: bool = True,
) -> TrainedActionModel:
    """Train the action head on (state, next state, normalized action) tuples.

    ``frozen`` keeps ``encoder`` bit-for-bit fixed, ``unfrozen`` fine-tunes a
    copy of it, and ``end-to-end`` starts from a fresh random encoder (pass
    ``encoder=None``; ``pretrained`` flags whether a given encoder came from
    pre-training).
    """
    if mode not in MODES:
        raise InvalidArgument(f"mode must be one of {MODES}")
    if not tuples:
        raise InvalidArgument("action training needs a non-empty dataset")
    if mode == "end-to-end" and encoder is not None and pretrained:
        raise InvalidArgument("end-to-end training starts from a random encoder, not pre-trained weights")
    if mode != "end-to-end" and encoder is None:
        raise InvalidArgument(f"{mode} training needs a pre-trained encoder")
    actions = np.stack([np.asarray(t.action, dtype=float) for t in tuples])
    if np.any(np.abs(actions) > 1.0 + 1e-9):
        raise InvalidArgument("actions must be normalized to [-1, 1]")

    dtype = hyper.torch_dtype
    rng = np.random.default_rng(hyper.seed)
    if mode == "end-to-end":
        enc = encoder if encoder is not None else new_encoder(hyper.seed, dtype)
    elif mode == "unfrozen":
        enc = copy.deepcopy(encoder)
    else:
        enc = encoder
    enc = enc.to(dtype)
    torch.manual_seed(hyper.seed + 1)
    head = ActionHead().to(dtype)
    model = ActionModel(enc, head)

    s = _tensor([t.state for t in tuples], dtype)
    g = _tensor([t.next for t in tuples], dtype)
    y = torch.as_tensor(actions, dtype=dtype)

    if mode == "frozen":
        for p in enc.parameters():
            p.requires_grad_(False)
        with torch.no_grad():
            rs, gs = enc(s)
            rg, gg = enc(g)
        params = list(head.parameters())

        def loss_fn(idx):
            return F.mse_loss(head(rs[idx], gs[idx], rg[idx], gg[idx]), y[idx])
    else:
        params = list(model.parameters())

        def loss_fn(idx):
            return action_loss(model, s[idx], g[idx], y[idx])

    opt = torch.optim.SGD(params, lr=hyper.lr, momentum=hyper.momentum)
    history = []
    for epoch in range(hyper.epochs):
        total = 0.0
        for idx in _batches(len(tuples), hyper.batch_size, rng):
            opt.zero_grad()
            loss = loss_fn(idx)
            loss.backward()
            opt.step()
            total += float(loss.detach()) * len(idx)
        history.append({"epoch": epoch, "train_mse": total / len(tuples)})
    if mode == "frozen":
        for p in enc.parameters():
            p.requires_grad_(True)
    model.eval()
    return TrainedActionModel(model, mode, history)


def _points(cluster) -> np.ndarray:
    return cluster.points if isinstance(cluster, Cluster) else np.asarray(cluster, dtype=float)


def predict_normalized(model: ActionModel, states, goals) -> np.ndarray:
    """Batched raw predictions clamped to [-1, 1]."""
    dtype = next(model.parameters()).dtype
    with torch.no_grad():
        out = model(_tensor([_points(c) for c in states], dtype), _tensor([_points(c) for c in goals], dtype))
    return np.clip(out.double().numpy(), -1.0, 1.0)


def predict_action(model: ActionModel, state_cluster, goal_cluster, bounds=ACTION_BOUNDS) -> GraspAction:
    if len(_points(state_cluster)) == 0 or len(_points(goal_cluster)) == 0:
        raise InvalidArgument("clusters must be non-empty")
    norm = predict_normalized(model, [state_cluster], [goal_cluster])[0]
    return GraspAction.from_normalized(norm, bounds)
