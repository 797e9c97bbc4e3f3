"""
Siamese PointNet-style cluster encoder, the cross-attention action head and
the scalar distance head used for synthetic pre-training.

Shapes follow the convention ``[B, N, 3]`` for point batches.
"""

from __future__ import annotations

import torch
from torch import Tensor, nn
from torch.nn import functional as F

REGIONAL_DIM = 64
GLOBAL_DIM = 1024
FUSED_DIM = REGIONAL_DIM + GLOBAL_DIM
ATTN_DIM = 128
LATENT_DIM = 256
ACTION_DIM = 5

# fixed input scaling: the 7.5 cm grid maps to roughly [-1, 1]
INPUT_CENTER = (0.0375, 0.0375, 0.0375)
INPUT_SCALE = 0.0375


class PointNetEncoder(nn.Module):
    """Shared per-point MLP with a learned 64x64 feature transform.

    Regional features are the feature-transform output (N x 64); the global
    feature is the coordinatewise max over a per-point 1024-d embedding.
    """

    def __init__(self) -> None:
        super().__init__()
        self.point_mlp = nn.ModuleList([nn.Linear(3, 64), nn.Linear(64, REGIONAL_DIM)])
        self.feature_transform = nn.Parameter(torch.eye(REGIONAL_DIM))
        self.global_mlp = nn.ModuleList([nn.Linear(REGIONAL_DIM, 128), nn.Linear(128, GLOBAL_DIM)])
        self.register_buffer("center", torch.tensor(INPUT_CENTER))
        self.scale = INPUT_SCALE

    def forward(self, points: Tensor):
        h = (points - self.center.to(points.dtype)) / self.scale
        for layer in self.point_mlp:
            h = F.relu(layer(h))
        regional = h @ self.feature_transform
        g = F.relu(self.global_mlp[0](regional))
        g = self.global_mlp[1](g)
        return regional, g.max(dim=-2).values


def fuse(regional: Tensor, global_feat: Tensor) -> Tensor:
    """Concatenate each regional row with the global vector: N x 1088."""
    n = regional.shape[-2]
    return torch.cat([regional, global_feat.unsqueeze(-2).expand(*global_feat.shape[:-1], n, -1)], dim=-1)


def pair_embedding(global_state: Tensor, global_goal: Tensor) -> Tensor:
    """Pooled embedding of a (state, goal) pair used for retrieval and regression."""
    return torch.cat([global_state, global_goal - global_state], dim=-1)


class FusedLinear(nn.Linear):
    """A 1088 -> h projection applied to fused rows without materializing them.

    ``fused @ W`` splits into a regional part plus a global part broadcast
    over rows, which is far cheaper for N x 1088 inputs.
    """

    def __init__(self, out_features: int) -> None:
        super().__init__(FUSED_DIM, out_features)

    def project(self, regional: Tensor, global_feat: Tensor) -> Tensor:
        w = self.weight
        local = F.linear(regional, w[:, :REGIONAL_DIM])
        shared = F.linear(global_feat, w[:, REGIONAL_DIM:], self.bias)
        return local + shared.unsqueeze(-2)


class ActionHead(nn.Module):
    """Cross-attention from state rows to goal rows, then an MLP to 5 outputs."""

    def __init__(self, attn_dim: int = ATTN_DIM, latent_dim: int = LATENT_DIM, use_regional: bool = True):
        super().__init__()
        self.query = FusedLinear(attn_dim)
        self.key = FusedLinear(attn_dim)
        self.value = FusedLinear(attn_dim)
        self.down = nn.Linear(attn_dim, latent_dim)
        self.mlp = nn.Sequential(nn.ReLU(), nn.Linear(latent_dim, 128), nn.ReLU(), nn.Linear(128, ACTION_DIM))
        self.attn_dim = attn_dim
        self.use_regional = use_regional

    def forward(self, reg_s: Tensor, glob_s: Tensor, reg_g: Tensor, glob_g: Tensor) -> Tensor:
        if not self.use_regional:
            # zero-width regional ablation: every row carries only the global feature
            reg_s = torch.zeros_like(reg_s)
            reg_g = torch.zeros_like(reg_g)
        q = self.query.project(reg_s, glob_s)
        k = self.key.project(reg_g, glob_g)
        v = self.value.project(reg_g, glob_g)
        attn = torch.softmax(q @ k.transpose(-1, -2) / self.attn_dim**0.5, dim=-1)
        pooled = (attn @ v).mean(dim=-2)
        return self.mlp(self.down(pooled))


class DistanceHead(nn.Module):
    def __init__(self, hidden: int = 256):
        super().__init__()
        self.net = nn.Sequential(nn.Linear(2 * GLOBAL_DIM, hidden), nn.ReLU(), nn.Linear(hidden, 1))

    def forward(self, glob_a: Tensor, glob_b: Tensor) -> Tensor:
        return self.net(pair_embedding(glob_a, glob_b)).squeeze(-1)


class DistanceModel(nn.Module):
    """Encoder plus scalar head regressing the mixed Chamfer/EMD distance."""

    def __init__(self, encoder: PointNetEncoder | None = None):
        super().__init__()
        self.encoder = encoder or PointNetEncoder()
        self.head = DistanceHead()

    def forward(self, a: Tensor, b: Tensor) -> Tensor:
        _, ga = self.encoder(a)
        _, gb = self.encoder(b)
        return self.head(ga, gb)


class ActionModel(nn.Module):
    """Siamese encoder + action head mapping (state, goal) clusters to a
    normalized 5D grasp."""

    def __init__(self, encoder: PointNetEncoder | None = None, head: ActionHead | None = None):
        super().__init__()
        self.encoder = encoder or PointNetEncoder()
        self.head = head or ActionHead()

    def forward(self, state: Tensor, goal: Tensor) -> Tensor:
        rs, gs = self.encoder(state)
        rg, gg = self.encoder(goal)
        return self.head(rs, gs, rg, gg)
