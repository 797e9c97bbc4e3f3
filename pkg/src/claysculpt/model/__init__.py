from .baselines import LatentMemory, baseline_nn_greedy, baseline_random, baseline_vinn
from .data import ActionTuple, TrainingPair, generate_synthetic_pairs, seed_clouds, simulate_tuples
from .networks import ActionHead, ActionModel, DistanceModel, PointNetEncoder, fuse, pair_embedding
from .train import Hyper, predict_action, pretrain_encoder, train_action_head

__all__ = [
    "ActionHead",
    "ActionModel",
    "ActionTuple",
    "DistanceModel",
    "Hyper",
    "LatentMemory",
    "PointNetEncoder",
    "TrainingPair",
    "baseline_nn_greedy",
    "baseline_random",
    "baseline_vinn",
    "fuse",
    "generate_synthetic_pairs",
    "pair_embedding",
    "predict_action",
    "pretrain_encoder",
    "seed_clouds",
    "simulate_tuples",
    "train_action_head",
]
