"""
End-to-end sculpting episodes: plan chunk placements, build the coarse shape
in the simulator, then refine it with sub-goal driven grasps.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import BackendTransportError, InvalidArgument, PlanningFailure, UnknownShape
from .metrics import chamfer, distance_report
from .planner import OccupancyGrid, lookup, make_suite, plan
from .pointcloud import WorkspaceBounds, cluster, crop, farthest_point_indices, resample_indices, write_ply
from .rng import child_seed, substream
from .sim import ACTION_BOUNDS, ClayBody, EpisodeLog, GraspAction, apply_grasp, finger_band, observe, place_chunk
from .subgoal import HeuristicBackend, LLMBackend, propose_subgoal

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_PLANNING = 2
EXIT_TRANSPORT = 3
EXIT_CONFIG = 4
TEMPLATE_SAMPLES = 4000
REPORT_POINTS = 512


# --------------------------------------------------------------------------- #
# action policies
# --------------------------------------------------------------------------- #
class GeometricPolicy:
    """Search grasps with the simulator as forward model.

    Candidates are centred on the state cluster and span a fan of closing
    directions, heights and apertures; apertures are fractions of the clay
    width the fingers would meet. Each is rolled out on ``context`` (the
    whole observed clay, since fingers catch neighbours too) and scored by
    Chamfer distance between the moved state particles (``selection`` into
    ``context``) and the goal. Without context the state alone is used.
    Returns no action when nothing beats leaving the clay alone.
    """

    name = "geometric"
    angles = np.linspace(-math.pi / 2, math.pi / 2, 12, endpoint=False)
    fractions = (0.7, 0.8, 0.9, 0.95)
    z_offsets = (-0.004, 0.0, 0.004)

    def candidates(self, state: np.ndarray, context: np.ndarray):
        c = state.mean(axis=0)
        for rot in self.angles:
            for dz in self.z_offsets:
                probe = GraspAction(c[0], c[1], c[2] + dz, float(rot), ACTION_BOUNDS.hi[4])
                s, _, _, band = finger_band(context, probe)
                if not np.any(band):
                    continue
                width = 2.0 * float(np.abs(s[band]).max())
                for f in self.fractions:
                    yield GraspAction(probe.x, probe.y, probe.z, probe.rot_z, f * width).clipped(ACTION_BOUNDS)

    def __call__(self, state, goal, context=None, selection=None) -> Optional[GraspAction]:
        state = np.asarray(state, dtype=float)
        goal = np.asarray(goal, dtype=float)
        if context is None:
            context, selection = state, np.arange(len(state))
        body = ClayBody(np.asarray(context, dtype=float))
        best, best_score = None, chamfer(body.particles[selection], goal)
        for action in self.candidates(state, body.particles):
            score = chamfer(apply_grasp(body, action).particles[selection], goal)
            if score < best_score:
                best, best_score = action, score
        return best


class ModelPolicy:
    name = "dm"

    def __init__(self, model):
        self.model = model

    def __call__(self, state, goal, context=None, selection=None) -> GraspAction:
        from .model.train import predict_action

        return predict_action(self.model, state, goal)


class RandomPolicy:
    name = "random"

    def __init__(self, seed: int):
        self.rng = np.random.default_rng(seed)

    def __call__(self, state, goal, context=None, selection=None) -> GraspAction:
        return GraspAction.from_array(self.rng.uniform(ACTION_BOUNDS.lo_arr, ACTION_BOUNDS.hi_arr))


def make_policy(config):
    if config.action_backend == "geometric":
        return GeometricPolicy()
    if config.action_backend == "random":
        return RandomPolicy(child_seed(config.seed, "random-policy"))
    from .model.checkpoint import load_checkpoint

    model, header = load_checkpoint(config.checkpoint)
    if header["kind"] != "action-model":
        raise InvalidArgument(f"{config.checkpoint} is not an action-model checkpoint")
    return ModelPolicy(model)


def make_subgoal_backend(config, transport=None):
    if config.subgoal_backend == "heuristic":
        return HeuristicBackend.for_prompt(config.prompt, seed=child_seed(config.seed, "heuristic-template"))
    return LLMBackend(config.llm_config, transport=transport, seed=child_seed(config.seed, "llm-serialize"))


class Realizer:
    """Predict what acting on a sub-goal would do to the observed clay.

    Runs ``policy`` on the sub-goal exactly as the refinement loop would and
    rolls the chosen grasp out on the observation. Chosen actions are cached
    so the loop can execute them without asking the policy again.
    """

    def __init__(self, policy, observed: np.ndarray, n_points: int, resample_seed: int):
        self.policy = policy
        self.observed = observed
        self.n_points = n_points
        self.resample_seed = resample_seed
        self.actions: dict = {}

    def action(self, source, target, key):
        if key not in self.actions:
            sel = resample_indices(source.points, self.n_points, seed=self.resample_seed)
            self.actions[key] = self.policy(
                source.points[sel], target.points[sel], context=self.observed, selection=source.indices[sel]
            )
        return self.actions[key]

    def __call__(self, cloud, mod):
        source = cloud[mod.cluster_id]
        action = self.action(source, mod.apply(source), _mod_key(mod))
        if action is None:
            return None
        return apply_grasp(ClayBody(self.observed), action).particles


def _mod_key(mod) -> str:
    return json.dumps(mod.to_dict(), sort_keys=True)


# --------------------------------------------------------------------------- #
# episodes
# --------------------------------------------------------------------------- #
@dataclass
class EpisodeReport:
    prompt: str
    seed: int
    status: str = "ok"
    exit_code: int = EXIT_OK
    error: Optional[dict] = None
    plan: list = field(default_factory=list)
    placements: list = field(default_factory=list)
    rounds: list = field(default_factory=list)
    initial_chamfer: Optional[float] = None
    final_chamfer: Optional[float] = None
    final: Optional[dict] = None
    artifacts: dict = field(default_factory=dict)
    runtime_s: float = 0.0

    def to_dict(self) -> dict:
        return {
            "prompt": self.prompt,
            "seed": self.seed,
            "status": self.status,
            "exit_code": self.exit_code,
            "error": self.error,
            "plan": self.plan,
            "placements": self.placements,
            "rounds": self.rounds,
            "initial_chamfer": self.initial_chamfer,
            "final_chamfer": self.final_chamfer,
            "final": self.final,
            "artifacts": self.artifacts,
            "runtime_s": self.runtime_s,
        }

    def to_json(self, include_runtime: bool = True) -> str:
        d = self.to_dict()
        if not include_runtime:
            d.pop("runtime_s")
        return json.dumps(d, sort_keys=True, indent=1)

    @property
    def improved(self) -> bool:
        return (
            self.final_chamfer is not None
            and self.initial_chamfer is not None
            and self.final_chamfer < self.initial_chamfer
        )


def template_points(prompt: str, grid: OccupancyGrid, n: int, seed: int) -> np.ndarray:
    """Dense samples of the prompt's template surface (or the planned grid's)."""
    try:
        target = lookup(prompt).grid()
    except KeyError:
        target = grid
    return target.sample_surface(n, substream(seed, "template-samples"))


def _failure(report: EpisodeReport, code: int, exc: Exception, out: Path) -> EpisodeReport:
    report.status = "failed"
    report.exit_code = code
    report.error = {"type": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, PlanningFailure):
        report.error["cells"] = [list(c) for c in exc.cells]
    if isinstance(exc, UnknownShape):
        report.error["known"] = exc.known
    logger.error("episode failed (%s): %s", type(exc).__name__, exc)
    return report


def run_episode(config, transport=None) -> EpisodeReport:
    """Plan, place and refine one sculpture; writes artifacts to ``config.out_dir``.

    Failures are captured in the returned report (``status == "failed"``)
    together with the exit code the CLI should use.
    """
    started = time.perf_counter()
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = EpisodeReport(prompt=config.prompt, seed=config.seed)
    try:
        _run(config, report, out, transport)
    except (UnknownShape, PlanningFailure) as exc:
        _failure(report, EXIT_PLANNING, exc, out)
    except BackendTransportError as exc:
        _failure(report, EXIT_TRANSPORT, exc, out)
    except (InvalidArgument, FileNotFoundError) as exc:
        _failure(report, EXIT_CONFIG, exc, out)
    report.runtime_s = time.perf_counter() - started
    (out / "report.json").write_text(report.to_json())
    return report


def _snapshot(out: Path, step: int, points, enabled: bool) -> Optional[str]:
    if not enabled:
        return None
    name = f"step_{step:04d}.ply"
    write_ply(out / name, points)
    return name


def _run(config, report: EpisodeReport, out: Path, transport) -> None:
    seed = config.seed
    bounds = WorkspaceBounds(config.workspace_lo, config.workspace_hi)
    if config.planner_backend == "llm":
        suite = make_suite(config.prompt, "llm", config.llm_config, transport=transport)
    else:
        suite = make_suite(config.prompt, "template")
    policy = make_policy(config)
    subgoals = make_subgoal_backend(config, transport)

    result = plan(config.prompt, suite, max_iters=config.max_plan_iters, audit_path=out / "plan_audit.jsonl")
    result.save(out / "plan.json")
    report.plan = [list(c) for c in result.cells]
    report.artifacts["plan"] = "plan.json"
    report.artifacts["plan_audit"] = "plan_audit.jsonl"

    log = EpisodeLog(out / "episode.jsonl")
    report.artifacts["episode_log"] = "episode.jsonl"
    body = ClayBody()
    step = 0
    prev = None
    for n, placement in enumerate(result.placements):
        body = place_chunk(body, placement, seed=child_seed(seed, "chunk", n))
        snap = _snapshot(out, step, body.particles, config.snapshots)
        log.record("place", {"cell": list(placement.cell)}, prev, snap)
        report.placements.append({"step": step, "cell": list(placement.cell), "snapshot": snap})
        prev = snap
        step += 1

    tmpl = template_points(config.prompt, result.grid, TEMPLATE_SAMPLES, seed)
    report.initial_chamfer = chamfer(body.particles, tmpl) if len(body) else None

    audit: list = []
    for rnd in range(config.max_rounds):
        if not len(body):
            # nothing was placed (e.g. every planner reply was rejected)
            report.rounds.append({"round": rnd, "subgoal": None, "decision": "skip", "reason": "no clay placed"})
            continue
        obs = crop(observe(body, config.noise_sigma, seed=child_seed(seed, "observe", rnd)), bounds)
        clustered = cluster(obs, config.n_clusters, seed=child_seed(seed, "kmeans", rnd))
        realizer = Realizer(policy, obs, config.n_points, child_seed(seed, "resample", rnd))
        if config.lookahead and isinstance(subgoals, HeuristicBackend):
            subgoals.realize = realizer
        goal = propose_subgoal(clustered, config.prompt, subgoals, audit=audit)
        record = {"round": rnd, "subgoal": audit[-1].get("modification")}
        if goal is None:
            record["decision"] = "done" if subgoals.name == "heuristic" else "skip"
            report.rounds.append(record)
            if subgoals.name == "heuristic":
                break
            continue
        action = realizer.action(goal.source_cluster, goal.target_cluster, _mod_key(goal.modification))
        if action is None:
            record["decision"] = "skip"
            record["reason"] = "no grasp realizes this sub-goal"
            report.rounds.append(record)
            continue
        body = apply_grasp(body, action)
        snap = _snapshot(out, step, body.particles, config.snapshots)
        log.record("grasp", {"action": action.as_array().tolist()}, prev, snap)
        prev = snap
        record.update(
            decision="grasp",
            action=[float(v) for v in action.as_array()],
            step=step,
            snapshot=snap,
            chamfer_to_template=chamfer(body.particles, tmpl),
        )
        report.rounds.append(record)
        step += 1

    with (out / "subgoal_audit.jsonl").open("w") as fh:
        for rec in audit:
            fh.write(json.dumps(rec, sort_keys=True, default=str) + "\n")
    report.artifacts["subgoal_audit"] = "subgoal_audit.jsonl"

    if not len(body):
        return
    final_pts = observe(body, config.noise_sigma, seed=child_seed(seed, "observe-final"))
    write_ply(out / "final.ply", final_pts)
    report.artifacts["final_cloud"] = "final.ply"
    report.final_chamfer = chamfer(body.particles, tmpl)
    n = min(REPORT_POINTS, len(final_pts))
    a = final_pts[farthest_point_indices(final_pts, n, seed=child_seed(seed, "report-fps"))]
    b = tmpl[farthest_point_indices(tmpl, n, seed=child_seed(seed, "report-fps-template"))]
    report.final = distance_report(a, b).to_dict()


# --------------------------------------------------------------------------- #
# suites
# --------------------------------------------------------------------------- #
SUMMARY_FIELDS = (
    "prompt", "episodes", "failed", "improved",
    "initial_cd_mean", "final_cd_mean", "final_cd_std",
    "cd_mean", "cd_std", "emd_mean", "emd_std", "hd_mean", "hd_std",
)


def run_suite(prompts, repeats: int, config, same_seed: bool = False, transport=None):
    """Run ``repeats`` episodes per prompt and summarize final metrics.

    Returns ``(reports, summary_rows)``; writes ``summary.csv`` and
    ``summary.json`` under ``config.out_dir``.
    """
    root = Path(config.out_dir)
    root.mkdir(parents=True, exist_ok=True)
    reports, rows = [], []
    for prompt in prompts:
        batch = []
        for rep in range(repeats):
            seed = config.seed if same_seed else child_seed(config.seed, "suite", prompt, rep)
            cfg = config.replace(prompt=prompt, seed=seed, out_dir=str(root / _slug(prompt) / f"rep_{rep}"))
            batch.append(run_episode(cfg, transport=transport))
        reports.extend(batch)
        rows.append(_summarize(prompt, batch))
    with (root / "summary.csv").open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SUMMARY_FIELDS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    (root / "summary.json").write_text(json.dumps(rows, sort_keys=True, indent=1))
    return reports, rows


def _slug(prompt: str) -> str:
    return "".join(ch if ch.isalnum() else "_" for ch in prompt.strip()) or "prompt"


def _mean_std(values):
    if not values:
        return None, None
    arr = np.asarray(values, dtype=float)
    return float(arr.mean()), float(arr.std())


def _summarize(prompt: str, reports) -> dict:
    ok = [r for r in reports if r.status == "ok"]
    row = {"prompt": prompt, "episodes": len(reports), "failed": len(reports) - len(ok),
           "improved": sum(r.improved for r in ok)}
    ok = [r for r in ok if r.final is not None]
    row["initial_cd_mean"], _ = _mean_std([r.initial_chamfer for r in ok])
    row["final_cd_mean"], row["final_cd_std"] = _mean_std([r.final_chamfer for r in ok])
    for key in ("cd", "emd", "hd"):
        row[f"{key}_mean"], row[f"{key}_std"] = _mean_std([r.final[key] for r in ok])
    return row
