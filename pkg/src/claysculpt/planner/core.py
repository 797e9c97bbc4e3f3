"""
Soft segment planner: iterative add/remove editing of the occupancy grid by
pluggable proposers, followed by ordering the placements so every chunk
lands on the floor or on a chunk already placed below it.
"""

from __future__ import annotations

import heapq
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from ..errors import InvalidArgument, PlanningFailure
from ..sim import ChunkPlacement, SimParams
from .grid import OccupancyGrid, as_cell

logger = logging.getLogger(__name__)

BATCH = 3
MAX_ITERS = 50


@dataclass
class ProposerSuite:
    """The five planner callables.

    sigma(prompt, grid) -> cells to add
    phi(prompt, grid) -> cells to remove
    theta(prompt, grid) -> True when the shape is finished
    gamma(prompt) -> True when no shape-generator help is wanted
    zeta(prompt) -> OccupancyGrid initial guess
    """

    sigma: Callable
    phi: Callable
    theta: Callable
    gamma: Callable
    zeta: Callable
    name: str = "custom"


@dataclass
class PlacementPlan:
    placements: list
    grid: OccupancyGrid
    audit: list = field(default_factory=list)

    @property
    def cells(self) -> list:
        return [p.cell for p in self.placements]

    def __len__(self):
        return len(self.placements)

    def to_json(self) -> dict:
        return {"grid": self.grid.to_json(), "placements": [list(c) for c in self.cells]}

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()))

    def save_audit(self, path) -> None:
        with open(path, "w") as fh:
            for rec in self.audit:
                fh.write(json.dumps(rec, sort_keys=True, default=str) + "\n")

    @classmethod
    def load(cls, path) -> "PlacementPlan":
        data = json.loads(Path(path).read_text())
        g = data["grid"]
        grid = OccupancyGrid(dims=g["dims"], cell_size=g["cell_m"])
        cells = [tuple(c) for c in data["placements"]]
        for c in cells:
            grid.add(c)
        return cls(_placements(cells, grid), grid)


def _placements(cells, grid: OccupancyGrid) -> list:
    params = SimParams(cell_size=grid.cell_size, grid_dims=grid.dims, origin=grid.origin)
    return [ChunkPlacement.at(c, params) for c in cells]


def _check_cells(raw, grid: OccupancyGrid, want_occupied: bool) -> list:
    if raw is None:
        return []
    cells = [as_cell(c) for c in raw]
    if len(set(cells)) != len(cells):
        raise ValueError(f"duplicate cells in proposal {cells}")
    for c in cells:
        if not grid.in_range(c):
            raise ValueError(f"cell {c} outside grid {grid.dims}")
        if want_occupied and c not in grid:
            raise ValueError(f"cell {c} is not occupied")
        if not want_occupied and c in grid:
            raise ValueError(f"cell {c} is already occupied")
    return cells


def _unwrap(value):
    # backends may hand back (proposal, details) to enrich the audit log
    if isinstance(value, tuple) and len(value) == 2 and isinstance(value[1], dict):
        return value
    return value, {}


def plan(
    prompt: str,
    suite: ProposerSuite,
    max_iters: int = MAX_ITERS,
    initial: Optional[OccupancyGrid] = None,
    audit_path=None,
) -> PlacementPlan:
    """Run the add/remove loop and return a support-ordered placement plan.

    Even iterations ask ``sigma`` for cells to add, odd ones ask ``phi`` for
    cells to remove. Invalid proposals are logged and skipped but still use
    up their iteration.
    """
    if not prompt or not prompt.strip():
        raise InvalidArgument("shape prompt must be non-empty")
    if max_iters < 1:
        raise InvalidArgument("max_iters must be at least 1")
    grid = initial.copy() if initial is not None else OccupancyGrid()
    # cells already in the starting grid still have to be placed
    order: list = grid.cells()
    audit: list = []

    confident, info = _unwrap(suite.gamma(prompt))
    audit.append({"call": len(audit), "proposer": "gamma", "result": bool(confident), **info})
    if not confident:
        guess, info = _unwrap(suite.zeta(prompt))
        seeded = guess.cells() if isinstance(guess, OccupancyGrid) else [as_cell(c) for c in guess]
        for c in seeded:
            if grid.in_range(c) and c not in grid:
                grid.add(c)
                order.append(c)
        audit.append({"call": len(audit), "proposer": "zeta", "cells": [list(c) for c in seeded], **info})

    it = 0
    while True:
        done, info = _unwrap(suite.theta(prompt, grid.copy()))
        audit.append({"call": len(audit), "proposer": "theta", "iter": it, "result": bool(done), **info})
        if done or it >= max_iters:
            break
        name = "sigma" if it % 2 == 0 else "phi"
        proposer = suite.sigma if name == "sigma" else suite.phi
        raw, info = _unwrap(proposer(prompt, grid.copy()))
        rec = {"call": len(audit), "proposer": name, "iter": it, "proposal": _jsonable(raw), **info}
        try:
            cells = _check_cells(raw, grid, want_occupied=(name == "phi"))
        except (ValueError, TypeError) as exc:
            logger.info("rejected %s proposal at iter %d: %s", name, it, exc)
            rec.update(accepted=False, reason=str(exc))
        else:
            rec["accepted"] = True
            if name == "sigma":
                for c in cells:
                    grid.add(c)
                order.extend(cells)
            else:
                gone = set(cells)
                for c in cells:
                    grid.remove(c)
                order = [c for c in order if c not in gone]
        audit.append(rec)
        it += 1

    result = validate_and_order(grid, [ChunkPlacement.at(c) for c in order])
    result.audit = audit
    if audit_path is not None:
        result.save_audit(audit_path)
    return result


def _jsonable(raw):
    try:
        json.dumps(raw)
        return raw
    except TypeError:
        return repr(raw)


def validate_and_order(grid_final: OccupancyGrid, raw_plan) -> PlacementPlan:
    """Reorder ``raw_plan`` so each chunk is placed after the one below it.

    Among the cells ready to be placed, the earliest in ``raw_plan`` goes
    first, so the raw order is kept wherever support allows it.
    """
    cells = [tuple(p.cell) if isinstance(p, ChunkPlacement) else as_cell(p) for p in raw_plan]
    if len(set(cells)) != len(cells):
        raise InvalidArgument("placement plan repeats a cell")
    if set(cells) != grid_final.cell_set():
        raise InvalidArgument("placement plan does not match the occupied cells of the grid")
    floating = grid_final.unsupported()
    if floating:
        raise PlanningFailure("unsupported cells cannot be placed", floating)

    rank = {c: n for n, c in enumerate(cells)}
    above = {c: (c[0], c[1], c[2] + 1) for c in cells}
    ready = [(rank[c], c) for c in cells if c[2] == 0]
    heapq.heapify(ready)
    ordered = []
    while ready:
        _, c = heapq.heappop(ready)
        ordered.append(c)
        nxt = above[c]
        if nxt in rank:
            heapq.heappush(ready, (rank[nxt], nxt))
    return PlacementPlan(_placements(ordered, grid_final), grid_final.copy())


def prefix_supported(cells) -> bool:
    """True when every prefix of ``cells`` only contains supported cells."""
    placed = set()
    for c in cells:
        if c[2] > 0 and (c[0], c[1], c[2] - 1) not in placed:
            return False
        placed.add(tuple(c))
    return True
