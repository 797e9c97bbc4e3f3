"""Proposer suites: a deterministic template backend and an LLM backend."""

from __future__ import annotations

import logging
from typing import Optional

import httpx

from ..llm import ChatClient, LLMConfig, ask_json, fill, load_prompt
from .core import BATCH, ProposerSuite
from .grid import OccupancyGrid, as_cell
from .templates import TEMPLATES, lookup

logger = logging.getLogger(__name__)


def _supported(cell, grid: OccupancyGrid, pending) -> bool:
    i, j, k = cell
    return k == 0 or (i, j, k - 1) in grid or (i, j, k - 1) in pending


def template_backend(prompt: str, batch: int = BATCH) -> ProposerSuite:
    """Suite that edits the grid toward a registered template.

    Raises :class:`UnknownShape` when no template matches ``prompt``.
    """
    tmpl = lookup(prompt)
    target = tmpl.cells

    def sigma(p, grid):
        missing = sorted((c for c in target if c not in grid), key=lambda c: (c[2], c[0], c[1]))
        chosen: list = []
        for c in missing:
            if len(chosen) == batch:
                break
            if _supported(c, grid, chosen):
                chosen.append(c)
        return chosen

    def phi(p, grid):
        extra = sorted((c for c in grid.cells() if c not in target), key=lambda c: (-c[2], c[0], c[1]))
        return extra[:batch]

    def theta(p, grid):
        return grid.cell_set() == target

    def gamma(p):
        return not tmpl.complex

    def zeta(p):
        return tmpl.grid()

    return ProposerSuite(sigma, phi, theta, gamma, zeta, name=f"template:{tmpl.name}")


# --------------------------------------------------------------------------- #
# LLM backend
# --------------------------------------------------------------------------- #
def _cell_list(key):
    def parse(obj):
        if not isinstance(obj, dict) or key not in obj:
            raise ValueError(f"expected a JSON object with key {key!r}")
        cells = obj[key]
        if not isinstance(cells, list):
            raise ValueError(f"{key!r} must be a list of [i, j, k] cells")
        return [list(as_cell(c)) for c in cells]

    return parse


def _flag(key):
    def parse(obj):
        if not isinstance(obj, dict) or not isinstance(obj.get(key), bool):
            raise ValueError(f"expected a JSON object with boolean {key!r}")
        return obj[key]

    return parse


def llm_backend(
    config: LLMConfig,
    transport: Optional[httpx.BaseTransport] = None,
    client: Optional[ChatClient] = None,
) -> ProposerSuite:
    """Suite whose proposers query a chat endpoint for strict JSON replies.

    Persistent parse failures degrade to an empty proposal (sigma/phi), to
    "not done" (theta) and to "no help needed" (gamma). Transport failures
    raise :class:`BackendTransportError`.
    """
    client = client or ChatClient(config, transport)
    system = load_prompt("planner_system_v1.txt")

    def ask(task_file, parse, fallback, **slots):
        messages = [
            {"role": "system", "content": system},
            {"role": "user", "content": fill(load_prompt(task_file), **slots)},
        ]
        reply = ask_json(client, messages, parse, config.retries)
        info = {"raw": reply.raw, "retries": reply.retries, "parsed": reply.ok}
        if not reply.ok:
            info["errors"] = reply.errors
            return fallback, info
        return reply.value, info

    def sigma(p, grid):
        return ask("planner_add_v1.txt", _cell_list("add"), [], PROMPT=p, GRID=grid.to_text())

    def phi(p, grid):
        return ask("planner_remove_v1.txt", _cell_list("remove"), [], PROMPT=p, GRID=grid.to_text())

    def theta(p, grid):
        return ask("planner_done_v1.txt", _flag("done"), False, PROMPT=p, GRID=grid.to_text())

    def gamma(p):
        return ask("planner_assist_v1.txt", _flag("confident"), True, PROMPT=p)

    def zeta(p):
        # no text-to-point-cloud model ships here; known prompts use templates
        try:
            return lookup(p).grid()
        except KeyError:
            return OccupancyGrid()

    return ProposerSuite(sigma, phi, theta, gamma, zeta, name=f"llm:{config.model}")


def make_suite(prompt: str, backend: str = "template", llm: Optional[LLMConfig] = None, **kw) -> ProposerSuite:
    if backend == "template":
        return template_backend(prompt)
    if backend == "llm":
        return llm_backend(llm or LLMConfig(), **kw)
    raise ValueError(f"unknown planner backend {backend!r}")


KNOWN_TEMPLATES = tuple(TEMPLATES)
