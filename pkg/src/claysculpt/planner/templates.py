"""Registered prompt -> target occupancy templates."""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import UnknownShape
from .grid import OccupancyGrid


@dataclass(frozen=True)
class ShapeTemplate:
    name: str
    cells: frozenset
    complex: bool = False  # complex shapes start from the shape-generator guess

    def grid(self) -> OccupancyGrid:
        return OccupancyGrid.from_cells(self.cells)


def _x():
    return {(i, i, 0) for i in range(5)} | {(i, 4 - i, 0) for i in range(5)}


def _line():
    return {(2, j, 0) for j in range(5)}


def _column():
    return {(2, 2, k) for k in range(4)}


def _cube():
    return {(i, j, k) for i in range(1, 4) for j in range(1, 4) for k in range(3)}


def _pyramid():
    base = {(i, j, 0) for i in range(5) for j in range(5)}
    mid = {(i, j, 1) for i in range(1, 4) for j in range(1, 4)}
    return base | mid | {(2, 2, 2)}


def _flower():
    petals = {(2, 2), (1, 2), (3, 2), (2, 1), (2, 3), (0, 2), (4, 2), (2, 0), (2, 4),
              (1, 1), (1, 3), (3, 1), (3, 3)}
    return {(i, j, 0) for i, j in petals} | {(2, 2, 1)}


def _airplane():
    body = {(2, j, 0) for j in range(5)}
    wings = {(0, 3, 0), (1, 3, 0), (3, 3, 0), (4, 3, 0)}
    tail = {(1, 0, 0), (3, 0, 0), (2, 0, 1)}
    return body | wings | tail


def _chair():
    seat = {(i, j, 0) for i in range(1, 4) for j in range(1, 4)}
    back = {(i, 3, k) for i in range(1, 4) for k in (1, 2)}
    return seat | back


def _pottery():
    base = {(i, j, 0) for i in range(1, 4) for j in range(1, 4)}
    ring = {(i, j) for i in range(1, 4) for j in range(1, 4)} - {(2, 2)}
    walls = {(i, j, k) for i, j in ring for k in (1, 2)}
    return base | walls


TEMPLATES = {
    t.name: t
    for t in (
        ShapeTemplate("X", frozenset(_x())),
        ShapeTemplate("line", frozenset(_line())),
        ShapeTemplate("column", frozenset(_column())),
        ShapeTemplate("cube", frozenset(_cube())),
        ShapeTemplate("pyramid", frozenset(_pyramid()), complex=True),
        ShapeTemplate("flower", frozenset(_flower()), complex=True),
        ShapeTemplate("airplane", frozenset(_airplane()), complex=True),
        ShapeTemplate("chair", frozenset(_chair()), complex=True),
        ShapeTemplate("pottery", frozenset(_pottery()), complex=True),
    )
}

PAPER_PROMPTS = ("X", "line", "flower", "column", "pyramid", "airplane", "chair", "pottery")


def lookup(prompt: str) -> ShapeTemplate:
    """Find the template named by ``prompt``.

    Exact names win; otherwise the first registered name found as a word in
    the prompt (case-insensitive) is used, so "a tall column" maps to column.
    """
    text = prompt.strip()
    if text in TEMPLATES:
        return TEMPLATES[text]
    words = {w.strip(".,!?'\"").lower() for w in text.split()}
    for name, tmpl in TEMPLATES.items():
        if name.lower() in words:
            return tmpl
    raise UnknownShape(text, TEMPLATES)
