"""Discrete occupancy grid of clay cells, indexed (i, j, k) with k up."""

from __future__ import annotations

import numpy as np

from ..sim import CELL_SIZE, GRID_DIMS, GRID_ORIGIN


def as_cell(cell) -> tuple:
    """Coerce a proposer's cell to a 3-tuple of ints, or raise ValueError."""
    if isinstance(cell, (str, bytes)) or len(cell) != 3:
        raise ValueError(f"cell must have three indices, got {cell!r}")
    out = []
    for v in cell:
        if isinstance(v, bool) or not float(v).is_integer():
            raise ValueError(f"non-integer cell index in {cell!r}")
        out.append(int(v))
    return tuple(out)


class OccupancyGrid:
    def __init__(self, dims=GRID_DIMS, cell_size=CELL_SIZE, origin=GRID_ORIGIN, occupied=None):
        self.dims = tuple(int(d) for d in dims)
        self.cell_size = float(cell_size)
        self.origin = tuple(float(o) for o in origin)
        if occupied is None:
            occupied = np.zeros(self.dims, dtype=bool)
        self.occupied = np.array(occupied, dtype=bool)
        if self.occupied.shape != self.dims:
            raise ValueError(f"occupancy shape {self.occupied.shape} != dims {self.dims}")

    @classmethod
    def from_cells(cls, cells, **kw) -> "OccupancyGrid":
        g = cls(**kw)
        for c in cells:
            g.add(c)
        return g

    def copy(self) -> "OccupancyGrid":
        return OccupancyGrid(self.dims, self.cell_size, self.origin, self.occupied.copy())

    def in_range(self, cell) -> bool:
        return all(0 <= c < d for c, d in zip(cell, self.dims))

    def __contains__(self, cell) -> bool:
        return self.in_range(cell) and bool(self.occupied[tuple(cell)])

    def __getitem__(self, cell) -> bool:
        return bool(self.occupied[tuple(cell)])

    def add(self, cell) -> None:
        self.occupied[tuple(cell)] = True

    def remove(self, cell) -> None:
        self.occupied[tuple(cell)] = False

    def cells(self) -> list:
        """Occupied cells sorted by (k, i, j)."""
        idx = np.argwhere(self.occupied)
        return sorted((tuple(int(v) for v in c) for c in idx), key=lambda c: (c[2], c[0], c[1]))

    def cell_set(self) -> frozenset:
        return frozenset(self.cells())

    def unsupported(self) -> list:
        return [c for c in self.cells() if c[2] > 0 and not self.occupied[c[0], c[1], c[2] - 1]]

    def __eq__(self, other) -> bool:
        return isinstance(other, OccupancyGrid) and self.dims == other.dims and np.array_equal(
            self.occupied, other.occupied
        )

    def __len__(self):
        return int(self.occupied.sum())

    def to_text(self) -> str:
        """Layer-by-layer text rendering, rows are j and columns are i."""
        lines = []
        for k in range(self.dims[2]):
            lines.append(f"layer k={k}:")
            for j in range(self.dims[1]):
                lines.append(" ".join("1" if self.occupied[i, j, k] else "0" for i in range(self.dims[0])))
        return "\n".join(lines)

    def to_json(self) -> dict:
        return {"dims": list(self.dims), "cell_m": self.cell_size}

    def sample_volume(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Uniform samples from the union of occupied cell cubes (world frame)."""
        cells = np.asarray(self.cells(), dtype=float)
        if len(cells) == 0:
            raise ValueError("cannot sample an empty grid")
        pick = cells[rng.integers(len(cells), size=n)]
        return np.asarray(self.origin) + (pick + rng.random((n, 3))) * self.cell_size

    def exposed_faces(self) -> list:
        """``(cell, axis, side)`` for every cube face not shared with another occupied cell."""
        occ = self.cell_set()
        faces = []
        for cell in self.cells():
            for axis in range(3):
                for side in (0, 1):
                    nb = list(cell)
                    nb[axis] += 1 if side else -1
                    if tuple(nb) not in occ:
                        faces.append((cell, axis, side))
        return faces

    def sample_surface(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Uniform samples over the outer surface of the occupied cells (world frame)."""
        faces = self.exposed_faces()
        if not faces:
            raise ValueError("cannot sample an empty grid")
        pick = rng.integers(len(faces), size=n)
        local = rng.random((n, 3))
        cells = np.asarray([faces[i][0] for i in pick], dtype=float)
        axes = np.asarray([faces[i][1] for i in pick])
        sides = np.asarray([faces[i][2] for i in pick], dtype=float)
        local[np.arange(n), axes] = sides
        return np.asarray(self.origin) + (cells + local) * self.cell_size
