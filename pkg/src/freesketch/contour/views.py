"""The 26 canonical viewing directions around a bounding cube."""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass

import numpy as np


class ViewKind(str, enum.Enum):
    FACE = "Face"
    EDGE = "Edge"
    CORNER = "Corner"


@dataclass(frozen=True)
class Viewpoint:
    """Orthographic camera looking along ``-direction``.

    ``lattice`` keeps the integer triple the direction was built from; it is
    the sort key and a compact name for the view.
    """

    lattice: tuple[int, int, int]

    @property
    def kind(self) -> ViewKind:
        return (ViewKind.FACE, ViewKind.EDGE, ViewKind.CORNER)[sum(map(abs, self.lattice)) - 1]

    @property
    def direction(self) -> np.ndarray:
        d = np.array(self.lattice, dtype=float)
        return d / np.linalg.norm(d)

    @property
    def up(self) -> np.ndarray:
        """Screen-up vector.

        The world axis least aligned with the view (priority z, y, x) is
        signed toward the viewer and orthogonalised against ``direction``.
        The sign rule makes every Corner view show the near vertex with the
        same screen orientation, and every Edge view shows its near edge
        vertically.
        """
        d = self.direction
        order = (2, 1, 0)
        axis = min(order, key=lambda i: abs(self.lattice[i]))
        a = np.zeros(3)
        a[axis] = 1.0 if self.lattice[axis] >= 0 else -1.0
        u = a - np.dot(a, d) * d
        return u / np.linalg.norm(u)

    @property
    def right(self) -> np.ndarray:
        return np.cross(self.up, self.direction)

    @property
    def name(self) -> str:
        return "".join({-1: "m", 0: "0", 1: "p"}[c] for c in self.lattice)

    def to_dict(self) -> dict:
        return {"lattice": list(self.lattice), "direction": self.direction.tolist(),
                "up": self.up.tolist(), "kind": self.kind.value}

    @classmethod
    def from_lattice(cls, triple) -> Viewpoint:
        triple = tuple(int(c) for c in triple)
        if len(triple) != 3 or any(c not in (-1, 0, 1) for c in triple) or not any(triple):
            raise ValueError(f"not a cube lattice direction: {triple}")
        return cls(triple)


def canonical_viewpoints() -> list[Viewpoint]:
    """Face centres, edge midpoints, then corners; each group sorted by triple."""
    triples = [t for t in itertools.product((-1, 0, 1), repeat=3) if any(t)]
    triples.sort(key=lambda t: (sum(map(abs, t)), t))
    return [Viewpoint(t) for t in triples]
