from __future__ import annotations

from dataclasses import dataclass

from .fields import ScalarField, VectorField


@dataclass
class SimState:
    """Unknowns ``(n, c, u, p)`` at one time level."""

    t: float
    n: ScalarField
    c: ScalarField
    u: VectorField
    p: ScalarField

    @property
    def grid(self):
        return self.n.grid

    def copy(self):
        return SimState(self.t, self.n.copy(), self.c.copy(), self.u.copy(), self.p.copy())

    @classmethod
    def zeros(cls, grid):
        return cls(0.0, ScalarField.zeros(grid), ScalarField.zeros(grid),
                   VectorField.zeros(grid), ScalarField.zeros(grid))
