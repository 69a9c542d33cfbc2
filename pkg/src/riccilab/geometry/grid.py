"""Structured 2-D grids and the centered difference stencils every operator uses.

Axis 0 is the x (axial) coordinate, axis 1 is theta.  A periodic axis covers
[0, l) with spacing l/n; a truncated axis covers [-l/2, l/2] inclusive with
spacing l/(n-1).  All derivatives are second order: centered in the interior,
one-sided 3-point at truncated ends.  The same stencil is used wherever a
first derivative appears, so composed operators (d after d, div after grad)
inherit exact structural identities.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import cached_property

import numpy as np

PERIODIC = "periodic"
TRUNCATED = "truncated"


def _axis_coords(n: int, length: float, topology: str) -> np.ndarray:
    if topology == PERIODIC:
        return (length / n) * np.arange(n)
    h = length / (n - 1)
    return -0.5 * length + h * np.arange(n)


@dataclass(frozen=True)
class Grid2D:
    nx: int
    ny: int
    lx: float
    ly: float
    topology_x: str = PERIODIC
    topology_y: str = PERIODIC
    origin: tuple[int, int] | None = None

    def __post_init__(self):
        if self.nx < 8 or self.ny < 8:
            raise ValueError(f"need at least 8 nodes per axis, got {self.nx}x{self.ny}")
        if self.lx <= 0 or self.ly <= 0:
            raise ValueError("domain lengths must be positive")
        for topo in (self.topology_x, self.topology_y):
            if topo not in (PERIODIC, TRUNCATED):
                raise ValueError(f"unknown axis topology {topo!r}")
        if self.origin is None:
            ox = (self.nx - 1) // 2 if self.topology_x == TRUNCATED else 0
            oy = (self.ny - 1) // 2 if self.topology_y == TRUNCATED else 0
            object.__setattr__(self, "origin", (ox, oy))

    # ------------------------------------------------------------------ factories
    @staticmethod
    def torus(nx, ny, lx=2 * np.pi, ly=2 * np.pi) -> "Grid2D":
        return Grid2D(nx, ny, lx, ly, PERIODIC, PERIODIC)

    @staticmethod
    def cylinder(nx, ny, lx, ly=2 * np.pi) -> "Grid2D":
        """x truncated, theta periodic."""
        return Grid2D(nx, ny, lx, ly, TRUNCATED, PERIODIC)

    @staticmethod
    def plane(nx, ny, lx, ly) -> "Grid2D":
        return Grid2D(nx, ny, lx, ly, TRUNCATED, TRUNCATED)

    # ------------------------------------------------------------------ geometry
    @property
    def hx(self) -> float:
        return self.lx / self.nx if self.topology_x == PERIODIC else self.lx / (self.nx - 1)

    @property
    def hy(self) -> float:
        return self.ly / self.ny if self.topology_y == PERIODIC else self.ly / (self.ny - 1)

    @cached_property
    def x(self) -> np.ndarray:
        return _axis_coords(self.nx, self.lx, self.topology_x)

    @cached_property
    def theta(self) -> np.ndarray:
        return _axis_coords(self.ny, self.ly, self.topology_y)

    def mesh(self):
        return np.meshgrid(self.x, self.theta, indexing="ij")

    @cached_property
    def weights(self) -> np.ndarray:
        """Quadrature weights: uniform on periodic axes, trapezoid on truncated."""
        wx = np.full(self.nx, self.hx)
        wy = np.full(self.ny, self.hy)
        if self.topology_x == TRUNCATED:
            wx[0] *= 0.5
            wx[-1] *= 0.5
        if self.topology_y == TRUNCATED:
            wy[0] *= 0.5
            wy[-1] *= 0.5
        return np.outer(wx, wy)

    @cached_property
    def hash_hex(self) -> str:
        key = (
            f"{self.nx},{self.ny},{self.lx!r},{self.ly!r},"
            f"{self.topology_x},{self.topology_y},{self.origin}"
        )
        return hashlib.sha256(key.encode()).hexdigest()[:12]

    # ------------------------------------------------------------------ stencils
    def _diff(self, a: np.ndarray, axis: int, h: float, topology: str) -> np.ndarray:
        if topology == PERIODIC:
            return (np.roll(a, -1, axis) - np.roll(a, 1, axis)) / (2.0 * h)
        out = np.empty_like(a)
        lo = [slice(None)] * a.ndim

        def at(idx):
            s = lo.copy()
            s[axis] = idx
            return tuple(s)

        out[at(slice(1, -1))] = (a[at(slice(2, None))] - a[at(slice(0, -2))]) / (2.0 * h)
        out[at(0)] = (-3.0 * a[at(0)] + 4.0 * a[at(1)] - a[at(2)]) / (2.0 * h)
        out[at(-1)] = (3.0 * a[at(-1)] - 4.0 * a[at(-2)] + a[at(-3)]) / (2.0 * h)
        return out

    def diff_x(self, a: np.ndarray) -> np.ndarray:
        """d/dx along axis -2 of a 2-D (or stacked ...,nx,ny) array, or axis 0 of a 1-D
        x-profile."""
        axis = 0 if a.ndim == 1 else a.ndim - 2
        return self._diff(a, axis, self.hx, self.topology_x)

    def diff_t(self, a: np.ndarray) -> np.ndarray:
        """d/dtheta along the last axis."""
        return self._diff(a, a.ndim - 1, self.hy, self.topology_y)

    def diff(self, a: np.ndarray, axis_index: int) -> np.ndarray:
        return self.diff_x(a) if axis_index == 0 else self.diff_t(a)

    # ------------------------------------------------------------------ misc
    @cached_property
    def boundary_mask(self) -> np.ndarray:
        """True on nodes held fixed during flows (ends of truncated axes)."""
        m = np.zeros((self.nx, self.ny), dtype=bool)
        if self.topology_x == TRUNCATED:
            m[0, :] = True
            m[-1, :] = True
        if self.topology_y == TRUNCATED:
            m[:, 0] = True
            m[:, -1] = True
        return m

    def interior_mask(self, margin: int = 2) -> np.ndarray:
        """True away from truncated ends.  With margin 2 every composed stencil at a
        True node is fully centered, which is where second-order convergence is
        measured; one-sided closures at the ends are first order when composed."""
        m = np.ones((self.nx, self.ny), dtype=bool)
        if self.topology_x == TRUNCATED:
            m[:margin, :] = False
            m[-margin:, :] = False
        if self.topology_y == TRUNCATED:
            m[:, :margin] = False
            m[:, -margin:] = False
        return m

    def buffer_mask(self, fraction: float = 0.15) -> np.ndarray:
        """Nodes within `fraction` of the domain length of a truncated end."""
        m = np.zeros((self.nx, self.ny), dtype=bool)
        if self.topology_x == TRUNCATED:
            depth = fraction * self.lx
            xs = self.x
            m[(xs - xs[0]) < depth, :] = True
            m[(xs[-1] - xs) < depth, :] = True
        if self.topology_y == TRUNCATED:
            depth = fraction * self.ly
            ts = self.theta
            m[:, (ts - ts[0]) < depth] = True
            m[:, (ts[-1] - ts) < depth] = True
        return m

    def refined(self, factor: int) -> "Grid2D":
        """Same domain at `factor` times the resolution (used by oracles)."""
        nx = self.nx * factor if self.topology_x == PERIODIC else (self.nx - 1) * factor + 1
        ny = self.ny * factor if self.topology_y == PERIODIC else (self.ny - 1) * factor + 1
        return Grid2D(nx, ny, self.lx, self.ly, self.topology_x, self.topology_y)
