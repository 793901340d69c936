"""Uniform cell-centred grids, sampled scalar fields and finite differences.

Arrays are indexed ``[iy, ix]``.  Cell ``(iy, ix)`` has centre
``origin + ((ix + 1/2) h, (iy + 1/2) h)`` in the complex plane.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

# Centred first-derivative stencils keyed by order: (offsets, weights).
_STENCILS = {
    2: (np.array([-1, 1]), np.array([-0.5, 0.5])),
    4: (np.array([-2, -1, 1, 2]), np.array([1.0, -8.0, 8.0, -1.0]) / 12.0),
    6: (np.array([-3, -2, -1, 1, 2, 3]),
        np.array([-1.0, 9.0, -45.0, 45.0, -9.0, 1.0]) / 60.0),
}


@dataclass(frozen=True)
class Grid:
    """Uniform square-cell grid.

    Parameters
    ----------
    origin : complex
        Lower-left corner of cell ``(0, 0)``.
    spacing : float
        Cell side length ``h``.
    nx, ny : int
        Number of cells along x and y.
    """

    origin: complex
    spacing: float
    nx: int
    ny: int

    @classmethod
    def square(cls, half_width: float, n: int, center: complex = 0j) -> "Grid":
        h = 2.0 * half_width / n
        return cls(complex(center) - half_width * (1 + 1j), h, n, n)

    @property
    def shape(self):
        return (self.ny, self.nx)

    def centers(self) -> np.ndarray:
        h = self.spacing
        x = self.origin.real + (np.arange(self.nx) + 0.5) * h
        y = self.origin.imag + (np.arange(self.ny) + 0.5) * h
        return x[None, :] + 1j * y[:, None]

    def to_dict(self) -> dict:
        return {
            "origin": [self.origin.real, self.origin.imag],
            "spacing": self.spacing,
            "nx": self.nx,
            "ny": self.ny,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Grid":
        return cls(complex(*d["origin"]), float(d["spacing"]), int(d["nx"]), int(d["ny"]))

    def subgrid(self, stride: int) -> "Grid":
        """Grid whose cells are ``stride x stride`` blocks of this one."""
        return Grid(self.origin, self.spacing * stride, self.nx // stride, self.ny // stride)


@dataclass(frozen=True)
class ScalarField:
    """Complex samples on a grid, tagged with the chart they live in."""

    values: np.ndarray
    grid: Grid
    chart: str = "z"
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.shape != self.grid.shape:
            raise ValueError(f"values shape {v.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains non-finite samples")

    def to_dict(self) -> dict:
        v = np.asarray(self.values, dtype=complex).ravel()
        d = {
            "chart": self.chart,
            "grid": self.grid.to_dict(),
            "data": np.stack([v.real, v.imag], axis=1).tolist(),
        }
        d.update(self.meta)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScalarField":
        grid = Grid.from_dict(d["grid"])
        arr = np.asarray(d["data"], dtype=float)
        values = (arr[:, 0] + 1j * arr[:, 1]).reshape(grid.shape)
        meta = {k: v for k, v in d.items() if k not in ("chart", "grid", "data")}
        return cls(values, grid, d["chart"], meta)

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    def write_csv(self, path) -> None:
        v = np.asarray(self.values, dtype=complex).ravel()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["cell", "re", "im"])
            for k, x in enumerate(v):
                w.writerow([k, repr(float(x.real)), repr(float(x.imag))])


def partial_x(f: np.ndarray, h: float, order: int = 2) -> np.ndarray:
    """Centred x-derivative; the outer ``order // 2`` columns are NaN."""
    return _partial(f, h, order, axis=1)


def partial_y(f: np.ndarray, h: float, order: int = 2) -> np.ndarray:
    return _partial(f, h, order, axis=0)


def _partial(f, h, order, axis):
    offsets, weights = _STENCILS[order]
    f = np.asarray(f)
    out = np.full(f.shape, np.nan, dtype=np.result_type(f, float))
    w = order // 2
    n = f.shape[axis]
    acc = 0
    for o, c in zip(offsets, weights):
        sl = [slice(None)] * f.ndim
        sl[axis] = slice(w + o, n - w + o)
        acc = acc + c * f[tuple(sl)]
    dst = [slice(None)] * f.ndim
    dst[axis] = slice(w, n - w)
    out[tuple(dst)] = acc / h
    return out


def d_z(f: np.ndarray, h: float, order: int = 2) -> np.ndarray:
    """Wirtinger derivative d/dz = (d/dx - i d/dy) / 2."""
    return 0.5 * (partial_x(f, h, order) - 1j * partial_y(f, h, order))


def d_zbar(f: np.ndarray, h: float, order: int = 2) -> np.ndarray:
    """Wirtinger derivative d/dzbar = (d/dx + i d/dy) / 2."""
    return 0.5 * (partial_x(f, h, order) + 1j * partial_y(f, h, order))


def interior_mask(shape, band: int) -> np.ndarray:
    m = np.zeros(shape, dtype=bool)
    m[band:shape[0] - band, band:shape[1] - band] = True
    return m
