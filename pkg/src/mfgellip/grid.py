"""Uniform node-centred grid on T^d x [0, T] and its finite-difference stencils.

Field arrays are stored time-major with shape ``(nt + 1, nx[, nx])`` so that a
C-order ``ravel`` is the unknown ordering used by the solver: time level
first, then lexicographic space index.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np

Stencil = list[tuple[int, tuple[int, ...], float]]
"""(time offset, space offsets, weight) triples."""


@dataclass(frozen=True)
class GridSpec:
    d: int
    nx: int
    nt: int
    T: float = 1.0

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError("d must be 1 or 2")
        if self.nx < 8:
            raise ValueError(f"nx must be at least 8 (got {self.nx})")
        if self.nt < 4:
            raise ValueError(f"nt must be at least 4 (got {self.nt})")
        if self.T <= 0:
            raise ValueError("T must be positive")

    @property
    def dx(self) -> float:
        return 1.0 / self.nx

    @property
    def dt(self) -> float:
        return self.T / self.nt

    @property
    def space_shape(self) -> tuple[int, ...]:
        return (self.nx,) * self.d

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.nt + 1,) + self.space_shape

    @property
    def n_space(self) -> int:
        return self.nx**self.d

    @property
    def n_nodes(self) -> int:
        return self.n_space * (self.nt + 1)

    def space_points(self) -> np.ndarray:
        """Node coordinates with shape ``space_shape + (d,)``."""
        axes = np.meshgrid(*([np.arange(self.nx) * self.dx] * self.d), indexing="ij")
        return np.stack(axes, axis=-1)

    def times(self) -> np.ndarray:
        return np.arange(self.nt + 1) * self.dt

    def refined(self, factor: int = 2) -> "GridSpec":
        return GridSpec(self.d, self.nx * factor, self.nt * factor, self.T)

    def coarsened(self, factor: int = 2) -> "GridSpec":
        return GridSpec(self.d, self.nx // factor, self.nt // factor, self.T)


@dataclass
class SpaceTimeField:
    values: np.ndarray
    grid: GridSpec

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ValueError(f"field shape {self.values.shape} != grid shape {self.grid.shape}")

    def flat(self) -> np.ndarray:
        return self.values.ravel()

    def slice(self, j: int) -> np.ndarray:
        return self.values[j]


# ---------------------------------------------------------------------------
# index map
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IndexMap:
    """Bijection between ``(i..., j)`` node coordinates and unknown positions.

    ``k = j * nx**d + ravel_multi_index(i)``; spatial indices wrap modulo nx.
    """

    grid: GridSpec

    def to_flat(self, i, j):
        i = np.atleast_1d(np.asarray(i)) % self.grid.nx
        space = np.ravel_multi_index(tuple(i), self.grid.space_shape)
        return int(j) * self.grid.n_space + int(space)

    def from_flat(self, k: int) -> tuple[tuple[int, ...], int]:
        j, space = divmod(int(k), self.grid.n_space)
        i = np.unravel_index(space, self.grid.space_shape)
        return tuple(int(v) for v in i), j

    def node_indices(self) -> np.ndarray:
        return np.arange(self.grid.n_nodes).reshape(self.grid.shape)

    def shifted(self, j0: int, j1: int, dt_off: int, dx_off: tuple[int, ...]) -> np.ndarray:
        """Flat indices of node (i + dx_off, j + dt_off) for rows j0 <= j < j1."""
        idx = self.node_indices()[j0 + dt_off : j1 + dt_off]
        for axis, off in enumerate(dx_off):
            if off:
                idx = np.roll(idx, -off, axis=axis + 1)
        return idx


def index_map(grid: GridSpec) -> IndexMap:
    return IndexMap(grid)


# ---------------------------------------------------------------------------
# stencils
# ---------------------------------------------------------------------------


def _unit(d: int, k: int, sign: int = 1) -> tuple[int, ...]:
    return tuple(sign if a == k else 0 for a in range(d))


def _zero(d: int) -> tuple[int, ...]:
    return (0,) * d


def gradient_stencils(grid: GridSpec, where: str) -> list[Stencil]:
    """Stencils for (p_1..p_d, s) at interior times or at ``"start"``/``"end"``."""
    d, h, k = grid.d, grid.dx, grid.dt
    out: list[Stencil] = []
    for a in range(d):
        out.append([(0, _unit(d, a, 1), 0.5 / h), (0, _unit(d, a, -1), -0.5 / h)])
    z = _zero(d)
    if where == "interior":
        out.append([(1, z, 0.5 / k), (-1, z, -0.5 / k)])
    elif where == "start":
        out.append([(0, z, -1.5 / k), (1, z, 2.0 / k), (2, z, -0.5 / k)])
    elif where == "end":
        out.append([(0, z, 1.5 / k), (-1, z, -2.0 / k), (-2, z, 0.5 / k)])
    else:
        raise ValueError(where)
    return out


def hessian_stencils(grid: GridSpec) -> dict[tuple[int, int], Stencil]:
    """Stencils for the upper triangle of D^2u in (x_1..x_d, t) at interior times."""
    d, h, k = grid.d, grid.dx, grid.dt
    z = _zero(d)
    out: dict[tuple[int, int], Stencil] = {}
    for a in range(d):
        e = _unit(d, a)
        out[(a, a)] = [(0, e, 1 / h**2), (0, z, -2 / h**2), (0, _unit(d, a, -1), 1 / h**2)]
        for b in range(a + 1, d):
            w = 0.25 / h**2
            out[(a, b)] = [
                (0, _add(e, _unit(d, b)), w),
                (0, _add(e, _unit(d, b, -1)), -w),
                (0, _add(_unit(d, a, -1), _unit(d, b)), -w),
                (0, _add(_unit(d, a, -1), _unit(d, b, -1)), w),
            ]
        w = 0.25 / (h * k)
        out[(a, d)] = [
            (1, e, w),
            (-1, e, -w),
            (1, _unit(d, a, -1), -w),
            (-1, _unit(d, a, -1), w),
        ]
    out[(d, d)] = [(1, z, 1 / k**2), (0, z, -2 / k**2), (-1, z, 1 / k**2)]
    return out


def _add(a, b):
    return tuple(x + y for x, y in zip(a, b))


def _apply(values: np.ndarray, stencil: Stencil, j0: int, j1: int) -> np.ndarray:
    out = 0.0
    for ot, ox, wgt in stencil:
        block = values[j0 + ot : j1 + ot]
        for axis, off in enumerate(ox):
            if off:
                block = np.roll(block, -off, axis=axis + 1)
        out = out + wgt * block
    return out


def gradient(values: np.ndarray, grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    """Discrete (D_x u, u_t) at every node: p has a trailing axis of length d."""
    nt = grid.nt
    p = np.empty(grid.shape + (grid.d,))
    s = np.empty(grid.shape)
    for j0, j1, where in ((0, 1, "start"), (1, nt, "interior"), (nt, nt + 1, "end")):
        st = gradient_stencils(grid, where)
        for a in range(grid.d):
            p[j0:j1, ..., a] = _apply(values, st[a], j0, j1)
        s[j0:j1] = _apply(values, st[grid.d], j0, j1)
    return p, s


def hessian(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Discrete space-time Hessian at interior time levels 1..nt-1."""
    n = grid.d + 1
    out = np.empty((grid.nt - 1,) + grid.space_shape + (n, n))
    for (a, b), st in hessian_stencils(grid).items():
        val = _apply(values, st, 1, grid.nt)
        out[..., a, b] = val
        out[..., b, a] = val
    return out


def gradient_stencil(field: SpaceTimeField, node) -> tuple[np.ndarray, float]:
    """(p, s) at a single node ``(i..., j)``."""
    *i, j = node
    p, s = gradient(field.values, field.grid)
    i = tuple(v % field.grid.nx for v in i)
    return p[(j,) + i], float(s[(j,) + i])


def hessian_stencil(field: SpaceTimeField, node) -> np.ndarray:
    *i, j = node
    if not 1 <= j <= field.grid.nt - 1:
        raise ValueError("Hessian stencil needs an interior time level")
    i = tuple(v % field.grid.nx for v in i)
    return hessian(field.values, field.grid)[(j - 1,) + i]


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------


def integrate(values, grid: GridSpec, region: str = "cylinder") -> float:
    """Trapezoidal in t, rectangle (spectrally exact for periodic data) in x.

    ``region`` is ``"cylinder"`` for a full space-time array or ``"slice"``
    for a single spatial array.
    """
    values = np.asarray(values, dtype=float)
    cell = grid.dx**grid.d
    if region == "slice":
        return float(values.sum() * cell)
    if region != "cylinder":
        raise ValueError(region)
    per_level = values.reshape(values.shape[0], -1).sum(axis=1) * cell
    w = np.full(per_level.shape, grid.dt)
    w[0] = w[-1] = 0.5 * grid.dt
    return float(w @ per_level)


def slice_integrals(values, grid: GridSpec) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    return values.reshape(values.shape[0], -1).sum(axis=1) * grid.dx**grid.d


# ---------------------------------------------------------------------------
# CSV dump
# ---------------------------------------------------------------------------


def _coord_names(d: int) -> list[str]:
    return ["x"] if d == 1 else [f"x{a + 1}" for a in range(d)]


def write_fields_csv(path, grid: GridSpec, **fields: np.ndarray) -> None:
    """Columns ``x..., t, <field names>``; rows in unknown order."""
    pts = grid.space_points().reshape(-1, grid.d)
    times = grid.times()
    names = list(fields)
    cols = [np.asarray(fields[n], dtype=float).reshape(grid.nt + 1, -1) for n in names]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(_coord_names(grid.d) + ["t"] + names)
        for j, t in enumerate(times):
            for k, x in enumerate(pts):
                w.writerow([repr(float(v)) for v in x] + [repr(float(t))] + [repr(float(c[j, k])) for c in cols])


def read_fields_csv(path, grid: GridSpec) -> dict[str, np.ndarray]:
    """Inverse of :func:`write_fields_csv`; validates the row layout against ``grid``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    coords = _coord_names(grid.d) + ["t"]
    if header[: len(coords)] != coords:
        raise ValueError(f"unexpected CSV header {header[:len(coords)]}, expected {coords}")
    if len(body) != grid.n_nodes:
        raise ValueError(f"CSV has {len(body)} rows, grid needs {grid.n_nodes}")
    data = np.array(body, dtype=float)
    pts = np.tile(grid.space_points().reshape(-1, grid.d), (grid.nt + 1, 1))
    tt = np.repeat(grid.times(), grid.n_space)
    if not (np.allclose(data[:, : grid.d], pts, atol=1e-12) and np.allclose(data[:, grid.d], tt, atol=1e-12)):
        raise ValueError("CSV node coordinates do not match the grid")
    return {n: data[:, len(coords) + a].reshape(grid.shape) for a, n in enumerate(header[len(coords):])}


def iter_nodes(grid: GridSpec) -> Iterator[tuple[tuple[int, ...], int]]:
    m = IndexMap(grid)
    for k in range(grid.n_nodes):
        yield m.from_flat(k)
