"""Uniform grids on the flat torus T^d and closed 1-form representatives.

The torus has unit periods on every axis.  Grid points are the lattice
k / n_per_axis, indexed in C order.  Displacements between grid points are
always reduced to the minimal representative per axis, with the half-period
tie broken toward the positive sign so that matrices built from them are
reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, InputError


@dataclass(frozen=True)
class TorusGrid:
    """Uniform discretization of T^dim with a time step and a speed cap."""

    dim: int
    n_per_axis: int
    tau: float
    v_max: float

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ConfigError(f"dim must be 1 or 2, got {self.dim}")
        if self.n_per_axis < 1:
            raise ConfigError(f"n_per_axis must be positive, got {self.n_per_axis}")
        if self.tau <= 0:
            raise ConfigError(f"tau must be positive, got {self.tau}")
        if self.v_max * self.tau < self.spacing - 1e-12:
            raise ConfigError(
                "no motion possible: v_max*tau = "
                f"{self.v_max * self.tau} < spacing = {self.spacing}"
            )

    @property
    def spacing(self) -> float:
        return 1.0 / self.n_per_axis

    @property
    def n_states(self) -> int:
        return self.n_per_axis**self.dim

    @property
    def shape(self) -> tuple:
        return (self.n_per_axis,) * self.dim

    def coords(self) -> np.ndarray:
        """All grid points as an (n_states, dim) array, C-order indexing."""
        axes = [np.arange(self.n_per_axis) * self.spacing] * self.dim
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def index_of(self, point) -> int:
        """Flat index of a grid point given by coordinates."""
        point = np.atleast_1d(np.asarray(point, dtype=float))
        if point.shape != (self.dim,):
            raise InputError(f"point has shape {point.shape}, expected ({self.dim},)")
        idx = np.rint(point * self.n_per_axis).astype(int) % self.n_per_axis
        if not np.allclose(idx * self.spacing, point % 1.0, atol=1e-9):
            raise InputError(f"{point} is not a grid point of {self}")
        return int(np.ravel_multi_index(tuple(idx), self.shape))

    def multi_index(self, flat: int) -> np.ndarray:
        return np.array(np.unravel_index(flat, self.shape))

    def point(self, flat: int) -> np.ndarray:
        return self.multi_index(flat) * self.spacing

    def min_displacement_idx(self, kx: np.ndarray, ky: np.ndarray) -> np.ndarray:
        """Signed minimal per-axis index offset from y to x (tie -> positive)."""
        n = self.n_per_axis
        k = (np.asarray(kx) - np.asarray(ky)) % n
        k = np.where(2 * k > n, k - n, k)
        return k

    def min_displacement(self, x, y) -> np.ndarray:
        """Minimal signed displacement vector from point y to point x."""
        kx = self.multi_index(self.index_of(x))
        ky = self.multi_index(self.index_of(y))
        return self.min_displacement_idx(kx, ky) * self.spacing

    def torus_distance(self, x, y) -> float:
        """Flat-metric distance between two grid points."""
        return float(np.linalg.norm(self.min_displacement(x, y)))

    def feasible_offsets(self) -> np.ndarray:
        """Integer offset vectors reachable in one step, as an (m, dim) array.

        An offset is feasible if |offset|*spacing <= v_max*tau on every axis.
        Offsets are the minimal representatives, half period counted once
        with the positive sign.
        """
        n = self.n_per_axis
        lo = -((n - 1) // 2)
        hi = n // 2
        cap = self.v_max * self.tau + 1e-12
        axis = [k for k in range(lo, hi + 1) if abs(k) * self.spacing <= cap]
        mesh = np.meshgrid(*([np.array(axis)] * self.dim), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)


def build_grid(dim: int, n_per_axis: int, tau: float, v_max: float) -> TorusGrid:
    """Construct a TorusGrid, validating feasibility of at least one step."""
    return TorusGrid(dim=dim, n_per_axis=n_per_axis, tau=tau, v_max=v_max)


class AnalyticExact:
    """Exact part f of a 1-form given in closed form (with its gradient)."""

    def __init__(self, name: str, fn: Callable, grad: Callable):
        self.name = name
        self.fn = fn
        self.grad_fn = grad

    def values_on(self, grid: TorusGrid) -> np.ndarray:
        q = grid.coords()
        return np.array([float(self.fn(qi)) for qi in q])

    def gradient_on(self, grid: TorusGrid) -> np.ndarray:
        q = grid.coords()
        return np.array([np.atleast_1d(self.grad_fn(qi)) for qi in q], dtype=float)

    def describe(self):
        return {"kind": "analytic", "name": self.name}


class SampledExact:
    """Exact part known only through its grid samples."""

    def __init__(self, values: np.ndarray):
        self.values = np.asarray(values, dtype=float)

    def values_on(self, grid: TorusGrid) -> np.ndarray:
        if self.values.size != grid.n_states:
            raise InputError(
                f"sampled exact part has {self.values.size} values, "
                f"grid has {grid.n_states} states"
            )
        return self.values

    def gradient_on(self, grid: TorusGrid) -> np.ndarray:
        # centered differences with wrap, per axis
        f = self.values_on(grid).reshape(grid.shape)
        out = np.empty((grid.n_states, grid.dim))
        for ax in range(grid.dim):
            d = (np.roll(f, -1, axis=ax) - np.roll(f, 1, axis=ax)) / (2 * grid.spacing)
            out[:, ax] = d.ravel()
        return out

    def describe(self):
        return {"kind": "sampled", "checksum": float(np.sum(self.values))}


# Named exact parts usable from config files.
EXACT_PARTS = {
    "zero": AnalyticExact("zero", lambda q: 0.0, lambda q: np.zeros_like(q)),
    "sin_axis0": AnalyticExact(
        "sin_axis0",
        lambda q: math.sin(2 * math.pi * q[0]),
        lambda q: np.array(
            [2 * math.pi * math.cos(2 * math.pi * q[0])] + [0.0] * (len(q) - 1)
        ),
    ),
    "cos_axis0": AnalyticExact(
        "cos_axis0",
        lambda q: math.cos(2 * math.pi * q[0]),
        lambda q: np.array(
            [-2 * math.pi * math.sin(2 * math.pi * q[0])] + [0.0] * (len(q) - 1)
        ),
    ),
}


@dataclass(frozen=True)
class OneForm:
    """A closed 1-form c.dq + df on the torus.

    c are the cohomology-class coordinates (H^1(T^d, R) = R^d); the optional
    exact part df never changes any cohomological quantity and exists to let
    representative-independence be tested.
    """

    c: np.ndarray
    exact: Optional[object] = None  # AnalyticExact | SampledExact

    def __post_init__(self):
        object.__setattr__(self, "c", np.atleast_1d(np.asarray(self.c, dtype=float)))

    @property
    def dim(self) -> int:
        return self.c.shape[0]

    def exact_values(self, grid: TorusGrid) -> np.ndarray:
        if self.exact is None:
            return np.zeros(grid.n_states)
        return self.exact.values_on(grid)

    def eta_at(self, grid: TorusGrid) -> np.ndarray:
        """Pointwise value of the form, c + grad f, as (n_states, dim)."""
        eta = np.broadcast_to(self.c, (grid.n_states, grid.dim)).copy()
        if self.exact is not None:
            eta += self.exact.gradient_on(grid)
        return eta

    def pairing(self, grid: TorusGrid, y, x) -> float:
        """Integral of the form over the minimal straight segment y -> x.

        Exact for forms of the shape c.dq + df: the constant part pairs with
        the minimal displacement, the exact part telescopes.
        """
        if self.dim != grid.dim:
            raise InputError(f"form dim {self.dim} != grid dim {grid.dim}")
        disp = grid.min_displacement(x, y)
        val = float(np.dot(self.c, disp))
        if self.exact is not None:
            f = self.exact_values(grid)
            val += f[grid.index_of(x)] - f[grid.index_of(y)]
        return val

    def describe(self):
        return {
            "c": [float(v) for v in self.c],
            "exact": None if self.exact is None else self.exact.describe(),
        }


def form_pairing(form: OneForm, y, x, grid: TorusGrid) -> float:
    """Line-integral pairing of a closed form with the segment y -> x."""
    return form.pairing(grid, y, x)
