"""Built-in Hamiltonians, pairs and grids used by tests and the CLI."""

from __future__ import annotations

import numpy as np

from .errors import ConfigError
from .hamiltonians import Mechanical, PPoly, Separable, free, pendulum
from .torus import build_grid


def pendulum_axis(weight: float = 1.0) -> Mechanical:
    """weight * (p^2/2 + cos(2 pi q)) as a 1D separable building block."""
    return Mechanical([(1.0, [1])], dim=1).scaled(weight)


def sep3_pair():
    """Commuting pair on T^2: H1 = f + g, H2 = 2f + g with
    f(q1, p1) = p1^2/2 + cos(2 pi q1) and g(p2) = p2^2/2."""
    h1 = Separable([pendulum_axis(1.0), free(1)])
    h2 = Separable([pendulum_axis(2.0), free(1)])
    return h1, h2


def nc_pair():
    """Non-commuting control on T^2: cosine potential on different axes."""
    h1 = Mechanical([(1.0, [1, 0])], dim=2)
    h2 = Mechanical([(1.0, [0, 1])], dim=2)
    return h1, h2


def double_well() -> Mechanical:
    """p^2/2 + cos(4 pi q): two potential maxima at q = 0 and q = 1/2."""
    return Mechanical([(1.0, [2])], dim=1)


def quartic() -> PPoly:
    """p^4/4, the simplest non-quadratic momentum-only Hamiltonian."""
    return PPoly({4: 0.25}, dim=1)


def grid_g2():
    return build_grid(1, 2, 0.5, 1.0)


def grid_g8():
    return build_grid(1, 8, 0.25, 2.0)


SPECS = {
    "free1": lambda: free(1),
    "free2": lambda: free(2),
    "pend": pendulum,
    "double_well": double_well,
    "quartic": quartic,
    "sep3_h1": lambda: sep3_pair()[0],
    "sep3_h2": lambda: sep3_pair()[1],
    "nc_h1": lambda: nc_pair()[0],
    "nc_h2": lambda: nc_pair()[1],
}

PAIRS = {
    "free_free": lambda: (free(1), free(1)),
    "sep3": sep3_pair,
    "nc": nc_pair,
    "p_only": lambda: (free(1), quartic()),
}


def get_spec(name: str):
    try:
        return SPECS[name]()
    except KeyError:
        raise ConfigError(f"unknown Hamiltonian fixture {name!r}") from None


def get_pair(name: str):
    try:
        return PAIRS[name]()
    except KeyError:
        raise ConfigError(f"unknown pair fixture {name!r}") from None


def random_trig_field(dim: int, seed: int, n_modes: int = 2, scale: float = 1.0):
    """A smooth random function on T^dim, reproducible from the seed.

    Returns a callable usable on (n, dim) coordinate arrays, so the same
    continuum function can be sampled at several resolutions.
    """
    rng = np.random.default_rng(seed)
    modes = []
    rng_vals = []
    if dim == 1:
        mvecs = [np.array([m]) for m in range(1, n_modes + 1)]
    else:
        mvecs = [
            np.array([m1, m2])
            for m1 in range(-n_modes, n_modes + 1)
            for m2 in range(0, n_modes + 1)
            if (m1, m2) != (0, 0) and (m2 > 0 or m1 > 0)
        ]
    for m in mvecs:
        a, b = rng.normal(size=2) / np.sum(m * m.astype(float))
        modes.append(m)
        rng_vals.append((a, b))

    def field(qs: np.ndarray) -> np.ndarray:
        qs = np.atleast_2d(np.asarray(qs, dtype=float))
        out = np.zeros(len(qs))
        for m, (a, b) in zip(modes, rng_vals):
            phase = 2 * np.pi * (qs @ m)
            out += a * np.cos(phase) + b * np.sin(phase)
        return scale * out

    return field
