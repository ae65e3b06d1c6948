"""Discrete weak KAM objects: critical values, calibrated semigroups,
Peierls barriers, Aubry/Mane sets, the quotient pseudo-metric, elementary
solutions and subsolution diagnostics.

The critical value is obtained as a minimum mean cycle of the one-step
action graph: at grid level the minimizing measure is an optimal cycle.
Calibrating the cost matrix by it makes every cycle mean nonnegative and
forces min_q h(q, q) = 0 exactly, which is what anchors the Aubry set.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InputError, NumericError
from .hamiltonians import Hamiltonian, symmetrize
from .minplus import (
    CostMatrix,
    build_cost,
    karp_min_mean_cycle,
    matrix_power,
    minplus_apply,
    minplus_eigenvalue_power,
    minplus_matmul_banded,
)
from .torus import OneForm, TorusGrid

DEFAULT_N_MAX = 2**14
DEFAULT_WINDOW = 64


def default_tol_zero(grid: TorusGrid) -> float:
    """Zero-set tolerance matched to the one-step truncation order."""
    return 10.0 * grid.spacing**2 / grid.tau


@dataclass(frozen=True)
class CriticalValue:
    alpha: float
    method: str
    residual: float
    tau: float
    grid: TorusGrid


def critical_value(C: CostMatrix, method: str = "karp") -> CriticalValue:
    """alpha = -(min mean cycle)/tau.

    method="power" runs min-plus value iteration as well and insists it
    agrees with Karp to 1e-9.
    """
    mean = karp_min_mean_cycle(C)
    alpha = -mean / C.tau
    if method == "karp":
        return CriticalValue(alpha, "karp", 0.0, C.tau, C.grid)
    if method == "power":
        lam, spread, _ = minplus_eigenvalue_power(C)
        alpha_pow = -lam / C.tau
        if abs(alpha_pow - alpha) > 1e-9:
            raise NumericError(
                f"power iteration alpha {alpha_pow} disagrees with karp {alpha}"
            )
        return CriticalValue(alpha_pow, "power", spread, C.tau, C.grid)
    raise InputError(f"unknown method {method!r}")


@dataclass
class BarrierMatrix:
    """Discrete Peierls barrier h(x, y) for all grid pairs."""

    h: np.ndarray
    alpha: float
    n_max: int
    window: int
    grid: TorusGrid
    spec_desc: dict = field(default_factory=dict)
    form_desc: dict = field(default_factory=dict)


def peierls_barrier(
    C: CostMatrix,
    alpha: float,
    n_max: int = DEFAULT_N_MAX,
    window: int = DEFAULT_WINDOW,
) -> BarrierMatrix:
    """Elementwise min of calibrated powers over a trailing window.

    Calibrated powers can cycle with period > 1, so the plain limit need not
    exist entrywise; the min over [n_max - window, n_max] is a faithful
    liminf surrogate at fixed grid.
    """
    if window >= n_max:
        raise InputError(f"window {window} must be < n_max {n_max}")
    Chat = C.shifted(C.tau * alpha)
    h = matrix_power(Chat.entries, n_max - window)
    X = h.copy()
    for _ in range(window):
        X = minplus_matmul_banded(X, Chat)
        np.minimum(h, X, out=h)
    return BarrierMatrix(
        h=h,
        alpha=alpha,
        n_max=n_max,
        window=window,
        grid=C.grid,
        spec_desc=C.spec_desc,
        form_desc=C.form_desc,
    )


# ---------------------------------------------------------------------------
# Aubry/Mane sets, pseudo-metric, quotient classes
# ---------------------------------------------------------------------------


def aubry_set(bm: BarrierMatrix, tol_zero: float):
    """B(q) = h(q, q); the Aubry indices are its near-zero set.

    Karp calibration makes min B = 0 up to roundoff, so the set is nonempty
    by construction; an empty result is an internal calibration bug.
    """
    B = np.diagonal(bm.h).copy()
    aubry = np.flatnonzero(B <= tol_zero)
    if aubry.size == 0:
        raise AssertionError(
            f"empty Aubry set: min B = {B.min()} > tol {tol_zero} (calibration bug)"
        )
    return B, aubry


def second_barrier(bm: BarrierMatrix, aubry_indices: np.ndarray, tol_zero: float):
    """b(q) = min over Aubry pairs (xi, zeta) of h(xi,q) + h(q,zeta) - h(xi,zeta)."""
    if len(aubry_indices) == 0:
        raise InputError("Aubry set must be nonempty")
    h = bm.h
    A = np.asarray(aubry_indices)
    ha = h[A, :]         # h(xi, q)
    hb = h[:, A]         # h(q, zeta)
    hAA = h[np.ix_(A, A)]
    b = np.full(h.shape[0], np.inf)
    for i in range(len(A)):
        # min over zeta of h(q, zeta) - h(xi, zeta), then add h(xi, q)
        inner = np.min(hb - hAA[i][None, :], axis=1)
        np.minimum(b, ha[i] + inner, out=b)
    mane = np.flatnonzero(b <= tol_zero)
    return b, mane


def rho_quotient(bm: BarrierMatrix, aubry_indices: np.ndarray, tol_zero: float):
    """Symmetrized barrier on Aubry pairs and its near-zero classes.

    Classes are connected components of the graph {rho <= tol_zero}; the
    class representative is the lowest index, the reported class distance is
    the min-pair rho.
    """
    A = np.asarray(aubry_indices)
    hAA = bm.h[np.ix_(A, A)]
    rho = hAA + hAA.T
    n = len(A)
    # connected components by BFS over the thresholded graph
    label = -np.ones(n, dtype=int)
    n_classes = 0
    for s in range(n):
        if label[s] >= 0:
            continue
        stack = [s]
        label[s] = n_classes
        while stack:
            v = stack.pop()
            nbrs = np.flatnonzero((rho[v] <= tol_zero) & (label < 0))
            label[nbrs] = n_classes
            stack.extend(nbrs.tolist())
        n_classes += 1
    classes = [A[np.flatnonzero(label == k)] for k in range(n_classes)]
    return rho, classes


def class_distance_matrix(rho: np.ndarray, aubry_indices, classes) -> np.ndarray:
    """Min-pair rho between quotient classes (0 on the diagonal)."""
    A = list(np.asarray(aubry_indices))
    pos = {int(a): i for i, a in enumerate(A)}
    k = len(classes)
    out = np.zeros((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            ii = [pos[int(a)] for a in classes[i]]
            jj = [pos[int(a)] for a in classes[j]]
            out[i, j] = out[j, i] = float(np.min(rho[np.ix_(ii, jj)]))
    return out


@dataclass
class AubryData:
    B: np.ndarray
    b: np.ndarray
    aubry_indices: np.ndarray
    mane_indices: np.ndarray
    rho: np.ndarray
    classes: list
    tol_zero: float


def aubry_data(bm: BarrierMatrix, tol_zero: Optional[float] = None) -> AubryData:
    """Assemble every barrier-derived set in one pass."""
    if tol_zero is None:
        tol_zero = default_tol_zero(bm.grid)
    B, aubry = aubry_set(bm, tol_zero)
    b, mane = second_barrier(bm, aubry, tol_zero)
    rho, classes = rho_quotient(bm, aubry, tol_zero)
    return AubryData(
        B=B,
        b=b,
        aubry_indices=aubry,
        mane_indices=mane,
        rho=rho,
        classes=classes,
        tol_zero=tol_zero,
    )


# ---------------------------------------------------------------------------
# systems: a (grid, spec, form) bundle with cached derived objects
# ---------------------------------------------------------------------------


class System:
    """Caches the cost matrix, critical value and barrier for one problem."""

    def __init__(self, grid: TorusGrid, spec: Hamiltonian, form: OneForm):
        self.grid = grid
        self.spec = spec
        self.form = form
        self._cost = None
        self._critical = None
        self._barriers = {}
        self._symmetrized = None

    @property
    def cost(self) -> CostMatrix:
        if self._cost is None:
            self._cost = build_cost(self.grid, self.spec, self.form)
        return self._cost

    @property
    def critical(self) -> CriticalValue:
        if self._critical is None:
            self._critical = critical_value(self.cost, method="karp")
        return self._critical

    @property
    def alpha(self) -> float:
        return self.critical.alpha

    @property
    def calibrated(self) -> CostMatrix:
        return self.cost.shifted(self.cost.tau * self.alpha)

    def barrier(
        self, n_max: int = DEFAULT_N_MAX, window: int = DEFAULT_WINDOW
    ) -> BarrierMatrix:
        key = (n_max, window)
        if key not in self._barriers:
            self._barriers[key] = peierls_barrier(self.cost, self.alpha, n_max, window)
        return self._barriers[key]

    def symmetrized(self) -> "System":
        if self._symmetrized is None:
            self._symmetrized = System(
                self.grid, symmetrize(self.spec, self.form), self.form
            )
        return self._symmetrized


def backward_semigroup(system: System, u: np.ndarray, steps: int) -> np.ndarray:
    """n calibrated backward steps: u <- min-conv with cost, plus tau*alpha."""
    Chat = system.calibrated
    u = np.asarray(u, dtype=float)
    for _ in range(steps):
        u = minplus_apply(Chat, u)
    return u


def forward_semigroup(
    system: System, u: np.ndarray, steps: int, route: str = "direct"
) -> np.ndarray:
    """n calibrated forward steps.

    route="direct": out(q) = max_y u(y) - C(q, y) - tau*alpha per step.
    route="symmetrized": -T^-[momentum-reflected system](-u); agrees with the
    direct route at roundoff level (the discrete form of time reversal).
    """
    u = np.asarray(u, dtype=float)
    if route == "symmetrized":
        return -backward_semigroup(system.symmetrized(), -u, steps)
    if route != "direct":
        raise InputError(f"unknown route {route!r}")
    Chat = system.calibrated
    for _ in range(steps):
        u = -minplus_apply_transpose(Chat, -u)
    return u


def minplus_apply_transpose(C: CostMatrix, u: np.ndarray) -> np.ndarray:
    """out(q) = min_y u(y) + C(q, y) (min-plus product with the transpose)."""
    u = np.asarray(u, dtype=float)
    if C.offset_costs is not None:
        grid = C.grid
        u_grid = u.reshape(grid.shape)
        out = np.full(grid.shape, np.inf)
        axes = tuple(range(grid.dim))
        for off, cost in zip(C.offsets, C.offset_costs):
            # candidate at q: u(q + off) + C(q, q + off)
            cand = np.roll(u_grid, shift=tuple(-off), axis=axes) + cost.reshape(
                grid.shape
            )
            np.minimum(out, cand, out=out)
        return out.ravel()
    return np.min(u[None, :] + C.entries, axis=1)


# ---------------------------------------------------------------------------
# elementary solutions and subsolution checks
# ---------------------------------------------------------------------------


def elementary_solutions(
    bm: BarrierMatrix, xi: int, tol_zero: Optional[float] = None
):
    """u_-(q) = h(xi, q) and u_+(q) = -h(q, xi) for an Aubry point xi.

    The pair is conjugate through xi by construction: both vanish there and
    u_- >= u_+ everywhere by the triangle inequality.
    """
    if tol_zero is None:
        tol_zero = default_tol_zero(bm.grid)
    if bm.h[xi, xi] > tol_zero:
        raise InputError(f"state {xi} is not in the Aubry set (B = {bm.h[xi, xi]})")
    return bm.h[xi, :].copy(), -bm.h[:, xi].copy()


def gradient(u: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """Centered differences with wrap; returns (n_states, dim)."""
    f = np.asarray(u, dtype=float).reshape(grid.shape)
    out = np.empty((grid.n_states, grid.dim))
    for ax in range(grid.dim):
        d = (np.roll(f, -1, axis=ax) - np.roll(f, 1, axis=ax)) / (2 * grid.spacing)
        out[:, ax] = d.ravel()
    return out


GRADIENT_SCHEME = "centered-2nd-order-wrap"


@dataclass(frozen=True)
class SubsolutionReport:
    max_violation: float
    violating_points: tuple
    gradient_scheme: str
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_violation <= self.tol


def subsolution_check(
    spec: Hamiltonian,
    form: OneForm,
    alpha: float,
    u: np.ndarray,
    grid: TorusGrid,
    tol: float,
) -> SubsolutionReport:
    """max over the grid of H(q, eta_q + Du(q)) - alpha."""
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise InputError("u must be finite for a subsolution check")
    eta = form.eta_at(grid)
    du = gradient(u, grid)
    coords = grid.coords()
    viol = np.array(
        [spec.value(coords[i], eta[i] + du[i]) - alpha for i in range(grid.n_states)]
    )
    worst = float(np.max(viol))
    bad = tuple(int(i) for i in np.flatnonzero(viol > tol))
    return SubsolutionReport(worst, bad, GRADIENT_SCHEME, tol)


def max_second_difference(u: np.ndarray, grid: TorusGrid) -> float:
    """Largest |second difference| / spacing^2; a C^{1,1} proxy, not a proof."""
    f = np.asarray(u, dtype=float).reshape(grid.shape)
    worst = 0.0
    for ax in range(grid.dim):
        d2 = (np.roll(f, -1, axis=ax) - 2 * f + np.roll(f, 1, axis=ax)) / grid.spacing**2
        worst = max(worst, float(np.max(np.abs(d2))))
    return worst


def common_subsolution(
    sys1: System,
    sys2: System,
    s_steps: int = 2,
    r_steps: int = 2,
    seed: Optional[int] = None,
    tol: float = 0.0,
    n_max: int = DEFAULT_N_MAX,
    window: int = DEFAULT_WINDOW,
):
    """Backward-smooth an elementary forward solution under both systems.

    u = T^-[sys1]^s T^-[sys2]^r u_+, with u_+ the elementary forward
    solution of sys1 at an Aubry seed.  Small step counts keep the smoothing
    inside the short-time regime.  Returns (u, report1, report2).
    """
    bm = sys1.barrier(n_max=n_max, window=window)
    if seed is None:
        _, aubry = aubry_set(bm, default_tol_zero(sys1.grid))
        seed = int(aubry[0])
    _, u_plus = elementary_solutions(bm, seed)
    u = backward_semigroup(sys2, u_plus, r_steps)
    u = backward_semigroup(sys1, u, s_steps)
    rep1 = subsolution_check(sys1.spec, sys1.form, sys1.alpha, u, sys1.grid, tol)
    rep2 = subsolution_check(sys2.spec, sys2.form, sys2.alpha, u, sys2.grid, tol)
    return u, rep1, rep2
