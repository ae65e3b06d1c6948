"""Min-plus (tropical) linear algebra over the grid state space.

Costs live in the extended reals with +inf as the infeasible sentinel;
min-plus products are exact (only additions and mins), so results are
bit-identical regardless of evaluation order.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InputError, NumericError
from .hamiltonians import Hamiltonian
from .torus import OneForm, TorusGrid

INF = np.inf
_BLOCK_ROWS = 16


@dataclass
class CostMatrix:
    """One-step action costs between grid states.

    entries[y, x] is the cost of the step y -> x (+inf if infeasible).
    offsets/offset_costs describe the same data in banded form: for offset
    row j, offset_costs[j][y] = entries[y, y + offsets[j]] (indices wrapped).
    """

    entries: np.ndarray
    grid: TorusGrid
    tau: float
    offsets: np.ndarray = None
    offset_costs: np.ndarray = None
    spec_desc: dict = field(default_factory=dict)
    form_desc: dict = field(default_factory=dict)

    @property
    def n_states(self) -> int:
        return self.entries.shape[0]

    def shifted(self, s: float) -> "CostMatrix":
        """Uniformly shift every (finite) entry by s."""
        return CostMatrix(
            entries=self.entries + s,
            grid=self.grid,
            tau=self.tau,
            offsets=self.offsets,
            offset_costs=None if self.offset_costs is None else self.offset_costs + s,
            spec_desc=self.spec_desc,
            form_desc=self.form_desc,
        )


def build_cost(grid: TorusGrid, spec: Hamiltonian, form: OneForm) -> CostMatrix:
    """Assemble one-step costs tau*L(midpoint, step/tau) - <form, step>.

    The Lagrangian is evaluated at the midpoint of the minimal wrapped
    segment (second-order local truncation); the form pairing is the exact
    line integral of c.dq + df over the same segment.
    """
    if spec.dim != grid.dim:
        raise InputError(f"spec dim {spec.dim} != grid dim {grid.dim}")
    if form.dim != grid.dim:
        raise InputError(f"form dim {form.dim} != grid dim {grid.dim}")
    n = grid.n_states
    coords = grid.coords()
    fvals = form.exact_values(grid)
    offsets = grid.feasible_offsets()
    entries = np.full((n, n), INF)
    offset_costs = np.empty((len(offsets), n))
    idx_grid = np.arange(n).reshape(grid.shape)
    for j, off in enumerate(offsets):
        disp = off * grid.spacing
        v = disp / grid.tau
        mids = (coords + disp / 2.0) % 1.0
        lag = spec.lagrangian_many(mids, v)
        # target state of each source y under this offset
        tgt = np.roll(idx_grid, shift=tuple(-off), axis=tuple(range(grid.dim))).ravel()
        pair = np.dot(np.broadcast_to(disp, (n, grid.dim)), form.c)
        pair = pair + fvals[tgt] - fvals
        cost = grid.tau * lag - pair
        if np.any(np.isnan(cost)):
            raise NumericError("NaN in cost assembly")
        entries[np.arange(n), tgt] = cost
        offset_costs[j] = cost
    return CostMatrix(
        entries=entries,
        grid=grid,
        tau=grid.tau,
        offsets=offsets,
        offset_costs=offset_costs,
        spec_desc=spec.describe(),
        form_desc=form.describe(),
    )


def minplus_apply(C: CostMatrix, u: np.ndarray) -> np.ndarray:
    """out(x) = min_y u(y) + C(y, x)."""
    u = np.asarray(u, dtype=float)
    if u.shape != (C.n_states,):
        raise InputError(f"vector shape {u.shape} != ({C.n_states},)")
    if C.offset_costs is not None:
        return _apply_banded(C, u)
    return np.min(u[:, None] + C.entries, axis=0)


def _apply_banded(C: CostMatrix, u: np.ndarray) -> np.ndarray:
    grid = C.grid
    u_grid = u.reshape(grid.shape)
    out = np.full(grid.shape, INF)
    for off, cost in zip(C.offsets, C.offset_costs):
        # candidate at x = y + off is u(y) + cost(y), re-indexed by x
        cand = np.roll(
            u_grid + cost.reshape(grid.shape),
            shift=tuple(off),
            axis=tuple(range(grid.dim)),
        )
        np.minimum(out, cand, out=out)
    return out.ravel()


def minplus_apply_argmin(C: CostMatrix, u: np.ndarray):
    """Like minplus_apply but also returns the minimizing source state."""
    u = np.asarray(u, dtype=float)
    cand = u[:, None] + C.entries
    arg = np.argmin(cand, axis=0)
    return cand[arg, np.arange(C.n_states)], arg


def saturation_warning(C: CostMatrix, u: np.ndarray) -> bool:
    """Warn when an optimizing step attains the speed cap |step| = v_max*tau.

    A saturated optimizer means the cap, not the action, is selecting the
    step, so the compactness assumption behind the discretization is broken.
    """
    grid = C.grid
    _, arg = minplus_apply_argmin(C, u)
    kx = np.stack(np.unravel_index(np.arange(C.n_states), grid.shape), axis=-1)
    ky = np.stack(np.unravel_index(arg, grid.shape), axis=-1)
    disp = grid.min_displacement_idx(kx, ky) * grid.spacing
    cap = grid.v_max * grid.tau
    hit = np.any(np.abs(np.abs(disp) - cap) < 1e-12)
    if hit:
        warnings.warn(
            "speed cap saturated by an optimizing step; raise v_max",
            RuntimeWarning,
            stacklevel=2,
        )
    return bool(hit)


def minplus_matmul(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """(A . B)(i, j) = min_k A(i, k) + B(k, j), blocked over rows."""
    n = A.shape[0]
    out = np.empty((n, n))
    for i0 in range(0, n, _BLOCK_ROWS):
        i1 = min(i0 + _BLOCK_ROWS, n)
        out[i0:i1] = np.min(A[i0:i1, :, None] + B[None, :, :], axis=1)
    return out


def minplus_matmul_banded(A: np.ndarray, C: CostMatrix) -> np.ndarray:
    """A . C using the banded structure of the one-step matrix C."""
    grid = C.grid
    n = C.n_states
    shape = (n,) + grid.shape
    A_grid = A.reshape(shape)
    out = np.full(shape, INF)
    axes = tuple(range(1, grid.dim + 1))
    for off, cost in zip(C.offsets, C.offset_costs):
        cand = np.roll(
            A_grid + cost.reshape(grid.shape)[None], shift=tuple(off), axis=axes
        )
        np.minimum(out, cand, out=out)
    return out.reshape(n, n)


def minplus_power(C: CostMatrix, n: int) -> CostMatrix:
    """Exact n-step min-plus power by binary decomposition."""
    if n < 1:
        raise InputError(f"power must be >= 1, got {n}")
    result = matrix_power(C.entries, n)
    return CostMatrix(
        entries=result,
        grid=C.grid,
        tau=C.tau,
        spec_desc=C.spec_desc,
        form_desc=C.form_desc,
    )


def matrix_power(M: np.ndarray, n: int) -> np.ndarray:
    """Raw square-and-multiply on a dense min-plus matrix."""
    if n < 1:
        raise InputError(f"power must be >= 1, got {n}")
    result = None
    base = M
    while n:
        if n & 1:
            result = base.copy() if result is None else minplus_matmul(result, base)
        n >>= 1
        if n:
            base = minplus_matmul(base, base)
    if np.any(np.isnan(result)):
        raise NumericError("NaN in min-plus power")
    return result


def karp_min_mean_cycle(C: CostMatrix) -> float:
    """Karp's exact minimum cycle mean.

    D_k(v) = min cost of a length-k walk ending at v from any start (the
    all-zeros initialization is Karp run from a super-source wired to every
    state at zero cost, so no reachability assumption is needed); the
    minimum mean equals min_v max_k (D_n(v) - D_k(v)) / (n - k).
    """
    n = C.n_states
    D = np.full((n + 1, n), INF)
    D[0, :] = 0.0
    for k in range(1, n + 1):
        D[k] = minplus_apply(C, D[k - 1])
    finite = np.isfinite(D[n])
    if not np.any(finite):
        raise NumericError("cost graph has no cycle of finite cost")
    with np.errstate(invalid="ignore"):
        num = D[n][None, :] - D[:n, :]
        den = (n - np.arange(n, dtype=float))[:, None]
        ratios = num / den
    # states whose D_n is infinite never close a cycle through step n
    ratios[:, ~finite] = -INF
    ratios[~np.isfinite(D[:n])] = -INF
    per_state = np.max(ratios, axis=0)
    per_state[~finite] = INF
    return float(np.min(per_state))


def minplus_eigenvalue_power(
    C: CostMatrix, tol: float = 1e-10, max_iter: int = 100_000, window: int = 64
) -> tuple:
    """Min-plus eigenvalue by value iteration.

    Iterates u <- C u (normalized) until the orbit becomes exactly periodic
    up to a uniform shift, which happens in finitely many steps for a
    min-plus matrix; the per-step drift is then the eigenvalue.  Returns
    (eigenvalue, residual, iterations).
    """
    n = C.n_states
    u = np.zeros(n)
    history = [u]
    for it in range(1, max_iter + 1):
        u = minplus_apply(C, u)
        u = u - u[0]  # normalize to keep values bounded
        for p in range(1, min(window, len(history)) + 1):
            prev = history[-p]
            diff = u - prev
            spread = float(np.max(diff) - np.min(diff))
            if spread <= tol:
                # recover the drift from one un-normalized step
                lam_vec = minplus_apply(C, u) - u
                lam = float(np.sum(lam_vec)) / n if p == 1 else None
                if p > 1:
                    w = u
                    total = 0.0
                    for _ in range(p):
                        nxt = minplus_apply(C, w)
                        total += float(np.mean(nxt - w))
                        w = nxt
                    lam = total / p
                return lam, spread, it
        history.append(u)
        if len(history) > window + 1:
            history.pop(0)
    raise NumericError(
        f"power iteration did not stabilize in {max_iter} steps; use method='karp'"
    )
