"""Quantitative checks for the commuting-pair theorems.

Each check runs at two (or more) grid resolutions and reports metric values,
a fine/coarse convergence ratio and a pass flag.  The identities being
checked are exact in the continuum, so on a commuting pair the discrete
defect must shrink under refinement; on a non-commuting control it must not.
Shrinkage, not an absolute threshold, is the honest signal.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import (
    DEFAULT_N_MAX,
    DEFAULT_WINDOW,
    System,
    aubry_data,
    backward_semigroup,
    class_distance_matrix,
    common_subsolution,
    default_tol_zero,
    elementary_solutions,
    forward_semigroup,
    max_second_difference,
)
from .errors import InputError
from .fixtures import random_trig_field
from .hamiltonians import Hamiltonian, combine
from .torus import OneForm, TorusGrid

FLOOR = 1e-9
RATIO_GATE = 0.7


@dataclass
class VerificationReport:
    check: str
    fixture: str
    resolutions: list
    metrics: dict
    ratio: float
    passed: bool
    runtime_ms: float
    details: dict = field(default_factory=dict)

    def to_dict(self, with_runtime: bool = False) -> dict:
        return {
            "check": self.check,
            "fixture": self.fixture,
            "resolutions": self.resolutions,
            "metrics": self.metrics,
            "ratio": self.ratio,
            "pass": self.passed,
            # runtime is the one nondeterministic field; it is nulled by
            # default so identical configs yield byte-identical reports
            "runtime_ms": self.runtime_ms if with_runtime else None,
            "details": self.details,
        }

    def to_json(self, with_runtime: bool = False) -> str:
        return json.dumps(self.to_dict(with_runtime), sort_keys=True)


class SystemCache:
    """Shares barrier-carrying Systems between checks, keyed by problem."""

    def __init__(self):
        self._data = {}

    def get(self, grid: TorusGrid, spec: Hamiltonian, form: OneForm) -> System:
        key = (
            json.dumps(spec.describe(), sort_keys=True),
            json.dumps(form.describe(), sort_keys=True),
            grid.dim,
            grid.n_per_axis,
            grid.tau,
            grid.v_max,
        )
        if key not in self._data:
            self._data[key] = System(grid, spec, form)
        return self._data[key]


def _grid_desc(grid: TorusGrid) -> dict:
    return {
        "dim": grid.dim,
        "n_per_axis": grid.n_per_axis,
        "tau": grid.tau,
        "v_max": grid.v_max,
    }


def _ratio(coarse: float, fine: float) -> float:
    if coarse <= FLOOR:
        return 0.0 if fine <= FLOOR else float("inf")
    return fine / coarse


def _finish(
    check: str,
    fixture: str,
    grids: Sequence[TorusGrid],
    metrics: dict,
    gated: Sequence[str],
    fine_threshold: float,
    ratio_gate: float,
    t0: float,
    details: Optional[dict] = None,
    extra_pass: bool = True,
) -> VerificationReport:
    ratios = [_ratio(metrics[m][-2], metrics[m][-1]) for m in gated]
    ratio = max(ratios) if ratios else 0.0
    ok = extra_pass
    for m in gated:
        fine = metrics[m][-1]
        if fine > fine_threshold:
            ok = False
        if fine > FLOOR and _ratio(metrics[m][-2], fine) > ratio_gate:
            ok = False
    return VerificationReport(
        check=check,
        fixture=fixture,
        resolutions=[_grid_desc(g) for g in grids],
        metrics=metrics,
        ratio=ratio,
        passed=ok,
        runtime_ms=(time.perf_counter() - t0) * 1e3,
        details=details or {},
    )


def _steps(grid: TorusGrid, t: float) -> int:
    return max(1, round(t / grid.tau))


def _u0_samples(grid: TorusGrid, seed: int, scale: float = 0.3) -> np.ndarray:
    # modest amplitude keeps the optimizing velocities inside the speed cap
    return random_trig_field(grid.dim, seed, scale=scale)(grid.coords())


# ---------------------------------------------------------------------------
# the checks
# ---------------------------------------------------------------------------


def verify_semigroup_commutation(
    pair,
    form: OneForm,
    grids: Sequence[TorusGrid],
    s_time: float = 0.5,
    r_time: float = 0.5,
    seed: int = 0,
    u0_scale: float = 0.3,
    cache: Optional[SystemCache] = None,
    fine_threshold: float = 0.1,
    ratio_gate: float = RATIO_GATE,
    fixture: str = "",
) -> VerificationReport:
    """sup |T1 T2 u - T2 T1 u| for the backward and forward semigroups."""
    t0 = time.perf_counter()
    cache = cache or SystemCache()
    h1, h2 = pair
    metrics = {"backward": [], "forward": []}
    for grid in grids:
        s1 = cache.get(grid, h1, form)
        s2 = cache.get(grid, h2, form)
        ns, nr = _steps(grid, s_time), _steps(grid, r_time)
        u0 = _u0_samples(grid, seed, u0_scale)
        ab = backward_semigroup(s1, backward_semigroup(s2, u0, nr), ns)
        ba = backward_semigroup(s2, backward_semigroup(s1, u0, ns), nr)
        metrics["backward"].append(float(np.max(np.abs(ab - ba))))
        af = forward_semigroup(s1, forward_semigroup(s2, u0, nr), ns)
        bf = forward_semigroup(s2, forward_semigroup(s1, u0, ns), nr)
        metrics["forward"].append(float(np.max(np.abs(af - bf))))
    return _finish(
        "semigroup_commutation",
        fixture,
        grids,
        metrics,
        ["backward", "forward"],
        fine_threshold,
        ratio_gate,
        t0,
    )


def verify_sum_semigroup(
    pair,
    form: OneForm,
    grids: Sequence[TorusGrid],
    t_time: float = 0.5,
    seed: int = 0,
    u0_scale: float = 0.3,
    cache: Optional[SystemCache] = None,
    fine_threshold: float = 0.3,
    ratio_gate: float = RATIO_GATE,
    fixture: str = "",
) -> VerificationReport:
    """sup |T1,t T2,t u - T[H1+H2],t u| (the inf-convolution gap)."""
    t0 = time.perf_counter()
    cache = cache or SystemCache()
    h1, h2 = pair
    hsum = combine([h1, h2], [1.0, 1.0])
    metrics = {"sup_diff": []}
    for grid in grids:
        s1 = cache.get(grid, h1, form)
        s2 = cache.get(grid, h2, form)
        ss = cache.get(grid, hsum, form)
        n = _steps(grid, t_time)
        u0 = _u0_samples(grid, seed, u0_scale)
        lhs = backward_semigroup(s1, backward_semigroup(s2, u0, n), n)
        rhs = backward_semigroup(ss, u0, n)
        metrics["sup_diff"].append(float(np.max(np.abs(lhs - rhs))))
    return _finish(
        "sum_semigroup",
        fixture,
        grids,
        metrics,
        ["sup_diff"],
        fine_threshold,
        ratio_gate,
        t0,
    )


def verify_shared_weak_kam(
    pair,
    form: OneForm,
    grids: Sequence[TorusGrid],
    t_time: float = 0.5,
    n_max: int = DEFAULT_N_MAX,
    window: int = DEFAULT_WINDOW,
    cache: Optional[SystemCache] = None,
    fine_threshold: float = 0.05,
    ratio_gate: float = RATIO_GATE,
    fixture: str = "",
) -> VerificationReport:
    """Elementary weak KAM solutions of H1 must be fixed by H2's semigroups."""
    t0 = time.perf_counter()
    cache = cache or SystemCache()
    h1, h2 = pair
    metrics = {"backward_residual": [], "forward_residual": []}
    for grid in grids:
        s1 = cache.get(grid, h1, form)
        s2 = cache.get(grid, h2, form)
        bm = s1.barrier(n_max=n_max, window=window)
        data = aubry_data(bm)
        reps = [int(cls[0]) for cls in data.classes]
        n = _steps(grid, t_time)
        rb = rf = 0.0
        for xi in reps:
            u_minus, u_plus = elementary_solutions(bm, xi, tol_zero=data.tol_zero)
            rb = max(rb, float(np.max(np.abs(backward_semigroup(s2, u_minus, n) - u_minus))))
            rf = max(rf, float(np.max(np.abs(forward_semigroup(s2, u_plus, n) - u_plus))))
        metrics["backward_residual"].append(rb)
        metrics["forward_residual"].append(rf)
    return _finish(
        "shared_weak_kam",
        fixture,
        grids,
        metrics,
        ["backward_residual", "forward_residual"],
        fine_threshold,
        ratio_gate,
        t0,
    )


def verify_barrier_equality(
    pair,
    form: OneForm,
    grids: Sequence[TorusGrid],
    n_max: int = DEFAULT_N_MAX,
    window: int = DEFAULT_WINDOW,
    cache: Optional[SystemCache] = None,
    fine_threshold: float = 0.1,
    ratio_gate: float = RATIO_GATE,
    fixture: str = "",
) -> VerificationReport:
    """sup |B1 - B2| and sup |b1 - b2| over the grid."""
    t0 = time.perf_counter()
    cache = cache or SystemCache()
    h1, h2 = pair
    metrics = {"B_diff": [], "b_diff": []}
    for grid in grids:
        d1 = aubry_data(cache.get(grid, h1, form).barrier(n_max=n_max, window=window))
        d2 = aubry_data(cache.get(grid, h2, form).barrier(n_max=n_max, window=window))
        metrics["B_diff"].append(float(np.max(np.abs(d1.B - d2.B))))
        metrics["b_diff"].append(float(np.max(np.abs(d1.b - d2.b))))
    return _finish(
        "barrier_equality",
        fixture,
        grids,
        metrics,
        ["B_diff", "b_diff"],
        fine_threshold,
        ratio_gate,
        t0,
    )


def hausdorff_distance(grid: TorusGrid, idx_a, idx_b) -> float:
    """Hausdorff distance between two grid-point sets in the torus metric."""
    idx_a, idx_b = np.asarray(idx_a), np.asarray(idx_b)
    if len(idx_a) == 0 and len(idx_b) == 0:
        return 0.0
    if len(idx_a) == 0 or len(idx_b) == 0:
        return float("inf")
    coords = grid.coords()
    a, b = coords[idx_a], coords[idx_b]
    diff = a[:, None, :] - b[None, :, :]
    diff = (diff + 0.5) % 1.0 - 0.5
    d = np.linalg.norm(diff, axis=-1)
    return float(max(np.max(np.min(d, axis=1)), np.max(np.min(d, axis=0))))


def verify_set_equality(
    pair,
    form: OneForm,
    grids: Sequence[TorusGrid],
    n_max: int = DEFAULT_N_MAX,
    window: int = DEFAULT_WINDOW,
    cache: Optional[SystemCache] = None,
    ratio_gate: float = RATIO_GATE,
    fixture: str = "",
) -> VerificationReport:
    """Hausdorff distance between projected Aubry sets and Mane sets.

    Zero-set extraction cannot localize better than one cell per side, so
    the pass bound is 2 * spacing at the fine resolution.
    """
    t0 = time.perf_counter()
    cache = cache or SystemCache()
    h1, h2 = pair
    metrics = {"aubry_hausdorff": [], "mane_hausdorff": []}
    for grid in grids:
        d1 = aubry_data(cache.get(grid, h1, form).barrier(n_max=n_max, window=window))
        d2 = aubry_data(cache.get(grid, h2, form).barrier(n_max=n_max, window=window))
        metrics["aubry_hausdorff"].append(
            hausdorff_distance(grid, d1.aubry_indices, d2.aubry_indices)
        )
        metrics["mane_hausdorff"].append(
            hausdorff_distance(grid, d1.mane_indices, d2.mane_indices)
        )
    bound = 2 * grids[-1].spacing
    ok = all(metrics[m][-1] <= bound for m in metrics)
    ratios = [_ratio(metrics[m][-2], metrics[m][-1]) for m in metrics]
    return VerificationReport(
        check="set_equality",
        fixture=fixture,
        resolutions=[_grid_desc(g) for g in grids],
        metrics=metrics,
        ratio=max(ratios),
        passed=ok,
        runtime_ms=(time.perf_counter() - t0) * 1e3,
        details={"pass_bound": bound},
    )


def verify_alpha_quasilinearity(
    pair,
    form_list: Sequence[OneForm],
    grids: Sequence[TorusGrid],
    cache: Optional[SystemCache] = None,
    fine_threshold: float = 0.02,
    ratio_gate: float = RATIO_GATE,
    fixture: str = "",
) -> VerificationReport:
    """max over c of |alpha[H1+H2](c) - alpha[H1](c) - alpha[H2](c)|."""
    t0 = time.perf_counter()
    if not form_list:
        raise InputError("empty form list")
    cache = cache or SystemCache()
    h1, h2 = pair
    hsum = combine([h1, h2], [1.0, 1.0])
    metrics = {"alpha_defect": []}
    per_c = []
    for grid in grids:
        worst = 0.0
        row = []
        for form in form_list:
            a1 = cache.get(grid, h1, form).alpha
            a2 = cache.get(grid, h2, form).alpha
            asum = cache.get(grid, hsum, form).alpha
            defect = abs(asum - a1 - a2)
            row.append(defect)
            worst = max(worst, defect)
        per_c.append(row)
        metrics["alpha_defect"].append(worst)
    return _finish(
        "alpha_quasilinearity",
        fixture,
        grids,
        metrics,
        ["alpha_defect"],
        fine_threshold,
        ratio_gate,
        t0,
        details={"defect_per_form": per_c, "c_list": [list(map(float, f.c)) for f in form_list]},
    )


def verify_common_subsolution(
    pair,
    form: OneForm,
    grids: Sequence[TorusGrid],
    s_steps: int = 2,
    r_steps: int = 2,
    n_max: int = DEFAULT_N_MAX,
    window: int = DEFAULT_WINDOW,
    cache: Optional[SystemCache] = None,
    fine_threshold: float = 0.1,
    ratio_gate: float = RATIO_GATE,
    fixture: str = "",
) -> VerificationReport:
    """Smoothed elementary solution must subsolve both equations at once.

    Metrics are the positive parts of the two max violations; the largest
    second difference of u is reported as a C^{1,1} proxy but not gated.
    """
    t0 = time.perf_counter()
    cache = cache or SystemCache()
    h1, h2 = pair
    metrics = {"violation_1": [], "violation_2": []}
    second_diffs = []
    for grid in grids:
        s1 = cache.get(grid, h1, form)
        s2 = cache.get(grid, h2, form)
        u, rep1, rep2 = common_subsolution(
            s1, s2, s_steps=s_steps, r_steps=r_steps, n_max=n_max, window=window
        )
        metrics["violation_1"].append(max(rep1.max_violation, 0.0))
        metrics["violation_2"].append(max(rep2.max_violation, 0.0))
        second_diffs.append(max_second_difference(u, grid))
    return _finish(
        "common_subsolution",
        fixture,
        grids,
        metrics,
        ["violation_1", "violation_2"],
        fine_threshold,
        ratio_gate,
        t0,
        details={"max_second_difference": second_diffs},
    )


def verify_quotient_isometry(
    pair,
    form: OneForm,
    grids: Sequence[TorusGrid],
    n_max: int = DEFAULT_N_MAX,
    window: int = DEFAULT_WINDOW,
    cache: Optional[SystemCache] = None,
    fine_threshold: float = 0.1,
    ratio_gate: float = RATIO_GATE,
    fixture: str = "",
) -> VerificationReport:
    """Quotient class counts must match; matched class distances must agree.

    Class matching is greedy nearest-distance: class counts at desk scale
    are tiny, optimal matching would change nothing.
    """
    t0 = time.perf_counter()
    cache = cache or SystemCache()
    h1, h2 = pair
    metrics = {"class_count_diff": [], "distance_mismatch": []}
    for grid in grids:
        d1 = aubry_data(cache.get(grid, h1, form).barrier(n_max=n_max, window=window))
        d2 = aubry_data(cache.get(grid, h2, form).barrier(n_max=n_max, window=window))
        m1 = class_distance_matrix(d1.rho, d1.aubry_indices, d1.classes)
        m2 = class_distance_matrix(d2.rho, d2.aubry_indices, d2.classes)
        metrics["class_count_diff"].append(float(abs(len(d1.classes) - len(d2.classes))))
        if len(d1.classes) != len(d2.classes) or len(d1.classes) <= 1:
            mismatch = 0.0 if len(d1.classes) == len(d2.classes) else float("inf")
        else:
            # greedy matching of classes by representative location
            coords = grid.coords()
            reps1 = [coords[int(c[0])] for c in d1.classes]
            reps2 = [coords[int(c[0])] for c in d2.classes]
            unused = list(range(len(reps2)))
            match = []
            for r1 in reps1:
                dists = [
                    np.linalg.norm((r1 - reps2[j] + 0.5) % 1.0 - 0.5) for j in unused
                ]
                j = unused.pop(int(np.argmin(dists)))
                match.append(j)
            mismatch = 0.0
            for i in range(len(match)):
                for k in range(i + 1, len(match)):
                    mismatch = max(
                        mismatch, abs(m1[i, k] - m2[match[i], match[k]])
                    )
        metrics["distance_mismatch"].append(mismatch)
    ok = metrics["class_count_diff"][-1] == 0.0
    rep = _finish(
        "quotient_isometry",
        fixture,
        grids,
        metrics,
        ["distance_mismatch"],
        fine_threshold,
        ratio_gate,
        t0,
        extra_pass=ok,
    )
    return rep


def verify_gauge_invariance(
    spec: Hamiltonian,
    form_plain: OneForm,
    form_gauged: OneForm,
    grids: Sequence[TorusGrid],
    n_max: int = DEFAULT_N_MAX,
    window: int = DEFAULT_WINDOW,
    cache: Optional[SystemCache] = None,
    tol: float = 1e-9,
    fixture: str = "",
) -> VerificationReport:
    """alpha, B and b must not feel the exact part of the 1-form.

    Exact at the discrete level: the exact part telescopes along every path,
    so the tolerance is roundoff-sized, not scheme-sized.
    """
    t0 = time.perf_counter()
    if not np.allclose(form_plain.c, form_gauged.c):
        raise InputError("gauge comparison needs equal cohomology classes")
    cache = cache or SystemCache()
    metrics = {"alpha_diff": [], "B_diff": [], "b_diff": []}
    for grid in grids:
        sp = cache.get(grid, spec, form_plain)
        sg = cache.get(grid, spec, form_gauged)
        dp = aubry_data(sp.barrier(n_max=n_max, window=window))
        dg = aubry_data(sg.barrier(n_max=n_max, window=window))
        metrics["alpha_diff"].append(abs(sp.alpha - sg.alpha))
        metrics["B_diff"].append(float(np.max(np.abs(dp.B - dg.B))))
        metrics["b_diff"].append(float(np.max(np.abs(dp.b - dg.b))))
    ok = all(v <= tol for vals in metrics.values() for v in vals)
    return VerificationReport(
        check="gauge_invariance",
        fixture=fixture,
        resolutions=[_grid_desc(g) for g in grids],
        metrics=metrics,
        ratio=0.0,
        passed=ok,
        runtime_ms=(time.perf_counter() - t0) * 1e3,
        details={"tol": tol},
    )
