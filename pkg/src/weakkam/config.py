"""YAML run configuration for the command-line front end.

One structured file with named sections; every tolerance and window
parameter is surfaced here so a run is reproducible from the config alone.
Unknown keys anywhere are rejected.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from .errors import ConfigError
from .fixtures import PAIRS, SPECS, get_pair, get_spec
from .hamiltonians import Combination, Hamiltonian, Mechanical, PPoly, combine
from .torus import EXACT_PARTS, OneForm, TorusGrid, build_grid

_CHECK_NAMES = (
    "semigroup_commutation",
    "sum_semigroup",
    "shared_weak_kam",
    "barrier_equality",
    "set_equality",
    "alpha_quasilinearity",
    "common_subsolution",
    "quotient_isometry",
    "gauge_invariance",
)


def _require_keys(block: dict, allowed, where: str) -> None:
    unknown = set(block) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")


def _get(block: dict, key: str, where: str):
    if key not in block:
        raise ConfigError(f"missing key {where}.{key}")
    return block[key]


def spec_from_config(node, dim: int) -> Hamiltonian:
    """A Hamiltonian from a registry name or an inline definition."""
    if isinstance(node, str):
        spec = get_spec(node)
        if spec.dim != dim:
            raise ConfigError(f"spec {node!r} has dim {spec.dim}, grid has dim {dim}")
        return spec
    if not isinstance(node, dict):
        raise ConfigError(f"hamiltonian must be a name or a mapping, got {node!r}")
    kind = _get(node, "kind", "hamiltonian")
    if kind == "mechanical":
        _require_keys(node, ("kind", "potential", "kinetic"), "hamiltonian")
        potential = [(float(a), list(m)) for a, m in _get(node, "potential", "hamiltonian")]
        return Mechanical(potential, dim=dim, kinetic=float(node.get("kinetic", 1.0)))
    if kind == "ppoly":
        _require_keys(node, ("kind", "coeffs"), "hamiltonian")
        coeffs = {int(k): float(v) for k, v in _get(node, "coeffs", "hamiltonian").items()}
        return PPoly(coeffs, dim=dim)
    if kind == "combine":
        _require_keys(node, ("kind", "parts", "weights"), "hamiltonian")
        parts = [spec_from_config(p, dim) for p in _get(node, "parts", "hamiltonian")]
        return combine(parts, [float(w) for w in _get(node, "weights", "hamiltonian")])
    raise ConfigError(f"unknown hamiltonian kind {kind!r}")


@dataclass
class VerifySettings:
    pair_name: str
    checks: tuple
    resolutions: tuple
    tau_exponent: float
    seed: int
    u0_scale: float
    n_max: int
    window: int
    s_time: float
    r_time: float
    t_time: float
    ratio_gate: float
    thresholds: dict
    gauge_exact: str
    quasilinearity_forms: tuple


@dataclass
class RunConfig:
    grid: TorusGrid
    spec: Optional[Hamiltonian]
    spec_name: object
    form: OneForm
    alpha_sweep: Optional[dict]
    verify: Optional[VerifySettings]
    barrier: dict

    def grids_for(self, resolutions) -> list:
        """Grids at the requested per-axis resolutions.

        tau follows tau_ref * (n_ref / n)^tau_exponent; an exponent below 1
        refines the one-step velocity lattice along with the grid, which
        the semigroup-identity checks need.
        """
        expo = self.verify.tau_exponent if self.verify else 1.0
        out = []
        for n in resolutions:
            tau = self.grid.tau * (self.grid.n_per_axis / n) ** expo
            out.append(build_grid(self.grid.dim, int(n), tau, self.grid.v_max))
        return out


def load_config(path) -> RunConfig:
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    return parse_config(raw)


def parse_config(raw: dict) -> RunConfig:
    _require_keys(
        raw, ("grid", "hamiltonian", "form", "alpha", "verify", "barrier"), "config"
    )

    gblock = _get(raw, "grid", "config")
    _require_keys(gblock, ("dim", "n", "tau", "v_max"), "grid")
    try:
        grid = build_grid(
            int(_get(gblock, "dim", "grid")),
            int(_get(gblock, "n", "grid")),
            float(_get(gblock, "tau", "grid")),
            float(_get(gblock, "v_max", "grid")),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad grid block: {exc}") from exc

    fblock = raw.get("form") or {}
    _require_keys(fblock, ("c", "exact"), "form")
    c = fblock.get("c", [0.0] * grid.dim)
    if np.shape(c) != (grid.dim,):
        raise ConfigError(f"form.c must have {grid.dim} components, got {c!r}")
    exact_name = fblock.get("exact")
    exact = None
    if exact_name is not None:
        if exact_name not in EXACT_PARTS:
            raise ConfigError(
                f"unknown exact part {exact_name!r}; known: {sorted(EXACT_PARTS)}"
            )
        exact = EXACT_PARTS[exact_name]
    form = OneForm(np.asarray(c, dtype=float), exact)

    spec = None
    spec_name = raw.get("hamiltonian")
    if spec_name is not None:
        spec = spec_from_config(spec_name, grid.dim)

    alpha_sweep = None
    if raw.get("alpha") is not None:
        ablock = raw["alpha"]
        _require_keys(ablock, ("c_min", "c_max", "count", "axis", "method"), "alpha")
        alpha_sweep = {
            "c_min": float(_get(ablock, "c_min", "alpha")),
            "c_max": float(_get(ablock, "c_max", "alpha")),
            "count": int(_get(ablock, "count", "alpha")),
            "axis": int(ablock.get("axis", 0)),
            "method": str(ablock.get("method", "karp")),
        }
        if alpha_sweep["count"] < 1:
            raise ConfigError("empty sweep: alpha.count must be >= 1")
        if not 0 <= alpha_sweep["axis"] < grid.dim:
            raise ConfigError(f"alpha.axis out of range for dim {grid.dim}")

    verify = None
    if raw.get("verify") is not None:
        vblock = raw["verify"]
        _require_keys(
            vblock,
            (
                "pair",
                "checks",
                "resolutions",
                "tau_exponent",
                "seed",
                "u0_scale",
                "n_max",
                "window",
                "s_time",
                "r_time",
                "t_time",
                "ratio_gate",
                "thresholds",
                "gauge_exact",
                "quasilinearity_c",
            ),
            "verify",
        )
        pair_name = _get(vblock, "pair", "verify")
        if pair_name not in PAIRS:
            raise ConfigError(f"unknown pair {pair_name!r}; known: {sorted(PAIRS)}")
        checks = tuple(vblock.get("checks") or _CHECK_NAMES[:-1])
        for c_name in checks:
            if c_name not in _CHECK_NAMES:
                raise ConfigError(
                    f"unknown check {c_name!r}; known: {list(_CHECK_NAMES)}"
                )
        resolutions = tuple(int(n) for n in vblock.get("resolutions", (16, 32)))
        if len(resolutions) < 2:
            raise ConfigError("verify.resolutions needs at least two entries")
        thresholds = dict(vblock.get("thresholds") or {})
        for k in thresholds:
            if k not in _CHECK_NAMES:
                raise ConfigError(f"threshold for unknown check {k!r}")
        gauge_exact = vblock.get("gauge_exact", "sin_axis0")
        if gauge_exact not in EXACT_PARTS:
            raise ConfigError(f"unknown exact part {gauge_exact!r}")
        qc = vblock.get("quasilinearity_c")
        if qc is None:
            qforms = (form,)
        else:
            qforms = tuple(OneForm(np.asarray(ci, dtype=float)) for ci in qc)
            for f in qforms:
                if f.dim != grid.dim:
                    raise ConfigError("quasilinearity_c entries must match grid dim")
        verify = VerifySettings(
            pair_name=pair_name,
            checks=checks,
            resolutions=resolutions,
            tau_exponent=float(vblock.get("tau_exponent", 1.0)),
            seed=int(vblock.get("seed", 0)),
            u0_scale=float(vblock.get("u0_scale", 0.3)),
            n_max=int(vblock.get("n_max", 528)),
            window=int(vblock.get("window", 16)),
            s_time=float(vblock.get("s_time", 0.5)),
            r_time=float(vblock.get("r_time", 0.5)),
            t_time=float(vblock.get("t_time", 0.5)),
            ratio_gate=float(vblock.get("ratio_gate", 0.7)),
            thresholds=thresholds,
            gauge_exact=gauge_exact,
            quasilinearity_forms=qforms,
        )

    bblock = raw.get("barrier") or {}
    _require_keys(bblock, ("n_max", "window", "tol_zero"), "barrier")
    barrier = {
        "n_max": int(bblock.get("n_max", 2**14)),
        "window": int(bblock.get("window", 64)),
        "tol_zero": None if bblock.get("tol_zero") is None else float(bblock["tol_zero"]),
    }

    return RunConfig(
        grid=grid,
        spec=spec,
        spec_name=spec_name,
        form=form,
        alpha_sweep=alpha_sweep,
        verify=verify,
        barrier=barrier,
    )
