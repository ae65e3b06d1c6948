"""Discrete weak KAM toolbox for Tonelli Hamiltonians on the flat torus.

Computes critical values, Lax-Oleinik semigroups, Peierls barriers,
Aubry/Mane sets and quotient classes on uniform grids, and verifies the
identities that commuting Hamiltonians must satisfy as
refinement-convergent checks.
"""

from .errors import ConfigError, InputError, NumericError, WeakKamError
from .torus import EXACT_PARTS, OneForm, TorusGrid, build_grid
from .hamiltonians import (
    Combination,
    Hamiltonian,
    Mechanical,
    PPoly,
    Separable,
    Symmetrized,
    combine,
    eval_hamiltonian,
    eval_lagrangian,
    free,
    max_abs_bracket,
    pendulum,
    poisson_bracket,
    symmetrize,
    validate_tonelli,
)
from .minplus import (
    CostMatrix,
    build_cost,
    karp_min_mean_cycle,
    minplus_apply,
    minplus_eigenvalue_power,
    minplus_matmul,
    minplus_power,
)
from .core import (
    AubryData,
    BarrierMatrix,
    CriticalValue,
    System,
    aubry_data,
    backward_semigroup,
    common_subsolution,
    critical_value,
    default_tol_zero,
    elementary_solutions,
    forward_semigroup,
    peierls_barrier,
    subsolution_check,
)
from .verify import (
    SystemCache,
    VerificationReport,
    hausdorff_distance,
    verify_alpha_quasilinearity,
    verify_barrier_equality,
    verify_common_subsolution,
    verify_gauge_invariance,
    verify_quotient_isometry,
    verify_semigroup_commutation,
    verify_set_equality,
    verify_shared_weak_kam,
    verify_sum_semigroup,
)

__version__ = "0.1.0"
