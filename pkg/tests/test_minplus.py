import numpy as np
import networkx as nx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from weakkam.errors import InputError, NumericError
from weakkam.fixtures import get_spec, grid_g2, grid_g8
from weakkam.hamiltonians import free, pendulum
from weakkam.minplus import (
    CostMatrix,
    build_cost,
    karp_min_mean_cycle,
    matrix_power,
    minplus_apply,
    minplus_eigenvalue_power,
    minplus_matmul,
    minplus_power,
    saturation_warning,
)
from weakkam.torus import OneForm, build_grid


@pytest.fixture(scope="module")
def free_g8():
    return build_cost(grid_g8(), free(1), OneForm([0.0]))


@pytest.fixture(scope="module")
def pend_g8():
    return build_cost(grid_g8(), pendulum(), OneForm([0.0]))


class TestBuildCost:
    def test_free_diag_zero(self, free_g8):
        assert np.allclose(np.diagonal(free_g8.entries), 0.0)

    def test_free_one_cell_move(self, free_g8):
        g = free_g8.grid
        assert free_g8.entries[0, 1] == pytest.approx(0.25 * 0.5 * (0.125 / 0.25) ** 2)
        assert free_g8.entries[0, 1] == pytest.approx(0.03125)

    def test_pend_idle(self, pend_g8):
        assert pend_g8.entries[0, 0] == pytest.approx(-0.25)

    def test_infeasible_is_inf(self):
        g = build_grid(1, 8, 0.1, 2.0)  # cap 0.2 < 2 cells
        C = build_cost(g, free(1), OneForm([0.0]))
        assert np.isinf(C.entries[0, 2])
        assert np.isfinite(C.entries[0, 1])

    def test_band_matches_entries(self, pend_g8):
        g = pend_g8.grid
        idx = np.arange(g.n_states)
        for off, cost in zip(pend_g8.offsets, pend_g8.offset_costs):
            tgt = (idx + off[0]) % g.n_states
            assert np.allclose(pend_g8.entries[idx, tgt], cost)

    def test_dim_mismatch(self):
        with pytest.raises(InputError):
            build_cost(grid_g8(), free(2), OneForm([0.0]))


class TestApply:
    def test_constant_fixed_point(self, free_g8):
        u = np.full(8, 3.5)
        assert np.array_equal(minplus_apply(free_g8, u), u)

    def test_unit_vector_gives_row(self, free_g8):
        u = np.full(8, np.inf)
        u[2] = 0.0
        assert np.array_equal(minplus_apply(free_g8, u), free_g8.entries[2])

    def test_monotone(self, pend_g8):
        rng = np.random.default_rng(0)
        u = rng.normal(size=8)
        v = u + rng.uniform(0, 1, 8)
        assert np.all(minplus_apply(pend_g8, u) <= minplus_apply(pend_g8, v))

    def test_banded_equals_dense(self, pend_g8):
        dense = CostMatrix(
            entries=pend_g8.entries, grid=pend_g8.grid, tau=pend_g8.tau
        )
        rng = np.random.default_rng(1)
        for _ in range(5):
            u = rng.normal(size=8)
            assert np.array_equal(minplus_apply(pend_g8, u), minplus_apply(dense, u))

    def test_shape_check(self, free_g8):
        with pytest.raises(InputError):
            minplus_apply(free_g8, np.zeros(5))


class TestPower:
    def test_power_one_is_identity(self, pend_g8):
        assert np.array_equal(minplus_power(pend_g8, 1).entries, pend_g8.entries)

    def test_free_two_steps(self, free_g8):
        sq = minplus_power(free_g8, 2)
        # 0 -> 0.25 in two one-cell moves
        assert sq.entries[0, 2] == pytest.approx(0.0625)

    def test_semigroup_law(self):
        rng = np.random.default_rng(4)
        M = rng.normal(size=(6, 6))
        lhs = matrix_power(M, 8)
        rhs = minplus_matmul(matrix_power(M, 3), matrix_power(M, 5))
        assert np.allclose(lhs, rhs, atol=1e-12)

    def test_apply_consistency(self, pend_g8):
        rng = np.random.default_rng(5)
        u = rng.normal(size=8)
        v = u.copy()
        for _ in range(7):
            v = minplus_apply(pend_g8, v)
        P7 = matrix_power(pend_g8.entries, 7)
        assert np.allclose(np.min(u[:, None] + P7, axis=0), v, atol=1e-12)

    def test_bad_exponent(self, pend_g8):
        with pytest.raises(InputError):
            minplus_power(pend_g8, 0)


def _brute_min_mean(entries: np.ndarray) -> float:
    graph = nx.DiGraph()
    n = entries.shape[0]
    for i in range(n):
        for j in range(n):
            if np.isfinite(entries[i, j]):
                graph.add_edge(i, j, w=entries[i, j])
    best = np.inf
    for cycle in nx.simple_cycles(graph):
        cost = sum(
            graph[cycle[k]][cycle[(k + 1) % len(cycle)]]["w"]
            for k in range(len(cycle))
        )
        best = min(best, cost / len(cycle))
    return best


class TestKarp:
    def test_free_idle(self, free_g8):
        assert karp_min_mean_cycle(free_g8) == pytest.approx(0.0, abs=1e-12)

    def test_free_c1_g2(self):
        C = build_cost(grid_g2(), free(1), OneForm([1.0]))
        # move edge: 0.5 * 0.5 - 0.5 = -0.25
        assert karp_min_mean_cycle(C) == pytest.approx(-0.25, abs=1e-12)

    def test_uniform_shift(self, pend_g8):
        base = karp_min_mean_cycle(pend_g8)
        assert karp_min_mean_cycle(pend_g8.shifted(0.37)) == pytest.approx(
            base + 0.37, abs=1e-10
        )

    def test_vs_brute_force_fixtures(self):
        # bands kept thin: simple-cycle enumeration blows up on dense graphs
        for n, tau, vmax, name, c in [
            (2, 0.5, 1.0, "free1", 1.0),
            (8, 0.1, 2.0, "free1", 0.5),
            (8, 0.1, 2.0, "pend", 0.0),
            (12, 0.1, 1.0, "pend", 0.7),
        ]:
            g = build_grid(1, n, tau, vmax)
            C = build_cost(g, get_spec(name), OneForm([c]))
            assert karp_min_mean_cycle(C) == pytest.approx(
                _brute_min_mean(C.entries), abs=1e-10
            )

    def test_vs_brute_force_random(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            n = int(rng.integers(3, 9))
            entries = rng.normal(size=(n, n))
            entries[rng.uniform(size=(n, n)) < 0.3] = np.inf
            np.fill_diagonal(entries, rng.normal(size=n))  # keep cycles finite
            C = CostMatrix(entries=entries, grid=None, tau=1.0)
            assert karp_min_mean_cycle(C) == pytest.approx(
                _brute_min_mean(entries), abs=1e-10
            )


class TestPowerIteration:
    def test_agrees_with_karp(self, pend_g8):
        lam, spread, _ = minplus_eigenvalue_power(pend_g8)
        assert lam == pytest.approx(karp_min_mean_cycle(pend_g8), abs=1e-9)

    def test_agrees_with_karp_nonzero_form(self):
        C = build_cost(grid_g8(), pendulum(), OneForm([0.6]))
        lam, _, _ = minplus_eigenvalue_power(C)
        assert lam == pytest.approx(karp_min_mean_cycle(C), abs=1e-9)

    def test_nonconvergence_raises(self, pend_g8):
        with pytest.raises(NumericError, match="karp"):
            minplus_eigenvalue_power(pend_g8, max_iter=2)


class TestSaturation:
    def test_warns_at_cap(self):
        g = build_grid(1, 8, 0.25, 0.5)  # cap exactly one cell
        C = build_cost(g, free(1), OneForm([2.0]))  # strong drift
        u = np.zeros(8)
        with pytest.warns(RuntimeWarning, match="speed cap"):
            assert saturation_warning(C, u)

    def test_silent_inside_cap(self, free_g8):
        u = np.zeros(8)
        assert not saturation_warning(free_g8, u)


# property tests on a fixed small cost matrix
_PEND_C = build_cost(grid_g8(), pendulum(), OneForm([0.0]))
_vec = st.lists(
    st.floats(-50, 50, allow_nan=False), min_size=8, max_size=8
).map(np.array)


@settings(max_examples=60, deadline=None)
@given(_vec, _vec)
def test_nonexpansive(u, v):
    du = np.max(np.abs(minplus_apply(_PEND_C, u) - minplus_apply(_PEND_C, v)))
    assert du <= np.max(np.abs(u - v)) + 1e-12


@settings(max_examples=60, deadline=None)
@given(_vec, st.floats(-20, 20, allow_nan=False))
def test_additive_homogeneity(u, k):
    lhs = minplus_apply(_PEND_C, u + k)
    rhs = minplus_apply(_PEND_C, u) + k
    # one rounding step of slack: (u+k)+c and (u+c)+k may differ in the last ulp
    assert np.allclose(lhs, rhs, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(_vec, _vec)
def test_monotonicity_property(u, v):
    lo = np.minimum(u, v)
    assert np.all(minplus_apply(_PEND_C, lo) <= minplus_apply(_PEND_C, u) + 1e-12)
