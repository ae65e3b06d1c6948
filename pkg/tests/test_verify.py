import numpy as np
import pytest

from weakkam.errors import InputError
from weakkam.fixtures import double_well
from weakkam.hamiltonians import free, pendulum
from weakkam.torus import EXACT_PARTS, OneForm, build_grid
from weakkam.verify import (
    FLOOR,
    SystemCache,
    _ratio,
    _u0_samples,
    hausdorff_distance,
    verify_alpha_quasilinearity,
    verify_barrier_equality,
    verify_gauge_invariance,
    verify_quotient_isometry,
    verify_semigroup_commutation,
    verify_set_equality,
    verify_sum_semigroup,
)

GRIDS_1D = [build_grid(1, 4, 0.25, 2.0), build_grid(1, 8, 0.25, 2.0)]
FORM0 = OneForm([0.0])


class TestIdenticalPair:
    """H1 = H2 makes every order-of-application identity exact on the grid."""

    def test_commutation_exact_zero(self):
        rep = verify_semigroup_commutation((free(1), free(1)), FORM0, GRIDS_1D)
        assert rep.passed
        assert rep.ratio == 0.0
        assert all(v <= FLOOR for v in rep.metrics["backward"])
        assert all(v <= FLOOR for v in rep.metrics["forward"])

    def test_sum_constant_data_exact(self):
        # constant initial data rides on the zero-cost idle loop, so the
        # inf-convolution gap vanishes identically
        rep = verify_sum_semigroup((free(1), free(1)), FORM0, GRIDS_1D, u0_scale=0.0)
        assert rep.passed
        assert all(v <= FLOOR for v in rep.metrics["sup_diff"])

    def test_barrier_and_sets_exact(self):
        cache = SystemCache()
        pair = (pendulum(), pendulum())
        rb = verify_barrier_equality(pair, FORM0, GRIDS_1D, cache=cache)
        rs = verify_set_equality(pair, FORM0, GRIDS_1D, cache=cache)
        rq = verify_quotient_isometry(pair, FORM0, GRIDS_1D, cache=cache)
        assert rb.passed and rs.passed and rq.passed
        assert rb.metrics["B_diff"] == [0.0, 0.0]
        assert rs.metrics["aubry_hausdorff"] == [0.0, 0.0]
        assert rq.metrics["class_count_diff"] == [0.0, 0.0]


class TestAlphaQuasilinearity:
    def test_p_only_exact_at_representable_velocity(self):
        # free + free sums to p^2 whose optimal velocity is on the lattice,
        # so alpha(c) adds exactly, not just in the limit
        forms = [OneForm([0.0]), OneForm([1.0])]
        rep = verify_alpha_quasilinearity((free(1), free(1)), forms, GRIDS_1D)
        assert rep.passed
        assert rep.metrics["alpha_defect"] == [0.0, 0.0]
        assert rep.details["c_list"] == [[0.0], [1.0]]
        assert np.max(rep.details["defect_per_form"]) == 0.0

    def test_empty_form_list(self):
        with pytest.raises(InputError):
            verify_alpha_quasilinearity((free(1), free(1)), [], GRIDS_1D)


class TestGaugeInvariance:
    def test_exact_part_invisible(self):
        rep = verify_gauge_invariance(
            pendulum(),
            OneForm([0.3]),
            OneForm([0.3], EXACT_PARTS["sin_axis0"]),
            [build_grid(1, 16, 0.25, 2.0), build_grid(1, 32, 0.25, 2.0)],
        )
        assert rep.passed
        for vals in rep.metrics.values():
            assert all(v <= 1e-9 for v in vals)

    def test_rejects_different_classes(self):
        with pytest.raises(InputError):
            verify_gauge_invariance(
                pendulum(), OneForm([0.0]), OneForm([0.5]), GRIDS_1D
            )


class TestQuotientMismatch:
    def test_different_class_counts_fail(self):
        g = [build_grid(1, 32, 0.125, 2.0), build_grid(1, 64, 0.125, 2.0)]
        rep = verify_quotient_isometry((double_well(), pendulum()), FORM0, g)
        assert not rep.passed
        assert rep.metrics["class_count_diff"][-1] == 1.0
        assert rep.metrics["distance_mismatch"][-1] == float("inf")


class TestHausdorff:
    GRID = build_grid(1, 8, 0.25, 2.0)

    def test_both_empty(self):
        assert hausdorff_distance(self.GRID, [], []) == 0.0

    def test_one_empty(self):
        assert hausdorff_distance(self.GRID, [0], []) == float("inf")

    def test_identical(self):
        assert hausdorff_distance(self.GRID, [0, 3], [0, 3]) == 0.0

    def test_wraps_around(self):
        # indices 0 and 7 are one cell apart through the seam
        assert hausdorff_distance(self.GRID, [0], [7]) == pytest.approx(0.125)

    def test_asymmetric_sets(self):
        d = hausdorff_distance(self.GRID, [0], [0, 4])
        assert d == pytest.approx(0.5)  # farthest point of the bigger set rules


class TestReportPlumbing:
    def test_json_deterministic(self):
        r1 = verify_semigroup_commutation((free(1), free(1)), FORM0, GRIDS_1D)
        r2 = verify_semigroup_commutation((free(1), free(1)), FORM0, GRIDS_1D)
        assert r1.to_json() == r2.to_json()
        assert '"runtime_ms": null' in r1.to_json()

    def test_runtime_optional(self):
        rep = verify_semigroup_commutation((free(1), free(1)), FORM0, GRIDS_1D)
        assert rep.to_dict(with_runtime=True)["runtime_ms"] > 0.0
        assert rep.to_dict()["runtime_ms"] is None

    def test_u0_reproducible_across_resolutions(self):
        # the same continuum field sampled on nested grids
        coarse = _u0_samples(GRIDS_1D[0], seed=3)
        fine = _u0_samples(GRIDS_1D[1], seed=3)
        assert np.allclose(fine[::2], coarse)
        assert not np.allclose(_u0_samples(GRIDS_1D[0], seed=4), coarse)

    def test_ratio_floor_rules(self):
        assert _ratio(0.0, 0.0) == 0.0
        assert _ratio(0.0, 1.0) == float("inf")
        assert _ratio(1.0, 0.5) == 0.5

    def test_cache_reuses_systems(self):
        cache = SystemCache()
        g = GRIDS_1D[0]
        s1 = cache.get(g, free(1), FORM0)
        s2 = cache.get(g, free(1), OneForm([0.0]))
        assert s1 is s2
        assert cache.get(g, free(1), OneForm([1.0])) is not s1
