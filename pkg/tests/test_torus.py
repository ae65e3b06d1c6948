import numpy as np
import pytest

from weakkam.errors import ConfigError, InputError
from weakkam.torus import (
    EXACT_PARTS,
    OneForm,
    SampledExact,
    TorusGrid,
    build_grid,
    form_pairing,
)


@pytest.fixture
def g8():
    return build_grid(1, 8, 0.25, 2.0)


class TestBuildGrid:
    def test_g8(self, g8):
        assert g8.n_states == 8
        assert g8.spacing == 0.125

    def test_2d(self):
        g = build_grid(2, 16, 0.25, 2.0)
        assert g.n_states == 256
        assert g.shape == (16, 16)

    def test_no_motion_possible(self):
        with pytest.raises(ConfigError, match="no motion"):
            build_grid(1, 8, 0.25, 0.4)

    def test_bad_dim(self):
        with pytest.raises(ConfigError):
            build_grid(3, 8, 0.25, 2.0)

    def test_bad_tau(self):
        with pytest.raises(ConfigError):
            build_grid(1, 8, -0.1, 2.0)

    def test_coords_roundtrip(self, g8):
        coords = g8.coords()
        for i in range(g8.n_states):
            assert g8.index_of(coords[i]) == i

    def test_index_of_rejects_off_grid(self, g8):
        with pytest.raises(InputError):
            g8.index_of([0.3])


class TestMinDisplacement:
    def test_wrap_shorter(self, g8):
        assert g8.min_displacement([0.875], [0.0])[0] == pytest.approx(-0.125)

    def test_identity(self, g8):
        assert g8.min_displacement([0.25], [0.25])[0] == 0.0

    def test_half_period_tie_positive(self, g8):
        assert g8.min_displacement([0.5], [0.0])[0] == pytest.approx(0.5)

    def test_magnitude_bound(self, g8):
        coords = g8.coords()
        for x in coords:
            for y in coords:
                assert np.all(np.abs(g8.min_displacement(x, y)) <= 0.5 + 1e-12)

    def test_2d_per_axis(self):
        g = build_grid(2, 8, 0.25, 2.0)
        d = g.min_displacement([0.875, 0.25], [0.0, 0.0])
        assert d == pytest.approx([-0.125, 0.25])


class TestFeasibleOffsets:
    def test_band_width(self, g8):
        offs = g8.feasible_offsets()[:, 0]
        # cap = 2.0 * 0.25 = 0.5: four cells either way, half period once
        assert set(offs) == {-3, -2, -1, 0, 1, 2, 3, 4}

    def test_respects_cap(self):
        g = build_grid(1, 8, 0.1, 2.0)
        offs = g.feasible_offsets()[:, 0]
        assert set(offs) == {-1, 0, 1}

    def test_2d_product(self):
        g = build_grid(2, 8, 0.1, 2.0)
        assert g.feasible_offsets().shape == (9, 2)


class TestFormPairing:
    def test_constant_form(self, g8):
        form = OneForm([1.0])
        assert form_pairing(form, [0.0], [0.125], g8) == pytest.approx(0.125)

    def test_zero_segment(self, g8):
        form = OneForm([0.7], EXACT_PARTS["sin_axis0"])
        assert form_pairing(form, [0.25], [0.25], g8) == 0.0

    def test_sampled_exact_part(self, g8):
        f = SampledExact(np.sin(2 * np.pi * g8.coords()[:, 0]))
        form = OneForm([0.0], f)
        assert form_pairing(form, [0.0], [0.25], g8) == pytest.approx(1.0)

    def test_antisymmetry_non_tied(self, g8):
        form = OneForm([0.3], EXACT_PARTS["sin_axis0"])
        # 0.25 -> 0.375 has a unique minimal representative
        fwd = form_pairing(form, [0.25], [0.375], g8)
        assert form_pairing(form, [0.375], [0.25], g8) == pytest.approx(-fwd)

    def test_chain_additivity(self, g8):
        form = OneForm([0.4], EXACT_PARTS["cos_axis0"])
        total = form_pairing(form, [0.0], [0.125], g8) + form_pairing(
            form, [0.125], [0.25], g8
        )
        assert total == pytest.approx(form_pairing(form, [0.0], [0.25], g8))

    def test_dim_mismatch(self, g8):
        with pytest.raises(InputError):
            OneForm([1.0, 0.0]).pairing(g8, [0.0], [0.125])


class TestOneForm:
    def test_eta_constant(self, g8):
        eta = OneForm([0.3]).eta_at(g8)
        assert np.allclose(eta, 0.3)

    def test_eta_with_exact(self, g8):
        eta = OneForm([0.0], EXACT_PARTS["sin_axis0"]).eta_at(g8)
        q = g8.coords()[:, 0]
        assert np.allclose(eta[:, 0], 2 * np.pi * np.cos(2 * np.pi * q))

    def test_describe_roundtrip(self):
        d = OneForm([0.5], EXACT_PARTS["zero"]).describe()
        assert d["c"] == [0.5]
        assert d["exact"]["name"] == "zero"
