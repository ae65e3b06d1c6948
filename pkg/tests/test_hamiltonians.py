import numpy as np
import pytest

from weakkam.errors import InputError, NumericError
from weakkam.fixtures import get_pair, get_spec, quartic, sep3_pair
from weakkam.hamiltonians import (
    Combination,
    Mechanical,
    PPoly,
    combine,
    eval_hamiltonian,
    eval_lagrangian,
    free,
    max_abs_bracket,
    pendulum,
    poisson_bracket,
    sample_lattice,
    symmetrize,
    validate_tonelli,
)
from weakkam.torus import OneForm


class TestEvalHamiltonian:
    def test_free_zero_momentum(self):
        assert eval_hamiltonian(free(1), [0.3], [0.0]) == 0.0

    def test_pendulum_origin(self):
        assert eval_hamiltonian(pendulum(), [0.0], [0.0]) == 1.0

    def test_sep3_h2(self):
        _, h2 = sep3_pair()
        assert eval_hamiltonian(h2, [0.0, 0.0], [1.0, 1.0]) == pytest.approx(3.5)

    def test_dim_mismatch(self):
        with pytest.raises(InputError):
            eval_hamiltonian(free(1), [0.0, 0.0], [1.0, 1.0])


class TestEvalLagrangian:
    def test_free_quadratic(self):
        lv = eval_lagrangian(free(1), [0.0], [1.0])
        assert lv.value == pytest.approx(0.5)
        assert lv.argmax_p == pytest.approx([1.0])

    def test_pendulum_rest(self):
        lv = eval_lagrangian(pendulum(), [0.5], [0.0])
        assert lv.value == pytest.approx(1.0)

    def test_quartic_conjugate(self):
        lv = eval_lagrangian(quartic(), [0.0], [1.0])
        assert lv.value == pytest.approx(0.75, abs=1e-10)

    def test_quartic_matches_dense_scan(self):
        spec = quartic()
        for v in (0.3, -1.2, 1.7):
            lv = eval_lagrangian(spec, [0.0], [v])
            ps = np.linspace(-4, 4, 40001)
            brute = np.max(ps * v - 0.25 * ps**4)
            assert lv.value == pytest.approx(brute, abs=1e-6)
            assert lv.value == pytest.approx(0.75 * abs(v) ** (4 / 3), abs=1e-8)

    def test_legendre_roundtrip_on_lattice(self):
        for name in ("pend", "quartic", "sep3_h2"):
            spec = get_spec(name)
            rng = np.random.default_rng(7)
            for _ in range(20):
                q = rng.uniform(0, 1, spec.dim)
                v = rng.uniform(-1.5, 1.5, spec.dim)
                lv = spec.lagrangian(q, v)
                assert np.allclose(spec.grad_p(q, lv.argmax_p), v, atol=1e-8)

    def test_combination_newton_matches_parts(self):
        # a Combination that cannot be folded exercises the Newton path
        comb = Combination([free(1), quartic()], [1.0, 1.0])
        for v in (0.0, 0.5, -1.3):
            lv = comb.lagrangian([0.0], [v])
            ps = np.linspace(-4, 4, 80001)
            brute = np.max(ps * v - (0.5 * ps**2 + 0.25 * ps**4))
            assert lv.value == pytest.approx(brute, abs=1e-6)


class TestPoissonBracket:
    def test_separable_pair_commutes(self):
        h1, h2 = sep3_pair()
        rng = np.random.default_rng(0)
        for _ in range(10):
            q, p = rng.uniform(0, 1, 2), rng.uniform(-2, 2, 2)
            assert poisson_bracket(h1, h2, q, p) == pytest.approx(0.0, abs=1e-12)

    def test_self_bracket_zero(self):
        h = pendulum()
        assert poisson_bracket(h, h, [0.3], [1.2]) == 0.0

    def test_nc_value(self):
        h1, h2 = get_pair("nc")
        val = poisson_bracket(h1, h2, [0.25, 0.0], [1.0, 1.0])
        assert val == pytest.approx(2 * np.pi, abs=1e-12)

    def test_antisymmetry_exact(self):
        h1, h2 = get_pair("nc")
        rng = np.random.default_rng(3)
        for _ in range(10):
            q, p = rng.uniform(0, 1, 2), rng.uniform(-2, 2, 2)
            assert poisson_bracket(h1, h2, q, p) == -poisson_bracket(h2, h1, q, p)

    def test_max_abs_bracket_nc(self):
        h1, h2 = get_pair("nc")
        qs, ps = sample_lattice(2)
        expected = max(
            abs(
                2
                * np.pi
                * (
                    p[0] * np.sin(2 * np.pi * q[0])
                    - p[1] * np.sin(2 * np.pi * q[1])
                )
            )
            for q in qs
            for p in ps
        )
        assert max_abs_bracket(h1, h2) == pytest.approx(expected, abs=1e-9)


class TestSymmetrize:
    def test_free_even(self):
        sym = symmetrize(free(1), OneForm([0.0]))
        for p in (-1.5, 0.0, 2.0):
            assert sym.value([0.2], [p]) == pytest.approx(free(1).value([0.2], [p]))

    def test_pendulum_even(self):
        sym = symmetrize(pendulum(), OneForm([0.0]))
        assert sym.value([0.3], [1.1]) == pytest.approx(pendulum().value([0.3], [1.1]))

    def test_cubic_flips(self):
        spec = PPoly({2: 0.5, 3: 1.0}, dim=1)
        sym = symmetrize(spec, OneForm([0.0]))
        for p in (0.05, 0.1, -0.08):
            assert sym.value([0.0], [p]) == pytest.approx(0.5 * p**2 - p**3)

    def test_lagrangian_identity(self):
        # L of the symmetrized Hamiltonian minus eta equals L(q,-v) minus eta(-v)
        c = 0.37
        form = OneForm([c])
        spec = pendulum()
        sym = symmetrize(spec, form)
        rng = np.random.default_rng(5)
        for _ in range(20):
            q = rng.uniform(0, 1, 1)
            v = rng.uniform(-1.5, 1.5, 1)
            lhs = sym.lagrangian(q, v).value - c * v[0]
            rhs = spec.lagrangian(q, -v).value - c * (-v[0])
            assert lhs == pytest.approx(rhs, abs=1e-8)

    def test_rejects_exact_part(self):
        from weakkam.torus import EXACT_PARTS

        with pytest.raises(InputError):
            symmetrize(pendulum(), OneForm([0.0], EXACT_PARTS["sin_axis0"]))


class TestCombine:
    def test_scaling(self):
        spec = combine([free(1)], [2.0])
        assert spec.value([0.0], [1.0]) == pytest.approx(1.0)

    def test_sep3_sum(self):
        h1, h2 = sep3_pair()
        total = combine([h1, h2], [1.0, 1.0])
        assert total.value([0.0, 0.3], [0.0, 0.0]) == pytest.approx(3.0)

    def test_identity(self):
        h1, _ = sep3_pair()
        same = combine([h1], [1.0])
        rng = np.random.default_rng(1)
        for _ in range(10):
            q, p = rng.uniform(0, 1, 2), rng.uniform(-2, 2, 2)
            assert same.value(q, p) == pytest.approx(h1.value(q, p), abs=1e-12)

    def test_linearity(self):
        a, b = pendulum(), free(1)
        total = combine([a, b], [0.7, 1.3])
        rng = np.random.default_rng(2)
        for _ in range(10):
            q, p = rng.uniform(0, 1, 1), rng.uniform(-2, 2, 1)
            expected = 0.7 * a.value(q, p) + 1.3 * b.value(q, p)
            assert total.value(q, p) == pytest.approx(expected, abs=1e-14)

    def test_nonpositive_weight(self):
        with pytest.raises(InputError):
            combine([free(1), free(1)], [1.0, -1.0])

    def test_dim_mismatch(self):
        with pytest.raises(InputError):
            combine([free(1), free(2)], [1.0, 1.0])


class TestValidateTonelli:
    def test_fixtures_pass(self):
        for name in ("free1", "pend", "quartic", "sep3_h1", "nc_h1"):
            validate_tonelli(get_spec(name))

    def test_concave_fails(self):
        with pytest.raises(InputError):
            validate_tonelli(PPoly({2: -0.5}, dim=1))

    def test_sublinear_fails(self):
        # linear growth: convexity degenerate at the sampled Hessian
        with pytest.raises(InputError):
            validate_tonelli(PPoly({1: 1.0}, dim=1))
