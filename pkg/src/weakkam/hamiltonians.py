"""Parametric Tonelli Hamiltonian families on T^d with exact derivatives.

Every family carries analytic first derivatives (so Poisson brackets can
distinguish an exact zero from discretization noise), the fiberwise Hessian,
and a Legendre transform to the Lagrangian side.  Closed forms are used
where they exist; otherwise a bracketed Newton solve on the momentum.

Families compose: per-axis 1D terms form separable Hamiltonians, positive
linear combinations fold back into closed-form families whenever the
structure allows it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import InputError, NumericError
from .torus import OneForm

_NEWTON_TOL = 1e-12
_NEWTON_MAX_ITER = 60


@dataclass(frozen=True)
class LagrangianValue:
    """Value of the convex conjugate and the momentum achieving it."""

    value: float
    argmax_p: np.ndarray


class Hamiltonian:
    """Base class: H(q, p) with analytic derivatives and Legendre transform."""

    dim: int

    # -- pointwise evaluation ------------------------------------------------

    def value(self, q: np.ndarray, p: np.ndarray) -> float:
        raise NotImplementedError

    def grad_q(self, q: np.ndarray, p: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def grad_p(self, q: np.ndarray, p: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def hess_p(self, q: np.ndarray, p: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def describe(self) -> dict:
        raise NotImplementedError

    # -- Legendre transform --------------------------------------------------

    def lagrangian(self, q: np.ndarray, v: np.ndarray) -> LagrangianValue:
        """sup_p (p.v - H(q, p)), solved by safeguarded Newton by default."""
        q = _check_vec(q, self.dim, "q")
        v = _check_vec(v, self.dim, "v")
        p = _newton_legendre(self, q, v)
        return LagrangianValue(float(np.dot(p, v) - self.value(q, p)), p)

    def lagrangian_many(self, qs: np.ndarray, v: np.ndarray) -> np.ndarray:
        """L(q, v) for many q at a common v.  Subclasses add fast paths."""
        return np.array([self.lagrangian(q, v).value for q in qs])

    def q_dependent(self) -> bool:
        return True


def _check_vec(x, dim, name) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (dim,):
        raise InputError(f"{name} has shape {x.shape}, expected ({dim},)")
    return x


def _newton_legendre(ham: Hamiltonian, q, v) -> np.ndarray:
    """Solve grad_p H(q, p) = v; Newton with a dense-scan fallback."""
    p = v.copy()  # exact for unit-mass mechanical families, decent elsewhere
    for _ in range(_NEWTON_MAX_ITER):
        r = ham.grad_p(q, p) - v
        if np.max(np.abs(r)) <= _NEWTON_TOL:
            return p
        hess = np.atleast_2d(ham.hess_p(q, p))
        try:
            step = np.linalg.solve(hess, r)
        except np.linalg.LinAlgError:
            break
        # halve the step while it leaves the convex region or worsens residual
        t = 1.0
        for _ in range(40):
            cand = p - t * step
            hc = np.atleast_2d(ham.hess_p(q, cand))
            if np.all(np.linalg.eigvalsh(hc) > 0):
                rc = ham.grad_p(q, cand) - v
                if np.max(np.abs(rc)) < np.max(np.abs(r)):
                    break
            t *= 0.5
        else:
            break
        p = p - t * step
    p = _scan_legendre(ham, q, v)
    r = ham.grad_p(q, p) - v
    if np.max(np.abs(r)) > 1e-9:
        raise NumericError(
            f"Legendre solve failed at q={q}, v={v}: residual {np.max(np.abs(r))}"
        )
    return p


def _scan_legendre(ham: Hamiltonian, q, v) -> np.ndarray:
    """Dense momentum scan followed by local Newton polishing."""
    radius = 1.0
    best = None
    for _ in range(12):
        axis = np.linspace(-radius, radius, 41 if ham.dim == 2 else 2001)
        grids = np.meshgrid(*([axis] * ham.dim), indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=-1)
        vals = np.array([np.dot(pp, v) - ham.value(q, pp) for pp in pts])
        k = int(np.argmax(vals))
        best = pts[k]
        if np.max(np.abs(best)) < radius - axis[1] + axis[0]:
            break
        radius *= 2.0
    p = best
    for _ in range(_NEWTON_MAX_ITER):
        r = ham.grad_p(q, p) - v
        if np.max(np.abs(r)) <= _NEWTON_TOL:
            break
        hess = np.atleast_2d(ham.hess_p(q, p))
        try:
            p = p - np.linalg.solve(hess, r)
        except np.linalg.LinAlgError:
            break
    return p


# ---------------------------------------------------------------------------
# momentum-only polynomials
# ---------------------------------------------------------------------------


class PPoly(Hamiltonian):
    """H(p) = sum over axes of a polynomial in the axis momentum.

    coeffs maps power -> coefficient; the same polynomial applies per axis,
    so PPoly({2: 0.5}, dim=2) is the free Hamiltonian |p|^2 / 2.
    """

    def __init__(self, coeffs: dict, dim: int = 1):
        self.coeffs = {int(k): float(a) for k, a in coeffs.items() if a != 0.0}
        self.dim = dim

    def value(self, q, p):
        p = _check_vec(p, self.dim, "p")
        return float(sum(a * np.sum(p**k) for k, a in self.coeffs.items()))

    def grad_q(self, q, p):
        return np.zeros(self.dim)

    def grad_p(self, q, p):
        p = _check_vec(p, self.dim, "p")
        out = np.zeros(self.dim)
        for k, a in self.coeffs.items():
            if k >= 1:
                out += a * k * p ** (k - 1)
        return out

    def hess_p(self, q, p):
        p = _check_vec(p, self.dim, "p")
        diag = np.zeros(self.dim)
        for k, a in self.coeffs.items():
            if k >= 2:
                diag += a * k * (k - 1) * p ** (k - 2)
        return np.diag(diag)

    def q_dependent(self):
        return False

    def lagrangian(self, q, v):
        v = _check_vec(v, self.dim, "v")
        if set(self.coeffs) <= {0, 2}:
            a = self.coeffs.get(2, 0.0)
            if a <= 0:
                raise NumericError("degenerate quadratic momentum polynomial")
            p = v / (2 * a)
            val = np.sum(v**2) / (4 * a) - self.coeffs.get(0, 0.0) * self.dim
            return LagrangianValue(float(val), p)
        q = np.zeros(self.dim) if q is None else _check_vec(q, self.dim, "q")
        p = _newton_legendre(self, q, v)
        return LagrangianValue(float(np.dot(p, v) - self.value(q, p)), p)

    def lagrangian_many(self, qs, v):
        val = self.lagrangian(np.zeros(self.dim), v).value
        return np.full(len(qs), val)

    def scaled(self, w: float) -> "PPoly":
        return PPoly({k: w * a for k, a in self.coeffs.items()}, self.dim)

    def describe(self):
        return {
            "family": "p_poly",
            "coeffs": {str(k): a for k, a in sorted(self.coeffs.items())},
            "dim": self.dim,
        }


def free(dim: int = 1) -> PPoly:
    """|p|^2 / 2."""
    return PPoly({2: 0.5}, dim=dim)


# ---------------------------------------------------------------------------
# mechanical: kinetic * |p|^2 / 2 + trigonometric potential
# ---------------------------------------------------------------------------


class Mechanical(Hamiltonian):
    """H(q, p) = kinetic |p|^2 / 2 + sum_j amp_j cos(2 pi m_j . q)."""

    def __init__(self, potential: Sequence, dim: int = 1, kinetic: float = 1.0):
        if kinetic <= 0:
            raise InputError(f"kinetic coefficient must be positive, got {kinetic}")
        self.kinetic = float(kinetic)
        self.dim = dim
        terms = []
        for amp, m in potential:
            m = np.atleast_1d(np.asarray(m, dtype=float))
            if m.shape != (dim,):
                raise InputError(f"potential frequency {m} does not match dim {dim}")
            terms.append((float(amp), m))
        self.potential = tuple(terms)

    def potential_value(self, q) -> float:
        q = _check_vec(q, self.dim, "q")
        return float(
            sum(a * math.cos(2 * math.pi * float(np.dot(m, q))) for a, m in self.potential)
        )

    def potential_many(self, qs: np.ndarray) -> np.ndarray:
        out = np.zeros(len(qs))
        for a, m in self.potential:
            out += a * np.cos(2 * np.pi * (qs @ m))
        return out

    def value(self, q, p):
        p = _check_vec(p, self.dim, "p")
        return float(0.5 * self.kinetic * np.sum(p**2) + self.potential_value(q))

    def grad_q(self, q, p):
        q = _check_vec(q, self.dim, "q")
        out = np.zeros(self.dim)
        for a, m in self.potential:
            out += -a * 2 * math.pi * math.sin(2 * math.pi * float(np.dot(m, q))) * m
        return out

    def grad_p(self, q, p):
        p = _check_vec(p, self.dim, "p")
        return self.kinetic * p

    def hess_p(self, q, p):
        return self.kinetic * np.eye(self.dim)

    def lagrangian(self, q, v):
        v = _check_vec(v, self.dim, "v")
        p = v / self.kinetic
        val = 0.5 * np.sum(v**2) / self.kinetic - self.potential_value(q)
        return LagrangianValue(float(val), p)

    def lagrangian_many(self, qs, v):
        v = _check_vec(v, self.dim, "v")
        kin = 0.5 * np.sum(v**2) / self.kinetic
        return kin - self.potential_many(np.asarray(qs, dtype=float))

    def scaled(self, w: float) -> "Mechanical":
        return Mechanical(
            [(w * a, m) for a, m in self.potential], self.dim, kinetic=w * self.kinetic
        )

    def describe(self):
        return {
            "family": "mechanical",
            "kinetic": self.kinetic,
            "potential": [[a, [float(x) for x in m]] for a, m in self.potential],
            "dim": self.dim,
        }


def pendulum() -> Mechanical:
    """p^2 / 2 + cos(2 pi q) on T^1."""
    return Mechanical([(1.0, [1])], dim=1)


# ---------------------------------------------------------------------------
# separable sums of per-axis 1D terms
# ---------------------------------------------------------------------------


class Separable(Hamiltonian):
    """H(q, p) = sum_i f_i(q_i, p_i) with one 1D Hamiltonian per axis."""

    def __init__(self, terms: Sequence[Hamiltonian]):
        for t in terms:
            if t.dim != 1:
                raise InputError("separable terms must be 1D Hamiltonians")
        self.terms = tuple(terms)
        self.dim = len(terms)

    def value(self, q, p):
        q = _check_vec(q, self.dim, "q")
        p = _check_vec(p, self.dim, "p")
        return float(
            sum(t.value(q[i : i + 1], p[i : i + 1]) for i, t in enumerate(self.terms))
        )

    def grad_q(self, q, p):
        q = _check_vec(q, self.dim, "q")
        p = _check_vec(p, self.dim, "p")
        return np.array(
            [t.grad_q(q[i : i + 1], p[i : i + 1])[0] for i, t in enumerate(self.terms)]
        )

    def grad_p(self, q, p):
        q = _check_vec(q, self.dim, "q")
        p = _check_vec(p, self.dim, "p")
        return np.array(
            [t.grad_p(q[i : i + 1], p[i : i + 1])[0] for i, t in enumerate(self.terms)]
        )

    def hess_p(self, q, p):
        q = _check_vec(q, self.dim, "q")
        p = _check_vec(p, self.dim, "p")
        return np.diag(
            [t.hess_p(q[i : i + 1], p[i : i + 1])[0, 0] for i, t in enumerate(self.terms)]
        )

    def lagrangian(self, q, v):
        q = _check_vec(q, self.dim, "q")
        v = _check_vec(v, self.dim, "v")
        parts = [
            t.lagrangian(q[i : i + 1], v[i : i + 1]) for i, t in enumerate(self.terms)
        ]
        p = np.array([lv.argmax_p[0] for lv in parts])
        return LagrangianValue(float(sum(lv.value for lv in parts)), p)

    def lagrangian_many(self, qs, v):
        qs = np.asarray(qs, dtype=float)
        v = _check_vec(v, self.dim, "v")
        out = np.zeros(len(qs))
        for i, t in enumerate(self.terms):
            out += t.lagrangian_many(qs[:, i : i + 1], v[i : i + 1])
        return out

    def q_dependent(self):
        return any(t.q_dependent() for t in self.terms)

    def scaled(self, w: float) -> "Separable":
        return Separable([t.scaled(w) for t in self.terms])

    def describe(self):
        return {"family": "separable", "terms": [t.describe() for t in self.terms]}


# ---------------------------------------------------------------------------
# positive linear combinations (generic fallback)
# ---------------------------------------------------------------------------


class Combination(Hamiltonian):
    """Weighted sum of Hamiltonians; Legendre transform via Newton.

    Note the Lagrangian of a sum is not the sum of Lagrangians, so only the
    Hamiltonian side is a literal weighted sum here.
    """

    def __init__(self, parts: Sequence[Hamiltonian], weights: Sequence[float]):
        if len(parts) != len(weights):
            raise InputError("parts and weights differ in length")
        if any(w <= 0 for w in weights):
            raise InputError("weights must be positive (convexity not guaranteed)")
        dims = {h.dim for h in parts}
        if len(dims) != 1:
            raise InputError(f"mixed dimensions in combination: {dims}")
        self.parts = tuple(parts)
        self.weights = tuple(float(w) for w in weights)
        self.dim = parts[0].dim

    def value(self, q, p):
        return float(sum(w * h.value(q, p) for h, w in zip(self.parts, self.weights)))

    def grad_q(self, q, p):
        return sum(w * h.grad_q(q, p) for h, w in zip(self.parts, self.weights))

    def grad_p(self, q, p):
        return sum(w * h.grad_p(q, p) for h, w in zip(self.parts, self.weights))

    def hess_p(self, q, p):
        return sum(w * h.hess_p(q, p) for h, w in zip(self.parts, self.weights))

    def q_dependent(self):
        return any(h.q_dependent() for h in self.parts)

    def lagrangian_many(self, qs, v):
        if not self.q_dependent():
            val = self.lagrangian(np.zeros(self.dim), v).value
            return np.full(len(qs), val)
        return super().lagrangian_many(qs, v)

    def scaled(self, w: float) -> "Combination":
        return Combination(self.parts, [w * wi for wi in self.weights])

    def describe(self):
        return {
            "family": "combination",
            "parts": [h.describe() for h in self.parts],
            "weights": list(self.weights),
        }


# ---------------------------------------------------------------------------
# momentum reflection around a 1-form (time reversal)
# ---------------------------------------------------------------------------


class Symmetrized(Hamiltonian):
    """The momentum-reflected Hamiltonian: H'(q, eta + p) = H(q, eta - p).

    Equivalently H'(q, p) = H(q, 2 eta_q - p).  Only constant representatives
    (no exact part) are accepted: with a non-constant eta the q-derivative
    would need the second derivatives of the exact part.
    """

    def __init__(self, base: Hamiltonian, form: OneForm):
        if form.dim != base.dim:
            raise InputError(f"form dim {form.dim} != Hamiltonian dim {base.dim}")
        if form.exact is not None:
            raise InputError(
                "symmetrization needs a constant 1-form representative; "
                "drop the exact part (it changes nothing cohomological)"
            )
        self.base = base
        self.form_shift = form
        self.dim = base.dim

    def _reflect(self, p):
        return 2 * self.form_shift.c - _check_vec(p, self.dim, "p")

    def value(self, q, p):
        return self.base.value(q, self._reflect(p))

    def grad_q(self, q, p):
        return self.base.grad_q(q, self._reflect(p))

    def grad_p(self, q, p):
        return -self.base.grad_p(q, self._reflect(p))

    def hess_p(self, q, p):
        return self.base.hess_p(q, self._reflect(p))

    def q_dependent(self):
        return self.base.q_dependent()

    def lagrangian(self, q, v):
        # L'(q, v) = L(q, -v) + 2 eta(v), an exact identity for constant eta
        v = _check_vec(v, self.dim, "v")
        inner = self.base.lagrangian(q, -v)
        val = inner.value + 2 * float(np.dot(self.form_shift.c, v))
        return LagrangianValue(val, 2 * self.form_shift.c - inner.argmax_p)

    def lagrangian_many(self, qs, v):
        v = _check_vec(v, self.dim, "v")
        shift = 2 * float(np.dot(self.form_shift.c, v))
        return self.base.lagrangian_many(qs, -v) + shift

    def describe(self):
        return {
            "family": "symmetrized",
            "base": self.base.describe(),
            "form": self.form_shift.describe(),
        }


def symmetrize(spec: Hamiltonian, form: OneForm) -> Hamiltonian:
    """Reflect momenta around a (constant-representative) closed 1-form."""
    return Symmetrized(spec, form)


# ---------------------------------------------------------------------------
# structural combination with closed-form folding
# ---------------------------------------------------------------------------


def _try_fold(a: Hamiltonian, b: Hamiltonian) -> Optional[Hamiltonian]:
    if isinstance(a, PPoly) and isinstance(b, PPoly) and a.dim == b.dim:
        coeffs = dict(a.coeffs)
        for k, c in b.coeffs.items():
            coeffs[k] = coeffs.get(k, 0.0) + c
        return PPoly(coeffs, a.dim)
    if isinstance(a, Mechanical) and isinstance(b, Mechanical) and a.dim == b.dim:
        return Mechanical(
            list(a.potential) + list(b.potential), a.dim, kinetic=a.kinetic + b.kinetic
        )
    if isinstance(a, Mechanical) and isinstance(b, PPoly) and a.dim == b.dim:
        if set(b.coeffs) <= {2}:
            return Mechanical(
                list(a.potential), a.dim, kinetic=a.kinetic + 2 * b.coeffs.get(2, 0.0)
            )
    if isinstance(a, PPoly) and isinstance(b, Mechanical):
        return _try_fold(b, a)
    if isinstance(a, Separable) and isinstance(b, Separable) and a.dim == b.dim:
        folded = [_try_fold(ta, tb) for ta, tb in zip(a.terms, b.terms)]
        if all(f is not None for f in folded):
            return Separable(folded)
    return None


def combine(specs: Sequence[Hamiltonian], weights: Sequence[float]) -> Hamiltonian:
    """Positive linear combination, folded into a closed-form family if possible."""
    if len(specs) != len(weights) or not specs:
        raise InputError("combine needs matching, nonempty specs and weights")
    if any(w <= 0 for w in weights):
        raise InputError("weights must be positive (convexity not guaranteed)")
    acc = specs[0].scaled(weights[0]) if hasattr(specs[0], "scaled") else None
    if acc is not None:
        for h, w in zip(specs[1:], weights[1:]):
            if not hasattr(h, "scaled"):
                acc = None
                break
            folded = _try_fold(acc, h.scaled(w))
            if folded is None:
                acc = None
                break
            acc = folded
    result = acc if acc is not None else Combination(specs, weights)
    validate_tonelli(result)
    return result


# ---------------------------------------------------------------------------
# evaluation helpers and diagnostics
# ---------------------------------------------------------------------------


def eval_hamiltonian(spec: Hamiltonian, q, p) -> float:
    q = _check_vec(q, spec.dim, "q")
    p = _check_vec(p, spec.dim, "p")
    return spec.value(q, p)


def eval_lagrangian(spec: Hamiltonian, q, v) -> LagrangianValue:
    return spec.lagrangian(np.asarray(q, dtype=float), np.asarray(v, dtype=float))


def poisson_bracket(spec1: Hamiltonian, spec2: Hamiltonian, q, p) -> float:
    """{H1, H2} = sum_i dH1/dp_i dH2/dq_i - dH1/dq_i dH2/dp_i."""
    if spec1.dim != spec2.dim:
        raise InputError(f"dimension mismatch: {spec1.dim} vs {spec2.dim}")
    q = _check_vec(q, spec1.dim, "q")
    p = _check_vec(p, spec1.dim, "p")
    return float(
        np.dot(spec1.grad_p(q, p), spec2.grad_q(q, p))
        - np.dot(spec1.grad_q(q, p), spec2.grad_p(q, p))
    )


def sample_lattice(dim: int, n_q: int = 8, p_radius: float = 2.0, n_p: int = 5):
    """Default (q, p) sample lattice used by bracket and Tonelli diagnostics."""
    qs = np.stack(
        [m.ravel() for m in np.meshgrid(*([np.linspace(0, 1, n_q, endpoint=False)] * dim), indexing="ij")],
        axis=-1,
    )
    axis = np.linspace(-p_radius, p_radius, n_p)
    ps = np.stack(
        [m.ravel() for m in np.meshgrid(*([axis] * dim), indexing="ij")], axis=-1
    )
    return qs, ps


def max_abs_bracket(spec1, spec2, q_points=None, p_points=None) -> float:
    """max |{H1, H2}| over a sample lattice; 0 certifies nothing, but a
    nonzero value certifies non-involutivity."""
    if q_points is None or p_points is None:
        qs, ps = sample_lattice(spec1.dim)
        q_points = qs if q_points is None else q_points
        p_points = ps if p_points is None else p_points
    best = 0.0
    for q in q_points:
        for p in p_points:
            best = max(best, abs(poisson_bracket(spec1, spec2, q, p)))
    return best


def validate_tonelli(
    spec: Hamiltonian, v_max: float = 2.0, n_q: int = 32, n_p: int = 7
) -> None:
    """Sampled Tonelli gate: fiberwise Hessian PD and superlinear growth.

    Heuristic, not a proof: checked on an n_q^dim lattice in q and a momentum
    ball of radius twice the momentum needed to reach speed v_max.
    """
    if spec.dim == 2:
        n_q = min(n_q, 16)  # keep the 2D lattice at desk scale
    # momentum scale: expand until every sampled direction reaches v_max
    radius = 1.0
    q0 = np.zeros(spec.dim)
    dirs = np.eye(spec.dim)
    for _ in range(24):
        speeds = [float(np.dot(d, spec.grad_p(q0, radius * d))) for d in dirs]
        if min(speeds) >= v_max:
            break
        radius *= 2.0
    else:
        raise InputError("superlinear growth check failed: momentum scale diverged")
    qs, ps = sample_lattice(spec.dim, n_q=n_q, p_radius=2 * radius, n_p=n_p)
    for q in qs:
        for p in ps:
            h = np.atleast_2d(spec.hess_p(q, p))
            if not np.all(np.linalg.eigvalsh(h) >= -1e-12):
                raise InputError(
                    f"fiberwise Hessian not positive semidefinite at q={q}, p={p}"
                )
            # the Hessian may legitimately vanish on a thin set (e.g. pure
            # quartics at p=0), so strict convexity is checked by midpoints
            delta = 0.25 * radius
            for d in dirs:
                gap = (
                    spec.value(q, p + delta * d)
                    + spec.value(q, p - delta * d)
                    - 2 * spec.value(q, p)
                )
                if gap <= 0:
                    raise InputError(
                        f"fiberwise strict convexity fails at q={q}, p={p}"
                    )
    # superlinearity proxy: at the sampled ball boundary H grows faster than
    # any linear bound with slope v_max
    r = 2 * radius
    for q in qs[:: max(1, len(qs) // 8)]:
        for d in dirs:
            for s in (+1.0, -1.0):
                p = s * r * d
                if spec.value(q, p) - spec.value(q, 0 * p) < v_max * r - 1e-9:
                    raise InputError(
                        f"superlinear growth check failed at q={q}, p={p}"
                    )
