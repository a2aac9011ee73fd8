"""Stäckel transform (coupling-constant metamorphosis) for natural Hamiltonians.

A natural Hamiltonian ``H = p^2 / mu(q) + V(q)`` is mapped by a positive
function ``U`` to ``H~ = H / U`` with ``mu~ = mu U`` and ``V~ = V / U``.  A
second-order symmetry ``S = S_0 + W`` of ``H`` whose quadratic part also
yields a symmetry ``S_U = S_0 + W_U`` of ``H_U = p^2 / mu + U`` is carried to

    S~ = S_0 - (W_U / U) H + H / U = S_0 + (1 - W_U) H~.

The free-motion instance with ``U = 1 + lam q^2`` reproduces the integrals of
the deformed oscillator: ``S~^(m) = C^(m) + H~`` and ``S~_ij = I_ij + H~``
with ``H~ = H_lam - alpha`` and ``2 lam alpha = omega^2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict

import numpy as np

from .errors import DomainError, FlatLimitError
from .integrals import PhaseFunction
from .model import Kind, Parameters, resolve_kind


@dataclass(frozen=True)
class ScalarField:
    """A function of ``q`` with its gradient."""

    value: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]

    @classmethod
    def constant(cls, c: float) -> "ScalarField":
        return cls(lambda q: float(c), lambda q: np.zeros_like(np.asarray(q, float)))

    def __call__(self, q):
        return self.value(q)

    def __mul__(self, other):
        other = _field(other)
        return ScalarField(lambda q: self.value(q) * other.value(q),
                           lambda q: self.grad(q) * other.value(q) + self.value(q) * other.grad(q))

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _field(other)

        def grad(q):
            b = other.value(q)
            return (self.grad(q) * b - self.value(q) * other.grad(q)) / (b * b)

        return ScalarField(lambda q: self.value(q) / other.value(q), grad)


def _field(x) -> ScalarField:
    return x if isinstance(x, ScalarField) else ScalarField.constant(x)


def radial_quadratic(a: float, b: float) -> ScalarField:
    """``a + b q^2``."""
    return ScalarField(lambda q: a + b * float(np.dot(q, q)), lambda q: 2.0 * b * np.asarray(q, float))


@dataclass(frozen=True)
class NaturalHamiltonian:
    """``H(q, p) = p^2 / mu(q) + V(q)``."""

    mu: ScalarField
    v: ScalarField
    name: str = ""

    def value(self, q, p) -> float:
        mu = self.mu.value(q)
        if mu <= 0:
            raise DomainError(f"mu = {mu!r} is not positive")
        return float(np.dot(p, p)) / mu + self.v.value(q)

    def gradient(self, q, p):
        mu = self.mu.value(q)
        if mu <= 0:
            raise DomainError(f"mu = {mu!r} is not positive")
        p2 = float(np.dot(p, p))
        return -p2 * self.mu.grad(q) / (mu * mu) + self.v.grad(q), 2.0 * np.asarray(p, float) / mu

    def as_function(self) -> PhaseFunction:
        return PhaseFunction(self.value, self.gradient, self.name)


@dataclass(frozen=True)
class SecondOrderSymmetry:
    """``S = sum a^ij(q) p_i p_j + W(q)`` plus the potential part ``W_U`` of
    the matching symmetry of the intermediate system.

    ``a_grad(q)[i, j, k]`` is ``d a^ij / d q_k``.
    """

    a: Callable[[np.ndarray], np.ndarray]
    a_grad: Callable[[np.ndarray], np.ndarray]
    w: ScalarField
    w_u: ScalarField
    name: str = ""

    def quadratic_part(self, q, p) -> float:
        a = self.a(q)
        return float(p @ a @ p)

    def quadratic_gradient(self, q, p):
        a = self.a(q)
        da = self.a_grad(q)
        return np.einsum("i,ijk,j->k", p, da, p), 2.0 * a @ p

    def _with_potential(self, pot: ScalarField, name: str) -> PhaseFunction:
        def value(q, p):
            return self.quadratic_part(q, p) + pot.value(q)

        def gradient(q, p):
            dq, dp = self.quadratic_gradient(q, p)
            return dq + pot.grad(q), dp

        return PhaseFunction(value, gradient, name)

    def as_function(self) -> PhaseFunction:
        """``S = S_0 + W`` (symmetry of the initial Hamiltonian)."""
        return self._with_potential(self.w, self.name)

    def intermediate_function(self) -> PhaseFunction:
        """``S_U = S_0 + W_U`` (symmetry of the intermediate Hamiltonian)."""
        return self._with_potential(self.w_u, self.name + "_U")


def staeckel_transform(h: NaturalHamiltonian, u: ScalarField, name: str = "") -> NaturalHamiltonian:
    """``H~ = H / U``, i.e. ``mu~ = mu U`` and ``V~ = V / U``.

    Positivity of ``U`` is checked at evaluation time (through ``mu~``).
    """
    return NaturalHamiltonian(h.mu * u, h.v / u, name or f"{h.name}/U")


def transform_symmetry(s: SecondOrderSymmetry, h_tilde: NaturalHamiltonian, u: ScalarField) -> PhaseFunction:
    """Transported symmetry ``S~ = S_0 - (W_U/U) H + H/U`` as a phase function.

    ``H`` is the initial Hamiltonian, recovered here as ``U H~``, so the
    result reads ``S_0 + (1 - W_U) H~``.
    """

    def check(q):
        uq = u.value(q)
        if uq <= 0:
            raise DomainError(f"U = {uq!r} is not positive")

    def value(q, p):
        check(q)
        return s.quadratic_part(q, p) + (1.0 - s.w_u.value(q)) * h_tilde.value(q, p)

    def gradient(q, p):
        check(q)
        s0q, s0p = s.quadratic_gradient(q, p)
        ht = h_tilde.value(q, p)
        hq, hp = h_tilde.gradient(q, p)
        coef = 1.0 - s.w_u.value(q)
        return s0q - ht * s.w_u.grad(q) + coef * hq, s0p + coef * hp

    return PhaseFunction(value, gradient, f"~{s.name}")


# ---------------------------------------------------------------- the model instance

def _block_indices(n, m, lower):
    return list(range(n - m, n)) if lower else list(range(m))


def angular_symmetry(n: int, m: int, lower: bool = False) -> SecondOrderSymmetry:
    """``C^(m)`` (or ``C_(m)``) as ``p^T a(q) p`` with
    ``a = |q_B|^2 P_B - q_B q_B^T`` on the index block ``B``."""
    idx = _block_indices(n, m, lower)
    mask = np.zeros(n)
    mask[idx] = 1.0

    def a(q):
        qb = np.asarray(q, float) * mask
        return float(qb @ qb) * np.diag(mask) - np.outer(qb, qb)

    def a_grad(q):
        qb = np.asarray(q, float) * mask
        eye = np.eye(n)
        da = 2.0 * np.einsum("ij,k->ijk", np.diag(mask), qb)
        da -= np.einsum("ik,j->ijk", eye * mask[:, None], qb)
        da -= np.einsum("i,jk->ijk", qb, eye * mask[:, None])
        return da

    zero = ScalarField.constant(0.0)
    return SecondOrderSymmetry(a, a_grad, zero, zero, f"C_({m})" if lower else f"C^({m})")


def momentum_symmetry(n: int, i: int, j: int, lam: float) -> SecondOrderSymmetry:
    """``p_i p_j`` with intermediate potential ``W_U = 2 lam q_i q_j``."""
    a_const = np.zeros((n, n))
    a_const[i, j] += 0.5
    a_const[j, i] += 0.5
    da = np.zeros((n, n, n))

    def wu_grad(q):
        g = np.zeros(n)
        g[i] += 2.0 * lam * q[j]
        g[j] += 2.0 * lam * q[i]
        return g

    w_u = ScalarField(lambda q: 2.0 * lam * float(q[i] * q[j]), wu_grad)
    return SecondOrderSymmetry(lambda q: a_const, lambda q: da, ScalarField.constant(0.0), w_u,
                               f"S_{i + 1}{j + 1}")


@dataclass(frozen=True)
class StaeckelInstance:
    """Free motion -> deformed oscillator, with all transported symmetries.

    ``final`` is ``H~ = H_lam - alpha``; ``symmetries`` maps a label to the
    free-motion symmetry and ``transported`` to its image under the transform.
    """

    params: Parameters
    alpha: float
    u: ScalarField
    initial: NaturalHamiltonian
    intermediate: NaturalHamiltonian
    final: NaturalHamiltonian
    symmetries: Dict[str, SecondOrderSymmetry] = field(default_factory=dict)
    transported: Dict[str, PhaseFunction] = field(default_factory=dict)

    def __iter__(self):
        return iter((self.initial, self.intermediate, self.final, self.symmetries))


def build_oscillator_instance(params: Parameters) -> StaeckelInstance:
    """Free Euclidean motion ``H = p^2/2 - alpha`` transformed by ``U = 1 + lam q^2``.

    The intermediate system is ``H_U = p^2/2 + lam q^2 + 1``.
    """
    if params.lam == 0:
        raise FlatLimitError("alpha = omega^2 / (2 lam) needs lam != 0")
    lam, n = params.lam, params.n_dim
    alpha = params.omega**2 / (2.0 * lam)
    u = radial_quadratic(1.0, lam)
    two = ScalarField.constant(2.0)
    initial = NaturalHamiltonian(two, ScalarField.constant(-alpha), "H")
    intermediate = NaturalHamiltonian(two, u, "H_U")
    final = staeckel_transform(initial, u, "H~")
    syms: Dict[str, SecondOrderSymmetry] = {}
    for m in range(2, n + 1):
        syms[f"C^({m})"] = angular_symmetry(n, m)
    for m in range(2, n):
        syms[f"C_({m})"] = angular_symmetry(n, m, lower=True)
    for i in range(n):
        for j in range(i, n):
            syms[f"S_{i + 1}{j + 1}"] = momentum_symmetry(n, i, j, lam)
    transported = {k: transform_symmetry(s, final, u) for k, s in syms.items()}
    return StaeckelInstance(params, alpha, u, initial, intermediate, final, syms, transported)


@dataclass
class StaeckelReport:
    alpha: float
    identity_max: Dict[str, float]
    bracket_max: Dict[str, float]
    identity_tol: float = 1e-12
    bracket_tol: float = 1e-9

    @property
    def passed(self) -> bool:
        return (all(v <= self.identity_tol for v in self.identity_max.values())
                and all(v <= self.bracket_tol for v in self.bracket_max.values()))


def check_instance(params: Parameters, kind, samples: int, seed: int = 0) -> StaeckelReport:
    """Residuals of the transported integrals against the direct ones.

    Identities: ``H~ + alpha = H_lam``, ``S~^(m) - H~ = C^(m)`` (also
    ``C_(m)``) and ``S~_ij - H~ = I_ij``.  Brackets: ``{H, S}``,
    ``{H_U, S_U}`` and ``{H~, S~}`` for every symmetry.
    """
    from .integrals import _algebraic_h, angular_function, fradkin_function, poisson_bracket, sample_generic_states

    if resolve_kind(params, kind) is Kind.TYPE_III:
        raise DomainError("U = 1 + lam q^2 is negative on the exterior region")
    inst = build_oscillator_instance(params)
    n = params.n_dim
    direct = {f"C^({m})": angular_function(n, m) for m in range(2, n + 1)}
    direct.update({f"C_({m})": angular_function(n, m, lower=True) for m in range(2, n)})
    direct.update({f"S_{i + 1}{j + 1}": fradkin_function(params, i, j, kind)
                   for i in range(n) for j in range(i, n)})
    states = sample_generic_states(params, kind, samples, np.random.default_rng(seed))
    ident = {"H~+alpha-H": 0.0, "S~^(m)-H~-C^(m)": 0.0, "S~_ij-H~-I_ij": 0.0}
    brackets = {"{H,S}": 0.0, "{H_U,S_U}": 0.0, "{H~,S~}": 0.0}
    h_init = inst.initial.as_function()
    h_mid = inst.intermediate.as_function()
    h_fin = inst.final.as_function()
    for s in states:
        q, p = s.q, s.p
        ht = inst.final.value(q, p)
        ident["H~+alpha-H"] = max(ident["H~+alpha-H"], abs(ht + inst.alpha - float(_algebraic_h(params, q, p))))
        for name, f in inst.transported.items():
            key = "S~_ij-H~-I_ij" if name.startswith("S_") else "S~^(m)-H~-C^(m)"
            ident[key] = max(ident[key], abs(f.value(q, p) - ht - direct[name].value(q, p)))
            sym = inst.symmetries[name]
            brackets["{H,S}"] = max(brackets["{H,S}"], abs(poisson_bracket(h_init, sym.as_function(), s)))
            brackets["{H_U,S_U}"] = max(brackets["{H_U,S_U}"],
                                        abs(poisson_bracket(h_mid, sym.intermediate_function(), s)))
            brackets["{H~,S~}"] = max(brackets["{H~,S~}"], abs(poisson_bracket(h_fin, f, s)))
    return StaeckelReport(inst.alpha, ident, brackets)
