"""Constants of motion, Poisson brackets and functional independence.

The integrals are

* angular blocks ``C^(m) = sum_{1<=i<j<=m} L_ij^2`` (leading indices) and
  ``C_(m) = sum_{N-m<i<j<=N} L_ij^2`` (trailing indices), ``L_ij = q_i p_j - q_j p_i``;
* the curved Fradkin tensor ``I_ij = p_i p_j - (2 lam H - omega^2) q_i q_j``.

``H`` inside the Fradkin tensor is always the unsigned algebraic expression
``(p^2 + omega^2 q^2) / (2 (1 + lam q^2))`` so that ``trace(I)/2 == H`` holds
identically; on the exterior region the physical energy is ``-H``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import DegenerateStateError, DomainError
from .model import (Kind, KindLike, Parameters, PhaseState, hamiltonian, hamiltonian_gradient,
                    resolve_kind, validate_domain)

Gradient = Tuple[np.ndarray, np.ndarray]

BRACKET_TOL = 1e-9
RANK_RTOL = 1e-10
_FD_EPS = np.finfo(float).eps ** (1.0 / 3.0)


@dataclass(frozen=True)
class PhaseFunction:
    """A scalar function on phase space with an optional analytic gradient."""

    value: Callable[[np.ndarray, np.ndarray], float]
    gradient: Optional[Callable[[np.ndarray, np.ndarray], Gradient]] = None
    name: str = ""

    def __call__(self, q, p):
        return self.value(q, p)


def _as_function(f) -> PhaseFunction:
    return f if isinstance(f, PhaseFunction) else PhaseFunction(f)


def fd_gradient(f, q, p) -> Gradient:
    """Central finite-difference gradient, step ``max(1, |x|) eps^(1/3)``."""
    f = _as_function(f)
    y = np.concatenate([np.asarray(q, float), np.asarray(p, float)])
    n = y.size // 2
    g = np.empty_like(y)
    for k in range(y.size):
        h = max(1.0, abs(y[k])) * _FD_EPS
        yp, ym = y.copy(), y.copy()
        yp[k] += h
        ym[k] -= h
        g[k] = (f.value(yp[:n], yp[n:]) - f.value(ym[:n], ym[n:])) / (yp[k] - ym[k])
    return g[:n], g[n:]


def phase_gradient(f, q, p, method: str = "analytic") -> Gradient:
    f = _as_function(f)
    if method == "analytic" and f.gradient is not None:
        return f.gradient(np.asarray(q, float), np.asarray(p, float))
    if method not in ("analytic", "fd"):
        raise ValueError(f"unknown gradient method {method!r}")
    return fd_gradient(f, q, p)


def poisson_bracket(f, g, state: PhaseState, method: str = "analytic") -> float:
    """``{f, g} = sum_i (df/dq_i dg/dp_i - df/dp_i dg/dq_i)`` at ``state``.

    ``method="analytic"`` uses registered gradients and falls back to central
    differences for plain callables; ``method="fd"`` forces differences.
    """
    fq, fp = phase_gradient(f, state.q, state.p, method)
    gq, gp = phase_gradient(g, state.q, state.p, method)
    return float(np.dot(fq, gp) - np.dot(fp, gq))


# ---------------------------------------------------------------- angular blocks

def _angular_matrix(q, p):
    return q[..., :, None] * p[..., None, :] - p[..., :, None] * q[..., None, :]


def angular_block_values(q, p, m: int, lower: bool = False):
    """Vectorised ``C^(m)`` (or ``C_(m)`` with ``lower=True``)."""
    q = np.asarray(q, float)
    p = np.asarray(p, float)
    sl = slice(q.shape[-1] - m, None) if lower else slice(0, m)
    L = _angular_matrix(q[..., sl], p[..., sl])
    return 0.5 * np.sum(L * L, axis=(-2, -1))


def angular_blocks(state: PhaseState) -> Tuple[np.ndarray, np.ndarray]:
    """Leading and trailing angular blocks; entry ``k`` holds ``m = k + 2``."""
    n = state.n_dim
    upper = np.array([angular_block_values(state.q, state.p, m) for m in range(2, n + 1)])
    lower = np.array([angular_block_values(state.q, state.p, m, lower=True) for m in range(2, n + 1)])
    lower[-1] = upper[-1]
    return upper, lower


def angular_function(n_dim: int, m: int, lower: bool = False) -> PhaseFunction:
    if not 2 <= m <= n_dim:
        raise ValueError(f"block size m={m} outside 2..{n_dim}")
    sl = slice(n_dim - m, None) if lower else slice(0, m)

    def value(q, p):
        return float(angular_block_values(q, p, m, lower))

    def gradient(q, p):
        dq = np.zeros(n_dim)
        dp = np.zeros(n_dim)
        qs, ps = q[sl], p[sl]
        L = _angular_matrix(qs, ps)
        dq[sl] = 2.0 * L @ ps
        dp[sl] = -2.0 * L @ qs
        return dq, dp

    label = f"C_({m})" if lower else f"C^({m})"
    return PhaseFunction(value, gradient, label)


# ---------------------------------------------------------------- Fradkin tensor

def fradkin_values(params: Parameters, q, p, kind: KindLike):
    """Vectorised Fradkin tensor, shape ``(..., N, N)``."""
    resolve_kind(params, kind)
    q = np.asarray(q, float)
    p = np.asarray(p, float)
    k = 2.0 * params.lam * _algebraic_h(params, q, p) - params.omega**2
    return p[..., :, None] * p[..., None, :] - k[..., None, None] * (q[..., :, None] * q[..., None, :])


def _algebraic_h(params, q, p):
    q2 = np.sum(q * q, axis=-1)
    p2 = np.sum(p * p, axis=-1)
    m = 1.0 + params.lam * q2
    if np.any(m == 0):
        raise DomainError("Hamiltonian is singular at |q| = r_c")
    return (p2 + params.omega**2 * q2) / (2.0 * m)


def _algebraic_h_gradient(params, q, p):
    q2 = np.sum(q * q, axis=-1)
    p2 = np.sum(p * p, axis=-1)
    m = 1.0 + params.lam * q2
    if np.any(m == 0):
        raise DomainError("Hamiltonian is singular at |q| = r_c")
    return ((params.omega**2 - params.lam * p2) / (m * m))[..., None] * q, p / m[..., None]


def fradkin_tensor(params: Parameters, state: PhaseState, kind: Optional[KindLike] = None) -> np.ndarray:
    """Curved Fradkin tensor ``I_ij`` at ``state``.

    Its half-trace is the Hamiltonian (unsigned on the exterior region).
    """
    kind = validate_domain(params, state, kind)
    return fradkin_values(params, state.q, state.p, kind)


def fradkin_function(params: Parameters, i: int, j: int, kind: KindLike) -> PhaseFunction:
    """Component ``I_ij`` (0-based indices) as a phase function."""
    resolve_kind(params, kind)
    lam, w2 = params.lam, params.omega**2

    def value(q, p):
        h = _algebraic_h(params, q, p)
        return float(p[i] * p[j] - (2.0 * lam * h - w2) * q[i] * q[j])

    def gradient(q, p):
        h = _algebraic_h(params, q, p)
        hq, hp = _algebraic_h_gradient(params, q, p)
        k = 2.0 * lam * h - w2
        qq = q[i] * q[j]
        dq = -2.0 * lam * qq * hq
        dq[i] -= k * q[j]
        dq[j] -= k * q[i]
        dp = -2.0 * lam * qq * hp
        dp[i] += p[j]
        dp[j] += p[i]
        return dq, dp

    return PhaseFunction(value, gradient, f"I_{i + 1}{j + 1}")


def hamiltonian_function(params: Parameters, kind: KindLike) -> PhaseFunction:
    """The flow Hamiltonian (sign-reversed on the exterior) as a phase function."""
    kind = resolve_kind(params, kind)
    return PhaseFunction(lambda q, p: float(hamiltonian(params, q, p, kind)),
                         lambda q, p: hamiltonian_gradient(params, q, p, kind), "H")


# ---------------------------------------------------------------- integral sets

@dataclass(frozen=True)
class IntegralSet:
    """Values of all integrals at one phase point.

    ``c_upper[k]`` and ``c_lower[k]`` hold block size ``m = k + 2``; ``h`` is
    the algebraic Hamiltonian (``trace(fradkin) / 2``).
    """

    c_upper: np.ndarray
    c_lower: np.ndarray
    fradkin: np.ndarray
    h: float

    def as_dict(self) -> Dict[str, float]:
        n = self.fradkin.shape[0]
        out = {"H": float(self.h)}
        for k, v in enumerate(self.c_upper):
            out[f"C^({k + 2})"] = float(v)
        for k, v in enumerate(self.c_lower[:-1]):
            out[f"C_({k + 2})"] = float(v)
        for i in range(n):
            for j in range(i, n):
                out[f"I_{i + 1}{j + 1}"] = float(self.fradkin[i, j])
        return out


def integral_set(params: Parameters, state: PhaseState, kind: Optional[KindLike] = None) -> IntegralSet:
    upper, lower = angular_blocks(state)
    fr = fradkin_tensor(params, state, kind)
    return IntegralSet(upper, lower, fr, float(_algebraic_h(params, state.q, state.p)))


def integral_table(params: Parameters, q, p, kind: KindLike) -> Tuple[List[str], np.ndarray]:
    """Vectorised integral values over a stack of states.

    Returns names and an array of shape ``(T, n_integrals)`` in the same
    order as :meth:`IntegralSet.as_dict`.
    """
    q = np.atleast_2d(np.asarray(q, float))
    p = np.atleast_2d(np.asarray(p, float))
    n = q.shape[-1]
    names = ["H"]
    cols = [_algebraic_h(params, q, p)]
    for m in range(2, n + 1):
        names.append(f"C^({m})")
        cols.append(angular_block_values(q, p, m))
    for m in range(2, n):
        names.append(f"C_({m})")
        cols.append(angular_block_values(q, p, m, lower=True))
    fr = fradkin_values(params, q, p, kind)
    for i in range(n):
        for j in range(i, n):
            names.append(f"I_{i + 1}{j + 1}")
            cols.append(fr[..., i, j])
    return names, np.stack(cols, axis=-1)


# ---------------------------------------------------------------- named families

def upper_family(n_dim: int) -> List[PhaseFunction]:
    return [angular_function(n_dim, m) for m in range(2, n_dim + 1)]


def lower_family(n_dim: int) -> List[PhaseFunction]:
    return [angular_function(n_dim, m, lower=True) for m in range(2, n_dim + 1)]


def fradkin_family(params: Parameters, kind: KindLike) -> List[PhaseFunction]:
    n = params.n_dim
    return [fradkin_function(params, i, j, kind) for i in range(n) for j in range(n)]


def involution_sets(params: Parameters, kind: KindLike) -> Dict[str, List[PhaseFunction]]:
    """The three commuting sets: ``{H, C^(m)}``, ``{H, C_(m)}`` and ``{I_ii}``."""
    h = hamiltonian_function(params, kind)
    n = params.n_dim
    return {
        "H+C^(m)": [h] + upper_family(n),
        "H+C_(m)": [h] + lower_family(n),
        "I_ii": [fradkin_function(params, i, i, kind) for i in range(n)],
    }


def independent_set(params: Parameters, kind: KindLike, index: int = 0) -> List[PhaseFunction]:
    """``{H, C^(m), C_(m), I_ii}`` with ``C^(N) = C_(N)`` counted once (2N-1 functions)."""
    n = params.n_dim
    return ([hamiltonian_function(params, kind)] + upper_family(n) + lower_family(n)[:-1]
            + [fradkin_function(params, index, index, kind)])


def max_involution_residual(functions: Sequence, state: PhaseState, method: str = "analytic") -> float:
    grads = [phase_gradient(f, state.q, state.p, method) for f in functions]
    worst = 0.0
    for a in range(len(grads)):
        for b in range(a + 1, len(grads)):
            fq, fp = grads[a]
            gq, gp = grads[b]
            worst = max(worst, abs(float(np.dot(fq, gp) - np.dot(fp, gq))))
    return worst


def jacobian(functions: Sequence, state: PhaseState, method: str = "analytic") -> np.ndarray:
    rows = []
    for f in functions:
        dq, dp = phase_gradient(f, state.q, state.p, method)
        rows.append(np.concatenate([dq, dp]))
    return np.array(rows)


def independence_rank(params: Parameters, state: PhaseState, functions: Sequence,
                      rtol: float = RANK_RTOL, raise_on_degenerate: bool = True) -> int:
    """Numerical rank of the Jacobian of ``functions`` at ``state``.

    Singular values below ``rtol * sigma_max`` are discarded.  When every
    gradient vanishes the rank is 0 and, by default, ``DegenerateStateError``
    is raised (carrying ``rank=0``).
    """
    sv = np.linalg.svd(jacobian(functions, state), compute_uv=False)
    smax = sv[0] if sv.size else 0.0
    if smax == 0.0:
        if raise_on_degenerate:
            raise DegenerateStateError("all gradients vanish at this state", rank=0)
        return 0
    return int(np.sum(sv > rtol * smax))


# ---------------------------------------------------------------- sampling

def sample_generic_states(params: Parameters, kind: KindLike, count: int, rng: np.random.Generator,
                          radius: Optional[Tuple[float, float]] = None,
                          momentum: Tuple[float, float] = (0.5, 2.0)) -> List[PhaseState]:
    """Random states with ``|q|`` in an annulus avoiding the origin and r_c
    and ``|p|`` on a shell, with independent uniform directions."""
    kind = resolve_kind(params, kind)
    n = params.n_dim
    if radius is None:
        r_c = params.r_c
        radius = {
            Kind.FLAT: (0.5, 3.0),
            Kind.TYPE_I: (0.5, 3.0),
            Kind.TYPE_II: (0.1 * r_c, 0.8 * r_c) if r_c else None,
            Kind.TYPE_III: (1.2 * r_c, 2.0 * r_c) if r_c else None,
        }[kind]
    out = []
    for _ in range(count):
        uq = rng.standard_normal(n)
        up = rng.standard_normal(n)
        rq = rng.uniform(*radius)
        rp = rng.uniform(*momentum)
        out.append(PhaseState(rq * uq / np.linalg.norm(uq), rp * up / np.linalg.norm(up)))
    return out


# ---------------------------------------------------------------- verification sweep

@dataclass
class IntegralsReport:
    """Worst residuals of a bracket/rank sweep over sampled states."""

    kind: Kind
    samples: int
    bracket_max: Dict[str, float]
    involution_max: Dict[str, float]
    ranks: List[int]
    expected_rank: int
    worst_sample: Dict[str, int]
    tol: float = BRACKET_TOL

    @property
    def passed(self) -> bool:
        return (all(v <= self.tol for v in self.bracket_max.values())
                and all(v <= self.tol for v in self.involution_max.values())
                and all(r == self.expected_rank for r in self.ranks))


def verify_integrals(params: Parameters, kind: KindLike, samples: int, seed: int = 0,
                     rank_samples: Optional[int] = None, method: str = "analytic") -> IntegralsReport:
    """Sweep ``{H, F}`` for every integral, the three involution sets and the
    Jacobian rank of the ``2N-1`` independent set over seeded generic states."""
    kind = resolve_kind(params, kind)
    rng = np.random.default_rng(seed)
    states = sample_generic_states(params, kind, samples, rng)
    n = params.n_dim
    h = hamiltonian_function(params, kind)
    families = {
        "C^(m)": upper_family(n),
        "C_(m)": lower_family(n),
        "I_ij": fradkin_family(params, kind),
    }
    sets = involution_sets(params, kind)
    indep = independent_set(params, kind)
    bracket_max = {k: 0.0 for k in families}
    involution_max = {k: 0.0 for k in sets}
    worst: Dict[str, int] = {}
    ranks = []
    n_rank = samples if rank_samples is None else min(rank_samples, samples)
    for idx, s in enumerate(states):
        hq, hp = phase_gradient(h, s.q, s.p, method)
        for name, fam in families.items():
            for f in fam:
                fq, fp = phase_gradient(f, s.q, s.p, method)
                v = abs(float(hq @ fp - hp @ fq))
                if v > bracket_max[name]:
                    bracket_max[name], worst[name] = v, idx
        for name, fs in sets.items():
            v = max_involution_residual(fs, s, method)
            if v > involution_max[name]:
                involution_max[name], worst[name] = v, idx
        if idx < n_rank:
            ranks.append(independence_rank(params, s, indep))
    return IntegralsReport(kind, samples, bracket_max, involution_max, ranks, 2 * n - 1, worst)
