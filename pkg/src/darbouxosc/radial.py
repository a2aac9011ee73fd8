"""Radial reduction, canonical flattening transforms and effective potentials.

In hyperspherical coordinates the Hamiltonian depends only on ``(r, p_r)``
and the squared total angular momentum ``c_n = L^2``.  The point transform
``Q(r)`` with ``dQ = sqrt(|m(r)|) dr`` and ``P = p_r / sqrt(|m(r)|)`` turns the
radial Hamiltonian into ``P^2/2 + U_eff(Q)`` with

    U_eff = c_n / (2 m r^2) + omega^2 r^2 / (2 m),

``m`` being the signed metric factor of the manifold kind.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .errors import ChartError, DomainError, OriginError, ParameterError, RangeError
from .model import Kind, KindLike, Parameters, PhaseState, resolve_kind

INF = math.inf


# ---------------------------------------------------------------- hyperspherical chart

@dataclass(frozen=True)
class RadialState:
    r: float
    p_r: float
    c_n: float

    def __post_init__(self):
        if self.r <= 0:
            raise DomainError("radial state needs r > 0")
        if self.c_n < 0:
            raise DomainError("c_n must be non-negative")


@dataclass(frozen=True)
class Hyperspherical:
    """Hyperspherical image of a phase state.

    ``angle_momenta`` is None where the chart is singular (some
    ``sin(theta_k) = 0`` with ``k <= N-2``); ``l2`` is always available.
    """

    r: float
    angles: np.ndarray
    p_r: float
    angle_momenta: Optional[np.ndarray]
    l2: float

    @property
    def radial(self) -> RadialState:
        return RadialState(self.r, self.p_r, self.l2)


def _angles(q):
    n = q.size
    angles = np.empty(n - 1)
    for j in range(n - 2):
        angles[j] = math.atan2(float(np.linalg.norm(q[j + 1:])), q[j])
    angles[n - 2] = math.atan2(q[n - 1], q[n - 2])
    return angles


def from_hyperspherical(r: float, angles) -> np.ndarray:
    """``q_j = r cos(theta_j) prod_{k<j} sin(theta_k)``, ``q_N = r prod sin(theta_k)``."""
    angles = np.asarray(angles, float)
    n = angles.size + 1
    q = np.empty(n)
    s = r
    for j in range(n - 1):
        q[j] = s * math.cos(angles[j])
        s *= math.sin(angles[j])
    q[n - 1] = s
    return q


def chart_jacobian(r: float, angles) -> np.ndarray:
    """``J[i, j] = d q_i / d theta_j``."""
    angles = np.asarray(angles, float)
    n = angles.size + 1
    sin, cos = np.sin(angles), np.cos(angles)
    J = np.zeros((n, n - 1))
    for i in range(n):
        # q_i = r * prod_{k<i} sin_k * (cos_i if i < n-1 else 1)
        for j in range(min(i + 1, n - 1)):
            factors = [sin[k] for k in range(i) if k != j]
            if j < i:
                factors.append(cos[j])
                if i < n - 1:
                    factors.append(cos[i])
            else:
                factors.append(-sin[i])
            J[i, j] = r * math.prod(factors)
    return J


def chart_l2(angles, angle_momenta) -> float:
    """``L^2 = sum_j p_theta_j^2 prod_{k<j} 1/sin^2(theta_k)``."""
    s = np.sin(np.asarray(angles, float))
    total, weight = 0.0, 1.0
    for j, pt in enumerate(angle_momenta):
        total += pt * pt * weight
        if j < len(s) - 1:
            if s[j] == 0:
                raise ChartError("chart is singular")
            weight /= s[j] ** 2
    return total


def to_hyperspherical(state: PhaseState, chart_tol: float = 1e-12) -> Hyperspherical:
    """Radius, angles, radial momentum and angular momenta of ``state``.

    Raises
    ------
    OriginError
        At ``q = 0``.
    """
    q, p = state.q, state.p
    r = float(np.linalg.norm(q))
    if r == 0:
        raise OriginError("hyperspherical coordinates are undefined at q = 0")
    angles = _angles(q)
    p_r = float(q @ p) / r
    l2 = max(r * r * float(p @ p) - float(q @ p) ** 2, 0.0)
    if np.all(np.abs(np.sin(angles[:-1])) > chart_tol):
        momenta = chart_jacobian(r, angles).T @ p
    else:
        momenta = None
    return Hyperspherical(r, angles, p_r, momenta, l2)


def angle_momenta(state: PhaseState, chart_tol: float = 1e-12) -> np.ndarray:
    """Conjugate angle momenta; raises ``ChartError`` on a chart singularity."""
    hs = to_hyperspherical(state, chart_tol)
    if hs.angle_momenta is None:
        raise ChartError("sin(theta_k) vanishes for some k <= N-2")
    return hs.angle_momenta


# ---------------------------------------------------------------- radial Hamiltonian

def _kind(params, kind):
    return resolve_kind(params, kind)


def radial_metric(params: Parameters, r, kind: KindLike):
    """Signed metric factor ``s (1 + lam r^2)`` as a function of radius."""
    kind = _kind(params, kind)
    r = np.asarray(r, float)
    return kind.sign * (1.0 + params.lam * r * r)


def r_interval(params: Parameters, kind: KindLike) -> Tuple[float, float]:
    kind = _kind(params, kind)
    if kind is Kind.TYPE_II:
        return 0.0, params.r_c
    if kind is Kind.TYPE_III:
        return params.r_c, INF
    return 0.0, INF


def _check_r(params, r, kind, allow_edge=True):
    lo, hi = r_interval(params, kind)
    r = np.asarray(r, float)
    if kind is Kind.TYPE_III:
        bad = (r < lo) if allow_edge else (r <= lo)
    elif kind is Kind.TYPE_II:
        bad = (r < 0) | (r >= hi)
    else:
        bad = r < 0
    if np.any(bad):
        raise DomainError(f"radius outside the {kind.value} interval [{lo}, {hi})")


def radial_hamiltonian(params: Parameters, r, p_r, c_n, kind: KindLike):
    """``(p_r^2 + c_n / r^2 + omega^2 r^2) / (2 m(r))``."""
    kind = _kind(params, kind)
    r = np.asarray(r, float)
    _check_r(params, r, kind, allow_edge=False)
    m = radial_metric(params, r, kind)
    return (np.asarray(p_r, float) ** 2 + c_n / (r * r) + params.omega**2 * r * r) / (2.0 * m)


# ---------------------------------------------------------------- canonical transforms

def canonical_Q(params: Parameters, r, kind: KindLike):
    """Flattening coordinate ``Q(r) = int sqrt(|m|) dr``.

    * type I:   ``r sqrt(1 + lam r^2)/2 + asinh(sqrt(lam) r) / (2 sqrt(lam))``
    * type II:  ``r sqrt(1 - |lam| r^2)/2 + asin(sqrt|lam| r) / (2 sqrt|lam|)``
    * type III: ``r sqrt(|lam| r^2 - 1)/2 - acosh(sqrt|lam| r) / (2 sqrt|lam|)``,
      anchored at ``Q(r_c) = 0``
    * flat:     ``r``
    """
    kind = _kind(params, kind)
    r = np.asarray(r, float)
    _check_r(params, r, kind)
    if kind is Kind.FLAT:
        return r * 1.0
    a = abs(params.lam)
    sa = math.sqrt(a)
    x = sa * r
    if kind is Kind.TYPE_I:
        return 0.5 * r * np.sqrt(1.0 + x * x) + np.arcsinh(x) / (2.0 * sa)
    if kind is Kind.TYPE_II:
        return 0.5 * r * np.sqrt(1.0 - x * x) + np.arcsin(x) / (2.0 * sa)
    return 0.5 * r * np.sqrt(x * x - 1.0) - np.arccosh(x) / (2.0 * sa)


def canonical_P(params: Parameters, r, p_r, kind: KindLike):
    """``P = p_r / sqrt(|m(r)|)``."""
    kind = _kind(params, kind)
    _check_r(params, r, kind, allow_edge=False)
    return np.asarray(p_r, float) / np.sqrt(radial_metric(params, r, kind))


def dQ_dr(params: Parameters, r, kind: KindLike):
    kind = _kind(params, kind)
    return np.sqrt(np.maximum(radial_metric(params, r, kind), 0.0))


def critical_Q(params: Parameters, kind: KindLike) -> Optional[float]:
    """Image endpoint at r_c: ``pi / (4 sqrt|lam|)`` (type II), 0 (type III)."""
    kind = _kind(params, kind)
    if kind is Kind.TYPE_II:
        return math.pi / (4.0 * math.sqrt(-params.lam))
    if kind is Kind.TYPE_III:
        return 0.0
    return None


def invert_Q(params: Parameters, Q: float, kind: KindLike, rtol: float = 1e-13, max_iter: int = 200) -> float:
    """Radius with ``canonical_Q(r) = Q``.

    Safeguarded Newton iteration (analytic ``dQ/dr``) inside a bracket that
    is kept valid by bisection, seeded with ``r = Q``.

    Raises
    ------
    RangeError
        If ``Q`` lies outside the image of the transform.
    """
    kind = _kind(params, kind)
    Q = float(Q)
    if kind is Kind.FLAT:
        if Q < 0:
            raise RangeError("Q must be >= 0")
        return Q
    lo, hi = r_interval(params, kind)
    if kind is Kind.TYPE_II:
        qc = critical_Q(params, kind)
        if not 0 <= Q < qc:
            raise RangeError(f"Q = {Q!r} outside [0, {qc!r})")
        # dQ/dr <= 1 gives r >= Q
        lo = Q
    elif kind is Kind.TYPE_I:
        if Q < 0:
            raise RangeError("Q must be >= 0")
        # dQ/dr >= 1 gives r <= Q
        hi = Q
    else:
        if Q < 0:
            raise RangeError("Q must be >= 0 on the exterior region")
        hi = 2.0 * lo
        while canonical_Q(params, hi, kind) < Q:
            lo, hi = hi, 2.0 * hi

    def g(r):
        return float(canonical_Q(params, r, kind)) - Q

    if Q == 0:
        return r_interval(params, kind)[0]
    tol = rtol * max(1.0, abs(Q))
    r = min(max(Q, lo), hi) if kind is not Kind.TYPE_II else 0.5 * (lo + hi)
    for _ in range(max_iter):
        val = g(r)
        if val == 0:
            return r
        if val > 0:
            hi = r
        else:
            lo = r
        d = float(dQ_dr(params, r, kind))
        step = r - val / d if d > 0 else None
        if step is None or not lo <= step <= hi:
            step = 0.5 * (lo + hi)
        # iterate to stagnation; the residual test below decides success
        if abs(step - r) <= 2.0 * np.spacing(r):
            r = step
            break
        r = step
    if abs(g(r)) <= tol:
        return r
    raise RangeError(f"inversion of Q = {Q!r} did not converge")


# ---------------------------------------------------------------- effective potentials

def effective_potential(params: Parameters, r, c_n: float, kind: KindLike):
    """``U_eff = (c_n / r^2 + omega^2 r^2) / (2 m(r))`` on the domain of ``kind``."""
    kind = _kind(params, kind)
    if c_n < 0:
        raise DomainError("c_n must be non-negative")
    r = np.asarray(r, float)
    _check_r(params, r, kind, allow_edge=False)
    if c_n > 0 and np.any(r == 0):
        raise DomainError("centrifugal term diverges at r = 0")
    m = radial_metric(params, r, kind)
    with np.errstate(divide="ignore", invalid="ignore"):
        cent = np.where(r == 0, 0.0, c_n / (r * r))
    out = (cent + params.omega**2 * r * r) / (2.0 * m)
    return out if out.ndim else float(out)


def potential_minimum(params: Parameters, c_n: float, kind: KindLike) -> Optional[Tuple[float, float]]:
    """Closed-form minimum ``(r_min, U_min)`` of the effective potential.

    For type I, type II and flat (signed ``lam``):

        r_min^2 = (lam c + sqrt(lam^2 c^2 + omega^2 c)) / omega^2
        U_min   = -lam c + sqrt(lam^2 c^2 + omega^2 c)

    which reduces to ``r_min^2 = sqrt(c)/omega``, ``U_min = omega sqrt(c)``
    when ``lam = 0``.  With ``c_n = 0`` the minimum is the boundary point
    ``(0, 0)``.  The exterior potential has no minimum (None).
    """
    kind = _kind(params, kind)
    if kind is Kind.TYPE_III:
        return None
    w = params.omega
    if w <= 0:
        raise ParameterError("effective-potential minimum needs omega > 0")
    if c_n < 0:
        raise DomainError("c_n must be non-negative")
    if c_n == 0:
        return 0.0, 0.0
    if kind is Kind.FLAT:
        return math.sqrt(math.sqrt(c_n) / w), w * math.sqrt(c_n)
    lam = params.lam
    root = math.sqrt(lam * lam * c_n * c_n + w * w * c_n)
    if lam > 0:
        r2 = (lam * c_n + root) / (w * w)
        u_min = w * w * c_n / (lam * c_n + root)
    else:
        r2 = c_n / (root - lam * c_n)
        u_min = -lam * c_n + root
    return math.sqrt(r2), u_min


def potential_limits(params: Parameters, c_n: float, kind: KindLike) -> Tuple[float, float]:
    """Limits of the effective potential at the two ends of the domain.

    The lower end is ``r -> 0`` (``r -> r_c+`` on the exterior), the upper
    ``r -> inf`` (``r -> r_c-`` on the interior).  Infinite limits are
    ``math.inf``.
    """
    kind = _kind(params, kind)
    w2 = params.omega**2
    low = INF if c_n > 0 else 0.0
    if kind is Kind.TYPE_I:
        return low, w2 / (2.0 * params.lam)
    if kind is Kind.TYPE_II:
        return low, INF
    if kind is Kind.TYPE_III:
        return INF, w2 / (2.0 * abs(params.lam))
    return low, INF if w2 > 0 else 0.0


@dataclass(frozen=True)
class EffectivePotentialProfile:
    kind: Kind
    c_n: float
    r_min: Optional[float]
    u_min: Optional[float]
    limits: Tuple[float, float]
    r_c: Optional[float] = None
    q_c: Optional[float] = None
    extras: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        """JSON-ready mapping; infinities become the string ``"inf"``."""

        def enc(x):
            if x is None:
                return None
            return "inf" if math.isinf(x) else float(x)

        return {
            "kind": self.kind.value,
            "c_n": float(self.c_n),
            "r_min": enc(self.r_min),
            "U_min": enc(self.u_min),
            "r_c": enc(self.r_c),
            "Q_c": enc(self.q_c),
            "limits": [enc(v) for v in self.limits],
        }


def effective_potential_profile(params: Parameters, c_n: float, kind: KindLike) -> EffectivePotentialProfile:
    kind = _kind(params, kind)
    mn = potential_minimum(params, c_n, kind) if params.omega > 0 else None
    r_min, u_min = mn if mn is not None else (None, None)
    return EffectivePotentialProfile(kind, c_n, r_min, u_min, potential_limits(params, c_n, kind),
                                     params.r_c, critical_Q(params, kind))
