"""Core model: parameters, phase states, the deformed oscillator Hamiltonian,
its conformal metric and scalar curvature, and manifold classification.

The Hamiltonian on R^N is

    H(q, p) = (p^2 + omega^2 q^2) / (2 (1 + lam q^2)),

the kinetic part being geodesic motion for the metric (1 + lam q^2) dq^2.
For lam < 0 the critical radius r_c = 1/sqrt(|lam|) splits space into an
interior ball (type II) and an exterior region (type III).  On the exterior
both the metric factor and the Hamiltonian change sign so that the kinetic
term stays positive:

    H_III(q, p) = (p^2 + omega^2 q^2) / (2 (|lam| q^2 - 1)) = -H(q, p).

Everything below is written in terms of a signed metric factor
``m = s (1 + lam q^2)`` with ``s = -1`` on the exterior and ``+1`` elsewhere,
so that ``H = (p^2 + omega^2 q^2) / (2 m)`` in all cases.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

from .errors import DomainError, ParameterError, SingularityError

#: Relative half-width of the rejected band around r_c (in units of r_c).
GUARD_REL = 1e-9


class Kind(enum.Enum):
    FLAT = "flat"
    TYPE_I = "type_i"
    TYPE_II = "type_ii_interior"
    TYPE_III = "type_iii_exterior"

    @property
    def sign(self) -> int:
        return -1 if self is Kind.TYPE_III else 1


_KIND_ALIASES = {
    "flat": Kind.FLAT,
    "i": Kind.TYPE_I,
    "type_i": Kind.TYPE_I,
    "hyperbolic": Kind.TYPE_I,
    "ii": Kind.TYPE_II,
    "type_ii": Kind.TYPE_II,
    "type_ii_interior": Kind.TYPE_II,
    "interior": Kind.TYPE_II,
    "spherical": Kind.TYPE_II,
    "iii": Kind.TYPE_III,
    "type_iii": Kind.TYPE_III,
    "type_iii_exterior": Kind.TYPE_III,
    "exterior": Kind.TYPE_III,
}


@dataclass(frozen=True)
class Parameters:
    """Model constants ``(lam, omega, n_dim, hbar)`` in natural units."""

    lam: float
    omega: float = 1.0
    n_dim: int = 2
    hbar: float = 1.0

    def __post_init__(self):
        if int(self.n_dim) != self.n_dim or self.n_dim < 2:
            raise ParameterError(f"n_dim must be an integer >= 2, got {self.n_dim!r}")
        if not math.isfinite(self.lam):
            raise ParameterError("lam must be finite")
        if not (self.omega >= 0 and math.isfinite(self.omega)):
            raise ParameterError(f"omega must be >= 0, got {self.omega!r}")
        if not self.hbar > 0:
            raise ParameterError(f"hbar must be > 0, got {self.hbar!r}")
        object.__setattr__(self, "n_dim", int(self.n_dim))
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "omega", float(self.omega))
        object.__setattr__(self, "hbar", float(self.hbar))

    @property
    def r_c(self) -> Optional[float]:
        """Critical radius ``1/sqrt(|lam|)`` for ``lam < 0``, else None."""
        if self.lam < 0:
            return 1.0 / math.sqrt(-self.lam)
        return None

    @property
    def alpha(self) -> float:
        """Asymptotic level ``omega^2 / (2 lam)`` (undefined for lam = 0)."""
        if self.lam == 0:
            raise ParameterError("omega^2/(2 lam) is undefined for lam = 0")
        return self.omega**2 / (2.0 * self.lam)


@dataclass(frozen=True)
class PhaseState:
    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        q = np.array(self.q, dtype=float).reshape(-1)
        p = np.array(self.p, dtype=float).reshape(-1)
        if q.shape != p.shape:
            raise ValueError(f"q and p lengths differ: {q.size} vs {p.size}")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)

    @property
    def n_dim(self) -> int:
        return self.q.size

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.q, self.p])

    @classmethod
    def from_vector(cls, y) -> "PhaseState":
        y = np.asarray(y, dtype=float)
        n = y.size // 2
        return cls(y[:n], y[n:])


@dataclass(frozen=True)
class ManifoldType:
    tag: Kind
    r_c: Optional[float] = None


KindLike = Union[Kind, ManifoldType, str]


def guard_width(params: Parameters, guard_rel: float = GUARD_REL) -> float:
    r_c = params.r_c
    return 0.0 if r_c is None else guard_rel * r_c


def resolve_kind(params: Parameters, kind: KindLike) -> Kind:
    """Normalise ``kind`` and check that it is compatible with the sign of lam."""
    if isinstance(kind, ManifoldType):
        kind = kind.tag
    elif isinstance(kind, str):
        try:
            kind = _KIND_ALIASES[kind.lower()]
        except KeyError:
            raise ParameterError(f"unknown manifold kind {kind!r}") from None
    lam = params.lam
    ok = {
        Kind.FLAT: lam == 0,
        Kind.TYPE_I: lam > 0,
        Kind.TYPE_II: lam < 0,
        Kind.TYPE_III: lam < 0,
    }[kind]
    if not ok:
        raise ParameterError(f"{kind.value} is not available for lam = {lam!r}")
    return kind


def default_kind(params: Parameters) -> Kind:
    """Kind implied by lam alone (type II is the default for lam < 0)."""
    if params.lam > 0:
        return Kind.TYPE_I
    if params.lam < 0:
        return Kind.TYPE_II
    return Kind.FLAT


def classify_manifold(params: Parameters, q, guard_rel: float = GUARD_REL) -> ManifoldType:
    """Manifold containing the configuration ``q``.

    Raises
    ------
    SingularityError
        If lam < 0 and ``| |q| - r_c |`` is below the guard width.
    """
    lam = params.lam
    if lam > 0:
        return ManifoldType(Kind.TYPE_I)
    if lam == 0:
        return ManifoldType(Kind.FLAT)
    r = float(np.linalg.norm(np.asarray(q, dtype=float)))
    r_c = params.r_c
    if abs(r - r_c) < guard_width(params, guard_rel):
        raise SingularityError(f"|q| = {r!r} is within the guard band of r_c = {r_c!r}")
    return ManifoldType(Kind.TYPE_II if r < r_c else Kind.TYPE_III, r_c)


def _kind_for(params: Parameters, q, kind: Optional[KindLike]) -> Kind:
    if kind is None:
        return classify_manifold(params, q).tag
    return resolve_kind(params, kind)


def validate_domain(params: Parameters, state: PhaseState, kind: Optional[KindLike] = None,
                    guard_rel: float = GUARD_REL) -> Kind:
    """Check that ``state`` lies in the (guarded) domain of ``kind``; return the kind."""
    if state.n_dim != params.n_dim:
        raise DomainError(f"state has dimension {state.n_dim}, parameters say {params.n_dim}")
    actual = classify_manifold(params, state.q, guard_rel).tag
    if kind is not None and resolve_kind(params, kind) is not actual:
        raise DomainError(f"state lies in {actual.value}, not {resolve_kind(params, kind).value}")
    return actual


def metric_factor(params: Parameters, q, kind: Optional[KindLike] = None):
    """Conformal factor of the metric at ``q`` (vector or stack of vectors).

    Returns ``1 + lam q^2`` except on the exterior region, where the sign is
    flipped to ``|lam| q^2 - 1``.  The value is signed; callers check it.
    """
    q = np.asarray(q, dtype=float)
    q2 = np.sum(q * q, axis=-1)
    base = 1.0 + params.lam * q2
    if kind is None:
        if params.lam < 0:
            return np.where(base < 0, -base, base)
        return base
    return resolve_kind(params, kind).sign * base


def _signed_factor(params: Parameters, q2, kind: Kind):
    m = kind.sign * (1.0 + params.lam * q2)
    if np.any(m <= 0):
        raise DomainError(f"metric factor is non-positive for {kind.value}")
    return m


def hamiltonian(params: Parameters, q, p, kind: KindLike):
    """Vectorised Hamiltonian over stacks of ``(q, p)`` with a fixed kind."""
    kind = resolve_kind(params, kind)
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    q2 = np.sum(q * q, axis=-1)
    p2 = np.sum(p * p, axis=-1)
    m = _signed_factor(params, q2, kind)
    return (p2 + params.omega**2 * q2) / (2.0 * m)


def hamiltonian_gradient(params: Parameters, q, p, kind: KindLike):
    """Vectorised ``(dH/dq, dH/dp)``.

    With ``m = s (1 + lam q^2)``:

        dH/dp = p / m
        dH/dq = s (omega^2 - lam p^2) q / (1 + lam q^2)^2

    The exterior case (``s = -1``) is the derivative of ``-H``, i.e. the
    interior formula with both components negated.
    """
    kind = resolve_kind(params, kind)
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    q2 = np.sum(q * q, axis=-1)
    p2 = np.sum(p * p, axis=-1)
    m = _signed_factor(params, q2, kind)
    coef = kind.sign * (params.omega**2 - params.lam * p2) / (m * m)
    return coef[..., None] * q, p / m[..., None]


def evaluate_H(params: Parameters, state: PhaseState, kind: Optional[KindLike] = None) -> float:
    """Value of the Hamiltonian at ``state``.

    The exterior (type III) value carries the reversed sign, which keeps the
    kinetic term positive.  ``kind`` defaults to the manifold containing q.

    Examples
    --------
    >>> evaluate_H(Parameters(0.02, 1.0, 2), PhaseState([1, 0], [0, 1]))
    0.9803921568627451
    """
    kind = _kind_for(params, state.q, kind)
    return float(hamiltonian(params, state.q, state.p, kind))


def gradient_H(params: Parameters, state: PhaseState,
               kind: Optional[KindLike] = None) -> Tuple[np.ndarray, np.ndarray]:
    kind = _kind_for(params, state.q, kind)
    return hamiltonian_gradient(params, state.q, state.p, kind)


def scalar_curvature(params: Parameters, r, guard_rel: float = GUARD_REL):
    """Scalar curvature as a function of the radius.

    ``R = -lam (N-1)(2N + 3(N-2) lam r^2) / (1 + lam r^2)^3`` for lam >= 0 and
    inside r_c; outside r_c the metric flips sign and so does R.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("radius must be non-negative")
    lam, n = params.lam, params.n_dim
    if lam == 0:
        return np.zeros_like(r) if r.ndim else 0.0
    if lam < 0 and np.any(np.abs(r - params.r_c) < guard_width(params, guard_rel)):
        raise SingularityError("scalar curvature diverges at r_c")
    x = lam * r * r
    value = -lam * (n - 1) * (2 * n + 3 * (n - 2) * x) / (1.0 + x) ** 3
    if lam < 0:
        value = np.where(1.0 + x < 0, -value, value)
    return value if value.ndim else float(value)


def curvature_extrema(params: Parameters, kind: KindLike) -> Optional[Tuple[float, float]]:
    """Interior extremum ``(r*, R(r*))`` of the scalar curvature, if any.

    * type I: minimum at the origin, ``R(0) = -2 lam N (N-1)``;
    * type II: positive maximum when N >= 7;
    * type III: negative minimum when 3 <= N <= 5;
    * otherwise None.
    """
    kind = resolve_kind(params, kind)
    n, lam = params.n_dim, params.lam
    if kind is Kind.FLAT:
        return None
    if kind is Kind.TYPE_I:
        return 0.0, -2.0 * lam * n * (n - 1)
    a = -lam
    if kind is Kind.TYPE_II and n < 7:
        return None
    if kind is Kind.TYPE_III and not (3 <= n <= 5):
        return None
    r_star = math.sqrt((n + 2) / (2.0 * (n - 2) * a))
    value = 4.0 * a * (n - 1) * (n - 2) ** 3 / (n - 6) ** 2
    return r_star, value if kind is Kind.TYPE_II else -value
