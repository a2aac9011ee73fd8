"""Time integration of Hamilton's equations and orbit diagnostics.

The kinetic factor couples ``q`` and ``p``, so explicit splitting is not
available; the symplectic schemes are the implicit midpoint rule (order 2)
and the two-stage Gauss-Legendre collocation method (order 4), both solved by
fixed-point iteration.  An embedded Dormand-Prince pair (via scipy) is the
non-symplectic adaptive fallback.

All fixed-step routines work on stacks of trajectories at once: the state
array has shape ``(B, 2N)`` and every trajectory in a batch shares the same
manifold kind.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from .errors import ConvergenceError, DomainError, DomainExitError, SingularityError, UnboundOrbitError
from .integrals import integral_table
from .model import (GUARD_REL, Kind, KindLike, ManifoldType, Parameters, PhaseState, classify_manifold,
                    guard_width, hamiltonian, hamiltonian_gradient, resolve_kind)
from .radial import effective_potential, radial_metric

log = logging.getLogger(__name__)

SCHEMES = ("implicit_midpoint", "gauss4", "rk_adaptive")

_S3 = math.sqrt(3.0)
GAUSS4_A = np.array([[0.25, 0.25 - _S3 / 6.0], [0.25 + _S3 / 6.0, 0.25]])


@dataclass(frozen=True)
class IntegratorConfig:
    scheme: str = "gauss4"
    dt: float = 1e-3
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_fixed_point_iters: int = 50
    fixed_point_tol: float = 1e-13
    output_stride: int = 10

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")
        if not (self.dt > 0 and self.rel_tol > 0 and self.abs_tol > 0 and self.fixed_point_tol > 0):
            raise ValueError("step size and tolerances must be positive")
        if self.max_fixed_point_iters < 1 or self.output_stride < 1:
            raise ValueError("iteration cap and output stride must be >= 1")


@dataclass
class Trajectory:
    """Sampled solution of one initial value problem.

    ``drift_report`` maps each integral name to its maximum relative drift
    ``|F(t) - F(0)| / max(1, |F(0)|)``; ``drift_max`` holds the row-wise
    maximum over all integrals.
    """

    times: np.ndarray
    q: np.ndarray
    p: np.ndarray
    params: Parameters
    manifold: ManifoldType
    drift_report: Dict[str, float] = field(default_factory=dict)
    drift_max: Optional[np.ndarray] = None
    energy: Optional[np.ndarray] = None

    @property
    def states(self) -> List[PhaseState]:
        return [PhaseState(q, p) for q, p in zip(self.q, self.p)]

    @property
    def final_state(self) -> PhaseState:
        return PhaseState(self.q[-1], self.p[-1])


# ---------------------------------------------------------------- vector field

def _split(y):
    n = y.shape[-1] // 2
    return y[..., :n], y[..., n:]


def vector_field(params: Parameters, y, kind: Kind):
    """``(dH/dp, -dH/dq)`` for stacked states ``y = (q, p)``."""
    q, p = _split(y)
    gq, gp = hamiltonian_gradient(params, q, p, kind)
    return np.concatenate([gp, -gq], axis=-1)


def _inside(params, q, kind, guard):
    if kind in (Kind.TYPE_I, Kind.FLAT):
        return np.ones(q.shape[:-1], dtype=bool)
    r = np.linalg.norm(q, axis=-1)
    r_c = params.r_c
    return r < r_c - guard if kind is Kind.TYPE_II else r > r_c + guard


def _solve_stages(params, kind, y, dt, config, scheme):
    tol = config.fixed_point_tol * max(1.0, float(np.max(np.abs(y))))
    f0 = vector_field(params, y, kind)
    if scheme == "implicit_midpoint":
        k = f0
        for _ in range(config.max_fixed_point_iters):
            k_new = vector_field(params, y + 0.5 * dt * k, kind)
            err = abs(dt) * float(np.max(np.abs(k_new - k)))
            k = k_new
            if err <= tol:
                return y + dt * k
    else:
        K = np.stack([f0, f0])
        for _ in range(config.max_fixed_point_iters):
            Y = y + dt * np.einsum("ij,j...->i...", GAUSS4_A, K)
            K_new = vector_field(params, Y, kind)
            err = abs(dt) * float(np.max(np.abs(K_new - K)))
            K = K_new
            if err <= tol:
                return y + 0.5 * dt * (K[0] + K[1])
    raise ConvergenceError(f"fixed-point iteration did not reach {tol:.3g} in "
                           f"{config.max_fixed_point_iters} iterations")


def _fixed_step(params, kind, y, dt, config, t=0.0, guard=None):
    guard = guard_width(params) if guard is None else guard
    try:
        y_new = _solve_stages(params, kind, y, dt, config, config.scheme)
    except DomainError as exc:
        raise DomainExitError(f"stage left the {kind.value} domain near t = {t:.17g}", time=t) from exc
    except ConvergenceError as exc:
        exc.time = t
        raise
    if not np.all(_inside(params, _split(y_new)[0], kind, guard)):
        raise DomainExitError(f"trajectory crossed the r_c guard near t = {t + dt:.17g}", time=t + dt)
    return y_new


def _resolve(params, q, kind):
    if kind is None:
        try:
            return classify_manifold(params, q).tag
        except SingularityError as exc:
            raise DomainExitError("initial state lies in the r_c guard band", time=0.0) from exc
    return resolve_kind(params, kind)


def step(params: Parameters, state: PhaseState, config: IntegratorConfig = IntegratorConfig(),
         kind: Optional[KindLike] = None, dt: Optional[float] = None) -> PhaseState:
    """Advance ``state`` by one step of size ``dt`` (default ``config.dt``).

    A negative ``dt`` runs the scheme backwards.

    Raises
    ------
    ConvergenceError
        If an implicit stage equation fails to converge.
    DomainExitError
        If the step would cross the guard band around r_c.
    """
    kind = _resolve(params, state.q, kind)
    h = config.dt if dt is None else dt
    y = state.as_vector()
    if config.scheme == "rk_adaptive":
        y_new = _adaptive_solve(params, kind, y, 0.0, h, np.array([h]), config)[-1]
    else:
        y_new = _fixed_step(params, kind, y[None, :], h, config)[0]
    return PhaseState.from_vector(y_new)


# ---------------------------------------------------------------- adaptive fallback

def _adaptive_solve(params, kind, y0, t0, t1, t_eval, config):
    guard = guard_width(params)

    def rhs(t, y):
        return vector_field(params, y, kind)

    events = []
    if kind in (Kind.TYPE_II, Kind.TYPE_III):
        r_c = params.r_c

        def hit_guard(t, y):
            r = float(np.linalg.norm(_split(y)[0]))
            return (r_c - guard - r) if kind is Kind.TYPE_II else (r - r_c - guard)

        hit_guard.terminal = True
        events.append(hit_guard)
    try:
        sol = solve_ivp(rhs, (t0, t1), y0, method="DOP853", t_eval=t_eval, rtol=config.rel_tol,
                        atol=config.abs_tol, events=events or None)
    except DomainError as exc:
        raise DomainExitError("adaptive step left the domain", time=t0) from exc
    if events and sol.t_events[0].size:
        t_hit = float(sol.t_events[0][0])
        raise DomainExitError(f"trajectory reached the r_c guard at t = {t_hit:.17g}", time=t_hit)
    if sol.status != 0:
        raise ConvergenceError(sol.message, time=float(sol.t[-1]) if sol.t.size else t0)
    return sol.y.T


# ---------------------------------------------------------------- trajectories

def _drift(params, q, p, kind):
    names, table = integral_table(params, q, p, kind)
    ref = table[0]
    rel = np.abs(table - ref) / np.maximum(1.0, np.abs(ref))
    return {nm: float(v) for nm, v in zip(names, rel.max(axis=0))}, rel.max(axis=1)


def _finish(params, kind, times, ys):
    n = params.n_dim
    r_c = params.r_c if kind in (Kind.TYPE_II, Kind.TYPE_III) else None
    out = []
    for b in range(ys.shape[1]):
        q, p = ys[:, b, :n], ys[:, b, n:]
        report, row_max = _drift(params, q, p, kind)
        out.append(Trajectory(times.copy(), q.copy(), p.copy(), params, ManifoldType(kind, r_c), report,
                              row_max, hamiltonian(params, q, p, kind)))
    return out


def integrate_many(params: Parameters, states: Sequence[PhaseState], t_end: float,
                   config: IntegratorConfig = IntegratorConfig(),
                   kind: Optional[KindLike] = None) -> List[Trajectory]:
    """Integrate several initial states of the same manifold kind together."""
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    if not states:
        return []
    kinds = {_resolve(params, s.q, kind) for s in states}
    if len(kinds) != 1:
        raise ValueError("all states in a batch must lie on the same manifold")
    kind = kinds.pop()
    for s in states:
        if s.n_dim != params.n_dim:
            raise DomainError("state dimension does not match parameters")
    y = np.stack([s.as_vector() for s in states])
    guard = guard_width(params)
    if not np.all(_inside(params, _split(y)[0], kind, guard)):
        raise DomainExitError("initial state lies in the r_c guard band", time=0.0)

    if config.scheme == "rk_adaptive":
        n_out = max(1, int(round(t_end / (config.dt * config.output_stride))))
        times = np.linspace(0.0, t_end, n_out + 1)
        ys = np.stack([_adaptive_solve(params, kind, y0, 0.0, t_end, times, config) for y0 in y], axis=1)
        return _finish(params, kind, times, ys)

    n_steps = max(1, math.ceil(t_end / config.dt - 1e-9))
    dt = t_end / n_steps
    stride = config.output_stride
    out_idx = list(range(0, n_steps + 1, stride))
    if out_idx[-1] != n_steps:
        out_idx.append(n_steps)
    ys = np.empty((len(out_idx), *y.shape))
    ys[0] = y
    slot = 1
    for i in range(1, n_steps + 1):
        y = _fixed_step(params, kind, y, dt, config, t=(i - 1) * dt, guard=guard)
        if slot < len(out_idx) and i == out_idx[slot]:
            ys[slot] = y
            slot += 1
    times = np.array(out_idx, dtype=float) * dt
    return _finish(params, kind, times, ys)


def integrate(params: Parameters, state0: PhaseState, t_end: float,
              config: IntegratorConfig = IntegratorConfig(), kind: Optional[KindLike] = None) -> Trajectory:
    """Integrate one trajectory to ``t_end`` and attach the drift report.

    Errors raised during stepping carry the time of failure in ``.time``.
    """
    return integrate_many(params, [state0], t_end, config, kind)[0]


def sample_bound_states(params: Parameters, count: int, rng: np.random.Generator,
                        radius=(1.0, 3.0), momentum=(0.5, 1.5)) -> List[PhaseState]:
    """Random type I states below the continuum threshold with nonzero angular momentum."""
    out = []
    n = params.n_dim
    limit = params.alpha if params.lam > 0 else math.inf
    while len(out) < count:
        uq, up = rng.standard_normal(n), rng.standard_normal(n)
        q = rng.uniform(*radius) * uq / np.linalg.norm(uq)
        p = rng.uniform(*momentum) * up / np.linalg.norm(up)
        l2 = float(q @ q) * float(p @ p) - float(q @ p) ** 2
        if l2 > 1e-2 * float(q @ q) * float(p @ p) and hamiltonian(params, q, p, Kind.TYPE_I if params.lam > 0 else Kind.FLAT) < 0.5 * limit:
            out.append(PhaseState(q, p))
    return out


# ---------------------------------------------------------------- diagnostics

@dataclass(frozen=True)
class OrbitDiagnostics:
    radial_period: float
    angular_advance: float
    closure_residual: float
    closure_k: Optional[int]
    pericenters: np.ndarray
    circular: bool = False

    def __iter__(self):
        return iter((self.radial_period, self.angular_advance, self.closure_residual))


def _plane_basis(q0, p0):
    e1 = q0 / np.linalg.norm(q0)
    v = p0 - (p0 @ e1) * e1
    nv = np.linalg.norm(v)
    if nv == 0:
        raise UnboundOrbitError("purely radial motion has no orbital plane")
    return e1, v / nv


def orbit_diagnostics(traj: Trajectory, k_max: int = 64, circular_tol: float = 1e-7) -> OrbitDiagnostics:
    """Radial period, planar angle advance per radial period and closure.

    Pericenters are sign changes of ``dr/dt`` refined by root finding on a
    cubic Hermite interpolant of the trajectory.  ``closure_residual`` is the
    smallest phase-space distance between the state at the first pericenter
    and the state ``k`` radial periods later, over ``1 <= k <= k_max``.
    A (numerically) circular orbit takes its radial period from the
    small-oscillation frequency of the effective potential.
    """
    params, kind = traj.params, traj.manifold.tag
    y = np.concatenate([traj.q, traj.p], axis=1)
    f = vector_field(params, y, kind)
    spline = CubicHermiteSpline(traj.times, y, f)
    n = params.n_dim
    e1, e2 = _plane_basis(traj.q[0], traj.p[0])
    phi = np.unwrap(np.arctan2(traj.q @ e2, traj.q @ e1))
    r = np.linalg.norm(traj.q, axis=1)
    t_end = float(traj.times[-1])

    def phi_at(t):
        i = min(np.searchsorted(traj.times, t), len(phi) - 1)
        qt = spline(t)[:n]
        a = math.atan2(qt @ e2, qt @ e1)
        return phi[i] + (a - phi[i] + math.pi) % (2 * math.pi) - math.pi

    circular = (r.max() - r.min()) / r.mean() < circular_tol
    if circular:
        l2 = float(r[0] ** 2 * (traj.p[0] @ traj.p[0]) - (traj.q[0] @ traj.p[0]) ** 2)
        r0 = float(r.mean())
        h = 1e-4 * r0
        u = effective_potential(params, np.array([r0 - h, r0, r0 + h]), l2, kind)
        curvature = (u[0] - 2 * u[1] + u[2]) / (h * h)
        omega_r = math.sqrt(curvature / float(radial_metric(params, r0, kind)))
        t_r = 2 * math.pi / omega_r
        rate = (phi[-1] - phi[0]) / (t_end - traj.times[0])
        peri = np.array([traj.times[0]])
        advance = rate * t_r
    else:
        g = np.einsum("ij,ij->i", traj.q, f[:, :n])
        idx = np.nonzero((g[:-1] < 0) & (g[1:] >= 0))[0]
        if idx.size < 3:
            raise UnboundOrbitError(f"found {idx.size} pericenters, need at least 3")

        def radial_rate(t):
            return float(spline(t)[:n] @ spline(t, 1)[:n])

        peri = np.array([brentq(radial_rate, traj.times[i], traj.times[i + 1], xtol=1e-14)
                         if g[i + 1] != 0 else traj.times[i + 1] for i in idx])
        t_r = float(np.polyfit(np.arange(peri.size), peri, 1)[0])
        angles = np.array([phi_at(t) for t in peri])
        advance = float(np.mean(np.diff(angles)))

    t0 = float(peri[0])
    y0 = spline(t0)
    best, best_k = math.inf, None
    for k in range(1, k_max + 1):
        tk = t0 + k * t_r
        if tk > t_end:
            break
        d = float(np.linalg.norm(spline(tk) - y0))
        if d < best:
            best, best_k = d, k
    return OrbitDiagnostics(t_r, advance, best, best_k, peri, circular)
