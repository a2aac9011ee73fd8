"""Discrete spectrum of the quantised hyperbolic (lam > 0) oscillator.

    E_n = -hbar^2 lam k^2 + hbar k sqrt(hbar^2 lam^2 k^2 + omega^2),  k = n + N/2.

Levels accumulate at ``omega^2 / (2 lam)``.  The formula is evaluated in the
algebraically equivalent form ``hbar k omega^2 / (hbar lam k + sqrt(...))``,
which avoids the cancellation between the two terms at large ``n``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .model import Parameters


@dataclass(frozen=True)
class SpectrumRequest:
    params: Parameters
    n_levels: int

    def __post_init__(self):
        if self.n_levels < 1:
            raise ParameterError("n_levels must be >= 1")
        _require_hyperbolic(self.params)


def _require_hyperbolic(params: Parameters):
    if not params.lam > 0:
        raise ParameterError(f"the closed-form spectrum needs lam > 0, got {params.lam!r}")


def asymptote(params: Parameters) -> float:
    _require_hyperbolic(params)
    return params.omega**2 / (2.0 * params.lam)


def energy_levels(params: Parameters, n) -> np.ndarray:
    """Vectorised ``E_n`` for integer ``n >= 0``."""
    _require_hyperbolic(params)
    n = np.asarray(n)
    if np.any(n < 0):
        raise ParameterError("level index must be >= 0")
    hb, lam, w = params.hbar, params.lam, params.omega
    k = n + params.n_dim / 2.0
    a = hb * lam * k
    return hb * k * w * w / (a + np.sqrt(a * a + w * w))


def energy_level(params: Parameters, n: int) -> float:
    return float(energy_levels(params, int(n)))


def spectrum(request: SpectrumRequest) -> np.ndarray:
    """``[E_0, ..., E_{n_levels-1}]``."""
    return energy_levels(request.params, np.arange(request.n_levels))


def spherical_energy_level(params: Parameters, n: int) -> float:
    """Spectrum of the interior (lam < 0) oscillator: no closed form is available."""
    raise NotImplementedError("no closed-form spectrum is available for the spherical (lam < 0) oscillator")
