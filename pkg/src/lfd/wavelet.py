"""Gaussian-modulated sine source pulse."""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class WaveletSpec:
    """Pulse ``exp(-(2 pi f0 (t - t0))^2 / g^2) * sin(2 pi f0 (t - t0))``.

    Defaults reproduce the impulse-response experiment: 30 Hz, centred at
    0.2 s, width parameter 4.
    """

    f0: float = 30.0
    t0: float = 0.2
    g: float = 4.0

    def __post_init__(self):
        if not (self.f0 > 0 and self.g > 0):
            raise DomainError(f"wavelet needs f0 > 0 and g > 0, got f0={self.f0}, g={self.g}")

    def shifted(self, t0):
        return WaveletSpec(self.f0, t0, self.g)

    def half_support(self, tol=1e-8):
        """Half-width (s) beyond which the envelope drops below ``tol``."""
        return self.g * np.sqrt(-np.log(tol)) / (2.0 * np.pi * self.f0)


def wavelet_eval(spec, t):
    """Evaluate the pulse at time(s) ``t``; returns a float for scalar input."""
    phase = 2.0 * np.pi * spec.f0 * (np.asarray(t, dtype=float) - spec.t0)
    out = np.exp(-(phase**2) / spec.g**2) * np.sin(phase)
    return float(out) if out.ndim == 0 else out
