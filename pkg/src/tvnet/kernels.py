"""Smoothing kernels.

All estimators in this package smooth with a fourth-order kernel: unit mass,
vanishing second moment, compact support.  Ordinary second-order kernels do
not qualify.  One base family is provided (:class:`KernelSpec`), plus the
interpolation composite (:class:`ReducedKernel`) whose squared-integral
constant drives the variance-reduced bands.

Kernels are immutable after construction and safe to share across workers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

# Absolute tolerance for the cached moment/constant quadratures.
QUAD_TOL = 1e-10


class KernelSpec:
    """Fourth-order polynomial kernel ``K(u) = (15/32)(3 - 7u^2)(1 - u^2)``.

    Supported on (-1, 1), symmetric, with ``int K = 1`` and ``int u^2 K = 0``.
    The squared integral ``kappa = int K^2 = 5/4`` is cached at construction
    by adaptive quadrature and validated against the moment requirements.

    Attributes
    ----------
    support : float
        Support radius; the kernel vanishes for ``|u| >= support``.
    mu0, mu2 : float
        Cached zeroth and second moments.
    kappa : float
        Cached squared integral ``int K^2``.
    """

    def __init__(self):
        self.support = 1.0
        self.mu0 = quad(self, -1.0, 1.0, epsabs=QUAD_TOL)[0]
        self.mu2 = quad(lambda u: u * u * self(u), -1.0, 1.0, epsabs=QUAD_TOL)[0]
        self.kappa = quad(lambda u: self(u) ** 2, -1.0, 1.0, epsabs=QUAD_TOL)[0]
        self._validate()

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        inside = np.abs(u) < 1.0
        u2 = u * u
        val = (15.0 / 32.0) * (3.0 - 7.0 * u2) * (1.0 - u2)
        return np.where(inside, val, 0.0)

    def _validate(self):
        if abs(self.mu0 - 1.0) > 1e-8:
            raise ValueError(f"kernel mass is {self.mu0}, expected 1")
        if abs(self.mu2) > 1e-8:
            raise ValueError(f"second moment is {self.mu2}, expected 0 (fourth-order)")
        if self.kappa <= 0.0:
            raise ValueError("squared integral must be positive")
        probe = np.linspace(0.0, 1.5, 64)
        if not np.allclose(self(probe), self(-probe), atol=1e-12):
            raise ValueError("kernel must be symmetric")

    def __repr__(self):
        return f"{type(self).__name__}(support={self.support}, kappa={self.kappa:.6f})"


@dataclass(frozen=True)
class ReductionParams:
    """Parameters of the interpolation step behind the variance-reduced bands.

    ``r`` is the interpolation parameter in (-1, 1); ``delta`` is the
    non-negative constant bounding the smoothing-range function used for the
    shifted evaluation points.
    """

    r: float = 1.0 / np.sqrt(2.0)
    delta: float = 1.3

    def __post_init__(self):
        if not -1.0 < self.r < 1.0:
            raise ValueError(f"r must lie in (-1, 1), got {self.r}")
        if self.delta < 0.0:
            raise ValueError(f"delta must be non-negative, got {self.delta}")

    def coefficients(self, r=None):
        """Interpolation weights (A0, A1, A2) at parameter ``r``.

        They satisfy A0 + A1 + A2 = 1 identically, which keeps the composite
        kernel mass at one and leaves the smoothing bias order unchanged.
        """
        if r is None:
            r = self.r
        return (r * (r - 1.0) / 2.0, 1.0 - r * r, r * (r + 1.0) / 2.0)


class ReducedKernel:
    """Composite kernel equivalent to the interpolated (variance-reduced) fit.

    Averages six shifted copies of the base kernel with the interpolation
    weights at ``+r`` and ``-r``::

        Kred(t) = (1/2) * sum_{s in {+1,-1}} sum_{j=0,1,2} A_j(s*r) * K(t + (s*r + 1 - j) * delta)

    Mass stays at one; the squared integral ``kappa`` shrinks strictly below
    the base kernel's whenever ``delta > 0`` and ``r != 0``.  Support grows to
    radius ``1 + 2*delta``.
    """

    def __init__(self, base: KernelSpec, params: ReductionParams):
        base._validate()
        self.base = base
        self.params = params
        self.support = base.support + 2.0 * params.delta
        self._terms = []
        for sign in (1.0, -1.0):
            coeffs = params.coefficients(sign * params.r)
            for j, a in enumerate(coeffs):
                self._terms.append((0.5 * a, (sign * params.r + 1.0 - j) * params.delta))
        self.mu0 = self._quad(self)
        self.kappa = self._quad(lambda u: self(u) ** 2)
        if abs(self.mu0 - 1.0) > 1e-9:
            raise ValueError(f"composite kernel mass is {self.mu0}, expected 1")

    def _quad(self, fn):
        # Integrand is piecewise polynomial; hand quad the kink locations.
        radius = self.support
        pts = sorted({s - shift for s in (-1.0, 1.0) for (_, shift) in self._terms})
        pts = [p for p in pts if -radius < p < radius]
        val, _ = quad(fn, -radius, radius, points=pts, limit=200, epsabs=QUAD_TOL)
        return val

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        out = np.zeros_like(u)
        for weight, shift in self._terms:
            out = out + weight * self.base(u + shift)
        return out

    def __repr__(self):
        p = self.params
        return (
            f"{type(self).__name__}(r={p.r:.6f}, delta={p.delta}, "
            f"kappa={self.kappa:.6f})"
        )


def build_reduced_kernel(base: KernelSpec, params: ReductionParams) -> ReducedKernel:
    """Construct the composite kernel for the variance-reduced estimators."""
    return ReducedKernel(base, params)


def default_kernel() -> KernelSpec:
    """The package-wide base kernel."""
    return KernelSpec()
