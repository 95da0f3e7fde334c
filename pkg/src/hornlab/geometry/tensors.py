"""Metric tensors, connection coefficients and factor curvatures.

The metric is block diagonal across factors except for the optional
``b3 xi^3`` coupling of a perturbed horn's radial direction to the first
Euclidean coordinate.  Connection coefficients are exact closed forms for
horn, hyperbolic and Euclidean blocks; perturbed horns (and coupled
charts) fall back to central finite differences of the metric with one
Richardson step.
"""

from __future__ import annotations

import numpy as np

from ..errors import CurvatureUndefinedError, MetricSingularError
from .spaces import (
    CompletionPoint,
    Euclidean,
    Horn,
    HornPoint,
    HyperbolicPlane,
    PerturbedHorn,
    SpaceSpec,
    chart_vector,
)

_FD_STEP = 1e-6


def _require_interior(point: CompletionPoint) -> None:
    if point.stratum():
        raise MetricSingularError("metric singular at stratum")


# ---------------------------------------------------------------------------
# warp profiles: g = f(xi) dtheta^2 + h(xi) dxi^2 for horn-type factors


class WarpProfile:
    """Coefficient functions of a rotationally symmetric horn-type block."""

    def __init__(self, B=1.0, a4=0.0, c6=0.0):
        self.B = float(B)
        self.a4 = float(a4)
        self.c6 = float(c6)

    def f(self, xi):
        if self.c6 == 0.0:
            return self.B * xi**6
        return self.B * xi**6 * (1.0 + self.c6 * xi**6)

    def fp(self, xi):
        return self.B * (6.0 * xi**5 + 12.0 * self.c6 * xi**11)

    def fpp(self, xi):
        return self.B * (30.0 * xi**4 + 132.0 * self.c6 * xi**10)

    def h(self, xi):
        if self.a4 == 0.0:
            return 4.0 * self.B  # scalar broadcasts over node arrays
        return 4.0 * self.B * (1.0 + self.a4 * xi**4)

    def hp(self, xi):
        return 16.0 * self.B * self.a4 * xi**3

    def f_minus(self, xi, xi0, dx=None):
        """``f(xi) - f(xi0)`` factored to survive cancellation at xi ~ xi0.

        ``dx`` is the exactly known difference ``xi - xi0`` when the caller
        has it (quadrature substitution nodes).
        """
        if dx is None:
            dx = xi - xi0
        p6 = xi**5 + xi**4 * xi0 + xi**3 * xi0**2 + xi**2 * xi0**3 + xi * xi0**4 + xi0**5
        base = dx * p6
        return self.B * base * (1.0 + self.c6 * (xi**6 + xi0**6))

    def f_inv(self, value):
        """Inverse of f on xi >= 0 (monotone)."""
        if value <= 0.0:
            return 0.0
        xi = (value / self.B) ** (1.0 / 6.0)
        if self.c6:
            for _ in range(60):  # Newton; f is smooth and convex here
                r = self.f(xi) - value
                if abs(r) <= 1e-16 * value:
                    break
                xi -= r / self.fp(xi)
        return xi

    def curvature(self, xi):
        f, fp, fpp = self.f(xi), self.fp(xi), self.fpp(xi)
        h, hp = self.h(xi), self.hp(xi)
        return -fpp / (2.0 * f * h) + fp * (fp * h + f * hp) / (4.0 * f**2 * h**2)


HORN_PROFILE = WarpProfile()


def warp_profile(factor) -> WarpProfile:
    if isinstance(factor, Horn):
        return HORN_PROFILE
    if isinstance(factor, PerturbedHorn):
        return WarpProfile(B=factor.B, a4=factor.a4, c6=factor.c6)
    raise TypeError(f"not a horn-type factor: {factor!r}")


# ---------------------------------------------------------------------------
# metric


def metric_tensor(space: SpaceSpec, point: CompletionPoint) -> np.ndarray:
    """Symmetric positive definite chart metric at an interior point."""
    _require_interior(point)
    x = chart_vector(space, point)
    return metric_at_chart(space, x)


def metric_at_chart(space: SpaceSpec, x: np.ndarray) -> np.ndarray:
    n = space.dim
    g = np.zeros((n, n))
    slices = space.chart_slices()
    eu_off = space.first_euclidean_offset()
    for factor, sl in zip(space.factors, slices):
        if isinstance(factor, Euclidean):
            g[sl, sl] = np.eye(factor.dim)
        elif isinstance(factor, HyperbolicPlane):
            y = x[sl.start + 1]
            g[sl.start, sl.start] = 1.0 / y**2
            g[sl.start + 1, sl.start + 1] = 1.0 / y**2
        else:
            prof = warp_profile(factor)
            xi = x[sl.start + 1]
            g[sl.start, sl.start] = prof.f(xi)
            g[sl.start + 1, sl.start + 1] = prof.h(xi)
            if isinstance(factor, PerturbedHorn) and factor.b3 > 0:
                cross = factor.b3 * xi**3
                g[sl.start + 1, eu_off] = cross
                g[eu_off, sl.start + 1] = cross
    return g


# ---------------------------------------------------------------------------
# connection coefficients


def christoffel(space: SpaceSpec, point: CompletionPoint) -> np.ndarray:
    """Levi-Civita coefficients ``Gamma[k, i, j]`` in chart coordinates."""
    _require_interior(point)
    x = chart_vector(space, point)
    if space.coupled:
        return _christoffel_fd(lambda v: metric_at_chart(space, v), x)
    n = space.dim
    gamma = np.zeros((n, n, n))
    for factor, sl in zip(space.factors, space.chart_slices()):
        k = sl.start
        if isinstance(factor, Euclidean):
            continue
        if isinstance(factor, HyperbolicPlane):
            y = x[k + 1]
            gamma[k, k, k + 1] = gamma[k, k + 1, k] = -1.0 / y
            gamma[k + 1, k, k] = 1.0 / y
            gamma[k + 1, k + 1, k + 1] = -1.0 / y
        elif isinstance(factor, Horn):
            xi = x[k + 1]
            gamma[k, k, k + 1] = gamma[k, k + 1, k] = 3.0 / xi
            gamma[k + 1, k, k] = -0.75 * xi**5
        else:  # PerturbedHorn, diagonal: finite differences per contract
            prof = warp_profile(factor)
            block = _christoffel_fd(
                lambda v: np.diag([prof.f(v[1]), prof.h(v[1])]), x[sl]
            )
            gamma[sl, sl, sl] = block
    return gamma


def _metric_partials(metric_fn, x: np.ndarray, step: float = _FD_STEP) -> np.ndarray:
    """Central differences with one Richardson step: dg[l, i, j]."""
    n = len(x)
    out = np.empty((n,) + metric_fn(x).shape)
    for l in range(n):
        e = np.zeros(n)
        e[l] = 1.0
        d1 = (metric_fn(x + step * e) - metric_fn(x - step * e)) / (2 * step)
        hh = step / 2
        d2 = (metric_fn(x + hh * e) - metric_fn(x - hh * e)) / (2 * hh)
        out[l] = (4.0 * d2 - d1) / 3.0
    return out


def _christoffel_fd(metric_fn, x: np.ndarray) -> np.ndarray:
    g = metric_fn(x)
    ginv = np.linalg.inv(g)
    dg = _metric_partials(metric_fn, x)  # dg[l, i, j] = d_l g_ij
    # Gamma^k_ij = 1/2 g^{kl} (d_i g_jl + d_j g_il - d_l g_ij)
    n = len(x)
    T = np.empty((n, n, n))
    for i in range(n):
        for j in range(n):
            for l in range(n):
                T[i, j, l] = dg[i, j, l] + dg[j, i, l] - dg[l, i, j]
    return 0.5 * np.einsum("kl,ijl->kij", ginv, T)


# ---------------------------------------------------------------------------
# curvature


def curvature(space: SpaceSpec, point: CompletionPoint, factor: int | None = None):
    """Sectional curvature of 2-dimensional factors at an interior point.

    With ``factor`` given returns that factor's value; otherwise a list,
    one entry per factor.  Euclidean factors of dim != 2 are rejected.
    """
    _require_interior(point)
    if factor is not None:
        return _factor_curvature(space.factors[factor], point.blocks[factor])
    return [
        _factor_curvature(f, b) for f, b in zip(space.factors, point.blocks)
    ]


def _factor_curvature(factor, block):
    if isinstance(factor, Euclidean):
        if factor.dim != 2:
            raise CurvatureUndefinedError("curvature undefined for this factor")
        return 0.0
    if isinstance(factor, HyperbolicPlane):
        return -1.0
    assert isinstance(block, HornPoint)
    if isinstance(factor, Horn):
        return -1.5 / block.xi**2
    return warp_profile(factor).curvature(block.xi)
