"""Map-space and measure-space error metrics, plus two counterexamples
showing why small displacement does not control pushforward TV outside the
measure-preserving class.

TV between grid densities is the L^1 distance of densities (valid for
absolutely continuous measures); atomic pushforwards are compared through
histograms with a documented aliasing caveat.
"""

from __future__ import annotations

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from reluflow.kr import GridDensity
from reluflow.mesh import RectDomain
from reluflow.schedule import ControlSchedule, flow_points, invert_schedule

# strictly positive floor applied to pushforward values so they remain
# valid grid densities; far below every quadrature tolerance used here
_DENSITY_FLOOR = 1e-15


class SingularTransportError(ValueError):
    """Numeric Jacobian of a generic transport is (near) singular."""


def _cell_centers(domain: RectDomain, resolution: int) -> tuple:
    axes = [lo + (np.arange(resolution) + 0.5) * (hi - lo) / resolution
            for lo, hi in zip(domain.lower, domain.upper)]
    mesh = np.meshgrid(*axes, indexing="ij")
    X = np.stack([m.ravel() for m in mesh], axis=-1)
    cell_volume = domain.volume / resolution ** domain.d
    return X, cell_volume


def lp_map_error(f, g, domain: RectDomain, p: float, resolution: int) -> float:
    """(int_Omega |f - g|^p)^{1/p} by midpoint quadrature on cell centers."""
    if p < 1:
        raise ValueError("p must be >= 1")
    X, vol = _cell_centers(domain, resolution)
    diff = np.atleast_2d(np.asarray(f(X), float)) - np.atleast_2d(
        np.asarray(g(X), float))
    norms = np.linalg.norm(diff, axis=1)
    return float((np.sum(norms ** p) * vol) ** (1.0 / p))


def density_interpolator(rho: GridDensity):
    """Multilinear interpolant of a grid density, zero outside [0,1]^d."""
    return RegularGridInterpolator(rho.nodes, rho.values, method="linear",
                                   bounds_error=False, fill_value=0.0)


def pushforward_values(transport, rho_fn, Y: np.ndarray) -> np.ndarray:
    """Pushforward density at points Y: rho(x) / |det grad psi(x)|.

    For a ControlSchedule the preimage x = psi^{-1}(y) and the inverse
    log-Jacobian are exact (time-reversed flow); the forward Jacobian
    satisfies log det grad psi(x) = -logdet_inv(y), so the density is
    rho(x) * exp(logdet_inv).  For a generic transport pass a (forward,
    inverse) callable pair; the Jacobian is a central finite difference.
    """
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if isinstance(transport, ControlSchedule):
        inv = invert_schedule(transport)
        X, logdet_inv = flow_points(Y, inv)
        return np.asarray(rho_fn(X), float) * np.exp(logdet_inv)
    forward, inverse = transport
    X = np.atleast_2d(np.asarray(inverse(Y), float))
    d = X.shape[1]
    eps = 1e-6
    jac = np.empty((X.shape[0], d, d))
    for j in range(d):
        E = np.zeros(d)
        E[j] = eps
        jac[:, :, j] = (np.asarray(forward(X + E), float)
                        - np.asarray(forward(X - E), float)) / (2 * eps)
    dets = np.abs(np.linalg.det(jac))
    if np.any(dets < 1e-12):
        raise SingularTransportError("numeric Jacobian is singular")
    return np.asarray(rho_fn(X), float) / dets


def pushforward_density(transport, rho: GridDensity, shape) -> GridDensity:
    """Pushforward of a grid density, evaluated on a [0,1]^d grid.

    rho is extended by zero outside the unit cube; output values are floored
    at a tiny positive constant to remain a valid GridDensity.
    """
    rho_fn = density_interpolator(rho)
    axes = [np.linspace(0.0, 1.0, n) for n in shape]
    mesh = np.meshgrid(*axes, indexing="ij")
    Y = np.stack([m.ravel() for m in mesh], axis=-1)
    vals = pushforward_values(transport, rho_fn, Y).reshape(shape)
    return GridDensity(np.maximum(vals, _DENSITY_FLOOR))


def tv_distance(rho1: GridDensity, rho2: GridDensity) -> float:
    """Trapezoid integral of |rho1 - rho2| on their common grid."""
    if rho1.values.shape != rho2.values.shape:
        raise ValueError("densities live on different grids")
    v = np.abs(rho1.values - rho2.values)
    for axis in reversed(range(v.ndim)):
        v = np.trapezoid(v, np.linspace(0, 1, v.shape[axis]), axis=axis)
    return float(v)


def lipschitz_norm(rho: GridDensity) -> float:
    """||rho||_{C^{0,1}} estimate: max value plus max grid gradient norm."""
    grads = np.gradient(rho.values, *rho.nodes)
    if rho.d == 1:
        grads = [grads]
    gnorm = np.sqrt(sum(g ** 2 for g in grads))
    return float(rho.values.max() + gnorm.max())


def tv_stability_bound(displacements, logdets, rho: GridDensity,
                       volume: float = 1.0) -> float:
    """Diagnostic upper bound for pushforward TV from samples of eta.

    bound = e^M ( ||rho||_{C^{0,1}} ||eta - id||_{L^1}
                  + ||rho||_inf ||e^{logdet} - 1||_{L^1} ),
    with M = sup |logdet| over the samples; the second term vanishes for
    measure-preserving eta, leaving the Lipschitz displacement term.
    """
    displacements = np.atleast_2d(np.asarray(displacements, float))
    logdets = np.asarray(logdets, dtype=float)
    M = float(np.max(np.abs(logdets))) if logdets.size else 0.0
    l1_disp = float(np.mean(np.linalg.norm(displacements, axis=1))) * volume
    l1_jac = float(np.mean(np.abs(np.expm1(logdets)))) * volume
    return float(np.exp(M) * (lipschitz_norm(rho) * l1_disp
                              + rho.values.max() * l1_jac))


def contraction_check(transport, mu1: GridDensity, mu2: GridDensity,
                      resolution: int = 256) -> tuple:
    """(TV of pushforwards, TV of inputs); the former never exceeds the
    latter beyond quadrature error, since restriction to a window only
    discards mass."""
    shape = (resolution + 1,) * mu1.d
    p1 = pushforward_density(transport, mu1, shape)
    p2 = pushforward_density(transport, mu2, shape)
    interp1 = density_interpolator(mu1)
    interp2 = density_interpolator(mu2)
    axes = [np.linspace(0.0, 1.0, n) for n in shape]
    mesh = np.meshgrid(*axes, indexing="ij")
    X = np.stack([m.ravel() for m in mesh], axis=-1)
    r1 = GridDensity(np.maximum(interp1(X).reshape(shape), _DENSITY_FLOOR))
    r2 = GridDensity(np.maximum(interp2(X).reshape(shape), _DENSITY_FLOOR))
    return tv_distance(p1, p2), tv_distance(r1, r2)


def oscillation_counterexample(alpha: float, h: float,
                               resolution: int = 200_001) -> tuple:
    """Sup displacement and pushforward TV of x -> x + alpha h sin(2 pi x/h).

    On the circle with uniform base measure the TV equals
    int_0^1 |psi_h'(x) - 1| dx = 2 pi alpha int_0^1 |cos(2 pi x / h)| dx,
    which tends to 4 alpha as h -> 0 while the displacement alpha h vanishes.
    """
    if not 0 < alpha < 1.0 / (2.0 * np.pi):
        raise ValueError("need 0 < alpha < 1/(2 pi) for injectivity")
    if not 0 < h < 1:
        raise ValueError("need 0 < h < 1")
    x = np.linspace(0.0, 1.0, resolution)
    integrand = 2.0 * np.pi * alpha * np.abs(np.cos(2.0 * np.pi * x / h))
    tv = float(np.trapezoid(integrand, x))
    return alpha * h, tv


def rounding_counterexample(h: float, refine: int = 8) -> float:
    """Histogram TV between the uniform density and its rounding pushforward.

    Q_h sends x to the center of its h-cell, so Q_h# mu is purely atomic and
    the true TV is 2; a histogram at bin width h/refine reports
    2 (1 - 1/refine), approaching 2 as the histogram refines.  At refine = 1
    the atoms alias back onto the cells and the estimate collapses to ~0
    (the aliasing caveat).
    """
    if h <= 0:
        raise ValueError("h must be positive")
    n_cells = max(int(round(1.0 / h)), 1)
    n_bins = n_cells * refine
    edges = np.linspace(0.0, 1.0, n_bins + 1)
    mass_uniform = np.diff(edges)
    centers = (np.arange(n_cells) + 0.5) * h
    mass_atomic = np.zeros(n_bins)
    idx = np.clip((centers * n_bins).astype(int), 0, n_bins - 1)
    np.add.at(mass_atomic, idx, h)
    return float(np.sum(np.abs(mass_atomic - mass_uniform)))
