"""Built-in target diffeomorphisms for end-to-end pipeline runs.

Each target is a callable on (N, d) arrays with a known domain and, where
available, an analytic inverse (used for exact pushforward comparisons).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from reluflow.compressible import MonotoneProfile, eval_profile
from reluflow.kr import GridDensity, kr_map
from reluflow.mesh import RectDomain

UNIT_SQUARE = RectDomain([0.0, 0.0], [1.0, 1.0])


@dataclass(frozen=True)
class TargetMap:
    name: str
    fn: object                 # (N, d) -> (N, d)
    domain: RectDomain
    inverse: object = None     # analytic inverse, if available
    profile: MonotoneProfile = None   # set for one-coordinate profile targets


def _sine_shear(X):
    X = np.atleast_2d(X)
    return np.column_stack([X[:, 0], X[:, 1] + 0.25 * np.sin(np.pi * X[:, 0])])


def _sine_shear_inv(Y):
    Y = np.atleast_2d(Y)
    return np.column_stack([Y[:, 0], Y[:, 1] - 0.25 * np.sin(np.pi * Y[:, 0])])


_RC_BETA = 0.2
_RC_CENTER = np.array([0.5, 0.5])


def _rc_scale(r2):
    return 1.0 - _RC_BETA * np.exp(-4.0 * r2)


def _radial_compress(X):
    X = np.atleast_2d(X)
    v = X - _RC_CENTER
    r2 = np.sum(v * v, axis=1)
    return _RC_CENTER + v * _rc_scale(r2)[:, None]


def _radial_compress_inv(Y):
    # solve r_out = r_in s(r_in^2) per point by monotone bisection
    Y = np.atleast_2d(Y)
    v = Y - _RC_CENTER
    r_out = np.linalg.norm(v, axis=1)
    lo = np.zeros_like(r_out)
    hi = r_out / (1.0 - _RC_BETA) + 1e-9
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        below = mid * _rc_scale(mid * mid) < r_out
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    r_in = 0.5 * (lo + hi)
    scale = np.where(r_out > 0, r_in / np.maximum(r_out, 1e-300), 1.0)
    return _RC_CENTER + v * scale[:, None]


def _compose(f, g):
    return lambda X: f(g(X))


_DEFAULT_AFFINE_M = np.array([[1.1, 0.1], [0.0, 0.85]])
_DEFAULT_AFFINE_C = np.array([0.02, 0.05])

_DEFAULT_PROFILE = MonotoneProfile([0.0, 0.4, 1.0], [0.5, 4.0 / 3.0], 0.0)


def get_target(name: str, params: dict = None) -> TargetMap:
    """Look up a catalog target; ``params`` overrides target-specific knobs."""
    params = dict(params or {})
    if name == "identity":
        return TargetMap(name, lambda X: np.atleast_2d(np.asarray(X, float)),
                         UNIT_SQUARE,
                         inverse=lambda Y: np.atleast_2d(np.asarray(Y, float)))
    if name == "affine":
        M = np.asarray(params.get("matrix", _DEFAULT_AFFINE_M), dtype=float)
        c = np.asarray(params.get("offset", _DEFAULT_AFFINE_C), dtype=float)
        if np.linalg.det(M) <= 0:
            raise ValueError("affine target must be orientation preserving")
        M_inv = np.linalg.inv(M)
        return TargetMap(name,
                         lambda X: np.atleast_2d(X) @ M.T + c,
                         UNIT_SQUARE,
                         inverse=lambda Y: (np.atleast_2d(Y) - c) @ M_inv.T)
    if name == "sine-shear":
        return TargetMap(name, _sine_shear, UNIT_SQUARE,
                         inverse=_sine_shear_inv)
    if name == "radial-compress":
        return TargetMap(name, _radial_compress, UNIT_SQUARE,
                         inverse=_radial_compress_inv)
    if name == "sine-radial":
        return TargetMap(name, _compose(_sine_shear, _radial_compress),
                         UNIT_SQUARE,
                         inverse=_compose(_radial_compress_inv,
                                          _sine_shear_inv))
    if name == "profile1d":
        prof = params.get("profile")
        prof = (MonotoneProfile.from_dict(prof) if isinstance(prof, dict)
                else prof or _DEFAULT_PROFILE)
        d = int(params.get("d", 2))
        lower = [prof.breakpoints[0]] + [0.0] * (d - 1)
        upper = [prof.breakpoints[-1]] + [1.0] * (d - 1)
        knots = np.asarray(prof.breakpoints, dtype=float)
        images = eval_profile(prof, knots)

        def fn(X):
            X = np.atleast_2d(np.asarray(X, float)).copy()
            X[:, 0] = eval_profile(prof, X[:, 0])
            return X

        def inv(Y):
            Y = np.atleast_2d(np.asarray(Y, float)).copy()
            Y[:, 0] = np.interp(Y[:, 0], images, knots)
            return Y

        return TargetMap(name, fn, RectDomain(lower, upper), inverse=inv,
                         profile=prof)
    if name == "kr":
        rho0 = density_from_spec(params.get("rho0", "uniform"))
        rho1 = density_from_spec(params.get("rho1", "tilted"))
        fwd = kr_map(rho0, rho1)
        back = kr_map(rho1, rho0)
        return TargetMap(name, fwd, UNIT_SQUARE, inverse=back)
    raise KeyError(f"unknown target {name!r}; catalog: identity, affine, "
                   "sine-shear, radial-compress, sine-radial, profile1d, kr")


def density_from_spec(spec, shape=(65, 65)) -> GridDensity:
    """Resolve a density argument: catalog name, grid values, or GridDensity.

    Catalog (on [0,1]^2, normalized): uniform, tilted (1 + 0.4x + 0.2y),
    product ((1+x)(0.5+y)), bump (1 + 0.8 exp(-8|x-c|^2)).
    """
    if isinstance(spec, GridDensity):
        return spec
    if isinstance(spec, dict):
        return GridDensity(np.asarray(spec["values"], dtype=float))
    if spec == "uniform":
        return GridDensity.uniform(shape)
    if spec == "tilted":
        return GridDensity.from_function(
            lambda X: 1 + 0.4 * X[:, 0] + 0.2 * X[:, 1], shape)
    if spec == "product":
        return GridDensity.from_function(
            lambda X: (1 + X[:, 0]) * (0.5 + X[:, 1]), shape)
    if spec == "bump":
        return GridDensity.from_function(
            lambda X: 1 + 0.8 * np.exp(
                -8 * np.sum((X - 0.5) ** 2, axis=1)), shape)
    raise KeyError(f"unknown density {spec!r}; catalog: uniform, tilted, "
                   "product, bump")


CATALOG = ("identity", "affine", "sine-shear", "radial-compress",
           "sine-radial", "profile1d", "kr")
