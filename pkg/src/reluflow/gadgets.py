"""Elementary building-block schedules.

Four constructors, each with an exact closed-form flow:

* ``dilation_1d``      -- one segment; dilates a half-line about its endpoint.
* ``translation_gadget`` -- two segments (dilate, contract about a shifted
  center); the composite equals x + tau on {x >= c + h} and the identity on
  {x <= c}, interpolating monotonically on the ramp (c, c + h).
* ``shear_translation`` -- two divergence-free segments; translates the
  half-space {x.n + b >= h} by tau e_l (u = e_l perpendicular to n = +-e_k),
  is the identity on {x.n + b <= 0}, and moves the middle strip by
  (|tau|/h)(x.n + b) sgn(tau) e_l.  Volume-preserving: logdet increment is
  exactly zero.
* ``slope_change_stage`` -- one segment realizing x -> c + ratio * (x - c)
  on {x >= c} over its own duration, the basic step for monotone
  piecewise-affine profiles.

Gadgets accept an ambient dimension ``d`` and an ``axis`` so 1-d
constructions lift to R^d acting on a single coordinate.
"""

from __future__ import annotations

import numpy as np

from reluflow.schedule import ControlSchedule, Neuron, Segment


def _unit(d: int, axis: int) -> np.ndarray:
    if not 0 <= axis < d:
        raise ValueError(f"axis {axis} out of range for dimension {d}")
    e = np.zeros(d)
    e[axis] = 1.0
    return e


def dilation_1d(w: float, b: float, sign: int, duration: float,
                d: int = 1, axis: int = 0) -> ControlSchedule:
    """One-segment dilation about b with factor e^{w*duration}.

    sign=+1 fixes {x <= b} and dilates {x >= b}; sign=-1 is the mirror image.
    """
    if sign not in (+1, -1):
        raise ValueError("sign must be +1 or -1")
    if duration < 0:
        raise ValueError("duration must be >= 0")
    e = _unit(d, axis)
    neuron = Neuron(sign * w * e, sign * e, -sign * b)
    return ControlSchedule((Segment(neuron, duration),))


def translation_gadget(c: float, h: float, tau: float, T: float,
                       d: int = 1, axis: int = 0) -> ControlSchedule:
    """Two-segment gadget: x + tau on {x >= c+h}, identity on {x <= c}.

    Stage 1 dilates about c with rate w = (2/T) log(1 + tau/h); stage 2
    contracts about c + h + tau with rate -w.  Each stage lasts T/2, so
    |w| <= (2/T) log(1 + tau/h) and biases are bounded by |c| + tau + h.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    if tau < 0:
        raise ValueError("tau must be >= 0")
    if T <= 0:
        raise ValueError("T must be positive")
    e = _unit(d, axis)
    rate = (2.0 / T) * np.log1p(tau / h)
    eta = tau + h
    seg1 = Segment(Neuron(rate * e, e, -c), T / 2.0)
    seg2 = Segment(Neuron(-rate * e, e, -(c + eta)), T / 2.0)
    return ControlSchedule((seg1, seg2))


def shear_translation(k: int, l: int, a_sign: int, b: float, h: float,
                      tau: float, d: int) -> ControlSchedule:
    """Two divergence-free segments translating a half-space sideways.

    With n = a_sign * e_k and u = sgn(tau) * e_l, the composite flow is

        x + tau e_l                          where x.n + b - h >= 0,
        x                                    where x.n + b <= 0,
        x + (|tau|/h)(x.n + b) sgn(tau) e_l  on the middle strip.

    Both segments satisfy a.w = 0, so the tracked logdet increment is
    exactly zero and the flow is volume preserving.
    """
    if k == l:
        raise ValueError("k and l must be distinct axes (shear needs u ⟂ n)")
    if a_sign not in (+1, -1):
        raise ValueError("a_sign must be +1 or -1")
    if h <= 0:
        raise ValueError("h must be positive")
    n = a_sign * _unit(d, k)
    u = np.sign(tau) * _unit(d, l)
    t = abs(tau) / h
    seg1 = Segment(Neuron(-u, n, b - h), t)
    seg2 = Segment(Neuron(u, n, b), t)
    return ControlSchedule((seg1, seg2))


def shear_for_region(move_axis: int, tau: float, sel_axis: int, lo: float,
                     hi: float, d: int) -> ControlSchedule:
    """Shear translating by tau e_{move_axis} with a ramp in a chosen band.

    Convenience wrapper around :func:`shear_translation`: the flow moves
    points with x_{sel_axis} >= hi (when lo < hi) or x_{sel_axis} <= hi
    (when lo > hi), is the identity past ``lo``, and ramps in between.
    """
    width = abs(hi - lo)
    if width <= 0:
        raise ValueError("ramp must have positive width")
    if lo < hi:
        # active above: x.n + b - h >= 0 with n = +e_sel, h = width, b = -lo
        return shear_translation(sel_axis, move_axis, +1, -lo, width, tau, d)
    # active below: n = -e_sel; identity for x >= lo, active for x <= hi
    return shear_translation(sel_axis, move_axis, -1, lo, width, tau, d)


def slope_change_stage(c: float, ratio: float, h: float,
                       d: int = 1, axis: int = 0) -> Segment:
    """One segment whose time-h flow fixes {x <= c} and maps x -> c + ratio (x - c).

    The rate gamma = log(ratio)/h integrates to the slope ratio over the
    stage's own duration h.
    """
    if ratio <= 0:
        raise ValueError("ratio must be positive (profile must increase)")
    if h <= 0:
        raise ValueError("h must be positive")
    e = _unit(d, axis)
    gamma = np.log(ratio) / h
    return Segment(Neuron(gamma * e, e, -c), h)
