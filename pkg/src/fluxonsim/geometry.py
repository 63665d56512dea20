"""Angle bookkeeping: branch-cut-safe increments, unwrapped totals, windings.

All angles here are polar angles of a point relative to a center, measured
from the +x axis. Totals are kept unwrapped; reduction modulo 2*pi happens
only when a value is reported.
"""

from collections import namedtuple
import math

import numpy as np

from .errors import Coincident, NotInteger, StepTooCoarse

TWO_PI = 2.0 * math.pi
COLLISION_EPS = 1e-6
MAX_SUBSTEP_ANGLE = 0.5 * math.pi


class Point2(namedtuple("Point2", "x y")):
    """Position in the plane. Components must be finite."""

    __slots__ = ()

    def __new__(cls, x, y):
        x = float(x)
        y = float(y)
        if not (math.isfinite(x) and math.isfinite(y)):
            raise ValueError(f"non-finite point ({x}, {y})")
        return super().__new__(cls, x, y)


def as_point(p):
    """Coerce a 2-sequence to a Point2."""
    if isinstance(p, Point2):
        return p
    x, y = p
    return Point2(x, y)


def wrap_increment(d):
    """Map a difference of two principal angles onto (-pi, pi].

    ``d`` must lie in (-2pi, 2pi), which holds for any difference of two
    values returned by ``atan2``. The branch form (rather than a modulo)
    keeps ``wrap_increment(-d) == -wrap_increment(d)`` bit for bit away
    from the +-pi boundary, and leaves small increments untouched.
    """
    if np.ndim(d) == 0:
        d = float(d)
        if d > math.pi:
            return d - TWO_PI
        if d <= -math.pi:
            return d + TWO_PI
        return d
    d = np.asarray(d, dtype=float)
    return np.where(d > np.pi, d - TWO_PI, np.where(d <= -np.pi, d + TWO_PI, d))


def wrap_signed(a):
    """Reduce angles onto [-pi, pi). Used for reporting residuals."""
    a = np.asarray(a, dtype=float)
    inside = (a >= -np.pi) & (a < np.pi)
    # values already in range pass through so tiny residuals keep their bits
    r = np.where(inside, a, np.mod(a + np.pi, TWO_PI) - np.pi)
    return float(r) if np.ndim(r) == 0 else r


def wrap_positive(a):
    """Reduce angles onto [0, 2pi)."""
    r = np.mod(np.asarray(a, dtype=float), TWO_PI)
    # np.mod can round up to exactly 2pi for tiny negative inputs
    r = np.where(r >= TWO_PI, 0.0, r)
    return float(r) if np.ndim(r) == 0 else r


def angle_of(p, center, eps=COLLISION_EPS):
    """Principal polar angle of ``p - center``, in (-pi, pi].

    Raises Coincident when the two points are within ``eps``.
    """
    dx = float(p[0]) - float(center[0])
    dy = float(p[1]) - float(center[1])
    if math.hypot(dx, dy) <= eps:
        raise Coincident(f"point {tuple(p)} within {eps} of center {tuple(center)}")
    return math.atan2(dy, dx)


def angle_increment(
    p_prev, p_curr, c_prev, c_curr, eps=COLLISION_EPS, max_step=MAX_SUBSTEP_ANGLE
):
    """Signed change of the polar angle of ``p - c`` over one step.

    The result is exact whenever the true change over the step is below pi
    in magnitude. A magnitude above ``max_step`` raises StepTooCoarse so the
    caller can split the step; pass ``max_step=None`` to skip that check.
    """
    a0 = angle_of(p_prev, c_prev, eps)
    a1 = angle_of(p_curr, c_curr, eps)
    d = wrap_increment(a1 - a0)
    if max_step is not None and abs(d) > max_step:
        raise StepTooCoarse(f"increment {d:.6g} exceeds {max_step:.6g}")
    return d


def winding_of_closed_path(increments, tolerance=1e-9):
    """Winding count of a closed path given its angle increments.

    Returns ``round(sum / 2pi)``; raises NotInteger when the sum is further
    than ``tolerance`` turns from an integer.
    """
    total = math.fsum(np.ravel(np.asarray(increments, dtype=float)))
    turns = total / TWO_PI
    n = round(turns)
    if abs(turns - n) >= tolerance:
        raise NotInteger(
            f"accumulated {total!r} rad is {turns!r} turns, not within {tolerance} of {n}"
        )
    return int(n)


def _as_track(path, m):
    arr = np.asarray(path, dtype=float)
    if arr.ndim == 1:
        arr = np.broadcast_to(arr, (m, 2))
    if arr.shape != (m, 2):
        raise ValueError(f"expected {m} vertices, got shape {arr.shape}")
    return arr


def polyline_total_angle(
    path, center_path=(0.0, 0.0), eps=COLLISION_EPS, max_step=MAX_SUBSTEP_ANGLE
):
    """Accumulated angle of a polyline around a (possibly moving) center.

    ``path`` is an (m, 2) vertex array; ``center_path`` is either a fixed
    point or an (m, 2) array moving in lockstep. Segments whose increment
    would exceed ``max_step`` are bisected on the linear interpolant.
    """
    p = np.asarray(path, dtype=float)
    c = _as_track(center_path, len(p))
    total = 0.0
    for j in range(len(p) - 1):
        total += _segment_angle(p[j], p[j + 1], c[j], c[j + 1], eps, max_step, 0)
    return total


def _segment_angle(p0, p1, c0, c1, eps, max_step, depth):
    try:
        return angle_increment(p0, p1, c0, c1, eps, max_step)
    except StepTooCoarse:
        if depth > 60:
            raise
    pm = 0.5 * (p0 + p1)
    cm = 0.5 * (c0 + c1)
    return _segment_angle(p0, pm, c0, cm, eps, max_step, depth + 1) + _segment_angle(
        pm, p1, cm, c1, eps, max_step, depth + 1
    )


def oracle_total_angle(path, center_path=(0.0, 0.0), refinement=1, eps=COLLISION_EPS):
    """Brute-force total angle of a polyline around a moving center.

    Both polylines are resampled at ``refinement`` points per segment by
    linear interpolation, and the micro-increments are summed through
    complex division. Meant as an independent check of the accumulation
    path, not for production use.
    """
    if refinement < 1:
        raise ValueError("refinement must be >= 1")
    p = np.asarray(path, dtype=float)
    c = _as_track(center_path, len(p))
    s = np.arange(refinement) / refinement
    rel = p - c
    seg = rel[:-1, None, :] + s[None, :, None] * (rel[1:] - rel[:-1])[:, None, :]
    pts = np.concatenate([seg.reshape(-1, 2), rel[-1:]])
    z = pts[:, 0] + 1j * pts[:, 1]
    if np.any(np.abs(z) <= eps):
        raise Coincident("oracle path passes within eps of the center")
    return float(np.sum(np.angle(z[1:] / z[:-1])))
