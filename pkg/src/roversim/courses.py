"""Reference courses for scripted traverses."""

from __future__ import annotations

import math

import numpy as np

from .errors import ValidationError
from .path import Path

COURSE_KINDS = ("straight", "winding")


def straight_course(start, length: float, heading_deg: float = 0.0, ds: float = 0.25) -> Path:
    if not length > 0:
        raise ValidationError("length", "must be > 0")
    h = math.radians(heading_deg)
    start = np.asarray(start, dtype=float)
    end = start + length * np.array([math.cos(h), math.sin(h)])
    return Path.from_points([start, end]).densify(ds)


def winding_course(start, *, lobes: int = 12, kappa_range=(0.25, 0.65), lobe_turn_deg: float = 60.0,
                   straight_range=(2.0, 6.0), heading_deg: float = 0.0, seed: int = 0,
                   ds: float = 0.25) -> Path:
    """Smooth slalom built from a curvature profile.

    Each lobe turns by ``lobe_turn_deg`` with a half-sine curvature profile
    whose peak is drawn from ``kappa_range``; lobes alternate direction and
    are separated by straights drawn from ``straight_range``. The first and
    last lobes turn half as far, so the heading swings symmetrically about
    ``heading_deg``. Curvature is continuous, which keeps point turns tied to
    the peak curvature rather than to joins between pieces.
    """
    if lobes < 1:
        raise ValidationError("lobes", "must be >= 1")
    k_lo, k_hi = kappa_range
    if not 0 < k_lo <= k_hi:
        raise ValidationError("kappa_range", "must satisfy 0 < low <= high")
    s_lo, s_hi = straight_range
    if not 0 <= s_lo <= s_hi:
        raise ValidationError("straight_range", "must satisfy 0 <= low <= high")
    if not 0 < lobe_turn_deg < 180:
        raise ValidationError("lobe_turn_deg", "must lie in (0, 180)")
    rng = np.random.default_rng(seed)
    turn = math.radians(lobe_turn_deg)
    step = 0.02
    # curvature samples along the course
    kappa = [np.zeros(int(round(rng.uniform(s_lo, s_hi) / step)))]
    sign = 1.0
    for k in range(lobes + 1):
        angle = turn / 2.0 if k in (0, lobes) else turn
        peak = rng.uniform(k_lo, k_hi)
        length = math.pi * angle / (2.0 * peak)
        n = max(int(round(length / step)), 2)
        u = (np.arange(n) + 0.5) / n
        prof = np.sin(math.pi * u)
        # rescale so the discrete lobe turns exactly ``angle``
        prof *= angle / (prof.sum() * step)
        kappa.append(sign * prof)
        kappa.append(np.zeros(int(round(rng.uniform(s_lo, s_hi) / step))))
        sign = -sign
    kappa = np.concatenate(kappa)
    theta = math.radians(heading_deg) + np.concatenate([[0.0], np.cumsum(kappa * step)])
    # midpoint headings give a second-order accurate position integral
    mid = 0.5 * (theta[:-1] + theta[1:])
    xy = np.vstack([[0.0, 0.0], np.cumsum(step * np.column_stack([np.cos(mid), np.sin(mid)]), axis=0)])
    xy += np.asarray(start, dtype=float)
    stride = max(int(round(ds / step)), 1)
    idx = np.arange(0, len(xy), stride)
    if idx[-1] != len(xy) - 1:
        idx = np.append(idx, len(xy) - 1)
    return Path.from_points(xy[idx])


def build_course(spec: dict, start, default_heading: float | None = None) -> Path:
    """Course from a scenario ``route.course`` mapping."""
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind not in COURSE_KINDS:
        raise ValidationError("route.course.kind", f"must be one of {COURSE_KINDS}")
    if "heading_deg" not in spec and default_heading is not None:
        spec["heading_deg"] = default_heading
    try:
        if kind == "straight":
            return straight_course(start, **spec)
        for key in ("kappa_range", "straight_range"):
            if key in spec:
                spec[key] = tuple(spec[key])
        return winding_course(start, **spec)
    except TypeError as exc:
        raise ValidationError("route.course", str(exc)) from None
    except ValidationError as exc:
        raise ValidationError(f"route.course.{exc.path}", exc.message) from None
