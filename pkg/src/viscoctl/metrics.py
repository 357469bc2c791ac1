"""Force tracking error and the composite (point + area) deformation error.

eps_dist is in mm and eps_area in mm^2; the composite index adds them with
fixed weights regardless, so treat eps_total as a score rather than a
physical quantity.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Sequence

import numpy as np


@dataclass
class TaxelFrame:
    points: list[tuple[float, float]] = dc_field(default_factory=list)
    forces: list[float] = dc_field(default_factory=list)
    t: float = 0.0

    def __post_init__(self):
        if len(self.points) != len(self.forces):
            raise ValueError("one force per taxel point")
        if any(f < 0 for f in self.forces):
            raise ValueError("taxel forces must be non-negative")

    @property
    def resultant(self) -> float:
        return math.fsum(self.forces)


@dataclass(frozen=True)
class CdeWeights:
    alpha: float = 0.4
    beta: float = 0.6


def force_tracking_error(frame: TaxelFrame, target_resultant: float) -> float:
    if target_resultant < 0:
        raise ValueError("target resultant must be non-negative")
    return abs(frame.resultant - target_resultant)


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points: Sequence[tuple[float, float]]) -> list[tuple[float, float]]:
    """Monotone chain; counter-clockwise, collinear points dropped."""
    pts = sorted(set((float(x), float(y)) for x, y in points))
    if len(pts) <= 2:
        return pts
    lower: list = []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def convex_hull_area(points: Sequence[tuple[float, float]]) -> float:
    hull = convex_hull(points)
    if len(hull) < 3:
        return 0.0
    s = 0.0
    for (x0, y0), (x1, y1) in zip(hull, hull[1:] + hull[:1]):
        s += x0 * y1 - x1 * y0
    return abs(s) / 2.0


def cde_terms(ref_points, actual_points, target_area: float, actual_area: float):
    """(eps_dist, eps_area): RMS point deviation and absolute area deviation."""
    ref = np.asarray(ref_points, dtype=float)
    act = np.asarray(actual_points, dtype=float)
    if ref.shape != act.shape:
        raise ValueError(f"point lists differ in shape: {ref.shape} vs {act.shape}")
    if len(ref):
        eps_dist = float(np.sqrt(np.mean(np.sum((ref - act) ** 2, axis=-1))))
    else:
        eps_dist = 0.0
    return eps_dist, abs(target_area - actual_area)


def composite_deformation_error(ref_points, actual_points, target_area: float,
                                actual_area: float, weights: CdeWeights = CdeWeights()) -> float:
    eps_dist, eps_area = cde_terms(ref_points, actual_points, target_area, actual_area)
    return weights.alpha * eps_dist + weights.beta * eps_area
