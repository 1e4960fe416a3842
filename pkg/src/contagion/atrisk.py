"""Piecewise-constant decomposition of a series' at-risk timeline.

Between exposure arrivals and delay-bin edges, a user's raw visibility (and
exposure count) is constant, so per-second quantities aggregate exactly from
a handful of segments instead of a second-by-second scan.
"""

from __future__ import annotations

from dataclasses import dataclass

from .events import ExposureSeries


@dataclass(frozen=True)
class RiskSegment:
    start: int  # first second covered
    end: int  # exclusive
    n_e: int  # exposures visible throughout the segment
    nu: float  # raw visibility: susceptibility times delay density

    @property
    def seconds(self) -> int:
        return self.end - self.start


def risk_segments(
    series: ExposureSeries,
    p_nf: float,
    densities,
    edges,
    site: str,
    obs_end: int,
) -> list[RiskSegment]:
    """Constant-hazard segments covering [first exposure, response or obs_end].

    A message arriving at second s counts toward n_e from s onward but has
    zero delay density until s + 1. In the first-appearance interface only
    the first exposure drives visibility; in the chronological interface all
    exposures combine as 1 - prod(1 - tau_i).
    """
    t1 = series.exposure_times[0]
    if series.response_time is not None and series.response_time <= obs_end:
        end = series.response_time
    else:
        end = obs_end
    if end < t1:
        return []
    expo = [t for t in series.exposure_times if t <= end]

    support = edges[-1]
    points = {t1, end + 1}
    drivers = expo if site == "twitter" else expo[:1]
    for te in expo:
        if t1 <= te <= end:
            points.add(te)
    for te in drivers:
        for e in edges:
            s = te + e
            if t1 < s <= end:
                points.add(s)
        s = te + support
        if t1 < s <= end:
            points.add(s)
    bounds = sorted(p for p in points if t1 <= p <= end + 1)
    if bounds[-1] != end + 1:
        bounds.append(end + 1)

    if edges[0] != 1:
        raise ValueError("risk segmentation requires the power-of-two delay grid")

    def density_at(dt: int) -> float:
        if dt < 1 or dt >= support:
            return 0.0
        # edges are powers of two: bit_length locates the bin directly
        return densities[dt.bit_length() - 1]

    segments: list[RiskSegment] = []
    for a, b in zip(bounds, bounds[1:]):
        n_e = 0
        for te in expo:
            if te <= a:
                n_e += 1
            else:
                break
        if site == "digg":
            nu = p_nf * density_at(a - t1)
        else:
            prod = 1.0
            for te in expo[:n_e]:
                prod *= 1.0 - p_nf * density_at(a - te)
            nu = 1.0 - prod
        segments.append(RiskSegment(start=a, end=b, n_e=n_e, nu=nu))
    return segments
