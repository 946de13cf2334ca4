"""Change-point detection by greedy binary segmentation with an L2 cost.

Segment cost is the sum of squared deviations from the segment mean,
evaluated in O(1) from prefix sums. Either a fixed number of breakpoints
(n_bkps) or a cost-reduction penalty decides when to stop.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import BothOrNeitherStopRule, TooShort


@dataclass
class ChangePointResult:
    breakpoints: list[int]  # first index of each new segment, ascending
    indicator: np.ndarray  # int64 0/1, ones exactly at breakpoints
    costs: list  # total segmentation cost after each accepted split


def detect_changepoints(
    series,
    n_bkps: int | None = None,
    penalty: float | None = None,
) -> ChangePointResult:
    if (n_bkps is None) == (penalty is None):
        raise BothOrNeitherStopRule("give exactly one of n_bkps / penalty")
    x = np.asarray(series, dtype=np.float64)
    n = len(x)
    if n < 2:
        raise TooShort("need at least 2 points")
    if n_bkps is not None and not 0 <= n_bkps <= n - 1:
        raise ValueError(f"n_bkps={n_bkps} outside [0, {n - 1}]")

    s1 = np.concatenate([[0.0], np.cumsum(x)])
    s2 = np.concatenate([[0.0], np.cumsum(x ** 2)])

    def cost(a: int, b: int) -> float:
        # half-open [a, b)
        m = b - a
        if m == 0:
            return 0.0
        total = s1[b] - s1[a]
        return float(s2[b] - s2[a] - total * total / m)

    def best_split(a: int, b: int):
        """(gain, t) over t in (a, b), or None when the segment can't split."""
        if b - a < 2:
            return None
        t = np.arange(a + 1, b)
        left_n = t - a
        right_n = b - t
        left_sum = s1[t] - s1[a]
        right_sum = s1[b] - s1[t]
        left_cost = s2[t] - s2[a] - left_sum ** 2 / left_n
        right_cost = s2[b] - s2[t] - right_sum ** 2 / right_n
        gains = cost(a, b) - left_cost - right_cost
        at = int(np.argmax(gains))  # earliest index wins ties
        return float(gains[at]), int(t[at])

    segments = [(0, n)]
    breakpoints: list[int] = []
    total_cost = cost(0, n)
    costs = [total_cost]
    target = n_bkps if n_bkps is not None else n - 1
    while len(breakpoints) < target:
        best = None
        for si, (a, b) in enumerate(segments):
            found = best_split(a, b)
            if found and (best is None or found[0] > best[0]):
                best = (found[0], found[1], si)
        if best is None:
            break
        gain, t, si = best
        if penalty is not None and gain <= penalty:
            break
        a, b = segments[si]
        segments[si] = (a, t)
        segments.insert(si + 1, (t, b))
        breakpoints.append(t)
        total_cost -= gain
        costs.append(total_cost)
    breakpoints.sort()
    indicator = np.zeros(n, dtype=np.int64)
    indicator[breakpoints] = 1
    return ChangePointResult(breakpoints, indicator, costs)
