"""Trust-region and geometry-improvement steps for linear models on a box.

With a linear model the trust-region subproblem -- minimize ``g . d`` subject
to ``base + d`` in the box and ``||d|| <= Delta`` -- is solved exactly by
tracing the piecewise-linear projected-gradient path

    d(t) = P(base - t g) - base,   t >= 0.

Each coordinate moves linearly until it reaches its bound (its breakpoint) and
is pinned there; the trace stops at the first ``t`` where ``||d(t)|| = Delta``
or where every descending coordinate is pinned, whichever comes first.  The
path has at most n breakpoints, so the cost is O(n log n), and no iterative
scheme is required.  The same path construction, run along both signs of a
Lagrange polynomial's gradient, yields the geometry-improvement step.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import GeometryError
from .model import LinearModel, SampleSet, lagrange_polynomials

# ||d|| = Delta is tested with this relative slack; exact equality is
# meaningless in floating point.
FULL_STEP_RTOL = 1e-10


def _trace_projected_path(base, direction, box, radius) -> np.ndarray:
    """Endpoint of ``t -> P(base + t * direction) - base`` traced to ``radius``.

    ``base`` must be feasible.  Returns the step at the first ``t`` with
    ``||d(t)|| = radius``, or the path's limit point once all moving
    coordinates are pinned at their bounds.
    """
    n = base.size
    d = np.zeros(n)
    moving = direction != 0.0

    # Breakpoint of each coordinate: the t at which it reaches its bound.
    t_break = np.full(n, np.inf)
    up = moving & (direction > 0)
    dn = moving & (direction < 0)
    t_break[up] = (box.upper[up] - base[up]) / direction[up]
    t_break[dn] = (box.lower[dn] - base[dn]) / direction[dn]

    order = [int(j) for j in np.argsort(t_break) if moving[j]]
    t_cur = 0.0
    for j in order + [None]:
        t_next = math.inf if j is None else max(t_break[j], t_cur)
        v = np.where(moving, direction, 0.0)
        a = float(v @ v)
        if a > 0.0 and t_next > t_cur:
            # First s with ||d + s v|| = radius on this segment.
            b = 2.0 * float(d @ v)
            c = float(d @ d) - radius * radius
            disc = b * b - 4.0 * a * c
            if disc >= 0.0:
                s = (-b + math.sqrt(disc)) / (2.0 * a)
                if 0.0 <= s <= t_next - t_cur:
                    d = d + s * v
                    break
            if j is None:
                # Unbounded segment that never meets the radius cannot occur:
                # ||d|| grows without bound along any nonzero direction.
                raise AssertionError("unbounded projected-gradient segment")
            d = d + (t_next - t_cur) * v
        if j is None:
            break
        # Pin the coordinate exactly at its bound.
        d[j] = (box.upper[j] if direction[j] > 0 else box.lower[j]) - base[j]
        moving[j] = False
        t_cur = t_next

    # Roundoff guards: the endpoint must be feasible and inside the ball.
    d = np.clip(base + d, box.lower, box.upper) - base
    norm = float(np.linalg.norm(d))
    if norm > radius:
        d *= radius / norm
    return d


def trsbox_linear(model: LinearModel, box, Delta: float) -> np.ndarray:
    """Step minimizing the linear model over box-and-ball, by an exact path trace.

    Returns ``d`` with ``base + d`` feasible and ``||d|| <= Delta`` (up to a
    1e-12 relative roundoff allowance, which the trace enforces by scaling).
    A zero model gradient yields the zero step.
    """
    if Delta <= 0:
        raise ValueError("Delta must be positive")
    if not np.any(model.g):
        return np.zeros_like(model.g)
    return _trace_projected_path(model.base, -model.g, box, Delta)


def check_sufficient_decrease(model: LinearModel, d, pi: float, Delta: float,
                              theta: float = 0.01) -> bool:
    """Whether the step achieves the benchmark fraction of projected-gradient decrease.

    For a linear model the condition reads

        m(base) - m(base + d) >= theta * pi * min(pi, Delta, 1)

    (the Hessian term in the general denominator is zero).  This is a runtime
    diagnostic: the exact path trace satisfies it for any positive ``theta``
    small enough, and callers warn rather than abort when it fails.
    """
    v = np.asarray(d, dtype=float)
    if v.shape != model.base.shape:
        raise ValueError(f"step has shape {v.shape}, expected {model.base.shape}")
    decrease = -float(model.g @ v)
    return decrease >= theta * pi * min(pi, Delta, 1.0)


def select_target_for_altmov(sample: SampleSet) -> int:
    """Index of the non-base sample point farthest from the base (ties: largest index)."""
    dist = np.linalg.norm(sample.points[1:] - sample.base, axis=1)
    best, t = -1.0, 1
    for j, dj in enumerate(dist, start=1):
        if dj >= best:
            best, t = float(dj), j
    return t


def altmov_linear(sample: SampleSet, box, delta: float, target_index: int,
                  lagrange=None):
    """Geometry-improvement step maximizing ``|l_target|`` within ``delta`` of the base.

    The affine Lagrange polynomial of the replacement target is pushed along
    both signed projected-gradient paths (the same construction as the
    trust-region step) and the better endpoint is returned; this is exact when
    the box is inactive and a two-endpoint heuristic once it clips.  Ties go to
    the positive direction.

    Returns ``(d, flat)``; ``flat`` signals that both paths were clipped to
    zero length, so the sample cannot be improved within this radius.
    """
    if not 1 <= target_index < sample.npt:
        raise ValueError(f"target index {target_index} outside 1..{sample.npt - 1}")
    if delta <= 0:
        raise ValueError("delta must be positive")
    ell = (lagrange if lagrange is not None else lagrange_polynomials(sample))[target_index]
    w = ell.grad
    if not np.any(w):
        raise GeometryError(
            f"Lagrange polynomial of point {target_index} has zero gradient; "
            "the sample set must be rebuilt"
        )
    base = sample.base
    d_plus = _trace_projected_path(base, w, box, delta)
    d_minus = _trace_projected_path(base, -w, box, delta)
    v_plus = abs(ell.value(base + d_plus))
    v_minus = abs(ell.value(base + d_minus))
    d = d_plus if v_plus >= v_minus else d_minus
    flat = not (np.any(d_plus) or np.any(d_minus))
    return d, flat
