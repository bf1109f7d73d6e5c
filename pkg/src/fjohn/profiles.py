"""Profile functions f, g, their scaled family, and the convolution profile F.

f is zero left of -1, convex and strictly increasing afterwards; g is one
left of -1, nonincreasing, positive on (-1, 1) and zero from 1 on.  The
shipped canonical pair is piecewise linear, which makes the convolution
F(x) = integral f(t) g(t - x) dt piecewise polynomial and lets the band
quadratures integrate it segment-exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import BadR


@dataclass(frozen=True)
class PiecewiseLinear:
    """Continuous piecewise-linear function on R.

    `breaks` are the k sorted kink locations; `slopes` and `intercepts` give
    the k+1 affine pieces on (-inf, b_1], [b_1, b_2], ..., [b_k, inf).
    Evaluation at a kink uses the right-hand piece (the sides agree for the
    value; the derivative is one-sided).
    """

    breaks: np.ndarray
    slopes: np.ndarray
    intercepts: np.ndarray

    def __post_init__(self):
        br = np.atleast_1d(np.asarray(self.breaks, dtype=float))
        sl = np.atleast_1d(np.asarray(self.slopes, dtype=float))
        ic = np.atleast_1d(np.asarray(self.intercepts, dtype=float))
        if len(sl) != len(br) + 1 or len(ic) != len(br) + 1:
            raise ValueError("need one more piece than breaks")
        if np.any(np.diff(br) <= 0):
            raise ValueError("breaks must be strictly increasing")
        for i, b in enumerate(br):
            left = sl[i] * b + ic[i]
            right = sl[i + 1] * b + ic[i + 1]
            if abs(left - right) > 1e-12 * (1.0 + abs(left)):
                raise ValueError(f"discontinuity at break {b}: {left} vs {right}")
        for arr, name in ((br, "breaks"), (sl, "slopes"), (ic, "intercepts")):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self.breaks, x, side="right")
        return self.slopes[idx] * x + self.intercepts[idx]

    def deriv(self, x):
        """Right-hand derivative."""
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self.breaks, x, side="right")
        return self.slopes[idx] + np.zeros_like(x)

    @staticmethod
    def from_knots(xs, ys, left_slope: float = 0.0, right_slope: float = 0.0) -> "PiecewiseLinear":
        """Interpolate the knot list, extending with the given outer slopes."""
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        slopes = [left_slope]
        intercepts = [ys[0] - left_slope * xs[0]]
        for i in range(len(xs) - 1):
            m = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i])
            slopes.append(m)
            intercepts.append(ys[i] - m * xs[i])
        slopes.append(right_slope)
        intercepts.append(ys[-1] - right_slope * xs[-1])
        return PiecewiseLinear(xs, np.array(slopes), np.array(intercepts))


@dataclass(frozen=True)
class ProfilePair:
    """Profile functions with derivative oracles.

    f and g are callables; when they are PiecewiseLinear the band quadratures
    can segment exactly and a convolution profile is available in closed or
    segment-exact form.
    """

    f: Callable
    g: Callable
    name: str = "custom"

    @property
    def piecewise_linear(self) -> bool:
        return isinstance(self.f, PiecewiseLinear) and isinstance(self.g, PiecewiseLinear)


def canonical_pair() -> ProfilePair:
    """f: 0 then x+1 from -1; g: 1, then (1-x)/2 on (-1,1), then 0."""
    f = PiecewiseLinear(np.array([-1.0]), np.array([0.0, 1.0]), np.array([0.0, 1.0]))
    g = PiecewiseLinear(np.array([-1.0, 1.0]), np.array([0.0, -0.5, 0.0]),
                        np.array([1.0, 0.5, 0.0]))
    return ProfilePair(f=f, g=g, name="canonical")


def r_scale(gamma: Callable, r: float, t) -> float:
    """gamma((t - 1)/(1 - r)) for r in (1/2, 1)."""
    if not 0.5 < r < 1.0:
        raise BadR(f"r={r} outside (1/2, 1)")
    return gamma((np.asarray(t, dtype=float) - 1.0) / (1.0 - r))


@dataclass
class PropertyCheck:
    name: str
    ok: bool
    counterexample: tuple | None = None


@dataclass
class ProfileReport:
    checks: list[PropertyCheck] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    def failed(self) -> list[str]:
        return [c.name for c in self.checks if not c.ok]


def _first_violation(xs, mask):
    idx = np.nonzero(mask)[0]
    return None if len(idx) == 0 else (float(xs[idx[0]]),)


def validate_profiles(pair: ProfilePair, samples: int = 601) -> ProfileReport:
    """Check the nine profile properties on a deterministic grid over [-3, 3]."""
    xs = np.linspace(-3.0, 3.0, samples)
    fv = np.asarray(pair.f(xs), dtype=float)
    gv = np.asarray(pair.g(xs), dtype=float)
    rep = ProfileReport()

    def add(name, mask_bad, grid=xs):
        rep.checks.append(PropertyCheck(name, not np.any(mask_bad),
                                        _first_violation(grid, mask_bad)))

    # f1/g1: finite values and bounded difference quotients on the grid
    dq_f = np.abs(np.diff(fv) / np.diff(xs))
    dq_g = np.abs(np.diff(gv) / np.diff(xs))
    add("f1_lipschitz", ~np.isfinite(fv) | np.concatenate([[False], ~np.isfinite(dq_f)]))
    add("g1_lipschitz", ~np.isfinite(gv) | np.concatenate([[False], ~np.isfinite(dq_g)]))
    # f2: midpoint convexity via second differences on the uniform grid
    add("f2_convex", np.concatenate([[False], fv[2:] - 2 * fv[1:-1] + fv[:-2] < -1e-12, [False]]))
    add("f3_zero_left", (xs <= -1.0) & (np.abs(fv) > 1e-12))
    on = xs >= -1.0
    incr_bad = np.zeros_like(xs, dtype=bool)
    idx = np.nonzero(on)[0]
    incr_bad[idx[1:]] = np.diff(fv[on]) <= 0.0
    add("f4_strictly_increasing", incr_bad)
    add("g2_nonincreasing", np.concatenate([[False], np.diff(gv) > 1e-12]))
    add("g3_one_left", (xs <= -1.0) & (np.abs(gv - 1.0) > 1e-12))
    add("g4_positive_inside", (xs > -1.0) & (xs < 1.0) & (gv <= 0.0))
    add("g5_zero_right", (xs >= 1.0) & (np.abs(gv) > 1e-12))
    return rep


def _convolve_pl(f: PiecewiseLinear, g: PiecewiseLinear, x: float, order: int = 0) -> float:
    """Exact integral of f(t) g(t - x) dt (order 0) or f(t) (-g')(t - x) dt (order 1).

    The integrand is supported on t in [-1, x + 1] and is piecewise polynomial
    between the kinks of f and the shifted kinks of g; fixed-order
    Gauss-Legendre per segment is exact.
    """
    lo, hi = -1.0, x + 1.0
    if hi <= lo:
        return 0.0
    cuts = np.concatenate([[lo, hi], f.breaks, g.breaks + x])
    cuts = np.unique(np.clip(cuts, lo, hi))
    nodes, wts = np.polynomial.legendre.leggauss(4)
    total = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b - a < 1e-15:
            continue
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        t = mid + half * nodes
        if order == 0:
            vals = f(t) * g(t - x)
        else:
            vals = f(t) * (-g.deriv(t - x))
        total += half * float(np.dot(wts, vals))
    return total


class ConvolutionProfile:
    """F = f * g(-.) with value and derivative; nondecreasing and convex.

    The canonical pair uses the closed-form branches; piecewise-linear pairs
    use segment-exact convolution.
    """

    def __init__(self, pair: ProfilePair):
        self.pair = pair
        self._closed = pair.name == "canonical"
        if not self._closed and not pair.piecewise_linear:
            raise ValueError("convolution profile needs a canonical or piecewise-linear pair")

    def __call__(self, x):
        if self._closed:
            x = np.asarray(x, dtype=float)
            return np.where(
                x <= -2.0, 0.0,
                np.where(x <= 0.0, (x + 2.0) ** 3 / 12.0, x * x / 2.0 + x + 2.0 / 3.0),
            )
        if np.ndim(x) == 0:
            return _convolve_pl(self.pair.f, self.pair.g, float(x))
        return np.array([_convolve_pl(self.pair.f, self.pair.g, float(t)) for t in np.asarray(x)])

    def deriv(self, x):
        if self._closed:
            x = np.asarray(x, dtype=float)
            return np.where(x <= -2.0, 0.0, np.where(x <= 0.0, (x + 2.0) ** 2 / 4.0, x + 1.0))
        if np.ndim(x) == 0:
            return _convolve_pl(self.pair.f, self.pair.g, float(x), order=1)
        return np.array([_convolve_pl(self.pair.f, self.pair.g, float(t), order=1)
                         for t in np.asarray(x)])


def F_eval(pair: ProfilePair, x) -> float:
    return ConvolutionProfile(pair)(x)


def F_prime(pair: ProfilePair, x) -> float:
    return ConvolutionProfile(pair).deriv(x)
