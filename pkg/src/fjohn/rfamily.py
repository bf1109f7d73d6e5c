"""The r-indexed band functionals, their minimization, and sweep diagnostics.

Both functionals integrate a product f_r(..) g_r(..) over a thin band around
the upper unit hemisphere; the band substitution t = (scaled height - 1)/(1-r)
turns the inner integral into a piecewise-polynomial in t whenever the
profiles are piecewise linear, so it is integrated segment-exactly and the
only quadrature error comes from the outer x grid.  The concentration
measure density and the stationarity multiplier reuse the same machinery
with the derivative profile.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .blockmat import BlockMat, EPoint, expm_sym, s_trace
from .errors import BadR, NotConverged, NotInBr, SingularA
from .isotropy import DiscreteMeasure, MinimizerResult
from .logconcave import LogConcaveFn, PiecewiseLogAffine, eval_h_many
from .profiles import PiecewiseLinear, ProfilePair


@dataclass(frozen=True)
class QuadratureSpec:
    """Outer-grid resolution for the band quadratures.

    The inner t-integrals are segment-exact for piecewise-linear profiles,
    so `tol` is governed by the x grid alone; 960 nodes per axis holds the
    default 1e-6 at n = 1 up to r = 0.99 (cost grows like 1/(1-r) beyond).
    """

    x_nodes_per_axis: int = 960
    t_nodes: int = 4
    domain_radius: float | None = None
    tol: float = 1e-6


def _check_r(r: float) -> None:
    if not 0.5 < r < 1.0:
        raise BadR(f"r={r} outside (1/2, 1)")


def sup_h_pow2(h: LogConcaveFn, s: float, probe_radius: float = 2.0) -> float:
    """Upper estimate of sup h**(2/s) over the probe ball (coarse grid maximum)."""
    n = h.n
    axes = [np.linspace(-probe_radius, probe_radius, 201 if n == 1 else 41)] * n
    X = np.stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")], axis=1)
    return float(np.max(eval_h_many(h, X) ** (2.0 / s))) * 1.0000001


def band_radius(h: LogConcaveFn, s: float, r: float) -> float:
    """Radius enclosing the set where the band factor can be nonzero."""
    return float(np.sqrt(1.0 + 2.0 * (1.0 - r) * sup_h_pow2(h, s)))


def _resolve_radius(h: LogConcaveFn, s: float, r: float, quad: QuadratureSpec) -> float:
    need = band_radius(h, s, r)
    if quad.domain_radius is None:
        return need
    if quad.domain_radius < need - 1e-12:
        raise ValueError(
            f"quadrature radius {quad.domain_radius} below the band radius {need:.6f}")
    return float(quad.domain_radius)


def _x_grid(n: int, radius: float, nodes_per_axis: int, kinks=None):
    """Composite 8-node Gauss-Legendre grid on [-radius, radius]^n.

    For n = 1 the panel edges are aligned with the supplied kink locations
    (piece switches of the max-affine exponents), which keeps the integrand
    analytic inside every panel.
    """
    per_panel = 8
    panels = max(4, int(np.ceil(nodes_per_axis / per_panel)))
    xi, wi = np.polynomial.legendre.leggauss(per_panel)
    if n == 1 and kinks is not None and len(kinks):
        inner = np.asarray(kinks, dtype=float)
        inner = inner[(inner > -radius + 1e-12) & (inner < radius - 1e-12)]
        base = np.unique(np.concatenate([[-radius, radius], inner]))
        target = 2.0 * radius / panels
        edges = [base[0]]
        for a, b in zip(base[:-1], base[1:]):
            m = max(1, int(np.ceil((b - a) / target)))
            edges.extend(np.linspace(a, b, m + 1)[1:])
        edges = np.array(edges)
    else:
        edges = np.linspace(-radius, radius, panels + 1)
    xs, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        half, mid = 0.5 * (b - a), 0.5 * (a + b)
        xs.append(mid + half * xi)
        ws.append(half * wi)
    x1 = np.concatenate(xs)
    w1 = np.concatenate(ws)
    if n == 1:
        return x1[:, None], w1
    pts = np.stack([m.ravel() for m in np.meshgrid(*([x1] * n), indexing="ij")], axis=1)
    wts = np.prod(np.stack(np.meshgrid(*([w1] * n), indexing="ij"), axis=0), axis=0).ravel()
    return pts, wts


def _envelope_breaks_1d(form: PiecewiseLogAffine, lo: float, hi: float) -> np.ndarray:
    """Kink locations of the max-affine envelope on [lo, hi] (n = 1 only)."""
    a = form.a[:, 0]
    b = form.b
    xs = np.linspace(lo, hi, 4097)
    idx = np.argmax(np.outer(xs, a) + b, axis=1)
    breaks = []
    for k in np.nonzero(np.diff(idx))[0]:
        i, j = idx[k], idx[k + 1]
        if a[i] != a[j]:
            x_cross = (b[j] - b[i]) / (a[i] - a[j])
            if lo < x_cross < hi:
                breaks.append(x_cross)
    return np.array(sorted(breaks))


def _kink_edges(h: LogConcaveFn, radius: float, maps=()) -> np.ndarray | None:
    """Panel edges from the envelope kinks of psi, pulled back through x -> u*x + c maps.

    `maps` lists (u, c) pairs such that psi is evaluated at u*x + c; the kink
    pre-images are x = (break - c)/u.  The identity map is always included.
    """
    if h.n != 1 or not isinstance(h.form, PiecewiseLogAffine):
        return None
    edges = []
    all_maps = [(1.0, 0.0), *maps]
    span = max(abs(u) * radius + abs(c) for u, c in all_maps) + 1.0
    breaks = _envelope_breaks_1d(h.form, -span, span)
    for u, c in all_maps:
        if u != 0.0:
            edges.extend((breaks - c) / u)
    return np.array(edges) if edges else None


def _require_pl(pair: ProfilePair) -> tuple[PiecewiseLinear, PiecewiseLinear]:
    if not pair.piecewise_linear:
        raise ValueError("band quadrature needs piecewise-linear profile functions")
    return pair.f, pair.g


def _inner_band(f_pl: PiecewiseLinear, g_pl: PiecewiseLinear, r: float,
                c2: np.ndarray, den: np.ndarray, r2m1: np.ndarray,
                mode: str, gl_nodes: int) -> np.ndarray:
    """Per-node t-integrals over the band.

    mode 'value':   integral of f(t) g(q(t)) dt
    mode 'density': integral of f'(t) (1 + (1-r)t) g(q(t)) dt
    with q(t) = (r2m1 + c2 (1+(1-r)t)^2)/den, increasing in t >= -1.  Between
    the kinks of f and the pullbacks of the kinks of g the integrand is a
    polynomial of degree <= 3, so the per-segment Gauss rule is exact.
    """
    omr = 1.0 - r
    g_breaks = g_pl.breaks
    with np.errstate(divide="ignore", invalid="ignore"):
        tau2 = (den[:, None] * g_breaks[None, :] - r2m1[:, None]) / c2[:, None]
    tau = np.sqrt(np.clip(tau2, 0.0, None))
    t_roots = (tau - 1.0) / omr
    t_top = t_roots[:, -1]

    cols = [np.full(len(c2), -1.0)]
    cols.extend(np.full(len(c2), fb) for fb in f_pl.breaks if fb > -1.0)
    cols.extend(t_roots[:, k] for k in range(len(g_breaks)))
    B = np.stack(cols, axis=1)
    B = np.clip(B, -1.0, np.maximum(t_top, -1.0)[:, None])
    B.sort(axis=1)

    nodes, wts = np.polynomial.legendre.leggauss(max(gl_nodes, 3))
    qlo, qhi = g_breaks[0] - 1.0, g_breaks[-1] + 1.0
    total = np.zeros(len(c2))
    for j in range(B.shape[1] - 1):
        a, b = B[:, j], B[:, j + 1]
        half, mid = 0.5 * (b - a), 0.5 * (a + b)
        seg = np.zeros(len(c2))
        for xi, wi in zip(nodes, wts):
            t = mid + half * xi
            tau_t = 1.0 + omr * t
            num = r2m1 + c2 * tau_t**2
            with np.errstate(divide="ignore", invalid="ignore"):
                q = num / den
            q = np.where(den > 0.0, q, np.where(num > 0.0, np.inf, -np.inf))
            q = np.clip(q, qlo, qhi)
            if mode == "value":
                vals = f_pl(t) * g_pl(q)
            else:
                vals = f_pl.deriv(t) * tau_t * g_pl(q)
            seg += wi * vals
        total += half * seg
    return total


def _h_pow(h: LogConcaveFn, X: np.ndarray, s: float) -> np.ndarray:
    return eval_h_many(h, X) ** (1.0 / s)


def band_functional(h: LogConcaveFn, s: float, pair: ProfilePair, r: float,
                    p: EPoint, quad: QuadratureSpec) -> float:
    """Band functional at (A, alpha, v): SPD block, positive corner required.

    Returns +inf when the position pushes part of the band outside the
    support of h (the coercive barrier).
    """
    _check_r(r)
    f_pl, g_pl = _require_pl(pair)
    A, alpha, v = p.mat.diag, p.mat.corner, p.shift
    if alpha <= 0.0 or np.linalg.det(A) == 0.0:
        raise SingularA("block must be invertible with positive corner")
    radius = _resolve_radius(h, s, r, quad)
    maps = [(float(A[0, 0]), float(v[0]))] if h.n == 1 else []
    X, W = _x_grid(h.n, radius, quad.x_nodes_per_axis, kinks=_kink_edges(h, radius, maps))

    h_x2s = eval_h_many(h, X) ** (2.0 / s)
    h_Axv = _h_pow(h, X @ A.T + v, s)
    den = 2.0 * h_x2s * (1.0 - r)
    r2m1 = np.sum(X * X, axis=1) - 1.0
    band_open = r2m1 < den * g_pl.breaks[-1]  # q(-1) can be below the top kink
    c = h_Axv / alpha
    dead = (c == 0.0) & band_open
    if np.any(dead):
        return float("inf")
    c2 = np.where(c > 0.0, c, 1.0) ** 2
    inner = _inner_band(f_pl, g_pl, r, c2, den, r2m1, "value", quad.t_nodes)
    inner = np.where(c > 0.0, inner, 0.0)
    return float(np.sum(W * c * inner))


def _rescaled_position(p: EPoint, r: float) -> tuple[np.ndarray, float, np.ndarray]:
    """(A, alpha, shift) for the rescaled point (M, beta, w)."""
    n = p.n
    A = np.eye(n) + (1.0 - r) * p.mat.diag
    alpha = 1.0 + (1.0 - r) * p.mat.corner
    if abs(np.linalg.det(A)) < 1e-14 or alpha <= 0.0:
        raise NotInBr("identity plus (1-r) M is not invertible (or corner <= 0)")
    return A, alpha, (1.0 - r) * p.shift


def rescaled_band_functional(h: LogConcaveFn, s: float, pair: ProfilePair, r: float,
                             p: EPoint, quad: QuadratureSpec) -> float:
    """Band functional in rescaled coordinates (M, beta, w).

    Integrates over the unshifted x variable with the inverse-mapped band
    factor, a different route than band_functional, so the exact
    reparametrization identity between the two is a genuine two-route check.
    """
    _check_r(r)
    f_pl, g_pl = _require_pl(pair)
    A, alpha, shift = _rescaled_position(p, r)
    R_ball = _resolve_radius(h, s, r, quad)
    radius = float(np.linalg.norm(A, 2) * R_ball + np.linalg.norm(shift)) + 1e-9
    maps = [(1.0 / float(A[0, 0]), -float(shift[0]) / float(A[0, 0]))] if h.n == 1 else []
    X, W = _x_grid(h.n, radius, quad.x_nodes_per_axis, kinks=_kink_edges(h, radius, maps))

    Z = np.linalg.solve(A, (X - shift).T).T
    h_z2s = eval_h_many(h, Z) ** (2.0 / s)
    h_x = _h_pow(h, X, s)
    den = 2.0 * h_z2s * (1.0 - r)
    r2m1 = np.sum(Z * Z, axis=1) - 1.0
    band_open = r2m1 < den * g_pl.breaks[-1]
    dead = (h_x == 0.0) & band_open
    if np.any(dead):
        return float("inf")
    c2 = np.where(h_x > 0.0, h_x / alpha, 1.0) ** 2
    inner = _inner_band(f_pl, g_pl, r, c2, den, r2m1, "value", quad.t_nodes)
    inner = np.where(h_x > 0.0, inner, 0.0)
    return float(alpha ** (s - 1.0) * np.sum(W * h_x * inner))


def _density_terms(h: LogConcaveFn, s: float, pair: ProfilePair, r: float,
                   minimizer: EPoint, quad: QuadratureSpec):
    """Grid, weights and concentration-measure density at the given position."""
    _check_r(r)
    f_pl, g_pl = _require_pl(pair)
    A, alpha, v = minimizer.mat.diag, minimizer.mat.corner, minimizer.shift
    if alpha <= 0.0:
        raise SingularA("corner must be positive")
    R_ball = _resolve_radius(h, s, r, quad)
    radius = float(np.linalg.norm(A, 2) * R_ball + np.linalg.norm(v)) + 1e-9
    maps = [(1.0 / float(A[0, 0]), -float(v[0]) / float(A[0, 0]))] if h.n == 1 else []
    X, W = _x_grid(h.n, radius, quad.x_nodes_per_axis, kinks=_kink_edges(h, radius, maps))

    Z = np.linalg.solve(A, (X - v).T).T
    h_z2s = eval_h_many(h, Z) ** (2.0 / s)
    h_x = _h_pow(h, X, s)
    den = 2.0 * h_z2s * (1.0 - r)
    r2m1 = np.sum(Z * Z, axis=1) - 1.0
    c2 = np.where(h_x > 0.0, h_x / alpha, 1.0) ** 2
    inner = _inner_band(f_pl, g_pl, r, c2, den, r2m1, "density", quad.t_nodes)
    inner = np.where(h_x > 0.0, inner, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        density = alpha ** (s - 1.0) * inner / h_x
    density = np.where(inner != 0.0, density, 0.0)
    return X, W, density, h_x


def concentration_integral(h: LogConcaveFn, s: float, pair: ProfilePair, r: float,
                           minimizer: EPoint, delta, quad: QuadratureSpec) -> float:
    """Integral of a compactly supported test function against the band measure."""
    X, W, density, _ = _density_terms(h, s, pair, r, minimizer, quad)
    return float(np.sum(W * np.asarray(delta(X), dtype=float) * density))


def stationarity_multiplier(h: LogConcaveFn, s: float, pair: ProfilePair, r: float,
                            minimizer: EPoint, quad: QuadratureSpec) -> float:
    """Multiplier from the identity-direction contraction of the measure moments."""
    X, W, density, h_x = _density_terms(h, s, pair, r, minimizer, quad)
    n = h.n
    if isinstance(h.form, PiecewiseLogAffine):
        idx = np.argmax(X @ h.form.a.T + h.form.b, axis=1)
        grad_psi = h.form.a[idx]
    else:
        raise ValueError("multiplier needs the max-affine form")
    contraction = h_x**2 * ((1.0 / s) * np.sum(grad_psi * X, axis=1) + s)
    return float(np.sum(W * density * contraction) / ((1.0 - r) * (n + s * s)))


def _logm_sym(A: np.ndarray) -> np.ndarray:
    lam, V = np.linalg.eigh(0.5 * (A + A.T))
    if np.any(lam <= 0.0):
        raise SingularA("matrix log of a non-SPD block")
    L = (V * np.log(lam)) @ V.T
    return 0.5 * (L + L.T)


def _sym_from_vec(theta: np.ndarray, n: int) -> np.ndarray:
    S = np.zeros((n, n))
    k = 0
    for i in range(n):
        for j in range(i, n):
            S[i, j] = S[j, i] = theta[k]
            k += 1
    return S


def _vec_from_sym(S: np.ndarray, n: int) -> np.ndarray:
    return np.array([S[i, j] for i in range(n) for j in range(i, n)])


def minimize_band(h: LogConcaveFn, s: float, pair: ProfilePair, r: float,
                  quad: QuadratureSpec, x0: EPoint | None = None,
                  max_iter: int = 400) -> tuple[EPoint, float]:
    """Minimize the band functional over unit-weighted-determinant positions.

    The block is parametrized as exp(S) with corner exp(-tr S / s), which
    keeps the weighted determinant at exactly 1 (restricting to that manifold
    loses nothing at a minimum).  Derivative-free compass search with a
    shrinking step, then a short finite-difference gradient polish.  Returns
    the minimizer and the stationarity multiplier.
    """
    _check_r(r)
    n = h.n
    dim_s = n * (n + 1) // 2

    def to_point(theta: np.ndarray) -> EPoint:
        S = _sym_from_vec(theta[:dim_s], n)
        A = expm_sym(S)
        alpha = float(np.exp(-np.trace(S) / s))
        return EPoint(BlockMat(A, alpha), theta[dim_s:])

    def obj(theta: np.ndarray) -> float:
        return band_functional(h, s, pair, r, to_point(theta), quad)

    if x0 is not None:
        theta = np.concatenate([_vec_from_sym(_logm_sym(x0.mat.diag), n), x0.shift])
    else:
        theta = np.zeros(dim_s + n)
    value = obj(theta)
    if not np.isfinite(value):
        raise NotConverged("band functional infinite at the starting point")

    step = 0.25 * (1.0 - r)
    step_min = 1e-7 * (1.0 - r)
    evals = 0
    while step > step_min and evals < 60 * max_iter:
        improved = False
        for k in range(len(theta)):
            for sgn in (1.0, -1.0):
                cand = theta.copy()
                cand[k] += sgn * step
                val = obj(cand)
                evals += 1
                if val < value - 1e-15:
                    theta, value = cand, val
                    improved = True
                    break
            if improved:
                break
        if not improved:
            step *= 0.5

    # finite-difference gradient polish
    fd = 1e-7
    for _ in range(20):
        g = np.zeros_like(theta)
        for k in range(len(theta)):
            e = np.zeros_like(theta)
            e[k] = fd
            g[k] = (obj(theta + e) - obj(theta - e)) / (2.0 * fd)
        gn = float(np.linalg.norm(g))
        if gn == 0.0:
            break
        stepg, moved = (1.0 - r) * 0.01 / max(gn, 1e-30), False
        for _ in range(20):
            cand = theta - stepg * g
            val = obj(cand)
            if val < value - 1e-15:
                theta, value, moved = cand, val, True
                break
            stepg *= 0.5
        if not moved:
            break

    point = to_point(theta)
    lam_r = stationarity_multiplier(h, s, pair, r, point, quad)
    return point, lam_r


def hat_bump(center, halfwidth: float):
    """Radial hat: 1 at the center, linear to 0 at distance halfwidth."""
    center = np.atleast_1d(np.asarray(center, dtype=float))

    def delta(X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        d = np.linalg.norm(X - center, axis=1)
        return np.clip(1.0 - d / halfwidth, 0.0, None)

    return delta


def trapezoid_bump(center, flat: float, taper: float):
    """1 within `flat` of the center, linear to 0 over the extra `taper` width.

    The flat part must cover the concentration band around an atom for its
    integral to approximate the atom mass.
    """
    center = np.atleast_1d(np.asarray(center, dtype=float))

    def delta(X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        d = np.linalg.norm(X - center, axis=1)
        return np.clip((flat + taper - d) / taper, 0.0, 1.0)

    return delta


def plateau_bump(radius: float, taper: float):
    """1 on the ball of the given radius, linear to 0 over the taper width."""

    def delta(X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        d = np.linalg.norm(X, axis=1)
        return np.clip((radius + taper - d) / taper, 0.0, 1.0)

    return delta


@dataclass
class SweepEntry:
    r: float
    point: EPoint
    rescaled: EPoint
    lambda_r: float
    value: float
    dist_to_identity: float
    normalized_s_trace: float
    secant_to_reference: float
    mu_integrals: np.ndarray
    mu_reference: np.ndarray


@dataclass
class RSweepResult:
    schedule: list
    entries: list = field(default_factory=list)

    def series(self, name: str) -> np.ndarray:
        return np.array([getattr(e, name) for e in self.entries])


def default_bumps(reference_measure: DiscreteMeasure):
    """One trapezoid per atom plus a plateau covering the whole contact set."""
    pts = reference_measure.points
    k = pts.shape[0]
    if k > 1:
        gaps = [np.linalg.norm(pts[i] - pts[j]) for i in range(k) for j in range(i + 1, k)]
        gap = min(gaps)
    else:
        gap = 0.5
    bumps = [trapezoid_bump(pts[i], 0.45 * gap, 0.2 * gap) for i in range(k)]
    radius = float(np.max(np.linalg.norm(pts, axis=1)))
    bumps.append(plateau_bump(radius + 0.05, 0.2))
    return bumps


def r_sweep(h: LogConcaveFn, s: float, pair: ProfilePair, schedule,
            quad: QuadratureSpec, reference: MinimizerResult,
            reference_measure: DiscreteMeasure, bumps=None) -> RSweepResult:
    """Minimize the band functional along the schedule and collect diagnostics.

    The concentration-measure integrals are normalized by (1-r) * lambda_r
    and scaled by the reference multiplier, which makes them comparable with
    the reference measure: at the exact minimizer both normalized measures
    satisfy the same identity-direction moment identity.  Failures at a
    single r are recorded and the sweep continues.
    """
    if bumps is None:
        bumps = default_bumps(reference_measure)
    ref_integrals = np.array([
        float(np.dot(reference_measure.masses, b(reference_measure.points)))
        for b in bumps
    ])
    n = h.n
    result = RSweepResult(schedule=list(schedule))
    prev = None
    for r in schedule:
        try:
            if prev is not None:
                r_prev, p_prev = prev
                scale = (1.0 - r) / (1.0 - r_prev)
                A0 = np.eye(n) + scale * (p_prev.mat.diag - np.eye(n))
                x0 = EPoint(BlockMat(A0, 1.0 + scale * (p_prev.mat.corner - 1.0)),
                            scale * p_prev.shift)
            else:
                x0 = None
            point, lam_r = minimize_band(h, s, pair, r, quad, x0=x0)
        except (NotConverged, NotInBr, SingularA) as exc:
            result.entries.append(SweepEntry(
                r=r, point=None, rescaled=None, lambda_r=float("nan"),
                value=float("nan"), dist_to_identity=float("nan"),
                normalized_s_trace=float("nan"), secant_to_reference=float("nan"),
                mu_integrals=np.full(len(bumps), np.nan),
                mu_reference=ref_integrals))
            continue
        prev = (r, point)
        omr = 1.0 - r
        ident = EPoint(BlockMat.identity(n, 1.0), np.zeros(n))
        diff = point - ident
        rescaled = diff * (1.0 / omr)
        dist = diff.norm()
        nst = abs(s_trace(rescaled.mat, s)) / max(rescaled.mat.frobenius_norm(), 1e-300)
        secant = (rescaled - reference.point).norm()
        mu_vals = np.array([
            concentration_integral(h, s, pair, r, point, b, quad) for b in bumps
        ])
        mu_norm = reference.lam * mu_vals / (omr * lam_r)
        result.entries.append(SweepEntry(
            r=r, point=point, rescaled=rescaled, lambda_r=lam_r,
            value=band_functional(h, s, pair, r, point, quad),
            dist_to_identity=dist, normalized_s_trace=nst,
            secant_to_reference=secant, mu_integrals=mu_norm,
            mu_reference=ref_integrals))
    return result
