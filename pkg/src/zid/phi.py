"""Multiplicative self-convolutions of the fractional part.

phi_1(x) = {x}, and for n >= 2

    phi_n(x) = integral over (0, inf) of {u} phi_{n-1}(x/u) du/u.

For small x the functions behave like x log^(n-1)(1/x)/(n-1)!, for large x
they grow like log^(n-1)(x+1).  A built evaluator caches values on a grid
that is log-spaced below 1 and anchored at every integer above 1, because
phi_n has derivative corners exactly at the integers (the slope of phi_2
jumps by d(m)/m at x = m, d = number of divisors); interpolating across
those corners would be hopeless on any smooth grid.

Grid values come from the exact three-piece split of the defining integral.
With J = int_1^inf phi_{n-1}(v) v^-2 dv and R(x) = int_x^inf phi_{n-1}(v)
v^-2 dv, the changes of variable v = x/u turn the pieces into

    0 < x < 1:  phi_n(x) = x*J + x*int_x^1 phi_{n-1}(v) v^-2 dv + I3(x),
    x >= 1:     phi_n(x) = x*R(x) + M(x) + U(x),

where I3/U integrate {u} phi_{n-1}(x/u)/u over (1, inf) resp. (x, inf) and
M over (1, x).  For n = 2 the inner argument is below 1 on I3 and U, where
phi_1(y) = y exactly, so I3(x) = x*J and U(x) = x*R(x) with no quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .special_functions import AccuracyError, AccuracySpec, frac
from . import quadrature as quad

__all__ = ["PhiEvaluator", "build", "phi_leading", "phi_growth_ratio", "phi_table_rows"]

DEFAULT_X_MIN = 1e-6
DEFAULT_X_MAX = 1000
_POINTS_PER_DECADE = 32
_CHILD_MARGIN = 64

# Chebyshev-Lobatto nodes of degree 7 on [0, 1] and barycentric weights
_SEG_NODES = 8
_SEG_OFFS = 0.5 * (1.0 - np.cos(np.pi * np.arange(_SEG_NODES) / (_SEG_NODES - 1.0)))
_SEG_W = np.array([0.5, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -0.5])

_BUILD_ACC = AccuracySpec(abs_tol=1e-12, rel_tol=3e-9, max_evals=10_000_000)


def _leading_term(n: int, x):
    """x log^(n-1)(1/x)/(n-1)!, the small-x main term (equals x when n = 1)."""
    xa = np.asarray(x, dtype=float)
    out = xa * np.log(1.0 / xa) ** (n - 1) / math.factorial(n - 1)
    return out


def phi_leading(n: int, x):
    """Small-x leading term of phi_n for n >= 2 and 0 < x < 1."""
    if n < 2:
        raise ValueError("phi_leading requires n >= 2")
    xa = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(xa)) or np.any(xa <= 0.0) or np.any(xa >= 1.0):
        raise ValueError("phi_leading requires 0 < x < 1")
    out = _leading_term(n, xa)
    return float(out) if np.ndim(x) == 0 else out


@dataclass
class PhiEvaluator:
    """Cached evaluator for one convolution order.

    Immutable after construction and safe for concurrent reads.  Order 1
    bypasses every cache and returns the fractional part exactly.
    """

    order: int
    x_min: float
    x_max: int
    acc: AccuracySpec
    child: "PhiEvaluator | None" = None
    interp: str = "none"
    grid: np.ndarray = field(default_factory=lambda: np.empty(0))
    cached_values: np.ndarray = field(default_factory=lambda: np.empty(0))
    # log-grid below 1: knots in t = log x, values phi/x
    _lt: np.ndarray | None = None
    _lv: np.ndarray | None = None
    # unit segments above 1: values at Lobatto nodes, shape (x_max-1, 6)
    _seg_vals: np.ndarray | None = None
    _j_const: float = 0.0
    _r_top: float = 0.0

    # -- evaluation ---------------------------------------------------------

    def phi(self, x):
        """phi_n at x > 0 (scalar or ndarray).

        Grid interpolation on [x_min, x_max]; the small-x leading term below
        x_min; fresh quadrature (no cache) above x_max.
        """
        xa = np.asarray(x, dtype=float)
        scalar = xa.ndim == 0
        xa = np.atleast_1d(xa)
        if not np.all(np.isfinite(xa)) or np.any(xa <= 0.0):
            raise ValueError("phi requires x > 0")
        if self.order == 1:
            out = frac(xa)
            return float(out[0]) if scalar else out

        out = np.empty_like(xa)
        below = xa < self.x_min
        low = (~below) & (xa < 1.0)
        mid = (xa >= 1.0) & (xa <= self.x_max)
        above = xa > float(self.x_max)
        if np.any(below):
            out[below] = _leading_term(self.order, xa[below])
        if np.any(low):
            out[low] = xa[low] * self._interp_low(np.log(xa[low]))
        if np.any(mid):
            out[mid] = self._interp_seg(xa[mid])
        if np.any(above):
            out[above] = [self._direct(v) for v in xa[above]]
        return float(out[0]) if scalar else out

    __call__ = phi

    def _interp_low(self, t: np.ndarray) -> np.ndarray:
        # local cubic Lagrange on the 4 knots around each query, in
        # (log x, phi/x) coordinates; the log grid is uniform, so the four
        # basis cubics depend only on the in-cell fraction
        lt, lv = self._lt, self._lv
        dt = lt[1] - lt[0]
        pos = (t - lt[0]) / dt
        idx = np.clip(pos.astype(int), 1, len(lt) - 3)
        th = pos - idx
        w0 = -th * (th - 1.0) * (th - 2.0) / 6.0
        w1 = (th * th - 1.0) * (th - 2.0) / 2.0
        w2 = -th * (th + 1.0) * (th - 2.0) / 2.0
        w3 = th * (th * th - 1.0) / 6.0
        return w0 * lv[idx - 1] + w1 * lv[idx] + w2 * lv[idx + 1] + w3 * lv[idx + 2]

    def _interp_seg(self, x: np.ndarray) -> np.ndarray:
        seg = np.clip(np.floor(x).astype(int), 1, self.x_max - 1)
        xi = x - seg
        vals = self._seg_vals[seg - 1]  # (q, 6)
        d = xi[:, None] - _SEG_OFFS[None, :]
        exact = np.abs(d) < 1e-14
        d = np.where(exact, 1.0, d)
        wd = _SEG_W[None, :] / d
        out = (wd * vals).sum(axis=1) / wd.sum(axis=1)
        hit = exact.any(axis=1)
        if np.any(hit):
            out[hit] = vals[hit][exact[hit]]
        return out

    def _child_over_v2(self, v: np.ndarray) -> np.ndarray:
        return self.child.phi(v) / (v * v)

    def _direct(self, x: float) -> float:
        """Three-piece quadrature at a single point, no cache.

        Runs at tighter tolerances than the grid build: direct values feed
        other adaptive integrators, which would otherwise chase the
        evaluation noise of their own integrand.
        """
        pa = AccuracySpec(abs_tol=1e-13, rel_tol=1e-11, max_evals=self.acc.max_evals // 8)
        tail_pa = AccuracySpec(abs_tol=1e-16, rel_tol=3e-9, max_evals=self.acc.max_evals // 8)
        if x < 1.0:
            c = quad.integrate_finite(self._child_over_v2, x, 1.0, (), pa)
            return x * (self._j_const + c.value) + self._i3_point(x, tail_pa)
        r_val = self._r_top
        if x != self.x_max:
            lo, hi = sorted((float(self.x_max), x))
            bps = [float(m) for m in range(int(math.floor(lo)) + 1, int(math.ceil(hi)))]
            seg = quad.integrate_finite(self._child_over_v2, lo, hi, bps, pa)
            r_val += -seg.value if x > self.x_max else seg.value
        return x * r_val + self._m_point(x, pa) + self._u_point(x, r_val, tail_pa)

    def _point_acc(self) -> AccuracySpec:
        return AccuracySpec(
            abs_tol=self.acc.abs_tol, rel_tol=self.acc.rel_tol, max_evals=self.acc.max_evals // 8
        )

    def _m_point(self, x: float, acc: AccuracySpec | None = None) -> float:
        if x <= 1.0:
            return 0.0
        child_phi = self.child.phi
        f = lambda u: (u - np.floor(u)) * child_phi(x / u) / u
        bps = {float(m) for m in range(2, int(math.ceil(x)))}
        if self.order == 2:
            bps |= {x / k for k in range(1, int(x) + 1)}
        bps = sorted(b for b in bps if 1.0 < b < x)
        if len(bps) > 10_000:
            bps = bps[-10_000:]
        return quad.integrate_finite(f, 1.0, x, bps, acc or self._point_acc()).value

    # Upper pieces converge through tail acceleration whose plateau sits
    # near 1e-9 relative; asking for more would spin without converging.
    _TAIL_PIECE_ACC = AccuracySpec(abs_tol=1e-16, rel_tol=3e-8, max_evals=1_000_000)

    def _u_point(self, x: float, r_val: float, acc: AccuracySpec | None = None) -> float:
        if self.order == 2:
            return x * r_val
        child_phi = self.child.phi
        f = lambda u: (u - np.floor(u)) * child_phi(x / u) / u
        bps = [float(m) for m in range(int(math.ceil(x)), int(math.ceil(x)) + 16) if m > x]
        res = quad.integrate_semi_infinite(f, x, bps, acc or self._TAIL_PIECE_ACC)
        return res.value

    def _i3_point(self, x: float, acc: AccuracySpec | None = None) -> float:
        if self.order == 2:
            return x * self._j_const
        child_phi = self.child.phi
        f = lambda u: (u - np.floor(u)) * child_phi(x / u) / u
        res = quad.integrate_semi_infinite(
            f, 1.0, [float(m) for m in range(2, 17)], acc or self._TAIL_PIECE_ACC
        )
        return res.value

    def growth_ratio(self, x) -> float:
        return phi_growth_ratio(self, x)


def phi_growth_ratio(ev: PhiEvaluator, x):
    """phi_n(x) / log^(n-1)(x+1) for x >= 1; bounded for every fixed n >= 2."""
    if ev.order < 2:
        raise ValueError("growth ratio requires an evaluator of order >= 2")
    xa = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(xa)) or np.any(xa < 1.0):
        raise ValueError("growth ratio requires x >= 1")
    out = ev.phi(xa) / np.log(xa + 1.0) ** (ev.order - 1)
    return float(out) if np.ndim(x) == 0 else out


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------


def build(
    n: int,
    acc: AccuracySpec | None = None,
    x_min: float = DEFAULT_X_MIN,
    x_max: int = DEFAULT_X_MAX,
) -> PhiEvaluator:
    """Build the evaluator chain for orders 1..n.

    Each level is fully built before the next; level m reads only level m-1.
    The child grid extends `_CHILD_MARGIN` units past x_max so that direct
    evaluation just beyond the parent grid stays cheap.

    Raises AccuracyError if any cached value fails to converge.
    """
    if n < 1 or n != int(n):
        raise ValueError("order must be an integer >= 1")
    acc = acc or _BUILD_ACC
    if not (0.0 < x_min < 1.0):
        raise ValueError("x_min must lie in (0, 1)")
    x_max = int(x_max)
    if x_max < 1:
        raise ValueError("x_max must be an integer >= 1")
    if n >= 3 and x_max < 33:
        # orders past 2 close their grid-tail constants by model fit over
        # the trailing chain integrals, which needs a few dozen units
        raise ValueError("x_max must be >= 33 for order >= 3")

    if n == 1:
        return PhiEvaluator(order=1, x_min=x_min, x_max=x_max, acc=acc, interp="exact-frac")

    child = build(n - 1, acc, x_min, x_max + _CHILD_MARGIN)
    ev = PhiEvaluator(
        order=n,
        x_min=x_min,
        x_max=x_max,
        acc=acc,
        child=child,
        interp="cubic-log-phi-over-x|lobatto6-per-unit",
    )
    point_acc = ev._point_acc()
    child_over_v2 = ev._child_over_v2

    # Level constants enter phi only as x*J and x*R(x), so 1e-8 absolute is
    # far below the interpolation budget; tighter targets would chase the
    # noise floor of the child's own cached accuracy.
    const_acc = AccuracySpec(abs_tol=1e-8, rel_tol=3e-8, max_evals=acc.max_evals // 4)

    # per-unit chain integrals q_m = int_m^{m+1} child(v) v^-2 dv, m = 1..x_max-1
    seg_count = x_max - 1
    unit_q = np.empty(seg_count)
    node_q: list[np.ndarray] = []
    for m in range(1, x_max):
        nodes = m + _SEG_OFFS
        vals = np.empty(_SEG_NODES - 1)
        for j in range(_SEG_NODES - 1):
            r = quad.integrate_finite(child_over_v2, nodes[j], nodes[j + 1], (), point_acc)
            vals[j] = r.value
        node_q.append(vals)
        unit_q[m - 1] = math.fsum(vals)

    # R(x_max): order 2 integrates the tail directly (the child is the exact
    # fractional part, cheap at any distance); higher orders fit the
    # asymptotic model of R to the trailing chain integrals, which costs
    # nothing extra and never steps past the child grid.
    if n == 2:
        rres = quad.integrate_semi_infinite(
            child_over_v2,
            float(x_max),
            [float(x_max + j) for j in range(1, 17)],
            const_acc,
        )
        _require(rres, "level constant R(x_max)")
        ev._r_top = float(rres.value)
    else:
        ev._r_top = _fit_chain_tail(unit_q, x_max)

    # R at every Lobatto node, by accumulation from the top
    r_nodes = np.empty((seg_count, _SEG_NODES)) if seg_count else np.empty((0, _SEG_NODES))
    run = ev._r_top
    for m in range(x_max - 1, 0, -1):
        vals = node_q[m - 1]
        r_nodes[m - 1, _SEG_NODES - 1] = run
        for j in range(_SEG_NODES - 2, -1, -1):
            run += vals[j]
            r_nodes[m - 1, j] = run

    # J = int_1^inf child(v) v^-2 dv = R(1), the foot of the chain; tiny
    # grids fall back to a direct tail integration
    if seg_count >= 32:
        ev._j_const = float(run)
    else:
        jres = quad.integrate_semi_infinite(
            child_over_v2, 1.0, [float(m) for m in range(2, 65)], const_acc
        )
        _require(jres, "level constant J")
        ev._j_const = float(jres.value)
        if seg_count:
            drift = abs(run - ev._j_const)
            if drift > 1e-6 * max(abs(ev._j_const), 1.0):
                raise AccuracyError(f"chain drift {drift:.3e} while building order {n}")

    # values on the unit segments
    if seg_count:
        seg_vals = np.empty((seg_count, _SEG_NODES))
        for m in range(1, x_max):
            for j in range(_SEG_NODES):
                x = float(m + _SEG_OFFS[j])
                if j == 0 and m > 1:
                    seg_vals[m - 1, 0] = seg_vals[m - 2, _SEG_NODES - 1]
                    continue
                r_val = float(r_nodes[m - 1, j])
                seg_vals[m - 1, j] = x * r_val + ev._m_point(x) + ev._u_point(x, r_val)
        ev._seg_vals = seg_vals

    # log grid below 1
    decades = math.log10(1.0 / x_min)
    count = int(math.ceil(_POINTS_PER_DECADE * decades)) + 1
    knots = np.geomspace(x_min, 1.0, count)
    knots[-1] = 1.0
    phi_one = ev._seg_vals[0, 0] if seg_count else (ev._j_const + ev._i3_point(1.0))
    low_vals = np.empty(count)
    low_vals[-1] = phi_one
    c_run = 0.0
    for i in range(count - 2, -1, -1):
        r = quad.integrate_finite(child_over_v2, knots[i], knots[i + 1], (), point_acc)
        _require(r, f"chain link at x={knots[i]:.3e}")
        c_run += r.value
        low_vals[i] = knots[i] * (ev._j_const + c_run) + ev._i3_point(knots[i])
    ev._lt = np.log(knots)
    ev._lv = low_vals / knots

    # public grid view; shared segment endpoints appear once
    if seg_count:
        seg_x = (np.arange(1, x_max)[:, None] + _SEG_OFFS[None, :]).ravel()
        seg_v = ev._seg_vals.ravel()
        mask = np.ones(len(seg_x), dtype=bool)
        for m in range(1, seg_count):
            mask[m * _SEG_NODES] = False
        ev.grid = np.concatenate([knots[:-1], seg_x[mask]])
        ev.cached_values = np.concatenate([low_vals[:-1], seg_v[mask]])
    else:
        ev._r_top = ev._j_const
        ev.grid = knots
        ev.cached_values = low_vals
    return ev


def _require(res: quad.QuadResult, what: str) -> None:
    if not res.converged:
        raise AccuracyError(f"quadrature failed to converge for {what}")


def _fit_chain_tail(unit_q: np.ndarray, x_max: int) -> float:
    """R(x_max) from the trailing chain integrals via an asymptotic model fit.

    The trailing sums S(m) = sum of q over units m..x_max-1 differ from
    R(m) by the constant R(x_max).  Since phi_{n-1}(v) = O(log^(n-2) v),

        R(X) = (a log X + b)/X + (c log X + d)/X^2 + O(log X / X^3),

    so a least-squares fit of S against this model over the trailing half of
    the grid determines the missing constant.  The residual must stay tiny
    relative to the constant or construction aborts.
    """
    m0 = max(1, (x_max - 1) // 2)
    tail_sums = np.cumsum(unit_q[::-1])[::-1]
    xs = np.arange(m0, x_max, dtype=float)
    s = tail_sums[m0 - 1:]
    logx = np.log(xs)
    design = np.column_stack(
        [logx / xs, 1.0 / xs, logx / xs**2, 1.0 / xs**2, -np.ones_like(xs)]
    )
    sol, *_ = np.linalg.lstsq(design, s, rcond=None)
    r_top = float(sol[-1])
    resid = float(np.max(np.abs(design @ sol - s)))
    if resid > 1e-3 * max(abs(r_top), 1e-9):
        raise AccuracyError(
            f"tail model residual {resid:.3e} too large for R({x_max}) = {r_top:.3e}"
        )
    return r_top


# ---------------------------------------------------------------------------
# Tables
# ---------------------------------------------------------------------------


def phi_table_rows(ev: PhiEvaluator, xs) -> list[tuple[int, float, float, float]]:
    """Rows (n, x, phi, leading_term) for the CSV export."""
    xs = np.asarray(xs, dtype=float)
    phis = ev.phi(xs)
    leads = _leading_term(ev.order, xs)
    return [(ev.order, float(x), float(p), float(l)) for x, p, l in zip(xs, phis, leads)]
