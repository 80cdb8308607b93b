"""Controlled-accuracy quadrature over finite, semi-infinite and vertical-line domains.

The base rule is the embedded Gauss-Kronrod 7/15 pair.  Every integrand is
called with a 1-D float ndarray of abscissae and must return an array of the
same length (real or complex); panels are evaluated in batches so that numpy
does the heavy lifting.

Caller-supplied breakpoints become mandatory panel boundaries.  Semi-infinite
tails are summed over blocks aligned with the trailing breakpoint spacing and
accelerated with the Levin u-transform, which handles the algebraically
decaying, unit-period oscillatory kernels that appear throughout the identity
checks.  Vertical-line integrals grow the truncation window in octaves and
close the remaining tail with a fitted power-law (or exponential) model.

All reductions use fixed summation order (math.fsum), so results are
deterministic for a given (integrand, domain, accuracy) triple.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .special_functions import AccuracySpec, DEFAULT_ACCURACY

__all__ = [
    "QuadResult",
    "TailModelError",
    "integrate_finite",
    "integrate_semi_infinite",
    "integrate_vertical_line",
    "levin_u",
]


class TailModelError(RuntimeError):
    """The tail of an unbounded integral does not fit the assumed decay model."""


@dataclass(frozen=True)
class QuadResult:
    """Outcome of one integration: value, error estimate, cost, convergence flag."""

    value: complex | float
    err_estimate: float
    evals: int
    converged: bool

    def __add__(self, other: "QuadResult") -> "QuadResult":
        return QuadResult(
            self.value + other.value,
            self.err_estimate + other.err_estimate,
            self.evals + other.evals,
            self.converged and other.converged,
        )


# 15-point Kronrod nodes with the embedded 7-point Gauss rule on nodes 1,3,..,13.
_GK_NODES = np.array([
    -0.99145537112081263921, -0.94910791234275852453, -0.86486442335976907279,
    -0.74153118559939443986, -0.58608723546769113029, -0.40584515137739716691,
    -0.20778495500789846760, 0.0,
    0.20778495500789846760, 0.40584515137739716691, 0.58608723546769113029,
    0.74153118559939443986, 0.86486442335976907279, 0.94910791234275852453,
    0.99145537112081263921,
])
_GK_WEIGHTS = np.array([
    0.02293532201052922496, 0.06309209262997855329, 0.10479001032225018384,
    0.14065325971552591875, 0.16900472663926790283, 0.19035057806478540991,
    0.20443294007529889241, 0.20948214108472782801,
    0.20443294007529889241, 0.19035057806478540991, 0.16900472663926790283,
    0.14065325971552591875, 0.10479001032225018384, 0.06309209262997855329,
    0.02293532201052922496,
])
_G7_WEIGHTS = np.array([
    0.12948496616886969327, 0.27970539148927666790, 0.38183005050511894495,
    0.41795918367346938776, 0.38183005050511894495, 0.27970539148927666790,
    0.12948496616886969327,
])


def _fsum_ordered(values) -> complex | float:
    re = math.fsum(v.real for v in values)
    im = math.fsum(v.imag for v in values)
    return re if im == 0.0 else complex(re, im)


def _eval_panels(f, lefts: np.ndarray, rights: np.ndarray):
    """Apply the 7/15 pair to each panel with a single batched integrand call."""
    c = 0.5 * (lefts + rights)
    h = 0.5 * (rights - lefts)
    x = (c[:, None] + h[:, None] * _GK_NODES[None, :]).ravel()
    y = np.asarray(f(x))
    if y.shape != x.shape:
        raise ValueError("integrand must return a 1-D array matching its input")
    y = y.reshape(len(lefts), 15)
    k15 = (y @ _GK_WEIGHTS) * h
    g7 = (y[:, 1::2] @ _G7_WEIGHTS) * h
    err = np.abs(k15 - g7)
    return k15, err


def _clean_breakpoints(breakpoints, a: float, b: float) -> list[float]:
    pts = [float(p) for p in breakpoints]
    for p in pts:
        if not math.isfinite(p):
            raise ValueError("breakpoints must be finite")
        if not (a < p < b):
            raise ValueError(f"breakpoint {p} outside the open domain ({a}, {b})")
    if any(q <= p for p, q in zip(pts, pts[1:])):
        raise ValueError("breakpoints must be strictly increasing")
    return pts


def integrate_finite(f, a: float, b: float, breakpoints=(), acc: AccuracySpec | None = None) -> QuadResult:
    """Adaptive Gauss-Kronrod integration of f over (a, b).

    Breakpoints become mandatory panel boundaries; f is never evaluated at
    panel edges, so jump discontinuities and integrable endpoint singularities
    are allowed.  On budget exhaustion the best value so far is returned with
    converged=False, never silently.
    """
    acc = acc or DEFAULT_ACCURACY
    a = float(a)
    b = float(b)
    if not (math.isfinite(a) and math.isfinite(b)) or not a < b:
        raise ValueError("need finite a < b")
    edges = [a] + _clean_breakpoints(breakpoints, a, b) + [b]

    lefts = np.array(edges[:-1])
    rights = np.array(edges[1:])
    vals, errs = _eval_panels(f, lefts, rights)
    evals = 15 * len(lefts)
    panels = list(zip(lefts.tolist(), rights.tolist(), vals.tolist(), errs.tolist()))

    eps64 = 64.0 * np.finfo(float).eps

    while True:
        toterr = math.fsum(p[3] for p in panels)
        total = _fsum_ordered([p[2] for p in panels])
        tol = acc.target(abs(total))
        if toterr <= tol:
            return QuadResult(total, toterr, evals, True)

        # error pinned in panels at the width floor can never be reduced
        frozen_err = math.fsum(
            p[3] for p in panels if (p[1] - p[0]) <= eps64 * max(abs(p[0]), abs(p[1]))
        )
        if frozen_err > tol:
            return QuadResult(total, toterr, evals, False)

        # split the panels carrying the top half of the reducible error
        order = sorted(range(len(panels)), key=lambda i: -panels[i][3])
        floor_each = 0.125 * max(tol - frozen_err, 0.0) / max(len(panels), 1)
        chosen = []
        acc_err = 0.0
        for i in order:
            left, right, _, err = panels[i]
            if (right - left) <= eps64 * max(abs(left), abs(right)):
                continue
            if err <= floor_each and chosen:
                break
            chosen.append(i)
            acc_err += err
            if acc_err >= 0.5 * toterr:
                break
        if not chosen:
            return QuadResult(total, toterr, evals, False)
        if evals + 30 * len(chosen) > acc.max_evals:
            budget = (acc.max_evals - evals) // 30
            chosen = chosen[: max(0, budget)]
            if not chosen:
                return QuadResult(total, toterr, evals, False)

        mids = [(panels[i][0] + panels[i][1]) / 2.0 for i in chosen]
        new_lefts = np.array([panels[i][0] for i in chosen] + mids)
        new_rights = np.array(mids + [panels[i][1] for i in chosen])
        new_vals, new_errs = _eval_panels(f, new_lefts, new_rights)
        evals += 15 * len(new_lefts)

        m = len(chosen)
        for j, i in enumerate(chosen):
            panels[i] = (new_lefts[j], new_rights[j], new_vals[j], new_errs[j])
        for j in range(m):
            panels.append((new_lefts[m + j], new_rights[m + j], new_vals[m + j], new_errs[m + j]))
        panels.sort(key=lambda p: p[0])


# ---------------------------------------------------------------------------
# Sequence acceleration
# ---------------------------------------------------------------------------


def levin_u(terms, beta: float = 1.0):
    """Levin u-transform estimate of the full series from a prefix of terms.

    Returns (limit_estimate, err_estimate).  Uses the standard recursive
    numerator/denominator tables, which stay well conditioned at orders where
    the direct binomial formula would cancel catastrophically.  Designed for
    smooth algebraic decay a_k ~ k^(-p), complex p allowed.
    """
    if not len(terms):
        return 0.0, math.inf
    numer: list[complex] = []
    denom: list[complex] = []
    partial = 0.0 + 0.0j
    history: list[complex] = []
    for n, a in enumerate(terms):
        a = complex(a)
        partial += a
        omega = (beta + n) * a
        if omega == 0:
            # dead tail, the plain partial sum is already converged
            return partial, abs(a) + 1e-18
        step = 1.0 / (beta + n)
        denom.append(step / omega)
        numer.append(partial * denom[-1])
        if n > 0:
            ratio = (beta + n - 1.0) * step
            for j in range(1, n + 1):
                fact = (n - j + beta) * step
                numer[n - j] = numer[n - j + 1] - fact * numer[n - j]
                denom[n - j] = denom[n - j + 1] - fact * denom[n - j]
                step *= ratio
        if abs(denom[0]) > 1e-300:
            history.append(numer[0] / denom[0])
    if not history:
        return partial, abs(terms[-1])
    if len(history) < 3:
        return history[-1], abs(history[-1] - history[0]) + abs(terms[-1])
    # in double precision the transform converges and then diverges again on
    # roundoff; pick the plateau where successive estimates agree best
    best_idx = 2
    best_err = math.inf
    for j in range(2, len(history)):
        local = abs(history[j] - history[j - 1]) + 0.5 * abs(history[j] - history[j - 2])
        if local < best_err:
            best_err = local
            best_idx = j
    noise = 1e-15 * max(abs(t) for t in map(complex, terms))
    return history[best_idx], best_err + noise


# ---------------------------------------------------------------------------
# Semi-infinite integrals
# ---------------------------------------------------------------------------

_MAX_TAIL_STRETCHES = 128
_PANELS_PER_STRETCH = 16


def _grade_head(f, a: float, power: float):
    """Substitute x = a + w^q on (a, a+1) so a (x-a)^power endpoint singularity
    with -1 < power < 0 becomes a smooth w-integrand."""
    q = max(2, math.ceil(4.0 / (1.0 + power)))

    def fw(w):
        x = a + w ** q
        return f(x) * q * w ** (q - 1)

    return fw


def integrate_semi_infinite(
    f,
    a: float,
    breakpoints=(),
    acc: AccuracySpec | None = None,
    endpoint_power: float | None = None,
    tail_width: float | None = None,
) -> QuadResult:
    """Integrate f over (a, infinity) for integrands with eventual decay.

    The head, up to the last breakpoint, is handled by `integrate_finite`.
    The tail is summed over panel stretches whose widths continue the
    trailing breakpoint spacing (so periodic jump families such as the
    corners of the fractional part stay on panel boundaries) and the stretch
    series is closed with the Levin u-transform.  Residual acceleration
    error enters err_estimate with a safety factor.

    endpoint_power declares f ~ (x-a)^power as x -> a+ with power in (-1, 0);
    the first unit of the head is then integrated under a power-law grading
    substitution instead of raw bisection.  tail_width overrides the
    inferred panel width.

    Raises TailModelError when stretch sums fail to decay.
    """
    acc = acc or DEFAULT_ACCURACY
    a = float(a)
    if not math.isfinite(a):
        raise ValueError("lower limit must be finite")
    bp = _clean_breakpoints(breakpoints, a, math.inf)
    if tail_width is not None:
        width = float(tail_width)
    else:
        width = bp[-1] - bp[-2] if len(bp) >= 2 else 1.0
    if width <= 0 or not math.isfinite(width):
        width = 1.0
    x0 = bp[-1] if bp else a + width

    head_acc = AccuracySpec(
        abs_tol=0.5 * acc.abs_tol,
        rel_tol=0.5 * acc.rel_tol,
        max_evals=acc.max_evals,
    )
    pieces: list[QuadResult] = []
    head_lo = a
    if endpoint_power is not None and -1.0 < endpoint_power < 0.0:
        cut = min(a + 1.0, x0)
        inner = [p - a for p in bp if p < cut]
        graded = _grade_head(f, a, endpoint_power)
        q = max(2, math.ceil(4.0 / (1.0 + endpoint_power)))
        wcut = (cut - a) ** (1.0 / q)
        wbp = [v ** (1.0 / q) for v in inner]
        pieces.append(integrate_finite(graded, 0.0, wcut, wbp, head_acc))
        head_lo = cut
    if head_lo < x0:
        mid_bp = [p for p in bp if head_lo < p < x0]
        pieces.append(integrate_finite(f, head_lo, x0, mid_bp, head_acc))

    head = pieces[0] if pieces else QuadResult(0.0, 0.0, 0, True)
    for extra in pieces[1:]:
        head = head + extra

    tail = _accelerated_tail(f, x0, width, acc, head)
    total = head.value + tail.value
    toterr = head.err_estimate + tail.err_estimate
    if isinstance(total, complex) and total.imag == 0.0:
        total = total.real
    return QuadResult(total, toterr, head.evals + tail.evals, bool(head.converged and tail.converged))


def _grouped_levin(stretch_values: list[complex], group: int):
    """Levin estimate of the whole tail from sums of `group` consecutive stretches."""
    count = len(stretch_values) // group
    sums = [sum(stretch_values[i * group:(i + 1) * group]) for i in range(count)]
    return levin_u(sums)


def _accelerated_tail(f, x0: float, width: float, acc: AccuracySpec, head: QuadResult) -> QuadResult:
    """Sum f over [x0, inf) in stretches of width-aligned panels.

    One stretch is 16 consecutive width panels integrated in a single batched
    adaptive call.  Exponentially dying integrands are summed plainly.
    Algebraic decay is closed with the Levin u-transform applied to grouped
    stretch sums; grouping keeps the term ratio of the transformed sequence
    healthy, and the spread between two different groupings enters the error
    estimate with the safety factor 2.
    """
    stretch_acc = AccuracySpec(
        abs_tol=max(acc.abs_tol / (4.0 * _MAX_TAIL_STRETCHES), 1e-300),
        rel_tol=min(acc.rel_tol, 1e-13),
        max_evals=max(1500, acc.max_evals // 1024),
    )
    span = _PANELS_PER_STRETCH * width
    values: list[complex] = []
    mags: list[float] = []
    evals = 0
    quaderr = 0.0
    running = abs(complex(head.value))

    best_val: complex = 0.0
    best_err = math.inf

    while len(values) < _MAX_TAIL_STRETCHES and evals + head.evals < acc.max_evals:
        lo = x0 + len(values) * span
        inner = [lo + j * width for j in range(1, _PANELS_PER_STRETCH)]
        blk = integrate_finite(f, lo, lo + span, inner, stretch_acc)
        evals += blk.evals
        quaderr += blk.err_estimate
        values.append(complex(blk.value))
        mags.append(abs(values[-1]))

        partial = sum(values)
        tol = acc.target(running + abs(partial))

        # plain summation wins when stretches die off exponentially fast
        if mags[-1] < 0.01 * tol and mags[-1] < 1e-3 * (max(mags) + 1e-300):
            ratio = mags[-1] / mags[-2] if len(mags) >= 2 and mags[-2] > 0 else 0.0
            bound = mags[-1] * ratio / (1.0 - ratio) if ratio < 1.0 else mags[-1]
            return QuadResult(partial, bound + quaderr, evals, True)

        if len(values) >= 12 and sum(mags[-4:]) > tol and sum(mags[-4:]) >= sum(mags[-8:-4]):
            raise TailModelError(
                "tail stretch sums are not decaying; integrand may not be integrable"
            )

        if len(values) >= 8:
            g1 = max(1, len(values) // 30)
            g2 = max(1, len(values) // 18)
            est1, err1 = _grouped_levin(values, g1)
            est2, err2 = _grouped_levin(values, g2)
            err = 2.0 * (max(err1, err2) + abs(est1 - est2)) + quaderr
            if err < best_err:
                best_val, best_err = est1, err
            if err <= 0.5 * tol:
                return QuadResult(est1, err, evals, True)

    if not values:
        return QuadResult(0.0, 0.0, evals, True)
    if best_err is math.inf:
        best_val, best_err = sum(values), math.fsum(mags) + quaderr
    return QuadResult(best_val, best_err, evals, False)


# ---------------------------------------------------------------------------
# Vertical-line (whole real line) integrals
# ---------------------------------------------------------------------------


def integrate_vertical_line(
    g,
    t_max_hint: float,
    acc: AccuracySpec | None = None,
    decay: str = "exponential",
    even: bool = True,
) -> QuadResult:
    """Integrate g over the whole real line with a declared tail decay model.

    The window [0, T] (doubled when `even`) grows in octaves.  With
    decay="exponential" octaves are added until they stop mattering and the
    geometric remainder goes into err_estimate.  With decay="polynomial" the
    octave sums I_j ~ c 2^(j(1-p)) are extrapolated: the fitted tail is added
    to the value, and twice the spread between consecutive fit windows is
    added to err_estimate.

    Raises TailModelError when octave sums fail to decay.
    """
    acc = acc or DEFAULT_ACCURACY
    if decay not in ("exponential", "polynomial"):
        raise ValueError("decay must be 'exponential' or 'polynomial'")
    if not math.isfinite(t_max_hint) or t_max_hint <= 0:
        raise ValueError("t_max_hint must be positive and finite")

    T0 = max(8.0, float(t_max_hint))
    part_acc = AccuracySpec(
        abs_tol=acc.abs_tol / 4.0,
        rel_tol=acc.rel_tol / 4.0,
        max_evals=acc.max_evals,
    )
    if even:
        core = integrate_finite(g, 0.0, T0, (), part_acc)
    else:
        core = integrate_finite(g, -T0, T0, (), part_acc)
    evals = core.evals
    octaves: list[QuadResult] = []
    omags: list[float] = []

    def running_total() -> complex:
        tot = core.value + sum(o.value for o in octaves)
        return 2.0 * tot if even else tot

    max_octaves = 16
    tail_add = 0.0
    tail_err = math.inf
    converged = False
    j = 0
    while j < max_octaves:
        tol = acc.target(abs(running_total()))
        mag = omags[-1] if omags else math.inf
        if decay == "exponential":
            if omags and mag <= 0.05 * tol:
                ratio = omags[-1] / omags[-2] if len(omags) >= 2 and omags[-2] > 0 else 0.5
                ratio = min(ratio, 0.9)
                tail_add = 0.0
                tail_err = mag * ratio / (1.0 - ratio) + 1e-300
                converged = True
                break
        else:
            if len(omags) >= 3:
                r1 = omags[-1] / omags[-2] if omags[-2] > 0 else 0.0
                r2 = omags[-2] / omags[-3] if omags[-3] > 0 else 0.0
                if r1 >= 1.0 or r2 >= 1.0:
                    if mag > tol:
                        raise TailModelError("octave sums on the line are not decaying")
                    tail_add = 0.0
                    tail_err = mag
                    converged = True
                    break
                # fitted power law c t^(-p): the octave ratio drifts towards
                # its limit geometrically, so extrapolate the ratio first
                rhat = min(r1 * r1 / r2 if r2 > 0 else r1, 0.97)
                last = complex(octaves[-1].value)
                tail_add = last * rhat / (1.0 - rhat)
                alt = last * r1 / (1.0 - min(r1, 0.97))
                tail_err = 2.0 * abs(tail_add - alt) + 0.01 * abs(tail_add)
                if tail_err <= 0.5 * tol and abs(tail_add) <= 0.05 * abs(running_total()):
                    converged = True
                    break
        if evals >= acc.max_evals:
            break
        lo, hi = T0 * 2.0 ** j, T0 * 2.0 ** (j + 1)
        oct_acc = AccuracySpec(
            abs_tol=max(acc.abs_tol / 8.0, 1e-300),
            rel_tol=max(acc.rel_tol / 8.0, 1e-13),
            max_evals=max(1000, (acc.max_evals - evals)),
        )
        if even:
            blk = integrate_finite(g, lo, hi, (), oct_acc)
        else:
            blk = integrate_finite(g, lo, hi, (), oct_acc) + integrate_finite(
                g, -hi, -lo, (), oct_acc
            )
        evals += blk.evals
        octaves.append(blk)
        omags.append(abs(complex(blk.value)))
        j += 1

    if tail_err is math.inf:
        tail_add = 0.0
        tail_err = omags[-1] if omags else 0.0
    total = core.value + sum(o.value for o in octaves) + tail_add
    toterr = core.err_estimate + math.fsum(o.err_estimate for o in octaves) + tail_err
    if even:
        total = 2.0 * total
        toterr = 2.0 * toterr
    if isinstance(total, complex) and total.imag == 0.0:
        total = total.real
    return QuadResult(total, toterr, evals, converged)
