"""Special-function kernels: Riemann zeta, gamma, Jacobi theta, fractional part.

zeta is evaluated by Euler-Maclaurin summation on the right half-plane and by
the functional equation

    pi^(-s/2) zeta(s) Gamma(s/2) = pi^(-(1-s)/2) zeta(1-s) Gamma((1-s)/2)

for Re s <= 0.  Gamma uses the Lanczos rational approximation (g = 7, 9 terms).
theta(z) = sum over all integers n of exp(-pi n^2 z) is always reduced through
theta(z) = z^(-1/2) theta(1/z) so the evaluated series has argument >= 1.

Every operation is a pure function; the module holds no mutable state.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

__all__ = [
    "PI",
    "EULER_GAMMA",
    "LOG_TWO_PI",
    "AccuracyError",
    "AccuracySpec",
    "DEFAULT_ACCURACY",
    "frac",
    "zeta",
    "euler_maclaurin_zeta",
    "gamma",
    "jacobi_theta",
    "theta_sum",
]

# Stored to 20 significant digits; these are inputs, never recomputed.
PI = 3.1415926535897932385
EULER_GAMMA = 0.57721566490153286061
LOG_TWO_PI = 1.8378770664093454836


class AccuracyError(RuntimeError):
    """A requested tolerance could not be met within the evaluation budget."""


@dataclass(frozen=True)
class AccuracySpec:
    """Target tolerances plus an evaluation budget for a numeric operation.

    At least one of abs_tol, rel_tol must be strictly positive.
    """

    abs_tol: float = 1e-10
    rel_tol: float = 1e-8
    max_evals: int = 10_000_000

    def __post_init__(self) -> None:
        if not (math.isfinite(self.abs_tol) and math.isfinite(self.rel_tol)):
            raise ValueError("tolerances must be finite")
        if self.abs_tol < 0 or self.rel_tol < 0:
            raise ValueError("tolerances must be non-negative")
        if self.abs_tol == 0 and self.rel_tol == 0:
            raise ValueError("at least one of abs_tol, rel_tol must be positive")
        if self.max_evals < 1:
            raise ValueError("max_evals must be a positive integer")

    def target(self, scale: float) -> float:
        """Absolute error target for a quantity of magnitude `scale`."""
        return max(self.abs_tol, self.rel_tol * abs(scale))


DEFAULT_ACCURACY = AccuracySpec()


def frac(x):
    """Fractional part x - floor(x) in [0, 1), for finite x >= 0.

    Accepts a scalar or an ndarray and returns the matching shape.
    """
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("frac requires finite input")
    if np.any(arr < 0.0):
        raise ValueError("frac requires x >= 0")
    out = arr - np.floor(arr)
    if arr.ndim == 0:
        return float(out)
    return out


def _require_finite_complex(s, name: str = "s") -> complex:
    z = complex(s)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise ValueError(f"{name} must have finite components")
    return z


# ---------------------------------------------------------------------------
# Bernoulli machinery for Euler-Maclaurin summation
# ---------------------------------------------------------------------------


def _bernoulli_over_factorial(count: int) -> tuple[float, ...]:
    # B_{2k}/(2k)! for k = 1..count, from the Akiyama-Tanigawa recurrence in
    # exact rational arithmetic, converted to float once at import.
    top = 2 * count
    row = [Fraction(0)] * (top + 1)
    bern: list[Fraction] = []
    for n in range(top + 1):
        row[n] = Fraction(1, n + 1)
        for j in range(n, 0, -1):
            row[j - 1] = j * (row[j - 1] - row[j])
        bern.append(row[0])
    fact = 1
    out = []
    for k in range(1, count + 1):
        fact = math.factorial(2 * k)
        out.append(float(bern[2 * k] / fact))
    return tuple(out)


_B2K_OVER_FACT = _bernoulli_over_factorial(30)


def euler_maclaurin_zeta(s, n_direct: int, max_corrections: int = 30):
    """One Euler-Maclaurin pass for zeta(s) with n_direct summed terms.

    Returns (value, error_bound, evals).  The formula continues analytically
    to Re s > 1 - 2*max_corrections, so it is usable well left of the strip;
    the public `zeta` only relies on it for Re s > 0 (plus s near 0).
    """
    s = _require_finite_complex(s)
    if s == 1:
        raise ValueError("zeta has a pole at s = 1")
    n_direct = int(n_direct)
    if n_direct < 1:
        raise ValueError("n_direct must be >= 1")

    n = np.arange(1, n_direct + 1, dtype=float)
    value = complex(np.sum(np.power(n, -s)))
    nf = float(n_direct)
    ns = cmath.exp(-s * math.log(nf))  # nf**(-s)
    value += nf * ns / (s - 1.0)
    value -= 0.5 * ns

    # Correction terms B_{2k}/(2k)! * (s)(s+1)...(s+2k-2) * N^(1-s-2k); the
    # remainder after K terms is below |next term| * |s+2K+1|/(Re s + 2K+1).
    poch = s
    npow = ns / nf
    prev_mag = math.inf
    err = abs(value) * 1e-16
    k_used = 0
    for k in range(1, min(max_corrections, len(_B2K_OVER_FACT)) + 1):
        term = _B2K_OVER_FACT[k - 1] * poch * npow
        mag = abs(term)
        if mag >= prev_mag:
            # asymptotic divergence sets in; stop before adding
            err = mag
            break
        value += term
        k_used = k
        prev_mag = mag
        cushion = abs(s + 2 * k + 1) / max(s.real + 2 * k + 1, 1.0)
        err = mag * max(1.0, cushion)
        if mag <= 1e-18 * max(abs(value), 1e-300):
            break
        poch = poch * (s + 2 * k - 1) * (s + 2 * k)
        npow = npow / (nf * nf)
    return value, err, n_direct + k_used


def _zeta_right_halfplane(s: complex, acc: AccuracySpec) -> complex:
    n_direct = max(20, int(math.ceil(2.0 * abs(s.imag))))
    evals = 0
    while True:
        value, err, used = euler_maclaurin_zeta(s, n_direct)
        evals += used
        if err <= acc.target(abs(value)):
            return value
        if evals + 2 * n_direct > acc.max_evals:
            raise AccuracyError(
                f"zeta({s}): error bound {err:.3e} above target with "
                f"{evals} evaluations used"
            )
        n_direct *= 2


def zeta(s, acc: AccuracySpec | None = None) -> complex:
    """Riemann zeta function, analytically continued, s != 1.

    Euler-Maclaurin summation for Re s > 0; the symmetric functional
    equation maps Re s <= 0 onto Re(1-s) >= 1.  The reflection prefactor is
    written with 1/Gamma(s/2) = sin(pi s/2) Gamma(1 - s/2) / pi so trivial
    zeros come out as clean near-zero values instead of inf/inf.
    """
    s = _require_finite_complex(s)
    acc = acc or DEFAULT_ACCURACY
    if s == 1:
        raise ValueError("zeta has a pole at s = 1")
    if s.real > 0 or abs(s) < 1e-8:
        # Euler-Maclaurin continues through s = 0, where the reflection
        # prefactor degenerates to 0 * inf.
        return _zeta_right_halfplane(s, acc)
    w = 1.0 - s
    zw = _zeta_right_halfplane(w, acc)
    pref = (
        cmath.exp((s - 0.5) * math.log(PI))
        * gamma(0.5 * w)
        * gamma(1.0 - 0.5 * s)
        * cmath.sin(0.5 * PI * s)
        / PI
    )
    return pref * zw


# ---------------------------------------------------------------------------
# Gamma: Lanczos approximation, g = 7, 9 coefficients
# ---------------------------------------------------------------------------

_LANCZOS_G = 7.0
_LANCZOS_COEFFS = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)
_SQRT_TWO_PI = 2.5066282746310002


def gamma(s) -> complex:
    """Gamma function for complex argument, poles at non-positive integers.

    Published Lanczos coefficients give close to 15 significant digits on the
    right half-plane; Re s < 0.5 goes through the reflection formula.
    """
    z = _require_finite_complex(s)
    if z.imag == 0.0 and z.real <= 0.0 and z.real == math.floor(z.real):
        raise ValueError(f"gamma has a pole at {z.real:g}")
    if z.real < 0.5:
        return PI / (cmath.sin(PI * z) * gamma(1.0 - z))
    z -= 1.0
    series = _LANCZOS_COEFFS[0]
    for i, c in enumerate(_LANCZOS_COEFFS[1:], start=1):
        series += c / (z + i)
    t = z + _LANCZOS_G + 0.5
    return _SQRT_TWO_PI * t ** (z + 0.5) * cmath.exp(-t) * series


# ---------------------------------------------------------------------------
# Jacobi theta
# ---------------------------------------------------------------------------

_THETA_MAX_TERMS = 64


def _exp_series(z: np.ndarray, cutoff: float) -> np.ndarray:
    """sum_{n>=1} exp(-pi n^2 z) for z >= 1 (elementwise), truncated below cutoff."""
    total = np.zeros_like(z)
    for n in range(1, _THETA_MAX_TERMS + 1):
        term = np.exp(-PI * n * n * z)
        total += term
        if float(term.max(initial=0.0)) < cutoff:
            return total
    raise AccuracyError("theta series did not reach the requested cutoff")


def jacobi_theta(z, acc: AccuracySpec | None = None):
    """theta(z) = sum_{n in Z} exp(-pi n^2 z), z > 0; scalar or ndarray.

    Arguments below 1 are reduced through theta(z) = z^(-1/2) theta(1/z), so
    the summed series always has argument >= 1 and terminates in a handful of
    terms with no cancellation.
    """
    acc = acc or DEFAULT_ACCURACY
    arr = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
        raise ValueError("jacobi_theta requires z > 0")
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    cutoff = min(acc.target(1.0) * 1e-2, 1e-17)
    reduced = np.where(arr < 1.0, 1.0 / arr, arr)
    theta = 1.0 + 2.0 * _exp_series(reduced, cutoff)
    out = np.where(arr < 1.0, theta / np.sqrt(arr), theta)
    return float(out[0]) if scalar else out


def theta_sum(x, acc: AccuracySpec | None = None):
    """sum_{n>=1} exp(-pi n^2 x^2) for x > 0; scalar or ndarray.

    Computed as (theta(x^2) - 1)/2 for x >= 1 and as theta(1/x^2)/(2x) - 1/2
    for x < 1.  The second branch keeps the value accurate when a caller later
    subtracts 1/(2x): the subtraction then cancels exactly representable
    pieces instead of two nearly equal large sums.
    """
    acc = acc or DEFAULT_ACCURACY
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
        raise ValueError("theta_sum requires x > 0")
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    cutoff = min(acc.target(1.0) * 1e-2, 1e-17)

    out = np.empty_like(arr)
    big = arr >= 1.0
    if np.any(big):
        out[big] = _exp_series(arr[big] ** 2, cutoff)
    if np.any(~big):
        xs = arr[~big]
        inv = 1.0 / (xs * xs)
        theta_inv = 1.0 + 2.0 * _exp_series(inv, cutoff)
        out[~big] = theta_inv / (2.0 * xs) - 0.5
    return float(out[0]) if scalar else out


def muntz_gaussian_term(x):
    """sum_{n>=1} exp(-pi n^2 x^2) - 1/(2x), cancellation-safe on both sides of 1.

    This is the Muntz operator applied to the Gaussian exp(-pi x^2).  For
    x < 1 the two 1/(2x)-size quantities are combined through the theta
    functional equation before any subtraction happens.
    """
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
        raise ValueError("muntz_gaussian_term requires x > 0")
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    out = np.empty_like(arr)
    big = arr >= 1.0
    if np.any(big):
        xs = arr[big]
        out[big] = _exp_series(xs * xs, 1e-18) - 0.5 / xs
    if np.any(~big):
        xs = arr[~big]
        # theta(1/x^2)/(2x) - 1/2 - 1/(2x) = S(1/x^2)/x - 1/2 with S tiny
        out[~big] = _exp_series(1.0 / (xs * xs), 1e-18) / xs - 0.5
    return float(out[0]) if scalar else out
