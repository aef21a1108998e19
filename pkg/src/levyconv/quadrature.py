"""Deterministic quadrature helpers.

Fixed Gauss-Legendre rules (optionally with endpoint power maps for
algebraic singularities and geometric panels for slowly decaying tails)
are used inside hot loops; adaptive scipy quadrature is reserved for
one-off integrals where an error estimate is wanted.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.integrate import quad

from .errors import NumericalIntegrationError


@lru_cache(maxsize=64)
def _gl(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def gl_rule(lo: float, hi: float, n: int = 32):
    """Gauss-Legendre nodes and weights on [lo, hi]."""
    x, w = _gl(n)
    half = 0.5 * (hi - lo)
    return lo + half * (x + 1.0), half * w


def panel_rule(breaks, n: int = 32):
    """Composite Gauss-Legendre rule over consecutive panels.

    breaks must be increasing; zero-length panels are dropped.
    """
    nodes = []
    weights = []
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        if hi <= lo:
            continue
        x, w = gl_rule(lo, hi, n)
        nodes.append(x)
        weights.append(w)
    if not nodes:
        return np.empty(0), np.empty(0)
    return np.concatenate(nodes), np.concatenate(weights)


def power_mapped_rule(lo: float, hi: float, alpha: float, n: int = 32, at: str = "hi"):
    """Rule absorbing an integrand factor (hi-x)^(alpha-1) (at='hi') or
    (x-lo)^(alpha-1) (at='lo').

    Returns (nodes, weights) such that sum(w * g(x)) approximates
    int g(x) * (singular factor) dx for g smooth. Uses the substitution
    u = (distance)^alpha, which removes the singularity exactly.
    """
    if hi <= lo:
        return np.empty(0), np.empty(0)
    length = hi - lo
    u, wu = gl_rule(0.0, length**alpha, n)
    dist = u ** (1.0 / alpha)
    w = wu / alpha
    if at == "hi":
        return hi - dist, w
    if at == "lo":
        return lo + dist, w
    raise ValueError("at must be 'hi' or 'lo'")


def power_weighted_rule(p_lo: float, p_hi: float, sing: float, alpha: float,
                        n: int = 32, side: str = "right"):
    """Rule for int_{p_lo}^{p_hi} g(t) |t - sing|^(alpha-1) dt with the
    singular point at or beyond one panel edge.

    side='right': sing <= p_lo, weight (t - sing)^(alpha-1).
    side='left':  sing >= p_hi, weight (sing - t)^(alpha-1).
    The substitution u = |t - sing|^alpha makes the weight exact and stays
    well conditioned when sing sits close to (but outside) the panel.
    """
    if p_hi <= p_lo:
        return np.empty(0), np.empty(0)
    if side == "right":
        if sing > p_lo:
            raise ValueError("singular point must lie at or left of the panel")
        u, wu = gl_rule((p_lo - sing) ** alpha, (p_hi - sing) ** alpha, n)
        return sing + u ** (1.0 / alpha), wu / alpha
    if side == "left":
        if sing < p_hi:
            raise ValueError("singular point must lie at or right of the panel")
        u, wu = gl_rule((sing - p_hi) ** alpha, (sing - p_lo) ** alpha, n)
        return sing - u ** (1.0 / alpha), wu / alpha
    raise ValueError("side must be 'right' or 'left'")


def geometric_panels(lo: float, hi: float, toward: str = "lo", ratio: float = 2.0,
                     first: float | None = None, max_panels: int = 60):
    """Panel breakpoints accumulating geometrically toward one endpoint.

    Useful for integrands decaying slowly toward -inf (mapped to a finite
    left endpoint) or with mild endpoint kinks.
    """
    if hi <= lo:
        return [lo, hi]
    length = hi - lo
    if first is None:
        first = length / 64.0
    offs = [0.0]
    step = first
    while offs[-1] + step < length and len(offs) < max_panels:
        offs.append(offs[-1] + step)
        step *= ratio
    offs.append(length)
    if toward == "lo":
        return [lo + o for o in offs]
    if toward == "hi":
        return [hi - o for o in reversed(offs)]
    raise ValueError("toward must be 'lo' or 'hi'")


def adaptive(fn, lo: float, hi: float, breaks=(), tol: float = 1e-10, limit: int = 400):
    """Adaptive quadrature with interior breakpoints; raises if the
    reported error exceeds the requested tolerance by a wide margin."""
    pts = sorted({lo, hi, *[b for b in breaks if lo < b < hi]})
    total = 0.0
    err_total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        val, err = quad(fn, a, b, epsabs=tol, epsrel=tol, limit=limit)
        total += val
        err_total += err
    if err_total > max(100.0 * tol, 1e-8 * abs(total)):
        raise NumericalIntegrationError(
            f"adaptive quadrature error {err_total:.2e} exceeds budget (tol {tol:.1e})")
    return total


def adaptive_complex(fn, lo: float, hi: float, breaks=(), tol: float = 1e-10):
    re = adaptive(lambda x: np.real(fn(x)), lo, hi, breaks, tol)
    im = adaptive(lambda x: np.imag(fn(x)), lo, hi, breaks, tol)
    return complex(re, im)
