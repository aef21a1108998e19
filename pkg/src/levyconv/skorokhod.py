"""Closed-form anticipative-integral identities and their verification.

The anticipative (Hitsuda-Skorokhod) integral against the convolved
process is defined implicitly: a random variable is the integral of X
over B when its S-transform equals int_B S(X(t))(eta) d/dt S(M(t))(eta)
dt for every test function. Nothing here integrates generic anticipative
integrands; the module evaluates the candidates with known closed forms
and verifies them through that defining equation over the shipped eta
family, at eta = 0 recovering zero-expectation statements.
"""
from __future__ import annotations

import math

import numpy as np

from .convpaths import conv_batch_at, conv_value_direct
from .errors import ConfigurationError
from .fracops import SampledFunction, frac_int_minus
from .kernels import VolterraKernel, eval_kernel, fractional_kernel
from .levy import JumpMeasure, JumpPath, PathBatch
from .quadrature import adaptive, geometric_panels, panel_rule
from .stransform import (EtaTest, chunked_ensemble, ddt_s_of_M,
                         s_of_M_analytic, s_of_levy, wick_weights_batch)

_GAMMA = math.gamma


# ---------------------------------------------------------------------------
# Quadratic identity
# ---------------------------------------------------------------------------


def skorokhod_quadratic(kernel: VolterraKernel, path: JumpPath,
                        T: float) -> float:
    """Pathwise value of the anticipative integral of M against itself.

    Closed form: (M(T)^2 - sum_{s_j <= T} f(T, s_j)^2 x_j^2) / 2, the sum
    running over every jump left of T; kernel support zeroes what must
    not contribute.
    """
    m_T = conv_value_direct(kernel, path, T)
    keep = path.times <= T
    f_vals = eval_kernel(kernel, T, path.times[keep])
    correction = float(np.sum(f_vals**2 * path.sizes[keep] ** 2))
    return 0.5 * (m_T**2 - correction)


def skorokhod_quadratic_batch(kernel: VolterraKernel, batch: PathBatch,
                              T: float) -> np.ndarray:
    m_T = conv_batch_at(kernel, batch, T)
    keep = batch.times <= T
    f_vals = eval_kernel(kernel, T, batch.times[keep])
    corr = np.bincount(batch.path_ids[keep],
                       weights=f_vals**2 * batch.sizes[keep] ** 2,
                       minlength=batch.n_paths)
    return 0.5 * (m_T**2 - corr)


def ito_prefix_integral_batch(batch: PathBatch, T: float) -> np.ndarray:
    """Classical pathwise integral of L(t-) against dL over (0, T].

    sum_j L(s_j-) x_j over 0 < s_j <= T plus drift int_0^T L(t) dt; used
    as the adapted-reduction oracle for the indicator kernel.
    """
    pos = (batch.times > 0.0).astype(float)
    csum = np.cumsum(batch.sizes * pos)
    starts = np.concatenate(([0], np.cumsum(batch.counts)[:-1]))
    base = np.where(starts > 0, csum[np.maximum(starts - 1, 0)], 0.0)
    prefix_excl = csum - batch.sizes * pos - base[batch.path_ids]
    l_minus = prefix_excl + batch.drift_rate * batch.times
    mask = (batch.times > 0.0) & (batch.times <= T)
    jump_part = np.bincount(batch.path_ids[mask],
                            weights=(batch.sizes * l_minus)[mask],
                            minlength=batch.n_paths)
    return jump_part + batch.drift_rate * batch.time_integral_levy(T)


def quadratic_s_check(kernel: VolterraKernel, measure: JumpMeasure, window,
                      T: float, etas: list[EtaTest], n_paths: int, seed: int,
                      key: tuple = ()) -> list[dict]:
    """Per-eta residual of the quadratic identity at the S-transform level.

    The S-transform of twice the pathwise closed form must equal the
    square of S(M(T))(eta); at eta = 0 this is the zero-expectation
    statement combined with the second-moment identity.
    """

    def evaluate(batch):
        vals = 2.0 * skorokhod_quadratic_batch(kernel, batch, T)
        out = {}
        for eta in etas:
            w = wick_weights_batch(batch, measure, eta)
            out[eta.eta_id] = w * vals
        return out

    stats = chunked_ensemble(measure, window, n_paths, seed, key, evaluate)
    rows = []
    for eta in etas:
        st = stats[eta.eta_id]
        rhs = s_of_M_analytic(kernel, measure, T, eta) ** 2
        rows.append({"identity": "quadratic", "eta_id": eta.eta_id,
                     "lhs": st.mean, "rhs": rhs, "residual": st.mean - rhs,
                     "stderr": st.stderr, "n": st.n})
    return rows


# ---------------------------------------------------------------------------
# Increments and the factor-extraction correction
# ---------------------------------------------------------------------------


def increment_check(kernel: VolterraKernel, measure: JumpMeasure, window,
                    a: float, b: float, etas: list[EtaTest], n_paths: int,
                    seed: int, key: tuple = ()) -> list[dict]:
    """Increment identity: M(b) - M(a) integrates the constant 1.

    Left side per eta by weighted Monte Carlo; right side as the time
    integral of the analytic S-transform derivative, which exercises the
    derivative formula rather than telescoping the closed forms.
    """
    if not 0.0 <= a <= b <= kernel.support[1]:
        raise ConfigurationError("need 0 <= a <= b within the kernel horizon")

    def evaluate(batch):
        vals = conv_batch_at(kernel, batch, b) - conv_batch_at(kernel, batch, a)
        out = {}
        for eta in etas:
            w = wick_weights_batch(batch, measure, eta)
            out[eta.eta_id] = w * vals
        return out

    stats = chunked_ensemble(measure, window, n_paths, seed, key, evaluate)
    rows = []
    for eta in etas:
        st = stats[eta.eta_id]
        if b > a:
            rhs = adaptive(lambda t: ddt_s_of_M(kernel, measure, float(t), eta),
                           a, b, tol=1e-10)
        else:
            rhs = 0.0
        rows.append({"identity": "increment", "eta_id": eta.eta_id,
                     "lhs": st.mean, "rhs": rhs, "residual": st.mean - rhs,
                     "stderr": st.stderr, "n": st.n})
    return rows


def factor_extraction_check(kernel: VolterraKernel, measure: JumpMeasure,
                            window, a: float, b: float, etas: list[EtaTest],
                            n_paths: int, seed: int,
                            key: tuple = ()) -> list[dict]:
    """A time-a measurable factor does not slide under the integral sign.

    The ordinary product M(a)(M(b) - M(a)) exceeds the anticipative
    integral of the constant M(a) over (a, b] by the jump-measure integral
    of f(a,s)(f(b,s) - f(a,s)) y^2. Verified at the S-transform level:
    Monte Carlo left side minus the pathwise correction term against the
    closed form S(M(a)) [S(M(b)) - S(M(a))].
    """
    if not 0.0 <= a <= b <= kernel.support[1]:
        raise ConfigurationError("need 0 <= a <= b within the kernel horizon")

    def evaluate(batch):
        m_a = conv_batch_at(kernel, batch, a)
        m_b = conv_batch_at(kernel, batch, b)
        keep = batch.times <= a
        f_a = eval_kernel(kernel, a, batch.times[keep])
        f_b = eval_kernel(kernel, b, batch.times[keep])
        corr = np.bincount(batch.path_ids[keep],
                           weights=f_a * (f_b - f_a) * batch.sizes[keep] ** 2,
                           minlength=batch.n_paths)
        vals = m_a * (m_b - m_a) - corr
        out = {}
        for eta in etas:
            w = wick_weights_batch(batch, measure, eta)
            out[eta.eta_id] = w * vals
        return out

    stats = chunked_ensemble(measure, window, n_paths, seed, key, evaluate)
    rows = []
    for eta in etas:
        st = stats[eta.eta_id]
        s_a = s_of_M_analytic(kernel, measure, a, eta)
        s_b = s_of_M_analytic(kernel, measure, b, eta)
        rhs = s_a * (s_b - s_a)
        rows.append({"identity": "factor_extraction", "eta_id": eta.eta_id,
                     "lhs": st.mean, "rhs": rhs, "residual": st.mean - rhs,
                     "stderr": st.stderr, "n": st.n})
    return rows


def factor_extraction_correction_quad(kernel: VolterraKernel,
                                      measure: JumpMeasure, a: float, b: float,
                                      eta: EtaTest) -> float:
    """Compensator form of the correction term, by quadrature."""
    lo = kernel.support[0]

    def integrand(s):
        f_a = eval_kernel(kernel, a, s)
        f_b = eval_kernel(kernel, b, s)
        tilt = sum(rate_k * x_k**2 * (1.0 + float(eta.eval(x_k, s)))
                   for x_k, rate_k in measure.atoms)
        return f_a * (f_b - f_a) * tilt

    if a <= lo:
        return 0.0
    return adaptive(integrand, lo, a, breaks=(0.0,), tol=1e-11)


# ---------------------------------------------------------------------------
# Fractional equivalence
# ---------------------------------------------------------------------------


def _refine_breaks(breaks, max_len: float) -> list[float]:
    out = [breaks[0]]
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        pieces = max(1, int(math.ceil((hi - lo) / max_len)))
        out.extend(np.linspace(lo, hi, pieces + 1)[1:].tolist())
    return out


def _i_minus_indep(g: SampledFunction, d: float, s: float) -> float:
    """Forward-looking fractional integral by an independent route.

    A three-term series takes the singular sliver [s, s + h0]; geometric
    plain Gauss panels, capped so the integrand stays resolved, take the
    rest. Deliberately shares nothing with frac_int_minus, which
    substitutes the singularity away, so agreement between the two is
    meaningful evidence.
    """
    g_lo, g_hi = g.support
    if s >= g_hi:
        return 0.0
    if s >= g_lo - 1e-9:
        h0 = min(1e-6, 0.5 * (g_hi - s))
        fd = 1e-4
        g0 = g(s)
        g1 = (g(s + fd) - g(max(s - fd, g_lo))) / (fd + min(fd, s - g_lo))
        g2 = (g(s + fd) - 2.0 * g0 + g(max(s - fd, g_lo))) / fd**2
        sliver = (g0 * h0**d / d + g1 * h0 ** (d + 1.0) / (d + 1.0)
                  + 0.5 * g2 * h0 ** (d + 2.0) / (d + 2.0))
        lo_panels = s + h0
    else:
        sliver = 0.0
        lo_panels = g_lo
    breaks = geometric_panels(lo_panels, g_hi, toward="lo", ratio=2.0,
                              first=max(lo_panels - s, 1e-7) * 0.5)
    breaks = _refine_breaks(breaks, (g_hi - g_lo) / 8.0)
    nodes, weights = panel_rule(breaks, n=16)
    tail = float(np.dot(weights, g(nodes) * (nodes - s) ** (d - 1.0)))
    return (sliver + tail) / _GAMMA(d)


_DRIFT_INT_CACHE: dict = {}


def _smoothed_drift_integral(g: SampledFunction, d: float, w_lo: float,
                             n_nodes: int) -> float:
    key = (id(g), d, w_lo, "lhs")
    if key not in _DRIFT_INT_CACHE:
        _DRIFT_INT_CACHE[key] = adaptive(
            lambda s: frac_int_minus(g, d, float(s), n_nodes=n_nodes),
            w_lo, g.support[1], breaks=g.panel_breaks(w_lo, g.support[1]),
            tol=1e-9)
    return _DRIFT_INT_CACHE[key]


def _convolved_drift_integral(g: SampledFunction, d: float,
                              w_lo: float) -> float:
    key = (id(g), d, w_lo, "rhs")
    if key not in _DRIFT_INT_CACHE:
        _DRIFT_INT_CACHE[key] = adaptive(
            lambda t: g(t) * (t - w_lo) ** d / _GAMMA(1.0 + d),
            g.support[0], g.support[1],
            breaks=g.panel_breaks(g.support[0], g.support[1]), tol=1e-11)
    return _DRIFT_INT_CACHE[key]


def wiener_type_equiv(g: SampledFunction, d: float, path: JumpPath,
                      n_nodes: int = 48) -> tuple[float, float]:
    """Both routes of the deterministic-integrand equivalence, pathwise.

    Left: the integral of the fractionally smoothed integrand against the
    driving path, sum_j (I-g)(s_j) x_j plus the drift times the integral
    of I-g over the window. Right: the same quantity assembled through the
    power-kernel process, jump by jump with singular t-quadrature plus the
    matching drift term. Exact arithmetic would make them equal for the
    windowed kernel; the gap measures quadrature error only. The
    independent right-hand route assumes a smooth integrand; integrands
    with interior jumps only make sense here at coarse tolerances.
    """
    if not 0.0 < d < 0.5:
        raise ConfigurationError("order must lie in (0, 1/2)")
    g_lo, g_hi = g.support
    if g_lo < 0.0:
        raise ConfigurationError("integrand must be supported in positive time")
    w_lo = path.window[0]
    delta = path.drift_rate

    smoothed = [frac_int_minus(g, d, float(s_j), n_nodes=n_nodes)
                for s_j in path.times]
    lhs_jumps = float(np.dot(smoothed, path.sizes))
    lhs_drift = delta * _smoothed_drift_integral(g, d, w_lo, n_nodes)

    rhs_jumps = float(np.dot(
        [_i_minus_indep(g, d, float(s_j)) for s_j in path.times], path.sizes))
    rhs_drift = delta * _convolved_drift_integral(g, d, w_lo)

    return lhs_jumps + lhs_drift, rhs_jumps + rhs_drift


def adapted_equiv_s_level(measure: JumpMeasure, d: float, T: float,
                          g: SampledFunction, eta: EtaTest,
                          window_lo: float = -50.0) -> tuple[float, float]:
    """The fractional equivalence for one adapted integrand, S-level.

    Integrand X(t) = g(t) L(t). Left: int_0^T S(X(t)) d/dt S(M_d(t)) dt.
    Right: the fractionally smoothed S(X(.)) integrated against the
    driving process's S-derivative. Equality is the defining equation of
    the anticipative integral pushed through the smoothing operator.
    """
    if eta.t_support[0] < window_lo:
        raise ConfigurationError("test-function support exceeds the window")
    kernel = fractional_kernel(d, max(T, 1.0), window_lo=window_lo)
    g_lo, g_hi = g.support
    hi = min(T, g_hi)

    sx = SampledFunction(
        support=(max(g_lo, 0.0), hi),
        fn=lambda t: g(t) * np.array([s_of_levy(measure, float(tt), eta)
                                      for tt in np.atleast_1d(t)]),
        breakpoints=g.breakpoints, label="S-of-X")

    lhs = adaptive(lambda t: sx(t) * ddt_s_of_M(kernel, measure, float(t), eta),
                   sx.support[0], hi, tol=1e-9)

    def mix(s):
        return sum(rate_k * x_k * float(eta.eval(x_k, s))
                   for x_k, rate_k in measure.atoms)

    r_lo = max(eta.t_support[0], window_lo)
    r_hi = min(eta.t_support[1], hi)
    rhs = adaptive(lambda s: frac_int_minus(sx, d, float(s)) * mix(s),
                   r_lo, r_hi, tol=1e-9) if r_hi > r_lo else 0.0
    return lhs, rhs


# ---------------------------------------------------------------------------
# Zero expectation
# ---------------------------------------------------------------------------


def levy_integral_deterministic(batch: PathBatch, h: SampledFunction,
                                ) -> np.ndarray:
    """Pathwise integral of a deterministic integrand against the driver."""
    contrib = h(batch.times) * batch.sizes
    sums = np.bincount(batch.path_ids, weights=contrib,
                       minlength=batch.n_paths)
    lo = max(batch.window[0], h.support[0])
    hi = min(batch.window[1], h.support[1])
    drift_int = adaptive(h, lo, hi, breaks=h.panel_breaks(lo, hi),
                         tol=1e-11) if hi > lo else 0.0
    return sums + batch.drift_rate * drift_int


def zero_expectation_suite(measure: JumpMeasure, window, candidates,
                           n_paths: int, seed: int,
                           key: tuple = ()) -> list[dict]:
    """Ensemble means of pathwise candidates that must vanish.

    candidates maps label -> functional(batch) -> per-path values. The
    zero-mean property is the defining S-transform equation evaluated at
    the zero test function.
    """

    def evaluate(batch):
        return {label: fn(batch) for label, fn in candidates.items()}

    stats = chunked_ensemble(measure, window, n_paths, seed, key, evaluate)
    rows = []
    for label, st in stats.items():
        rows.append({"identity": "zero_expectation", "candidate": label,
                     "mean": st.mean, "stderr": st.stderr, "n": st.n,
                     "z": abs(st.mean) / st.stderr if st.stderr > 0 else 0.0})
    return rows
