"""Volterra kernels f(t, s) and their regularity properties.

A kernel is admissible when f(t, .) is square integrable for each t >= 0,
f(t, s) = 0 whenever s > t >= 0, and f(0, .) vanishes. The verification
identities additionally need some of four regularity properties:

  h1  support of f contained in a finite square [a, b] x [a, b], a <= 0 < b
  h2  f continuous and bounded off the diagonal of that square
  h3  f(t, s) -> f(t, t) as s -> t from below, with t -> f(t, t) continuous
  h4  f continuously differentiable off the diagonal with bounded derivative

Built-ins: a moving-average (shot-noise) kernel k(t - s), an exponential
memory kernel exp(-kappa (t - s)), the indicator kernel that reproduces
the driving process itself, and the power-law kernel of the fractional
process. The power-law kernel violates h1/h2/h4; for simulation it is
used in a windowed form with finite left support, and the discarded tail
is reported as a bias, never silently dropped.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad
from scipy.special import gamma as _gamma

from .errors import ConfigurationError, SingularKernelError
from .quadrature import geometric_panels, panel_rule


@dataclass(frozen=True)
class HypothesisFlags:
    h1: bool
    h2: bool
    h3: bool
    h4: bool


@dataclass(frozen=True, eq=False)
class VolterraKernel:
    kind: str
    support: tuple[float, float]
    flags: HypothesisFlags
    params: tuple[tuple[str, float], ...]
    _eval: Callable
    _ddt: Callable | None
    _dds: Callable | None
    _diag: Callable
    _s_integral: Callable | None = None
    _l2_closed: Callable | None = None

    @property
    def label(self) -> str:
        inner = ",".join(f"{k}={v:g}" for k, v in self.params)
        return f"{self.kind}({inner})" if inner else self.kind

    def param(self, name: str) -> float:
        for k, v in self.params:
            if k == name:
                return v
        raise KeyError(name)


def eval_kernel(kernel: VolterraKernel, t, s):
    """f(t, s), broadcasting over t and s; zero outside the Volterra region."""
    t_arr, s_arr = np.broadcast_arrays(np.asarray(t, float), np.asarray(s, float))
    a, b = kernel.support
    region = (t_arr >= 0.0) & (t_arr <= b) & (s_arr <= t_arr) & (s_arr >= a)
    out = np.zeros(t_arr.shape)
    if np.any(region):
        vals = kernel._eval(t_arr[region], s_arr[region])
        out[region] = vals
    if out.ndim == 0 or (np.isscalar(t) and np.isscalar(s)):
        return float(out.reshape(-1)[0]) if out.size == 1 else out
    return out


def kernel_ddt(kernel: VolterraKernel, t, s):
    """Partial derivative of f in its first argument.

    Raises for the power-law kernel on the diagonal, where the derivative
    diverges; integrals against it must use weighted rules instead.
    """
    if kernel._ddt is None:
        raise ConfigurationError(f"kernel {kernel.kind} has no registered derivative")
    t_arr, s_arr = np.broadcast_arrays(np.asarray(t, float), np.asarray(s, float))
    a, b = kernel.support
    region = (t_arr >= 0.0) & (t_arr <= b) & (s_arr <= t_arr) & (s_arr >= a)
    if kernel.kind == "fractional" and np.any(region & (s_arr == t_arr) & (t_arr > 0)):
        raise SingularKernelError("power-law kernel derivative diverges on the diagonal")
    out = np.zeros(t_arr.shape)
    if np.any(region):
        out[region] = kernel._ddt(t_arr[region], s_arr[region])
    if out.ndim == 0 or (np.isscalar(t) and np.isscalar(s)):
        return float(out.reshape(-1)[0]) if out.size == 1 else out
    return out


def kernel_dds(kernel: VolterraKernel, t, s):
    """Partial derivative of f in its second argument (where registered)."""
    if kernel._dds is None:
        raise ConfigurationError(
            f"kernel {kernel.kind} has no second-argument derivative")
    t_arr, s_arr = np.broadcast_arrays(np.asarray(t, float), np.asarray(s, float))
    a, b = kernel.support
    region = (t_arr >= 0.0) & (t_arr <= b) & (s_arr <= t_arr) & (s_arr >= a)
    out = np.zeros(t_arr.shape)
    if np.any(region):
        out[region] = kernel._dds(t_arr[region], s_arr[region])
    if out.ndim == 0 or (np.isscalar(t) and np.isscalar(s)):
        return float(out.reshape(-1)[0]) if out.size == 1 else out
    return out


def kernel_diag(kernel: VolterraKernel, t):
    """Diagonal value f(t, t), understood as the limit from s < t."""
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    vals = np.asarray(kernel._diag(t_arr), dtype=float)
    vals = np.where((t_arr >= 0.0) & (t_arr <= kernel.support[1]), vals, 0.0)
    if np.isscalar(t) or np.asarray(t).ndim == 0:
        return float(vals[0])
    return vals


def kernel_s_integral(kernel: VolterraKernel, t: float, lo: float | None = None) -> float:
    """int f(t, s) ds over s in [lo, t] (lo defaults to the support edge)."""
    a, b = kernel.support
    lo = a if lo is None else max(lo, a)
    if t <= 0.0 or t > b or t <= lo:
        return 0.0
    if kernel._s_integral is not None:
        return kernel._s_integral(t, lo)
    val, _ = quad(lambda s: eval_kernel(kernel, t, s), lo, t,
                  points=[0.0] if lo < 0.0 < t else None, limit=200)
    return val


def kernel_l2norm_sq(kernel: VolterraKernel, t: float, rel_tol: float = 1e-8) -> float:
    """int f(t, s)^2 ds, closed form where available, else quadrature."""
    a, b = kernel.support
    if t <= 0.0:
        return 0.0
    if t > b:
        raise ConfigurationError(f"t={t} beyond kernel horizon {b}")
    if kernel._l2_closed is not None:
        return kernel._l2_closed(t)
    if kernel.kind == "fractional":
        return _fractional_l2_windowed(kernel.param("d"), t, a)
    val, err = quad(lambda s: eval_kernel(kernel, t, s) ** 2, max(a, min(0.0, t)), t,
                    points=[0.0] if a < 0.0 < t else None,
                    epsrel=rel_tol, limit=400)
    if a < 0.0:
        neg, nerr = quad(lambda s: eval_kernel(kernel, t, s) ** 2, a, 0.0,
                         epsrel=rel_tol, limit=400)
        val += neg
        err += nerr
    if err > max(rel_tol * abs(val), 1e-14):
        raise ConfigurationError(f"squared-norm quadrature error {err:.2e} too large")
    return val


_S_RULE_CACHE: dict = {}


def kernel_s_rule(kernel: VolterraKernel, t: float, n: int = 16):
    """Fixed quadrature rule for s -> g(f(t, s), s) over [support lo, t].

    Panels are graded toward the points where f(t, .) loses smoothness:
    s = 0 for kernels with memory of the past, and s = t for the power-law
    kernel whose diagonal behaviour is (t - s)^d. Returns (nodes, weights);
    cached per (kernel, t, n).
    """
    key = (id(kernel), float(t), n)
    hit = _S_RULE_CACHE.get(key)
    if hit is not None:
        return hit
    a, b = kernel.support
    if t <= 0.0 or t > b:
        raise ConfigurationError(f"t={t} outside (0, {b}]")
    if kernel.kind == "fractional":
        breaks = geometric_panels(a, 0.0, toward="hi", ratio=4.0,
                                  first=min(t, -a) * 1e-9)
        breaks = breaks[:-1] + geometric_panels(0.0, t, toward="hi",
                                                ratio=4.0, first=t * 1e-9)
    else:
        pieces = [a, 0.0, t] if a < 0.0 < t else [a, t]
        breaks = []
        for lo, hi in zip(pieces[:-1], pieces[1:]):
            m = max(2, int(np.ceil(2.0 * (hi - lo))))
            breaks.extend(np.linspace(lo, hi, m + 1)[:-1].tolist())
        breaks.append(t)
    rule = panel_rule(breaks, n)
    _S_RULE_CACHE[key] = rule
    return rule


# ---------------------------------------------------------------------------
# Built-in kernels
# ---------------------------------------------------------------------------


def shot_noise_kernel(t_star: float, slope: float = 1.0,
                      k_func: Callable | None = None,
                      k_deriv: Callable | None = None,
                      k_integral: Callable | None = None) -> VolterraKernel:
    """Moving-average kernel f(t, s) = k(t - s) on 0 <= s <= t <= t_star.

    Defaults to the ramp k(u) = slope * u, which vanishes on the diagonal,
    so the convolved process is continuous. A custom k must come with its
    derivative; pass k_integral (antiderivative of k from 0) to avoid
    quadrature in drift terms.
    """
    if t_star <= 0.0:
        raise ConfigurationError("horizon must be positive")
    if k_func is None:
        k = lambda u: slope * u
        kd = lambda u: slope * np.ones_like(u)
        k0 = 0.0
        s_int = lambda t, lo: slope * (t - max(lo, 0.0)) ** 2 / 2.0
        l2 = lambda t: slope * slope * t**3 / 3.0
        params = (("t_star", t_star), ("slope", slope))
    else:
        if k_deriv is None:
            raise ConfigurationError("custom shot-noise kernel needs its derivative")
        k, kd = k_func, k_deriv
        k0 = float(k_func(np.array([0.0]))[0])
        if k_integral is not None:
            s_int = lambda t, lo: k_integral(t - max(lo, 0.0)) - k_integral(0.0)
        else:
            s_int = None
        l2 = None
        params = (("t_star", t_star),)

    return VolterraKernel(
        kind="shot_noise",
        support=(0.0, t_star),
        flags=HypothesisFlags(True, True, True, True),
        params=params,
        _eval=lambda t, s: k(t - s),
        _ddt=lambda t, s: kd(t - s),
        _dds=lambda t, s: -kd(t - s),
        _diag=lambda t: np.full(np.shape(t), k0, dtype=float),
        _s_integral=s_int,
        _l2_closed=l2,
    )


def exp_memory_kernel(kappa: float, t_star: float) -> VolterraKernel:
    """Exponential memory kernel f(t, s) = exp(-kappa (t-s)), 0 <= s <= t <= t_star."""
    if kappa < 0.0:
        raise ConfigurationError("decay rate must be >= 0")
    if t_star <= 0.0:
        raise ConfigurationError("horizon must be positive")
    if kappa == 0.0:
        s_int = lambda t, lo: t - max(lo, 0.0)
        l2 = lambda t: t
    else:
        s_int = lambda t, lo: (1.0 - math.exp(-kappa * (t - max(lo, 0.0)))) / kappa
        l2 = lambda t: (1.0 - math.exp(-2.0 * kappa * t)) / (2.0 * kappa)
    return VolterraKernel(
        kind="exp_memory",
        support=(0.0, t_star),
        flags=HypothesisFlags(True, True, True, True),
        params=(("kappa", kappa), ("t_star", t_star)),
        _eval=lambda t, s: np.exp(-kappa * (t - s)),
        _ddt=lambda t, s: -kappa * np.exp(-kappa * (t - s)),
        _dds=lambda t, s: kappa * np.exp(-kappa * (t - s)),
        _diag=lambda t: np.ones(np.shape(t), dtype=float),
        _s_integral=s_int,
        _l2_closed=l2,
    )


def indicator_kernel(t_star: float) -> VolterraKernel:
    """Kernel 1{0 <= s <= t}: the convolved process is the driver itself.

    Implemented closed at s = 0 (equal to the half-open indicator up to a
    Lebesgue-null set, which no functional here can distinguish).
    """
    if t_star <= 0.0:
        raise ConfigurationError("horizon must be positive")
    return VolterraKernel(
        kind="indicator",
        support=(0.0, t_star),
        flags=HypothesisFlags(True, True, True, True),
        params=(("t_star", t_star),),
        _eval=lambda t, s: np.ones(np.shape(t), dtype=float),
        _ddt=lambda t, s: np.zeros(np.shape(t), dtype=float),
        _dds=lambda t, s: np.zeros(np.shape(t), dtype=float),
        _diag=lambda t: np.ones(np.shape(t), dtype=float),
        _s_integral=lambda t, lo: t - max(lo, 0.0),
        _l2_closed=lambda t: t,
    )


def fractional_kernel(d: float, t_max: float, window_lo: float = -50.0) -> VolterraKernel:
    """Power-law kernel of the fractional process, windowed on the left.

    f(t, s) = ((t-s)_+^d - (-s)_+^d) / Gamma(1+d) for s > window_lo else 0.

    The true kernel has unbounded left support; the window makes paths
    simulable. Deterministic companions below quantify the discarded tail:
    fractional_l2_full gives the untruncated squared norm, and
    fractional_l2_truncation_bias the bias of this windowed kernel.
    Only h3 holds (the diagonal limit is 0); h1, h2, h4 fail for the true
    kernel, so identities needing them are at most formal here.
    """
    if not 0.0 < d < 0.5:
        raise ConfigurationError("memory exponent must lie in (0, 1/2)")
    if t_max <= 0.0:
        raise ConfigurationError("horizon must be positive")
    if window_lo >= 0.0:
        raise ConfigurationError("window must extend below 0")
    g1 = _gamma(1.0 + d)

    def f(t, s):
        pos = np.where(t > s, (t - s) ** d, 0.0)
        neg = np.where(s < 0.0, (-np.minimum(s, 0.0)) ** d, 0.0)
        return (pos - neg) / g1

    def ft(t, s):
        dt = t - s
        return np.where(dt > 0.0, dt ** (d - 1.0), 0.0) * (d / g1)

    def s_int(t, lo):
        lo = max(lo, window_lo)
        pos = (t - lo) ** (1.0 + d) / (1.0 + d)
        neg = ((-lo) ** (1.0 + d) - (-min(0.0, t)) ** (1.0 + d)) / (1.0 + d)
        return (pos - neg) / g1

    return VolterraKernel(
        kind="fractional",
        support=(window_lo, t_max),
        flags=HypothesisFlags(False, False, True, False),
        params=(("d", d), ("t_max", t_max), ("window_lo", window_lo)),
        _eval=f,
        _ddt=ft,
        _dds=None,
        _diag=lambda t: np.zeros(np.shape(t), dtype=float),
        _s_integral=s_int,
        _l2_closed=None,
    )


def fractional_l2_full(d: float, t: float) -> float:
    """Untruncated squared norm of the power-law kernel.

    Equals t^(2d+1) * Gamma(1-2d) / ((2d+1) Gamma(1+d) Gamma(1-d)); the
    constant is cross-checked against quadrature in the test suite.
    """
    if t <= 0.0:
        return 0.0
    return (t ** (2.0 * d + 1.0) * _gamma(1.0 - 2.0 * d)
            / ((2.0 * d + 1.0) * _gamma(1.0 + d) * _gamma(1.0 - d)))


def _fractional_l2_windowed(d: float, t: float, window_lo: float) -> float:
    g1 = _gamma(1.0 + d)
    pos = t ** (2.0 * d + 1.0) / (2.0 * d + 1.0) / g1**2
    breaks = geometric_panels(window_lo, 0.0, toward="hi", ratio=4.0,
                              first=min(t, -window_lo) * 1e-9)
    s_nodes, s_w = panel_rule(breaks, n=24)
    vals = ((t - s_nodes) ** d - (-s_nodes) ** d) / g1
    return pos + float(np.dot(s_w, vals**2))


def fractional_l2_truncation_bias(kernel: VolterraKernel, t: float) -> float:
    """Squared-norm mass discarded by the finite left window."""
    if kernel.kind != "fractional":
        raise ConfigurationError("bias defined for the power-law kernel only")
    d = kernel.param("d")
    return fractional_l2_full(d, t) - _fractional_l2_windowed(d, t, kernel.support[0])


# ---------------------------------------------------------------------------
# Hypothesis probing
# ---------------------------------------------------------------------------


@dataclass
class HypothesisReport:
    claimed: HypothesisFlags
    observed: HypothesisFlags
    witnesses: dict

    @property
    def consistent(self) -> bool:
        return self.claimed == self.observed


def check_hypotheses(kernel: VolterraKernel, n_grid: int = 41,
                     deriv_bound: float = 1e6) -> HypothesisReport:
    """Probe h1-h4 numerically on a finite grid and report witnesses.

    The probes are necessarily finite (a grid cannot prove continuity);
    they are designed to catch each built-in failure mode: unbounded
    support, diagonal blow-up of the derivative, diagonal limit mismatch.
    """
    a, b = kernel.support
    witnesses: dict = {}

    h1 = bool(np.isfinite(a) and np.isfinite(b)) and kernel.kind != "fractional"
    if kernel.kind == "fractional":
        # Finite window is an artifact; the kernel itself has unbounded support.
        witnesses["h1"] = f"left support truncated at {a:g}; true support is unbounded"
    else:
        witnesses["h1"] = f"support square [{a:g}, {b:g}]^2"

    ts = np.linspace(max(a, 0.0) + 1e-3, b, n_grid)
    ss = np.linspace(a, b, n_grid)
    tt, sm = np.meshgrid(ts, ss, indexing="ij")
    off_diag = np.abs(tt - sm) > 1e-3
    vals = eval_kernel(kernel, tt, sm)
    sup = float(np.max(np.abs(vals[off_diag]))) if np.any(off_diag) else 0.0
    h2 = h1 and np.isfinite(sup)
    witnesses["h2"] = f"max |f| off diagonal on probe grid: {sup:.6g}"

    # Diagonal limit: the gap |f(t, t-delta) - f(t, t)| must contract along a
    # geometric ladder of deltas (a fixed small offset would misread slow
    # power-law convergence as failure).
    deltas = np.array([10.0**-k for k in range(2, 8)])
    t_probe = np.linspace(max(0.25 * b, 1e-2), b, 7)
    h3 = True
    worst_pair = (0.0, 0.0)
    for t in t_probe:
        lim_vals = eval_kernel(kernel, np.full(deltas.shape, t), t - deltas)
        errs = np.abs(lim_vals - kernel_diag(kernel, t))
        if errs[-1] > max(0.5 * errs[0], 1e-9):
            h3 = False
            worst_pair = (float(errs[0]), float(errs[-1]))
            break
        worst_pair = max(worst_pair, (float(errs[0]), float(errs[-1])))
    witnesses["h3"] = (f"gap at delta=1e-2: {worst_pair[0]:.3g}, "
                       f"at delta=1e-7: {worst_pair[1]:.3g}")

    h4 = True
    if kernel._ddt is None:
        h4 = False
        witnesses["h4"] = "no derivative registered"
    else:
        worst = 0.0
        blow_up = False
        ladder = np.array([10.0**-k for k in range(2, 9)])
        for t in t_probe:
            near = t - ladder
            near = near[near > a]
            try:
                dv = np.abs(kernel_ddt(kernel, np.full(near.shape, t), near))
            except SingularKernelError:
                blow_up = True
                witnesses["h4"] = "derivative singular on the diagonal"
                break
            if dv.size >= 2 and dv[-1] > 10.0 * max(dv[0], 1e-30) and dv[-1] > 1.0:
                blow_up = True
                witnesses["h4"] = (
                    f"|df/dt| grows from {dv[0]:.3g} to {dv[-1]:.3g} "
                    f"approaching the diagonal at t={t:.3g}")
                break
            worst = max(worst, float(np.max(dv)) if dv.size else 0.0)
        if blow_up:
            h4 = False
        else:
            h4 = worst < deriv_bound
            witnesses["h4"] = f"max |df/dt| near diagonal: {worst:.6g}"
            if not h4:
                witnesses["h4"] += f" (exceeds bound {deriv_bound:g})"

    observed = HypothesisFlags(h1, h2 and h1, h3, h4 and h1)
    return HypothesisReport(claimed=kernel.flags, observed=observed,
                            witnesses=witnesses)
