"""The S-transform as an executable change of measure.

S(X)(eta) = E[w_eta X], where w_eta is the mean-one Wick-exponential
weight built from a test function eta(x, t). The module ships a concrete
test family, the weight evaluation, two independent Monte Carlo routes
(reweighting under P, and direct simulation under the tilted measure via
thinning), and the closed-form S-transforms of the convolved process that
the verification suites compare against.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from .convpaths import charfn_exponent, conv_batch_at
from .errors import (ConfigurationError, ContractViolationError,
                     PoisonedEstimateError)
from .fracops import SampledFunction, frac_int_plus
from .kernels import VolterraKernel, eval_kernel, kernel_ddt, kernel_diag
from .levy import JumpMeasure, PathBatch, simulate_batch
from .mc import (STREAM_SHIFTED, STREAM_SIMULATE, RunningStat, chunk_sizes,
                 substream)
from .quadrature import adaptive

# Largest values of the two x-profiles over the real line; used to turn an
# amplitude into a bound on eta.
_EVEN_PROFILE_MAX = math.exp(-1.0)
_ODD_PROFILE_MAX = 1.5 ** 1.5 * math.exp(-1.5)
_SUPPORT_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class EtaTest:
    """Test function eta(x, t) = amplitude * p(x) * exp(-t^2 / width).

    p is x^2 e^{-x^2} (even flavor) or x^3 e^{-x^2} (odd flavor). Members
    vanish at x = 0 with vanishing x-derivative, stay above -1, and decay
    below 1e-12 outside the declared time-support box.
    """

    eta_id: str
    flavor: str
    amplitude: float
    width: float
    t_support: tuple[float, float]

    def x_part(self, x):
        x = np.asarray(x, dtype=float)
        if self.flavor == "zero":
            return np.zeros(x.shape)
        p = x**2 if self.flavor == "even" else x**3
        return self.amplitude * p * np.exp(-(x**2))

    def eval(self, x, t):
        """eta(x, t), broadcasting over both arguments."""
        x_arr, t_arr = np.broadcast_arrays(np.asarray(x, float),
                                           np.asarray(t, float))
        if self.flavor == "zero":
            return np.zeros(x_arr.shape)
        return self.x_part(x_arr) * np.exp(-(t_arr**2) / self.width)

    def time_profile(self, x: float, clip_lo: float = -np.inf) -> SampledFunction:
        """eta(x, .) as a compactly supported function of time."""
        lo, hi = self.t_support
        lo = max(lo, clip_lo)
        amp = float(self.x_part(x))
        return SampledFunction(
            support=(lo, hi),
            fn=lambda s, a=amp: a * np.exp(-(s**2) / self.width),
            label=f"{self.eta_id}@x={x:g}")

    def sup_over_time(self, x: float) -> float:
        """sup_t eta(x, t); the time factor peaks at 1."""
        return max(float(self.x_part(x)), 0.0)


def eta_zero() -> EtaTest:
    return EtaTest("zero", "zero", 0.0, 1.0, (0.0, 0.0))


def builtin_eta(c: float, width: float, flavor: str) -> EtaTest:
    if flavor not in ("even", "odd"):
        raise ConfigurationError(f"unknown flavor {flavor!r}")
    if width <= 0.0:
        raise ConfigurationError("width must be positive")
    if flavor == "even":
        if not c > -1.0:
            raise ConfigurationError(
                "even flavor needs amplitude > -1 to keep eta above -1")
        peak = abs(c) * _EVEN_PROFILE_MAX
    else:
        peak = abs(c) * _ODD_PROFILE_MAX
        if not peak < 1.0:
            raise ConfigurationError(
                f"odd flavor needs |amplitude| < {1.0 / _ODD_PROFILE_MAX:.4f} "
                "to keep eta above -1")
    if c == 0.0:
        return eta_zero()
    radius = math.sqrt(width * math.log(peak / _SUPPORT_FLOOR)) if peak > _SUPPORT_FLOOR else 0.0
    eta_id = f"{flavor}_c{c:g}_w{width:g}"
    return EtaTest(eta_id, flavor, float(c), float(width), (-radius, radius))


def default_eta_family() -> list[EtaTest]:
    """Six test functions: both flavors, amplitudes {0.5, 1, 2}, two widths."""
    spec = [(0.5, 1.0, "even"), (1.0, 0.5, "even"), (2.0, 1.0, "even"),
            (0.5, 0.5, "odd"), (1.0, 1.0, "odd"), (2.0, 0.5, "odd")]
    return [builtin_eta(c, w, fl) for c, w, fl in spec]


# ---------------------------------------------------------------------------
# Weights
# ---------------------------------------------------------------------------


_COMP_CACHE: dict = {}
_PAIR_CACHE: dict = {}


def _require_atoms(measure: JumpMeasure, what: str):
    if measure.density is not None:
        raise ConfigurationError(f"{what} requires a purely atomic jump measure")


def compensator(measure: JumpMeasure, eta: EtaTest) -> float:
    """int over x and t of eta d(nu x Lebesgue), cached per (measure, eta)."""
    _require_atoms(measure, "the weight compensator")
    key = (measure.atoms, id(eta))
    if key in _COMP_CACHE:
        return _COMP_CACHE[key]
    lo, hi = eta.t_support
    total = 0.0
    if hi > lo:
        for x_k, rate_k in measure.atoms:
            total += rate_k * adaptive(lambda s, x=x_k: eta.eval(x, s), lo, hi)
    _COMP_CACHE[key] = total
    return total


def pairing_inner(measure: JumpMeasure, eta1: EtaTest, eta2: EtaTest) -> float:
    """Inner product of two test functions in L2(nu x Lebesgue)."""
    _require_atoms(measure, "the pairing")
    key = (measure.atoms, frozenset((id(eta1), id(eta2))))
    if key in _PAIR_CACHE:
        return _PAIR_CACHE[key]
    lo = max(eta1.t_support[0], eta2.t_support[0])
    hi = min(eta1.t_support[1], eta2.t_support[1])
    total = 0.0
    if hi > lo:
        for x_k, rate_k in measure.atoms:
            total += rate_k * adaptive(
                lambda s, x=x_k: eta1.eval(x, s) * eta2.eval(x, s), lo, hi)
    _PAIR_CACHE[key] = total
    return total


def _check_window(window, eta: EtaTest):
    lo, hi = eta.t_support
    if hi > lo and (window[0] > lo or window[1] < hi):
        raise ContractViolationError(
            f"simulation window {window} does not cover the time support "
            f"({lo:.3f}, {hi:.3f}) of {eta.eta_id}; the weight would be wrong")


def wick_weights_batch(batch: PathBatch, measure: JumpMeasure,
                       eta: EtaTest) -> np.ndarray:
    """Change-of-measure weight per path; strictly positive, mean one."""
    _check_window(batch.window, eta)
    comp = compensator(measure, eta)
    if batch.times.size:
        logs = np.log1p(eta.eval(batch.sizes, batch.times))
        sums = np.bincount(batch.path_ids, weights=logs,
                           minlength=batch.n_paths)
    else:
        sums = np.zeros(batch.n_paths)
    return np.exp(sums - comp)


def wick_factor_batch(batch: PathBatch, measure: JumpMeasure,
                      f: EtaTest) -> np.ndarray:
    """Wick-exponential factor for a general square-integrable f.

    Same product formula as the weight, but without the positivity
    guarantee: factors 1 + f may vanish or go negative, so the sign is
    tracked separately and a zero factor annihilates the path's value.
    """
    _check_window(batch.window, f)
    comp = compensator(measure, f)
    if not batch.times.size:
        return np.full(batch.n_paths, math.exp(-comp))
    vals = 1.0 + f.eval(batch.sizes, batch.times)
    dead = np.bincount(batch.path_ids, weights=(vals == 0.0).astype(float),
                       minlength=batch.n_paths) > 0
    safe = np.where(vals == 0.0, 1.0, vals)
    log_mag = np.bincount(batch.path_ids, weights=np.log(np.abs(safe)),
                          minlength=batch.n_paths)
    neg = np.bincount(batch.path_ids, weights=(vals < 0.0).astype(float),
                      minlength=batch.n_paths)
    sign = np.where(np.mod(neg, 2.0) == 0.0, 1.0, -1.0)
    out = sign * np.exp(log_mag - comp)
    out[dead] = 0.0
    return out


# ---------------------------------------------------------------------------
# Monte Carlo routes
# ---------------------------------------------------------------------------


@dataclass
class STransformEstimate:
    quantity: str
    eta_id: str
    method: str
    value: complex | float
    stderr: float
    n_paths: int


def chunked_ensemble(measure: JumpMeasure, window, n_paths: int, seed: int,
                     key: tuple, evaluate, chunk_paths: int = 20000,
                     simulate=None) -> dict:
    """Accumulate labelled per-path functionals over a chunked ensemble.

    evaluate(batch) returns {label: per-path values}; the result maps each
    label to a merged RunningStat. Chunks use independent substreams, so
    the result is independent of chunking and processing order.
    """
    simulate = simulate or (lambda m, ci: simulate_batch(
        measure, window, m, seed, (*key, STREAM_SIMULATE, ci)))
    stats: dict[str, RunningStat] = {}
    for ci, m in enumerate(chunk_sizes(n_paths, chunk_paths)):
        batch = simulate(m, ci)
        for label, vals in evaluate(batch).items():
            stat = stats.setdefault(label, RunningStat())
            try:
                stat.update(vals)
            except PoisonedEstimateError as exc:
                raise PoisonedEstimateError(
                    f"{label}: {exc}", stream_key=(seed, *key),
                    chunk_index=ci) from exc
    return stats


def stransform_reweight(measure: JumpMeasure, window, functional, eta: EtaTest,
                        n_paths: int, seed: int, key: tuple = (),
                        quantity: str = "X",
                        chunk_paths: int = 20000) -> STransformEstimate:
    """S(X)(eta) as the weighted P-mean  E[w_eta X]."""
    _check_window(window, eta)

    def evaluate(batch):
        w = wick_weights_batch(batch, measure, eta)
        return {"v": w * np.asarray(functional(batch))}

    stat = chunked_ensemble(measure, window, n_paths, seed, key, evaluate,
                            chunk_paths)["v"]
    return STransformEstimate(quantity, eta.eta_id, "reweight",
                              stat.mean, stat.stderr, stat.n)


def simulate_tilted_batch(measure: JumpMeasure, window, n_paths: int,
                          seed: int, key: tuple, eta: EtaTest) -> PathBatch:
    """Sample paths whose jump intensity is (1 + eta(x, t)) nu(dx) dt.

    Thinning per atom: a homogeneous stream at the dominating rate
    rate_k (1 + sup_t eta(x_k, .)) is thinned with acceptance probability
    (1 + eta(x_k, t)) / (1 + sup eta). The drift compensation stays the
    one determined by nu, because the path functional L is fixed and only
    the sampling law changes.
    """
    _require_atoms(measure, "tilted simulation")
    _check_window(window, eta)
    lo, hi = float(window[0]), float(window[1])
    length = hi - lo
    ids, times, sizes = [], [], []
    for k_idx, (x_k, rate_k) in enumerate(measure.atoms):
        sup_eta = eta.sup_over_time(x_k)
        bound = rate_k * (1.0 + sup_eta)
        if bound <= 0.0:
            continue
        rng = substream(seed, *key, k_idx)
        counts = rng.poisson(bound * length, size=n_paths)
        total = int(counts.sum())
        tau = rng.uniform(lo, hi, size=total)
        accept = rng.uniform(size=total) * (1.0 + sup_eta) \
            < 1.0 + eta.eval(x_k, tau)
        pid = np.repeat(np.arange(n_paths), counts)[accept]
        ids.append(pid)
        times.append(tau[accept])
        sizes.append(np.full(int(accept.sum()), x_k))
    if ids:
        ids_all = np.concatenate(ids)
        times_all = np.concatenate(times)
        sizes_all = np.concatenate(sizes)
    else:
        ids_all = np.zeros(0, dtype=int)
        times_all = np.zeros(0)
        sizes_all = np.zeros(0)
    return PathBatch(n_paths=n_paths, window=(lo, hi),
                     drift_rate=measure.drift_rate, path_ids=ids_all,
                     times=times_all, sizes=sizes_all)


def stransform_shifted(measure: JumpMeasure, window, functional, eta: EtaTest,
                       n_paths: int, seed: int, key: tuple = (),
                       quantity: str = "X",
                       chunk_paths: int = 20000) -> STransformEstimate:
    """S(X)(eta) as the plain mean under the tilted jump intensity."""

    def simulate(m, ci):
        return simulate_tilted_batch(measure, window, m, seed,
                                     (*key, STREAM_SHIFTED, ci), eta)

    def evaluate(batch):
        return {"v": np.asarray(functional(batch))}

    stat = chunked_ensemble(measure, window, n_paths, seed, key, evaluate,
                            chunk_paths, simulate=simulate)["v"]
    return STransformEstimate(quantity, eta.eta_id, "shifted",
                              stat.mean, stat.stderr, stat.n)


# Common path functionals.


def functional_conv_at(kernel: VolterraKernel, t: float):
    return lambda batch: conv_batch_at(kernel, batch, t)


def functional_conv_charfn(kernel: VolterraKernel, t: float, u: float):
    return lambda batch: np.exp(1j * u * conv_batch_at(kernel, batch, t))


def functional_levy_at(t: float):
    return lambda batch: batch.levy_at(t)


def functional_const_one():
    return lambda batch: np.ones(batch.n_paths)


# ---------------------------------------------------------------------------
# Closed forms
# ---------------------------------------------------------------------------


_S_OF_M_CACHE: dict = {}


def s_of_M_analytic(kernel: VolterraKernel, measure: JumpMeasure, t: float,
                    eta: EtaTest) -> float:
    """S(M(t))(eta) = sum_k rate_k x_k int f(t, s) eta(x_k, s) ds."""
    _require_atoms(measure, "the closed-form S-transform")
    key = (id(kernel), measure.atoms, float(t), id(eta))
    if key in _S_OF_M_CACHE:
        return _S_OF_M_CACHE[key]
    if t <= 0.0 or eta.flavor == "zero":
        _S_OF_M_CACHE[key] = 0.0
        return 0.0
    a, _ = kernel.support
    lo = max(a, eta.t_support[0])
    hi = min(float(t), eta.t_support[1])
    total = 0.0
    if hi > lo:
        for x_k, rate_k in measure.atoms:
            total += rate_k * x_k * adaptive(
                lambda s, x=x_k: eval_kernel(kernel, t, s) * eta.eval(x, s),
                lo, hi, breaks=(0.0,), tol=1e-12)
    _S_OF_M_CACHE[key] = total
    return total


def s_charfn_analytic(kernel: VolterraKernel, measure: JumpMeasure, t: float,
                      u, eta: EtaTest):
    """Characteristic function of M(t) under the tilted measure.

    exp{ iu S(M(t))(eta) + int (e^{iuxf} - 1 - iuxf)(1 + eta(x, s))
    nu(dx) ds }; reduces to the plain characteristic function at eta = 0.
    """
    s_lin = s_of_M_analytic(kernel, measure, t, eta)
    expo = charfn_exponent(kernel, measure, t, u,
                           eta_eval=None if eta.flavor == "zero" else eta.eval)
    u_arr = np.atleast_1d(np.asarray(u, dtype=float))
    out = np.exp(1j * u_arr * s_lin + expo)
    if np.isscalar(u):
        return complex(out[0])
    return out


def ddt_s_of_M(kernel: VolterraKernel, measure: JumpMeasure, t: float,
               eta: EtaTest, route: str = "auto") -> float:
    """d/dt of S(M(t))(eta), by the kernel-derivative formula.

    Smooth kernels use  int (d/dt f)(t,s) sum_k rate_k x_k eta(x_k, s) ds
    + f(t,t) sum_k rate_k x_k eta(x_k, t).  The power-law kernel routes
    through the conjugate fractional integral of the per-atom time
    profiles, its diagonal being zero.
    """
    _require_atoms(measure, "the S-transform derivative")
    if t <= 0.0 or eta.flavor == "zero":
        return 0.0
    if route == "auto":
        route = "fractional" if kernel.kind == "fractional" else "smooth"
    if route == "fractional":
        d = kernel.param("d")
        total = 0.0
        for x_k, rate_k in measure.atoms:
            profile = eta.time_profile(x_k, clip_lo=kernel.support[0])
            total += rate_k * x_k * frac_int_plus(profile, d, float(t))
        return total
    fl = kernel.flags
    if not fl.h4:
        raise ContractViolationError(
            f"derivative route needs a differentiable kernel; {kernel.label} "
            "declares h4 false")
    lo = max(kernel.support[0], eta.t_support[0])
    hi = min(float(t), eta.t_support[1])
    def mix(s):
        s_arr = np.atleast_1d(s)
        tot = np.zeros(s_arr.shape)
        for x_k, rate_k in measure.atoms:
            tot += rate_k * x_k * eta.eval(x_k, s_arr)
        return tot if np.ndim(s) else float(tot[0])
    inner = 0.0
    if hi > lo:
        inner = adaptive(lambda s: kernel_ddt(kernel, t, s) * mix(s),
                         lo, hi, breaks=(0.0,), tol=1e-12)
    return inner + kernel_diag(kernel, t) * mix(float(t))


def ddt_s_of_M_fd(kernel: VolterraKernel, measure: JumpMeasure, t: float,
                  eta: EtaTest, h: float = 1e-2) -> float:
    """Five-point central finite difference of s_of_M_analytic."""
    b = kernel.support[1]
    h = min(h, 0.25 * t, 0.25 * max(b - t, h * 1e-3))
    if t + 2 * h > b or t - 2 * h <= 0.0:
        raise ConfigurationError("finite-difference stencil leaves (0, horizon]")
    vals = [s_of_M_analytic(kernel, measure, t + k * h, eta)
            for k in (-2, -1, 1, 2)]
    return (vals[0] - 8.0 * vals[1] + 8.0 * vals[2] - vals[3]) / (12.0 * h)


def s_of_levy(measure: JumpMeasure, t: float, eta: EtaTest) -> float:
    """S(L(t))(eta) for t >= 0, in closed form for the Gaussian profiles."""
    _require_atoms(measure, "the driving-process S-transform")
    if t <= 0.0 or eta.flavor == "zero":
        return 0.0
    w = eta.width
    coef = sum(rate_k * x_k * float(eta.x_part(x_k))
               for x_k, rate_k in measure.atoms)
    return coef * 0.5 * math.sqrt(math.pi * w) * float(erf(t / math.sqrt(w)))


# ---------------------------------------------------------------------------
# Identity checks
# ---------------------------------------------------------------------------


def verify_ito_integral_stransform(measure: JumpMeasure, window, T: float,
                                   etas: list[EtaTest], integrand: str,
                                   n_paths: int, seed: int,
                                   key: tuple = ()) -> list[dict]:
    """Residuals of the Ito-integral S-transform identity.

    The left side is the Monte Carlo S-transform of the pathwise integral
    int int X dN-compensated over (0, T]; the right side is the
    deterministic double integral of S(X(y, t))(eta) eta(y, t) against nu
    and time. Shipped integrands: 'linear' is X(y, t) = y, whose integral
    is L(T); 'weighted_past' is X(y, t) = y L(t-).
    """
    _require_atoms(measure, "this identity")
    if integrand not in ("linear", "weighted_past"):
        raise ConfigurationError(f"unknown integrand {integrand!r}")

    def evaluate(batch):
        out = {}
        if integrand == "linear":
            base = batch.levy_at(T)
        else:
            base = _weighted_past_integral(batch, measure, T)
        for eta in etas:
            w = wick_weights_batch(batch, measure, eta)
            out[eta.eta_id] = w * base
        return out

    stats = chunked_ensemble(measure, window, n_paths, seed, key, evaluate)
    rows = []
    for eta in etas:
        stat = stats[eta.eta_id]
        if integrand == "linear":
            rhs = _rhs_linear(measure, T, eta)
        else:
            rhs = _rhs_weighted_past(measure, T, eta)
        rows.append({"eta_id": eta.eta_id, "integrand": integrand,
                     "lhs": stat.mean, "rhs": rhs,
                     "residual": stat.mean - rhs, "stderr": stat.stderr,
                     "n": stat.n})
    return rows


def _weighted_past_integral(batch: PathBatch, measure: JumpMeasure,
                            T: float) -> np.ndarray:
    """Pathwise int int y L(t-) dN-compensated over (0, T] per path.

    Equals sum_{0 < s_j <= T} x_j L(s_j-) minus (int y nu) int_0^T L dt;
    the jump prefix sums use the batch's (path, time) ordering.
    """
    pos = (batch.times > 0.0).astype(float)
    csum = np.cumsum(batch.sizes * pos)
    counts = batch.counts
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    base = np.where(starts > 0, csum[np.maximum(starts - 1, 0)], 0.0)
    prefix_excl = csum - batch.sizes * pos - base[batch.path_ids]
    l_minus = prefix_excl + batch.drift_rate * batch.times
    mask = (batch.times > 0.0) & (batch.times <= T)
    jump_part = np.bincount(batch.path_ids[mask],
                            weights=(batch.sizes * l_minus)[mask],
                            minlength=batch.n_paths)
    ti = batch.time_integral_levy(T)
    return jump_part + batch.drift_rate * ti


def _rhs_linear(measure: JumpMeasure, T: float, eta: EtaTest) -> float:
    if eta.flavor == "zero":
        return 0.0
    lo = max(0.0, eta.t_support[0])
    hi = min(T, eta.t_support[1])
    if hi <= lo:
        return 0.0
    total = 0.0
    for x_k, rate_k in measure.atoms:
        total += rate_k * x_k * adaptive(
            lambda s, x=x_k: eta.eval(x, s), lo, hi, tol=1e-12)
    return total


def _rhs_weighted_past(measure: JumpMeasure, T: float, eta: EtaTest) -> float:
    if eta.flavor == "zero":
        return 0.0
    lo = max(0.0, eta.t_support[0])
    hi = min(T, eta.t_support[1])
    if hi <= lo:
        return 0.0

    def outer(t):
        mix = sum(rate_k * x_k * float(eta.eval(x_k, t))
                  for x_k, rate_k in measure.atoms)
        return mix * s_of_levy(measure, float(t), eta)

    return adaptive(outer, lo, hi, tol=1e-12)


def malliavin_wick(measure: JumpMeasure, f: EtaTest, y: float, s: float):
    """Functional  path -> f(y, s) * Wick factor of f  per batch.

    The closed form of the point derivative of the Wick exponential in
    the jump coordinate (y, s); its ensemble mean is f(y, s).
    """
    f_ys = float(f.eval(y, s))
    return lambda batch: f_ys * wick_factor_batch(batch, measure, f)


def remark_product_check(measure: JumpMeasure, window, f: EtaTest,
                         atom_subset, interval, etas: list[EtaTest],
                         n_paths: int, seed: int, key: tuple = ()) -> list[dict]:
    """Product-times-counting-integral identity for simple random fields.

    LHS (Monte Carlo): S-transform of  F * compensated count of jumps with
    sizes in the subset and times in (a, b], where F is the Wick factor of
    f. RHS (closed form):  exp{(f, eta)} * sum over selected atoms of
    rate_k int_a^b (eta + f + eta f)(x_k, s) ds.
    """
    _require_atoms(measure, "this identity")
    a, b = float(interval[0]), float(interval[1])
    if not a < b:
        raise ConfigurationError("need a < b")
    subset = [float(v) for v in atom_subset]
    rate_a = sum(rate_k for x_k, rate_k in measure.atoms if x_k in subset)

    def evaluate(batch):
        wf = wick_factor_batch(batch, measure, f)
        hit = np.isin(batch.sizes, subset) & (batch.times > a) & (batch.times <= b)
        counts = np.bincount(batch.path_ids[hit], minlength=batch.n_paths)
        compensated = counts - rate_a * (b - a)
        out = {}
        for eta in etas:
            w = wick_weights_batch(batch, measure, eta)
            out[eta.eta_id] = w * wf * compensated
        return out

    stats = chunked_ensemble(measure, window, n_paths, seed, key, evaluate)
    rows = []
    for eta in etas:
        stat = stats[eta.eta_id]
        lead = math.exp(pairing_inner(measure, f, eta))
        inner = 0.0
        for x_k, rate_k in measure.atoms:
            if x_k not in subset:
                continue
            lo = max(a, min(f.t_support[0], eta.t_support[0]))
            hi = min(b, max(f.t_support[1], eta.t_support[1]))
            if hi <= lo:
                continue
            inner += rate_k * adaptive(
                lambda s, x=x_k: (eta.eval(x, s) + f.eval(x, s)
                                  + eta.eval(x, s) * f.eval(x, s)),
                lo, hi, tol=1e-12)
        rhs = lead * inner
        rows.append({"eta_id": eta.eta_id, "lhs": stat.mean, "rhs": rhs,
                     "residual": stat.mean - rhs, "stderr": stat.stderr,
                     "n": stat.n})
    return rows
