"""Pure-jump Levy measures and two-sided path simulation.

The driving noise is a zero-mean, pure-jump Levy process without Gaussian
part. Its law is determined by the jump measure alone; the drift is always
the compensating one, drift = -int x nu(dx), so that E[L(1)] = 0.

Paths over a window [w_lo, w_hi] containing 0 are realized as marked point
sets: jump times on the negative and positive half-windows come from
independent substreams (two independent one-sided copies glued at 0), and

    L(t) = sum of jumps in (0, t] + drift * t        for t >= 0,
    L(t) = -(sum of jumps in (t, 0]) + drift * t     for t < 0,

which has stationary independent increments across the whole window.
Only finite-activity simulation is supported; infinite-activity densities
must be truncated first (the discarded mass is reported as a bias bound).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.integrate import quad

from .errors import ConfigurationError, NumericalIntegrationError
from .mc import substream


@dataclass(frozen=True)
class JumpDensity:
    """Absolutely continuous component of a jump measure.

    density maps x (nonzero real) to the Levy density. support gives hard
    bounds (may be infinite). The density may blow up at 0 as long as
    int min(x^2, 1) nu(dx) is finite.
    """

    name: str
    density: Callable[[np.ndarray], np.ndarray]
    support: tuple[float, float]
    params: tuple[tuple[str, float], ...] = ()

    def __post_init__(self):
        lo, hi = self.support
        if not lo < hi:
            raise ConfigurationError("density support must be a nonempty interval")


def tempered_stable_density(alpha: float, lam: float, scale: float = 1.0,
                            lam_neg: float | None = None,
                            scale_neg: float | None = None) -> JumpDensity:
    """Two-sided tempered-stable-type density scale*|x|^(-1-alpha)*exp(-lam|x|)."""
    if not 0.0 < alpha < 2.0:
        raise ConfigurationError("tempered stable index must lie in (0, 2)")
    if lam <= 0.0 or scale <= 0.0:
        raise ConfigurationError("tempering rate and scale must be positive")
    lam_n = lam if lam_neg is None else lam_neg
    sc_n = scale if scale_neg is None else scale_neg

    def dens(x):
        x = np.asarray(x, dtype=float)
        ax = np.abs(x)
        with np.errstate(divide="ignore", over="ignore"):
            pos = scale * ax ** (-1.0 - alpha) * np.exp(-lam * ax)
            neg = sc_n * ax ** (-1.0 - alpha) * np.exp(-lam_n * ax)
        out = np.where(x > 0, pos, neg)
        return np.where(x == 0, np.inf, out)

    return JumpDensity(
        name="tempered_stable",
        density=dens,
        support=(-np.inf, np.inf),
        params=(("alpha", alpha), ("lam", lam), ("scale", scale),
                ("lam_neg", lam_n), ("scale_neg", sc_n)),
    )


@dataclass(frozen=True)
class JumpMeasure:
    """Jump measure of a zero-mean pure-jump Levy process.

    atoms is a tuple of (size, rate) pairs; density an optional absolutely
    continuous part restricted to |x| > eps. eps = 0 means no truncation
    (then the density part, if any, must itself have finite total mass for
    simulation to be possible).
    """

    atoms: tuple[tuple[float, float], ...] = ()
    density: JumpDensity | None = None
    eps: float = 0.0

    def __post_init__(self):
        if not self.atoms and self.density is None:
            raise ConfigurationError("jump measure needs atoms or a density")
        if self.eps < 0.0:
            raise ConfigurationError("truncation threshold must be >= 0")
        for x, lam in self.atoms:
            if x == 0.0:
                raise ConfigurationError("jump measure must not charge {0}")
            if not np.isfinite(x) or not np.isfinite(lam) or lam < 0.0:
                raise ConfigurationError(f"bad atom ({x}, {lam})")
        if self.density is not None and self.eps == 0.0:
            # Require integrability of min(x^2,1); blows up for index >= 2.
            try:
                self._density_moment(2, cap=1.0)
            except NumericalIntegrationError as exc:
                raise ConfigurationError(
                    "density fails the small-jump square-integrability test") from exc

    # -- density quadrature helpers -------------------------------------

    def _density_ranges(self):
        lo, hi = self.density.support
        eps = self.eps
        ranges = []
        if lo < -eps:
            ranges.append((lo, -eps))
        if hi > eps:
            ranges.append((eps, hi))
        return ranges

    def _density_moment(self, m: int, absolute: bool = False, cap: float | None = None):
        """int x^m dens(x) dx over the (possibly truncated) support.

        With absolute=True integrates |x|^m; cap restricts to |x| <= cap.
        """
        dens = self.density.density
        total = 0.0
        for lo, hi in self._density_ranges():
            if cap is not None:
                lo, hi = max(lo, -cap), min(hi, cap)
                if hi <= lo:
                    continue

            def f(x):
                v = float(dens(np.array(x)))
                base = abs(x) ** m if absolute else x ** m
                return base * v

            val, err = quad(f, lo, hi, limit=400, epsabs=1e-12, epsrel=1e-10)
            if not np.isfinite(val) or err > max(1e-6, 1e-6 * abs(val)):
                raise NumericalIntegrationError(
                    f"density moment {m} quadrature failed on ({lo}, {hi}): "
                    f"value {val}, error {err:.2e}")
            total += val
        return total

    # -- measure functionals --------------------------------------------

    def total_rate(self) -> float:
        """nu(R); finite iff simulation by compound Poisson is possible."""
        rate = sum(lam for _, lam in self.atoms)
        if self.density is not None:
            if self.eps == 0.0 and self.density.name == "tempered_stable":
                return np.inf
            rate += self._density_moment(0)
        return rate

    def moment(self, m: int) -> float:
        """int x^m nu(dx)."""
        val = sum(lam * x**m for x, lam in self.atoms)
        if self.density is not None:
            val += self._density_moment(m)
        return val

    def abs_moment(self, m: int) -> float:
        """int |x|^m nu(dx)."""
        val = sum(lam * abs(x) ** m for x, lam in self.atoms)
        if self.density is not None:
            val += self._density_moment(m, absolute=True)
        return val

    def check_moments(self, max_order: int = 8) -> None:
        """Raise if any absolute moment up to max_order is not finite."""
        for m in range(1, max_order + 1):
            try:
                v = self.abs_moment(m)
            except NumericalIntegrationError as exc:
                raise ConfigurationError(f"moment of order {m} diverges") from exc
            if not np.isfinite(v):
                raise ConfigurationError(f"moment of order {m} is not finite")

    @property
    def drift_rate(self) -> float:
        """Compensating drift -int x nu(dx); makes E[L(1)] = 0."""
        return -self.moment(1)


def levy_variance(measure: JumpMeasure) -> float:
    """Var L(1) = int x^2 nu(dx)."""
    return measure.moment(2)


def char_exponent(measure: JumpMeasure, u) -> complex | np.ndarray:
    """Characteristic exponent psi(u) = int (e^{iux} - 1 - iux) nu(dx).

    E[e^{iu L(t)}] = exp(t psi(u)). Vectorized over u for atomic measures.
    """
    u_arr = np.asarray(u, dtype=float)
    out = np.zeros(u_arr.shape, dtype=complex)
    for x, lam in measure.atoms:
        out += lam * (np.exp(1j * u_arr * x) - 1.0 - 1j * u_arr * x)
    if measure.density is not None:
        dens = measure.density.density
        flat = np.atleast_1d(u_arr)
        vals = np.zeros(flat.shape, dtype=complex)
        for i, uu in enumerate(flat):
            for lo, hi in measure._density_ranges():
                def fre(x, uu=uu):
                    return (np.cos(uu * x) - 1.0) * float(dens(np.array(x)))

                def fim(x, uu=uu):
                    return (np.sin(uu * x) - uu * x) * float(dens(np.array(x)))

                re, ere = quad(fre, lo, hi, limit=400, epsabs=1e-12, epsrel=1e-10)
                im, eim = quad(fim, lo, hi, limit=400, epsabs=1e-12, epsrel=1e-10)
                if not (np.isfinite(re) and np.isfinite(im)) or ere + eim > 1e-6:
                    raise NumericalIntegrationError(
                        f"characteristic exponent quadrature diverged at u={uu}")
                vals[i] += complex(re, im)
        out = out + vals.reshape(u_arr.shape)
    if np.isscalar(u) or u_arr.ndim == 0:
        return complex(out)
    return out


def truncate_small_jumps(measure: JumpMeasure, eps: float):
    """Drop jumps with |x| <= eps.

    Returns (truncated measure, discarded variance). The discarded variance
    int_{|x|<=eps} x^2 nu(dx) bounds the L^2 error of the approximation of
    L(1) by the truncated process; the compensating drift of the returned
    measure is recomputed from the truncated measure, so the truncated
    process is again exactly zero-mean.
    """
    if eps <= 0.0:
        raise ConfigurationError("truncation threshold must be positive")
    kept = tuple((x, lam) for x, lam in measure.atoms if abs(x) > eps)
    discarded = sum(lam * x * x for x, lam in measure.atoms if abs(x) <= eps)
    if measure.density is not None:
        if eps < measure.eps:
            raise ConfigurationError("cannot un-truncate a density")
        discarded += measure._density_moment(2, cap=eps)
    out = JumpMeasure(atoms=kept, density=measure.density, eps=eps)
    return out, discarded


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------


def _atom_sampler(measure: JumpMeasure):
    sizes = np.array([x for x, _ in measure.atoms])
    rates = np.array([lam for _, lam in measure.atoms])
    props = rates / rates.sum()

    def draw(rng, n):
        return rng.choice(sizes, size=n, p=props)

    return draw


def _density_sampler(measure: JumpMeasure, grid_points: int = 4096):
    """Inverse-CDF sampler for the truncated density part."""
    dens = measure.density.density
    segments = []
    for lo, hi in measure._density_ranges():
        if not np.isfinite(lo):
            lo = -_density_tail_cut(measure, side=-1)
        if not np.isfinite(hi):
            hi = _density_tail_cut(measure, side=+1)
        segments.append((lo, hi))
    xs = []
    for lo, hi in segments:
        xs.append(np.linspace(lo, hi, grid_points))
    grid = np.concatenate(xs)
    grid.sort()
    mids = 0.5 * (grid[1:] + grid[:-1])
    inside = np.ones(mids.shape, bool)
    inside &= np.abs(mids) > measure.eps
    pdf = np.where(inside, dens(mids), 0.0)
    cell = np.diff(grid) * pdf
    cdf = np.concatenate([[0.0], np.cumsum(cell)])
    total = cdf[-1]

    def draw(rng, n):
        u = rng.uniform(0.0, total, size=n)
        return np.interp(u, cdf, grid)

    return draw, total


def _density_tail_cut(measure: JumpMeasure, side: int, tiny: float = 1e-14) -> float:
    """Finite cut X with nu(|x| > X on that side) below tiny * total."""
    dens = measure.density.density
    x = max(measure.eps, 1e-3)
    while x < 1e6:
        if float(dens(np.array(side * x))) * x < tiny:
            return x
        x *= 1.5
    return x


@dataclass
class JumpPath:
    """One realized path of the driving process over a window.

    times are sorted; sizes aligned with times. The window must contain 0
    whenever values of L at both signs of t are needed.
    """

    window: tuple[float, float]
    times: np.ndarray
    sizes: np.ndarray
    drift_rate: float

    def __post_init__(self):
        order = np.argsort(self.times, kind="stable")
        self.times = np.asarray(self.times, dtype=float)[order]
        self.sizes = np.asarray(self.sizes, dtype=float)[order]
        self._prefix = np.concatenate([[0.0], np.cumsum(self.sizes)])

    @property
    def n_jumps(self) -> int:
        return self.times.size

    def _signed_sum(self, idx_t, idx0):
        return self._prefix[idx_t] - self._prefix[idx0]

    def levy_at(self, t):
        """L(t), vectorized over t."""
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        idx0 = np.searchsorted(self.times, 0.0, side="right")
        idx = np.searchsorted(self.times, t_arr, side="right")
        vals = self._prefix[idx] - self._prefix[idx0] + self.drift_rate * t_arr
        if np.isscalar(t) or np.asarray(t).ndim == 0:
            return float(vals[0])
        return vals

    def levy_left_at(self, t):
        """Left limit L(t-), vectorized over t."""
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        idx0 = np.searchsorted(self.times, 0.0, side="right")
        idx = np.searchsorted(self.times, t_arr, side="left")
        vals = self._prefix[idx] - self._prefix[idx0] + self.drift_rate * t_arr
        if np.isscalar(t) or np.asarray(t).ndim == 0:
            return float(vals[0])
        return vals

    def time_integral_levy(self, T: float) -> float:
        """int_0^T L(t) dt, exact for the piecewise-linear path (T >= 0)."""
        mask = (self.times > 0.0) & (self.times <= T)
        jump_part = float(np.sum(self.sizes[mask] * (T - self.times[mask])))
        return jump_part + 0.5 * self.drift_rate * T * T


class PathBatch:
    """Flat representation of a path ensemble for vectorized functionals.

    Jump records are stored as parallel arrays (path_ids, times, sizes),
    sorted by path then time. All reductions are numpy segment operations.
    """

    def __init__(self, n_paths: int, window, drift_rate: float,
                 path_ids: np.ndarray, times: np.ndarray, sizes: np.ndarray):
        order = np.lexsort((times, path_ids))
        self.n_paths = n_paths
        self.window = (float(window[0]), float(window[1]))
        self.drift_rate = float(drift_rate)
        self.path_ids = path_ids[order]
        self.times = times[order]
        self.sizes = sizes[order]
        self.counts = np.bincount(self.path_ids, minlength=n_paths)
        self._padded = None

    def per_path_sum(self, values: np.ndarray) -> np.ndarray:
        return np.bincount(self.path_ids, weights=values, minlength=self.n_paths)

    def levy_at(self, t: float) -> np.ndarray:
        """L(t) for every path (scalar t)."""
        if t >= 0.0:
            mask = (self.times > 0.0) & (self.times <= t)
            vals = self.per_path_sum(np.where(mask, self.sizes, 0.0))
        else:
            mask = (self.times > t) & (self.times <= 0.0)
            vals = -self.per_path_sum(np.where(mask, self.sizes, 0.0))
        return vals + self.drift_rate * t

    def time_integral_levy(self, T: float) -> np.ndarray:
        mask = (self.times > 0.0) & (self.times <= T)
        w = np.where(mask, self.sizes * (T - self.times), 0.0)
        return self.per_path_sum(w) + 0.5 * self.drift_rate * T * T

    def padded(self):
        """(times, sizes, valid) as (n_paths, kmax) arrays, time-sorted rows."""
        if self._padded is None:
            kmax = int(self.counts.max()) if self.counts.size else 0
            kmax = max(kmax, 1)
            tmat = np.zeros((self.n_paths, kmax))
            xmat = np.zeros((self.n_paths, kmax))
            valid = np.zeros((self.n_paths, kmax), dtype=bool)
            col = np.arange(len(self.path_ids)) - np.repeat(
                np.concatenate([[0], np.cumsum(self.counts)[:-1]]), self.counts)
            tmat[self.path_ids, col] = self.times
            xmat[self.path_ids, col] = self.sizes
            valid[self.path_ids, col] = True
            self._padded = (tmat, xmat, valid)
        return self._padded

    def path(self, i: int) -> JumpPath:
        mask = self.path_ids == i
        return JumpPath(self.window, self.times[mask].copy(),
                        self.sizes[mask].copy(), self.drift_rate)


def simulate_batch(measure: JumpMeasure, window, n_paths: int,
                   seed: int, key: tuple = ()) -> PathBatch:
    """Simulate n_paths finite-activity paths over window.

    The two half-windows use independent substreams, realizing the gluing
    of two independent one-sided processes at 0. Requires a finite total
    jump rate.
    """
    lo, hi = float(window[0]), float(window[1])
    if not lo < hi:
        raise ConfigurationError("simulation window must be a nonempty interval")
    rate = measure.total_rate()
    if not np.isfinite(rate):
        raise ConfigurationError(
            "infinite total jump rate: truncate small jumps before simulating")

    atom_rate = sum(l for _, l in measure.atoms)
    draw_atom = _atom_sampler(measure) if measure.atoms else None
    draw_dens = None
    dens_rate = 0.0
    if measure.density is not None:
        draw_dens, dens_rate = _density_sampler(measure)

    ids, times, sizes = [], [], []
    branches = []
    if lo < 0.0:
        branches.append((lo, min(hi, 0.0), 0))
    if hi > 0.0:
        branches.append((max(lo, 0.0), hi, 1))
    for b_lo, b_hi, tag in branches:
        length = b_hi - b_lo
        for comp_tag, comp_rate, draw in ((0, atom_rate, draw_atom),
                                          (1, dens_rate, draw_dens)):
            if draw is None or comp_rate <= 0.0:
                continue
            rng = substream(seed, *key, tag, comp_tag)
            counts = rng.poisson(comp_rate * length, size=n_paths)
            total = int(counts.sum())
            ids.append(np.repeat(np.arange(n_paths), counts))
            times.append(rng.uniform(b_lo, b_hi, size=total))
            sizes.append(draw(rng, total))

    if ids:
        path_ids = np.concatenate(ids)
        t_all = np.concatenate(times)
        x_all = np.concatenate(sizes)
    else:
        path_ids = np.zeros(0, dtype=int)
        t_all = np.zeros(0)
        x_all = np.zeros(0)
    return PathBatch(n_paths, (lo, hi), measure.drift_rate, path_ids, t_all, x_all)


def simulate_path(measure: JumpMeasure, window, seed: int, key: tuple = ()) -> JumpPath:
    """Simulate a single path (thin wrapper around simulate_batch)."""
    batch = simulate_batch(measure, window, 1, seed, key)
    return batch.path(0)
