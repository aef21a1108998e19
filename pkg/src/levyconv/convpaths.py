"""Pathwise construction of the kernel-convolved process.

Given a driving pure-jump path L and a Volterra kernel f, the convolved
process is

    M(t) = sum_{jumps s_j <= t} f(t, s_j) x_j  +  drift * int f(t, s) ds,

the integral running over the part of the simulation window left of t.
Two evaluation routes are provided: the direct sum above, and an exact
integration-by-parts form that only touches f along the diagonal and in
the s-derivative. The two must agree to float accuracy for kernels with
full regularity; their agreement is one of the verification identities.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolationError
from .kernels import (VolterraKernel, eval_kernel, kernel_dds, kernel_diag,
                      kernel_l2norm_sq, kernel_s_integral, kernel_s_rule)
from .levy import JumpMeasure, JumpPath, PathBatch, levy_variance


@dataclass
class ConvPath:
    """Convolved process sampled on a fixed grid of evaluation times."""
    kernel: VolterraKernel
    path: JumpPath
    grid: np.ndarray
    values: np.ndarray
    method: str

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.grid.shape != self.values.shape:
            raise ValueError("grid and values must align")


def _drift_part(kernel: VolterraKernel, path: JumpPath, t: float) -> float:
    return path.drift_rate * kernel_s_integral(kernel, t, lo=path.window[0])


def conv_value_direct(kernel: VolterraKernel, path: JumpPath, t: float) -> float:
    """M(t) by direct summation over the path's jumps."""
    if t <= 0.0:
        return 0.0
    keep = path.times <= t
    contrib = eval_kernel(kernel, t, path.times[keep]) * path.sizes[keep]
    return float(np.sum(contrib)) + _drift_part(kernel, path, t)


def conv_value_left(kernel: VolterraKernel, path: JumpPath, t: float) -> float:
    """Left limit M(t-): the jump at t itself, if any, is excluded."""
    if t <= 0.0:
        return 0.0
    keep = path.times < t
    contrib = eval_kernel(kernel, t, path.times[keep]) * path.sizes[keep]
    return float(np.sum(contrib)) + _drift_part(kernel, path, t)


def conv_path_direct(kernel: VolterraKernel, path: JumpPath, grid) -> ConvPath:
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    fmat = eval_kernel(kernel, grid[:, None], path.times[None, :])
    vals = fmat @ path.sizes
    for i, t in enumerate(grid):
        if t > 0.0:
            vals[i] += _drift_part(kernel, path, float(t))
        else:
            vals[i] = 0.0
    return ConvPath(kernel, path, grid, vals, "direct")


def conv_path_by_parts(kernel: VolterraKernel, path: JumpPath, grid) -> ConvPath:
    """M(t) through integration by parts in s.

    Writes M(t) = f(t,t) L(t) - f(t,a) L(a) - int_a^t L(s) d_s f(t, s) ds
    with a the left support edge, and evaluates the integral exactly: the
    jump part of L is piecewise constant between jumps, and the drift part
    contributes t f(t,t) - a f(t,a) - int f(t, s) ds. Requires the kernel
    to be differentiable off the diagonal with the diagonal limit attained,
    so all four regularity properties must hold.
    """
    fl = kernel.flags
    if not (fl.h1 and fl.h2 and fl.h3 and fl.h4):
        raise ContractViolationError(
            f"by-parts route needs full kernel regularity; {kernel.label} "
            f"declares h1={fl.h1} h2={fl.h2} h3={fl.h3} h4={fl.h4}")
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    a = max(kernel.support[0], path.window[0])
    delta = path.drift_rate
    vals = np.zeros(grid.shape)
    for i, t in enumerate(grid):
        t = float(t)
        if t <= 0.0:
            continue
        inside = (path.times > a) & (path.times < t)
        v = np.concatenate(([a], path.times[inside], [t]))
        # jump part of L immediately right of each breakpoint
        jump_level = path.levy_at(v[:-1]) - delta * v[:-1]
        f_at_v = eval_kernel(kernel, t, v)
        f_diag = kernel_diag(kernel, t)
        f_at_v[-1] = f_diag
        f_a = f_at_v[0]
        s_int = kernel_s_integral(kernel, t, lo=a)
        stieltjes = float(np.sum(jump_level * np.diff(f_at_v)))
        drift_int = delta * (t * f_diag - a * f_a - s_int)
        vals[i] = (f_diag * path.levy_at(t) - f_a * path.levy_at(a)
                   - stieltjes - drift_int)
    return ConvPath(kernel, path, grid, vals, "by_parts")


def conv_jump_relation(kernel: VolterraKernel, path: JumpPath,
                       t_lo: float = 0.0) -> float:
    """Largest violation of  M(s_j) - M(s_j-) = f(s_j, s_j) x_j  over jumps.

    Only jump times in (t_lo, horizon] are examined; the relation is what
    makes the convolved process inherit its discontinuities from the driver
    with the diagonal of the kernel as the multiplier.
    """
    hi = kernel.support[1]
    times = path.times[(path.times > max(t_lo, 0.0)) & (path.times <= hi)]
    worst = 0.0
    for s_j in times:
        jump = conv_value_direct(kernel, path, float(s_j)) - \
            conv_value_left(kernel, path, float(s_j))
        x_j = float(path.sizes[np.searchsorted(path.times, s_j)])
        expect = kernel_diag(kernel, float(s_j)) * x_j
        worst = max(worst, abs(jump - expect))
    return worst


def conv_batch_at(kernel: VolterraKernel, batch: PathBatch, t: float) -> np.ndarray:
    """M(t) for every path in the batch, as a vector."""
    if t <= 0.0:
        return np.zeros(batch.n_paths)
    keep = batch.times <= t
    contrib = eval_kernel(kernel, t, batch.times[keep]) * batch.sizes[keep]
    sums = np.bincount(batch.path_ids[keep], weights=contrib,
                       minlength=batch.n_paths)
    drift = batch.drift_rate * kernel_s_integral(kernel, t, lo=batch.window[0])
    return sums + drift


def conv_batch_on_grid(kernel: VolterraKernel, batch: PathBatch,
                       grid) -> np.ndarray:
    """Matrix of M(t_i) values, shape (n_paths, len(grid))."""
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    out = np.empty((batch.n_paths, grid.size))
    for j, t in enumerate(grid):
        out[:, j] = conv_batch_at(kernel, batch, float(t))
    return out


# ---------------------------------------------------------------------------
# Closed-form marginals
# ---------------------------------------------------------------------------


def conv_variance_analytic(kernel: VolterraKernel, measure: JumpMeasure,
                           t: float) -> float:
    """Var M(t) = (second moment of the jump measure) * ||f(t, .)||^2."""
    return levy_variance(measure) * kernel_l2norm_sq(kernel, t)


def charfn_exponent(kernel: VolterraKernel, measure: JumpMeasure, t: float,
                    u, eta_eval=None, n_nodes: int = 16) -> np.ndarray:
    """log E e^{iuM(t)} as a vector over u.

    The exponent is int over s of sum_k rate_k (e^{iu x_k f(t,s)} - 1
    - iu x_k f(t,s)), optionally tilted by a factor (1 + eta(x_k, s))
    supplied through eta_eval. Atomic jump measures only.
    """
    if measure.density is not None:
        raise ContractViolationError(
            "closed-form characteristic function requires an atomic measure")
    u_arr = np.atleast_1d(np.asarray(u, dtype=complex))
    s_nodes, s_w = kernel_s_rule(kernel, t, n=n_nodes)
    f_vals = eval_kernel(kernel, t, s_nodes)
    total = np.zeros(u_arr.shape, dtype=complex)
    for x_k, rate_k in measure.atoms:
        phase = 1j * np.outer(u_arr, x_k * f_vals)
        integrand = np.exp(phase) - 1.0 - phase
        w_eff = s_w * (1.0 + eta_eval(x_k, s_nodes)) if eta_eval else s_w
        total += rate_k * (integrand @ w_eff)
    return total


def conv_charfn_analytic(kernel: VolterraKernel, measure: JumpMeasure,
                         t: float, u) -> np.ndarray:
    """E e^{iuM(t)} for an atomic measure, by deterministic quadrature."""
    out = np.exp(charfn_exponent(kernel, measure, t, u))
    if np.isscalar(u):
        return complex(out[0])
    return out
