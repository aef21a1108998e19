"""Reproducible random streams and mergeable Monte Carlo accumulators.

Streams are counter-based (Philox) and keyed by integers, so any chunk of
any ensemble can be regenerated in isolation and chunks may be processed
in any order or in parallel without changing the result.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import PoisonedEstimateError

# Fixed purpose tags keep stream keys readable at call sites.
STREAM_SIMULATE = 0
STREAM_SHIFTED = 1
STREAM_AUX = 2


def substream(seed: int, *key: int) -> np.random.Generator:
    """Return an independent generator for the given (seed, key) tuple."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


@dataclass
class RunningStat:
    """Streaming mean / standard error with associative merge.

    Works for real and complex samples. For complex data the standard
    error is sqrt((var(Re) + var(Im)) / n), which bounds the error of the
    complex mean in modulus.
    """

    n: int = 0
    s1: complex = 0.0
    s2_re: float = 0.0
    s2_im: float = 0.0
    is_complex: bool = False

    def update(self, values: np.ndarray) -> None:
        values = np.asarray(values)
        if not np.all(np.isfinite(values)):
            raise PoisonedEstimateError("non-finite sample in ensemble update")
        if np.iscomplexobj(values):
            self.is_complex = True
        self.n += values.size
        self.s1 += values.sum()
        re = np.real(values)
        im = np.imag(values)
        self.s2_re += float(np.dot(re, re))
        self.s2_im += float(np.dot(im, im))

    def merge(self, other: "RunningStat") -> "RunningStat":
        out = RunningStat(
            n=self.n + other.n,
            s1=self.s1 + other.s1,
            s2_re=self.s2_re + other.s2_re,
            s2_im=self.s2_im + other.s2_im,
            is_complex=self.is_complex or other.is_complex,
        )
        return out

    @property
    def mean(self):
        if self.n == 0:
            raise ValueError("empty accumulator")
        m = self.s1 / self.n
        return m if self.is_complex else float(np.real(m))

    @property
    def stderr(self) -> float:
        if self.n < 2:
            return math.inf
        m = self.s1 / self.n
        var_re = max(self.s2_re - self.n * np.real(m) ** 2, 0.0) / (self.n - 1)
        var_im = max(self.s2_im - self.n * np.imag(m) ** 2, 0.0) / (self.n - 1)
        return math.sqrt((var_re + var_im) / self.n)


def chunk_sizes(n: int, chunk: int):
    """Split n into chunk-sized pieces (last one possibly smaller)."""
    if n <= 0:
        raise ValueError("need a positive sample count")
    if chunk <= 0:
        raise ValueError("need a positive chunk size")
    out = []
    left = n
    while left > 0:
        take = min(chunk, left)
        out.append(take)
        left -= take
    return out


def combined_sigma(*stderrs: float) -> float:
    """Standard error of a difference of independent estimates."""
    return math.sqrt(sum(s * s for s in stderrs))
