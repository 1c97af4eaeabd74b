"""Monte Carlo estimates of Gagliardo double integrals over R^n x R^n.

Both estimators are independent of the radial quadrature in
:mod:`mixedsobolev.gagliardo`.  The proposal for the full seminorm is the
mixture ``h(x, y) = (p(x) + p(y)) q(x - y) / 2`` with

* ``p`` radial with ``|x| / L`` beta-prime(n, 1) distributed (volume density
  ``~ |x|^{-n-1}`` at infinity), ``L`` the length scale of ``f``;
* ``q`` radial with ``|z|`` density ``~ t^{1-2s}`` below ``l`` and
  ``~ t^{-1-2s}`` above, i.e. volume density matching ``|z|^{2-n-2s}`` near the
  diagonal and the kernel ``|z|^{-n-2s}`` in the far field.

Only radii and one angle are sampled: ``|x + z|`` follows from ``|x|, |z|`` and
the cosine between them, whose law on ``S^{n-1}`` is ``Beta((n-1)/2, (n-1)/2)``
on ``[-1, 1]``.  Sampling is split into a fixed number of chunks with spawned
seeds, so the estimate does not depend on the thread count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import sphere_area

__all__ = ["McEstimate", "mc_seminorm", "tail_integral", "MIN_SAMPLES", "N_CHUNKS"]

MIN_SAMPLES = 10_000
N_CHUNKS = 64


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    samples: int
    seed: int

    def interval(self, k: float = 3.0) -> tuple[float, float]:
        return self.mean - k * self.std_error, self.mean + k * self.std_error

    def agrees_with(self, value: float, k: float = 3.0) -> bool:
        return abs(value - self.mean) <= k * self.std_error

    def to_dict(self) -> dict:
        return {"mean": self.mean, "std_error": self.std_error,
                "samples": self.samples, "seed": self.seed}


def _radial_sampler(n):
    w = sphere_area(n)

    def betaprime(rng, size, L):
        v = rng.random(size) ** (1.0 / n)
        return L * v / (1.0 - v)

    def betaprime_pdf(r, L):
        t = r / L
        return n * (1.0 + t) ** (-n - 1.0) / (L**n * w)

    return betaprime, betaprime_pdf


def _jump_sample(rng, size, s, ell):
    inner = rng.random(size) < s
    u = 1.0 - rng.random(size)  # in (0, 1]
    return np.where(inner, ell * u ** (1.0 / (2.0 - 2.0 * s)), ell * u ** (-1.0 / (2.0 * s)))


def _jump_pdf(t, s, n, ell):
    x = t / ell
    g = 2.0 * s * (1.0 - s) / ell * np.where(x <= 1.0, x ** (1.0 - 2.0 * s), x ** (-1.0 - 2.0 * s))
    return g / (sphere_area(n) * t ** (n - 1))


def _cosines(rng, size, n):
    a = 0.5 * (n - 1)
    return 2.0 * rng.beta(a, a, size) - 1.0


def _run_chunks(kernel_fn, samples, seed, threads):
    counts = np.full(N_CHUNKS, samples // N_CHUNKS)
    counts[: samples % N_CHUNKS] += 1
    seqs = np.random.SeedSequence(seed).spawn(N_CHUNKS)

    def work(i):
        if counts[i] == 0:
            return 0.0, 0.0
        w = kernel_fn(np.random.default_rng(seqs[i]), int(counts[i]))
        return float(np.sum(w)), float(np.sum(w * w))

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(work, range(N_CHUNKS)))
    else:
        parts = [work(i) for i in range(N_CHUNKS)]
    s1 = sum(p[0] for p in parts)
    s2 = sum(p[1] for p in parts)
    mean = s1 / samples
    var = max(s2 / samples - mean * mean, 0.0) * samples / (samples - 1)
    return mean, float(np.sqrt(var / samples))


def _check_samples(samples):
    samples = int(samples)
    if samples < MIN_SAMPLES:
        raise ValueError(f"need at least {MIN_SAMPLES} samples, got {samples}")
    return samples


def mc_seminorm(f, s: float, n: int, samples: int, seed: int, *, scale: float | None = None,
                threads: int = 1) -> McEstimate:
    """Importance-sampled ``[f]_s^2`` for a radial ``f`` defined on all of R^n.

    ``f`` maps radii to values.  ``scale`` (default ``f.scale`` or 1) sets both
    the spatial spread of ``p`` and the switch length ``l`` of ``q``.
    """
    samples = _check_samples(samples)
    if not 0.0 < s < 1.0:
        raise ValueError(f"s out of range: {s}")
    L = float(scale if scale is not None else getattr(f, "scale", 1.0))
    draw_p, pdf_p = _radial_sampler(n)

    def weights(rng, m):
        rx = draw_p(rng, m, L)
        t = _jump_sample(rng, m, s, L)
        c = _cosines(rng, m, n)
        ry = np.sqrt(np.maximum(rx * rx + t * t + 2.0 * rx * t * c, 0.0))
        diff = np.asarray(f(rx), dtype=float) - np.asarray(f(ry), dtype=float)
        h = 0.5 * (pdf_p(rx, L) + pdf_p(ry, L)) * _jump_pdf(t, s, n, L)
        return diff * diff * t ** (-n - 2.0 * s) / h

    mean, se = _run_chunks(weights, samples, seed, threads)
    return McEstimate(mean, se, samples, int(seed))


def tail_integral(f, R: float, s: float, n: int, samples: int, seed: int, *,
                  threads: int = 1) -> McEstimate:
    """``int_{R^n} int_{|y| > R} |f(x) - f(y)|^2 |x - y|^{-n-2s} dy dx`` by Monte Carlo.

    ``y`` is drawn radially from the Pareto law ``|y| ~ R^{2s} t^{-1-2s}`` on
    ``t > R``; ``x`` is, with equal probability, ``y`` plus a jump of length
    scale ``|y| / 2`` or an independent draw concentrated at the scale of ``f``.
    """
    if R < 10:
        raise ValueError(f"tail integral requires R >= 10, got {R}")
    samples = _check_samples(samples)
    if not 0.0 < s < 1.0:
        raise ValueError(f"s out of range: {s}")
    L = float(getattr(f, "scale", 1.0))
    b = 2.0 * s
    w = sphere_area(n)
    draw_p, pdf_p = _radial_sampler(n)

    def weights(rng, m):
        ry = R * (1.0 - rng.random(m)) ** (-1.0 / b)
        ell = 0.5 * ry
        near = rng.random(m) < 0.5
        t_near = _jump_sample(rng, m, s, ell)
        c = _cosines(rng, m, n)
        r_far = draw_p(rng, m, L)
        rx = np.where(near, np.sqrt(np.maximum(ry * ry + t_near * t_near + 2.0 * ry * t_near * c, 0.0)), r_far)
        # distance |x - y|: for the independent branch reuse the sampled cosine
        dist = np.where(near, t_near,
                        np.sqrt(np.maximum(ry * ry + r_far * r_far - 2.0 * ry * r_far * c, 0.0)))
        py = b * R**b * ry ** (-1.0 - b) / (w * ry ** (n - 1))
        hx = 0.5 * _jump_pdf(dist, s, n, ell) + 0.5 * pdf_p(rx, L)
        diff = np.asarray(f(rx), dtype=float) - np.asarray(f(ry), dtype=float)
        return diff * diff * dist ** (-n - 2.0 * s) / (py * hx)

    mean, se = _run_chunks(weights, samples, seed, threads)
    return McEstimate(mean, se, samples, int(seed))
