"""Monte Carlo estimators over heat-kernel sample batches.

Means are reduced deterministically: chunkwise pairwise sums are combined
with exact float summation, so an estimate is a pure function of the batch
regardless of scheduling.  Every estimator returns a mean together with the
sample standard error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .algebra import StratifiedAlgebra, bch_product, dilate
from .poly import HoloPoly, evaluate, h_pairing
from .sampling import SampleBatch


class PoisonedEstimateError(RuntimeError):
    """An integrand produced a non-finite value; carries the sample index."""


@dataclass(frozen=True)
class MCEstimate:
    mean: complex | float
    stderr: float
    n: int

    def __str__(self) -> str:
        return f"{self.mean} +/- {self.stderr} (n={self.n})"


def _det_sum(values: np.ndarray) -> float:
    """Deterministic compensated sum: exact fsum over chunkwise pairwise sums."""
    flat = np.ascontiguousarray(values, dtype=np.float64).ravel()
    if flat.size == 0:
        return 0.0
    chunks = [np.add.reduce(flat[a:a + (1 << 16)]) for a in range(0, flat.size, 1 << 16)]
    return math.fsum(chunks)


def _mean_stderr(values: np.ndarray) -> tuple[complex | float, float]:
    n = values.shape[0]
    if np.iscomplexobj(values):
        mean = complex(_det_sum(values.real) / n, _det_sum(values.imag) / n)
    else:
        mean = _det_sum(values) / n
    if n < 2:
        return mean, 0.0
    dev = np.abs(values - mean) ** 2
    var = _det_sum(dev) / (n - 1)
    return mean, math.sqrt(var / n)


def _values(f, batch: SampleBatch) -> np.ndarray:
    vals = f(batch.points) if callable(f) else np.asarray(f)
    vals = np.asarray(vals)
    if vals.shape != (batch.n,):
        raise ValueError("pointwise evaluator must return one value per sample")
    finite = np.isfinite(vals) if not np.iscomplexobj(vals) else (
        np.isfinite(vals.real) & np.isfinite(vals.imag)
    )
    if not np.all(finite):
        idx = int(np.argmin(finite))
        raise PoisonedEstimateError(f"non-finite integrand value at sample {idx}")
    return vals


def mc_integral(f: Callable | np.ndarray, batch: SampleBatch) -> MCEstimate:
    """Sample mean and standard error of a pointwise functional over the batch."""
    vals = _values(f, batch)
    mean, err = _mean_stderr(vals)
    return MCEstimate(mean, err, batch.n)


def mc_integral_extrapolated(
    f: Callable | np.ndarray, fine: SampleBatch, coarse: SampleBatch
) -> MCEstimate:
    """Two-resolution estimator 2*fine - coarse on a coupled batch pair.

    Cancels the leading O(1/steps) discretization bias; because the batches
    share their driving noise the variance stays close to the fine batch's.
    """
    vf = _values(f, fine)
    vc = _values(f, coarse)
    mean, err = _mean_stderr(2.0 * vf - vc)
    return MCEstimate(mean, err, fine.n)


def inner_product(f: HoloPoly, g: HoloPoly, batch: SampleBatch) -> MCEstimate:
    """L2 inner product against the heat-kernel measure."""
    return mc_integral(lambda pts: evaluate(f, pts) * np.conj(evaluate(g, pts)), batch)


def lp_norm(f: HoloPoly, p: float, batch: SampleBatch) -> MCEstimate:
    """L^p quasi-norm with a delta-method standard error; p may be below 1."""
    if p <= 0:
        raise ValueError("p must be positive")
    vals = _values(lambda pts: np.abs(evaluate(f, pts)) ** p, batch)
    mean, err = _mean_stderr(vals)
    if mean <= 0:
        return MCEstimate(0.0, 0.0, batch.n)
    norm = mean ** (1.0 / p)
    return MCEstimate(norm, err * norm / (p * mean), batch.n)


def dirichlet_form(f: HoloPoly, g: HoloPoly, batch: SampleBatch) -> MCEstimate:
    """Energy pairing: mean of the metric pairing of df and conj(dg)."""
    return mc_integral(lambda pts: h_pairing(f, g, pts), batch)


def entropy_gap(f: HoloPoly, c: float, beta: float, batch: SampleBatch) -> MCEstimate:
    """Slack of the logarithmic Sobolev inequality at constants (c, beta).

    Returns c*Q(f) + beta*||f||^2 + ||f||^2 log||f|| - int |f|^2 log|f|,
    with 0*log(0) = 0; a nonnegative gap means the inequality holds for f.
    The standard error propagates the joint covariance of the three sample
    means through the delta method.
    """
    if c <= 0 or beta < 0:
        raise ValueError("need c > 0 and beta >= 0")
    pts = batch.points
    q = np.real(h_pairing(f, f, pts))
    u = np.abs(evaluate(f, pts)) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        v = np.where(u > 0, 0.5 * u * np.log(np.where(u > 0, u, 1.0)), 0.0)
    mq = _det_sum(q) / batch.n
    mu = _det_sum(u) / batch.n
    mv = _det_sum(v) / batch.n
    if mu <= 0:
        return MCEstimate(0.0, 0.0, batch.n)
    gap = c * mq + beta * mu + 0.5 * mu * math.log(mu) - mv
    grad = np.array([c, beta + 0.5 * math.log(mu) + 0.5, -1.0])
    cov = np.cov(np.stack([q, u, v]), ddof=1)
    var = float(grad @ cov @ grad) / batch.n
    return MCEstimate(gap, math.sqrt(max(var, 0.0)), batch.n)


def lsi_ratio(f: HoloPoly, batch: SampleBatch) -> MCEstimate:
    """Entropy-to-energy ratio (int |f|^2 log|f| - ||f||^2 log||f||) / Q(f).

    The empirical constant of the logarithmic Sobolev inequality for this
    single function; undefined for Q(f) = 0 (raises ValueError).
    """
    pts = batch.points
    q = np.real(h_pairing(f, f, pts))
    u = np.abs(evaluate(f, pts)) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        v = np.where(u > 0, 0.5 * u * np.log(np.where(u > 0, u, 1.0)), 0.0)
    mq = _det_sum(q) / batch.n
    mu = _det_sum(u) / batch.n
    mv = _det_sum(v) / batch.n
    if mq <= 0:
        raise ValueError("degenerate energy: ratio undefined for constant functions")
    num = mv - 0.5 * mu * math.log(mu)
    ratio = num / mq
    grad = np.array([-num / mq**2, (-0.5 * math.log(mu) - 0.5) / mq, 1.0 / mq])
    cov = np.cov(np.stack([q, u, v]), ddof=1)
    var = float(grad @ cov @ grad) / batch.n
    return MCEstimate(ratio, math.sqrt(max(var, 0.0)), batch.n)


def norm_ratio(
    num: HoloPoly, p: float, den: HoloPoly, q: float, batch: SampleBatch
) -> MCEstimate:
    """||num||_p / ||den||_q on a shared batch, with the correlated delta error."""
    if p <= 0 or q <= 0:
        raise ValueError("exponents must be positive")
    pts = batch.points
    a = np.abs(evaluate(num, pts)) ** p
    b = np.abs(evaluate(den, pts)) ** q
    ma = _det_sum(a) / batch.n
    mb = _det_sum(b) / batch.n
    if ma <= 0 or mb <= 0:
        return MCEstimate(0.0, 0.0, batch.n)
    ratio = ma ** (1.0 / p) / mb ** (1.0 / q)
    grad = np.array([ratio / (p * ma), -ratio / (q * mb)])
    cov = np.cov(np.stack([a, b]), ddof=1)
    var = float(grad @ cov @ grad) / batch.n
    return MCEstimate(ratio, math.sqrt(max(var, 0.0)), batch.n)


def mehler_apply(
    f: HoloPoly, t: float, a: float, x: np.ndarray, y_batch: SampleBatch
) -> MCEstimate:
    """Mehler-form semigroup at x: average f over the dilated-shift kernel.

    The point x is contracted by exp(-2t/a), the batch (sampled at s = a) is
    shrunk by sqrt(1 - exp(-4t/a)), and f is averaged over the products.  At
    t = 0 the batch dilation degenerates to the identity element and the
    value is exactly f(x).
    """
    if t < 0:
        raise ValueError("time must be nonnegative")
    if a <= 0:
        raise ValueError("time-scale parameter a must be positive")
    alg = y_batch.alg
    x = np.asarray(x, dtype=np.complex128)
    beta = 2.0 / a
    shrink = math.exp(-beta * t)
    xs = dilate(alg, shrink, x) if shrink != 1.0 else x
    rad = math.sqrt(max(0.0, 1.0 - shrink**2))
    if rad == 0.0:
        return MCEstimate(complex(evaluate(f, xs)), 0.0, y_batch.n)
    ys = dilate(alg, rad, y_batch.points)
    pts = bch_product(alg, xs[None, :], ys)
    return mc_integral(lambda _: evaluate(f, pts), y_batch)


def kde_estimate(batch: SampleBatch, x: np.ndarray, bandwidth: float) -> float:
    """Product-Gaussian kernel density estimate of the batch density at x.

    The kernel standard deviation on a layer-j coordinate is bandwidth**j,
    matching the dilation scaling of lengths; the estimator's smoothing bias
    is O(bandwidth^2) from the first layer.
    """
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    alg = batch.alg
    x = np.asarray(x, dtype=np.complex128)
    delta = batch.points - x[None, :]
    log_k = np.zeros(batch.n)
    log_norm = 0.0
    for j in range(1, alg.m + 1):
        sl = alg.layer_slice(j)
        sigma = bandwidth**j
        block = delta[:, sl]
        log_k -= (block.real**2 + block.imag**2).sum(axis=1) / (2.0 * sigma**2)
        log_norm += 2 * (sl.stop - sl.start) * math.log(math.sqrt(2.0 * math.pi) * sigma)
    vals = np.exp(log_k - log_norm)
    return _det_sum(vals) / batch.n
