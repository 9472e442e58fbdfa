"""Loss Analysis

Gradient-variance view of regression versus dice losses under noisy depth
targets.

Prediction noise eta ~ N(0, sigma^2) enters the loss gradient as
epsilon(eta): sign(eta) for L1, eta for L2 and sign(eta)/ell inside the
object (|eta| <= ell) for the 1-D dice loss of an object of length ell.
SGD with square-summable steps then converges to a weight whose expected
squared deviation from the optimum is c1 * Var(epsilon) + c2, so the loss
with the smallest gradient variance converges closest.

Provided here:
- loss_grad_wrt_noise / dice_loss: the per-sample quantities
- var_closed_form / var_monte_carlo: gradient variance, exact and sampled
- dice_variance_upper_bound: Gaussian-tail bound on the dice variance
- critical_sigma: noise level above which dice beats both regressions
- sgd_convergence_sim / fit_deviation_law: Monte-Carlo check of the
  deviation law
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from typing import List, Sequence, Tuple, Union

import numpy as np
from scipy import stats
from scipy.optimize import bisect
from scipy.special import erf, erfinv

from .shared.errors import InputError, NumericalError
from .shared.schemas import LossKind, NoiseLossSpec, SgdSimConfig
from .shared.utils import spawn_seeds

logger = logging.getLogger("loss-analysis")

ArrayLike = Union[float, np.ndarray]

CRITICAL_SIGMA_XTOL = 1e-12


def _scalar_or_array(value: np.ndarray) -> ArrayLike:
    return float(value) if value.ndim == 0 else value


def dice_loss(spec: NoiseLossSpec, eta: ArrayLike) -> ArrayLike:
    """1-D dice loss of a length-ell segment shifted by eta: |eta|/ell, saturating at 1."""
    eta = np.asarray(eta, dtype=float)
    return _scalar_or_array(np.minimum(np.abs(eta) / spec.ell, 1.0))


def loss_grad_wrt_noise(spec: NoiseLossSpec, eta: ArrayLike) -> ArrayLike:
    """
    Loss gradient epsilon as a function of the prediction noise.

    Args:
        spec: Loss kind and object length
        eta: Noise value(s)

    Returns:
        epsilon(eta), odd in eta for every kind
    """
    eta = np.asarray(eta, dtype=float)
    if spec.kind == LossKind.L1:
        grad = np.sign(eta)
    elif spec.kind == LossKind.L2:
        grad = eta.copy()
    elif spec.kind == LossKind.DICE:
        grad = np.where(np.abs(eta) <= spec.ell, np.sign(eta) / spec.ell, 0.0)
    else:
        raise InputError(f"Unknown loss kind: {spec.kind}")
    return _scalar_or_array(grad)


def var_closed_form(spec: NoiseLossSpec) -> float:
    """
    Exact Var(epsilon) for eta ~ N(0, sigma^2).

    L1 -> 1, L2 -> sigma^2, dice -> erf(ell / (sqrt(2) sigma)) / ell^2.
    Noise-free data (sigma = 0) gives zero gradient and zero variance.
    """
    if spec.sigma == 0.0:
        return 0.0
    if spec.kind == LossKind.L1:
        return 1.0
    if spec.kind == LossKind.L2:
        return spec.sigma**2
    return float(erf(spec.ell / (math.sqrt(2.0) * spec.sigma)) / spec.ell**2)


def dice_variance_upper_bound(spec: NoiseLossSpec) -> float:
    """
    Upper bound on the dice gradient variance from a lower bound on the
    Gaussian tail probability P(|eta| > ell).
    """
    ell, sigma = spec.ell, spec.sigma
    if sigma == 0.0:
        return 1.0 / ell**2
    tail = (2.0 * sigma / (ell + math.sqrt(4.0 * sigma**2 + ell**2))) * math.sqrt(2.0 / math.pi)
    return float((1.0 - tail * math.exp(-(ell**2) / (2.0 * sigma**2))) / ell**2)


def var_monte_carlo(spec: NoiseLossSpec, samples: int = 100_000, seed: int = 0) -> Tuple[float, float]:
    """
    Sampled Var(epsilon) and its standard error.

    epsilon has zero mean (odd function of symmetric noise), so the variance
    is estimated as the mean of epsilon^2, which is unbiased. The standard
    error is that of this mean, floored at estimate / samples so that
    samples with no spread (e.g. L1, where epsilon^2 == 1) still carry
    the estimator's resolution.

    Args:
        spec: Loss specification
        samples: Number of noise draws (>= 10^4)
        seed: Random seed

    Returns:
        (variance estimate, standard error)
    """
    if samples < 10_000:
        raise InputError("var_monte_carlo needs at least 10^4 samples")
    rng = np.random.default_rng(seed)
    eta = rng.normal(0.0, spec.sigma, size=samples)
    squared = np.asarray(loss_grad_wrt_noise(spec, eta)) ** 2
    estimate = float(np.mean(squared))
    se = float(np.std(squared, ddof=1) / math.sqrt(samples))
    return estimate, max(se, estimate / samples)


def dice_crossing(sigma: float, ell: float) -> float:
    """sigma^2 minus the dice gradient variance; its root is sigma_m."""
    return sigma**2 - float(erf(ell / (math.sqrt(2.0) * sigma))) / ell**2


def critical_sigma(ell: float) -> float:
    """
    Noise level sigma_c above which the dice model converges closer than
    both L1 and L2 models.

    sigma_m solves sigma^2 = erf(ell / (sqrt(2) sigma)) / ell^2 (dice beats
    L2). For ell < 1 dice also needs Var < 1 (to beat L1), which holds for
    sigma > ell / (sqrt(2) erfinv(ell^2)); sigma_c is the larger of the two.

    Args:
        ell: Object length in metres

    Returns:
        sigma_c in metres
    """
    if ell <= 0.0:
        raise InputError("object length must be positive")
    # crossing is negative near 0 and non-negative at 1/ell since erf <= 1
    hi = 1.0 / ell
    lo = hi * 1e-9
    if dice_crossing(hi, ell) == 0.0:
        sigma_m = hi
    else:
        sigma_m = bisect(dice_crossing, lo, hi, args=(ell,), xtol=CRITICAL_SIGMA_XTOL, maxiter=500)
    if ell >= 1.0:
        return float(sigma_m)
    sigma_l1 = ell / (math.sqrt(2.0) * float(erfinv(ell**2)))
    return float(max(sigma_m, sigma_l1))


def theoretical_deviation(config: SgdSimConfig, variance: float) -> float:
    """Expected squared weight deviation c1 * Var(epsilon) + c2."""
    return config.c1 * variance + config.c2


def _simulate_trials(
    spec: NoiseLossSpec, config: SgdSimConfig, seeds: Sequence[np.random.SeedSequence]
) -> np.ndarray:
    steps = config.step_sizes
    deviations = np.empty(len(seeds))
    for index, seed in enumerate(seeds):
        rng = np.random.default_rng(seed)
        w0 = rng.normal(0.0, math.sqrt(config.var_w0), size=config.dim)
        w_star = rng.normal(0.0, math.sqrt(config.var_wstar), size=config.dim)
        features = rng.normal(0.0, 1.0, size=(config.steps, config.dim))
        eta = rng.normal(0.0, spec.sigma, size=config.steps)
        eps = np.asarray(loss_grad_wrt_noise(spec, eta))
        # each step moves by s_j * h_j * eps_j
        w = w0 - (steps * eps) @ features
        deviations[index] = float(np.sum((w - w_star) ** 2))
    return deviations


def sgd_convergence_sim(spec: NoiseLossSpec, config: SgdSimConfig) -> Tuple[float, np.ndarray]:
    """
    Monte-Carlo estimate of E||w_conv - w*||^2.

    Each trial draws w0, w*, unit-variance features h_j and noise eta_j and
    runs w_t = w_0 - sum_j s_j h_j epsilon(eta_j). Trial i always uses the
    i-th child of the root seed, so the same seed produces identical draws
    for every loss kind (common random numbers) and the result does not
    depend on the worker count.

    Args:
        spec: Loss and noise specification
        config: Simulation setup

    Returns:
        (mean squared deviation, per-trial squared deviations)
    """
    seeds = spawn_seeds(config.seed, config.trials)
    if config.workers > 1 and config.trials > 1:
        chunks = np.array_split(np.arange(config.trials), config.workers)
        with ProcessPoolExecutor(max_workers=config.workers) as executor:
            parts: List[np.ndarray] = list(
                executor.map(
                    _simulate_trials,
                    [spec] * len(chunks),
                    [config] * len(chunks),
                    [[seeds[i] for i in chunk] for chunk in chunks],
                )
            )
        deviations = np.concatenate(parts)
    else:
        deviations = _simulate_trials(spec, config, seeds)

    if not np.all(np.isfinite(deviations)):
        raise NumericalError("SGD simulation produced non-finite weights")
    mean = float(np.mean(deviations))
    logger.info(
        f"sgd sim kind={spec.kind.value} sigma={spec.sigma} ell={spec.ell}: "
        f"deviation={mean:.6g} over {config.trials} trials"
    )
    return mean, deviations


def fit_deviation_law(variances: Sequence[float], deviations: Sequence[float]) -> Tuple[float, float, float]:
    """
    Least-squares fit of deviation = c1 * Var + c2.

    Returns:
        (c1, c2, r^2)
    """
    if len(variances) < 2 or len(variances) != len(deviations):
        raise InputError("need at least two (variance, deviation) pairs")
    if np.ptp(np.asarray(variances, dtype=float)) == 0.0:
        raise NumericalError("cannot fit a line through identical variances")
    fit = stats.linregress(variances, deviations)
    return float(fit.slope), float(fit.intercept), float(fit.rvalue**2)
