"""Synthetic difficulty-stratified regression data.

Targets share one learnable linear trend across all rounds. On top of it,
round k >= 2 adds a degree-k Chebyshev polynomial of the first feature with
a per-sample random sign, scaled so the deviation variance grows roughly as
0.25 * round^2, plus Gaussian noise whose scale also grows with the round.
Chebyshev polynomials oscillate with near-unit magnitude, so a hard round
contributes a broad band of large losses rather than a few outliers: as the
pace threshold rises it admits that band gradually, easy rounds first, which
is exactly the staging self-paced training is supposed to exploit. The first
feature runs over a fixed uniform grid (endpoints included) to pin each
round's loss range consistently across seeds.

The random sign keeps every deviation symmetric around the trend, so the
best linear predictor of every round, and of any loss-thresholded subset of
a round, is exactly the shared trend. Harder rounds are harder purely
because their targets carry more irreducible spread; downweighting them
costs nothing toward the shared optimum.
"""

from __future__ import annotations

import numpy as np
from numpy.polynomial import chebyshev

from spcl.learners import LabeledExample
from spcl.tasks.bucketing import N_ROUNDS, StratifiedDataset

__all__ = [
    "generate_synthetic_dataset",
    "synthetic_targets",
    "trend_coefficients",
    "INPUT_DIM",
    "deviation_amplitude",
    "noise_scale",
]

INPUT_DIM = 48
TREND_SCALE = 1.2


def trend_coefficients(input_dim: int = INPUT_DIM) -> np.ndarray:
    """Shared linear trend; normalized so the trend variance is dimension-free."""
    return np.full(input_dim, TREND_SCALE / np.sqrt(input_dim))


def deviation_amplitude(round_index: int) -> float:
    """Scale of the round's Chebyshev deviation; zero for round 1."""
    k = int(round_index)
    if k <= 1:
        return 0.0
    # E[T_k(x)^2] is about 1/2 under U[-1,1], so the deviation variance
    # grows as roughly 0.245 * k^2.
    return 0.7 * k


def noise_scale(round_index: int) -> float:
    return 0.01 + 0.02 * (int(round_index) - 1)


def synthetic_targets(
    xs: np.ndarray,
    round_index: int,
    noise: np.ndarray,
    signs: np.ndarray | None = None,
) -> np.ndarray:
    """Targets for feature rows xs at the given round.

    ``noise`` holds unit Gaussian draws and ``signs`` the per-sample
    deviation signs (all +1 when omitted). The deviation polynomial acts on
    the first feature only.
    """
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    k = int(round_index)
    y = xs @ trend_coefficients(xs.shape[1])
    amp = deviation_amplitude(k)
    if amp > 0.0:
        coeffs = np.zeros(k + 1)
        coeffs[k] = 1.0
        dev = amp * chebyshev.chebval(xs[:, 0], coeffs)
        y = y + (dev if signs is None else signs * dev)
    return y + noise_scale(k) * noise


def generate_synthetic_dataset(
    n_per_round: int, seed: int, input_dim: int = INPUT_DIM
) -> StratifiedDataset:
    """Stratified regression dataset with n_per_round samples in each round.

    The first feature runs over a fixed uniform grid on [-1, 1]; remaining
    features, deviation signs, and noise are drawn from the seed.
    """
    if n_per_round < 1:
        raise ValueError(f"n_per_round must be >= 1, got {n_per_round}")
    if input_dim < 1:
        raise ValueError(f"input_dim must be >= 1, got {input_dim}")
    rng = np.random.default_rng(seed)
    splits: dict[int, list[LabeledExample]] = {}
    for k in range(1, N_ROUNDS + 1):
        xs = rng.uniform(-1.0, 1.0, (n_per_round, input_dim))
        if n_per_round > 1:
            xs[:, 0] = np.linspace(-1.0, 1.0, n_per_round)
        else:
            xs[:, 0] = 0.0
        signs = rng.choice([-1.0, 1.0], n_per_round)
        noise = rng.standard_normal(n_per_round)
        y = synthetic_targets(xs, k, noise, signs)
        splits[k] = [
            LabeledExample(x=xs[i], y=float(y[i]), round=k)
            for i in range(n_per_round)
        ]
    return StratifiedDataset(splits=splits, seed=seed)
