"""Training paradigms and the alternating self-paced loop.

Five paradigms share one entry point, ``run_training``:

    ML               uniform mini-batches over the whole train set
    NAIVE_CL         staged exposure, easy rounds first, cumulatively grown
    REVERSE_CL       staged exposure starting from the hardest round
    RANDOM_ORDER_CL  staged exposure in a seed-determined round order
    SPCL             uniform batches with per-sample weights, alternating
                     weighted SGD with closed-form/projected weight updates

The self-paced loop follows the alternating scheme: hold the weights fixed
for a block of weighted SGD iterations, then recompute every per-sample loss
with the current parameters, solve the constrained weight subproblem, and
raise the pace threshold. Weights enter through the loss; batch sampling
stays uniform. Runs are bitwise reproducible for a fixed seed, and an SPCL
run whose weights stay pinned at one reproduces the ML run exactly.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from spcl.core import (
    CurriculumRegion,
    PaceState,
    SelfPacedScheme,
    SubproblemDidNotConverge,
    region_from_curriculum,
    solve_weight_subproblem,
    update_lambda,
)
from spcl.learners import (
    LabeledExample,
    PredictorSpec,
    evaluate,
    init_parameters,
    per_sample_loss,
    weighted_sgd_step,
)
from spcl.tasks.bucketing import N_ROUNDS

__all__ = [
    "ParadigmKind",
    "Paradigm",
    "TrainConfig",
    "EpochRecord",
    "TrainTrace",
    "TrainResult",
    "initialize_weights",
    "exposure_set",
    "sample_batch",
    "run_training",
    "loss_gap_series",
    "convergence_check",
]

ALL_ROUNDS = frozenset(range(1, N_ROUNDS + 1))
WEIGHT_FEASIBILITY_SLACK = 1e-6


class ParadigmKind(enum.Enum):
    ML = "ml"
    NAIVE_CL = "naive_cl"
    SPCL = "spcl"
    REVERSE_CL = "reverse_cl"
    RANDOM_ORDER_CL = "random_order_cl"


_STAGED = {ParadigmKind.NAIVE_CL, ParadigmKind.REVERSE_CL, ParadigmKind.RANDOM_ORDER_CL}


@dataclass(frozen=True)
class Paradigm:
    """A training paradigm plus its scheme-specific hyperparameters.

    SPCL requires scheme, w0, mu, and c_fraction. update_interval is the
    number of SGD iterations between weight updates (defaults to one epoch)
    and lambda0 is the initial pace threshold. Staged paradigms may pin
    stage_epochs; by default stages split the epoch budget into equal fifths.
    """

    kind: ParadigmKind
    scheme: SelfPacedScheme | None = None
    w0: float | None = None
    mu: float | None = None
    c_fraction: float | None = None
    update_interval: int | None = None
    lambda0: float = 2.0
    stage_epochs: int | None = None

    def __post_init__(self) -> None:
        if self.kind is ParadigmKind.SPCL:
            if self.scheme is None or self.w0 is None or self.mu is None or self.c_fraction is None:
                raise ValueError("SPCL requires scheme, w0, mu, and c_fraction")
            if not 0.0 <= self.w0 <= 1.0:
                raise ValueError(f"w0 must be in [0, 1], got {self.w0}")
            if self.mu <= 0:
                raise ValueError(f"mu must be positive, got {self.mu}")
            if not 0.95 <= self.c_fraction <= 1.0:
                raise ValueError(f"c_fraction must be in [0.95, 1], got {self.c_fraction}")
            if self.update_interval is not None and self.update_interval < 1:
                raise ValueError("update_interval must be a positive iteration count")
            if self.lambda0 <= 0:
                raise ValueError(f"lambda0 must be positive, got {self.lambda0}")
        else:
            for name in ("scheme", "w0", "mu", "c_fraction", "update_interval"):
                if getattr(self, name) is not None:
                    raise ValueError(f"{name} only applies to SPCL paradigms")
        if self.stage_epochs is not None:
            if self.kind not in _STAGED:
                raise ValueError("stage_epochs only applies to staged paradigms")
            if self.stage_epochs < 1:
                raise ValueError("stage_epochs must be positive")

    @staticmethod
    def ml() -> "Paradigm":
        return Paradigm(kind=ParadigmKind.ML)

    @staticmethod
    def naive_cl(stage_epochs: int | None = None) -> "Paradigm":
        return Paradigm(kind=ParadigmKind.NAIVE_CL, stage_epochs=stage_epochs)

    @staticmethod
    def reverse_cl(stage_epochs: int | None = None) -> "Paradigm":
        return Paradigm(kind=ParadigmKind.REVERSE_CL, stage_epochs=stage_epochs)

    @staticmethod
    def random_order_cl(stage_epochs: int | None = None) -> "Paradigm":
        return Paradigm(kind=ParadigmKind.RANDOM_ORDER_CL, stage_epochs=stage_epochs)

    @staticmethod
    def spcl(
        scheme: SelfPacedScheme,
        w0: float,
        mu: float,
        c_fraction: float = 0.95,
        update_interval: int | None = None,
        lambda0: float = 2.0,
    ) -> "Paradigm":
        return Paradigm(
            kind=ParadigmKind.SPCL,
            scheme=scheme,
            w0=w0,
            mu=mu,
            c_fraction=c_fraction,
            update_interval=update_interval,
            lambda0=lambda0,
        )


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    iterations_per_epoch: int = 200
    batch_size: int = 64
    learning_rate: float = 1e-4
    seed: int = 0

    def __post_init__(self) -> None:
        if self.epochs < 0:
            raise ValueError("epochs must be nonnegative")
        if self.iterations_per_epoch < 1 or self.batch_size < 1:
            raise ValueError("iterations_per_epoch and batch_size must be positive")
        if not (np.isfinite(self.learning_rate) and self.learning_rate > 0):
            raise ValueError("learning_rate must be positive and finite")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    min_iteration_loss: float
    max_iteration_loss: float
    eval_loss: float | None
    eval_accuracy: float | None
    mean_weight: float
    min_weight: float
    lam: float | None
    extra_metrics: dict[str, float] = field(default_factory=dict)
    warning: str | None = None


@dataclass
class TrainTrace:
    """Per-epoch training records; one entry per completed epoch."""

    records: list[EpochRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, idx):
        return self.records[idx]


@dataclass
class TrainResult:
    theta: np.ndarray
    trace: TrainTrace
    weights: np.ndarray | None = None
    pace: PaceState | None = None


def initialize_weights(rounds, w0: float) -> np.ndarray:
    """Initial sample weights: one for rounds 1 and 2, w0 for rounds 3..5."""
    rounds = np.asarray(rounds)
    if rounds.ndim != 1 or rounds.size == 0:
        raise ValueError("rounds must be a nonempty 1-d vector")
    if np.any(rounds < 1) or np.any(rounds > N_ROUNDS):
        raise ValueError(f"rounds must lie in 1..{N_ROUNDS}")
    if not 0.0 <= w0 <= 1.0:
        raise ValueError(f"w0 must be in [0, 1], got {w0}")
    return np.where(rounds <= 2, 1.0, float(w0))


def _stage_index(paradigm: Paradigm, epoch: int, total_epochs: int) -> int:
    if paradigm.stage_epochs is not None:
        return min(N_ROUNDS - 1, epoch // paradigm.stage_epochs)
    return min(N_ROUNDS - 1, (epoch * N_ROUNDS) // total_epochs)


def exposure_set(
    paradigm: Paradigm,
    epoch: int,
    total_epochs: int,
    round_order: Sequence[int] | None = None,
) -> frozenset[int]:
    """Rounds the paradigm trains on at this epoch.

    ML and SPCL always see everything. Staged paradigms expose cumulative
    unions of rounds: ascending for naive CL, descending for reverse CL, and
    in the given seed-determined permutation for random-order CL.
    """
    if total_epochs < 1 or not 0 <= epoch < total_epochs:
        raise ValueError(f"epoch {epoch} outside 0..{total_epochs - 1}")
    if paradigm.kind in (ParadigmKind.ML, ParadigmKind.SPCL):
        return ALL_ROUNDS
    stage = _stage_index(paradigm, epoch, total_epochs)
    if paradigm.kind is ParadigmKind.NAIVE_CL:
        return frozenset(range(1, stage + 2))
    if paradigm.kind is ParadigmKind.REVERSE_CL:
        return frozenset(range(N_ROUNDS - stage, N_ROUNDS + 1))
    if round_order is None:
        raise ValueError("random-order CL needs the run's round permutation")
    if sorted(round_order) != list(range(1, N_ROUNDS + 1)):
        raise ValueError(f"round_order must permute 1..{N_ROUNDS}, got {round_order}")
    return frozenset(round_order[: stage + 1])


def sample_batch(
    dataset: Sequence[LabeledExample],
    allowed_rounds: frozenset[int] | set[int],
    batch_size: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Uniform-with-replacement sample indices from the allowed rounds."""
    if batch_size < 1:
        raise ValueError("batch_size must be positive")
    allowed_idx = np.flatnonzero(
        np.fromiter((ex.round in allowed_rounds for ex in dataset), bool, len(dataset))
    )
    if allowed_idx.size == 0:
        raise ValueError(f"no samples in allowed rounds {sorted(allowed_rounds)}")
    return allowed_idx[rng.integers(0, allowed_idx.size, size=batch_size)]


def _spcl_weight_update(
    paradigm: Paradigm,
    spec: PredictorSpec,
    theta: np.ndarray,
    dataset: Sequence[LabeledExample],
    region: CurriculumRegion,
    pace: PaceState,
):
    """Fresh full-pass losses, then the constrained weight update and pace bump."""
    losses = np.fromiter(
        (per_sample_loss(spec, theta, ex) for ex in dataset), float, len(dataset)
    )
    warning = None
    try:
        weights = solve_weight_subproblem(paradigm.scheme, losses, pace.lam, region)
    except SubproblemDidNotConverge as err:
        weights = err.last_iterate
        warning = str(err)
    if not region.contains(weights, slack=WEIGHT_FEASIBILITY_SLACK):
        raise AssertionError("weight update left the curriculum region")
    pace = update_lambda(pace, float(np.max(losses)))
    return weights, pace, warning


def run_training(
    paradigm: Paradigm,
    spec: PredictorSpec,
    train_set: Sequence[LabeledExample],
    config: TrainConfig,
    eval_set: Sequence[LabeledExample] | None = None,
    region_builder: Callable[[np.ndarray], CurriculumRegion] | None = None,
    eval_hook: Callable[[np.ndarray], dict[str, float]] | None = None,
) -> TrainResult:
    """Train a predictor under the given paradigm and record a trace.

    Batches come from ``sample_batch`` over the paradigm's exposure set.
    The recorded iteration loss is the batch training objective, i.e. the
    weighted mean of per-sample losses (weights are identically one outside
    SPCL). ``eval_hook`` may compute extra held-out metrics per epoch, e.g.
    rollout success rates. A weight-subproblem failure downgrades to a trace
    warning and training continues from the solver's last iterate.
    """
    train_set = list(train_set)
    if not train_set:
        raise ValueError("train_set must be nonempty")
    rounds = np.array([ex.round for ex in train_set])

    theta = init_parameters(spec, config.seed)
    batch_rng = np.random.default_rng((config.seed, 1))

    round_order = None
    if paradigm.kind is ParadigmKind.RANDOM_ORDER_CL:
        order_rng = np.random.default_rng((config.seed, 2))
        round_order = tuple(int(r) for r in order_rng.permutation(N_ROUNDS) + 1)

    is_spcl = paradigm.kind is ParadigmKind.SPCL
    weights = np.ones(len(train_set))
    region = None
    pace = None
    update_interval = None
    if is_spcl:
        if region_builder is None:
            region = region_from_curriculum(rounds, paradigm.c_fraction)
        else:
            region = region_builder(rounds)
        weights = initialize_weights(rounds, paradigm.w0)
        pace = PaceState(paradigm.lambda0, paradigm.mu)
        update_interval = paradigm.update_interval or config.iterations_per_epoch

    trace = TrainTrace()
    iterations_since_update = 0
    for epoch in range(config.epochs):
        allowed = exposure_set(paradigm, epoch, config.epochs, round_order=round_order)
        iter_losses = np.empty(config.iterations_per_epoch)
        warning = None
        for it in range(config.iterations_per_epoch):
            idx = sample_batch(train_set, allowed, config.batch_size, batch_rng)
            batch = [train_set[i] for i in idx]
            batch_weights = weights[idx]
            batch_losses = [per_sample_loss(spec, theta, ex) for ex in batch]
            iter_losses[it] = float(np.mean(batch_weights * np.asarray(batch_losses)))
            theta = weighted_sgd_step(
                spec, theta, batch, batch_weights, config.learning_rate
            )
            if is_spcl:
                iterations_since_update += 1
                if iterations_since_update >= update_interval:
                    weights, pace, update_warning = _spcl_weight_update(
                        paradigm, spec, theta, train_set, region, pace
                    )
                    warning = update_warning or warning
                    iterations_since_update = 0

        eval_loss = eval_accuracy = None
        if eval_set is not None:
            metrics = evaluate(spec, theta, eval_set)
            eval_loss = metrics["mean_loss"]
            eval_accuracy = metrics["accuracy"]
        extra = dict(eval_hook(theta)) if eval_hook is not None else {}
        trace.records.append(
            EpochRecord(
                epoch=epoch,
                min_iteration_loss=float(np.min(iter_losses)),
                max_iteration_loss=float(np.max(iter_losses)),
                eval_loss=eval_loss,
                eval_accuracy=eval_accuracy,
                mean_weight=float(np.mean(weights)),
                min_weight=float(np.min(weights)),
                lam=(pace.lam if pace is not None else None),
                extra_metrics=extra,
                warning=warning,
            )
        )

    return TrainResult(theta=theta, trace=trace, weights=weights if is_spcl else None, pace=pace)


def loss_gap_series(trace: TrainTrace) -> np.ndarray:
    """Per-epoch max minus min iteration loss."""
    if len(trace) == 0:
        raise ValueError("trace is empty")
    return np.array([r.max_iteration_loss - r.min_iteration_loss for r in trace])


def convergence_check(trace: TrainTrace, window: int, tol: float) -> bool:
    """True when the mean eval loss over the last window epochs moved by
    less than tol compared with the window of epochs before it."""
    if window < 2:
        raise ValueError("window must be at least 2")
    if len(trace) < 2 * window:
        raise ValueError(f"need at least {2 * window} epochs, trace has {len(trace)}")
    series = [r.eval_loss for r in trace]
    if any(v is None for v in series):
        raise ValueError("trace has no eval-loss series to check")
    last = float(np.mean(series[-window:]))
    prev = float(np.mean(series[-2 * window : -window]))
    return abs(last - prev) < tol
