"""Self-paced weighting math.

Everything a self-paced curriculum needs on the weight side: the two
regularization schemes (binary and linear) with their closed-form per-sample
weights, the linear curriculum region ``{w in [0,1]^n : a.w <= c}`` built from
difficulty ranks, Euclidean projection onto that region via dual bisection,
and the constrained weight subproblem

    min_{w in region}  sum_i w_i * loss_i + g(w; lambda)

solved by projected gradient descent with a closed-form fast path. All
functions are pure; inputs are never mutated.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SelfPacedScheme",
    "PaceState",
    "CurriculumRegion",
    "PgdParams",
    "ProjectionDidNotConverge",
    "SubproblemDidNotConverge",
    "regularizer_value",
    "closed_form_weight",
    "closed_form_weights",
    "subproblem_objective",
    "project_onto_region",
    "solve_weight_subproblem",
    "brute_force_weight_oracle",
    "update_lambda",
    "region_from_curriculum",
]

MIN_RANK = 1
MAX_RANK = 5


class SelfPacedScheme(enum.Enum):
    """Active self-paced regularizer g(w; lambda).

    BINARY uses g = -lambda * ||w||_1, whose box-unconstrained minimizer is
    the indicator w_i = 1 if loss_i <= lambda else 0. LINEAR uses
    g = lambda/2 * sum(w_i^2 - 2 w_i), whose minimizer ramps down linearly,
    w_i = max(0, 1 - loss_i / lambda).
    """

    BINARY = "binary"
    LINEAR = "linear"


class ProjectionDidNotConverge(RuntimeError):
    """Dual bisection failed to pin the constraint within tolerance.

    In practice this signals an ill-conditioned coefficient vector; with
    sane ranks the bisection converges in well under the iteration cap.
    """


class SubproblemDidNotConverge(RuntimeError):
    """Projected gradient descent hit its iteration cap before the iterate
    stopped moving. Carries the last (feasible) iterate so callers can keep
    training with it."""

    def __init__(self, last_iterate: np.ndarray, movement: float, objective: float):
        super().__init__(
            f"weight subproblem did not converge: last movement {movement:.3e}, "
            f"objective {objective:.6g}"
        )
        self.last_iterate = last_iterate
        self.movement = movement
        self.objective = objective


@dataclass(frozen=True)
class PaceState:
    """Pace threshold ``lam`` and its fixed update stepsize ``mu``.

    ``lam`` is in loss units and only ever increases; ``mu`` is constant
    over a run.
    """

    lam: float
    mu: float

    def __post_init__(self) -> None:
        if not (np.isfinite(self.lam) and self.lam > 0):
            raise ValueError(f"lam must be a positive finite real, got {self.lam}")
        if not (np.isfinite(self.mu) and self.mu > 0):
            raise ValueError(f"mu must be a positive finite real, got {self.mu}")


@dataclass(frozen=True, eq=False)
class CurriculumRegion:
    """Linear feasible set {w in [0,1]^n : a.w <= c}.

    ``a`` holds one positive coefficient per sample (harder samples get
    strictly larger coefficients), ``c`` is the total budget. w = 0 is always
    feasible since c >= 0.
    """

    a: np.ndarray
    c: float

    def __post_init__(self) -> None:
        a = np.asarray(self.a, dtype=float)
        if a.ndim != 1 or a.size == 0:
            raise ValueError("coefficient vector a must be a nonempty 1-d array")
        if not np.all(np.isfinite(a)) or np.any(a <= 0):
            raise ValueError("coefficients a must be finite and strictly positive")
        if not np.isfinite(self.c) or self.c < 0:
            raise ValueError(f"budget c must be a finite nonnegative real, got {self.c}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "c", float(self.c))

    @property
    def n(self) -> int:
        return int(self.a.size)

    def contains(self, w: np.ndarray, slack: float = 0.0) -> bool:
        w = np.asarray(w, dtype=float)
        if w.shape != self.a.shape:
            return False
        inside_box = bool(np.all(w >= -slack) and np.all(w <= 1.0 + slack))
        return inside_box and float(self.a @ w) <= self.c + slack


@dataclass(frozen=True)
class PgdParams:
    """Projected gradient descent knobs for the weight subproblem.

    ``step_size`` of None picks the default 1 / (max loss + lambda) for the
    linear scheme. The binary scheme has a constant gradient, so its default
    takes one huge step and lets the projection land on the optimal face.
    ``tol`` bounds the max componentwise movement between iterates.
    """

    step_size: float | None = None
    max_iterations: int = 500
    tol: float = 1e-8

    def __post_init__(self) -> None:
        if self.step_size is not None and not (
            np.isfinite(self.step_size) and self.step_size > 0
        ):
            raise ValueError("step_size must be positive and finite when given")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if not (np.isfinite(self.tol) and self.tol > 0):
            raise ValueError("tol must be positive and finite")


# Far-point magnitude cap for the binary scheme's default step. Large enough
# that one projected step lands within ~n/(2e5) of the linear-objective
# optimum, small enough that the dual bisection keeps full precision.
_BINARY_REACH = 1e5


def _as_weight_vector(w, name: str = "w") -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise ValueError(f"{name} must be a nonempty 1-d vector")
    if not np.all(np.isfinite(w)):
        raise ValueError(f"{name} contains non-finite entries")
    return w


def _as_loss_vector(losses) -> np.ndarray:
    losses = np.asarray(losses, dtype=float)
    if losses.ndim != 1 or losses.size == 0:
        raise ValueError("losses must be a nonempty 1-d vector")
    if not np.all(np.isfinite(losses)) or np.any(losses < 0):
        raise ValueError("losses must be finite and nonnegative")
    return losses


def _check_lambda(lam: float) -> float:
    lam = float(lam)
    if not (np.isfinite(lam) and lam > 0):
        raise ValueError(f"lambda must be a positive finite real, got {lam}")
    return lam


def regularizer_value(scheme: SelfPacedScheme, w, lam: float) -> float:
    """Value of the self-paced regularizer g(w; lambda). Always <= 0 on [0,1]^n.

    Binary: -lambda * ||w||_1. Linear: lambda/2 * sum(w_i^2 - 2 w_i).
    """
    lam = _check_lambda(lam)
    w = _as_weight_vector(w)
    if np.any(w < 0) or np.any(w > 1):
        raise ValueError("weights must lie in [0, 1]")
    if scheme is SelfPacedScheme.BINARY:
        return float(-lam * np.sum(w))
    return float(0.5 * lam * np.sum(w * w - 2.0 * w))


def closed_form_weight(scheme: SelfPacedScheme, loss: float, lam: float) -> float:
    """Box-only optimal weight for one sample (no curriculum constraint).

    Binary returns the indicator of loss <= lambda; linear ramps down,
    1 - loss/lambda until it hits zero at loss = lambda. Ties at
    loss == lambda take the indicator's value (the objective is flat there
    for the binary scheme).
    """
    lam = _check_lambda(lam)
    loss = float(loss)
    if not np.isfinite(loss) or loss < 0:
        raise ValueError(f"loss must be finite and nonnegative, got {loss}")
    if loss > lam:
        return 0.0
    if scheme is SelfPacedScheme.BINARY:
        return 1.0
    return 1.0 - loss / lam


def closed_form_weights(scheme: SelfPacedScheme, losses, lam: float) -> np.ndarray:
    """Vectorized `closed_form_weight` over a loss snapshot."""
    lam = _check_lambda(lam)
    losses = _as_loss_vector(losses)
    if scheme is SelfPacedScheme.BINARY:
        return (losses <= lam).astype(float)
    return np.where(losses <= lam, 1.0 - losses / lam, 0.0)


def subproblem_objective(scheme: SelfPacedScheme, losses, lam: float, w) -> float:
    """Weighted loss plus regularizer, the quantity the subproblem minimizes."""
    losses = _as_loss_vector(losses)
    w = _as_weight_vector(w)
    if w.shape != losses.shape:
        raise ValueError("w and losses must have matching length")
    return float(w @ losses) + regularizer_value(scheme, w, lam)


def project_onto_region(
    v,
    region: CurriculumRegion,
    tol: float = 1e-9,
    max_iterations: int = 200,
) -> np.ndarray:
    """Euclidean projection of v onto {w in [0,1]^n : a.w <= c}.

    Clips to the box first; if that already satisfies the budget it is the
    projection. Otherwise the KKT conditions give w(t) = clip(v - t*a, 0, 1)
    for a dual multiplier t > 0 with a.w(t) = c, found by bisection on the
    monotone function a.w(t) - c. The returned point always satisfies
    a.w <= c in floating point, which makes the projection exactly
    idempotent.
    """
    if not isinstance(region, CurriculumRegion):
        raise ValueError("region must be a CurriculumRegion")
    v = _as_weight_vector(np.asarray(v, dtype=float), name="v")
    a, c = region.a, region.c
    if v.shape != a.shape:
        raise ValueError(
            f"vector length {v.size} does not match region dimension {a.size}"
        )

    clipped = np.clip(v, 0.0, 1.0)
    if float(a @ clipped) <= c:
        return clipped

    def residual(t: float) -> float:
        return float(a @ np.clip(v - t * a, 0.0, 1.0)) - c

    lo = 0.0
    # At t = max(v_i / a_i) every component of v - t*a is <= 0, so the
    # clipped point is the origin and the residual is -c <= 0.
    hi = max(float(np.max(v / a)), 0.0)
    for _ in range(max_iterations):
        r_hi = residual(hi)
        if r_hi >= -tol:
            return np.clip(v - hi * a, 0.0, 1.0)
        mid = 0.5 * (lo + hi)
        if residual(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    raise ProjectionDidNotConverge(
        f"projection bisection exceeded {max_iterations} iterations "
        f"(residual {residual(hi):.3e}); coefficient vector may be ill-conditioned"
    )


def _subproblem_gradient(
    scheme: SelfPacedScheme, losses: np.ndarray, lam: float, w: np.ndarray
) -> np.ndarray:
    if scheme is SelfPacedScheme.BINARY:
        return losses - lam
    return losses + lam * (w - 1.0)


def _default_step_size(
    scheme: SelfPacedScheme,
    losses: np.ndarray,
    lam: float,
    region: CurriculumRegion,
) -> float:
    if scheme is SelfPacedScheme.BINARY:
        # The objective is linear, so every fixed point of the projected
        # step is exactly optimal and a long step converges in a handful of
        # iterations. Cap the reach so the dual bisection keeps enough
        # precision: residuals only resolve to about eps * sum(a) * |point|.
        grad_scale = max(1.0, float(np.max(np.abs(losses - lam))))
        reach = min(
            _BINARY_REACH,
            1e-8 / (np.finfo(float).eps * float(np.sum(region.a))),
        )
        return max(reach, 1.0) / grad_scale
    return 1.0 / (float(np.max(losses)) + lam)


def solve_weight_subproblem(
    scheme: SelfPacedScheme,
    losses,
    lam: float,
    region: CurriculumRegion,
    params: PgdParams | None = None,
) -> np.ndarray:
    """Minimize sum(w*losses) + g(w; lambda) over the curriculum region.

    Fast path: the componentwise closed-form weights solve the problem
    whenever they already satisfy the budget (the constraint is inactive),
    which is the common case late in training. Otherwise run projected
    gradient descent from that point, stopping when the iterate moves less
    than ``params.tol`` in any component.

    Raises SubproblemDidNotConverge (carrying the last feasible iterate)
    if the iteration cap is reached first.
    """
    lam = _check_lambda(lam)
    losses = _as_loss_vector(losses)
    if params is None:
        params = PgdParams()
    if losses.size != region.n:
        raise ValueError(
            f"loss vector length {losses.size} does not match region dimension {region.n}"
        )

    w = closed_form_weights(scheme, losses, lam)
    if float(region.a @ w) <= region.c:
        return w

    step = params.step_size
    if step is None:
        step = _default_step_size(scheme, losses, lam, region)

    eps = np.finfo(float).eps
    movement = np.inf
    for _ in range(params.max_iterations):
        grad = _subproblem_gradient(scheme, losses, lam, w)
        point = w - step * grad
        # Long steps push the pre-projection point far outside the box, where
        # the constraint residual cannot be resolved to the default absolute
        # tolerance; scale it with the point's magnitude.
        proj_tol = max(1e-9, 8.0 * eps * (float(region.a @ np.abs(point)) + region.c))
        w_next = project_onto_region(point, region, tol=proj_tol)
        movement = float(np.max(np.abs(w_next - w)))
        w = w_next
        if movement < params.tol:
            return w
    raise SubproblemDidNotConverge(
        last_iterate=w,
        movement=movement,
        objective=subproblem_objective(scheme, losses, lam, w),
    )


_MAX_ORACLE_DIM = 4


def brute_force_weight_oracle(
    scheme: SelfPacedScheme,
    losses,
    lam: float,
    region: CurriculumRegion,
    resolution: float = 1e-2,
) -> np.ndarray:
    """Exhaustive grid argmin of the subproblem objective. Test oracle only.

    Evaluates every feasible point of the uniform grid on [0,1]^n at the
    given spacing and returns the best one. Cost is exponential in n, hence
    the n <= 4 cap. Ties break toward the lexicographically smallest point.
    """
    lam = _check_lambda(lam)
    losses = _as_loss_vector(losses)
    n = losses.size
    if n > _MAX_ORACLE_DIM:
        raise ValueError(f"oracle supports n <= {_MAX_ORACLE_DIM}, got {n}")
    if n != region.n:
        raise ValueError("loss vector length does not match region dimension")
    if not (0 < resolution <= 1e-2):
        raise ValueError(f"resolution must be in (0, 1e-2], got {resolution}")

    m = int(round(1.0 / resolution)) + 1
    axis = np.linspace(0.0, 1.0, m)

    if scheme is SelfPacedScheme.BINARY:
        def reg(values: np.ndarray) -> np.ndarray:
            return -lam * values
    else:
        def reg(values: np.ndarray) -> np.ndarray:
            return 0.5 * lam * (values * values - 2.0 * values)

    # The grid is evaluated in slices over the first coordinate so that
    # memory stays O(m^(n-1)) even for n = 4.
    if n == 1:
        tail_points = np.zeros((1, 0))
        tail_obj = np.zeros(1)
        tail_budget = np.zeros(1)
    else:
        grids = np.meshgrid(*([axis] * (n - 1)), indexing="ij")
        tail_points = np.stack([g.ravel() for g in grids], axis=1)
        tail_obj = tail_points @ losses[1:] + np.sum(reg(tail_points), axis=1)
        tail_budget = tail_points @ region.a[1:]

    best_val = np.inf
    best_point: np.ndarray | None = None
    feas_eps = 1e-12
    for w0 in axis:
        obj = tail_obj + (w0 * losses[0] + float(reg(np.array([w0]))[0]))
        feasible = tail_budget + w0 * region.a[0] <= region.c + feas_eps
        if not np.any(feasible):
            continue
        obj = np.where(feasible, obj, np.inf)
        k = int(np.argmin(obj))
        if obj[k] < best_val:
            best_val = float(obj[k])
            best_point = np.concatenate(([w0], tail_points[k]))
    assert best_point is not None  # w = 0 is always feasible
    return best_point


def update_lambda(state: PaceState, max_item_loss: float) -> PaceState:
    """Advance the pace threshold after a weight update.

    Full stepsize while lambda still trails the current maximum per-sample
    loss, half stepsize otherwise (equality falls in the half branch). The
    stepsize itself never changes, so lambda strictly increases.
    """
    max_item_loss = float(max_item_loss)
    if not np.isfinite(max_item_loss) or max_item_loss < 0:
        raise ValueError(f"max_item_loss must be finite and nonnegative, got {max_item_loss}")
    if state.lam < max_item_loss:
        return PaceState(state.lam + state.mu, state.mu)
    return PaceState(state.lam + 0.5 * state.mu, state.mu)


def region_from_curriculum(ranks, c_fraction: float) -> CurriculumRegion:
    """Build the curriculum region from per-sample difficulty ranks.

    Coefficients are the ranks themselves (a_i = rank_i, so equal ranks get
    equal coefficients and harder ranks strictly larger ones) and the budget
    is c_fraction * ||a||_1 with c_fraction in [0.95, 1.0].
    """
    ranks = np.asarray(ranks)
    if ranks.ndim != 1 or ranks.size == 0:
        raise ValueError("ranks must be a nonempty 1-d vector")
    if not np.issubdtype(ranks.dtype, np.integer):
        if not np.all(ranks == np.round(ranks)):
            raise ValueError("ranks must be integers")
        ranks = ranks.astype(int)
    if np.any(ranks < MIN_RANK) or np.any(ranks > MAX_RANK):
        raise ValueError(f"ranks must lie in {{{MIN_RANK}..{MAX_RANK}}}")
    c_fraction = float(c_fraction)
    if not (0.95 <= c_fraction <= 1.0):
        raise ValueError(f"c_fraction must lie in [0.95, 1.0], got {c_fraction}")
    a = ranks.astype(float)
    return CurriculumRegion(a=a, c=c_fraction * float(np.sum(a)))
