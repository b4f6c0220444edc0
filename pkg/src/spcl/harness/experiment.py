"""Experiment matrix runner and report tables.

Every (paradigm x seed) cell trains one model and writes one trace file
(CSV, one row per epoch). The summary table is recomputed from those trace
files, so every printed number can be re-derived from what is on disk.
Numbers are pinned to six significant digits, which together with seeded
determinism makes reruns byte-identical.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from spcl.harness.config import (
    DATA_SEED_OFFSET,
    EVAL_SEED_OFFSET,
    ExperimentConfig,
    NavgridParams,
    SyntheticParams,
)
from spcl.learners import PredictorKind, PredictorSpec
from spcl.tasks import (
    EpisodeResult,
    NavFeaturizer,
    classify_first_error,
    generate_nav_dataset,
    generate_room_grid,
    generate_synthetic_dataset,
    imitation_examples,
    nav_predictor_spec,
    rollout_policy,
    success_rate_by_round,
)
from spcl.trainer import ParadigmKind, TrainConfig, TrainResult, loss_gap_series, run_training

__all__ = [
    "RunArtifact",
    "ReportRow",
    "ReportTable",
    "run_experiment",
    "compare_report",
    "emit_plot_series",
    "load_artifacts",
    "read_trace",
    "resolve_output_dir",
]

OUTPUT_ROOT_ENV = "SPCL_OUTPUT_ROOT"

TRACE_COLUMNS = (
    "epoch",
    "min_iteration_loss",
    "max_iteration_loss",
    "eval_loss",
    "eval_accuracy",
    "success_rate",
    "lambda",
    "mean_weight",
    "min_weight",
    "warning",
)

SERIES_COLUMNS = (
    "epoch",
    "eval_loss",
    "eval_accuracy",
    "success_rate",
    "min_iteration_loss",
    "max_iteration_loss",
    "loss_gap",
    "lambda",
    "mean_weight",
)


def _fmt(value) -> str:
    if value is None:
        return ""
    return f"{value:.6g}"


@dataclass
class RunArtifact:
    """One cell of the experiment matrix."""

    task: str
    paradigm_name: str
    seed: int
    trace_path: str | None
    paradigm_kind: str = ""
    final_metrics: dict[str, float] = field(default_factory=dict)
    error: str | None = None

    @property
    def run_id(self) -> str:
        return f"{self.task}_{self.paradigm_name}_seed{self.seed}"

    @property
    def failed(self) -> bool:
        return self.error is not None


def resolve_output_dir(config: ExperimentConfig, base_dir: str | os.PathLike | None = None) -> Path:
    """Experiment directory, honoring the output-root environment override."""
    out = Path(config.output_dir)
    if out.is_absolute():
        return out
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root:
        return Path(root) / out
    if base_dir is not None:
        return Path(base_dir) / out
    return out


def _check_writable(directory: Path) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    probe = directory / ".write-probe"
    try:
        probe.touch()
        probe.unlink()
    except OSError as err:
        raise OSError(f"output directory {directory} is not writable: {err}") from err


class _SyntheticTask:
    def __init__(self, params: SyntheticParams):
        self.params = params

    def build(self, seed: int):
        train = generate_synthetic_dataset(
            self.params.n_per_round, seed=seed + DATA_SEED_OFFSET
        ).samples
        # Held-out eval uses the lowest-noise split: every round shares the
        # same trend, so the round-1 loss tracks parameter error directly
        # instead of being dominated by the hard rounds' label noise.
        eval_set = generate_synthetic_dataset(
            self.params.eval_per_round, seed=seed + EVAL_SEED_OFFSET
        ).splits[1]
        spec = PredictorSpec(
            kind=PredictorKind.LINEAR_REGRESSION, input_dim=len(train[0].x)
        )
        return spec, train, eval_set, None, {}


class _NavgridTask:
    def __init__(self, params: NavgridParams):
        self.params = params
        self.world = generate_room_grid(
            params.rooms_x,
            params.rooms_y,
            params.room_size,
            params.door_density,
            seed=params.world_seed,
        )
        self.featurizer = NavFeaturizer.for_world(self.world, window=params.window)
        self.spec = nav_predictor_spec(self.world, params.hidden_dim, params.window)
        counts = {r: params.train_per_round for r in range(1, 6)}
        self.eval_counts = {r: params.eval_per_round for r in range(1, 6)}
        self.counts = counts

    def _rollout_all(self, theta, nav_samples):
        results = []
        for sample in nav_samples:
            budget = 2 * len(sample.gt_trajectory) + 4
            out = rollout_policy(
                self.spec, theta, self.world, sample, budget, self.featurizer
            )
            kind = classify_first_error(
                out.trajectory, sample.gt_trajectory, self.world, sample.goal
            )
            results.append(
                EpisodeResult(round=sample.round, success=out.success, first_error=kind)
            )
        return results

    def build(self, seed: int):
        train_nav = generate_nav_dataset(self.world, self.counts, seed=seed + DATA_SEED_OFFSET)
        eval_nav = generate_nav_dataset(self.world, self.eval_counts, seed=seed + EVAL_SEED_OFFSET)
        train = imitation_examples(self.world, train_nav, self.featurizer)
        eval_set = imitation_examples(self.world, eval_nav, self.featurizer)
        eval_samples = eval_nav.samples

        def success_hook(theta) -> dict[str, float]:
            results = self._rollout_all(theta, eval_samples)
            return {"success_rate": float(np.mean([r.success for r in results]))}

        def final_metrics(theta) -> dict[str, float]:
            results = self._rollout_all(theta, eval_samples)
            metrics = {}
            for r, rate in success_rate_by_round(results).items():
                metrics[f"success_round_{r}"] = rate
            kinds = [res.first_error.value for res in results]
            for kind in ("in", "cross", "others", "none"):
                metrics[f"first_error_{kind}"] = kinds.count(kind) / len(kinds)
            return metrics

        return self.spec, train, eval_set, success_hook, {"final_hook": final_metrics}


def _make_task(config: ExperimentConfig):
    if config.task == "navgrid":
        return _NavgridTask(config.task_params)
    return _SyntheticTask(config.task_params)


def _write_trace(path: Path, result: TrainResult) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for rec in result.trace:
            writer.writerow(
                [
                    rec.epoch,
                    _fmt(rec.min_iteration_loss),
                    _fmt(rec.max_iteration_loss),
                    _fmt(rec.eval_loss),
                    _fmt(rec.eval_accuracy),
                    _fmt(rec.extra_metrics.get("success_rate")),
                    _fmt(rec.lam),
                    _fmt(rec.mean_weight),
                    _fmt(rec.min_weight),
                    rec.warning or "",
                ]
            )


def read_trace(path: str | os.PathLike) -> list[dict]:
    """Parse a trace CSV back into per-epoch dicts (floats or None)."""
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for raw in csv.DictReader(fh):
            row: dict = {"warning": raw["warning"] or None, "epoch": int(raw["epoch"])}
            for key in TRACE_COLUMNS[1:-1]:
                row[key] = float(raw[key]) if raw[key] else None
            rows.append(row)
    return rows


def _run_cell(config: ExperimentConfig, task, name: str, seed: int):
    spec, train, eval_set, hook, extras = task.build(seed)
    train_config = TrainConfig(
        epochs=config.train.epochs,
        iterations_per_epoch=config.train.iterations_per_epoch,
        batch_size=config.train.batch_size,
        learning_rate=config.train.learning_rate,
        seed=seed,
    )
    result = run_training(
        config.paradigms[name],
        spec,
        train,
        train_config,
        eval_set=eval_set,
        eval_hook=hook,
    )
    metrics: dict[str, float] = {}
    if len(result.trace) > 0:
        last = result.trace[-1]
        metrics["final_eval_loss"] = last.eval_loss
        metrics["final_accuracy"] = last.eval_accuracy
        if "success_rate" in last.extra_metrics:
            metrics["final_success_rate"] = last.extra_metrics["success_rate"]
        metrics["loss_gap_area"] = float(np.sum(loss_gap_series(result.trace)))
        if "final_hook" in extras:
            metrics.update(extras["final_hook"](result.theta))
    return result, metrics


def run_experiment(
    config: ExperimentConfig, base_dir: str | os.PathLike | None = None
) -> list[RunArtifact]:
    """Execute the full paradigm x seed matrix and write all outputs.

    Per-run failures are recorded on their artifact and do not stop sibling
    runs. Outputs (trace files, summary.csv, runs.json) are byte-identical
    across reruns of the same config.
    """
    exp_dir = resolve_output_dir(config, base_dir)
    _check_writable(exp_dir)
    traces_dir = exp_dir / "traces"
    traces_dir.mkdir(exist_ok=True)

    task = _make_task(config)
    artifacts: list[RunArtifact] = []
    for name in config.paradigms:
        kind = config.paradigms[name].kind.value
        for seed in config.seeds:
            trace_path = traces_dir / f"{name}_seed{seed}.csv"
            try:
                result, metrics = _run_cell(config, task, name, seed)
                _write_trace(trace_path, result)
                artifacts.append(
                    RunArtifact(
                        task=config.task,
                        paradigm_name=name,
                        seed=seed,
                        trace_path=str(trace_path),
                        paradigm_kind=kind,
                        final_metrics=metrics,
                    )
                )
            except Exception as err:  # noqa: BLE001 - crash isolation per cell
                artifacts.append(
                    RunArtifact(
                        task=config.task,
                        paradigm_name=name,
                        seed=seed,
                        trace_path=None,
                        paradigm_kind=kind,
                        error=f"{type(err).__name__}: {err}",
                    )
                )

    table = compare_report(artifacts)
    (exp_dir / "summary.csv").write_text(table.to_csv(), encoding="utf-8")
    manifest = {
        "task": config.task,
        "paradigms": list(config.paradigms),
        "seeds": list(config.seeds),
        "runs": [
            {
                "paradigm": a.paradigm_name,
                "kind": a.paradigm_kind,
                "seed": a.seed,
                "trace": (os.path.relpath(a.trace_path, exp_dir) if a.trace_path else None),
                "error": a.error,
                "final_metrics": {k: a.final_metrics[k] for k in sorted(a.final_metrics)},
            }
            for a in artifacts
        ],
    }
    (exp_dir / "runs.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return artifacts


def load_artifacts(exp_dir: str | os.PathLike) -> list[RunArtifact]:
    """Rebuild artifacts from an experiment directory's manifest."""
    exp_dir = Path(exp_dir)
    manifest = json.loads((exp_dir / "runs.json").read_text(encoding="utf-8"))
    out = []
    for run in manifest["runs"]:
        out.append(
            RunArtifact(
                task=manifest["task"],
                paradigm_name=run["paradigm"],
                seed=run["seed"],
                trace_path=(str(exp_dir / run["trace"]) if run["trace"] else None),
                paradigm_kind=run.get("kind", ""),
                final_metrics=run["final_metrics"],
                error=run["error"],
            )
        )
    return out


def _eval_series(rows: list[dict]) -> list[float]:
    return [r["eval_loss"] for r in rows]


def _epochs_to_threshold(rows: list[dict], threshold: float) -> int | None:
    """Epochs until the eval loss durably attains the threshold.

    Counts to the first epoch from which the loss stays at or below the
    threshold through the end of the run; a transient noise dip does not
    count as having reached the level.
    """
    series = _eval_series(rows)
    if any(v is None for v in series):
        return None
    start = None
    for i, value in enumerate(series):
        if value <= threshold:
            if start is None:
                start = i + 1
        else:
            start = None
    return start


@dataclass
class ReportRow:
    paradigm: str
    n_seeds: int
    n_failed: int
    score_mean: float | None
    score_se: float | None
    loss_mean: float | None
    loss_se: float | None
    gap_area_mean: float | None
    epochs_to_threshold: float | None


@dataclass
class ReportTable:
    rows: list[ReportRow]
    score_name: str

    def to_csv(self) -> str:
        header = (
            "paradigm,n_seeds,n_failed,score_mean,score_se,"
            "loss_mean,loss_se,gap_area_mean,epochs_to_threshold"
        )
        lines = [header]
        for r in self.rows:
            lines.append(
                ",".join(
                    [
                        r.paradigm,
                        str(r.n_seeds),
                        str(r.n_failed),
                        _fmt(r.score_mean),
                        _fmt(r.score_se),
                        _fmt(r.loss_mean),
                        _fmt(r.loss_se),
                        _fmt(r.gap_area_mean),
                        _fmt(r.epochs_to_threshold),
                    ]
                )
            )
        return "\n".join(lines) + "\n"

    def __str__(self) -> str:
        head = (
            f"{'paradigm':<16} {'seeds':>5} {'fail':>4} "
            f"{self.score_name + ' (se)':>22} {'loss (se)':>22} "
            f"{'gap area':>10} {'ep->thr':>8}"
        )
        lines = [head, "-" * len(head)]
        for r in self.rows:
            score = f"{_fmt(r.score_mean)} ({_fmt(r.score_se)})" if r.score_mean is not None else "-"
            loss = f"{_fmt(r.loss_mean)} ({_fmt(r.loss_se)})" if r.loss_mean is not None else "-"
            lines.append(
                f"{r.paradigm:<16} {r.n_seeds:>5} {r.n_failed:>4} "
                f"{score:>22} {loss:>22} "
                f"{_fmt(r.gap_area_mean) if r.gap_area_mean is not None else '-':>10} "
                f"{_fmt(r.epochs_to_threshold) if r.epochs_to_threshold is not None else '-':>8}"
            )
        return "\n".join(lines)


def _mean_se(values: list[float]) -> tuple[float | None, float | None]:
    if not values:
        return None, None
    arr = np.asarray(values, dtype=float)
    mean = float(np.mean(arr))
    if arr.size < 2:
        return mean, 0.0
    return mean, float(np.std(arr, ddof=1) / np.sqrt(arr.size))


def compare_report(artifacts: list[RunArtifact]) -> ReportTable:
    """Aggregate final metrics per paradigm, recomputed from trace files.

    Scores are rollout success rates when the traces carry them, accuracy
    otherwise. Epochs-to-threshold uses the same-seed run of the first
    paradigm named with kind ml as the per-seed loss threshold, counting the
    first epoch whose eval loss falls below that run's final eval loss.
    """
    if not artifacts:
        raise ValueError("no artifacts to report")

    traces: dict[tuple[str, int], list[dict]] = {}
    for a in artifacts:
        if not a.failed and a.trace_path:
            traces[(a.paradigm_name, a.seed)] = read_trace(a.trace_path)

    has_success = any(
        rows and rows[-1]["success_rate"] is not None for rows in traces.values()
    )
    score_key = "success_rate" if has_success else "eval_accuracy"

    # per-seed loss thresholds from the uniform-training baseline
    paradigm_order: list[str] = []
    for a in artifacts:
        if a.paradigm_name not in paradigm_order:
            paradigm_order.append(a.paradigm_name)
    ml_name = next(
        (a.paradigm_name for a in artifacts if a.paradigm_kind == ParadigmKind.ML.value),
        None,
    )
    thresholds: dict[int, float] = {}
    if ml_name is not None:
        for (name, seed), rows in traces.items():
            if name == ml_name and rows and rows[-1]["eval_loss"] is not None:
                thresholds[seed] = rows[-1]["eval_loss"]

    report_rows = []
    for name in paradigm_order:
        cells = [a for a in artifacts if a.paradigm_name == name]
        ok = [a for a in cells if not a.failed]
        scores, losses, gaps, e2t = [], [], [], []
        for a in ok:
            rows = traces.get((a.paradigm_name, a.seed), [])
            if not rows:
                continue
            last = rows[-1]
            if last[score_key] is not None:
                scores.append(last[score_key])
            if last["eval_loss"] is not None:
                losses.append(last["eval_loss"])
            gaps.append(
                float(
                    np.sum(
                        [r["max_iteration_loss"] - r["min_iteration_loss"] for r in rows]
                    )
                )
            )
            if a.seed in thresholds:
                reached = _epochs_to_threshold(rows, thresholds[a.seed])
                if reached is not None:
                    e2t.append(float(reached))
        score_mean, score_se = _mean_se(scores)
        loss_mean, loss_se = _mean_se(losses)
        gap_mean, _ = _mean_se(gaps)
        e2t_mean, _ = _mean_se(e2t)
        report_rows.append(
            ReportRow(
                paradigm=name,
                n_seeds=len(cells),
                n_failed=len(cells) - len(ok),
                score_mean=score_mean,
                score_se=score_se,
                loss_mean=loss_mean,
                loss_se=loss_se,
                gap_area_mean=gap_mean,
                epochs_to_threshold=e2t_mean,
            )
        )
    return ReportTable(rows=report_rows, score_name=score_key)


def emit_plot_series(artifact: RunArtifact, out_path: str | os.PathLike | None = None) -> Path:
    """Write the plot-ready per-epoch series next to the trace file."""
    if artifact.trace_path is None or not os.path.exists(artifact.trace_path):
        raise FileNotFoundError(f"run {artifact.run_id} has no trace file")
    rows = read_trace(artifact.trace_path)
    if out_path is None:
        trace = Path(artifact.trace_path)
        out_path = trace.with_name(trace.stem + ".series.csv")
    out_path = Path(out_path)
    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SERIES_COLUMNS)
        for r in rows:
            gap = r["max_iteration_loss"] - r["min_iteration_loss"]
            writer.writerow(
                [
                    r["epoch"],
                    _fmt(r["eval_loss"]),
                    _fmt(r["eval_accuracy"]),
                    _fmt(r["success_rate"]),
                    _fmt(r["min_iteration_loss"]),
                    _fmt(r["max_iteration_loss"]),
                    _fmt(gap),
                    _fmt(r["lambda"]),
                    _fmt(r["mean_weight"]),
                ]
            )
    return out_path
