"""Self-paced curriculum learning toolkit.

Modules:
    core      self-paced weighting math (schemes, region, projection, subproblem)
    learners  small analytic predictors with exact per-sample gradients
    trainer   alternating training loop and the competing paradigms
    tasks     synthetic stratified data and the room-grid navigation analog
    harness   experiment runner, report tables, and the command line
"""

from spcl import core, learners, tasks, trainer

__version__ = "0.1.0"

__all__ = ["core", "learners", "tasks", "trainer", "__version__"]
