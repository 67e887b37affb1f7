"""Score-function task vocabulary.

A task names which time-varying score a source must produce for a partitioned
sample: the joint score of all variables, the score of one variable's block
conditioned on a subset of the others (held clean), the marginal score of one
block (everything else uninformative), or the joint score of the subsystem
with one variable deleted. Variables that are neither perturbed nor
conditioned on are treated as dropped: they carry maximal noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class Joint:
    """Score of the full joint density; every variable perturbed."""


@dataclass(frozen=True)
class Conditional:
    """Score of variable ``target`` given the clean values of ``given``.

    ``given`` equal to all other variables is the plain conditional; a strict
    subset is the gradient-estimation extension (variables outside
    {target} + given are dropped). An empty ``given`` coincides with
    ``Marginal(target)``.
    """

    target: int
    given: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "given", frozenset(self.given))
        if self.target in self.given:
            raise ValueError(f"target {self.target} cannot appear in its own conditioning set")


@dataclass(frozen=True)
class Marginal:
    """Score of variable ``target`` alone."""

    target: int


@dataclass(frozen=True)
class SubsystemJoint:
    """Joint score of all variables except ``excluded`` (subsystem estimates)."""

    excluded: int


ScoreTask = Joint | Conditional | Marginal | SubsystemJoint


def conditional_on_rest(i: int, n_vars: int) -> Conditional:
    return Conditional(i, frozenset(range(n_vars)) - {i})


def validate_task(task: ScoreTask, n_vars: int) -> None:
    if isinstance(task, Joint):
        return
    if isinstance(task, Conditional):
        if not 0 <= task.target < n_vars:
            raise ValueError(f"target {task.target} out of range for {n_vars} variables")
        if any(not 0 <= j < n_vars for j in task.given):
            raise ValueError("conditioning set out of range")
        return
    if isinstance(task, Marginal):
        if not 0 <= task.target < n_vars:
            raise ValueError(f"target {task.target} out of range for {n_vars} variables")
        return
    if isinstance(task, SubsystemJoint):
        if not 0 <= task.excluded < n_vars:
            raise ValueError(f"excluded {task.excluded} out of range for {n_vars} variables")
        if n_vars < 2:
            raise ValueError("subsystem task needs at least 2 variables")
        return
    raise TypeError(f"unknown task type {type(task).__name__}")


def perturbed_vars(task: ScoreTask, n_vars: int) -> tuple[int, ...]:
    """Variables noised at the query time t, in ascending order."""
    validate_task(task, n_vars)
    if isinstance(task, Joint):
        return tuple(range(n_vars))
    if isinstance(task, SubsystemJoint):
        return tuple(i for i in range(n_vars) if i != task.excluded)
    return (task.target,)


def clean_vars(task: ScoreTask, n_vars: int) -> tuple[int, ...]:
    """Variables held at their clean values (conditioning set)."""
    validate_task(task, n_vars)
    if isinstance(task, Conditional):
        return tuple(sorted(task.given))
    return ()


def dropped_vars(task: ScoreTask, n_vars: int) -> tuple[int, ...]:
    """Variables replaced by pure noise (maximal perturbation)."""
    used = set(perturbed_vars(task, n_vars)) | set(clean_vars(task, n_vars))
    return tuple(i for i in range(n_vars) if i not in used)


def task_label(task: ScoreTask) -> str:
    """Stable short name for logs and reports."""
    if isinstance(task, Joint):
        return "joint"
    if isinstance(task, Marginal):
        return f"marginal[{task.target}]"
    if isinstance(task, Conditional):
        return f"cond[{task.target}|{','.join(map(str, sorted(task.given)))}]"
    if isinstance(task, SubsystemJoint):
        return f"subjoint[-{task.excluded}]"
    raise TypeError(type(task).__name__)
