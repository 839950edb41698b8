"""Exception hierarchy. Each class carries the CLI exit code it maps to."""

from __future__ import annotations


class ArtifactError(Exception):
    exit_code = 1


class ConfigError(ArtifactError):
    exit_code = 2


class UnsupportedError(ArtifactError):
    exit_code = 3


class SolverError(ArtifactError):
    exit_code = 4


class QuadratureError(ArtifactError):
    exit_code = 5


# solvers and geometry
class NoConvergence(SolverError):
    pass


class SingularJacobian(SolverError):
    pass


class OutOfChart(SolverError):
    pass


class SplitInvalid(SolverError):
    pass


class BolkerViolated(SolverError):
    pass


class NondegeneracyViolated(SolverError):
    pass


class DegenerateStationaryPoint(SolverError):
    pass


class StepTooLarge(QuadratureError):
    pass


# special functions and predictors
class PoleOrder(UnsupportedError):
    pass


class UnsupportedKappa(UnsupportedError):
    pass


class MissingInteriorValue(ConfigError):
    pass


class EvalAtSingularity(ArtifactError):
    pass


# sampling and transforms
class WindowTooSmall(ConfigError):
    pass


class OutOfWindow(ArtifactError):
    pass


class GridTooCoarse(ConfigError):
    pass


class NyquistViolated(ConfigError):
    pass


class ChartExceeded(SolverError):
    pass


class QuadratureFailure(QuadratureError):
    pass


class NonConvergentExtrapolation(QuadratureError):
    pass


class SlowDecay(QuadratureError):
    pass


# harness
class DegenerateFit(ArtifactError):
    pass


class IoFailure(ConfigError):
    pass
