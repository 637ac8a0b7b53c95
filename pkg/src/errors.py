#!/usr/bin/env python

from __future__ import annotations

from typing import Sequence


class FluxAdsError(Exception):
    """Base class for every error raised by this package."""


class NumericOverflowError(FluxAdsError, ArithmeticError):
    """A computation produced a non-finite value."""


class NotTimelikeError(FluxAdsError, ValueError):
    """An sl2 vector expected to be elliptic (timelike) is not."""


class InvalidFrameError(FluxAdsError, ValueError):
    """A linear map is not an orientation-preserving hyperbolic isometry."""


class InvalidSectionError(InvalidFrameError):
    """A section b does not give an isometric frame for reconstruction."""


class FrameError(FluxAdsError, ValueError):
    """A vector frame is not orthonormal or not positively oriented."""


class ConsistencyError(FluxAdsError, RuntimeError):
    """Two independent computations of the same quantity disagree."""


class ReductionError(FluxAdsError, RuntimeError):
    """Fundamental-domain reduction hit its word-length cap."""


class SolverError(FluxAdsError, RuntimeError):
    """A sparse linear solve did not converge."""

    def __init__(self, message: str, residual: float) -> None:
        super().__init__(f"{message} (residual={residual:.3e})")
        self.residual = residual


class DegeneracyError(FluxAdsError, ValueError):
    """A matrix expected to be positive definite is not."""


class ObstructionError(FluxAdsError, ValueError):
    """Periods of eta are not in 2*pi*Z, so no trivializing angle exists."""

    def __init__(self, message: str, periods: Sequence[float]) -> None:
        super().__init__(f"{message}: periods={[float(p) for p in periods]}")
        self.periods = tuple(float(p) for p in periods)


class NotSpacelikeError(FluxAdsError, ValueError):
    """The induced metric of an immersion is not positive definite."""

    def __init__(self, message: str, worst_point: complex) -> None:
        super().__init__(f"{message} (worst point {worst_point})")
        self.worst_point = worst_point


class ProjectionDegenerateError(FluxAdsError, RuntimeError):
    """Newton inversion of a Gauss-map projection failed."""

    def __init__(self, message: str, point: complex) -> None:
        super().__init__(f"{message} (at {point})")
        self.point = point


class TrConditionError(FluxAdsError, ValueError):
    """id + J B is near-singular, i.e. the condition tr b != -2 fails."""


class ConfigError(FluxAdsError, ValueError):
    """A scenario file does not match the schema."""

    def __init__(self, message: str, diagnostics: Sequence[str] = ()) -> None:
        detail = "; ".join(diagnostics)
        super().__init__(f"{message}: {detail}" if detail else message)
        self.diagnostics = list(diagnostics)
