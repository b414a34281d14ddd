"""Exception types raised across the package."""

from __future__ import annotations


class ForgeError(Exception):
    """Base class for all package errors."""


class IndexOutOfRange(ForgeError):
    pass


class InvalidProbability(ForgeError):
    pass


class SpanOutOfRange(ForgeError):
    pass


class DimensionMismatch(ForgeError):
    pass


class InvalidPartition(ForgeError):
    pass


class SingularNoise(ForgeError):
    """Coefficient system has no solution for the given amplitudes."""


class DegenerateAngles(ForgeError):
    pass


class DegenerateAmplitudes(ForgeError):
    pass


class UnsupportedOrder(ForgeError):
    pass


class SameSignErrors(ForgeError):
    pass


class ScopeMismatch(ForgeError):
    pass


class SingularSystem(ForgeError):
    pass


class InvalidFactors(ForgeError):
    pass


class NoSolution(ForgeError):
    pass


class NotTabulated(ForgeError):
    pass


class ConfigError(ForgeError):
    pass
