import logging
from abc import ABC, abstractmethod


class InternalError(Exception):
    """Fatal unexpected internal errors in mictrans that should shut down the program immediately."""

    pass


class NumericError(InternalError):
    """A layer produced NaN/Inf from finite inputs."""

    pass


class ConfigError(Exception):
    """Invalid configuration, hyper-parameters or mismatched artifacts."""

    pass


class ContractError(ConfigError):
    """Artifacts were produced under different feature-extraction settings."""

    pass


class ShapeError(ConfigError):
    """Tensor or grid shapes that an operation cannot accept."""

    pass


class BatchTooSmallError(ConfigError):
    """Batch statistics requested from a batch of one."""

    pass


class DataError(Exception):
    """Problems with the audio data itself rather than with how we were asked to process it."""

    pass


class FormatError(DataError):
    pass


class UnsupportedError(DataError):
    pass


class InputTooShortError(DataError):
    pass


class InsufficientDataError(DataError):
    pass


class PairingViolationError(DataError):
    """Unpaired training was asked to run on domains sharing source clips (or paired on unaligned ones)."""

    pass


class UndefinedRecoveryError(DataError):
    pass


class BaseChecker(ABC):
    @classmethod
    @abstractmethod
    def handler(cls, msg):
        pass

    @classmethod
    def eq(cls, lhs, rhs, msg=""):
        if lhs != rhs:
            cls.handler(f"Failed assertion :: {msg} | {lhs} != {rhs}")

    @classmethod
    def gt(cls, lhs, rhs, msg=""):
        if lhs <= rhs:
            cls.handler(f"Failed assertion :: {msg} | {lhs} <= {rhs}")

    @classmethod
    def ge(cls, lhs, rhs, msg=""):
        if lhs < rhs:
            cls.handler(f"Failed assertion :: {msg} | {lhs} < {rhs}")

    @classmethod
    def lt(cls, lhs, rhs, msg=""):
        if lhs >= rhs:
            cls.handler(f"Failed assertion :: {msg} | {lhs} >= {rhs}")

    @classmethod
    def le(cls, lhs, rhs, msg=""):
        if lhs > rhs:
            cls.handler(f"Failed assertion :: {msg} | {lhs} > {rhs}")

    @classmethod
    def true(cls, cond, msg=""):
        if not cond:
            cls.handler(f"Failed assertion :: {msg} | condition is not True")

    @classmethod
    def false(cls, cond, msg=""):
        if cond:
            cls.handler(f"Failed assertion :: {msg} | condition is not False")


class SanityCheck(BaseChecker):
    @classmethod
    def handler(cls, msg):
        logging.critical(msg)
        raise InternalError(msg + " | This is a bug in mictrans, please report it.")


class ConfigCheck(BaseChecker):
    @classmethod
    def handler(cls, msg):
        raise ConfigError(msg)


class ShapeCheck(BaseChecker):
    @classmethod
    def handler(cls, msg):
        raise ShapeError(msg)
