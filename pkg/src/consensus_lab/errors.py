"""Exception hierarchy. The CLI maps these onto exit codes."""

from __future__ import annotations


class ConsensusLabError(Exception):
    """Base class for all library errors."""

    exit_code = 2


class ChannelError(ConsensusLabError):
    pass


class NonStochasticRow(ChannelError):
    pass


class NegativeEntry(ChannelError):
    pass


class UnreachableOutputSymbol(ChannelError):
    pass


class SchemaError(ChannelError):
    pass


class SingletonEffectiveAlphabet(ConsensusLabError):
    pass


class LPFailure(ConsensusLabError):
    exit_code = 3


class NonConvergence(ConsensusLabError):
    exit_code = 3


class ConstructionFailed(ConsensusLabError):
    pass


class TypeInfeasible(ConsensusLabError):
    pass


class BudgetExceeded(ConsensusLabError):
    exit_code = 4
