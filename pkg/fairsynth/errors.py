"""Exception hierarchy shared by the library and the command line."""

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BUDGET = 3
EXIT_GUARD = 4


class FairSynthError(Exception):
    """Base class for every error raised by fairsynth."""

    exit_code = 1


class ConfigError(FairSynthError):
    """Invalid run configuration or role sidecar."""

    exit_code = EXIT_CONFIG


class DatasetError(FairSynthError):
    """Input file could not be turned into a DiscreteTable."""

    exit_code = EXIT_CONFIG


class SchemaMismatchError(FairSynthError):
    """Two tables that must share a schema do not."""

    exit_code = EXIT_CONFIG


class BudgetExceededError(FairSynthError):
    """The privacy ledger went over its budget."""

    exit_code = EXIT_BUDGET


class GuardTrippedError(FairSynthError):
    """A size or memory guard stopped an exponential computation."""

    exit_code = EXIT_GUARD


class SelectionError(FairSynthError):
    """No admissible edge was left while building a tree."""


class DecodeError(FairSynthError):
    """A tree could not be read back as a truth assignment."""


class ReductionError(FairSynthError):
    """A SAT instance violates the invariants the reduction relies on."""

    exit_code = EXIT_CONFIG


class InfeasibleTargetError(FairSynthError):
    """Requested mutual-information targets do not fit the domain size."""
